"""Fused inner loops, JIT-compiled when numba is available.

The pure-numpy fallbacks in scheme.py/equations.py are the reference
implementations; these kernels only fuse the elementwise chains (predicted
states -> admissibility -> contravariant flux accumulation) into single
passes over memory.
"""

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    HAVE_NUMBA = False

    def njit(*a, **k):
        def wrap(f):
            return f

        return wrap


@njit(cache=True, fastmath=True)
def flux_derivative(s, offs, coef, ja, gamma, inv_kfact, Gk, ok):
    """Accumulate Gk = (1/k!) sum_m c_m f~(w_m) with w_m = sum_j m^j s_j.

    s:    (k+1, E, P, 4) scaled time derivatives at flattened points
    ja:   (E, 2, P, 2) metric vectors
    Gk:   (E, 2, P, 4) output, overwritten
    ok:   (E,) admissibility of every off-center predicted state
    """
    nk, E, P, _ = s.shape
    gm1 = gamma - 1.0
    Gk[:] = 0.0
    for e in range(E):
        for p in range(P):
            for t in range(offs.shape[0]):
                cm = coef[t]
                if cm == 0.0:
                    continue
                m = offs[t]
                w0 = s[0, e, p, 0]
                w1 = s[0, e, p, 1]
                w2 = s[0, e, p, 2]
                w3 = s[0, e, p, 3]
                acc = 1.0
                for j in range(1, nk):
                    acc *= m
                    w0 += acc * s[j, e, p, 0]
                    w1 += acc * s[j, e, p, 1]
                    w2 += acc * s[j, e, p, 2]
                    w3 += acc * s[j, e, p, 3]
                pres = gm1 * (w3 - 0.5 * (w1 * w1 + w2 * w2) / w0)
                if m != 0 and not (w0 > 0.0 and pres > 0.0):
                    ok[e] = False
                Ep = w3 + pres
                c = cm * inv_kfact
                for d in range(2):
                    jx = ja[e, d, p, 0]
                    jy = ja[e, d, p, 1]
                    mn = w1 * jx + w2 * jy
                    vt = mn / w0
                    Gk[e, d, p, 0] += c * mn
                    Gk[e, d, p, 1] += c * (w1 * vt + pres * jx)
                    Gk[e, d, p, 2] += c * (w2 * vt + pres * jy)
                    Gk[e, d, p, 3] += c * (Ep * vt)
