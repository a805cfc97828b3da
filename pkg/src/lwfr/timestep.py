"""Time step control: CFL-based steps and embedded-error PID adaptivity.

The embedded estimate compares the volume updates of the full time-averaged
flux and its one-order-lower truncation; the controller multiplies the step
by kappa(eps_{n+1}^{b1/k} eps_n^{b2/k} eps_{n-1}^{b3/k}) with
kappa(x) = 1 + atan(x - 1), accepting when the factor is at least 0.81.
"""

import math

import numpy as np

__all__ = ["stable_dt", "effective_cfl", "PIDController"]


def _speed_sum(eq, geom, u):
    sp = eq.directional_speeds(u)  # |vx|+c, |vy|+c
    lt = np.einsum("edijn,eijn->edij", np.abs(geom.Ja), sp)
    return (lt[:, 0] + lt[:, 1]) / geom.J


def stable_dt(eq, geom, u, degree, cfl):
    """dt = C * (2/(N+1)) / max over nodes of (sum_i lambda_i / J)."""
    return cfl * (2.0 / (degree + 1)) / _speed_sum(eq, geom, u).max()


def effective_cfl(eq, geom, u, degree, dt):
    """Inverse of stable_dt: the CFL number a given dt corresponds to."""
    return dt * _speed_sum(eq, geom, u).max() * (degree + 1) / 2.0


class PIDController:
    """Three-term step-size controller on the embedded error estimate."""

    def __init__(self, order, beta=(0.55, -0.27, 0.05), accept_safety=0.81):
        self.order = order
        self.beta = beta
        self.accept_safety = accept_safety
        self.eps = [1.0, 1.0]  # eps_n, eps_{n-1}

    def factor(self, error_weight):
        """Step multiplier proposed for the estimate; also returns eps_{n+1}."""
        eps_new = 1.0 / error_weight
        k = self.order
        b1, b2, b3 = self.beta
        raw = eps_new ** (b1 / k) * self.eps[0] ** (b2 / k) * self.eps[1] ** (b3 / k)
        return 1.0 + math.atan(raw - 1.0), eps_new

    def accepts(self, factor):
        return factor >= self.accept_safety

    def push(self, eps_new):
        self.eps = [eps_new, self.eps[0]]
