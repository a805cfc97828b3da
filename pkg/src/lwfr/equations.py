"""Compressible Euler equations in 2-D, conservative variables (rho, mx, my, E).

All functions are vectorized: the conserved state sits in the trailing axis
of length 4 and every other axis is broadcast.
"""

import numpy as np

__all__ = ["Euler"]


class Euler:
    """Ideal-gas Euler equations with constant specific-heat ratio."""

    nvars = 4

    def __init__(self, gamma=1.4):
        self.gamma = float(gamma)

    def pressure(self, u):
        ke = 0.5 * (u[..., 1] ** 2 + u[..., 2] ** 2) / u[..., 0]
        return (self.gamma - 1.0) * (u[..., 3] - ke)

    def primitive(self, u):
        """(rho, vx, vy, p) from conserved state."""
        rho = u[..., 0]
        return np.stack(
            [rho, u[..., 1] / rho, u[..., 2] / rho, self.pressure(u)], axis=-1
        )

    def conserved(self, q):
        """Conserved state from primitive (rho, vx, vy, p)."""
        rho, vx, vy, p = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
        E = p / (self.gamma - 1.0) + 0.5 * rho * (vx * vx + vy * vy)
        return np.stack([rho, rho * vx, rho * vy, E], axis=-1)

    def sound_speed(self, u):
        return np.sqrt(self.gamma * self.pressure(u) / u[..., 0])

    def flux(self, u):
        """Physical flux tensor, shape u.shape[:-1] + (2, 4)."""
        rho = u[..., 0]
        vx = u[..., 1] / rho
        vy = u[..., 2] / rho
        p = self.pressure(u)
        Ep = u[..., 3] + p
        f = np.empty(u.shape[:-1] + (2, 4))
        f[..., 0, 0] = u[..., 1]
        f[..., 0, 1] = u[..., 1] * vx + p
        f[..., 0, 2] = u[..., 2] * vx
        f[..., 0, 3] = Ep * vx
        f[..., 1, 0] = u[..., 2]
        f[..., 1, 1] = u[..., 1] * vy
        f[..., 1, 2] = u[..., 2] * vy + p
        f[..., 1, 3] = Ep * vy
        return f

    def contravariant_flux(self, u, ja):
        """Flux contracted with the (non-unit) metric vectors Ja.

        u: (E, ns, ns, 4); ja: (E, 2, ns, ns, 2).  Returns (E, 2, ns, ns, 4)
        without materializing the physical flux tensor.
        """
        rho = u[..., 0]
        m1, m2 = u[..., 1], u[..., 2]
        p = self.pressure(u)
        Ep = u[..., 3] + p
        out = np.empty(ja.shape[:-1] + (4,))
        for d in range(2):
            jx, jy = ja[:, d, ..., 0], ja[:, d, ..., 1]
            mn = m1 * jx + m2 * jy
            vt = mn / rho
            out[:, d, ..., 0] = mn
            out[:, d, ..., 1] = m1 * vt + p * jx
            out[:, d, ..., 2] = m2 * vt + p * jy
            out[:, d, ..., 3] = Ep * vt
        return out

    def normal_flux(self, u, nx, ny):
        """Flux dotted with the unit normal (nx, ny)."""
        rho = u[..., 0]
        vn = (u[..., 1] * nx + u[..., 2] * ny) / rho
        p = self.pressure(u)
        f = np.empty_like(u)
        f[..., 0] = rho * vn
        f[..., 1] = u[..., 1] * vn + p * nx
        f[..., 2] = u[..., 2] * vn + p * ny
        f[..., 3] = (u[..., 3] + p) * vn
        return f

    def wave_speed(self, ul, ur, nx, ny):
        """Rusanov signal speed: max |v.n| plus max sound speed of the pair."""
        vnl = np.abs((ul[..., 1] * nx + ul[..., 2] * ny) / ul[..., 0])
        vnr = np.abs((ur[..., 1] * nx + ur[..., 2] * ny) / ur[..., 0])
        return np.maximum(vnl, vnr) + np.maximum(self.sound_speed(ul), self.sound_speed(ur))

    def rusanov(self, ul, ur, nx, ny):
        """First-order Rusanov flux for the unit normal (nx, ny), left-to-right."""
        lam = self.wave_speed(ul, ur, nx, ny)
        fl = self.normal_flux(ul, nx, ny)
        fr = self.normal_flux(ur, nx, ny)
        return 0.5 * (fl + fr) - 0.5 * lam[..., None] * (ur - ul)

    def is_admissible(self, u):
        """True where density and pressure are both strictly positive."""
        return (u[..., 0] > 0.0) & (self.pressure(u) > 0.0)

    def directional_speeds(self, u):
        """|vx| + c and |vy| + c, shape u.shape[:-1] + (2,)."""
        c = self.sound_speed(u)
        rho = u[..., 0]
        return np.stack(
            [np.abs(u[..., 1] / rho) + c, np.abs(u[..., 2] / rho) + c], axis=-1
        )

    def reflect(self, u, nx, ny):
        """Mirror the velocity about a wall with unit normal (nx, ny)."""
        vn = u[..., 1] * nx + u[..., 2] * ny
        out = u.copy()
        out[..., 1] = u[..., 1] - 2.0 * vn * nx
        out[..., 2] = u[..., 2] - 2.0 * vn * ny
        return out
