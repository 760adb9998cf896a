"""Manufactured solution pair for the complex Landau equation.

The field ``u = u1 + i u2`` solves

    du/dt = u + (1 + i a) lap u - (1 + i b) |u|^2 u + f

with forcing ``f = f1 + i f2`` chosen so that

    u1 = c11 exp(-cl t) sin(2 pi r y) (cos(2 pi l x) - 1)
    u2 = c12 exp(c2 sin(cl t)) sin(2 pi r x) sin(2 pi l y)

is exact. Both parts vanish on the boundary of the unit square for integer
``r`` and ``l``. All evaluators broadcast over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ExactSolution:
    c11: float = 1.0
    c12: float = 1.0
    cl: float = 1.0
    c2: float = 0.4
    r: float = 1.0
    l: float = 1.0

    def real(self, x, y, t):
        return self.c11 * np.exp(-t * self.cl) * np.sin(TWO_PI * self.r * y) * (np.cos(TWO_PI * self.l * x) - 1.0)

    def imag(self, x, y, t):
        return (
            self.c12
            * np.exp(self.c2 * np.sin(self.cl * t))
            * np.sin(TWO_PI * self.r * x)
            * np.sin(TWO_PI * self.l * y)
        )

    def dt_real(self, x, y, t):
        return -self.cl * self.real(x, y, t)

    def dt_imag(self, x, y, t):
        return self.c2 * self.cl * np.cos(self.cl * t) * self.imag(x, y, t)

    def lap_real(self, x, y, t):
        k = TWO_PI**2
        cos_part = self.c11 * np.exp(-t * self.cl) * np.sin(TWO_PI * self.r * y) * np.cos(TWO_PI * self.l * x)
        return -k * self.r**2 * self.real(x, y, t) - k * self.l**2 * cos_part

    def lap_imag(self, x, y, t):
        return -(TWO_PI**2) * (self.r**2 + self.l**2) * self.imag(x, y, t)

    def forcing_real(self, a, b, x, y, t):
        u, v = self.real(x, y, t), self.imag(x, y, t)
        mod = u * u + v * v
        return self.dt_real(x, y, t) - u - self.lap_real(x, y, t) + a * self.lap_imag(x, y, t) + mod * (u - b * v)

    def forcing_imag(self, a, b, x, y, t):
        u, v = self.real(x, y, t), self.imag(x, y, t)
        mod = u * u + v * v
        return self.dt_imag(x, y, t) - v - self.lap_imag(x, y, t) - a * self.lap_real(x, y, t) + mod * (v + b * u)

    def l2_norm_sq(self, t):
        """Closed-form squared L2(unit square) norms ``(|u1|^2, |u2|^2)`` at ``t``.

        Valid for positive integer ``r`` and ``l``.
        """
        n1 = self.c11**2 * np.exp(-2.0 * self.cl * t) * 0.75
        n2 = self.c12**2 * np.exp(2.0 * self.c2 * np.sin(self.cl * t)) * 0.25
        return n1, n2


DEFAULT = ExactSolution()


def _part(which: str) -> str:
    w = str(which).lower()
    if w in ("real", "re", "u1", "1"):
        return "real"
    if w in ("imag", "im", "u2", "2"):
        return "imag"
    raise ValueError(f"which must be 'real' or 'imag', got {which!r}")


def eval_exact(which, x, y, t, solution: ExactSolution = DEFAULT):
    return getattr(solution, _part(which))(x, y, t)


def eval_forcing(which, a, b, x, y, t, solution: ExactSolution = DEFAULT):
    return getattr(solution, "forcing_" + _part(which))(a, b, x, y, t)


def initial_fields(space, solution: ExactSolution = DEFAULT):
    """L2 projections of both exact parts at t = 0."""
    u1 = space.project_l2(lambda x, y: solution.real(x, y, 0.0))
    u2 = space.project_l2(lambda x, y: solution.imag(x, y, 0.0))
    return u1, u2
