"""Method of moving asymptotes for one inequality constraint.

Sequential convex programming: each step builds a separable rational
approximation of objective and constraint around the current point, whose
curvature is controlled by per-variable asymptotes, and solves it exactly
through its one-dimensional dual. Asymptotes widen while the iterate moves
monotonically and contract when it oscillates.

The constraint is relaxed with an elastic variable y >= 0 priced at
c*y + d*y^2/2, so the subproblem is always feasible; with c well above the
constraint's dual price the optimizer drives y to zero and the constraint
binds exactly. Intended for objectives scaled to order one.
"""

from __future__ import annotations

import numpy as np

from .errors import MmaStepError

_ASY_INIT = 0.5
_ASY_SHRINK = 0.7
_ASY_GROW = 1.2
_ASY_MIN = 0.01
_ASY_MAX = 10.0
_ALBEFA = 0.1
_RAA0 = 1e-5
_DUAL_TOL = 1e-9


class MmaOptimizer:
    """Stateful MMA update for box-bounded minimization with one constraint.

    Parameters
    ----------
    n : int
        Number of design variables.
    xmin, xmax : float or array
        Variable bounds.
    move_limit : float
        Hard cap on the per-variable step, in absolute variable units.
    c, d : float
        Linear and quadratic price of the constraint-relaxation variable.
    """

    def __init__(self, n: int, xmin=-1.0, xmax=1.0, move_limit: float = 0.01,
                 c: float = 10.0, d: float = 1.0):
        self.n = int(n)
        self.xmin = np.broadcast_to(np.asarray(xmin, dtype=float),
                                    (self.n,)).copy()
        self.xmax = np.broadcast_to(np.asarray(xmax, dtype=float),
                                    (self.n,)).copy()
        if not np.all(self.xmax > self.xmin):
            raise ValueError("xmax must exceed xmin everywhere")
        if not move_limit > 0.0:
            raise ValueError("move_limit must be positive")
        self.move_limit = float(move_limit)
        self.c = float(c)
        self.d = float(d)
        self.range = np.maximum(self.xmax - self.xmin, _RAA0)
        self.low = None
        self.upp = None
        self.xold1 = None
        self.xold2 = None
        self.iteration = 0
        self.lam = 0.0
        self.y = 0.0

    def _update_asymptotes(self, x: np.ndarray) -> None:
        if self.iteration < 2:
            self.low = x - _ASY_INIT * self.range
            self.upp = x + _ASY_INIT * self.range
            return
        trend = (x - self.xold1) * (self.xold1 - self.xold2)
        factor = np.ones(self.n)
        factor[trend < 0.0] = _ASY_SHRINK
        factor[trend > 0.0] = _ASY_GROW
        low = x - factor * (self.xold1 - self.low)
        upp = x + factor * (self.upp - self.xold1)
        self.low = np.clip(low, x - _ASY_MAX * self.range,
                           x - _ASY_MIN * self.range)
        self.upp = np.clip(upp, x + _ASY_MIN * self.range,
                           x + _ASY_MAX * self.range)

    def step(self, x, df0dx, fval: float, dfdx) -> np.ndarray:
        """One design update.

        ``df0dx`` is the objective gradient, ``fval`` the constraint value
        (feasible iff <= 0) and ``dfdx`` its gradient, all at ``x``.
        """
        x = np.asarray(x, dtype=float)
        df0dx = np.asarray(df0dx, dtype=float)
        dfdx = np.asarray(dfdx, dtype=float)
        for name, arr in (("x", x), ("df0dx", df0dx), ("dfdx", dfdx)):
            if arr.shape != (self.n,):
                raise ValueError(f"{name} has shape {arr.shape}, "
                                 f"expected ({self.n},)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        if not np.isfinite(fval):
            raise ValueError("fval is not finite")

        self._update_asymptotes(x)
        low, upp = self.low, self.upp

        alpha = np.maximum.reduce([self.xmin, low + _ALBEFA * (x - low),
                                   x - self.move_limit])
        beta = np.minimum.reduce([self.xmax, upp - _ALBEFA * (upp - x),
                                  x + self.move_limit])

        ux = upp - x
        xl = x - low
        base = _RAA0 / self.range
        p0 = ux ** 2 * (np.maximum(df0dx, 0.0)
                        + 0.001 * np.abs(df0dx) + base)
        q0 = xl ** 2 * (np.maximum(-df0dx, 0.0)
                        + 0.001 * np.abs(df0dx) + base)
        p1 = ux ** 2 * np.maximum(dfdx, 0.0)
        q1 = xl ** 2 * np.maximum(-dfdx, 0.0)
        # rhs that makes the approximation interpolate fval at x
        b = float(np.sum(p1 / ux + q1 / xl)) - fval

        def primal(lam: float) -> np.ndarray:
            plam = p0 + lam * p1
            qlam = q0 + lam * q1
            sp = np.sqrt(plam)
            sq = np.sqrt(qlam)
            xs = (sp * low + sq * upp) / (sp + sq)
            return np.clip(xs, alpha, beta)

        def dual_slope(lam: float) -> float:
            xs = primal(lam)
            y = max(0.0, (lam - self.c) / self.d)
            return float(np.sum(p1 / (upp - xs) + q1 / (xs - low))) - b - y

        lam = 0.0
        if dual_slope(0.0) > 0.0:
            hi = 1.0
            for _ in range(200):
                if dual_slope(hi) < 0.0:
                    break
                hi *= 2.0
            else:
                raise MmaStepError("dual bracket did not close; constraint "
                                   "approximation cannot be satisfied")
            lo = 0.0
            for _ in range(200):
                lam = 0.5 * (lo + hi)
                if dual_slope(lam) > 0.0:
                    lo = lam
                else:
                    hi = lam
                if hi - lo <= 1e-14 * max(1.0, hi):
                    break
            lam = 0.5 * (lo + hi)

        slope = dual_slope(lam)
        # complementarity and feasibility of the convex subproblem
        residual = max(abs(lam * slope) / (1.0 + lam), max(0.0, slope))
        if residual > _DUAL_TOL:
            raise MmaStepError(
                f"dual solve left KKT residual {residual:.3e} > {_DUAL_TOL}")

        xnew = primal(lam)
        self.lam = lam
        self.y = max(0.0, (lam - self.c) / self.d)
        self.xold2 = self.xold1
        self.xold1 = x.copy()
        self.iteration += 1
        return xnew
