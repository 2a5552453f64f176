"""Bounded-variable simplex for the LP relaxation of a MilpInstance.

Revised simplex on ``min c.z  s.t.  A z = b,  l <= z <= u`` where ``z``
stacks the structural columns, one logical column per row (bounds encode
the row sense) and, on a cold start, artificial columns for rows the
logical cannot absorb. The basis inverse is kept dense and updated by
rank-one pivots, with periodic refactorization.

Cold starts run the two-phase primal method: Dantzig pricing, switching
to Bland's rule after a run of degenerate pivots until the objective
moves again. Warm starts (branch-and-bound children) begin from the
parent's optimal basis, which stays dual feasible after a bound change,
and re-optimize with the bounded dual simplex followed by a primal pass.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from ..milp import GE, LE, MilpInstance

log = logging.getLogger(__name__)

PIVOT_TOL = 1e-7
DUAL_TOL = 1e-9
PRIMAL_TOL = 1e-9
# bound relaxation of the two-pass (Harris) ratio tests
HARRIS_TOL = 1e-9
REFACTOR_EVERY = 64
DEGENERATE_RUN = 40


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


class SimplexError(RuntimeError):
    """The simplex failed to converge (iteration limit or numerical trouble)."""

    def __init__(self, msg: str, diagnostics: dict | None = None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


@dataclass
class Basis:
    """Basis header plus nonbasic values, tied to one standard form."""

    form: "_StandardForm"
    basis: np.ndarray
    z: np.ndarray


@dataclass
class LpSolution:
    x: np.ndarray
    objective: float
    status: LpStatus
    iterations: int = 0
    diagnostics: dict = field(default_factory=dict)
    basis: Basis | None = None


class _StandardForm:
    """``[A | I | Art]`` with bounds and minimization costs for one instance."""

    def __init__(self, instance: MilpInstance, art_rows: np.ndarray, art_sign: np.ndarray):
        m, n = instance.A.shape
        self.m, self.n = m, n
        self.na = len(art_rows)
        Art = sp.csc_matrix((art_sign, (art_rows, np.arange(self.na))), shape=(m, self.na))
        self.A = sp.hstack([instance.A.tocsc(), sp.identity(m, format="csc"), Art], format="csc")
        self.AT = self.A.T.tocsr()
        self.b = instance.rhs.astype(float)
        self.N = self.A.shape[1]
        sense = instance.sense
        self.logical_lb = np.where(sense == LE, 0.0, np.where(sense == GE, -np.inf, 0.0))
        self.logical_ub = np.where(sense == LE, np.inf, np.where(sense == GE, 0.0, 0.0))
        self.cost = np.concatenate([-instance.objective, np.zeros(m + self.na)])
        self.art_start = n + m

    def bounds(self, lb: np.ndarray, ub: np.ndarray, art_ub: float) -> tuple[np.ndarray, np.ndarray]:
        full_lb = np.concatenate([lb, self.logical_lb, np.zeros(self.na)])
        full_ub = np.concatenate([ub, self.logical_ub, np.full(self.na, art_ub)])
        return full_lb, full_ub

    def column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        lo, hi = self.A.indptr[j], self.A.indptr[j + 1]
        col[self.A.indices[lo:hi]] = self.A.data[lo:hi]
        return col


class _Run:
    """Mutable state of one simplex solve."""

    def __init__(self, form: _StandardForm, lb: np.ndarray, ub: np.ndarray, basis: np.ndarray, z: np.ndarray):
        self.f = form
        self.lb, self.ub = lb, ub
        self.m, self.N = form.m, form.N
        self.basis = basis.copy()
        self.z = z.copy()
        self.is_basic = np.zeros(self.N, dtype=bool)
        self.is_basic[self.basis] = True
        self.binv = np.eye(self.m)
        self.iterations = 0

    def refactor(self):
        if self.m:
            B = self.f.A[:, self.basis].toarray()
            binv = _safe_inverse(B)
            if binv is None:
                binv = _safe_inverse(self._repair(B))
                if binv is None:
                    raise SimplexError("singular basis during refactorization")
            self.binv = binv
        self.recompute_basics()

    def _repair(self, B: np.ndarray) -> np.ndarray:
        """Swap dependent basic columns for logicals of uncovered rows."""
        _, R, perm = la.qr(B, pivoting=True, mode="economic")
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > 1e-9 * max(diag[0], 1.0))) if diag.size else 0
        if rank == self.m:
            return B
        keep = perm[:rank]
        _, _, rows = la.qr(B[:, keep].T, pivoting=True, mode="economic")
        free_rows = rows[rank:]
        for pos, row in zip(perm[rank:], free_rows):
            out = self.basis[pos]
            self.is_basic[out] = False
            # nonbasic again: park at the nearer finite bound
            lo, hi = self.lb[out], self.ub[out]
            v = self.z[out]
            self.z[out] = lo if np.isfinite(lo) and (not np.isfinite(hi) or abs(v - lo) <= abs(hi - v)) else (
                hi if np.isfinite(hi) else 0.0
            )
            q = self.f.n + row
            if self.is_basic[q]:
                raise SimplexError("basis repair found no free logical column")
            self.basis[pos] = q
            self.is_basic[q] = True
        log.debug("repaired basis: %d dependent columns replaced", self.m - rank)
        return self.f.A[:, self.basis].toarray()

    def recompute_basics(self):
        zn = np.where(self.is_basic, 0.0, self.z)
        self.z[self.basis] = self.binv @ (self.f.b - self.f.A @ zn)

    def _limit(self, max_iter, bland):
        raise SimplexError(
            f"iteration limit {max_iter} reached",
            {"iterations": self.iterations, "rows": self.m, "cols": self.N, "bland": bland},
        )

    def pivot(self, r: int, q: int, w: np.ndarray):
        out = self.basis[r]
        row = self.binv[r] / w[r]
        self.binv -= np.outer(w, row)
        self.binv[r] = row
        self.basis[r] = q
        self.is_basic[out] = False
        self.is_basic[q] = True

    def primal(self, c: np.ndarray, max_iter: int) -> LpStatus:
        bland = False
        degenerate = 0
        fixed = self.lb == self.ub
        while True:
            if self.iterations >= max_iter:
                self._limit(max_iter, bland)
            if self.iterations and self.iterations % REFACTOR_EVERY == 0:
                self.refactor()
            y = c[self.basis] @ self.binv
            d = c - self.f.AT @ y
            nb = ~self.is_basic & ~fixed
            at_lb = self.z <= self.lb + PRIMAL_TOL
            at_ub = self.z >= self.ub - PRIMAL_TOL
            between = ~at_lb & ~at_ub
            inc = nb & (d < -DUAL_TOL) & (at_lb | between)
            dec = nb & (d > DUAL_TOL) & (at_ub | between)
            cand = np.flatnonzero(inc | dec)
            if cand.size == 0:
                return LpStatus.OPTIMAL
            q = int(cand[0]) if bland else int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if inc[q] else -1.0

            w = self.binv @ self.f.column(q)
            dz = -direction * w
            t_flip = self.ub[q] - self.lb[q]
            zb = self.z[self.basis]
            blo, bhi = self.lb[self.basis], self.ub[self.basis]
            down = dz < -PIVOT_TOL
            up = dz > PIVOT_TOL
            ratios = np.full(self.m, np.inf)
            ratios[down] = (zb[down] - blo[down]) / -dz[down]
            ratios[up] = (bhi[up] - zb[up]) / dz[up]
            ratios = np.maximum(ratios, 0.0)
            # first pass with bounds relaxed, second picks the largest pivot
            relaxed = np.full(self.m, np.inf)
            relaxed[down] = (zb[down] - blo[down] + HARRIS_TOL) / -dz[down]
            relaxed[up] = (bhi[up] - zb[up] + HARRIS_TOL) / dz[up]
            t_max = relaxed.min() if self.m else np.inf
            leave = -1
            if t_max < t_flip:
                ties = np.flatnonzero(ratios <= t_max)
                if bland:
                    leave = int(ties[np.argmin(self.basis[ties])])
                else:
                    leave = int(ties[np.argmax(np.abs(w[ties]))])
                t = ratios[leave]
            else:
                t = t_flip
            if not np.isfinite(t):
                return LpStatus.UNBOUNDED

            self.iterations += 1
            if t <= 1e-12:
                degenerate += 1
                if degenerate >= DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
                bland = False

            self.z[q] += direction * t
            self.z[self.basis] += dz * t
            if leave < 0:
                self.z[q] = self.ub[q] if direction > 0 else self.lb[q]
                continue
            out = self.basis[leave]
            self.z[out] = self.ub[out] if dz[leave] > 0 else self.lb[out]
            self.pivot(leave, q, w)

    def dual(self, c: np.ndarray, max_iter: int) -> LpStatus:
        """Bounded dual simplex from a dual feasible basis."""
        fixed = self.lb == self.ub
        bland = False
        degenerate = 0
        while True:
            if self.iterations >= max_iter:
                self._limit(max_iter, bland)
            if self.iterations and self.iterations % REFACTOR_EVERY == 0:
                self.refactor()
            zb = self.z[self.basis]
            below = self.lb[self.basis] - zb
            above = zb - self.ub[self.basis]
            infeas = np.maximum(below, above)
            rows = np.flatnonzero(infeas > PRIMAL_TOL * 10)
            if rows.size == 0:
                return LpStatus.OPTIMAL
            r = int(rows[np.argmin(self.basis[rows])]) if bland else int(rows[np.argmax(infeas[rows])])
            to_lower = below[r] > 0

            y = c[self.basis] @ self.binv
            d = c - self.f.AT @ y
            alpha = self.f.AT @ self.binv[r]
            nb = ~self.is_basic & ~fixed
            at_lb = self.z <= self.lb + PRIMAL_TOL
            at_ub = self.z >= self.ub - PRIMAL_TOL
            between = ~at_lb & ~at_ub
            if to_lower:
                ok = (at_lb & (alpha < -PIVOT_TOL)) | (at_ub & (alpha > PIVOT_TOL))
            else:
                ok = (at_lb & (alpha > PIVOT_TOL)) | (at_ub & (alpha < -PIVOT_TOL))
            ok |= between & (np.abs(alpha) > PIVOT_TOL)
            cand = np.flatnonzero(nb & ok)
            if cand.size == 0:
                return LpStatus.INFEASIBLE
            ratios = np.abs(d[cand]) / np.abs(alpha[cand])
            best = ratios.min()
            t_max = ((np.abs(d[cand]) + DUAL_TOL) / np.abs(alpha[cand])).min()
            ties = cand[ratios <= t_max]
            q = int(ties[0]) if bland else int(ties[np.argmax(np.abs(alpha[ties]))])

            self.iterations += 1
            if best <= 1e-12:
                degenerate += 1
                if degenerate >= DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
                bland = False

            w = self.binv @ self.f.column(q)
            out = self.basis[r]
            target = self.lb[out] if to_lower else self.ub[out]
            step = (zb[r] - target) / w[r]
            self.z[q] += step
            self.z[self.basis] -= w * step
            self.z[out] = target
            self.pivot(r, q, w)


def _safe_inverse(B: np.ndarray) -> np.ndarray | None:
    try:
        inv = np.linalg.inv(B)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(inv)) or np.abs(inv).max() > 1e11:
        return None
    return inv


def _cold_start(instance: MilpInstance, lb: np.ndarray, ub: np.ndarray):
    x0 = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
    resid = instance.rhs - instance.A @ x0
    sense = instance.sense
    lo = np.where(sense == GE, -np.inf, 0.0)
    hi = np.where(sense == LE, np.inf, 0.0)
    fits = (resid >= lo - PRIMAL_TOL) & (resid <= hi + PRIMAL_TOL)
    art_rows = np.flatnonzero(~fits)
    art_sign = np.where(resid[art_rows] >= 0, 1.0, -1.0)
    form = _StandardForm(instance, art_rows, art_sign)
    m, n = form.m, form.n
    basis = n + np.arange(m)
    basis[art_rows] = form.art_start + np.arange(form.na)
    z = np.zeros(form.N)
    z[:n] = x0
    # logicals of artificial rows sit at the bound nearest the residual
    z[n + art_rows] = np.clip(0.0, form.logical_lb[art_rows], form.logical_ub[art_rows])
    return form, basis, z


def solve_lp(
    instance: MilpInstance,
    lb: np.ndarray | None = None,
    ub: np.ndarray | None = None,
    *,
    warm: Basis | None = None,
    max_iter: int | None = None,
) -> LpSolution:
    """Solve the continuous relaxation of ``instance`` (maximization).

    ``lb``/``ub`` override the structural bounds, which is how branch and
    bound passes node restrictions. ``warm`` is the basis of a previous
    solve of the same instance under other bounds. The returned objective
    includes the instance's objective constant.
    """
    lb = np.asarray(instance.lb if lb is None else lb, dtype=float)
    ub = np.asarray(instance.ub if ub is None else ub, dtype=float)
    n = instance.n_cols
    nan = np.full(n, np.nan)
    if np.any(lb > ub + PRIMAL_TOL):
        return LpSolution(nan, -np.inf, LpStatus.INFEASIBLE)

    if warm is not None:
        form = warm.form
        full_lb, full_ub = form.bounds(lb, ub, 0.0)
        run = _Run(form, full_lb, full_ub, warm.basis, warm.z)
        nb = ~run.is_basic
        # nonbasic columns follow their (possibly tightened) bounds
        run.z[nb] = np.clip(run.z[nb], full_lb[nb], full_ub[nb])
        run.refactor()
        limit = max_iter or 50 * (form.m + form.N + 10)
        status = run.dual(form.cost, limit)
        diagnostics = {"warm": True, "dual_iterations": run.iterations}
        if status is LpStatus.INFEASIBLE:
            return LpSolution(nan, -np.inf, status, run.iterations, diagnostics)
        run.refactor()
    else:
        form, basis, z = _cold_start(instance, lb, ub)
        full_lb, full_ub = form.bounds(lb, ub, np.inf)
        run = _Run(form, full_lb, full_ub, basis, z)
        signs = np.ones(form.m)
        art_rows = basis >= form.art_start
        signs[art_rows] = np.asarray(form.A[:, basis[art_rows]].sum(axis=0)).ravel()
        run.binv = np.diag(1.0 / signs) if form.m else np.eye(0)
        run.recompute_basics()
        limit = max_iter or 50 * (form.m + form.N + 10)
        diagnostics = {"warm": False, "artificials": form.na}
        if form.na:
            c1 = np.zeros(form.N)
            c1[form.art_start:] = 1.0
            run.primal(c1, limit)
            run.refactor()
            infeas = float(run.z[form.art_start:].sum())
            diagnostics["phase1_iterations"] = run.iterations
            scale = max(1.0, float(np.abs(form.b).max(initial=0.0)))
            if infeas > 1e-8 * scale:
                return LpSolution(nan, -np.inf, LpStatus.INFEASIBLE, run.iterations, diagnostics)
            run.ub[form.art_start:] = 0.0
            run.z[form.art_start:] = np.where(run.is_basic[form.art_start:], run.z[form.art_start:], 0.0)
            _drive_out_artificials(run)

    status = run.primal(form.cost, (max_iter or 50 * (form.m + form.N + 10)) + run.iterations)
    diagnostics["iterations"] = run.iterations
    if status is LpStatus.UNBOUNDED:
        return LpSolution(nan, np.inf, status, run.iterations, diagnostics)
    run.refactor()
    z = np.minimum(np.maximum(run.z, run.lb), run.ub)
    if np.any(np.abs(z - run.z) > 1e-7):
        raise SimplexError("basic solution drifted outside its bounds", diagnostics)
    x = z[:n].copy()
    return LpSolution(
        x, instance.objective_value(x), LpStatus.OPTIMAL, run.iterations, diagnostics,
        Basis(form, run.basis.copy(), z),
    )


def _drive_out_artificials(run: _Run):
    """Pivot zero-level artificials out of the basis where a pivot exists."""
    f = run.f
    for r in range(run.m):
        j = run.basis[r]
        if j < f.art_start:
            continue
        row = f.AT[: f.art_start] @ run.binv[r]
        row[run.is_basic[: f.art_start]] = 0.0
        row[run.lb[: f.art_start] == run.ub[: f.art_start]] = 0.0
        cands = np.flatnonzero(np.abs(row) > 1e-7)
        if cands.size == 0:
            continue
        q = int(cands[np.argmax(np.abs(row[cands]))])
        w = run.binv @ f.column(q)
        run.pivot(r, q, w)
        run.z[j] = 0.0
    run.recompute_basics()
