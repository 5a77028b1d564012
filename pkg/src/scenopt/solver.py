"""Dense LP and convex-quadratic solver.

Programs are in inequality form ``min c.x  s.t.  A x <= b`` with free
variables, optionally with convex quadratic rows ``x'Qx + a'x + c <= 0``.

The LP is solved through its standard-form dual
``min b.y  s.t.  A' y = -c, y >= 0`` with a two-phase revised simplex; the
basis is n x n whatever the number of rows, the simplex multipliers are the
primal point, and basic dual variables are exactly the rows that define the
optimal vertex. Pricing is Dantzig on row-normalized reduced costs and
switches to Bland's rule after a run of degenerate pivots; leaving-variable
ties are always broken by smallest index.

Quadratic rows are handled by Kelley's cutting-plane method.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels

log = logging.getLogger(__name__)


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITER_LIMIT = "IterLimit"


@dataclass(frozen=True)
class SolverConfig:
    feas_tol: float = 1e-8
    cut_tol: float = 1e-6
    active_tol: float = 1e-7
    max_cuts: int = 200  # cutting rounds
    max_pivots: int = 10**6
    verbose: bool = False
    backend: str | None = None  # None: import-time default
    bland_after: int = 50  # consecutive degenerate pivots before Bland pricing
    refactor_every: int = 64

    def __post_init__(self):
        for name in ("feas_tol", "cut_tol", "active_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_cuts < 1 or self.max_pivots < 1:
            raise ValueError("iteration limits must be positive")


@dataclass
class Solution:
    status: Status
    x: np.ndarray
    objective: float
    active_rows: tuple = ()
    iterations: int = 0
    max_violation: float = 0.0
    duals: np.ndarray | None = None
    ray: np.ndarray | None = None
    basis_rows: tuple = ()
    cuts: int = 0
    history: tuple = ()

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass
class _Basis:
    basis: np.ndarray
    Binv: np.ndarray
    xB: np.ndarray
    n_rows: int  # structural rows when the state was produced
    phase2: bool = False


def _kernel(cfg):
    if cfg.backend is None:
        return _kernels
    try:
        return _kernels.backends()[cfg.backend]
    except KeyError:
        raise ValueError(f"backend {cfg.backend!r} is not available") from None


class _Dual:
    """Working arrays of the standard-form dual of one LP."""

    def __init__(self, c, A, b, cfg):
        self.cfg = cfg
        self.k = _kernel(cfg)
        self.n = n = c.shape[0]
        self.M = M = A.shape[0]
        self.c, self.A, self.b = c, A, b
        self.rhs = -c
        sgn = np.where(self.rhs >= 0, 1.0, -1.0)
        self.Aext = np.ascontiguousarray(np.vstack([A, np.diag(sgn)]))
        norms = np.linalg.norm(self.Aext, axis=1)
        self.rownorm = np.where(norms > 0, norms, 1.0)
        self.eligible = np.ones(M + n, dtype=np.uint8)
        self.eligible[M:] = 0
        self.cost2 = np.zeros(M + n)
        self.cost2[:M] = b
        self.cost1 = np.zeros(M + n)
        self.cost1[M:] = 1.0
        self.in_basis = np.zeros(M + n, dtype=np.uint8)
        self.pivots = 0
        self.streak = 0
        self.sgn = sgn

    def cold_start(self):
        M, n = self.M, self.n
        self.basis = np.arange(M, M + n, dtype=np.int64)
        self.Binv = np.diag(self.sgn).copy()
        self.xB = np.abs(self.rhs).astype(float)
        self.in_basis[:] = 0
        self.in_basis[M:] = 1

    def warm_start(self, state: _Basis):
        shift = self.M - state.n_rows
        basis = state.basis.copy()
        basis[basis >= state.n_rows] += shift
        self.basis = basis
        self.Binv = np.empty((self.n, self.n))
        self.xB = np.empty(self.n)
        self.in_basis[:] = 0
        self.in_basis[basis] = 1
        if not self.k.refactor(self.Aext, self.basis, self.rhs, self.Binv, self.xB):
            return False
        return bool(np.all(self.xB >= -1e-9))

    def run(self, cost, budget):
        cfg = self.cfg
        tol = 0.5 * cfg.feas_tol
        if not cfg.verbose:
            status, it, q, self.streak = self.k.simplex_loop(
                self.Aext, cost, self.eligible, self.rhs, self.basis, self.Binv,
                self.xB, self.in_basis, self.rownorm, tol, 1e-9, budget,
                cfg.bland_after, cfg.refactor_every, self.streak)
            self.pivots += it
            return status, q
        for _ in range(budget):
            status, it, q, self.streak = self.k.simplex_loop(
                self.Aext, cost, self.eligible, self.rhs, self.basis, self.Binv,
                self.xB, self.in_basis, self.rownorm, tol, 1e-9, 1,
                cfg.bland_after, 1, self.streak)
            self.pivots += it
            if status != _kernels.ITER_LIMIT:
                return status, q
            log.debug("pivot %d: basis=%s obj=%.12g", self.pivots,
                      self.basis.tolist(), float(cost[self.basis] @ self.xB))
        return _kernels.ITER_LIMIT, -1

    def multipliers(self, cost):
        return np.linalg.solve(self.Aext[self.basis], cost[self.basis])

    def drive_out_artificials(self):
        M = self.M
        for p in np.flatnonzero(self.basis >= M):
            vals = self.A @ self.Binv[p]
            vals[self.in_basis[:M] == 1] = 0.0
            score = np.abs(vals) / self.rownorm[:M]
            if M == 0 or score.max() <= 1e-9:
                continue  # redundant equality of the dual; harmless at zero
            j = int(np.argmax(score))
            alpha = self.Binv @ self.Aext[j]
            _kernels.pivot(self.Aext, self.basis, self.Binv, self.xB,
                           self.in_basis, j, p, alpha)
        self.k.refactor(self.Aext, self.basis, self.rhs, self.Binv, self.xB)

    def state(self):
        return _Basis(self.basis.copy(), self.Binv.copy(), self.xB.copy(),
                      self.M, True)


def linprog(c, A, b, cfg: SolverConfig | None = None, warm: _Basis | None = None,
            _return_state=False):
    """Solve ``min c.x s.t. A x <= b`` with x free. Returns a Solution."""
    cfg = cfg or SolverConfig()
    c = np.ascontiguousarray(c, dtype=float)
    n = c.shape[0]
    A = np.ascontiguousarray(np.asarray(A, dtype=float).reshape(-1, n))
    b = np.ascontiguousarray(b, dtype=float)
    if n < 1:
        raise ValueError("need at least one variable")
    if A.shape[0] != b.shape[0]:
        raise ValueError("A and b disagree on the number of rows")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
        raise ValueError("LP data must be finite")
    # unit-norm rows: same feasible set, better conditioned pivots
    scale = np.linalg.norm(A, axis=1)
    zero = scale == 0.0
    if np.any(b[zero] < -cfg.feas_tol):
        return _done_early(Solution(Status.INFEASIBLE, np.full(n, np.nan), np.nan), _return_state)
    scale[zero] = 1.0
    A_orig, b_orig = A, b
    A = A / scale[:, None]
    b = b / scale
    D = _Dual(c, A, b, cfg)
    K = _kernels

    def done(sol):
        return (sol, D.state() if sol.status is Status.OPTIMAL else None) if _return_state else sol

    need_phase1 = True
    if warm is not None and warm.phase2:
        need_phase1 = not D.warm_start(warm)
        if not need_phase1 and np.any(D.basis >= D.M):
            # a zero artificial is harmless only while its row stays redundant;
            # the new rows may break that
            D.drive_out_artificials()
    if need_phase1:
        D.cold_start()
        status, _ = D.run(D.cost1, cfg.max_pivots)
        if status == K.ITER_LIMIT or status == K.SINGULAR:
            return done(_limit(c, A_orig, b_orig, D))
        infeas = float(D.cost1[D.basis] @ np.maximum(D.xB, 0.0))
        if infeas > 1e-9 * (1.0 + np.abs(c).sum()):
            return done(_unbounded_or_infeasible(c, A_orig, b_orig, D, cfg))
        D.drive_out_artificials()

    for _ in range(3):
        status, _ = D.run(D.cost2, max(1, cfg.max_pivots - D.pivots))
        if status == K.UNBOUNDED:
            x = np.full(n, np.nan)
            return done(Solution(Status.INFEASIBLE, x, np.nan, iterations=D.pivots))
        if status != K.OPTIMAL:
            return done(_limit(c, A_orig, b_orig, D))
        x = D.multipliers(D.cost2)
        viol = float(np.max(A_orig @ x - b_orig, initial=0.0))
        if viol <= cfg.feas_tol:
            break
        # drifted basis inverse: refresh and let pricing continue
        D.k.refactor(D.Aext, D.basis, D.rhs, D.Binv, D.xB)
    y = np.zeros(A.shape[0])
    struct = D.basis < D.M
    y[D.basis[struct]] = np.maximum(D.xB[struct], 0.0)
    y /= scale
    sol = Solution(
        Status.OPTIMAL, x, float(c @ x),
        active_rows=tuple(_active(A_orig @ x - b_orig, cfg.active_tol)),
        iterations=D.pivots, max_violation=max(viol, 0.0), duals=y,
        basis_rows=tuple(sorted(int(j) for j in D.basis[struct])))
    return done(sol)


def _done_early(sol, with_state):
    return (sol, None) if with_state else sol


def _active(residual, tol):
    return [int(i) for i in np.flatnonzero(np.abs(residual) <= tol)]


def _limit(c, A, b, D):
    try:
        x = D.multipliers(D.cost2)
    except np.linalg.LinAlgError:
        x = np.full(c.shape[0], np.nan)
    viol = float(np.max(A @ x - b, initial=0.0)) if np.all(np.isfinite(x)) else np.inf
    return Solution(Status.ITER_LIMIT, x, float(c @ x), iterations=D.pivots,
                    max_violation=viol)


def _unbounded_or_infeasible(c, A, b, D, cfg):
    # Phase-1 multipliers r satisfy A r <= 0 and c.r < 0: an improving ray,
    # so the LP is unbounded exactly when it is feasible.
    ray = D.multipliers(D.cost1)
    ray /= max(np.linalg.norm(ray), 1e-300)
    probe = linprog(np.zeros_like(c), A, b, replace(cfg, verbose=False))
    iters = D.pivots + probe.iterations
    if probe.status is Status.OPTIMAL:
        x = probe.x
        return Solution(Status.UNBOUNDED, x, -np.inf, iterations=iters, ray=ray,
                        max_violation=probe.max_violation)
    return Solution(Status.INFEASIBLE, np.full(c.shape[0], np.nan), np.nan,
                    iterations=iters)


def quad_values(quad, x):
    """Values ``x'Qx + a'x + c`` of every quadratic row at x."""
    return np.array([x @ q.Q @ x + q.a @ x + q.c for q in quad])


def active_rows(prog, x, tol, quad_tol=None):
    """Indices of rows whose residual lies in [-tol, tol].

    Linear rows come first, quadratic rows follow with indices offset by the
    number of linear rows. ``quad_tol`` widens the window for quadratic rows.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (prog.n,):
        raise ValueError(f"x must have dimension {prog.n}")
    lin = prog.A @ x - prog.b if prog.A.shape[0] else np.empty(0)
    rows = _active(lin, tol)
    if prog.quad:
        qt = tol if quad_tol is None else quad_tol
        L = prog.A.shape[0]
        rows += [L + i for i in _active(quad_values(prog.quad, x), qt)]
    return tuple(rows)


def max_violation(prog, x):
    x = np.asarray(x, dtype=float)
    worst = float(np.max(prog.A @ x - prog.b, initial=0.0))
    if prog.quad:
        worst = max(worst, float(np.max(quad_values(prog.quad, x))))
    return worst


def solve_lp(prog, cfg: SolverConfig | None = None) -> Solution:
    """Solve a ConvexProgram that has no quadratic rows."""
    if prog.quad:
        raise ValueError("solve_lp got quadratic rows; use solve_convex")
    return linprog(prog.c, prog.A, prog.b, cfg)


def solve_convex(prog, cfg: SolverConfig | None = None) -> Solution:
    """Kelley cutting planes over the LP core.

    Each round solves the LP relaxation (linear rows plus cuts so far) and
    adds the gradient cut of every quadratic row violated by more than
    ``cut_tol`` at the relaxation optimum. An unbounded relaxation is cut
    along its ray. Stops when all quadratic rows are within ``cut_tol``.
    """
    cfg = cfg or SolverConfig()
    if not prog.quad:
        return solve_lp(prog, cfg)
    n = prog.n
    c = np.asarray(prog.c, dtype=float)
    cut_A, cut_b, cut_src = [], [], []
    history = []
    pivots = 0
    warm = None
    sol = None
    prev_x, stalled = None, 0
    for rnd in range(cfg.max_cuts):
        A = np.vstack([prog.A] + cut_A) if cut_A else prog.A
        b = np.concatenate([prog.b] + cut_b) if cut_b else prog.b
        sol, warm = linprog(c, A, b, cfg, warm=warm, _return_state=True)
        pivots += sol.iterations
        if sol.status is Status.INFEASIBLE:
            return replace(sol, iterations=pivots, cuts=_ncuts(cut_b), history=tuple(history))
        if sol.status is Status.ITER_LIMIT:
            break
        if sol.status is Status.UNBOUNDED:
            new, src = _ray_cuts(prog.quad, sol.x, sol.ray)
            if not new:
                return replace(sol, iterations=pivots, cuts=_ncuts(cut_b), history=tuple(history))
            warm = None
        else:
            history.append(sol.objective)
            qv = quad_values(prog.quad, sol.x)
            log.debug("cut round %d: relaxation %.12g, worst quad %.3e",
                      rnd, sol.objective, qv.max())
            if qv.max() <= cfg.cut_tol:
                return _finish(prog, sol, cfg, pivots, cut_src, history, Status.OPTIMAL)
            # new cuts no longer move the iterate: below the LP's resolution
            if prev_x is not None and np.abs(sol.x - prev_x).max() <= 1e-12 * (1 + np.abs(sol.x).max()):
                stalled += 1
                if stalled >= 3:
                    break
            else:
                stalled = 0
            prev_x = sol.x
            src = [i for i, v in enumerate(qv) if v > cfg.cut_tol]
            new = [_cut(prog.quad[i], sol.x, qv[i]) for i in src]
        cut_A.append(np.array([g for g, _ in new]))
        cut_b.append(np.array([h for _, h in new]))
        cut_src.extend(src)
    if sol is None or sol.status is not Status.OPTIMAL:
        x = sol.x if sol is not None else np.full(n, np.nan)
        return Solution(Status.ITER_LIMIT, x, float(c @ x), iterations=pivots,
                        cuts=_ncuts(cut_b), history=tuple(history))
    return _finish(prog, sol, cfg, pivots, cut_src, history, Status.ITER_LIMIT)


def _ncuts(cut_b):
    return sum(len(h) for h in cut_b)


def _cut(q, x, value):
    g = 2.0 * (q.Q @ x) + q.a
    return g, float(g @ x - value)


def _ray_cuts(quad, x0, ray):
    cuts, src = [], []
    for i, q in enumerate(quad):
        kappa = float(ray @ q.Q @ ray)
        slope = float((2.0 * (q.Q @ x0) + q.a) @ ray)
        if kappa > 1e-12:
            s = max(1.0, 2.0 * abs(slope) / kappa)
        elif slope > 1e-12:
            s = 1.0
        else:
            continue
        y = x0 + s * ray
        cuts.append(_cut(q, y, float(y @ q.Q @ y + q.a @ y + q.c)))
        src.append(i)
    return cuts, src


def _finish(prog, sol, cfg, pivots, cut_src, history, status):
    # basis rows past the linear block are cuts; report the quad row they came from
    x = sol.x
    L = prog.A.shape[0]
    basis = sorted({r if r < L else L + cut_src[r - L] for r in sol.basis_rows})
    return Solution(
        status, x, float(prog.c @ x),
        active_rows=active_rows(prog, x, cfg.active_tol,
                                quad_tol=max(cfg.active_tol, cfg.cut_tol)),
        iterations=pivots, max_violation=max_violation(prog, x),
        basis_rows=tuple(basis), cuts=len(cut_src), history=tuple(history))
