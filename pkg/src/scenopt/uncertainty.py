"""Uncertainty sets, scenario samplers and the endogenous-to-exogenous rewrite.

Sets are boxes or polytopes ``{u | G u <= g0}``. A decision-dependent set
``V(x) = {v | Gv v + Gx x <= g0}`` becomes decision-independent once an
affine relation ``v = A x + b`` lets x be eliminated: substituting
``x = A^{-1}(v - b)`` gives ``{v | (Gv + K) v <= g0 + K b}`` with
``K = Gx A^{-1}``.
"""
from __future__ import annotations

import csv
import enum
import io
import itertools
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .sizing import BigCount, pd_grid_count
from .solver import SolverConfig, Status, linprog

MEMBERSHIP_TOL = 1e-9


class EmptySetError(ValueError):
    pass


class UnboundedSetError(ValueError):
    pass


class SingularMapError(ValueError):
    pass


class RejectionEfficiencyError(RuntimeError):
    pass


class GridCapError(OverflowError):
    """Grid would exceed the cap; ``count`` carries the size it would need."""

    def __init__(self, count: BigCount, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(f"grid of {count.short_format()} ({count}) scenarios "
                         f"exceeds cap {cap}")


class RankDeficiencyWarning(UserWarning):
    pass


class UncertaintySet:
    """Common interface of Box and Polytope."""

    dim: int

    def contains(self, points, tol=MEMBERSHIP_TOL):
        G, g0 = self.inequalities()
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all(pts @ G.T - g0 <= tol, axis=1)

    def inequalities(self):
        raise NotImplementedError


class Box(UncertaintySet):
    def __init__(self, lower, upper):
        self.lower = np.atleast_1d(np.asarray(lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValueError("lower and upper must be vectors of equal length")
        if np.any(self.lower > self.upper):
            raise EmptySetError("box needs lower <= upper componentwise")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise UnboundedSetError("box bounds must be finite")
        self.dim = self.lower.shape[0]

    @property
    def bounding_box(self):
        return self

    def inequalities(self):
        eye = np.eye(self.dim)
        return np.vstack([eye, -eye]), np.concatenate([self.upper, -self.lower])

    def contains(self, points, tol=MEMBERSHIP_TOL):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all((pts >= self.lower - tol) & (pts <= self.upper + tol), axis=1)

    def __repr__(self):
        return f"Box(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


class Polytope(UncertaintySet):
    """``{u | G u <= g0}``, validated nonempty and bounded at construction.

    The bounding box is computed by 2*dim LPs when not supplied; a supplied
    box is checked to contain the polytope by the same probes.
    """

    def __init__(self, G, g0, bounding_box: Box | None = None,
                 cfg: SolverConfig | None = None):
        G = np.atleast_2d(np.asarray(G, dtype=float))
        g0 = np.atleast_1d(np.asarray(g0, dtype=float))
        if G.shape[0] != g0.shape[0]:
            raise ValueError("G and g0 disagree on the number of rows")
        norms = np.linalg.norm(G, axis=1)
        flat = norms <= 1e-14
        if np.any(g0[flat] < -MEMBERSHIP_TOL):
            raise EmptySetError("a constant row 0 <= g0 is violated")
        self.G, self.g0 = G[~flat], g0[~flat]
        self.dim = G.shape[1]
        cfg = cfg or SolverConfig()
        if self.G.shape[0] == 0:
            raise UnboundedSetError("polytope has no inequalities left; set is all of R^%d" % self.dim)
        probe = linprog(np.zeros(self.dim), self.G, self.g0, cfg)
        if probe.status is Status.INFEASIBLE:
            raise EmptySetError("polytope is empty")
        box = _probe_box(self.G, self.g0, cfg)
        if bounding_box is None:
            bounding_box = box
        elif np.any(box.lower < bounding_box.lower - MEMBERSHIP_TOL) or \
                np.any(box.upper > bounding_box.upper + MEMBERSHIP_TOL):
            raise ValueError("supplied bounding box does not contain the polytope")
        self.bounding_box = bounding_box

    def inequalities(self):
        return self.G, self.g0

    def __repr__(self):
        return f"Polytope(rows={self.G.shape[0]}, dim={self.dim})"


def _probe_box(G, g0, cfg):
    dim = G.shape[1]
    lo, hi = np.empty(dim), np.empty(dim)
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = 1.0
        for sign, out in ((1.0, lo), (-1.0, hi)):
            sol = linprog(sign * e, G, g0, cfg)
            if sol.status is Status.UNBOUNDED:
                raise UnboundedSetError(f"set is unbounded along coordinate {i}")
            if sol.status is not Status.OPTIMAL:
                raise EmptySetError(f"bounding probe failed: {sol.status.value}")
            out[i] = sol.x[i]
    return Box(lo, np.maximum(hi, lo))


class Source(str, enum.Enum):
    RANDOM_UNIFORM = "RandomUniform"
    PD_GRID = "PDGrid"
    EXTERNAL = "External"


@dataclass
class ScenarioSet:
    points: np.ndarray
    source: Source = Source.EXTERNAL
    seed: int | None = None
    names: tuple = ()

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        self.points = pts
        self.source = Source(self.source)
        if not self.names:
            self.names = tuple(f"w{i}" for i in range(pts.shape[1]))
        if len(self.names) != pts.shape[1]:
            raise ValueError("one name per coordinate required")

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def subset(self, indices):
        idx = np.asarray(sorted(indices), dtype=int)
        return ScenarioSet(self.points[idx], self.source, self.seed, self.names)

    def check(self, uset: UncertaintySet, tol=MEMBERSHIP_TOL):
        return bool(np.all(uset.contains(self.points, tol)))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        seed = "" if self.seed is None else str(self.seed)
        buf.write(f"# source={self.source.value} seed={seed}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.names)
        for row in self.points:
            w.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "ScenarioSet":
        """Read from a path or from CSV text (anything containing a newline)."""
        text = source if isinstance(source, str) and "\n" in source else Path(source).read_text()
        meta = {}
        rows = []
        for line in text.splitlines():
            if line.startswith("#"):
                for item in line[1:].split():
                    key, _, value = item.partition("=")
                    meta[key] = value
            elif line.strip():
                rows.append(line)
        reader = list(csv.reader(rows))
        names = tuple(reader[0])
        pts = np.array([[float(v) for v in r] for r in reader[1:]], dtype=float)
        pts = pts.reshape(-1, len(names))
        seed = meta.get("seed") or None
        return cls(pts, Source(meta.get("source", Source.EXTERNAL.value)),
                   int(seed) if seed is not None else None, names)


def derive_seed(base_seed: int, index: int) -> int:
    """Seed for the index-th of several concurrent sampling jobs."""
    return int(base_seed) + int(index)


def sample_uniform(uset: UncertaintySet, count: int, seed: int, names=()) -> ScenarioSet:
    """Draw ``count`` i.i.d. points uniformly from the set.

    Boxes use per-coordinate uniforms; polytopes use rejection from their
    bounding box and fail if a probe batch accepts less than 1e-4 of draws.
    """
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    if isinstance(uset, Box):
        pts = rng.uniform(uset.lower, uset.upper, size=(count, uset.dim))
        return ScenarioSet(pts, Source.RANDOM_UNIFORM, seed, tuple(names))
    box = uset.bounding_box
    accepted = []
    have = 0
    batch = max(10_000, 2 * count)
    first = True
    while have < count:
        cand = rng.uniform(box.lower, box.upper, size=(batch, uset.dim))
        keep = cand[uset.contains(cand, tol=0.0)]
        if first:
            rate = keep.shape[0] / batch
            if rate < 1e-4:
                raise RejectionEfficiencyError(
                    f"acceptance rate {rate:.2e} below 1e-4; polytope is nearly degenerate")
            first = False
            batch = int(min(max(1.2 * (count - have) / rate, 1000), 5_000_000))
        accepted.append(keep)
        have += keep.shape[0]
    pts = np.vstack(accepted)[:count]
    return ScenarioSet(pts, Source.RANDOM_UNIFORM, seed, tuple(names))


def grid_samples(marginals, b: int, cap: int = 10**6, names=()) -> ScenarioSet:
    """Cartesian product of ``b`` evenly spaced points per variable.

    Endpoints are included for ``b >= 2``; ``b == 1`` uses the midpoint.
    Raises GridCapError before allocating when ``b ** m`` exceeds ``cap``.
    """
    if b < 1:
        raise ValueError("b must be a positive integer")
    m = len(marginals)
    count = pd_grid_count(b, m)
    if count.exceeds(cap):
        raise GridCapError(count, cap)
    axes = []
    for lo, hi in marginals:
        if lo > hi:
            raise ValueError("marginal needs lo <= hi")
        axes.append(np.array([(lo + hi) / 2.0]) if b == 1 else np.linspace(lo, hi, b))
    if m == 0:
        pts = np.zeros((1, 0))
    else:
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=1)
    return ScenarioSet(pts, Source.PD_GRID, None, tuple(names))


@dataclass(frozen=True)
class EndogenousSet:
    """``V(x) = {v | Gv v + Gx x - g0 <= 0}``."""

    Gv: np.ndarray
    Gx: np.ndarray
    g0: np.ndarray

    def __post_init__(self):
        Gv = np.atleast_2d(np.asarray(self.Gv, dtype=float))
        Gx = np.atleast_2d(np.asarray(self.Gx, dtype=float))
        g0 = np.atleast_1d(np.asarray(self.g0, dtype=float))
        if not (Gv.shape[0] == Gx.shape[0] == g0.shape[0]) or Gv.shape[0] < 1:
            raise ValueError("Gv, Gx and g0 need the same positive number of rows")
        object.__setattr__(self, "Gv", Gv)
        object.__setattr__(self, "Gx", Gx)
        object.__setattr__(self, "g0", g0)

    @property
    def J(self):
        return self.Gv.shape[1]

    @property
    def n(self):
        return self.Gx.shape[1]

    def contains(self, v, x, tol=MEMBERSHIP_TOL):
        v = np.asarray(v, dtype=float)
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.Gv @ v + self.Gx @ x - self.g0 <= tol))


@dataclass(frozen=True)
class AffineMap:
    """``h(x) = A x + b`` with A of shape (J, n)."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.shape[0] != b.shape[0]:
            raise ValueError("A and b disagree on the output dimension")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def J(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]

    def __call__(self, x):
        return self.A @ np.asarray(x, dtype=float) + self.b

    def is_invertible(self, cond_cap=1e12):
        return self.J == self.n and np.linalg.cond(self.A) < cond_cap

    def inverse(self, v, cond_cap=1e12):
        if not self.is_invertible(cond_cap):
            raise SingularMapError("map is not invertible")
        return np.linalg.solve(self.A, np.asarray(v, dtype=float) - self.b)

    def padded(self, extra: int) -> "AffineMap":
        """Same map on a decision vector with ``extra`` trailing variables."""
        return AffineMap(np.hstack([self.A, np.zeros((self.J, extra))]), self.b)


def reformulate_enu(env: EndogenousSet, h: AffineMap, require_invertible=True,
                    cond_cap=1e12, cfg: SolverConfig | None = None, K=None) -> Polytope:
    """Eliminate the decision from ``V(x)`` through ``v = h(x)``.

    With ``require_invertible=False`` a non-square map is accepted as long as
    the set depends on x only through ``A x`` (``Gx = K A`` for some K).
    A known factor ``K`` may be passed; it is checked, not trusted.
    """
    if env.n != h.n or env.J != h.J:
        raise ValueError(f"set is over (v in R^{env.J}, x in R^{env.n}) but map is "
                         f"R^{h.n} -> R^{h.J}")
    if K is not None:
        K = np.asarray(K, dtype=float)
        scale = max(1.0, float(np.abs(env.Gx).max()))
        if K.shape != (env.Gv.shape[0], h.J) or np.abs(K @ h.A - env.Gx).max() > 1e-9 * scale:
            raise SingularMapError("supplied factor K does not satisfy K A = Gx")
    elif h.is_invertible(cond_cap):
        K = np.linalg.solve(h.A.T, env.Gx.T).T
    elif require_invertible:
        raise SingularMapError(
            f"map must be square and nonsingular (shape {h.A.shape}, "
            f"cond {np.linalg.cond(h.A) if h.J == h.n else np.inf:.3g})")
    else:
        K = env.Gx @ np.linalg.pinv(h.A)
        scale = max(1.0, float(np.abs(env.Gx).max()))
        if np.abs(K @ h.A - env.Gx).max() > 1e-9 * scale:
            raise SingularMapError("set does not depend on x only through h(x)")
    return Polytope(env.Gv + K, env.g0 + K @ h.b, cfg=cfg)


@dataclass
class AffineFit:
    map: AffineMap
    rms: float
    ridge: bool = False


def fit_affine_map(pairs=None, X=None, V=None, ridge=1e-8) -> AffineFit:
    """Least-squares fit of ``v ~ A x + b`` per output coordinate.

    Accepts a list of ``(x, v)`` pairs or the stacked arrays ``X`` and ``V``.
    A rank-deficient design switches to a ridge solve (``ridge`` times the
    identity on the normal matrix) and emits RankDeficiencyWarning.
    """
    if pairs is not None:
        X = np.array([np.atleast_1d(p[0]) for p in pairs], dtype=float)
        V = np.array([np.atleast_1d(p[1]) for p in pairs], dtype=float)
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if V.ndim == 1:
        V = V.reshape(-1, 1)
    N, n = X.shape
    if N < n + 1:
        raise ValueError(f"need at least n + 1 = {n + 1} pairs, got {N}")
    D = np.hstack([X, np.ones((N, 1))])
    used_ridge = np.linalg.matrix_rank(D) < n + 1
    if used_ridge:
        warnings.warn("x samples are not affinely independent; using ridge fallback",
                      RankDeficiencyWarning, stacklevel=2)
        theta = np.linalg.solve(D.T @ D + ridge * np.eye(n + 1), D.T @ V)
    else:
        theta = np.linalg.lstsq(D, V, rcond=None)[0]
    resid = D @ theta - V
    fmap = AffineMap(theta[:n].T, theta[n])
    return AffineFit(fmap, float(np.sqrt(np.mean(resid**2))), bool(used_ridge))
