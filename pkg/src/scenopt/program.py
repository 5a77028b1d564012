"""Scenario programs and their deterministic convex counterparts.

A ConstraintTemplate describes rows that are affine in the decision x for
every fixed uncertain input (u, v):

    (Fx + sum_k u_k Fxu[k] + sum_l v_l Fxv[l]) x + Fu u + Fv v - f0 <= 0

plus convex quadratic rows ``x'Qx + a'x + c <= 0``. ``build_deterministic``
replicates the template once per scenario pair and records, for every row,
which scenario and template row it came from.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .uncertainty import AffineMap, ScenarioSet

PSD_FLOOR = -1e-9
FIXED = -1  # provenance scenario index of rows that belong to no scenario


class InfeasibleMappingWarning(UserWarning):
    pass


class Mode(str, enum.Enum):
    PLAIN = "Plain"
    STRICT_MAPPING = "StrictMapping"


@dataclass(frozen=True)
class QuadRow:
    """Convex quadratic row ``x'Qx + a'x + c <= 0``; Q is symmetrized."""

    Q: np.ndarray
    a: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        if Q.shape != (a.shape[0], a.shape[0]):
            raise ValueError("Q must be n x n with n = len(a)")
        Q = 0.5 * (Q + Q.T)
        if Q.size and np.linalg.eigvalsh(Q).min() < PSD_FLOOR * max(1.0, np.abs(Q).max()):
            raise ValueError("quadratic row is not convex: Q is not positive semidefinite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", float(self.c))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return float(x @ self.Q @ x + self.a @ x + self.c)

    def padded(self, extra):
        n = self.a.shape[0]
        Q = np.zeros((n + extra, n + extra))
        Q[:n, :n] = self.Q
        return QuadRow(Q, np.concatenate([self.a, np.zeros(extra)]), self.c)


def _mat(value, rows, cols, name):
    if value is None:
        return np.zeros((rows, cols))
    arr = np.asarray(value, dtype=float).reshape(rows, cols)
    return arr


class ConstraintTemplate:
    """Rows of the scenario constraint ``f(x, u, v) <= 0``.

    ``equality`` marks rows that must hold with equality; each is kept and
    its negation appended, so the template stores inequalities only.
    """

    def __init__(self, Fx, f0, Fu=None, Fv=None, Fxu=None, Fxv=None, quad=(),
                 equality=None, I=None, J=None):
        Fx = np.atleast_2d(np.asarray(Fx, dtype=float))
        m, n = Fx.shape
        f0 = np.asarray(f0, dtype=float).reshape(m)
        if I is None:
            I = np.asarray(Fu).shape[1] if Fu is not None else (len(Fxu) if Fxu is not None else 0)
        if J is None:
            J = np.asarray(Fv).shape[1] if Fv is not None else (len(Fxv) if Fxv is not None else 0)
        Fu = _mat(Fu, m, I, "Fu")
        Fv = _mat(Fv, m, J, "Fv")
        Fxu = np.zeros((I, m, n)) if Fxu is None else np.asarray(Fxu, dtype=float).reshape(I, m, n)
        Fxv = np.zeros((J, m, n)) if Fxv is None else np.asarray(Fxv, dtype=float).reshape(J, m, n)
        if equality is not None:
            eq = np.asarray(equality, dtype=bool).reshape(m)
            Fx = np.vstack([Fx, -Fx[eq]])
            f0 = np.concatenate([f0, -f0[eq]])
            Fu = np.vstack([Fu, -Fu[eq]])
            Fv = np.vstack([Fv, -Fv[eq]])
            Fxu = np.concatenate([Fxu, -Fxu[:, eq]], axis=1)
            Fxv = np.concatenate([Fxv, -Fxv[:, eq]], axis=1)
        self.Fx, self.f0, self.Fu, self.Fv = Fx, f0, Fu, Fv
        self.Fxu, self.Fxv = Fxu, Fxv
        self.quad = tuple(q if isinstance(q, QuadRow) else QuadRow(*q) for q in quad)
        for q in self.quad:
            if q.a.shape[0] != n:
                raise ValueError("quadratic row dimension differs from Fx")

    @property
    def n(self):
        return self.Fx.shape[1]

    @property
    def m(self):
        return self.Fx.shape[0]

    @property
    def I(self):
        return self.Fu.shape[1]

    @property
    def J(self):
        return self.Fv.shape[1]

    @property
    def n_quad(self):
        return len(self.quad)

    @property
    def rows_per_scenario(self):
        return self.m + self.n_quad

    def linear_rows(self, U, V):
        """Stacked ``(A, b)`` for N scenarios: A is (N, m, n), b is (N, m)."""
        A = self.Fx[None] + np.einsum("nk,kmj->nmj", U, self.Fxu) \
            + np.einsum("nl,lmj->nmj", V, self.Fxv)
        b = self.f0[None] - U @ self.Fu.T - V @ self.Fv.T
        return A, b

    def quad_rows(self, U, V):
        """Quadratic rows per scenario (list of tuples of QuadRow)."""
        return [self.quad] * U.shape[0]

    def residuals(self, x, U, V):
        """Row values at x for each scenario, shape (N, m + n_quad)."""
        x = np.asarray(x, dtype=float)
        A, b = self.linear_rows(U, V)
        lin = A @ x - b
        if not self.n_quad:
            return lin
        qv = np.array([[q(x) for q in qs] for qs in self.quad_rows(U, V)])
        return np.hstack([lin, qv.reshape(U.shape[0], -1)])

    def padded(self, extra: int) -> "ConstraintTemplate":
        """Template over a decision vector with ``extra`` trailing zeros."""
        m, n = self.Fx.shape
        pad2 = lambda M: np.concatenate([M, np.zeros(M.shape[:-1] + (extra,))], axis=-1)
        return ConstraintTemplate(pad2(self.Fx), self.f0, self.Fu, self.Fv,
                                  pad2(self.Fxu), pad2(self.Fxv),
                                  [q.padded(extra) for q in self.quad], I=self.I, J=self.J)


@dataclass
class ScenarioProgram:
    """``min objective.x`` subject to the template at every scenario pair.

    Scenario pairs are formed by zipping ``exo_scenarios`` and
    ``enu_scenarios`` (equal lengths); a side may be omitted when the
    template has no inputs of that kind. ``fixed_A x <= fixed_b`` and
    ``fixed_quad`` hold independently of the scenarios. ``dim_hint`` is the
    decision dimension used for sample-size bounds and the support check
    (defaults to the full dimension).
    """

    objective: np.ndarray
    template: ConstraintTemplate
    exo_scenarios: ScenarioSet | None = None
    enu_scenarios: ScenarioSet | None = None
    mapping: AffineMap | None = None
    mode: Mode = Mode.PLAIN
    fixed_A: np.ndarray | None = None
    fixed_b: np.ndarray | None = None
    fixed_quad: tuple = ()
    dim_hint: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.objective = np.atleast_1d(np.asarray(self.objective, dtype=float))
        self.mode = Mode(self.mode)
        n = self.objective.shape[0]
        if self.template.n != n:
            raise ValueError(f"template has {self.template.n} variables, objective {n}")
        if self.fixed_A is None:
            self.fixed_A = np.zeros((0, n))
            self.fixed_b = np.zeros(0)
        self.fixed_A = np.asarray(self.fixed_A, dtype=float).reshape(-1, n)
        self.fixed_b = np.asarray(self.fixed_b, dtype=float).reshape(-1)
        self.fixed_quad = tuple(self.fixed_quad)
        if self.mode is Mode.STRICT_MAPPING and self.mapping is None:
            raise ValueError("StrictMapping mode requires a mapping")
        if self.mapping is not None and self.mapping.n != n:
            raise ValueError("mapping input dimension differs from the decision dimension")

    @classmethod
    def from_pairs(cls, objective, template, pairs, **kwargs):
        """Build from a joint list of ``(u, v)`` scenario pairs."""
        U = np.array([np.atleast_1d(u) for u, _ in pairs], dtype=float).reshape(len(pairs), -1)
        V = np.array([np.atleast_1d(v) for _, v in pairs], dtype=float).reshape(len(pairs), -1)
        return cls(objective, template, ScenarioSet(U), ScenarioSet(V), **kwargs)

    @property
    def n(self):
        return self.objective.shape[0]

    @property
    def support_dim(self):
        return self.dim_hint if self.dim_hint is not None else self.n

    def scenario_arrays(self):
        """``(U, V)`` arrays of the zipped scenario pairs."""
        t = self.template
        sets = [self.exo_scenarios, self.enu_scenarios]
        lengths = {len(s) for s in sets if s is not None}
        if len(lengths) > 1:
            raise ValueError("exogenous and endogenous scenario lists must have equal lengths")
        N = lengths.pop() if lengths else 0
        U = self.exo_scenarios.points if self.exo_scenarios is not None else np.zeros((N, 0))
        V = self.enu_scenarios.points if self.enu_scenarios is not None else np.zeros((N, 0))
        if U.shape[1] != t.I or V.shape[1] != t.J:
            raise ValueError(f"scenario dimensions ({U.shape[1]}, {V.shape[1]}) do not match "
                             f"template inputs ({t.I}, {t.J})")
        return U, V

    @property
    def scenario_count(self):
        return self.scenario_arrays()[0].shape[0]

    def restricted(self, indices) -> "ScenarioProgram":
        """Copy keeping only the scenarios at ``indices``."""
        idx = sorted(set(int(i) for i in indices))
        exo = self.exo_scenarios.subset(idx) if self.exo_scenarios is not None else None
        enu = self.enu_scenarios.subset(idx) if self.enu_scenarios is not None else None
        return replace(self, exo_scenarios=exo, enu_scenarios=enu,
                       meta=dict(self.meta, restricted_from=self.scenario_count))


@dataclass(frozen=True)
class ConvexProgram:
    """``min c.x  s.t.  A x <= b,  q(x) <= 0 for q in quad``.

    ``provenance[r] = (scenario, template_row)`` for every linear row r
    followed by every quadratic row; scenario is -1 for fixed rows.
    """

    n: int
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    quad: tuple = ()
    provenance: np.ndarray = None
    dim_hint: int | None = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(self.n)
        A = np.asarray(self.A, dtype=float).reshape(-1, self.n)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        prov = self.provenance
        if prov is None:
            prov = np.column_stack([np.full(A.shape[0] + len(self.quad), FIXED),
                                    np.arange(A.shape[0] + len(self.quad))])
        prov = np.asarray(prov, dtype=np.int64).reshape(-1, 2)
        if prov.shape[0] != A.shape[0] + len(self.quad):
            raise ValueError("provenance must cover every row exactly once")
        for arr in (c, A, b, prov):
            arr.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "quad", tuple(self.quad))
        object.__setattr__(self, "provenance", prov)

    @property
    def n_rows(self):
        return self.A.shape[0] + len(self.quad)

    def dump(self, path=None) -> str:
        lines = ["SCENOPT-CP 1", f"N {self.n}",
                 "OBJECTIVE " + " ".join(map(repr, map(float, self.c)))]
        for row, rhs in zip(self.A, self.b):
            lines.append("ROW " + " ".join(map(repr, map(float, row))) + f" <= {float(rhs)!r}")
        for q in self.quad:
            lines.append("QROW " + " ".join(map(repr, map(float, q.Q.ravel())))
                         + " | " + " ".join(map(repr, map(float, q.a))) + f" | {q.c!r}")
        for s, r in self.provenance:
            lines.append(f"PROV {int(s)} {int(r)}")
        if self.dim_hint is not None:
            lines.append(f"DIM {self.dim_hint}")
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def load(cls, source) -> "ConvexProgram":
        """Parse the text produced by ``dump`` (path or text)."""
        text = source if isinstance(source, str) and "\n" in source else Path(source).read_text()
        n = None
        c, rows, rhs, quads, prov, dim = None, [], [], [], [], None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, rest = line.partition(" ")
            try:
                if key == "SCENOPT-CP":
                    continue
                if key == "N":
                    n = int(rest)
                elif key == "OBJECTIVE":
                    c = [float(v) for v in rest.split()]
                elif key == "ROW":
                    lhs, _, r = rest.partition("<=")
                    rows.append([float(v) for v in lhs.split()])
                    rhs.append(float(r))
                elif key == "QROW":
                    qpart, apart, cpart = rest.split("|")
                    qv = [float(v) for v in qpart.split()]
                    k = int(round(len(qv) ** 0.5))
                    quads.append(QuadRow(np.array(qv).reshape(k, k),
                                         [float(v) for v in apart.split()], float(cpart)))
                elif key == "PROV":
                    s, r = rest.split()
                    prov.append((int(s), int(r)))
                elif key == "DIM":
                    dim = int(rest)
                else:
                    raise ValueError(f"unknown record {key!r}")
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
        if n is None or c is None:
            raise ValueError("missing N or OBJECTIVE record")
        return cls(n, c, np.array(rows, dtype=float).reshape(-1, n), rhs, tuple(quads),
                   np.array(prov, dtype=np.int64).reshape(-1, 2) if prov else None, dim)


def build_deterministic(sp: ScenarioProgram) -> ConvexProgram:
    """Instantiate the template once per scenario pair.

    Row order: fixed linear rows, then per scenario its template rows
    followed (StrictMapping) by ``A x + b <= v`` and ``-(A x + b) <= -v``;
    then fixed quadratic rows and per-scenario quadratic rows. Template row
    indices of quadratic rows continue after the linear ones, and mapping
    rows after the quadratic ones.
    """
    t = sp.template
    U, V = sp.scenario_arrays()
    N = U.shape[0]
    if N == 0 and t.rows_per_scenario > 0:
        raise ValueError("scenario program has no scenarios")
    n = sp.n
    A_s, b_s = t.linear_rows(U, V)
    m = t.m
    blocks_A = [A_s]
    blocks_b = [b_s]
    tmpl_idx = [np.arange(m)]
    if sp.mode is Mode.STRICT_MAPPING:
        h = sp.mapping
        if V.shape[1] != h.J:
            raise ValueError("mapping output dimension differs from the endogenous inputs")
        if N > 1 and np.unique(V, axis=0).shape[0] > 1:
            warnings.warn("StrictMapping with more than one distinct endogenous scenario "
                          "forces h(x) to equal each of them; the program is infeasible",
                          InfeasibleMappingWarning, stacklevel=2)
        J = h.J
        blocks_A.append(np.broadcast_to(np.vstack([h.A, -h.A]), (N, 2 * J, n)))
        blocks_b.append(np.hstack([V - h.b, h.b - V]))
        tmpl_idx.append(m + t.n_quad + np.arange(2 * J))
    A_scen = np.concatenate(blocks_A, axis=1)
    b_scen = np.concatenate(blocks_b, axis=1)
    per = A_scen.shape[1]
    idx_row = np.concatenate(tmpl_idx)
    A = np.vstack([sp.fixed_A, A_scen.reshape(N * per, n)])
    b = np.concatenate([sp.fixed_b, b_scen.reshape(N * per)])
    nf = sp.fixed_A.shape[0]
    prov = [np.column_stack([np.full(nf, FIXED), np.arange(nf)]),
            np.column_stack([np.repeat(np.arange(N), per), np.tile(idx_row, N)])]
    quads = list(sp.fixed_quad)
    prov.append(np.column_stack([np.full(len(sp.fixed_quad), FIXED),
                                 nf + np.arange(len(sp.fixed_quad))]))
    if t.n_quad:
        for j, qs in enumerate(t.quad_rows(U, V)):
            quads.extend(qs)
            prov.append(np.column_stack([np.full(len(qs), j), m + np.arange(len(qs))]))
    return ConvexProgram(n, sp.objective, A, b, tuple(quads), np.vstack(prov),
                         sp.dim_hint)


def epigraph_objective(sp: ScenarioProgram, cost) -> ScenarioProgram:
    """Move a convex quadratic cost into the constraints: ``min t  s.t.  cost(x) <= t``.

    ``cost`` is a QuadRow (or ``(Q, a, c)``) over the current decision
    vector; t is appended as the last variable and becomes the objective.
    """
    q = cost if isinstance(cost, QuadRow) else QuadRow(*cost)
    if q.a.shape[0] != sp.n:
        raise ValueError("cost dimension differs from the decision dimension")
    n = sp.n
    padded = q.padded(1)
    a = padded.a.copy()
    a[n] = -1.0
    epi = QuadRow(padded.Q, a, padded.c)
    objective = np.zeros(n + 1)
    objective[n] = 1.0
    return replace(
        sp,
        objective=objective,
        template=sp.template.padded(1),
        mapping=sp.mapping.padded(1) if sp.mapping is not None else None,
        fixed_A=np.hstack([sp.fixed_A, np.zeros((sp.fixed_A.shape[0], 1))]),
        fixed_quad=tuple(r.padded(1) for r in sp.fixed_quad) + (epi,),
        dim_hint=None if sp.dim_hint is None else sp.dim_hint + 1,
    )
