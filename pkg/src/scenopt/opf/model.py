"""Adaptive DC optimal power flow as a scenario program.

Decision vector ``x = (p_base[G], beta[G], t)``. In scenario xi (MW load
deviation per uncertain bus) generator g produces ``p_base_g + beta_g *
sum(xi)``. Line flows use slack-referenced PTDFs, so bus angles are
eliminated and the power balance reduces to the global rows
``sum(p_base) = sum(load)`` and ``sum(beta) = 1``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..posterior import ViolationReport, empirical_violation
from ..program import ConstraintTemplate, QuadRow, ScenarioProgram
from ..solver import Solution
from ..uncertainty import (AffineMap, Box, EndogenousSet, Polytope, ScenarioSet,
                           fit_affine_map, reformulate_enu, sample_uniform)
from .network import PowerNetwork


class InfeasibleBoxError(ValueError):
    pass


@dataclass(frozen=True)
class OpfConfig:
    """Modelling defaults.

    delta: half-width of the load-deviation box as a fraction of each load.
    kappa: price sensitivity of the endogenous set; deviations are centred
        on ``kappa * h(x)`` for a fitted mapping h.
    uncertain: which buses carry uncertain load, ``loaded`` or ``pq``.
    feas_tol: MW tolerance for out-of-sample limit checks.
    """

    delta: float = 0.1
    kappa: float = 0.2
    uncertain: str = "loaded"
    feas_tol: float = 1e-6

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not 0 <= self.kappa < 1:
            raise ValueError("kappa must lie in [0, 1)")


@dataclass
class AdaptiveOpfDecision:
    p_base: np.ndarray
    beta: np.ndarray
    t: float

    @property
    def vector(self):
        return np.concatenate([self.p_base, self.beta, [self.t]])

    @classmethod
    def from_vector(cls, x, G):
        x = np.asarray(x, dtype=float)
        return cls(x[:G].copy(), x[G:2 * G].copy(), float(x[2 * G]))

    def to_dict(self):
        return {"p_base": [float(v) for v in self.p_base],
                "beta": [float(v) for v in self.beta], "t": self.t}


def decision_from_solution(net: PowerNetwork, sol: Solution) -> AdaptiveOpfDecision:
    return AdaptiveOpfDecision.from_vector(sol.x, len(net.generators))


class OpfTemplate(ConstraintTemplate):
    """Generator and line limits per scenario, plus the cost epigraph row.

    The cost row depends on the scenario through ``sum(xi)``, so quadratic
    rows are generated per scenario instead of being stored once.
    """

    def __init__(self, net: PowerNetwork, buses, include_cost=True, endogenous=False):
        G = len(net.generators)
        n = 2 * G + 1
        m_u = len(buses)
        gens = net.generators
        pmax = np.array([g.pmax for g in gens])
        pmin = np.array([g.pmin for g in gens])
        I_G = np.eye(G)
        Z = np.zeros((G, G))
        z = np.zeros((G, 1))
        # generator limits: p + beta S <= pmax, -p - beta S <= -pmin
        gx = np.vstack([np.hstack([I_G, Z, z]), np.hstack([-I_G, Z, z])])
        gxs = np.vstack([np.hstack([Z, I_G, z]), np.hstack([Z, -I_G, z])])
        gu = np.zeros((2 * G, m_u))
        gf = np.concatenate([pmax, -pmin])
        # line limits on flows H (Cg (p + beta S) - load - M xi)
        H = net.ptdf()
        limit = np.array([l.flow_limit for l in net.lines])
        lim = np.isfinite(limit)
        H = H[lim]
        HC = H @ net.gen_matrix()
        HM = H[:, buses]
        base = H @ net.load
        L = HC.shape[0]
        zL = np.zeros((L, G))
        zl = np.zeros((L, 1))
        lx = np.vstack([np.hstack([HC, zL, zl]), np.hstack([-HC, zL, zl])])
        lxs = np.vstack([np.hstack([zL, HC, zl]), np.hstack([zL, -HC, zl])])
        lu = np.vstack([-HM, HM])
        lf = np.concatenate([limit[lim] + base, limit[lim] - base])
        Fx = np.vstack([gx, lx])
        Fxs = np.vstack([gxs, lxs])
        Fu = np.vstack([gu, lu])
        f0 = np.concatenate([gf, lf])
        Fxu = np.broadcast_to(Fxs, (m_u,) + Fxs.shape).copy()
        if endogenous:
            super().__init__(Fx, f0, Fv=Fu, Fxv=Fxu, I=0, J=m_u)
        else:
            super().__init__(Fx, f0, Fu=Fu, Fxu=Fxu, I=m_u, J=0)
        self.net = net
        self.buses = list(buses)
        self.include_cost = include_cost
        self.endogenous = endogenous
        self.G = G
        self._a2 = np.array([g.cost_a2 for g in gens])
        self._a1 = np.array([g.cost_a for g in gens])
        self._a0 = float(sum(g.cost_a0 for g in gens))
        # cost rows are divided by the full-output cost so that cut_tol is relative
        self.cost_scale = max(1.0, float(np.sum(self._a2 * pmax**2 + np.abs(self._a1) * pmax))
                              + abs(self._a0))
        self.n_gen_rows = 2 * G
        self.n_line_rows = 2 * L

    @property
    def n_quad(self):
        return 1 if self.include_cost else 0

    def cost_row(self, S: float) -> QuadRow:
        """``(cost(p_base + beta S) - t) / cost_scale <= 0`` for total deviation S."""
        G = self.G
        W = np.zeros((G, 2 * G + 1))
        W[:, :G] = np.eye(G)
        W[:, G:2 * G] = S * np.eye(G)
        Q = W.T @ (self._a2[:, None] * W)
        a = W.T @ self._a1
        a[2 * G] = -1.0
        s = self.cost_scale
        return QuadRow(Q / s, a / s, self._a0 / s)

    def quad_rows(self, U, V):
        if not self.include_cost:
            return [()] * U.shape[0]
        xi = V if self.endogenous else U
        return [(self.cost_row(float(s)),) for s in xi.sum(axis=1)]

    def padded(self, extra):
        raise NotImplementedError("the OPF template already carries its epigraph variable")


def _fixed_rows(net: PowerNetwork):
    G = len(net.generators)
    n = 2 * G + 1
    pmax = np.array([g.pmax for g in net.generators])
    pmin = np.array([g.pmin for g in net.generators])
    rows, rhs = [], []

    def add(row, r):
        rows.append(row)
        rhs.append(r)

    ones_p = np.zeros(n)
    ones_p[:G] = 1.0
    ones_b = np.zeros(n)
    ones_b[G:2 * G] = 1.0
    add(ones_p, net.total_load)
    add(-ones_p, -net.total_load)
    add(ones_b, 1.0)
    add(-ones_b, -1.0)
    for g in range(G):
        e = np.zeros(n)
        e[G + g] = 1.0
        add(-e, 0.0)
        add(e, 1.0)
    for g in range(G):
        e = np.zeros(n)
        e[g] = 1.0
        add(e, pmax[g])
        add(-e, -pmin[g])
    return np.array(rows), np.array(rhs)


def enu_set(net: PowerNetwork, mapping: AffineMap, cfg: OpfConfig | None = None):
    """``V(x) = {xi : |xi_k - kappa h_k(x)| <= delta load_k}`` and its factor K."""
    cfg = cfg or OpfConfig()
    buses = net.load_buses(cfg.uncertain)
    m = len(buses)
    if mapping.J != m:
        raise ValueError(f"mapping has {mapping.J} outputs for {m} uncertain loads")
    width = cfg.delta * np.abs(net.load[buses])
    kap = np.full(m, cfg.kappa)
    K = np.vstack([-np.diag(kap), np.diag(kap)])
    env = EndogenousSet(np.vstack([np.eye(m), -np.eye(m)]), K @ mapping.A,
                        np.concatenate([width + kap * mapping.b, width - kap * mapping.b]))
    return env, K


def load_uncertainty(net: PowerNetwork, mapping: AffineMap | None = None,
                     cfg: OpfConfig | None = None):
    """Set that load-deviation scenarios are drawn from.

    Without a mapping it is the box ``|xi_k| <= delta load_k``; with one it is
    the reformulated endogenous set.
    """
    cfg = cfg or OpfConfig()
    buses = net.load_buses(cfg.uncertain)
    width = cfg.delta * np.abs(net.load[buses])
    if mapping is None:
        return Box(-width, width)
    env, K = enu_set(net, mapping, cfg)
    return reformulate_enu(env, mapping, require_invertible=False, K=K)


def sample_load_scenarios(net, count, seed, mapping=None, cfg=None) -> ScenarioSet:
    cfg = cfg or OpfConfig()
    names = tuple(f"xi{net.buses[i].id}" for i in net.load_buses(cfg.uncertain))
    return sample_uniform(load_uncertainty(net, mapping, cfg), count, seed, names)


def synthetic_history(net: PowerNetwork, count: int, seed: int, cfg: OpfConfig | None = None,
                      sensitivity: float = 0.5, noise: float = 0.01):
    """Past (decision, load deviation) pairs from a price-responsive load model.

    Deviations respond to the mean marginal cost of the base dispatch:
    ``xi_k = -sensitivity * delta * load_k * (lambda(x) / lambda_ref - 1)``
    plus Gaussian noise, where lambda_ref is the value at mid-range output.
    """
    cfg = cfg or OpfConfig()
    rng = np.random.default_rng(seed)
    gens = net.generators
    G = len(gens)
    buses = net.load_buses(cfg.uncertain)
    pl = net.load[buses]
    pmin = np.array([g.pmin for g in gens])
    pmax = np.array([g.pmax for g in gens])
    a1 = np.array([g.cost_a for g in gens])
    a2 = np.array([g.cost_a2 for g in gens])
    lam = lambda p: np.mean(a1 + 2 * a2 * p, axis=-1)
    lam_ref = max(lam(0.5 * (pmin + pmax)), 1e-9)
    P = rng.uniform(pmin, pmax, size=(count, G))
    B = rng.dirichlet(np.ones(G), size=count)
    T = rng.uniform(0.0, 1.0, size=(count, 1)) * float(np.sum(a1 * pmax + a2 * pmax**2))
    X = np.hstack([P, B, T])
    resp = -sensitivity * cfg.delta * pl[None, :] * (lam(P)[:, None] / lam_ref - 1.0)
    V = resp + noise * cfg.delta * np.abs(pl)[None, :] * rng.standard_normal((count, len(buses)))
    return X, V


def fitted_mapping(net, seed=0, count=None, cfg=None) -> AffineMap:
    """Affine load-response map fitted to ``synthetic_history``.

    Only the base dispatch enters the fit (participation factors always sum
    to one, which would make the design rank-deficient); the returned map
    has zero coefficients on beta and t.
    """
    G = len(net.generators)
    count = count or max(20 * (G + 1), 200)
    X, V = synthetic_history(net, count, seed, cfg)
    fit = fit_affine_map(X=X[:, :G], V=V).map
    return fit.padded(G + 1)


def check_capacity(net: PowerNetwork, xi: np.ndarray):
    """Raise InfeasibleBoxError when some scenario exceeds total generation limits."""
    S = np.asarray(xi, dtype=float).reshape(len(xi), -1).sum(axis=1) if len(xi) else np.zeros(1)
    cap_hi = sum(g.pmax for g in net.generators)
    cap_lo = sum(g.pmin for g in net.generators)
    need_hi = net.total_load + float(S.max())
    need_lo = net.total_load + float(S.min())
    if need_hi > cap_hi:
        raise InfeasibleBoxError(f"load plus largest deviation {need_hi:g} MW exceeds total "
                                 f"capacity {cap_hi:g} MW")
    if need_lo < cap_lo:
        raise InfeasibleBoxError(f"load plus smallest deviation {need_lo:g} MW is below total "
                                 f"minimum output {cap_lo:g} MW")


def build_adaptive_opf(net: PowerNetwork, scenarios, mapping: AffineMap | None = None,
                       cfg: OpfConfig | None = None, seed: int = 0) -> ScenarioProgram:
    """Scenario program for the adaptive OPF.

    ``scenarios`` is a ScenarioSet or array of load deviations (one column
    per uncertain bus), or an integer count to sample with ``seed``. With a
    mapping the endogenous set is reformulated first and supplied scenarios
    must lie in the reformulated set.
    """
    cfg = cfg or OpfConfig()
    buses = net.load_buses(cfg.uncertain)
    if isinstance(scenarios, (int, np.integer)):
        scenarios = sample_load_scenarios(net, int(scenarios), seed, mapping, cfg)
    if not isinstance(scenarios, ScenarioSet):
        scenarios = ScenarioSet(np.asarray(scenarios, dtype=float).reshape(-1, len(buses)))
    if len(scenarios) < 1:
        raise ValueError("at least one load scenario is required")
    if scenarios.dim != len(buses):
        raise ValueError(f"scenarios have {scenarios.dim} columns, network has "
                         f"{len(buses)} uncertain loads")
    if mapping is not None:
        region = load_uncertainty(net, mapping, cfg)
        if not scenarios.check(region):
            raise ValueError("scenarios fall outside the reformulated endogenous set")
    check_capacity(net, scenarios.points)
    G = len(net.generators)
    template = OpfTemplate(net, buses, endogenous=mapping is not None)
    A, b = _fixed_rows(net)
    objective = np.zeros(2 * G + 1)
    objective[2 * G] = 1.0
    meta = {"uncertainty": "EnU" if mapping is not None else "ExU",
            "opf_config": asdict(cfg), "uncertain_buses": [net.buses[i].id for i in buses],
            "support_dim": 2 * G + 1}
    kw = {"enu_scenarios": scenarios} if mapping is not None else {"exo_scenarios": scenarios}
    return ScenarioProgram(objective, template, fixed_A=A, fixed_b=b, dim_hint=2 * G + 1,
                           meta=meta, **kw)


def evaluate_dispatch(dec: AdaptiveOpfDecision, xi) -> np.ndarray:
    """Real-time output ``p_base + beta * sum(xi)`` (a row per scenario for 2-D xi)."""
    if abs(float(np.sum(dec.beta)) - 1.0) > 1e-9:
        raise ValueError("participation factors must sum to one")
    xi = np.asarray(xi, dtype=float)
    S = xi.sum(axis=-1)
    return dec.p_base + np.multiply.outer(S, dec.beta)


def balance_residual(net: PowerNetwork, dec: AdaptiveOpfDecision, xi) -> np.ndarray:
    """Generation minus load (MW) for each scenario; zero in the lossless model."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    p = evaluate_dispatch(dec, xi)
    return p.sum(axis=-1) - (net.total_load + xi.sum(axis=1))


def slack_adjustment(losses_realtime: float, losses_base: float) -> float:
    """Change in slack output needed to cover real-time losses."""
    return float(losses_realtime) - float(losses_base)


def opf_posterior(net: PowerNetwork, dec: AdaptiveOpfDecision, fresh,
                  cfg: OpfConfig | None = None) -> ViolationReport:
    """Out-of-sample frequency of generator or line limit violations."""
    cfg = cfg or OpfConfig()
    template = OpfTemplate(net, net.load_buses(cfg.uncertain), include_cost=False)
    pts = fresh.points if isinstance(fresh, ScenarioSet) else np.atleast_2d(fresh)
    return empirical_violation(template, dec.vector, ScenarioSet(pts), feas_tol=cfg.feas_tol)
