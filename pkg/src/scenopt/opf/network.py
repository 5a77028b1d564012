"""Power network data model, MATPOWER-style case parser and DC sensitivities."""
from __future__ import annotations

import enum
import re
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np


class CaseParseError(ValueError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class CaseValidationError(ValueError):
    pass


class BusType(str, enum.Enum):
    PQ = "PQ"
    PV = "PV"
    SLACK = "Slack"


_TYPE_CODES = {1: BusType.PQ, 2: BusType.PV, 3: BusType.SLACK}


@dataclass(frozen=True)
class Bus:
    id: int
    type: BusType
    load_p: float
    load_q: float = 0.0
    vmax: float = 1.1
    vmin: float = 0.9


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    x: float
    flow_limit: float

    @property
    def susceptance(self):
        return 1.0 / self.x


@dataclass(frozen=True)
class Generator:
    bus: int
    pmax: float
    pmin: float = 0.0
    cost_a2: float = 0.0
    cost_a: float = 0.0
    cost_a0: float = 0.0


@dataclass(frozen=True)
class PowerNetwork:
    """Validated network; quantities in MW and per-unit reactance.

    A line limit of ``inf`` means unlimited (written as 0 in case files).
    """

    buses: tuple
    lines: tuple
    generators: tuple
    base_mva: float = 100.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "generators", tuple(self.generators))
        validate(self)

    @property
    def bus_index(self):
        return {b.id: i for i, b in enumerate(self.buses)}

    @property
    def slack(self) -> int:
        return next(i for i, b in enumerate(self.buses) if b.type is BusType.SLACK)

    @property
    def load(self):
        return np.array([b.load_p for b in self.buses])

    @property
    def total_load(self):
        return float(self.load.sum())

    def load_buses(self, which: str = "loaded"):
        """Indices of buses carrying uncertain load.

        ``loaded`` takes every bus with nonzero real load; ``pq`` keeps only
        the PQ buses among them.
        """
        if which not in ("loaded", "pq"):
            raise ValueError("which must be 'loaded' or 'pq'")
        return [i for i, b in enumerate(self.buses)
                if b.load_p != 0.0 and (which == "loaded" or b.type is BusType.PQ)]

    def gen_matrix(self):
        """Bus-by-generator incidence matrix."""
        idx = self.bus_index
        C = np.zeros((len(self.buses), len(self.generators)))
        for g, gen in enumerate(self.generators):
            C[idx[gen.bus], g] = 1.0
        return C

    def ptdf(self):
        """Line-flow sensitivities to bus injections, slack-referenced (L x B)."""
        idx = self.bus_index
        nb, nl = len(self.buses), len(self.lines)
        Cf = np.zeros((nl, nb))
        for l, line in enumerate(self.lines):
            Cf[l, idx[line.from_bus]] = 1.0
            Cf[l, idx[line.to_bus]] = -1.0
        bl = np.array([line.susceptance for line in self.lines])
        Bf = bl[:, None] * Cf
        Bbus = Cf.T @ Bf
        keep = [i for i in range(nb) if i != self.slack]
        H = np.zeros((nl, nb))
        H[:, keep] = np.linalg.solve(Bbus[np.ix_(keep, keep)], Bf[:, keep].T).T
        return H

    def flows(self, injection):
        """DC line flows (MW) for bus injections (MW) that sum to zero."""
        return self.ptdf() @ np.asarray(injection, dtype=float)


def validate(net: PowerNetwork):
    ids = [b.id for b in net.buses]
    if len(set(ids)) != len(ids):
        raise CaseValidationError("duplicate bus ids")
    slacks = [b.id for b in net.buses if b.type is BusType.SLACK]
    if len(slacks) != 1:
        raise CaseValidationError(f"expected exactly one slack bus, found {len(slacks)}: {slacks}")
    known = set(ids)
    for k, line in enumerate(net.lines):
        for end in (line.from_bus, line.to_bus):
            if end not in known:
                raise CaseValidationError(f"branch {k + 1} references missing bus {end}")
        if not line.flow_limit > 0:
            raise CaseValidationError(f"branch {k + 1} has non-positive flow limit")
        if line.x == 0:
            raise CaseValidationError(f"branch {k + 1} has zero reactance")
    for k, gen in enumerate(net.generators):
        if gen.bus not in known:
            raise CaseValidationError(f"generator {k + 1} references missing bus {gen.bus}")
        if gen.pmin > gen.pmax:
            raise CaseValidationError(f"generator {k + 1} has pmin > pmax")
        if gen.cost_a2 < 0:
            raise CaseValidationError(f"generator {k + 1} has a concave cost")
    if not net.generators:
        raise CaseValidationError("network has no generators")
    # connectivity
    adj = {i: set() for i in ids}
    for line in net.lines:
        adj[line.from_bus].add(line.to_bus)
        adj[line.to_bus].add(line.from_bus)
    seen, stack = {ids[0]}, [ids[0]]
    while stack:
        for nxt in adj[stack.pop()] - seen:
            seen.add(nxt)
            stack.append(nxt)
    if len(seen) != len(ids):
        missing = sorted(known - seen)
        raise CaseValidationError(f"network is disconnected; unreachable buses {missing}")


_SECTIONS = {"bus": 6, "branch": 4, "gen": 3, "gencost": 3}
_OPEN = re.compile(r"^mpc\.(\w+)\s*=\s*\[(.*)$")
_SCALAR = re.compile(r"^mpc\.(\w+)\s*=\s*([^\[;]+);?$")


def parse_case(text: str, name: str = "") -> PowerNetwork:
    """Parse the MATPOWER-like subset used by the bundled fixtures.

    Columns: ``mpc.bus`` (id, type, Pd, Qd, Vmax, Vmin), ``mpc.branch``
    (fbus, tbus, x, rateA), ``mpc.gen`` (bus, Pmax, Pmin) and ``mpc.gencost``
    (a2, a1, a0). ``%`` starts a comment; other sections are skipped with a
    warning.
    """
    tables = {}
    base = 100.0
    current, rows = None, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        if current is None:
            m = _OPEN.match(line)
            if m:
                current, rows = m.group(1), []
                line = m.group(2).strip()
                if current not in _SECTIONS:
                    warnings.warn(f"line {lineno}: ignoring unknown section mpc.{current}",
                                  stacklevel=2)
                if not line:
                    continue
            else:
                s = _SCALAR.match(line)
                if s and s.group(1) == "baseMVA":
                    try:
                        base = float(s.group(2))
                    except ValueError:
                        raise CaseParseError(lineno, f"bad baseMVA {s.group(2)!r}") from None
                    continue
                if s or line.startswith("function"):
                    continue
                raise CaseParseError(lineno, f"unexpected text {line!r}")
        closing = "]" in line
        body = line.split("]", 1)[0]
        for chunk in body.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            try:
                vals = [float(v) for v in chunk.replace(",", " ").split()]
            except ValueError:
                raise CaseParseError(lineno, f"non-numeric entry in mpc.{current}") from None
            need = _SECTIONS.get(current)
            if need is not None and len(vals) < need:
                raise CaseParseError(lineno, f"mpc.{current} row needs {need} columns, got {len(vals)}")
            rows.append((lineno, vals))
        if closing:
            if current in _SECTIONS:
                tables[current] = rows
            current = None
    if current is not None:
        raise CaseParseError(lineno, f"unterminated section mpc.{current}")
    for sec in ("bus", "branch", "gen"):
        if sec not in tables:
            raise CaseParseError(0, f"missing section mpc.{sec}")
    buses = []
    for lineno, v in tables["bus"]:
        code = int(v[1])
        if code not in _TYPE_CODES:
            raise CaseParseError(lineno, f"unknown bus type {code}")
        buses.append(Bus(int(v[0]), _TYPE_CODES[code], v[2], v[3], v[4], v[5]))
    lines = [Line(int(v[0]), int(v[1]), v[2], v[3] if v[3] != 0 else np.inf)
             for _, v in tables["branch"]]
    costs = tables.get("gencost", [])
    if costs and len(costs) != len(tables["gen"]):
        raise CaseParseError(costs[0][0], "mpc.gencost must have one row per generator")
    gens = []
    for k, (_, v) in enumerate(tables["gen"]):
        a2, a1, a0 = costs[k][1][:3] if costs else (0.0, 0.0, 0.0)
        gens.append(Generator(int(v[0]), v[1], v[2], a2, a1, a0))
    return PowerNetwork(buses, lines, gens, base, name)


def bundled_cases():
    root = resources.files("scenopt.data") / "cases"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".case"))


def load_case(name_or_path) -> PowerNetwork:
    """Read a case file, falling back to the bundled fixtures by name."""
    path = Path(name_or_path)
    if path.is_file():
        return parse_case(path.read_text(), path.stem)
    stem = path.name[:-5] if path.name.endswith(".case") else path.name
    res = resources.files("scenopt.data") / "cases" / f"{stem}.case"
    if res.is_file():
        return parse_case(res.read_text(), stem)
    raise FileNotFoundError(f"no case file {name_or_path!r}")
