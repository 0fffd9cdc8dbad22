"""Multiple-access networks, their point-to-point equivalents, max-flow and linear network codes.

Network files are JSON objects::

    {
      "description": "optional text",
      "power": 1.0,                       # per-transmitter power, needed for noisy links
      "nodes": [1, 2, 3],
      "source": 1,
      "receivers": [3],
      "macs": [
        {"id": 10, "kind": "gaussian", "noise": 0.5},
        {"id": 11, "kind": "finite_field", "q": 2, "noise": [0.89, 0.11],
         "coefficients": {"2": 1, "3": 1}}
      ],
      "edges_nn": [{"from": 1, "to": 2, "capacity": 1.0},
                   {"from": 1, "to": 3, "noise": 1.0},
                   {"from": 2, "to": 3, "noise": [0.9, 0.1]}],
      "edges_nm": [{"from": 2, "to": 10}],
      "edges_mn": [{"from": 10, "to": 3}]
    }

A node-to-node edge is a noiseless bit pipe (``capacity``), an AWGN link
(scalar ``noise`` variance) or a q-ary additive-noise link (``noise`` pmf).
Node and MAC ids share one namespace of positive integers.  In the
point-to-point equivalent, node ``i`` becomes ``"v<i>"`` and MAC ``m``
becomes ``"m<m>"``.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources

import numpy as np

from .errors import (
    AcyclicityRequired,
    AttemptsExhausted,
    DomainError,
    NonFiniteCapacity,
    ParseError,
    ValidationFailed,
)
from .gf import FieldMatrix, PrimeField, is_prime, mat_rank, mat_solve, matmul_mod, pivot_rows
from .infotheory import Pmf, binary_entropy, pmf_entropy
from .linear_coding import DiscreteMacParams, discrete_mac_compute_trial, select_channel_code

DEFAULT_QUANTUM = 1.0 / 1024
MAC_KINDS = ("gaussian", "finite_field")
_TOP_KEYS = {"nodes", "source", "receivers", "macs", "edges_nn", "edges_nm", "edges_mn"}
_OPTIONAL_KEYS = {"description", "power"}


# --- model -----------------------------------------------------------------


@dataclass(frozen=True)
class Mac:
    id: int
    kind: str
    noise: float | tuple
    q: int | None = None
    coefficients: tuple = ()  # (input node, coefficient) pairs

    def coefficient(self, node: int) -> int:
        return dict(self.coefficients).get(node, 1)


@dataclass(frozen=True)
class NnEdge:
    tail: int
    head: int
    capacity: float | None = None
    noise: float | tuple | None = None

    @property
    def convention(self) -> str:
        if self.capacity is not None:
            return "bit_pipe"
        return "awgn" if isinstance(self.noise, (int, float)) else "finite_field"


@dataclass(frozen=True)
class MacNetwork:
    nodes: tuple
    source: int
    receivers: tuple
    macs: tuple = ()
    edges_nn: tuple = ()
    edges_nm: tuple = ()  # (node, mac)
    edges_mn: tuple = ()  # (mac, node)
    power: float | None = None
    description: str = ""

    def mac(self, mac_id: int) -> Mac:
        for m in self.macs:
            if m.id == mac_id:
                return m
        raise KeyError(mac_id)

    def mac_inputs(self, mac_id: int) -> list[int]:
        return [u for u, m in self.edges_nm if m == mac_id]

    def to_dict(self) -> dict:
        def mac_dict(m: Mac) -> dict:
            d = {"id": m.id, "kind": m.kind, "noise": list(m.noise) if isinstance(m.noise, tuple) else m.noise}
            if m.q is not None:
                d["q"] = m.q
            if m.coefficients:
                d["coefficients"] = {str(k): v for k, v in m.coefficients}
            return d

        def nn_dict(e: NnEdge) -> dict:
            d = {"from": e.tail, "to": e.head}
            if e.capacity is not None:
                d["capacity"] = e.capacity
            else:
                d["noise"] = list(e.noise) if isinstance(e.noise, tuple) else e.noise
            return d

        out = {}
        if self.description:
            out["description"] = self.description
        if self.power is not None:
            out["power"] = self.power
        out.update(
            nodes=list(self.nodes),
            source=self.source,
            receivers=list(self.receivers),
            macs=[mac_dict(m) for m in self.macs],
            edges_nn=[nn_dict(e) for e in self.edges_nn],
            edges_nm=[{"from": u, "to": m} for u, m in self.edges_nm],
            edges_mn=[{"from": m, "to": v} for m, v in self.edges_mn],
        )
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MacNetwork":
        return parse_network(text)


def _load(text: str) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(data, dict):
        raise ParseError("top level must be a JSON object")
    return data


def _int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"{where}: expected an integer id, got {v!r}")
    return v


def _num(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{where}: expected a number, got {v!r}")
    return float(v)


def _noise(v, where: str):
    if isinstance(v, list):
        return tuple(_num(x, where) for x in v)
    return _num(v, where)


def _list(data: dict, key: str) -> list:
    v = data[key]
    if not isinstance(v, list):
        raise ParseError(f"{key}: expected a list")
    return v


def _pair(e, key: str, i: int) -> tuple[int, int]:
    where = f"{key}[{i}]"
    if not isinstance(e, dict) or "from" not in e or "to" not in e:
        raise ParseError(f"{where}: expected an object with 'from' and 'to'")
    return _int(e["from"], where + ".from"), _int(e["to"], where + ".to")


def parse_network(text: str) -> MacNetwork:
    data = _load(text)
    missing = _TOP_KEYS - data.keys()
    if missing:
        raise ParseError(f"missing keys: {sorted(missing)}")
    unknown = data.keys() - _TOP_KEYS - _OPTIONAL_KEYS
    if unknown:
        raise ParseError(f"unknown keys: {sorted(unknown)}")
    nodes = tuple(_int(v, "nodes") for v in _list(data, "nodes"))
    receivers = tuple(_int(v, "receivers") for v in _list(data, "receivers"))
    macs = []
    for i, m in enumerate(_list(data, "macs")):
        where = f"macs[{i}]"
        if not isinstance(m, dict) or "id" not in m or "kind" not in m or "noise" not in m:
            raise ParseError(f"{where}: needs id, kind and noise")
        coeffs = m.get("coefficients", {})
        if not isinstance(coeffs, dict):
            raise ParseError(f"{where}.coefficients: expected an object")
        try:
            pairs = tuple(sorted((int(k), _int(v, where + ".coefficients")) for k, v in coeffs.items()))
        except ValueError:
            raise ParseError(f"{where}.coefficients: keys must be node ids") from None
        q = m.get("q")
        macs.append(
            Mac(
                id=_int(m["id"], where + ".id"),
                kind=str(m["kind"]),
                noise=_noise(m["noise"], where + ".noise"),
                q=None if q is None else _int(q, where + ".q"),
                coefficients=pairs,
            )
        )
    edges_nn = []
    for i, e in enumerate(_list(data, "edges_nn")):
        tail, head = _pair(e, "edges_nn", i)
        where = f"edges_nn[{i}]"
        if ("capacity" in e) == ("noise" in e):
            raise ParseError(f"{where}: give exactly one of capacity or noise")
        if "capacity" in e:
            edges_nn.append(NnEdge(tail, head, capacity=_num(e["capacity"], where + ".capacity")))
        else:
            edges_nn.append(NnEdge(tail, head, noise=_noise(e["noise"], where + ".noise")))
    power = data.get("power")
    return MacNetwork(
        nodes=nodes,
        source=_int(data["source"], "source"),
        receivers=receivers,
        macs=tuple(macs),
        edges_nn=tuple(edges_nn),
        edges_nm=tuple(_pair(e, "edges_nm", i) for i, e in enumerate(_list(data, "edges_nm"))),
        edges_mn=tuple(_pair(e, "edges_mn", i) for i, e in enumerate(_list(data, "edges_mn"))),
        power=None if power is None else _num(power, "power"),
        description=str(data.get("description", "")),
    )


def binary_butterfly_network(C: float, p: float) -> MacNetwork:
    """Butterfly whose middle node is a mod-2 adder with Bernoulli(p) noise; every other link is a bit pipe of capacity C."""
    if not (math.isfinite(C) and C >= 0):
        raise DomainError(f"C must be finite and nonnegative, got {C}")
    if not 0 <= p <= 1:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    pipes = [(1, 2), (1, 3), (2, 5), (3, 6), (4, 5), (4, 6)]
    return MacNetwork(
        nodes=(1, 2, 3, 4, 5, 6),
        source=1,
        receivers=(5, 6),
        macs=(Mac(7, "finite_field", (1.0 - p, p), 2, ((2, 1), (3, 1))),),
        edges_nn=tuple(NnEdge(u, v, capacity=float(C)) for u, v in pipes),
        edges_nm=((2, 7), (3, 7)),
        edges_mn=((7, 4),),
    )


def load_network(path) -> MacNetwork:
    with open(path) as fh:
        return parse_network(fh.read())


FIXTURES = ("butterfly_binary", "butterfly_gaussian", "three_mac")


def fixture_text(name: str) -> str:
    if name not in FIXTURES:
        raise DomainError(f"unknown fixture {name!r}; choose from {FIXTURES}")
    return resources.files("structcodes.fixtures").joinpath(f"{name}.json").read_text()


def load_fixture(name: str) -> MacNetwork:
    return parse_network(fixture_text(name))


# --- validation ------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.location}: {self.message}"


def _finite_positive(v) -> bool:
    return isinstance(v, (int, float)) and math.isfinite(v) and v > 0


def _check_pmf(noise, q: int | None, where: str, out: list[Violation]) -> None:
    if not isinstance(noise, tuple):
        out.append(Violation(where, "finite-field noise must be a pmf list"))
        return
    if q is not None and len(noise) != q:
        out.append(Violation(where, f"noise pmf has {len(noise)} entries, field size is {q}"))
    try:
        Pmf(noise)
    except DomainError as e:
        out.append(Violation(where, str(e)))


def validate_network(n: MacNetwork) -> list[Violation]:
    """Every structural problem found, in a deterministic order; empty means valid."""
    out: list[Violation] = []
    ids = list(n.nodes) + [m.id for m in n.macs]
    for i in ids:
        if i <= 0:
            out.append(Violation(f"id {i}", "ids must be positive integers"))
    for i in sorted({i for i in ids if ids.count(i) > 1}):
        out.append(Violation(f"id {i}", "duplicate id"))
    nodes, macs = set(n.nodes), {m.id for m in n.macs}
    if n.source not in nodes:
        out.append(Violation("source", f"source {n.source} is not a node"))
    if not n.receivers:
        out.append(Violation("receivers", "at least one receiver is required"))
    for r in n.receivers:
        if r not in nodes:
            out.append(Violation("receivers", f"receiver {r} is not a node"))
        if r == n.source:
            out.append(Violation("receivers", f"receiver {r} is the source"))
    if len(set(n.receivers)) != len(n.receivers):
        out.append(Violation("receivers", "duplicate receiver"))
    needs_power = False
    for i, e in enumerate(n.edges_nn):
        where = f"edges_nn[{i}] {e.tail}->{e.head}"
        for end in (e.tail, e.head):
            if end not in nodes:
                out.append(Violation(where, f"endpoint {end} is not a node"))
        if e.tail == e.head:
            out.append(Violation(where, "self loop"))
        if e.capacity is not None:
            if not (math.isfinite(e.capacity) and e.capacity >= 0):
                out.append(Violation(where, "capacity must be finite and nonnegative"))
        elif isinstance(e.noise, tuple):
            q = len(e.noise)
            if not is_prime(q):
                out.append(Violation(where, f"noise pmf length {q} is not a prime field size"))
            _check_pmf(e.noise, q, where, out)
        else:
            needs_power = True
            if not _finite_positive(e.noise):
                out.append(Violation(where, "noise variance must be positive and finite"))
    for i, (u, m) in enumerate(n.edges_nm):
        where = f"edges_nm[{i}] {u}->{m}"
        if u not in nodes:
            out.append(Violation(where, f"tail {u} is not a node"))
        if m not in macs:
            out.append(Violation(where, f"head {m} is not a MAC"))
    for i, (m, v) in enumerate(n.edges_mn):
        where = f"edges_mn[{i}] {m}->{v}"
        if m not in macs:
            out.append(Violation(where, f"tail {m} is not a MAC"))
        if v not in nodes:
            out.append(Violation(where, f"head {v} is not a node"))
    for m in n.macs:
        where = f"mac {m.id}"
        outs = [v for mm, v in n.edges_mn if mm == m.id]
        if len(outs) != 1:
            out.append(Violation(where, f"must have exactly one output edge, has {len(outs)}"))
        inputs = n.mac_inputs(m.id)
        if not inputs:
            out.append(Violation(where, "has no input edges"))
        if len(set(inputs)) != len(inputs):
            out.append(Violation(where, "repeated input node"))
        if m.kind == "gaussian":
            needs_power = True
            if not _finite_positive(m.noise):
                out.append(Violation(where, "noise variance must be positive and finite"))
        elif m.kind == "finite_field":
            if m.q is None or not is_prime(m.q):
                out.append(Violation(where, f"field size q={m.q} must be prime"))
                continue
            _check_pmf(m.noise, m.q, where, out)
            for node, c in m.coefficients:
                if node not in inputs:
                    out.append(Violation(where, f"coefficient for non-input node {node}"))
                if c % m.q == 0:
                    out.append(Violation(where, f"coefficient of node {node} is zero mod {m.q}"))
        else:
            out.append(Violation(where, f"unknown kind {m.kind!r}; expected one of {MAC_KINDS}"))
    if needs_power and not _finite_positive(n.power):
        out.append(Violation("power", "noisy Gaussian links need a positive power"))
    return out


# --- point-to-point equivalent ---------------------------------------------


@dataclass(frozen=True)
class P2PEdge:
    tail: str
    head: str
    capacity: float
    origin: str = "nn"


@dataclass(frozen=True)
class P2PNetwork:
    nodes: tuple
    source: str
    receivers: tuple
    edges: tuple
    flags: tuple = ()

    def __post_init__(self):
        for e in self.edges:
            if not (math.isfinite(e.capacity) and e.capacity >= 0):
                raise NonFiniteCapacity(f"edge {e.tail}->{e.head} has capacity {e.capacity}")

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "source": self.source,
            "receivers": list(self.receivers),
            "edges": [{"from": e.tail, "to": e.head, "capacity": e.capacity, "origin": e.origin} for e in self.edges],
            "flags": list(self.flags),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "P2PNetwork":
        data = _load(text)
        try:
            edges = tuple(
                P2PEdge(str(e["from"]), str(e["to"]), _num(e["capacity"], "capacity"), str(e.get("origin", "nn")))
                for e in data["edges"]
            )
            return cls(
                nodes=tuple(str(v) for v in data["nodes"]),
                source=str(data["source"]),
                receivers=tuple(str(v) for v in data["receivers"]),
                edges=edges,
                flags=tuple(str(f) for f in data.get("flags", [])),
            )
        except (KeyError, TypeError) as e:
            raise ParseError(f"malformed point-to-point network: {e}") from None


def validate_p2p(p: P2PNetwork) -> list[Violation]:
    out = []
    nodes = set(p.nodes)
    if len(nodes) != len(p.nodes):
        out.append(Violation("nodes", "duplicate node label"))
    if p.source not in nodes:
        out.append(Violation("source", f"{p.source} is not a node"))
    for r in p.receivers:
        if r not in nodes:
            out.append(Violation("receivers", f"{r} is not a node"))
    for i, e in enumerate(p.edges):
        for end in (e.tail, e.head):
            if end not in nodes:
                out.append(Violation(f"edges[{i}]", f"endpoint {end} is not a node"))
    return out


def node_label(i: int) -> str:
    return f"v{i}"


def mac_label(i: int) -> str:
    return f"m{i}"


def mac_edge_rate(n: MacNetwork, m: Mac) -> tuple[float, bool]:
    """Rate assigned to a MAC's input and output edges, and whether it was clamped at 0.

    Gaussian MACs get 1/2 log(1/J + P/N_m); finite-field MACs get log q - H(Z).
    """
    if m.kind == "gaussian":
        J = len(n.mac_inputs(m.id))
        raw = 0.5 * math.log2(1.0 / J + n.power / m.noise)
    else:
        raw = math.log2(m.q) - pmf_entropy(Pmf(m.noise))
    return (0.0, True) if raw < 0 else (raw, False)


def link_capacity(n: MacNetwork, e: NnEdge) -> float:
    if e.capacity is not None:
        return e.capacity
    if isinstance(e.noise, tuple):
        return max(0.0, math.log2(len(e.noise)) - pmf_entropy(Pmf(e.noise)))
    return 0.5 * math.log2(1.0 + n.power / e.noise)


def equivalent_p2p(n: MacNetwork) -> P2PNetwork:
    """Replace every MAC by a relay node; MAC edges carry the MAC's computation rate."""
    violations = validate_network(n)
    if violations:
        raise ValidationFailed(violations)
    flags = []
    conventions = sorted({e.convention for e in n.edges_nn})
    if conventions:
        flags.append("links: " + ",".join(conventions))
    edges = [P2PEdge(node_label(e.tail), node_label(e.head), link_capacity(n, e), "nn") for e in n.edges_nn]
    rates = {}
    for m in n.macs:
        rate, clamped = mac_edge_rate(n, m)
        rates[m.id] = rate
        if clamped:
            flags.append(f"{mac_label(m.id)}: rate clamped at 0")
    edges += [P2PEdge(node_label(u), mac_label(m), rates[m], "nm") for u, m in n.edges_nm]
    edges += [P2PEdge(mac_label(m), node_label(v), rates[m], "mn") for m, v in n.edges_mn]
    return P2PNetwork(
        nodes=tuple(node_label(i) for i in n.nodes) + tuple(mac_label(m.id) for m in n.macs),
        source=node_label(n.source),
        receivers=tuple(node_label(r) for r in n.receivers),
        edges=tuple(edges),
        flags=tuple(flags),
    )


# --- max-flow --------------------------------------------------------------


def edmonds_karp(num_nodes: int, edges: list[tuple[int, int, int]], s: int, t: int) -> tuple[int, list[int]]:
    """Maximum s-t flow with integer capacities by shortest augmenting paths.

    Returns the flow value and the flow on each input edge (parallel edges allowed).
    """
    if s == t:
        raise DomainError("source and sink coincide")
    head, cap = [], []
    adj: list[list[int]] = [[] for _ in range(num_nodes)]
    for u, v, c in edges:
        if c < 0:
            raise DomainError("negative capacity")
        adj[u].append(len(head))
        head.append(v)
        cap.append(c)
        adj[v].append(len(head))
        head.append(u)
        cap.append(0)
    total = 0
    while True:
        parent = [-1] * num_nodes
        parent[s] = -2
        queue = deque([s])
        while queue and parent[t] == -1:
            u = queue.popleft()
            for a in adj[u]:
                v = head[a]
                if cap[a] > 0 and parent[v] == -1:
                    parent[v] = a
                    queue.append(v)
        if parent[t] == -1:
            break
        push, v = None, t
        while v != s:
            a = parent[v]
            push = cap[a] if push is None else min(push, cap[a])
            v = head[a ^ 1]
        v = t
        while v != s:
            a = parent[v]
            cap[a] -= push
            cap[a ^ 1] += push
            v = head[a ^ 1]
        total += push
    flows = [cap[2 * i + 1] for i in range(len(edges))]
    return total, flows


def brute_force_min_cut(num_nodes: int, edges: list[tuple[int, int, int]], s: int, t: int) -> int:
    """Minimum s-t cut by enumerating every vertex subset containing s but not t."""
    others = [v for v in range(num_nodes) if v not in (s, t)]
    best = None
    for bits in itertools.product((False, True), repeat=len(others)):
        side = {s} | {v for v, b in zip(others, bits) if b}
        value = sum(c for u, v, c in edges if u in side and v not in side)
        best = value if best is None else min(best, value)
    return best


def quantize_capacity(c: float, quantum: float) -> int:
    if not math.isfinite(c) or c < 0:
        raise NonFiniteCapacity(f"capacity {c} is not finite and nonnegative")
    # small slack so capacities that are exact multiples survive float fuzz
    return int(math.floor(c / quantum + 1e-9))


@dataclass(frozen=True)
class MaxflowResult:
    per_receiver: dict
    bound: float
    quantum: float
    rounding_loss: float  # total capacity discarded by quantization


def multicast_maxflow(p: P2PNetwork, source: str | None = None, receivers=None, quantum: float = DEFAULT_QUANTUM) -> MaxflowResult:
    """Max-flow to each receiver on capacities floored to multiples of ``quantum``; the bound is the minimum."""
    if not quantum > 0:
        raise DomainError("quantum must be positive")
    source = p.source if source is None else source
    receivers = p.receivers if receivers is None else tuple(receivers)
    index = {v: i for i, v in enumerate(p.nodes)}
    edges, loss = [], 0.0
    for e in p.edges:
        units = quantize_capacity(e.capacity, quantum)
        loss += e.capacity - units * quantum
        edges.append((index[e.tail], index[e.head], units))
    flows = {}
    for r in receivers:
        value, _ = edmonds_karp(len(p.nodes), edges, index[source], index[r])
        flows[r] = value * quantum
    bound = min(flows.values()) if flows else 0.0
    return MaxflowResult(flows, bound, quantum, max(0.0, loss))


# --- algebraic network codes ------------------------------------------------


@dataclass(frozen=True)
class UnitPipe:
    tail: str
    head: str


def unit_pipes(p: P2PNetwork, unit: float = 1.0) -> list[UnitPipe]:
    """Split each edge into floor(capacity / unit) parallel unit pipes."""
    out = []
    for e in p.edges:
        out += [UnitPipe(e.tail, e.head)] * quantize_capacity(e.capacity, unit)
    return out


def topological_order(nodes, pipes: list[UnitPipe]) -> list:
    indeg = {v: 0 for v in nodes}
    succ = {v: [] for v in nodes}
    for e in pipes:
        indeg[e.head] += 1
        succ[e.tail].append(e.head)
    order = []
    queue = deque(v for v in nodes if indeg[v] == 0)
    while queue:
        v = queue.popleft()
        order.append(v)
        for w in succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
    if len(order) != len(nodes):
        raise AcyclicityRequired("network has a directed cycle")
    return order


@dataclass(frozen=True)
class AlgebraicNetworkCode:
    """Linear network code over unit pipes.

    ``local[e]`` maps each input of pipe ``e`` to its coefficient: inputs are
    other pipe indices, or ``("src", i)`` for source symbol ``i`` on pipes
    leaving the source.  ``global_vectors[e]`` is the coefficient vector of
    pipe ``e`` over the h source symbols, and ``transfer[r]`` stacks the
    global vectors of the pipes entering receiver ``r`` as columns.
    """

    field: PrimeField
    h: int
    nodes: tuple
    source: str
    receivers: tuple
    pipes: tuple
    local: tuple  # per pipe: tuple of (input, coefficient)
    global_vectors: np.ndarray
    transfer: dict
    attempts: int
    method: str

    def inputs_of(self, r: str) -> list[int]:
        return [i for i, e in enumerate(self.pipes) if e.head == r]

    def encode(self, symbols) -> np.ndarray:
        """Propagate source symbols (h x T array over F_q) pipe by pipe using local coefficients only."""
        q = self.field.q
        x = np.mod(np.asarray(symbols, dtype=np.int64), q)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] != self.h:
            raise DomainError(f"need {self.h} source rows, got {x.shape[0]}")
        values = np.zeros((len(self.pipes), x.shape[1]), dtype=np.int64)
        for e in _pipe_order(self.nodes, list(self.pipes)):
            acc = np.zeros(x.shape[1], dtype=np.int64)
            for inp, c in self.local[e]:
                src = x[inp[1]] if isinstance(inp, tuple) else values[inp]
                acc = np.mod(acc + c * src, q)
            values[e] = acc
        return values

    def observations(self, values: np.ndarray, r: str) -> np.ndarray:
        return values[self.inputs_of(r)]

    def decode(self, r: str, observed) -> np.ndarray:
        """Recover the h x T source symbols from the values on the pipes entering ``r``."""
        t = self.transfer[r]
        cols = pivot_rows(t.T)[: self.h]
        if len(cols) < self.h:
            raise DomainError(f"receiver {r} cannot decode: transfer rank {len(cols)} < {self.h}")
        square = FieldMatrix(self.field, t.entries[:, cols])
        obs = np.mod(np.asarray(observed, dtype=np.int64), self.field.q)
        if obs.ndim == 1:
            obs = obs[:, None]
        # observations are square^T @ x
        return mat_solve(square.T, obs[cols])

    def to_dict(self) -> dict:
        def label(inp):
            return f"src:{inp[1]}" if isinstance(inp, tuple) else int(inp)

        return {
            "q": self.field.q,
            "h": self.h,
            "method": self.method,
            "attempts": self.attempts,
            "pipes": [{"index": i, "from": e.tail, "to": e.head} for i, e in enumerate(self.pipes)],
            "coefficients": [
                {"pipe": i, "input": label(inp), "coefficient": int(c)} for i, loc in enumerate(self.local) for inp, c in loc
            ],
            "transfer": {r: self.transfer[r].tolist() for r in self.receivers},
        }


def _pipe_order(nodes, pipes: list[UnitPipe]) -> list[int]:
    rank = {v: i for i, v in enumerate(topological_order(nodes, pipes))}
    return sorted(range(len(pipes)), key=lambda i: (rank[pipes[i].tail], i))


def _global_vectors(q: int, h: int, pipes, local, order) -> np.ndarray:
    g = np.zeros((len(pipes), h), dtype=np.int64)
    for e in order:
        acc = np.zeros(h, dtype=np.int64)
        for inp, c in local[e]:
            if isinstance(inp, tuple):
                acc[inp[1]] += c
            else:
                acc += c * g[inp]
        g[e] = np.mod(acc, q)
    return g


def _edge_disjoint_paths(nodes, pipes: list[UnitPipe], source, sink, h: int) -> list[list[int]] | None:
    index = {v: i for i, v in enumerate(nodes)}
    edges = [(index[e.tail], index[e.head], 1) for e in pipes]
    value, flow = edmonds_karp(len(nodes), edges, index[source], index[sink])
    if value < h:
        return None
    used = {i for i, f in enumerate(flow) if f > 0}
    paths = []
    for _ in range(h):
        path, v = [], source
        while v != sink:
            e = min(i for i in used if pipes[i].tail == v)
            used.discard(e)
            path.append(e)
            v = pipes[e].head
        paths.append(path)
    return paths


def _inputs(pipes, e: int, source, h: int) -> list:
    tail = pipes[e].tail
    if tail == source:
        return [("src", i) for i in range(h)]
    return [i for i, p in enumerate(pipes) if p.head == tail]


def construct_network_code(
    p: P2PNetwork,
    field: PrimeField,
    rng: np.random.Generator,
    h: int | None = None,
    max_attempts: int = 32,
    method: str = "random",
    unit: float = 1.0,
    edge_retries: int = 64,
) -> AlgebraicNetworkCode:
    """Linear multicast code for ``h`` source symbols per use (default: the unit-pipe multicast bound).

    ``method="random"`` draws every local coefficient i.i.d. uniform on F_q
    (zero included) and redraws the whole code until every receiver's
    transfer matrix has rank h.  ``method="guided"`` fixes h edge-disjoint
    paths per receiver and assigns pipes in topological order, redrawing a
    pipe's coefficients until each receiver whose path uses it still sees h
    independent vectors on its current path frontier.
    """
    if method not in ("random", "guided"):
        raise DomainError(f"method must be 'random' or 'guided', got {method!r}")
    L = len(p.receivers)
    if field.q <= L:
        raise DomainError(f"field size {field.q} must exceed the number of receivers {L}")
    pipes = unit_pipes(p, unit)
    order = _pipe_order(p.nodes, pipes)
    index = {v: i for i, v in enumerate(p.nodes)}
    edges = [(index[e.tail], index[e.head], 1) for e in pipes]
    bound = min(edmonds_karp(len(p.nodes), edges, index[p.source], index[r])[0] for r in p.receivers)
    h = bound if h is None else h
    if not (1 <= h <= bound):
        raise DomainError(f"rate h={h} must lie in [1, {bound}] (unit-pipe multicast bound)")
    q = field.q
    inputs = [_inputs(pipes, e, p.source, h) for e in range(len(pipes))]
    paths = None
    if method == "guided":
        paths = {r: _edge_disjoint_paths(p.nodes, pipes, p.source, r, h) for r in p.receivers}
    for attempt in range(1, max_attempts + 1):
        if method == "random":
            local = [tuple((inp, int(c)) for inp, c in zip(inputs[e], rng.integers(0, q, size=len(inputs[e])))) for e in range(len(pipes))]
        else:
            local = _guided_local(q, h, pipes, inputs, order, paths, rng, edge_retries)
            if local is None:
                continue
        g = _global_vectors(q, h, pipes, local, order)
        transfer = {}
        ok = True
        for r in p.receivers:
            cols = [i for i, e in enumerate(pipes) if e.head == r]
            t = FieldMatrix(field, g[cols].T if cols else np.zeros((h, 0), dtype=np.int64))
            transfer[r] = t
            if t.cols == 0 or mat_rank(t) < h:
                ok = False
        if ok:
            return AlgebraicNetworkCode(
                field, h, tuple(p.nodes), p.source, tuple(p.receivers), tuple(pipes), tuple(local), g, transfer, attempt, method
            )
    raise AttemptsExhausted(f"no decodable code after {max_attempts} attempts")


def _guided_local(q, h, pipes, inputs, order, paths, rng, edge_retries):
    # frontier[r][j]: global vector currently carried by path j of receiver r
    frontier = {r: np.eye(h, dtype=np.int64) for r in paths}
    step_of = {}  # pipe -> list of (receiver, path index)
    for r, ps in paths.items():
        for j, path in enumerate(ps):
            for e in path:
                step_of.setdefault(e, []).append((r, j))
    local = [None] * len(pipes)
    g = np.zeros((len(pipes), h), dtype=np.int64)
    f = PrimeField(q)
    for e in order:
        for _ in range(edge_retries):
            coeffs = rng.integers(0, q, size=len(inputs[e]))
            vec = np.zeros(h, dtype=np.int64)
            for inp, c in zip(inputs[e], coeffs):
                vec += c * (np.eye(h, dtype=np.int64)[inp[1]] if isinstance(inp, tuple) else g[inp])
            vec = np.mod(vec, q)
            good = True
            for r, j in step_of.get(e, []):
                trial = frontier[r].copy()
                trial[j] = vec
                if mat_rank(FieldMatrix(f, trial)) < h:
                    good = False
                    break
            if good:
                break
        else:
            return None
        local[e] = tuple((inp, int(c)) for inp, c in zip(inputs[e], coeffs))
        g[e] = vec
        for r, j in step_of.get(e, []):
            frontier[r][j] = vec
    return local


def single_attempt_success(p: P2PNetwork, field: PrimeField, seed: int, draws: int, method: str = "random") -> float:
    """Fraction of independent single-attempt constructions that are decodable."""
    from .montecarlo import run_trials

    def one(rng):
        try:
            construct_network_code(p, field, rng, max_attempts=1, method=method)
            return True
        except AttemptsExhausted:
            return False

    return float(np.mean(run_trials(one, seed, draws)))


def batch_rank(a: np.ndarray, q: int) -> np.ndarray:
    """Rank over F_q of each matrix in a (B, r, c) stack."""
    a = np.mod(np.array(a, dtype=np.int64, copy=True), q)
    B, r, c = a.shape
    inv = np.array([0] + [pow(i, -1, q) for i in range(1, q)], dtype=np.int64) if q <= 1 << 16 else None
    rank = np.zeros(B, dtype=np.int64)
    rows = np.arange(r)
    for col in range(c):
        cand = (a[:, :, col] != 0) & (rows[None, :] >= rank[:, None])
        b = np.nonzero(cand.any(axis=1))[0]
        if b.size == 0:
            continue
        piv, rr = np.argmax(cand[b], axis=1), rank[b]
        top, other = a[b, rr].copy(), a[b, piv].copy()
        a[b, piv], a[b, rr] = top, other
        lead = a[b, rr, col]
        scale = inv[lead] if inv is not None else np.array([pow(int(v), -1, q) for v in lead], dtype=np.int64)
        a[b, rr] = np.mod(a[b, rr] * scale[:, None], q)
        factor = a[b, :, col].copy()
        factor[np.arange(b.size), rr] = 0
        a[b] = np.mod(a[b] - factor[:, :, None] * a[b, rr][:, None, :], q)
        rank[b] += 1
    return rank


def exact_random_success(p: P2PNetwork, field: PrimeField, h: int | None = None, limit: int = 5_000_000) -> Fraction:
    """Exact single-attempt success probability of ``method="random"`` by enumerating all coefficient draws."""
    pipes = unit_pipes(p)
    order = _pipe_order(p.nodes, pipes)
    index = {v: i for i, v in enumerate(p.nodes)}
    edges = [(index[e.tail], index[e.head], 1) for e in pipes]
    if h is None:
        h = min(edmonds_karp(len(p.nodes), edges, index[p.source], index[r])[0] for r in p.receivers)
    q = field.q
    inputs = [_inputs(pipes, e, p.source, h) for e in range(len(pipes))]
    slot_of = {}
    for e in range(len(pipes)):
        for inp in inputs[e]:
            slot_of[(e, inp)] = len(slot_of)
    total = q ** len(slot_of)
    if total > limit:
        raise DomainError(f"{q}^{len(slot_of)} draws is too many to enumerate")
    cols = {r: [i for i, e in enumerate(pipes) if e.head == r] for r in p.receivers}
    good = 0
    chunk = 1 << 15
    powers = q ** np.arange(len(slot_of) - 1, -1, -1, dtype=np.int64)
    for lo in range(0, total, chunk):
        idx = np.arange(lo, min(total, lo + chunk), dtype=np.int64)
        coeffs = (idx[:, None] // powers[None, :]) % q
        g = np.zeros((idx.size, len(pipes), h), dtype=np.int64)
        for e in order:
            acc = np.zeros((idx.size, h), dtype=np.int64)
            for inp in inputs[e]:
                c = coeffs[:, slot_of[(e, inp)]][:, None]
                acc += c * (np.eye(h, dtype=np.int64)[inp[1]][None, :] if isinstance(inp, tuple) else g[:, inp])
            g[:, e] = np.mod(acc, q)
        ok = np.ones(idx.size, dtype=bool)
        for r in p.receivers:
            ok &= batch_rank(np.transpose(g[:, cols[r]], (0, 2, 1)), q) == h
        good += int(ok.sum())
    return Fraction(good, total)


def unit_butterfly() -> P2PNetwork:
    """Classic butterfly with nine unit pipes: s -> a, b; a, b -> c; c -> d; a -> t1; b -> t2; d -> t1, t2."""
    e = [("s", "a"), ("s", "b"), ("a", "c"), ("b", "c"), ("c", "d"), ("a", "t1"), ("b", "t2"), ("d", "t1"), ("d", "t2")]
    return P2PNetwork(
        nodes=("s", "a", "b", "c", "d", "t1", "t2"),
        source="s",
        receivers=("t1", "t2"),
        edges=tuple(P2PEdge(u, v, 1.0) for u, v in e),
    )


# --- end-to-end butterfly simulations ----------------------------------------


@dataclass(frozen=True)
class ButterflyTrial:
    delivered_bits: int
    mac_bits: int
    n: int
    left_error: bool
    right_error: bool

    @property
    def error(self) -> bool:
        return self.left_error or self.right_error

    @property
    def rate(self) -> float:
        return self.delivered_bits / self.n


def butterfly_split(C: float, p: float, n: int, rate_fraction: float) -> tuple[int, int]:
    """(pipe chunk length a, MAC chunk length) for a block of bits at the given fraction of capacity."""
    if not (0 < rate_fraction <= 1):
        raise DomainError(f"rate_fraction must lie in (0, 1], got {rate_fraction}")
    if n < 1:
        raise DomainError("n must be positive")
    cap = C + min(C, 1.0 - binary_entropy(p))
    total = int(math.floor(rate_fraction * n * cap + 1e-9))
    a = min(int(math.floor(n * C + 1e-9)), total)
    return a, min(total - a, a)


def binary_butterfly_multicast_trial(
    C: float, p: float, n: int, rate_fraction: float, rng: np.random.Generator, code_draws: int = 16
) -> ButterflyTrial:
    """One block over the binary butterfly with a noisy mod-2 adder in the middle.

    The block ``b`` of ``a + u`` bits is split as ``[b11 b12]`` (a, u bits) and
    as ``[b21 b22]`` (u, a bits).  ``b11`` and ``b22`` travel over the side
    pipes, the MAC computes ``b21 xor b12`` with a binary linear code of
    length n (best of ``code_draws`` random full-rank generators), and each
    receiver strips its known half from the decoded sum.
    """
    a, u_len = butterfly_split(C, p, n, rate_fraction)
    b = rng.integers(0, 2, size=a + u_len)
    b11, b22 = b[:a], b[u_len:]
    if u_len == 0:
        return ButterflyTrial(a, 0, n, False, False)
    b21, b12 = b[:u_len], b[a:]
    f = PrimeField(2)
    noise = Pmf.bernoulli(p)
    G = select_channel_code(f, u_len, n, rng, draws=code_draws).gen
    params = DiscreteMacParams(f, 2, (1, 1), (1, 1), noise, n, u_len)
    out = discrete_mac_compute_trial(params, np.stack([b21, b12]), FieldMatrix.identity(f, u_len), G, rng)
    u_hat = out.u_hat
    left = np.concatenate([b11, (u_hat + b11[:u_len]) % 2])
    right_b21 = (u_hat + b22[a - u_len:]) % 2
    right = np.concatenate([right_b21, b22])
    return ButterflyTrial(a + u_len, u_len, n, not np.array_equal(left, b), not np.array_equal(right, b))


@dataclass(frozen=True)
class GaussianButterflyTrace:
    D: float
    D_quantized: float
    D_direct: float
    D_combined: float
    source_rate: float
    common_rate: float
    rate: float
    limit: float
    penalty: float
    clamped: bool


def gaussian_butterfly_rate_trace(P: float, N: float, ell: int, sigma_s2: float = 1.0) -> GaussianButterflyTrace:
    """Distortion bookkeeping of the lattice scheme on the Gaussian butterfly.

    The MAC sum is refined to ``D = 2 sigma^2 (2N/(N+2P))^ell`` and quantized
    to 2D, the side paths deliver each source at D/2, and the receiver's
    derived source ends at ``(sqrt(2D) + sqrt(D/2))^2 = 9D/2``.
    """
    if not (P > 0 and N > 0 and sigma_s2 > 0) or ell < 1:
        raise DomainError("need P, N, sigma_s2 > 0 and ell >= 1")
    r = 2.0 * N / (N + 2.0 * P)
    log_D = math.log2(2.0 * sigma_s2) + ell * math.log2(r)
    D = 2.0**log_D
    combined = 4.5 * D
    raw = (math.log2(sigma_s2 / 4.5) - log_D) / ell
    clamped = raw < 0
    source_rate = max(raw, 0.0)
    common = 0.5 * math.log2(1.0 + P / N) - 0.5 * math.log2(0.5 + P / N)
    limit = 0.5 * math.log2(1.0 + P / N) + 0.5 * math.log2(0.5 + P / N)
    return GaussianButterflyTrace(D, 2.0 * D, D / 2.0, combined, source_rate, common, source_rate + common, limit, math.log2(9.0) / ell, clamped)


@dataclass(frozen=True)
class GaussianButterflyTrial:
    D_sum: float
    D_sum_quantized: float
    D_direct: float
    D_combined: float
    trace: GaussianButterflyTrace


def gaussian_butterfly_trial(P: float, N: float, ell: int, k: int, rng: np.random.Generator, sigma_s2: float = 1.0) -> GaussianButterflyTrial:
    """Simulate the left receiver of the Gaussian butterfly in ideal-lattice mode.

    The sum is refined over the MAC to within D and requantized with a further
    distortion D, so the relayed sum is within 2D; the direct source arrives
    through a Gaussian rate-distortion code at D/2.
    """
    from .gaussian_compute import GaussianMacParams, draw_sources, gaussian_requantize, run_scheme

    trace = gaussian_butterfly_rate_trace(P, N, ell, sigma_s2)
    p = GaussianMacParams(M=2, P=P, N=N, sigma_s2=sigma_s2, k=k, ell=ell)
    s = draw_sources(p, rng)
    res = run_scheme(p, s, [np.ones(2)], "ideal", rng, None, None, 1e-6)[0]
    u_q = gaussian_requantize(res.u_hat, 2.0 * sigma_s2, trace.D, rng)
    s1_hat = gaussian_requantize(s[0], sigma_s2, trace.D_direct, rng)
    s2_hat = u_q - s1_hat
    return GaussianButterflyTrial(
        D_sum=res.empirical_mse,
        D_sum_quantized=float(np.mean((res.u - u_q) ** 2)),
        D_direct=float(np.mean((s[0] - s1_hat) ** 2)),
        D_combined=float(np.mean((s[1] - s2_hat) ** 2)),
        trace=trace,
    )
