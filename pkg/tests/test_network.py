import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_min_cut
from structcodes.errors import AcyclicityRequired, AttemptsExhausted, DomainError, NonFiniteCapacity, ParseError, ValidationFailed
from structcodes.gf import PrimeField
from structcodes.infotheory import binary_entropy
from structcodes.network import (
    FIXTURES,
    MacNetwork,
    P2PEdge,
    P2PNetwork,
    batch_rank,
    binary_butterfly_multicast_trial,
    binary_butterfly_network,
    brute_force_min_cut,
    butterfly_split,
    construct_network_code,
    edmonds_karp,
    equivalent_p2p,
    exact_random_success,
    fixture_text,
    gaussian_butterfly_rate_trace,
    gaussian_butterfly_trial,
    load_fixture,
    multicast_maxflow,
    parse_network,
    single_attempt_success,
    topological_order,
    unit_butterfly,
    unit_pipes,
    validate_network,
)
from structcodes.rates import butterfly_gaussian_rates

F3 = PrimeField(3)


def _edit(name, fn):
    data = json.loads(fixture_text(name))
    fn(data)
    return parse_network(json.dumps(data))


def test_fixtures_validate():
    for name in FIXTURES:
        assert validate_network(load_fixture(name)) == []


def test_binary_fixture_matches_builder():
    assert load_fixture("butterfly_binary").to_dict() == {
        "description": load_fixture("butterfly_binary").description,
        **binary_butterfly_network(1.0, 0.11).to_dict(),
    }


def test_json_round_trip():
    for name in FIXTURES:
        n = load_fixture(name)
        assert MacNetwork.from_json(n.to_json()) == n


def test_mac_with_two_outputs_is_flagged():
    n = _edit("butterfly_binary", lambda d: d["edges_mn"].append({"from": 7, "to": 5}))
    msgs = [str(v) for v in validate_network(n)]
    assert any("mac 7" in m and "exactly one output" in m for m in msgs)


def test_dangling_endpoint_is_flagged():
    n = _edit("butterfly_binary", lambda d: d["edges_nn"].append({"from": 2, "to": 99, "capacity": 1.0}))
    assert any("99" in str(v) for v in validate_network(n))
    with pytest.raises(ValidationFailed):
        equivalent_p2p(n)


def test_other_violations():
    n = _edit("butterfly_binary", lambda d: d.update(receivers=[1, 5]))
    assert any("is the source" in str(v) for v in validate_network(n))
    n = _edit("butterfly_binary", lambda d: d["macs"][0].update(noise=[0.5, 0.6]))
    assert validate_network(n)
    n = _edit("butterfly_gaussian", lambda d: d.pop("power"))
    assert any(v.location == "power" for v in validate_network(n))


def test_parse_errors():
    with pytest.raises(ParseError, match="line 2"):
        parse_network('{"nodes": [1,\n ]}')
    with pytest.raises(ParseError, match="unknown keys"):
        parse_network(json.dumps({**json.loads(fixture_text("three_mac")), "colour": 1}))
    with pytest.raises(ParseError, match="missing keys"):
        parse_network("{}")
    with pytest.raises(ParseError):
        _edit("butterfly_binary", lambda d: d["edges_nn"][0].update(noise=1.0))


def test_no_mac_network_keeps_edges():
    n = _edit("butterfly_binary", lambda d: d.update(macs=[], edges_nm=[], edges_mn=[]))
    p = equivalent_p2p(n)
    assert [(e.tail, e.head, e.capacity) for e in p.edges] == [
        (f"v{e.tail}", f"v{e.head}", e.capacity) for e in n.edges_nn
    ]
    assert p.nodes == tuple(f"v{i}" for i in n.nodes)


def test_three_mac_relay_rates():
    p = equivalent_p2p(load_fixture("three_mac"))
    rates = {}
    for e in p.edges:
        if e.origin == "mn":
            rates[e.tail] = e.capacity
    assert rates["m11"] == pytest.approx(0.5 * math.log2(1 / 2 + 10 / 0.5))
    assert rates["m12"] == pytest.approx(0.5 * math.log2(1 / 2 + 10 / 1.0))
    assert rates["m13"] == pytest.approx(0.5 * math.log2(1 / 3 + 10 / 2.0))
    nm = [e for e in p.edges if e.origin == "nm" and e.head == "m13"]
    assert len(nm) == 3 and all(e.capacity == rates["m13"] for e in nm)
    assert "links: awgn" in p.flags


def test_gaussian_butterfly_transform():
    n = load_fixture("butterfly_gaussian")
    p = equivalent_p2p(n)
    r3 = [e.capacity for e in p.edges if e.origin == "mn"]
    assert r3 == [pytest.approx(0.5 * math.log2(0.5 + n.power / 1.0))]


def test_low_snr_mac_is_clamped():
    n = _edit("butterfly_gaussian", lambda d: d.update(power=0.1))
    p = equivalent_p2p(n)
    assert any("clamped" in f for f in p.flags)
    assert all(e.capacity >= 0 for e in p.edges)


def test_p2p_round_trip_and_finite_capacities():
    p = equivalent_p2p(load_fixture("three_mac"))
    assert P2PNetwork.from_json(p.to_json()) == p
    with pytest.raises(NonFiniteCapacity):
        P2PNetwork(("a", "b"), "a", ("b",), (P2PEdge("a", "b", math.inf),))


def test_maxflow_examples():
    r = multicast_maxflow(unit_butterfly())
    assert r.per_receiver == {"t1": 2.0, "t2": 2.0} and r.bound == 2.0
    path = P2PNetwork(("a", "b", "c"), "a", ("c",), (P2PEdge("a", "b", 0.75), P2PEdge("b", "c", 0.75)))
    assert multicast_maxflow(path).bound == 0.75
    assert multicast_maxflow(path, quantum=0.5).bound == 0.5


def test_maxflow_binary_butterfly_fixture():
    r = multicast_maxflow(equivalent_p2p(load_fixture("butterfly_binary")))
    m = 1 - binary_entropy(0.11)
    assert r.bound == pytest.approx(1 + math.floor(m * 1024) / 1024, abs=1e-12)
    assert abs(r.bound - (1 + m)) < r.quantum


def test_edmonds_karp_flows_are_feasible():
    edges = [(0, 1, 3), (0, 2, 2), (1, 2, 1), (1, 3, 2), (2, 3, 3), (0, 1, 1)]
    value, flows = edmonds_karp(4, edges, 0, 3)
    assert value == 5
    for (u, v, c), f in zip(edges, flows):
        assert 0 <= f <= c
    for node in (1, 2):
        inflow = sum(f for (u, v, _), f in zip(edges, flows) if v == node)
        outflow = sum(f for (u, v, _), f in zip(edges, flows) if u == node)
        assert inflow == outflow


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(2, 8),
    data=st.data(),
)
def test_maxflow_equals_min_cut(n, data):
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    chosen = data.draw(st.lists(st.sampled_from(pairs), max_size=20))
    caps = data.draw(st.lists(st.integers(0, 9), min_size=len(chosen), max_size=len(chosen)))
    edges = [(u, v, c) for (u, v), c in zip(chosen, caps)]
    value, _ = edmonds_karp(n, edges, 0, n - 1)
    assert value == brute_min_cut(n, edges, 0, n - 1) == brute_force_min_cut(n, edges, 0, n - 1)


def test_topological_order_rejects_cycles():
    p = P2PNetwork(("a", "b", "c"), "a", ("c",), (P2PEdge("a", "b", 1), P2PEdge("b", "c", 1), P2PEdge("c", "b", 1)))
    with pytest.raises(AcyclicityRequired):
        topological_order(p.nodes, unit_pipes(p))
    with pytest.raises(AcyclicityRequired):
        construct_network_code(p, PrimeField(2), np.random.default_rng(0))


def test_single_pipe_code():
    p = P2PNetwork(("s", "t"), "s", ("t",), (P2PEdge("s", "t", 1.0),))
    code = construct_network_code(p, PrimeField(2), np.random.default_rng(0), max_attempts=64)
    assert code.h == 1
    assert code.local[0][0][1] == 1
    assert single_attempt_success(p, PrimeField(2), seed=1, draws=2000) == pytest.approx(0.5, abs=0.04)


def test_field_must_exceed_receiver_count():
    with pytest.raises(DomainError):
        construct_network_code(unit_butterfly(), PrimeField(2), np.random.default_rng(0))


@pytest.mark.parametrize("method", ["random", "guided"])
def test_butterfly_code_round_trip(method):
    rng = np.random.default_rng(3)
    code = construct_network_code(unit_butterfly(), F3, rng, method=method, max_attempts=400)
    assert code.h == 2
    symbols = rng.integers(0, 3, size=(2, 25))
    values = code.encode(symbols)
    for r in code.receivers:
        assert np.array_equal(code.decode(r, code.observations(values, r)), symbols)
    assert json.loads(json.dumps(code.to_dict()))["h"] == 2


def test_random_method_can_run_out_of_attempts():
    outcomes = []
    for seed in range(30):
        try:
            construct_network_code(unit_butterfly(), F3, np.random.default_rng(seed), max_attempts=1)
            outcomes.append(True)
        except AttemptsExhausted:
            outcomes.append(False)
    assert not all(outcomes)


def test_exact_random_success_on_butterfly():
    exact = exact_random_success(unit_butterfly(), F3)
    assert exact == Fraction(4096, 177147)
    est = single_attempt_success(unit_butterfly(), F3, seed=5, draws=4000)
    assert abs(est - float(exact)) < 4 * math.sqrt(float(exact) / 4000)
    assert single_attempt_success(unit_butterfly(), F3, seed=5, draws=200, method="guided") == 1.0


def test_batch_rank_matches_scalar_rank():
    from structcodes.gf import FieldMatrix, mat_rank

    rng = np.random.default_rng(6)
    for q in (2, 3, 7):
        a = rng.integers(0, q, size=(200, 3, 4))
        a[::5, 2] = a[::5, 0]
        expected = [mat_rank(FieldMatrix(PrimeField(q), m)) for m in a]
        assert batch_rank(a, q).tolist() == expected


def test_butterfly_split():
    a, u = butterfly_split(1.0, 0.11, 18, 0.9)
    assert a == 18 and u == int(math.floor(0.9 * 18 * (2 - binary_entropy(0.11)) + 1e-9)) - 18
    with pytest.raises(DomainError):
        butterfly_split(1.0, 0.11, 18, 1.2)
    # the MAC chunk never exceeds the side chunk
    assert butterfly_split(0.25, 0.0, 16, 1.0) == (4, 4)


def test_binary_butterfly_noiseless_never_errs():
    rng = np.random.default_rng(7)
    for frac in (0.3, 0.7, 1.0):
        for _ in range(20):
            t = binary_butterfly_multicast_trial(1.0, 0.0, 12, frac, rng)
            assert not t.error
    t = binary_butterfly_multicast_trial(1.0, 0.0, 12, 1.0, rng)
    assert t.delivered_bits == 24 and t.rate == 2.0


def test_gaussian_trace():
    s = 1.0
    for ell in (1, 5, 10):
        t = gaussian_butterfly_rate_trace(s, 1.0, ell)
        assert t.D_quantized == 2 * t.D and t.D_direct == t.D / 2 and t.D_combined == pytest.approx(4.5 * t.D)
    Ds = [gaussian_butterfly_rate_trace(1.0, 1.0, ell).D for ell in range(1, 12)]
    assert all(a > b for a, b in zip(Ds, Ds[1:]))
    limit = butterfly_gaussian_rates(1.0, 1.0).r_struct
    t = gaussian_butterfly_rate_trace(1.0, 1.0, 10)
    assert t.limit == pytest.approx(limit)
    assert abs(t.rate - limit) <= math.log2(9) / 10 + 1e-12
    far = gaussian_butterfly_rate_trace(1.0, 1.0, 10_000)
    assert far.rate == pytest.approx(limit, abs=1e-3)
    with pytest.raises(DomainError):
        gaussian_butterfly_rate_trace(1.0, 1.0, 0)


def test_gaussian_trial_within_trace():
    r = gaussian_butterfly_trial(5.0, 1.0, 3, 50_000, np.random.default_rng(8))
    t = r.trace
    assert r.D_sum <= t.D
    assert r.D_sum_quantized <= t.D_quantized
    assert r.D_direct == pytest.approx(t.D_direct, rel=0.05)
    assert r.D_combined <= t.D_combined
