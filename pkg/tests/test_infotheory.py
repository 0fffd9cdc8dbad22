import math

import numpy as np
import pytest

from structcodes.errors import DomainError, InvalidPmf
from structcodes.infotheory import Pmf, binary_entropy, pmf_entropy, xor_source_pmf


def test_binary_entropy_examples():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == 1.0
    by_hand = -0.11 * math.log(0.11, 2) - 0.89 * math.log(0.89, 2)
    assert binary_entropy(0.11) == pytest.approx(by_hand, abs=1e-15)
    assert binary_entropy(0.11) == pytest.approx(0.499915958164528, abs=1e-12)


def test_binary_entropy_symmetry_and_domain():
    for p in np.linspace(0, 1, 101):
        assert binary_entropy(p) == pytest.approx(binary_entropy(1 - p), abs=1e-14)
    for bad in (-0.01, 1.01, float("nan")):
        with pytest.raises(DomainError):
            binary_entropy(bad)


def test_pmf_entropy_examples():
    assert pmf_entropy(Pmf.uniform(4)) == pytest.approx(2.0)
    assert pmf_entropy(Pmf.point_mass(5, 2)) == 0.0
    assert pmf_entropy(Pmf([0.5, 0.25, 0.25])) == pytest.approx(1.5)
    # zero entries contribute nothing
    assert pmf_entropy(Pmf([0.5, 0.0, 0.5])) == pytest.approx(1.0)


def test_entropy_at_most_log_size_with_equality_only_for_uniform():
    rng = np.random.default_rng(3)
    for size in (2, 3, 5, 8):
        assert pmf_entropy(Pmf.uniform(size)) == pytest.approx(math.log2(size), abs=1e-12)
        for _ in range(50):
            p = rng.dirichlet(np.ones(size))
            p[-1] = 1.0 - p[:-1].sum()
            h = pmf_entropy(Pmf(p))
            assert h < math.log2(size) - 1e-9


def test_invalid_pmfs():
    for bad in ([0.5, 0.6], [-0.1, 1.1], [], [float("nan"), 1.0], [0.5, 0.5 + 1e-9]):
        with pytest.raises(InvalidPmf):
            Pmf(bad)


def test_symmetric_pmf():
    p = Pmf.symmetric(3, 0.3)
    assert p.probs.tolist() == pytest.approx([0.7, 0.15, 0.15])


def test_xor_source_examples():
    s = xor_source_pmf(0.0)
    assert s.u.probs.tolist() == [1.0, 0.0]
    s = xor_source_pmf(0.5)
    assert np.allclose(s.joint, 0.25)
    for p in np.linspace(0, 1, 21):
        m1, m2 = xor_source_pmf(p).marginals
        assert np.array_equal(m1, [0.5, 0.5]) and np.array_equal(m2, [0.5, 0.5])


def test_xor_source_sampling_matches_joint():
    s = xor_source_pmf(0.1)
    s1, s2 = s.sample(np.random.default_rng(0), 200_000)
    assert abs(np.mean(s1 ^ s2) - 0.1) < 0.003
    assert abs(np.mean(s1) - 0.5) < 0.005
