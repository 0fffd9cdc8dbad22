"""Closed-form rate and distortion calculators (bits, base-2 logs).

Formulas that can go negative at low SNR are clamped at zero; each result
records which components were clamped instead of raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DomainError
from .gf import PrimeField
from .infotheory import Pmf, binary_entropy, pmf_entropy


def _positive(**kw) -> None:
    for name, v in kw.items():
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise DomainError(f"{name} must be positive and finite, got {v!r}")


def _clamp(value: float, name: str, flags: list[str]) -> float:
    if value < 0:
        flags.append(name)
        return 0.0
    return value


def awgn_capacity(P: float, N: float) -> float:
    _positive(P=P, N=N)
    return 0.5 * math.log2(1.0 + P / N)


def gaussian_rd(sigma2: float, D: float) -> float:
    _positive(sigma2=sigma2, D=D)
    return max(0.0, 0.5 * math.log2(sigma2 / D))


def additive_channel_capacity(field_: PrimeField, noise: Pmf) -> float:
    """log2 q - H(Z) for the q-ary additive noise channel, floored at 0."""
    if len(noise) != field_.q:
        raise DomainError(f"noise pmf has {len(noise)} entries, field has {field_.q}")
    return max(0.0, math.log2(field_.q) - pmf_entropy(noise))


@dataclass(frozen=True)
class DiscreteMacRates:
    C: float
    R_random: float | None


def discrete_mac_rates(field_: PrimeField, noise: Pmf, H_U: float, H_sources: float | None = None) -> DiscreteMacRates:
    """Computation capacity (log q - H(Z)) / H(U) and the full-recovery baseline (log q - H(Z)) / H(S_1..S_M)."""
    if not H_U > 0:
        raise DomainError(f"H(U) must be positive, got {H_U}")
    if H_sources is not None and not H_sources > 0:
        raise DomainError(f"joint source entropy must be positive, got {H_sources}")
    num = additive_channel_capacity(field_, noise)
    return DiscreteMacRates(C=num / H_U, R_random=None if H_sources is None else num / H_sources)


@dataclass(frozen=True)
class DistortionTriple:
    d_achievable: float
    d_lower: float
    d_random: float


def gaussian_sum_distortions(M: int, P: float, N: float, sigma_s2: float, ell: int) -> DistortionTriple:
    """Achievable (lattice refinement), lower bound, and full-recovery distortions for the sum of M sources."""
    _positive(P=P, N=N, sigma_s2=sigma_s2)
    if M < 1 or ell < 1:
        raise DomainError("M and ell must be >= 1")
    base = N / (N + M * P)
    return DistortionTriple(
        d_achievable=M * sigma_s2 * base * (M * N / (N + M * P)) ** (ell - 1),
        d_lower=M * sigma_s2 * base**ell,
        d_random=M * sigma_s2 * base ** (ell / M),
    )


@dataclass(frozen=True)
class RelayRates:
    r_lat: float
    r_df: float
    r_cf: float
    r_lat_finite_ell: float | None = None
    clamped: tuple[str, ...] = ()


def lattice_relay_rate(P: float, N: float, R0: float) -> float:
    """Unclamped min(1/2 log(1/2 + P/N), R0)."""
    return min(0.5 * math.log2(0.5 + P / N), R0)


def sum_difference_rates(P: float, N: float, R0: float, ell: int | None = None) -> RelayRates:
    _positive(P=P, N=N)
    if not (R0 >= 0 and math.isfinite(R0)):
        raise DomainError(f"R0 must be finite and nonnegative, got {R0}")
    if ell is not None and ell < 1:
        raise DomainError("ell must be >= 1")
    flags: list[str] = []
    r_lat = _clamp(lattice_relay_rate(P, N, R0), "r_lat", flags)
    r_df = min(0.25 * math.log2(1.0 + 2.0 * P / N), R0)
    g = 2.0 ** (2.0 * R0)
    r_cf = 0.5 * math.log2(1.0 + 2.0 * P * (g - 1.0) / (2.0 * P + N * g))
    finite = None
    if ell is not None:
        finite = _clamp(lattice_relay_rate(P, N, R0) - math.log2(4.0) / (2.0 * ell), "r_lat_finite_ell", flags)
    return RelayRates(r_lat, r_df, r_cf, finite, tuple(flags))


def relay_margin(snr: float) -> float:
    """R_LAT - max(R_DF, R_CF) at R0 = capacity of the relay links, with N = 1."""
    r = sum_difference_rates(snr, 1.0, awgn_capacity(snr, 1.0))
    return r.r_lat - max(r.r_df, r.r_cf)


def first_crossing(fn, lo: float, hi: float, points: int = 400, tol: float = 1e-4, log_grid: bool = True) -> float | None:
    """Smallest x in [lo, hi] where ``fn`` turns positive: grid scan for the first sign change, then bisection."""
    if not lo < hi:
        raise DomainError("need lo < hi")
    if log_grid:
        grid = [lo * (hi / lo) ** (i / (points - 1)) for i in range(points)]
    else:
        grid = [lo + (hi - lo) * i / (points - 1) for i in range(points)]
    if fn(grid[0]) > 0:
        return grid[0]
    prev = grid[0]
    for x in grid[1:]:
        if fn(x) > 0:
            a, b = prev, x
            while b - a > tol:
                mid = 0.5 * (a + b)
                if fn(mid) > 0:
                    b = mid
                else:
                    a = mid
            return 0.5 * (a + b)
        prev = x
    return None


def relay_crossover(lo: float = 0.1, hi: float = 20.0, tol: float = 1e-4) -> float | None:
    return first_crossing(relay_margin, lo, hi, tol=tol)


@dataclass(frozen=True)
class BinaryButterflyRates:
    capacity: float
    r_df: float
    r_cf: float


def butterfly_binary_rates(C: float, p: float) -> BinaryButterflyRates:
    if not (C >= 0 and math.isfinite(C)):
        raise DomainError(f"C must be finite and nonnegative, got {C}")
    m = 1.0 - binary_entropy(p)
    return BinaryButterflyRates(
        capacity=C + min(C, m),
        r_df=C + min(C, m / 2.0),
        r_cf=C + min(C * m, m),
    )


@dataclass(frozen=True)
class GaussianButterflyRates:
    r_struct: float
    r_df: float
    r_cf: float
    r3_lp: float
    r3_df: float
    clamped: tuple[str, ...] = ()


def butterfly_gaussian_rates(P: float, N: float) -> GaussianButterflyRates:
    _positive(P=P, N=N)
    s = P / N
    flags: list[str] = []
    direct = 0.5 * math.log2(1.0 + s)
    lp = _clamp(0.5 * math.log2(0.5 + s), "r3_lp", flags)
    df = 0.25 * math.log2(1.0 + 2.0 * s)
    return GaussianButterflyRates(
        r_struct=direct + lp,
        r_df=direct + df,
        r_cf=direct + 0.5 * math.log2(1.0 + s * P / (3.0 * P + N)),
        r3_lp=lp,
        r3_df=df,
        clamped=tuple(flags),
    )


@dataclass(frozen=True)
class LinearProcessingRates:
    r_lp: float
    r_df: float
    clamped: tuple[str, ...] = ()


def linear_processing_rate(J: int, P: float, N: float) -> float:
    """Unclamped 1/2 log(1/J + P/N)."""
    return 0.5 * math.log2(1.0 / J + P / N)


def linear_processing_rates(J: int, P: float, N: float) -> LinearProcessingRates:
    _positive(P=P, N=N)
    if J < 1:
        raise DomainError("J must be >= 1")
    flags: list[str] = []
    lp = _clamp(linear_processing_rate(J, P, N), "r_lp", flags)
    df = math.log2(1.0 + J * P / N) / (2.0 * J)
    return LinearProcessingRates(lp, df, tuple(flags))


def linear_processing_threshold(J: int, lo: float = 1e-3, hi: float = 1e3, tol: float = 1e-9) -> float | None:
    """SNR above which the structured rate beats the decode-and-forward rate (None for J = 1, where they agree)."""
    if J < 2:
        return None
    return first_crossing(
        lambda s: linear_processing_rate(J, s, 1.0) - math.log2(1.0 + J * s) / (2.0 * J), lo, hi, points=2000, tol=tol
    )


@dataclass(frozen=True)
class NetworkCounts:
    nodes: int
    macs: int
    edges: int
    max_capacity: float


@dataclass(frozen=True)
class NetworkBound:
    E_upper: int
    alpha_distortion: float
    P_lambda: float
    N_lambda: float
    D_ell: float
    rate: float
    rate_limit: float
    clamped: tuple[str, ...] = field(default=())


def network_scheme_bound(counts: NetworkCounts, q: int, lam: float, gamma_sources: int, ell: int) -> NetworkBound:
    """End-to-end distortion and rate of the generic network scheme.

    ``gamma_sources`` is the number of unit-variance sources sent per
    block (the achieved rate is ``gamma_sources * lam`` as ell grows) and
    ``alpha_distortion`` the worst-case distortion multiplier.  The noise
    level of a lam-bit pipe is normalized to 1 and its power set so that
    lam = 1/2 log(1 + P_lambda).
    """
    _positive(lam=lam, max_capacity=counts.max_capacity)
    if q < 2 or gamma_sources < 1 or ell < 1:
        raise DomainError("need q >= 2, gamma_sources >= 1 and ell >= 1")
    if min(counts.nodes, counts.edges) < 1 or counts.macs < 0:
        raise DomainError("network counts must be positive")
    E_upper = int(math.floor(counts.max_capacity / lam + 1e-12)) * counts.edges
    if E_upper < 1:
        raise DomainError("quantum lam exceeds every edge capacity")
    alpha = gamma_sources**2 * (counts.nodes + counts.macs) * E_upper * (q - 1) ** 2
    N_l = 1.0
    P_l = 2.0 ** (2.0 * lam) - 1.0
    D = alpha * (N_l / (N_l + P_l)) ** ell
    limit = gamma_sources * lam
    flags: list[str] = []
    rate = _clamp(limit - gamma_sources / (2.0 * ell) * math.log2(alpha), "rate", flags)
    return NetworkBound(E_upper, float(alpha), P_l, N_l, D, rate, limit, tuple(flags))
