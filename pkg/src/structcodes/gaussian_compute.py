"""Computing sums of Gaussian sources over a Gaussian MAC by lattice refinement.

The scheme spends k channel uses on uncoded transmission and then runs
``ell - 1`` refinement stages.  In each stage encoder j sends
``x_j = ([gamma s_j + d_j] mod L) / sqrt(M)`` and the decoder forms
``t = alpha y - sum_j d_j - gamma u_hat``, reduces it mod L and updates
``u_hat += beta r``.

Two execution modes:

* ``ideal`` grants correct modulo recovery whenever the second-moment
  condition ``(alpha/sqrt(M) - 1)^2 M^2 P + alpha^2 N + gamma^2 sigma_q^2 <= MP``
  holds, standing in for high-dimensional lattices that are good for both
  quantization and coding.  Dithering and all encoder arithmetic still run on
  a cubic lattice of second moment MP, and every stage checks that the
  granted value differs from ``t`` by a lattice point.
* ``concrete`` uses a caller-supplied low-dimensional lattice; modulo wraps
  happen and are counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, LatticeRequired, PowerConditionViolated, VarianceMismatch
from .lattice import Lattice, cubic, exact_second_moment, mod_blocks, reference_second_moment, sample_dither_blocks, scale_to_second_moment

DEFAULT_EPS_GAMMA = 1e-6


@dataclass(frozen=True)
class GaussianMacParams:
    M: int
    P: float
    N: float
    sigma_s2: float
    k: int = 1
    ell: int = 1

    def __post_init__(self):
        if self.M < 1 or self.k < 1 or self.ell < 1:
            raise DomainError(f"need M, k, ell >= 1, got M={self.M}, k={self.k}, ell={self.ell}")
        if not (self.P > 0 and self.N > 0 and self.sigma_s2 > 0):
            raise DomainError("P, N and sigma_s2 must be positive")

    @property
    def n(self) -> int:
        return self.ell * self.k

    @property
    def snr(self) -> float:
        return self.P / self.N


@dataclass(frozen=True)
class SchemeConstants:
    alpha: float
    gamma: float
    gamma0: float
    beta: float
    sigma_q2: float
    power_lhs: float
    power_budget: float

    @property
    def slack(self) -> float:
        return self.power_budget - self.power_lhs


def uncoded_residual(M: int, P: float, N: float, sigma_s2: float) -> float:
    """MMSE residual of the sum after one uncoded use: M sigma^2 N / (N + MP)."""
    return M * sigma_s2 * N / (N + M * P)


def refinement_ratio(M: int, P: float, N: float) -> float:
    return M * N / (N + M * P)


def mmse_alpha(M: int, P: float, N: float) -> float:
    return M * P * math.sqrt(M) / (M * P + N)


def effective_noise_power(M: int, P: float, N: float, alpha: float) -> float:
    """Second moment of the self-noise plus channel-noise part of the modulo argument."""
    return (alpha / math.sqrt(M) - 1.0) ** 2 * M**2 * P + alpha**2 * N


def power_condition_lhs(M: int, P: float, N: float, alpha: float, gamma_sq: float, sigma_q2: float) -> float:
    """Left side of the second-moment condition; takes gamma^2 so the boundary identity can be checked formally."""
    return effective_noise_power(M, P, N, alpha) + gamma_sq * sigma_q2


def gamma0_squared(M: int, P: float, N: float, sigma_q2: float) -> float:
    """May be negative: then no gamma satisfies the condition and refinement cannot help."""
    return (M * P / sigma_q2) * (1.0 - refinement_ratio(M, P, N))


def derive_constants(p: GaussianMacParams, eps_gamma: float = DEFAULT_EPS_GAMMA, sigma_q2: float | None = None) -> SchemeConstants:
    """Refinement constants for side information of residual variance ``sigma_q2``.

    ``sigma_q2`` defaults to the uncoded-phase residual.  gamma is taken as
    ``(1 - eps_gamma) * gamma0``.
    """
    M, P, N = p.M, p.P, p.N
    sq = uncoded_residual(M, P, N, p.sigma_s2) if sigma_q2 is None else float(sigma_q2)
    if not (0.0 <= eps_gamma < 1.0):
        raise DomainError("eps_gamma must lie in [0, 1)")
    g0sq = gamma0_squared(M, P, N, sq)
    if g0sq <= 0.0:
        raise PowerConditionViolated(
            f"no admissible gamma: M N / (N + M P) = {refinement_ratio(M, P, N):.6g} >= 1 for M={M}, P/N={P / N:.6g}"
        )
    alpha = mmse_alpha(M, P, N)
    gamma0 = math.sqrt(g0sq)
    gamma = (1.0 - eps_gamma) * gamma0
    beta = sq * gamma / (M * P)
    lhs = power_condition_lhs(M, P, N, alpha, gamma * gamma, sq)
    budget = M * P
    if lhs > budget * (1 + 1e-12):
        raise PowerConditionViolated(f"second-moment condition fails: {lhs!r} > {budget!r}")
    return SchemeConstants(alpha, gamma, gamma0, beta, sq, lhs, budget)


def stage_mse(c: SchemeConstants, M: int, P: float, N: float) -> float:
    """Exact refinement-stage MSE at the chosen (finite) gamma."""
    return c.beta**2 * effective_noise_power(M, P, N, c.alpha) + (1.0 - c.beta * c.gamma) ** 2 * c.sigma_q2


def predicted_distortions(M: int, P: float, N: float, sigma_s2: float, ell: int) -> list[float]:
    """Distortion after each of the ``ell`` stages (uncoded first), with zero slack."""
    out = [uncoded_residual(M, P, N, sigma_s2)]
    ratio = refinement_ratio(M, P, N)
    for _ in range(ell - 1):
        out.append(out[-1] * ratio)
    return out


@dataclass
class PipelineResult:
    u: np.ndarray
    u_hat: np.ndarray
    empirical_mse: float
    predicted_mse: float
    stage_predicted: list[float]
    stage_empirical: list[float]
    constants: list[SchemeConstants] = field(default_factory=list)
    wrap_fraction: list[float] = field(default_factory=list)
    algebra_residual: float = 0.0
    encoder_power: float = 0.0


def _stage_lattice(mode: str, M: int, P: float, lattice: Lattice | None, rng: np.random.Generator) -> Lattice:
    if mode == "ideal":
        return cubic(1, math.sqrt(12.0 * M * P))
    if mode != "concrete":
        raise DomainError(f"mode must be 'ideal' or 'concrete', got {mode!r}")
    if lattice is None:
        raise LatticeRequired("concrete mode needs a lattice")
    target = M * P
    current = exact_second_moment(lattice)
    if current is not None and abs(current - target) <= 1e-12 * target:
        return lattice
    return scale_to_second_moment(lattice, target)


def run_scheme(
    p: GaussianMacParams,
    sources: np.ndarray,
    signs: list[np.ndarray],
    mode: str,
    rng: np.random.Generator,
    lattice: Lattice | None,
    dithers: np.ndarray | None,
    eps_gamma: float,
) -> list[PipelineResult]:
    """One set of encoders, one decoder per sign pattern (decoder i targets ``signs[i] @ sources``)."""
    M, P, N, k = p.M, p.P, p.N, p.k
    sources = np.asarray(sources, dtype=float)
    if sources.shape != (M, k):
        raise DomainError(f"sources must have shape {(M, k)}, got {sources.shape}")
    if dithers is not None and np.shape(dithers) != (p.ell - 1, M, k):
        raise DomainError(f"frozen dithers must have shape {(p.ell - 1, M, k)}")
    sqrt_n = math.sqrt(N)
    targets = [s @ sources for s in signs]
    stage_pred = predicted_distortions(M, P, N, p.sigma_s2, p.ell)
    results = [
        PipelineResult(u=t, u_hat=np.zeros(k), empirical_mse=0.0, predicted_mse=stage_pred[-1], stage_predicted=stage_pred, stage_empirical=[])
        for t in targets
    ]

    # uncoded phase
    g = math.sqrt(P / p.sigma_s2)
    x = g * sources
    power = [float(np.mean(x**2))]
    gain = g * M * p.sigma_s2 / (g * g * M * p.sigma_s2 + N)
    for res, s in zip(results, signs):
        y = s @ x + sqrt_n * rng.standard_normal(k)
        res.u_hat = gain * y
        res.stage_empirical.append(float(np.mean((res.u - res.u_hat) ** 2)))

    if p.ell > 1:
        lat = _stage_lattice(mode, M, P, lattice, rng)
        if k % lat.dim:
            raise DomainError(f"block length k={k} is not a multiple of lattice dimension {lat.dim}")
    sigma_q2 = stage_pred[0]
    for stage in range(p.ell - 1):
        c = derive_constants(p, eps_gamma, sigma_q2=sigma_q2)
        d = dithers[stage] if dithers is not None else np.stack([sample_dither_blocks(lat, rng, k) for _ in range(M)])
        v = mod_blocks(lat, c.gamma * sources + d)
        x = v / math.sqrt(M)
        power.append(float(np.mean(x**2)))
        for res, s in zip(results, signs):
            z = sqrt_n * rng.standard_normal(k)
            y = s @ x + z
            t = c.alpha * y - s @ d - c.gamma * res.u_hat
            eff = (c.alpha / math.sqrt(M) - 1.0) * (s @ v) + c.alpha * z + c.gamma * (res.u - res.u_hat)
            if mode == "ideal":
                r = eff
                # t and the granted value must differ by a lattice point
                res.algebra_residual = max(res.algebra_residual, float(np.max(np.abs(mod_blocks(lat, t - r)))))
            else:
                r = mod_blocks(lat, t)
                wrapped = np.any(np.abs(r - eff).reshape(-1, lat.dim) > 1e-9, axis=1)
                res.wrap_fraction.append(float(np.mean(wrapped)))
            res.u_hat = c.beta * r + res.u_hat
            res.constants.append(c)
            res.stage_empirical.append(float(np.mean((res.u - res.u_hat) ** 2)))
        sigma_q2 = sigma_q2 * refinement_ratio(M, P, N)

    for res in results:
        res.empirical_mse = res.stage_empirical[-1]
        res.encoder_power = float(np.mean(power))
    return results


def draw_sources(p: GaussianMacParams, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((p.M, p.k)) * math.sqrt(p.sigma_s2)


def sum_pipeline(
    p: GaussianMacParams,
    mode: str = "ideal",
    rng: np.random.Generator | None = None,
    lattice: Lattice | None = None,
    sources: np.ndarray | None = None,
    dithers: np.ndarray | None = None,
    eps_gamma: float = DEFAULT_EPS_GAMMA,
) -> PipelineResult:
    """Send the sum of M i.i.d. Gaussian sources over the MAC with ``ell`` channel uses per sample."""
    rng = np.random.default_rng() if rng is None else rng
    if mode == "concrete" and lattice is None:
        raise LatticeRequired("concrete mode needs a lattice")
    if sources is None:
        sources = draw_sources(p, rng)
    return run_scheme(p, sources, [np.ones(p.M)], mode, rng, lattice, dithers, eps_gamma)[0]


def linear_function_bound(J: int, q: int, sigma_max2: float, P: float, N: float, ell: int) -> float:
    return J * (q - 1) ** 2 * sigma_max2 * (J * N / (N + P)) ** ell


@dataclass
class LinearFunctionResult:
    u: np.ndarray
    u_hat: np.ndarray
    empirical_mse: float
    predicted_bound: float
    design_mse: float
    w_vars: np.ndarray
    w_values: np.ndarray
    sum_result: PipelineResult


def common_randomness_vars(betas, source_vars, q: int) -> np.ndarray:
    betas = np.asarray(betas, dtype=float)
    source_vars = np.asarray(source_vars, dtype=float)
    w = (q - 1) ** 2 * source_vars.max() - betas**2 * source_vars
    if np.any(w < -1e-12):
        raise VarianceMismatch(f"negative common-randomness variance: {w}")
    return np.maximum(w, 0.0)


def linear_function_pipeline(
    p: GaussianMacParams,
    betas,
    source_vars,
    q: int,
    rng: np.random.Generator,
    mode: str = "ideal",
    lattice: Lattice | None = None,
    eps_gamma: float = DEFAULT_EPS_GAMMA,
) -> LinearFunctionResult:
    """Estimate ``U = sum beta_j S_j`` (integer beta_j in [0, q)) by refining the sum of ``T_j = beta_j S_j + W_j``.

    The W_j are common randomness chosen so every T_j has the design variance
    ``(q-1)^2 max_j var(S_j)``; the decoder subtracts ``sum W_j`` at the end.
    ``p.M`` is the number of users and ``p.sigma_s2`` is ignored.
    """
    betas = [int(b) for b in betas]
    source_vars = np.asarray(source_vars, dtype=float)
    J = p.M
    if len(betas) != J or source_vars.shape != (J,):
        raise DomainError(f"need {J} coefficients and variances")
    if any(b < 0 or b >= q for b in betas):
        raise DomainError(f"coefficients must lie in [0, {q})")
    if np.any(source_vars <= 0):
        raise DomainError("source variances must be positive")
    design = (q - 1) ** 2 * float(source_vars.max())
    w_vars = common_randomness_vars(betas, source_vars, q)
    s = rng.standard_normal((J, p.k)) * np.sqrt(source_vars)[:, None]
    w = np.zeros((J, p.k))
    for j in range(J):
        if w_vars[j] > 0:
            w[j] = rng.standard_normal(p.k) * math.sqrt(w_vars[j])
    b = np.array(betas, dtype=float)
    t = b[:, None] * s + w
    dp = replace(p, sigma_s2=design)
    res = run_scheme(dp, t, [np.ones(J)], mode, rng, lattice, None, eps_gamma)[0]
    u = b @ s
    u_hat = res.u_hat - w.sum(axis=0)
    return LinearFunctionResult(
        u=u,
        u_hat=u_hat,
        empirical_mse=float(np.mean((u - u_hat) ** 2)),
        predicted_bound=linear_function_bound(J, q, float(source_vars.max()), p.P, p.N, p.ell),
        design_mse=res.predicted_mse,
        w_vars=w_vars,
        w_values=w,
        sum_result=res,
    )


def rate_from_distortion(sigma_s2: float, D: float, ell: int = 1) -> float:
    """Bits per channel use supported by a scheme reaching distortion D with ell uses per sample."""
    if not (D > 0):
        raise DomainError(f"distortion must be positive, got {D}")
    if D > sigma_s2:
        raise DomainError(f"distortion {D} exceeds the source variance {sigma_s2}")
    if ell < 1:
        raise DomainError("ell must be >= 1")
    return math.log2(sigma_s2 / D) / (2.0 * ell)


@dataclass
class RelayResult:
    D_u: float
    D_v: float
    D_s1: float
    D_s2: float
    D_u_relay: float
    D_v_relay: float
    D0: float
    relay_distortion: float
    worst_case_distortion: float
    achievable_rate: float
    empirical_rate: float
    clamped: bool
    requant_excess_rate: float = 0.0


def gaussian_requantize(x: np.ndarray, variance: float, D0: float, rng: np.random.Generator) -> np.ndarray:
    """Forward test channel of the Gaussian rate-distortion code: c (x + w)."""
    if D0 >= variance:
        return np.zeros_like(x)
    c = (variance - D0) / variance
    w = rng.standard_normal(x.shape) * math.sqrt(variance * D0 / (variance - D0))
    return c * (x + w)


def _lattice_requantize(x: np.ndarray, lat: Lattice, D0: float, rng: np.random.Generator) -> np.ndarray:
    """Subtractive-dither lattice quantizer with error second moment D0."""
    lq = scale_to_second_moment(lat, D0)
    d = sample_dither_blocks(lq, rng, x.size)
    return (x + d) - mod_blocks(lq, x + d) - d


def normalized_second_moment(lat: Lattice) -> float:
    return reference_second_moment(lat) / lat.volume ** (2.0 / lat.dim)


def sum_difference_relay_pipeline(
    P: float,
    N: float,
    R0: float,
    sigma_s2: float,
    ell: int,
    k: int,
    mode: str = "ideal",
    rng: np.random.Generator | None = None,
    lattice: Lattice | None = None,
    eps_gamma: float = DEFAULT_EPS_GAMMA,
) -> RelayResult:
    """Relay 1 sees ``X1 + X2 + Z1`` and refines ``s1 + s2``; relay 2 sees ``X1 - X2 + Z2`` and refines ``s1 - s2``.

    Each relay requantizes its estimate to ``D0 = 2 sigma^2 2^(-2 ell R0)`` and
    the destination forms ``(u +- v) / 2``.  ``achievable_rate`` converts the
    worst-case distortion ``max(4 sigma^2 r^ell, 2 D0)`` (``r = 2N/(N+2P)``)
    to bits; ``empirical_rate`` does the same with the measured distortion.
    """
    rng = np.random.default_rng() if rng is None else rng
    if R0 < 0:
        raise DomainError("R0 must be nonnegative")
    p = GaussianMacParams(M=2, P=P, N=N, sigma_s2=sigma_s2, k=k, ell=ell)
    sources = draw_sources(p, rng)
    res_u, res_v = run_scheme(p, sources, [np.array([1.0, 1.0]), np.array([1.0, -1.0])], mode, rng, lattice, None, eps_gamma)
    D0 = 2.0 * sigma_s2 * 2.0 ** (-2.0 * ell * R0)
    excess = 0.0
    if mode == "ideal":
        u_q = gaussian_requantize(res_u.u_hat, 2.0 * sigma_s2, D0, rng)
        v_q = gaussian_requantize(res_v.u_hat, 2.0 * sigma_s2, D0, rng)
    else:
        if lattice is None:
            raise LatticeRequired("concrete mode needs a lattice")
        u_q = _lattice_requantize(res_u.u_hat, lattice, D0, rng)
        v_q = _lattice_requantize(res_v.u_hat, lattice, D0, rng)
        excess = 0.5 * math.log2(2 * math.pi * math.e * normalized_second_moment(lattice))
    s1_hat = 0.5 * (u_q + v_q)
    s2_hat = 0.5 * (u_q - v_q)
    D_s1 = float(np.mean((sources[0] - s1_hat) ** 2))
    D_s2 = float(np.mean((sources[1] - s2_hat) ** 2))
    relay_D = sigma_s2 * (2.0 * N / (N + 2.0 * P)) ** ell
    worst_D = max(4.0 * relay_D, 2.0 * D0)
    clamped = worst_D >= sigma_s2
    rate = 0.0 if clamped else rate_from_distortion(sigma_s2, worst_D, ell)
    worst = max(D_s1, D_s2)
    emp_rate = 0.0 if worst >= sigma_s2 else rate_from_distortion(sigma_s2, worst, ell)
    return RelayResult(
        D_u=float(np.mean((res_u.u - u_q) ** 2)),
        D_v=float(np.mean((res_v.u - v_q) ** 2)),
        D_s1=D_s1,
        D_s2=D_s2,
        D_u_relay=res_u.empirical_mse,
        D_v_relay=res_v.empirical_mse,
        D0=D0,
        relay_distortion=relay_D,
        worst_case_distortion=worst_D,
        achievable_rate=rate,
        empirical_rate=emp_rate,
        clamped=clamped,
        requant_excess_rate=excess,
    )
