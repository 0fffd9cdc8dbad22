"""Linear codes over prime fields and the discrete computation schemes built on them.

Decoders are exhaustive maximum-likelihood searches, so they are exact but
only usable at desk-scale blocklengths (at most 2**24 hypotheses).  Vectors
are enumerated in lexicographic order and ties always resolve to the
lexicographically smallest hypothesis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DimensionError, DomainError, SearchTooLarge
from .gf import FieldMatrix, PrimeField, field_inverse, mat_rank, matmul_mod
from .infotheory import Pmf, binary_entropy, xor_source_pmf
from .montecarlo import ErrorRate, error_rate, run_trials

SEARCH_LIMIT = 2**24
_CHUNK = 1 << 16


@dataclass(frozen=True)
class LinearCode:
    """A generator (``kind="channel"``, k x n) or compression matrix (``kind="source"``, n x m).

    Encoding is always the row-vector product ``v @ gen``.
    """

    field: PrimeField
    gen: FieldMatrix
    kind: str = "channel"

    def __post_init__(self):
        if self.kind not in ("channel", "source"):
            raise DomainError(f"unknown code kind {self.kind!r}")
        if self.gen.field != self.field:
            raise DomainError("generator matrix lives over a different field")

    @property
    def input_len(self) -> int:
        return self.gen.rows

    @property
    def output_len(self) -> int:
        return self.gen.cols

    @property
    def rate(self) -> float:
        """Realized rate: k/n for channel codes, m/n for source codes."""
        if self.kind == "channel":
            return self.gen.rows / self.gen.cols
        return self.gen.cols / self.gen.rows

    def encode(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.int64)
        if v.shape[-1] != self.input_len:
            raise DimensionError(f"expected input length {self.input_len}, got {v.shape[-1]}")
        return matmul_mod(v, self.gen.entries, self.field.q)


@dataclass(frozen=True)
class DiscreteMacParams:
    """Discrete linear MAC ``Y = sum_j beta_j X_j + Z`` used to compute ``U = sum_j alpha_j S_j``."""

    field: PrimeField
    M: int
    alphas: tuple
    betas: tuple
    noise: Pmf
    n: int
    k: int

    def __post_init__(self):
        q = self.field.q
        alphas = tuple(int(a) % q for a in self.alphas)
        betas = tuple(int(b) % q for b in self.betas)
        if len(alphas) != self.M or len(betas) != self.M:
            raise DimensionError(f"need {self.M} alphas and betas")
        if any(b == 0 for b in betas):
            raise DomainError("channel coefficients beta_j must be nonzero")
        if len(self.noise) != q:
            raise DimensionError(f"noise pmf has {len(self.noise)} entries, field has {q}")
        if not (1 <= self.k) or not (1 <= self.n):
            raise DimensionError("blocklengths must be positive")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "betas", betas)

    @property
    def rate(self) -> float:
        return self.k / self.n


def ceil_len(n: int, rate: float) -> int:
    """``ceil(n * rate)`` with a guard against float fuzz (0.3 * 10 -> 3, not 4)."""
    return int(math.ceil(n * rate - 1e-9))


def random_linear_code(field: PrimeField, k: int, n: int, rng: np.random.Generator, kind: str = "channel") -> LinearCode:
    if not (1 <= k <= n):
        raise DimensionError(f"need 1 <= k <= n, got k={k}, n={n}")
    if kind == "channel":
        gen = FieldMatrix.random(field, k, n, rng)
    else:
        gen = FieldMatrix.random(field, n, k, rng)
    return LinearCode(field, gen, kind)


def random_source_code(field: PrimeField, n: int, rate: float, rng: np.random.Generator) -> LinearCode:
    """Compression matrix H (n x ceil(nR)) with i.i.d. uniform entries."""
    m = ceil_len(n, rate)
    if not (1 <= m <= n):
        raise DimensionError(f"rate {rate} gives syndrome length {m} for n={n}")
    return random_linear_code(field, m, n, rng, kind="source")


def _check_search(q: int, k: int) -> None:
    if k * math.log2(q) > math.log2(SEARCH_LIMIT) + 1e-12:
        raise SearchTooLarge(f"exhaustive search over {q}^{k} hypotheses exceeds 2^24")


def _messages(q: int, k: int, lo: int, hi: int) -> np.ndarray:
    idx = np.arange(lo, hi, dtype=np.int64)
    powers = q ** np.arange(k - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % q


def all_vectors(q: int, k: int) -> np.ndarray:
    """Every vector of F_q^k in lexicographic order."""
    _check_search(q, k)
    return _messages(q, k, 0, q**k)


def _weight_ll(ll: np.ndarray, n: int) -> np.ndarray:
    """log2 likelihood of a binary length-n word as a function of its weight."""
    w = np.arange(n + 1)
    with np.errstate(invalid="ignore"):
        one = np.where(w > 0, w * ll[1], 0.0)
        zero = np.where(n - w > 0, (n - w) * ll[0], 0.0)
    return one + zero


def _binary_map_search(gen: np.ndarray, y: np.ndarray, noise_ll: np.ndarray, prior_ll: np.ndarray | None) -> np.ndarray:
    """Same search as the generic path for F_2, scoring every codeword at once through packed bit counts."""
    k, n = gen.shape
    words = _syndrome_table(gen)
    score = _weight_ll(noise_ll, n)[np.bitwise_count(words ^ words.dtype.type(_pack_bits(y)))]
    if prior_ll is not None:
        score = score + _weight_ll(prior_ll, k)[_hamming_weights(k)]
    best = int(np.argmax(score))
    return (best >> np.arange(k - 1, -1, -1)) & 1


def _count_score(v: np.ndarray, ll: np.ndarray, q: int) -> np.ndarray:
    """Sum of ll over each row, computed from symbol counts so rows with equal composition tie exactly."""
    counts = np.stack([np.count_nonzero(v == a, axis=1) for a in range(q)], axis=1)
    with np.errstate(invalid="ignore"):
        return np.where(counts > 0, counts * ll[None, :], 0.0).sum(axis=1)


def _map_search(gen: np.ndarray, q: int, y: np.ndarray, noise_ll: np.ndarray, prior_ll: np.ndarray | None) -> np.ndarray:
    k = gen.shape[0]
    _check_search(q, k)
    if q == 2 and gen.shape[1] <= 62:
        return _binary_map_search(gen, y, noise_ll, prior_ll)
    total = q**k
    best_score, best_idx = -np.inf, 0
    for lo in range(0, total, _CHUNK):
        hi = min(total, lo + _CHUNK)
        msgs = _messages(q, k, lo, hi)
        z = np.mod(y[None, :] - matmul_mod(msgs, gen, q), q)
        score = _count_score(z, noise_ll, q)
        if prior_ll is not None:
            score = score + _count_score(msgs, prior_ll, q)
        i = int(np.argmax(score))
        # strict comparison keeps the earliest (lexicographically smallest) maximizer
        if score[i] > best_score:
            best_score, best_idx = score[i], lo + i
    return _messages(q, k, best_idx, best_idx + 1)[0]


def ml_decode_additive(code: LinearCode, y, noise: Pmf, prior: Pmf | None = None) -> np.ndarray:
    """Most likely message w given ``y = wG + z`` with i.i.d. noise ``z``.

    ``prior`` optionally weights each message symbol (MAP); without it this is
    plain maximum likelihood.
    """
    if code.kind != "channel":
        raise DomainError("ml_decode_additive needs a channel code")
    q = code.field.q
    y = np.mod(np.asarray(y, dtype=np.int64), q)
    if y.shape != (code.output_len,):
        raise DimensionError(f"received vector must have length {code.output_len}")
    if len(noise) != q:
        raise DimensionError("noise pmf size does not match the field")
    prior_ll = prior.log2_probs() if prior is not None else None
    return _map_search(code.gen.entries, q, y, noise.log2_probs(), prior_ll)


def union_bound_bsc(code: LinearCode, p: float) -> float:
    """Union bound on block error of ML decoding over a BSC(p), from codeword weights.

    Pairwise error to a weight-w codeword counts ties as errors, so the bound
    is valid for any tie-breaking rule.
    """
    if code.field.q != 2:
        raise DomainError("union_bound_bsc is for binary codes")
    cw = encode_all(code)[1:]
    weights = cw.sum(axis=1)
    if np.any(weights == 0):
        return 1.0
    total = 0.0
    for w, count in zip(*np.unique(weights, return_counts=True)):
        w = int(w)
        pair = sum(math.comb(w, e) * p**e * (1 - p) ** (w - e) for e in range((w + 1) // 2, w + 1))
        total += count * pair
    return min(1.0, total)


def encode_all(code: LinearCode) -> np.ndarray:
    return matmul_mod(all_vectors(code.field.q, code.input_len), code.gen.entries, code.field.q)


def minimum_distance(code: LinearCode) -> int:
    cw = encode_all(code)[1:]
    if cw.size == 0:
        return code.output_len
    return int(np.count_nonzero(cw, axis=1).min())


def select_channel_code(field: PrimeField, k: int, n: int, rng: np.random.Generator, draws: int = 1, max_rejections: int = 256) -> LinearCode:
    """Best of ``draws`` full-rank random generators, by (minimum distance, fewest minimum-weight words).

    ``draws=1`` with no rank failures is a plain draw from the random ensemble.
    Rank-deficient draws are rejected (up to ``max_rejections`` times) since
    they can never be decoded reliably.
    """
    best, best_key = None, None
    rejected = 0
    accepted = 0
    while accepted < draws:
        code = random_linear_code(field, k, n, rng)
        if mat_rank(code.gen) < k:
            rejected += 1
            if rejected > max_rejections:
                raise SearchTooLarge(f"no full-rank {k}x{n} generator after {max_rejections} draws")
            continue
        accepted += 1
        if draws == 1:
            return code
        weights = np.count_nonzero(encode_all(code)[1:], axis=1)
        dmin = int(weights.min())
        key = (-dmin, int(np.count_nonzero(weights == dmin)))
        if best_key is None or key < best_key:
            best, best_key = code, key
    return best


# --- Korner-Marton ---------------------------------------------------------


def km_encode(code: LinearCode, s) -> np.ndarray:
    """Syndrome ``s @ H`` of a source block."""
    if code.kind != "source":
        raise DomainError("km_encode needs a source (compression) code")
    s = np.asarray(s, dtype=np.int64)
    if s.shape[-1] != code.input_len:
        raise DimensionError(f"source block must have length {code.input_len}")
    return code.encode(s)


@lru_cache(maxsize=8)
def _hamming_weights(n: int) -> np.ndarray:
    w = np.zeros(1, dtype=np.int8)
    for _ in range(n):
        w = np.concatenate([w, w + 1])
    w.setflags(write=False)
    return w


def _pack_bits(bits) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


def _syndrome_table(h: np.ndarray) -> np.ndarray:
    """Syndrome (packed, first column most significant) of every u, indexed with u[0] as the top bit."""
    dtype = np.int32 if h.shape[1] <= 31 else np.int64
    table = np.zeros(1, dtype=dtype)
    for row in h[::-1]:
        table = np.concatenate([table, table ^ dtype(_pack_bits(row))])
    return table


def km_decode(code: LinearCode, syndrome, p: float) -> np.ndarray:
    """Most likely Bernoulli(p) block ``u`` with ``u @ H == syndrome`` over F_2."""
    if code.field.q != 2 or code.kind != "source":
        raise DomainError("km_decode needs a binary source code")
    n, m = code.gen.shape
    if n > 24:
        raise SearchTooLarge(f"exhaustive search over 2^{n} blocks exceeds 2^24")
    if m > 62:
        raise DimensionError("syndromes longer than 62 bits are not supported")
    syndrome = np.mod(np.asarray(syndrome, dtype=np.int64), 2)
    if syndrome.shape != (m,):
        raise DimensionError(f"syndrome must have length {m}")
    target = _pack_bits(syndrome)
    cand = np.flatnonzero(_syndrome_table(code.gen.entries) == target)
    if cand.size == 0:
        raise DomainError("syndrome is not in the image of H")
    w = np.arange(n + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ll = np.where(w > 0, w * np.log2(p), 0.0) + np.where(n - w > 0, (n - w) * np.log2(1 - p), 0.0)
    best = int(cand[np.argmax(ll[_hamming_weights(n)[cand]])])
    return (best >> np.arange(n - 1, -1, -1)) & 1


@dataclass(frozen=True)
class KmRegions:
    """Rate regions for recovering S1 xor S2: linear codes vs. random binning."""

    h: float

    @property
    def structured_corner(self) -> tuple[float, float]:
        return (self.h, self.h)

    @property
    def binning_sum(self) -> float:
        return 1.0 + self.h

    def structured_contains(self, r1: float, r2: float) -> bool:
        return r1 > self.h and r2 > self.h

    def binning_contains(self, r1: float, r2: float) -> bool:
        return r1 > self.h and r2 > self.h and r1 + r2 > self.binning_sum


def km_baseline_region(p: float) -> KmRegions:
    return KmRegions(binary_entropy(p))


def km_trial(p: float, n: int, rate: float, rng: np.random.Generator) -> bool:
    """One Korner-Marton block with a fresh random H; returns True on decoding error."""
    code = random_source_code(PrimeField(2), n, rate, rng)
    s1, s2 = xor_source_pmf(p).sample(rng, n)
    syndrome = np.mod(km_encode(code, s1) + km_encode(code, s2), 2)
    u_hat = km_decode(code, syndrome, p)
    return not np.array_equal(u_hat, s1 ^ s2)


def km_error_rate(p: float, n: int, rate: float, trials: int, seed: int) -> ErrorRate:
    return error_rate(run_trials(lambda rng: km_trial(p, n, rate, rng), seed, trials))


# --- computation over a discrete linear MAC --------------------------------


@dataclass(frozen=True)
class MacTrialOutcome:
    u: np.ndarray
    u_hat: np.ndarray
    noiseless_identity: bool

    @property
    def error(self) -> bool:
        return not np.array_equal(self.u, self.u_hat)


def discrete_mac_compute_trial(
    params: DiscreteMacParams,
    sources,
    H: FieldMatrix,
    G: FieldMatrix,
    rng: np.random.Generator,
    u_prior: Pmf | None = None,
) -> MacTrialOutcome:
    """Each encoder sends ``beta_j^-1 alpha_j s_j H G``; the decoder recovers ``u = sum alpha_j s_j``.

    ``u_prior`` is the per-symbol law of U; when omitted (uniform U) the
    decoder is plain ML.
    """
    f = params.field
    q = f.q
    sources = np.mod(np.asarray(sources, dtype=np.int64), q)
    if sources.shape[0] != params.M:
        raise DimensionError(f"expected {params.M} source rows, got {sources.shape[0]}")
    if H.rows != sources.shape[1] or G.rows != H.cols or G.cols != params.n:
        raise DimensionError(f"incompatible shapes: sources {sources.shape}, H {H.shape}, G {G.shape}, n={params.n}")
    HG = H @ G
    alphas = np.array(params.alphas, dtype=np.int64)
    betas = np.array(params.betas, dtype=np.int64)
    u = np.mod(alphas @ sources, q)
    scale = np.array([field_inverse(f, b) * a % q for a, b in zip(params.alphas, params.betas)], dtype=np.int64)
    x = matmul_mod(np.mod(scale[:, None] * sources, q), HG.entries, q)
    noiseless = np.mod(betas @ x, q)
    identity_ok = bool(np.array_equal(noiseless, matmul_mod(u, HG.entries, q)))
    z = params.noise.sample(rng, params.n)
    y = np.mod(noiseless + z, q)
    u_hat = ml_decode_additive(LinearCode(f, HG), y, params.noise, prior=u_prior)
    return MacTrialOutcome(u=u, u_hat=u_hat, noiseless_identity=identity_ok)


def mac_uniform_trial(
    q: int,
    alphas: Sequence[int],
    betas: Sequence[int],
    noise: Pmf,
    n: int,
    rate: float,
    rng: np.random.Generator,
) -> MacTrialOutcome:
    """Independent uniform sources, so U is uniform and H is the identity; G is a fresh random k x n code."""
    f = PrimeField(q)
    k = ceil_len(n, rate)
    if not (1 <= k <= n):
        raise DimensionError(f"rate {rate} gives message length {k} for n={n}")
    params = DiscreteMacParams(f, len(alphas), tuple(alphas), tuple(betas), noise, n, k)
    G = FieldMatrix.random(f, k, n, rng)
    sources = rng.integers(0, q, size=(params.M, k))
    return discrete_mac_compute_trial(params, sources, FieldMatrix.identity(f, k), G, rng)


def mac_error_rate(q: int, alphas, betas, noise: Pmf, n: int, rate: float, trials: int, seed: int) -> ErrorRate:
    outcomes = run_trials(lambda rng: mac_uniform_trial(q, alphas, betas, noise, n, rate, rng), seed, trials)
    return error_rate(o.error for o in outcomes)
