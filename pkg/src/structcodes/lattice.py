"""Generator-matrix lattices: nearest-point quantizer, mod-lattice, dithers, second moments.

Row-vector convention throughout: lattice points are ``z @ gen`` for integer
row vectors ``z``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionError, DomainError, EnumerationTooLarge, NonPositiveTarget

MAX_ENUM_DIM = 8
MAX_CANDIDATES = 200_000
_WORK = 4_000_000


@dataclass(frozen=True, eq=False)
class Lattice:
    gen: np.ndarray

    def __post_init__(self):
        g = np.array(self.gen, dtype=float, copy=True)
        if g.ndim == 1 and g.size == 1:
            g = g.reshape(1, 1)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise DimensionError(f"generator must be square, got shape {g.shape}")
        if abs(np.linalg.det(g)) <= 1e-12:
            raise DomainError("generator matrix is singular")
        g.setflags(write=False)
        inv = np.linalg.inv(g)
        inv.setflags(write=False)
        object.__setattr__(self, "gen", g)
        object.__setattr__(self, "_inv", inv)

    @property
    def dim(self) -> int:
        return self.gen.shape[0]

    @property
    def gen_inv(self) -> np.ndarray:
        return self._inv

    @property
    def is_diagonal(self) -> bool:
        return np.count_nonzero(self.gen - np.diag(np.diag(self.gen))) == 0

    @property
    def volume(self) -> float:
        return abs(float(np.linalg.det(self.gen)))

    def scaled(self, c: float) -> "Lattice":
        return Lattice(c * self.gen)

    def coords(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self._inv

    def point(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float) @ self.gen

    def quantize(self, x) -> np.ndarray:
        return nearest_point(self, x)

    def mod(self, x) -> np.ndarray:
        return mod_lattice(self, x)

    def contains(self, x, tol: float = 1e-9) -> np.ndarray:
        c = self.coords(x)
        return np.all(np.abs(c - np.round(c)) <= tol, axis=-1)


def cubic(n: int, scale: float = 1.0) -> Lattice:
    return Lattice(scale * np.eye(n))


def hexagonal(scale: float = 1.0) -> Lattice:
    return Lattice(scale * np.array([[1.0, 0.0], [0.5, math.sqrt(3) / 2]]))


def d4(scale: float = 1.0) -> Lattice:
    """Checkerboard lattice D4: integer vectors with even coordinate sum."""
    return Lattice(scale * np.array([[2.0, 0, 0, 0], [1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1]]))


STANDARD = {"Z": lambda: cubic(1), "Z2": lambda: cubic(2), "A2": hexagonal, "D4": d4}


def standard_lattice(name: str) -> Lattice:
    try:
        return STANDARD[name]()
    except KeyError:
        raise DomainError(f"unknown lattice {name!r}; choose from {sorted(STANDARD)}") from None


def _as_batch(l: Lattice, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2 or xb.shape[1] != l.dim:
        raise DimensionError(f"expected vectors of dimension {l.dim}, got shape {x.shape}")
    return xb, single


def nearest_integer_coords(l: Lattice, x) -> np.ndarray:
    """Integer coordinates of the nearest lattice point.

    Diagonal generators round componentwise (half to even).  Otherwise the
    search covers every z with |z_i - c_i| <= r0 * ||column i of G^-1||,
    where c are the real coordinates of x and r0 the distance to the Babai
    rounding point; the true nearest point always lies in that box.  Ties go
    to the lexicographically smallest z.
    """
    xb, single = _as_batch(l, x)
    if l.is_diagonal:
        z = np.round(xb / np.diag(l.gen))
        return z[0] if single else z
    n = l.dim
    if n > MAX_ENUM_DIM:
        raise EnumerationTooLarge(f"general-lattice search supports n <= {MAX_ENUM_DIM}, got {n}")
    c = xb @ l.gen_inv
    z0 = np.round(c)
    r0 = np.linalg.norm(xb - z0 @ l.gen, axis=1)
    colnorm = np.linalg.norm(l.gen_inv, axis=0)
    out = np.empty_like(z0)
    # group points by box size so one outlier does not inflate every search
    half = np.ceil(0.5 + r0[:, None] * colnorm[None, :] + 1e-9).astype(int)
    keys = [tuple(h) for h in half]
    for key in sorted(set(keys)):
        rows = np.array([i for i, k in enumerate(keys) if k == key])
        count = math.prod(2 * h + 1 for h in key)
        if count > MAX_CANDIDATES:
            raise EnumerationTooLarge(f"{count} candidate points exceed the limit {MAX_CANDIDATES}")
        offsets = np.array(list(itertools.product(*[range(-h, h + 1) for h in key])), dtype=float)
        base = offsets @ l.gen
        chunk = max(1, _WORK // (count * n))
        for lo in range(0, rows.size, chunk):
            idx = rows[lo:lo + chunk]
            diff = (xb[idx] - z0[idx] @ l.gen)[:, None, :] - base[None, :, :]
            d2 = np.einsum("bkn,bkn->bk", diff, diff)
            best = d2.min(axis=1, keepdims=True)
            tol = 1e-12 * np.maximum(1.0, best)
            # offsets are in lexicographic order, so the first admissible index is the tie-break winner
            pick = np.argmax(d2 <= best + tol, axis=1)
            out[idx] = z0[idx] + offsets[pick]
    return out[0] if single else out


def nearest_point(l: Lattice, x) -> np.ndarray:
    return nearest_integer_coords(l, x) @ l.gen


def mod_lattice(l: Lattice, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x - nearest_point(l, x)


def mod_blocks(l: Lattice, x) -> np.ndarray:
    """Apply mod-lattice to consecutive length-``dim`` blocks along the last axis."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] % l.dim:
        raise DimensionError(f"length {x.shape[-1]} is not a multiple of lattice dimension {l.dim}")
    flat = x.reshape(-1, l.dim)
    return mod_lattice(l, flat).reshape(x.shape)


def sample_dither(l: Lattice, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform on the fundamental Voronoi region: uniform on the parallelepiped, then reduced mod the lattice."""
    shape = (l.dim,) if size is None else (size, l.dim)
    return mod_lattice(l, rng.random(shape) @ l.gen)


def sample_dither_blocks(l: Lattice, rng: np.random.Generator, length: int) -> np.ndarray:
    if length % l.dim:
        raise DimensionError(f"length {length} is not a multiple of lattice dimension {l.dim}")
    return sample_dither(l, rng, length // l.dim).reshape(length)


@dataclass(frozen=True)
class SecondMoment:
    value: float
    stderr: float
    samples: int


def second_moment(l: Lattice, samples: int, rng: np.random.Generator) -> SecondMoment:
    """Monte Carlo estimate of (1/n) E||d||^2 for a uniform dither d."""
    if samples < 10_000:
        raise DomainError("second_moment needs at least 10^4 samples")
    d = sample_dither(l, rng, samples)
    per = np.einsum("ij,ij->i", d, d) / l.dim
    return SecondMoment(float(per.mean()), float(per.std(ddof=1) / math.sqrt(samples)), samples)


def exact_second_moment(l: Lattice) -> float | None:
    """Closed form for diagonal generators (a box of side lengths a_i): mean(a_i^2)/12."""
    if not l.is_diagonal:
        return None
    return float(np.mean(np.diag(l.gen) ** 2) / 12.0)


REFERENCE_SAMPLES = 100_000


@lru_cache(maxsize=64)
def _reference_moment(gen_bytes: bytes, n: int) -> float:
    l = Lattice(np.frombuffer(gen_bytes, dtype=float).reshape(n, n))
    return second_moment(l, REFERENCE_SAMPLES, np.random.default_rng(0)).value


def reference_second_moment(l: Lattice) -> float:
    """Exact for diagonal generators; otherwise a fixed-seed Monte Carlo estimate, cached per generator."""
    exact = exact_second_moment(l)
    if exact is not None:
        return exact
    return _reference_moment(l.gen.tobytes(), l.dim)


def scale_to_second_moment(l: Lattice, target: float, rng: np.random.Generator | None = None, samples: int = 200_000) -> Lattice:
    """Rescale so the per-dimension second moment equals ``target``.

    With an ``rng`` a fresh estimate of the current moment is drawn from it;
    without one the cached reference estimate is used.
    """
    if not target > 0:
        raise NonPositiveTarget(f"target second moment must be positive, got {target}")
    current = exact_second_moment(l)
    if current is None:
        current = second_moment(l, samples, rng).value if rng is not None else reference_second_moment(l)
    return l.scaled(math.sqrt(target / current))


@dataclass(frozen=True)
class NestedPair:
    """Coarse lattice nested in a fine one; the code is the fine points inside the coarse Voronoi cell."""

    coarse: Lattice
    fine: Lattice

    def __post_init__(self):
        if self.coarse.dim != self.fine.dim:
            raise DimensionError("coarse and fine lattices differ in dimension")
        basis = self.coarse.gen @ self.fine.gen_inv
        if not np.allclose(basis, np.round(basis), atol=1e-9):
            raise DomainError("coarse lattice is not a sublattice of the fine lattice")

    @property
    def index(self) -> int:
        return int(round(self.coarse.volume / self.fine.volume))

    @property
    def rate(self) -> float:
        return math.log2(self.index) / self.coarse.dim

    def codebook(self, limit: int = 100_000) -> np.ndarray:
        """One fine-lattice point per coset of the coarse lattice, reduced into the coarse Voronoi region."""
        if self.index > limit:
            raise EnumerationTooLarge(f"nesting index {self.index} exceeds {limit}")
        zc = np.round(self.coarse.gen @ self.fine.gen_inv)
        corners = np.array(list(itertools.product([0, 1], repeat=zc.shape[0]))) @ zc
        lo, hi = corners.min(axis=0).astype(int), corners.max(axis=0).astype(int)
        count = math.prod(int(h - l + 1) for l, h in zip(lo, hi))
        if count > 50 * limit:
            raise EnumerationTooLarge(f"coset search box holds {count} points")
        box = np.array(list(itertools.product(*[range(l, h + 1) for l, h in zip(lo, hi)])), dtype=float)
        u = box @ np.linalg.inv(zc)
        keep = np.all((u >= -1e-9) & (u < 1 - 1e-9), axis=1)
        reps = box[keep] @ self.fine.gen
        if reps.shape[0] != self.index:
            raise DomainError(f"found {reps.shape[0]} coset representatives, expected {self.index}")
        return mod_lattice(self.coarse, reps)


def sphere_code(l: Lattice, radius: float, limit: int = MAX_CANDIDATES) -> np.ndarray:
    """Lattice points inside the closed ball of the given radius."""
    half = np.floor(radius * np.linalg.norm(l.gen_inv, axis=0) + 1e-9).astype(int)
    count = math.prod(int(2 * h + 1) for h in half)
    if count > limit:
        raise EnumerationTooLarge(f"{count} candidates exceed {limit}")
    z = np.array(list(itertools.product(*[range(-h, h + 1) for h in half])), dtype=float)
    pts = z @ l.gen
    return pts[np.einsum("ij,ij->i", pts, pts) <= radius**2 + 1e-9]
