"""Chaos expansions over a finite orthonormal Gaussian basis.

A polynomial functional of d independent standard Gaussians xi_1..xi_d is
stored by its coefficients against the unnormalized Hermite basis

    H_alpha(xi) = prod_i He_{alpha_i}(xi_i),

with He_k the probabilists' Hermite polynomials and alpha a multi-index
(a length-d tuple of non-negative exponents; |alpha| is the chaos order).
The basis is orthogonal with E[H_alpha H_beta] = alpha! * delta_{alpha,beta}
where alpha! = prod_i alpha_i!, so squared L2 norms are weighted coefficient
sums and the Wick product is plain graded coefficient convolution (see
wickchaos.algebra).

Values are immutable: every operation returns a new expansion and never
mutates its arguments, so instances are freely shareable across threads.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.special import gammaln

from ._kernels import FACTORIALS, MAX_EXACT_FACTORIAL, PRUNE_EPS, grade_lex_order

__all__ = [
    "ChaosExpansion",
    "ExpVectorResult",
    "make_expansion",
    "univariate",
    "constant",
    "l2_norm",
    "l2_norm_sq",
    "inner_product",
    "gamma",
    "project_degree",
    "exp_vector",
    "first_order_kernel",
    "multi_index_factorial",
    "multi_indexes_of_degree",
    "max_coeff_deviation",
    "to_json_dict",
    "from_json_dict",
    "expansion_hash",
]


def multi_index_factorial(alpha) -> float:
    """alpha! = prod_i alpha_i!; +inf once any exponent factorial overflows."""
    out = 1.0
    for e in alpha:
        out *= FACTORIALS[min(int(e), MAX_EXACT_FACTORIAL + 1)]
    return out


def multi_indexes_of_degree(dim: int, degree: int) -> Iterator[tuple[int, ...]]:
    """All multi-indexes of the given total degree, lexicographically ascending."""
    if dim == 1:
        yield (degree,)
        return
    for e0 in range(degree + 1):
        for rest in multi_indexes_of_degree(dim - 1, degree - e0):
            yield (e0,) + rest


def _weighted_products(exponents, a, b):
    """Per-term alpha! * a * b, robust to factorial overflow and product underflow.

    The direct product is exact for desk-scale terms; entries where it
    overflows/underflows are recomputed in log space (~1 ulp of the exponent).
    """
    if a.shape[0] == 0:
        return np.empty(0)
    with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
        w = FACTORIALS[np.minimum(exponents, MAX_EXACT_FACTORIAL + 1)].prod(axis=1)
        direct = w * (a * b)
        bad = ~np.isfinite(direct) | ((direct == 0.0) & (a != 0.0) & (b != 0.0))
        if np.any(bad):
            lw = gammaln(exponents[bad] + 1.0).sum(axis=1)
            sign = np.sign(a[bad]) * np.sign(b[bad])
            direct = direct.copy()
            direct[bad] = sign * np.exp(lw + np.log(np.abs(a[bad])) + np.log(np.abs(b[bad])))
    return direct


class ChaosExpansion:
    """Finite coefficient table multi-index -> real over a fixed basis size.

    Construct through :func:`make_expansion` (validating) or arithmetic on
    existing expansions. Terms are kept sorted by (degree, lexicographic
    exponents) with exact-zero/subnormal coefficients pruned.
    """

    __slots__ = ("dim", "exponents", "coeffs", "degrees", "max_degree", "_lookup")

    def __init__(self, dim, exponents, coeffs, _trusted=False):
        if not _trusted:
            raise TypeError("use make_expansion() to build expansions")
        self.dim = dim
        self.exponents = exponents
        self.coeffs = coeffs
        self.degrees = exponents.sum(axis=1)
        self.max_degree = int(self.degrees[-1]) if coeffs.shape[0] else 0
        self._lookup = None

    @classmethod
    def _from_arrays(cls, dim, exponents, coeffs):
        exponents = np.ascontiguousarray(exponents, dtype=np.int64).reshape(-1, dim)
        coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("non-finite coefficient")
        keep = np.abs(coeffs) >= PRUNE_EPS
        if not np.all(keep):
            exponents = exponents[keep]
            coeffs = coeffs[keep]
        order = grade_lex_order(exponents)
        exponents = np.ascontiguousarray(exponents[order])
        coeffs = np.ascontiguousarray(coeffs[order])
        exponents.setflags(write=False)
        coeffs.setflags(write=False)
        return cls(dim, exponents, coeffs, _trusted=True)

    @property
    def n_terms(self) -> int:
        return self.coeffs.shape[0]

    def mean(self) -> float:
        """E[X]: the coefficient at the zero multi-index."""
        if self.n_terms and self.degrees[0] == 0:
            return float(self.coeffs[0])
        return 0.0

    def coeff(self, alpha) -> float:
        """Coefficient at a multi-index (0.0 when absent)."""
        alpha = tuple(int(e) for e in alpha)
        if len(alpha) != self.dim:
            raise ValueError(f"multi-index length {len(alpha)} != dim {self.dim}")
        if self._lookup is None:
            self._lookup = {
                tuple(row): float(c) for row, c in zip(self.exponents.tolist(), self.coeffs)
            }
        return self._lookup.get(alpha, 0.0)

    def terms(self) -> Iterator[tuple[tuple[int, ...], float]]:
        """Iterate (multi-index, coefficient) in (degree, lex) order."""
        for row, c in zip(self.exponents.tolist(), self.coeffs):
            yield tuple(row), float(c)

    def __eq__(self, other):
        if not isinstance(other, ChaosExpansion):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.exponents, other.exponents)
            and np.array_equal(self.coeffs, other.coeffs)
        )

    def __hash__(self):
        return hash((self.dim, self.exponents.tobytes(), self.coeffs.tobytes()))

    def __add__(self, other):
        if not isinstance(other, ChaosExpansion):
            return NotImplemented
        _check_same_dim(self, other)
        exps = np.concatenate([self.exponents, other.exponents])
        vals = np.concatenate([self.coeffs, other.coeffs])
        if exps.shape[0] == 0:
            return ChaosExpansion._from_arrays(self.dim, exps, vals)
        uniq, inverse = np.unique(exps, axis=0, return_inverse=True)
        acc = np.zeros(uniq.shape[0])
        np.add.at(acc, inverse, vals)
        return ChaosExpansion._from_arrays(self.dim, uniq, acc)

    def __neg__(self):
        return ChaosExpansion._from_arrays(self.dim, self.exponents, -self.coeffs)

    def __sub__(self, other):
        if not isinstance(other, ChaosExpansion):
            return NotImplemented
        return self + (-other)

    def __mul__(self, scalar):
        if isinstance(scalar, ChaosExpansion):
            raise TypeError(
                "ambiguous product of two expansions: use wick_product() or pointwise_product()"
            )
        scalar = float(scalar)
        if not math.isfinite(scalar):
            raise ValueError("non-finite scalar")
        return ChaosExpansion._from_arrays(self.dim, self.exponents, self.coeffs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / float(scalar))

    def __repr__(self):
        head = ", ".join(
            f"{tuple(row)}: {c:.6g}" for row, c in zip(self.exponents[:4].tolist(), self.coeffs[:4])
        )
        tail = ", ..." if self.n_terms > 4 else ""
        return f"ChaosExpansion(dim={self.dim}, degree={self.max_degree}, {{{head}{tail}}})"


def _check_same_dim(x: ChaosExpansion, y: ChaosExpansion):
    if x.dim != y.dim:
        raise ValueError(f"dimension mismatch: {x.dim} != {y.dim}")


def make_expansion(dim: int, entries) -> ChaosExpansion:
    """Validated constructor from (multi-index, coefficient) pairs or a dict.

    Rejects length mismatches, negative/non-integer exponents, duplicate
    multi-indexes and non-finite coefficients.
    """
    if not isinstance(dim, (int, np.integer)) or dim < 1:
        raise ValueError(f"dim must be a positive integer, got {dim!r}")
    dim = int(dim)
    if isinstance(entries, dict):
        entries = entries.items()
    seen = set()
    rows = []
    vals = []
    for alpha, c in entries:
        alpha = tuple(alpha)
        if len(alpha) != dim:
            raise ValueError(f"multi-index {alpha} has length {len(alpha)}, expected {dim}")
        for e in alpha:
            if not isinstance(e, (int, np.integer)) or e < 0:
                raise ValueError(f"multi-index {alpha} has invalid exponent {e!r}")
        alpha = tuple(int(e) for e in alpha)
        if alpha in seen:
            raise ValueError(f"duplicate multi-index {alpha}")
        seen.add(alpha)
        c = float(c)
        if not math.isfinite(c):
            raise ValueError(f"non-finite coefficient at {alpha}")
        rows.append(alpha)
        vals.append(c)
    exps = np.array(rows, dtype=np.int64).reshape(len(rows), dim)
    return ChaosExpansion._from_arrays(dim, exps, np.array(vals))


def univariate(coeffs) -> ChaosExpansion:
    """Dim-1 expansion from dense per-degree coefficients [c_0, c_1, ...]."""
    return make_expansion(1, [((k,), c) for k, c in enumerate(coeffs)])


def constant(dim: int, value: float = 1.0) -> ChaosExpansion:
    """The constant random variable `value` in dimension dim."""
    return make_expansion(dim, [((0,) * dim, value)])


def l2_norm_sq(x: ChaosExpansion) -> float:
    """Squared L2 norm: sum_alpha alpha! c_alpha^2."""
    return float(np.sum(_weighted_products(x.exponents, x.coeffs, x.coeffs)))


def l2_norm(x: ChaosExpansion) -> float:
    return math.sqrt(l2_norm_sq(x))


def inner_product(x: ChaosExpansion, y: ChaosExpansion) -> float:
    """L2 inner product sum_alpha alpha! x_alpha y_alpha (polarized norm)."""
    _check_same_dim(x, y)
    if x.n_terms == 0 or y.n_terms == 0:
        return 0.0
    # align the two supports on their union
    exps = np.concatenate([x.exponents, y.exponents])
    uniq, inverse = np.unique(exps, axis=0, return_inverse=True)
    a = np.zeros(uniq.shape[0])
    b = np.zeros(uniq.shape[0])
    a[inverse[: x.n_terms]] = x.coeffs
    b[inverse[x.n_terms :]] = y.coeffs
    return float(np.sum(_weighted_products(uniq, a, b)))


def gamma(lam: float, x: ChaosExpansion) -> ChaosExpansion:
    """Second quantization: scale the order-n component by lam**n."""
    lam = float(lam)
    if not math.isfinite(lam):
        raise ValueError("non-finite lambda")
    return ChaosExpansion._from_arrays(
        x.dim, x.exponents, x.coeffs * np.power(lam, x.degrees.astype(np.float64))
    )


def project_degree(x: ChaosExpansion, m: int, mode: str = "at_most") -> ChaosExpansion:
    """Keep coefficients with |alpha| <= m ('at_most') or |alpha| == m ('exactly')."""
    if m < 0:
        raise ValueError("degree must be non-negative")
    if mode == "at_most":
        keep = x.degrees <= m
    elif mode == "exactly":
        keep = x.degrees == m
    else:
        raise ValueError(f"mode must be 'at_most' or 'exactly', got {mode!r}")
    return ChaosExpansion._from_arrays(x.dim, x.exponents[keep], x.coeffs[keep])


def first_order_kernel(x: ChaosExpansion) -> np.ndarray:
    """The degree-1 coefficient vector (c_{e_1}, ..., c_{e_d})."""
    h = np.zeros(x.dim)
    sel = x.degrees == 1
    for row, c in zip(x.exponents[sel], x.coeffs[sel]):
        h[int(np.argmax(row))] = c
    return h


@dataclass(frozen=True)
class ExpVectorResult:
    """Degree-truncated stochastic exponential plus its exact discarded L2 mass."""

    expansion: ChaosExpansion
    tail_norm_sq: float


def exp_vector(h, max_degree: int) -> ExpVectorResult:
    """Truncation of the stochastic exponential E(h) = exp(<h, xi> - |h|^2/2).

    The expansion carries coefficient h^alpha / alpha! for every |alpha| <=
    max_degree; tail_norm_sq is sum_{k > max_degree} |h|^(2k) / k!, summed
    forward in a stable cumulative form, so that
    l2_norm_sq(expansion) + tail_norm_sq = exp(|h|^2) up to rounding.
    """
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 1 or h.shape[0] < 1:
        raise ValueError("h must be a non-empty 1-d vector")
    if not np.all(np.isfinite(h)):
        raise ValueError("non-finite entry in h")
    if max_degree < 0:
        raise ValueError("max_degree must be non-negative")
    d = h.shape[0]
    support = np.nonzero(h)[0]
    # per-coordinate tables u[i][e] = h_i^e / e!
    tables = {}
    for i in support:
        u = np.empty(max_degree + 1)
        u[0] = 1.0
        for e in range(1, max_degree + 1):
            u[e] = u[e - 1] * h[i] / e
        tables[int(i)] = u
    rows = [(0,) * d]
    vals = [1.0]
    for k in range(1, max_degree + 1):
        if len(support) == 0:
            break
        for sub in multi_indexes_of_degree(len(support), k):
            alpha = [0] * d
            c = 1.0
            for i, e in zip(support, sub):
                alpha[int(i)] = e
                c *= tables[int(i)][e]
            rows.append(tuple(alpha))
            vals.append(c)
    expansion = ChaosExpansion._from_arrays(
        d, np.array(rows, dtype=np.int64).reshape(len(rows), d), np.array(vals)
    )
    # tail of sum_k |h|^(2k)/k! past the truncation degree
    hsq = float(h @ h)
    term = 1.0
    for k in range(1, max_degree + 1):
        term *= hsq / k
    tail = 0.0
    k = max_degree + 1
    while True:
        term *= hsq / k
        tail += term
        k += 1
        if term == 0.0 or term < tail * 1e-18:
            break
        if k > max_degree + 100000:  # unreachable at sane |h|; defensive
            break
    return ExpVectorResult(expansion=expansion, tail_norm_sq=tail)


def max_coeff_deviation(x: ChaosExpansion, y: ChaosExpansion) -> float:
    """Max absolute coefficient difference over the union of supports."""
    _check_same_dim(x, y)
    diff = x - y
    return float(np.max(np.abs(diff.coeffs))) if diff.n_terms else 0.0


# ---------------------------------------------------------------------------
# JSON serialization: {"dim": d, "coeffs": [{"alpha": [...], "c": float}]}
# ---------------------------------------------------------------------------


def to_json_dict(x: ChaosExpansion) -> dict:
    return {
        "dim": x.dim,
        "coeffs": [{"alpha": list(alpha), "c": c} for alpha, c in x.terms()],
    }


def from_json_dict(obj: dict) -> ChaosExpansion:
    if not isinstance(obj, dict) or "dim" not in obj or "coeffs" not in obj:
        raise ValueError("expansion JSON must carry 'dim' and 'coeffs'")
    entries = []
    for item in obj["coeffs"]:
        if not isinstance(item, dict) or "alpha" not in item or "c" not in item:
            raise ValueError("each coefficient entry must carry 'alpha' and 'c'")
        entries.append((tuple(item["alpha"]), item["c"]))
    return make_expansion(obj["dim"], entries)


def expansion_hash(x: ChaosExpansion) -> str:
    """Deterministic content hash of the canonical serialized form."""
    payload = json.dumps(to_json_dict(x), separators=(",", ":"), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]
