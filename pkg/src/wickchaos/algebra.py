"""The two multiplications on chaos expansions, and the S-transform.

Wick product: in the Hermite coefficient basis H_alpha ⋄ H_beta = H_{alpha+beta},
so X ⋄ Y is the graded convolution (X⋄Y)_alpha = sum_{beta+gamma=alpha}
x_beta y_gamma. Pointwise product: the Hu-Meyer/Hermite product formula

    He_a · He_b = sum_{r=0}^{a∧b} r! C(a,r) C(b,r) He_{a+b-2r}

applied per coordinate and summed over contraction multi-indexes r <= min(alpha, beta);
its contraction-free (r = 0) part is exactly the Wick product.

Products never truncate: results carry the full degree
x.max_degree + y.max_degree, so downstream L2 error computations stay exact.
"""

from __future__ import annotations

import math
import operator

import numpy as np

from . import _kernels
from .core import ChaosExpansion, _check_same_dim, gamma, l2_norm

__all__ = [
    "wick_product",
    "wick_power",
    "pointwise_product",
    "s_transform_eval",
    "wick_bound_check",
]


def wick_product(x: ChaosExpansion, y: ChaosExpansion, backend=None) -> ChaosExpansion:
    """Wick (convolution) product X ⋄ Y."""
    _check_same_dim(x, y)
    exps, vals = _kernels.convolve_terms(x.exponents, x.coeffs, y.exponents, y.coeffs, backend)
    return ChaosExpansion._from_arrays(x.dim, exps, vals)


def wick_power(x: ChaosExpansion, n: int, backend=None) -> ChaosExpansion:
    """n-th Wick power X^{⋄n}, n >= 1, by repeated squaring (O(log n) products)."""
    n = operator.index(n)
    if n < 1:
        raise ValueError("wick_power requires n >= 1 (the zeroth Wick power is undefined)")
    result = None
    base = x
    k = n
    while True:
        if k & 1:
            result = base if result is None else wick_product(result, base, backend=backend)
        k >>= 1
        if not k:
            return result
        base = wick_product(base, base, backend=backend)


def pointwise_product(
    x: ChaosExpansion, y: ChaosExpansion, max_contraction: int | None = None, backend=None
) -> ChaosExpansion:
    """Ordinary product X · Y via the Hu-Meyer contraction formula.

    max_contraction caps the total contraction order |r| (None = no cap);
    max_contraction=0 keeps only the trace-free term and reproduces
    wick_product exactly, bit for bit.
    """
    _check_same_dim(x, y)
    if max_contraction is None:
        cap = -1
    else:
        cap = operator.index(max_contraction)
        if cap < 0:
            raise ValueError("max_contraction must be None or a non-negative integer")
    exps, vals = _kernels.hu_meyer_terms(
        x.exponents, x.coeffs, y.exponents, y.coeffs, cap, backend
    )
    return ChaosExpansion._from_arrays(x.dim, exps, vals)


def s_transform_eval(x: ChaosExpansion, h) -> float:
    """S-transform value SX(h) = E[X · E(h)] = sum_alpha c_alpha h^alpha.

    A polynomial evaluation of the coefficient table; it maps the Wick
    product to the pointwise product of transforms.
    """
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 1 or h.shape[0] != x.dim:
        raise ValueError(f"dimension mismatch: h has shape {h.shape}, expansion dim {x.dim}")
    if not np.all(np.isfinite(h)):
        raise ValueError("non-finite entry in h")
    if x.n_terms == 0:
        return 0.0
    kmax = int(x.exponents.max())
    powers = np.empty((x.dim, kmax + 1))
    powers[:, 0] = 1.0
    for e in range(1, kmax + 1):
        powers[:, e] = powers[:, e - 1] * h
    monomials = np.ones(x.n_terms)
    for i in range(x.dim):
        monomials *= powers[i, x.exponents[:, i]]
    return float(np.sum(x.coeffs * monomials))


def wick_bound_check(xs, backend=None) -> tuple[float, float]:
    """Norm inequality data for a Wick product of several factors.

    Returns (lhs, rhs) with lhs = ||X_1 ⋄ ... ⋄ X_n|| and
    rhs = prod_i ||Gamma(sqrt(n)) X_i||; the guarantee is
    lhs <= rhs * (1 + 1e-10).
    """
    xs = list(xs)
    if not xs:
        raise ValueError("empty factor list")
    for y in xs[1:]:
        _check_same_dim(xs[0], y)
    n = len(xs)
    prod = xs[0]
    for y in xs[1:]:
        prod = wick_product(prod, y, backend=backend)
    lhs = l2_norm(prod)
    root = math.sqrt(n)
    rhs = 1.0
    for y in xs:
        rhs *= l2_norm(gamma(root, y))
    return lhs, rhs
