"""Monte Carlo bridge between coefficient algebra and distributions.

Hermite evaluation of expansions at Gaussian points, seeded sampling, the
Ornstein-Uhlenbeck/Mehler semigroup average, and one-sample
Kolmogorov-Smirnov statistics.

Randomness: numpy's PCG64 generator seeded explicitly, normal draws via
numpy's ziggurat transform. The draw set is a deterministic function of the
seed; the generator name is recorded in all sample metadata.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, ndtr

from . import _kernels
from ._kernels import FACTORIALS, MAX_EXACT_FACTORIAL
from .core import ChaosExpansion, expansion_hash

__all__ = [
    "HERMITE_DEGREE_CAP",
    "NORMALIZED_RECURRENCE_DEGREE",
    "GENERATOR_NAME",
    "SampleBatch",
    "OuEstimate",
    "hermite_eval",
    "evaluate",
    "sample_batch",
    "ou_apply_mc",
    "ks_statistic",
    "ks_critical_value",
    "write_samples_csv",
]

HERMITE_DEGREE_CAP = 4096

# Above this degree the plain recurrence He_{k+1} = x He_k - k He_{k-1} is
# swapped for the normalized one (He_k/sqrt(k!)) to dodge overflow near k~150.
NORMALIZED_RECURRENCE_DEGREE = 30

GENERATOR_NAME = "numpy-pcg64-ziggurat"

# Asymptotic one-sample KS critical point at the 5% level: 1.358 / sqrt(N).
KS_COEFF_5PCT = 1.358


def hermite_eval(k: int, x: float) -> float:
    """Probabilists' Hermite polynomial He_k(x) by three-term recurrence."""
    k = int(k)
    if k < 0:
        raise ValueError("degree must be non-negative")
    if k > HERMITE_DEGREE_CAP:
        raise ValueError(f"degree {k} exceeds cap {HERMITE_DEGREE_CAP}")
    x = float(x)
    if k <= NORMALIZED_RECURRENCE_DEGREE:
        prev, cur = 1.0, x
        if k == 0:
            return 1.0
        for j in range(1, k):
            prev, cur = cur, x * cur - j * prev
        return cur
    # normalized recurrence, then undo the sqrt(k!) scaling
    prev, cur = 1.0, x
    for j in range(1, k):
        prev, cur = cur, (x * cur - math.sqrt(j) * prev) / math.sqrt(j + 1)
    if k <= MAX_EXACT_FACTORIAL:
        return cur * math.sqrt(FACTORIALS[k])
    return cur * math.exp(0.5 * gammaln(k + 1))


def _scaled_coeffs(x: ChaosExpansion) -> np.ndarray:
    """Coefficients against the orthonormal basis: c_alpha * sqrt(alpha!)."""
    with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
        w = np.sqrt(FACTORIALS)[np.minimum(x.exponents, MAX_EXACT_FACTORIAL + 1)].prod(axis=1)
        out = w * x.coeffs
        bad = ~np.isfinite(out) | ((out == 0.0) & (x.coeffs != 0.0))
        if np.any(bad):
            lw = 0.5 * gammaln(x.exponents[bad] + 1.0).sum(axis=1)
            out[bad] = np.sign(x.coeffs[bad]) * np.exp(lw + np.log(np.abs(x.coeffs[bad])))
    return out


def _evaluate_points(x: ChaosExpansion, pts: np.ndarray, backend=None) -> np.ndarray:
    if x.max_degree > HERMITE_DEGREE_CAP:
        raise ValueError(f"expansion degree {x.max_degree} exceeds cap {HERMITE_DEGREE_CAP}")
    normalized = x.max_degree > NORMALIZED_RECURRENCE_DEGREE
    coefs = _scaled_coeffs(x) if normalized else x.coeffs
    return _kernels.eval_batch(x.exponents, coefs, pts, normalized, backend)


def evaluate(x: ChaosExpansion, xi) -> float:
    """Realize X at a point: sum_alpha c_alpha prod_i He_{alpha_i}(xi_i).

    Terms are summed ascending in (degree, lex) order.
    """
    xi = np.asarray(xi, dtype=np.float64).reshape(-1)
    if xi.shape[0] != x.dim:
        raise ValueError(f"dimension mismatch: point has length {xi.shape[0]}, dim {x.dim}")
    if not np.all(np.isfinite(xi)):
        raise ValueError("non-finite evaluation point")
    return float(_evaluate_points(x, xi.reshape(1, -1))[0])


@dataclass(frozen=True)
class SampleBatch:
    """Evaluations of an expansion at seeded i.i.d. standard Gaussian points."""

    values: np.ndarray
    seed: int
    size: int
    expansion_hash: str
    generator: str = GENERATOR_NAME


def sample_batch(x: ChaosExpansion, n_samples: int, seed: int) -> SampleBatch:
    """Draw n_samples Gaussian d-vectors from the seeded generator and evaluate X."""
    n_samples = int(n_samples)
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((n_samples, x.dim))
    values = _evaluate_points(x, pts)
    values.setflags(write=False)
    return SampleBatch(
        values=values, seed=int(seed), size=n_samples, expansion_hash=expansion_hash(x)
    )


@dataclass(frozen=True)
class OuEstimate:
    """Monte Carlo estimate of an Ornstein-Uhlenbeck semigroup value."""

    value: float
    std_error: float
    n_draws: int


def ou_apply_mc(x: ChaosExpansion, t: float, xi, n_draws: int, seed: int) -> OuEstimate:
    """Mehler average (P_t X)(xi) = E_zeta[ X(e^-t xi + sqrt(1-e^-2t) zeta) ].

    Converges to evaluate(gamma(e^-t, x), xi): second quantization at
    lambda in (0, 1] is the OU semigroup at time -log(lambda).
    """
    t = float(t)
    if not (t >= 0.0):
        raise ValueError("t must be non-negative")
    n_draws = int(n_draws)
    if n_draws < 1:
        raise ValueError("n_draws must be positive")
    xi = np.asarray(xi, dtype=np.float64).reshape(-1)
    if xi.shape[0] != x.dim:
        raise ValueError(f"dimension mismatch: point has length {xi.shape[0]}, dim {x.dim}")
    rng = np.random.default_rng(seed)
    zeta = rng.standard_normal((n_draws, x.dim))
    decay = math.exp(-t)
    spread = math.sqrt(-math.expm1(-2.0 * t))  # sqrt(1 - e^-2t), exact 0 at t=0
    vals = _evaluate_points(x, decay * xi + spread * zeta)
    value = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n_draws)) if n_draws > 1 else 0.0
    return OuEstimate(value=value, std_error=se, n_draws=n_draws)


def ks_statistic(samples, target: str, mu: float, sigma: float) -> float:
    """One-sample Kolmogorov-Smirnov sup-distance against a normal or lognormal CDF."""
    values = samples.values if isinstance(samples, SampleBatch) else np.asarray(samples, dtype=np.float64)
    n = values.shape[0]
    if n == 0:
        raise ValueError("empty sample batch")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    x = np.sort(values)
    if target == "normal":
        z = (x - mu) / sigma
    elif target == "lognormal":
        if x[0] <= 0.0:
            raise ValueError("non-positive sample under lognormal target")
        z = (np.log(x) - mu) / sigma
    else:
        raise ValueError(f"target must be 'normal' or 'lognormal', got {target!r}")
    cdf = ndtr(z)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - cdf)
    d_minus = np.max(cdf - (i - 1) / n)
    return float(max(d_plus, d_minus))


def ks_critical_value(n_samples: int) -> float:
    """Asymptotic 5%-level KS critical value 1.358 / sqrt(N)."""
    return KS_COEFF_5PCT / math.sqrt(n_samples)


def write_samples_csv(batch: SampleBatch, path, tool_version: str = "") -> None:
    """Write samples as 'index,value' CSV plus a JSON metadata sidecar."""
    with open(path, "w", newline="\n") as fh:
        if tool_version:
            fh.write(f"# tool: wickchaos {tool_version}\n")
        fh.write(f"# seed: {batch.seed}\n")
        fh.write(f"# expansion-hash: {batch.expansion_hash}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "value"])
        for i, v in enumerate(batch.values):
            writer.writerow([i, repr(float(v))])
    meta = {
        "seed": batch.seed,
        "N": batch.size,
        "generator": batch.generator,
        "expansion-hash": batch.expansion_hash,
    }
    with open(f"{path}.meta.json", "w", newline="\n") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
