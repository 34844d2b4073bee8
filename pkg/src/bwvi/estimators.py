"""Stochastic estimators of the energy gradient ``E(q) = E_q[U]``.

Four estimators, two per geometry:

====================  =========================  ==========================
quantity estimated    Hessian-based (Price)      first-order (reparam/Stein)
====================  =========================  ==========================
``grad_m E``          Bonnet: ``grad U(Z)``      same
``grad_C E`` (scale)  ``hess U(Z) @ C``          ``grad U(Z) eps'``
``grad_S E`` (cov.)   ``(1/2) hess U(Z)``        ``(1/2) C^{-T} eps grad U(Z)'``
====================  =========================  ==========================

with ``Z = C eps + m`` and ``eps`` standard normal.  Scale gradients follow
the chain rule on ``lambda -> E(q_lambda)`` (validated against central
finite differences of the closed-form quadratic energy), and are projected
to the lower-triangular subspace after mini-batch averaging since the
projection commutes with the expectation.

The Stein-identity covariance estimator carries the same factor 1/2 as
Price's so that both target ``grad_S E = (1/2) E_q[hess U]``; unlike the
Price form it is not almost surely symmetric and is deliberately left
unsymmetrized.

Noise is counter-based: a batch is reproduced exactly from its lineage
``(seed, stream, iteration)``, which is what makes paired comparisons
across estimators and bit-identical reruns possible.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, InvalidParameters
from .geometry import AffineMap, GaussianVariational, sample, symmetrize
from .targets import Potential, QuadraticPotential

__all__ = [
    "EstimatorKind",
    "NoiseBatch",
    "GradientEstimate",
    "draw_noise",
    "bonnet_location",
    "price_covariance",
    "price_scale",
    "reparam_scale",
    "reparam_covariance",
    "bw_gradient_field",
    "param_gradient",
    "bw_gradient",
]


class EstimatorKind(str, enum.Enum):
    """Estimator pairings for the two update rules."""

    BONNET_PRICE = "bonnet_price"
    BONNET_REPARAM = "bonnet_reparam"
    EXACT = "exact"


@dataclass(frozen=True)
class NoiseBatch:
    """Mini-batch of standard-normal draws with reproducible lineage.

    Attributes:
        draws: shape ``(n_samples, dim)``.
        seed_lineage: ``(seed, stream, iteration)`` that generated the draws.
    """

    draws: np.ndarray
    seed_lineage: tuple[int, int, int]

    def __post_init__(self):
        draws = np.array(self.draws, dtype=float)
        if draws.ndim != 2 or draws.shape[0] < 1:
            raise DimensionMismatch(f"draws must have shape (M, d), got {draws.shape}")
        draws.setflags(write=False)
        object.__setattr__(self, "draws", draws)
        object.__setattr__(self, "seed_lineage", tuple(int(v) for v in self.seed_lineage))

    @property
    def n_samples(self) -> int:
        return self.draws.shape[0]

    @property
    def dim(self) -> int:
        return self.draws.shape[1]


def draw_noise(dim: int, n_samples: int, seed: int, stream: int = 0, iteration: int = 0) -> NoiseBatch:
    """Draw ``n_samples`` standard-normal vectors from a counter-based stream.

    Identical ``(seed, stream, iteration)`` lineage yields bit-identical
    draws; distinct lineages are statistically independent.
    """
    if n_samples < 1:
        raise InvalidParameters(f"n_samples must be >= 1, got {n_samples}")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream, iteration))
    rng = np.random.default_rng(ss)
    return NoiseBatch(rng.standard_normal((n_samples, dim)), (seed, stream, iteration))


@dataclass(frozen=True)
class GradientEstimate:
    """One stochastic estimate of the energy gradient in a given geometry.

    ``geometry`` is ``"param_scale"`` (location + lower-triangular scale
    gradient) or ``"bw_covariance"`` (location + covariance gradient).
    ``n_samples`` is 0 for exact (noise-free) gradients.
    """

    location_grad: np.ndarray
    scale_grad: np.ndarray
    geometry: str
    n_samples: int


def _check_dims(target: Potential, q: GaussianVariational, noise: NoiseBatch):
    if q.dim != target.dim:
        raise DimensionMismatch(f"state dimension {q.dim} != target dimension {target.dim}")
    if noise.dim != q.dim:
        raise DimensionMismatch(f"noise dimension {noise.dim} != state dimension {q.dim}")


def bonnet_location(target: Potential, q: GaussianVariational, noise: NoiseBatch) -> np.ndarray:
    """Location gradient: mini-batch mean of ``grad U`` at the samples."""
    _check_dims(target, q, noise)
    z = sample(q, noise.draws)
    return np.asarray(target.grad(z)).mean(axis=0)


def price_covariance(target: Potential, q: GaussianVariational, noise: NoiseBatch) -> np.ndarray:
    """Covariance gradient via Price's theorem: half the mean Hessian.

    Symmetric by construction (symmetrized against roundoff).
    """
    _check_dims(target, q, noise)
    z = sample(q, noise.draws)
    return symmetrize(0.5 * target.hessian_mean(z))


def price_scale(target: Potential, q: GaussianVariational, noise: NoiseBatch) -> np.ndarray:
    """Scale gradient via Price's theorem: ``tril(mean_k hess U(Z_k) @ C)``."""
    _check_dims(target, q, noise)
    z = sample(q, noise.draws)
    return np.tril(target.hessian_mean(z) @ q.scale)


def reparam_scale(target: Potential, q: GaussianVariational, noise: NoiseBatch) -> np.ndarray:
    """First-order scale gradient: ``tril(mean_k grad U(Z_k) eps_k')``.

    Requires only gradients of the potential, no Hessians.
    """
    _check_dims(target, q, noise)
    e = noise.draws
    g = np.asarray(target.grad(sample(q, e)))
    return np.tril(g.T @ e / noise.n_samples)


def reparam_covariance(target: Potential, q: GaussianVariational, noise: NoiseBatch) -> np.ndarray:
    """First-order covariance gradient via Stein's identity.

    ``(1/2) mean_k Sigma^{-1} (Z_k - m) grad U(Z_k)'``, evaluated stably as
    ``(1/2) mean_k (C^{-T} eps_k) grad U(Z_k)'`` through a triangular solve.
    The summands are not almost surely symmetric and the mean is returned
    unsymmetrized; only its expectation is the symmetric ``grad_S E``.
    """
    _check_dims(target, q, noise)
    e = noise.draws
    g = np.asarray(target.grad(sample(q, e)))
    w = solve_triangular(q.scale, e.T, lower=True, trans="T").T
    return 0.5 * (w.T @ g) / noise.n_samples


def bw_gradient_field(
    location_grad: np.ndarray, covariance_grad: np.ndarray, q: GaussianVariational
) -> AffineMap:
    """Assemble the Bures-Wasserstein gradient field of the energy.

    Returns the tangent-space element ``x -> g_m + 2 g_S (x - m)`` as an
    affine map, given estimates ``g_m`` of the location gradient and
    ``g_S`` of the covariance gradient.
    """
    location_grad = np.asarray(location_grad, dtype=float)
    covariance_grad = np.asarray(covariance_grad, dtype=float)
    d = q.dim
    if location_grad.shape != (d,) or covariance_grad.shape != (d, d):
        raise DimensionMismatch(
            f"gradient shapes {location_grad.shape}/{covariance_grad.shape} "
            f"incompatible with dimension {d}"
        )
    linear = 2.0 * covariance_grad
    return AffineMap(linear=linear, shift=location_grad - linear @ q.mean)


def _exact_gradients(target: Potential, q: GaussianVariational) -> tuple[np.ndarray, np.ndarray]:
    if not isinstance(target, QuadraticPotential):
        raise InvalidParameters("exact gradients are only available for quadratic targets")
    return target.exact_gradients(q)


def param_gradient(
    kind: EstimatorKind | str,
    target: Potential,
    q: GaussianVariational,
    noise: NoiseBatch | None,
) -> GradientEstimate:
    """Location/scale gradient pair for the parameter-space update."""
    kind = EstimatorKind(kind)
    if kind is EstimatorKind.EXACT:
        loc, mean_hess = _exact_gradients(target, q)
        return GradientEstimate(loc, np.tril(mean_hess @ q.scale), "param_scale", 0)
    if noise is None:
        raise InvalidParameters("stochastic estimators require a noise batch")
    loc = bonnet_location(target, q, noise)
    if kind is EstimatorKind.BONNET_PRICE:
        scale = price_scale(target, q, noise)
    else:
        scale = reparam_scale(target, q, noise)
    return GradientEstimate(loc, scale, "param_scale", noise.n_samples)


def bw_gradient(
    kind: EstimatorKind | str,
    target: Potential,
    q: GaussianVariational,
    noise: NoiseBatch | None,
) -> GradientEstimate:
    """Location/covariance gradient pair for the Bures-Wasserstein update."""
    kind = EstimatorKind(kind)
    if kind is EstimatorKind.EXACT:
        loc, mean_hess = _exact_gradients(target, q)
        return GradientEstimate(loc, symmetrize(0.5 * mean_hess), "bw_covariance", 0)
    if noise is None:
        raise InvalidParameters("stochastic estimators require a noise batch")
    loc = bonnet_location(target, q, noise)
    if kind is EstimatorKind.BONNET_PRICE:
        cov = price_covariance(target, q, noise)
    else:
        cov = reparam_covariance(target, q, noise)
    return GradientEstimate(loc, cov, "bw_covariance", noise.n_samples)
