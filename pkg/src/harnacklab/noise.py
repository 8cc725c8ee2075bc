"""Diagonal Hilbert-Schmidt noise operators in the Laplacian eigenbasis.

The driving space U is identified with H through the eigenbasis, so a noise
operator is the diagonal map B e_k = b_k e_k with b_k = scale * lambda_k^{-theta}.
All b_k are strictly positive (non-degenerate noise), B^{-1} is exact, and
the intrinsic norm ||u||_B = ||B^{-1} u||_U is a plain l2 norm on the
eigen-coordinates divided by b.

Cylindrical increments are truncated to the n simulated modes; since the
discrete state has exactly n modes, no truncation error enters the discrete
system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .space import DiscreteSpace, NormKind, norm

__all__ = [
    "NoiseModel",
    "WienerIncrement",
    "build_noise",
    "sample_increment",
    "sample_increments",
    "apply_b",
    "apply_b_inverse",
    "xi_constant",
    "certified_xi",
]


@dataclass(frozen=True)
class NoiseModel:
    """Diagonal noise B = scale * L^{-theta} in the eigenbasis of the space."""

    space: DiscreteSpace
    theta: float
    scale: float
    b: np.ndarray          # (n,) per-mode coefficients, all > 0
    hs_norm_sq: float      # sum b_k^2 (squared Hilbert-Schmidt norm)
    c2_floor: float        # min_k b_k * sqrt(lambda_k), recorded at construction

    def b_norm(self, u):
        """Intrinsic norm ||B^{-1} u||_U; batched over leading axes."""
        return np.linalg.norm(self.space.eigen_coords(u) / self.b, axis=-1)


@dataclass(frozen=True)
class WienerIncrement:
    """One truncated cylindrical increment: U-coordinates and its image B dW in H."""

    dW_u: np.ndarray
    dt: float
    image_h: np.ndarray


def build_noise(space: DiscreteSpace, theta: float, scale: float = 1.0) -> NoiseModel:
    """Construct the diagonal model; rejects theta < 0 and scale <= 0."""
    if theta < 0:
        raise ValueError(f"noise exponent theta must be >= 0, got {theta}")
    if scale <= 0:
        raise ValueError(f"noise scale must be > 0, got {scale}")
    b = scale * space.eigenvalues ** (-theta)
    b.setflags(write=False)
    return NoiseModel(
        space=space, theta=float(theta), scale=float(scale), b=b,
        hs_norm_sq=float(np.sum(b**2)),
        c2_floor=float(np.min(b * np.sqrt(space.eigenvalues))),
    )


def sample_increments(model: NoiseModel, dt: float, size: int,
                      rng: np.random.Generator) -> np.ndarray:
    """(size, n) array of i.i.d. Normal(0, dt) U-coordinates."""
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    return rng.normal(0.0, np.sqrt(dt), size=(size, model.space.n))


def sample_increment(model: NoiseModel, dt: float,
                     rng: np.random.Generator) -> WienerIncrement:
    """Draw one increment; deterministic given the generator state."""
    dw = sample_increments(model, dt, 1, rng)[0]
    return WienerIncrement(dW_u=dw, dt=float(dt), image_h=apply_b(model, dw))


def apply_b(model: NoiseModel, w_u):
    """B applied to U-coordinates, returned in H coordinates; batched."""
    w_u = np.asarray(w_u, dtype=float)
    return (w_u * model.b) @ model.space.eigenvectors.T


def apply_b_inverse(model: NoiseModel, u):
    """U-coordinates of B^{-1} u; exact since all b_k > 0.  Batched."""
    return model.space.eigen_coords(u) / model.b


def xi_constant(model: NoiseModel, p: float, sigma: float, sample_count: int,
                rng_seed: int = 0, m: int | None = None) -> float:
    """Empirical infimum of ||u||_V^alpha / (||u||_B^sigma ||u||_H^{alpha-sigma}).

    Here alpha = p and the V-norm is V(p, m) with m defaulting to the
    space's order.  The ratio is homogeneous of degree zero, so sampling on
    the unit sphere suffices.  Requires sigma >= 2 and sigma > alpha - 2.
    """
    alpha = float(p)
    if sigma < 2 or sigma <= alpha - 2:
        raise ValueError(f"need sigma >= 2 and sigma > alpha-2, got sigma={sigma}, alpha={alpha}")
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    sp = model.space
    kind = NormKind("V", p=alpha, m=sp.m if m is None else int(m))
    rng = np.random.default_rng(rng_seed)
    u = rng.standard_normal((sample_count, sp.n))
    # include the pure modes: single-mode ratios are frequent minimizers
    u = np.vstack([u, sp.eigenvectors.T])
    nv = norm(sp, kind, u) ** alpha
    nb = model.b_norm(u)
    nh = sp.norm_h(u)
    ratio = nv / (nb**sigma * nh ** (alpha - sigma))
    xi_hat = float(np.min(ratio))
    if xi_hat <= 0:
        raise ValueError("degenerate (c2) ratio; noise model violates non-degeneracy")
    return xi_hat


def certified_xi(model: NoiseModel, alpha: float, sigma: float,
                 v_kind: NormKind, sample_count: int = 4000,
                 rng_seed: int = 123) -> tuple[float, str]:
    """Certified lower bound for the (c2) constant, with its provenance tag.

    Closed forms:
      * V = H (alpha = 2): xi = (min_k b_k)^sigma, exact (single-mode infimum).
      * V(2,1), alpha = sigma = 2, theta <= 1/2: xi = scale^2 * lambda_1^{1-2 theta},
        exact by the mediant inequality on eigen-coordinates.
      * V(p,m), sigma = alpha = p, theta = 1/2: power-mean chain
        xi = (lambda_1^{m-1} scale^2)^{p/2} / (h * rows)^{p/2 - 1}.
    Otherwise 0.9 times the sampled infimum (an overestimated xi would
    falsely tighten the Harnack constant).
    """
    sp = model.space
    lam1 = float(sp.eigenvalues[0])
    if v_kind.tag == "H":
        if alpha != 2:
            raise ValueError("H-norm N is only used with alpha = 2")
        return float(np.min(model.b) ** sigma), "exact-min-mode"
    if v_kind.tag == "V" and v_kind.p == 2 and v_kind.m == 1 \
            and alpha == 2 and sigma == 2 and model.theta <= 0.5:
        return float(model.scale**2 * lam1 ** (1.0 - 2.0 * model.theta)), "exact-spectral"
    if v_kind.tag == "V" and alpha == v_kind.p and sigma == alpha \
            and model.theta == 0.5 and v_kind.p >= 2:
        op_rows = sp.n if v_kind.m % 2 == 0 else sp.n + 1
        xi = (lam1 ** (v_kind.m - 1) * model.scale**2) ** (v_kind.p / 2.0) \
            / (sp.h * op_rows) ** (v_kind.p / 2.0 - 1.0)
        return float(xi), "holder-chain"
    xi_hat = xi_constant(model, p=alpha, sigma=sigma, sample_count=sample_count,
                         rng_seed=rng_seed, m=v_kind.m if v_kind.tag == "V" else None)
    return 0.9 * xi_hat, "sampled-0.9"
