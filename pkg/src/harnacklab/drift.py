"""Monotone drift operators, their convex potentials, and empirical checks
of the dissipativity inequality

    2 <A(u) - A(v), u - v>_H <= -delta * N(u - v) + gamma * ||u - v||_H^2,

where N(w) = ||w||_V^alpha with the drift's natural V-norm.

Four drift families are provided:

    linear(lam):              A(u) = -lam * u                       (alpha = 2, V = H)
    reaction_diffusion(p, c): A(u) = lap u - c |u|^{p-2} u          (alpha = 2, V = V(2,1))
    p_laplace(p, c, pt):      A(u) = div(|grad u|^{p-2} grad u) - c |u|^{pt-2} u
                                                                    (alpha = p, V = V(p,1))
    high_order(p, c, pt):     A(u) = -D_m^T(|D_m u|^{p-2} D_m u) - c |u|^{pt-2} u
                                                                    (alpha = p, V = V(p,m))

Every drift is the negative H-gradient of a convex potential, so the
implicit (proximal) time step is a well-posed convex problem.  The
configured delta values come from the exact bilinear identity (linear,
reaction-diffusion Laplacian part) or from the power-difference inequality

    <|a|^r a - |b|^r b, a - b>  >=  2^{-r} |a - b|^{r+2},   r >= 0,

applied edgewise, which gives delta = 2^{3-p} for the p-type drifts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .space import DiscreteSpace, NormKind, H_NORM, v_norm, norm

__all__ = [
    "DriftModel",
    "MonotonicityReport",
    "linear",
    "reaction_diffusion",
    "p_laplace",
    "high_order",
    "signed_power",
    "lemma31_gap",
    "apply_drift",
    "potential",
    "check_monotonicity",
]

LINEAR = "linear"
REACTION_DIFFUSION = "reaction_diffusion"
P_LAPLACE = "p_laplace"
HIGH_ORDER = "high_order"


@dataclass(frozen=True)
class DriftModel:
    """A monotone drift with its coercivity exponent and (c1) constants.

    Immutable; all operations on it are pure.
    """

    kind: str
    space: DiscreteSpace
    alpha: float
    v_kind: NormKind
    delta: float
    gamma: float = 0.0
    p: float = 2.0
    p_tilde: float = 2.0
    c: float = 0.0
    lam: float = 1.0

    def n_functional(self, w) -> float:
        """N(w) = ||w||_V^alpha with the drift's natural V-norm."""
        return norm(self.space, self.v_kind, w) ** self.alpha

    def embedding_h(self) -> float:
        """Largest known c0 with N(u) >= c0 ||u||_H^alpha.

        Exact for alpha = 2 (spectral); a certified lower bound via the
        power-mean inequality for the p-type drifts (where the mesh factor
        h * rows is 1 for first-order differences).
        """
        lam1 = float(self.space.eigenvalues[0])
        if self.kind == LINEAR:
            return 1.0
        if self.kind == REACTION_DIFFUSION:
            return lam1
        rows = self.space.diff_m.shape[0] if self.kind == HIGH_ORDER else self.space.n + 1
        m = self.space.m if self.kind == HIGH_ORDER else 1
        return lam1 ** (m * self.p / 2.0) / (self.space.h * rows) ** (self.p / 2.0 - 1.0)


def _validate_powers(p: float, p_tilde: float, c: float) -> None:
    if p < 2:
        raise ValueError(f"drift exponent p must be >= 2, got {p}")
    if not 1 <= p_tilde <= p:
        raise ValueError(f"need 1 <= p_tilde <= p, got p_tilde={p_tilde}")
    if c < 0:
        raise ValueError(f"reaction coefficient c must be >= 0, got {c}")


def linear(space: DiscreteSpace, lam: float) -> DriftModel:
    """A(u) = -lam u with N(u) = ||u||_H^2; delta = 2 lam exactly."""
    if lam <= 0:
        raise ValueError(f"linear drift needs lam > 0, got {lam}")
    return DriftModel(kind=LINEAR, space=space, alpha=2.0, v_kind=H_NORM,
                      delta=2.0 * lam, lam=float(lam))


def reaction_diffusion(space: DiscreteSpace, p: float, c: float) -> DriftModel:
    """Laplacian plus monotone reaction -c|u|^{p-2}u; N(u) = ||u||_{V(2,1)}^2.

    The Laplacian part gives delta = 2 exactly; the reaction term is
    monotone so it only strengthens the inequality.  p in (1, 2) is
    unsupported (the implicit solve assumes p >= 2).
    """
    _validate_powers(p, min(p, 2.0), c)
    return DriftModel(kind=REACTION_DIFFUSION, space=space, alpha=2.0,
                      v_kind=v_norm(2, 1), delta=2.0, p=float(p), c=float(c))


def p_laplace(space: DiscreteSpace, p: float, c: float = 0.0,
              p_tilde: float = 2.0) -> DriftModel:
    """Discrete p-Laplacian drift; N(u) = ||u||_{V(p,1)}^p, delta = 2^{3-p}."""
    _validate_powers(p, p_tilde, c)
    return DriftModel(kind=P_LAPLACE, space=space, alpha=float(p),
                      v_kind=v_norm(p, 1), delta=2.0 ** (3.0 - p),
                      p=float(p), p_tilde=float(p_tilde), c=float(c))


def high_order(space: DiscreteSpace, p: float, c: float = 0.0,
               p_tilde: float = 2.0) -> DriftModel:
    """Order-m generalization using the space's D_m operator; delta = 2^{3-p}."""
    _validate_powers(p, p_tilde, c)
    return DriftModel(kind=HIGH_ORDER, space=space, alpha=float(p),
                      v_kind=v_norm(p, space.m), delta=2.0 ** (3.0 - p),
                      p=float(p), p_tilde=float(p_tilde), c=float(c))


def signed_power(x, r: float):
    """|x|^r * x, elementwise: the odd monotone power nonlinearity."""
    if r < 0:
        raise ValueError(f"signed_power needs r >= 0, got {r}")
    x = np.asarray(x, dtype=float)
    if r == 0:
        return x.copy() if x.ndim else x + 0.0
    return np.abs(x) ** r * x


def lemma31_gap(a, b, r: float) -> float:
    """<||a||^r a - ||b||^r b, a - b> - 2^{-r} ||a - b||^{r+2}.

    Nonnegative for every pair in a Hilbert space and every r >= 0, with
    equality at a = b (and at a = -b, where the constant 2^{-r} is sharp).
    Evaluated in the plain Euclidean inner product.
    """
    if r < 0:
        raise ValueError(f"lemma31_gap needs r >= 0, got {r}")
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    d = a - b
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    nd = np.linalg.norm(d)
    lhs = na**r * float(np.dot(a, d)) - nb**r * float(np.dot(b, d))
    return lhs - 2.0 ** (-r) * nd ** (r + 2)


def _operator_part(model: DriftModel, u: np.ndarray) -> np.ndarray:
    """The divergence-form part of A(u) in H coordinates (batched)."""
    sp = model.space
    if model.kind == LINEAR:
        return -model.lam * u
    if model.kind == REACTION_DIFFUSION:
        return u @ sp.lap.T
    op = sp.grad if model.kind == P_LAPLACE else sp.diff_m
    w = u @ op.T
    return -(signed_power(w, model.p - 2.0) @ op)


def apply_drift(model: DriftModel, u):
    """Evaluate A(u) in H coordinates; batched over leading axes."""
    u = np.asarray(u, dtype=float)
    out = _operator_part(model, u)
    if model.kind == REACTION_DIFFUSION and model.c:
        out = out - model.c * signed_power(u, model.p - 2.0)
    elif model.kind in (P_LAPLACE, HIGH_ORDER) and model.c:
        out = out - model.c * signed_power(u, model.p_tilde - 2.0)
    return out


def potential(model: DriftModel, u) -> float:
    """Convex potential Phi with A = -grad_H Phi; batched over leading axes.

    Directional derivatives satisfy d/dt Phi(u + t v)|_0 = -<A(u), v>_H.
    """
    u = np.asarray(u, dtype=float)
    h = model.space.h
    if model.kind == LINEAR:
        return 0.5 * model.lam * h * np.sum(u * u, axis=-1)
    if model.kind == REACTION_DIFFUSION:
        w = u @ model.space.grad.T
        val = 0.5 * h * np.sum(w * w, axis=-1)
        if model.c:
            val = val + (model.c / model.p) * h * np.sum(np.abs(u) ** model.p, axis=-1)
        return val
    op = model.space.grad if model.kind == P_LAPLACE else model.space.diff_m
    w = u @ op.T
    val = (1.0 / model.p) * h * np.sum(np.abs(w) ** model.p, axis=-1)
    if model.c:
        val = val + (model.c / model.p_tilde) * h * np.sum(
            np.abs(u) ** model.p_tilde, axis=-1)
    return val


def drift_hessian(model: DriftModel, u: np.ndarray) -> np.ndarray:
    """Batched Hessian of -A (= Hessian of Phi in the H metric), shape (..., n, n).

    Symmetric positive semidefinite for every drift kind.
    """
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    u = np.atleast_2d(u)
    mbatch, n = u.shape
    eye = np.eye(n)
    if model.kind == LINEAR:
        hess = np.broadcast_to(model.lam * eye, (mbatch, n, n)).copy()
    elif model.kind == REACTION_DIFFUSION:
        hess = np.broadcast_to(-model.space.lap, (mbatch, n, n)).copy()
        if model.c:
            d = model.c * (model.p - 1.0) * np.abs(u) ** (model.p - 2.0)
            hess[:, np.arange(n), np.arange(n)] += d
    else:
        op = model.space.grad if model.kind == P_LAPLACE else model.space.diff_m
        w = u @ op.T
        d = (model.p - 1.0) * np.abs(w) ** (model.p - 2.0)
        if mbatch <= 64:    # einsum's planner dominates small batches
            hess = np.matmul(op.T, op[None, :, :] * d[:, :, None])
        else:
            hess = np.einsum("ei,me,ej->mij", op, d, op, optimize=True)
        if model.c:
            dd = model.c * (model.p_tilde - 1.0) * np.abs(u) ** (model.p_tilde - 2.0)
            hess[:, np.arange(n), np.arange(n)] += dd
    return hess[0] if single else hess


@dataclass(frozen=True)
class MonotonicityReport:
    """Empirical check of the dissipativity inequality on random pairs."""

    delta_hat: float
    gamma_hat: float
    k_hat: float
    coercivity_margin: float
    violations: int
    sample_count: int
    delta_configured: float
    gamma_configured: float


def check_monotonicity(model: DriftModel, sample_count: int,
                       rng_seed: int = 0) -> MonotonicityReport:
    """Sample random pairs at H-norm scales {0.01, 1, 100} and test (c1).

    Reports the tightest delta consistent with the samples (at the
    configured gamma), the tightest gamma (at the configured delta), the
    monotonicity constant sup 2<A(u)-A(v),u-v>/||u-v||^2, the worst
    coercivity margin -2<A(u),u> - delta*N(u) + gamma*||u||^2, and the
    number of violations of the configured inequality.  A report with
    violations > 0 is valid output, not an error.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(rng_seed)
    sp = model.space
    scales = (0.01, 1.0, 100.0)
    delta_hat = np.inf
    gamma_hat = -np.inf
    k_hat = -np.inf
    margin = np.inf
    violations = 0
    total = 0
    per_scale = max(1, sample_count // len(scales))
    for scale in scales:
        u = rng.standard_normal((per_scale, sp.n))
        v = rng.standard_normal((per_scale, sp.n))
        u *= scale / np.maximum(sp.norm_h(u), 1e-300)[:, None]
        v *= scale / np.maximum(sp.norm_h(v), 1e-300)[:, None]
        w = u - v
        g = 2.0 * sp.inner_h(apply_drift(model, u) - apply_drift(model, v), w)
        nw = norm(sp, model.v_kind, w) ** model.alpha
        w2 = sp.inner_h(w, w)
        tol = 1e-9 * (np.abs(g) + model.delta * nw + abs(model.gamma) * w2) + 1e-300
        violations += int(np.sum(g > -model.delta * nw + model.gamma * w2 + tol))
        ok = nw > 1e-300
        delta_hat = min(delta_hat, float(np.min((model.gamma * w2[ok] - g[ok]) / nw[ok])))
        okw = w2 > 1e-300
        gamma_hat = max(gamma_hat, float(np.max((g[okw] + model.delta * nw[okw]) / w2[okw])))
        k_hat = max(k_hat, float(np.max(g[okw] / w2[okw])))
        g0 = 2.0 * sp.inner_h(apply_drift(model, u), u)
        margin = min(margin, float(np.min(
            -g0 - model.delta * norm(sp, model.v_kind, u) ** model.alpha
            + model.gamma * sp.inner_h(u, u))))
        total += per_scale
    return MonotonicityReport(
        delta_hat=delta_hat, gamma_hat=gamma_hat, k_hat=k_hat,
        coercivity_margin=margin, violations=violations, sample_count=total,
        delta_configured=model.delta, gamma_configured=model.gamma,
    )
