"""Finite-difference discretization of the interval (0, 1) with Dirichlet
boundary conditions, and the norm family built on it.

The state space H is the mesh-weighted l2 space on the n interior grid
points (weight h = 1/(n+1)), so continuum constants such as the first
Dirichlet eigenvalue pi^2 are recovered as n grows.  V-norms are
W^{m,p}_0-type seminorms assembled from difference operators whose
adjoints are exact at the matrix level:

    grad : forward difference with zero padding, H -> edge space
    div  : -grad^T (negative adjoint of grad)
    lap  : div @ grad, the tridiagonal Dirichlet Laplacian

The order-m difference alternates grad and (-lap), i.e. grad.(-lap)^{(m-1)/2}
for odd m and (-lap)^{m/2} for even m.  This keeps the seminorm spectrally
exact: ||D^m u||^2 = sum_k lambda_k^m <u, e_k>^2, so the sharp embedding
constant into H is exactly lambda_1^m.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DiscreteSpace",
    "NormKind",
    "H_NORM",
    "v_norm",
    "b_norm",
    "build_space",
    "norm",
    "embedding_constant",
]


@dataclass(frozen=True)
class DiscreteSpace:
    """Discretized Gelfand-triple stand-in on (0, 1) with n interior points.

    Immutable after construction; all arrays are read-only views.
    """

    n: int
    m: int
    h: float
    grad: np.ndarray          # (n+1, n) forward difference, Dirichlet padded
    div: np.ndarray           # (n, n+1) = -grad.T
    lap: np.ndarray           # (n, n) Dirichlet Laplacian, -lap positive definite
    diff_m: np.ndarray        # (rows_m, n) order-m difference operator
    eigenvalues: np.ndarray   # (n,) ascending, > 0
    eigenvectors: np.ndarray  # (n, n) columns e_k, orthonormal in <.,.>_H

    def inner_h(self, u, v):
        """Mesh-weighted H inner product; batched over leading axes."""
        return self.h * np.sum(np.asarray(u) * np.asarray(v), axis=-1)

    def norm_h(self, u):
        return np.sqrt(np.maximum(self.inner_h(u, u), 0.0))

    def eigen_coords(self, u):
        """Coefficients <u, e_k>_H; inverse of from_eigen_coords."""
        return self.h * (np.asarray(u) @ self.eigenvectors)

    def from_eigen_coords(self, c):
        return np.asarray(c) @ self.eigenvectors.T


@dataclass(frozen=True)
class NormKind:
    """Tagged norm selector: 'H', 'V' (with p, m), or 'B' (noise-intrinsic).

    The B norm needs an attached noise model supplying B^{-1}; requesting it
    without one is an error.
    """

    tag: str
    p: float = 2.0
    m: int = 1
    noise: object = field(default=None, compare=False)

    def label(self) -> str:
        if self.tag == "V":
            return f"V({self.p:g},{self.m})"
        return self.tag


H_NORM = NormKind("H")


def v_norm(p: float = 2.0, m: int = 1) -> NormKind:
    if p < 1:
        raise ValueError(f"V-norm needs p >= 1, got {p}")
    return NormKind("V", p=float(p), m=int(m))


def b_norm(noise) -> NormKind:
    return NormKind("B", noise=noise)


def _difference_operator(grad: np.ndarray, lap: np.ndarray, m: int) -> np.ndarray:
    k = -lap  # positive definite tridiagonal
    if m == 1:
        return grad
    op = np.linalg.matrix_power(k, m // 2)
    if m % 2:
        op = grad @ op
    return op


def build_space(n: int, m: int = 1) -> DiscreteSpace:
    """Build the discretization with n interior points and derivative order m.

    The eigensystem uses the closed forms

        lambda_k = (4/h^2) sin^2(k pi h / 2),
        e_k(j)   = sqrt(2) sin(j k pi / (n+1)),

    which are exactly H-orthonormal for the mesh weight h = 1/(n+1).

    Raises ValueError for n < 2 or when the order-m stencil does not fit
    (2m + 1 > n).
    """
    n = int(n)
    m = int(m)
    if n < 2:
        raise ValueError(f"need at least 2 interior grid points, got n={n}")
    if m < 1:
        raise ValueError(f"derivative order must be >= 1, got m={m}")
    if 2 * m + 1 > n:
        raise ValueError(f"order-{m} stencil does not fit on n={n} points (2m+1 > n)")

    h = 1.0 / (n + 1)
    grad = np.zeros((n + 1, n))
    idx = np.arange(n)
    grad[idx, idx] = 1.0 / h
    grad[idx + 1, idx] = -1.0 / h
    div = -grad.T
    lap = div @ grad

    k = np.arange(1, n + 1)
    eigenvalues = (4.0 / h**2) * np.sin(k * np.pi * h / 2.0) ** 2
    j = np.arange(1, n + 1)
    eigenvectors = np.sqrt(2.0) * np.sin(np.outer(j, k) * np.pi * h)

    diff_m = _difference_operator(grad, lap, m)
    for arr in (grad, div, lap, diff_m, eigenvalues, eigenvectors):
        arr.setflags(write=False)
    return DiscreteSpace(
        n=n, m=m, h=h, grad=grad, div=div, lap=lap, diff_m=diff_m,
        eigenvalues=eigenvalues, eigenvectors=eigenvectors,
    )


def norm(space: DiscreteSpace, kind: NormKind, u) -> float:
    """Evaluate the requested norm of an H-vector (or batch of them)."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != space.n:
        raise ValueError(f"vector length {u.shape[-1]} != space dimension {space.n}")
    if kind.tag == "H":
        return space.norm_h(u)
    if kind.tag == "V":
        op = space.diff_m if kind.m == space.m else _difference_operator(
            space.grad, space.lap, kind.m)
        w = u @ op.T
        return (space.h * np.sum(np.abs(w) ** kind.p, axis=-1)) ** (1.0 / kind.p)
    if kind.tag == "B":
        if kind.noise is None:
            raise ValueError("B-norm requested without an attached noise model")
        return kind.noise.b_norm(u)
    raise ValueError(f"unknown norm tag {kind.tag!r}")


def embedding_constant(space: DiscreteSpace, kind: NormKind) -> float:
    """Sharp constant c0 with ||u||_V^2 >= c0 ||u||_H^2 for the V(2, m) seminorm.

    Equals lambda_1^m, attained by the ground mode e_1.
    """
    if kind.tag != "V" or kind.p != 2.0:
        raise ValueError("embedding constant is defined for V(2, m) norms")
    return float(space.eigenvalues[0] ** kind.m)
