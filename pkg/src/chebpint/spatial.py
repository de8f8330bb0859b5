"""Spatial operators (apply + complex-shifted solve) and benchmark problems.

Every operator implements the contract used by the time-parallel driver:

- ``apply(v)``: the matrix action A @ v (batched over a leading axis),
- ``shifted_solve(sigma, g)``: solve (sigma*I + A) w = g for complex sigma,
- ``shifted_diag_solve(sigma, diag, g)``: solve (sigma*I + A + diag(d)) w = g,
  needed by the simplified Newton iteration where an averaged pointwise
  Jacobian rides on top of the stiff linear part.

``shifted_solve`` must be reentrant: the driver invokes it concurrently for
different shifts, so no method mutates shared scratch state.

The discrete Laplacians avoid external sparse solvers: the Dirichlet
operator on a square is diagonalized exactly by the type-I discrete sine
transform and the periodic one by the FFT, giving O(m log m) shifted solves.
A dense operator wrapper covers small ODE systems and oracle tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.fft
import scipy.linalg
import scipy.sparse as sparse
import scipy.sparse.linalg as sparse_linalg

from .errors import (
    DimensionMismatchError,
    SingularShiftError,
    UnsupportedKindError,
)

__all__ = [
    "SpatialOperator",
    "DenseOperator",
    "SineLaplacian2D",
    "PeriodicLaplacian1D",
    "make_dense_operator",
    "make_laplacian_2d_dirichlet",
    "make_laplacian_1d_periodic",
    "SemilinearProblem",
    "BenchmarkProblem",
    "make_benchmark",
]

_SHIFT_FLOOR = 1e-12


class SpatialOperator:
    """Contract: linear action and complex-shifted solves of dimension m."""

    m: int

    def apply(self, v):
        raise NotImplementedError

    def shifted_solve(self, sigma, g):
        raise NotImplementedError

    def shifted_diag_solve(self, sigma, diag, g):
        raise NotImplementedError(
            f"{type(self).__name__} does not support diagonal-perturbed solves"
        )

    def _check_dim(self, v):
        v = np.asarray(v)
        if v.shape[-1] != self.m:
            raise DimensionMismatchError(
                f"operator dimension {self.m}, got vector with {v.shape[-1]}"
            )
        return v


class DenseOperator(SpatialOperator):
    """Any square matrix; shifted solves factorize per shift."""

    def __init__(self, A):
        A = np.asarray(A)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatchError("A must be square")
        self.A = A
        self.m = A.shape[0]

    def apply(self, v):
        v = self._check_dim(v)
        return v @ self.A.T

    def shifted_solve(self, sigma, g):
        g = self._check_dim(g)
        M = self.A.astype(complex) + sigma * np.eye(self.m)
        try:
            return np.linalg.solve(M, g)
        except np.linalg.LinAlgError as exc:
            raise SingularShiftError(sigma, str(exc)) from exc

    def shifted_diag_solve(self, sigma, diag, g):
        g = self._check_dim(g)
        M = self.A.astype(complex) + sigma * np.eye(self.m) + np.diag(diag)
        try:
            return np.linalg.solve(M, g)
        except np.linalg.LinAlgError as exc:
            raise SingularShiftError(sigma, str(exc)) from exc


def _dst2(a, scale):
    """Orthonormalized 2D type-I DST (its own inverse up to `scale`)."""
    return scipy.fft.dstn(a, type=1) * scale


class SineLaplacian2D(SpatialOperator):
    """Minus the 5-point Laplacian on the interior of a square, Dirichlet BC.

    Grid: points_per_dim interior points per direction with spacing h, domain
    side L = (points_per_dim + 1) * h.  Eigenvectors are the sampled sine
    modes; eigenvalues (4/h^2)(sin^2(k*pi*h/(2L)) + sin^2(l*pi*h/(2L))).
    Shifted solves go through the type-I DST diagonalization; `matrix` gives
    the equivalent sparse stencil for Jacobian-perturbed solves.
    """

    def __init__(self, points_per_dim, h):
        if points_per_dim < 1:
            raise ValueError("points_per_dim must be >= 1")
        if h <= 0:
            raise ValueError("h must be positive")
        self.points_per_dim = int(points_per_dim)
        self.h = float(h)
        self.L = (points_per_dim + 1) * h
        self.m = self.points_per_dim**2
        k = np.arange(1, points_per_dim + 1)
        mu1 = (4.0 / h**2) * np.sin(k * np.pi * h / (2.0 * self.L)) ** 2
        self.modes2d = mu1[:, None] + mu1[None, :]
        self._dst_scale = 1.0 / (2.0 * (points_per_dim + 1)) ** 2
        self._matrix = None

    def matrix(self):
        """Sparse CSR form of the stencil (cached)."""
        if self._matrix is None:
            p = self.points_per_dim
            main = np.full(p, 2.0)
            off = np.full(p - 1, -1.0)
            T1 = sparse.diags([off, main, off], [-1, 0, 1]) / self.h**2
            eye = sparse.identity(p)
            self._matrix = (sparse.kron(T1, eye) + sparse.kron(eye, T1)).tocsr()
        return self._matrix

    def grid(self):
        """Interior points (X, Y), 'ij' indexing, raveled C-order."""
        pts = np.arange(1, self.points_per_dim + 1) * self.h
        return np.meshgrid(pts, pts, indexing="ij")

    def apply(self, v):
        v = self._check_dim(v)
        return (self.matrix() @ np.atleast_2d(v).T).T.reshape(v.shape)

    def shifted_solve(self, sigma, g):
        g = self._check_dim(g)
        denom = sigma + self.modes2d
        small = np.abs(denom).min()
        if small < _SHIFT_FLOOR:
            k = np.unravel_index(np.argmin(np.abs(denom)), denom.shape)
            raise SingularShiftError(
                sigma, f"collides with mode {tuple(int(i) + 1 for i in k)}"
            )
        p = self.points_per_dim
        ghat = _dst2(g.reshape(p, p), 1.0)
        what = ghat / denom
        return (_dst2(what, self._dst_scale)).reshape(g.shape)

    def shifted_diag_solve(self, sigma, diag, g):
        g = self._check_dim(g)
        M = (self.matrix().astype(complex)
             + sparse.diags(np.asarray(diag) + sigma)).tocsc()
        # stencil + diagonal has a symmetric pattern; the AT+A ordering cuts
        # the factor fill roughly in half versus the default
        lu = sparse_linalg.splu(M, permc_spec="MMD_AT_PLUS_A")
        return lu.solve(g.astype(complex))


class PeriodicLaplacian1D(SpatialOperator):
    """Circulant second-difference operator (periodic second derivative).

    m grid points with spacing h covering one period; diagonalized by the
    FFT with eigenvalues (4/h^2) sin^2(pi*k/m).  sigma = 0 collides with the
    constant mode.
    """

    def __init__(self, m, h):
        if m < 3:
            raise ValueError("m must be >= 3")
        if h <= 0:
            raise ValueError("h must be positive")
        self.m = int(m)
        self.h = float(h)
        k = np.arange(m)
        self.modes = (4.0 / h**2) * np.sin(np.pi * k / m) ** 2

    def apply(self, v):
        v = self._check_dim(v)
        return (2.0 * v - np.roll(v, 1, axis=-1) - np.roll(v, -1, axis=-1)) / self.h**2

    def dense(self):
        A = (2.0 * np.eye(self.m)
             - np.roll(np.eye(self.m), 1, axis=1)
             - np.roll(np.eye(self.m), -1, axis=1))
        return A / self.h**2

    def shifted_solve(self, sigma, g):
        g = self._check_dim(g)
        denom = sigma + self.modes
        small = np.abs(denom).min()
        if small < _SHIFT_FLOOR:
            k = int(np.argmin(np.abs(denom)))
            raise SingularShiftError(sigma, f"collides with Fourier mode {k}")
        out = scipy.fft.ifft(scipy.fft.fft(g) / denom)
        if not np.iscomplexobj(g) and not np.iscomplexobj(np.asarray(sigma)):
            return out.real
        return out

    def shifted_diag_solve(self, sigma, diag, g):
        g = self._check_dim(g)
        M = self.dense().astype(complex) + np.diag(np.asarray(diag) + sigma)
        try:
            return np.linalg.solve(M, g.astype(complex))
        except np.linalg.LinAlgError as exc:
            raise SingularShiftError(sigma, str(exc)) from exc


def make_dense_operator(A):
    return DenseOperator(A)


def make_laplacian_2d_dirichlet(points_per_dim, h):
    return SineLaplacian2D(points_per_dim, h)


def make_laplacian_1d_periodic(m, h):
    return PeriodicLaplacian1D(m, h)


@dataclass
class SemilinearProblem:
    """First-order problem u' + A u + f(u) = source(t) with pointwise f."""

    operator: SpatialOperator
    f: Callable
    jac_diag: Callable
    source: Callable
    u0: np.ndarray


@dataclass
class BenchmarkProblem:
    """A manufactured problem on the unit-square-like domains.

    ``source(t)`` samples the closed-form forcing on the grid;
    ``exact_solution(t)`` samples the closed-form solution;
    ``discrete_reference(t_points)`` evaluates the exact solution of the
    *semi-discretized* system (the quantity the time stepper actually
    approaches), which for the wave and semilinear problems coincides with
    the sampled solution because their solutions are per-direction
    polynomials of degree <= 3 that the 5-point stencil differentiates
    exactly.
    """

    kind: str
    operator: SpatialOperator
    domain: tuple
    u0: np.ndarray
    source: Callable
    exact_solution: Callable
    discrete_reference: Callable
    u0dot: np.ndarray | None = None
    f: Callable | None = None
    jac_diag: Callable | None = None
    grid: "TimeGrid | None" = None

    @property
    def m(self):
        return self.operator.m

    def sample_source(self, t_points):
        """Stack source(t_j) into an (n, m) block array."""
        return np.stack([self.source(float(t)) for t in np.asarray(t_points)])

    def semilinear(self):
        if self.kind != "semilinear":
            raise UnsupportedKindError(f"{self.kind} has no nonlinear part")
        return SemilinearProblem(
            operator=self.operator, f=self.f, jac_diag=self.jac_diag,
            source=self.source, u0=self.u0,
        )


def _heat_benchmark(points_per_dim):
    L = np.pi
    h = L / (points_per_dim + 1)
    op = SineLaplacian2D(points_per_dim, h)
    X, Y = op.grid()
    R = (np.sin(X) * np.sin(Y)).ravel()
    # sampled sin*sin is an exact eigenvector of the stencil
    mu = 2.0 * (4.0 / h**2) * np.sin(h / 2.0) ** 2

    def source(t):
        return np.exp(-t) * R

    def exact(t):
        return np.exp(-t) * R

    def discrete_reference(t_points):
        # modal solution of u' + mu*u = e^{-t}, u(0) = 1
        t = np.asarray(t_points)
        c = 1.0 / (mu - 1.0)
        coef = c * np.exp(-t) + (1.0 - c) * np.exp(-mu * t)
        return coef[:, None] * R[None, :]

    return BenchmarkProblem(
        kind="heat", operator=op, domain=(0.0, L), u0=R.copy(),
        source=source, exact_solution=exact,
        discrete_reference=discrete_reference,
    )


def _wave_benchmark(points_per_dim):
    L = 1.0
    h = L / (points_per_dim + 1)
    op = SineLaplacian2D(points_per_dim, h)
    X, Y = op.grid()
    P = (X * (X - 1.0) * Y * (Y - 1.0)).ravel()
    S = (X * (X - 1.0) + Y * (Y - 1.0)).ravel()

    def source(t):
        return np.sin(2.0 * np.pi * t) * (-4.0 * np.pi**2 * P - 2.0 * S)

    def exact(t):
        return np.sin(2.0 * np.pi * t) * P

    def discrete_reference(t_points):
        t = np.asarray(t_points)
        return np.sin(2.0 * np.pi * t)[:, None] * P[None, :]

    return BenchmarkProblem(
        kind="wave", operator=op, domain=(0.0, L), u0=np.zeros(op.m),
        u0dot=2.0 * np.pi * P, source=source, exact_solution=exact,
        discrete_reference=discrete_reference,
    )


def _semilinear_benchmark(points_per_dim):
    # domain (-1, 1)^2
    h = 2.0 / (points_per_dim + 1)
    op = SineLaplacian2D(points_per_dim, h)
    pts = -1.0 + np.arange(1, points_per_dim + 1) * h
    X, Y = np.meshgrid(pts, pts, indexing="ij")
    P = ((X**2 - 1.0) * (Y**2 - 1.0)).ravel()
    S = ((X**2 - 1.0) + (Y**2 - 1.0)).ravel()

    def f(u):
        return u**3 - u

    def jac_diag(u):
        return 3.0 * u**2 - 1.0

    def source(t):
        return (-2.0 * np.exp(-t) * P
                + np.exp(-3.0 * t) * P**3
                - 2.0 * np.exp(-t) * S)

    def exact(t):
        return np.exp(-t) * P

    def discrete_reference(t_points):
        t = np.asarray(t_points)
        return np.exp(-t)[:, None] * P[None, :]

    return BenchmarkProblem(
        kind="semilinear", operator=op, domain=(-1.0, 1.0), u0=P.copy(),
        source=source, exact_solution=exact,
        discrete_reference=discrete_reference, f=f, jac_diag=jac_diag,
    )


def make_benchmark(kind, points_per_dim, n=None, T=None):
    """Assemble one of the three manufactured benchmark problems.

    kind="heat":       u_t - Lap u = r on (0, pi)^2, u = sin(x)sin(y)e^{-t}
    kind="wave":       u_tt - Lap u = r on (0, 1)^2, u = x(x-1)y(y-1)sin(2 pi t)
    kind="semilinear": u_t - Lap u + u^3 - u = r on (-1, 1)^2,
                       u = (x^2-1)(y^2-1)e^{-t}

    all with homogeneous Dirichlet boundaries and the forcing r manufactured
    from the stated solution.  When n and T are given, a uniform TimeGrid
    with dt = T/n is attached for the drivers.
    """
    builders = {
        "heat": _heat_benchmark,
        "wave": _wave_benchmark,
        "semilinear": _semilinear_benchmark,
    }
    if kind not in builders:
        raise UnsupportedKindError(
            f"unknown benchmark {kind!r}; expected one of {sorted(builders)}"
        )
    problem = builders[kind](points_per_dim)
    if n is not None:
        if T is None:
            raise ValueError("T is required when n is given")
        from .timedisc import TimeGrid

        problem.grid = TimeGrid(n=int(n), dt=float(T) / int(n))
    return problem
