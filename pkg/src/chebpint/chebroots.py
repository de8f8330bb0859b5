"""Chebyshev evaluation and the roots of the characteristic equation.

The time stencil used by this package (centered differences closed by one
backward-Euler row) has, after rescaling by the step size, the eigenvalues
``lambda_j = i * x_j`` where the ``x_j`` are the n complex roots of

    U_{n-1}(x) - i * T_n(x) = 0,

with ``T`` / ``U`` the Chebyshev polynomials of the first and second kind.
Substituting ``x = cos(theta)`` turns this into the trigonometric equation

    rho(theta) = sin(n*theta) - i * cos(n*theta) * sin(theta) = 0,

which is solved root-by-root with Newton's method in the single complex
variable ``theta``.  All n roots live in the strip ``Re theta in (0, pi)``,
``Im theta > 0``; they are simple, have ``Im x_j < 0``, and come in the
mirror pairs ``x_{n+1-j} = -conj(x_j)``.

Note that ``rho`` factors as ``sin(theta) * p_n(cos(theta))`` with
``p_n(x) = U_{n-1}(x) - i*T_n(x)``, so ``rho`` has spurious zeros at
``theta = 0, pi`` that do not correspond to roots of ``p_n``.  Newton is
therefore run on the deflated residual ``rho(theta)/sin(theta)``, which
removes those traps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateRootError,
    DuplicateRootsError,
    NonConvergenceError,
)

__all__ = [
    "Root",
    "RootSet",
    "cheb_eval",
    "rho_and_derivative",
    "initial_guesses",
    "refined_guesses",
    "find_roots",
    "p_prime_at_root",
    "characteristic_residuals",
]

#: |sin(theta)| below this is treated as a degenerate (spurious) root.
_SIN_FLOOR = 1e-14

#: Two converged x values closer than this signal colliding Newton basins.
_DUPLICATE_TOL = 1e-12


def _require_finite(name, value):
    arr = np.asarray(value)
    if np.iscomplexobj(arr):
        ok = np.all(np.isfinite(arr.real)) and np.all(np.isfinite(arr.imag))
    else:
        ok = np.all(np.isfinite(arr))
    if not ok:
        raise ValueError(f"{name} must be finite, got {value!r}")


def cheb_eval(kind, k, x):
    """Evaluate T_k(x) (kind="first") or U_k(x) (kind="second").

    Uses the three-term recurrence, which stays valid for complex ``x``
    off the interval [-1, 1] where the cos/arccos definitions break down.
    Accepts scalars or arrays.
    """
    if kind not in ("first", "second"):
        raise ValueError(f"kind must be 'first' or 'second', got {kind!r}")
    k = int(k)
    if k < 0:
        raise ValueError("polynomial degree must be >= 0")
    _require_finite("x", x)
    x = np.asarray(x, dtype=complex)
    prev = np.ones_like(x)
    if k == 0:
        return prev if prev.ndim else complex(prev)
    cur = x.copy() if kind == "first" else 2.0 * x
    for _ in range(k - 1):
        prev, cur = cur, 2.0 * x * cur - prev
    return cur if cur.ndim else complex(cur)


def rho_and_derivative(theta, n):
    """Return rho(theta) and rho'(theta) for the characteristic equation.

    rho(theta)  = sin(n*theta) - i*cos(n*theta)*sin(theta)
    rho'(theta) = n*cos(n*theta) + i*n*sin(n*theta)*sin(theta)
                  - i*cos(n*theta)*cos(theta)

    Vectorized over ``theta``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    _require_finite("theta", theta)
    theta = np.asarray(theta, dtype=complex)
    s, c = np.sin(theta), np.cos(theta)
    sn, cn = np.sin(n * theta), np.cos(n * theta)
    rho = sn - 1j * cn * s
    rho_p = n * cn + 1j * n * sn * s - 1j * cn * c
    if rho.ndim == 0:
        return complex(rho), complex(rho_p)
    return rho, rho_p


def initial_guesses(n):
    """Per-index starting points theta_j = (j*pi/n + j*pi/(n+1))/2 + i/n.

    This is the simple j-indexed seeding rule; it places every guess in the
    correct real bracket but with an index-independent imaginary offset.
    ``find_roots`` keeps it available (``seed="fixed-offset"``) mainly to
    demonstrate basin failures: for moderate n several guesses lie closer
    to a mirror copy of a neighboring root than to their own, and Newton
    then reports duplicates.  The default seeding is :func:`refined_guesses`.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    j = np.arange(1, n + 1)
    return 0.5 * (j * np.pi / n + j * np.pi / (n + 1)) + 1j / n


def refined_guesses(n):
    """Near-exact seeds from the scalar characterization of the roots.

    Writing theta_j = alpha_j + i*b_j/n, the roots with j <= (n+1)/2 are
    parameterized by the unique solution b_j of the monotone real equation

        n*arcsin(tanh(b)*cosh(b/n)) + arcsin(tanh(b/n)*cosh(b)) = j*pi

    on (0, b_max], where b_max solves sinh(b)*sinh(b/n) = 1; then
    alpha_j = arcsin(tanh(b_j)*cosh(b_j/n)).  The remaining indices follow
    from the mirror symmetry alpha_{n+1-j} = pi - alpha_j, b_{n+1-j} = b_j.
    Bisection on the monotone equation makes every seed land in the right
    Newton basin regardless of n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")

    lo, hi = 0.0, float(np.arcsinh(float(n))) + 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if np.sinh(mid) * np.sinh(mid / n) < 1.0:
            lo = mid
        else:
            hi = mid
    b_max = 0.5 * (lo + hi)

    half = (n + 1) // 2
    target = np.arange(1, half + 1) * np.pi

    def angle_sum(b):
        u = np.clip(np.tanh(b) * np.cosh(b / n), 0.0, 1.0)
        v = np.clip(np.tanh(b / n) * np.cosh(b), 0.0, 1.0)
        return n * np.arcsin(u) + np.arcsin(v)

    blo = np.zeros(half)
    bhi = np.full(half, b_max)
    for _ in range(90):
        mid = 0.5 * (blo + bhi)
        below = angle_sum(mid) < target
        blo = np.where(below, mid, blo)
        bhi = np.where(below, bhi, mid)
    b = 0.5 * (blo + bhi)

    beta = b / n
    alpha = np.arcsin(np.clip(np.tanh(b) * np.cosh(b / n), 0.0, 1.0))

    alpha_all = np.empty(n)
    beta_all = np.empty(n)
    alpha_all[:half] = alpha
    beta_all[:half] = beta
    alpha_all[n - half:] = np.pi - alpha[::-1]
    beta_all[n - half:] = beta[::-1]
    return alpha_all + 1j * beta_all


@dataclass(frozen=True)
class Root:
    """One converged root: index j in 1..n, theta, x = cos(theta), and
    the unit-step eigenvalue lambda = i*x, plus Newton diagnostics."""

    index: int
    theta: complex
    x: complex
    lambda_unit: complex
    newton_iters: int
    residual: float


@dataclass(frozen=True)
class RootSet:
    """All n roots in index order, with vectorized accessors."""

    n: int
    roots: tuple

    @property
    def thetas(self):
        return np.array([r.theta for r in self.roots])

    @property
    def xs(self):
        return np.array([r.x for r in self.roots])

    @property
    def lambdas_unit(self):
        return np.array([r.lambda_unit for r in self.roots])

    @property
    def newton_iters(self):
        return np.array([r.newton_iters for r in self.roots])

    @property
    def residuals(self):
        return np.array([r.residual for r in self.roots])


def find_roots(n, tol=1e-10, max_iter=50, seed="refined"):
    """Compute all n roots of U_{n-1}(x) - i*T_n(x) = 0 by Newton iteration.

    Newton runs simultaneously on all indices in the theta variable, on the
    deflated residual rho(theta)/sin(theta).  A root is accepted once
    |rho| <= tol and the last update satisfied |dtheta| <= tol*max(1,|theta|),
    or once updates stagnate at the floating-point floor (for large n the
    evaluated residual cannot reach arbitrarily small tolerances even at the
    correctly rounded root; stagnation detection keeps such roots instead of
    mislabeling them divergent).

    Parameters
    ----------
    n : number of roots (time points)
    tol : residual tolerance on |rho(theta)|
    max_iter : Newton iteration budget per root
    seed : "refined" (default, basin-safe) or "fixed-offset"

    Raises
    ------
    NonConvergenceError : some root neither met the tolerance nor stagnated
    DuplicateRootsError : two converged x values coincide (wrong basins)
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")

    if seed == "refined":
        theta = refined_guesses(n).astype(complex)
    elif seed == "fixed-offset":
        theta = initial_guesses(n).astype(complex)
    else:
        raise ValueError(f"unknown seed strategy {seed!r}")

    iters = np.zeros(n, dtype=int)
    active = np.ones(n, dtype=bool)
    last_step = np.full(n, np.inf)
    stag_count = np.zeros(n, dtype=int)

    for sweep in range(max_iter + 1):
        rho, rho_p = rho_and_derivative(theta, n)
        rho = np.atleast_1d(rho)
        rho_p = np.atleast_1d(rho_p)
        s = np.sin(theta)
        c = np.cos(theta)
        scale = tol * np.maximum(1.0, np.abs(theta))
        converged = (np.abs(rho) <= tol) & (last_step <= scale)
        stagnated = stag_count >= 2
        active &= ~(converged | stagnated)
        if not active.any() or sweep == max_iter:
            break
        # Newton step for q = rho/sin: q/q' = rho*s / (rho'*s - rho*c)
        step = rho * s / (rho_p * s - rho * c)
        step = np.where(active, step, 0.0)
        theta = theta - step
        mag = np.abs(step)
        stag_count = np.where(
            mag <= 8.0 * np.finfo(float).eps * np.maximum(1.0, np.abs(theta)),
            stag_count + 1,
            0,
        )
        last_step = np.where(active, mag, last_step)
        iters[active] += 1

    rho, _ = rho_and_derivative(theta, n)
    rho = np.atleast_1d(rho)
    resid = np.abs(rho)
    still_bad = active & (resid > tol) & (stag_count < 2)
    if still_bad.any():
        idx = np.flatnonzero(still_bad) + 1
        raise NonConvergenceError(idx.tolist(), resid[still_bad].tolist(), max_iter)

    x = np.cos(theta)
    if n > 1:
        order = np.lexsort((x.imag, x.real))
        xs = x[order]
        gaps = np.abs(np.diff(xs))
        k = int(np.argmin(gaps))
        if gaps[k] < _DUPLICATE_TOL:
            pair = (int(order[k]) + 1, int(order[k + 1]) + 1)
            raise DuplicateRootsError(pair, float(gaps[k]))

    roots = tuple(
        Root(
            index=j + 1,
            theta=complex(theta[j]),
            x=complex(x[j]),
            lambda_unit=complex(1j * x[j]),
            newton_iters=int(iters[j]),
            residual=float(resid[j]),
        )
        for j in range(n)
    )
    return RootSet(n=n, roots=roots)


def _p_prime_array(theta, n):
    """p_n'(cos(theta)) = -rho'(theta)/sin(theta)^2 at converged roots."""
    s = np.sin(theta)
    if np.any(np.abs(s) < _SIN_FLOOR):
        j = int(np.argmin(np.abs(s)))
        raise DegenerateRootError(
            f"|sin(theta)| = {abs(s[j]):.2e} at index {j + 1}: "
            "theta sits on a spurious zero of rho"
        )
    _, rho_p = rho_and_derivative(theta, n)
    return -np.atleast_1d(rho_p) / s**2


def p_prime_at_root(root, n):
    """Derivative p_n'(x_j) of p_n(x) = U_{n-1}(x) - i*T_n(x) at a root.

    Evaluated through the chain-rule identity p_n'(x) = -rho'(theta)/sin^2(theta)
    at x = cos(theta), which follows from rho(theta) = sin(theta)*p_n(cos(theta))
    and rho(theta_j) = 0.  This avoids running a degree-n derivative recurrence
    per root.
    """
    theta = np.asarray([root.theta], dtype=complex)
    return complex(_p_prime_array(theta, n)[0])


def characteristic_residuals(root_set, method="trig"):
    """|U_{n-1}(x_j) - i*T_n(x_j)| for every root.

    method="trig" evaluates rho(theta_j)/sin(theta_j) (cheap, accurate for
    all n); method="recurrence" re-evaluates the polynomials by their
    three-term recurrences, an independent route whose own rounding grows
    with n but which provides a genuine cross-check at moderate sizes.
    """
    theta = root_set.thetas
    n = root_set.n
    if method == "trig":
        rho, _ = rho_and_derivative(theta, n)
        return np.abs(np.atleast_1d(rho) / np.sin(theta))
    if method == "recurrence":
        x = root_set.xs
        t = cheb_eval("first", n, x)
        u = cheb_eval("second", n - 1, x) if n >= 1 else np.ones_like(x)
        return np.abs(np.atleast_1d(u - 1j * t))
    raise ValueError(f"unknown method {method!r}")
