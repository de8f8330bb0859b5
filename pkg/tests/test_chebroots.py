"""Tests for Chebyshev evaluation and the characteristic-equation roots."""

import numpy as np
import pytest

from chebpint.chebroots import (
    cheb_eval,
    characteristic_residuals,
    find_roots,
    initial_guesses,
    p_prime_at_root,
    refined_guesses,
    rho_and_derivative,
)
from chebpint.errors import (
    DegenerateRootError,
    DuplicateRootsError,
    NonConvergenceError,
)
from chebpint.chebroots import Root


# ------------------------------------------------------------- cheb_eval

def test_cheb_eval_known_values():
    assert cheb_eval("first", 2, 0.0) == pytest.approx(-1.0)
    assert cheb_eval("second", 3, 1.0) == pytest.approx(4.0)   # U_k(1) = k+1
    assert cheb_eval("first", 2, 1j) == pytest.approx(-3.0)    # 2*(i)^2 - 1


def test_cheb_eval_degree_zero_and_one():
    assert cheb_eval("first", 0, 0.3 + 0.1j) == pytest.approx(1.0)
    assert cheb_eval("first", 1, 0.3 + 0.1j) == pytest.approx(0.3 + 0.1j)
    assert cheb_eval("second", 0, -2.0) == pytest.approx(1.0)
    assert cheb_eval("second", 1, -2.0) == pytest.approx(-4.0)


def test_cheb_eval_rejects_bad_input():
    with pytest.raises(ValueError):
        cheb_eval("third", 1, 0.0)
    with pytest.raises(ValueError):
        cheb_eval("first", -1, 0.0)
    with pytest.raises(ValueError):
        cheb_eval("first", 2, np.nan)


def test_pythagorean_identity_random_complex():
    # T_n(x)^2 + (1 - x^2) U_{n-1}(x)^2 = 1 for all complex x; the terms grow
    # exponentially off [-1, 1], so the defect is measured relative to them
    rng = np.random.default_rng(42)
    x = (rng.uniform(-1, 1, size=100) + 1j * rng.uniform(-1, 1, size=100)) * np.sqrt(2)
    for n in (1, 2, 3, 8, 17, 64):
        t = cheb_eval("first", n, x)
        u = cheb_eval("second", n - 1, x) if n > 1 else np.ones_like(x)
        term = (1 - x**2) * u**2
        scale = np.maximum(1.0, np.maximum(np.abs(t) ** 2, np.abs(term)))
        assert (np.abs(t**2 + term - 1) / scale).max() < 1e-9


# ------------------------------------------------- rho and its derivative

def test_rho_known_value():
    # rho(pi/2, n=2) = sin(pi) - i cos(pi) sin(pi/2) = i
    r, _ = rho_and_derivative(np.pi / 2, 2)
    assert r == pytest.approx(1j, abs=1e-15)


def test_rho_prime_matches_finite_difference():
    rng = np.random.default_rng(3)
    theta = rng.uniform(0.2, 2.9, size=10) + 1j * rng.uniform(0.05, 0.8, size=10)
    h = 1e-6
    for n in (1, 3, 9, 21):
        _, dr = rho_and_derivative(theta, n)
        rp, _ = rho_and_derivative(theta + h, n)
        rm, _ = rho_and_derivative(theta - h, n)
        fd = (rp - rm) / (2 * h)
        assert np.abs(fd - dr).max() / np.abs(dr).max() < 1e-6


def test_rho_small_at_converged_roots():
    roots = find_roots(48, tol=1e-11)
    r, _ = rho_and_derivative(roots.thetas, 48)
    assert np.abs(r).max() <= 1e-10


# --------------------------------------------------------- initial guesses

def test_initial_guesses_formula():
    g1 = initial_guesses(1)
    assert g1[0] == pytest.approx(3 * np.pi / 4 + 1j)
    g2 = initial_guesses(2)
    assert g2[0] == pytest.approx(5 * np.pi / 12 + 0.5j)
    assert g2[1] == pytest.approx(5 * np.pi / 6 + 0.5j)


def test_refined_guesses_sit_on_roots():
    for n in (1, 2, 7, 40, 129):
        seeds = refined_guesses(n)
        r, _ = rho_and_derivative(seeds, n)
        assert np.abs(np.atleast_1d(r) / np.sin(seeds)).max() < 1e-6


# --------------------------------------------------------------- find_roots

def test_find_roots_n1_analytic():
    rs = find_roots(1, tol=1e-12)
    assert rs.n == 1
    assert rs.roots[0].x == pytest.approx(-1j, abs=1e-12)
    assert rs.roots[0].lambda_unit == pytest.approx(1.0, abs=1e-12)


def test_find_roots_n2_analytic_and_dense_eigensolve():
    rs = find_roots(2, tol=1e-12)
    xs = rs.xs
    expected = np.array([(1 - 1j) / 2, (-1 - 1j) / 2])
    assert np.abs(xs - expected).max() < 1e-12
    # cross-check against a dense eigensolve of the unit-step stencil
    B = np.array([[0.0, 0.5], [-1.0, 1.0]])
    lam = np.sort_complex(np.linalg.eigvals(B))
    got = np.sort_complex(rs.lambdas_unit)
    assert np.abs(lam - got).max() < 1e-12


def test_find_roots_matches_dense_eigensolve_moderate_n():
    for n in (5, 16, 33):
        B = np.zeros((n, n))
        for j in range(n - 1):
            B[j, j + 1] = 0.5
            B[j + 1, j] = -0.5
        B[n - 1, n - 2] = -1.0
        B[n - 1, n - 1] = 1.0
        lam_true = np.linalg.eigvals(B)
        lam = find_roots(n, tol=1e-12).lambdas_unit
        dist = np.abs(lam[:, None] - lam_true[None, :]).min(axis=1)
        assert dist.max() < 1e-10


def test_find_roots_iteration_counts_table_scale():
    rs = find_roots(64, tol=1e-10)
    assert rs.newton_iters.max() <= 7


def test_find_roots_iteration_counts_bounded_large_n():
    for n in (256, 1024, 8192):
        rs = find_roots(n, tol=1e-10)
        assert rs.newton_iters.max() <= 12


@pytest.mark.parametrize("n", [1, 2, 3, 8, 33, 64, 257])
def test_rootset_structure(n):
    rs = find_roots(n, tol=1e-11)
    x = rs.xs
    assert len(set(rs.roots)) == n
    # all strictly in the lower half plane, modulus below 1 + 1/sqrt(2n)
    assert (x.imag < 0).all()
    assert np.abs(x).max() < 1 + 1 / np.sqrt(2 * n)
    # mirror symmetry x_{n+1-j} = -conj(x_j)
    assert np.abs(x[::-1] + np.conj(x)).max() < 1e-9
    # eigenvalues of the scaled stencil have positive real part
    assert (rs.lambdas_unit.real > 0).all()
    # |x T_n(x)| = 1 at every root
    t = cheb_eval("first", n, x)
    assert np.abs(np.abs(x * t) - 1).max() < 1e-9
    # angle brackets for the first half
    m = n // 2
    if m:
        j = np.arange(1, m + 1)
        th = rs.thetas[:m]
        assert (th.real > j * np.pi / (n + 1)).all()
        assert (th.real < j * np.pi / n).all()
        assert (th.imag > 1.0 / n**2).all()


def test_eigenvalue_conjugate_pairing():
    for n in (6, 7, 33):
        lam = find_roots(n, tol=1e-11).lambdas_unit
        # multiset closed under conjugation
        dist = np.abs(np.conj(lam)[:, None] - lam[None, :]).min(axis=1)
        assert dist.max() < 1e-9
        n_real = int((np.abs(lam.imag) < 1e-9).sum())
        assert n_real == (1 if n % 2 == 1 else 0)


def test_rootset_cardinality_sweep():
    for n in list(range(1, 24)) + [100, 500, 2048, 4096]:
        rs = find_roots(n, tol=1e-9)
        assert rs.n == n and len(rs.roots) == n
        if n > 1:
            xs = np.sort_complex(rs.xs)
            assert np.abs(np.diff(xs)).min() > 1e-12


def test_fixed_offset_seeding_reports_wrong_basins():
    # the plain j-indexed guesses send some iterates into mirror basins,
    # which surfaces as colliding x values
    with pytest.raises(DuplicateRootsError):
        find_roots(8, tol=1e-10, seed="fixed-offset")


def test_nonconvergence_reported():
    with pytest.raises(NonConvergenceError):
        find_roots(64, tol=1e-13, max_iter=2, seed="fixed-offset")


def test_find_roots_rejects_bad_args():
    with pytest.raises(ValueError):
        find_roots(0)
    with pytest.raises(ValueError):
        find_roots(4, tol=-1.0)
    with pytest.raises(ValueError):
        find_roots(4, max_iter=0)
    with pytest.raises(ValueError):
        find_roots(4, seed="bogus")


# ----------------------------------------------------------- p_prime_at_root

def test_p_prime_n1_exact():
    rs = find_roots(1, tol=1e-13)
    # p_1(x) = 1 - i x has constant derivative -i
    assert p_prime_at_root(rs.roots[0], 1) == pytest.approx(-1j, abs=1e-12)


def test_p_prime_matches_finite_difference():
    rs = find_roots(12, tol=1e-12)
    h = 1e-6
    for root in rs.roots[::3]:
        got = p_prime_at_root(root, 12)

        def p(x):
            return cheb_eval("second", 11, x) - 1j * cheb_eval("first", 12, x)

        fd_re = (p(root.x + h) - p(root.x - h)) / (2 * h)
        fd_im = (p(root.x + 1j * h) - p(root.x - 1j * h)) / (2j * h)
        assert abs(fd_re - got) / abs(got) < 1e-6
        assert abs(fd_im - got) / abs(got) < 1e-6


def test_p_prime_matches_derivative_recurrence():
    # independent route: p_n'(x) = U'_{n-1}(x) - i n U_{n-1}(x)
    n = 32
    rs = find_roots(n, tol=1e-12)
    x = rs.xs

    # derivative recurrence: U'_{k+1} = 2 U_k + 2x U'_k - U'_{k-1}
    u_prev = np.ones_like(x)      # U_0
    u_cur = 2 * x                 # U_1
    du_prev = np.zeros_like(x)    # U_0'
    du_cur = 2 * np.ones_like(x)  # U_1'
    for _ in range(n - 2):
        u_prev, u_cur = u_cur, 2 * x * u_cur - u_prev
        du_prev, du_cur = du_cur, 2 * u_prev + 2 * x * du_cur - du_prev
    expected = du_cur - 1j * n * u_cur
    got = np.array([p_prime_at_root(r, n) for r in rs.roots])
    assert (np.abs(got - expected) / np.abs(expected)).max() < 1e-10


def test_p_prime_degenerate_root_raises():
    fake = Root(index=1, theta=1e-16 + 0j, x=1.0 + 0j, lambda_unit=1j,
                newton_iters=0, residual=0.0)
    with pytest.raises(DegenerateRootError):
        p_prime_at_root(fake, 4)


def test_characteristic_residuals_two_routes_agree():
    rs = find_roots(128, tol=1e-11)
    trig = characteristic_residuals(rs, method="trig")
    rec = characteristic_residuals(rs, method="recurrence")
    assert trig.max() < 1e-9
    assert rec.max() < 1e-9
