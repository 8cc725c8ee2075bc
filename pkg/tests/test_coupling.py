"""Coupling and change-of-measure tests: the beta schedule algebra, coupling
success, pathwise control-energy bounds, martingale identities, and the
weighted-law comparison against the exact product-Gaussian oracle."""

import math

import numpy as np
import pytest

from harnacklab import (CouplingEnsemble, build_noise, build_space,
                        girsanov_moment, linear, make_params, make_problem,
                        p_laplace, simulate_coupled, simulate_coupled_ensemble,
                        verify_weighted_law, TEST_FUNCTIONS)


@pytest.fixture(scope="module")
def ou():
    sp = build_space(8)
    return make_problem(linear(sp, 1.0), build_noise(sp, 0.0, 1.0))


@pytest.fixture(scope="module")
def plap():
    sp = build_space(8)
    return make_problem(p_laplace(sp, 4.0), build_noise(sp, 0.5, 1.0))


def mode1(problem, amp):
    return amp * problem.space.eigenvectors[:, 0]


# ---------------------------------------------------------------------------
# make_params
# ---------------------------------------------------------------------------

def test_epsilon_values():
    # direct evaluation of eps = 1 - alpha/(sigma+2)
    cases = [(2.0, 2.0, 0.5), (3.0, 4.0, 0.5), (2.0, 4.0, 2.0 / 3.0)]
    for alpha, sigma, eps in cases:
        assert 1.0 - alpha / (sigma + 2.0) == pytest.approx(eps)


def test_beta_schedule_equality_case(ou):
    # time-independent delta, xi and gamma = 0: beta is constant and the
    # meeting-time integral hits (2/eps)||x-y||^eps exactly
    x, y = mode1(ou, 0.0), mode1(ou, 0.5)
    T = 2.0
    params = make_params(ou, x, y, T)
    eps = params.epsilon
    d0 = 0.5
    beta_expected = 2.0 * d0**eps / (eps * T)
    tgrid = np.linspace(0.0, T, 5)
    assert np.allclose(params.beta(tgrid), beta_expected, rtol=1e-12)
    assert beta_expected * T == pytest.approx((2.0 / eps) * d0**eps, rel=1e-12)


def test_coupling_force_vanishes_with_distance(ou):
    T = 1.0
    betas = []
    for d in (1e-1, 1e-3, 1e-5):
        params = make_params(ou, mode1(ou, 0.0), mode1(ou, d), T)
        betas.append(float(params.beta(0.0)))
    assert betas[0] > betas[1] > betas[2]
    assert betas[2] < 2e-2


def test_make_params_rejects_equal_points(ou):
    x = mode1(ou, 1.0)
    with pytest.raises(ValueError):
        make_params(ou, x, x, 1.0)


# ---------------------------------------------------------------------------
# coupled simulation
# ---------------------------------------------------------------------------

def test_coincident_start_trivial(ou):
    x = mode1(ou, 1.0)
    rec = simulate_coupled(ou, x, x, 0.5, 1e-2, np.random.default_rng(0))
    assert rec.tau == 0.0
    assert rec.R == 1.0
    assert np.array_equal(rec.x_path, rec.y_path)


def test_coupling_succeeds_and_glues(ou):
    rec = simulate_coupled(ou, mode1(ou, 0.0), mode1(ou, 0.5), 1.0, 1e-3,
                           np.random.default_rng(1))
    assert rec.coupled and rec.tau < 1.0
    k_tau = int(round(rec.tau / 1e-3))
    tail = rec.x_path[k_tau + 1:] - rec.y_path[k_tau + 1:]
    assert np.all(tail == 0.0)           # exact identity after gluing
    # distance is non-increasing when gamma <= 0
    dists = ou.space.norm_h(rec.x_path - rec.y_path)
    assert np.all(np.diff(dists) <= 1e-12)


def test_control_off_after_coupling(ou):
    # freeze the accounting at tau: re-running a longer horizon with the same
    # seed extends paths but not the stochastic integral
    rng = np.random.default_rng(2)
    rec = simulate_coupled(ou, mode1(ou, 0.0), mode1(ou, 0.25), 1.0, 1e-3, rng)
    assert rec.coupled
    # after tau the paths coincide so zeta = 0; quad_var strictly below the
    # full-horizon worst case
    assert rec.quad_var <= rec.params.quad_var_bound() * 1.05


def test_pathwise_quad_var_bound(plap):
    ens = simulate_coupled_ensemble(plap, mode1(plap, 0.0), mode1(plap, 0.2),
                                    1.0, 2e-3, 256, np.random.default_rng(3))
    bound = ens.params.quad_var_bound() * 1.05
    assert np.all(ens.quad_var <= bound)
    assert ens.coupled_fraction() == 1.0


def test_mean_density_is_one(ou):
    ens = simulate_coupled_ensemble(ou, mode1(ou, 0.0), mode1(ou, 0.25), 1.0,
                                    1e-3, 10_000, np.random.default_rng(4))
    se = float(np.std(ens.R) / math.sqrt(ens.n_paths))
    assert abs(float(np.mean(ens.R)) - 1.0) <= 3 * se
    assert np.all(ens.R > 0)


def test_monotone_distance_ensemble(plap):
    rec = simulate_coupled(plap, mode1(plap, 0.0), mode1(plap, 0.3), 1.0, 2e-3,
                           np.random.default_rng(5))
    dists = plap.space.norm_h(rec.x_path - rec.y_path)
    assert np.all(np.diff(dists) <= 1e-12)


# ---------------------------------------------------------------------------
# weighted law
# ---------------------------------------------------------------------------

def _ou_bump_closed_form(problem, y, T):
    """Product-Gaussian oracle for E exp(-||X_T - 0||_H^2), linear drift."""
    lam = problem.drift.lam
    m = problem.space.eigen_coords(y) * math.exp(-lam * T)
    v = problem.noise.b**2 * (1 - math.exp(-2 * lam * T)) / (2 * lam)
    return float(np.prod((1 + 2 * v) ** -0.5 * np.exp(-m**2 / (1 + 2 * v))))


def test_weighted_law_constant_function(ou):
    rep = verify_weighted_law(ou, mode1(ou, 0.0), mode1(ou, 0.25), 1.0, 1e-3,
                              TEST_FUNCTIONS["const"].bind(ou.space), 4000, 6,
                              f_name="const")
    assert rep.passed
    assert rep.direct == pytest.approx(1.0)


def test_weighted_law_matches_gaussian_oracle(ou):
    y = mode1(ou, 0.25)
    T, dt = 1.0, 1e-3
    rep = verify_weighted_law(ou, mode1(ou, 0.0), y, T, dt,
                              TEST_FUNCTIONS["bump"].bind(ou.space), 20_000, 7,
                              f_name="bump")
    assert rep.passed
    exact = _ou_bump_closed_form(ou, y, T)
    assert abs(rep.weighted - exact) <= 3 * rep.weighted_se
    assert abs(rep.direct - exact) <= 3 * rep.direct_se


def test_weighted_law_p_laplace_self_consistency(plap):
    rep = verify_weighted_law(plap, mode1(plap, 0.0), mode1(plap, 0.1), 1.0,
                              2e-3, TEST_FUNCTIONS["bump"].bind(plap.space),
                              4000, 8, f_name="bump")
    assert rep.passed


# ---------------------------------------------------------------------------
# girsanov_moment
# ---------------------------------------------------------------------------

def test_moment_trivial_at_zero_distance(ou):
    x = mode1(ou, 1.0)
    recs = simulate_coupled_ensemble(ou, x, x, 0.5, 1e-2, 32,
                                     np.random.default_rng(9))
    rep = girsanov_moment(recs, p=2.0)
    assert rep.empirical == pytest.approx(1.0)
    assert rep.bound >= 1.0
    assert rep.passed and not rep.heavy_tail_warning


def test_moment_bound_vanishes_as_p_grows(ou):
    ens = simulate_coupled_ensemble(ou, mode1(ou, 0.0), mode1(ou, 0.25), 1.0,
                                    2e-3, 64, np.random.default_rng(10))
    # exponent scales as p'(p'-1) -> 0 when p -> infinity
    rep = girsanov_moment(ens, p=1e9)
    assert rep.bound == pytest.approx(1.0, abs=1e-6)
    big = girsanov_moment(ens, p=2.0)
    assert big.bound > rep.bound


def test_moment_within_bound_ou(ou):
    ens = simulate_coupled_ensemble(ou, mode1(ou, 0.0), mode1(ou, 0.25), 1.0,
                                    1e-3, 10_000, np.random.default_rng(11))
    rep = girsanov_moment(ens, p=2.0)
    assert rep.passed
    assert rep.empirical <= rep.bound + 3 * rep.se


def test_heavy_tail_warning_flag():
    sp4 = build_space(4)
    params_dummy = make_params(
        make_problem(linear(sp4, 1.0), build_noise(sp4, 0.0, 1.0)),
        np.array([1.0, 0, 0, 0]), np.zeros(4), 1.0)
    r = np.ones(100)
    r[0] = 1e6                      # one dominant importance weight
    ens = CouplingEnsemble(tau=np.zeros(100), stoch_int=np.zeros(100),
                           quad_var=np.zeros(100), R=r,
                           coupled=np.ones(100, bool),
                           final_x=np.zeros((100, 4)), final_y=np.zeros((100, 4)),
                           params=params_dummy, dt=0.01)
    rep = girsanov_moment(ens, p=2.0)
    assert rep.heavy_tail_warning


def test_girsanov_moment_rejects_p_below_one(ou):
    ens = simulate_coupled_ensemble(ou, mode1(ou, 0.0), mode1(ou, 0.25), 0.5,
                                    1e-2, 16, np.random.default_rng(12))
    with pytest.raises(ValueError):
        girsanov_moment(ens, p=1.0)
