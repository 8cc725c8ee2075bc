"""Integrator tests: proximal solves against closed forms and a slow
line-search oracle, exact decay/variance oracles, contraction and the
pathwise energy ledger."""

import numpy as np
import pytest

from harnacklab import (ProximalSolveError, build_noise, build_space,
                        deterministic_flow, high_order, linear, make_problem,
                        p_laplace, potential, proximal_solve,
                        reaction_diffusion, simulate, simulate_ensemble)
from harnacklab.drift import apply_drift


@pytest.fixture(scope="module")
def space():
    return build_space(8)


def ou_problem(space, lam=1.0, theta=0.0, scale=1.0):
    return make_problem(linear(space, lam), build_noise(space, theta, scale))


# ---------------------------------------------------------------------------
# make_problem validation
# ---------------------------------------------------------------------------

def test_make_problem_validates_sigma(space):
    drift = p_laplace(space, p=4.0)
    noise = build_noise(space, 0.5, 1.0)
    with pytest.raises(ValueError, match="sigma >= 2"):
        make_problem(drift, noise, sigma=1.0)
    with pytest.raises(ValueError, match="alpha - 2"):
        make_problem(drift, noise, sigma=2.0)   # alpha = 4 needs sigma > 2
    prob = make_problem(drift, noise)
    assert prob.sigma == 4.0                    # default max(2, alpha)
    assert prob.xi == pytest.approx(1.0)
    assert prob.c0 > 0


# ---------------------------------------------------------------------------
# proximal_solve
# ---------------------------------------------------------------------------

def test_prox_linear_closed_form(space):
    model = linear(space, 1.0)
    rhs = 1.1 * space.eigenvectors[:, 0]
    u = proximal_solve(model, rhs, dt=0.1)
    assert np.allclose(u, space.eigenvectors[:, 0], atol=1e-12)


def test_prox_zero_rhs_fixed_point(space):
    for model in (linear(space, 2.0), reaction_diffusion(space, 4.0, 1.0),
                  p_laplace(space, 4.0, 1.0), high_order(build_space(8, m=2), 4.0)):
        u = proximal_solve(model, np.zeros(model.space.n), dt=0.05)
        assert np.allclose(u, 0.0, atol=1e-12)


def _slow_gradient_descent_oracle(model, rhs, dt, iters=300):
    """Gradient descent with bisection line search on the convex objective."""
    sp = model.space

    def objective(u):
        return 0.5 * float(sp.inner_h(u - rhs, u - rhs)) + dt * float(potential(model, u))

    u = rhs.copy()
    for _ in range(iters):
        g = u - dt * apply_drift(model, u) - rhs    # H-gradient of the objective
        if float(sp.norm_h(g)) < 1e-13:
            break
        lo, hi = 0.0, 1.0
        while objective(u - 2 * hi * g) < objective(u - hi * g) and hi < 1e6:
            hi *= 2
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if objective(u - (mid + 1e-9) * g) < objective(u - mid * g):
                lo = mid
            else:
                hi = mid
        u = u - 0.5 * (lo + hi) * g
    return u


def test_prox_p_laplace_against_line_search_oracle(space):
    model = p_laplace(space, p=4.0, c=0.5, p_tilde=2.0)
    rng = np.random.default_rng(0)
    rhs = rng.standard_normal(space.n)
    dt = 0.05
    u, info = proximal_solve(model, rhs, dt, return_info=True)
    assert info["residual"] <= 1e-10 * (1 + float(space.norm_h(rhs)))
    # objective descent is monotone across Newton iterations (float slack)
    hist = info["merit_history"]
    for a, b in zip(hist, hist[1:]):
        assert b <= a + 1e-12 * (1 + abs(a))
    oracle = _slow_gradient_descent_oracle(model, rhs, dt)
    assert float(space.norm_h(u - oracle)) < 1e-6


def test_prox_rejects_bad_steps(space):
    model = linear(space, 1.0)
    with pytest.raises(ValueError):
        proximal_solve(model, np.zeros(space.n), dt=-0.1)


def test_prox_handles_huge_states(space):
    model = p_laplace(space, p=4.0)
    rhs = 1e3 * np.ones(space.n)
    u = proximal_solve(model, rhs, dt=1e-2)
    resid = u - 1e-2 * apply_drift(model, u) - rhs
    assert float(space.norm_h(resid)) <= 1e-10 * (1 + float(space.norm_h(rhs)))


# ---------------------------------------------------------------------------
# simulate / deterministic_flow
# ---------------------------------------------------------------------------

def test_linear_decay_oracle(space):
    # B = 0 linear flow: exact exponential decay e^{-t}
    prob = ou_problem(space)
    x0 = space.eigenvectors[:, 0]
    traj = deterministic_flow(prob, x0, T=1.0, dt=1e-3)
    target = np.exp(-1.0) * x0
    assert float(space.norm_h(traj.states[-1] - target)) <= 5e-4


def test_zero_initial_state_stays_zero(space):
    prob = make_problem(p_laplace(space, 4.0), build_noise(space, 0.5, 1.0))
    traj = deterministic_flow(prob, np.zeros(space.n), T=0.5, dt=1e-2)
    assert np.all(traj.norms_h == 0.0)


def test_grid_validation(space):
    prob = ou_problem(space)
    with pytest.raises(ValueError):
        simulate(prob, np.zeros(space.n), T=1.0, dt=0.3, rng=np.random.default_rng(0))
    with pytest.raises(ValueError):
        simulate_ensemble(prob, np.zeros(space.n), 1.0, 0.1, 4,
                          np.random.default_rng(0), snapshot_times=(0.25,))


def test_ou_mode_variance_matches_exact_kernel(space):
    # oracle: Var(mode k at T) = b_k^2 (1 - e^{-2 lam T}) / (2 lam)
    lam, T, dt, m = 1.0, 1.0, 1e-3, 10_000
    prob = make_problem(linear(space, lam), build_noise(space, 0.5, 1.0))
    ens = simulate_ensemble(prob, np.zeros(space.n), T, dt, m,
                            np.random.default_rng(11))
    coords = prob.space.eigen_coords(ens.final)
    target = prob.noise.b**2 * (1 - np.exp(-2 * lam * T)) / (2 * lam)
    var = np.var(coords, axis=0)
    se = target * np.sqrt(2.0 / m)
    assert np.all(np.abs(var - target) <= 3 * se)


def test_same_noise_contraction_envelope(space):
    # alpha = 2: same-noise pairs contract at least at rate c0*delta - gamma
    # for the squared distance, up to the 1 + O(dt) one-step slack
    prob = make_problem(reaction_diffusion(space, p=4.0, c=1.0),
                        build_noise(space, 0.5, 1.0))
    rate = prob.c0 * prob.drift.delta - prob.drift.gamma
    dt, T = 1e-3, 0.5
    times = (0.1, 0.25, 0.5)
    x = space.eigenvectors[:, 0]
    y = -x
    ens_x = simulate_ensemble(prob, x, T, dt, 8, np.random.default_rng(3),
                              snapshot_times=times)
    ens_y = simulate_ensemble(prob, y, T, dt, 8, np.random.default_rng(3),
                              snapshot_times=times)
    d0 = float(space.norm_h(x - y))
    for t in times:
        d2 = space.norm_h(ens_x.snapshots[t] - ens_y.snapshots[t]) ** 2
        bound = np.exp(-rate * t) * d0**2 * np.exp(rate**2 * dt * t / 2)
        assert np.all(d2 <= bound * (1 + 1e-9))


def test_nonexpansive_distance_when_gamma_nonpositive(space):
    prob = make_problem(p_laplace(space, 4.0), build_noise(space, 0.5, 1.0))
    rng_a, rng_b = np.random.default_rng(5), np.random.default_rng(5)
    xa = simulate(prob, space.eigenvectors[:, 0], 0.2, 2e-3, rng_a)
    xb = simulate(prob, -space.eigenvectors[:, 1], 0.2, 2e-3, rng_b)
    dists = prob.space.norm_h(xa.states - xb.states)
    assert np.all(np.diff(dists) <= 1e-12)


def test_energy_ledger_clean_on_presets(space):
    sp2 = build_space(8, m=2)
    problems = [
        ou_problem(space),
        make_problem(reaction_diffusion(space, 4.0, 1.0), build_noise(space, 0.5, 1.0)),
        make_problem(p_laplace(space, 4.0), build_noise(space, 0.5, 1.0)),
        make_problem(high_order(sp2, 4.0), build_noise(sp2, 0.5, 1.0)),
    ]
    for prob in problems:
        traj = simulate(prob, prob.space.eigenvectors[:, 0], 0.2, 1e-3,
                        np.random.default_rng(6))
        assert traj.energy_violations == 0, prob.drift.kind


def test_mean_square_bounded_after_transient(space):
    # alpha > 2: ensembles from very different starts merge and stay bounded
    prob = make_problem(p_laplace(space, 4.0), build_noise(space, 0.5, 1.0))
    times = (1.0, 2.0, 4.0)
    stats = {}
    for label, amp in (("small", 0.0), ("large", 10.0)):
        ens = simulate_ensemble(prob, amp * space.eigenvectors[:, 0], 4.0, 5e-3,
                                256, np.random.default_rng(7), snapshot_times=times)
        stats[label] = [float(np.mean(space.norm_h(ens.snapshots[t]) ** 2))
                        for t in times]
    for small, large in zip(stats["small"], stats["large"]):
        assert large <= 2.0 * small + 0.05
    assert max(stats["large"]) < 10.0   # far below the initial 100


def test_prox_failure_carries_residual():
    err = ProximalSolveError("boom", residual=0.5, step_index=3)
    assert err.residual == 0.5 and err.step_index == 3
