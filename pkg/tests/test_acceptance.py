"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Every tolerance is pinned here, in the test, at the level stated by the
criterion; statistical checks use 3 standard errors and fixed seeds.  Run
with `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
"""

import math

import numpy as np
import pytest

import harnacklab as hl
from harnacklab.cli import PRESETS, build_problem, run as cli_run


def _report(name: str, ok: bool, detail: str = "") -> bool:
    print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else ""))
    return ok


def _preset_problem(name):
    return build_problem(PRESETS[name]["problem"])


def _mode1(problem, amp):
    return amp * problem.space.eigenvectors[:, 0]


# ---------------------------------------------------------------------------

def test_c01_power_inequality_property_suite():
    """10^5 random pairs in dims 1..64, r in [0, 6]: gap >= -1e-12 * scale."""
    rng = np.random.default_rng(101)
    violations = 0
    total = 0
    worst = np.inf
    for _ in range(100):
        d = int(rng.integers(1, 65))
        m = 1000
        a = rng.standard_normal((m, d)) * 10 ** rng.uniform(-2, 2, size=(m, 1))
        b = rng.standard_normal((m, d)) * 10 ** rng.uniform(-2, 2, size=(m, 1))
        r = rng.uniform(0.0, 6.0, size=m)
        na = np.linalg.norm(a, axis=1)
        nb = np.linalg.norm(b, axis=1)
        diff = a - b
        nd = np.linalg.norm(diff, axis=1)
        lhs = na**r * np.sum(a * diff, axis=1) - nb**r * np.sum(b * diff, axis=1)
        gap = lhs - 2.0 ** (-r) * nd ** (r + 2)
        scale = (na + nb) ** (r + 2)
        rel = gap / np.maximum(scale, 1e-300)
        violations += int(np.sum(gap < -1e-12 * scale))
        worst = min(worst, float(np.min(rel)))
        total += m
    ok = violations == 0 and total == 100_000
    assert _report("C01 power-inequality property suite", ok,
                   f"{total} pairs, worst relative gap {worst:.2e}")


def test_c02_harnack_exact_quadrature_anchor():
    """Scalar linear-drift kernel: the bound holds in every grid cell, exactly."""
    ok_all = True
    worst = np.inf
    for fname in ("bump", "indicator"):
        ok, cells = hl.ou_harnack_anchor(1.0, 1.0, f=hl.TEST_FUNCTIONS[fname])
        ok_all &= ok
        worst = min(worst, min(c["rhs"] / c["lhs"] for c in cells))
    assert _report("C02 exact quadrature anchor", ok_all,
                   f"worst rhs/lhs margin {worst:.3f}")


def test_c03_harnack_monte_carlo_p_laplace():
    """p-Laplace preset, 10^4 paths, gaussian bump, T=1, distance 0.5."""
    prob = _preset_problem("p-laplace")
    rep = hl.verify_harnack(prob, np.zeros(prob.space.n), _mode1(prob, 0.5),
                            T=1.0, p=2.0, F=hl.TEST_FUNCTIONS["bump"],
                            n_paths=10_000, rng_seed=303, dt=4e-3)
    assert _report("C03 Harnack Monte Carlo (p-Laplace)", rep.passed,
                   f"lhs {rep.lhs:.4f} <= rhs {rep.rhs:.3e}")


def test_c04_coupling_success_fraction():
    """Coupled fraction >= 0.99 on the linear and p-Laplace presets."""
    results = {}
    ou = _preset_problem("ou-1d")
    ens = hl.simulate_coupled_ensemble(ou, np.zeros(ou.space.n), _mode1(ou, 0.5),
                                       1.0, 1e-3, 512, np.random.default_rng(404))
    results["ou-1d"] = ens.coupled_fraction()
    pl = _preset_problem("p-laplace")
    ens = hl.simulate_coupled_ensemble(pl, np.zeros(pl.space.n), _mode1(pl, 0.25),
                                       1.0, 2e-3, 512, np.random.default_rng(405))
    results["p-laplace"] = ens.coupled_fraction()
    ok = all(f >= 0.99 for f in results.values())
    assert _report("C04 coupling success", ok,
                   ", ".join(f"{k}: {v:.3f}" for k, v in results.items()))


GIRSANOV_GEOMETRY = {
    # preset -> (start distance, horizon, dt, paths); chosen so the pathwise
    # control energy is O(1), otherwise the 3-SE checks have no power
    "ou-1d": (0.25, 1.0, 2e-3, 8000),
    "reaction-diffusion": (0.25, 1.0, 2e-3, 1200),
    "p-laplace": (0.10, 1.0, 2e-3, 1200),
    "high-order": (0.20, 1.0, 2e-3, 1200),
}


def test_c05_girsanov_identities():
    """E[R] = 1 and the moment bound on all presets; the weighted-law check
    for the constant and gaussian-bump functions on the linear anchor and
    the p-Laplace preset."""
    ok_all = True
    details = []
    for i, (name, (d0, T, dt, m)) in enumerate(GIRSANOV_GEOMETRY.items()):
        prob = _preset_problem(name)
        x, y = np.zeros(prob.space.n), _mode1(prob, d0)
        ens = hl.simulate_coupled_ensemble(prob, x, y, T, dt, m,
                                           np.random.default_rng(500 + i))
        r_mean = float(np.mean(ens.R))
        r_se = float(np.std(ens.R) / math.sqrt(m))
        ok = abs(r_mean - 1.0) <= 3 * r_se
        moment = hl.girsanov_moment(ens, p=2.0)
        ok &= moment.passed
        wl_functions = {"ou-1d": ("const", "bump"), "p-laplace": ("bump",)}
        for fname in wl_functions.get(name, ()):
            wl = hl.verify_weighted_law(
                prob, x, y, T, dt, hl.TEST_FUNCTIONS[fname].bind(prob.space),
                m, 550 + 10 * i + len(fname), f_name=fname)
            ok &= wl.passed
        ok_all &= ok
        details.append(f"{name}: E[R]={r_mean:.3f}+-{r_se:.3f}")
    assert _report("C05 Girsanov identities", ok_all, "; ".join(details))


def test_c06_contraction_rates():
    """Linear rate within 2% of -lam; reaction-diffusion at least 95% of target."""
    ou = _preset_problem("ou-1d")
    fit = hl.fit_contraction(ou, _mode1(ou, 1.0), _mode1(ou, -1.0),
                             np.linspace(0.2, 2.0, 10), 1e-3, 2, 606)
    ok_lin = fit.relative_error <= 0.02
    rd = _preset_problem("reaction-diffusion")
    target = -(rd.c0 * rd.drift.delta - rd.drift.gamma) / 2.0
    fit_rd = hl.fit_contraction(rd, _mode1(rd, 1.0), _mode1(rd, -1.0),
                                np.linspace(0.05, 0.6, 12), 1e-3, 4, 607)
    ok_rd = fit_rd.fitted <= target * 0.95
    assert _report("C06 contraction rates", ok_lin and ok_rd,
                   f"linear {fit.fitted:+.4f} (target -1), "
                   f"rd {fit_rd.fitted:+.3f} vs {target:+.3f}")


def test_c07_algebraic_decay():
    """Noise-free p-Laplace: exponents -1/(p-2) and pairwise -2/(p-2), 10%."""
    rng = np.random.default_rng(707)
    oks, details = [], []
    for p, n, tmax in ((4.0, 32, 100.0), (3.0, 16, 30.0)):
        sp = hl.build_space(n)
        prob = hl.make_problem(hl.p_laplace(sp, p), hl.build_noise(sp, 0.5, 1.0))
        x0s = []
        for a in (1.0, 10.0, 100.0, 400.0, 1000.0):
            v = rng.standard_normal(n)
            x0s.append(a * v / float(sp.norm_h(v)))
        rep = hl.fit_decay(prob, np.asarray(x0s), np.geomspace(1.0, tmax, 9), 5e-3)
        ok = rep.norm_fit.relative_error <= 0.10
        if p == 4.0:
            ok &= rep.pairwise_fit.relative_error <= 0.10
        oks.append(ok)
        details.append(f"p={p:g}: {rep.norm_fit.fitted:+.3f} "
                       f"(target {rep.norm_fit.target:+.2f})")
    assert _report("C07 algebraic decay", all(oks), "; ".join(details))


def test_c08_comparison_ode():
    """Closed form reproduced to 1e-8; envelope forgets h0 at t=1 within 1%."""
    res = hl.solve_comparison_ode(c=1.0, alpha=4.0, h0=1.0, T=2.0, dt=1e-2)
    closed = 1.0 / (1.0 + res.times)
    err = float(np.max(np.abs(res.h - closed) / closed))
    finals = [hl.solve_comparison_ode(1.0, 4.0, h0, 1.0, 1e-2).h[-1]
              for h0 in (1e3, 1e9)]
    spread = abs(finals[0] - finals[1]) / finals[1]
    ok = err <= 1e-8 and spread <= 0.01 and res.envelope_ok
    assert _report("C08 comparison ODE", ok,
                   f"closed-form err {err:.2e}, h0-spread at t=1 {spread:.2e}")


def test_c09_invariant_measure():
    """Linear-preset moments vs the exact law; occupation bound; seed-stable."""
    ou = _preset_problem("ou-1d")
    est = hl.estimate_invariant(ou, burn_in=10.0, horizon=3000.0, dt=1e-2,
                                rng_seed=909)
    # exact invariant second moment of mode 1 is b_1^2/(2 lam)
    target = float(ou.noise.b[0]) ** 2 / (2.0 * ou.drift.lam)
    ok_m = abs(est.mode1_sq - target) <= 3 * est.mode1_sq_se
    est2 = hl.estimate_invariant(ou, burn_in=10.0, horizon=3000.0, dt=1e-2,
                                 rng_seed=910)
    comb = math.hypot(est.exp_moment_se, est2.exp_moment_se)
    ok_seed = (not est.overflow and not est2.overflow
               and abs(est.exp_moment - est2.exp_moment) <= 3 * comb)
    ok_bound = est.ledger_ok
    details = [f"mode1 {est.mode1_sq:.3f} vs {target:.3f}"]
    for name in ("reaction-diffusion", "p-laplace", "high-order"):
        prob = _preset_problem(name)
        e = hl.estimate_invariant(prob, burn_in=5.0, horizon=150.0, dt=1e-2,
                                  rng_seed=911)
        ok_bound &= e.ledger_ok and not e.overflow
        details.append(f"{name}: N-avg {e.moment_v_alpha:.3f} <= {e.ledger_bound:.3f}")
    assert _report("C09 invariant measure", ok_m and ok_seed and ok_bound,
                   "; ".join(details))


def test_c10_ergodic_rate():
    """Linear-preset rate within 5% of lam; p-Laplace rate positive at 3 SE."""
    ou = _preset_problem("ou-1d")
    e1 = ou.space.eigenvectors[:, 0]
    h = ou.space.h
    fs = [("mode1", lambda s: h * (np.atleast_2d(s) @ e1))]
    rep = hl.fit_ergodic_rate(ou, fs, [5.0 * e1], np.linspace(0.25, 2.0, 8),
                              10_000, 1010, 2e-3, mu_burn_in=10.0,
                              mu_horizon=1600.0, mu_dt=1e-2)
    ok_ou = abs(rep.eta_hat - ou.drift.lam) <= 0.05 * ou.drift.lam
    pl = _preset_problem("p-laplace")
    e1p = pl.space.eigenvectors[:, 0]
    hp = pl.space.h
    fs_pl = [("mode1", lambda s: hp * (np.atleast_2d(s) @ e1p))]
    rep_pl = hl.fit_ergodic_rate(pl, fs_pl, [1.0 * e1p], np.linspace(0.05, 0.5, 8),
                                 2000, 1011, 2e-3, mu_burn_in=5.0,
                                 mu_horizon=300.0, mu_dt=1e-2)
    ok_pl = rep_pl.eta_hat > 3.0 * rep_pl.eta_se > 0.0
    gap = rep_pl.gap_bound(4.0)
    ok_gap = gap == pytest.approx(3.0 * rep_pl.eta_hat / 4.0)
    assert _report("C10 ergodic rate", ok_ou and ok_pl and ok_gap,
                   f"linear eta {rep.eta_hat:.4f} (target 1), "
                   f"p-Laplace eta {rep_pl.eta_hat:.3f}+-{rep_pl.eta_se:.3f}")


def test_c11_constants():
    """Closed form vs quadrature at 1e-8; the three hand values to 6 digits."""
    hand = [((1.0, 2.0, 2.0, 1.0, 1.0), 16.0),
            ((4.0, 2.0, 2.0, 1.0, 1.0), 1.0),
            ((1.0, 4.0, 3.0, 1.0, 1.0), 11.3137)]
    ok = True
    for (t, s, a, d, x), target in hand:
        closed = hl.harnack_constant(t, s, a, d, x)
        quad = hl.harnack_constant_quadrature(
            t, s, a, lambda u, d=d: np.full_like(np.asarray(u, float), d), x)
        ok &= abs(closed - target) <= 5e-6 * target
        ok &= abs(closed - quad) <= 1e-8 * closed
    assert _report("C11 constants", ok, "16, 1, 11.3137 reproduced")


def test_c12_determinism(tmp_path):
    """Same config and seed give byte-identical outputs at any worker count."""
    import json

    cfg = {"preset": "ou-1d", "experiment": "couple",
           "run": {"T": 0.5, "dt": 2e-3, "n_paths": 256}}
    blobs = []
    for label, workers in (("w1", 1), ("w4", 4), ("again", 1)):
        out = tmp_path / label
        code = cli_run(dict(cfg), out, seed_override=1212, workers=workers)
        assert code == 0
        files = {}
        for path in sorted(out.iterdir()):
            if path.name == "manifest.json":
                manifest = json.loads(path.read_text())
                manifest.pop("wall_clock_s")   # run metadata, not a result
                files[path.name] = json.dumps(manifest, sort_keys=True)
            else:
                files[path.name] = path.read_bytes()
        blobs.append(files)
    ok = blobs[0] == blobs[1] == blobs[2]
    assert _report("C12 determinism", ok,
                   f"{len(blobs[0])} files byte-identical across reruns/workers")
