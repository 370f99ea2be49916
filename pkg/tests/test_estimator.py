import math

import numpy as np
import pytest

from kawasaki import (ConfigError, CorrelationEstimate, GibbsSampler, KernelSpec,
                      PotentialSpec, SimulationParams, Torus, calibrate_activity,
                      estimate_correlations, estimate_density,
                      estimate_pair_correlation, lp_exponent,
                      radial_product_profile, simulate_ensemble,
                      sub_poisson_report)
from kawasaki.estimator import shell_measure
from kawasaki.fields import DensityField

TORUS = Torus(1, 20.0)
KERNEL = KernelSpec.top_hat(1.0, 1.0, dim=1)
FREE = PotentialSpec.zero(dim=1)


def poisson_snapshots(rho, n_traj, seed, torus=TORUS):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_traj):
        n = rng.poisson(rho * torus.volume)
        out.append(rng.random((n, torus.dim)) * torus.side)
    return out


# -- density -------------------------------------------------------------------

def test_density_exact_binning_single_snapshot():
    snaps = [np.array([[0.5], [0.7], [12.5]])]
    est = estimate_density(snaps, 0.0, 20, torus=TORUS)
    # cells of width 1: two points in cell 0, one in cell 12
    assert est.k1[0] == pytest.approx(2.0)
    assert est.k1[12] == pytest.approx(1.0)
    assert est.k1.sum() == pytest.approx(3.0)


def test_density_zero_everywhere():
    snaps = [np.zeros((0, 1)) for _ in range(10)]
    est = estimate_density(snaps, 0.0, 20, torus=TORUS)
    assert np.all(est.k1 == 0.0)


def test_density_poisson_bins_within_sampling_error():
    snaps = poisson_snapshots(0.5, 10_000, seed=2)
    est = estimate_density(snaps, 0.0, 20, torus=TORUS)
    z = (est.k1 - 0.5) / est.k1_se
    assert np.abs(z).max() <= 4.0
    assert np.mean(np.abs(z) <= 3.0) >= 0.99


def test_density_mass_consistency_exact():
    snaps = poisson_snapshots(0.7, 200, seed=3)
    est = estimate_density(snaps, 0.0, 40, torus=TORUS)
    assert est.k1.sum() * (20.0 / 40.0) == pytest.approx(est.mean_count, rel=1e-14)


def test_density_empty_ensemble_rejected():
    with pytest.raises(ConfigError):
        estimate_density([], 0.0, 10, torus=TORUS)


# -- pair correlation -------------------------------------------------------------

def test_pair_two_fixed_particles_single_bin():
    snaps = [np.array([[3.0], [4.0]])]
    edges = np.linspace(0.5, 2.5, 5)  # distance 1 falls in bin [1.0, 1.5)
    est = estimate_pair_correlation(snaps, 0.0, edges, torus=TORUS)
    shell = shell_measure(1, edges)
    expect = 2.0 / (shell[1] * TORUS.volume)
    assert est.k2[1] == pytest.approx(expect)
    assert np.all(est.k2[[0, 2, 3]] == 0.0)


def test_pair_poisson_flat_at_rho_squared():
    snaps = poisson_snapshots(0.5, 4000, seed=4)
    edges = np.linspace(0.0, 5.0, 11)
    est = estimate_pair_correlation(snaps, 0.0, edges, torus=TORUS)
    z = (est.k2 - 0.25) / est.k2_se
    assert np.abs(z).max() <= 3.0


def test_pair_repulsive_dip_detected_via_gibbs_oracle():
    torus = Torus(1, 50.0)
    pot = PotentialSpec.top_hat(1.0, 1.5, dim=1)
    rng = np.random.default_rng(9)
    z = calibrate_activity(torus, pot, 100.0, rng)
    chain = GibbsSampler(torus, pot, z, rng, initial_count=100)
    snaps = chain.sample(250, thin_moves=1500, burn_in_moves=15000)
    edges = np.linspace(0.0, 5.0, 11)
    est = estimate_correlations(snaps, 0.0, 50, edges, torus=torus)
    resid, comb = est.factorization()
    # inside the repulsion radius the pair density sits well below the product
    assert resid[0] / comb[0] < -3.0
    assert resid[1] / comb[1] < -3.0
    # far outside it there is no structure
    assert abs(resid[-1] / comb[-1]) < 3.5


def test_pair_bins_validation():
    snaps = poisson_snapshots(0.5, 3, seed=5)
    with pytest.raises(ConfigError):
        estimate_pair_correlation(snaps, 0.0, [0.0, 1e-12, 1.0], torus=TORUS)
    with pytest.raises(ConfigError):
        estimate_pair_correlation(snaps, 0.0, [0.0, 11.0], torus=TORUS)


# -- product profile ---------------------------------------------------------------

def test_product_profile_constant_field_exact():
    field = DensityField.constant(TORUS, 37, 0.7)
    edges = np.linspace(0.0, 9.0, 19)
    prof, se = radial_product_profile(field, edges)
    assert np.abs(prof - 0.49).max() <= 1e-12
    assert np.all(se == 0.0)


def test_product_profile_matches_monte_carlo_oracle():
    rng = np.random.default_rng(6)
    field = DensityField(TORUS, 0.5 + 0.4 * rng.random(16))
    edges = np.linspace(0.0, 8.0, 9)
    prof, _ = radial_product_profile(field, edges)
    # oracle: sample random ordered pairs of positions, weight by the
    # piecewise-constant field values, bin by minimal-image distance
    m = 2_000_000
    x = rng.random(m) * 20.0
    y = rng.random(m) * 20.0
    w = field.values[(x / 1.25).astype(int)] * field.values[(y / 1.25).astype(int)]
    d = np.abs(x - y)
    d = np.minimum(d, 20.0 - d)
    shell = shell_measure(1, edges)
    mc = np.empty(len(edges) - 1)
    mc_se = np.empty_like(mc)
    vol_pair = 20.0 ** 2
    for b in range(len(mc)):
        sel = (d >= edges[b]) & (d < edges[b + 1])
        mc[b] = w[sel].sum() / m * vol_pair / (shell[b] * TORUS.volume)
        mc_se[b] = np.sqrt(np.var(w * sel) / m) * vol_pair / (shell[b] * TORUS.volume)
    assert np.all(np.abs(prof - mc) <= 4.0 * mc_se)


def test_pair_weight_coverage_identity():
    # the closed-form cell-pair weights integrate, over all offsets, to the
    # exact pair measure V * shell_measure(bin) of each distance bin
    from kawasaki.estimator import _pc_pair_weights_1d
    for n, edges in ((16, np.linspace(0.0, 10.0, 9)),
                     (37, np.linspace(0.3, 9.7, 12))):
        W = _pc_pair_weights_1d(n, 20.0, edges)
        total = W.sum(axis=0) * n
        expect = shell_measure(1, edges) * 20.0
        assert np.abs(total - expect).max() <= 1e-9 * expect.max()


def test_product_profile_2d_subsample_close_to_constant():
    torus = Torus(2, 10.0)
    field = DensityField.constant(torus, 16, 0.3)
    edges = np.linspace(0.5, 4.5, 9)
    prof, _ = radial_product_profile(field, edges)
    assert np.abs(prof - 0.09).max() <= 0.01 * 0.09


# -- Lebesgue-Poisson exponent ------------------------------------------------------

def test_lp_exponent_empty_is_one():
    assert lp_exponent(lambda x: x + 2.0, np.zeros((0, 1))) == 1.0


def test_lp_exponent_constant_power():
    pts = np.full((5, 1), 3.0)
    assert lp_exponent(lambda x: np.full_like(x, 2.0), pts) == pytest.approx(32.0)


def test_lp_exponent_log_sum_exp_oracle():
    rng = np.random.default_rng(7)
    pts = rng.random((5, 1)) * 20.0
    fn = lambda x: 0.5 + np.sin(x) ** 2
    direct = lp_exponent(fn, pts)
    via_logs = math.exp(np.sum(np.log(fn(pts[:, 0]))))
    assert direct == pytest.approx(via_logs, rel=1e-12)


# -- sub-Poissonian report -----------------------------------------------------------

def synthetic_estimate(k1_value, k2_value, n_cells=10, n_bins=5):
    est = CorrelationEstimate(torus=TORUS, time=0.0, n_traj=100, mean_count=5.0,
                              n_cells=n_cells)
    est.k1 = np.full(n_cells, k1_value)
    est.k1_se = np.full(n_cells, 0.01)
    est.r_edges = np.linspace(0.0, 5.0, n_bins + 1)
    est.k2 = np.full(n_bins, k2_value)
    est.k2_se = np.full(n_bins, 0.01)
    return est


def test_report_zero_estimate_norm_is_one():
    est = synthetic_estimate(0.0, 0.0)
    rep = sub_poisson_report(est, theta=0.3)
    assert rep.norm_estimate == 1.0


def test_report_theta_shift_scales_components():
    est = synthetic_estimate(3.0, 4.0)
    theta = 0.2
    r0 = sub_poisson_report(est, theta)
    r1 = sub_poisson_report(est, theta + math.log(2.0))
    assert r0.nu1 * math.exp(theta) == pytest.approx(3.0 * math.exp(0.2))
    assert r1.nu1 * math.exp(theta + math.log(2)) == pytest.approx(
        2.0 * r0.nu1 * math.exp(theta))
    assert r1.nu2 * math.exp(2 * (theta + math.log(2))) == pytest.approx(
        4.0 * r0.nu2 * math.exp(2 * theta))


def test_report_poisson_saturates_norm_near_one():
    snaps = poisson_snapshots(0.5, 6000, seed=8)
    edges = np.linspace(0.0, 5.0, 11)
    est = estimate_correlations(snaps, 0.0, 20, edges, torus=TORUS)
    rep = sub_poisson_report(est, theta=-math.log(0.5))
    assert rep.norm_estimate == pytest.approx(1.0, abs=0.12)
    assert rep.factorization_residual <= 3.0 * rep.factorization_se


# -- ensemble statistics ----------------------------------------------------------------

def test_free_dynamics_preserves_poisson_factorization():
    params = SimulationParams(torus=TORUS, kernel=KERNEL, potential=FREE,
                              rho0=0.5, t_end=0.5, snapshot_times=(0.0, 0.5))
    ens = simulate_ensemble(params, 2500, base_seed=13)
    edges = np.linspace(0.0, 5.0, 11)
    for t in (0.0, 0.5):
        est = estimate_correlations(ens, t, 20, edges)
        resid, comb = est.factorization()
        assert np.nanmax(np.abs(resid / comb)) <= 3.0


def test_standard_error_scales_like_root_n():
    edges = np.linspace(0.0, 5.0, 11)
    est_a = estimate_density(poisson_snapshots(0.8, 800, seed=21), 0.0, 20,
                             torus=TORUS)
    est_b = estimate_density(poisson_snapshots(0.8, 1600, seed=22), 0.0, 20,
                             torus=TORUS)
    ratio = np.median(est_a.k1_se) / np.median(est_b.k1_se)
    assert 1.30 <= ratio <= 1.53


def test_csv_and_meta_output(tmp_path):
    snaps = poisson_snapshots(0.5, 50, seed=30)
    edges = np.linspace(0.0, 5.0, 6)
    est = estimate_correlations(snaps, 0.0, 10, edges, torus=TORUS)
    est.write_k1_csv(tmp_path / "k1.csv")
    est.write_k2_csv(tmp_path / "k2.csv")
    est.write_meta_json(tmp_path / "meta.json")
    header = (tmp_path / "k1.csv").read_text().splitlines()[0]
    assert header == "bin_center,value,stderr"
    assert "np.float64" not in (tmp_path / "k2.csv").read_text()
