"""Tilted Levy sampling and the size-biased convolution identity.

Oracle: beta-gamma algebra.  For the uniform01 family the solution is
Exp(1), its size-biased form is Gamma(2,1), and U*Gamma(2,1) = Exp(1) in
law, so the tilted Levy sample must again look exponential and the
convolution of Exp(1) with it must reproduce the Gamma(2,1) CDF.
"""

import json
import math

import numpy as np
import pytest
from scipy import stats

from perpetuity.distributions import (
    AtomicDistribution,
    EmpiricalSample,
    quantize_family,
)
from perpetuity.levy import LevyEstimate, levy_from_solution, steutel_residual
from perpetuity.montecarlo import McConfig, mc_fixed_point

DELTA_HALF = AtomicDistribution([0.5], [1.0])
ATOM_DELTA_HALF = 0.20318786997997992


def exp_sample(n, seed, tag="exp"):
    return EmpiricalSample(np.random.default_rng(seed).exponential(size=n),
                           seed, tag)


def test_tilted_levy_uniform01_is_exponential():
    rho = quantize_family("uniform01", 512)
    mu = exp_sample(200_000, 31)
    levy = levy_from_solution(rho, mu, seed=7, n_out=100_000)
    assert levy.x.size == 100_000
    assert np.all(np.diff(levy.x) >= 0.0)
    ks = stats.kstest(levy.x, "expon").statistic
    assert ks < 0.01
    assert math.isinf(levy.total_mass_of_m)


def test_total_mass_from_zero_fraction():
    cfg = McConfig(n_samples=40_000, master_seed=23,
                   n_transform_iterations=40)
    mu = mc_fixed_point(DELTA_HALF, 1.0, cfg)
    levy = levy_from_solution(DELTA_HALF, mu, seed=5, n_out=50_000)
    want = 2.0 * (1.0 - ATOM_DELTA_HALF)   # K (1 - c) / m at m = 1
    assert levy.total_mass_of_m == pytest.approx(want, abs=0.05)
    # every sampled point is 0.5 * (a positive solution draw)
    assert np.all(levy.x >= 0.0)


def test_total_mass_counts_exact_zeros():
    vals = np.concatenate([np.zeros(200), np.full(800, 1.25)])
    mu = EmpiricalSample(vals, 0, "planted-zeros")
    levy = levy_from_solution(DELTA_HALF, mu, seed=1, n_out=2000)
    assert levy.total_mass_of_m == pytest.approx(
        2.0 * (1.0 - 0.2) / 1.0, rel=1e-12)


def test_levy_cdf_and_validation():
    rho = quantize_family("uniform01", 64)
    levy = levy_from_solution(rho, exp_sample(5000, 2), seed=3, n_out=4000)
    q = np.linspace(0.0, 10.0, 21)
    c = levy.cdf(q)
    assert np.all(np.diff(c) >= 0.0)
    assert c[0] <= 0.05 and c[-1] >= 0.95
    with pytest.raises(ValueError):
        levy_from_solution(rho, EmpiricalSample(np.zeros(10), 0, "z"), seed=1)


def test_steutel_identity_analytic_cdf():
    rho = quantize_family("uniform01", 512)
    levy = levy_from_solution(rho, exp_sample(200_000, 41), seed=9,
                              n_out=100_000)
    probes = np.array([0.5, 1.0, 2.0, 4.0])
    rep = steutel_residual(lambda t: -np.expm1(-np.maximum(t, 0.0)),
                           levy, probes)
    assert rep.residual < 0.01
    # left side is the Gamma(2,1) CDF computed by parts from Exp(1)
    np.testing.assert_allclose(rep.lhs, stats.gamma(2.0).cdf(probes),
                               atol=2e-4)
    assert rep.to_json_obj()["probes"] == list(probes)


def test_steutel_identity_empirical_mu():
    rho = quantize_family("uniform01", 512)
    mu = exp_sample(200_000, 43)
    levy = levy_from_solution(rho, mu, seed=11, n_out=100_000)
    rep = steutel_residual(mu, levy, [0.5, 1.0, 2.0, 4.0])
    assert rep.residual < 0.015


def test_steutel_rejects_mismatched_pair():
    # levy sample from the half-point solution against an Exp(1) mu
    cfg = McConfig(n_samples=40_000, master_seed=29,
                   n_transform_iterations=40)
    mu_half = mc_fixed_point(DELTA_HALF, 1.0, cfg)
    levy = levy_from_solution(DELTA_HALF, mu_half, seed=13, n_out=50_000)
    rep = steutel_residual(exp_sample(100_000, 45), levy, [0.5, 1.0, 2.0])
    assert rep.residual > 0.05


def test_steutel_probe_validation():
    levy = LevyEstimate(x=np.sort(np.linspace(0.01, 3.0, 100)),
                        total_mass_of_m=1.0, n=100, seed=0)
    mu = exp_sample(2000, 3)
    with pytest.raises(ValueError):
        steutel_residual(mu, levy, [0.0, 1.0])
    with pytest.raises(ValueError):
        steutel_residual(mu, levy, [10.0])   # beyond sampled support
    with pytest.raises(TypeError):
        steutel_residual(42, levy, [1.0])


def test_levy_csv_thinning_and_sidecar(tmp_path):
    rho = quantize_family("uniform01", 64)
    levy = levy_from_solution(rho, exp_sample(20_000, 4), seed=6,
                              n_out=10_000)
    p = tmp_path / "levy.csv"
    levy.to_csv(p, max_rows=256)
    lines = p.read_text().splitlines()
    assert lines[0] == "x,cdf"
    assert len(lines) <= 257
    last_x, last_cdf = map(float, lines[-1].split(","))
    assert last_cdf == 1.0 and last_x == levy.x[-1]
    xs = [float(l.split(",")[0]) for l in lines[1:]]
    assert xs == sorted(xs)
    sidecar = json.loads((tmp_path / "levy.json").read_text())
    assert sidecar == {"total_mass_of_M": "infinity", "n": 10_000, "seed": 6}

    finite = LevyEstimate(x=np.sort(np.linspace(0.1, 2.0, 50)),
                          total_mass_of_m=1.59, n=50, seed=1)
    finite.to_csv(tmp_path / "f.csv")
    assert json.loads(
        (tmp_path / "f.json").read_text())["total_mass_of_M"] == 1.59
