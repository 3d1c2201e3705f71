import numpy as np
import pytest

from mfpredict import metrics
from mfpredict.simgen import (
    SimCoefficients,
    SimSpec,
    calibrate_coefficients,
    cholesky_factor,
    equicorrelation,
    scenario,
    simulate,
)


def test_column_layout():
    assert scenario("sim_90_1").names == ["V1", "V2", "V3", "V4", "outcome"]
    d = simulate(scenario("sim_75_7_noise", n_rows=50))
    assert d.shape == (50, 17)
    assert d.names[4:16] == [f"N{i}" for i in range(1, 13)]
    assert set(np.unique(d.values[:, d.index("outcome")])) <= {0.0, 1.0}


def test_spec_validation():
    with pytest.raises(ValueError):
        SimSpec(rho=-0.5)
    with pytest.raises(ValueError):
        SimSpec(auroc=0.4)
    with pytest.raises(ValueError):
        SimSpec(prevalence=0.0)
    with pytest.raises(ValueError):
        scenario("sim_80_1")
    assert scenario("sim_75_1", seed=4).seed == 4


@pytest.mark.parametrize("rho", [-0.3, 0.0, 0.1, 0.7, 0.95])
def test_cholesky_reproduces_matrix(rho):
    L = cholesky_factor(rho)
    assert np.allclose(L @ L.T, equicorrelation(rho), atol=1e-12)
    assert np.all(np.linalg.eigvalsh(equicorrelation(rho)) > 0)


def test_cholesky_rejects_singular():
    with pytest.raises(ValueError):
        cholesky_factor(1.0)


def test_empirical_correlation():
    for name, rho in (("sim_75_1_noise", 0.1), ("sim_75_7_noise", 0.7)):
        d = simulate(scenario(name, n_rows=20_000, seed=1))
        c = np.corrcoef(d.values[:, :16], rowvar=False)
        sig = c[:4, :4][~np.eye(4, dtype=bool)]
        assert np.all(np.abs(sig - rho) < 0.03)
        assert np.all(np.abs(c[:4, 4:]) < 0.04)
        noise = c[4:, 4:][~np.eye(12, dtype=bool)]
        assert np.all(np.abs(noise) < 0.04)
        assert np.allclose(d.values[:, :16].std(axis=0), 1.0, atol=0.03)


def test_zero_beta_gives_chance_auroc():
    spec = scenario("sim_75_1", n_rows=100_000)
    d = simulate(spec, SimCoefficients(beta=0.0, beta0=-1.386, auroc=0.5, prevalence=0.2))
    score = d.values[:, :4].sum(axis=1)
    assert abs(metrics.auroc(d.values[:, d.index("outcome")], score) - 0.5) < 0.01


def test_noise_columns_carry_no_signal():
    d = simulate(scenario("sim_90_7_noise", n_rows=200_000, seed=2))
    y = d.values[:, d.index("outcome")]
    for j in range(4, 16):
        assert abs(metrics.auroc(y, d.values[:, j]) - 0.5) < 0.02


def test_calibration_is_cached_and_deterministic():
    spec = scenario("sim_75_7")
    a = calibrate_coefficients(spec)
    b = calibrate_coefficients(scenario("sim_75_7", seed=99))
    assert a is b
    assert abs(a.auroc - 0.75) < spec.tolerance
    assert a.beta > 0


def test_same_seed_same_data():
    a = simulate(scenario("sim_75_1", n_rows=100, seed=5))
    b = simulate(scenario("sim_75_1", n_rows=100, seed=5))
    c = simulate(scenario("sim_75_1", n_rows=100, seed=6))
    assert a == b and not a == c
