import numpy as np
import pytest

from mfpredict.ampute import MECHANISMS, AmputationSpec, ampute, noise_columns, plan, sample_size
from mfpredict.errors import DataError, SchemaError
from mfpredict.simgen import scenario, simulate
from mfpredict.tabular import Continuous, Dataset


@pytest.fixture(scope="module")
def sim():
    return simulate(scenario("sim_75_7_noise", seed=3))


def _spec(mech, **kw):
    if mech.endswith("_out"):
        kw.setdefault("outcome", "outcome")
    return AmputationSpec(mech, **kw)


def test_sample_size_rounds_half_up():
    assert sample_size(0.3, 4000) == 1200
    assert sample_size(0.5, 5) == 3
    assert sample_size(0.1, 4) == 0
    assert sample_size(0.0, 10) == 0


def test_mcar_exact_count(sim):
    out = ampute(sim, AmputationSpec("MCAR", seed=1))
    for j, name in enumerate(sim.names):
        expected = 1200 if name != "outcome" else 0
        assert out.mask[:, j].sum() == expected


def test_noise_columns_default_and_override(sim):
    spec = AmputationSpec("MAR_2")
    assert noise_columns(sim, spec) == [f"N{i}" for i in range(1, 13)]
    out = ampute(sim, AmputationSpec("MAR_2", noise=[]))
    assert out.mask.sum(axis=0)[sim.index("N1")] == 0
    assert out.mask.sum(axis=0)[sim.index("V2")] == 0


def test_mar_2_stratum_rates(sim):
    spec = AmputationSpec("MAR_2", seed=2)
    out = ampute(sim, spec)
    for s in plan(sim, spec):
        got = out.mask[s.rows, sim.index(s.column)].sum()
        assert got == sample_size(s.rate, len(s.rows))
    assert abs(out.mask[:, sim.index("V1")].mean() - 0.3) < 0.02


def test_outcome_strata_cover_rows(sim):
    spec = _spec("MAR_circ_out")
    strata = [s for s in plan(sim, spec) if s.column == "V1"]
    assert [s.rate for s in strata] == [0.10, 0.36, 0.20, 0.30]
    rows = np.sort(np.concatenate([s.rows for s in strata]))
    assert np.array_equal(rows, np.arange(sim.n_rows))
    pos = sim.values[:, sim.index("outcome")] == 1
    assert pos[strata[0].rows].all() and not pos[strata[1].rows].any()


def test_mnar_masks_high_values_more():
    diffs = []
    for s in range(5):
        d = simulate(scenario("sim_75_1", seed=s))
        out = ampute(d, AmputationSpec("MNAR", seed=s))
        j = d.index("V1")
        x = d.values[:, j]
        diffs.append(x[out.mask[:, j]].mean() - x[~out.mask[:, j]].mean())
    assert min(diffs) > 0


def test_driver_read_before_masking(sim):
    spec = AmputationSpec("MAR_circ", seed=0)
    strata = plan(sim, spec)
    x = sim.values[:, sim.index("V2")]
    low = next(s for s in strata if s.column == "V1")
    assert np.array_equal(low.rows, np.flatnonzero(x <= x.mean()))


def test_same_seed_same_mask(sim):
    for mech in MECHANISMS:
        a = ampute(sim, _spec(mech, seed=9))
        b = ampute(sim, _spec(mech, seed=9))
        c = ampute(sim, _spec(mech, seed=10))
        assert np.array_equal(a.mask, b.mask)
        assert not np.array_equal(a.mask, c.mask)


def test_spec_validation():
    with pytest.raises(ValueError):
        AmputationSpec("MAR_3")
    with pytest.raises(ValueError):
        AmputationSpec("MAR_2_out")
    with pytest.raises(ValueError):
        AmputationSpec("MAR_2", targets=["V1"], drivers=["V1"])
    with pytest.raises(ValueError):
        AmputationSpec("MAR_2", targets=["V1", "V3"], drivers=["V2"])
    with pytest.raises(ValueError):
        AmputationSpec("MCAR", rate=1.5)
    with pytest.raises(ValueError):
        AmputationSpec("MCAR", targets=["outcome"], outcome="outcome")
    with pytest.raises(ValueError):
        AmputationSpec("MCAR", drivers=["V1"])


def test_data_errors(sim):
    with pytest.raises(SchemaError):
        ampute(sim, AmputationSpec("MCAR", targets=["nope"]))
    holed = ampute(sim, AmputationSpec("MCAR", noise=[]))
    with pytest.raises(DataError):
        ampute(holed, AmputationSpec("MCAR"))
    d = Dataset(["V1", "y"], [Continuous()] * 2, [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    with pytest.raises(DataError):
        ampute(d, AmputationSpec("MAR_2_out", targets=["V1"], drivers=["y"], outcome="y"))


def test_config_round_trip():
    spec = AmputationSpec("MAR_2_out", outcome="outcome", seed=7, low_rate=0.2, noise=["N1"])
    text = spec.to_config()
    assert "mechanism=MAR_2_out" in text
    assert AmputationSpec.from_config(text) == spec
    with pytest.raises(ValueError):
        AmputationSpec.from_config("bogus=1\n")
