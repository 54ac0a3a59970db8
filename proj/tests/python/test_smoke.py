import numpy as np
import pytest

import sfm


@pytest.fixture(scope="module")
def sim():
    return sfm.simulate("gaussian", n=60, j_lo=6, j_hi=10, grid_size=20, seed=3)


@pytest.fixture(scope="module")
def model(sim):
    data, _ = sim
    return sfm.fit(data, {"flow": {"H": 20, "seed": 5}})


def test_simulate_layout(sim):
    data, truth = sim
    assert len(data) == 60
    assert len(data.grid) == 20
    assert 360 <= data.total_points <= 600
    values = data.to_grid_matrix()
    assert values.shape == (60, 20)
    assert np.isnan(values).any()
    assert truth.mean().shape == (20,)
    assert truth.eigenfunctions().shape == (4, 20)


def test_dataset_rows_and_json_roundtrip(sim):
    data, _ = sim
    again = sfm.Dataset.from_json(data.to_json())
    assert again == data
    rows = sfm.Dataset.from_rows(["a", "a", "b", "b"], [0.0, 1.0, 0.0, 1.0], [1.0, 2.0, 3.0, 4.0], grid_size=2)
    assert rows.subject_ids == ["a", "b"]
    np.testing.assert_array_equal(rows.to_grid_matrix(), [[1.0, 2.0], [3.0, 4.0]])


def test_generate_is_deterministic(model):
    a = model.generate(30, 7)
    b = model.generate(30, 7)
    assert a.shape == (30, 20)
    np.testing.assert_array_equal(a, b)
    assert np.isfinite(a).all()


def test_surface_is_a_correlation(model):
    c = model.surface
    np.testing.assert_allclose(np.diag(c), 1.0, atol=1e-12)
    assert np.linalg.eigvalsh(c).min() >= -1e-10


def test_model_json_roundtrip(model):
    again = sfm.Model.from_json(model.to_json())
    np.testing.assert_array_equal(again.generate(10, 2), model.generate(10, 2))


def test_wasserstein_and_baselines(sim, model):
    data, truth = sim
    grid = data.grid
    x = model.generate(40, 1)
    assert sfm.wasserstein2(x, x, grid) == 0.0
    gp = sfm.fit_gp(data)
    g = gp.sample(40, 2)
    k = gp.sample_kl(2, 40, 3)
    ref = truth.draw(40, 4)
    for curves in (x, g, k):
        assert 0.0 < sfm.wasserstein2(curves, ref, grid) < 10.0
    scores = sfm.mse_against_truth(x, truth)
    assert set(scores) == {"MF", "EF1", "EF2", "MDF"}
    assert all(v >= 0.0 for v in scores.values())


def test_hungarian_permutation():
    cost = np.array([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]])
    assert sfm.hungarian(cost) == [1, 0, 2]


def test_errors_carry_stage(sim):
    data, _ = sim
    with pytest.raises(sfm.SfmError) as info:
        sfm.fit(data, {"flow": {"H": 0}})
    assert info.value.stage == "config"
    assert info.value.kind == "validation"


def test_denoise_keeps_layout(sim):
    data, _ = sim
    clean = sfm.denoise(data)
    assert clean.subject_ids == data.subject_ids
    assert np.array_equal(np.isnan(clean.to_grid_matrix()), np.isnan(data.to_grid_matrix()))
