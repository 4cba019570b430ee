import json
import math

import numpy as np
import pytest

from strainplan.errors import FitError, StrainPlanError
from strainplan.maps import (
    MapLibrary,
    MapSelector,
    PLANNER_FLOOR,
    StrainGrid,
    StrainMap,
    build_library,
    dense_grid_from_map,
    encode_map_slice,
    export_grid,
    fit_rbf,
    load_library,
    load_map,
    sample_grid,
    save_library,
    save_map,
    select_map,
)
from strainplan.shoulder import AGGREGATE


def make_map(params, bias=0.0, pe_range=(-1.0, 3.0), se_range=(0.0, 3.0), **kw):
    defaults = dict(
        ar=0.0, activation_level=0.0, tendon_id="synthetic", fit_rms=0.0,
        pe_range=pe_range, se_range=se_range,
    )
    defaults.update(kw)
    return StrainMap(params=np.asarray(params, dtype=float), bias=bias, **defaults)


@pytest.fixture(scope="module")
def small_library(model):
    return build_library(
        model,
        tendons=["infraspinatus", AGGREGATE],
        ar_bins=np.deg2rad([-15.0, 0.0, 15.0]),
        activation_bins=np.arange(0.0, 0.251, 0.05),
        resolution=16,
        n_centers=(7, 7),
    )


# ---------------------------------------------------------------------------
# sampling


def test_aggregate_dominates_each_tendon(model):
    agg = sample_grid(model, AGGREGATE, 0.0, 0.0, 16)
    for name in model.muscle_names:
        single = sample_grid(model, name, 0.0, 0.0, 16)
        assert np.all(agg.values >= single.values - 1e-12)


def test_grid_determinism(model):
    a = sample_grid(model, "infraspinatus", 0.1, 0.0, 12)
    b = sample_grid(model, "infraspinatus", 0.1, 0.0, 12)
    assert np.array_equal(a.values, b.values)


def test_grid_monotone_in_activation(model):
    lo = sample_grid(model, "infraspinatus", 0.0, 0.0, 16)
    hi = sample_grid(model, "infraspinatus", 0.0, 0.25, 16)
    assert np.all(hi.values >= lo.values - 1e-12)
    assert hi.values.max() > lo.values.max()


def test_grid_rejects_low_resolution(model):
    with pytest.raises(ValueError):
        sample_grid(model, AGGREGATE, 0.0, 0.0, 7)


def test_grid_values_nonnegative_and_locked(model):
    g = sample_grid(model, AGGREGATE, 0.0, 0.1, 12)
    assert np.all(g.values >= 0)
    with pytest.raises(ValueError):
        g.values[0, 0] = -1.0


# ---------------------------------------------------------------------------
# fitting


def test_fit_recovers_single_gaussian_exactly():
    true = make_map([[5.0, 0.8, 1.2, 0.5, 0.7]], bias=0.0)
    pe = np.linspace(-1.0, 3.0, 24)
    se = np.linspace(0.0, 3.0, 24)
    grid_pe, grid_se = np.meshgrid(pe, se)
    vals, _, _ = true.evaluate_batch(grid_pe, grid_se)
    grid = StrainGrid(pe, se, 0.0, 0.0, vals, "synthetic")
    fitted = fit_rbf(
        grid,
        centers=np.array([[0.8, 1.2]]),
        widths=np.array([[0.5, 0.7]]),
        regularization=1e-12,
    )
    assert fitted.fit_rms <= 1e-8 * 5.0
    assert fitted.params[0, 0] == pytest.approx(5.0, abs=1e-6)


def test_fit_constant_grid_uses_bias():
    pe = np.linspace(-1.0, 3.0, 16)
    se = np.linspace(0.0, 3.0, 16)
    vals = np.full((16, 16), 3.14)
    grid = StrainGrid(pe, se, 0.0, 0.0, vals, "flat")
    fitted = fit_rbf(grid, n_centers=(5, 5))
    grid_pe, grid_se = np.meshgrid(pe, se)
    out, _, _ = fitted.evaluate_batch(grid_pe, grid_se)
    assert np.abs(out - 3.14).max() <= 1e-6


def test_fit_quality_on_model_grid(model):
    grid = sample_grid(model, "infraspinatus", 0.0, 0.0, 40)
    fitted = fit_rbf(grid)
    assert fitted.fit_rms <= 0.05 * grid.values.max()


def test_fit_failure_reports_diagnostics(model):
    grid = sample_grid(model, AGGREGATE, 0.0, 0.0, 24)
    with pytest.raises(FitError, match="fit rms"):
        fit_rbf(grid, centers=np.array([[0.0, 1.5]]), widths=np.array([[0.05, 0.05]]))


# ---------------------------------------------------------------------------
# evaluation


def test_eval_at_gaussian_center():
    smap = make_map([[4.0, 1.0, 1.5, 0.6, 0.6]], bias=0.5)
    sample = smap.evaluate(1.0, 1.5)
    assert sample.value == pytest.approx(4.5, abs=1e-12)
    assert sample.d_pe == pytest.approx(0.0, abs=1e-12)
    assert sample.d_se == pytest.approx(0.0, abs=1e-12)
    assert not sample.clipped


def test_eval_gradient_matches_finite_differences(model):
    grid = sample_grid(model, AGGREGATE, 0.0, 0.0, 32)
    smap = fit_rbf(grid)
    rng = np.random.default_rng(9)
    h = 1e-5
    for _ in range(100):
        pe = rng.uniform(-1.3, 2.9)
        se = rng.uniform(0.1, 2.9)
        val, d_pe, d_se, *_ = smap.raw_terms(pe, se)
        fd_pe = (smap.raw_terms(pe + h, se)[0] - smap.raw_terms(pe - h, se)[0]) / (2 * h)
        fd_se = (smap.raw_terms(pe, se + h)[0] - smap.raw_terms(pe, se - h)[0]) / (2 * h)
        assert abs(float(d_pe) - float(fd_pe)) <= 1e-6
        assert abs(float(d_se) - float(fd_se)) <= 1e-6


def test_eval_hessian_matches_finite_differences():
    smap = make_map(
        [[4.0, 0.5, 1.0, 0.4, 0.8], [-2.0, 1.5, 2.0, 0.7, 0.5]], bias=0.3
    )
    h = 1e-5
    rng = np.random.default_rng(3)
    for _ in range(25):
        pe, se = rng.uniform(0.0, 2.5), rng.uniform(0.2, 2.8)
        _, _, _, h_pp, h_ss, h_ps = smap.raw_terms(pe, se)
        d = lambda p, s: smap.raw_terms(p, s)[1:3]
        fd_pp = (d(pe + h, se)[0] - d(pe - h, se)[0]) / (2 * h)
        fd_ss = (d(pe, se + h)[1] - d(pe, se - h)[1]) / (2 * h)
        fd_ps = (d(pe, se + h)[0] - d(pe, se - h)[0]) / (2 * h)
        assert float(h_pp) == pytest.approx(float(fd_pp), abs=1e-6)
        assert float(h_ss) == pytest.approx(float(fd_ss), abs=1e-6)
        assert float(h_ps) == pytest.approx(float(fd_ps), abs=1e-6)


def test_eval_symmetric_map():
    smap = make_map(
        [[3.0, 1.0, 1.5, 0.5, 0.5], [3.0, -1.0, 1.5, 0.5, 0.5]],
        pe_range=(-3.0, 3.0),
    )
    for pe in (0.2, 0.7, 1.4):
        assert smap.evaluate(pe, 1.1).value == pytest.approx(
            smap.evaluate(-pe, 1.1).value, abs=1e-12
        )


def test_eval_clamps_negative_with_zero_gradient():
    smap = make_map([[1.0, 1.0, 1.0, 0.3, 0.3]], bias=-5.0)
    sample = smap.evaluate(2.5, 2.5)
    assert sample.value == 0.0
    assert sample.d_pe == 0.0 and sample.d_se == 0.0


def test_eval_boundary_extension_flagged():
    smap = make_map([[2.0, 1.0, 1.0, 0.5, 0.5]], bias=0.1)
    inside = smap.evaluate(3.0, 1.0)
    outside = smap.evaluate(4.0, 1.0)
    assert outside.clipped and not inside.clipped
    assert outside.value == pytest.approx(inside.value, abs=1e-12)


def test_planner_floor_freezes_value_and_gradient():
    smap = make_map([[1.0, 1.0, 1.0, 0.3, 0.3]], bias=-5.0)
    val, d_pe, d_se, h_pp, h_ss, h_ps = smap.planner_terms(2.5, 2.5)
    assert float(val) == PLANNER_FLOOR
    assert float(d_pe) == 0.0 and float(d_se) == 0.0
    assert float(h_pp) == 0.0 and float(h_ss) == 0.0 and float(h_ps) == 0.0
    # above the floor the raw surrogate is exposed even when negative
    smap2 = make_map([[1.0, 1.0, 1.0, 0.3, 0.3]], bias=-0.2)
    val2, *_ = smap2.planner_terms(2.5, 2.5)
    assert PLANNER_FLOOR < float(val2) < 0.0


# ---------------------------------------------------------------------------
# selection


def test_select_exact_bin_center(small_library):
    sel = select_map(small_library, "infraspinatus", 0.0, 0.10)
    assert sel.map.activation_level == pytest.approx(0.10)
    assert sel.map.ar == pytest.approx(0.0)
    assert not sel.clamped


def test_select_out_of_range_clamps_with_flag(small_library):
    sel = select_map(small_library, AGGREGATE, 1.2, 0.9)
    assert sel.clamped
    assert sel.i_ar == 2 and sel.i_act == 5


def test_select_unknown_tendon(small_library):
    with pytest.raises(KeyError):
        select_map(small_library, "biceps", 0.0, 0.0)


def test_hysteresis_sweep_crosses_each_boundary_once(small_library):
    selector = MapSelector(small_library)
    t = np.linspace(0.0, 1.0, 400)
    ramp = 0.25 * t + 0.008 * np.sin(80 * math.pi * t)  # jitter < band/2
    switches = 0
    last = selector.select(AGGREGATE, 0.0, float(ramp[0])).i_act
    for value in ramp[1:]:
        cur = selector.select(AGGREGATE, 0.0, float(value)).i_act
        if cur != last:
            switches += 1
            last = cur
    assert switches == 5  # five boundaries between six bins, no chattering


def test_hysteresis_holds_around_single_boundary(small_library):
    selector = MapSelector(small_library)
    selector.select(AGGREGATE, 0.0, 0.0)
    # oscillate tightly around the 0.025 boundary: never switches
    for k in range(100):
        sel = selector.select(AGGREGATE, 0.0, 0.025 + 0.01 * math.sin(k))
        assert sel.i_act == 0


def test_selection_deterministic(small_library):
    a = select_map(small_library, AGGREGATE, 0.1, 0.13, previous=(1, 2))
    b = select_map(small_library, AGGREGATE, 0.1, 0.13, previous=(1, 2))
    assert (a.i_ar, a.i_act) == (b.i_ar, b.i_act)


def test_incomplete_library_rejected(small_library):
    maps = dict(small_library.maps)
    maps.pop(("infraspinatus", 0, 0))
    with pytest.raises(StrainPlanError, match="incomplete"):
        MapLibrary(small_library.ar_bins, small_library.activation_bins,
                   small_library.tendons, maps)


# ---------------------------------------------------------------------------
# persistence and export


def test_map_save_load_roundtrip(tmp_path, small_library):
    smap = small_library.get(AGGREGATE, 1, 2)
    path = tmp_path / "m.smap"
    save_map(smap, path)
    loaded = load_map(path)
    assert np.array_equal(loaded.params, smap.params)
    assert loaded.bias == smap.bias
    assert loaded.tendon_id == smap.tendon_id
    assert loaded.fit_rms == smap.fit_rms
    assert loaded.pe_range == smap.pe_range


def test_load_rejects_junk(tmp_path):
    path = tmp_path / "bad.smap"
    path.write_bytes(b"this is not a map")
    with pytest.raises(StrainPlanError):
        load_map(path)


def test_library_roundtrip(tmp_path, small_library):
    save_library(small_library, tmp_path / "lib")
    loaded = load_library(tmp_path / "lib")
    assert loaded.tendons == small_library.tendons
    assert np.allclose(loaded.ar_bins, small_library.ar_bins)
    for key, smap in small_library.maps.items():
        assert np.array_equal(loaded.maps[key].params, smap.params)
    index = json.loads((tmp_path / "lib" / "index.json").read_text())
    assert index["schema_version"] == 1
    assert len(index["maps"]) == len(small_library.maps)


def test_export_json_and_csv(small_library):
    smap = small_library.get(AGGREGATE, 1, 0)
    blob = json.loads(export_grid(smap, "json", resolution=12))
    assert len(blob["pe_axis"]) == 12
    assert len(blob["values"]) == 12
    csv_text = export_grid(smap, "csv", resolution=12)
    lines = csv_text.strip().split("\n")
    assert len(lines) == 13
    with pytest.raises(ValueError):
        export_grid(smap, "xml")


def test_encode_map_slice_roundtrip(small_library):
    import base64

    smap = small_library.get(AGGREGATE, 0, 0)
    payload = encode_map_slice(smap, resolution=16)
    raw = base64.b64decode(payload["values_b64"])
    arr = np.frombuffer(raw, dtype="<f4").reshape(payload["shape"])
    _, _, dense = dense_grid_from_map(smap, 16)
    assert np.allclose(arr, dense, atol=1e-5)
