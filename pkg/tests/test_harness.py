"""Harness tests: case resolution, cross-engine comparison metrics, the
observed-order estimator, snapshot/report file formats and the SVG charts."""

import xml.etree.ElementTree as ET
from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest

from tubeflow.config import ScenarioConfig, preset, rescale
from tubeflow.lbm import SolverAbort
from tubeflow.analytic import steady_regime
from tubeflow.charts import comparison_charts, line_chart
from tubeflow.harness import (CSV_COLUMNS, analytic_outlet_residual, compare,
                              convergence_study, flux_deviation, mixture_flux,
                              node_coordinates, physical_profiles,
                              read_report, read_snapshots_csv, resolve_config,
                              run_case, run_engine, write_report,
                              write_snapshots_csv)
from tubeflow.harness import test_preset as make_test_preset


def _synthetic_snapshot(n, step=100, seed=0):
    rng = np.random.default_rng(seed)
    alpha_g = rng.uniform(0.1, 0.9, n)
    snap = {"step": step, "alpha_g": alpha_g, "alpha_l": 1.0 - alpha_g,
            "u_g": rng.uniform(0.0, 0.01, n), "u_l": rng.uniform(0.0, 0.005, n),
            "p_k": rng.uniform(-1.0, 1.0, n)}
    for name in ("S_g", "S_l", "sigma_g", "sigma_l", "G_g", "G_l", "phi"):
        snap[name] = rng.uniform(-1.0, 1.0, n)
    return snap


def _synthetic_run(cfg, snapshots, runtime=1.0):
    return SimpleNamespace(config=cfg, snapshots=snapshots,
                           runtime_seconds=runtime)


def test_node_coordinates():
    assert np.array_equal(node_coordinates(4), [0.125, 0.375, 0.625, 0.875])


def test_preset_wrapper_carries_id_and_config():
    tp = make_test_preset(3)
    assert tp.test_id == 3 and tp.config == preset(3)


def test_resolve_config_accepts_ids_and_configs():
    assert resolve_config(2) == preset(2)
    assert resolve_config("2") == preset(2)
    assert resolve_config(preset(1), "1/2") == rescale(preset(1), "1/2")
    with pytest.raises(TypeError):
        resolve_config(object())


# ----------------------------------------------------------------- comparison

def test_compare_of_a_run_with_itself_is_all_zeros():
    cfg = replace(preset(1), n_x=16)
    run = _synthetic_run(cfg, [_synthetic_snapshot(16)])
    report = compare(run, run)
    for name, c in report.fields.items():
        assert c.linf_rel == 0.0 and c.l2_rel == 0.0, name
        assert c.lbm_outlet == c.fd_outlet
    assert report.mixture_flux_dev_lbm == report.mixture_flux_dev_fd
    assert report.step == 100


def test_compare_rejects_mismatched_meshes():
    a = _synthetic_run(replace(preset(1), n_x=16), [_synthetic_snapshot(16)])
    b = _synthetic_run(replace(preset(1), n_x=24), [_synthetic_snapshot(24)])
    with pytest.raises(ValueError, match="node counts differ"):
        compare(a, b)


def test_mixture_flux_and_deviation():
    n = 8
    snap = {"alpha_g": np.full(n, 0.25), "alpha_l": np.full(n, 0.75),
            "u_g": np.full(n, 0.02), "u_l": np.full(n, 0.004)}
    flux = mixture_flux(snap)
    assert np.abs(flux - 0.008).max() <= 1e-17
    assert flux_deviation(snap) <= 1e-12
    # zero-mean flux falls back to the absolute deviation
    snap["u_g"] = np.array([0.02, -0.02] * 4) / 0.25
    snap["u_l"] = np.zeros(n)
    assert flux_deviation(snap) == pytest.approx(0.02)


def test_analytic_outlet_residual_on_a_consistent_outlet():
    cfg = preset(1)
    regime = steady_regime(8.4e-3, 0.95, cfg.density_ratio, cfg.g_hat,
                           cfg.k_i_hat, cfg.k_w_hat)
    snap = {"alpha_g": np.array([0.5, 0.95]),
            "u_g": np.array([0.0, 8.4e-3]),
            "u_l": np.array([0.0, regime.u_l_bar])}
    assert analytic_outlet_residual(cfg, snap) <= 1e-12


def test_analytic_outlet_residual_outside_the_circulation_regime():
    cfg = preset(1)
    snap = {"alpha_g": np.array([0.95]), "u_g": np.array([1e-5]),
            "u_l": np.array([1e-4])}
    assert analytic_outlet_residual(cfg, snap) == np.inf


# ------------------------------------------------------------------ run_case

def test_run_case_produces_aligned_runs_and_a_report():
    cfg = replace(rescale(preset(1), "4/25"), n_steps=3000, n_ramp=600)
    out = run_case(cfg, engine="both", snapshot_steps=[0, 1500, 3000])
    assert set(out) == {"config", "lbm", "fd", "report"}
    steps_lbm = [s["step"] for s in out["lbm"].snapshots]
    steps_fd = [s["step"] for s in out["fd"].snapshots]
    assert steps_lbm == steps_fd == [0, 1500, 3000]
    assert out["lbm"].config.n_x == out["fd"].config.n_x
    # both engines moved off the initial state and stayed finite
    last = out["lbm"].snapshots[-1]
    assert np.all(np.isfinite(last["u_g"])) and last["u_g"].max() > 0.0
    assert 0.0 < out["report"].fields["alpha_g"].linf_rel < 1.0


def test_run_case_single_engine_skips_the_report():
    cfg = replace(rescale(preset(1), "4/25"), n_steps=200, n_ramp=600)
    out = run_case(cfg, engine="lbm", snapshot_steps=[0, 200])
    assert set(out) == {"config", "lbm"}


def test_run_engine_prefixes_abort_messages():
    cfg = replace(rescale(preset(1), "4/25"), n_steps=5000, n_ramp=10,
                  g_hat=1e-2)
    with pytest.raises(SolverAbort, match=r"\[lbm\]"):
        run_engine(cfg, "lbm")


def test_unknown_engine_names_are_rejected():
    with pytest.raises(ValueError, match="unknown engine"):
        run_engine(preset(1), "spectral")
    with pytest.raises(ValueError, match="unknown engine"):
        run_case(1, engine="spectral")


# --------------------------------------------------------- observed order

def test_physical_profiles_rescale_velocities_by_node_count():
    cfg = replace(preset(1), n_x=16)
    snap = _synthetic_snapshot(16)
    run = _synthetic_run(cfg, [snap])
    x, prof = physical_profiles(run, ("alpha_g", "u_g"))
    assert np.array_equal(x, node_coordinates(16))
    assert np.array_equal(prof["alpha_g"], snap["alpha_g"])
    assert np.array_equal(prof["u_g"], snap["u_g"] * 16)


def _second_order_family(cfg):
    """Run-like object whose physical profiles carry a pure h^2 error."""
    n = cfg.n_x
    h = 1.0 / n
    x = node_coordinates(n)
    alpha = (0.4 + 0.2 * np.sin(2 * np.pi * x)
             + 3.0 * h * h * np.cos(2 * np.pi * x))
    u_phys = (0.6 + 0.3 * np.cos(2 * np.pi * x)
              + 0.5 * h * h * np.sin(4 * np.pi * x + 0.2))
    snap = {"step": cfg.n_steps, "alpha_g": alpha, "u_g": u_phys / n}
    return _synthetic_run(cfg, [snap])


def test_convergence_study_recovers_a_known_second_order_family():
    base = replace(preset(1), n_x=40)
    study = convergence_study(base, (1, 2, 4), fields=("alpha_g", "u_g"),
                              engine=_second_order_family)
    assert study.n_x == [40, 80, 160]
    for name in ("alpha_g", "u_g"):
        est = study.estimates[name]
        assert abs(est.order - 2.0) <= 0.1, (name, est.order)
        assert est.monotone
        assert est.errors[0] / est.errors[1] == pytest.approx(4.0, rel=0.15)


def test_convergence_study_rejects_degenerate_scale_sets():
    base = replace(preset(1), n_x=40)
    with pytest.raises(ValueError, match="at least 3"):
        convergence_study(base, (1, 2), engine=_second_order_family)
    with pytest.raises(ValueError, match="duplicate"):
        convergence_study(base, (1, 1.004, 2), engine=_second_order_family)


# ------------------------------------------------------------- file formats

def test_snapshot_csv_round_trip_is_exact(tmp_path):
    cfg = replace(preset(1), n_x=6)
    run = _synthetic_run(cfg, [_synthetic_snapshot(6, step=0, seed=1),
                               _synthetic_snapshot(6, step=50, seed=2)])
    path = tmp_path / "snaps.csv"
    write_snapshots_csv(path, run)
    back = read_snapshots_csv(path)
    assert [s["step"] for s in back] == [0, 50]
    for orig, rt in zip(run.snapshots, back):
        assert np.array_equal(rt["x"], node_coordinates(6))
        for name in CSV_COLUMNS[2:]:
            assert np.array_equal(rt[name], orig[name]), name


def test_snapshot_csv_rejects_foreign_headers(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time,position,density\n0,0.5,1.0\n")
    with pytest.raises(ValueError, match="header"):
        read_snapshots_csv(path)


def test_report_round_trip_preserves_ints_and_floats(tmp_path):
    path = tmp_path / "report.txt"
    write_report(path, [("step", 1500), ("alpha_g_linf_rel", 0.0123456789)],
                 header="comparison of nothing in particular")
    back = read_report(path)
    assert back["step"] == 1500 and isinstance(back["step"], int)
    assert back["alpha_g_linf_rel"] == 0.0123456789


# ------------------------------------------------------------------- charts

def test_line_chart_writes_wellformed_svg(tmp_path):
    path = tmp_path / "chart.svg"
    x = np.linspace(0.0, 1.0, 20)
    line_chart(path, x, {"a": np.sin(x), "b": np.cos(x)}, title="demo")
    root = ET.parse(path).getroot()
    assert root.tag.endswith("svg")
    polylines = [el for el in root.iter() if el.tag.endswith("polyline")]
    assert len(polylines) == 2


def test_comparison_charts_write_one_file_per_field(tmp_path):
    x = node_coordinates(8)
    a, b = _synthetic_snapshot(8, seed=3), _synthetic_snapshot(8, seed=4)
    paths = comparison_charts(str(tmp_path), "case", x, a, b)
    assert len(paths) == 4
    for p in paths:
        root = ET.parse(p).getroot()
        assert sum(1 for el in root.iter()
                   if el.tag.endswith("polyline")) == 2
