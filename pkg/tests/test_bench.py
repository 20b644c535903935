"""Tests for the pressure-wave benchmark."""

import numpy as np
import pytest

from fsi_thinwall.bench import (
    BenchConfig,
    PressurePulseProblem,
    Snapshot,
    analyze_snapshots,
    build_bench_operators,
    pin,
    run_bench,
    top_wall_displacement,
)


def _tiny(**kwargs) -> BenchConfig:
    options = dict(M=1, tau=1e-3, snapshot_times=[0.001, 0.003])
    options.update(kwargs)
    return BenchConfig(**options)


def test_inlet_pressure():
    """Test the cosine pulse and its cutoff."""
    assert pin(0.0) == 0.0
    assert pin(0.0015) == pytest.approx(1.3333e4)
    assert pin(0.00075, p_max=2.0) == pytest.approx(1.0)
    assert pin(0.0031) == 0.0
    with pytest.raises(ValueError):
        pin(-1e-3)


def test_structure_coefficients():
    """Test C0 and C1 from the wall material parameters."""
    config = BenchConfig()

    assert config.C0 == pytest.approx(25000.0)
    assert config.C1 == pytest.approx(400000.0)
    params = config.physical_params()
    assert params.rho_eps == pytest.approx(0.11)
    assert params.mu == pytest.approx(0.035)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"M": 0},
        {"M": 1.5},
        {"tau": 0.0},
        {"poisson": 1.0},
        {"structure_ends": "clamped"},
        {"element": "p3"},
        {"snapshot_times": [-0.1]},
    ],
)
def test_bench_config_validation(kwargs):
    """Test rejected benchmark parameters."""
    with pytest.raises(ValueError):
        BenchConfig(**kwargs)


def test_snapshot_steps():
    """Test snapshot step indices for the default times."""
    assert BenchConfig().snapshot_steps() == [30, 90, 160, 260]
    assert BenchConfig(tau=1e-3, snapshot_times=[0.0021, 0.001]).snapshot_steps() == [1, 2]


def test_pulse_load_integrates_inlet_pressure():
    """Test that the inflow load carries p_in times the channel height."""
    config = _tiny()
    ops = build_bench_operators(config)
    load = PressurePulseProblem(config).boundary_load(ops, 0.001)

    assert load[: ops.V.n_nodes].sum() == pytest.approx(config.pin(0.001) * config.ly)
    assert np.allclose(load[ops.V.n_nodes :], 0.0)


def test_zero_pulse_gives_zero_run():
    """Test that a vanishing pulse leaves the channel at rest."""
    result = run_bench(_tiny(p_max=0.0))

    assert [s.step for s in result.snapshots] == [1, 3]
    for snap in result.snapshots:
        assert np.all(snap.u == 0.0)
        assert np.all(snap.eta == 0.0)
    assert len(result.energy) == 3
    assert result.outputs == []


def test_response_is_linear_in_pulse_amplitude():
    """Test that doubling p_max doubles every field."""
    one = run_bench(_tiny(p_max=1.0))
    two = run_bench(_tiny(p_max=2.0))

    assert np.allclose(two.final.u, 2.0 * one.final.u, rtol=1e-8, atol=1e-14)
    assert np.allclose(two.final.eta, 2.0 * one.final.eta, rtol=1e-8, atol=1e-14)
    assert np.abs(one.final.u).max() > 0.0


def _bump_snapshots(ops, centers, amplitudes):
    snaps = []
    for k, (c, a) in enumerate(zip(centers, amplitudes)):
        p = ops.Q.interpolate(lambda x, y, c=c, a=a: a * np.exp(-4.0 * (x - c) ** 2))
        snaps.append(Snapshot(k, 0.001 * (k + 1), np.zeros(ops.n_u), p, np.zeros(ops.S.n_dofs)))
    return snaps


def test_analyze_snapshots_detects_reflection():
    """Test peak tracking and the reflected negative wave."""
    ops = build_bench_operators(_tiny())
    snaps = _bump_snapshots(ops, [1.0, 2.0, 4.0], [1.0, 0.9, -0.5])
    analysis = analyze_snapshots(ops, snaps)

    assert [r["x_peak"] for r in analysis.rows] == pytest.approx([1.0, 2.0, 4.0])
    assert analysis.first_reflected == 2
    assert analysis.peaks_increasing
    assert analysis.negative_after_reflection
    assert analysis.passed


def test_analyze_snapshots_without_reflection():
    """Test that a series without negative pressure fails the diagnostics."""
    ops = build_bench_operators(_tiny())
    analysis = analyze_snapshots(ops, _bump_snapshots(ops, [1.0, 2.0, 3.0], [1.0, 0.9, 0.8]))

    assert analysis.first_reflected is None
    assert analysis.peaks_increasing
    assert not analysis.passed


def test_top_wall_displacement_table():
    """Test the per-snapshot wall profile layout."""
    ops = build_bench_operators(_tiny())
    snaps = _bump_snapshots(ops, [1.0, 2.0], [1.0, 1.0])
    table = top_wall_displacement(ops, snaps)

    assert list(table.columns) == ["x", "eta2_t0.001", "eta2_t0.002"]
    assert table["x"].is_monotonic_increasing
    assert table["x"].iloc[0] == pytest.approx(0.0)
    assert table["x"].iloc[-1] == pytest.approx(5.0)


def test_bench_outputs(tmp_path):
    """Test the files written by a tiny benchmark run."""
    result = run_bench(_tiny(p_max=1.0, refined_vtk=True), str(tmp_path))
    names = sorted(p.name for p in result.outputs)

    assert names == [
        "energy.csv",
        "snapshot_00.vtk",
        "snapshot_01.vtk",
        "snapshots.csv",
        "wall_displacement.csv",
    ]
    assert all((tmp_path / n).is_file() for n in names)
    header = (tmp_path / "snapshots.csv").read_text().splitlines()[0]
    assert header == "time,x_peak,p_max,p_min"


@pytest.mark.slow
def test_pressure_wave_travels_and_reflects():
    """Test the default benchmark: the peak moves right, then a reflected negative wave."""
    result = run_bench(BenchConfig(M=16, tau=1e-4))
    analysis = result.analysis
    peaks = [row["x_peak"] for row in analysis.rows]

    assert len(result.snapshots) == 4
    assert analysis.first_reflected is not None
    assert peaks[0] < peaks[1] < 5.0
    assert analysis.passed
