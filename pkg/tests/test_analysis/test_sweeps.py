"""Tests for parameter sweeps and their CSV/JSON output."""

import io
import json
import math

import pytest

from src.analysis.sweeps import (
    BoostScanRow,
    boost_records,
    boost_scan,
    can_simulate,
    config_for_point,
    errors_for_point,
    evaluate_point,
    expand_grid,
    result_records,
    run_sweep,
    write_rows,
)
from src.shared.models import (
    Layout,
    Mechanism,
    OutputFormat,
    ProtocolConfig,
    SweepSpec,
)


def _spec(mechanism, grid, **kwargs) -> SweepSpec:
    return SweepSpec(mechanism=mechanism, grid=grid, **kwargs)


class TestGrid:
    def test_last_axis_varies_fastest(self):
        spec = _spec(Mechanism.STEP3, {"dy": [0.0, 0.1], "dz": [0.0, 0.2, 0.3]})
        points = expand_grid(spec)
        assert len(points) == 6
        assert points[0] == {"dy": 0.0, "dz": 0.0}
        assert points[1] == {"dy": 0.0, "dz": 0.2}
        assert points[3] == {"dy": 0.1, "dz": 0.0}

    def test_size_axes_build_uniform_config(self):
        spec = _spec(Mechanism.EXCITATION, {"p_gamma": [0.9], "vertices": [3], "qubits": [2]})
        config = config_for_point(spec, {"p_gamma": 0.9, "vertices": 3, "qubits": 2})
        assert config.blocks == [[2], [2], [2]]

    @pytest.mark.parametrize(
        "layout,blocks", [(Layout.CHAIN, [[1], [1], [1]]), (Layout.GHZ, [[3]])]
    )
    def test_photons_axis(self, layout, blocks):
        spec = _spec(Mechanism.LOSS, {"p_loss": [0.1], "photons": [3]}, layout=layout)
        assert config_for_point(spec, {"p_loss": 0.1, "photons": 3}).blocks == blocks

    def test_sub_vertices_follow_base(self):
        base = ProtocolConfig(blocks=[[1, 1]])
        spec = _spec(Mechanism.STEP5A, {"dy": [0.1], "vertices": [2]}, protocol=base)
        config = config_for_point(spec, {"dy": 0.1, "vertices": 2})
        assert config.blocks == [[1, 1], [1, 1]]

    def test_no_size_axes_keeps_base(self):
        base = ProtocolConfig(blocks=[[2, 1]])
        spec = _spec(Mechanism.STEP3, {"dy": [0.1]}, protocol=base)
        assert config_for_point(spec, {"dy": 0.1}) is base

    def test_purcell_axis(self):
        errors = errors_for_point(Mechanism.CYCLICITY, {"purcell": 9.0})
        assert errors.cyclicity_return_prob == pytest.approx(0.9)

    def test_loss_late_defaults_to_early(self):
        errors = errors_for_point(Mechanism.LOSS, {"p_loss": 0.2})
        assert errors.loss_prob_late == 0.2

    def test_simulation_cap(self):
        assert can_simulate(ProtocolConfig.uniform(6, 2))
        assert not can_simulate(ProtocolConfig.uniform(7))
        assert not can_simulate(ProtocolConfig.uniform(1, 13))


class TestEvaluation:
    def test_spin_prep_rows(self):
        spec = _spec(Mechanism.SPIN_PREP, {"f_s": [1.0], "dz": [0.0], "dy": [0.0, math.pi / 2]})
        results = run_sweep(spec)
        assert [r.value for r in results] == pytest.approx([1.0, 0.5])
        assert all(r.passed for r in results)
        assert all(r.simulated is not None for r in results)

    def test_closed_form_only_skips_simulation(self):
        spec = _spec(Mechanism.STEP3, {"dy": [0.2]}, closed_form_only=True)
        (result,) = run_sweep(spec)
        assert result.simulated is None
        assert result.difference is None
        assert result.passed

    def test_large_points_not_simulated(self):
        spec = _spec(Mechanism.LOSS, {"p_loss": [0.01], "photons": [20]})
        result = evaluate_point(spec, {"p_loss": 0.01, "photons": 20})
        assert result.simulated is None
        assert result.value == pytest.approx(0.99**20)

    def test_loss_scaling_monotone(self):
        photons = [float(k) for k in range(1, 61)]
        spec = _spec(
            Mechanism.LOSS, {"p_loss": [0.01], "photons": photons}, closed_form_only=True
        )
        values = [r.value for r in run_sweep(spec)]
        assert values == pytest.approx([0.99**k for k in range(1, 61)])
        assert all(a >= b for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("mechanism,axis", [
        (Mechanism.CYCLICITY, "p_dd"),
        (Mechanism.EXCITATION, "p_gamma"),
    ])
    def test_scaling_columns_monotone(self, mechanism, axis):
        for value in (0.9, 0.95, 0.99):
            spec = _spec(
                mechanism,
                {axis: [value], "photons": [float(k) for k in range(1, 61)]},
                closed_form_only=True,
            )
            column = [r.value for r in run_sweep(spec)]
            assert all(a >= b for a, b in zip(column, column[1:]))
            assert column[-1] == pytest.approx(value**60)

    def test_simulated_spot_checks_agree(self):
        spec = _spec(
            Mechanism.CYCLICITY, {"p_dd": [0.95], "photons": [1.0, 3.0, 6.0]}, layout=Layout.CHAIN
        )
        results = run_sweep(spec)
        assert all(r.simulated is not None for r in results)
        assert all(r.passed for r in results)

    def test_boost_points(self):
        spec = _spec(Mechanism.BOOST, {"m": [3], "eta": [0.95]}, trials=50_000, seed=2)
        (result,) = run_sweep(spec)
        assert result.value == pytest.approx(0.6432, abs=5e-4)
        assert result.passed

    def test_workers_keep_grid_order(self):
        grid = {"dy": [0.0, 0.2, 0.4, 0.6]}
        serial = run_sweep(_spec(Mechanism.STEP5B, grid))
        parallel = run_sweep(_spec(Mechanism.STEP5B, grid, workers=2))
        assert [r.parameters for r in parallel] == [r.parameters for r in serial]
        assert [r.value for r in parallel] == [r.value for r in serial]


class TestBoostScan:
    def test_closed_form_only(self):
        rows = boost_scan([0.8, 0.95], m_max=4, trials=10, seed=0, closed_form_only=True)
        assert len(rows) == 8
        assert {row.optimal_m for row in rows if row.eta == 0.8} == {1}
        assert {row.optimal_m for row in rows if row.eta == 0.95} == {3}
        assert all(row.monte_carlo is None and row.passed for row in rows)

    def test_monte_carlo_within_tolerance(self):
        rows = boost_scan([0.9], m_max=2, trials=40_000, seed=5)
        assert all(row.passed for row in rows)
        assert all(row.stderr is not None and row.stderr > 0 for row in rows)

    def test_failed_row(self):
        row = BoostScanRow(
            eta=0.9, m=1, closed_form=0.405, monte_carlo=0.5, optimal_m=1, tolerance=0.01
        )
        assert not row.passed


class TestOutput:
    def test_csv_format(self):
        spec = _spec(Mechanism.STEP3, {"dy": [0.2]}, closed_form_only=True)
        buf = io.StringIO()
        write_rows(result_records(run_sweep(spec)), buf, OutputFormat.CSV)
        header, row = buf.getvalue().splitlines()
        assert header == "mechanism,dy,closed_form,simulated,difference"
        assert row == f"step3,0.2,{math.cos(0.1) ** 2:.12g},,"

    def test_json_format(self):
        rows = boost_scan([1.0], m_max=1, trials=10, seed=0, closed_form_only=True)
        buf = io.StringIO()
        write_rows(boost_records(rows), buf, OutputFormat.JSON)
        data = json.loads(buf.getvalue())
        assert data == [
            {
                "eta": 1.0,
                "m": 1,
                "closed_form": 0.5,
                "monte_carlo": None,
                "stderr": None,
                "optimal_m": 1,
            }
        ]

    def test_empty_csv(self):
        buf = io.StringIO()
        write_rows([], buf, OutputFormat.CSV)
        assert buf.getvalue() == ""

    def test_identical_runs_identical_bytes(self):
        spec = _spec(Mechanism.OFF_RESONANT, {"p_up": [0.1, 0.2]})
        outputs = []
        for _ in range(2):
            buf = io.StringIO()
            write_rows(result_records(run_sweep(spec)), buf, OutputFormat.CSV)
            outputs.append(buf.getvalue())
        assert outputs[0] == outputs[1]
