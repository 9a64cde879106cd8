"""Tests for the dual-rail fusion circuit and the detection decision table."""

import math

import pytest

from src.engine.fock import BasisKet, DualRailMode, ModeAddress, PureState
from src.fusion.circuit import (
    FUSION_TRANSFER,
    apply_dual_rail_hadamard,
    apply_fusion_transfer,
    classify_pattern,
    fusion_report,
    measure_detectors,
    pattern_label,
    threshold_events,
    to_dual_rail,
)
from src.shared.errors import ConfigurationError
from src.shared.models import Channel, Classification, FusionContext, Port, Spin, TimeBin

R, V, DET = Channel.RESONANT_H, Channel.ORTHOGONAL_V, Channel.DETUNED_H


def _ports(*ports: Port, channel: Channel = R) -> PureState:
    occ: dict = {}
    for port in ports:
        mode = DualRailMode(port, channel)
        occ[mode] = occ.get(mode, 0) + 1
    return PureState.basis(Spin.DOWN, occ)


def _probabilities(state: PureState) -> dict[tuple, float]:
    return {event.pattern: event.probability for event in measure_detectors(state)}


def test_transfer_matrix_is_self_inverse():
    product = FUSION_TRANSFER @ FUSION_TRANSFER
    for i in range(4):
        for j in range(4):
            assert product[i, j] == pytest.approx(1.0 if i == j else 0.0)


class TestDualRail:
    def test_relabel(self):
        early = ModeAddress(2, 1, TimeBin.EARLY)
        other = ModeAddress(1, 1, TimeBin.LATE)
        state = PureState.basis(Spin.DOWN, {early: 1, other: 1})
        out = to_dual_rail(state, (2, 1), (Port.A, Port.B))
        ((ket, _),) = out.items()
        assert ket.count(DualRailMode(Port.A)) == 1
        assert ket.count(other) == 1

    def test_channel_carried(self):
        late_v = ModeAddress(1, 1, TimeBin.LATE, V)
        out = to_dual_rail(PureState.basis(Spin.UP, {late_v: 1}), (1, 1), (Port.C, Port.D))
        ((ket, _),) = out.items()
        assert ket.count(DualRailMode(Port.D, V)) == 1

    def test_loss_photon_stays(self):
        lost = ModeAddress(1, 1, TimeBin.EARLY, Channel.LOSS)
        kept = ModeAddress(1, 1, TimeBin.LATE)
        out = to_dual_rail(PureState.basis(Spin.DOWN, {lost: 1, kept: 1}), (1, 1), (Port.A, Port.B))
        ((ket, _),) = out.items()
        assert ket.count(lost) == 1
        assert ket.count(DualRailMode(Port.B)) == 1

    def test_same_rail_twice(self):
        state = PureState.basis(Spin.DOWN, {ModeAddress(1, 1, TimeBin.EARLY): 1})
        with pytest.raises(ConfigurationError):
            to_dual_rail(state, (1, 1), (Port.A, Port.A))

    def test_port_already_used(self):
        state = PureState.basis(
            Spin.DOWN, {ModeAddress(1, 1, TimeBin.EARLY): 1, DualRailMode(Port.A): 1}
        )
        with pytest.raises(ConfigurationError):
            to_dual_rail(state, (1, 1), (Port.A, Port.B))

    def test_missing_qubit(self):
        state = PureState.basis(Spin.DOWN, {ModeAddress(1, 1, TimeBin.EARLY): 1})
        with pytest.raises(ConfigurationError):
            to_dual_rail(state, (2, 1), (Port.A, Port.B))


class TestTransfer:
    def test_single_photon_spreads_evenly(self):
        probs = _probabilities(apply_fusion_transfer(_ports(Port.A)))
        assert len(probs) == 4
        assert all(p == pytest.approx(0.25) for p in probs.values())

    def test_two_photon_interference(self):
        probs = _probabilities(apply_fusion_transfer(_ports(Port.A, Port.B)))
        ab = (((Port.A, R), 1), ((Port.B, R), 1))
        aa = (((Port.A, R), 2),)
        ac = (((Port.A, R), 1), ((Port.C, R), 1))
        assert probs[ab] == pytest.approx(0.25)
        assert probs[aa] == pytest.approx(0.125)
        assert ac not in probs
        assert sum(probs.values()) == pytest.approx(1.0)

    def test_channels_do_not_interfere(self):
        state = PureState.basis(
            Spin.DOWN, {DualRailMode(Port.A, R): 1, DualRailMode(Port.B, DET): 1}
        )
        probs = _probabilities(apply_fusion_transfer(state))
        assert len(probs) == 16
        assert sum(probs.values()) == pytest.approx(1.0)

    def test_bunched_input_within_cap(self):
        out = apply_fusion_transfer(_ports(Port.A, Port.A, Port.C, Port.C))
        assert out.norm_squared == pytest.approx(1.0)
        assert max(ket.photon_number for ket in out.terms) == 4

    def test_transfer_is_involution(self):
        state = PureState.from_terms(
            [(BasisKet.of(Spin.DOWN, {DualRailMode(Port.A): 1, DualRailMode(Port.C): 1}), 1.0)]
        )
        twice = apply_fusion_transfer(apply_fusion_transfer(state))
        assert twice.amplitude(next(iter(state.terms))) == pytest.approx(1.0)

    def test_rail_hadamard(self):
        out = apply_dual_rail_hadamard(_ports(Port.B))
        amps = {ket.count(DualRailMode(Port.A)): a for ket, a in out.items()}
        assert amps[1] == pytest.approx(1 / math.sqrt(2))
        assert amps[0] == pytest.approx(-1 / math.sqrt(2))
        back = apply_dual_rail_hadamard(out)
        assert back.amplitude(BasisKet.of(Spin.DOWN, {DualRailMode(Port.B): 1})) == pytest.approx(
            1.0
        )


class TestDecisionTable:
    @pytest.mark.parametrize(
        "ports,expected",
        [
            ((Port.A, Port.C), Classification.SUCCESS_AC_BD),
            ((Port.B, Port.D), Classification.SUCCESS_AC_BD),
            ((Port.A, Port.D), Classification.SUCCESS_AD_BC),
            ((Port.B, Port.C), Classification.SUCCESS_AD_BC),
            ((Port.A, Port.B), Classification.FAILURE_ERROR_HERALDED),
            ((Port.C, Port.C), Classification.FAILURE_SEPARABLE),
            ((Port.A,), Classification.FAILURE_ERROR_HERALDED),
            ((Port.A, Port.B, Port.C), Classification.FAILURE_ERROR_HERALDED),
            ((), Classification.NO_ENTANGLEMENT_ATTEMPTED),
        ],
    )
    def test_resonant_patterns(self, ports, expected):
        counts: dict = {}
        for port in ports:
            counts[(port, R)] = counts.get((port, R), 0) + 1
        assert classify_pattern(counts) is expected

    def test_orthogonal_photon_heralds_error(self):
        counts = {(Port.A, R): 1, (Port.C, V): 1}
        assert classify_pattern(counts) is Classification.FAILURE_ERROR_HERALDED

    def test_orthogonal_photon_ambiguous_without_discrimination(self):
        counts = {(Port.A, R): 1, (Port.C, V): 1}
        result = classify_pattern(counts, discriminate_channels=False)
        assert result is Classification.AMBIGUOUS

    def test_orthogonal_emission_possible(self):
        counts = {(Port.A, R): 1, (Port.C, R): 1}
        context = FusionContext(orthogonal_emission_possible=True)
        assert classify_pattern(counts, context, discriminate_channels=False) is (
            Classification.AMBIGUOUS
        )
        assert classify_pattern(counts, context) is Classification.SUCCESS_AC_BD

    def test_detuned_photons_filtered(self):
        counts = {(Port.A, R): 1, (Port.D, R): 1, (Port.B, DET): 1}
        assert classify_pattern(counts) is Classification.SUCCESS_AD_BC

    def test_single_photon_herald(self):
        context = FusionContext(herald_single_photon=True)
        assert classify_pattern({(Port.C, R): 1}, context) is Classification.SUCCESS_AC_BD
        assert classify_pattern({(Port.D, R): 1}, context) is Classification.SUCCESS_AD_BC
        assert classify_pattern({(Port.A, R): 1}, context) is (
            Classification.FAILURE_ERROR_HERALDED
        )

    def test_both_sided_flip_error(self):
        context = FusionContext(both_sided_flip_error=True)
        flip = Classification.SUCCESS_FLIP_ERROR
        assert classify_pattern({(Port.A, R): 2}, context) is flip
        assert classify_pattern({(Port.D, R): 2}, context) is flip
        assert classify_pattern({(Port.A, R): 1, (Port.B, R): 1}, context) is flip
        assert classify_pattern({(Port.C, R): 1, (Port.D, R): 1}, context) is flip

    def test_both_sided_flip_error_cross_patterns_ambiguous(self):
        context = FusionContext(both_sided_flip_error=True)
        for pair in ((Port.A, Port.C), (Port.B, Port.D), (Port.A, Port.D), (Port.B, Port.C)):
            counts = {(pair[0], R): 1, (pair[1], R): 1}
            assert classify_pattern(counts, context) is Classification.AMBIGUOUS


def test_threshold_events_merge_bunched_counts():
    probs_input = apply_fusion_transfer(_ports(Port.A, Port.B))
    events = threshold_events(measure_detectors(probs_input))
    single_a = [e for e in events if e.counts == {(Port.A, R): 1}]
    assert len(single_a) == 1
    assert single_a[0].probability == pytest.approx(0.125)
    assert sum(e.probability for e in events) == pytest.approx(1.0)


def test_pattern_label():
    assert pattern_label(()) == "vacuum"
    assert pattern_label((((Port.A, R), 1), ((Port.C, V), 2))) == (
        "A:resonant_H=1 C:orthogonal_V=2"
    )


def test_report_table_sums_to_one():
    report = fusion_report(_ports(Port.A, Port.C))
    assert sum(report.classification_table.values()) == pytest.approx(1.0)
    data = report.to_dict()
    assert set(data) == {"success_probability", "classification_table", "events"}
    assert data["success_probability"] == pytest.approx(report.success_probability)


def test_number_resolving_off_changes_patterns():
    state = _ports(Port.A, Port.B)
    resolving = fusion_report(state)
    threshold = fusion_report(state, number_resolving=False)
    assert resolving.probability_of(Classification.FAILURE_SEPARABLE) == pytest.approx(0.5)
    assert threshold.probability_of(Classification.FAILURE_ERROR_HERALDED) == pytest.approx(1.0)
