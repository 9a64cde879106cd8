"""Tests for ideal targets, logical encoding and stabilizers."""

import math

import numpy as np
import pytest

from src.analysis.targets import (
    PauliString,
    TargetSpec,
    apply_logical_hadamard,
    build_alternating_state,
    build_computational_state,
    build_consistent_state,
    build_eq1_state,
    build_eq2_state,
    build_resource_state,
    build_target_state,
    disconnect_spin,
    encode_logical,
    remnant_phase_correction,
    stabilizer_expectation,
    stabilizer_generators,
)
from src.engine.fock import BasisKet, ModeAddress, PureState, fidelity
from src.shared.errors import ConfigurationError
from src.shared.models import (
    Channel,
    InitialSign,
    ProtocolConfig,
    Spin,
    Step5bMode,
    TimeBin,
)

E = ModeAddress(1, 1, TimeBin.EARLY)
L = ModeAddress(1, 1, TimeBin.LATE)


def _spec(sizes, mode=Step5bMode.ALTERNATING, sign=InitialSign.PLUS) -> TargetSpec:
    return TargetSpec(vertex_sizes=sizes, step5b_mode=mode, initial_sign=sign)


class TestTargetSpec:
    def test_from_config(self):
        config = ProtocolConfig(blocks=[[1, 2], [1]], step5b_mode=Step5bMode.CONSISTENT)
        spec = TargetSpec.from_config(config)
        assert spec.vertex_sizes == [3, 1]
        assert spec.step5b_mode is Step5bMode.CONSISTENT

    def test_signs(self):
        assert _spec([1], Step5bMode.CONSISTENT).vertex_sign == -1
        assert _spec([1], Step5bMode.CONSISTENT, InitialSign.MINUS).spin_sign == -1
        assert _spec([1, 1, 1]).spin_sign == -1
        assert _spec([1, 1]).spin_sign == 1
        assert _spec([1]).vertex_sign == 1

    def test_labels(self):
        assert _spec([2, 1]).qubit_labels() == ["S", "1.1", "1.2", "2.1"]

    def test_empty_vertex_rejected(self):
        with pytest.raises(ValueError):
            _spec([1, 0])


class TestSingleVertexStates:
    def test_consistent_variant(self):
        state = build_consistent_state(_spec([1], Step5bMode.CONSISTENT))
        amp = {
            (Spin.DOWN, E): 0.5,
            (Spin.DOWN, L): -0.5,
            (Spin.UP, E): 0.5,
            (Spin.UP, L): 0.5,
        }
        for (spin, mode), expected in amp.items():
            assert state.amplitude(BasisKet.of(spin, {mode: 1})) == pytest.approx(expected)

    def test_alternating_variant(self):
        state = build_alternating_state(_spec([1]))
        amp = {
            (Spin.DOWN, E): 0.5,
            (Spin.DOWN, L): 0.5,
            (Spin.UP, E): -0.5,
            (Spin.UP, L): 0.5,
        }
        for (spin, mode), expected in amp.items():
            assert state.amplitude(BasisKet.of(spin, {mode: 1})) == pytest.approx(expected)

    def test_dispatch(self):
        spec = _spec([2, 1], Step5bMode.CONSISTENT)
        target = build_target_state(spec)
        assert fidelity(target, build_consistent_state(spec)) == pytest.approx(1.0)

    def test_equation_builder_aliases(self):
        assert build_eq1_state is build_consistent_state
        assert build_eq2_state is build_alternating_state
        spec = _spec([1, 1], Step5bMode.ALTERNATING)
        assert fidelity(build_target_state(spec), build_eq2_state(spec)) == pytest.approx(1.0)

    def test_term_count(self):
        assert len(build_target_state(_spec([2, 2, 2]))) == 2 ** (3 + 1)


class TestStabilizers:
    @pytest.mark.parametrize("mode", list(Step5bMode))
    @pytest.mark.parametrize("sign", list(InitialSign))
    def test_ghz_vertex(self, mode, sign):
        spec = _spec([3], mode, sign)
        state = build_computational_state(spec)
        for generator in stabilizer_generators(spec):
            assert stabilizer_expectation(state, generator) == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("mode", list(Step5bMode))
    @pytest.mark.parametrize("sign", list(InitialSign))
    def test_linear_cluster(self, mode, sign):
        spec = _spec([1, 1, 1], mode, sign)
        state = build_computational_state(spec)
        for generator in stabilizer_generators(spec):
            assert stabilizer_expectation(state, generator) == pytest.approx(1.0, abs=1e-10)

    def test_mixed_sizes(self):
        spec = _spec([2, 1, 3])
        state = build_computational_state(spec)
        generators = stabilizer_generators(spec)
        assert len(generators) == len(spec.qubit_labels())
        for generator in generators:
            assert stabilizer_expectation(state, generator) == pytest.approx(1.0, abs=1e-10)

    def test_flipped_sign_gives_minus_one(self):
        spec = _spec([2])
        state = build_computational_state(spec)
        generator = stabilizer_generators(spec)[-1]
        flipped = PauliString(-generator.sign, generator.x, generator.z)
        assert stabilizer_expectation(state, flipped) == pytest.approx(-1.0)

    def test_pauli_label(self):
        pauli = PauliString(-1, frozenset({"1.1"}), frozenset({"S"}))
        assert pauli.label() == "-X1.1 ZS"


class TestLogical:
    def test_encoding_norm(self):
        spec = _spec([1, 2])
        logical = build_computational_state(spec)
        assert logical.n_qubits == 4
        assert np.linalg.norm(logical.amplitudes) == pytest.approx(1.0)

    def test_hadamard_is_involution(self):
        logical = build_computational_state(_spec([1, 1]))
        twice = apply_logical_hadamard(apply_logical_hadamard(logical, "1.1"), "1.1")
        np.testing.assert_allclose(twice.amplitudes, logical.amplitudes, atol=1e-12)

    def test_unknown_label(self):
        logical = build_computational_state(_spec([1]))
        with pytest.raises(ConfigurationError):
            apply_logical_hadamard(logical, "9.9")

    def test_rejects_state_outside_subspace(self):
        lossy = PureState.basis(Spin.DOWN, {E.with_channel(Channel.LOSS): 1})
        with pytest.raises(ConfigurationError):
            encode_logical(lossy, _spec([1]))

    def test_rejects_empty_qubit(self):
        with pytest.raises(ConfigurationError):
            encode_logical(PureState.basis(Spin.DOWN), _spec([1]))


class TestSpinDisconnection:
    @pytest.mark.parametrize("mode", list(Step5bMode))
    def test_down_outcome_gives_resource_state(self, mode):
        spec = _spec([2, 1], mode)
        photonic = disconnect_spin(build_target_state(spec), Spin.DOWN)
        assert fidelity(photonic, build_resource_state(spec)) == pytest.approx(1.0)

    @pytest.mark.parametrize("mode", list(Step5bMode))
    def test_up_outcome_needs_remnant_correction(self, mode):
        spec = _spec([1, 1], mode)
        photonic = disconnect_spin(build_target_state(spec), Spin.UP)
        reference = build_resource_state(spec, Spin.UP)
        assert fidelity(photonic, reference) == pytest.approx(0.0, abs=1e-12)
        corrected = remnant_phase_correction(photonic, spec)
        assert fidelity(corrected, reference) == pytest.approx(1.0)

    def test_resource_state_normalised(self):
        state = build_resource_state(_spec([3, 3]))
        assert state.norm_squared == pytest.approx(1.0)
        assert len(state) == 4
        assert all(abs(a) == pytest.approx(0.5) for _, a in state.items())
        assert math.isclose(sum(abs(a) ** 2 for _, a in state.items()), 1.0)
