import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ensemble_qec.core import (
    LEAK,
    R,
    R0,
    S,
    HybridBasisState,
    PureState,
    fidelity_to_logical,
    qubit_level,
    register_occupation,
    register_state,
    reservoir_state,
)
from ensemble_qec.dynamics import (
    CompositeSequence,
    Drive,
    Transition,
    apply_drive,
    apply_sequence,
    build_coupling_matrix,
    cnot_gate,
    cz_gate,
    encode_one_atom,
    evolution_operator,
    hadamard_like,
    reachable_basis,
    single_qubit_gate,
    z_flip,
)

Q0, Q1 = qubit_level(1, 0), qubit_level(1, 1)


def bits_state(bits, k):
    return PureState({HybridBasisState(None, register_occupation(bits, k)): 1.0})


class TestDriveValidation:
    def test_rejects_identical_levels(self):
        with pytest.raises(ValueError):
            Drive.single(S, S, 1.0)

    def test_rejects_leak(self):
        with pytest.raises(ValueError):
            Drive.single(S, LEAK, 1.0)

    def test_rejects_duplicate_pair(self):
        with pytest.raises(ValueError):
            Drive((Transition(S, R), Transition(R, S)), 1.0)

    def test_rejects_empty_sequence(self):
        with pytest.raises(ValueError):
            CompositeSequence(())


class TestCouplingMatrix:
    @pytest.mark.parametrize("k", [4, 10, 37, 50])
    def test_collective_element(self, k):
        state = register_state([(1.0, 0.0)], k)
        drive = Drive.single(S, R, 1.0)
        m = build_coupling_matrix(drive, reachable_basis(state, drive))
        assert m.shape == (2, 2)
        assert abs(m[1, 0]) == pytest.approx(math.sqrt(k - 1), abs=1e-12)

    def test_blockade_truncates(self):
        # no second excitation: the reservoir ladder stops after one step
        drive = Drive.single(S, R, 1.0)
        basis = reachable_basis(reservoir_state(6), drive)
        assert all(b.rydberg_total <= 1 for b in basis)
        assert len(basis) == 2

    def test_not_closed_raises(self):
        drive = Drive.single(S, R, 1.0)
        with pytest.raises(ValueError):
            build_coupling_matrix(drive, list(reservoir_state(3)))

    @pytest.mark.parametrize("k", [4, 12, 50])
    def test_doubly_coupled_rabi_ratio(self, k):
        # distinguished atom and the register atom share 0_1; r0 couples to the bright pair at sqrt(2)
        ens = register_occupation([0], k - 1)
        state = PureState({HybridBasisState(Q0, ens): 1.0})
        drive = Drive.single(Q0, R0, 1.0)
        m = build_coupling_matrix(drive, reachable_basis(state, drive))
        w = np.sort(np.linalg.eigvalsh(m))
        assert w == pytest.approx([-math.sqrt(2), 0.0, math.sqrt(2)], abs=1e-12)

    def test_evolution_unitary(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        u = evolution_operator(a + a.conj().T, 1.3)
        assert np.allclose(u.conj().T @ u, np.eye(5), atol=1e-12)


@given(st.integers(2, 30), st.floats(0.01, 7.0), st.floats(0, 2 * math.pi))
@settings(max_examples=40, deadline=None)
def test_drive_preserves_norm(k, area, phase):
    state = register_state([(0.6, 0.8j)], k)
    drive = Drive((Transition(S, R, phase), Transition(Q1, R0, 0.3, 0.7)), area)
    out = apply_drive(state, drive)
    assert out.norm2() == pytest.approx(1.0, abs=1e-12)
    assert all(b.rydberg_total <= 1 for b in out)


class TestCollectivePulses:
    @pytest.mark.parametrize("k", [5, 20, 101])
    def test_collective_pi_moves_one_atom(self, k):
        out = apply_drive(reservoir_state(k), Drive.single(S, R, math.pi / math.sqrt(k)))
        target = PureState.basis_state({S: k - 1, R: 1})
        assert out.population(lambda b: b == next(iter(target))) == pytest.approx(1.0, abs=1e-12)

    def test_two_pi_sign(self):
        out = apply_drive(reservoir_state(9), Drive.single(S, R, 2 * math.pi / 3))
        assert out.amplitude(next(iter(reservoir_state(9)))) == pytest.approx(-1.0, abs=1e-12)


class TestGates:
    def test_hadamard_like(self):
        out = hadamard_like(register_state([(1.0, 0.0)], 6), 1)
        h = 1 / math.sqrt(2)
        assert fidelity_to_logical(out, [(h, h)]) == pytest.approx(1.0, abs=1e-12)

    def test_z_flip_is_iz(self):
        st_ = register_state([(0.6, 0.8)], 5)
        out = z_flip(st_, 1)
        b0 = HybridBasisState(None, register_occupation([0], 5))
        b1 = HybridBasisState(None, register_occupation([1], 5))
        assert out.amplitude(b0) == pytest.approx(0.6j, abs=1e-12)
        assert out.amplitude(b1) == pytest.approx(-0.8j, abs=1e-12)

    def test_single_qubit_gate_rejects_empty_manifold(self):
        with pytest.raises(ValueError):
            single_qubit_gate(reservoir_state(4), 1, math.pi, 0.0)

    def test_single_qubit_gate_rejects_double_occupation(self):
        ens = register_occupation([0], 5)
        with pytest.raises(ValueError):
            single_qubit_gate(PureState({HybridBasisState(Q1, ens): 1.0}), 1, math.pi, 0.0)

    @pytest.mark.parametrize("bits,sign", [((0, 0), -1), ((0, 1), -1), ((1, 0), -1), ((1, 1), 1)])
    def test_cz_phases(self, bits, sign):
        st_ = bits_state(bits, 6)
        out = cz_gate(st_, 1, 2)
        assert out.amplitude(next(iter(st_))) == pytest.approx(sign, abs=1e-12)

    @pytest.mark.parametrize("bits", [(0, 0), (0, 1), (1, 0), (1, 1)])
    def test_cz_raw_pattern(self, bits):
        st_ = bits_state(bits, 6)
        out = cz_gate(st_, 1, 2, phase_fix=False)
        expected = 1 if bits == (0, 0) else -1
        assert out.amplitude(next(iter(st_))) == pytest.approx(expected, abs=1e-12)

    def test_cz_needs_distinct_levels(self):
        with pytest.raises(ValueError):
            cz_gate(bits_state((1, 1), 5), 1, 2, control_level=R, target_level=R)

    @pytest.mark.parametrize("bits,flipped", [((0, 0), (0, 0)), ((0, 1), (0, 1)), ((1, 0), (1, 1)), ((1, 1), (1, 0))])
    def test_cnot_truth_table(self, bits, flipped):
        out = cnot_gate(bits_state(bits, 7), 1, 2)
        exp = HybridBasisState(None, register_occupation(flipped, 7))
        assert abs(out.amplitude(exp)) ** 2 == pytest.approx(1.0, abs=1e-12)


class TestEncode:
    @pytest.mark.parametrize("k", [3, 7, 40])
    def test_reservoir_to_logical_zero(self, k):
        out = encode_one_atom(reservoir_state(k), Q0)
        b = HybridBasisState(None, register_occupation([0], k))
        assert out.amplitude(b) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_occupied_manifold(self):
        with pytest.raises(ValueError):
            encode_one_atom(register_state([(1.0, 0.0)], 4), Q0)

    def test_rejects_non_qubit_target(self):
        with pytest.raises(ValueError):
            encode_one_atom(reservoir_state(4), R)


def test_sequence_equals_successive_drives():
    st_ = register_state([(0.6, 0.8)], 8)
    d1, d2 = Drive.single(S, R, 0.4, 0.2), Drive.single(Q1, R, 1.1)
    a = apply_sequence(st_, CompositeSequence((d1, d2)))
    b = apply_drive(apply_drive(st_, d1), d2)
    for key in set(a) | set(b):
        assert a.amplitude(key) == pytest.approx(b.amplitude(key), abs=1e-14)
