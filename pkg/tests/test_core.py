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
    Occupation,
    PureState,
    RegisterConfig,
    basis,
    dumps_state,
    fidelity_by_atoms,
    fidelity_to_logical,
    global_phase,
    inner_product,
    loads_state,
    parse_level,
    product_amplitudes,
    qubit_level,
    register_state,
    reservoir_state,
    state_fidelity,
)

Q0, Q1 = qubit_level(1, 0), qubit_level(1, 1)


def unit_pair(x):
    z = np.array([complex(x[0], x[1]), complex(x[2], x[3])])
    n = np.linalg.norm(z)
    return tuple(z / n) if n > 1e-3 else (1.0, 0.0)


pairs = st.lists(st.floats(-1, 1), min_size=4, max_size=4).map(unit_pair)


class TestLevels:
    def test_parse_roundtrip(self):
        for lvl in (S, Q0, qubit_level(3, 1), R, R0, LEAK):
            assert parse_level(str(lvl)) == lvl

    def test_ordering(self):
        assert S < Q0 < Q1 < qubit_level(2, 0) < R < LEAK

    @pytest.mark.parametrize("bad", ["", "0_0", "2_1", "a_b", "leak_1"])
    def test_parse_rejects(self, bad):
        with pytest.raises(ValueError):
            parse_level(bad)


class TestRegisterConfig:
    def test_levels(self):
        cfg = RegisterConfig(n_qubits=2, n_atoms=5)
        names = [str(l) for l in cfg.levels()]
        assert names[0] == "s" and names[-1] == "leak"
        assert len(names) == 1 + 4 + 3 + 1
        assert cfg.has_refill_reservoir

    @pytest.mark.parametrize("kwargs", [
        dict(n_qubits=0, n_atoms=4),
        dict(n_qubits=3, n_atoms=2),
        dict(n_qubits=1, n_atoms=4, rydberg_levels=("r", "r0")),
        dict(n_qubits=1, n_atoms=4, blockading=(True, False, True)),
        dict(n_qubits=1, n_atoms=4, detector_efficiency=1.2),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            RegisterConfig(**kwargs)


class TestOccupation:
    def test_drops_zeros_and_sorts(self):
        occ = Occupation({Q1: 1, S: 3, Q0: 0})
        assert occ.count(Q0) == 0 and occ.total == 4
        assert occ.to_csv() == "s=3,1_1=1"

    def test_csv_roundtrip_empty(self):
        assert Occupation.from_csv("-") == Occupation()

    def test_negative_shift_rejected(self):
        with pytest.raises(ValueError):
            Occupation({S: 1}).shifted(Q0, -1)


class TestPureState:
    def test_double_rydberg_rejected(self):
        with pytest.raises(ValueError):
            PureState.basis_state({R: 1, S: 2}, distinguished=R0)

    def test_normalization_and_sectors(self):
        st_ = register_state([(1 / math.sqrt(2), 1j / math.sqrt(2))], 10)
        assert st_.norm2() == pytest.approx(1.0, abs=1e-15)
        assert list(st_.sectors()) == [(10, False)]

    def test_basis_orthogonality(self):
        a = reservoir_state(5)
        b = PureState.basis_state({S: 4}, distinguished=S)
        assert inner_product(a, b) == 0

    def test_add_and_scale(self):
        a = reservoir_state(3)
        s = a + a.scaled(1j)
        assert s.amplitude(next(iter(a))) == pytest.approx(1 + 1j)


class TestRegisterFidelity:
    @given(pairs)
    @settings(max_examples=30, deadline=None)
    def test_self_fidelity(self, pair):
        state = register_state([pair], 7)
        assert fidelity_to_logical(state, [pair]) == pytest.approx(1.0, abs=1e-12)

    @given(pairs, st.integers(2, 40))
    @settings(max_examples=30, deadline=None)
    def test_stray_reservoir_atom_costs_one_over_k(self, pair, k):
        # one s atom pulled out as a distinguished factor: its weight in the K-atom target is (K-1)/K
        ens = register_state([pair], k - 1)
        amps = {HybridBasisState(S, b.ensemble): a for b, a in ens.items()}
        state = PureState(amps)
        assert fidelity_to_logical(state, [pair]) == pytest.approx((k - 1) / k, abs=1e-12)

    def test_leaked_atom_traced_out(self):
        pair = (0.6, 0.8j)
        ens = register_state([pair], 9)
        amps = {HybridBasisState(LEAK, b.ensemble): a for b, a in ens.items()}
        assert fidelity_by_atoms(PureState(amps), [pair]) == {9: pytest.approx(1.0)}

    def test_policies(self):
        pair = (0.6, 0.8)
        st_ = register_state([pair], 5).scaled(math.sqrt(0.3)) + register_state([pair], 4).scaled(math.sqrt(0.7))
        assert fidelity_to_logical(st_, [pair], "sum") == pytest.approx(1.0)
        assert fidelity_to_logical(st_, [pair], "best") == pytest.approx(0.7)
        assert fidelity_to_logical(st_, [pair], "fixed", n_atoms=5) == pytest.approx(0.3)
        with pytest.raises(ValueError):
            fidelity_to_logical(st_, [pair], "fixed")

    def test_product_amplitudes_normalization(self):
        with pytest.raises(ValueError):
            product_amplitudes([(1.0, 1.0)])
        amps = product_amplitudes([(0.6, 0.8), (0.0, 1.0)])
        assert amps == {(0, 1): pytest.approx(0.6), (1, 1): pytest.approx(0.8)}


class TestSerialization:
    @given(pairs, pairs, st.integers(3, 12))
    @settings(max_examples=25, deadline=None)
    def test_roundtrip_exact(self, p1, p2, k):
        state = register_state([p1, p2], k)
        back = loads_state(dumps_state(state))
        assert back.amplitudes == state.amplitudes

    def test_format(self):
        text = dumps_state(PureState.basis_state({S: 2, Q1: 1}, distinguished=S))
        assert text == "4 s s=2,1_1=1 1 0\n"

    def test_bad_sector_rejected(self):
        with pytest.raises(ValueError):
            loads_state("5 - s=3 1 0\n")

    def test_global_phase(self):
        a = register_state([(0.6, 0.8)], 4)
        b = a.scaled(np.exp(0.7j))
        assert state_fidelity(a, b) == pytest.approx(1.0)
        assert global_phase(b, a) == pytest.approx(np.exp(0.7j))


def test_basis_helper():
    b = basis({S: 2, R: 1})
    assert b.rydberg_total == 1 and b.atoms == 3 and b.distinguished is None
