import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ensemble_qec.core import R0, R1, HybridBasisState, PureState, qubit_level, register_occupation, register_state
from ensemble_qec.dynamics import apply_sequence
from ensemble_qec.pulses import (
    DesignError,
    DesignObjective,
    PulseParams,
    default_discriminator,
    design_discriminator,
    identity_phase,
    rotation,
    rydberg_discriminator,
    su2_response,
    verify_discriminator,
)

Q0, Q1 = qubit_level(1, 0), qubit_level(1, 1)


@pytest.fixture(scope="module")
def params():
    return default_discriminator()


class TestRotation:
    def test_pi_about_x(self):
        assert np.allclose(rotation(math.pi, 0.0), [[0, -1j], [-1j, 0]], atol=1e-15)

    @given(st.floats(0, 20), st.floats(0, 7))
    @settings(max_examples=50, deadline=None)
    def test_unitary(self, theta, phi):
        u = rotation(theta, phi)
        assert np.allclose(u.conj().T @ u, np.eye(2), atol=1e-12)
        assert np.linalg.det(u) == pytest.approx(1.0, abs=1e-12)


class TestParams:
    def test_negative_area_folds_phase(self):
        p = PulseParams.from_vector([-1.0, 0.5])
        assert p.pulses[0][0] == pytest.approx(1.0)
        assert p.pulses[0][1] == pytest.approx(0.5 + math.pi)
        assert np.allclose(su2_response(p, 1.0), rotation(-1.0, 0.5))

    def test_csv_roundtrip(self, params):
        assert PulseParams.from_csv(params.to_csv()) == params

    def test_rejects_nonpositive_area(self):
        with pytest.raises(ValueError):
            PulseParams(((0.0, 1.0),))

    def test_objective_ratio(self):
        with pytest.raises(ValueError):
            DesignObjective(ratio=1.0)


class TestDesign:
    def test_meets_tolerance(self, params):
        inf_id, inf_tr = verify_discriminator(params)
        assert inf_id <= 1e-8 and inf_tr <= 1e-8

    def test_shortest_found_has_three_pulses(self, params):
        # two pulses cannot separate scales 1 and sqrt(2) this way; three do
        assert len(params) == 3

    def test_deterministic(self):
        a = design_discriminator(DesignObjective(), max_pulses=4, seed=5)
        b = design_discriminator(DesignObjective(), max_pulses=4, seed=5)
        assert a == b

    def test_unreachable_raises(self):
        with pytest.raises(DesignError) as err:
            design_discriminator(DesignObjective(), max_pulses=2, seed=0, restarts=4)
        assert err.value.infidelity_identity >= 0 and err.value.infidelity_transfer >= 0

    def test_fix_phase(self):
        obj = DesignObjective(fix_phase=True)
        p = design_discriminator(obj, max_pulses=7, seed=0)
        assert max(verify_discriminator(p, obj)) <= 1e-8
        assert identity_phase(p) == pytest.approx(1.0, abs=1e-4)

    @given(st.lists(st.tuples(st.floats(0.1, 10), st.floats(0, 6.28)), min_size=1, max_size=5))
    @settings(max_examples=40, deadline=None)
    def test_verify_consistent_with_response(self, pulses):
        p = PulseParams(tuple(pulses))
        inf_id, inf_tr = verify_discriminator(p)
        assert 0 <= inf_id <= 1 and 0 <= inf_tr <= 1
        assert inf_id == pytest.approx(1 - abs(su2_response(p, 1.0)[0, 0]) ** 2, abs=1e-12)
        assert inf_tr == pytest.approx(1 - abs(su2_response(p, math.sqrt(2))[1, 0]) ** 2, abs=1e-12)


class TestManyBody:
    @pytest.mark.parametrize("k", [5, 16, 64])
    def test_error_free_register_untouched(self, params, k):
        st_ = register_state([(0.6, 0.8j)], k)
        out = apply_sequence(st_, rydberg_discriminator(params, 1))
        assert out.rydberg_population() <= 1e-10
        u00 = identity_phase(params)
        for b, a in st_.items():
            assert out.amplitude(b) == pytest.approx(a * u00, abs=1e-7)

    def test_doubly_coupled_fully_excited(self, params):
        ens = register_occupation([0], 20)
        st_ = PureState({HybridBasisState(Q0, ens): 1.0})
        out = apply_sequence(st_, rydberg_discriminator(params, 1))
        assert out.population(lambda b: b.count(R0) == 1) == pytest.approx(1.0, abs=1e-8)

    def test_opposite_bits_fully_excited(self, params):
        # register atom in 1_1, disturbed atom in 0_1: the two paths share one blockaded excitation
        ens = register_occupation([1], 20)
        st_ = PureState({HybridBasisState(Q0, ens): 1.0})
        out = apply_sequence(st_, rydberg_discriminator(params, 1))
        assert out.population(lambda b: b.rydberg_total == 1) == pytest.approx(1.0, abs=1e-8)
