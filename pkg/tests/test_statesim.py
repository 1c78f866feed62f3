import numpy as np
import pytest

from qdrop.statesim import (EMBEDDING_TRANSFORMS, Gate, SimulationError,
                            StateVector, apply_cnot, apply_cry, apply_gate,
                            apply_gate_array, apply_generator, apply_1q,
                            embedding_transform, expectation_z, fidelity,
                            rotation_2x2, run_circuit, subset_purity,
                            subset_purity_batch, z_signs)
from conftest import (cnot_matrix, cry_matrix, full_1q_matrix, purity_oracle,
                      random_state)


class TestGateValidation:
    def test_unknown_kind(self):
        with pytest.raises(SimulationError):
            Gate("Hadamard", 0, fixed_angle=0.0)

    def test_cnot_needs_control(self):
        with pytest.raises(SimulationError):
            Gate("CNOT", 0)

    def test_control_differs_from_target(self):
        with pytest.raises(SimulationError):
            Gate("CNOT", 2, control=2)

    def test_rotation_takes_no_control(self):
        with pytest.raises(SimulationError):
            Gate("Rx", 0, control=1, fixed_angle=0.1)

    def test_cnot_carries_no_angle(self):
        with pytest.raises(SimulationError):
            Gate("CNOT", 1, control=0, fixed_angle=0.3)

    def test_rotation_needs_exactly_one_angle_source(self):
        with pytest.raises(SimulationError):
            Gate("Ry", 0)
        with pytest.raises(SimulationError):
            Gate("Ry", 0, param_slot=0, fixed_angle=0.1)

    def test_valid_gates(self):
        assert Gate("Rx", 1, param_slot=3).parametrized
        assert not Gate("Ry", 0, embed=(0, "arcsin")).parametrized
        Gate("CRy", 1, control=0, param_slot=0)
        Gate("CNOT", 1, control=0)


class TestRotationMatrices:
    def test_zero_angle_is_identity(self):
        for kind in ("Rx", "Ry", "Rz"):
            assert np.allclose(rotation_2x2(kind, 0.0), np.eye(2))

    def test_pi_rotations(self):
        x = np.array([[0, 1], [1, 0]])
        y = np.array([[0, -1j], [1j, 0]])
        z = np.diag([1, -1])
        assert np.allclose(rotation_2x2("Rx", np.pi), -1j * x)
        assert np.allclose(rotation_2x2("Ry", np.pi), -1j * y)
        assert np.allclose(rotation_2x2("Rz", np.pi), -1j * z)

    def test_unitary_and_composition(self, rng):
        for kind in ("Rx", "Ry", "Rz"):
            a, b = rng.uniform(-np.pi, np.pi, 2)
            ua, ub = rotation_2x2(kind, a), rotation_2x2(kind, b)
            assert np.allclose(ua @ ua.conj().T, np.eye(2), atol=1e-12)
            assert np.allclose(ua @ ub, rotation_2x2(kind, a + b), atol=1e-12)


class TestGateApplication:
    @pytest.mark.parametrize("kind", ["Rx", "Ry", "Rz"])
    def test_rotation_matches_full_matrix(self, kind, rng):
        n = 3
        psi = random_state(n, rng)
        for q in range(n):
            theta = rng.uniform(-np.pi, np.pi)
            u = rotation_2x2(kind, theta)
            got = apply_1q(psi, n, q, u[0, 0], u[0, 1], u[1, 0], u[1, 1])
            want = full_1q_matrix(u, n, q) @ psi
            assert np.allclose(got, want, atol=1e-12)

    def test_cnot_matches_full_matrix(self, rng):
        n = 3
        psi = random_state(n, rng)
        for control, target in ((0, 1), (1, 0), (0, 2), (2, 0), (1, 2)):
            got = apply_cnot(psi, n, control, target)
            want = cnot_matrix(n, control, target) @ psi
            assert np.allclose(got, want, atol=1e-12)

    def test_cnot_on_basis_states(self):
        got = apply_cnot(StateVector.from_bits("10").amplitudes, 2, 0, 1)
        assert np.allclose(got, StateVector.from_bits("11").amplitudes)
        got = apply_cnot(StateVector.from_bits("01").amplitudes, 2, 0, 1)
        assert np.allclose(got, StateVector.from_bits("01").amplitudes)

    def test_cry_matches_full_matrix(self, rng):
        n = 3
        psi = random_state(n, rng)
        for control, target in ((0, 1), (1, 0), (0, 2), (2, 0)):
            theta = rng.uniform(-np.pi, np.pi)
            half = theta / 2.0
            got = apply_cry(psi, n, control, target,
                            np.cos(half), np.sin(half))
            want = cry_matrix(n, control, target, theta) @ psi
            assert np.allclose(got, want, atol=1e-12)

    def test_cry_control_zero_is_identity(self, rng):
        # |0>|psi> stays untouched
        psi = np.zeros(4, dtype=complex)
        psi[:2] = 0.0
        sub = random_state(1, rng)
        psi[0], psi[1] = sub  # qubit 0 = |0>
        gate = Gate("CRy", 1, control=0, param_slot=0)
        out = apply_gate_array(psi, 2, gate, 1.234)
        assert np.allclose(out, psi, atol=1e-12)

    def test_batched_angles_match_loop(self, rng):
        n = 3
        batch = 4
        psis = np.stack([random_state(n, rng) for _ in range(batch)])
        thetas = rng.uniform(-np.pi, np.pi, batch)
        for gate in (Gate("Rx", 1, param_slot=0),
                     Gate("Rz", 2, param_slot=0),
                     Gate("CRy", 2, control=0, param_slot=0)):
            got = apply_gate_array(psis, n, gate, thetas)
            for b in range(batch):
                want = apply_gate_array(psis[b], n, gate, float(thetas[b]))
                assert np.allclose(got[b], want, atol=1e-12)

    def test_angle_requirements(self):
        psi = StateVector.zero(2).amplitudes
        with pytest.raises(SimulationError):
            apply_gate_array(psi, 2, Gate("CNOT", 1, control=0), angle=0.1)
        with pytest.raises(SimulationError):
            apply_gate_array(psi, 2, Gate("Rx", 0, param_slot=0))

    def test_qubit_range_checked(self):
        psi = StateVector.zero(2).amplitudes
        with pytest.raises(SimulationError):
            apply_gate_array(psi, 2, Gate("Rx", 5, param_slot=0), 0.1)


class TestGenerators:
    @pytest.mark.parametrize("gate", [
        Gate("Rx", 0, param_slot=0),
        Gate("Ry", 2, param_slot=0),
        Gate("Rz", 1, param_slot=0),
        Gate("CRy", 1, control=0, param_slot=0),
        Gate("CRy", 0, control=2, param_slot=0),
    ])
    def test_generator_is_gate_derivative(self, gate, rng):
        # d/dtheta U(theta) psi = G_eff U(theta) psi
        n = 3
        psi = random_state(n, rng)
        theta = rng.uniform(-np.pi, np.pi)
        eps = 1e-6
        fd = (apply_gate_array(psi, n, gate, theta + eps)
              - apply_gate_array(psi, n, gate, theta - eps)) / (2 * eps)
        want = apply_generator(apply_gate_array(psi, n, gate, theta), n, gate)
        assert np.allclose(fd, want, atol=1e-8)

    def test_cnot_has_no_generator(self):
        with pytest.raises(SimulationError):
            apply_generator(StateVector.zero(2).amplitudes, 2,
                            Gate("CNOT", 1, control=0))


class TestStateVector:
    def test_zero_and_from_bits(self):
        z = StateVector.zero(3)
        assert z.amplitudes[0] == 1.0 and np.sum(np.abs(z.amplitudes)) == 1.0
        s = StateVector.from_bits("101")
        assert s.amplitudes[0b101] == 1.0

    def test_normalization_enforced(self):
        with pytest.raises(SimulationError):
            StateVector(1, np.array([1.0, 1.0]))

    def test_shape_enforced(self):
        with pytest.raises(SimulationError):
            StateVector(2, np.array([1.0, 0.0]))


class TestMeasurement:
    def test_z_signs_msb_convention(self):
        # qubit 0 is the most significant bit
        assert np.array_equal(z_signs(2, 0), [1, 1, -1, -1])
        assert np.array_equal(z_signs(2, 1), [1, -1, 1, -1])

    def test_expectation_on_basis_states(self):
        assert expectation_z(StateVector.from_bits("01"), 0) == 1.0
        assert expectation_z(StateVector.from_bits("01"), 1) == -1.0

    def test_expectation_after_ry(self):
        theta = 0.731
        s = apply_gate(StateVector.zero(1), Gate("Ry", 0, param_slot=0), theta)
        assert np.isclose(expectation_z(s, 0), np.cos(theta))

    def test_fidelity(self, rng):
        a = StateVector(3, random_state(3, rng))
        assert np.isclose(fidelity(a, a), 1.0)
        b = StateVector.from_bits("000")
        c = StateVector.from_bits("001")
        assert fidelity(b, c) == 0.0
        with pytest.raises(SimulationError):
            fidelity(a, StateVector.zero(2))


class TestSubsetPurity:
    def test_bell_state_marginals_are_maximally_mixed(self):
        bell = StateVector(2, np.array([1, 0, 0, 1]) / np.sqrt(2))
        assert np.isclose(subset_purity(bell, [0]), 0.5)
        assert np.isclose(subset_purity(bell, [1]), 0.5)
        assert np.isclose(subset_purity(bell, [0, 1]), 1.0)
        assert np.isclose(subset_purity(bell, []), 1.0)

    def test_product_state_purity_is_one(self, rng):
        single = [random_state(1, rng) for _ in range(3)]
        amps = np.kron(np.kron(single[0], single[1]), single[2])
        for subset in ([0], [1], [2], [0, 1], [0, 2], [1, 2]):
            assert np.isclose(subset_purity(StateVector(3, amps), subset), 1.0)

    def test_against_partial_trace_oracle(self, rng):
        n = 4
        amps = np.stack([random_state(n, rng) for _ in range(3)])
        for subset in ([0], [2], [1, 3], [0, 1, 2], [0, 3]):
            got = subset_purity_batch(amps, n, subset)
            want = [purity_oracle(amps[b], n, subset) for b in range(3)]
            assert np.allclose(got, want, atol=1e-12)

    def test_complement_symmetry(self, rng):
        n = 4
        amps = random_state(n, rng)[None, :]
        for subset in ([0], [1, 2], [0, 3]):
            comp = [q for q in range(n) if q not in subset]
            assert np.isclose(subset_purity_batch(amps, n, subset)[0],
                              subset_purity_batch(amps, n, comp)[0])


class TestEmbeddingTransforms:
    def test_known_values(self):
        assert np.isclose(embedding_transform("arcsin", 1.0), np.pi / 2)
        assert np.isclose(embedding_transform("arcsin", 0.0), 0.0)
        assert np.isclose(embedding_transform("arccos_sq", 1.0), 0.0)
        assert np.isclose(embedding_transform("arccos_sq", 0.0), np.pi / 2)
        assert np.isclose(embedding_transform("arcsin_half_x2", 2.0), np.pi)
        assert np.isclose(embedding_transform("arccos_half_sq_x2", 0.0), np.pi)

    def test_domain_enforced(self):
        with pytest.raises(SimulationError):
            embedding_transform("arcsin", 1.5)
        with pytest.raises(SimulationError):
            embedding_transform("arcsin_half_x2", 2.5)
        with pytest.raises(SimulationError):
            embedding_transform("nope", 0.0)

    def test_all_transforms_registered(self):
        assert set(EMBEDDING_TRANSFORMS) == {
            "arcsin", "arccos_sq", "arcsin_half_x2", "arccos_half_sq_x2"}


class TestRunCircuit:
    def test_single_ry_layer(self):
        from qdrop.circuits import build_regression_qnn
        template = build_regression_qnn(n_qubits=2, n_layers=1)
        params = np.zeros(template.parameter_count)
        state = run_circuit(template, params, None, [0.0])
        # x = 0: Ry(0) Rz(pi/2) embeddings, all variational angles zero
        assert np.isclose(np.abs(state.amplitudes[0]) ** 2, 1.0)

    def test_parameter_count_checked(self):
        from qdrop.circuits import build_regression_qnn
        template = build_regression_qnn(n_qubits=2, n_layers=1)
        with pytest.raises(SimulationError):
            run_circuit(template, np.zeros(3), None, [0.0])

    def test_feature_count_checked(self):
        from qdrop.circuits import build_classification_qnn
        template = build_classification_qnn(n_qubits=3, n_layers=1)
        with pytest.raises(SimulationError):
            run_circuit(template, np.zeros(template.parameter_count),
                        None, [0.0])

    def test_masked_gates_are_identities(self, rng):
        from qdrop.circuits import build_regression_qnn
        from qdrop.dropout import DropoutMask
        template = build_regression_qnn(n_qubits=2, n_layers=1)
        params = rng.uniform(0, 2 * np.pi, template.parameter_count)
        dropped = {g.gate_id for g in template.gates if g.param_slot == 0}
        masked = run_circuit(template, params, DropoutMask(frozenset(dropped)),
                             [0.3])
        zeroed = params.copy()
        zeroed[0] = 0.0
        unmasked = run_circuit(template, zeroed, None, [0.3])
        assert np.allclose(masked.amplitudes, unmasked.amplitudes, atol=1e-12)
