import numpy as np
import pytest

from feedback_circuits import circuit_model as cm
from feedback_circuits import mps
from feedback_circuits import statevector as sv
from feedback_circuits.errors import RankCollapse


def make_spec(**kw):
    base = dict(
        L=6, depth=4, architecture=cm.Architecture.COND_X, g=0.08,
        init=cm.InitialState(kind="center_block", count=2), master_seed=13,
    )
    base.update(kw)
    return cm.CircuitSpec(**base)


def random_mps_via_layers(L, n_layers, rng, chi_max=128, trunc_tol=0.0):
    state = mps.MpsState.from_bits(np.zeros(L, dtype=np.uint8),
                                   chi_max=chi_max, trunc_tol=trunc_tol)
    for _ in range(n_layers):
        layer = cm.RandomLayer(angles=tuple(rng.random(L) * 2.0))
        mps.apply_layer_unitary_mps(state, layer)
    return state


class TestTwoSiteGate:
    def test_identity_gate_preserves_densities(self, rng):
        state = random_mps_via_layers(6, 2, rng)
        before = state.occupations()
        state.apply_2q((2, 3), np.eye(4, dtype=complex))
        assert np.max(np.abs(state.occupations() - before)) < 1e-12

    def test_cz_on_basis_product_keeps_chi_one(self):
        state = mps.MpsState.from_bits(np.array([0, 1, 0]))
        state.apply_2q((0, 1), cm.CZ_MATRIX)
        state.apply_2q((1, 2), cm.CZ_MATRIX)
        assert state.bond_dimensions() == [1, 1]
        assert state.discarded_total == 0.0

    def test_random_layer_matches_statevector(self, rng):
        L = 10
        layer = cm.RandomLayer(angles=tuple(rng.random(L)))
        bits = np.zeros(L, dtype=np.uint8)
        bits[4:6] = 0
        m = mps.MpsState.from_bits(bits, chi_max=2**5, trunc_tol=0.0)
        s = sv.StateVector.from_bits(bits)
        for _ in range(3):
            mps.apply_layer_unitary_mps(m, layer)
            sv.apply_layer_unitary(s, layer)
        assert np.max(np.abs(m.occupations() - s.occupations())) < 1e-10

    def test_rank_collapse_raises(self):
        state = mps.MpsState.from_bits(np.array([0, 0]))
        with pytest.raises(RankCollapse):
            state.apply_2q((0, 1), np.zeros((4, 4), dtype=complex))


class TestLocalExpectation:
    def test_basis_states(self):
        state = mps.MpsState.from_bits(np.array([0, 1]))
        assert state.local_z_expectation(0) == pytest.approx(1.0, abs=1e-12)
        assert state.local_z_expectation(1) == pytest.approx(-1.0, abs=1e-12)

    def test_plus_state(self):
        state = mps.MpsState.from_bits(np.array([0, 0]))
        h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
        state.apply_1q(0, h)
        assert state.local_z_expectation(0) == pytest.approx(0.0, abs=1e-12)

    def test_value_in_range_random_state(self, rng):
        state = random_mps_via_layers(8, 3, rng)
        for x in range(8):
            z = state.local_z_expectation(x)
            assert -1.0 - 1e-10 <= z <= 1.0 + 1e-10


class TestMeasureSite:
    def test_deterministic_outcome_on_basis_state(self):
        state = mps.MpsState.from_bits(np.array([0, 1]))
        _, outcome = mps.measure_site(state, 0, np.random.default_rng(0))
        assert outcome == 0

    def test_projection_idempotence(self, rng):
        state = random_mps_via_layers(6, 2, rng)
        _, outcome = mps.measure_site(state, 3, np.random.default_rng(1))
        z = state.local_z_expectation(3)
        assert z == pytest.approx(1.0 - 2.0 * outcome, abs=1e-10)
        assert abs(state.norm() - 1.0) < 1e-8

    def test_probability_equals_projected_norm(self, rng):
        state = random_mps_via_layers(6, 3, rng)
        site = 2
        p0 = state.prob_zero(site)
        state.move_center(site)
        t = state.tensors[site].copy()
        t[:, 1, :] = 0.0
        assert float(np.linalg.norm(t)) ** 2 == pytest.approx(p0, abs=1e-10)


class TestTrajectory:
    def test_diagonal_circuit_chi_one_exact(self):
        # theta ~ 0 keeps the evolution diagonal: a product basis state
        # stays a product basis state, chi = 1 is exact, nothing truncated
        spec = make_spec(theta_max=1e-30, g=0.1, depth=3)
        rec = mps.run_trajectory_mps(spec, 0, 0, chi_max=1)
        assert sum(rec.discarded_weight) == 0.0
        assert np.allclose(np.minimum(rec.densities, 1 - rec.densities), 0.0, atol=1e-9)

    @pytest.mark.parametrize("arch,kw", [
        (cm.Architecture.UNITARY, {}),
        (cm.Architecture.PURE_MEASURE, dict(g=0.08)),
        (cm.Architecture.COND_X, dict(g=0.08)),
        (cm.Architecture.COND_SWAP, dict(p_swap=0.3)),
    ])
    def test_engine_equivalence_L10(self, arch, kw):
        spec = cm.CircuitSpec(
            L=10, depth=6, architecture=arch, master_seed=31,
            init=cm.InitialState(kind="center_block", count=4), **kw,
        )
        for t in range(2):
            a = sv.run_trajectory(spec, 0, t)
            b = mps.run_trajectory_mps(spec, 0, t, chi_max=2**5, trunc_tol=0.0)
            assert a.events == b.events
            assert np.max(np.abs(a.densities - b.densities)) < 1e-10

    def test_truncation_statistics_reported(self):
        spec = make_spec(L=12, depth=5, g=0.05)
        rec = mps.run_trajectory_mps(spec, 0, 0, chi_max=4, trunc_tol=1e-12)
        assert len(rec.discarded_weight) == 5
        assert sum(rec.discarded_weight) > 0.0  # chi=4 must truncate at L=12

    def test_self_convergence_in_chi(self):
        spec = cm.CircuitSpec(
            L=14, depth=6, architecture=cm.Architecture.COND_X, g=0.02,
            master_seed=3, init=cm.InitialState(kind="center_block", count=6),
        )
        coarse = mps.run_trajectory_mps(spec, 0, 0, chi_max=32).densities
        fine = mps.run_trajectory_mps(spec, 0, 0, chi_max=64).densities
        assert np.max(np.abs(coarse - fine)) < 0.01
