import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dense_layer_unitary, random_density, random_pure_density
from feedback_circuits import channel_oracle as co
from feedback_circuits import circuit_model as cm
from feedback_circuits.errors import DimensionMismatch, TooLarge
from feedback_circuits.fixtures import fixture_specs

angles_strategy = st.lists(st.floats(0.0, np.pi), min_size=4, max_size=4)


class TestScrambling:
    def test_zero_angles_preserve_diagonal(self, rng):
        rho = random_density(3, rng)
        layer = cm.RandomLayer(angles=(0.0, 0.0, 0.0))
        out = co.apply_scrambling(rho, layer)
        assert np.allclose(np.diag(out), np.diag(rho), atol=1e-12)
        assert not np.allclose(out, rho)  # CZ still acts on coherences

    def test_pi_angles_flip_all_bits(self):
        rho = co.initial_density(np.zeros(4, dtype=np.uint8))
        layer = cm.RandomLayer(angles=(np.pi,) * 4)
        out = co.apply_scrambling(rho, layer)
        assert np.allclose(co.site_occupations(out), 0.0, atol=1e-12)

    def test_trace_preserved_random_layer(self, rng):
        rho = random_density(4, rng)
        layer = cm.RandomLayer(angles=tuple(rng.random(4)))
        out = co.apply_scrambling(rho, layer)
        assert abs(np.trace(out) - 1.0) < 1e-12

    def test_matches_dense_unitary_oracle(self, rng):
        L = 4
        rho = random_density(L, rng)
        layer = cm.RandomLayer(angles=tuple(rng.random(L)))
        for cz_first in (False, True):
            U = dense_layer_unitary(layer, L, cz_first=cz_first)
            expected = U @ rho @ U.conj().T
            out = co.apply_scrambling(rho, layer, cz_first=cz_first)
            assert np.max(np.abs(out - expected)) < 1e-12

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatch):
            co.apply_scrambling(random_density(3, rng), cm.RandomLayer(angles=(0.1,) * 4))


class TestPureMeasure:
    def test_full_dephasing_on_plus_state(self):
        plus = np.full((2, 2), 0.5, dtype=complex)
        out = co.apply_pure_measure(plus, [1.0])
        assert np.allclose(out, np.diag([0.5, 0.5]), atol=1e-12)

    def test_f_zero_identity(self, rng):
        rho = random_density(3, rng)
        out = co.apply_pure_measure(rho, [0.0, 0.0, 0.0])
        assert np.allclose(out, rho, atol=1e-14)

    def test_density_invariance_random_state(self, rng):
        rho = random_density(3, rng)
        f = rng.random(3)
        out = co.apply_pure_measure(rho, f)
        assert np.max(np.abs(co.site_occupations(out) - co.site_occupations(rho))) < 1e-12
        assert abs(np.trace(out) - 1.0) < 1e-12


class TestCondX:
    def test_forced_flip(self):
        rho = co.initial_density(np.array([0]))
        out = co.apply_cond_x(rho, [1.0])
        assert np.allclose(out, np.diag([0.0, 1.0]), atol=1e-12)

    def test_half_probability_mixture(self):
        rho = co.initial_density(np.array([0]))
        out = co.apply_cond_x(rho, [0.5])
        assert np.allclose(out, np.diag([0.5, 0.5]), atol=1e-12)

    def test_loss_law_random_state(self, rng):
        rho = random_density(3, rng)
        f = rng.random(3)
        before = co.site_occupations(rho)
        out = co.apply_cond_x(rho, f)
        assert np.max(np.abs(co.site_occupations(out) - (1 - f) * before)) < 1e-12


class TestCondSwap:
    def test_deterministic_swap_moves_occupation(self):
        rho = co.initial_density(np.array([0, 1]))
        out = co.apply_cond_swap_bond(rho, (0, 1), 1.0)
        occ = co.site_occupations(out)
        assert occ == pytest.approx([0.0, 1.0], abs=1e-12)

    def test_partial_swap(self):
        rho = co.initial_density(np.array([0, 1]))
        out = co.apply_cond_swap_bond(rho, (0, 1), 0.3)
        occ = co.site_occupations(out)
        assert occ[1] == pytest.approx(0.3, abs=1e-12)

    def test_update_laws_random_state(self, rng):
        rho = random_density(4, rng)
        x, p = 1, 0.47
        nx = co.site_occupations(rho)[x]
        nx1 = co.site_occupations(rho)[x + 1]
        corr = co.bond_correlator(rho, x)
        out = co.apply_cond_swap_bond(rho, (x, x + 1), p)
        occ = co.site_occupations(out)
        assert occ[x] == pytest.approx(nx - p * (nx - corr), abs=1e-12)
        assert occ[x + 1] == pytest.approx(nx1 + p * (nx - corr), abs=1e-12)


class TestKrausCompleteness:
    @pytest.mark.parametrize("prob", [0.0, 0.3, 1.0])
    @pytest.mark.parametrize("rule", [cm.FeedbackRule.NONE, cm.FeedbackRule.COND_X])
    def test_site_channels(self, rule, prob):
        ks = co.site_kraus(rule, prob)
        total = sum(K.conj().T @ K for K in ks)
        assert np.max(np.abs(total - np.eye(2))) < 1e-12

    @pytest.mark.parametrize("prob", [0.0, 0.3, 1.0])
    def test_swap_channel(self, prob):
        total = sum(K.conj().T @ K for K in co.cond_swap_kraus(prob))
        assert np.max(np.abs(total - np.eye(4))) < 1e-12


class TestEvolveChannel:
    def test_depth_zero_returns_initial_pattern(self):
        spec = cm.CircuitSpec(L=4, depth=0, architecture=cm.Architecture.COND_X,
                              g=0.05, init=cm.InitialState(kind="center_block", count=2))
        series = co.evolve_channel(spec, 0)
        assert series.values.shape == (1, 4)
        assert np.array_equal(series.values[0], spec.init.occupations(4))

    def test_trace_preserved_each_layer(self, rng):
        for arch, kw in [
            (cm.Architecture.UNITARY, {}),
            (cm.Architecture.PURE_MEASURE, dict(g=0.05)),
            (cm.Architecture.COND_X, dict(g=0.05)),
            (cm.Architecture.COND_SWAP, dict(p_swap=0.4)),
        ]:
            spec = cm.CircuitSpec(L=4, depth=3, architecture=arch,
                                  init=cm.InitialState(kind="center_block", count=2),
                                  master_seed=5, **kw)
            program = cm.build_program(spec, 0)
            rho = co.initial_density(spec.init.basis_bits(4))
            for layer, event in program.layers:
                rho = co.apply_scrambling(rho, layer)
                rho = co.apply_measurement_event(rho, event)
                assert abs(np.trace(rho) - 1.0) < 1e-12
                assert np.max(np.abs(rho - rho.conj().T)) < 1e-12

    def test_size_guard(self):
        spec = cm.CircuitSpec(L=13, depth=1, architecture=cm.Architecture.UNITARY,
                              init=cm.InitialState(kind="center_block", count=2))
        with pytest.raises(TooLarge):
            co.evolve_channel(spec, 0)

    def test_positivity_debug_check(self, rng):
        spec = cm.CircuitSpec(L=4, depth=2, architecture=cm.Architecture.COND_SWAP,
                              p_swap=0.3, init=cm.InitialState(kind="center_block", count=2))
        series_rho = co.initial_density(spec.init.basis_bits(4))
        program = cm.build_program(spec, 0)
        for layer, event in program.layers:
            series_rho = co.apply_measurement_event(
                co.apply_scrambling(series_rho, layer), event)
        co.check_density(series_rho)

    def test_reference_fixture(self):
        """Frozen channel series; regenerate with `fbcirc fixtures`."""
        path = Path(__file__).parent / "fixtures" / "channel_reference.json"
        stored = json.loads(path.read_text())
        for name, spec in fixture_specs().items():
            series = co.evolve_channel(spec, realization=0)
            assert np.max(np.abs(series.values - np.array(stored[name]["values"]))) < 1e-12


class TestPureMeasureDensityFollowsScrambledState:
    def test_measurement_step_never_moves_density(self):
        """At every layer the dephasing step leaves <n_x> of the scrambled
        state untouched; the circuits only diverge because later rotations
        convert the removed coherences into density differences."""
        spec = cm.CircuitSpec(L=5, depth=4, architecture=cm.Architecture.PURE_MEASURE,
                              g=0.15, master_seed=21,
                              init=cm.InitialState(kind="center_block", count=2))
        program = cm.build_program(spec, 0)
        rho = co.initial_density(spec.init.basis_bits(5))
        for layer, event in program.layers:
            rho = co.apply_scrambling(rho, layer)
            before = co.site_occupations(rho)
            rho = co.apply_measurement_event(rho, event)
            assert np.max(np.abs(co.site_occupations(rho) - before)) < 1e-12

    def test_equal_to_unitary_through_first_measured_layer(self):
        common = dict(L=5, depth=2, master_seed=21,
                      init=cm.InitialState(kind="center_block", count=2))
        unitary = cm.CircuitSpec(architecture=cm.Architecture.UNITARY, **common)
        measured = cm.CircuitSpec(architecture=cm.Architecture.PURE_MEASURE,
                                  g=0.15, **common)
        a = co.evolve_channel(unitary, 0).values
        b = co.evolve_channel(measured, 0).values
        assert np.max(np.abs(a[:2] - b[:2])) < 1e-12
