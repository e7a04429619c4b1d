import dataclasses

import numpy as np
import pytest

from conftest import OMEGA_30MEV, grid_for
from dotflux import envkit, runs, twodot, units
from dotflux.meops import assemble, trace_vector
from dotflux.volterra import TimeGrid

OMEGA = OMEGA_30MEV
LAMBDA = 0.014


def make_model(omc_mev=8.0, b=0.1, mu1=35.0, omega2=None, horizon=None):
    omc = units.mev_to_radns(omc_mev)
    e1, e2 = envkit.environment_pair(2.0, mu1, 0.0, LAMBDA, b, OMEGA)
    w2 = omega2 or OMEGA
    if horizon is None:
        horizon = 16.0 / min(
            envkit.kernel_memory_rate(e1), envkit.kernel_memory_rate(e2)
        )
    grid = grid_for(e1, e2, OMEGA, horizon, extra_scale=max(omc, w2))
    return twodot.TwoDotModel((OMEGA, w2), omc, e1, e2, grid)


@pytest.fixture(scope="module")
def resonant_point():
    model = make_model()
    return model, twodot.solve_twodot_coefficients(model)


@pytest.fixture(scope="module")
def detuned_point():
    model = make_model(omega2=1.1 * OMEGA, horizon=None)
    short = TimeGrid(model.grid.step, min(model.grid.count, 4000))
    model = dataclasses.replace(model, grid=short)
    return model, twodot.solve_twodot_coefficients(model, allow_early_stop=False)


class TestCoefficients:
    def test_all_zero_at_start(self, resonant_point):
        _, co = resonant_point
        for v in co.series.values():
            assert v[0] == 0.0

    def test_resonance_collapses_components(self, resonant_point):
        _, co = resonant_point
        assert co.resonant
        assert co.resonance_residual() < 1e-9

    def test_detuning_breaks_component_equality(self, detuned_point):
        _, co = detuned_point
        assert not co.resonant
        assert co.resonance_residual() > 1e-3

    def test_no_coulomb_keeps_g_dark(self):
        model = make_model(omc_mev=0.0, horizon=None)
        short = dataclasses.replace(
            model, grid=TimeGrid(model.grid.step, min(model.grid.count, 3000))
        )
        co = twodot.solve_twodot_coefficients(short, allow_early_stop=False)
        for k, v in co.series.items():
            if k.startswith("G"):
                assert np.abs(v).max() == 0.0


class TestMasterEquation:
    def test_full_generator_trace_free(self, resonant_point):
        model, co = resonant_point
        pairs = twodot.generator_pairs()
        base = twodot.hamiltonian_super(model)
        rng = np.random.default_rng(3)
        vals = {
            k: complex(rng.normal(), rng.normal()) for k in twodot.COEFF_KEYS
        }
        gen = assemble(base, pairs, vals)
        assert np.abs(trace_vector(4) @ gen).max() < 1e-12

    def test_full_matches_m_matrix_on_resonance(self, resonant_point):
        model, co = resonant_point
        v0 = twodot.INITIAL_BASIS[:, 1]
        vec_m = twodot.propagate_rho_M(co, v0)
        rhos = twodot.propagate_rho_twodot_full(
            co, twodot.vector6_to_rho_matrix(v0), model
        )
        vec_full = twodot.rho_matrix_to_vector6(rhos)
        assert np.abs(vec_full - vec_m).max() < 1e-8

    def test_full_and_reduced_currents_agree_on_resonance(self, resonant_point):
        model, co = resonant_point
        vecs = twodot.propagate_rho_M(co, twodot.INITIAL_BASIS[:, 2])
        full = twodot.currents_twodot(co, vecs, reduced=False)
        red = twodot.currents_twodot(co, vecs, reduced=True)
        scale = max(np.abs(full.i_avg).max(), 1e-12)
        assert np.abs(full.i_1d - red.i_1d).max() < 1e-10 * scale
        assert full.i_1d[0] == 0.0 and red.i_d2[0] == 0.0

    def test_full_currents_match_continuity_route(self, resonant_point):
        # Independent route: I_1d = q_e Tr(N v_1d(rho)) from the
        # reservoir-1 part of the ME, I_d2 from minus the reservoir-2 part.
        model, co = resonant_point
        from dotflux.units import NA_PER_INVERSE_NS

        vecs = twodot.propagate_rho_M(co, twodot.INITIAL_BASIS[:, 1])
        cur = twodot.currents_twodot(co, vecs, reduced=False)
        d1, d2 = twodot._operators()[:2]
        n_tot = d1.conj().T @ d1 + d2.conj().T @ d2
        take = range(0, co.n_steps + 1, max(1, co.n_steps // 12))
        for j, sign in ((1, 1.0), (2, -1.0)):
            pairs = twodot.generator_pairs(env_index=j)
            for n in take:
                gen = assemble(
                    np.zeros((16, 16), dtype=complex),
                    pairs,
                    {k: co.series[k][n] for k in pairs},
                )
                rho = twodot.vector6_to_rho_matrix(vecs[n])
                v = (gen @ rho.reshape(-1)).reshape(4, 4)
                val = sign * NA_PER_INVERSE_NS * np.real(np.trace(n_tot @ v))
                ref = cur.i_1d[n] if j == 1 else cur.i_d2[n]
                scale = max(np.abs(cur.i_avg).max(), 1e-12)
                assert abs(val - ref) < 1e-9 * scale

    def test_linearity_of_propagation(self, resonant_point):
        model, co = resonant_point
        va, vb = twodot.INITIAL_BASIS[:, 0], twodot.INITIAL_BASIS[:, 6]
        w = 0.3
        mix = w * va + (1 - w) * vb
        out_mix = twodot.propagate_rho_M(co, mix)
        out_sum = w * twodot.propagate_rho_M(co, va) + (1 - w) * twodot.propagate_rho_M(co, vb)
        assert np.abs(out_mix - out_sum).max() < 1e-10

    def test_exchange_symmetric_initial_state(self, resonant_point):
        # Empty dots, no preference between the two: populations stay equal.
        model, co = resonant_point
        vecs = twodot.propagate_rho_M(co, twodot.INITIAL_BASIS[:, 0])
        assert np.abs(vecs[:, 1] - vecs[:, 2]).max() < 1e-10

    def test_off_resonance_full_path_preserves_trace(self, detuned_point):
        model, co = detuned_point
        rhos = twodot.propagate_rho_twodot_full(
            co, twodot.vector6_to_rho_matrix(twodot.INITIAL_BASIS[:, 2]), model
        )
        traces = np.einsum("tii->t", rhos).real
        assert np.abs(traces - 1).max() < 1e-8


class TestMMatrix:
    def test_zero_scalars_zero_matrix(self):
        mat = twodot.build_m_matrix(_dummy_coeffs(), idx=0, check_resonance=False)
        assert np.abs(mat).max() == 0.0
        assert np.linalg.matrix_rank(mat) == 0

    def test_population_block_conserves_trace(self, resonant_point):
        _, co = resonant_point
        m = twodot.build_m_matrix(co, -1)
        col_sums = m[:4].sum(axis=0)
        assert np.abs(col_sums[:4]).max() < 1e-12 * max(np.abs(m).max(), 1.0)
        assert np.abs(col_sums[4]).max() < 1e-12 * max(np.abs(m).max(), 1.0)

    def test_generic_rank_four(self, resonant_point):
        _, co = resonant_point
        m = twodot.build_m_matrix(co, -1)
        rank = np.linalg.matrix_rank(m, tol=1e-9 * np.abs(m).max())
        assert rank == 4

    def test_closed_subsystem_matches_m(self, resonant_point):
        # The (rho00, rho+, rho33, rho12R) block extracted from M equals the
        # standalone 4x4 assembly.
        _, co = resonant_point
        s = twodot.m_matrix_scalars(co, -1)
        a, b, c, f = s.a, s.b, s.c, s.f
        sub = np.array(
            [
                [2 * a, 2 * b, 0, 2 * b],
                [-a, c - b, f, -c - b],
                [0, -2 * c, -2 * f, 2 * c],
                [-a, -c - b, -f, c - b],
            ]
        )
        m = twodot.build_m_matrix(co, -1)
        # Map the 6-vector dynamics onto (rho00, rho+, rho33, rho12R).
        proj = np.array(
            [
                [1, 0, 0, 0, 0, 0],
                [0, 0.5, 0.5, 0, 0, 0],
                [0, 0, 0, 1, 0, 0],
                [0, 0, 0, 0, 1, 0],
            ]
        )
        lift = np.array(
            [
                [1, 0, 0, 0],
                [0, 1, 0, 0],
                [0, 1, 0, 0],
                [0, 0, 1, 0],
                [0, 0, 0, 1],
                [0, 0, 0, 0],
            ]
        )
        assert np.abs(proj @ m @ lift - sub).max() < 1e-12 * max(np.abs(m).max(), 1.0)

    def test_refused_off_resonance(self, detuned_point):
        _, co = detuned_point
        with pytest.raises(twodot.ResonanceError):
            twodot.build_m_matrix(co)
        with pytest.raises(twodot.ResonanceError):
            twodot.propagate_rho_M(co, twodot.INITIAL_BASIS[:, 0])
        with pytest.raises(twodot.ResonanceError):
            twodot.currents_twodot(co, np.zeros((3, 6)), reduced=True)


def _dummy_coeffs():
    zeros = {k: np.zeros(3, dtype=complex) for k in twodot.COEFF_KEYS}
    return twodot.TwoDotCoefficients(
        grid=TimeGrid(1.0, 2),
        series=zeros,
        n_steps=2,
        converged=True,
        convergence_change=0.0,
        resonant=True,
    )


class TestConservedSubspaces:
    def test_group_i_keeps_rho33_dark(self, resonant_point):
        _, co = resonant_point
        for i in (0, 1):
            vecs = twodot.propagate_rho_M(co, twodot.INITIAL_BASIS[:, i])
            assert np.abs(vecs[:, 3]).max() < 1e-10
            w2 = 0.5 * (vecs[:, 1] + vecs[:, 2]) - vecs[:, 4] + vecs[:, 3]
            assert np.abs(w2).max() < 1e-10

    def test_group_iii_keeps_rho00_dark(self, resonant_point):
        _, co = resonant_point
        for i in (6, 7):
            vecs = twodot.propagate_rho_M(co, twodot.INITIAL_BASIS[:, i])
            assert np.abs(vecs[:, 0]).max() < 1e-10
            w1 = 0.5 * (vecs[:, 1] + vecs[:, 2]) + vecs[:, 4]
            assert np.abs(w1).max() < 1e-10


class TestClassifier:
    @pytest.mark.parametrize("i,expected", sorted(twodot.GROUP_OF_BASIS.items()))
    def test_basis_states(self, i, expected):
        assert twodot.classify_initial_state(twodot.INITIAL_BASIS[:, i - 1]) == expected

    def test_mixed_state(self):
        v = 0.5 * twodot.INITIAL_BASIS[:, 0] + 0.5 * twodot.INITIAL_BASIS[:, 6]
        assert twodot.classify_initial_state(v) == "mixed"

    def test_invalid_inputs_rejected(self):
        with pytest.raises(ValueError, match="trace"):
            twodot.classify_initial_state(np.array([0.5, 0, 0, 0, 0, 0]))
        with pytest.raises(ValueError, match="coherence"):
            twodot.classify_initial_state(np.array([0.0, 0.5, 0.5, 0.0, 0.9, 0.0]))


class TestClosedForms:
    def test_group_i_trace_identity(self, resonant_point):
        _, co = resonant_point
        s = twodot.m_matrix_scalars(co, -1)
        v = twodot.steady_state_closed_form(s, "I")
        assert v[0] + v[1] + v[2] + v[3] == pytest.approx(1.0, abs=1e-12)
        assert v[4] == pytest.approx(0.5 * (v[1] + v[2]), abs=1e-12)

    def test_group_iii_trace_identity(self, resonant_point):
        _, co = resonant_point
        s = twodot.m_matrix_scalars(co, -1)
        v = twodot.steady_state_closed_form(s, "III")
        assert v[0] + v[1] + v[2] + v[3] == pytest.approx(1.0, abs=1e-12)
        assert v[4] == pytest.approx(-0.5 * (v[1] + v[2]), abs=1e-12)

    def test_closed_forms_match_propagation(self, resonant_point):
        model, co = resonant_point
        s = twodot.m_matrix_scalars(co, -1)
        for group, idx in (("I", 0), ("III", 6), ("II", 2)):
            res = runs.simulate_twodot(
                model, twodot.INITIAL_BASIS[:, idx], coeffs=co
            )
            closed = twodot.steady_state_closed_form(s, group)
            assert np.abs(closed - res.rho[-1]).max() < 1e-5

    def test_degenerate_denominator_reported(self):
        s = twodot.MMatrixScalars(a=1.0, b=1.0, c=0.0, d=0.0, e=0.0, f=0.5)
        with pytest.raises(twodot.DegenerateSteadyState):
            twodot.steady_state_closed_form(s, "I")

    def test_general_initial_state_formula(self, resonant_point):
        model, co = resonant_point
        s = twodot.m_matrix_scalars(co, -1)
        v0 = 0.25 * np.array([1.0, 1.0, 1.0, 1.0, 0.0, 0.0])
        res = runs.simulate_twodot(model, v0, coeffs=co)
        pred = twodot.steady_state_from_initial(s, v0)
        assert np.abs(pred - res.rho[-1]).max() < 1e-5
