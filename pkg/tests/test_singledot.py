import numpy as np
import pytest

from conftest import OMEGA_30MEV, grid_for
from dotflux import envkit, oracle, singledot, units
from dotflux.steady import SteadyPolicy, detect_steady
from dotflux.volterra import TimeGrid

OMEGA = OMEGA_30MEV


def make_model(b=0.01, lam=0.05, mu1=40.0, mu2=0.0, T=2.0, horizon=0.02, **kw):
    e1, e2 = envkit.environment_pair(T, mu1, mu2, lam, b, OMEGA)
    grid = grid_for(e1, e2, OMEGA, horizon)
    return singledot.SingleDotModel(OMEGA, e1, e2, grid, **kw)


@pytest.fixture(scope="module")
def fig_point():
    """Moderate-size operating point shared by several tests."""
    model = make_model()
    coeffs = singledot.compute_exact_coefficients(model)
    return model, coeffs


class TestCoefficients:
    def test_zero_coupling_limit(self):
        model = make_model(lam=1e-9, horizon=0.002)
        co = singledot.compute_exact_coefficients(model)
        assert np.abs(co.f).max() < 1e-12
        exact = np.exp(1j * OMEGA * model.grid.times)
        # Pure phase up to the stepper's O((Omega*h)^3) phase accumulation.
        assert np.abs(co.u - exact).max() < 0.05
        assert np.abs(np.abs(co.u) - 1.0).max() < 5e-3

    def test_initial_values(self, fig_point):
        _, co = fig_point
        assert co.u[0] == 1.0 + 0.0j
        assert np.abs(co.c[:, :, 0]).max() == 0.0
        assert np.abs(co.a[:, 0]).max() == 0.0
        assert np.abs(co.b[:, 0]).max() == 0.0
        assert np.abs(co.d[:, 0]).max() == 0.0
        assert np.abs(co.f[:, :, 0]).max() == 0.0

    def test_early_growth_is_linear(self, fig_point):
        # All constituents are integrals from zero: F ~ t for small t.
        _, co = fig_point
        f5 = np.abs(co.f[:, :, 5]).max()
        f10 = np.abs(co.f[:, :, 10]).max()
        assert f10 == pytest.approx(2.0 * f5, rel=0.05)

    def test_symmetric_coupling_identity(self, fig_point):
        _, co = fig_point
        assert singledot.coupling_symmetry_residual(co) < 1e-9

    def test_guard_blocks_propagation_beyond_underflow(self, fig_point):
        model, co = fig_point
        import dataclasses

        truncated = dataclasses.replace(co, valid_count=co.grid.count // 2)
        with pytest.raises(singledot.CoefficientError, match="underflow"):
            singledot.propagate_rho_single(truncated, (1.0, 0.0))


class TestDensityAndCurrents:
    def test_zero_coefficients_freeze_rho(self):
        model = make_model(lam=1e-9, horizon=0.002)
        co = singledot.compute_exact_coefficients(model)
        rhos = singledot.propagate_rho_single(co, (0.3, 0.7))
        assert np.abs(rhos - rhos[0]).max() < 1e-9

    def test_trace_preserved(self, fig_point):
        model, co = fig_point
        rhos = singledot.propagate_rho_single(co, (1.0, 0.0))
        assert np.abs(rhos.sum(axis=1) - 1.0).max() < 1e-8

    def test_population_bounds(self, fig_point):
        model, co = fig_point
        rhos = singledot.propagate_rho_single(co, (0.0, 1.0))
        assert rhos.min() > -1e-6 and rhos.max() < 1 + 1e-6

    def test_currents_vanish_at_zero(self, fig_point):
        model, co = fig_point
        rhos = singledot.propagate_rho_single(co, (1.0, 0.0))
        cur = singledot.currents_single(co, rhos)
        assert cur.i_1d[0] == 0.0 and cur.i_d2[0] == 0.0
        assert np.allclose(cur.delta_i, cur.i_1d - cur.i_d2)

    def test_delta_i_converges_to_zero(self, fig_point):
        model, co = fig_point
        rhos = singledot.propagate_rho_single(co, (1.0, 0.0))
        cur = singledot.currents_single(co, rhos)
        late = abs(cur.delta_i[-1] / cur.i_avg[-1])
        assert late < 1e-3

    def test_steady_current_independent_of_initial_state(self, fig_point):
        model, co = fig_point
        c0 = singledot.currents_single(co, singledot.propagate_rho_single(co, (1.0, 0.0)))
        c1 = singledot.currents_single(co, singledot.propagate_rho_single(co, (0.0, 1.0)))
        assert abs(c0.i_avg[-1] - c1.i_avg[-1]) < 1e-6 * abs(c0.i_avg[-1])

    def test_vacuum_bath_decay_toward_empty(self):
        # Cold empty reservoirs: an occupied dot decays monotonically
        # (after transients) toward the empty state; oracle cross-check in
        # TestOracleEquivalence pins the trajectory itself.
        model = make_model(b=0.05, T=0.001, mu1=-200.0, mu2=-200.0, horizon=0.01)
        co = singledot.compute_exact_coefficients(model)
        rhos = singledot.propagate_rho_single(co, (0.0, 1.0))
        r11 = rhos[:, 1]
        tail = r11[len(r11) // 3 :]
        assert tail[-1] < 0.05
        assert np.all(np.diff(tail) < 1e-6)

    def test_average_shortcut_matches_rho_route(self, fig_point):
        model, co = fig_point
        rhos = singledot.propagate_rho_single(co, (0.4, 0.6))
        cur = singledot.currents_single(co, rhos)
        shortcut = singledot.average_current_shortcut(co)
        scale = np.abs(cur.i_avg).max()
        assert np.abs(shortcut - cur.i_avg).max() < 1e-9 * max(scale, 1.0)

    def test_shortcut_refuses_asymmetric_spectra(self):
        model = make_model(horizon=0.002)
        s1, s2 = model.spectra()
        lopsided = envkit.DiscreteSpectrum(
            s2.mode_frequencies, 0.5 * s2.coupling_sq, s2.occupations
        )
        model2 = singledot.SingleDotModel(
            OMEGA, model.env1, model.env2, model.grid, spectrum1=s1, spectrum2=lopsided
        )
        co = singledot.compute_exact_coefficients(model2)
        with pytest.raises(ValueError, match="symmetric"):
            singledot.average_current_shortcut(co)


def matched_pair(T, mu1, mu2, n_modes=3, b=0.01, lam=0.05, horizon=0.004):
    e1, e2 = envkit.environment_pair(T, mu1, mu2, lam, b, OMEGA)
    s1 = envkit.build_spectrum(e1).truncate_strongest(n_modes)
    s2 = envkit.build_spectrum(e2).truncate_strongest(n_modes)
    grid = TimeGrid(0.05 / OMEGA, int(horizon / (0.05 / OMEGA)))
    model = singledot.SingleDotModel(OMEGA, e1, e2, grid, spectrum1=s1, spectrum2=s2)
    cfg = oracle.OracleConfig("singledot", (OMEGA,), 0.0, (s1, s2))
    return model, cfg


def oracle_reduced(cfg, init_pops, times):
    ops = oracle.build_total_hamiltonian(cfg)
    rho = None
    for k, w in enumerate(init_pops):
        if w <= 0:
            continue
        states = oracle.evolve_state(ops, oracle.dot_register_state(ops, {k: 1.0}), times)
        part = np.array([oracle.reduce_to_dots(ops, s) for s in states])
        rho = w * part if rho is None else rho + w * part
    return ops, rho


class TestOracleEquivalence:
    @pytest.mark.parametrize(
        "temp,mu1,mu2", [(1e-3, -200.0, -200.0), (2.0, 40.0, 0.0)]
    )
    def test_reduced_state_trace_distance(self, temp, mu1, mu2):
        model, cfg = matched_pair(temp, mu1, mu2)
        co = singledot.compute_exact_coefficients(model)
        rhos = singledot.propagate_rho_single(co, (0.0, 1.0))
        take = np.arange(0, model.grid.count + 1, max(1, model.grid.count // 120))
        _, rho_or = oracle_reduced(cfg, (0.0, 1.0), model.grid.times[take])
        worst = 0.0
        for i, k in enumerate(take):
            diff = np.diag([rhos[k, 0], rhos[k, 1]]) - rho_or[i]
            worst = max(worst, 0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())
        assert worst < 5e-3

    def test_cold_current_matches_reservoir_outflow(self):
        model, cfg = matched_pair(1e-3, -200.0, -200.0)
        co = singledot.compute_exact_coefficients(model)
        rhos = singledot.propagate_rho_single(co, (0.0, 1.0))
        cur = singledot.currents_single(co, rhos)
        take = np.arange(0, model.grid.count + 1, max(1, model.grid.count // 150))
        times = model.grid.times[take]
        ops = oracle.build_total_hamiltonian(cfg)
        states = oracle.evolve_state(
            ops, oracle.dot_register_state(ops, {1: 1.0}), times
        )
        outflow = oracle.env1_b_outflow(ops, states)
        i_1d_oracle = -units.NA_PER_INVERSE_NS * outflow
        # The ME current equals q_e times the reservoir-1 particle outflow.
        me = cur.i_1d[take]
        mask = times > 0.3 * times[-1]
        scale = np.abs(i_1d_oracle[mask]).max()
        assert np.abs(me[mask] - i_1d_oracle[mask]).max() < 0.10 * scale
