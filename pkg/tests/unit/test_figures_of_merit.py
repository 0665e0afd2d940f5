#!/usr/bin/env python3
"""
Unit tests for cooperativity, cavity efficiency, indistinguishability,
the g ↔ V conversion and the parameter sweep.
"""
import math

import pytest

from core.config_utils import debye_to_coulomb_metre, omega_from_wavelength
from core.exceptions import NonConvergenceError, ParameterError, UndefinedQuantityError
from core.figures_of_merit import (
    DipoleSpec,
    NumericsSpec,
    RowStatus,
    adiabatic_beta,
    cavity_efficiency,
    cooperativity,
    emission_budget,
    evaluate_fom,
    fom_sweep,
    g_from_mode_volume,
    indistinguishability,
    mode_volume_from_g,
    purcell_rate,
)
from core.quantum_core import HilbertSpec, SystemParams

GHZ = 2.0 * math.pi * 1e9


def _siv(g_ghz, kappa_ghz=10.0, gamma_ghz=0.1, gamma_star_ghz=0.0, delta_ghz=0.0):
    return SystemParams(g=g_ghz * GHZ, kappa_wg=kappa_ghz * GHZ, gamma=gamma_ghz * GHZ,
                        gamma_star=gamma_star_ghz * GHZ, delta_ca=delta_ghz * GHZ)


def _beta_closed_form(g, kappa, gamma):
    # resonant, no pure dephasing
    return kappa * 4.0 * g ** 2 / ((kappa + gamma) * (4.0 * g ** 2 + kappa * gamma))


def test_cooperativity_and_purcell():
    params = _siv(10.0)
    assert cooperativity(params) == pytest.approx(400.0)
    assert purcell_rate(params) == pytest.approx(40.0 * GHZ)
    assert adiabatic_beta(params) == pytest.approx(400.0 / 401.0)

    with pytest.raises(UndefinedQuantityError):
        cooperativity(_siv(10.0, gamma_ghz=0.0))
    with pytest.raises(UndefinedQuantityError):
        cooperativity(SystemParams(g=GHZ, kappa_wg=0.0, gamma=GHZ))

    # κ_sc adds to the total loss
    lossy = _siv(10.0).replace(kappa_sc=10.0 * GHZ)
    assert cooperativity(lossy) == pytest.approx(200.0)


def test_coupling_from_mode_volume_regression():
    """2.31 D, 737 nm, n = 2.4, V = 0.5 (λ/n)³ → g/2π ≈ 11.92 GHz"""
    print("=" * 70)
    print("TEST: g from mode volume")
    print("=" * 70)

    dipole = DipoleSpec(mu=debye_to_coulomb_metre(2.31))
    omega = omega_from_wavelength(737e-9)
    g = g_from_mode_volume(0.5, dipole, omega, unit="lambda_n3", refractive_index=2.4)
    print(f"[OK] g/2π = {g / GHZ:.6f} GHz")
    assert g / GHZ == pytest.approx(11.92287557628, rel=1e-6)
    assert 10.0 < g / GHZ < 12.5

    v = mode_volume_from_g(g, dipole, omega)
    assert v == pytest.approx(0.5 * (737e-9 / 2.4) ** 3, rel=1e-12)

    # g ∝ ξ / √V
    weaker = DipoleSpec(mu=dipole.mu, overlap_xi=0.5)
    assert g_from_mode_volume(2.0, weaker, omega, unit="lambda_n3", refractive_index=2.4) == pytest.approx(g / 4.0)

    with pytest.raises(ParameterError):
        g_from_mode_volume(0.0, dipole, omega)
    with pytest.raises(ParameterError):
        mode_volume_from_g(0.0, dipole, omega)

    print("[PASS] g ↔ V OK\n")


def test_dipole_validation():
    with pytest.raises(ParameterError):
        DipoleSpec(mu=0.0)
    with pytest.raises(ParameterError):
        DipoleSpec(mu=1e-30, overlap_xi=1.5)
    with pytest.raises(ParameterError):
        DipoleSpec(mu=1e-30, orientation="fixed")
    with pytest.raises(ParameterError):
        DipoleSpec(mu=1e-30, orientation="fixed", axis=(1.0, 1.0, 0.0))
    DipoleSpec(mu=1e-30, orientation="fixed", axis=(0.0, 0.0, 1.0))


def test_numerics_spec_validation():
    with pytest.raises(ParameterError):
        NumericsSpec(tol=0.0)
    with pytest.raises(ParameterError):
        NumericsSpec(growth=0.9)
    assert NumericsSpec().refined(4).samples_per_rate == 4 * NumericsSpec().samples_per_rate


def test_beta_matches_single_excitation_closed_form():
    """Resonant, γ* = 0: β = 4g²κ / ((κ+γ)(4g²+κγ))"""
    print("=" * 70)
    print("TEST: β against closed form")
    print("=" * 70)

    for g_ghz in (0.5, 2.0, 10.0, 50.0):
        beta = cavity_efficiency(_siv(g_ghz))
        expected = _beta_closed_form(g_ghz, 10.0, 0.1)
        print(f"[OK] g={g_ghz:5.1f} GHz: β={beta:.8f} expected {expected:.8f}")
        assert beta == pytest.approx(expected, abs=2e-6)

    # weak coupling near C = 1 gives β ≈ 1/2
    assert cavity_efficiency(_siv(0.5)) == pytest.approx(0.5, abs=0.02)

    print("[PASS] β OK\n")


def test_beta_is_one_without_emitter_losses():
    beta = cavity_efficiency(_siv(10.0, gamma_ghz=0.0))
    assert beta == pytest.approx(1.0, abs=1e-6)
    budget = emission_budget(_siv(10.0, gamma_ghz=0.0))
    assert budget.emitter == 0.0
    assert budget.residual < 1e-6


def test_emission_budget_accounts_for_the_excitation():
    """κ∫⟨a†a⟩ + γ∫⟨σ₊σ₋⟩ = 1 from |e, 0⟩ across couplings, loss rates, dephasing and detuning"""
    print("=" * 70)
    print("TEST: Excitation conservation")
    print("=" * 70)

    # (κ, γ, γ*, δ) in GHz
    regimes = [(10.0, 0.1, 0.0, 0.0), (10.0, 0.1, 1.0, 0.0), (50.0, 1.0, 0.05, 0.0), (5.0, 0.5, 2.0, 5.0)]
    for kappa, gamma, gamma_star, delta in regimes:
        for g in (0.5, 2.0, 5.0, 10.0, 20.0):
            budget = emission_budget(_siv(g, kappa_ghz=kappa, gamma_ghz=gamma,
                                          gamma_star_ghz=gamma_star, delta_ghz=delta))
            assert budget.cavity + budget.emitter == pytest.approx(1.0, abs=1e-4)
            assert budget.residual < 1e-6
        print(f"[OK] κ={kappa} γ={gamma} γ*={gamma_star} δ={delta} GHz")

    budget = emission_budget(_siv(2.0, gamma_star_ghz=0.5))
    assert budget.cavity + budget.emitter + budget.residual == pytest.approx(1.0, abs=2e-6)
    assert budget.cavity > budget.emitter

    print("[PASS] Excitation conservation OK\n")


def test_waveguide_efficiency_scales_with_kappa_share():
    params = _siv(10.0).replace(kappa_sc=10.0 * GHZ)
    beta = cavity_efficiency(params)
    assert cavity_efficiency(params, waveguide_only=True) == pytest.approx(0.5 * beta, rel=1e-12)


def test_indistinguishability_is_one_without_pure_dephasing():
    """With γ* = 0 the cavity photon is pure whatever γ and δ_ca are"""
    for params in (_siv(10.0), _siv(2.0, delta_ghz=5.0), _siv(0.5)):
        value = indistinguishability(params)
        print(f"[OK] g={params.g / GHZ:.1f} GHz δ={params.delta_ca / GHZ:.1f} GHz: I={value:.10f}")
        assert value == pytest.approx(1.0, abs=1e-8)


def test_indistinguishability_bad_cavity_limit():
    """κ ≫ g, γ*: I ≈ (γ+R)/(γ+R+γ*) with R = 4g²/κ"""
    g, kappa, gamma, gamma_star = 1.0, 100.0, 0.1, 0.05
    value = indistinguishability(_siv(g, kappa_ghz=kappa, gamma_ghz=gamma, gamma_star_ghz=gamma_star))
    rate = gamma + 4.0 * g ** 2 / kappa
    expected = rate / (rate + gamma_star)
    print(f"[OK] I={value:.5f} expected≈{expected:.5f}")
    assert value == pytest.approx(expected, abs=0.01)


def test_dephasing_lowers_indistinguishability():
    weak = indistinguishability(_siv(10.0, gamma_star_ghz=0.05))
    strong = indistinguishability(_siv(10.0, gamma_star_ghz=1.0))
    assert 0.0 <= strong < weak < 1.0


def test_indistinguishability_converges_under_grid_refinement():
    params = _siv(2.0, gamma_star_ghz=0.5)
    coarse = indistinguishability(params)
    fine = indistinguishability(params, numerics=NumericsSpec(samples_per_rate=64, growth=1.02))
    print(f"[OK] I coarse={coarse:.6f} fine={fine:.6f}")
    assert coarse == pytest.approx(fine, abs=2e-3)


def test_indistinguishability_undefined_without_coupling():
    with pytest.raises(UndefinedQuantityError):
        indistinguishability(_siv(0.0))


def test_results_invariant_under_rate_rescaling():
    base = _siv(10.0, gamma_star_ghz=0.5)
    scaled = SystemParams(g=4 * base.g, kappa_wg=4 * base.kappa_wg, gamma=4 * base.gamma,
                          gamma_star=4 * base.gamma_star)
    a = evaluate_fom(base)
    b = evaluate_fom(scaled)
    assert b.beta == pytest.approx(a.beta, abs=1e-6)
    assert b.indist == pytest.approx(a.indist, abs=1e-6)
    assert b.numerics.horizon == pytest.approx(a.numerics.horizon / 4.0, rel=1e-6)


def test_truncation_does_not_change_single_excitation_results():
    params = _siv(10.0, gamma_star_ghz=0.5)
    one = evaluate_fom(params, spec=HilbertSpec(n_max=1))
    two = evaluate_fom(params, spec=HilbertSpec(n_max=2))
    assert two.beta == pytest.approx(one.beta, abs=2e-6)
    assert two.indist == pytest.approx(one.indist, abs=1e-3)


def test_evaluate_fom_report():
    result = evaluate_fom(_siv(10.0, gamma_star_ghz=0.05))
    assert result.cooperativity == pytest.approx(400.0)
    assert 0.0 <= result.beta <= 1.0
    assert 0.0 <= result.indist <= 1.0
    assert result.beta_wg == result.beta
    assert result.numerics.backend == "exact"
    assert result.numerics.residual < 1e-6
    assert result.numerics.grid_points > 10
    assert not result.numerics.capped

    lossless_emitter = evaluate_fom(_siv(10.0, gamma_ghz=0.0))
    assert lossless_emitter.cooperativity is None


def test_non_converged_horizon_raises():
    """Emission far slower than the cap allows"""
    params = _siv(0.01, kappa_ghz=10.0, gamma_ghz=0.1)
    with pytest.raises(NonConvergenceError, match="non-converged integral"):
        cavity_efficiency(params, numerics=NumericsSpec(horizon_cap_factor=1.0))


def test_sweep_keeps_order_and_reports_failures():
    print("=" * 70)
    print("TEST: FoM sweep")
    print("=" * 70)

    base = _siv(1.0, gamma_star_ghz=0.05)
    g_values = [x * GHZ for x in (0.5, 0.0, 10.0, 2.0)]
    serial = fom_sweep(base, g_values=g_values, max_workers=1)
    threaded = fom_sweep(base, g_values=g_values, max_workers=3)

    assert [row.index for row in serial] == [0, 1, 2, 3]
    assert [row.g for row in threaded] == g_values
    assert serial[1].status == RowStatus.ERROR
    assert "UndefinedQuantityError" in serial[1].message
    for a, b in zip(serial, threaded):
        assert a.status == b.status
        if a.status == RowStatus.OK:
            assert a.result.beta == pytest.approx(b.result.beta, rel=1e-12)
            assert a.result.indist == pytest.approx(b.result.indist, rel=1e-12)
            print(f"[OK] g={a.g / GHZ:5.1f} GHz β={a.result.beta:.4f} I={a.result.indist:.4f}")

    # β rises with g
    betas = [serial[k].result.beta for k in (0, 3, 2)]
    assert betas == sorted(betas)

    print("[PASS] Sweep OK\n")


def test_efficiency_and_indistinguishability_trends_over_g():
    """
    κ = κ_wg = 10 GHz, γ = 0.1 GHz, g from 0.5 to 50 GHz.

    β rises with g throughout. I rises monotonically while g ≤ κ/2. Past
    that the emitter-like and cavity-like states hybridize, pure dephasing
    scatters between the two polaritons, and I levels off a little below its
    peak. From g = κ on it spans less than 0.05, and the drop from the peak
    stays below γ*/κ.
    """
    print("=" * 70)
    print("TEST: Trends over g")
    print("=" * 70)

    kappa_ghz = 10.0
    g_ghz = (0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0)
    last_weak = g_ghz.index(kappa_ghz / 2.0)
    plateau_start = g_ghz.index(kappa_ghz)
    g_values = [x * GHZ for x in g_ghz]
    curves = {}
    for gamma_star in (0.05, 1.0):
        rows = fom_sweep(_siv(1.0, gamma_star_ghz=gamma_star), g_values=g_values, max_workers=4)
        assert all(row.status == RowStatus.OK for row in rows)
        betas = [row.result.beta for row in rows]
        indist = [row.result.indist for row in rows]
        curves[gamma_star] = indist
        print(f"[OK] γ*={gamma_star} GHz I: " + ", ".join(f"{i:.4f}" for i in indist))

        assert betas == sorted(betas)
        rising = indist[:last_weak + 1]
        assert rising == sorted(rising)
        plateau = indist[plateau_start:]
        assert max(plateau) - min(plateau) < 0.05
        assert 0.0 <= max(indist) - indist[-1] < gamma_star / kappa_ghz

    assert all(high < low for high, low in zip(curves[1.0], curves[0.05]))

    print("[PASS] Trends OK\n")


def test_volume_sweep_reports_bad_volumes():
    dipole = DipoleSpec(mu=debye_to_coulomb_metre(2.31))
    rows = fom_sweep(_siv(1.0), v_values=[0.5, 0.0, 2.0], dipole=dipole,
                     refractive_index=2.4, v_unit="lambda_n3", max_workers=2)

    assert [row.index for row in rows] == [0, 1, 2]
    assert [row.status for row in rows] == [RowStatus.OK, RowStatus.ERROR, RowStatus.OK]
    assert rows[1].g is None and rows[1].result is None
    assert "ParameterError" in rows[1].message
    assert rows[1].volume_normalized == 0.0
    assert rows[2].g == pytest.approx(rows[0].g / 2.0)
    assert rows[0].result.beta > rows[2].result.beta


def test_volume_sweep_fills_both_axes():
    dipole = DipoleSpec(mu=debye_to_coulomb_metre(2.31))
    base = _siv(1.0)
    rows = fom_sweep(base, v_values=[0.5, 2.0], dipole=dipole, refractive_index=2.4, v_unit="lambda_n3")
    assert rows[0].g / GHZ == pytest.approx(11.92287557628, rel=1e-6)
    assert rows[1].g == pytest.approx(rows[0].g / 2.0)
    assert rows[0].volume_normalized == pytest.approx(0.5)
    assert all(row.status == RowStatus.OK for row in rows)

    with pytest.raises(ParameterError):
        fom_sweep(base, v_values=[0.5])
    with pytest.raises(ParameterError):
        fom_sweep(base, g_values=[GHZ], v_values=[0.5], dipole=dipole)
