import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eitpolariton.params import AtomParams, DriveParams, ParameterError, derive, params_from_mapping
from eitpolariton.susceptibility import (
    QuadratureError,
    chi,
    chi_beam,
    chi_eit_approx,
    chi_hot_quadrature,
    chi_hot_residue,
    chi_two_level_doppler,
    chi_velocity_class,
    drive_coherence,
    populations_steady_state,
)

from conftest import FIG, beam, bloch_steady_state, hot


# ---------------------------------------------------------------------------
# populations
# ---------------------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(om=st.floats(1e-3, 3), d1=st.floats(-300, 300), gcb=st.floats(1e-4, 0.3),
       branching=st.floats(0, 1))
def test_populations_match_density_matrix(om, d1, gcb, branching):
    atom = AtomParams(gamma_cb=gcb, density_ratio=1.0, branching=branching)
    drive = DriveParams(omega_rabi=om, delta_d=d1)
    pops = populations_steady_state(0.0, drive, atom)
    rho = bloch_steady_state(om, d1, gcb, branching)
    assert pops.rho_aa == pytest.approx(rho[0, 0].real, abs=1e-12)
    assert pops.rho_bb == pytest.approx(rho[1, 1].real, abs=1e-12)
    assert pops.rho_cc == pytest.approx(rho[2, 2].real, abs=1e-12)
    assert pops.rho_aa + pops.rho_bb + pops.rho_cc == pytest.approx(1.0, abs=1e-12)
    for r in (pops.rho_aa, pops.rho_bb, pops.rho_cc):
        assert -1e-15 <= r <= 1 + 1e-15
    coh = drive_coherence(0.0, drive, atom)
    assert coh == pytest.approx(rho[0, 2], abs=1e-12)


def test_populations_frozen_values():
    pops = populations_steady_state(1.0, DriveParams(omega_rabi=0.25, delta_d=-100.0),
                                    AtomParams(gamma_cb=1e-3, density_ratio=1.0))
    # 9x9 density-matrix solve at Delta_1 = 0
    assert pops.n_ab == pytest.approx(-0.9892051030421994, rel=1e-12)
    assert pops.n_ca == pytest.approx(0.007850834151127821, rel=1e-10)


def test_populations_limits():
    atom = AtomParams(gamma_cb=1e-3, density_ratio=1.0)
    p0 = populations_steady_state(0.3, DriveParams(omega_rabi=1e-12), atom)
    assert p0.rho_aa == pytest.approx(0, abs=1e-15)
    assert p0.rho_bb == pytest.approx(0.5, abs=1e-12) and p0.rho_cc == pytest.approx(0.5, abs=1e-12)
    assert p0.n_ab == pytest.approx(-0.5, abs=1e-12)
    far = populations_steady_state(0.0, DriveParams(omega_rabi=0.25, delta_d=1e7), atom)
    assert far.n_ab == pytest.approx(-0.5, abs=1e-6)
    strong = populations_steady_state(0.0, DriveParams(omega_rabi=3.0, delta_d=0.0), atom)
    assert strong.n_ab == pytest.approx(-1, abs=0.01) and abs(strong.n_ca) < 0.01
    red = populations_steady_state(0.0, DriveParams(omega_rabi=0.25, delta_d=0.0), atom, "reduced")
    assert red.rho_aa == 0 and red.rho_cc == pytest.approx(0.5 / (1 + 62.5))
    with pytest.raises(ParameterError):
        populations_steady_state(0.0, DriveParams(), atom, "unknown")


def test_population_width_scales_with_power_broadening():
    atom = AtomParams(gamma_cb=1e-3, density_ratio=1.0)
    drive = DriveParams(omega_rabi=0.25, delta_d=-100.0)
    dp = derive(hot())
    v = 1.0 + np.array([0.0, dp.gammaG / 100.0])
    n = populations_steady_state(v, drive, atom, "reduced").rho_cc
    # Lorentzian hole of half width gamma G in Delta_1: depth halves there
    hole = 0.5 - n
    assert hole[1] / hole[0] == pytest.approx(0.5, rel=1e-3)


# ---------------------------------------------------------------------------
# beam
# ---------------------------------------------------------------------------

def test_beam_two_level_limit():
    p = params_from_mapping({**FIG, "omega_rabi": 1e-9, "coupling_g": 1e-3, "medium": "beam",
                             "beam_velocity": 0.0})
    w = np.linspace(-5, 5, 11)
    ref = -1j * 1e-3 / (2 * (1 + 1j * w))
    np.testing.assert_allclose(chi_beam(w, 0.0, p), ref, rtol=1e-12)


@settings(max_examples=100, deadline=None)
@given(w=st.floats(-200, 200), dk=st.floats(-1, 1), v=st.floats(-3, 3), dd=st.floats(-300, 300),
       om=st.floats(0.01, 2))
def test_beam_galilean_structure(w, dk, v, dd, om):
    moving = params_from_mapping({**FIG, "omega_rabi": om, "delta_d": dd, "coupling_g": 1e-3,
                                  "medium": "beam", "beam_velocity": v})
    rest = params_from_mapping({**FIG, "omega_rabi": om, "delta_d": dd + 100.0 * v,
                                "coupling_g": 1e-3, "medium": "beam", "beam_velocity": 0.0})
    a = chi_beam(w, dk, moving)
    b = chi_beam(w + (100.0 + dk) * v, dk, rest)
    assert abs(a - b) <= 1e-12 * abs(b) + 1e-300


@settings(max_examples=200, deadline=None)
@given(w=st.floats(-300, 300), dk=st.floats(-1, 1), v=st.floats(-3, 3), dd=st.floats(-300, 300),
       om=st.floats(0.01, 3))
def test_beam_passive(w, dk, v, dd, om):
    p = params_from_mapping({**FIG, "omega_rabi": om, "delta_d": dd, "coupling_g": 1e-3,
                             "medium": "beam", "beam_velocity": v})
    assert chi_beam(w, dk, p).imag <= 0


def test_beam_two_photon_suppression():
    base = {**FIG, "delta_d": 0.0, "coupling_g": 1e-3, "medium": "beam", "beam_velocity": 0.0}
    on = abs(chi_beam(0.0, 0.0, params_from_mapping({**base, "omega_rabi": 0.25})))
    off = abs(chi_beam(0.0, 0.0, params_from_mapping({**base, "omega_rabi": 1e-9})))
    ratio = on / off
    # gamma_cb gamma / Omega^2 = 0.016; populations and repumping change it by < 5 %
    assert ratio == pytest.approx(1e-3 / 0.0625, rel=0.05)


def test_beam_requires_beam_medium():
    with pytest.raises(ParameterError):
        chi_beam(0.0, 0.0, hot())


# ---------------------------------------------------------------------------
# hot gas: residue formula against the quadrature oracle
# ---------------------------------------------------------------------------

WINDOW = [(dw, dk) for dw in (-0.008, -0.003, 0.0, 0.004, 0.008) for dk in (0.0, 0.002, 0.0088)]


@pytest.mark.parametrize("dw,dk", WINDOW + [(0.5, 0.0), (-30.0, 0.3), (150.0, 2.0)])
def test_residue_exact_for_nonnegative_dk(fig3b, dw, dk):
    """With rho_aa -> 0 populations the two residues reproduce the integral (d_k >= 0)."""
    w = fig3b.drive.delta_d + dw
    ref = chi_hot_quadrature(w, dk, fig3b, population_model="reduced", epsrel=1e-12)
    assert abs(chi_hot_residue(w, dk, fig3b) - ref) <= 1e-9 * abs(ref)


def test_residue_negative_dk_diagnostic(fig3b):
    """For d_k < 0 the printed |d_k| and the dropped third pole leave a visible error."""
    w = fig3b.drive.delta_d
    dk = -0.0088
    ref = chi_hot_quadrature(w, dk, fig3b, population_model="reduced")
    err_abs = abs(chi_hot_residue(w, dk, fig3b) - ref) / abs(ref)
    err_signed = abs(chi_hot_residue(w, dk, fig3b, dk_mode="signed") - ref) / abs(ref)
    assert err_abs == pytest.approx(0.1275, abs=2e-3)
    assert err_signed < 0.02


def test_residue_close_to_documented_population_model(fig3b):
    for dw, dk in WINDOW:
        w = fig3b.drive.delta_d + dw
        a = chi_hot_residue(w, dk, fig3b)
        b = chi_hot_quadrature(w, dk, fig3b)
        assert abs(a - b) <= 0.01 * abs(b)


def test_residue_continuous_at_zero_dk(fig3b):
    w = fig3b.drive.delta_d + 0.002
    a = chi_hot_residue(w, 1e-12, fig3b)
    b = chi_hot_residue(w, -1e-12, fig3b)
    c = chi_hot_residue(w, 0.0, fig3b)
    assert abs(a - c) < 1e-9 * abs(c) and abs(b - c) < 1e-9 * abs(c)


def test_zero_drive_reduction_and_passivity():
    p = params_from_mapping({**FIG, "omega_rabi": 1e-6, "coupling_g": 2.7e-3, "delta_d": -100.0})
    w = np.linspace(-300, 300, 100)
    res = chi_hot_residue(w, 0.0, p)
    ref = chi_two_level_doppler(w, 0.0, p)
    assert np.max(np.abs(res - ref) / np.abs(ref)) <= 1e-4
    assert np.all(res.imag <= 0)


def test_two_level_closed_form_against_quadrature():
    p = params_from_mapping({**FIG, "omega_rabi": 1e-6, "coupling_g": 2.7e-3, "delta_d": -100.0})
    for w, dk in [(-250.0, 0.0), (0.0, 0.0), (40.0, 0.5), (290.0, -0.3)]:
        q = chi_hot_quadrature(w, dk, p)
        # the quadrature sees the exact undriven populations n_ab = -1/2
        assert abs(q - chi_two_level_doppler(w, dk, p)) <= 1e-6 * abs(q)


@pytest.mark.parametrize("dk", [0.0, 0.01, -0.01, 1.0])
def test_residue_passive(fig3b, dk):
    w = np.concatenate([np.linspace(-400, 200, 3001), -100 + np.linspace(-0.05, 0.05, 501)])
    assert np.all(chi_hot_residue(w, dk, fig3b).imag <= 0)


def test_residue_rejects_maxwellian_and_beam():
    with pytest.raises(ParameterError):
        chi_hot_residue(0.0, 0.0, hot(distribution="maxwellian"))
    with pytest.raises(ParameterError):
        chi_hot_residue(0.0, 0.0, beam())


def test_quadrature_narrow_distribution_approaches_beam():
    """Velocities scaled by v_T: a width of 1e-3 v_T is emulated by shrinking k_d."""
    p = hot(doppler=0.1, delta_d=0.0, c_over_vT=1e6)
    b = params_from_mapping({**FIG, "doppler": 0.1, "delta_d": 0.0, "density_ratio": 1.1,
                             "medium": "beam", "beam_velocity": 0.0})
    for dw in (0.0, 0.003, 0.02):
        q = chi_hot_quadrature(dw, 0.0, p, distribution="maxwellian")
        r = chi_beam(dw, 0.0, b)
        assert abs(q - r) <= 0.02 * abs(r)


def test_quadrature_maxwellian_passive_and_close_to_lorentzian_shape(fig3b):
    m = hot(distribution="maxwellian")
    val = chi_hot_quadrature(-100.0, 0.0, m)
    assert val.imag < 0


def test_quadrature_reports_failure(fig3b):
    with pytest.raises(QuadratureError):
        chi_hot_quadrature(-100.0, 0.0, fig3b, limit=3, rtol_accept=1e-16)


# ---------------------------------------------------------------------------
# EIT-exciton approximation
# ---------------------------------------------------------------------------

def test_eit_approx_center_value(fig3b):
    dp = derive(fig3b)
    val = chi_eit_approx(-100.0, 0.0, fig3b)
    expect = -1j * fig3b.coupling * dp.N_prime_ratio * 1e-3 / (dp.gammaG * dp.gamma_k)
    assert val == pytest.approx(expect, rel=1e-13)
    assert val.imag < 0


def test_eit_approx_depends_on_exciton_detuning_only(fig3b):
    dk = 0.004
    # Re(omega - omega_k) = 0 at d_omega = delta_d (1 + dk / k_d)
    w = -100.0 * (1 + dk / 100.0)
    a = chi_eit_approx(w + 0.001, dk, fig3b)
    dp = derive(fig3b)
    shift = 1j * (dp.gamma_k_at(dk) - dp.gamma_k)
    b = chi_eit_approx(-100.0 + 0.001 - shift, 0.0, fig3b)
    assert a == pytest.approx(b, rel=1e-12)


def test_eit_approx_slope_gives_exciton_velocity(fig3b):
    """Temporal slope at the polariton root d_omega = delta_d + i gamma_cb."""
    dp = derive(fig3b)
    w0 = -100.0 + 1e-3j
    h = 1e-7
    d = (chi_eit_approx(w0 + h, 0.0, fig3b) - chi_eit_approx(w0 - h, 0.0, fig3b)) / (2 * h)
    vg = 1.0 / (2 * math.pi * 100.0 * d)
    assert vg.real == pytest.approx(dp.vg_tilde_prime_exciton, rel=0.01)


def test_chi_dispatch(fig3b):
    assert chi(-100.0, 0.0, fig3b) == chi_hot_residue(-100.0, 0.0, fig3b)
    empty = hot(density_ratio=0.0)
    assert chi(-100.0, 0.0, empty) == 0
    with pytest.raises(ParameterError):
        chi(0.0, 0.0, fig3b, "nope")


def test_velocity_class_vectorised(fig3b):
    v = np.linspace(-2, 2, 7)
    vec = chi_velocity_class(-100.0, 0.001, v, fig3b)
    one = [chi_velocity_class(-100.0, 0.001, x, fig3b) for x in v]
    np.testing.assert_allclose(vec, one, rtol=1e-15)
