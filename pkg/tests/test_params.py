import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eitpolariton.params import (
    AtomParams,
    Beam,
    DriveParams,
    HotGas,
    ModelParams,
    ParameterError,
    RegimeError,
    SiReference,
    check_regime,
    derive,
    distribution_beta,
    from_si,
    load_params,
    params_from_mapping,
    to_mapping,
    to_si,
    velocity_distribution,
)
from scipy import integrate

from conftest import FIG, hot


def test_power_broadening_factor():
    dp = derive(params_from_mapping({**FIG, "density_ratio": 1.0}))
    assert dp.G == pytest.approx(math.sqrt(63.5), rel=1e-14)
    assert dp.G == pytest.approx(7.968688725254614, rel=1e-12)


def test_zero_drive_limit():
    dp = derive(params_from_mapping({**FIG, "omega_rabi": 1e-9, "density_ratio": 1.0}))
    assert dp.G == pytest.approx(1.0, abs=1e-12)
    assert dp.gammaG == pytest.approx(1.0, abs=1e-12)


def test_lorentzian_beta():
    assert distribution_beta("lorentzian") * 2 * math.pi == 1.0
    v = np.linspace(0, 5, 200001)
    assert distribution_beta("lorentzian") == pytest.approx(np.max(v * velocity_distribution(v)), rel=1e-9)
    assert distribution_beta("maxwellian") == pytest.approx(
        np.max(v * velocity_distribution(v, "maxwellian")), rel=1e-9)


@pytest.mark.parametrize("dist", ["lorentzian", "maxwellian"])
def test_distributions_normalised(dist):
    if dist == "lorentzian":
        val, _ = integrate.quad(lambda v: velocity_distribution(v, dist), -np.inf, np.inf)
    else:
        val, _ = integrate.quad(lambda v: velocity_distribution(v, dist), -20, 20)
    assert val == pytest.approx(1.0, rel=1e-10)


def test_derived_relations(fig3b):
    dp = derive(fig3b)
    a, d = fig3b.atom, fig3b.drive
    assert dp.v_d == 1.0
    assert dp.gamma_k == pytest.approx(a.gamma_cb + d.omega_rabi**2 / (1 + dp.G), rel=1e-15)
    assert dp.gamma_k == pytest.approx(a.gamma_cb * dp.G, rel=1e-13)
    assert dp.gamma_k_at(0.0) == dp.gamma_k
    np_ratio = dp.gammaG * d.doppler / (d.doppler**2 + d.delta_d**2)
    assert dp.N_prime_ratio == pytest.approx(np_ratio, rel=1e-14)
    assert 0 < dp.N_prime_ratio < 1
    assert dp.Ncr_ratio == pytest.approx(1.1, rel=1e-14)
    # critical coupling Omega sqrt(gamma_cb/gamma) / pi for the Lorentzian
    assert dp.coupling_cr == pytest.approx(0.25 * math.sqrt(1e-3) / math.pi, rel=1e-14)
    # drifting-beam slow-light velocity
    vgp = d.omega_rabi**2 * (d.doppler**2 + d.delta_d**2) / (
        2 * math.pi * dp.coupling_g * dp.gammaG * d.doppler**2)
    assert dp.vg_tilde_prime == pytest.approx(vgp, rel=1e-14)
    assert dp.vg_tilde_prime == pytest.approx(0.9019043069688011, rel=1e-12)
    assert dp.vg_tilde_prime_exciton == pytest.approx(vgp * dp.G / (1 + dp.G), rel=1e-14)
    assert dp.ddk_eit_prime / dp.dk_eit_prime == pytest.approx(math.sqrt(a.gamma_cb / dp.gamma_k))


@settings(max_examples=60, deadline=None)
@given(nu=st.floats(0.05, 5), om=st.floats(0.04, 2), scale=st.floats(0.1, 10))
def test_density_scale_consistency(nu, om, scale):
    p = params_from_mapping({**FIG, "omega_rabi": om, "density_ratio": nu})
    q = params_from_mapping({**FIG, "omega_rabi": om, "coupling_g": p.coupling})
    assert derive(q).Ncr_ratio == pytest.approx(nu, rel=1e-12)
    assert derive(p).vg_tilde_prime == pytest.approx(derive(q).vg_tilde_prime, rel=1e-12)
    r = params_from_mapping({**FIG, "omega_rabi": om, "density_ratio": nu * scale})
    assert derive(r).coupling_g == pytest.approx(scale * p.coupling, rel=1e-12)


@settings(max_examples=80, deadline=None)
@given(gcb=st.floats(1e-5, 0.5), om=st.floats(1e-3, 5), dd=st.floats(-500, 500),
       nu=st.floats(0, 10), v=st.floats(-5, 5))
def test_regime_report_total(gcb, om, dd, nu, v):
    for medium in ("hotgas", "beam"):
        p = params_from_mapping({"gamma_cb": gcb, "omega_rabi": om, "delta_d": dd,
                                 "density_ratio": nu, "medium": medium, "beam_velocity": v})
        rep = check_regime(p)
        assert len(rep.conditions) == 6
        for c in rep.conditions:
            assert math.isfinite(c.left) and math.isfinite(c.right)
        dp = derive(p)
        assert dp.G >= 1 and dp.gamma_k >= gcb


def test_regime_fig2():
    rep = check_regime(params_from_mapping({**FIG, "delta_d": 100.0, "density_ratio": 1.0}))
    c = rep["gammaG << k_d v_T"]
    assert c.satisfied and c.left == pytest.approx(7.9687, rel=1e-4)


def test_regime_threshold_marginal_and_resonant_drive():
    p = params_from_mapping({**FIG, "omega_rabi": math.sqrt(1e-3), "density_ratio": 1.0})
    c = check_regime(p)["Omega^2 > gamma_cb gamma"]
    assert not c.satisfied and c.marginal
    p = params_from_mapping({**FIG, "delta_d": 0.0, "density_ratio": 1.0})
    rep = check_regime(p)
    assert not rep["|delta_d| >> gammaG"].satisfied
    with pytest.raises(RegimeError):
        check_regime(p, strict=True)


@pytest.mark.parametrize("bad", [
    {"gamma_cb": 0.0}, {"gamma_cb": -1.0}, {"omega_rabi": 0.0}, {"doppler": -1.0},
    {"density_ratio": -1.0}, {"c_over_vT": 10.0}, {"medium": "plasma"},
    {"distribution": "uniform"}, {"beam_velocity": math.inf, "medium": "beam"},
    {"coupling_g": 1e-3, "density_ratio": 1.0}, {"unknown_key": 1.0},
])
def test_invalid_parameters(bad):
    with pytest.raises(ParameterError):
        params_from_mapping({**FIG, "density_ratio": 1.0, **bad} if "coupling_g" not in bad
                            else {**FIG, **bad})


def test_exactly_one_density_input():
    with pytest.raises(ParameterError):
        ModelParams(atom=AtomParams(), drive=DriveParams(), medium=HotGas())
    p = ModelParams(atom=AtomParams(coupling_g=2e-3), drive=DriveParams(), medium=Beam(v=0.5))
    assert p.coupling == 2e-3 and p.is_beam


def test_si_reference_critical_density():
    si = to_si(hot(delta_d=100.0, density_ratio=1.0))
    assert 1e10 <= si.N_cr <= 1e12
    assert si.doppler == pytest.approx(100.6, rel=2e-3)
    assert float(si.velocity(1.0)) == 240.0


def test_si_round_trip():
    p = hot()
    ref = SiReference()
    back = from_si(to_si(p, ref), ref)
    assert back["coupling_g"] == pytest.approx(p.coupling, rel=1e-12)
    si = to_si(p, ref)
    assert float(si.length_from_cm(si.length_cm(123.4))) == pytest.approx(123.4, rel=1e-12)


def test_si_thermal_velocity_from_temperature():
    ref = SiReference(v_thermal=None, mass_amu=87.0, temperature=350.0)
    assert 200 < ref.v_T < 300
    with pytest.raises(ParameterError):
        SiReference(v_thermal=None, temperature=None).v_T
    with pytest.raises(ParameterError):
        to_si(hot(), SiReference(wavelength=0.0))


def test_config_file_round_trip(tmp_path):
    p = hot(distribution="maxwellian")
    f = tmp_path / "model.cfg"
    f.write_text("# comment\n" + "\n".join(f"{k} = {v}" for k, v in to_mapping(p).items()) + "\n")
    q = load_params(f)
    assert q == p


def test_with_omega_keeps_density(fig3b):
    q = fig3b.with_omega(0.5)
    assert q.coupling == fig3b.coupling
    assert derive(q).Ncr_ratio == pytest.approx(0.55, rel=1e-12)
