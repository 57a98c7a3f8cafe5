"""Probe susceptibility of the driven Lambda medium.

Four models share the call signature ``chi(d_omega, d_k, params)``:

``beam``        mono-velocity beam (needs a ``Beam`` medium)
``residue``     exact hot-gas result from the two velocity-plane residues
``quadrature``  direct velocity integral, the numerical oracle
``eit``         two-term EIT-exciton approximation

``d_omega`` is the probe detuning from the a-b line and ``d_k`` the
wavenumber offset from ``k_d + omega_cb / c``. Arguments broadcast as
numpy arrays; ``d_omega`` may be complex (the dispersion solvers need it).
An absorbing medium has ``Im chi < 0`` in the ``exp(i omega t - i k z)``
convention used here.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .params import (
    LORENTZIAN,
    MAXWELLIAN,
    AtomParams,
    Beam,
    DriveParams,
    HotGas,
    ModelParams,
    ParameterError,
    derive,
    velocity_distribution,
)

POPULATION_MODELS = ("three_level", "reduced")


class QuadratureError(RuntimeError):
    """Velocity integral did not reach the requested accuracy."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


@dataclass(frozen=True)
class ProbePoint:
    d_omega: complex
    d_k: float


@dataclass(frozen=True)
class Populations:
    rho_aa: np.ndarray
    rho_bb: np.ndarray
    rho_cc: np.ndarray

    @property
    def n_ab(self):
        return self.rho_aa - self.rho_bb

    @property
    def n_ca(self):
        return self.rho_cc - self.rho_aa


# ---------------------------------------------------------------------------
# drive-only steady state
# ---------------------------------------------------------------------------

def populations_steady_state(v, drive: DriveParams, atom: AtomParams,
                             model: str = "three_level") -> Populations:
    """Drive-only steady state of one velocity class.

    ``three_level``: level a decays at rate gamma, a fraction ``branching``
    into b and the rest into c; b and c exchange population at gamma_cb/2
    each way; the drive couples a-c with one-photon detuning
    ``delta_d + k_d v``. With the a-c coherence eliminated the drive acts
    as a symmetric rate ``W = 2 Omega^2 gamma / (gamma^2 + Delta_1^2)``
    and the remaining rate equations are solved in closed form.

    ``reduced``: the ``rho_aa -> 0`` limit of the same model with equal
    branching, ``rho_cc = 1 / (2 (1 + s))``.
    """
    v = np.asarray(v, dtype=float)
    gam, gcb, om = atom.gamma, atom.gamma_cb, drive.omega_rabi
    d1 = drive.delta_d + drive.doppler * v
    lor = gam / (gam**2 + d1**2)
    if model == "three_level":
        W = 2.0 * om**2 * lor
        u = W / (gam + W)
        r = 0.5 * gcb
        rho_cc = 1.0 / (2.0 + u + atom.branching * gam * u / r)
        rho_aa = u * rho_cc
        rho_bb = 1.0 - rho_aa - rho_cc
    elif model == "reduced":
        s = om**2 * lor / gcb
        rho_cc = 0.5 / (1.0 + s)
        rho_aa = np.zeros_like(rho_cc)
        rho_bb = 1.0 - rho_cc
    else:
        raise ParameterError(f"unknown population model {model!r}")
    return Populations(rho_aa, rho_bb, rho_cc)


def drive_coherence(v, drive: DriveParams, atom: AtomParams,
                    model: str = "three_level"):
    """Steady-state a-c coherence rho_ac of the drive-only problem."""
    pops = populations_steady_state(v, drive, atom, model)
    d1 = drive.delta_d + drive.doppler * np.asarray(v, dtype=float)
    return -1j * drive.omega_rabi * pops.n_ca / (atom.gamma + 1j * d1)


# ---------------------------------------------------------------------------
# mono-velocity beam
# ---------------------------------------------------------------------------

def chi_velocity_class(d_omega, d_k, v, params: ModelParams, pops: Populations | None = None,
                       population_model: str = "three_level"):
    """Response of atoms moving with velocity ``v`` (the beam formula)."""
    a, d = params.atom, params.drive
    v = np.asarray(v, dtype=float)
    if pops is None:
        pops = populations_steady_state(v, d, a, population_model)
    g = params.coupling
    k = d.doppler + d_k
    d1 = d.delta_d + d.doppler * v
    gac_conj = a.gamma - 1j * d1
    gab = a.gamma + 1j * (d_omega + k * v)
    gcb = a.gamma_cb + 1j * (d_omega - d.delta_d + d_k * v)
    num = pops.n_ab * gcb + d.omega_rabi**2 * pops.n_ca / gac_conj
    return 1j * g * num / (gab * gcb + d.omega_rabi**2)


def chi_beam(d_omega, d_k, params: ModelParams, pops: Populations | None = None,
             population_model: str = "three_level"):
    if not isinstance(params.medium, Beam):
        raise ParameterError("chi_beam needs a Beam medium")
    return chi_velocity_class(d_omega, d_k, params.medium.v, params, pops, population_model)


# ---------------------------------------------------------------------------
# hot gas: residue formula
# ---------------------------------------------------------------------------

def _abs_dk(d_k, dk_mode):
    d_k = np.asarray(d_k)
    if dk_mode == "abs":
        # analytic continuation of |dk| off the real axis
        return np.where(np.real(d_k) >= 0, d_k, -d_k)
    if dk_mode == "signed":
        return d_k
    raise ParameterError(f"unknown dk_mode {dk_mode!r}")


def chi_hot_residue(d_omega, d_k, params: ModelParams, dk_mode: str = "abs"):
    """Lorentzian hot gas summed over the residues at v1 and v2.

    ``dk_mode="abs"`` keeps ``|dk|`` in the c-b decay terms. ``"signed"``
    replaces it by ``dk`` and is offered only as a diagnostic variant.
    """
    if not isinstance(params.medium, HotGas):
        raise ParameterError("chi_hot_residue needs a HotGas medium")
    if params.medium.distribution != LORENTZIAN:
        raise ParameterError("the residue formula holds for the Lorentzian only; use quadrature")
    a, d = params.atom, params.drive
    dp = derive(params)
    gam, gcb, om, D, dd = a.gamma, a.gamma_cb, d.omega_rabi, d.doppler, d.delta_d
    G, gG = dp.G, dp.gammaG
    g = params.coupling
    d_omega = np.asarray(d_omega)
    k = D + np.asarray(d_k)
    adk = _abs_dk(d_k, dk_mode)
    om2 = om**2

    R1 = om2 / (gam**2 + (dd - 1j * D) ** 2)
    R2 = om2 / (D**2 + (dd + 1j * gG) ** 2)
    gab1 = gam + k + 1j * d_omega
    gab2 = gam * (1.0 + G * k / D) + 1j * (d_omega - k * dd / D)
    gac1 = gam + D + 1j * dd
    gcb1 = gcb + adk + 1j * (d_omega - dd)
    gcb2 = gcb + adk * gG / D + 1j * (d_omega - dd - np.asarray(d_k) * dd / D)
    eta1 = (R1 * gac1 - gcb1 * (1.0 + 2.0 * gam * R1 / gcb)) / (
        1.0 + gam**2 * (G**2 - 1.0) * R1 / om2)
    eta2 = D * R2 * (om2 / (G - 1.0) - gam * gcb2) / (gcb * gam * G)
    return 0.5j * g * (eta1 / (om2 + gab1 * gcb1) + eta2 / (om2 + gab2 * gcb2))


# ---------------------------------------------------------------------------
# hot gas: velocity quadrature
# ---------------------------------------------------------------------------

def _real_breakpoints(d_omega, d_k, params: ModelParams):
    """Velocities where the integrand has narrow structure."""
    a, d = params.atom, params.drive
    w = float(np.real(d_omega))
    k = d.doppler + d_k
    pts = [-d.delta_d / d.doppler, -w / k]
    if d_k != 0:
        pts.append(-(w - d.delta_d) / d_k)
    # Re(Gamma_ab Gamma_cb + Omega^2) = 0 with Gamma_ab = gamma + i(w + k v),
    # Gamma_cb = gamma_cb + i(w - dd + dk v)
    q = np.array([k * d_k, k * (w - d.delta_d) + d_k * w, w * (w - d.delta_d)])
    q[2] -= a.gamma * a.gamma_cb + d.omega_rabi**2
    if q[0] != 0:
        roots = np.roots(q)
    elif q[1] != 0:
        roots = np.array([-q[2] / q[1]])
    else:
        roots = np.array([])
    pts.extend(r.real for r in roots if abs(r.imag) < 1e-12 * max(1.0, abs(r.real)))
    return [p for p in pts if np.isfinite(p)]


def chi_hot_quadrature(d_omega, d_k, params: ModelParams, distribution: str | None = None,
                       population_model: str = "three_level", epsrel: float = 1e-10,
                       limit: int = 2000, rtol_accept: float = 1e-6):
    """Velocity average of the single-class response, integrated numerically.

    The Lorentzian is integrated over the whole line after ``v = tan(theta)``;
    the Maxwellian over ``[-V, V]`` with ``V = max(10, |v_d| + 10 gamma G / k_d)``.
    Scalar inputs only.
    """
    if distribution is None:
        distribution = params.distribution
    d_k = float(d_k)
    dp = derive(params)
    pts = _real_breakpoints(d_omega, d_k, params)

    def integrand_v(v):
        return chi_velocity_class(d_omega, d_k, v, params, population_model=population_model)

    if distribution == LORENTZIAN:
        lo, hi = -0.5 * math.pi, 0.5 * math.pi
        func = lambda th: complex(integrand_v(math.tan(th))) / math.pi
        pts = [math.atan(p) for p in pts]
    elif distribution == MAXWELLIAN:
        V = max(10.0, abs(dp.v_d) + 10.0 * dp.gammaG / params.drive.doppler)
        lo, hi = -V, V
        func = lambda v: complex(integrand_v(v)) * float(velocity_distribution(v, MAXWELLIAN))
    else:
        raise ParameterError(f"unknown distribution {distribution!r}")
    pts = sorted({p for p in pts if lo < p < hi})

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        val, err = integrate.quad(func, lo, hi, points=pts or None, complex_func=True,
                                  limit=limit, epsabs=0.0, epsrel=epsrel)
    achieved = abs(err)
    if achieved > rtol_accept * abs(val) + 1e-12:
        notes = "; ".join(str(w.message).split("\n")[0] for w in caught)
        raise QuadratureError(f"quadrature error {achieved:.3g} exceeds tolerance {notes}".strip(),
                              achieved)
    return val


def chi_two_level_doppler(d_omega, d_k, params: ModelParams):
    """Undriven Lorentzian-averaged response, ``-i g / (2 Gamma_ab1)``."""
    gab1 = params.atom.gamma + (params.drive.doppler + np.asarray(d_k)) + 1j * np.asarray(d_omega)
    return -0.5j * params.coupling / gab1


# ---------------------------------------------------------------------------
# EIT-exciton approximation
# ---------------------------------------------------------------------------

def exciton_frequency(d_k, params: ModelParams):
    """Complex exciton detuning ``omega_k - omega_ab``."""
    dp = derive(params)
    dd = params.drive.delta_d
    d_k = np.asarray(d_k)
    return dd + dd * d_k / params.drive.doppler + 1j * dp.gamma_k_at(d_k)


def chi_eit_approx(d_omega, d_k, params: ModelParams):
    dp = derive(params)
    gam, om = params.atom.gamma, params.drive.omega_rabi
    x = np.asarray(d_omega) - exciton_frequency(d_k, params)
    pref = params.coupling * dp.N_prime_ratio / dp.gammaG
    return pref * (om**2 / (gam * (1.0 + dp.G) * x) - 1j)


def _quad_vectorized(d_omega, d_k, params):
    d_omega, d_k = np.broadcast_arrays(np.asarray(d_omega), np.asarray(d_k, dtype=float))
    out = np.empty(d_omega.shape, dtype=complex)
    for idx in np.ndindex(d_omega.shape):
        out[idx] = chi_hot_quadrature(d_omega[idx], d_k[idx], params)
    return out if out.shape else out[()]


MODELS = {
    "beam": chi_beam,
    "residue": chi_hot_residue,
    "quadrature": _quad_vectorized,
    "eit": chi_eit_approx,
}


def get_model(name: str):
    try:
        return MODELS[name]
    except KeyError:
        raise ParameterError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None


def default_model(params: ModelParams) -> str:
    return "beam" if params.is_beam else "residue"


def chi(d_omega, d_k, params: ModelParams, model: str | None = None):
    if params.coupling == 0.0:
        return np.zeros(np.broadcast(np.asarray(d_omega), np.asarray(d_k)).shape, complex)[()]
    return get_model(model or default_model(params))(d_omega, d_k, params)
