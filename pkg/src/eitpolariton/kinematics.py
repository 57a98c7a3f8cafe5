"""Drive depletion along a cell and the resulting slow-pulse kinematics.

The drive intensity obeys ``d(Omega^2)/dz = -kappa_d(Omega) Omega^2`` with
``kappa_d = 4 pi k_d |Im chi_d|``, where ``chi_d`` is the velocity-averaged
drive-only response of the a-c transition (equal a-b and a-c dipoles are
assumed). The local group velocity follows adiabatically from ``Omega(z)``
at fixed density, and the pulse centre moves as ``dz_p/dt = v_g(z_p)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy import integrate, interpolate, optimize

from .dispersion import eit_center, group_velocity_numeric, vg_resonance
from .params import (
    LORENTZIAN,
    ModelParams,
    ParameterError,
    derive,
    distribution_beta,
    velocity_distribution,
)
from .susceptibility import populations_steady_state


@dataclass(frozen=True)
class CellSpec:
    length: float
    omega0: float
    n_z: int = 401
    z0: float = 0.0
    duration: float = 1.0

    def __post_init__(self):
        if not self.length > 0:
            raise ParameterError("cell length must be > 0")
        if not self.omega0 > 0:
            raise ParameterError("omega0 must be > 0")
        if self.n_z < 2:
            raise ParameterError("n_z must be >= 2")

    @property
    def z_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_z)


@dataclass
class DriveProfile:
    z: np.ndarray
    omega: np.ndarray
    threshold_z: Optional[float] = None
    interpolant: Optional[Callable] = None

    def __call__(self, z):
        if self.interpolant is not None:
            return self.interpolant(z)
        return np.interp(z, self.z, self.omega)


@dataclass
class VgProfile:
    z: np.ndarray
    vg: np.ndarray
    freeze_point: Optional[float]
    interpolant: Callable = field(repr=False, default=None)

    def __call__(self, z):
        return self.interpolant(z)


@dataclass
class KinematicsTrace:
    omega_of_z: DriveProfile
    vg_of_z: VgProfile
    times: np.ndarray
    positions: np.ndarray
    freeze_point: Optional[float]
    snapshot_z: np.ndarray
    snapshots: np.ndarray
    widths: np.ndarray
    amplitudes: np.ndarray
    flags: list = field(default_factory=list)

    @property
    def trajectory(self):
        return list(zip(self.times.tolist(), self.positions.tolist()))


# ---------------------------------------------------------------------------
# drive profile
# ---------------------------------------------------------------------------

def drive_absorption(omega_rabi: float, params: ModelParams, population_model: str = "three_level") -> float:
    """Intensity absorption coefficient of the drive (units of gamma / v_T)."""
    p = params.with_omega(omega_rabi)
    a, d = p.atom, p.drive
    g = p.coupling
    if g == 0.0:
        return 0.0
    dist = p.distribution
    vd = -d.delta_d / d.doppler

    def integrand(v):
        pops = populations_steady_state(v, d, a, population_model)
        d1 = d.delta_d + d.doppler * v
        return float(pops.n_ca * a.gamma / (a.gamma**2 + d1**2))

    if dist == LORENTZIAN:
        f = lambda th: integrand(math.tan(th)) / math.pi
        val, _ = integrate.quad(f, -0.5 * math.pi, 0.5 * math.pi, points=[math.atan(vd)],
                                limit=500, epsabs=0.0, epsrel=1e-10)
    else:
        V = max(10.0, abs(vd) + 10.0)
        f = lambda v: integrand(v) * float(velocity_distribution(v, dist))
        val, _ = integrate.quad(f, -V, V, points=[vd], limit=500, epsabs=0.0, epsrel=1e-10)
    return 4.0 * math.pi * d.doppler * g * val


def drive_profile(cell: CellSpec, params: ModelParams, kappa=None,
                  population_model: str = "three_level") -> DriveProfile:
    """Integrate the drive attenuation through the cell.

    ``kappa`` overrides the absorption law: a constant or a callable of Omega.
    """
    if params.is_beam:
        raise ParameterError("drive_profile applies to the hot gas")
    if kappa is None:
        kappa_of = lambda om: drive_absorption(om, params, population_model)
    elif callable(kappa):
        kappa_of = kappa
    else:
        kappa_of = lambda om, k=float(kappa): k

    def rhs(z, y):
        # y = ln Omega^2 keeps Omega positive
        om = math.exp(0.5 * y[0])
        return [-kappa_of(om)]

    z = cell.z_grid
    sol = integrate.solve_ivp(rhs, (0.0, cell.length), [2.0 * math.log(cell.omega0)],
                              method="DOP853", rtol=1e-10, atol=1e-12, dense_output=True)
    if not sol.success:
        raise RuntimeError(f"drive integration failed: {sol.message}")
    omega = np.exp(0.5 * sol.sol(z)[0])
    omega = np.minimum.accumulate(omega)
    thr = math.sqrt(params.atom.gamma_cb * params.atom.gamma)
    threshold_z = None
    if omega[-1] < thr:
        threshold_z = float(optimize.brentq(lambda x: math.exp(0.5 * sol.sol(x)[0]) - thr,
                                            0.0, cell.length))
    interp = lambda x: np.exp(0.5 * sol.sol(np.asarray(x, dtype=float))[0])
    return DriveProfile(z, omega, threshold_z, interp)


def drive_profile_from_table(z, omega) -> DriveProfile:
    z = np.asarray(z, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if z.ndim != 1 or z.shape != omega.shape or len(z) < 2:
        raise ParameterError("Omega table needs two equal-length columns with >= 2 rows")
    if np.any(np.diff(z) <= 0):
        raise ParameterError("z column must be strictly increasing")
    if np.any(omega <= 0):
        raise ParameterError("Omega must be positive")
    spline = interpolate.PchipInterpolator(z, omega, extrapolate=True)
    return DriveProfile(z, omega, None, spline)


def load_omega_table(path) -> DriveProfile:
    """Two-column text table ``z  Omega``; ``#`` starts a comment."""
    data = np.loadtxt(Path(path), comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ParameterError("Omega table must have exactly two columns")
    return drive_profile_from_table(data[:, 0], data[:, 1])


# ---------------------------------------------------------------------------
# local group velocity
# ---------------------------------------------------------------------------

def local_vg(omega_rabi: float, params: ModelParams, method: str = "closed") -> float:
    p = params.with_omega(float(omega_rabi))
    if p.coupling == 0.0:
        return p.drive.c_over_vT
    if method == "closed":
        return vg_resonance(p).vg
    if method == "numeric":
        c = eit_center(p)
        return group_velocity_numeric(c.d_omega, c.d_k, p).vg
    raise ParameterError(f"unknown vg method {method!r}")


def vg_profile(omega_of_z: DriveProfile, params: ModelParams, method: str = "closed",
               n_nodes: Optional[int] = None) -> VgProfile:
    """Local group velocity along the cell and the freezing point, if any.

    With ``method="numeric"`` the branch is solved on ``n_nodes`` points
    (default 25) and interpolated.
    """
    z = np.asarray(omega_of_z.z, dtype=float)
    if method == "numeric":
        nodes = np.linspace(z[0], z[-1], n_nodes or 25)
    else:
        nodes = z
    vals = np.array([local_vg(om, params, method) for om in omega_of_z(nodes)])
    if len(nodes) != len(z):
        spline = interpolate.CubicSpline(nodes, vals)
    elif method == "closed" and omega_of_z.interpolant is not None:
        spline = lambda x: np.vectorize(lambda q: local_vg(float(omega_of_z(q)), params, method))(x)
    else:
        spline = interpolate.CubicSpline(nodes, vals)
    vg = np.asarray(spline(z), dtype=float)
    freeze = None
    sign = np.sign(vg)
    idx = np.nonzero(sign[:-1] * sign[1:] <= 0)[0]
    if len(idx):
        i = int(idx[0])
        if vg[i] == 0.0:
            freeze = float(z[i])
        else:
            freeze = float(optimize.brentq(lambda x: float(spline(x)), z[i], z[i + 1], xtol=1e-12))
    return VgProfile(z, vg, freeze, spline)


# ---------------------------------------------------------------------------
# pulse trajectory
# ---------------------------------------------------------------------------

def _integrate_position(vg_fun, z0, times, z_star, rtol, atol, t_start=0.0):
    times = np.asarray(times, dtype=float)
    span = (t_start, float(times[-1])) if times[-1] != t_start else None
    if span is None:
        return np.full(len(times), float(z0))
    if z_star is not None and z0 < z_star:
        # u = ln(z* - z) removes the approach to z* from the integrator
        def rhs(t, y):
            zz = z_star - math.exp(y[0])
            return [-float(vg_fun(zz)) / math.exp(y[0])]
        y0 = math.log(z_star - z0)
        sol = integrate.solve_ivp(rhs, span, [y0], method="DOP853", t_eval=times,
                                  rtol=rtol, atol=atol)
        if not sol.success:
            raise RuntimeError(f"trajectory integration failed: {sol.message}")
        return z_star - np.exp(sol.y[0])
    sol = integrate.solve_ivp(lambda t, y: [float(vg_fun(y[0]))], span, [z0], method="DOP853",
                              t_eval=times, rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"trajectory integration failed: {sol.message}")
    return sol.y[0]


def integrate_trajectory(vg_fun, z0, times, z_star=None, rtol=1e-10, atol=1e-12):
    """Positions at ``times`` (sorted, starting at or after 0) of ``dz/dt = vg(z)``."""
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0):
        raise ParameterError("times must be non-decreasing")
    if z_star is not None and z0 >= z_star:
        z_star = None
    t_eval = times if times[0] == 0.0 else np.concatenate([[0.0], times])
    z = _integrate_position(vg_fun, z0, t_eval, z_star, rtol, atol)
    z[t_eval == 0.0] = z0
    return z if times[0] == 0.0 else z[1:]


def integrate_backward(vg_fun, z_end, t_end, z_star=None, rtol=1e-10, atol=1e-12):
    """Position at t = 0 given the position at ``t_end``."""
    if z_star is not None and z_end < z_star:
        def rhs(t, y):
            zz = z_star - math.exp(y[0])
            return [-float(vg_fun(zz)) / math.exp(y[0])]
        sol = integrate.solve_ivp(rhs, (t_end, 0.0), [math.log(z_star - z_end)],
                                  method="DOP853", rtol=rtol, atol=atol)
        return float(z_star - math.exp(sol.y[0][-1]))
    sol = integrate.solve_ivp(lambda t, y: [float(vg_fun(y[0]))], (t_end, 0.0), [z_end],
                              method="DOP853", rtol=rtol, atol=atol)
    return float(sol.y[0][-1])


def pulse_trajectory(cell: CellSpec, vg_of_z: VgProfile, times, params: Optional[ModelParams] = None,
                     omega_of_z: Optional[DriveProfile] = None, rtol: float = 1e-10) -> KinematicsTrace:
    """Geometric-optics transport of the pulse centre, width and amplitude.

    The spatial width is ``v_g(z_p) * duration`` and the amplitude decays as
    ``exp(-gamma_cb t)``.
    """
    times = np.asarray(times, dtype=float)
    flags = []
    z_star = vg_of_z.freeze_point
    if z_star is not None and cell.z0 >= z_star:
        flags.append("pulse starts beyond the freezing point")
    pos = integrate_trajectory(vg_of_z, cell.z0, times, z_star, rtol=rtol, atol=1e-12 * cell.length)
    if z_star is not None and np.any(pos >= z_star):
        flags.append("trajectory reached the freezing point to machine precision")
        pos = np.minimum(pos, np.nextafter(z_star, -np.inf))
    gcb = params.atom.gamma_cb if params is not None else 0.0
    widths = np.abs(np.asarray(vg_of_z(pos), dtype=float)) * cell.duration
    amps = np.exp(-gcb * times)
    zs = cell.z_grid
    snaps = np.zeros((len(times), len(zs)))
    for i, (zp, w, a) in enumerate(zip(pos, widths, amps)):
        if w > 0:
            snaps[i] = a * np.exp(-(((zs - zp) / w) ** 2))
    if omega_of_z is None:
        omega_of_z = DriveProfile(zs, np.full(len(zs), cell.omega0))
    return KinematicsTrace(omega_of_z, vg_of_z, times, pos, z_star, zs, snaps, widths, amps, flags)


def snapshot_times(cell: CellSpec, vg_of_z: VgProfile, m_max: int = 3) -> np.ndarray:
    """t = m tau with tau = 3 L / (2 v_g(0))."""
    v0 = float(vg_of_z(0.0))
    if not v0 > 0:
        raise ParameterError("v_g(0) must be positive to define tau")
    tau = 1.5 * cell.length / v0
    return tau * np.arange(m_max + 1)


def omega0_for_freeze(params: ModelParams, length: float, fraction: float = 0.6,
                      kappa=None, hi: float = 20.0) -> float:
    """Entrance Rabi frequency that puts the freezing point at ``fraction * length``."""
    p = params.with_fixed_coupling()

    def z_star(om0):
        cell = CellSpec(length=length, omega0=om0, n_z=201)
        prof = drive_profile(cell, p, kappa)
        vg = vg_profile(prof, p)
        return vg.freeze_point

    om_freeze = freeze_omega(p)
    if om_freeze is None:
        raise ParameterError("the drifting class cannot freeze (need N > 0 and v_d > 0)")

    def f(om0):
        zs = z_star(om0)
        return (zs if zs is not None else length * 2.0) - fraction * length

    lo = om_freeze * (1.0 + 1e-9)
    return float(optimize.brentq(f, lo, hi, xtol=1e-10, rtol=1e-10))


def freeze_omega(params: ModelParams) -> Optional[float]:
    """Rabi frequency at which the resonance group velocity vanishes at fixed density.

    N_cr is proportional to Omega, so ``v_g = beta / (nu F(v_d)) - v_d``
    crosses zero at ``Omega = nu Omega F(v_d) v_d / beta``.
    """
    dp = derive(params)
    if dp.v_d <= 0 or dp.Ncr_ratio == 0:
        return None
    F = float(velocity_distribution(dp.v_d, params.distribution))
    return params.drive.omega_rabi * dp.Ncr_ratio * F * dp.v_d / distribution_beta(params.distribution)
