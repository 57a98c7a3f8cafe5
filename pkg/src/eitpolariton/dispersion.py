"""Polariton dispersion: root finding, group velocity and closed forms.

The dispersion equation ``k c = omega n(omega, k)`` with ``n = 1 + 2 pi chi``
is written in detunings as

    f = (d_omega - delta_d - c d_k) + 2 pi (omega_ab + d_omega) chi(d_omega, d_k) = 0,

where ``omega_ab`` is taken as ``k_d c`` (the small ``omega_cb / c`` offset is
absorbed in ``d_k``). The initial-value problem solves for complex
``d_omega`` at real ``d_k``; the boundary-value problem for complex ``d_k``
at real ``d_omega``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .params import (
    LORENTZIAN,
    ModelParams,
    ParameterError,
    derive,
    distribution_beta,
    velocity_distribution,
)
from .susceptibility import chi as chi_eval, default_model

INITIAL_VALUE = "initial_value"
BOUNDARY_VALUE = "boundary_value"
RESIDUAL_BOUND = 1e-8


class RootFindError(RuntimeError):
    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class SingularDispersionError(ArithmeticError):
    pass


class ExpansionSingularError(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# residual and scales
# ---------------------------------------------------------------------------

def dispersion_residual(d_omega, d_k, params: ModelParams, model: str | None = None):
    d = params.drive
    c = d.c_over_vT
    chi = chi_eval(d_omega, d_k, params, model)
    return (d_omega - d.delta_d - c * d_k) + 2.0 * math.pi * (params.omega_ab + d_omega) * chi


def relative_residual(d_omega, d_k, params, model=None):
    """|k c - omega n| / |k c|."""
    kc = params.omega_ab + params.drive.c_over_vT * d_k
    return np.abs(dispersion_residual(d_omega, d_k, params, model)) / np.abs(kc)


def reference_velocity(params: ModelParams) -> float:
    """Slow-light velocity scale: beam ``vg_tilde`` or hot-gas ``vg_tilde_prime``."""
    dp = derive(params)
    return dp.vg_tilde if params.is_beam else dp.vg_tilde_prime


def characteristic_scales(params: ModelParams):
    """(frequency scale, wavenumber scale) of the EIT structure."""
    dp = derive(params)
    a, om = params.atom, params.drive.omega_rabi
    if params.is_beam:
        w = a.gamma_cb + om**2 / a.gamma
    else:
        w = dp.gamma_k
    v = reference_velocity(params)
    k = w / v if math.isfinite(v) else w / params.drive.c_over_vT
    return w, k


def _co_moving_center(d_k, params):
    """Real part of the exciton pole: delta_d - drift * d_k."""
    return params.drive.delta_d - derive(params).drift * d_k


# ---------------------------------------------------------------------------
# complex Newton
# ---------------------------------------------------------------------------

def newton(func, x0, scale, maxiter=50, xtol=1e-13):
    """Damped complex Newton with a central-difference derivative."""
    x = complex(x0)
    fx = func(x)
    h = 1e-6 * scale
    for _ in range(maxiter):
        dfx = (func(x + h) - func(x - h)) / (2.0 * h)
        if dfx == 0 or not np.isfinite(dfx):
            raise RootFindError("zero derivative", x)
        step = fx / dfx
        lam = 1.0
        for _ in range(20):
            xn = x - lam * step
            fn = func(xn)
            if np.isfinite(fn) and abs(fn) <= abs(fx) * (1.0 - 1e-4 * lam) + 1e-300:
                break
            lam *= 0.5
        else:
            xn = x - step
            fn = func(xn)
        done = abs(xn - x) <= xtol * (scale + abs(xn))
        x, fx = xn, fn
        if done or fx == 0:
            return x
    raise RootFindError("Newton did not converge in %d iterations" % maxiter, x)


def mobius_fit(u, values):
    """Fit ``A + B / (u - p)`` through three samples; returns (A, B, p)."""
    u = np.asarray(u, dtype=complex)
    y = np.asarray(values, dtype=complex)
    M = np.column_stack([u, y, np.ones(3)])
    A, p, C = np.linalg.solve(M, y * u)
    return A, C + A * p, p


def _mobius_roots(a, b, K, A, B, p):
    """Roots of a u + b + K (A + B / (u - p)) = 0."""
    return np.roots([a, b + K * A - a * p, -p * (b + K * A) + K * B])


# ---------------------------------------------------------------------------
# branches
# ---------------------------------------------------------------------------

@dataclass
class DispersionBranch:
    orientation: str
    inputs: np.ndarray
    outputs: np.ndarray
    model: str
    residuals: np.ndarray = field(default=None)

    def __len__(self):
        return len(self.inputs)

    @property
    def samples(self):
        return list(zip(self.inputs.tolist(), self.outputs.tolist()))

    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if len(self.residuals) else 0.0


def _initial_value_seed(d_k, params, model, scale):
    d = params.drive
    u0 = _co_moving_center(d_k, params)
    u = u0 + scale * np.array([-1.0, 0.0, 1.0])
    vals = chi_eval(u, d_k, params, model)
    A, B, p = mobius_fit(u, vals)
    K = 2.0 * math.pi * params.omega_ab
    roots = _mobius_roots(1.0, -d.delta_d - d.c_over_vT * d_k, K, A, B, p)
    return roots[np.argmin(np.abs(roots - p))]


def solve_initial_point(d_k, params, model=None, guesses=()):
    """Complex d_omega on the EIT branch at real d_k."""
    model = model or default_model(params)
    d = params.drive
    if params.coupling == 0.0:
        return complex(d.delta_d + d.c_over_vT * d_k)
    scale, _ = characteristic_scales(params)
    f = lambda w: dispersion_residual(w, d_k, params, model)
    last = None
    seeds = list(guesses)
    try:
        seeds.append(_initial_value_seed(d_k, params, model, scale))
    except np.linalg.LinAlgError:
        pass
    seeds.append(_co_moving_center(d_k, params) + 1j * params.atom.gamma_cb)
    for s in seeds:
        try:
            w = newton(f, s, scale)
        except RootFindError as exc:
            last = exc.last_iterate
            continue
        if abs(w - d.delta_d) < params.atom.gamma and w.imag > -scale:
            return w
        last = w
    raise RootFindError(f"no EIT-branch root at d_k={d_k!r}", last)


def solve_initial_value(dk_grid, params: ModelParams, model: str | None = None) -> DispersionBranch:
    """Solve d_omega(d_k) along a grid, continuing from point to point.

    The walk starts at the grid point nearest the middle of the grid and
    proceeds outward in both directions so that the branch is followed from
    its best-conditioned region.
    """
    model = model or default_model(params)
    dks = np.sort(np.asarray(dk_grid, dtype=float))
    out = np.empty(len(dks), dtype=complex)
    if len(dks) == 0:
        return DispersionBranch(INITIAL_VALUE, dks, out, model, np.empty(0))
    i0 = len(dks) // 2
    out[i0] = solve_initial_point(dks[i0], params, model)
    for direction in (1, -1):
        idx = range(i0 + direction, len(dks) if direction > 0 else -1, direction)
        for i in idx:
            prev = out[i - direction]
            guesses = [prev]
            j = i - 2 * direction
            if 0 <= j < len(dks) and (j - i0) * direction >= 0:
                pp = out[j]
                guesses.insert(0, prev + (prev - pp) * (dks[i] - dks[i - direction])
                               / (dks[i - direction] - dks[j]))
            out[i] = solve_initial_point(dks[i], params, model, guesses)
    res = relative_residual(out, dks, params, model)
    return DispersionBranch(INITIAL_VALUE, dks, out, model, np.asarray(res, dtype=float))


def solve_boundary_point(d_omega, params, model=None, guesses=()):
    """Complex d_k at real d_omega (the refractive root, continuous in v -> 0)."""
    model = model or default_model(params)
    d = params.drive
    c = d.c_over_vT
    if params.coupling == 0.0:
        return complex((d_omega - d.delta_d) / c)
    _, kscale = characteristic_scales(params)
    K = 2.0 * math.pi * (params.omega_ab + d_omega)
    f = lambda q: dispersion_residual(d_omega, q, params, model)
    seeds = list(guesses)
    # damped fixed point dk = (d_omega - delta_d + K chi) / c
    q = 0.0 + 0.0j
    for _ in range(60):
        qn = (d_omega - d.delta_d + K * chi_eval(d_omega, q, params, model)) / c
        if not np.isfinite(qn):
            break
        q = 0.5 * (q + qn)
    seeds.append(q)
    if params.is_beam:
        try:
            seeds.append(boundary_quadratic(params, dk0=0.0).evaluate(d_omega - d.delta_d))
        except (ExpansionSingularError, RootFindError):
            pass
    last = None
    for s in seeds:
        try:
            return newton(f, s, kscale)
        except RootFindError as exc:
            last = exc.last_iterate
    raise RootFindError(f"no root at d_omega={d_omega!r}", last)


def solve_boundary_value(domega_grid, params: ModelParams, model: str | None = None) -> DispersionBranch:
    model = model or default_model(params)
    dws = np.sort(np.asarray(domega_grid, dtype=float))
    out = np.empty(len(dws), dtype=complex)
    prev = None
    for i, w in enumerate(dws):
        out[i] = solve_boundary_point(w, params, model, [prev] if prev is not None else [])
        prev = out[i]
    res = relative_residual(dws, out, params, model)
    return DispersionBranch(BOUNDARY_VALUE, dws, out, model, np.asarray(res, dtype=float))


# ---------------------------------------------------------------------------
# group velocity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupVelocityPoint:
    vg: float
    vg_imag_ratio: float
    temporal: complex
    spatial: complex
    d_omega_dk: complex


def _richardson(fun, x, h):
    d1 = (fun(x + h) - fun(x - h)) / (2.0 * h)
    d2 = (fun(x + 0.5 * h) - fun(x - 0.5 * h)) / h
    return (4.0 * d2 - d1) / 3.0


def group_velocity_numeric(d_omega, d_k, params: ModelParams, model: str | None = None,
                           rel_step: float = 1e-4) -> GroupVelocityPoint:
    """``d omega / d k = (c - omega dn/dk) / (n + omega dn/domega)`` by finite differences.

    ``temporal`` is ``c / (n + omega dn/domega)`` and ``spatial`` is
    ``omega (dn/dk) / (n + omega dn/domega)``; ``vg = Re(temporal - spatial)``.
    """
    model = model or default_model(params)
    c = params.drive.c_over_vT
    if params.coupling == 0.0:
        return GroupVelocityPoint(c, 0.0, complex(c), 0j, complex(c))
    wscale, kscale = characteristic_scales(params)
    omega = params.omega_ab + d_omega
    n = lambda w, q: 1.0 + 2.0 * math.pi * chi_eval(w, q, params, model)
    dn_dw = _richardson(lambda w: n(w, d_k), d_omega, rel_step * wscale)
    dn_dk = _richardson(lambda q: n(d_omega, q), d_k, rel_step * kscale)
    denom = n(d_omega, d_k) + omega * dn_dw
    if not np.isfinite(denom) or abs(denom) < 1e-300:
        raise SingularDispersionError("n + omega dn/domega vanishes")
    temporal = c / denom
    spatial = omega * dn_dk / denom
    dwdk = temporal - spatial
    ratio = abs(dwdk.imag) / abs(dwdk.real) if dwdk.real != 0 else math.inf
    return GroupVelocityPoint(float(dwdk.real), ratio, complex(temporal), complex(spatial), complex(dwdk))


def branch_slope(d_k, params, model=None, h=None):
    """d(d_omega)/d(d_k) along the solved branch by central differences."""
    if h is None:
        h = 1e-3 * characteristic_scales(params)[1]
    w0 = solve_initial_point(d_k, params, model)
    wp = solve_initial_point(d_k + h, params, model, [w0])
    wm = solve_initial_point(d_k - h, params, model, [w0])
    return (wp - wm) / (2.0 * h)


# ---------------------------------------------------------------------------
# EIT resonance on the branch
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EitCenter:
    d_k: float
    d_omega: complex
    slope: complex


def eit_center(params: ModelParams, model: str | None = None, span: float = 8.0,
               npts: int = 81) -> EitCenter:
    """Minimum of Im d_omega along the initial-value branch.

    The non-resonant background shifts the dip away from ``d_k = 0``; its
    position is first estimated from a pole fit at ``d_k = 0`` and then
    refined by a bounded scalar minimisation.
    """
    model = model or default_model(params)
    wscale, kscale = characteristic_scales(params)
    dp = derive(params)
    # background shift: Re(K A) / c, from the pole fit at d_k = 0
    u0 = params.drive.delta_d
    u = u0 + wscale * np.array([-1.0, 0.0, 1.0])
    A, _, _ = mobius_fit(u, chi_eval(u, 0.0, params, model))
    k0 = 2.0 * math.pi * params.omega_ab * A.real / params.drive.c_over_vT
    width = math.sqrt(params.atom.gamma_cb / max(wscale, 1e-300)) * kscale
    if not params.is_beam:
        width = dp.ddk_eit_prime
    grid = k0 + width * np.linspace(-span, span, npts)
    br = solve_initial_value(grid, params, model)
    j = int(np.argmin(br.outputs.imag))
    if j in (0, npts - 1):
        raise RootFindError("EIT minimum not bracketed by the scan", br.outputs[j])
    cache = {"w": br.outputs[j]}

    def im_w(q):
        w = solve_initial_point(q, params, model, [cache["w"]])
        cache["w"] = w
        return w.imag

    r = optimize.minimize_scalar(im_w, bounds=(grid[j - 1], grid[j + 1]), method="bounded",
                                 options={"xatol": 1e-9 * width})
    q = float(r.x)
    w = solve_initial_point(q, params, model, [cache["w"]])
    slope = branch_slope(q, params, model)
    return EitCenter(q, w, slope)


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadraticExpansion:
    dk0: float
    kappa0: float
    xi: float
    alpha: float
    vg_tilde: float
    domega_eit: float
    ddomega_eit: float

    def evaluate(self, delta_omega):
        """Complex d_k at two-photon detuning ``delta_omega``."""
        a = self.alpha
        x = np.asarray(delta_omega)
        return self.dk0 + (x / self.vg_tilde - 1j * self.kappa0 - 1j * self.xi * (x / a) ** 2) / a


def boundary_quadratic(params: ModelParams, dk0: float | None = None) -> QuadraticExpansion:
    """Quadratic expansion of the boundary-value branch for the beam.

    ``dk0`` defaults to zero at ``delta_d = 0``; otherwise it is read off the
    numerical boundary solution at zero two-photon detuning.
    """
    if not params.is_beam:
        raise ParameterError("boundary_quadratic applies to the beam medium")
    dp = derive(params)
    if not math.isfinite(dp.vg_tilde):
        raise ExpansionSingularError("empty medium")
    if dp.alpha == 0.0:
        raise ExpansionSingularError("alpha = 0: beam moves at vg_tilde")
    if dk0 is None:
        if params.drive.delta_d == 0.0:
            dk0 = 0.0
        else:
            dk0 = float(np.real(solve_boundary_point(params.drive.delta_d, params, "beam")))
    a = params.atom
    om = params.drive.omega_rabi
    return QuadraticExpansion(
        dk0=dk0,
        kappa0=dp.kappa0,
        xi=dp.xi,
        alpha=dp.alpha,
        vg_tilde=dp.vg_tilde,
        domega_eit=dp.domega_eit,
        ddomega_eit=abs(dp.alpha) * om * math.sqrt(a.gamma_cb / a.gamma),
    )


def closed_dispersion(d_k, params: ModelParams):
    """Hot-gas initial-value law in the two-term exciton approximation.

    At ``d_k = 0`` it reduces to ``delta_d + i gamma_cb``.
    """
    dp = derive(params)
    a, d = params.atom, params.drive
    om2 = d.omega_rabi**2
    d_k = np.asarray(d_k, dtype=float)
    g_prime = params.coupling * dp.N_prime_ratio
    gk = dp.gamma_k_at(d_k)
    pole = om2 / (a.gamma * (1.0 + dp.G))
    if g_prime == 0.0:
        return d.delta_d - dp.v_d * d_k + 1j * gk
    x = dp.gammaG * d_k / (2.0 * math.pi * d.doppler * g_prime)
    return d.delta_d - dp.v_d * d_k + 1j * gk + pole / (x + 1j)


@dataclass(frozen=True)
class ResonanceVelocity:
    vg: float
    zeros: tuple | None
    vg_min: float
    v_d_at_min: float
    density_ratio: float


def vg_resonance(params: ModelParams, v_d: float | None = None) -> ResonanceVelocity:
    """Group velocity at the EIT resonance of the drifting velocity class.

    ``v_g = beta / (nu F(v_d)) - v_d`` with ``nu = N / N_cr``; closed-form
    zeros and minimum for the Lorentzian, numerical ones otherwise.
    """
    if params.is_beam:
        raise ParameterError("vg_resonance applies to the hot gas")
    dp = derive(params)
    dist = params.distribution
    nu = dp.Ncr_ratio
    beta = distribution_beta(dist)
    vd = dp.v_d if v_d is None else float(v_d)
    if nu == 0.0:
        return ResonanceVelocity(params.drive.c_over_vT, None, math.inf, math.nan, 0.0)
    vg_of = lambda x: beta / (nu * velocity_distribution(x, dist)) - x
    vg = float(vg_of(vd))
    if dist == LORENTZIAN:
        zeros = None
        if nu >= 1.0:
            s = math.sqrt(nu * nu - 1.0)
            zeros = (nu - s, nu + s)
        vmin = -0.5 * nu * (1.0 - 1.0 / nu**2)
        return ResonanceVelocity(vg, zeros, vmin, nu, nu)
    r = optimize.minimize_scalar(vg_of, bounds=(0.0, 10.0), method="bounded",
                                 options={"xatol": 1e-12})
    vmin, at = float(r.fun), float(r.x)
    zeros = None
    if vmin < 0:
        zeros = (optimize.brentq(vg_of, 0.0, at, xtol=1e-14),
                 optimize.brentq(vg_of, at, 20.0, xtol=1e-14))
    elif vmin == 0:
        zeros = (at, at)
    return ResonanceVelocity(vg, zeros, vmin, at, nu)


def vg_resonance_quadratic(v_d, density_ratio):
    """Lorentzian resonance curve written as (v_d - v1)(v_d - v2) / (2 nu)."""
    v_d = np.asarray(v_d, dtype=float)
    return (v_d**2 - 2.0 * density_ratio * v_d + 1.0) / (2.0 * density_ratio)


def eit_metrics(params: ModelParams, kind: str = "auto") -> dict:
    """EIT widths. Beam widths are refused for a hot gas and vice versa."""
    if kind == "auto":
        kind = "beam" if params.is_beam else "hot"
    dp = derive(params)
    if kind == "beam":
        if not params.is_beam:
            raise ParameterError("beam widths requested for a hot gas")
        return {"dk_eit": dp.dk_eit, "domega_eit": dp.domega_eit, "ddomega_eit": dp.ddomega_eit}
    if kind == "hot":
        if params.is_beam:
            raise ParameterError("hot-gas widths requested for a beam")
        return {"dk_eit_prime": dp.dk_eit_prime, "ddk_eit_prime": dp.ddk_eit_prime}
    raise ParameterError(f"unknown kind {kind!r}")
