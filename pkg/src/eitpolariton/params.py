"""Model parameters, derived quantities and regime checks.

Unit system
-----------
All inputs are dimensionless:

* frequencies and rates in units of the optical coherence decay ``gamma`` (= 1),
* velocities in units of the thermal velocity ``v_T`` (= 1),
* wavenumber detunings in units of ``gamma / v_T``, lengths in ``v_T / gamma``.

With these units the drive wavenumber ``k_d`` equals the Doppler width
``doppler = k_d v_T / gamma`` and the atomic velocity is simply ``v``.
The density enters through ``coupling_g = mu_ab**2 N / hbar`` (units of
``gamma``) or, equivalently, through ``density_ratio = N / N_cr``.

Field conventions follow ``exp(i omega t - i k z)``: an absorbing medium
has ``Im chi < 0``, a decaying polariton ``Im omega > 0`` and a spatially
attenuated wave ``Im k < 0``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy import constants

LORENTZIAN = "lorentzian"
MAXWELLIAN = "maxwellian"
DISTRIBUTIONS = (LORENTZIAN, MAXWELLIAN)

# factor used to decide "much less than" in the regime report
MUCH_LESS_FACTOR = 10.0


class ParameterError(ValueError):
    """Invalid or inconsistent model parameters."""


class RegimeError(RuntimeError):
    """Raised by ``check_regime(strict=True)`` when a condition is violated."""


# ---------------------------------------------------------------------------
# parameter containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AtomParams:
    """Atomic relaxation and density.

    Exactly one of ``coupling_g`` and ``density_ratio`` must be given.
    ``branching`` is the fraction of the excited-state decay that lands in b.
    """

    gamma_cb: float = 1e-3
    coupling_g: Optional[float] = None
    density_ratio: Optional[float] = None
    gamma: float = 1.0
    branching: float = 0.5


@dataclass(frozen=True)
class DriveParams:
    omega_rabi: float = 0.25
    delta_d: float = -100.0
    doppler: float = 100.0
    c_over_vT: float = 1e6


@dataclass(frozen=True)
class Beam:
    """Mono-velocity atomic beam moving with velocity ``v`` (units of v_T)."""

    v: float = 0.0
    kind: str = field(default="beam", init=False)


@dataclass(frozen=True)
class HotGas:
    """Stationary cell with a thermal velocity distribution."""

    distribution: str = LORENTZIAN
    kind: str = field(default="hotgas", init=False)


MediumSpec = Union[Beam, HotGas]


def velocity_distribution(v, distribution: str = LORENTZIAN):
    """Normalised velocity distribution F(v) with v_T = 1."""
    v = np.asarray(v, dtype=float)
    if distribution == LORENTZIAN:
        return 1.0 / (np.pi * (1.0 + v * v))
    if distribution == MAXWELLIAN:
        return np.exp(-v * v) / math.sqrt(math.pi)
    raise ParameterError(f"unknown distribution {distribution!r}")


def distribution_beta(distribution: str = LORENTZIAN) -> float:
    """beta = max over v of v F(v)."""
    if distribution == LORENTZIAN:
        return 1.0 / (2.0 * math.pi)
    if distribution == MAXWELLIAN:
        # maximum of v exp(-v^2)/sqrt(pi) sits at v = 1/sqrt(2)
        return math.exp(-0.5) / math.sqrt(2.0 * math.pi)
    raise ParameterError(f"unknown distribution {distribution!r}")


@dataclass(frozen=True)
class ModelParams:
    atom: AtomParams = field(default_factory=AtomParams)
    drive: DriveParams = field(default_factory=DriveParams)
    medium: MediumSpec = field(default_factory=HotGas)

    def __post_init__(self):
        validate(self)

    @property
    def distribution(self) -> str:
        if isinstance(self.medium, HotGas):
            return self.medium.distribution
        return LORENTZIAN

    @property
    def k_d(self) -> float:
        return self.drive.doppler

    @property
    def omega_ab(self) -> float:
        """Probe carrier frequency ~ k_d c, the reference for the dispersion equation."""
        return self.drive.doppler * self.drive.c_over_vT

    @property
    def is_beam(self) -> bool:
        return isinstance(self.medium, Beam)

    def critical_coupling(self, omega_rabi: Optional[float] = None) -> float:
        """mu^2 N_cr / hbar for the configured distribution."""
        om = self.drive.omega_rabi if omega_rabi is None else omega_rabi
        a = self.atom
        return om * math.sqrt(a.gamma_cb / a.gamma) / (
            2.0 * math.pi**2 * distribution_beta(self.distribution))

    @property
    def coupling(self) -> float:
        """Resolved mu_ab^2 N / hbar."""
        if self.atom.coupling_g is not None:
            return float(self.atom.coupling_g)
        return float(self.atom.density_ratio) * self.critical_coupling()

    def with_fixed_coupling(self) -> "ModelParams":
        """Same model with the density pinned through ``coupling_g``."""
        return replace(self, atom=replace(self.atom, coupling_g=self.coupling,
                                          density_ratio=None))

    def with_omega(self, omega_rabi: float) -> "ModelParams":
        """Change the drive Rabi frequency at fixed atomic density."""
        fixed = self.with_fixed_coupling()
        return replace(fixed, drive=replace(fixed.drive, omega_rabi=omega_rabi))

    def replace(self, **changes) -> "ModelParams":
        """Return a copy with flat parameter names changed (see ``CONFIG_KEYS``)."""
        return params_from_mapping({**to_mapping(self), **changes})


def validate(params: ModelParams) -> None:
    a, d, m = params.atom, params.drive, params.medium
    if (a.coupling_g is None) == (a.density_ratio is None):
        raise ParameterError("give exactly one of coupling_g and density_ratio")
    if a.coupling_g is not None and not (a.coupling_g >= 0 and math.isfinite(a.coupling_g)):
        raise ParameterError("coupling_g must be finite and >= 0")
    if a.density_ratio is not None and not (a.density_ratio >= 0 and math.isfinite(a.density_ratio)):
        raise ParameterError("density_ratio must be finite and >= 0")
    if not a.gamma > 0:
        raise ParameterError("gamma must be > 0")
    if not a.gamma_cb > 0:
        raise ParameterError("gamma_cb must be > 0")
    if not 0.0 <= a.branching <= 1.0:
        raise ParameterError("branching must lie in [0, 1]")
    if not d.omega_rabi > 0:
        raise ParameterError("omega_rabi must be > 0")
    if not d.doppler > 0:
        raise ParameterError("doppler must be > 0")
    if not math.isfinite(d.delta_d):
        raise ParameterError("delta_d must be finite")
    if not d.c_over_vT > d.doppler:
        raise ParameterError("c_over_vT must greatly exceed doppler")
    if isinstance(m, Beam):
        if not math.isfinite(m.v):
            raise ParameterError("beam velocity must be finite")
    elif isinstance(m, HotGas):
        if m.distribution not in DISTRIBUTIONS:
            raise ParameterError(f"unknown distribution {m.distribution!r}")
    else:
        raise ParameterError(f"unknown medium {m!r}")


# ---------------------------------------------------------------------------
# derived quantities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DerivedParams:
    G: float
    gammaG: float
    k_d: float
    v_d: float
    coupling_g: float
    coupling_cr: float
    Ncr_ratio: float
    beta: float
    N_prime_ratio: float
    vg_tilde: float
    vg_tilde_prime: float
    vg_tilde_prime_exciton: float
    gamma_k: float
    drift: float
    dk_eit: float
    domega_eit: float
    ddomega_eit: float
    dk_eit_prime: float
    ddk_eit_prime: float
    kappa0: float
    xi: float
    alpha: float
    dk0: float = 0.0

    def gamma_k_at(self, d_k) -> np.ndarray:
        """EIT-exciton decay including the |dk| broadening term."""
        return self.gamma_k + np.abs(d_k) * self.gammaG / self.k_d


def derive(params: ModelParams) -> DerivedParams:
    """Compute all secondary symbols.

    ``vg_tilde`` is the at-rest group velocity of a fully pumped sample of
    the configured density. ``vg_tilde_prime`` is the same formula applied
    to the drifting-beam density N' (the form behind the critical density),
    and ``vg_tilde_prime_exciton`` is the slope that follows from the
    two-term exciton approximation, smaller by G/(1+G).
    """
    validate(params)
    a, d = params.atom, params.drive
    gam, gcb, om, D = a.gamma, a.gamma_cb, d.omega_rabi, d.doppler
    G = math.sqrt(1.0 + om**2 / (gcb * gam))
    gammaG = gam * G
    v_d = -d.delta_d / D
    g = params.coupling
    g_cr = params.critical_coupling()
    beta = distribution_beta(params.distribution)
    n_prime = math.pi * float(velocity_distribution(v_d, params.distribution)) * gammaG / D

    with np.errstate(divide="ignore"):
        vg = om**2 / (2.0 * math.pi * D * g) if g > 0 else math.inf
        vgp = vg / n_prime if g > 0 else math.inf
    vgp_exc = vgp * G / (1.0 + G)
    gamma_k = gcb + om**2 / (gam * (1.0 + G))

    if params.is_beam:
        drift, v_ref = params.medium.v, vg
        kappa0 = gcb / vg
        xi = gam / (om**2 * vg)
    else:
        drift, v_ref = v_d, vgp
        kappa0 = gcb / vgp
        xi = 1.0 / (gamma_k * vgp)
    alpha = (v_ref - drift) / v_ref if math.isfinite(v_ref) else 1.0

    dk_eit = om**2 / (gam * vg)
    return DerivedParams(
        G=G,
        gammaG=gammaG,
        k_d=D,
        v_d=v_d,
        coupling_g=g,
        coupling_cr=g_cr,
        Ncr_ratio=g / g_cr,
        beta=beta,
        N_prime_ratio=n_prime,
        vg_tilde=vg,
        vg_tilde_prime=vgp,
        vg_tilde_prime_exciton=vgp_exc,
        gamma_k=gamma_k,
        drift=drift,
        dk_eit=dk_eit,
        domega_eit=dk_eit * abs(vg - drift) if math.isfinite(vg) else math.inf,
        ddomega_eit=(abs(vg - drift) * om * math.sqrt(gcb / gam) / vg
                     if math.isfinite(vg) else om * math.sqrt(gcb / gam)),
        dk_eit_prime=gamma_k / vgp,
        ddk_eit_prime=math.sqrt(gcb * gamma_k) / vgp,
        kappa0=kappa0,
        xi=xi,
        alpha=alpha,
    )


# ---------------------------------------------------------------------------
# regime report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Condition:
    name: str
    left: float
    right: float
    relation: str
    satisfied: bool
    marginal: bool = False

    def __str__(self) -> str:
        flag = "ok" if self.satisfied else ("MARGINAL" if self.marginal else "VIOLATED")
        return f"{self.name}: {self.left:.6g} {self.relation} {self.right:.6g} [{flag}]"


@dataclass(frozen=True)
class RegimeReport:
    conditions: tuple

    @property
    def ok(self) -> bool:
        return all(c.satisfied for c in self.conditions)

    @property
    def violated(self) -> list:
        return [c for c in self.conditions if not c.satisfied]

    def __getitem__(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary_lines(self) -> list:
        return [str(c) for c in self.conditions]


def _compare(name, left, right, relation, factor=MUCH_LESS_FACTOR) -> Condition:
    left, right = float(left), float(right)
    if relation == "<<":
        ok = left * factor <= right
    elif relation == ">>":
        ok = left >= factor * right
    elif relation == ">":
        ok = left > right * (1.0 + 1e-12)
    else:
        raise ValueError(relation)
    marginal = (not ok) and math.isclose(left, right, rel_tol=1e-9)
    return Condition(name, left, right, relation, ok, marginal)


def check_regime(params: ModelParams, strict: bool = False,
                 factor: float = MUCH_LESS_FACTOR) -> RegimeReport:
    """Evaluate the validity conditions of the analytic theory.

    "Much less than" means at least ``factor`` apart. The v3-pole condition
    converts N / k_d^3 with the radiative relation mu^2 k^3 / hbar = 3 gamma / 2.
    """
    dp = derive(params)
    a, d = params.atom, params.drive
    v_ref = dp.vg_tilde if params.is_beam else dp.vg_tilde_prime
    drift = dp.drift
    # both sides multiplied by v^2 so that v = 0 stays finite
    lhs6 = dp.kappa0 * dp.xi * drift**2
    rhs6 = (1.0 - drift / v_ref) ** 2 if math.isfinite(v_ref) else 1.0
    conds = (
        _compare("gamma_cb << gamma", a.gamma_cb, a.gamma, "<<", factor),
        _compare("gammaG << k_d v_T", dp.gammaG, d.doppler, "<<", factor),
        _compare("|delta_d| >> gammaG", abs(d.delta_d), dp.gammaG, ">>", factor),
        _compare("Omega^2 > gamma_cb gamma", d.omega_rabi**2, a.gamma_cb * a.gamma, ">"),
        _compare("N << k_d^3 (gamma_cb/gamma) sqrt(k_d v_T/Omega)",
                 2.0 * dp.coupling_g / (3.0 * a.gamma),
                 (a.gamma_cb / a.gamma) * math.sqrt(d.doppler / d.omega_rabi), "<<", factor),
        _compare("kappa0 xi v^2 << (1 - v/vg)^2", lhs6, rhs6, "<<", factor),
    )
    report = RegimeReport(conds)
    if strict and not report.ok:
        raise RegimeError("; ".join(str(c) for c in report.violated))
    return report


# ---------------------------------------------------------------------------
# SI conversion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SiReference:
    """Physical scales of a real atom.

    ``gamma`` is the optical coherence decay in rad/s. The thermal velocity
    is taken from ``v_thermal`` or computed as sqrt(2 k_B T / m).
    """

    wavelength: float = 795e-9
    gamma: float = 2.0 * math.pi * 3.0e6
    v_thermal: Optional[float] = 240.0
    mass_amu: Optional[float] = 87.0
    temperature: Optional[float] = None

    @property
    def v_T(self) -> float:
        if self.v_thermal is not None:
            return self.v_thermal
        if self.mass_amu is None or self.temperature is None:
            raise ParameterError("need v_thermal or (mass_amu, temperature)")
        m = self.mass_amu * constants.atomic_mass
        return math.sqrt(2.0 * constants.k * self.temperature / m)

    @property
    def k(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def dipole_sq_over_hbar(self) -> float:
        """mu^2/hbar in Gaussian units (m^3/s) from the radiative width 2 gamma."""
        return 1.5 * self.gamma / self.k**3


@dataclass(frozen=True)
class SiValues:
    doppler: float          # k_d v_T / gamma implied by the reference
    v_T: float              # m/s
    time_unit: float        # 1/gamma in s
    length_unit: float      # v_T/gamma in m
    N: float                # cm^-3
    N_cr: float             # cm^-3

    def velocity(self, v) -> np.ndarray:
        """Dimensionless velocity -> m/s."""
        return np.asarray(v) * self.v_T

    def length_cm(self, z) -> np.ndarray:
        return np.asarray(z) * self.length_unit * 100.0

    def length_from_cm(self, z_cm) -> np.ndarray:
        return np.asarray(z_cm) / (self.length_unit * 100.0)


def to_si(params: ModelParams, ref: SiReference = SiReference()) -> SiValues:
    if not (ref.wavelength > 0 and ref.gamma > 0):
        raise ParameterError("SI reference needs wavelength > 0 and gamma > 0")
    v_T = ref.v_T
    if not v_T > 0:
        raise ParameterError("thermal velocity must be positive")
    mu2 = ref.dipole_sq_over_hbar
    dens = lambda g: g * ref.gamma / mu2 * 1e-6   # m^-3 -> cm^-3
    return SiValues(
        doppler=ref.k * v_T / ref.gamma,
        v_T=v_T,
        time_unit=1.0 / ref.gamma,
        length_unit=v_T / ref.gamma,
        N=dens(params.coupling),
        N_cr=dens(params.critical_coupling()),
    )


def from_si(values: SiValues, ref: SiReference = SiReference()) -> dict:
    """Inverse of ``to_si`` for the density and Doppler width."""
    mu2 = ref.dipole_sq_over_hbar
    g = values.N * 1e6 * mu2 / ref.gamma
    return {"coupling_g": g, "doppler": ref.k * values.v_T / ref.gamma}


# ---------------------------------------------------------------------------
# flat key=value configuration
# ---------------------------------------------------------------------------

CONFIG_KEYS = (
    "gamma_cb", "omega_rabi", "delta_d", "doppler", "density_ratio",
    "coupling_g", "medium", "distribution", "c_over_vT", "beam_velocity",
    "branching",
)

DEFAULTS = {
    "gamma_cb": 1e-3,
    "omega_rabi": 0.25,
    "delta_d": -100.0,
    "doppler": 100.0,
    "c_over_vT": 1e6,
    "medium": "hotgas",
    "distribution": LORENTZIAN,
    "beam_velocity": 0.0,
    "branching": 0.5,
}


def params_from_mapping(values: dict) -> ModelParams:
    unknown = set(values) - set(CONFIG_KEYS)
    if unknown:
        raise ParameterError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
    v = {k: val for k, val in values.items() if val is not None}
    if "coupling_g" in v and "density_ratio" in v:
        raise ParameterError("give exactly one of coupling_g and density_ratio")
    if "coupling_g" not in v and "density_ratio" not in v:
        v["density_ratio"] = 1.0
    merged = {**DEFAULTS, **v}
    try:
        num = lambda key: float(merged[key])
        atom = AtomParams(
            gamma_cb=num("gamma_cb"),
            coupling_g=float(v["coupling_g"]) if "coupling_g" in v else None,
            density_ratio=float(v["density_ratio"]) if "density_ratio" in v else None,
            branching=num("branching"),
        )
        drive = DriveParams(omega_rabi=num("omega_rabi"), delta_d=num("delta_d"),
                            doppler=num("doppler"), c_over_vT=num("c_over_vT"))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError(str(exc)) from exc
    kind = str(merged["medium"]).lower()
    if kind == "beam":
        medium = Beam(v=float(merged["beam_velocity"]))
    elif kind in ("hotgas", "hot_gas", "gas"):
        medium = HotGas(distribution=str(merged["distribution"]).lower())
    else:
        raise ParameterError(f"unknown medium {merged['medium']!r}")
    return ModelParams(atom=atom, drive=drive, medium=medium)


def to_mapping(params: ModelParams) -> dict:
    a, d, m = params.atom, params.drive, params.medium
    out = {
        "gamma_cb": a.gamma_cb,
        "omega_rabi": d.omega_rabi,
        "delta_d": d.delta_d,
        "doppler": d.doppler,
        "c_over_vT": d.c_over_vT,
        "branching": a.branching,
        "medium": m.kind,
    }
    if a.coupling_g is not None:
        out["coupling_g"] = a.coupling_g
    else:
        out["density_ratio"] = a.density_ratio
    if isinstance(m, Beam):
        out["beam_velocity"] = m.v
    else:
        out["distribution"] = m.distribution
    return out


def read_config(path) -> dict:
    """Read a flat ``key = value`` file; ``#`` starts a comment."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",),
                                       comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[model]\n" + text)
    except configparser.Error as exc:
        raise ParameterError(f"{path}: {exc}") from exc
    return dict(parser["model"])


def load_params(path) -> ModelParams:
    return params_from_mapping(read_config(path))


def describe(params: ModelParams) -> list:
    """Resolved parameter listing used in output headers."""
    lines = [f"{k} = {v!r}" for k, v in sorted(to_mapping(params).items())]
    dp = derive(params)
    for f in fields(dp):
        lines.append(f"derived.{f.name} = {getattr(dp, f.name)!r}")
    return lines
