"""Command-line front end.

Examples::

    eitpolariton preset fig2 --out fig2.csv
    eitpolariton groupvel --sweep delta_d:-300:300:61
    eitpolariton dispersion --param density_ratio=1.1 --sweep d_k:-0.02:0.02:81
    eitpolariton chi --model quadrature --sweep delta:-0.05:0.05:11

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import io
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dispersion import (
    ExpansionSingularError,
    RootFindError,
    SingularDispersionError,
    characteristic_scales,
    eit_center,
    group_velocity_numeric,
    solve_boundary_value,
    solve_initial_value,
    vg_resonance,
)
from .kinematics import (
    CellSpec,
    snapshot_times,
    drive_profile,
    load_omega_table,
    omega0_for_freeze,
    pulse_trajectory,
    vg_profile,
)
from .params import (
    CONFIG_KEYS,
    ModelParams,
    ParameterError,
    check_regime,
    derive,
    describe,
    params_from_mapping,
    read_config,
    to_mapping,
    to_si,
)
from .susceptibility import QuadratureError, chi as chi_eval, default_model

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
PROBE_AXES = ("delta", "d_k")
PRESETS = ("fig2", "fig3a", "fig3b", "fig5")
NUMERIC_ERRORS = (RootFindError, QuadratureError, SingularDispersionError,
                  ExpansionSingularError, ArithmeticError)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# datasets and writers
# ---------------------------------------------------------------------------

@dataclass
class Dataset:
    columns: list
    rows: list
    header: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def column(self, name):
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)


def _fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Inf" if x > 0 else "-Inf"
    return "%.17g" % x


def count_nonfinite(ds: Dataset) -> int:
    n = sum(1 for r in ds.rows for v in r if not math.isfinite(float(v)))
    return n + sum(count_nonfinite(sub) for sub in ds.extra.values())


def render_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    for line in ds.header:
        buf.write(f"# {line}\n")
    buf.write(",".join(ds.columns) + "\n")
    for r in ds.rows:
        buf.write(",".join(_fmt(v) for v in r) + "\n")
    return buf.getvalue()


def _json_value(x):
    x = float(x)
    return x if math.isfinite(x) else _fmt(x)


def render_json(ds: Dataset) -> str:
    def pack(d):
        return {
            "header": list(d.header),
            "columns": list(d.columns),
            "rows": [[_json_value(v) for v in r] for r in d.rows],
            "extra": {k: pack(v) for k, v in sorted(d.extra.items())},
        }
    return json.dumps(pack(ds), indent=1, sort_keys=True) + "\n"


def write_dataset(ds: Dataset, out, fmt: str):
    """Write to ``out`` (``None`` or ``-`` for stdout). CSV sidecars get a suffix."""
    if fmt == "json":
        text = render_json(ds)
        if out in (None, "-"):
            sys.stdout.write(text)
        else:
            Path(out).write_text(text)
        return
    if out in (None, "-"):
        sys.stdout.write(render_csv(ds))
        for name, sub in sorted(ds.extra.items()):
            sys.stdout.write(f"\n# --- {name} ---\n")
            sys.stdout.write(render_csv(sub))
        return
    out = Path(out)
    out.write_text(render_csv(ds))
    for name, sub in sorted(ds.extra.items()):
        out.with_name(f"{out.stem}_{name}{out.suffix or '.csv'}").write_text(render_csv(sub))


# ---------------------------------------------------------------------------
# parameters and sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepAxis:
    name: str
    start: float
    stop: float
    count: int

    @property
    def values(self):
        return np.linspace(self.start, self.stop, self.count)


def parse_sweep(text: str) -> SweepAxis:
    parts = text.split(":")
    if len(parts) != 4:
        raise ConfigError(f"sweep {text!r} must be name:start:stop:count")
    name = parts[0].strip()
    try:
        start, stop, count = float(parts[1]), float(parts[2]), int(parts[3])
    except ValueError as exc:
        raise ConfigError(f"bad sweep {text!r}: {exc}") from exc
    if count < 2:
        raise ConfigError("sweep count must be >= 2")
    if name not in CONFIG_KEYS + PROBE_AXES:
        raise ConfigError(f"unknown sweep parameter {name!r}")
    if name in ("medium", "distribution"):
        raise ConfigError(f"{name!r} is not numeric")
    return SweepAxis(name, start, stop, count)


def resolve_mapping(args) -> dict:
    values = {}
    if args.config:
        try:
            values.update(read_config(args.config))
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    for item in args.param or []:
        if "=" not in item:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        values[k.strip()] = v.strip()
    if "coupling_g" in values and "density_ratio" in values and args.param:
        # a command-line density overrides either form from the file
        given = [i.split("=", 1)[0].strip() for i in args.param]
        for key in ("coupling_g", "density_ratio"):
            if key not in given and ({"coupling_g", "density_ratio"} - {key}) & set(given):
                values.pop(key)
    return values


def _with(mapping: dict, **changes) -> dict:
    out = dict(mapping)
    if "coupling_g" in changes:
        out.pop("density_ratio", None)
    if "density_ratio" in changes:
        out.pop("coupling_g", None)
    out.update(changes)
    return out


def header_for(params: ModelParams, command: str, extra=()) -> list:
    lines = [f"eitpolariton {__version__}", f"command: {command}"]
    lines += [f"param {s}" for s in describe(params)]
    report = check_regime(params)
    lines += [f"regime {s}" for s in report.summary_lines()]
    for c in report.violated:
        lines.append(f"warning: regime condition violated: {c.name}")
    lines += list(extra)
    return lines


def split_axes(axes):
    probe = [a for a in axes if a.name in PROBE_AXES]
    model = [a for a in axes if a.name not in PROBE_AXES]
    return probe, model


def _grid(axes):
    if not axes:
        return [()]
    return list(itertools.product(*[a.values for a in axes]))


def _parallel_map(fn, items, jobs):
    if jobs and jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


# ---------------------------------------------------------------------------
# per-point workers (top level so they pickle)
# ---------------------------------------------------------------------------

def _groupvel_point(task):
    mapping, method = task
    p = params_from_mapping(mapping)
    dp = derive(p)
    if p.is_beam:
        closed = dp.vg_tilde - p.medium.v
    else:
        closed = vg_resonance(p).vg
    row = [dp.v_d, closed]
    if method == "numeric":
        c = eit_center(p)
        gv = group_velocity_numeric(c.d_omega, c.d_k, p)
        row += [gv.vg, gv.vg_imag_ratio, c.d_k]
    return row


def _chi_point(task):
    mapping, delta, dk, model = task
    p = params_from_mapping(mapping)
    val = complex(chi_eval(p.drive.delta_d + delta, dk, p, model))
    return [val.real, val.imag]


def _branch(task):
    mapping, orientation, grid, model = task
    p = params_from_mapping(mapping)
    if orientation == "initial":
        br = solve_initial_value(grid, p, model)
    else:
        br = solve_boundary_value(p.drive.delta_d + np.asarray(grid), p, model)
    return br


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_groupvel(mapping, axes, args) -> Dataset:
    probe, model_axes = split_axes(axes)
    if probe:
        raise ConfigError("groupvel sweeps model parameters, not probe axes")
    if len(model_axes) > 2:
        raise ConfigError("at most two sweep axes")
    points = _grid(model_axes)
    method = args.method
    rows = _parallel_map(_groupvel_point,
                         [(_with(mapping, **dict(zip([a.name for a in model_axes], pt))), method)
                          for pt in points], args.jobs)
    cols = [a.name for a in model_axes] + ["v_d", "vg_closed"]
    if method == "numeric":
        cols += ["vg_numeric", "vg_imag_ratio", "dk_center"]
    base = params_from_mapping(mapping)
    return Dataset(cols, [list(pt) + r for pt, r in zip(points, rows)],
                   header_for(base, "groupvel", [f"method: {method}"]))


def cmd_chi(mapping, axes, args) -> Dataset:
    probe, model_axes = split_axes(axes)
    if len(axes) > 2:
        raise ConfigError("at most two sweep axes")
    base = params_from_mapping(mapping)
    model = args.model or default_model(base)
    names = [a.name for a in axes]
    points = _grid(axes)
    tasks = []
    for pt in points:
        values = dict(zip(names, pt))
        delta = values.pop("delta", 0.0)
        dk = values.pop("d_k", 0.0)
        tasks.append((_with(mapping, **values), float(delta), float(dk), model))
    rows = _parallel_map(_chi_point, tasks, args.jobs)
    cols = names + ["Re_chi", "Im_chi"]
    return Dataset(cols, [list(pt) + r for pt, r in zip(points, rows)],
                   header_for(base, "chi", [f"model: {model}",
                                            "delta = d_omega - delta_d; absorption has Im_chi < 0"]))


def _default_probe(params: ModelParams, orientation: str) -> SweepAxis:
    wscale, kscale = characteristic_scales(params)
    if orientation == "initial":
        return SweepAxis("d_k", -4.0 * kscale, 4.0 * kscale, 161)
    return SweepAxis("delta", -4.0 * wscale, 4.0 * wscale, 161)


def cmd_dispersion(mapping, axes, args) -> Dataset:
    probe, model_axes = split_axes(axes)
    orientation = args.orientation
    want = "d_k" if orientation == "initial" else "delta"
    if any(a.name != want for a in probe):
        raise ConfigError(f"{orientation} problem sweeps {want!r}")
    if len(model_axes) > 1:
        raise ConfigError("dispersion accepts one model-parameter axis besides the probe axis")
    base = params_from_mapping(mapping)
    model = args.model or default_model(base)
    paxis = probe[0] if probe else _default_probe(base, orientation)
    names = [a.name for a in model_axes]
    points = _grid(model_axes)
    tasks = [(_with(mapping, **dict(zip(names, pt))), orientation, paxis.values, model)
             for pt in points]
    branches = _parallel_map(_branch, tasks, args.jobs)
    rows = []
    for pt, br in zip(points, branches):
        for x, y, r in zip(br.inputs, br.outputs, br.residuals):
            if orientation == "boundary":
                x = x - params_from_mapping(_with(mapping, **dict(zip(names, pt)))).drive.delta_d
            rows.append(list(pt) + [x, y.real, y.imag, r])
    if orientation == "initial":
        cols = names + ["dk", "Re_domega", "Im_domega", "rel_residual"]
    else:
        cols = names + ["delta", "Re_dk", "Im_dk", "rel_residual"]
    return Dataset(cols, rows, header_for(base, "dispersion", [f"model: {model}",
                                                                f"orientation: {orientation}"]))


def _kinematics_dataset(params: ModelParams, cell: CellSpec, omega_table, method, command,
                        extra_header=()) -> Dataset:
    prof = omega_table if omega_table is not None else drive_profile(cell, params)
    vg = vg_profile(prof, params, method)
    try:
        times = snapshot_times(cell, vg)
        tnote = "times: t = m tau, tau = 3 L / (2 v_g(0))"
    except ParameterError:
        times = np.linspace(0.0, 3.0 * cell.length, 4)
        tnote = "warning: v_g(0) <= 0, tau undefined; times span 3 L in units of 1/gamma"
    trace = pulse_trajectory(cell, vg, times, params, prof)
    si = to_si(params)
    extra = list(extra_header) + [
        f"cell length = {cell.length!r} (= {float(si.length_cm(cell.length))!r} cm)",
        f"omega0 = {cell.omega0!r}",
        f"freeze_point = {trace.freeze_point!r}",
        tnote,
    ]
    if prof.threshold_z is not None:
        extra.append(f"warning: drive falls below EIT threshold at z = {prof.threshold_z!r}")
    extra += [f"warning: {f}" for f in trace.flags]
    header = header_for(params.with_omega(cell.omega0), command, extra)
    z = prof.z
    om = np.asarray(prof(z), dtype=float)
    profile = Dataset(["z", "omega", "vg"], [[a, b, c] for a, b, c in zip(z, om, vg.vg)], header)
    traj = Dataset(["m", "t", "z_p", "width", "amplitude"],
                   [[m, t, zp, w, a] for m, (t, zp, w, a) in
                    enumerate(zip(trace.times, trace.positions, trace.widths, trace.amplitudes))],
                   header)
    snaps = Dataset(["z"] + [f"m{m}" for m in range(len(times))],
                    [[zz] + list(trace.snapshots[:, i]) for i, zz in enumerate(trace.snapshot_z)],
                    header)
    profile.extra = {"trajectory": traj, "snapshots": snaps}
    return profile


def cmd_kinematics(mapping, axes, args) -> Dataset:
    if axes:
        raise ConfigError("kinematics does not take sweeps")
    params = params_from_mapping(mapping)
    if params.is_beam:
        raise ConfigError("kinematics needs a hot-gas medium")
    si = to_si(params)
    length = args.length if args.length is not None else float(si.length_from_cm(args.length_cm))
    table = load_omega_table(args.omega_table) if args.omega_table else None
    om0 = args.omega0 if args.omega0 is not None else params.drive.omega_rabi
    if table is not None:
        om0 = float(table(0.0))
        length = float(table.z[-1])
    cell = CellSpec(length=length, omega0=om0, n_z=args.n_z, duration=args.duration)
    return _kinematics_dataset(params.with_omega(om0), cell, table, args.method, "kinematics")


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

FIG_BASE = {"omega_rabi": 0.25, "doppler": 100.0, "gamma_cb": 1e-3}


def preset_fig2(args) -> Dataset:
    deltas = np.linspace(-300.0, 300.0, 601)
    cols = ["delta_d_over_gamma", "v_d_over_vT"]
    per_density = []
    for nu in (0.6, 1.0, 1.5):
        ds = cmd_groupvel(_with(FIG_BASE, density_ratio=nu),
                          [SweepAxis("delta_d", deltas[0], deltas[-1], len(deltas))],
                          argparse.Namespace(method="closed", jobs=1))
        per_density.append(ds.column("vg_closed"))
    vd = -deltas / FIG_BASE["doppler"]
    rows = [[d, v, a, b, c] for d, v, a, b, c in zip(deltas, vd, *per_density)]
    cols += ["vg_over_vT__N0.6", "vg__N1.0", "vg__N1.5"]
    base = params_from_mapping(_with(FIG_BASE, density_ratio=1.0))
    return Dataset(cols, rows, header_for(base, "preset fig2", [
        "vg columns: resonance group velocity at N/N_cr = 0.6, 1.0, 1.5 (units of v_T)"]))


def _fig3_spectrum(params: ModelParams, command: str, note: str) -> Dataset:
    center = eit_center(params)
    _, kscale = characteristic_scales(params)
    grid = center.d_k + np.linspace(-3.0, 3.0, 241) * kscale
    br = solve_initial_value(grid, params)
    rows = [[q, w.real, w.imag, w.real - params.drive.delta_d, r]
            for q, w, r in zip(br.inputs, br.outputs, br.residuals)]
    extra = [note, f"dip centre: dk = {center.d_k!r}, Im_domega = {center.d_omega.imag!r}",
             f"slope at centre: {center.slope.real!r}"]
    return Dataset(["dk", "Re_domega", "Im_domega", "Re_domega_minus_delta_d", "rel_residual"],
                   rows, header_for(params, command, extra))


def fig3_params(which: str) -> ModelParams:
    hot = params_from_mapping(_with(FIG_BASE, delta_d=-100.0, density_ratio=1.1))
    if which == "b":
        return hot
    ratio = 1.1 * derive(hot).N_prime_ratio
    return params_from_mapping(_with(FIG_BASE, delta_d=-100.0, density_ratio=ratio,
                                     medium="beam", beam_velocity=1.0))


def preset_fig3a(args) -> Dataset:
    return _fig3_spectrum(fig3_params("a"), "preset fig3a",
                          "beam v = v_T, N = 1.1 N_cr pi F(v_d) gamma G / k_d, beam susceptibility")


def preset_fig3b(args) -> Dataset:
    return _fig3_spectrum(fig3_params("b"), "preset fig3b",
                          "hot gas v_d = v_T, N = 1.1 N_cr, residue susceptibility")


FIG5_FREEZE_FRACTION = 0.6


def fig5_setup():
    params = fig3_params("b").with_fixed_coupling()
    length = float(to_si(params).length_from_cm(10.0))
    om0 = omega0_for_freeze(params, length, FIG5_FREEZE_FRACTION)
    cell = CellSpec(length=length, omega0=om0, n_z=401, duration=100.0)
    return params.with_omega(om0), cell


def preset_fig5(args) -> Dataset:
    params, cell = fig5_setup()
    return _kinematics_dataset(params, cell, None, "closed", "preset fig5", [
        f"entrance drive chosen so that the freezing point sits at {FIG5_FREEZE_FRACTION} L"])


PRESET_FUNCS = {"fig2": preset_fig2, "fig3a": preset_fig3a, "fig3b": preset_fig3b, "fig5": preset_fig5}


def run_preset(preset_id: str, args=None) -> Dataset:
    if preset_id not in PRESET_FUNCS:
        raise ConfigError(f"unknown preset {preset_id!r}; choose from {', '.join(PRESETS)}")
    return PRESET_FUNCS[preset_id](args)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value parameter file")
    common.add_argument("--param", action="append", metavar="KEY=VALUE",
                        help="override one parameter (repeatable)")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--sweep", action="append", metavar="NAME:START:STOP:COUNT",
                        help="sweep axis over a parameter or probe axis (delta, d_k)")
    common.add_argument("--model", choices=("beam", "residue", "quadrature", "eit"))
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")

    parser = _Parser(prog="eitpolariton", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("chi", parents=[common], help="susceptibility on a grid")
    p = sub.add_parser("dispersion", parents=[common], help="polariton branch")
    p.add_argument("--orientation", choices=("initial", "boundary"), default="initial")
    p = sub.add_parser("groupvel", parents=[common], help="group velocity at the EIT resonance")
    p.add_argument("--method", choices=("closed", "numeric"), default="closed")
    p = sub.add_parser("kinematics", parents=[common], help="drive profile and pulse trajectory")
    p.add_argument("--length", type=float, help="cell length in units of v_T / gamma")
    p.add_argument("--length-cm", type=float, default=10.0, help="cell length in cm (Rb reference)")
    p.add_argument("--omega0", type=float, help="entrance Rabi frequency (default omega_rabi)")
    p.add_argument("--omega-table", help="two-column z, Omega table overriding the drive law")
    p.add_argument("--n-z", type=int, default=401)
    p.add_argument("--duration", type=float, default=100.0, help="pulse duration in 1/gamma")
    p.add_argument("--method", choices=("closed", "numeric"), default="closed")
    p = sub.add_parser("preset", parents=[common], help="figure datasets")
    p.add_argument("preset_id", nargs="?", choices=PRESETS)
    p.add_argument("--preset", dest="preset_flag", choices=PRESETS)
    return parser


def run(args) -> Dataset:
    axes = [parse_sweep(s) for s in (args.sweep or [])]
    if args.command == "preset":
        pid = args.preset_id or args.preset_flag
        if pid is None:
            raise ConfigError("preset id required")
        if axes or args.config or args.param:
            raise ConfigError("presets take no parameters or sweeps")
        return run_preset(pid, args)
    mapping = resolve_mapping(args)
    params_from_mapping(mapping)  # validate early
    return {"chi": cmd_chi, "dispersion": cmd_dispersion, "groupvel": cmd_groupvel,
            "kinematics": cmd_kinematics}[args.command](mapping, axes, args)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        ds = run(args)
    except (ConfigError, ParameterError) as exc:
        print(f"eitpolariton: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"eitpolariton: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"eitpolariton: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        write_dataset(ds, args.out, args.format)
    except OSError as exc:
        print(f"eitpolariton: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    bad = count_nonfinite(ds)
    if bad:
        print(f"eitpolariton: warning: {bad} non-finite value(s) written as NaN/Inf", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
