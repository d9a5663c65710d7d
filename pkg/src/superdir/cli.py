"""Command-line front end.

Exit codes: 0 success, 2 usage, 3 input parse, 4 infeasible constraint,
5 numerical failure.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .beamforming import (
    BeamformResult,
    directivity_quotient,
    eepb_solve,
    iep_solve,
    mrt,
    normalize_excitation,
)
from .coupling import (
    CouplingMatrix,
    NetworkData,
    bcf_from_generalized_s,
    bcf_from_s,
    bcf_from_z,
    bcf_integrate,
    generalized_s,
    isotropic_coupling,
    steering_at,
)
from .errors import InvalidArgumentError, RouteMismatchError, SuperdirError
from .patterns import (
    ArrayGeometry,
    Direction,
    ElementPattern,
    HertzianDipolePattern,
    IsotropicPattern,
    SphereGrid,
    array_pattern,
    directivity_from_pattern,
    hertzian_dipole_eep,
    isotropic_eep,
    make_sphere_grid,
    planar_directivity,
)
from .robust import ocrb_solve, tradeoff_sweep
from .sensitivity import ErrorModel, monte_carlo, normalized_variance


@dataclass
class Scenario:
    """Everything needed to build coupling data for one array."""

    source: str
    u0: Direction
    grid: SphereGrid
    geometry: ArrayGeometry | None = None
    patterns: list[ElementPattern] | None = None
    network: NetworkData | None = None
    iep: ElementPattern | None = None


# --- argument helpers --------------------------------------------------------------


def _vector(text: str) -> np.ndarray:
    try:
        vec = np.array([float(x) for x in text.split(",")])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}") from exc
    if vec.size != 3:
        raise argparse.ArgumentTypeError(f"expected three components, got {text!r}")
    return vec


def _add_scenario(parser: argparse.ArgumentParser, required: bool = True) -> None:
    g = parser.add_argument_group("array scenario")
    src = g.add_mutually_exclusive_group(required=required)
    src.add_argument("--analytic", choices=["isotropic", "dipole"],
                     help="analytic element model on a uniform linear array")
    src.add_argument("--eep", nargs="+", metavar="CSV", help="one sampled pattern file per element")
    src.add_argument("--network", metavar="FILE",
                     help="network data: JSON, or Touchstone .sNp; B is in eta/4pi-scaled "
                          "units, so the steering patterns must use the matching field scale")
    g.add_argument("--steering-eep", nargs="+", metavar="CSV",
                   help="pattern files giving the steering vector for --network")
    g.add_argument("--steering-analytic", choices=["isotropic", "dipole"],
                   help="analytic model giving the steering vector for --network")
    g.add_argument("--m", type=int, help="element count of an analytic array")
    g.add_argument("--spacing-wl", type=float, help="element spacing in wavelengths")
    g.add_argument("--spacing-m", type=float, help="element spacing in meters")
    g.add_argument("--wavelength-m", type=float, default=1.0, help="wavelength in meters")
    g.add_argument("--axis", choices=["x", "y", "z"], default="y", help="array axis")
    g.add_argument("--dipole-axis", type=_vector, default=np.array([0.0, 0.0, 1.0]),
                   help="dipole orientation x,y,z (default 0,0,1)")
    g.add_argument("--iep", metavar="CSV", help="isolated element pattern for --method iep")
    g.add_argument("--freq", type=float, help="frequency in Hz for Touchstone input")
    g.add_argument("--endfire", action="store_true",
                   help="steer to theta=90, phi=270 degrees (the default)")
    g.add_argument("--theta-deg", type=float, default=90.0)
    g.add_argument("--phi-deg", type=float, default=270.0)
    g.add_argument("--n-theta", type=int, default=64, help="quadrature nodes in theta")
    g.add_argument("--n-phi", type=int, default=128, help="quadrature nodes in phi")


def _geometry(args, spacing_wl: float | None = None) -> ArrayGeometry:
    if args.m is None:
        raise InvalidArgumentError("--m is required for an analytic array")
    wl = args.wavelength_m
    if spacing_wl is not None:
        spacing = spacing_wl * wl
    elif args.spacing_m is not None:
        spacing = args.spacing_m
    elif args.spacing_wl is not None:
        spacing = args.spacing_wl * wl
    else:
        raise InvalidArgumentError("give --spacing-wl or --spacing-m")
    if not spacing > 0:
        raise InvalidArgumentError("spacing must be positive")
    return ArrayGeometry.linear(args.m, spacing, wl, args.axis)


def _analytic_patterns(kind: str, geometry: ArrayGeometry, axis) -> list[ElementPattern]:
    if kind == "isotropic":
        return [isotropic_eep(geometry, i) for i in range(geometry.size)]
    return [hertzian_dipole_eep(geometry, i, axis) for i in range(geometry.size)]


def _isolated(kind: str, geometry: ArrayGeometry, axis) -> ElementPattern:
    if kind == "isotropic":
        return IsotropicPattern((0, 0, 0), geometry.wavenumber)
    return HertzianDipolePattern((0, 0, 0), geometry.wavenumber, axis)


def build_scenario(args, spacing_wl: float | None = None) -> Scenario:
    u0 = Direction.from_degrees(90.0, 270.0) if args.endfire else \
        Direction.from_degrees(args.theta_deg, args.phi_deg)
    grid = make_sphere_grid(args.n_theta, args.n_phi)
    if args.analytic:
        geometry = _geometry(args, spacing_wl)
        return Scenario("analytic-" + args.analytic, u0, grid, geometry,
                        _analytic_patterns(args.analytic, geometry, args.dipole_axis),
                        iep=_isolated(args.analytic, geometry, args.dipole_axis))
    iep = io.read_eep_csv(args.iep) if args.iep else None
    geometry = _geometry(args, spacing_wl) if args.m is not None else None
    if args.eep:
        patterns = [io.read_eep_csv(p) for p in args.eep]
        return Scenario("eep-files", u0, grid, geometry, patterns, iep=iep)
    if args.network:
        path = Path(args.network)
        if path.suffix.lower() == ".json":
            net = io.read_network_json(path)
        else:
            net = io.read_touchstone(path, args.freq)
        patterns = None
        if args.steering_eep:
            patterns = [io.read_eep_csv(p) for p in args.steering_eep]
        elif args.steering_analytic:
            geometry = geometry or _geometry(args, spacing_wl)
            patterns = _analytic_patterns(args.steering_analytic, geometry, args.dipole_axis)
        return Scenario("network-file", u0, grid, geometry, patterns, net, iep)
    raise InvalidArgumentError("choose --analytic, --eep or --network")


def _network_b(net: NetworkData, route: str) -> np.ndarray:
    if route == "s":
        return bcf_from_s(net)
    if route == "gs":
        return bcf_from_generalized_s(generalized_s(net), net)
    return bcf_from_z(net)


def scenario_coupling(sc: Scenario, route: str | None = None) -> CouplingMatrix:
    """Coupling data for ``sc`` by ``route`` (integrate, sinc, s, gs or z)."""
    if route is None:
        route = "integrate" if sc.patterns is not None and sc.network is None else "z"
        if sc.network is not None and sc.network.z is None:
            route = "s" if sc.network.uniform_real_reference() is not None else "gs"
    if route == "sinc":
        if sc.source != "analytic-isotropic":
            raise RouteMismatchError("the sinc closed form needs --analytic isotropic")
        return isotropic_coupling(sc.geometry, sc.u0)
    if route == "integrate":
        if sc.patterns is None or sc.network is not None:
            raise RouteMismatchError("the integrate route needs --analytic or --eep patterns")
        b = bcf_integrate(sc.patterns, sc.grid)
    else:
        if sc.network is None:
            raise RouteMismatchError(f"route {route!r} needs --network data")
        b = _network_b(sc.network, route)
    if sc.patterns is None:
        raise InvalidArgumentError(
            "network routes give B only; supply --steering-eep or --steering-analytic for v0"
        )
    v0, d_f0, xpol = steering_at(sc.patterns, sc.u0, return_cross_polar=True)
    return CouplingMatrix(b, v0, d_f0, xpol, route)


def _report(text: str, to_stderr: bool) -> None:
    print(text, file=sys.stderr if to_stderr else sys.stdout)


def _to_stdout(out) -> bool:
    return out is None or out == "-"


def _emit(text: str, out) -> None:
    if _to_stdout(out):
        sys.stdout.write(text)


# --- commands ------------------------------------------------------------------------


def cmd_bcf(args) -> int:
    sc = build_scenario(args)
    c = scenario_coupling(sc, args.route)
    quiet = _to_stdout(args.out)
    b = c.b
    scale = np.max(np.abs(b))
    asym = np.max(np.abs(b - b.conj().T)) / scale if scale > 0 else 0.0
    w = np.linalg.eigvalsh(0.5 * (b + b.conj().T))
    _report(f"route {c.route}: M = {c.size}, hermitian asymmetry {asym:.3e}, "
            f"eigenvalues {w[0]:.6e} .. {w[-1]:.6e}, cross-polar {c.cross_polar:.3e}", quiet)
    if args.oracle == "sinc":
        ref = isotropic_coupling(sc.geometry, sc.u0) if sc.source == "analytic-isotropic" else None
        if ref is None:
            raise RouteMismatchError("--oracle sinc needs --analytic isotropic")
        _report(f"max abs difference from sinc closed form: {np.max(np.abs(b - ref.b)):.3e}", quiet)
    _emit(io.write_coupling(c, args.out), args.out)
    return 0


def _coupling_for(args) -> tuple[CouplingMatrix, Scenario | None]:
    if args.coupling:
        return io.read_coupling(args.coupling), None
    if not (args.analytic or args.eep or args.network):
        raise InvalidArgumentError("give --coupling or an array scenario")
    sc = build_scenario(args)
    return scenario_coupling(sc, args.route), sc


def _solve(method: str, c: CouplingMatrix, sc: Scenario | None) -> BeamformResult:
    if method == "eepb":
        return eepb_solve(c)
    if method == "mrt":
        return mrt(c)
    if sc is None or sc.iep is None or sc.geometry is None:
        raise InvalidArgumentError("--method iep needs an analytic scenario, or --iep with --m")
    base = iep_solve(sc.geometry, sc.iep, sc.grid, sc.u0)
    a = normalize_excitation(base.excitation, c.b)
    return BeamformResult(a, directivity_quotient(a, c), "iep", base.warnings)


def cmd_solve(args) -> int:
    if (args.xi is None) != (args.method != "ocrb"):
        raise InvalidArgumentError("--xi is required with --method ocrb and only then")
    c, sc = _coupling_for(args)
    quiet = _to_stdout(args.out)
    if args.method == "ocrb":
        sol = ocrb_solve(c, args.xi)
        _report(f"D = {sol.directivity!r}", quiet)
        _report(f"Xi = {sol.xi_achieved!r}", quiet)
        _report(f"residual = {sol.residual:.3e}", quiet)
        _emit(io.write_solution(sol, args.out), args.out)
        return 0
    result = _solve(args.method, c, sc)
    _report(f"D = {result.directivity!r}", quiet)
    _report(f"Xi = {normalized_variance(result.excitation, c)!r}", quiet)
    for note in result.warnings:
        print(f"warning: {note}", file=sys.stderr)
    _emit(io.write_excitation(result, args.out), args.out)
    return 0


def cmd_montecarlo(args) -> int:
    if args.n < 1:
        raise InvalidArgumentError("--n must be at least 1")
    if args.seed < 0:
        raise InvalidArgumentError("--seed must be nonnegative")
    if args.bins < 1:
        raise InvalidArgumentError("--bins must be at least 1")
    exc = io.read_excitation(args.excitation)
    c = io.read_coupling(args.coupling)
    if exc.excitation.size != c.size:
        raise InvalidArgumentError(
            f"excitation has {exc.excitation.size} entries, coupling file has {c.size}")
    em = ErrorModel.from_degrees(args.sigma_amp, args.sigma_phase_deg)
    report = monte_carlo(exc.excitation, c, em, args.n, args.seed)
    quiet = _to_stdout(args.out)
    _report(f"d0 = {report.d0!r}  mean_d = {report.mean_d!r}  h = {report.h!r}", quiet)
    _emit(io.write_report(report, args.out, args.bins, args.samples), args.out)
    return 0


def _frange(start: float, stop: float, step: float) -> list[float]:
    if not all(math.isfinite(x) for x in (start, stop, step)):
        raise InvalidArgumentError("range bounds must be finite")
    if not step > 0:
        raise InvalidArgumentError("--step must be positive")
    if not start <= stop:
        raise InvalidArgumentError("empty range: --start exceeds --stop")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [float(f"{start + k * step:.12g}") for k in range(count)]


def cmd_sweep(args) -> int:
    values = _frange(args.start, args.stop, args.step)
    if args.kind == "xi":
        c, _ = _coupling_for(args)
        text = io.write_sweep_csv(tradeoff_sweep(c, values), args.out)
        _emit(text, args.out)
        return 0
    if not args.analytic:
        raise InvalidArgumentError("a spacing sweep needs --analytic")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in ("eepb", "iep", "mrt"):
            raise InvalidArgumentError(f"unknown method {m!r} in --methods")
    lines = [",".join(["spacing_wl"] + [f"d_{m}" for m in methods] + ["error"])]
    for spacing in values:
        cells = [repr(spacing)]
        try:
            sc = build_scenario(args, spacing_wl=spacing)
            c = scenario_coupling(sc, args.route)
            cells += [repr(_solve(m, c, sc).directivity) for m in methods]
            cells.append("")
        except SuperdirError as exc:
            cells += [""] * len(methods) + ['"' + f"{type(exc).__name__}: {exc}".replace('"', "'") + '"']
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    if not _to_stdout(args.out):
        Path(args.out).write_text(text)
    _emit(text, args.out)
    return 0


def _db(power: np.ndarray) -> np.ndarray:
    peak = power.max()
    if not peak > 0:
        return np.full(power.shape, -300.0)
    return 10 * np.log10(np.maximum(power / peak, 1e-30))


def cmd_pattern(args) -> int:
    exc = io.read_excitation(args.excitation)
    sc = build_scenario(args)
    if sc.patterns is None:
        raise InvalidArgumentError("pattern output needs element patterns")
    if exc.excitation.size != len(sc.patterns):
        raise InvalidArgumentError(
            f"excitation has {exc.excitation.size} entries for {len(sc.patterns)} elements")
    pattern = array_pattern(exc.excitation, sc.patterns)
    quiet = _to_stdout(args.out)
    if args.planar_theta_deg is not None:
        theta0 = np.deg2rad(args.planar_theta_deg)
        phi = 2 * np.pi * np.arange(args.cut_points) / args.cut_points
        power = pattern.power(np.full(phi.size, theta0), phi)
        dp = planar_directivity(pattern, theta0, args.cut_points)
        _report(f"D_p = {dp!r}", quiet)
        rows = ["phi_deg,power_db"] + [f"{p!r},{v!r}" for p, v in
                                       zip(np.rad2deg(phi).tolist(), _db(power).tolist())]
    else:
        grid = sc.grid
        power = pattern.power(grid.theta, grid.phi)
        d = directivity_from_pattern(pattern, grid, sc.u0)
        _report(f"D = {d!r}", quiet)
        rows = ["theta_deg,phi_deg,power_db"] + [
            f"{t!r},{p!r},{v!r}" for t, p, v in
            zip(np.rad2deg(grid.theta).tolist(), np.rad2deg(grid.phi).tolist(), _db(power).tolist())
        ]
    text = "\n".join(rows) + "\n"
    if not quiet:
        Path(args.out).write_text(text)
    _emit(text, args.out)
    return 0


# --- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="superdir",
        description="Superdirective beamforming for coupled arrays.",
        epilog="Exit codes: 0 ok, 2 usage, 3 input parse, 4 infeasible constraint, "
               "5 numerical failure. SUPERDIR_THREADS caps worker threads.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bcf", help="compute the coupling matrix and steering vector")
    _add_scenario(p)
    p.add_argument("--route", choices=["integrate", "s", "gs", "z"], default=None,
                   help="coupling route (default: integrate for patterns, z or s for networks)")
    p.add_argument("--oracle", choices=["sinc"], help="compare with a closed form")
    p.add_argument("--out", help="coupling JSON path (default stdout)")
    p.set_defaults(func=cmd_bcf)

    p = sub.add_parser("solve", help="compute an excitation")
    _add_scenario(p, required=False)
    p.add_argument("--coupling", metavar="JSON", help="coupling file from 'superdir bcf'")
    p.add_argument("--route", choices=["integrate", "sinc", "s", "gs", "z"], default=None)
    p.add_argument("--method", choices=["eepb", "iep", "mrt", "ocrb"], required=True)
    p.add_argument("--xi", type=float, help="target normalized variance (ocrb)")
    p.add_argument("--out", help="excitation JSON path (default stdout)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("montecarlo", help="excitation-error Monte Carlo run")
    p.add_argument("--excitation", required=True, metavar="JSON")
    p.add_argument("--coupling", required=True, metavar="JSON")
    p.add_argument("--sigma-amp", type=float, default=0.05)
    p.add_argument("--sigma-phase-deg", type=float, default=5.0)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--samples", metavar="CSV", help="also write the samples, one per line")
    p.add_argument("--out", help="report JSON path (default stdout)")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("sweep", help="directivity against spacing or normalized variance")
    p.add_argument("kind", choices=["spacing", "xi"])
    _add_scenario(p, required=False)
    p.add_argument("--coupling", metavar="JSON", help="coupling file for an xi sweep")
    p.add_argument("--route", choices=["integrate", "sinc", "s", "gs", "z"], default=None)
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--methods", default="eepb,iep,mrt", help="comma list for a spacing sweep")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("pattern", help="normalized power pattern of an excitation")
    p.add_argument("--excitation", required=True, metavar="JSON")
    _add_scenario(p)
    p.add_argument("--planar-theta-deg", type=float, help="planar cut at this theta")
    p.add_argument("--cut-points", type=int, default=3600, help="samples on a planar cut")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_pattern)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SuperdirError as exc:
        print(f"superdir: error: {exc}", file=sys.stderr)
        return exc.exit_code
