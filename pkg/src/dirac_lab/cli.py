"""Command line: ``run``, ``verify`` and ``infogeo``.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime failure,
3 a verification residual above its tolerance.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import forms
from .contact import lift_state, verify_lift
from .densities import PolynomialDensity, quadratic_density, separable_polynomial
from .infogeo import (
    DuallyFlatChart,
    alpha_connection_identity,
    canonical_divergence,
    duality_pairing_check,
    quadratic_cotransform,
)
from .mesh import build_mesh
from .phs import (
    BOUNDARY_MODES,
    PRESETS,
    SCHEMES,
    EnergySpec,
    InitialCondition,
    energy,
    make_preset,
    power_balance,
    step,
)
from .stokes_dirac import check_isotropy

log = logging.getLogger("dirac_lab")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3
POWER_TOL = 1e-10
ISOTROPY_TOL = 1e-10
INFOGEO_TOL = 1e-8


class ConfigError(ValueError):
    pass


# -- configuration -----------------------------------------------------------------

KNOWN_KEYS = {
    "scenario": {"preset", "steps", "dt", "cfl", "scheme", "boundary"},
    "mesh": {"cells", "lengths"},
    "energy": {"kind", "coefficients", "density_p", "density_q"},
    "initial": {"shape", "amplitude", "modes", "center", "width", "seed"},
    "output": {"dir", "snapshot_every"},
    "verify": {"stokes_dirac", "lift", "lift_every", "infogeo", "kappa", "seed"},
    "fault": {"corrupt_effort", "cell", "component", "delta"},
    "infogeo": {"density", "dim", "coefficients", "xi", "xi_prime", "samples", "seed", "box"},
}


@dataclass
class ScenarioConfig:
    preset: str
    cells: tuple[int, ...]
    lengths: tuple[float, ...]
    steps: int = 100
    dt: float | None = None
    cfl: float = 0.25
    scheme: str = "rk4"
    boundary: str = "reflecting"
    energy: EnergySpec = field(default_factory=EnergySpec)
    initial: InitialCondition = field(default_factory=InitialCondition)
    out_dir: Path = Path("out")
    snapshot_every: int = 0
    check_stokes_dirac: bool = False
    check_lift: bool = False
    lift_every: int = 10
    check_infogeo: bool = False
    kappa: float = 1.0
    verify_seed: int = 0
    fault: tuple[int, int, float] | None = None


def _read(path: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#",))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    for section in parser.sections():
        if section not in KNOWN_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        unknown = set(parser[section]) - KNOWN_KEYS[section]
        if unknown:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    return parser


def _get(parser, section, key, convert, default=None, required=False):
    if not parser.has_option(section, key):
        if required:
            raise ConfigError(f"missing required key {section}.{key}")
        return default
    raw = parser.get(section, key).strip()
    try:
        return convert(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid value for {section}.{key}: {raw!r}") from exc


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(v) for v in raw.replace(",", " ").split())


def _ints(raw: str) -> tuple[int, ...]:
    return tuple(int(v) for v in raw.replace(",", " ").split())


def _bool(raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _positive(name: str, value, allow_zero: bool = False):
    if value is None:
        return value
    if value < 0 or (value == 0 and not allow_zero):
        raise ConfigError(f"{name} must be {'non-negative' if allow_zero else 'positive'}, got {value}")
    return value


def _choice(name: str, value: str, options) -> str:
    if value not in options:
        raise ConfigError(f"{name} must be one of {', '.join(options)}, got {value!r}")
    return value


def load_config(path: str) -> ScenarioConfig:
    p = _read(path)
    preset = _choice("scenario.preset", _get(p, "scenario", "preset", str, required=True), sorted(PRESETS))
    sig = PRESETS[preset]
    cells = _get(p, "mesh", "cells", _ints, required=True)
    lengths = _get(p, "mesh", "lengths", _floats, (1.0,) * sig.n)
    if len(cells) == 1 and sig.n > 1:
        cells = cells * sig.n
    if len(lengths) == 1 and sig.n > 1:
        lengths = lengths * sig.n
    if len(cells) != sig.n or len(lengths) != sig.n:
        raise ConfigError(f"preset {preset} is {sig.n}-dimensional; mesh.cells and mesh.lengths need {sig.n} entries")
    for c in cells:
        _positive("mesh.cells", c)
    for v in lengths:
        _positive("mesh.lengths", v)

    kind = _choice("energy.kind", _get(p, "energy", "kind", str, "quadratic"), ("quadratic", "density"))
    if kind == "quadratic":
        coefs = _get(p, "energy", "coefficients", _floats, (0.5, 0.5))
        if len(coefs) != 2:
            raise ConfigError("energy.coefficients needs two values")
        for c in coefs:
            _positive("energy.coefficients", c)
        spec = EnergySpec("quadratic", coefs)
    else:
        if sig.n != 1:
            raise ConfigError("energy.kind = density is only available for one-dimensional presets")
        dp = _get(p, "energy", "density_p", _floats, (0.0, 0.0, 0.5))
        dq = _get(p, "energy", "density_q", _floats, (0.0, 0.0, 0.5))
        spec = EnergySpec("density", density=separable_polynomial([dp, dq]))

    try:
        initial = InitialCondition(
            shape=_get(p, "initial", "shape", str, "mode"),
            amplitude=_get(p, "initial", "amplitude", float, 1.0),
            modes=_get(p, "initial", "modes", _ints, (1, 1, 0)),
            center=_get(p, "initial", "center", _floats, (0.5, 0.5, 0.5)),
            width=_get(p, "initial", "width", float, 0.05),
            seed=_get(p, "initial", "seed", int, 0),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid [initial]: {exc}") from exc

    fault = None
    if _get(p, "fault", "corrupt_effort", _bool, False):
        fault = (_get(p, "fault", "cell", int, 0), _get(p, "fault", "component", int, 0),
                 _get(p, "fault", "delta", float, 1e-3))

    cfg = ScenarioConfig(
        preset=preset,
        cells=cells,
        lengths=lengths,
        steps=_positive("scenario.steps", _get(p, "scenario", "steps", int, 100)),
        dt=_positive("scenario.dt", _get(p, "scenario", "dt", float)),
        cfl=_positive("scenario.cfl", _get(p, "scenario", "cfl", float, 0.25)),
        scheme=_choice("scenario.scheme", _get(p, "scenario", "scheme", str, "rk4"), SCHEMES),
        boundary=_choice("scenario.boundary", _get(p, "scenario", "boundary", str, "reflecting"), BOUNDARY_MODES),
        energy=spec,
        initial=initial,
        out_dir=Path(_get(p, "output", "dir", str, "out")),
        snapshot_every=_positive("output.snapshot_every", _get(p, "output", "snapshot_every", int, 0), True),
        check_stokes_dirac=_get(p, "verify", "stokes_dirac", _bool, False),
        check_lift=_get(p, "verify", "lift", _bool, False),
        lift_every=_positive("verify.lift_every", _get(p, "verify", "lift_every", int, 10)),
        check_infogeo=_get(p, "verify", "infogeo", _bool, False),
        kappa=_get(p, "verify", "kappa", float, 1.0),
        verify_seed=_get(p, "verify", "seed", int, 0),
        fault=fault,
    )
    if cfg.kappa == 0:
        raise ConfigError("verify.kappa must be non-zero")
    return cfg


# -- run ------------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return f"{v:.16e}"


def _write_csv(path: Path, header: str, rows) -> None:
    lines = [header] + [",".join(r) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _isotropy_residual(state, cfg: ScenarioConfig) -> float:
    rng = np.random.default_rng(cfg.verify_seed)
    sig, mesh = state.signature, state.mesh
    worst = 0.0
    for _ in range(10):
        fields = []
        for degree, grid in ((sig.n - sig.p, forms.DUAL), (sig.n - sig.q, forms.PRIMAL)) * 2:
            z = forms.zeros(mesh, degree, grid)
            fields.append(z.like(rng.standard_normal(len(z.values))))
        worst = max(worst, check_isotropy(*fields, sig))
    return worst


def _infogeo_report(state, cfg: ScenarioConfig, out: Path) -> float:
    """Divergence table over neighbouring lifted points plus the duality and connection checks."""
    spec, sig = cfg.energy, state.signature
    psi = spec.fiber_density(sig)
    xs = lift_state(state, spec, cfg.boundary).x
    if spec.kind == "quadratic":
        chart = DuallyFlatChart(psi, quadratic_cotransform(spec, sig))
    else:
        bound = 2.0 + float(np.max(np.abs(xs)))
        chart = DuallyFlatChart(psi, box=(-bound, bound))
    pick = np.linspace(0, len(xs) - 1, min(len(xs), 16)).astype(int)
    rows, worst = [], 0.0
    for a, b in zip(pick[:-1], pick[1:]):
        d = canonical_divergence(chart, xs[a], xs[b])
        worst = max(worst, -d)
        rows.append((";".join(_fmt(v) for v in xs[a]), ";".join(_fmt(v) for v in xs[b]), _fmt(d)))
    _write_csv(out / "divergence.csv", "xi,xi_prime,D", rows)
    probe = xs[pick[len(pick) // 2]]
    worst = max(worst, duality_pairing_check(psi, probe, chart.box) if spec.kind == "density" else 0.0)
    worst = max(worst, alpha_connection_identity(psi, probe, 0.5))
    return worst


def run(cfg: ScenarioConfig, out_dir: Path | None = None) -> int:
    out = out_dir or cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    mesh = build_mesh(len(cfg.cells), cfg.cells, cfg.lengths)
    state, spec = make_preset(cfg.preset, mesh, cfg.initial, cfg.energy)
    dt = cfg.dt if cfg.dt is not None else cfg.cfl * min(mesh.spacings)
    failures = []

    if cfg.check_stokes_dirac:
        iso = _isotropy_residual(state, cfg)
        print(f"stokes-dirac isotropy residual {iso:.3e} (tolerance {ISOTROPY_TOL:.0e})")
        if iso > ISOTROPY_TOL:
            failures.append("isotropy")

    def snapshot(index: int):
        if cfg.snapshot_every and index % cfg.snapshot_every == 0:
            forms.write_snapshot(out / f"alpha_p_{index}.coch", state.alpha_p)
            forms.write_snapshot(out / f"alpha_q_{index}.coch", state.alpha_q)

    worst_cells = None
    worst_power = 0.0
    fault = cfg.fault
    if fault is not None and not (0 <= fault[0] < mesh.num_cells(mesh.dim)):
        raise ConfigError(f"fault.cell must lie in 0..{mesh.num_cells(mesh.dim) - 1}")

    def check_lift(current):
        nonlocal worst_cells
        report = verify_lift(current, spec, cfg.boundary, cfg.kappa, fault)
        block = np.stack([report.res_x, report.res_y, report.res_z, np.abs(report.h_psi)], axis=1)
        worst_cells = block if worst_cells is None else np.maximum(worst_cells, block)

    snapshot(0)
    if cfg.check_lift:
        check_lift(state)
    series = []
    for index in range(1, cfg.steps + 1):
        state = step(state, spec, dt, cfg.scheme, cfg.boundary)
        report = power_balance(state, spec, cfg.boundary)
        worst_power = max(worst_power, report.relative_residual)
        series.append((_fmt(state.time), _fmt(energy(state, spec)), _fmt(report.dE_dt),
                       _fmt(report.boundary_flux), _fmt(report.residual)))
        snapshot(index)
        if cfg.check_lift and index % cfg.lift_every == 0:
            check_lift(state)
        if not np.isfinite(report.dE_dt):
            raise FloatingPointError(f"state blew up at step {index}; reduce dt")
    _write_csv(out / "series.csv", "t,E,dE_dt,boundary_flux,residual", series)
    print(f"wrote {len(series)} rows to {out / 'series.csv'}")
    print(f"power balance worst relative residual {worst_power:.3e} (tolerance {POWER_TOL:.0e})")
    if worst_power > POWER_TOL:
        failures.append("power balance")

    if cfg.check_lift:
        rows = [(str(c), *(_fmt(v) for v in r)) for c, r in enumerate(worst_cells)]
        _write_csv(out / "lift.csv", "cell,res_x,res_y,res_z,h_psi", rows)
        mx = worst_cells.max(axis=0)
        print(f"lift residuals x {mx[0]:.3e} y {mx[1]:.3e} z {mx[2]:.3e} h_psi {mx[3]:.3e}")
        if mx[0] > 1e-10 or mx[1] > 1e-10 or mx[2] > 1e-8 or mx[3] > 1e-12:
            failures.append("contact lift")

    if cfg.check_infogeo:
        worst = _infogeo_report(state, cfg, out)
        print(f"information geometry worst residual {worst:.3e} (tolerance {INFOGEO_TOL:.0e})")
        if worst > INFOGEO_TOL:
            failures.append("information geometry")

    if failures:
        print(f"verification failed: {', '.join(failures)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# -- verify ------------------------------------------------------------------------------


def worker_count() -> int:
    raw = os.environ.get("DIRAC_LAB_THREADS", "0").strip() or "0"
    try:
        requested = int(raw)
    except ValueError as exc:
        raise ConfigError(f"DIRAC_LAB_THREADS must be an integer, got {raw!r}") from exc
    if requested < 0:
        raise ConfigError("DIRAC_LAB_THREADS must be non-negative")
    return requested or min(8, os.cpu_count() or 1)


def verify(suite: str) -> int:
    from .verification import SUITES, run_suite

    names = list(SUITES) if suite == "all" else [suite]
    with ThreadPoolExecutor(max_workers=min(worker_count(), len(names))) as pool:
        results = list(pool.map(run_suite, names))
    failed = 0
    for rows in results:
        for row in rows:
            print(row.format())
            failed += not row.passed
    total = sum(len(r) for r in results)
    print(f"{total - failed}/{total} invariants passed")
    return EXIT_OK if failed == 0 else EXIT_VERIFY


# -- infogeo ---------------------------------------------------------------------------------


def _points(raw: str) -> list[np.ndarray]:
    return [np.array(_floats(chunk)) for chunk in raw.split(";") if chunk.strip()]


def infogeo_command(path: str, out_dir: Path | None) -> int:
    p = _read(path)
    kind = _get(p, "infogeo", "density", str, "quadratic")
    dim = _positive("infogeo.dim", _get(p, "infogeo", "dim", int, 2))
    box = _get(p, "infogeo", "box", _floats, (-10.0, 10.0))
    if len(box) != 2 or box[0] >= box[1]:
        raise ConfigError("infogeo.box needs two increasing values")
    if kind == "quadratic":
        psi: PolynomialDensity = quadratic_density(dim, 0.5)
        chart = DuallyFlatChart(psi, quadratic_density(dim, 0.5))
    elif kind == "separable":
        rows = _get(p, "infogeo", "coefficients", lambda r: [_floats(c) for c in r.split(";")], required=True)
        if len(rows) != dim:
            raise ConfigError(f"infogeo.coefficients needs {dim} ';'-separated rows")
        psi = separable_polynomial(rows)
        chart = DuallyFlatChart(psi, box=tuple(box))
    else:
        raise ConfigError(f"infogeo.density must be quadratic or separable, got {kind!r}")

    xi = _get(p, "infogeo", "xi", _points)
    xi_prime = _get(p, "infogeo", "xi_prime", _points)
    if xi is None or xi_prime is None:
        rng = np.random.default_rng(_get(p, "infogeo", "seed", int, 0))
        count = _positive("infogeo.samples", _get(p, "infogeo", "samples", int, 100))
        xi = list(rng.uniform(-1.0, 1.0, (count, dim)))
        xi_prime = list(rng.uniform(-1.0, 1.0, (count, dim)))
    if len(xi) != len(xi_prime) or any(len(v) != dim for v in xi + xi_prime):
        raise ConfigError(f"infogeo.xi and infogeo.xi_prime need matching lists of {dim}-vectors")

    out = out_dir or Path(_get(p, "output", "dir", str, "out"))
    out.mkdir(parents=True, exist_ok=True)
    rows, negative = [], 0.0
    for a, b in zip(xi, xi_prime):
        d = canonical_divergence(chart, a, b)
        negative = max(negative, -d)
        rows.append((";".join(_fmt(v) for v in a), ";".join(_fmt(v) for v in b), _fmt(d)))
    _write_csv(out / "divergence.csv", "xi,xi_prime,D", rows)
    print(f"wrote {len(rows)} divergences to {out / 'divergence.csv'}")
    if negative > 1e-12:
        print(f"negative divergence {-negative:.3e}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


# -- entry point ------------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dirac-lab", description="Port-Hamiltonian simulation and verification workbench.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run_p = sub.add_parser("run", help="simulate a scenario and write CSV reports")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--out")
    ver_p = sub.add_parser("verify", help="run invariant batteries")
    ver_p.add_argument("suite", choices=["hodge", "stokes", "dirac", "contact", "infogeo", "all"])
    geo_p = sub.add_parser("infogeo", help="tabulate canonical divergences")
    geo_p.add_argument("--config", required=True)
    geo_p.add_argument("--out")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            return run(cfg, Path(args.out) if args.out else None)
        if args.command == "verify":
            return verify(args.suite)
        return infogeo_command(args.config, Path(args.out) if args.out else None)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
