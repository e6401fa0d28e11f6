"""
Configuration layering and command execution shared by the management commands.

A run is configured from three layers with fixed precedence: command-line
flags, then a flat `key=value` config file, then `settings.BPGS_DEFAULTS`.
Every value is validated before any computation starts, and every failure
ends in exactly one `ERROR <code> <detail>` line on the diagnostic stream.
"""

import logging
import pathlib
import sys
import typing as t
from dataclasses import dataclass, field

from django.conf import settings
from django.core.management import CommandError
from django.core.management.base import CommandParser, OutputWrapper

from . import formats
from .asymptotics import (
    CSV_HEADER,
    SweepResult,
    convergence_report,
    run_sweep,
    validate_betas,
)
from .checks import run_checks
from .errors import CheckFailed, InvalidArgument, NumericalFailure, UsageError
from .fibering import project_NP
from .functionals import concentration_profile
from .potentials import potential_K_beta
from .radial import Params, RadialGrid, build_grid
from .solver import InitKind, SolveOptions, SolveReport, solve_ground_state

logger = logging.getLogger(__name__)

COMMANDS = ("solve", "sweep", "check", "report")
FORMATS = frozenset({"csv", "json", "solution-text", "plot-data"})
TRUE = frozenset({"1", "true", "yes", "on"})
FALSE = frozenset({"0", "false", "no", "off"})

# flag dest -> dotted config key
FLAG_KEYS = {
    "p": "p",
    "beta": "beta",
    "betas": "betas",
    "rmax": "grid.r_max",
    "n": "grid.n",
    "out": "out",
    "format": "format",
    "seed": "seed",
    "warm_start": "warm_start",
    "workers": "workers",
    "step0": "solver.step0",
    "tol_el": "solver.tol_el",
    "tol_np": "solver.tol_np",
    "max_iters": "solver.max_iters",
    "phase_a_iters": "solver.phase_a_iters",
    "init_file": "solver.init_file",
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: Params
    betas: tuple[float, ...]
    grid: RadialGrid
    options: SolveOptions
    out_dir: pathlib.Path
    formats: frozenset[str] = field(default=FORMATS)
    warm_start: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InvalidArgument(f"unknown command {self.command!r}")
        unknown = self.formats - FORMATS
        if unknown:
            raise InvalidArgument(f"unknown formats {sorted(unknown)}")
        if self.workers < 1:
            raise InvalidArgument(f"workers must be >= 1, got {self.workers}")

    def wants(self, fmt: str) -> bool:
        return fmt in self.formats


# -----------------------------------------------------------------------------
# Parsing
# -----------------------------------------------------------------------------


def add_run_arguments(parser: CommandParser | t.Any) -> None:
    """The flags every command accepts; unset flags stay None so lower layers show through."""
    parser.add_argument("--p", help="exponent p in (3, 6)")
    parser.add_argument("--beta", help="Bopp-Podolsky parameter (0: Schrödinger-Poisson)")
    parser.add_argument("--betas", help="comma-separated, strictly decreasing sweep values")
    parser.add_argument("--rmax", help="truncation radius R_max")
    parser.add_argument("--n", help="number of grid intervals N")
    parser.add_argument("--out", help="output directory (default: BPGS_OUT_DIR)")
    parser.add_argument("--format", help="comma-separated subset of " + ",".join(sorted(FORMATS)))
    parser.add_argument("--seed", help="seed for randomized checks and perturbations")
    parser.add_argument(
        "--warm-start", dest="warm_start", nargs="?", const="true", help="continuation in beta"
    )
    parser.add_argument("--workers", help="process pool size for cold sweeps")
    parser.add_argument("--step0", help="initial descent step")
    parser.add_argument("--tol-el", dest="tol_el", help="relative Euler-Lagrange tolerance")
    parser.add_argument("--tol-np", dest="tol_np", help="relative manifold tolerance")
    parser.add_argument("--max-iters", dest="max_iters", help="iteration cap")
    parser.add_argument("--phase-a-iters", dest="phase_a_iters", help="descent iteration cap")
    parser.add_argument("--init-file", dest="init_file", help="solution file to start from")
    parser.add_argument("--config", help="flat key=value config file")


def read_config_file(path: pathlib.Path | str) -> dict[str, str]:
    """Parse `key = value` lines; `#` starts a comment."""
    path = pathlib.Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"config: cannot read {path}: {e}") from e
    values = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise UsageError(f"config: line {number} of {path} is not key=value: {raw!r}")
        if key not in settings.BPGS_DEFAULTS and key != "out":
            raise UsageError(f"config: unknown key {key!r} at line {number} of {path}")
        values[key] = value.strip()
    return values


def _number(layers: dict[str, str], key: str, kind: t.Callable[[str], t.Any]) -> t.Any:
    raw = layers.get(key, "")
    try:
        return kind(raw)
    except ValueError as e:
        raise UsageError(f"{key}: malformed value {raw!r}") from e


def _flag(layers: dict[str, str], key: str) -> bool:
    raw = layers.get(key, "").strip().lower()
    if raw in TRUE:
        return True
    if raw in FALSE:
        return False
    raise UsageError(f"{key}: expected a boolean, got {raw!r}")


def _floats(layers: dict[str, str], key: str) -> tuple[float, ...]:
    raw = layers.get(key, "")
    try:
        return tuple(float(item) for item in raw.split(",") if item.strip())
    except ValueError as e:
        raise UsageError(f"{key}: malformed list {raw!r}") from e


def config_from_options(command: str, options: t.Mapping[str, t.Any]) -> RunConfig:
    """Layer parsed flag values over the config file and the defaults."""
    layers = dict(settings.BPGS_DEFAULTS)
    if options.get("config"):
        layers.update(read_config_file(options["config"]))
    for dest, key in FLAG_KEYS.items():
        value = options.get(dest)
        if value is not None:
            layers[key] = str(value)

    p = _number(layers, "p", float)
    beta = _number(layers, "beta", float)
    try:
        params = Params(p=p, beta=beta)
    except InvalidArgument as e:
        key = "p" if not 3.0 < p < 6.0 else "beta"
        raise UsageError(f"{key}: {e}") from e
    try:
        grid = build_grid(_number(layers, "grid.r_max", float), _number(layers, "grid.n", int))
    except InvalidArgument as e:
        raise UsageError(f"grid: {e}") from e

    betas = _floats(layers, "betas")
    if command == "sweep":
        try:
            validate_betas(betas)
        except InvalidArgument as e:
            raise UsageError(f"betas: {e}") from e

    init_file = layers.get("solver.init_file", "")
    try:
        solve_options = SolveOptions(
            init=InitKind.FILE if init_file else InitKind.GAUSSIAN,
            path=pathlib.Path(init_file) if init_file else None,
            step0=_number(layers, "solver.step0", float),
            tol_el=_number(layers, "solver.tol_el", float),
            tol_np=_number(layers, "solver.tol_np", float),
            max_iters=_number(layers, "solver.max_iters", int),
            phase_a_iters=_number(layers, "solver.phase_a_iters", int),
            seed=_number(layers, "seed", int),
        )
    except InvalidArgument as e:
        raise UsageError(f"solver: {e}") from e

    items = layers.get("format", "").split(",")
    requested = frozenset(item.strip() for item in items if item.strip())
    if requested - FORMATS:
        raise UsageError(f"format: unknown formats {sorted(requested - FORMATS)}")
    out = layers.get("out") or str(settings.BPGS_OUT_DIR)
    try:
        return RunConfig(
            command=command,
            params=params,
            betas=betas,
            grid=grid,
            options=solve_options,
            out_dir=pathlib.Path(out),
            formats=requested,
            warm_start=_flag(layers, "warm_start"),
            workers=_number(layers, "workers", int),
        )
    except InvalidArgument as e:
        raise UsageError(str(e)) from e


def build_parser() -> CommandParser:
    parser = CommandParser(prog="bpgs", called_from_command_line=False)
    parser.add_argument("command", choices=COMMANDS)
    add_run_arguments(parser)
    return parser


def parse_config(args: t.Sequence[str], file: pathlib.Path | str | None = None) -> RunConfig:
    """
    `["solve", "--p=4", "--beta=0.5"]` to a validated RunConfig.

    `file` is the config file, unless `--config` names one in `args`.
    """
    try:
        namespace = build_parser().parse_args(list(args))
    except CommandError as e:
        raise UsageError(str(e)) from e
    options = vars(namespace)
    if options.get("config") is None and file is not None:
        options["config"] = str(file)
    return config_from_options(options.pop("command"), options)


# -----------------------------------------------------------------------------
# Running
# -----------------------------------------------------------------------------


def error_line(code: str, detail: str) -> str:
    return f"ERROR {code} {' '.join(str(detail).split())}"


class Runner:
    """Executes one RunConfig, writing artifacts under `config.out_dir`."""

    def __init__(self, config: RunConfig, stdout: OutputWrapper, stderr: OutputWrapper):
        self.config = config
        self.stdout = stdout
        self.stderr = stderr

    @property
    def out(self) -> pathlib.Path:
        return self.config.out_dir

    def write_solution(self, report: SolveReport, suffix: str = "") -> None:
        config = self.config
        if config.wants("solution-text"):
            stem = f"{suffix}_" if suffix else ""
            solution = self.out / f"{stem}{formats.SOLUTION_FILE}"
            formats.write_solution(solution, report.v, report.params)
            phi = potential_K_beta(report.v, report.params.beta)
            formats.write_solution(self.out / f"{stem}{formats.PHI_FILE}", phi, report.params)
        if config.wants("json"):
            name = f"{suffix}_{formats.REPORT_FILE}" if suffix else formats.REPORT_FILE
            formats.write_json(self.out / name, report.to_json())

    def solve(self) -> None:
        config = self.config
        try:
            report = solve_ground_state(config.params, config.grid, config.options)
        except NumericalFailure as e:
            if isinstance(e.partial, SolveReport):
                self.write_solution(e.partial)
            raise
        self.write_solution(report)
        if config.wants("plot-data") and config.params.is_poisson:
            # the density integrates to Ĩ_0 only on 𝒫_0
            projected = project_NP(report.v, config.params).projected
            profile = concentration_profile(projected, config.params.p)
            formats.write_plot_data(
                self.out / "concentration.txt", [x.r for x in profile], [x.mass for x in profile]
            )
        self.stdout.write(
            f"m={report.m!r} iters={report.iters} "
            f"el={report.identity.el_l2_rel:.3e} nehari={report.identity.nehari_rel:.3e}"
        )

    def write_sweep(self, result: SweepResult) -> None:
        config = self.config
        records = result.records
        if config.wants("csv"):
            rows = [r.to_row() for r in records]
            formats.write_csv(self.out / formats.SWEEP_CSV, CSV_HEADER, rows)
        if config.wants("json"):
            formats.write_json(self.out / formats.SWEEP_JSON, result.to_json())
        if config.wants("plot-data"):
            betas = [r.beta for r in records]
            for name in ("m_beta", "t_beta", "h1_dist"):
                formats.write_plot_data(
                    self.out / f"{name}.txt", betas, [getattr(r, name) for r in records]
                )
        if result.reference_report is not None and config.wants("solution-text"):
            self.write_solution(result.reference_report, suffix="beta0")

    def sweep(self) -> None:
        config = self.config
        try:
            result = run_sweep(
                config.params.p,
                config.betas,
                config.grid,
                config.options,
                warm_start=config.warm_start,
                workers=config.workers,
            )
        except NumericalFailure as e:
            if isinstance(e.partial, SweepResult):
                self.write_sweep(e.partial)
            raise
        self.write_sweep(result)
        self.summarize(result)

    def summarize(self, result: SweepResult) -> None:
        report = convergence_report(result.records, result.reference)
        formats.write_json(self.out / formats.CONVERGENCE_JSON, report.to_json())
        self.stdout.write(report.table())
        if not report.passed:
            names = ", ".join(check.name for check in report.failures)
            raise CheckFailed(f"failed checks: {names}")

    def check(self) -> None:
        checks = run_checks(seed=self.config.options.seed)
        passed = all(check.passed for check in checks)
        formats.write_json(
            self.out / formats.CHECK_JSON,
            {"checks": [check.to_json() for check in checks], "passed": passed},
        )
        for check in checks:
            self.stdout.write(f"{'PASS' if check.passed else 'FAIL'}   {check.name}")
        if not passed:
            names = ", ".join(check.name for check in checks if not check.passed)
            raise CheckFailed(f"failed checks: {names}")

    def report(self) -> None:
        path = self.out / formats.SWEEP_JSON
        if not path.exists():
            raise CheckFailed(f"no records in {self.out}")
        try:
            result = SweepResult.from_json(formats.read_json(path))
        except ValueError as e:
            raise InvalidArgument(f"{path}: {e}") from e
        if not result.records:
            raise CheckFailed(f"no records in {path}")
        self.summarize(result)


def run(
    config: RunConfig,
    stdout: OutputWrapper | None = None,
    stderr: OutputWrapper | None = None,
) -> int:
    """Execute `config`; 0 on success, 1 on numerical or I/O failure, 2 on usage errors."""
    stdout = stdout or OutputWrapper(sys.stdout)
    stderr = stderr or OutputWrapper(sys.stderr)
    runner = Runner(config, stdout, stderr)
    try:
        getattr(runner, config.command)()
    except UsageError as e:
        stderr.write(error_line(e.code, str(e)))
        return 2
    except InvalidArgument as e:
        stderr.write(error_line("invalid-argument", str(e)))
        return 2
    except NumericalFailure as e:
        logger.info("%s failed: %s", config.command, e)
        stderr.write(error_line(e.code, str(e)))
        return 1
    except OSError as e:
        logger.info("%s failed: %s", config.command, e)
        stderr.write(error_line("io-error", str(e)))
        return 1
    return 0
