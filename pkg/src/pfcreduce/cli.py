"""Command-line front end: fit models on CSV data or run the simulation
experiments, writing a structured plain-text report.

Commands
--------
* ``pfcreduce fit --model {pc|pfc-iso|structured10|structured13} --y Y.csv
  [--x X.csv] --d K [--source ...] [--selection ...] --out report.txt``
* ``pfcreduce simulate|verify|recover --config sim.cfg --out report.txt``
  (simulation keys may also be given as flags, which override the file)

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical error.
Errors are reported as one machine-parsable line on stderr.  Reports contain
no timestamps, so identical configurations produce identical bytes; numbers
are written with 17 significant digits so matrices round-trip exactly.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError, UsageError
from .estimators import DataSet, covariance_triple
from .models import (
    fit_pc,
    fit_pfc_isotonic,
    fit_structured_exhaustive,
    fit_structured_sequential,
)
from .simulate import SimConfig, SimReport, recovery_experiment, verify_expectations

MODELS = ("pc", "pfc-iso", "structured10", "structured13")
SIM_COMMANDS = ("simulate", "verify", "recover")

SIM_INT_KEYS = ("d", "n", "q", "p", "replicates", "seed")
SIM_FLOAT_KEYS = ("sigma", "sigma0", "sigma_x", "gamma")
SIM_KEYS = SIM_INT_KEYS + SIM_FLOAT_KEYS + ("sigma0_grid",)


@dataclass
class RunConfig:
    """Everything one invocation needs; produced from flags and config file."""

    command: str
    out_path: str
    model: str | None = None
    y_path: str | None = None
    x_path: str | None = None
    d: int | None = None
    source: str | None = None
    selection: str = "exhaustive"
    has_header: bool = False
    center_x: bool = True
    sim: SimConfig | None = None
    config_path: str | None = None


# ---------------------------------------------------------------------------
# matrix I/O


def load_matrix(path: str, has_header: bool = False) -> np.ndarray:
    """Read a rectangular numeric CSV file into a matrix.

    Ragged rows and non-numeric cells are rejected with the offending line
    (1-based, counting the header) and column named in the message.
    """
    try:
        with open(path, "r", encoding="ascii") as handle:
            lines = handle.read().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    start = 1 if has_header else 0
    rows: list[list[float]] = []
    width = None
    for lineno, line in enumerate(lines, start=1):
        if lineno <= start or not line.strip():
            continue
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise DataError(
                f"{path}: ragged row at line {lineno}: "
                f"expected {width} values, found {len(cells)}"
            )
        row = []
        for col, cell in enumerate(cells, start=1):
            try:
                row.append(float(cell))
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric value {cell.strip()!r} "
                    f"at line {lineno}, column {col}"
                ) from None
        rows.append(row)
    if not rows:
        raise DataError(f"{path}: no data rows")
    matrix = np.array(rows, dtype=float)
    if not np.all(np.isfinite(matrix)):
        raise DataError(f"{path}: non-finite value in data")
    return matrix


def format_float(x: float) -> str:
    """17 significant digits: enough to reproduce any double exactly."""
    return f"{float(x):.17g}"


def format_vector(v) -> str:
    return ",".join(format_float(x) for x in np.asarray(v, dtype=float).ravel())


def format_matrix(M) -> str:
    """CSV text for a matrix, one row per line, 17 significant digits."""
    A = np.asarray(M, dtype=float)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    return "\n".join(",".join(format_float(x) for x in row) for row in A)


# ---------------------------------------------------------------------------
# report assembly


class ReportWriter:
    """Accumulates the nested key/value report and writes it atomically."""

    def __init__(self):
        self.lines: list[str] = ["pfcreduce-report/1"]

    def section(self, name: str):
        self.lines.append("")
        self.lines.append(f"[{name}]")

    def field(self, key: str, value):
        if value is None:
            text = "-"
        elif isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = format_float(value)
        elif isinstance(value, (tuple, list)):
            text = ",".join(str(v) for v in value) if len(value) else "-"
        else:
            text = str(value)
        self.lines.append(f"{key}: {text}")

    def vector(self, key: str, v):
        self.lines.append(f"{key}: {format_vector(v)}")

    def matrix(self, key: str, M):
        self.lines.append(f"{key}:")
        for line in format_matrix(M).splitlines():
            self.lines.append(f"  {line}")

    def write(self, path: str):
        with open(path, "w", encoding="ascii") as handle:
            handle.write("\n".join(self.lines) + "\n")


def _echo_config(writer: ReportWriter, config: RunConfig):
    writer.section("config")
    writer.field("command", config.command)
    if config.command == "fit":
        writer.field("model", config.model)
        writer.field("y", config.y_path)
        writer.field("x", config.x_path)
        writer.field("d", config.d)
        writer.field("source", config.source)
        writer.field("selection", config.selection)
        writer.field("has_header", config.has_header)
        writer.field("center_x", config.center_x)
    else:
        writer.field("config_file", config.config_path)
        sim = config.sim
        for key in SIM_INT_KEYS:
            writer.field(key, getattr(sim, key))
        for key in SIM_FLOAT_KEYS:
            writer.field(key, float(getattr(sim, key)))
        grid = sim.sigma0_grid
        writer.field(
            "sigma0_grid",
            ",".join(format_float(s) for s in grid) if grid is not None else None,
        )
    writer.field("out", config.out_path)


def _report_fit(writer: ReportWriter, config: RunConfig):
    Y = load_matrix(config.y_path, config.has_header)
    X = load_matrix(config.x_path, config.has_header) if config.x_path else None
    x_was_centered = None
    if X is not None:
        x_was_centered = bool(np.max(np.abs(X.mean(axis=0))) > 1e-10)
        if config.center_x:
            X = X - X.mean(axis=0)

    data = DataSet(Y=Y, X=X) if X is not None else None
    if data is not None:
        x_was_centered = x_was_centered or data.was_centered

    writer.section("data")
    writer.field("n", Y.shape[0])
    writer.field("q", Y.shape[1])
    writer.field("p", X.shape[1] if X is not None else None)
    writer.field("r_x", covariance_triple(data).r_x if data is not None else None)
    writer.field("x_was_centered", x_was_centered)

    model, d = config.model, config.d
    writer.section("estimate")
    if model == "pc":
        est = fit_pc(Y, d)
        writer.field("selected_indices", est.selected_indices)
        writer.field("log_lik", est.log_lik)
        writer.field("warning", est.warning)
        writer.matrix("basis", est.basis)
    elif model == "pfc-iso":
        fit = fit_pfc_isotonic(data, d)
        writer.field("selected_indices", fit.Z_hat.selected_indices)
        writer.field("log_lik", fit.log_lik)
        writer.field("sse", fit.sse)
        writer.field("sigma2_hat", fit.sigma2_hat)
        writer.field("warning", fit.Z_hat.warning)
        writer.vector("mu_hat", fit.mu_hat)
        writer.matrix("basis", fit.Z_hat.basis)
        writer.matrix("Gamma_hat", fit.Gamma_hat)
    else:
        variant = "model13" if model == "structured13" else "model10"
        fitter = (
            fit_structured_sequential
            if config.selection == "sequential"
            else fit_structured_exhaustive
        )
        fit = fitter(data if data is not None else Y, d, variant, config.source)
        writer.field("selected_indices", fit.Z_hat.selected_indices)
        writer.field("log_lik", fit.log_lik)
        writer.field("warning", fit.omega_warning)
        writer.vector("omega2_hat", fit.omega2_hat)
        writer.vector("omega0_2_hat", fit.omega0_2_hat)
        writer.matrix("basis", fit.Z_hat.basis)


def _report_simulation(writer: ReportWriter, command: str, report: SimReport):
    if command == "verify":
        writer.section("expectation_check")
        writer.field("max_se_units", report.expectation_max_se_units)
        writer.field("max_rel_error", report.expectation_max_rel_error)
        writer.field("result", "pass" if report.expectation_pass else "fail")
    for name, mean in report.mean_matrices.items():
        writer.section(f"mean_{name}")
        writer.matrix("matrix", mean)
    if report.distance_mean:
        writer.section("recovery_distance")
        for name in report.distance_mean:
            writer.field(
                name,
                f"{format_float(report.distance_mean[name])},"
                f"{format_float(report.distance_se[name])}",
            )
    if report.recovery:
        writer.section("recovery")
        writer.field("columns", "sigma0,source,mean_distance,se_distance,replicates")
        for row in report.recovery:
            writer.field(
                "row",
                f"{format_float(row.sigma0)},{row.source},"
                f"{format_float(row.mean_distance)},{format_float(row.se_distance)},"
                f"{row.replicates}",
            )
    if report.chance is not None:
        writer.section("chance_baseline")
        writer.field("mean_distance", report.chance.mean_distance)
        writer.field("se_distance", report.chance.se_distance)
        writer.field("mean_squared_distance", report.chance.mean_squared_distance)
        writer.field("draws", report.chance.draws)


def run(config: RunConfig) -> int:
    """Execute one configured command and write its report; returns 0."""
    _validate_run_config(config)
    writer = ReportWriter()
    _echo_config(writer, config)
    if config.command == "fit":
        _report_fit(writer, config)
    elif config.command in ("simulate", "verify"):
        _report_simulation(writer, config.command, verify_expectations(config.sim))
    else:
        _report_simulation(writer, config.command, recovery_experiment(config.sim))
    writer.write(config.out_path)
    return 0


def _validate_run_config(config: RunConfig):
    if config.command == "fit":
        if config.model not in MODELS:
            raise UsageError(f"model must be one of {MODELS}")
        if not config.y_path:
            raise UsageError("fit requires --y")
        if config.d is None or config.d < 1:
            raise UsageError("fit requires --d >= 1")
        needs_x = config.model in ("pfc-iso", "structured13") or (
            config.model == "structured10" and config.source not in (None, "sigma_hat")
        )
        if needs_x and not config.x_path:
            raise UsageError(f"model {config.model} with this source requires --x")
        if config.source is None:
            config.source = "sigma_hat" if config.model == "structured10" else "sigma_fit"
    elif config.command in SIM_COMMANDS:
        if config.sim is None:
            raise UsageError(f"{config.command} requires a simulation configuration")
    else:
        raise UsageError(f"unknown command {config.command!r}")


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f'ERROR code=2 message="{message}"', file=sys.stderr)
        raise SystemExit(2)


def parse_sim_file(path: str) -> dict:
    """Parse a flat key=value simulation config file (# starts a comment)."""
    try:
        with open(path, "r", encoding="ascii") as handle:
            lines = handle.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    values: dict = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}: line {lineno} is not key=value")
        key, _, text = line.partition("=")
        key, text = key.strip(), text.strip()
        if key not in SIM_KEYS:
            raise UsageError(f"{path}: unknown simulation key {key!r} at line {lineno}")
        values[key] = text
    return values


def _sim_config_from(values: dict) -> SimConfig:
    kwargs: dict = {}
    for key, text in values.items():
        try:
            if key in SIM_INT_KEYS:
                kwargs[key] = int(text)
            elif key in SIM_FLOAT_KEYS:
                kwargs[key] = float(text)
            else:  # sigma0_grid
                kwargs[key] = tuple(float(s) for s in str(text).split(","))
        except ValueError:
            raise UsageError(f"invalid value {text!r} for simulation key {key!r}") from None
    try:
        return SimConfig(**kwargs)
    except DataError as exc:
        raise UsageError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pfcreduce", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = sub.add_parser("fit", help="fit a model to CSV data")
    fit.add_argument("--model", required=True, choices=MODELS)
    fit.add_argument("--y", required=True, help="CSV file of responses, one row per case")
    fit.add_argument("--x", default=None, help="CSV file of regressors")
    fit.add_argument("--d", required=True, type=int, help="signal dimension")
    fit.add_argument("--source", default=None, choices=("sigma_hat", "sigma_fit", "sigma_res"))
    fit.add_argument("--selection", default="exhaustive", choices=("exhaustive", "sequential"))
    fit.add_argument("--has-header", action="store_true")
    fit.add_argument("--center-x", action=argparse.BooleanOptionalAction, default=True)
    fit.add_argument("--out", required=True)

    for name, help_text in (
        ("simulate", "Monte Carlo estimator summary"),
        ("verify", "check the closed-form estimator expectations"),
        ("recover", "recovery study across complement noise levels"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", default=None, help="flat key=value file")
        for key in SIM_INT_KEYS:
            cmd.add_argument(f"--{key}", type=int, default=None)
        for key in SIM_FLOAT_KEYS:
            cmd.add_argument(f"--{key.replace('_', '-')}", type=float, default=None)
        cmd.add_argument("--sigma0-grid", default=None, help="comma-separated list")
        cmd.add_argument("--out", required=True)
    return parser


def _run_config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.command == "fit":
        return RunConfig(
            command="fit",
            out_path=args.out,
            model=args.model,
            y_path=args.y,
            x_path=args.x,
            d=args.d,
            source=args.source,
            selection=args.selection,
            has_header=args.has_header,
            center_x=args.center_x,
        )
    values = parse_sim_file(args.config) if args.config else {}
    for key in SIM_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return RunConfig(
        command=args.command,
        out_path=args.out,
        sim=_sim_config_from(values),
        config_path=args.config,
    )


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return run(_run_config_from_args(args))
    except UsageError as exc:
        print(f'ERROR code=2 message="{exc}"', file=sys.stderr)
        return 2
    except DataError as exc:
        print(f'ERROR code=3 message="{exc}"', file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f'ERROR code=4 message="{exc}"', file=sys.stderr)
        return 4
    except OSError as exc:
        print(f'ERROR code=3 message="{exc}"', file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
