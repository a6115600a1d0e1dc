"""Configuration, study orchestration and CSV reporting.

Configs are flat UTF-8 key=value text; tokens may share a line.  Studies run
on the square (-1, 1)^2.  Sweep points are independent and may run in a
thread pool; the report is assembled deterministically by sorting on (n,
tau), so rerunning a config reproduces its CSV byte for byte.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import mms
from .femops import error_norms
from .mesh import build_uniform_mesh
from .mms import StudyReport, StudyRow, discrete_l2_norm, discrete_linf_norm
from .scheme import FractionalStepSolver, PhysParams, TimeGrid
from .sparsela import SolverError

__all__ = [
    "ConfigError",
    "RunConfig",
    "EnergyReport",
    "parse_config",
    "run_study",
    "main",
]

DOMAIN = (-1.0, 1.0, -1.0, 1.0)

ERROR_HEADER = (
    "tau,h,err_u_linf_l2,err_u_l2_h1,err_p_l2_l2,err_w_linf_l2,err_w_l2_h1,"
    "rate_u,rate_p,rate_w"
)
ENERGY_HEADER = "tau,k,energy"

_STUDIES = ("single", "time-sweep", "space-sweep", "energy-test")
_KNOWN_KEYS = (
    "study",
    "n",
    "tau",
    "T",
    "steps",
    "t0",
    "j",
    "nu",
    "nu_r",
    "c0",
    "ca",
    "cd",
    "tol",
    "pc",
    "out",
    "exact",
    "forcing",
)


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass
class RunConfig:
    study: str = "single"
    n: int | list[int] = 64
    tau: float | list[float] = 0.1
    T: float = 1.0
    params: PhysParams = field(default_factory=PhysParams)
    tol: float = 1e-10
    pc: str = "ilu"
    out: str = "study.csv"
    exact: str = "mms"  # reference fields: manufactured solution or zero
    forcing: str = "exact"  # forcing derived from the reference, or zero
    steps: int | None = None  # energy-test: step count (T = steps * tau)
    t0: float = 1.0  # energy-test: time at which initial data is sampled


@dataclass
class EnergyReport:
    """Per-step energies of zero-forcing runs, one row per (tau, k)."""

    rows: list[tuple[float, int, float]]


def _to_float(key: str, value: str, lineno: int) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"line {lineno}: key {key}: not a number: {value!r}") from None


def _to_int(key: str, value: str, lineno: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"line {lineno}: key {key}: not an integer: {value!r}") from None


def _check_step_count(T: float, tau: float, lineno: int | None = None) -> int:
    ratio = T / tau
    K = round(ratio)
    where = f"line {lineno}: " if lineno is not None else ""
    if K < 1 or abs(ratio - K) > 1e-9 * max(1.0, abs(ratio)):
        raise ConfigError(
            f"{where}tau={tau} does not divide T={T} into a whole number of steps"
        )
    return K


def parse_config(text: str) -> RunConfig:
    """Parse and validate flat key=value configuration text."""
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        for token in stripped.split():
            key, sep, value = token.partition("=")
            if not sep or not key or not value:
                raise ConfigError(f"line {lineno}: expected key=value, got {token!r}")
            if key not in _KNOWN_KEYS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in raw:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            raw[key] = (value, lineno)

    config = RunConfig()

    def take(key: str) -> tuple[str, int] | None:
        return raw.pop(key, None)

    if item := take("study"):
        value, lineno = item
        if value not in _STUDIES:
            raise ConfigError(
                f"line {lineno}: study must be one of {', '.join(_STUDIES)}"
            )
        config.study = value
    if item := take("n"):
        value, lineno = item
        parts = [_to_int("n", v, lineno) for v in value.split(",")]
        config.n = parts if len(parts) > 1 else parts[0]
    if item := take("tau"):
        value, lineno = item
        parts = [_to_float("tau", v, lineno) for v in value.split(",")]
        config.tau = parts if len(parts) > 1 else parts[0]
    if item := take("T"):
        config.T = _to_float("T", *item)
    if item := take("steps"):
        config.steps = _to_int("steps", *item)
    if item := take("t0"):
        config.t0 = _to_float("t0", *item)
    if item := take("tol"):
        config.tol = _to_float("tol", *item)
    if item := take("pc"):
        value, lineno = item
        if value not in ("jacobi", "ilu", "none"):
            raise ConfigError(f"line {lineno}: pc must be jacobi, ilu or none")
        config.pc = value
    if item := take("out"):
        config.out = item[0]
    if item := take("exact"):
        value, lineno = item
        if value not in ("mms", "zero"):
            raise ConfigError(f"line {lineno}: exact must be mms or zero")
        config.exact = value
    if item := take("forcing"):
        value, lineno = item
        if value not in ("exact", "zero"):
            raise ConfigError(f"line {lineno}: forcing must be exact or zero")
        config.forcing = value

    pvals = {}
    plines = []
    for key in ("j", "nu", "nu_r", "c0", "ca", "cd"):
        if item := take(key):
            pvals[key] = _to_float(key, *item)
            plines.append(item[1])
    if pvals:
        try:
            config.params = replace(PhysParams(), **pvals)
        except ValueError as exc:
            raise ConfigError(f"line {plines[-1]}: {exc}") from None

    assert not raw  # every known key was consumed
    _validate(config)
    return config


def _validate(config: RunConfig) -> None:
    ns = config.n if isinstance(config.n, list) else [config.n]
    taus = config.tau if isinstance(config.tau, list) else [config.tau]
    for n in ns:
        if n < 1:
            raise ConfigError(f"n must be >= 1, got {n}")
    for tau in taus:
        if tau <= 0:
            raise ConfigError(f"tau must be positive, got {tau}")
    if config.T <= 0:
        raise ConfigError(f"T must be positive, got {config.T}")
    if config.tol <= 0:
        raise ConfigError(f"tol must be positive, got {config.tol}")
    if config.steps is not None and config.steps < 1:
        raise ConfigError(f"steps must be >= 1, got {config.steps}")

    if config.study == "time-sweep":
        if isinstance(config.n, list):
            raise ConfigError("time-sweep takes a single n")
        if not isinstance(config.tau, list) or len(config.tau) < 2:
            raise ConfigError("time-sweep needs a comma list of at least two tau")
        for a, b in zip(config.tau, config.tau[1:]):
            if abs(b - a / 2.0) > 1e-9 * a:
                raise ConfigError(f"time-sweep tau list must halve: {a} -> {b}")
    elif config.study == "space-sweep":
        if isinstance(config.tau, list):
            raise ConfigError("space-sweep takes a single tau")
        if not isinstance(config.n, list) or len(config.n) < 2:
            raise ConfigError("space-sweep needs a comma list of at least two n")
        for a, b in zip(config.n, config.n[1:]):
            if b != 2 * a:
                raise ConfigError(f"space-sweep n list must double: {a} -> {b}")
    elif config.study == "single":
        if isinstance(config.n, list) or isinstance(config.tau, list):
            raise ConfigError("single study takes scalar n and tau")
    else:  # energy-test
        if isinstance(config.n, list):
            raise ConfigError("energy-test takes a single n")

    if config.study == "energy-test" and config.steps is not None:
        return  # T is derived per tau from the step count
    for tau in taus:
        _check_step_count(config.T, tau)


# ---------------------------------------------------------------------------
# study execution
# ---------------------------------------------------------------------------


def _reference_fields(config: RunConfig):
    """Exact fields, their gradients and the forcing pair for a run."""
    params = config.params
    if config.exact == "mms":
        fields = {
            "u": mms.velocity,
            "gu": mms.velocity_grad,
            "p": mms.pressure,
            "gp": mms.pressure_grad,
            "w": mms.angular,
            "gw": mms.angular_grad,
        }
        f = lambda t, x, y: mms.force_linear(t, x, y, params)
        g = lambda t, x, y: mms.force_angular(t, x, y, params)
    else:
        fields = {
            "u": lambda t, x, y: np.zeros((2,) + np.shape(x)),
            "gu": lambda t, x, y: np.zeros((2, 2) + np.shape(x)),
            "p": lambda t, x, y: np.zeros(np.shape(x)),
            "gp": lambda t, x, y: np.zeros((2,) + np.shape(x)),
            "w": lambda t, x, y: np.zeros(np.shape(x)),
            "gw": lambda t, x, y: np.zeros((2,) + np.shape(x)),
        }
        f = lambda t, x, y: np.zeros((2,) + np.shape(x))
        g = lambda t, x, y: np.zeros(np.shape(x))
    if config.forcing == "zero":
        f = lambda t, x, y: np.zeros((2,) + np.shape(x))
        g = lambda t, x, y: np.zeros(np.shape(x))
    return fields, f, g


def _build_solver(config: RunConfig, n: int, grid: TimeGrid) -> FractionalStepSolver:
    mesh = build_uniform_mesh(n, DOMAIN)
    pc = None if config.pc == "none" else config.pc
    return FractionalStepSolver(
        mesh, config.params, grid, tol=config.tol, pc=pc
    )


def _measure(solver, state, t, fields):
    eu = error_norms(
        state.u,
        lambda x, y: fields["u"](t, x, y),
        lambda x, y: fields["gu"](t, x, y),
    )
    ep = error_norms(
        state.p,
        lambda x, y: fields["p"](t, x, y),
        lambda x, y: fields["gp"](t, x, y),
    )
    ew = error_norms(
        state.w,
        lambda x, y: fields["w"](t, x, y),
        lambda x, y: fields["gw"](t, x, y),
    )
    return eu[0], eu[1], ep[0], ew[0], ew[1]


def _error_run(config: RunConfig, n: int, tau: float) -> StudyRow:
    """Run one (n, tau) point and accumulate the space-time error norms."""
    K = _check_step_count(config.T, tau)
    grid = TimeGrid(T=config.T, K=K)
    solver = _build_solver(config, n, grid)
    fields, f, g = _reference_fields(config)

    state = solver.initialize(
        lambda x, y: fields["u"](0.0, x, y),
        lambda x, y: fields["w"](0.0, x, y),
        lambda x, y: fields["p"](0.0, x, y),
    )
    history = [_measure(solver, state, 0.0, fields)]
    for _ in range(K):
        state = solver.advance(state, f, g)
        history.append(_measure(solver, state, grid.time(state.k), fields))

    u_l2, u_h1, p_l2, w_l2, w_h1 = (np.array(col) for col in zip(*history))
    return StudyRow(
        tau=grid.tau,
        h=solver.mesh.h,
        err_u_linf_l2=discrete_linf_norm(u_l2),
        err_u_l2_h1=discrete_l2_norm(u_h1, grid.tau),
        err_p_l2_l2=discrete_l2_norm(p_l2, grid.tau),
        err_w_linf_l2=discrete_linf_norm(w_l2),
        err_w_l2_h1=discrete_l2_norm(w_h1, grid.tau),
    )


def _energy_run(config: RunConfig, n: int, tau: float) -> list[tuple[float, int, float]]:
    """Zero-forcing run from projected data; returns (tau, k, E^k) rows."""
    if config.steps is not None:
        K = config.steps
        grid = TimeGrid(T=K * tau, K=K)
    else:
        K = _check_step_count(config.T, tau)
        grid = TimeGrid(T=config.T, K=K)
    solver = _build_solver(config, n, grid)

    t0 = config.t0
    state = solver.initialize(
        lambda x, y: mms.velocity(t0, x, y),
        lambda x, y: mms.angular(t0, x, y),
        lambda x, y: mms.pressure(t0, x, y),
    )
    zero_f = lambda t, x, y: np.zeros((2,) + np.shape(x))
    zero_g = lambda t, x, y: np.zeros(np.shape(x))

    rows = [(tau, 0, solver.energy(state))]
    for k in range(K):
        state = solver.advance(state, zero_f, zero_g)
        rows.append((tau, state.k, solver.energy(state)))
    return rows


def run_study(config: RunConfig, threads: int = 1):
    """Execute a study and write its CSV; returns the in-memory report.

    On a solver failure the rows finished so far are written with a trailing
    ``# incomplete`` flag line, then the error propagates.
    """
    taus = config.tau if isinstance(config.tau, list) else [config.tau]
    ns = config.n if isinstance(config.n, list) else [config.n]
    points = [(n, tau) for n in ns for tau in taus]

    runner = _energy_run if config.study == "energy-test" else _error_run
    results: dict[tuple[int, float], object] = {}
    failure: SolverError | None = None
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {
                point: pool.submit(runner, config, *point) for point in points
            }
        for point, future in futures.items():
            exc = future.exception()
            if exc is not None:
                if isinstance(exc, SolverError):
                    failure = failure or exc
                else:
                    raise exc
            else:
                results[point] = future.result()
    else:
        for point in points:
            try:
                results[point] = runner(config, *point)
            except SolverError as exc:
                failure = exc
                break

    ordered = sorted(results.keys(), key=lambda p: (p[0], -p[1]))
    if config.study == "energy-test":
        rows = [row for point in ordered for row in results[point]]
        report = EnergyReport(rows=rows)
        _write_energy_csv(report, config.out, failure)
    else:
        report = StudyReport(rows=[results[point] for point in ordered])
        if failure is None:
            # on a partial sweep adjacent rows may not differ by a factor
            # of two anymore, so rates stay blank
            report.attach_rates()
        _write_error_csv(report, config.out, failure)
    if failure is not None:
        raise failure
    return report


def _fmt(value: float) -> str:
    return f"{value:.5e}"


def _fmt_rate(rate: float | None) -> str:
    return "" if rate is None else f"{rate:.4f}"


def _write_error_csv(report: StudyReport, path, failure=None) -> None:
    lines = [ERROR_HEADER]
    for row in report.rows:
        lines.append(
            ",".join(
                [
                    _fmt(row.tau),
                    _fmt(row.h),
                    _fmt(row.err_u_linf_l2),
                    _fmt(row.err_u_l2_h1),
                    _fmt(row.err_p_l2_l2),
                    _fmt(row.err_w_linf_l2),
                    _fmt(row.err_w_l2_h1),
                    _fmt_rate(row.rate_u),
                    _fmt_rate(row.rate_p),
                    _fmt_rate(row.rate_w),
                ]
            )
        )
    if failure is not None:
        lines.append(f"# incomplete: {failure}")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


def _write_energy_csv(report: EnergyReport, path, failure=None) -> None:
    lines = [ENERGY_HEADER]
    for tau, k, energy in report.rows:
        lines.append(f"{_fmt(tau)},{k},{_fmt(energy)}")
    if failure is not None:
        lines.append(f"# incomplete: {failure}")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# command line entry point
# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="microflow",
        description="Fractional-step micropolar flow studies on (-1,1)^2",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_parser = sub.add_parser("run", help="run a study from a config file")
    run_parser.add_argument("--config", required=True, help="key=value config file")
    run_parser.add_argument("--out", default=None, help="override the CSV output path")
    run_parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    text = Path(args.config).read_text(encoding="utf-8")
    try:
        config = parse_config(text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.out is not None:
        config.out = args.out

    try:
        run_study(config, threads=max(1, args.threads))
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        print(f"partial results flagged in {config.out}", file=sys.stderr)
        return 1
    print(f"wrote {config.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
