"""Command-line front end: ``shrinkpred <subcommand> [flags]``.

Subcommands
-----------
risk-curve         KL risk of each method on a grid of ||mu||
theorem1           small-t derivative of the risk difference vs its limit
integration-check  prediction risk difference vs integrated estimation risk
density-eval       log predictive densities at a given (x, y)
plot               SVG line chart from a risk-curve CSV

Settings come from ``--config FILE`` (``key = value`` lines) with flags
taking precedence.  Exit codes: 0 success, 2 configuration error,
3 numerical failure, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import io
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .estimators import Stein, Uniform, default_eb_c
from .gaussian import ProblemConfig
from .output import RISK_COLUMNS, MalformedCSV, read_risk_csv, render_svg, write_csv
from .predictive import METHOD_NAMES, make_method, predictive_stein_bayes
from .risk import DEFAULT_TRIALS, DEFAULT_Y_DRAWS, risk_curve, risk_integration_check, theorem1_derivative_check

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    d: int = 10
    u: float = 1.0
    v: float = 0.1
    grid_start: float = 0.0
    grid_stop: float = 8.0
    grid_count: int = 9
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    methods: list[str] = field(default_factory=lambda: list(METHOD_NAMES))
    eb_c: float | None = None
    n_y: int = DEFAULT_Y_DRAWS
    workers: int = 1
    out: str | None = None

    def validate(self) -> None:
        if self.d < 1:
            raise ConfigError(f"d: must be a positive integer, got {self.d}")
        if not self.u > 0:
            raise ConfigError(f"u: must be positive, got {self.u}")
        if not self.v > 0:
            raise ConfigError(f"v: must be positive, got {self.v}")
        if self.grid_count < 1:
            raise ConfigError(f"mu-norm-grid: count must be >= 1, got {self.grid_count}")
        if self.grid_start < 0 or (self.grid_count > 1 and self.grid_stop <= self.grid_start):
            raise ConfigError("mu-norm-grid: need 0 <= start < stop")
        if self.trials < 2:
            raise ConfigError(f"trials: must be >= 2, got {self.trials}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed: must be a 64-bit unsigned integer")
        if not self.methods:
            raise ConfigError("methods: need at least one method")
        bad = [m for m in self.methods if m not in METHOD_NAMES]
        if bad:
            raise ConfigError(f"methods: unknown {', '.join(bad)} (choose from {','.join(METHOD_NAMES)})")
        stein_needed = {"e1", "e2", "ps"} & set(self.methods)
        if stein_needed and self.d < 3:
            raise ConfigError(f"d: methods {','.join(sorted(stein_needed))} need d >= 3")
        if "eb" in self.methods and not self.effective_eb_c > 0:
            raise ConfigError(f"eb-c: must be positive (default d-3 = {self.d - 3})")
        if self.n_y < 1:
            raise ConfigError("n-y: must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers: must be >= 1")

    @property
    def effective_eb_c(self) -> float:
        return default_eb_c(self.d) if self.eb_c is None else self.eb_c

    @property
    def grid(self) -> np.ndarray:
        if self.grid_count == 1:
            return np.array([self.grid_start])
        return np.linspace(self.grid_start, self.grid_stop, self.grid_count)

    def problem(self) -> ProblemConfig:
        return ProblemConfig(self.d, self.u, self.v)


def parse_grid(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) == 1:
        value = float(parts[0])
        return value, value, 1
    if len(parts) != 3:
        raise ConfigError(f"mu-norm-grid: expected start:stop:count, got {text!r}")
    try:
        return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"mu-norm-grid: expected start:stop:count, got {text!r}") from None


def _parse_floats(text: str, name: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"{name}: expected comma-separated numbers, got {text!r}") from None


def read_config_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"config line {lineno}: expected key = value")
            key, value = (p.strip() for p in line.split("=", 1))
            values[key.replace("_", "-")] = value
    return values


_KEYS = ("d", "u", "v", "mu-norm-grid", "trials", "seed", "methods", "eb-c", "out", "n-y", "workers")


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    raw: dict[str, str] = {}
    if getattr(args, "config", None):
        raw.update(read_config_file(args.config))
        unknown = set(raw) - set(_KEYS) - {"t-values", "s", "t", "n-nodes"}
        if unknown:
            raise ConfigError(f"config: unknown key(s) {', '.join(sorted(unknown))}")
    for key in _KEYS:
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            raw[key] = str(value)
    cfg = ExperimentConfig()
    try:
        if "d" in raw:
            cfg.d = int(raw["d"])
        if "u" in raw:
            cfg.u = float(raw["u"])
        if "v" in raw:
            cfg.v = float(raw["v"])
        if "trials" in raw:
            cfg.trials = int(raw["trials"])
        if "seed" in raw:
            cfg.seed = int(raw["seed"])
        if "eb-c" in raw:
            cfg.eb_c = float(raw["eb-c"])
        if "n-y" in raw:
            cfg.n_y = int(raw["n-y"])
        if "workers" in raw:
            cfg.workers = int(raw["workers"])
    except ValueError as exc:
        raise ConfigError(f"invalid number: {exc}") from None
    if "mu-norm-grid" in raw:
        cfg.grid_start, cfg.grid_stop, cfg.grid_count = parse_grid(raw["mu-norm-grid"])
    if "methods" in raw:
        cfg.methods = [m.strip() for m in raw["methods"].split(",") if m.strip()]
    cfg.out = raw.get("out")
    args._raw = raw
    cfg.validate()
    return cfg


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_risk_curve(args) -> int:
    cfg = build_config(args)
    curve = risk_curve(
        cfg.methods, cfg.grid, cfg.problem(), cfg.trials, cfg.seed,
        n_y=cfg.n_y, workers=cfg.workers, eb_c=cfg.effective_eb_c,
    )
    rows = []
    for m in cfg.methods:
        for r, est in zip(curve.grid, curve.estimates[m]):
            rows.append((m, float(r), cfg.d, cfg.u, cfg.v, cfg.trials, cfg.seed, est.value, est.std_err))
    buf = io.StringIO()
    write_csv(RISK_COLUMNS, rows, buf)
    _emit(buf.getvalue(), cfg.out)
    return EXIT_OK


THEOREM1_COLUMNS = ("method", "mu_norm", "t", "d", "s", "trials", "seed", "derivative_estimate", "target", "std_err")


def cmd_theorem1(args) -> int:
    cfg = build_config(args)
    raw = args._raw
    t_values = _parse_floats(args.t_values or raw.get("t-values", "1e-2,1e-3,1e-4"), "t-values")
    if not t_values or any(t <= 0 for t in t_values):
        raise ConfigError("t-values: need positive values")
    t_values = sorted(t_values, reverse=True)
    wanted = [m for m in cfg.methods if m in ("pu", "e1", "e2")]
    if not wanted:
        raise ConfigError("methods: theorem1 needs at least one of pu,e1,e2")
    stein_models = [m for m in wanted if m in ("e1", "e2")]
    s = 1.0 / cfg.u
    rows = []
    for r in cfg.grid:
        mu = np.zeros(cfg.d)
        mu[0] = r
        results = {}
        if stein_models:
            for row in theorem1_derivative_check(Stein(), mu, s, t_values, cfg.trials, cfg.seed, models=stein_models):
                results[(row.model, row.t)] = row
        if "pu" in wanted:
            for row in theorem1_derivative_check(Uniform(), mu, s, t_values, cfg.trials, cfg.seed, models=("e1",)):
                results[("pu", row.t)] = row
        for m in wanted:
            for t in t_values:
                row = results[(m, t)]
                rows.append((m, float(r), t, cfg.d, s, cfg.trials, cfg.seed, row.derivative, row.target, row.combined_se))
    buf = io.StringIO()
    write_csv(THEOREM1_COLUMNS, rows, buf)
    _emit(buf.getvalue(), cfg.out)
    return EXIT_OK


INTEGRATION_COLUMNS = ("mu_norm", "d", "s", "t", "trials", "seed", "lhs", "lhs_se", "rhs", "rhs_se", "diff", "combined_se")


def cmd_integration_check(args) -> int:
    cfg = build_config(args)
    raw = args._raw
    try:
        s = float(args.s if args.s is not None else raw.get("s", 1.0 / cfg.u))
        t = float(args.t if args.t is not None else raw.get("t", 1.0 / cfg.v))
        n_nodes = int(args.n_nodes if args.n_nodes is not None else raw.get("n-nodes", 16))
    except ValueError as exc:
        raise ConfigError(f"invalid number: {exc}") from None
    if cfg.d < 3:
        raise ConfigError("d: integration check uses Stein's prior and needs d >= 3")
    if not (s > 0 and t > 0 and n_nodes >= 1):
        raise ConfigError("s, t: must be positive; n-nodes: must be >= 1")
    rows = []
    for r in cfg.grid:
        mu = np.zeros(cfg.d)
        mu[0] = r
        ic = risk_integration_check(mu, s, t, n_nodes, cfg.trials, cfg.seed, n_y=cfg.n_y)
        rows.append((float(r), cfg.d, s, t, cfg.trials, cfg.seed, ic.lhs, ic.lhs_se, ic.rhs, ic.rhs_se, ic.diff, ic.combined_se))
    buf = io.StringIO()
    write_csv(INTEGRATION_COLUMNS, rows, buf)
    _emit(buf.getvalue(), cfg.out)
    return EXIT_OK


def cmd_density_eval(args) -> int:
    cfg = build_config(args)
    x = np.array(_parse_floats(args.x, "x"))
    y = np.array(_parse_floats(args.y, "y"))
    if x.size != cfg.d or y.size != cfg.d:
        raise ConfigError(f"x, y: need {cfg.d} coordinates each")
    prob = cfg.problem()
    rows = []
    for m in cfg.methods:
        if m == "ps":
            dens = predictive_stein_bayes(x, prob)
        else:
            dens = make_method(m, eb_c=cfg.effective_eb_c)(x, prob)
        rows.append((m, float(dens.log_density(y))))
    buf = io.StringIO()
    write_csv(("method", "log_density"), rows, buf)
    _emit(buf.getvalue(), cfg.out)
    return EXIT_OK


def cmd_plot(args) -> int:
    text = Path(args.input).read_text(encoding="utf-8")
    series = read_risk_csv(text)
    svg = render_svg(series, error_bars=args.error_bars, title=args.title or "")
    if not args.out:
        raise ConfigError("out: plot needs an output path")
    Path(args.out).write_text(svg, encoding="utf-8")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value settings file; flags override it")
    p.add_argument("--d", type=int)
    p.add_argument("--u", type=float)
    p.add_argument("--v", type=float)
    p.add_argument("--mu-norm-grid", help="start:stop:count, or a single value")
    p.add_argument("--trials", type=int, help=f"Monte Carlo trials (default {DEFAULT_TRIALS})")
    p.add_argument("--seed", type=int)
    p.add_argument("--methods", help=f"comma list from {','.join(METHOD_NAMES)}")
    p.add_argument("--eb-c", type=float, help="empirical Bayes constant (default d-3)")
    p.add_argument("--n-y", type=int, help=f"y draws per trial for p_S (default {DEFAULT_Y_DRAWS})")
    p.add_argument("--workers", type=int, help="threads for trial evaluation")
    p.add_argument("--out", help="output path (stdout if omitted)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shrinkpred", description="Predictive densities under shrinkage priors.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("risk-curve", help="KL risk curves over ||mu||")
    _add_common(p)
    p.set_defaults(func=cmd_risk_curve)

    p = sub.add_parser("theorem1", help="small-t risk derivative check")
    _add_common(p)
    p.add_argument("--t-values", help="comma list of prediction times (default 1e-2,1e-3,1e-4)")
    p.set_defaults(func=cmd_theorem1)

    p = sub.add_parser("integration-check", help="risk difference vs integrated estimation risk")
    _add_common(p)
    p.add_argument("--s", type=float, help="observation time (default 1/u)")
    p.add_argument("--t", type=float, help="prediction time (default 1/v)")
    p.add_argument("--n-nodes", type=int, help="Gauss-Legendre nodes over tau (default 16)")
    p.set_defaults(func=cmd_integration_check)

    p = sub.add_parser("density-eval", help="log predictive densities at (x, y)")
    _add_common(p)
    p.add_argument("--x", required=True, help="comma-separated observation")
    p.add_argument("--y", required=True, help="comma-separated evaluation point")
    p.set_defaults(func=cmd_density_eval)

    p = sub.add_parser("plot", help="SVG chart from a risk-curve CSV")
    p.add_argument("input", help="risk-curve CSV")
    p.add_argument("--out", help="SVG output path")
    p.add_argument("--error-bars", action="store_true")
    p.add_argument("--title")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, MalformedCSV) as exc:
        print(f"shrinkpred: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"shrinkpred: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"shrinkpred: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"shrinkpred: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
