"""Parameter sweeps, figure presets and CSV serialisation."""

from __future__ import annotations

import io
import itertools
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .estimator import RetrialSpectrumModel, check_solver
from .model import INTEGER_FIELDS, ModelParams
from .simulation import SimConfig, run_simulation

MAX_POINTS = 10_000

BASELINE = dict(M=2, N=2, L=10, lambda_p=0.1, lambda_s=1.5, mu_p=0.2, mu_s=0.4, theta=2.0)

SOLVE_COLUMNS = (
    "M", "N", "L", "lambda_p", "lambda_s", "mu_p", "mu_s", "theta", "states",
    "p_drop_paper", "p_drop_exact", "throughput_paper", "throughput_exact",
    "mean_orbit", "su_utilization", "pu_blocking", "solver", "residual",
)
SIM_COLUMNS = (
    "horizon", "warmup", "reps", "seed", "p_drop_hat", "p_drop_ci",
    "throughput_hat", "throughput_ci", "mean_orbit_hat", "pu_blocking_hat",
)


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def format_value(x) -> str:
    """6 significant digits; scientific below 1e-4 in magnitude."""
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    return "%.6g" % x


def to_csv(rows, columns) -> str:
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(format_value(row[c]) for c in columns) + "\n")
    return buf.getvalue()


@dataclass
class SimSettings:
    horizon: float = 1e4
    warmup: float | None = None
    reps: int = 100
    seed: int = 0


@dataclass
class SweepSpec:
    base: dict = field(default_factory=lambda: dict(BASELINE))
    axes: list = field(default_factory=list)  # [(names tuple, [value tuples])]
    solver: str = "direct"
    simulate: SimSettings | None = None
    output: str | None = None

    def size(self) -> int:
        return math.prod(len(values) for _, values in self.axes) if self.axes else 1

    def points(self) -> list[dict]:
        if self.size() > MAX_POINTS:
            raise ConfigError(f"sweep has {self.size()} points, limit is {MAX_POINTS}")
        out = []
        for combo in itertools.product(*(values for _, values in self.axes)):
            point = dict(self.base)
            for (names, _), values in zip(self.axes, combo):
                point.update(zip(names, values))
            out.append(point)
        return out

    def columns(self) -> tuple[str, ...]:
        cols = SOLVE_COLUMNS
        if self.solver == "both":
            cols += ("solver_disagreement",)
        if self.simulate is not None:
            cols += SIM_COLUMNS
        return cols


def _coerce(name: str, text: str, line: int | None):
    if name not in ModelParams.field_names():
        raise ConfigError(f"unknown model parameter {name!r}", line)
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{name}: not a number: {text!r}", line) from None
    if name in INTEGER_FIELDS:
        if not value.is_integer():
            raise ConfigError(f"{name}: expected an integer, got {text!r}", line)
        return int(value)
    return value


_RANGE = re.compile(r"^\s*(\S+)\s*\.\.\s*(\S+)\s+step\s+(\S+)\s*$")


def _expand_range(text: str, line: int) -> list[str]:
    m = _RANGE.match(text)
    if not m:
        return [v.strip() for v in text.split(",")]
    try:
        start, stop, step = (float(g) for g in m.groups())
    except ValueError:
        raise ConfigError(f"malformed range {text!r}", line) from None
    if step <= 0 or stop < start:
        raise ConfigError(f"empty or inverted range {text!r}", line)
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [repr(round(start + n * step, 12)) for n in range(count)]


def _split_tuples(text: str, line: int) -> list[list[str]]:
    items = re.findall(r"\(([^()]*)\)", text)
    leftover = re.sub(r"\([^()]*\)", "", text).replace(",", "").strip()
    if not items or leftover:
        raise ConfigError(f"expected a list of tuples like (2,2), (3,2), got {text!r}", line)
    return [[v.strip() for v in item.split(",")] for item in items]


def parse_sweep_config(text: str) -> SweepSpec:
    """Parse the line-based sweep format.

    ``key = value`` sets a base parameter or an option, ``sweep key = v1, v2``
    or ``sweep key = a..b step s`` adds an axis, ``sweep k1,k2 = (a,b), (c,d)``
    adds a joint axis; ``#`` starts a comment.
    """
    spec = SweepSpec()
    sim: dict = {}
    simulate = False
    seen_axes: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (part.strip() for part in content.split("=", 1))
        if not value:
            raise ConfigError(f"missing value for {key!r}", lineno)

        if key.startswith("sweep ") or key == "sweep":
            names = tuple(n.strip() for n in key[len("sweep"):].split(","))
            if not names or not all(names):
                raise ConfigError("sweep needs a parameter name", lineno)
            for n in names:
                if n in seen_axes:
                    raise ConfigError(f"parameter {n!r} swept twice", lineno)
                seen_axes.add(n)
            if len(names) == 1:
                raw_values = [[v] for v in _expand_range(value, lineno)]
            else:
                raw_values = _split_tuples(value, lineno)
            values = []
            for tup in raw_values:
                if len(tup) != len(names) or not all(tup):
                    raise ConfigError(f"expected {len(names)} values per entry", lineno)
                values.append(tuple(_coerce(n, v, lineno) for n, v in zip(names, tup)))
            spec.axes.append((names, values))
        elif key in ModelParams.field_names():
            spec.base[key] = _coerce(key, value, lineno)
        elif key == "solver":
            try:
                spec.solver = check_solver(value)
            except ValueError as exc:
                raise ConfigError(str(exc), lineno) from None
        elif key == "simulate":
            if value.lower() not in ("true", "false", "yes", "no", "1", "0"):
                raise ConfigError(f"simulate must be true or false, got {value!r}", lineno)
            simulate = value.lower() in ("true", "yes", "1")
        elif key in ("horizon", "warmup"):
            try:
                sim[key] = float(value)
            except ValueError:
                raise ConfigError(f"{key}: not a number: {value!r}", lineno) from None
        elif key in ("reps", "seed"):
            if not value.isdigit():
                raise ConfigError(f"{key}: expected a nonnegative integer, got {value!r}", lineno)
            sim[key] = int(value)
        elif key == "output":
            spec.output = value
        else:
            raise ConfigError(f"unknown key {key!r}", lineno)
    if simulate:
        spec.simulate = SimSettings(**sim)
    try:
        ModelParams(**spec.base)
    except ValueError as exc:
        raise ConfigError(f"base point: {exc}") from None
    if spec.size() > MAX_POINTS:
        raise ConfigError(f"sweep has {spec.size()} points, limit is {MAX_POINTS}")
    return spec


def evaluate_point(point: dict, solver: str = "direct", simulate: SimSettings | None = None) -> dict:
    """Solve (and optionally simulate) one parameter point into a CSV row dict."""
    model = RetrialSpectrumModel(**point, solver=solver).fit()
    p = model.params_
    row = dict(p.as_dict())
    row["states"] = len(model.state_space_)
    row.update(model.metrics_.as_dict())
    row["solver"] = check_solver(solver)
    row["residual"] = model.residual_
    if model.solver_disagreement_ is not None:
        row["solver_disagreement"] = model.solver_disagreement_
    if simulate is not None:
        config = SimConfig(p, simulate.horizon, simulate.warmup, simulate.reps, simulate.seed)
        est = run_simulation(config)
        row.update(
            horizon=config.horizon, warmup=config.warmup, reps=config.replications, seed=config.seed,
            p_drop_hat=est.p_drop_hat, p_drop_ci=est.p_drop_ci,
            throughput_hat=est.throughput_hat, throughput_ci=est.throughput_ci,
            mean_orbit_hat=est.mean_orbit_hat, pu_blocking_hat=est.pu_blocking_hat,
        )
    return row


def _evaluate_star(args):
    return evaluate_point(*args)


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[dict]:
    """One row per cartesian point, in axis order whatever ``workers`` is."""
    jobs = [(point, spec.solver, spec.simulate) for point in spec.points()]
    if workers <= 1 or len(jobs) <= 1:
        return [_evaluate_star(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_evaluate_star, jobs))


def sweep_csv(spec: SweepSpec, workers: int = 1) -> str:
    return to_csv(run_sweep(spec, workers), spec.columns())


LAMBDA_P_VALUES = (0.1, 0.2, 0.3, 0.4, 0.5)
LAMBDA_S_VALUES = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
THETA_VALUES = (0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0)
BAND_PAIRS = ((2, 2), (3, 2), (3, 3))


def figure_presets(fig_id: int, solver: str = "direct",
                   simulate: SimSettings | None = None) -> dict[str, SweepSpec]:
    """Sweeps behind the arrival-rate (2, 3) and retrial-rate (4) figures.

    Returns ``{file name: spec}``. Values not fixed by the baseline are
    reconstructions: arrival-rate grids and the theta grid are chosen to span
    the plotted ranges.
    """
    def spec(axes, **base):
        return SweepSpec(base={**BASELINE, **base}, axes=axes, solver=solver, simulate=simulate)

    mn_axis = (("M", "N"), list(BAND_PAIRS))
    orbit_axis = (("L",), [(0,), (10,)])
    if fig_id in (2, 3):
        return {
            f"fig{fig_id}_lambda_p.csv": spec(
                [orbit_axis, mn_axis, (("lambda_p",), [(v,) for v in LAMBDA_P_VALUES])], theta=2.0),
            f"fig{fig_id}_lambda_s.csv": spec(
                [orbit_axis, mn_axis, (("lambda_s",), [(v,) for v in LAMBDA_S_VALUES])], theta=2.0),
        }
    if fig_id == 4:
        return {
            "fig4_theta.csv": spec(
                [(("L",), [(2,), (5,), (10,)]), (("theta",), [(v,) for v in THETA_VALUES])],
                M=3, N=2),
        }
    raise ValueError(f"unknown figure id {fig_id!r}; expected 2, 3 or 4")
