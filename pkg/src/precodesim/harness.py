"""Multi-seed simulation sweeps over target single-user SINR levels.

One sweep fixes a scenario family (equal or varied path loss), draws
``num_seeds`` channel realizations, places each at every grid level by
calibrating the noise variance, evaluates every requested method under
per-user MMSE detection, and aggregates sum and minimum spectral
efficiency across seeds.  Everything is deterministic in the
configuration, including the emitted CSV bytes.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .channel import (
    ScenarioConfig,
    calibrate_noise,
    decompose,
    generate_scenario,
)
from .detection import mmse_detection
from .exceptions import ConfigError, PrecodesimError, SelectionError
from .metrics import report
from .optimizer import OptConfig, optimize
from .precoding import arzf, mrt, rzf, wrzf, zf

__all__ = [
    "METHOD_TOKENS",
    "SweepConfig",
    "SweepRow",
    "SweepResult",
    "evaluate_point",
    "run_sweep",
    "format_csv",
    "emit_csv",
    "emit_plotdata",
]

CSV_HEADER = "scenario,susinr_db,method,avg_sum_se,se_std,avg_min_se,min_se_std,seeds,detection"


def _build_method(token, decomp, channels, power, noise_var, opt_config):
    if token == "mrt":
        return mrt(decomp, power)
    if token == "zf_v":
        return zf(decomp, power, basis="v")
    if token == "zf_f":
        return zf(decomp, power, basis="f")
    if token == "rzf_v":
        return rzf(decomp, power, noise_var, basis="v")
    if token == "rzf_f":
        return rzf(decomp, power, noise_var, basis="f")
    if token == "wrzf":
        return wrzf(decomp, power, noise_var)
    if token == "arzf":
        return arzf(decomp, power, noise_var)
    if token == "opt":
        return optimize(decomp, channels, power, noise_var, opt_config).precoder
    raise ConfigError(f"unknown method token {token!r}")


METHOD_TOKENS = ("mrt", "zf_v", "zf_f", "rzf_v", "rzf_f", "wrzf", "arzf", "opt")


@dataclass(frozen=True)
class SweepConfig:
    """One sweep: scenario family, SINR grid, seeds and methods."""

    scenario: str = "varied"
    susinr_db: tuple = (0.0, 4.0, 8.0, 12.0, 16.0, 20.0, 24.0, 28.0, 32.0, 36.0, 40.0)
    num_seeds: int = 40
    seed_base: int = 0
    power: float = 1.0
    methods: tuple = METHOD_TOKENS
    num_tx: int = 64
    num_users: int = 4
    rx_per_user: int = 16
    layers_per_user: int = 2
    opt: OptConfig = field(default_factory=OptConfig)

    def __post_init__(self):
        if self.scenario not in ("equal", "varied"):
            raise ConfigError(f"scenario must be 'equal' or 'varied', got {self.scenario!r}")
        object.__setattr__(self, "susinr_db", tuple(float(x) for x in self.susinr_db))
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.susinr_db:
            raise ConfigError("susinr_db grid must be nonempty")
        if self.num_seeds < 1:
            raise ConfigError("num_seeds must be >= 1")
        if self.power <= 0:
            raise ConfigError("power must be positive")
        unknown = [m for m in self.methods if m not in METHOD_TOKENS]
        if unknown or not self.methods:
            raise ConfigError(f"unknown methods {unknown}, valid: {METHOD_TOKENS}")

    def scenario_config(self, seed: int) -> ScenarioConfig:
        return ScenarioConfig(
            num_tx=self.num_tx,
            num_users=self.num_users,
            rx_per_user=self.rx_per_user,
            layers_per_user=self.layers_per_user,
            path_loss=("varied" if self.scenario == "varied" else "equal"),
            seed=seed,
        )


@dataclass(frozen=True)
class SweepRow:
    """Aggregated result for one (SINR level, method) cell."""

    scenario: str
    susinr_db: float
    method: str
    avg_sum_se: float
    se_std: float
    avg_min_se: float
    min_se_std: float
    seeds: int
    detection: str = "mmse"


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    failures: tuple
    config: SweepConfig

    def row(self, susinr_db: float, method: str) -> SweepRow:
        for r in self.rows:
            if r.susinr_db == susinr_db and r.method == method:
                return r
        raise KeyError(f"no row for ({susinr_db}, {method})")


def evaluate_point(channels, decomp, power, susinr_db, methods, opt_config=None):
    """All requested methods on one realization at one SINR level.

    Calibrates the noise variance for this realization, builds each
    precoder, runs per-user MMSE detection and returns a dict mapping
    method token to its metric report.
    """
    opt_config = opt_config or OptConfig()
    noise_var = calibrate_noise(decomp, power, susinr_db)
    out = {}
    for token in methods:
        pre = _build_method(token, decomp, channels, power, noise_var, opt_config)
        det = mmse_detection(channels, pre, noise_var)
        out[token] = report(channels, pre, det, noise_var)
    return out


def run_sweep(config: SweepConfig, progress=None) -> SweepResult:
    """Full multi-seed sweep.

    A seed whose realization cannot be generated or evaluated is
    recorded in ``failures`` and dropped from aggregation; the per-row
    ``seeds`` count reflects only successful realizations.  Raises
    :class:`SelectionError` if every seed fails.
    """
    per_seed = []
    failures = []
    for i in range(config.num_seeds):
        seed = config.seed_base + i
        try:
            channels = generate_scenario(config.scenario_config(seed))
            decomp = decompose(channels)
            vals = {}
            for su in config.susinr_db:
                reps = evaluate_point(
                    channels, decomp, config.power, su, config.methods, config.opt
                )
                for m, rep in reps.items():
                    vals[(su, m)] = (rep.sum_se, rep.min_se)
            per_seed.append(vals)
        except PrecodesimError as exc:
            failures.append((seed, f"{type(exc).__name__}: {exc}"))
        if progress is not None:
            progress(i + 1, config.num_seeds)
    n = len(per_seed)
    if n == 0:
        raise SelectionError(
            f"all {config.num_seeds} seeds failed; first: {failures[0][1]}"
        )
    ddof = 1 if n > 1 else 0
    rows = []
    for su in config.susinr_db:
        for m in config.methods:
            sums = np.array([v[(su, m)][0] for v in per_seed])
            mins = np.array([v[(su, m)][1] for v in per_seed])
            rows.append(
                SweepRow(
                    scenario=config.scenario,
                    susinr_db=su,
                    method=m,
                    avg_sum_se=float(sums.mean()),
                    se_std=float(sums.std(ddof=ddof)),
                    avg_min_se=float(mins.mean()),
                    min_se_std=float(mins.std(ddof=ddof)),
                    seeds=n,
                )
            )
    return SweepResult(rows=tuple(rows), failures=tuple(failures), config=config)


def format_csv(result: SweepResult) -> str:
    """Aggregated rows as CSV text; identical sweeps yield identical
    bytes."""
    lines = [CSV_HEADER]
    for r in result.rows:
        lines.append(
            f"{r.scenario},{r.susinr_db:.17g},{r.method},"
            f"{r.avg_sum_se:.17g},{r.se_std:.17g},"
            f"{r.avg_min_se:.17g},{r.min_se_std:.17g},"
            f"{r.seeds},{r.detection}"
        )
    return "\n".join(lines) + "\n"


def emit_csv(path, result: SweepResult) -> None:
    with open(path, "w", newline="") as f:
        f.write(format_csv(result))


def emit_plotdata(path, result: SweepResult) -> None:
    """Write per-method series (x axis: SINR grid) as JSON."""
    grid = list(result.config.susinr_db)
    series = {}
    for m in result.config.methods:
        rows = [result.row(su, m) for su in grid]
        series[m] = {
            "avg_sum_se": [r.avg_sum_se for r in rows],
            "se_std": [r.se_std for r in rows],
            "avg_min_se": [r.avg_min_se for r in rows],
            "min_se_std": [r.min_se_std for r in rows],
        }
    doc = {
        "scenario": result.config.scenario,
        "detection": "mmse",
        "susinr_db": grid,
        "seeds": result.rows[0].seeds if result.rows else 0,
        "series": series,
        "failures": [list(f) for f in result.failures],
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
