"""Command-line harness: rate sweeps, seeded simulations and network tools.

Examples::

    structcodes rates --preset sum-difference --min 0.1 --max 20 --points 200
    structcodes simulate korner-marton --seed 7 --trials 500 --set n=14 --set rate=0.8
    structcodes simulate gaussian-sum --mode concrete --set lattice=D4 --seed 1
    structcodes network transform butterfly_binary      # bundled fixture name or a path

Config files are JSON objects with optional keys ``experiment``, ``params``,
``seed``, ``trials``, ``mode`` and (for ``rates``) ``preset``, ``min``,
``max``, ``points``, ``scale``.  Command-line flags override the file.

Exit codes: 0 success, 1 network failed validation, 2 configuration or
input error, 3 guard violation (a search, enumeration or power limit).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, GuardViolation, ParseError, StructCodesError
from .gf import PrimeField, is_prime
from .infotheory import Pmf
from .montecarlo import error_rate, run_trials

MAX_SEED = 2**64


# --- results ----------------------------------------------------------------


def fmt_number(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


def _json_value(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return float(format(x, ".12g")) if math.isfinite(x) else str(x)
    if isinstance(x, dict):
        return {k: _json_value(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_value(v) for v in x]
    return x


@dataclass
class ResultTable:
    columns: dict
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"column lengths differ: { {k: len(v) for k, v in self.columns.items()} }")

    @property
    def rows(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def to_csv(self) -> str:
        lines = [f"# {k}: {v if isinstance(v, str) else json.dumps(_json_value(v))}" for k, v in self.metadata.items()]
        names = list(self.columns)
        lines.append(",".join(names))
        for i in range(self.rows):
            lines.append(",".join(fmt_number(self.columns[c][i]) for c in names))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps({"metadata": _json_value(self.metadata), "columns": _json_value(self.columns)}, indent=2) + "\n"

    def render(self, fmt: str) -> str:
        return self.to_csv() if fmt == "csv" else self.to_json()


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict
    seed: int | None
    trials: int
    mode: str = "ideal"

    def echo(self) -> dict:
        return {"experiment": self.experiment, "params": self.params, "seed": self.seed, "trials": self.trials, "mode": self.mode}


def provenance(command: str) -> str:
    return f"structcodes {__version__} {command}"


# --- experiments --------------------------------------------------------------

EXPERIMENT_PARAMS = {
    "korner-marton": {"p": 0.05, "n": 14, "rate": 0.8},
    "mac-compute": {"q": 2, "M": 2, "p": 0.05, "n": 14, "rate": 0.5},
    "gaussian-sum": {"M": 2, "P": 1.0, "N": 1.0, "sigma_s2": 1.0, "ell": 2, "k": 1000, "lattice": "Z"},
    "relay-sum-diff": {"P": 10.0, "N": 1.0, "R0": 2.0, "sigma_s2": 1.0, "ell": 4, "k": 1000, "lattice": "Z"},
    "butterfly-binary": {"C": 1.0, "p": 0.11, "n": 18, "rate_fraction": 0.9, "code_draws": 16},
    "butterfly-gaussian": {"P": 10.0, "N": 1.0, "ell": 4, "k": 1000, "sigma_s2": 1.0},
}
INTEGER_PARAMS = {"n", "q", "M", "ell", "k", "code_draws", "J"}
STRING_PARAMS = {"lattice"}
DEFAULT_TRIALS = {"korner-marton": 500, "mac-compute": 500, "butterfly-binary": 200}


def _coerce(name: str, value):
    if name in STRING_PARAMS:
        if not isinstance(value, str):
            raise ConfigError(f"parameter {name} must be a string")
        return value
    if isinstance(value, str):
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(f"parameter {name}={value!r} is not a number") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"parameter {name} must be a finite number, got {value!r}")
    if name in INTEGER_PARAMS:
        if value != int(value):
            raise ConfigError(f"parameter {name} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def resolve_params(allowed: dict, given: dict) -> dict:
    unknown = sorted(set(given) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown parameters {unknown}; allowed: {sorted(allowed)}")
    out = dict(allowed)
    out.update({k: _coerce(k, v) for k, v in given.items()})
    return out


def _aggregate_errors(flags) -> dict:
    r = error_rate(flags)
    return {"errors": r.errors, "trials": r.trials, "error_rate": r.rate, "ci_low": r.ci_low, "ci_high": r.ci_high}


def _error_table(flags: list[bool], extra: dict | None = None) -> dict:
    agg = _aggregate_errors(flags)
    t = len(flags)
    cols = {"trial": list(range(t)) + ["aggregate"], "error": [int(f) for f in flags] + [agg["error_rate"]]}
    cols["ci_low"] = [None] * t + [agg["ci_low"]]
    cols["ci_high"] = [None] * t + [agg["ci_high"]]
    for k, v in (extra or {}).items():
        cols[k] = list(v[0]) + [v[1]]
    return cols


def _lattice(name: str):
    from .lattice import standard_lattice

    try:
        return standard_lattice(name)
    except StructCodesError as e:
        raise ConfigError(str(e)) from None


def _mean_table(trials: int, series: dict) -> dict:
    cols = {"trial": list(range(trials)) + ["mean"]}
    for k, values in series.items():
        cols[k] = list(values) + [float(np.mean(values))]
    return cols


def exp_korner_marton(c: ExperimentConfig) -> tuple[dict, dict]:
    from .linear_coding import km_trial

    p = c.params
    flags = run_trials(lambda rng: km_trial(p["p"], p["n"], p["rate"], rng), c.seed, c.trials)
    return _error_table(flags), {}


def exp_mac_compute(c: ExperimentConfig) -> tuple[dict, dict]:
    from .linear_coding import mac_uniform_trial
    from .rates import discrete_mac_rates

    p = c.params
    q, M = p["q"], p["M"]
    if not is_prime(q):
        raise ConfigError(f"q={q} is not prime")
    noise = Pmf.symmetric(q, p["p"])
    outs = run_trials(lambda rng: mac_uniform_trial(q, [1] * M, [1] * M, noise, p["n"], p["rate"], rng), c.seed, c.trials)
    cap = discrete_mac_rates(PrimeField(q), noise, math.log2(q)).C
    return _error_table([o.error for o in outs]), {"computation_capacity": cap}


def exp_gaussian_sum(c: ExperimentConfig) -> tuple[dict, dict]:
    from .gaussian_compute import GaussianMacParams, sum_pipeline

    p = c.params
    gp = GaussianMacParams(M=p["M"], P=p["P"], N=p["N"], sigma_s2=p["sigma_s2"], k=p["k"], ell=p["ell"])
    lat = _lattice(p["lattice"]) if c.mode == "concrete" else None
    res = run_trials(lambda rng: sum_pipeline(gp, c.mode, rng, lattice=lat), c.seed, c.trials)
    cols = _mean_table(c.trials, {"empirical_mse": [r.empirical_mse for r in res]})
    cols["predicted_mse"] = [r.predicted_mse for r in res] + [res[0].predicted_mse]
    meta = {"predicted_mse": res[0].predicted_mse}
    if c.mode == "concrete":
        wraps = [float(np.mean(r.wrap_fraction)) if r.wrap_fraction else 0.0 for r in res]
        cols["wrap_fraction"] = wraps + [float(np.mean(wraps))]
    return cols, meta


def exp_relay(c: ExperimentConfig) -> tuple[dict, dict]:
    from .gaussian_compute import sum_difference_relay_pipeline

    p = c.params
    lat = _lattice(p["lattice"]) if c.mode == "concrete" else None
    res = run_trials(
        lambda rng: sum_difference_relay_pipeline(p["P"], p["N"], p["R0"], p["sigma_s2"], p["ell"], p["k"], c.mode, rng, lat), c.seed, c.trials
    )
    names = ("D_u", "D_v", "D_s1", "D_s2", "empirical_rate")
    cols = _mean_table(c.trials, {k: [getattr(r, k) for r in res] for k in names})
    meta = {"achievable_rate": res[0].achievable_rate, "worst_case_distortion": res[0].worst_case_distortion, "rate_clamped": res[0].clamped}
    return cols, meta


def exp_butterfly_binary(c: ExperimentConfig) -> tuple[dict, dict]:
    from .network import binary_butterfly_multicast_trial, butterfly_split
    from .rates import butterfly_binary_rates

    p = c.params
    outs = run_trials(
        lambda rng: binary_butterfly_multicast_trial(p["C"], p["p"], p["n"], p["rate_fraction"], rng, code_draws=p["code_draws"]),
        c.seed,
        c.trials,
    )
    a, u = butterfly_split(p["C"], p["p"], p["n"], p["rate_fraction"])
    extra = {
        "left_error": ([int(o.left_error) for o in outs], float(np.mean([o.left_error for o in outs]))),
        "right_error": ([int(o.right_error) for o in outs], float(np.mean([o.right_error for o in outs]))),
    }
    meta = {"delivered_bits": a + u, "mac_bits": u, "rate": (a + u) / p["n"], "capacity": butterfly_binary_rates(p["C"], p["p"]).capacity}
    return _error_table([o.error for o in outs], extra), meta


def exp_butterfly_gaussian(c: ExperimentConfig) -> tuple[dict, dict]:
    from .network import gaussian_butterfly_trial

    p = c.params
    res = run_trials(lambda rng: gaussian_butterfly_trial(p["P"], p["N"], p["ell"], p["k"], rng, p["sigma_s2"]), c.seed, c.trials)
    names = ("D_sum", "D_sum_quantized", "D_direct", "D_combined")
    cols = _mean_table(c.trials, {k: [getattr(r, k) for r in res] for k in names})
    t = res[0].trace
    meta = {"D": t.D, "bound_combined": t.D_combined, "rate": t.rate, "limit": t.limit}
    return cols, meta


EXPERIMENTS = {
    "korner-marton": exp_korner_marton,
    "mac-compute": exp_mac_compute,
    "gaussian-sum": exp_gaussian_sum,
    "relay-sum-diff": exp_relay,
    "butterfly-binary": exp_butterfly_binary,
    "butterfly-gaussian": exp_butterfly_gaussian,
}


def cmd_simulate(c: ExperimentConfig) -> ResultTable:
    if c.experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {c.experiment!r}; choose from {sorted(EXPERIMENTS)}")
    if c.seed is None:
        raise ConfigError("a seed is required for stochastic experiments")
    if not (0 <= c.seed < MAX_SEED):
        raise ConfigError("seed must be a 64-bit unsigned integer")
    if c.trials < 1:
        raise ConfigError("trials must be positive")
    if c.mode not in ("ideal", "concrete"):
        raise ConfigError(f"mode must be ideal or concrete, got {c.mode!r}")
    cols, meta = EXPERIMENTS[c.experiment](c)
    return ResultTable(cols, {"provenance": provenance("simulate"), "config": c.echo(), **meta})


# --- rate sweeps --------------------------------------------------------------


def _clamp_col(flags) -> str:
    return ";".join(flags)


def _rates_sum_difference(x: float, p: dict) -> dict:
    from .rates import awgn_capacity, sum_difference_rates

    R0 = p["R0"] if p["R0"] >= 0 else awgn_capacity(x, 1.0)
    ell = int(p["ell"]) if p["ell"] > 0 else None
    r = sum_difference_rates(x, 1.0, R0, ell)
    out = {"R0": R0, "r_lat": r.r_lat, "r_df": r.r_df, "r_cf": r.r_cf}
    if ell is not None:
        out["r_lat_finite_ell"] = r.r_lat_finite_ell
    out["clamped"] = _clamp_col(r.clamped)
    return out


def _rates_butterfly_binary(x: float, p: dict) -> dict:
    from .rates import butterfly_binary_rates

    r = butterfly_binary_rates(p["C"], x)
    return {"capacity": r.capacity, "r_df": r.r_df, "r_cf": r.r_cf}


def _rates_butterfly_gaussian(x: float, p: dict) -> dict:
    from .rates import butterfly_gaussian_rates

    r = butterfly_gaussian_rates(x, 1.0)
    return {"r_struct": r.r_struct, "r_df": r.r_df, "r_cf": r.r_cf, "r3_lp": r.r3_lp, "r3_df": r.r3_df, "clamped": _clamp_col(r.clamped)}


def _rates_linear_processing(x: float, p: dict) -> dict:
    from .rates import linear_processing_rates

    r = linear_processing_rates(int(p["J"]), x, 1.0)
    return {"r_lp": r.r_lp, "r_df": r.r_df, "clamped": _clamp_col(r.clamped)}


def _rates_gaussian_sum(x: float, p: dict) -> dict:
    from .rates import gaussian_sum_distortions

    d = gaussian_sum_distortions(int(p["M"]), x, 1.0, p["sigma_s2"], int(p["ell"]))
    return {"d_achievable": d.d_achievable, "d_lower": d.d_lower, "d_random": d.d_random}


@dataclass(frozen=True)
class Preset:
    variable: str
    lo: float
    hi: float
    points: int
    scale: str
    params: dict
    row: object


PRESETS = {
    # R0 < 0 means "use the relay-link capacity 1/2 log(1 + snr)"; ell = 0 skips the finite-ell column
    "sum-difference": Preset("snr", 0.1, 20.0, 200, "linear", {"R0": -1.0, "ell": 0}, _rates_sum_difference),
    "butterfly-binary": Preset("p", 0.0, 0.5, 51, "linear", {"C": 1.0}, _rates_butterfly_binary),
    "butterfly-gaussian": Preset("snr", 0.1, 100.0, 100, "log", {}, _rates_butterfly_gaussian),
    "linear-processing": Preset("snr", 0.1, 100.0, 100, "log", {"J": 2}, _rates_linear_processing),
    "gaussian-sum": Preset("snr", 0.1, 100.0, 100, "log", {"M": 2, "sigma_s2": 1.0, "ell": 2}, _rates_gaussian_sum),
}


def sweep_grid(lo: float, hi: float, points: int, scale: str) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ConfigError("sweep bounds must be finite")
    if lo > hi:
        raise ConfigError(f"sweep minimum {lo} exceeds maximum {hi}")
    if points < 1:
        raise ConfigError("sweep needs at least one point")
    if points == 1 or lo == hi:
        return [lo]
    if scale == "log":
        if lo <= 0:
            raise ConfigError("log sweeps need a positive minimum")
        return [lo * (hi / lo) ** (i / (points - 1)) for i in range(points)]
    if scale != "linear":
        raise ConfigError(f"scale must be linear or log, got {scale!r}")
    return [lo + (hi - lo) * i / (points - 1) for i in range(points)]


def cmd_rates(preset: str, params: dict | None = None, lo=None, hi=None, points=None, scale=None) -> ResultTable:
    from .errors import DomainError
    from .rates import linear_processing_threshold, relay_crossover

    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    pr = PRESETS[preset]
    p = dict(pr.params)
    for k, v in (params or {}).items():
        if k not in p:
            raise ConfigError(f"unknown parameter {k!r} for preset {preset}; allowed: {sorted(p)}")
        p[k] = _coerce(k, v)
    grid = sweep_grid(pr.lo if lo is None else lo, pr.hi if hi is None else hi, pr.points if points is None else points, pr.scale if scale is None else scale)
    rows = []
    for x in grid:
        try:
            rows.append(pr.row(x, p))
        except DomainError as e:
            raise ConfigError(f"{pr.variable}={x}: {e}") from None
    cols = {pr.variable: grid}
    for name in rows[0]:
        cols[name] = [r[name] for r in rows]
    meta = {"provenance": provenance("rates"), "config": {"preset": preset, "params": p, "min": grid[0], "max": grid[-1], "points": len(grid)}}
    if preset == "sum-difference" and p["R0"] < 0:
        meta["crossover_snr"] = relay_crossover()
    if preset == "linear-processing":
        meta["threshold_snr"] = linear_processing_threshold(int(p["J"]))
    return ResultTable(cols, meta)


# --- network commands ---------------------------------------------------------


def read_network_arg(arg: str):
    """A path to a JSON file or the name of a bundled fixture.  Returns (MacNetwork | None, P2PNetwork | None)."""
    from .network import FIXTURES, P2PNetwork, fixture_text, parse_network

    path = Path(arg)
    if path.exists():
        text = path.read_text()
    elif arg in FIXTURES:
        text = fixture_text(arg)
    else:
        raise ConfigError(f"no such file or fixture: {arg}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{arg}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    if isinstance(data, dict) and "edges" in data and "edges_nn" not in data:
        return None, P2PNetwork.from_json(text)
    return parse_network(text), None


def cmd_network(sub: str, arg: str, seed: int | None = None, q: int | None = None, method: str = "guided", unit: float = 1.0, quantum: float | None = None):
    """Returns (text, exit_code)."""
    from .network import DEFAULT_QUANTUM, construct_network_code, equivalent_p2p, multicast_maxflow, validate_network, validate_p2p

    mac, p2p = read_network_arg(arg)
    if sub == "validate":
        violations = [str(v) for v in (validate_network(mac) if mac is not None else validate_p2p(p2p))]
        report = {"valid": not violations, "violations": violations}
        return json.dumps(report, indent=2) + "\n", 0 if not violations else 1
    if p2p is None:
        p2p = equivalent_p2p(mac)
    if sub == "transform":
        return p2p.to_json() + "\n", 0
    if sub == "maxflow":
        res = multicast_maxflow(p2p, quantum=DEFAULT_QUANTUM if quantum is None else quantum)
        table = ResultTable(
            {"receiver": list(res.per_receiver), "maxflow": list(res.per_receiver.values())},
            {"provenance": provenance("network maxflow"), "bound": res.bound, "quantum": res.quantum, "rounding_loss": res.rounding_loss},
        )
        return table, 0
    if sub == "code":
        if seed is None:
            raise ConfigError("network code construction needs --seed")
        L = len(p2p.receivers)
        if q is None:
            q = L + 1
            while not is_prime(q):
                q += 1
        if not is_prime(q):
            raise ConfigError(f"q={q} is not prime")
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        code = construct_network_code(p2p, PrimeField(q), rng, method=method, unit=unit)
        return json.dumps(code.to_dict(), indent=2) + "\n", 0
    raise ConfigError(f"unknown network subcommand {sub!r}")


# --- argument handling --------------------------------------------------------


def _parse_sets(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _read_config(path) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    allowed = {"experiment", "params", "seed", "trials", "mode", "preset", "min", "max", "points", "scale"}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}")
    return data


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="structcodes", description="Structured-code computation and network experiments.")
    ap.add_argument("--version", action="version", version=f"structcodes {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, stochastic=True):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one parameter")
        if stochastic:
            p.add_argument("--seed", type=int)
            p.add_argument("--trials", type=int)
            p.add_argument("--mode", choices=("ideal", "concrete"))

    r = sub.add_parser("rates", help="closed-form rate sweeps")
    common(r, stochastic=False)
    r.add_argument("--preset", choices=sorted(PRESETS))
    r.add_argument("--min", type=float, dest="lo")
    r.add_argument("--max", type=float, dest="hi")
    r.add_argument("--points", type=int)
    r.add_argument("--scale", choices=("linear", "log"))

    s = sub.add_parser("simulate", help="seeded Monte Carlo experiments")
    s.add_argument("experiment", nargs="?", choices=sorted(EXPERIMENTS))
    common(s)

    n = sub.add_parser("network", help="validate, transform, max-flow and code construction")
    n.add_argument("action", choices=("validate", "transform", "maxflow", "code"))
    n.add_argument("file", help="network JSON path or fixture name")
    n.add_argument("--out")
    n.add_argument("--format", choices=("csv", "json"), default=None)
    n.add_argument("--seed", type=int)
    n.add_argument("--q", type=int, help="field size for code construction")
    n.add_argument("--method", choices=("guided", "random"), default="guided")
    n.add_argument("--unit", type=float, default=1.0, help="capacity of one unit pipe")
    n.add_argument("--quantum", type=float, help="max-flow capacity quantum")
    return ap


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    code = 0
    if args.command == "rates":
        cfg = _read_config(args.config)
        preset = args.preset or cfg.get("preset") or "sum-difference"
        params = dict(cfg.get("params", {}))
        params.update(_parse_sets(args.set))
        pick = lambda a, k: a if a is not None else cfg.get(k)  # noqa: E731
        table = cmd_rates(preset, params, pick(args.lo, "min"), pick(args.hi, "max"), pick(args.points, "points"), pick(args.scale, "scale"))
        _emit(table.render(args.format or "csv"), args.out)
    elif args.command == "simulate":
        cfg = _read_config(args.config)
        name = args.experiment or cfg.get("experiment")
        if name not in EXPERIMENTS:
            raise ConfigError(f"unknown or missing experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
        given = dict(cfg.get("params", {}))
        given.update(_parse_sets(args.set))
        trials = args.trials if args.trials is not None else cfg.get("trials", DEFAULT_TRIALS.get(name, 20))
        seed = args.seed if args.seed is not None else cfg.get("seed")
        c = ExperimentConfig(name, resolve_params(EXPERIMENT_PARAMS[name], given), seed, int(trials), args.mode or cfg.get("mode", "ideal"))
        _emit(cmd_simulate(c).render(args.format or "csv"), args.out)
    else:
        result, code = cmd_network(args.action, args.file, args.seed, args.q, args.method, args.unit, args.quantum)
        text = result.render(args.format or "csv") if isinstance(result, ResultTable) else result
        _emit(text, args.out)
    print(f"wall time: {time.perf_counter() - start:.3f} s", file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        return run(argv)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except GuardViolation as e:
        print(f"guard violation: {type(e).__name__}: {e}", file=sys.stderr)
        return 3
    except StructCodesError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
