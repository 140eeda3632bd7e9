"""Command-line driver: ``locstate <command> [options]``.

Every command writes its primary outputs (CSV curves, JSON summaries) into
the ``--out`` directory.  Options may also come from a ``--config`` file of
``key = value`` lines; flags given on the command line win.

Exit codes: 0 success, 1 threshold failure, 2 usage error, 3 budget error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .channels import (
    KrausSet,
    PostSelectionError,
    apply_local_channel,
    kraus_to_json,
    local_channel_to_json,
)
from .checks import run_checks
from .distillation import (
    DEFAULT_P_GRID,
    WARM_START_ANGLE,
    approach1,
    approach2,
    batch_experiment,
    stream_seed,
)
from .objectives import ExpectationObjective, projector
from .optimizer import OptimizationError, OptimizerConfig, multi_restart
from .qinfo import (
    SamplingBudgetError,
    bell_state,
    best_amplitude_damping,
    check_density,
    density_from_json,
    fef_value,
    ket,
    paper_test_states,
    r_state,
    random_density_matrix,
    rho_s,
    sample_weakly_entangled,
)

log = logging.getLogger("locstate")

EXIT_OK, EXIT_THRESHOLD, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3

SINK_THRESHOLD = 1 - 1e-4
FEF_THRESHOLD = 0.5219
# the two worked examples stop on a finer objective variation than the library default
EXAMPLE_TOL = 1e-9

# independent random streams derived from --seed
STREAM_OPTIMIZER, STREAM_SINK_STATE, STREAM_SINK_TRIALS, STREAM_BATCH, STREAM_VALIDATE = range(5)


class UsageError(Exception):
    pass


# --- parameters -----------------------------------------------------------------


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not (value > 0 and math.isfinite(value)):
        raise ValueError("must be a positive finite number")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise ValueError("must be >= 1")
    return value


def _probability(text: str) -> float:
    value = float(text)
    if not 0 <= value <= 1:
        raise ValueError("must lie in [0, 1]")
    return value


def _open_unit(text: str) -> float:
    value = float(text)
    if not 0 < value <= 1:
        raise ValueError("must lie in (0, 1]")
    return value


def _p_grid(text: str) -> tuple:
    values = tuple(float(v) for v in text.split(",") if v.strip())
    if not values or not all(0 < v < 1 for v in values):
        raise ValueError("p grid needs comma-separated values strictly between 0 and 1")
    return values


def _boolean(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return parse


@dataclass(frozen=True)
class Param:
    parse: Callable[[str], Any]
    default: Any
    help: str


COMMON = {
    "seed": Param(_u64, 0, "64-bit run seed"),
    "out": Param(str, "out", "output directory"),
    "step": Param(_positive_float, 1e-3, "step size for both factors"),
    "tol": Param(_positive_float, 1e-7, "stop when the objective varies less than this"),
    "max_iters": Param(_positive_int, 200_000, "iteration cap per restart"),
    "restarts": Param(_positive_int, 8, "random restarts"),
}

STATE_INPUT = {
    "state": Param(str, None, "input state file (density-matrix JSON)"),
    "paper_state": Param(_choice("rho_star", "rho_star_ab"), None, "built-in test state"),
    "family": Param(_choice("rho_s", "r_state", "r_state_minus"), None, "state family, see --p"),
    "p": Param(_probability, None, "family parameter"),
}

COMMANDS: dict[str, dict[str, Param]] = {
    "sink-example": {"trials": Param(_positive_int, 100, "number of fresh test states")},
    "fef-example": {},
    "approach1": {**STATE_INPUT, "p_grid": Param(_p_grid, DEFAULT_P_GRID, "comma-separated targets p")},
    "approach2": {**STATE_INPUT,
                  "warm_angle": Param(_probability, WARM_START_ANGLE, "warm-start mixing angle")},
    "batch": {
        "count": Param(_positive_int, 50, "number of sampled states"),
        "fef_below": Param(_open_unit, 0.5, "keep states with FEF below this"),
        "real": Param(_boolean, False, "sample real-valued states"),
        "budget": Param(_positive_int, 10**6, "maximum draws while sampling"),
        "p_grid": Param(_p_grid, DEFAULT_P_GRID, "comma-separated targets p for approach 1"),
    },
    "validate": {},
}

COMMAND_DEFAULTS = {
    "sink-example": {"tol": EXAMPLE_TOL},
    "fef-example": {"tol": EXAMPLE_TOL},
}


def read_config_file(path: str) -> dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for number, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not key:
            raise UsageError(f"{path}:{number}: expected 'key = value'")
        values[key] = value.strip()
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="locstate",
        description="Local channel optimization and entanglement distillation experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, params in COMMANDS.items():
        p = sub.add_parser(name, help=f"run {name}")
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
        for key, param in {**COMMON, **params}.items():
            flag = "--" + key.replace("_", "-")
            if param.parse is _boolean:
                p.add_argument(flag, dest=key, action="store_const", const="true", default=None,
                               help=param.help)
            else:
                p.add_argument(flag, dest=key, default=None, help=param.help)
        if name == "validate":
            p.add_argument("--break-retraction", action="store_true",
                           help="negative control: replace the retraction by a raw additive step")
    return parser


def resolve(args: argparse.Namespace) -> dict[str, Any]:
    """Merge defaults, config file and flags; range-check everything."""
    params = {**COMMON, **COMMANDS[args.command]}
    raw = read_config_file(args.config) if args.config else {}
    unknown = sorted(set(raw) - set(params))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    for key in params:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            raw[key] = flag_value
    defaults = COMMAND_DEFAULTS.get(args.command, {})
    cfg = {}
    for key, param in params.items():
        if key in raw:
            try:
                cfg[key] = param.parse(raw[key])
            except ValueError as exc:
                raise UsageError(f"invalid value for {key}: {raw[key]!r} ({exc})") from exc
        else:
            cfg[key] = defaults.get(key, param.default)
    cfg["command"] = args.command
    cfg["break_retraction"] = getattr(args, "break_retraction", False)
    return cfg


def optimizer_config(cfg: dict) -> OptimizerConfig:
    return OptimizerConfig(
        step_a=cfg["step"], step_b=cfg["step"], tol=cfg["tol"], max_iters=cfg["max_iters"],
        restarts=cfg["restarts"], seed=stream_seed(cfg["seed"], STREAM_OPTIMIZER),
    )


def load_input_state(cfg: dict, default: tuple[np.ndarray, str]) -> tuple[np.ndarray, str]:
    """The state chosen by --state, --paper-state or --family/--p, else ``default``."""
    chosen = [k for k in ("state", "paper_state", "family") if cfg.get(k) is not None]
    if len(chosen) > 1:
        raise UsageError("give only one of --state, --paper-state, --family")
    if not chosen:
        if cfg.get("p") is not None:
            raise UsageError("--p needs --family")
        return default
    kind, value = chosen[0], cfg[chosen[0]]
    if kind == "state":
        try:
            with open(value, encoding="utf-8") as fh:
                rho = density_from_json(fh.read())
            return check_density(rho), f"file:{os.path.basename(value)}"
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"invalid state file {value}: {exc}") from exc
    if kind == "paper_state":
        rho_star, rho_star_ab = paper_test_states()
        return (rho_star if value == "rho_star" else rho_star_ab), value
    p = cfg.get("p")
    if p is None:
        raise UsageError("--family needs --p")
    if value == "rho_s":
        return rho_s(p), f"rho_s({p})"
    return r_state(p, +1 if value == "r_state" else -1), f"{value}({p})"


# --- output -----------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return "" if v is None else str(v)


def write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def write_json(path: str, doc) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out(cfg: dict, name: str) -> str:
    os.makedirs(cfg["out"], exist_ok=True)
    return os.path.join(cfg["out"], name)


# --- commands -------------------------------------------------------------------


def cmd_sink_example(cfg: dict) -> int:
    """Optimize a local channel sending a random state to |00>, then test it on fresh states."""
    target = projector(ket("00"))
    train = random_density_matrix(4, np.random.default_rng(stream_seed(cfg["seed"], STREAM_SINK_STATE)))
    res = multi_restart(ExpectationObjective(target, train), (2, 2), optimizer_config(cfg))
    rng = np.random.default_rng(stream_seed(cfg["seed"], STREAM_SINK_TRIALS))
    values = []
    for _ in range(cfg["trials"]):
        out = apply_local_channel(res.best_point, random_density_matrix(4, rng))
        values.append(float(np.trace(out @ target).real))
    mean = float(np.mean(values))
    doc = {
        "trained_value": res.best_value,
        "iterations": res.iterations_used,
        "restart_index": res.restart_index,
        "mean": mean,
        "std": float(np.std(values)),
        "values": values,
        "threshold": SINK_THRESHOLD,
        "passed": mean >= SINK_THRESHOLD,
    }
    write_json(_out(cfg, "sink.json"), doc)
    print(f"sink mean <00|out|00> = {mean:.10f} (std {doc['std']:.2e}) over {len(values)} states")
    if mean < SINK_THRESHOLD:
        print(f"mean below threshold {SINK_THRESHOLD}", file=sys.stderr)
        return EXIT_THRESHOLD
    return EXIT_OK


def cmd_fef_example(cfg: dict) -> int:
    """Raise the FEF of the 0.5-FEF test state by local channels; compare to amplitude damping."""
    rho_star, _ = paper_test_states()
    objective = ExpectationObjective(bell_state("phi+"), rho_star)
    res = multi_restart(objective, (2, 2), optimizer_config(cfg))
    c = res.best_point
    optimized = fef_value(apply_local_channel(c, rho_star))
    baseline, gamma, side = best_amplitude_damping(rho_star)
    doc = {
        "initial_fef": fef_value(rho_star),
        "objective_value": res.best_value,
        "optimized_fef": optimized,
        "iterations": res.iterations_used,
        "restart_index": res.restart_index,
        "baseline_fef": baseline,
        "baseline_gamma": gamma,
        "baseline_side": side,
        "kraus_a": kraus_to_json(KrausSet(c.kraus_a())),
        "kraus_b": kraus_to_json(KrausSet(c.kraus_b())),
        "channel": local_channel_to_json(c),
        "threshold": FEF_THRESHOLD,
        "passed": optimized >= FEF_THRESHOLD,
    }
    write_json(_out(cfg, "fef.json"), doc)
    print(f"optimized FEF {optimized:.8f}; amplitude damping {baseline:.8f} "
          f"(gamma {gamma:.4f} on {side})")
    if optimized < FEF_THRESHOLD:
        print(f"optimized FEF below {FEF_THRESHOLD}", file=sys.stderr)
        return EXIT_THRESHOLD
    return EXIT_OK


def cmd_approach1(cfg: dict) -> int:
    rho, label = load_input_state(cfg, (paper_test_states()[1], "rho_star_ab"))
    result = approach1(rho, cfg["p_grid"], optimizer_config(cfg))
    write_csv(
        _out(cfg, "approach1.csv"),
        ["p", "output_fidelity", "success_prob", "sign", "distance"],
        [(e.p, e.epl.fidelity_psi_plus, e.epl.success_prob, e.sign, e.distance)
         for e in result.per_p],
    )
    write_json(_out(cfg, "approach1.json"), {
        "input": label,
        "initial_fef": fef_value(rho),
        "best_p": result.best_p,
        "best_fidelity": result.best_fidelity,
        "best_success_prob": result.best_success_prob,
        "best_sign": result.best_entry.sign,
    })
    print(f"{label}: best p = {result.best_p}, fidelity {result.best_fidelity:.6f}, "
          f"success {result.best_success_prob:.6f}")
    return EXIT_OK


def cmd_approach2(cfg: dict) -> int:
    rho, label = load_input_state(cfg, (rho_s(0.2), "rho_s(0.2)"))
    result = approach2(rho, optimizer_config(cfg), warm_angle=cfg["warm_angle"])
    t = result.trajectory
    write_csv(
        _out(cfg, "approach2_trajectory.csv"),
        ["iteration", "objective", "fidelity", "success_prob"],
        zip(t.iterations.astype(int), t.objective, t.fidelity, t.success_prob),
    )
    write_json(_out(cfg, "approach2.json"), {
        "input": label,
        "initial_fef": result.initial_fef,
        "final_fidelity": result.final_fidelity,
        "final_success_prob": result.final_success_prob,
        "output_fef": fef_value(result.output_state),
        "restart_index": result.restart_index,
        "warm_angle": cfg["warm_angle"],
        "channel": local_channel_to_json(result.optimized_channel),
    })
    print(f"{label}: fidelity {result.initial_fef:.6f} -> {result.final_fidelity:.6f} "
          f"at success probability {result.final_success_prob:.6f}")
    return EXIT_OK


def batch_summary(records: list[dict]) -> dict:
    n = len(records)

    def frac(pred) -> float:
        return sum(1 for r in records if pred(r)) / n if n else 0.0

    def a1(r, key):
        return r["approach1"][key] if r["approach1"] else None

    def a2(r, key):
        return r["approach2"][key] if r["approach2"] else None

    return {
        "count": n,
        "failures": sum(1 for r in records if r["error"]),
        "fraction_a1_above_half": frac(lambda r: a1(r, "fef") is not None and a1(r, "fef") > 0.5),
        "fraction_a1_fidelity_above_half":
            frac(lambda r: a1(r, "fidelity") is not None and a1(r, "fidelity") > 0.5),
        "fraction_a2_above_half":
            frac(lambda r: a2(r, "fidelity") is not None and a2(r, "fidelity") > 0.5),
        "a2_ge_a1_fraction": frac(
            lambda r: a2(r, "fidelity") is not None
            and (a1(r, "fidelity") is None or a2(r, "fidelity") >= a1(r, "fidelity"))
        ),
    }


def cmd_batch(cfg: dict) -> int:
    rng = np.random.default_rng(stream_seed(cfg["seed"], STREAM_BATCH))
    try:
        states = sample_weakly_entangled(cfg["count"], rng, fef_below=cfg["fef_below"],
                                         real_valued=cfg["real"], budget=cfg["budget"])
    except SamplingBudgetError as exc:
        print(f"sampling budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    records = batch_experiment(states, optimizer_config(cfg), cfg["p_grid"])

    def get(r, side, key):
        return r[side][key] if r[side] else None

    write_csv(
        _out(cfg, "batch.csv"),
        ["index", "initial_fef", "a1_fidelity", "a1_success", "a1_best_p", "a2_fidelity",
         "a2_success", "a1_fef", "a2_fef", "error"],
        [(r["index"], r["initial_fef"], get(r, "approach1", "fidelity"),
          get(r, "approach1", "success_prob"), get(r, "approach1", "best_p"),
          get(r, "approach2", "fidelity"), get(r, "approach2", "success_prob"),
          get(r, "approach1", "fef"), get(r, "approach2", "fef"), r["error"].strip())
         for r in records],
    )
    summary = batch_summary(records)
    write_json(_out(cfg, "batch.json"), summary)
    print(f"{summary['count']} states: approach 1 FEF > 0.5 for "
          f"{summary['fraction_a1_above_half']:.0%}, approach 2 >= approach 1 for "
          f"{summary['a2_ge_a1_fraction']:.0%}")
    return EXIT_OK


def cmd_validate(cfg: dict) -> int:
    checks = run_checks(stream_seed(cfg["seed"], STREAM_VALIDATE),
                        break_retraction=cfg["break_retraction"])
    width = max(len(c.name) for c in checks)
    for c in checks:
        print(f"{c.name:<{width}}  {'PASS' if c.passed else 'FAIL'}  {c.detail:.3e}")
    failed = [c.name for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_THRESHOLD if failed else EXIT_OK


HANDLERS = {
    "sink-example": cmd_sink_example,
    "fef-example": cmd_fef_example,
    "approach1": cmd_approach1,
    "approach2": cmd_approach2,
    "batch": cmd_batch,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        return HANDLERS[args.command](cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OptimizationError, PostSelectionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_THRESHOLD


if __name__ == "__main__":
    sys.exit(main())
