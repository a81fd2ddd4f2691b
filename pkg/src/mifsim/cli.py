"""Command-line harness.

Exit codes: 0 ok, 1 invariant or contract violation, 2 configuration
error, 3 search budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import math
import sys

import numpy as np

from . import algorithms as alg
from . import analysis, reductions
from .adversaries import (
    echo_adversary, learning_adversary, minimax_worst_error, mixed_adversary,
    random_adversary, replay_adversary,
)
from .engine import (
    AdversaryError, BudgetExceeded, Instance, NotEnumerable, SpaceContractViolation,
    estimate_error,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


class Settings:
    """Flag values layered over a config file; flags win."""

    def __init__(self, args, config):
        self.args = vars(args)
        self.config = config

    def get(self, key, default=None, kind=None):
        value = self.args.get(key)
        if value is None:
            value = self.config.get(key, default)
        if value is None or kind is None:
            return value
        try:
            return kind(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc

    def require(self, key, kind=None):
        value = self.get(key, kind=kind)
        if value is None:
            raise ConfigError(f"missing required setting: {key}")
        return value


def _load_config(path, command):
    if not path:
        return {}
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    flat = {k.replace("-", "_"): v for k, v in data.items() if not isinstance(v, dict)}
    for k, v in data.get(command, {}).items():
        flat[k.replace("-", "_")] = v
    return flat


def _int_list(text):
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).replace(",", " ").split()]


def _instance(s):
    try:
        return Instance(s.require("n", int), s.require("ell", int), s.get("delta", 0.0, float))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _build_algorithm(s, inst):
    name = s.require("algo")
    try:
        if name == "det_bitmap":
            return alg.det_bitmap_mif(inst)
        if name == "oracle_list":
            return alg.oracle_list_mif(inst)
        if name == "seed_block":
            return alg.seed_block_mif(inst, s.get("t", kind=int), s.get("k", kind=int),
                                      s.get("s", kind=int))
        if name == "rt":
            return alg.rt_mif(alg.rt_params(inst))
        if name == "constant":
            return alg.constant_mif(inst.n, s.get("value", 1, int))
        if name == "random_output":
            return alg.random_output_mif(inst.n, _int_list(s.get("outputs", "1 2")))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown algorithm: {name}")


def _build_adversary(s, a, inst):
    name = s.get("adversary", "echo")
    if name == "echo":
        return echo_adversary()
    if name == "random":
        return random_adversary()
    if name == "mixed":
        return mixed_adversary(s.get("p_echo", 0.5, float))
    if name == "replay":
        return replay_adversary(_int_list(s.require("stream")))
    if name == "learner":
        overrides = {k: s.get(k, kind=int) for k in ("w", "phase_len", "h_max")}
        overrides["t"] = overrides.pop("phase_len")
        return learning_adversary(a, inst, **{k: v for k, v in overrides.items() if v is not None})
    raise ConfigError(f"unknown adversary: {name}")


def _emit(s, text, summary=None):
    out = s.get("out")
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
        if summary:
            print(summary)
    else:
        sys.stdout.write(text)
        if summary:
            print(summary, file=sys.stderr)


def _csv(rows, header):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def cmd_simulate(s):
    inst = _instance(s)
    a = _build_algorithm(s, inst)
    adv = _build_adversary(s, a, inst)
    seed = s.require("seed", int)
    trials = s.get("trials", 100, int)
    est = estimate_error(a, adv, inst, trials, seed=seed, threads=s.get("threads", 1, int))
    rows = [[i, v.kind, "" if v.step is None else v.step, "", "", "", ""]
            for i, v in enumerate(est.verdicts)]
    rows.append(["summary", "", "", repr(est.mistake_rate), repr(est.abort_rate),
                 repr(est.failure_rate), repr(est.failure_half_width)])
    text = _csv(rows, ["trial", "verdict", "step", "mistake_rate", "abort_rate",
                       "failure_rate", "failure_half_width"])
    _emit(s, text, f"{a.name} vs {adv.kind}: mistake_rate={est.mistake_rate} "
                   f"abort_rate={est.abort_rate} bits={est.max_observed_bits}/{a.state_bits}")
    return EXIT_OK


def cmd_minimax(s):
    inst = _instance(s)
    a = _build_algorithm(s, inst)
    res = minimax_worst_error(a, inst, budget=s.get("budget", 2_000_000, int))
    text = _csv([[repr(res.mistake), repr(res.abort), repr(res.induced_abort), res.depth]],
                ["mistake", "abort", "induced_abort", "depth"])
    _emit(s, text, f"({res.mistake}, {res.abort}) depth={res.depth}")
    return EXIT_OK


def cmd_bounds(s):
    n = s.require("n", int)
    delta = s.get("delta", None, float)
    if delta is None:
        delta = 1 / (n * n)
    grid = s.get("grid")
    grid = analysis.default_grid(n) if grid is None else _int_list(grid)
    try:
        text = analysis.emit_bounds_csv(n, delta, grid)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    notes = []
    root = math.isqrt(n)
    if root * root == n and root in grid:
        low = analysis.rt_lb(n, root)
        notes.append(f"ell=sqrt(n)={root}: tape lower bound exponent {low.exponent} "
                     f"(witness k={low.witness_k})")
    _emit(s, text, "\n".join(notes) or None)
    return EXIT_OK


def cmd_params(s):
    inst = _instance(s)
    try:
        prm = alg.rt_params(inst)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    prm.check()
    _emit(s, prm.to_text())
    return EXIT_OK


def cmd_avoid(s):
    m = s.require("m", int)
    try:
        ainst = reductions.AvoidInstance(m, s.get("a", 2, int), s.get("b", 2, int))
        inst = Instance(m, ainst.a + ainst.b)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    a = _build_algorithm(s, inst)
    seed = s.get("seed", 0, int)
    seeds = list(range(seed, seed + s.get("repeats", 1, int)))
    summary = reductions.avoid_exhaustive(reductions.avoid_from_mif(a, ainst), seeds)
    _emit(s, summary.to_csv(),
          f"runs={summary.runs} failures={summary.failures} message_bits={summary.message_bits} "
          f"lower_bound={summary.lower_bound}")
    ok = summary.lower_bound is None or summary.message_bits >= summary.lower_bound
    return EXIT_OK if ok and summary.failures == 0 else EXIT_VIOLATION


def cmd_fco(s):
    n = s.require("n", int)
    ell = s.require("ell", int)
    t = _int_list(s.get("lengths", f"{ell}"))
    level = s.get("level", 1, int)
    eps = s.get("eps", 0.0, float)
    seed = s.require("seed", int)
    trials = s.get("trials", 10, int)
    try:
        prm = reductions.custom_fco_params(n, ell, t)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    B = reductions.canonical_min_missing(n, ell)
    rng = np.random.default_rng(seed)
    rows = []
    mismatches = failures = 0
    for trial in range(trials):
        x = tuple(int(v) for v in rng.integers(1, n + 1, prm.prefix_length(level)))
        C = reductions.ThresholdMatrix(seed=seed * 100_003 + trial)
        base = reductions.fco(B, C, x, level, prm)
        noisy = reductions.fco(reductions.noisy(B, eps, seed=seed * 100_003 + trial), C, x, level, prm)
        mismatches += base.items != noisy.items
        failures += base.failures
        for row in base.trace:
            rows.append([trial, *row, int(base.items != noisy.items)])
    text = _csv(rows, ["trial", "k", "prefix", "round", "q_size", "w_k", "failed", "noisy_mismatch"])
    _emit(s, text, f"trials={trials} canonical_failures={failures} noisy_mismatches={mismatches}")
    return EXIT_VIOLATION if level == 1 and failures else EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate, "minimax": cmd_minimax, "bounds": cmd_bounds,
    "params": cmd_params, "avoid": cmd_avoid, "fco": cmd_fco,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file of settings; flags take precedence")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="write CSV here instead of stdout")
    common.add_argument("--format", choices=["csv"], default="csv")
    common.add_argument("--threads", type=int)

    parser = argparse.ArgumentParser(prog="mifsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def instance_flags(p):
        p.add_argument("--n", type=int)
        p.add_argument("--ell", type=int)
        p.add_argument("--delta", type=float)

    def algo_flags(p):
        p.add_argument("--algo")
        p.add_argument("--value", type=int, help="output of the constant automaton")
        p.add_argument("--outputs", help="state outputs of the random-output automaton")
        p.add_argument("--t", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--s", type=int)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo games")
    instance_flags(p)
    algo_flags(p)
    p.add_argument("--adversary")
    p.add_argument("--p-echo", dest="p_echo", type=float)
    p.add_argument("--stream")
    p.add_argument("--trials", type=int)
    p.add_argument("--w", type=int)
    p.add_argument("--phase-len", dest="phase_len", type=int)
    p.add_argument("--h-max", dest="h_max", type=int)

    p = sub.add_parser("minimax", parents=[common], help="exact worst-case error")
    instance_flags(p)
    algo_flags(p)
    p.add_argument("--budget", type=int)

    p = sub.add_parser("bounds", parents=[common], help="bound curves as CSV")
    p.add_argument("--n", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--grid")

    p = sub.add_parser("params", parents=[common], help="random-tape parameters")
    instance_flags(p)

    p = sub.add_parser("avoid", parents=[common], help="exhaustive AVOID protocol check")
    algo_flags(p)
    p.add_argument("--m", type=int)
    p.add_argument("--a", type=int)
    p.add_argument("--b", type=int)
    p.add_argument("--repeats", type=int)

    p = sub.add_parser("fco", parents=[common], help="common-output finder traces")
    p.add_argument("--n", type=int)
    p.add_argument("--ell", type=int)
    p.add_argument("--lengths", help="interval lengths t_1,...,t_d")
    p.add_argument("--level", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--trials", type=int)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        settings = Settings(args, _load_config(args.config, args.command))
        return COMMANDS[args.command](settings)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BudgetExceeded, NotEnumerable) as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (SpaceContractViolation, AdversaryError, AssertionError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
