"""Command-line front end: one subcommand per experiment family.

Every run writes its tables plus ``manifest.json`` into ``--out``.  Exit codes:
0 success, 2 usage, 3 config, 4 input file, 5 numerical, 1 anything else.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import closedloop as cl
from .core import build_geometry, element_field_vector, fixed_field, gain_dbi, total_pattern
from .hybrid import HybridScenario, run_hybrid
from .io import (
    ConfigError,
    InputFileError,
    dish_from_config,
    read_config,
    read_weights,
    typed_section,
    write_manifest,
    write_table,
    write_weights,
)
from .openloop import DEFAULT_DELTA, GpSettings, RankDeficientError, build_constraints, gp_solve, optimal_weights_multi
from .quantized import FireflySettings, firefly_search, serial_search
from .weights import PhaseAlphabet, WeightVector

log = logging.getLogger("rimscatter")

EXIT_CONFIG, EXIT_INPUT, EXIT_NUMERIC, EXIT_OTHER = 3, 4, 5, 1

# scenario schemas: key -> (type, default); default None marks a required key
SCENARIOS = {
    "pattern": {
        "psi_min_deg": (float, -10.0),
        "psi_max_deg": (float, 10.0),
        "psi_step_deg": (float, 0.02),
        "weights_file": (str, ""),
    },
    "nullscan": {
        "psi_min_deg": (float, 1.0),
        "psi_max_deg": (float, 3.0),
        "psi_step_deg": (float, 0.05),
        "mainlobe_delta": (str, "none"),
        "population": (int, 50),
        "movements": (int, 600),
        "gp_max_iterations": (int, 5000),
    },
    "freqscan": {
        "psi_deg": (float, 1.75),
        "f_min_hz": (float, 1.42e9),
        "f_max_hz": (float, 1.58e9),
        "f_step_hz": (float, 2e6),
        "weights_file": (str, ""),
        "design_frequencies_hz": (list, [1.5e9]),
        "mainlobe_delta": (str, "none"),
    },
    "theorem1": {
        "gain": (list, [0.25, 1.0, 4.0]),
        "delta_fraction": (list, [0.01, 0.1, 0.5]),
        "inr_db": (list, [0.0, 10.0, 20.0]),
        "samples": (list, [1e3, 1e4, 1e5]),
        "trials": (int, 100_000),
        "form": (str, "derived"),
    },
    "closedloop": {
        "psi_deg": (float, 1.75),
        "inr_db": (float, 30.0),
        "samples_per_decision": (int, 1000),
        "sample_rate_hz": (float, 1.1e9),
        "schedule_length": (int, 100_000),
        "decisions": (int, 0),
        "levels": (int, 16),
        "cluster_size": (int, 1),
        "noiseless": (bool, False),
        "noiseless_metric": (str, "gain"),
        "reference": (str, "last-accepted"),
        "record_every": (int, 1),
    },
    "moving": {
        "psi_start_deg": (float, 3.0),
        "psi_stop_deg": (float, 1.2),
        "angular_velocity_deg_s": (float, -0.79),
        "inr_db": (float, 60.0),
        "samples_per_decision": (int, 1000),
        "sample_rate_hz": (float, 1.1e9),
        "levels": (int, 16),
        "warm_decisions": (int, 100_000),
        "schedule_length": (int, 100_000),
        "reference": (str, "remeasure"),
        "record_every": (int, 100),
    },
    "library": {
        "psi_min_deg": (float, 1.2),
        "psi_max_deg": (float, 3.0),
        "psi_step_deg": (float, 0.01),
        "levels": (int, 16),
        "library_decisions": (int, 20_000),
        "psi_start_deg": (float, 3.0),
        "psi_stop_deg": (float, 1.2),
        "angular_velocity_deg_s": (float, -0.79),
        "inr_db": (float, 30.0),
        "samples_per_decision": (int, 550),
        "sample_rate_hz": (float, 1.1e7),
        "kernel_width": (float, 3.0),
        "reference": (str, "remeasure"),
        "record_every": (int, 10),
    },
    "hybrid": {
        "psi_deg": (float, 1.75),
        "assumed_q": (float, 1.5),
        "levels": (int, 4),
        "replicates": (int, 10),
        "stage1_decisions": (int, 100_000),
        "stage2_decisions": (int, 20_000),
        "threshold_dbi": (float, -40.0),
        "stage2_metric": (str, "power"),
        "inr_db": (float, 30.0),
    },
}


def _scenario(cp, command):
    schema = {k: t for k, (t, _) in SCENARIOS[command].items()}
    defaults = {k: d for k, (_, d) in SCENARIOS[command].items() if d is not None}
    return typed_section(cp, "scenario", schema, defaults)


def _grid(lo, hi, step):
    if step <= 0 or hi < lo:
        raise ConfigError([f"bad grid: min {lo}, max {hi}, step {step}"])
    return lo + step * np.arange(int(math.floor((hi - lo) / step + 1e-9)) + 1)


def _delta(text):
    if text.strip().lower() in ("none", ""):
        return None
    if text.strip().lower() == "default":
        return DEFAULT_DELTA
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError([f"[scenario] mainlobe_delta: {text!r} is not a number or 'none'"]) from exc


def _pmap(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def parse_method(name: str):
    """'optimal' | 'gp' | 'firefly-M' | 'serial-M' -> (kind, M or None)."""
    if name in ("optimal", "gp"):
        return name, None
    kind, _, m = name.partition("-")
    if kind in ("firefly", "serial") and m.isdigit() and int(m) >= 2:
        return kind, int(m)
    raise ConfigError([f"unknown method {name!r}; use optimal, gp, firefly-M or serial-M"])


def solve(geometry, angles, method, mainlobe=None, seed=0, frequencies=None, population=50, movements=600, gp_iters=5000):
    kind, m = parse_method(method)
    cons = build_constraints(geometry, angles, mainlobe=mainlobe, frequencies=frequencies)
    if kind == "optimal":
        return optimal_weights_multi(cons)
    if kind == "gp":
        return gp_solve(cons, GpSettings(max_iterations=gp_iters, seed=seed)).weights
    if kind == "firefly":
        st = FireflySettings(population=population, movements=movements, seed=seed)
        return firefly_search(cons, PhaseAlphabet(m), st).weights
    return serial_search(cons, PhaseAlphabet(m), order_seed=seed).weights


def null_gain_dbi(geometry, w, psi, exact_rel=1e-12) -> float:
    """Gain toward psi; -inf when the field cancels to machine precision."""
    ef = fixed_field(geometry, psi)
    total = ef + element_field_vector(geometry, psi) @ np.asarray(getattr(w, "values", w))
    if abs(total) <= exact_rel * abs(ef):
        return -math.inf
    return float(gain_dbi(geometry, total))


def _trace_columns(trace, every=1):
    sl = slice(None, None, max(1, every))
    return {
        "decision_index": trace.index[sl],
        "time_s": trace.time_s[sl],
        "psi_deg": np.degrees(trace.angle_rad[sl]),
        "Z": trace.measured[sl],
        "accepted": trace.accepted[sl],
        "true_gain_dbi": trace.true_gain_dbi[sl],
    }


# --- commands --------------------------------------------------------------

def cmd_pattern(dish, sc, args, out):
    """Co- and cross-pol cut of the fixed dish, optionally with weights."""
    geo = build_geometry(dish)
    psi = np.radians(_grid(sc["psi_min_deg"], sc["psi_max_deg"], sc["psi_step_deg"]))
    cut = total_pattern(geo, np.ones(geo.n_elements), psi)
    cols = {"psi_deg": np.degrees(psi), "fixed_dbi": cut.gain_dbi, "fixed_crosspol_dbi": cut.crosspol_dbi}
    if sc["weights_file"]:
        w = read_weights(sc["weights_file"], geo.n_elements)
        wc = total_pattern(geo, w.values, psi)
        cols["weighted_dbi"] = wc.gain_dbi
        cols["weighted_crosspol_dbi"] = wc.crosspol_dbi
    return [write_table(out / "pattern.txt", cols)]


def cmd_nullscan(dish, sc, args, out):
    """Null depth and boresight gain while scanning the null angle."""
    method = args.method or "gp"
    parse_method(method)
    geo = build_geometry(dish)
    delta = _delta(sc["mainlobe_delta"])
    psis = _grid(sc["psi_min_deg"], sc["psi_max_deg"], sc["psi_step_deg"])

    def one(psi_deg):
        psi = math.radians(psi_deg)
        w = solve(geo, [psi], method, delta, args.seed, None, sc["population"], sc["movements"], sc["gp_max_iterations"])
        return null_gain_dbi(geo, w, psi), null_gain_dbi(geo, w, 0.0)

    res = _pmap(one, psis, args.threads)
    cols = {"psi_deg": psis, "null_dbi": [r[0] for r in res], "mainlobe_dbi": [r[1] for r in res]}
    return [write_table(out / f"nullscan_{method}.txt", cols)]


def cmd_freqscan(dish, sc, args, out):
    """Null depth versus frequency for fixed weights."""
    geo = build_geometry(dish)
    psi = math.radians(sc["psi_deg"])
    outputs = []
    if sc["weights_file"]:
        w = read_weights(sc["weights_file"], geo.n_elements)
    else:
        w = solve(geo, [psi], args.method or "gp", _delta(sc["mainlobe_delta"]), args.seed, sc["design_frequencies_hz"])
        outputs.append(write_weights(out / "weights.txt", w))
    freqs = _grid(sc["f_min_hz"], sc["f_max_hz"], sc["f_step_hz"])
    gains = _pmap(lambda f: null_gain_dbi(geo.retune(f), w, psi), freqs, args.threads)
    outputs.append(write_table(out / "freqscan.txt", {"f_hz": freqs, "null_dbi": gains}))
    return outputs


def cmd_theorem1(dish, sc, args, out):
    """Decision error probability: analytic versus Monte Carlo grid."""
    if sc["form"] not in ("derived", "printed"):
        raise ConfigError([f"[scenario] form must be 'derived' or 'printed', not {sc['form']!r}"])
    grid = [(g, f * g, i, int(n)) for g in sc["gain"] for f in sc["delta_fraction"] for i in sc["inr_db"] for n in sc["samples"]]

    def one(item):
        k, (g, dg, inr_db, n) = item
        inr = float(cl.db_to_linear(inr_db))
        pa = cl.theorem1_error_probability(g, dg, inr, n, form=sc["form"])
        pm, se = cl.mc_error_probability(g, dg, inr, n, trials=sc["trials"], seed=args.seed * 100_003 + k)
        return g, dg, inr_db, n, pa, pm, se

    rows = _pmap(one, list(enumerate(grid)), args.threads)
    names = ["G", "dG", "INR_dB", "N", "pe_analytic", "pe_mc", "stderr"]
    cols = {nm: [r[i] for r in rows] for i, nm in enumerate(names)}
    return [write_table(out / "theorem1.txt", cols)]


def cmd_closedloop(dish, sc, args, out):
    """Closed-loop annealing toward a stationary interferer."""
    geo = build_geometry(dish)
    scen = cl.SignalScenario(
        math.radians(sc["psi_deg"]), sc["inr_db"], sc["samples_per_decision"], sc["sample_rate_hz"], args.seed
    )
    st = cl.AnnealSettings(
        schedule_length=sc["schedule_length"],
        alphabet=PhaseAlphabet(sc["levels"]),
        cluster_size=sc["cluster_size"],
        seed=args.seed,
        decisions=sc["decisions"] or None,
        reference=sc["reference"],
    )
    res = cl.anneal_closed_loop(scen, geo, st, noiseless=sc["noiseless"], noiseless_metric=sc["noiseless_metric"])
    return [
        write_table(out / "trace.txt", _trace_columns(res.trace, sc["record_every"])),
        write_weights(out / "weights.txt", res.weights),
    ]


def _warm_start(geo, psi, levels, decisions, seed):
    st = cl.AnnealSettings(schedule_length=decisions, alphabet=PhaseAlphabet(levels), seed=seed)
    return cl.anneal_closed_loop(cl.SignalScenario(psi, seed=seed), geo, st, noiseless=True).weights


def cmd_moving(dish, sc, args, out):
    """Closed-loop tracking of a linearly moving interferer."""
    geo = build_geometry(dish)
    start, stop = math.radians(sc["psi_start_deg"]), math.radians(sc["psi_stop_deg"])
    w0 = _warm_start(geo, start, sc["levels"], sc["warm_decisions"], args.seed)
    scen = cl.SignalScenario(
        start, sc["inr_db"], sc["samples_per_decision"], sc["sample_rate_hz"], args.seed, sc["angular_velocity_deg_s"]
    )
    st = cl.AnnealSettings(
        schedule_length=sc["schedule_length"],
        alphabet=PhaseAlphabet(sc["levels"]),
        seed=args.seed,
        init="provided",
        initial=w0,
        reference=sc["reference"],
    )
    res = cl.track_moving_source(scen, geo, st, stop_angle_rad=stop)
    return [write_table(out / "moving.txt", _trace_columns(res.trace, sc["record_every"]))]


def cmd_library(dish, sc, args, out):
    """Calibrate a null library and track a moving interferer with it."""
    geo = build_geometry(dish)
    psis = np.radians(_grid(sc["psi_min_deg"], sc["psi_max_deg"], sc["psi_step_deg"]))
    levels, decisions = sc["levels"], sc["library_decisions"]

    def optimizer(g, psi):
        return _warm_start(g, psi, levels, decisions, args.seed)

    lib = cl.build_library(psis, optimizer, geo)
    own = [null_gain_dbi(geo, w, a) for a, w in lib.entries]
    scen = cl.SignalScenario(
        math.radians(sc["psi_start_deg"]),
        sc["inr_db"],
        sc["samples_per_decision"],
        sc["sample_rate_hz"],
        args.seed,
        sc["angular_velocity_deg_s"],
    )
    tr = cl.track_with_library(
        scen, geo, lib, sc["kernel_width"], stop_angle_rad=math.radians(sc["psi_stop_deg"]), reference=sc["reference"]
    )
    return [
        write_table(out / "library.txt", {"psi_deg": np.degrees(lib.angles_rad), "own_null_dbi": own, "ok": [f == "ok" for f in lib.flags]}),
        write_table(out / "library_trace.txt", _trace_columns(tr, sc["record_every"])),
    ]


def cmd_hybrid(dish, sc, args, out):
    """Warm start from an assumed pattern versus cold start."""
    scen = HybridScenario(
        assumed_config=dish.with_(feed_taper_q=sc["assumed_q"]),
        true_config=dish,
        null_angle_rad=math.radians(sc["psi_deg"]),
        alphabet=PhaseAlphabet(sc["levels"]),
        seeds=tuple(args.seed + i for i in range(sc["replicates"])),
        stage1_decisions=sc["stage1_decisions"],
        stage2_decisions=sc["stage2_decisions"],
        threshold_dbi=sc["threshold_dbi"],
        stage2_metric=sc["stage2_metric"],
        inr_db=sc["inr_db"],
    )
    runs = run_hybrid(scen)
    steps = lambda s: -1 if s is None else s  # noqa: E731 - -1 marks "never reached"
    outputs = [
        write_table(
            out / "hybrid.txt",
            {
                "seed": [r.seed for r in runs],
                "cold_steps": [steps(r.cold_steps) for r in runs],
                "warm_steps": [steps(r.warm_steps) for r in runs],
                "ratio": [r.ratio for r in runs],
                "stage1_true_dbi": [r.stage1_true_gain_dbi for r in runs],
            },
        )
    ]
    first = runs[0]
    for name, tr in (("stage1", first.stage1), ("warm", first.warm), ("cold", first.cold)):
        outputs.append(write_table(out / f"hybrid_{name}.txt", _trace_columns(tr)))
    return outputs


COMMANDS = {
    "pattern": cmd_pattern,
    "nullscan": cmd_nullscan,
    "freqscan": cmd_freqscan,
    "theorem1": cmd_theorem1,
    "closedloop": cmd_closedloop,
    "moving": cmd_moving,
    "library": cmd_library,
    "hybrid": cmd_hybrid,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI file with [dish] and [scenario] sections")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--method", help="optimal, gp, firefly-M or serial-M (nullscan, freqscan)")
    common.add_argument("--threads", type=int, default=1, help="workers for independent scan points")
    common.add_argument("-v", "--verbose", action="store_true")
    ap = argparse.ArgumentParser(prog="rimscatter", description="Reconfigurable-rim reflector experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(fn.__doc__ or name).strip().splitlines()[0])
    return ap


def run(args) -> list[Path]:
    cp = read_config(args.config) if args.config else None
    problems = []
    try:
        dish = dish_from_config(cp)
    except ConfigError as exc:
        problems += exc.problems
        dish = None
    try:
        sc = _scenario(cp, args.command)
    except ConfigError as exc:
        problems += exc.problems
    if problems:
        raise ConfigError(problems)
    if args.threads < 1:
        raise ConfigError(["--threads must be >= 1"])
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    outputs = COMMANDS[args.command](dish, sc, args, out)
    resolved = {
        "command": args.command,
        "dish": dish.as_dict(),
        "scenario": sc,
        "seed": args.seed,
        "method": args.method,
    }
    manifest = write_manifest(out / "manifest.json", args.command, resolved, [args.seed], outputs, time.perf_counter() - t0)
    return outputs + [manifest]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        for p in run(args):
            print(p)
        return 0
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG
    except InputFileError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RankDeficientError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OverflowError, np.linalg.LinAlgError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except Exception as exc:  # noqa: BLE001 - last-resort category
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
