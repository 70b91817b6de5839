"""Command line front end.

    competing-sir validate|simulate|stability|observability|observe|sweep SCENARIO [options]

Artifacts go to ``<out>/<scenario name>/<command>/``; ``<out>`` is ``--out``,
else ``$COMPETING_SIR_OUT``, else ``./runs``. Exit status is 0 on success,
1 on file or parse errors and 2 when the scenario fails validation.
Analysis verdicts (not certified, not observable) are data and exit 0.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import observability as obs
from .model import simulate, validate
from .observer import run_observer
from .scenario import ParseError, Scenario, ScenarioValidationError, parse_scenario
from .stability import stability_report

log = logging.getLogger("competing_sir")

OUT_ENV = "COMPETING_SIR_OUT"
EXIT_OK, EXIT_IO, EXIT_INVALID = 0, 1, 2

TRAJECTORY_COLUMNS = ["t", "node", "compartment", "virus", "value"]
OUTPUT_COLUMNS = ["t", "node", "y"]
STABILITY_COLUMNS = ["virus", "rho", "certified", "sigma1", "sigma2", "sigma3", "rate_bound"]
OBSERVABILITY_COLUMNS = ["regime", "rank", "smallest_sv", "locally_observable", "distinct_gamma"]
OBSERVER_COLUMNS = ["t", "node", "virus", "truth", "estimate", "error"]


def fmt(value) -> str:
    """Deterministic CSV cell; floats use the shortest round-trip repr."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def output_dir(args, scenario: Scenario, command: str) -> Path:
    base = args.out or os.environ.get(OUT_ENV) or "runs"
    d = Path(base) / scenario.name / command
    d.mkdir(parents=True, exist_ok=True)
    return d


def load(args) -> Scenario:
    """Parse the scenario and apply command line overrides, then validate."""
    scenario = parse_scenario(args.scenario, check=False)
    cfg = scenario.config
    if getattr(args, "horizon", None) is not None:
        cfg = cfg.replace(horizon=args.horizon)
    if getattr(args, "h", None) is not None:
        cfg = cfg.replace(h=args.h)
    scenario.config = cfg
    return scenario


def require_valid(scenario: Scenario):
    violations = validate(scenario.config)
    if violations:
        raise ScenarioValidationError(violations)


# --- rows ------------------------------------------------------------------

def trajectory_rows(traj, config):
    labels, vlabels = config.labels, config.virus_labels
    for t, st in enumerate(traj.states):
        for i, node in enumerate(labels):
            yield t, node, "s", "none", st.s[i]
            for k, vl in enumerate(vlabels):
                yield t, node, "x", vl, st.x[k, i]
            yield t, node, "r", "none", st.r[i]


def output_rows(traj, config):
    for t, y in enumerate(traj.outputs):
        for i, node in enumerate(config.labels):
            yield t, node, y[i]


def stability_rows(report):
    for v in report.viruses:
        yield v.label, v.rho, v.ges_certified, v.sigma1, v.sigma2, v.sigma3, v.rate_bound


def observer_rows(run, config):
    labels, vlabels = config.labels, config.virus_labels
    for t in range(run.estimates.shape[0]):
        for i, node in enumerate(labels):
            for k, vl in enumerate(vlabels):
                yield t, node, vl, run.truth[t, k, i], run.estimates[t, k, i], run.errors[t, k, i]


# --- commands --------------------------------------------------------------

def cmd_validate(args) -> int:
    scenario = load(args)
    violations = validate(scenario.config)
    out = output_dir(args, scenario, "validate")
    labels, vlabels = scenario.config.labels, scenario.config.virus_labels
    write_csv(out / "validation.csv", ["assumption", "node", "virus", "message"],
              ((v.assumption, None if v.node is None else labels[v.node],
                None if v.virus is None else vlabels[v.virus], v.message) for v in violations))
    if violations:
        for v in violations:
            print(v.describe(scenario.config.labels, scenario.config.virus_labels))
        return EXIT_INVALID
    print(f"{scenario.name}: valid (n={scenario.config.n}, m={scenario.config.m}, h={scenario.config.h})")
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario = load(args)
    require_valid(scenario)
    cfg = scenario.config
    traj = simulate(cfg)
    out = output_dir(args, scenario, "simulate")
    write_csv(out / "trajectory.csv", TRAJECTORY_COLUMNS, trajectory_rows(traj, cfg))
    write_csv(out / "outputs.csv", OUTPUT_COLUMNS, output_rows(traj, cfg))
    if args.plot:
        from .plotting import plot_infections
        plot_infections(traj, cfg, out / "infections.png")
    x = traj.x
    for k, label in enumerate(cfg.virus_labels):
        peak_t = int(x[:, k, :].max(axis=1).argmax())
        print(f"{label}: peak {x[peak_t, k].max():.6g} at t={peak_t}, final max {x[-1, k].max():.3g}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_stability(args) -> int:
    scenario = load(args)
    require_valid(scenario)
    report = stability_report(scenario.config)
    out = output_dir(args, scenario, "stability")
    write_csv(out / "stability.csv", STABILITY_COLUMNS, stability_rows(report))
    write_csv(out / "lyapunov.csv", ["virus", "node", "p"],
              ((v.label, node, v.P[i]) for v in report.viruses if v.ges_certified
               for i, node in enumerate(scenario.config.labels)))
    for v in report.viruses:
        verdict = f"certified, rate <= {v.rate_bound:.6g}" if v.ges_certified else "not certified"
        print(f"{v.label}: rho(M) = {v.rho:.12g}, {verdict}")
    return EXIT_OK


def cmd_observability(args) -> int:
    scenario = load(args)
    cfg = scenario.config
    if args.regime == "trajectory":
        cfg = cfg.replace(horizon=max(cfg.horizon, args.t + cfg.m - 1))
        scenario.config = cfg
    require_valid(scenario)
    if args.regime == "disease-free":
        O = obs.build_O_zero(cfg)
        report = obs.check_local_observability(O, cfg, regime="disease_free")
    else:
        traj = simulate(cfg, horizon=args.t + cfg.m - 1)
        O = obs.build_O_trajectory(traj, args.t, cfg)
        report = obs.check_local_observability(O, cfg, regime="along_trajectory", t=args.t)
    out = output_dir(args, scenario, "observability")
    write_csv(out / "observability.csv", OBSERVABILITY_COLUMNS,
              [(report.regime_tag, report.numerical_rank, report.smallest_singular_value,
                report.locally_observable, report.distinct_gamma)])
    write_csv(out / "observability_matrix.csv", [f"c{j}" for j in range(O.shape[1])], O.tolist())
    write_csv(out / "singular_values.csv", ["index", "singular_value", "threshold"],
              ((j, s, report.threshold) for j, s in enumerate(report.singular_values)))
    if args.plot:
        from .plotting import plot_singular_values
        plot_singular_values(report.singular_values, report.threshold, out / "singular_values.png")
    print(f"{report.regime_tag}: rank {report.numerical_rank}/{O.shape[0]}, "
          f"smallest singular value {report.smallest_singular_value:.6g}, "
          f"locally observable: {report.locally_observable}, distinct gamma: {report.distinct_gamma}")
    return EXIT_OK


def _observe(scenario: Scenario, gain=None):
    cfg = scenario.config
    traj = simulate(cfg)
    settings = scenario.observer
    if gain is not None:
        from dataclasses import replace
        settings = replace(settings, L=gain)
    ocfg = settings.build(cfg, traj.outputs[0])
    return traj, run_observer(traj.outputs, cfg, ocfg, truth=traj)


def cmd_observe(args) -> int:
    scenario = load(args)
    require_valid(scenario)
    cfg = scenario.config
    traj, run = _observe(scenario, args.gain)
    out = output_dir(args, scenario, "observe")
    write_csv(out / "observer.csv", OBSERVER_COLUMNS, observer_rows(run, cfg))
    t10 = run.time_to_relative(0.1)
    write_csv(out / "observer_summary.csv", ["virus", "node", "peak_t", "time_to_10pct"],
              ((vl, node, int(traj.x[:, k, i].argmax()), int(t10[k, i]))
               for k, vl in enumerate(cfg.virus_labels) for i, node in enumerate(cfg.labels)))
    if args.plot:
        from .plotting import plot_estimation_error, plot_infections
        plot_estimation_error(run, cfg, out / "estimation_error.png")
        plot_estimation_error(run, cfg, out / "estimation_error_log.png", logy=True)
        plot_infections(traj, cfg, out / "infections.png")
    first = run.first_below_threshold
    print(f"max |error| < {run.error_threshold:g} first at t={first}; "
          f"terminal max |error| = {run.max_abs_error[-1]:.3e}")
    if first is not None:
        print(f"max infection at that time: {traj.x[first].max():.3e}")
    return EXIT_OK


def _parse_grid(text: str) -> list[float]:
    try:
        return sorted({float(v) for v in text.split(",") if v.strip()})
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from exc


def _sweep_h(scenario: Scenario, h: float):
    cfg = scenario.config.replace(h=h)
    if validate(cfg):
        return [(h, False, label, None, None, None) for label in cfg.virus_labels]
    rep = stability_report(cfg)
    return [(h, True, v.label, v.rho, v.ges_certified, v.rate_bound) for v in rep.viruses]


def _sweep_L(scenario: Scenario, gain: float):
    traj, run = _observe(scenario, gain)
    if not np.all(np.isfinite(run.estimates)):
        return [(gain, None, None, None, 0)]
    t10 = run.time_to_relative(0.1)
    reached = int((t10 >= 0).sum())
    worst = int(t10.max()) if reached == t10.size else None
    return [(gain, run.first_below_threshold, float(run.max_abs_error[-1]), worst, reached)]


def cmd_sweep(args) -> int:
    scenario = load(args)
    require_valid(scenario)
    grid = args.values
    if args.param == "h":
        header = ["h", "valid", "virus", "rho", "certified", "rate_bound"]
        fn = _sweep_h
    else:
        header = ["L", "first_below_threshold", "terminal_max_abs_error", "time_to_10pct_all", "pairs_reaching_10pct"]
        fn = _sweep_L
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        results = dict(zip(grid, pool.map(lambda g: fn(scenario, g), grid)))
    rows = [row for key in sorted(results) for row in results[key]]
    out = output_dir(args, scenario, f"sweep_{args.param}")
    write_csv(out / f"sweep_{args.param}.csv", header, rows)
    if args.plot:
        from .plotting import plot_sweep
        if args.param == "h":
            cols = {}
            for label in scenario.config.virus_labels:
                cols[f"rho {label}"] = [r[3] if r[3] is not None else np.nan for r in rows if r[2] == label]
            keys = sorted(results)
        else:
            keys = [r[0] for r in rows]
            cols = {"first t with max|e| < threshold": [np.nan if r[1] is None else r[1] for r in rows]}
        plot_sweep(keys, cols, args.param, out / f"sweep_{args.param}.png")
    for row in rows:
        print(", ".join(fmt(v) for v in row))
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "stability": cmd_stability,
    "observability": cmd_observability,
    "observe": cmd_observe,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario", help="scenario file, or the name of a bundled scenario (europe)")
    common.add_argument("--horizon", type=int, help="override the number of simulated steps")
    common.add_argument("--h", type=float, help="override the sampling parameter")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./runs)")
    common.add_argument("--plot", action="store_true", help="also render PNG figures")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="competing-sir", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check the model assumptions")
    sub.add_parser("simulate", parents=[common], help="run the dynamics and write the trajectory")
    sub.add_parser("stability", parents=[common], help="spectral radius and Lyapunov certificates")
    p = sub.add_parser("observability", parents=[common], help="rank test of the observability matrix")
    p.add_argument("--regime", choices=["disease-free", "trajectory"], default="disease-free")
    p.add_argument("--t", type=int, default=0, help="window start for --regime trajectory")
    p = sub.add_parser("observe", parents=[common], help="run the Luenberger observer")
    p.add_argument("--gain", type=float, help="override the observer gain L (all nodes)")
    p = sub.add_parser("sweep", parents=[common], help="grid over h or the observer gain")
    p.add_argument("--param", choices=["h", "L"], required=True)
    p.add_argument("--values", type=_parse_grid, required=True, help="comma separated grid")
    p.add_argument("--jobs", type=int, default=4)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ScenarioValidationError as exc:
        for v in exc.violations:
            print(v, file=sys.stderr)
        return EXIT_INVALID
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
