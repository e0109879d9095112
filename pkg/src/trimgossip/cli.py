"""Experiment harness: declarative configs, topology reports, paper-style presets.

Subcommands:

- ``spectral``  — connectivity report (n, |E|, lambda2, c, c2, flags) for a topology
- ``run``       — execute a configured protocol ensemble, emit aggregated CSV
- ``breakdown`` — stress the trimmed-mean protocol across corruption counts/magnitudes
- ``preset``    — run a named desk-scale experiment (fig2a, fig2b, fig2c, fig3a,
                  fig3b, clipped-vs-gotrim)

Configs are JSON or TOML; every field has a default except topology and
protocol. Output is plain CSV (one row per time/metric/node aggregate) with
reference constants in ``#``-prefixed header metadata so plots need no
oracle access. Exit codes: 0 success, 2 config error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .data import (ContaminationSpec, Dataset, TrimSpec, contaminate, jittered,
                   load_csv, range_dataset, trimmed_mean, true_ranks)
from .engine import log_sample_times, run_ensemble
from .errors import NumericalError, ParameterError, ParseError, TiesError
from .graphs import Graph, TopologySpec, build_graph, spectral_info, validate
from .protocols import make_protocol

__all__ = ["main", "ExperimentConfig", "load_config", "PRESETS"]


@dataclass
class ExperimentConfig:
    topology: TopologySpec
    protocol: dict
    experiment: str = "experiment"
    dataset: dict = field(default_factory=lambda: {"kind": "range"})
    contamination: dict | None = None
    trim: dict | None = None
    iterations: int = 20000
    trials: int = 100
    base_seed: int = 0
    record: dict = field(default_factory=dict)
    breakdown: dict = field(default_factory=dict)
    output: str | None = None


def _parse_topology(raw: dict) -> TopologySpec:
    try:
        return TopologySpec(**raw)
    except TypeError as exc:
        raise ParameterError(f"bad topology spec: {exc}") from None


def load_config(path: str) -> ExperimentConfig:
    """Load a JSON or TOML experiment config."""
    text = Path(path).read_bytes()
    if path.endswith(".toml"):
        try:
            import tomllib  # py >= 3.11
        except ImportError:
            import tomli as tomllib
        raw = tomllib.loads(text.decode())
    else:
        raw = json.loads(text)
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    raw = dict(raw)
    if "topology" not in raw or "protocol" not in raw:
        raise ParameterError("config requires 'topology' and 'protocol' sections")
    raw["topology"] = _parse_topology(dict(raw["topology"]))
    if isinstance(raw["protocol"], str):
        raw["protocol"] = {"name": raw["protocol"]}
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise ParameterError(f"unknown config fields: {sorted(unknown)}")
    return ExperimentConfig(**raw)


@dataclass
class PreparedExperiment:
    config: ExperimentConfig
    graph: Graph
    dataset: Dataset           # working (possibly contaminated) observations
    clean: Dataset             # pre-contamination observations
    trim: TrimSpec | None
    references: dict           # oracle constants emitted as CSV metadata


def prepare(config: ExperimentConfig) -> PreparedExperiment:
    """Build graph, dataset, contamination and oracle references for a config."""
    dspec = dict(config.dataset)
    kind = dspec.pop("kind", "range")
    jitter = bool(dspec.pop("jitter", False))
    jitter_seed = int(dspec.pop("jitter_seed", 0))
    if kind == "csv":
        clean, csv_graph = load_csv(dspec.pop("path"), **dspec)
        graph = csv_graph if csv_graph is not None else build_graph(config.topology)
    elif kind == "range":
        graph = build_graph(config.topology)
        clean = range_dataset(graph.n)
    else:
        raise ParameterError(f"unknown dataset kind {kind!r}")
    if clean.n != graph.n:
        raise ParameterError("dataset and topology disagree on n")

    working = clean
    if config.contamination:
        working = contaminate(clean, ContaminationSpec(**config.contamination))
    if jitter and working.has_ties():
        # scale-type corruption of integer data collides with clean values;
        # a tiny deterministic perturbation restores the no-ties assumption
        working = jittered(working, seed=jitter_seed)

    trim = TrimSpec(alpha=config.trim["alpha"], n=graph.n) if config.trim else None
    refs: dict = {"n": graph.n, "edges": graph.num_edges}
    refs["mean"] = float(working.values.mean())
    if trim is not None:
        refs["trimmed_mean"] = trimmed_mean(working, trim)
        refs["clean_trimmed_mean"] = trimmed_mean(clean, trim)
        refs["corrupted_mean"] = refs["mean"]
        refs["corrupted_mean_error"] = abs(refs["corrupted_mean"] - refs["trimmed_mean"])
        refs["zero_line"] = 0.0
    return PreparedExperiment(config=config, graph=graph, dataset=working,
                              clean=clean, trim=trim, references=refs)


def _metric_functions(prep: PreparedExperiment, protocol_name: str) -> dict:
    """Per-node metric callables appropriate for the protocol being run."""
    metrics: dict = {}
    values = prep.dataset.values
    if protocol_name in ("gorank", "gorank-async", "baseline", "baselinepp"):
        ranks = true_ranks(prep.dataset)
        n = prep.dataset.n
        metrics["rank_error"] = lambda obs, t: np.abs(obs["rank"] - ranks) / n
    if protocol_name == "gotrim":
        target = prep.references["trimmed_mean"]
        metrics["trim_error"] = lambda obs, t: np.abs(obs["est"] - target)
        metrics["weight"] = lambda obs, t: obs["weight"]
    if protocol_name in ("average", "clipped"):
        mean = float(values.mean())
        metrics["mean_error"] = lambda obs, t: np.abs(obs["est"] - mean)
        if prep.trim is not None:
            target = prep.references["trimmed_mean"]
            metrics["trim_error"] = lambda obs, t: np.abs(obs["est"] - target)
    if protocol_name == "size":
        metrics["size"] = lambda obs, t: obs["size"]
    requested = prep.config.record.get("metrics")
    if requested:
        missing = set(requested) - set(metrics)
        if missing:
            raise ParameterError(f"metrics {sorted(missing)} unavailable for {protocol_name}")
        metrics = {k: metrics[k] for k in requested}
    return metrics


def _protocol_factory(prep: PreparedExperiment):
    opts = dict(prep.config.protocol)
    name = opts.pop("name")
    if name == "gotrim":
        if prep.trim is None:
            raise ParameterError("gotrim requires a 'trim' config section")
        opts.setdefault("trim", prep.trim)

    def factory():
        return make_protocol(name, **opts)

    return name, factory


def run_experiment(config: ExperimentConfig, n_jobs: int = 1):
    """Run one configured ensemble; returns (prepared, metric names, ensemble)."""
    prep = prepare(config)
    name, factory = _protocol_factory(prep)
    metrics = _metric_functions(prep, name)
    num_times = int(config.record.get("num_times", 200))
    times = log_sample_times(config.iterations, num=num_times)
    result = run_ensemble(factory, prep.graph, prep.dataset, config.iterations,
                          trials=config.trials, base_seed=config.base_seed,
                          sample_times=times, metrics=metrics, n_jobs=n_jobs)
    return prep, name, result


def format_rows(prep: PreparedExperiment, protocol_name: str, result,
                per_node: bool = False) -> str:
    """Render aggregated trajectories as CSV with reference metadata up front."""
    lines = [f"# trimgossip={__version__}",
             f"# experiment={prep.config.experiment}",
             f"# protocol={protocol_name}",
             f"# iterations={prep.config.iterations} trials={result.trials} "
             f"base_seed={prep.config.base_seed}"]
    for key, val in prep.references.items():
        lines.append(f"# ref {key}={val!r}")
    lines.append("experiment,protocol,t,metric,node,mean,std,trials")
    exp = prep.config.experiment
    for metric in result.stacked:
        data = result.stacked[metric]          # (trials, times, n)
        overall = data.mean(axis=2)            # network mean per trial
        mu = overall.mean(axis=0)
        sd = overall.std(axis=0, ddof=1) if result.trials > 1 else np.zeros(overall.shape[1])
        for ti, t in enumerate(result.times):
            lines.append(f"{exp},{protocol_name},{int(t)},{metric},ALL,"
                         f"{mu[ti]:.12g},{sd[ti]:.12g},{result.trials}")
        if per_node:
            node_mu = data[:, -1, :].mean(axis=0)
            node_sd = data[:, -1, :].std(axis=0, ddof=1) if result.trials > 1 \
                else np.zeros(data.shape[2])
            t_last = int(result.times[-1])
            for k in range(data.shape[2]):
                lines.append(f"{exp},{protocol_name},{t_last},{metric},{k},"
                             f"{node_mu[k]:.12g},{node_sd[k]:.12g},{result.trials}")
    return "\n".join(lines) + "\n"


def write_rows(path, prep: PreparedExperiment, protocol_name: str, result,
               per_node: bool = False) -> None:
    text = format_rows(prep, protocol_name, result, per_node=per_node)
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_spectral(args) -> int:
    if args.config:
        config = load_config(args.config)
        spec = config.topology
    else:
        if not args.topology or not args.n:
            raise ParameterError("spectral needs --config or --topology/--n")
        spec = TopologySpec(kind=args.topology, n=args.n, k=args.k, p=args.p,
                            degree=args.degree, seed=args.seed)
    graph = build_graph(spec)
    info = spectral_info(graph)
    report = validate(graph)
    lines = [
        f"topology={spec.kind} n={graph.n} edges={graph.num_edges}",
        f"lambda2={info.lambda2:.9g}",
        f"c={info.c:.9g}",
        f"c2={info.c2:.9g}",
        f"lambda2_swap={info.lambda2_swap:.9g}",
        f"lambda2_avg={info.lambda2_avg:.9g}",
        f"connected={info.connected}",
        f"bipartite={info.bipartite}",
    ]
    for w in report.warnings:
        lines.append(f"warning: {w}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    return 0


def cmd_run(args) -> int:
    config = load_config(args.config)
    config = _apply_overrides(config, args)
    prep, name, result = run_experiment(config, n_jobs=args.jobs)
    write_rows(config.output, prep, name, result,
               per_node=bool(config.record.get("per_node", False)))
    return 0


def cmd_breakdown(args) -> int:
    config = load_config(args.config)
    config = _apply_overrides(config, args)
    if config.trim is None:
        raise ParameterError("breakdown needs a 'trim' section")
    prep = prepare(replace(config, contamination=None))
    trim, clean = prep.trim, prep.clean
    counts = config.breakdown.get("counts") or [trim.m - 1, trim.m, trim.m + 1]
    magnitudes = config.breakdown.get("magnitudes") or [1e3, 1e6, 1e9]
    clean_trim = trimmed_mean(clean, trim)
    clean_range = float(np.ptp(clean.values))
    lines = [f"# trimgossip={__version__}",
             f"# experiment={config.experiment}",
             f"# ref clean_trimmed_mean={clean_trim!r}",
             f"# ref clean_range={clean_range!r}",
             "experiment,p,magnitude,trial,corrupted_trimmed_mean,"
             "excursion_vs_corrupted,excursion_vs_clean,max_rel_dev"]
    rng = np.random.default_rng(config.base_seed)
    for p in counts:
        p = int(p)
        for mag in magnitudes:
            for trial in range(config.trials):
                picks = rng.choice(clean.n, size=p, replace=False) if p else np.empty(0, int)
                values = clean.values.copy()
                # distinct outliers: the trimmed-mean oracle rejects ties
                values[picks] = mag + np.arange(p, dtype=np.float64)
                corrupted = Dataset(values=values)
                target = trimmed_mean(corrupted, trim)
                traj = _final_trim_state(prep.graph, corrupted, trim, config, trial)
                est = traj.last("est")
                lines.append(
                    f"{config.experiment},{p},{mag:g},{trial},{target!r},"
                    f"{float(np.max(np.abs(est - target))):.12g},"
                    f"{float(np.max(np.abs(est - clean_trim))):.12g},"
                    f"{traj.max_rel_dev:.3e}")
    text = "\n".join(lines) + "\n"
    if config.output is None:
        sys.stdout.write(text)
    else:
        Path(config.output).write_text(text)
    return 0


def _final_trim_state(graph, dataset, trim, config, trial):
    from .engine import TrialRecorder, run_trial, trial_rng
    protocol = make_protocol("gotrim", trim=trim, track_invariant=True)
    recorder = TrialRecorder([config.iterations])
    return run_trial(protocol, graph, dataset, config.iterations, recorder,
                     trial_rng(config.base_seed, trial))


def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    if args.seed is not None:
        updates["base_seed"] = args.seed
    if args.trials is not None:
        updates["trials"] = args.trials
    if args.out is not None:
        updates["output"] = args.out
    if getattr(args, "iterations", None) is not None:
        updates["iterations"] = args.iterations
    return replace(config, **updates) if updates else config


# ---------------------------------------------------------------------------
# presets (desk-scale renditions of the headline experiments)
# ---------------------------------------------------------------------------

_WS100 = {"kind": "watts_strogatz", "n": 100, "k": 4, "p": 0.2, "seed": 42}
_GRID100 = {"kind": "grid2d", "n": 100, "rows": 10, "cols": 10}
_CONTAM = {"epsilon": 0.1, "mode": "scale", "magnitude": 10.0, "seed": 7}
# scale corruption of {1..n} collides with clean multiples of the factor
_RANGE_JITTERED = {"kind": "range", "jitter": True}


def _preset_fig2a() -> list[dict]:
    # Per-node error profile vs rank centrality on a small-world graph.
    return [{"experiment": "fig2a", "topology": _WS100,
             "protocol": "gorank", "iterations": 20000, "trials": 200,
             "record": {"per_node": True}}]


def _preset_fig2b() -> list[dict]:
    return [{"experiment": f"fig2b-{name}", "topology": topo, "protocol": "gorank",
             "iterations": 20000, "trials": 100}
            for name, topo in [("complete", {"kind": "complete", "n": 100}),
                               ("ws", _WS100), ("grid", _GRID100)]]


def _preset_fig2c() -> list[dict]:
    return [{"experiment": f"fig2c-{proto}", "topology": _GRID100, "protocol": proto,
             "iterations": 20000, "trials": 100}
            for proto in ("gorank", "baseline", "baselinepp")]


def _preset_fig3a() -> list[dict]:
    return [{"experiment": "fig3a", "topology": _WS100,
             "protocol": {"name": "gotrim", "ranker": "gorank"},
             "dataset": _RANGE_JITTERED,
             "contamination": _CONTAM, "trim": {"alpha": 0.2},
             "iterations": 20000, "trials": 200,
             "record": {"metrics": ["weight"], "per_node": True}}]


def _preset_fig3b() -> list[dict]:
    return [{"experiment": f"fig3b-{ranker}", "topology": _WS100,
             "protocol": {"name": "gotrim", "ranker": ranker},
             "dataset": _RANGE_JITTERED,
             "contamination": _CONTAM, "trim": {"alpha": 0.2},
             "iterations": 20000, "trials": 100}
            for ranker in ("gorank", "baselinepp")]


def _preset_clipped_vs_gotrim() -> list[dict]:
    shared = {"topology": _WS100, "dataset": _RANGE_JITTERED,
              "contamination": _CONTAM, "trim": {"alpha": 0.2},
              "iterations": 20000, "trials": 100}
    return [dict(shared, experiment="cvg-gotrim",
                 protocol={"name": "gotrim", "ranker": "gorank"}),
            dict(shared, experiment="cvg-clipped",
                 protocol={"name": "clipped", "tau": 1.0})]


PRESETS = {
    "fig2a": _preset_fig2a,
    "fig2b": _preset_fig2b,
    "fig2c": _preset_fig2c,
    "fig3a": _preset_fig3a,
    "fig3b": _preset_fig3b,
    "clipped-vs-gotrim": _preset_clipped_vs_gotrim,
}


def cmd_preset(args) -> int:
    if args.name not in PRESETS:
        raise ParameterError(f"unknown preset {args.name!r}; choose from {sorted(PRESETS)}")
    out = Path(args.out) if args.out else Path(f"{args.name}.csv")
    sections = []
    for raw in PRESETS[args.name]():
        config = config_from_dict(raw)
        config = _apply_overrides(config, args)
        config = replace(config, output=None)
        prep, name, result = run_experiment(config, n_jobs=args.jobs)
        sections.append(format_rows(prep, name, result,
                                    per_node=bool(config.record.get("per_node", False))))
        print(f"preset {args.name}: finished {config.experiment}")
    out.write_text("".join(sections))
    print(f"preset {args.name}: wrote {out}")
    return 0


# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trimgossip",
                                     description="gossip rank / trimmed-mean experiment harness")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON or TOML experiment config")
        p.add_argument("--seed", type=int, default=None, help="override base seed")
        p.add_argument("--trials", type=int, default=None, help="override trial count")
        p.add_argument("--iterations", type=int, default=None, help="override horizon T")
        p.add_argument("--out", default=None, help="output path")
        p.add_argument("--jobs", type=int, default=1, help="parallel trial workers")

    p_spec = sub.add_parser("spectral", help="topology connectivity report")
    common(p_spec)
    p_spec.add_argument("--topology", help="topology kind (alternative to --config)")
    p_spec.add_argument("--n", type=int, default=0)
    p_spec.add_argument("--k", type=int, default=4)
    p_spec.add_argument("--p", type=float, default=0.2)
    p_spec.add_argument("--degree", type=int, default=3)
    p_spec.set_defaults(func=cmd_spectral)

    p_run = sub.add_parser("run", help="run a configured experiment")
    common(p_run)
    p_run.set_defaults(func=cmd_run, config_required=True)

    p_bd = sub.add_parser("breakdown", help="corruption count/magnitude stress sweep")
    common(p_bd)
    p_bd.set_defaults(func=cmd_breakdown, config_required=True)

    p_pre = sub.add_parser("preset", help="run a named desk-scale preset")
    common(p_pre)
    p_pre.add_argument("name", help=f"one of {sorted(PRESETS)}")
    p_pre.set_defaults(func=cmd_preset)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "config_required", False) and not args.config:
            raise ParameterError(f"{args.command} requires --config")
        return args.func(args)
    except (ParameterError, ParseError, TiesError, FileNotFoundError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
