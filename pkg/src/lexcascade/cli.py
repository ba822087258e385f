"""Command-line front end tying the analysis modules into reproducible runs.

Subcommands: ``net-stats``, ``risk``, ``fit``, ``compare``, ``simulate``.
Exit codes: 0 success, 1 analysis infeasible, 2 I/O failure, 3 invalid
configuration. Every report embeds the effective config and seed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import plots, reports
from .cascade import aggregate_risk, ingest_events, shuffle_test, write_events
from .config import RunConfig, parse_config
from .errors import (
    ConfigError,
    InitializationError,
    InsufficientDataError,
    LexcascadeError,
    ParseError,
    UnstableProcessError,
)
from .features import FeatureContext, ModelSpec
from .graph import (
    SocialGraph,
    degree_distribution,
    geo_assortativity,
    load_cities,
    load_edges,
    write_cities,
    write_edges,
)
from .hawkes import FitConfig, Kernel, fit
from .simulate import SimConfig, branching_report, simulate, synth_graph
from .stats import compare_pipeline


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lexcascade",
        description="Influence analysis for word-adoption cascades on a social graph.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("net-stats", "degree distribution and geographic assortativity"),
        ("risk", "infection risks with the timestamp-shuffle null"),
        ("fit", "fit the influence model to each word's cascade"),
        ("compare", "nested-model likelihood-ratio tests with FDR control"),
        ("simulate", "generate synthetic graph and cascade files"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the run config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--workers", type=int, default=None, help="parallelism cap")
        p.add_argument("--out", default=None, help="override the output directory")
    return parser


def _effective_config(args) -> RunConfig:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if args.out is not None:
        cfg.out_dir = args.out
    cfg.validate()
    return cfg


def _load_graph(cfg: RunConfig) -> SocialGraph:
    if not cfg.edges_path:
        raise ConfigError("edges_path is required for this command")
    graph = load_edges(cfg.edges_path)
    if cfg.cities_path:
        load_cities(cfg.cities_path, graph)
    return graph


def _load_cascades(cfg: RunConfig, graph: SocialGraph):
    if not cfg.events_path:
        raise ConfigError("events_path is required for this command")
    return ingest_events(cfg.events_path, graph, horizon_hours=cfg.horizon_hours)


def _load_classes(cfg: RunConfig) -> dict[str, str]:
    classes: dict[str, str] = {}
    if cfg.classes_path:
        with open(cfg.classes_path, encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise ParseError(cfg.classes_path, line_no, "expected 'word<TAB>class'")
                classes[parts[0]] = parts[1]
    return classes


def _kernel(cfg: RunConfig) -> Kernel:
    return Kernel(decay=cfg.decay_per_hour, cutoff=cfg.kernel_cutoff_hours)


def _fit_config(cfg: RunConfig) -> FitConfig:
    return FitConfig(
        kernel=_kernel(cfg),
        tol_abs=cfg.tol_abs,
        max_iter=cfg.max_iter,
        init_weight=cfg.init_weight,
        tie_percentile=cfg.tie_percentile,
        aa_threshold=cfg.aa_threshold,
        tracked_cities=frozenset(cfg.tracked_cities),
        freeze_weights=cfg.freeze_weights,
    )


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _word_contexts(cfg: RunConfig, graph, cascades) -> dict[str, FeatureContext]:
    return {
        word: FeatureContext.for_cascade(
            graph,
            cascade,
            tracked_cities=cfg.tracked_cities,
            tie_percentile=cfg.tie_percentile,
            aa_threshold=cfg.aa_threshold,
        )
        for word, cascade in cascades.items()
    }


def _write_threshold_audit(out: Path, contexts: dict[str, FeatureContext]) -> None:
    reports.write_tsv(
        out / "tie_thresholds.tsv",
        ("word", "aa_threshold", "pool_size"),
        ((w, c.aa_threshold, c.pool_size) for w, c in sorted(contexts.items())),
    )


# -- commands --------------------------------------------------------------------


def cmd_net_stats(cfg: RunConfig) -> int:
    graph = _load_graph(cfg)
    out = _out(cfg)
    hist = degree_distribution(graph)
    if not hist:
        print("warning: empty graph, histogram has no rows", file=sys.stderr)
    reports.write_tsv(
        out / "degree_hist.tsv",
        ("degree", "count"),
        sorted(hist.items()),
    )
    try:
        assort = geo_assortativity(
            graph, cfg.tracked_cities if cfg.tracked_cities else None
        )
    except InsufficientDataError as exc:
        print(f"warning: assortativity unavailable: {exc}", file=sys.stderr)
        assort = None
    reports.write_json(
        out / "net_stats.json",
        {
            "n_users": graph.n_users,
            "n_edges": graph.n_edges,
            "geo_assortativity": assort,
        },
        cfg,
    )
    plots.plot_degree_distribution(hist, out / "degree_distribution.png")
    print(f"net-stats: {graph.n_users} users, {graph.n_edges} edges -> {out}")
    return 0


def cmd_risk(cfg: RunConfig) -> int:
    graph = _load_graph(cfg)
    cascades = _load_cascades(cfg, graph)
    classes = _load_classes(cfg)
    out = _out(cfg)
    word_reports = [
        shuffle_test(
            cascades[word],
            graph,
            permutations=cfg.permutations,
            seed=cfg.seed,
            workers=cfg.workers,
        )
        for word in sorted(cascades)
    ]
    for report in word_reports:
        if not report.available_buckets():
            print(f"warning: no exposures for word {report.word!r}", file=sys.stderr)
    aggregated = aggregate_risk(word_reports, classes)
    reports.write_tsv(
        out / "risk_words.tsv", reports.RISK_HEADER, reports.risk_rows(word_reports, classes)
    )
    reports.write_tsv(
        out / "risk_classes.tsv",
        ("class", "bucket", "ratio", "ci_lo", "ci_hi", "n_words"),
        reports.class_risk_rows(aggregated),
    )
    reports.write_json(
        out / "risk_report.json",
        reports.risk_report_payload(word_reports, aggregated, classes),
        cfg,
    )
    plots.plot_risk_ratios(aggregated, out / "risk_ratios.png")
    print(f"risk: {len(word_reports)} words, {cfg.permutations} permutations -> {out}")
    return 0


def cmd_fit(cfg: RunConfig) -> int:
    graph = _load_graph(cfg)
    cascades = _load_cascades(cfg, graph)
    out = _out(cfg)
    spec = ModelSpec(cfg.fit_features)
    fit_cfg = _fit_config(cfg)
    contexts = _word_contexts(cfg, graph, cascades)
    results = {
        word: fit(cascades[word], graph, spec, fit_cfg, context=contexts[word])
        for word in sorted(cascades)
    }
    header = ("word", "features", "ll_init", "log_lik", "iterations", "converged") + tuple(
        spec.features
    )
    reports.write_tsv(out / "fits.tsv", header, reports.fit_rows(results))
    reports.write_json(
        out / "fits.json",
        reports.fit_payload(results, {w: c.n_events for w, c in cascades.items()}),
        cfg,
    )
    _write_threshold_audit(out, contexts)
    plots.plot_fit_traces(results, out / "fit_traces.png")
    print(f"fit: {len(results)} words with features {spec.label()} -> {out}")
    return 0


def cmd_compare(cfg: RunConfig) -> int:
    graph = _load_graph(cfg)
    cascades = _load_cascades(cfg, graph)
    out = _out(cfg)
    base = ModelSpec(cfg.base_features)
    report = compare_pipeline(
        cascades,
        graph,
        base,
        cfg.compare_features,
        alpha=cfg.alpha,
        config=_fit_config(cfg),
        workers=cfg.workers,
    )
    reports.write_tsv(out / "compare.tsv", reports.COMPARE_HEADER, reports.compare_rows(report))
    reports.write_json(out / "compare.json", reports.compare_payload(report), cfg)
    _write_threshold_audit(out, _word_contexts(cfg, graph, cascades))
    plots.plot_ll_improvement(report, out / "ll_improvement.png")
    n_rejected = len(report.rejected())
    print(
        f"compare: {len(report.rows)} tests, {n_rejected} rejected at alpha={cfg.alpha} -> {out}"
    )
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    out = _out(cfg)
    if cfg.sim_graph == "erdos-renyi":
        graph = synth_graph("erdos-renyi", seed=cfg.seed, n=cfg.sim_nodes, edge_prob=cfg.sim_edge_prob)
    elif cfg.sim_graph == "planted-cities":
        graph = synth_graph(
            "planted-cities",
            seed=cfg.seed,
            n=cfg.sim_nodes,
            cities=cfg.sim_cities,
            p_in=cfg.sim_city_prob_in,
            p_out=cfg.sim_city_prob_out,
        )
    elif cfg.sim_graph == "embedded-core":
        graph = synth_graph(
            "embedded-core",
            seed=cfg.seed,
            n=cfg.sim_nodes,
            n_cores=cfg.sim_cores,
            core_size=cfg.sim_core_size,
            periphery_prob=cfg.sim_periphery_prob,
            cities=cfg.sim_cities,
            city_coherence=cfg.sim_city_coherence,
        )
    else:
        raise ConfigError(f"unknown sim_graph {cfg.sim_graph!r}")

    spec = ModelSpec(cfg.fit_features)
    weights = np.zeros(spec.dim)
    for k, f in enumerate(cfg.fit_features):
        weights[spec.index(f)] = cfg.sim_weights[k]
    cascades = []
    meta_words = []
    for w in range(cfg.sim_words):
        sim = SimConfig(
            graph=graph,
            weights=weights,
            base_rate=cfg.sim_base_rate,
            horizon=cfg.sim_horizon_hours,
            seed=(cfg.seed, w),
            spec=spec,
            kernel=_kernel(cfg),
            word=f"w{w}",
            mode=cfg.sim_mode,
            max_events=cfg.sim_max_events,
            stability_factor=cfg.sim_stability_factor,
            stability_check=cfg.sim_stability,
            aa_threshold=cfg.aa_threshold,
            tracked_cities=frozenset(cfg.tracked_cities),
            adopt_prob=cfg.sim_adopt_prob,
            boost=cfg.sim_boost,
            threshold_k=cfg.sim_threshold_k,
            seed_rate=cfg.sim_seed_rate,
            delay_hours=cfg.sim_delay_hours,
        )
        cascade = simulate(sim)
        cascades.append(cascade)
        meta_words.append(
            {"word": cascade.word, "n_events": cascade.n_events, "horizon_hours": cascade.horizon}
        )
    write_edges(out / "edges.tsv", graph)
    if any(graph.city_of(u) is not None for u in graph.users):
        write_cities(out / "cities.tsv", graph)
    write_events(out / "events.tsv", cascades)
    branching = (
        branching_report(
            SimConfig(
                graph=graph,
                weights=weights,
                base_rate=cfg.sim_base_rate,
                horizon=cfg.sim_horizon_hours,
                spec=spec,
                kernel=_kernel(cfg),
                aa_threshold=cfg.aa_threshold,
                tracked_cities=frozenset(cfg.tracked_cities),
                stability_check=cfg.sim_stability,
            )
        )
        if cfg.sim_mode == "hawkes"
        else None
    )
    reports.write_json(
        out / "sim_meta.json",
        {
            "graph": {"kind": cfg.sim_graph, "n_users": graph.n_users, "n_edges": graph.n_edges},
            "true_weights": {f: float(v) for f, v in zip(spec.features, weights)},
            "branching": branching,
            "words": meta_words,
        },
        cfg,
    )
    total = sum(c.n_events for c in cascades)
    print(f"simulate: {cfg.sim_words} words, {total} events -> {out}")
    return 0


COMMANDS = {
    "net-stats": cmd_net_stats,
    "risk": cmd_risk,
    "fit": cmd_fit,
    "compare": cmd_compare,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _effective_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 3
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InsufficientDataError, InitializationError, UnstableProcessError) as exc:
        print(f"error: analysis infeasible: {exc}", file=sys.stderr)
        return 1
    except LexcascadeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
