"""Operator entry point: collect corpora, train/evaluate models, crawl, and
compare strategies. Every subcommand writes a config echo into --out so a run
can be replayed exactly; exit codes are 2 (config), 3 (backend), 4 (data).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import classifier, dataset, engine, report
from .coverage import maximal_union
from .dom import EventType
from .engine import CrawlBudget, Strategy, StrategyKind, crawl, derive_seed
from .errors import BackendError, ConfigError, DataError, StyleCrawlError
from .ranking import save_registry
from .simulator import SimBackend, bundled_app_path, load_app

ENDPOINT_ENV = "STYLECRAWL_CDP_ENDPOINT"


def _backend_factory(spec: str, *, url: str | None, args) -> "callable":
    """Parse --backend {sim:<path>|cdp:<ws-url>} into a fresh-session factory."""
    if spec.startswith("sim:"):
        target = spec[4:]
        path = Path(target)
        if not path.exists():
            path = bundled_app_path(target)
        app = load_app(path)

        def make_sim():
            return SimBackend(app)

        return make_sim
    if spec.startswith("cdp:"):
        endpoint = spec[4:] or os.environ.get(ENDPOINT_ENV, "")
        if not endpoint:
            raise ConfigError(f"cdp backend needs a WebSocket URL (or ${ENDPOINT_ENV})")
        if url is None:
            raise ConfigError("live crawling needs --url")
        from .live import LiveBackend, SessionConfig

        def make_live():
            return LiveBackend(
                endpoint=endpoint,
                start_url=url,
                config=SessionConfig(quiescence_ms=args.quiescence_ms),
            )

        return make_live
    raise ConfigError(f"backend must look like sim:<path> or cdp:<ws-url>, got {spec!r}")


def _budget(args) -> CrawlBudget:
    if args.budget_actions is None and args.budget_seconds is None:
        return CrawlBudget(max_wall_seconds=600.0, max_actions=100)
    return CrawlBudget(max_wall_seconds=args.budget_seconds, max_actions=args.budget_actions)


def _load_models(models_dir: str | None, events) -> dict[EventType, classifier.BoostedTreeModel]:
    if not models_dir:
        raise ConfigError("this strategy needs --models <dir> with model-<event>.json files")
    out = {}
    for event in events:
        path = Path(models_dir) / f"model-{event.value}.json"
        if not path.exists():
            raise ConfigError(f"missing model file {path}")
        out[event] = classifier.load_model(path)
    return out


def _strategy(args, run_seed: int) -> Strategy:
    kind = StrategyKind.from_name(args.strategy)
    if kind is StrategyKind.STYLE_CLK:
        models = _load_models(args.models, [EventType.CLICK])
        return Strategy(kind, seed=run_seed, models=models, epsilon=args.epsilon)
    if kind is StrategyKind.STYLE_EVNTS:
        models = _load_models(args.models, list(EventType))
        return Strategy(kind, seed=run_seed, models=models, epsilon=args.epsilon)
    return Strategy(kind, seed=run_seed)


def _echo_config(args, out_dir: Path) -> None:
    echo = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    echo["schema_version"] = REPORT_SCHEMA_VERSION
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(
        json.dumps(echo, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _action_dicts(result) -> list[dict]:
    return [
        {
            "index": a.index,
            "from": a.from_state,
            "element": a.element_id,
            "event": a.event.value,
            "payload": a.payload,
            "to": a.to_state,
            "new_state": a.new_state,
            "covered_chars": a.covered_chars,
            "clock": a.clock,
        }
        for a in result.actions
    ]


REPORT_SCHEMA_VERSION = 1


def _write_run_artifacts(result, budget: CrawlBudget, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    engine.save_graph(result.graph, out_dir / "graph.json")
    engine.write_dot(result.graph, out_dir / "graph.dot")
    report.write_tsv(
        out_dir / "series.tsv",
        ["action", "clock", "covered_chars", "new_state", "element", "event"],
        [
            [a.index + 1, a.clock, a.covered_chars, int(a.new_state), a.element_id, a.event.value]
            for a in result.actions
        ],
    )
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "strategy": result.strategy.value,
        "seed": result.seed,
        "budget": {
            "max_wall_seconds": budget.max_wall_seconds,
            "max_actions": budget.max_actions,
        },
        "incomplete": result.incomplete,
        "states": len(result.graph.states),
        "edges": len(result.graph.edges),
        "final_covered_chars": result.ledger.covered_chars,
        "covered": result.ledger.as_map(),
        "actions": _action_dicts(result),
    }
    (out_dir / "report.json").write_text(
        json.dumps(doc, separators=(",", ":"), sort_keys=True) + "\n", encoding="utf-8"
    )
    if result.registry is not None:
        save_registry(result.registry, out_dir / "registry.json")


def cmd_collect(args) -> int:
    out_dir = Path(args.out)
    _echo_config(args, out_dir)
    rows = []
    sources = []
    for backend_spec in args.backend:
        if backend_spec.startswith("sim:"):
            target = backend_spec[4:]
            path = Path(target) if Path(target).exists() else bundled_app_path(target)
            app = load_app(path)
            backend = SimBackend(app)
            for snapshot in backend.labeled_snapshots():
                rows.extend(dataset.snapshot_rows(snapshot))
            sources.append(app.name)
        elif backend_spec.startswith("cdp:"):
            if not args.urls:
                raise ConfigError("cdp collection needs --urls <file>")
            from .live import BrowserSession, SessionConfig, collect_site_rows

            endpoint = backend_spec[4:] or os.environ.get(ENDPOINT_ENV, "")
            if not endpoint:
                raise ConfigError(f"cdp backend needs a WebSocket URL (or ${ENDPOINT_ENV})")
            session = BrowserSession.connect(
                endpoint, SessionConfig(quiescence_ms=args.quiescence_ms)
            )
            try:
                urls = [
                    line.strip()
                    for line in Path(args.urls).read_text(encoding="utf-8").splitlines()
                    if line.strip()
                ]
                for url in urls:
                    site_rows, failed = collect_site_rows(session, url, site_id=url)
                    rows.extend(site_rows)
                    if failed:
                        print(f"{url}: {len(failed)} elements had unharvestable listeners",
                              file=sys.stderr)
                    sources.append(url)
            finally:
                session.close()
        else:
            raise ConfigError(f"backend must look like sim:<path> or cdp:<ws-url>, got {backend_spec!r}")
    corpus = dataset.Corpus(rows=rows, provenance=f"collected from {', '.join(sources)}")
    dataset.save_corpus(corpus, out_dir / "corpus.jsonl")
    print(f"wrote {len(rows)} rows from {len(corpus.sites)} site(s) to {out_dir / 'corpus.jsonl'}")
    return 0


def _train_events(name: str) -> list[EventType]:
    if name == "all":
        return list(EventType)
    try:
        return [EventType(name)]
    except ValueError:
        raise ConfigError(f"unknown event {name!r}") from None


def cmd_train(args) -> int:
    out_dir = Path(args.out)
    _echo_config(args, out_dir)
    corpus = dataset.load_corpus(args.corpus)
    cfg = classifier.TrainConfig(
        boosting_rounds=args.boosting_rounds,
        min_leaf_size=args.min_leaf_size,
        max_depth=args.max_depth,
    )
    if args.no_split:
        train_side, test_side = corpus, None
    else:
        split = dataset.split_by_site(corpus, test_fraction=args.test_fraction, seed=args.seed)
        train_side, test_side = split.train, split.test
    reports = {}
    for event in _train_events(args.event):
        balanced = dataset.balance(train_side, event, seed=args.seed)
        model = classifier.train(balanced, event, cfg, seed=args.seed)
        model_path = out_dir / f"model-{event.value}.json"
        classifier.save_model(model, model_path)
        importance = classifier.predictor_importance(model)
        top = [f"{k}={v:.1f}%" for k, v in list(importance.items())[:5] if v > 0]
        print(f"{event.value}: {len(model.trees)} stage(s), top predictors: {', '.join(top)}")
        if test_side is not None and test_side.rows:
            reports[event.value] = classifier.evaluate(model, test_side, event)
    if reports:
        report.write_tsv(
            out_dir / "eval.tsv", report.EVAL_TABLE_HEADER, report.eval_table_rows(reports)
        )
    return 0


def cmd_eval(args) -> int:
    out_dir = Path(args.out)
    _echo_config(args, out_dir)
    corpus = dataset.load_corpus(args.corpus)
    reports = {}
    for event in _train_events(args.event):
        path = Path(args.models) / f"model-{event.value}.json"
        if not path.exists():
            raise ConfigError(f"missing model file {path}")
        model = classifier.load_model(path)
        reports[event.value] = classifier.evaluate(model, corpus, event)
    rows = report.eval_table_rows(reports)
    report.write_tsv(out_dir / "eval.tsv", report.EVAL_TABLE_HEADER, rows)
    widths = [max(len(h), 12) for h in report.EVAL_TABLE_HEADER]
    print("  ".join(h.ljust(w) for h, w in zip(report.EVAL_TABLE_HEADER, widths)))
    for row in rows:
        print("  ".join(str(v).ljust(w) for v, w in zip(row, widths)))
    return 0


def cmd_crawl(args) -> int:
    out_dir = Path(args.out)
    _echo_config(args, out_dir)
    make_backend = _backend_factory(args.backend, url=args.url, args=args)
    strategy = _strategy(args, args.seed)
    budget = _budget(args)
    result = crawl(make_backend(), strategy, budget)
    _write_run_artifacts(result, budget, out_dir)
    report.coverage_figure(
        {result.strategy.value: [(a.index + 1, a.covered_chars) for a in result.actions]},
        out_dir / "coverage.png",
        ylabel="covered characters",
        title="coverage vs. crawl actions",
    )
    status = "incomplete" if result.incomplete else "complete"
    print(
        f"{result.strategy.value}: {len(result.actions)} actions, "
        f"{len(result.graph.states)} states, {len(result.graph.edges)} edges, "
        f"{result.ledger.covered_chars} chars covered ({status})"
    )
    return 0


def cmd_compare(args) -> int:
    out_dir = Path(args.out)
    _echo_config(args, out_dir)
    strategy_names = [s.strip() for s in args.strategies.split(",") if s.strip()]
    if not strategy_names:
        raise ConfigError("--strategies needs a comma-separated list")
    kinds = [StrategyKind.from_name(name) for name in strategy_names]

    results = {}  # (kind value, repeat) -> CrawlResult
    for kind, name in zip(kinds, strategy_names):
        for repeat in range(args.repeats):
            make_backend = _backend_factory(args.backend, url=args.url, args=args)
            run_seed = derive_seed(args.seed, kind.value, repeat)
            run_args = argparse.Namespace(**{**vars(args), "strategy": name})
            strategy = _strategy(run_args, run_seed)
            budget = _budget(args)
            result = crawl(make_backend(), strategy, budget)
            results[(kind.value, repeat)] = result
            _write_run_artifacts(result, budget, out_dir / "runs" / f"{kind.value}-r{repeat}")

    maximal = maximal_union([r.ledger for r in results.values()])
    maximal_chars = sum(ivs.size for ivs in maximal.values())

    table_rows = []
    action_series: dict[str, list[tuple[float, float]]] = {}
    time_series: dict[str, list[tuple[float, float]]] = {}
    for kind in kinds:
        runs = [results[(kind.value, r)] for r in range(args.repeats)]
        for r in runs:
            r.ledger.set_maximal(maximal)
        longest = max((len(r.actions) for r in runs), default=0)
        points_a, points_t = [], []
        for i in range(longest):
            ratios, clocks = [], []
            for r in runs:
                # carry the last value forward for runs that finished early
                rec = r.actions[min(i, len(r.actions) - 1)] if r.actions else None
                covered = rec.covered_chars if rec else 0
                clocks.append(rec.clock if rec else 0.0)
                ratios.append(covered / maximal_chars if maximal_chars else 1.0)
            mean_ratio = sum(ratios) / len(ratios)
            mean_clock = sum(clocks) / len(clocks)
            table_rows.append([kind.value, i + 1, f"{mean_ratio:.6f}", f"{mean_clock:.6f}"])
            points_a.append((i + 1, mean_ratio))
            points_t.append((mean_clock, mean_ratio))
        action_series[kind.value] = points_a
        time_series[kind.value] = points_t

    report.write_tsv(
        out_dir / "compare.tsv", ["strategy", "action", "mean_coverage", "mean_clock"], table_rows
    )
    report.coverage_figure(
        action_series, out_dir / "coverage_by_actions.png", xlabel="crawl actions"
    )
    report.coverage_figure(
        time_series,
        out_dir / "coverage_by_time.png",
        xlabel="elapsed (backend clock)",
        title="coverage vs. time",
    )
    summary = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "maximal_chars": maximal_chars,
        "repeats": args.repeats,
        "strategies": {
            kind.value: {
                "final_coverage": [
                    (
                        results[(kind.value, r)].actions[-1].covered_chars / maximal_chars
                        if maximal_chars and results[(kind.value, r)].actions
                        else 0.0
                    )
                    for r in range(args.repeats)
                ],
                "actions": [
                    len(results[(kind.value, r)].actions) for r in range(args.repeats)
                ],
            }
            for kind in kinds
        },
    }
    (out_dir / "compare.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    for kind in kinds:
        finals = summary["strategies"][kind.value]["final_coverage"]
        mean_final = sum(finals) / len(finals) if finals else 0.0
        print(f"{kind.value}: mean final coverage {100 * mean_final:.2f}% over {args.repeats} run(s)")
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True, help="output directory for all artifacts")


def _add_crawl_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", required=True, help="sim:<path>|cdp:<ws-url>")
    parser.add_argument("--url", default=None, help="start URL (live backend)")
    parser.add_argument("--budget-actions", type=int, default=None)
    parser.add_argument("--budget-seconds", type=float, default=None)
    parser.add_argument("--epsilon", type=float, default=0.0)
    parser.add_argument("--models", default=None, help="directory with model-<event>.json")
    parser.add_argument("--quiescence-ms", type=int, default=500)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stylecrawl",
        description="Style-guided web app exploration: predict actionables, rank by "
        "style novelty, crawl, and measure per-action code coverage.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="build a labeled corpus from sim apps or live pages")
    p.add_argument("--backend", action="append", required=True,
                   help="sim:<path>|cdp:<ws-url>; repeatable")
    p.add_argument("--urls", default=None, help="file of URLs, one per line (cdp)")
    p.add_argument("--quiescence-ms", type=int, default=500)
    _add_common(p)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train", help="split/balance a corpus and fit per-event models")
    p.add_argument("--corpus", required=True)
    p.add_argument("--event", default="all", help="click|mouseover|mouseout|mousedown|touchstart|all")
    p.add_argument("--boosting-rounds", type=int, default=10)
    p.add_argument("--min-leaf-size", type=int, default=5)
    p.add_argument("--max-depth", type=int, default=20)
    p.add_argument("--test-fraction", type=float, default=0.20)
    p.add_argument("--no-split", action="store_true",
                   help="train on the whole corpus (single-site corpora)")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score saved models against a labeled corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--models", required=True)
    p.add_argument("--event", default="all")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("crawl", help="run one strategy against a backend")
    p.add_argument("--strategy", required=True, help="def|rnd|style-clk|style-evnts")
    _add_crawl_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_crawl)

    p = sub.add_parser("compare", help="run several strategies and average coverage")
    p.add_argument("--strategies", required=True, help="comma-separated strategy names")
    p.add_argument("--repeats", type=int, default=5)
    _add_crawl_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 3
    except (DataError, StyleCrawlError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
