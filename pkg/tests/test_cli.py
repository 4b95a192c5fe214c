import json

import pytest

from stylecrawl.cli import main
from stylecrawl.dataset import load_corpus


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def collected(tmp_path_factory):
    """One corpus collected from two bundled sim apps (two sites)."""
    out = tmp_path_factory.mktemp("collect")
    code = run(
        "collect",
        "--backend", "sim:two-state-anchor",
        "--backend", "sim:deep-menu",
        "--out", out,
    )
    assert code == 0
    return out / "corpus.jsonl"


@pytest.fixture(scope="module")
def trained(collected, tmp_path_factory):
    out = tmp_path_factory.mktemp("train")
    code = run(
        "train",
        "--corpus", collected,
        "--event", "click",
        "--no-split",
        "--seed", "3",
        "--out", out,
    )
    assert code == 0
    return out


class TestCollect:
    def test_corpus_contents(self, collected):
        corpus = load_corpus(collected)
        assert corpus.sites == {"two-state-anchor", "deep-menu"}
        assert any(r.is_default_actionable for r in corpus.rows)
        assert any(r.direct_listeners for r in corpus.rows)

    def test_config_echo_written(self, collected):
        echo = json.loads((collected.parent / "config.json").read_text())
        assert echo["backend"] == ["sim:two-state-anchor", "sim:deep-menu"]

    def test_bad_backend_spec_exits_2(self, tmp_path):
        assert run("collect", "--backend", "weird:thing", "--out", tmp_path) == 2

    def test_missing_app_exits_3(self, tmp_path):
        assert run("collect", "--backend", "sim:/absent/app.json", "--out", tmp_path) == 3


class TestTrain:
    def test_model_files_written(self, trained):
        assert (trained / "model-click.json").exists()

    def test_split_needs_two_sites(self, collected, tmp_path):
        single = tmp_path / "single"
        assert run("collect", "--backend", "sim:deep-menu", "--out", single) == 0
        code = run(
            "train", "--corpus", single / "corpus.jsonl", "--event", "click",
            "--out", tmp_path / "t",
        )
        assert code == 4  # cannot split one site

    def test_unknown_event_exits_2(self, collected, tmp_path):
        assert (
            run("train", "--corpus", collected, "--event", "hover", "--out", tmp_path) == 2
        )

    def test_corpus_parse_error_exits_4(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not json\n")
        assert run("train", "--corpus", bad, "--event", "click", "--out", tmp_path) == 4


class TestEval:
    def test_eval_table(self, collected, trained, tmp_path):
        code = run(
            "eval", "--corpus", collected, "--models", trained, "--event", "click",
            "--out", tmp_path,
        )
        assert code == 0
        table = (tmp_path / "eval.tsv").read_text().splitlines()
        assert table[0].startswith("event\t")
        assert table[1].startswith("click\t")


class TestCrawl:
    def test_def_crawl_artifacts(self, tmp_path):
        out = tmp_path / "run"
        code = run(
            "crawl", "--backend", "sim:two-state-anchor", "--strategy", "def",
            "--budget-actions", "50", "--out", out,
        )
        assert code == 0
        for name in ("config.json", "graph.json", "graph.dot", "report.json",
                      "series.tsv", "coverage.png"):
            assert (out / name).exists(), name
        report = json.loads((out / "report.json").read_text())
        assert report["schema_version"] == 1
        assert report["strategy"] == "def"
        assert report["budget"] == {"max_wall_seconds": None, "max_actions": 50}
        assert report["states"] == 2

    def test_style_crawl_writes_registry(self, trained, tmp_path):
        out = tmp_path / "run"
        code = run(
            "crawl", "--backend", "sim:two-state-anchor", "--strategy", "style-clk",
            "--models", trained, "--budget-actions", "20", "--out", out,
        )
        assert code == 0
        assert (out / "registry.json").exists()

    def test_unknown_strategy_exits_2(self, tmp_path):
        code = run(
            "crawl", "--backend", "sim:two-state-anchor", "--strategy", "bfs",
            "--out", tmp_path,
        )
        assert code == 2

    def test_style_without_models_exits_2(self, tmp_path):
        code = run(
            "crawl", "--backend", "sim:two-state-anchor", "--strategy", "style-clk",
            "--out", tmp_path,
        )
        assert code == 2

    def test_missing_app_exits_3(self, tmp_path):
        code = run(
            "crawl", "--backend", "sim:/absent.json", "--strategy", "def",
            "--out", tmp_path,
        )
        assert code == 3


class TestCompare:
    def _compare(self, out, repeats="1"):
        return run(
            "compare", "--backend", "sim:deep-menu", "--strategies", "def,rnd",
            "--repeats", repeats, "--budget-actions", "30", "--seed", "5", "--out", out,
        )

    def test_outputs_and_averaging(self, tmp_path):
        out = tmp_path / "cmp"
        assert self._compare(out, repeats="2") == 0
        for name in ("compare.tsv", "compare.json", "coverage_by_actions.png",
                      "coverage_by_time.png", "config.json"):
            assert (out / name).exists(), name
        assert (out / "runs" / "def-r0" / "graph.json").exists()
        assert (out / "runs" / "rnd-r1" / "report.json").exists()
        summary = json.loads((out / "compare.json").read_text())
        assert set(summary["strategies"]) == {"def", "rnd"}
        assert summary["maximal_chars"] > 0

    def test_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert self._compare(a) == 0
        assert self._compare(b) == 0
        for rel in ("compare.tsv", "compare.json", "runs/def-r0/report.json",
                     "runs/rnd-r0/series.tsv", "runs/rnd-r0/graph.json"):
            assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel

    def test_unknown_strategy_in_list_exits_2(self, tmp_path):
        code = run(
            "compare", "--backend", "sim:deep-menu", "--strategies", "def,warp",
            "--out", tmp_path,
        )
        assert code == 2


class TestFullPipelineOnEquivalenceApp:
    """collect -> train -> compare, driven end to end through the CLI: the
    style-guided strategy must reach 100% unit coverage at exactly action 5
    on the 5x10 equivalence app while random clicking trails it."""

    def test_style_clk_beats_rnd(self, tmp_path):
        corpus_dir = tmp_path / "corpus"
        models_dir = tmp_path / "models"
        out = tmp_path / "cmp"
        code = run(
            "collect",
            "--backend", "sim:equivalence-5x10",
            "--backend", "sim:two-state-anchor",
            "--backend", "sim:deep-menu",
            "--out", corpus_dir,
        )
        assert code == 0
        assert (
            run(
                "train", "--corpus", corpus_dir / "corpus.jsonl", "--event", "click",
                "--no-split", "--out", models_dir,
            )
            == 0
        )
        code = run(
            "compare", "--backend", "sim:equivalence-5x10",
            "--strategies", "style-clk,rnd", "--repeats", "3",
            "--budget-actions", "60", "--models", models_dir, "--seed", "9", "--out", out,
        )
        assert code == 0
        rows = [
            line.split("\t")
            for line in (out / "compare.tsv").read_text().splitlines()[1:]
        ]
        by_strategy = {}
        for strategy, action, ratio, _clock in rows:
            by_strategy.setdefault(strategy, {})[int(action)] = float(ratio)
        assert by_strategy["style-clk"][5] == 1.0
        assert by_strategy["style-clk"][4] < 1.0
        assert by_strategy["rnd"][5] < 1.0  # averaged over repeats


class TestParser:
    def test_missing_subcommand_exits_2(self):
        assert run() == 2

    def test_missing_required_flag_exits_2(self, tmp_path):
        assert run("crawl", "--strategy", "def", "--out", tmp_path) == 2

    def test_default_budget_is_applied_when_unset(self, tmp_path):
        # stock budget: 600 seconds / 100 actions
        out = tmp_path / "run"
        code = run(
            "crawl", "--backend", "sim:equivalence-5x10", "--strategy", "rnd",
            "--seed", "2", "--out", out,
        )
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert 0 < len(report["actions"]) <= 100
