import json

import pytest

from querysplit.cli import main
from querysplit.dataio import load


@pytest.fixture
def sources_file(tmp_path):
    path = tmp_path / "sources.tsv"
    lines = [
        "去北京的高铁票价\t天气怎么样\t订一间酒店",
        "查明天的航班\t附近的餐厅",
        "推荐一部电影\t附近的电影院\t买两张票\t附近停车",
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def run_cli(*argv):
    return main([str(a) for a in argv])


class TestSynthesize:
    def test_writes_corpus(self, tmp_path, sources_file):
        out = tmp_path / "corpus.jsonl"
        assert run_cli("synthesize", "--sources", sources_file, "--output", out) == 0
        corpus = load(out)
        assert len(corpus) == 3
        assert [len(i.raw_queries) for i in corpus] == [3, 2, 4]

    def test_seeded_runs_are_bit_identical(self, tmp_path, sources_file):
        first = tmp_path / "a.jsonl"
        second = tmp_path / "b.jsonl"
        run_cli("--seed", 9, "synthesize", "--sources", sources_file, "--output", first)
        run_cli("--seed", 9, "synthesize", "--sources", sources_file, "--output", second)
        assert first.read_bytes() == second.read_bytes()

    def test_different_seeds_differ(self, tmp_path, sources_file):
        first = tmp_path / "a.jsonl"
        second = tmp_path / "b.jsonl"
        run_cli("--seed", 1, "synthesize", "--sources", sources_file, "--output", first)
        run_cli("--seed", 2, "synthesize", "--sources", sources_file, "--output", second)
        assert first.read_bytes() != second.read_bytes()

    def test_missing_sources_fails(self, tmp_path, capsys):
        assert run_cli("synthesize", "--sources", tmp_path / "nope", "--output",
                       tmp_path / "o") == 1
        assert "error" in capsys.readouterr().err

    def test_custom_table_file(self, tmp_path):
        from querysplit import builtin_table

        sources = tmp_path / "threes.tsv"
        sources.write_text("去北京\t订酒店\t查天气\n", encoding="utf-8")
        table = tmp_path / "table.tsv"
        builtin_table(3).without_none().to_file(table)
        out = tmp_path / "corpus.jsonl"
        assert run_cli("synthesize", "--sources", sources, "--output", out,
                       "--table", table) == 0
        inst = load(out)[0]
        assert all(filler is not None for _, filler in inst.fillers)

    def test_custom_table_size_mismatch(self, tmp_path, capsys):
        from querysplit import builtin_table

        sources = tmp_path / "pairs.tsv"
        sources.write_text("去北京\t订酒店\n", encoding="utf-8")
        table = tmp_path / "table.tsv"
        builtin_table(4).to_file(table)
        assert run_cli("synthesize", "--sources", sources, "--output",
                       tmp_path / "o", "--table", table) == 1
        assert "junctions" in capsys.readouterr().err


class TestRunAndEval:
    def _synthesize(self, tmp_path, sources_file):
        corpus = tmp_path / "corpus.jsonl"
        run_cli("synthesize", "--sources", sources_file, "--output", corpus)
        return corpus

    def test_rule_run_writes_predictions(self, tmp_path, sources_file):
        corpus = self._synthesize(tmp_path, sources_file)
        preds = tmp_path / "preds.jsonl"
        assert run_cli("run", "--input", corpus, "--output", preds) == 0
        records = [json.loads(l) for l in preds.read_text().splitlines()]
        assert len(records) == 3
        assert all("sub_queries" in r for r in records)

    def test_gold_run_scores_perfectly(self, tmp_path, sources_file, capsys):
        corpus = self._synthesize(tmp_path, sources_file)
        backends = tmp_path / "backends.json"
        backends.write_text(json.dumps({"oracle": {"kind": "gold"}}), encoding="utf-8")
        pipeline = tmp_path / "pipeline.json"
        pipeline.write_text(
            json.dumps(
                {
                    "stages": [
                        {"actions": ["split"], "executor": "oracle"},
                        {"actions": ["delete", "complete"], "executor": "oracle"},
                    ]
                }
            ),
            encoding="utf-8",
        )
        preds = tmp_path / "preds.jsonl"
        report_path = tmp_path / "report.json"
        assert run_cli(
            "run", "--input", corpus, "--output", preds,
            "--pipeline", pipeline, "--backends", backends,
        ) == 0
        assert run_cli(
            "eval", "--predictions", preds, "--references", corpus,
            "--output", report_path,
        ) == 0
        printed = capsys.readouterr().out
        assert "EM-Avg 100.00" in printed
        report = json.loads(report_path.read_text())
        assert report["em_average"] == 1.0
        assert report["sacc"] == 1.0

    def test_eval_identity_is_all_ones(self, tmp_path, sources_file, capsys):
        corpus = self._synthesize(tmp_path, sources_file)
        preds = tmp_path / "preds.jsonl"
        with open(preds, "w", encoding="utf-8") as handle:
            for inst in load(corpus):
                handle.write(
                    json.dumps(
                        {"id": inst.id, "sub_queries": list(inst.completed_queries)},
                        ensure_ascii=False,
                    )
                    + "\n"
                )
        assert run_cli("eval", "--predictions", preds, "--references", corpus) == 0
        out = capsys.readouterr().out
        assert "BLEU 100.00" in out and "SACC 100.00" in out

    def test_eval_unknown_id_fails(self, tmp_path, sources_file, capsys):
        corpus = self._synthesize(tmp_path, sources_file)
        preds = tmp_path / "preds.jsonl"
        preds.write_text('{"id": "ghost", "sub_queries": ["x"]}\n', encoding="utf-8")
        assert run_cli("eval", "--predictions", preds, "--references", corpus) == 1
        assert "ghost" in capsys.readouterr().err


class TestStats:
    def test_prints_statistics(self, tmp_path, sources_file, capsys):
        corpus = tmp_path / "corpus.jsonl"
        run_cli("synthesize", "--sources", sources_file, "--output", corpus)
        capsys.readouterr()  # drop the synthesize progress line
        assert run_cli("stats", "--corpus", corpus) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["instance_count"] == 3
        assert payload["mean_subquery_count"] == 3.0


class TestImportConcat:
    def test_import(self, tmp_path, capsys):
        sources = tmp_path / "queries.txt"
        sources.write_text(
            "\n".join(f"play song number {i}" for i in range(6)) + "\n", encoding="utf-8"
        )
        out = tmp_path / "imported.jsonl"
        assert run_cli(
            "import-concat", "--sources", sources, "--output", out,
            "--conjunction", " and ", "--queries-per-instance", 2,
        ) == 0
        corpus = load(out)
        assert len(corpus) == 3
        assert all(" and " in inst.aggregated for inst in corpus)
        assert not any(any(inst.rewrite_flags) for inst in corpus)


class TestParser:
    def test_malformed_corpus_exits_cleanly(self, tmp_path, capsys):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("not json\n", encoding="utf-8")
        assert run_cli("stats", "--corpus", bad) == 1
        assert "error" in capsys.readouterr().err

    def test_unknown_flag_exits_nonzero(self):
        with pytest.raises(SystemExit) as err:
            main(["--bogus"])
        assert err.value.code != 0

    def test_missing_subcommand_exits_nonzero(self):
        with pytest.raises(SystemExit) as err:
            main([])
        assert err.value.code != 0
