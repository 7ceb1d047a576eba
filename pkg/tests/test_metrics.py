import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import oracle_bleu4, oracle_em, oracle_meteor, oracle_rouge_l, oracle_sacc
from querysplit.errors import MetricNotApplicableError
from querysplit.metrics import (
    MetricReport,
    bleu4,
    concat_queries,
    corpus_bleu4,
    evaluate,
    exact_match,
    make_instance,
    median_report,
    meteor_lite,
    rouge_l,
    sacc,
)

def inst(pred, ref, flags=None):
    return make_instance(pred, ref, flags)


class TestSacc:
    def test_perfect(self):
        instances = [inst(["a", "b"], ["a", "b"]), inst(["x"], ["x"])]
        assert sacc(instances) == 1.0

    def test_two_thirds(self):
        instances = [
            inst(["a"] * 3, ["r"] * 3),
            inst(["a"] * 3, ["r"] * 3),
            inst(["a"] * 2, ["r"] * 3),
        ]
        assert sacc(instances) == pytest.approx(2 / 3)

    def test_single_mismatch(self):
        assert sacc([inst(["a"], ["r", "s"])]) == 0.0

    def test_counts_only(self):
        # permuting contents cannot change SACC
        a = [inst(["a", "b"], ["x", "y"])]
        b = [inst(["b", "a"], ["y", "x"])]
        assert sacc(a) == sacc(b) == 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            sacc([])


class TestExactMatch:
    def test_positional_two_thirds(self):
        instances = [inst(["a", "b", "x"], ["a", "b", "c"])]
        assert exact_match(instances, "average") == pytest.approx(2 / 3)

    def test_identity_all_subsets(self):
        instances = [inst(["a", "b"], ["a", "b"], [False, True])]
        for subset in ("complete", "rewritten", "average"):
            assert exact_match(instances, subset) == 1.0

    def test_missing_prediction_counts_in_denominator(self):
        assert exact_match([inst(["a"], ["a", "b"])], "average") == pytest.approx(1 / 2)

    def test_surplus_predictions_ignored(self):
        assert exact_match([inst(["a", "b", "c"], ["a"])], "average") == 1.0

    def test_subset_filtering(self):
        instances = [inst(["a", "X"], ["a", "b"], [False, True])]
        assert exact_match(instances, "complete") == 1.0
        assert exact_match(instances, "rewritten") == 0.0
        assert exact_match(instances, "average") == pytest.approx(1 / 2)

    def test_empty_subset_not_applicable(self):
        instances = [inst(["a"], ["a"], [False])]
        with pytest.raises(MetricNotApplicableError):
            exact_match(instances, "rewritten")

    def test_unknown_subset(self):
        with pytest.raises(ValueError):
            exact_match([inst(["a"], ["a"])], "weird")


class TestBleu:
    def test_identity(self):
        assert bleu4("去北京的高铁票价", "去北京的高铁票价") == pytest.approx(1.0)

    def test_zero_overlap_smoothed_matches_oracle(self):
        pred, ref = "abcd", "wxyz"
        expected = oracle_bleu4(list(pred), list(ref))
        assert bleu4(pred, ref) == pytest.approx(expected, abs=1e-9)

    def test_brevity_penalty_matches_oracle(self):
        pred, ref = "abc", "abcdef"
        expected = oracle_bleu4(list(pred), list(ref))
        assert bleu4(pred, ref) == pytest.approx(expected, abs=1e-9)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            bleu4("", "ref")
        with pytest.raises(ValueError):
            bleu4("pred", "")

    def test_corpus_level_raw_counts(self):
        pairs = [("abcd", "abcd"), ("efgh", "efgh")]
        assert corpus_bleu4(pairs) == pytest.approx(1.0)
        assert corpus_bleu4([("abcd", "wxyz")]) == 0.0

    def test_whitespace_mode(self):
        assert bleu4("book a flight now", "book a flight now", mode="whitespace") == 1.0


class TestRouge:
    def test_identity(self):
        assert rouge_l("abc", "abc") == 1.0

    def test_disjoint(self):
        assert rouge_l("abc", "xyz") == 0.0

    def test_hand_dp_value(self):
        # LCS("abc", "abdc") = 3 -> P=1, R=3/4, F1=6/7
        assert rouge_l("abc", "abdc") == pytest.approx(6 / 7, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            rouge_l("", "x")


class TestMeteor:
    def test_identity_closed_form(self):
        for text in ("abc", "去北京的高铁"):
            m = len(text)
            expected = 1.0 * (1 - 0.5 * (1 / m) ** 3)
            assert meteor_lite(text, text) == pytest.approx(expected, abs=1e-12)

    def test_zero_overlap(self):
        assert meteor_lite("abc", "xyz") == 0.0

    def test_chunk_minimization_over_max_matchings(self):
        # "ab" aligns as one chunk even though 'a' could pair elsewhere
        value = meteor_lite("ab", "aab")
        p, r = 2 / 2, 2 / 3
        f_mean = p * r / (0.9 * p + 0.1 * r)
        expected = f_mean * (1 - 0.5 * (1 / 2) ** 3)
        assert value == pytest.approx(expected, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            meteor_lite("", "x")


def _random_cjk(rng, lo, hi, alphabet="去北京高铁票价天气怎样店"):
    return "".join(rng.choice(alphabet) for _ in range(rng.randint(lo, hi)))


class TestOracleEquivalence:
    def test_bleu_and_rouge_random_pairs(self):
        rng = random.Random(202)
        for _ in range(15):
            pred = _random_cjk(rng, 1, 14)
            ref = _random_cjk(rng, 1, 14)
            p_tokens, r_tokens = list(pred), list(ref)
            assert bleu4(pred, ref) == pytest.approx(
                oracle_bleu4(p_tokens, r_tokens), abs=1e-9
            )
            assert rouge_l(pred, ref) == pytest.approx(
                oracle_rouge_l(p_tokens, r_tokens), abs=1e-9
            )

    def test_meteor_exhaustive_short_strings(self):
        rng = random.Random(303)
        for _ in range(15):
            pred = _random_cjk(rng, 1, 8, alphabet="去北京高")
            ref = _random_cjk(rng, 1, 8, alphabet="去北京高")
            assert meteor_lite(pred, ref) == pytest.approx(
                oracle_meteor(list(pred), list(ref)), abs=1e-9
            )

    def test_sacc_em_against_equations(self):
        rng = random.Random(404)
        for _ in range(20):
            instances = []
            for _ in range(rng.randint(1, 6)):
                ref = [_random_cjk(rng, 1, 4) for _ in range(rng.randint(1, 4))]
                pred = [
                    q if rng.random() < 0.6 else _random_cjk(rng, 1, 4) for q in ref
                ]
                rng.shuffle(pred)
                pred = pred[: rng.randint(1, len(pred))]
                flags = [rng.random() < 0.5 for _ in ref]
                instances.append(inst(pred, ref, flags))
            preds = [list(i.pred) for i in instances]
            refs = [list(i.ref) for i in instances]
            assert sacc(instances) == oracle_sacc(preds, refs)
            expected = oracle_em(preds, refs, lambda i, j: True)
            assert exact_match(instances, "average") == expected


class TestEvaluateAndReports:
    def test_perfect_prediction_maximizes_everything(self):
        instances = [
            inst(["去北京", "订酒店"], ["去北京", "订酒店"], [False, True]),
            inst(["查天气"], ["查天气"], [False]),
        ]
        report = evaluate(instances)
        assert report.bleu4 == pytest.approx(1.0)
        assert report.rouge_l == pytest.approx(1.0)
        assert report.sacc == 1.0
        assert report.em_complete == 1.0
        assert report.em_rewritten == 1.0
        assert report.em_average == 1.0
        assert report.meteor > 0.9

    def test_weighted_average_identity(self):
        rng = random.Random(505)
        instances = []
        for _ in range(40):
            ref = [_random_cjk(rng, 2, 6) for _ in range(rng.randint(2, 4))]
            pred = [q if rng.random() < 0.7 else _random_cjk(rng, 2, 6) for q in ref]
            flags = [rng.random() < 0.4 for q in ref]
            instances.append(inst(pred, ref, flags))
        report = evaluate(instances)
        reconstructed = (
            report.em_complete * report.n_complete
            + report.em_rewritten * report.n_rewritten
        ) / (report.n_complete + report.n_rewritten)
        assert report.em_average == pytest.approx(reconstructed, abs=1e-12)

    def test_not_applicable_subset_reported_as_none(self):
        instances = [inst(["a"], ["a"], [False]), inst(["b", "c"], ["b", "c"], [False, False])]
        report = evaluate(instances)
        assert report.em_rewritten is None
        assert report.em_complete == 1.0
        assert "n/a" in report.table_row()

    def test_all_values_unit_interval(self):
        rng = random.Random(606)
        instances = [
            inst(
                [_random_cjk(rng, 1, 8) for _ in range(rng.randint(1, 4))],
                [_random_cjk(rng, 1, 8) for _ in range(rng.randint(1, 4))],
            )
            for _ in range(30)
        ]
        report = evaluate(instances)
        for name in ("bleu4", "meteor", "rouge_l", "sacc", "em_average"):
            value = getattr(report, name)
            assert 0.0 <= value <= 1.0, name

    def test_median(self):
        reports = [
            MetricReport(0.0, 0.0, 0.0, s, 0.0, 0.0, 0.0, 1, 1, 1)
            for s in (0.1, 0.2, 0.3, 0.4, 0.5)
        ]
        assert median_report(reports).sacc == pytest.approx(0.3)

    def test_median_single_and_idempotent(self):
        report = MetricReport(0.5, 0.4, 0.6, 0.7, 0.8, None, 0.8, 3, 4, 0)
        assert median_report([report]) == report
        assert median_report([report, report, report]) == report

    def test_median_empty_rejected(self):
        with pytest.raises(ValueError):
            median_report([])

    def test_report_round_trip(self):
        report = MetricReport(0.5, 0.4, 0.6, 0.7, 0.8, None, 0.8, 3, 4, 0)
        assert MetricReport.from_dict(report.to_dict()) == report

    def test_concat_format(self):
        assert concat_queries(["A", "B", "C"]) == "A; B; C;"

    def test_auto_mode_handles_latin(self):
        instances = [inst(["book a flight"], ["book a flight"], [False])]
        report = evaluate(instances)
        assert report.em_average == 1.0
        assert report.rouge_l == pytest.approx(1.0)


@settings(max_examples=30)
@given(
    st.lists(
        st.tuples(
            st.lists(st.text("ab北", min_size=1, max_size=3), min_size=1, max_size=4),
            st.lists(st.text("ab北", min_size=1, max_size=3), min_size=1, max_size=4),
        ),
        min_size=1,
        max_size=5,
    )
)
def test_sacc_matches_oracle_property(pairs):
    instances = [inst(p, r) for p, r in pairs]
    preds = [p for p, _ in pairs]
    refs = [r for _, r in pairs]
    assert sacc(instances) == oracle_sacc(preds, refs)
