"""Ranking metric and the causal stream evaluator."""

import itertools

import numpy as np
import pytest

from tgaffinity.events import Event, EventStream, compute_affinity_labels
from tgaffinity.heuristics import MessageAverageEngine
from tgaffinity.metrics import EvalResult, EvalRow, evaluate_stream, ndcg_at_k


class TestNdcg:
    def test_perfect_ranking(self):
        assert ndcg_at_k([3.0, 2.0, 1.0], [5.0, 3.0, 1.0]) == 1.0

    def test_relevant_item_ranked_second(self):
        got = ndcg_at_k([5.0, 1.0], [0.0, 1.0])
        assert got == 1.0 / np.log2(3.0)

    def test_all_zero_relevance(self):
        assert ndcg_at_k([3.0, 1.0, 2.0], [0.0, 0.0, 0.0]) == 0.0

    def test_score_ties_break_toward_lower_index(self):
        # with ties resolved the other way this would be 1.0
        got = ndcg_at_k([2.0, 2.0, 1.0], [0.0, 1.0, 0.0])
        assert got == 1.0 / np.log2(3.0)

    def test_k_truncates_the_ranking(self):
        scores = [0.0, 4.0, 0.0]
        relevance = [0.0, 0.0, 8.0]
        assert ndcg_at_k(scores, relevance, k=1) == 0.0
        assert ndcg_at_k(scores, relevance, k=3) == 0.5

    def test_k_larger_than_candidates_is_fine(self):
        assert ndcg_at_k([1.0], [2.0], k=10) == 1.0

    def test_matches_permutation_oracle(self):
        """Ideal DCG is the max over every ordering, checked exhaustively."""
        rng = np.random.default_rng(0)
        for case in range(50):
            n = int(rng.integers(1, 7))
            k = int(rng.integers(1, 7))
            # small integer ranges force frequent ties
            scores = rng.integers(0, 4, n).astype(np.float64)
            relevance = rng.integers(0, 4, n).astype(np.float64)
            depth = min(k, n)
            discounts = 1.0 / np.log2(np.arange(2, depth + 2, dtype=np.float64))
            order = np.argsort(-scores, kind="stable")[:depth]
            dcg = float(np.sum(relevance[order] * discounts))
            best = max(
                float(np.sum(relevance[list(perm)] * discounts))
                for perm in itertools.permutations(range(n), depth)
            )
            expected = 0.0 if best <= 0.0 else dcg / best
            got = ndcg_at_k(scores, relevance, k=k)
            assert got == pytest.approx(expected, abs=1e-12), (case, scores, relevance, k)

    def test_shape_validation(self):
        with pytest.raises(ValueError, match="1-d and the same length"):
            ndcg_at_k([1.0, 2.0], [1.0])
        with pytest.raises(ValueError, match="1-d"):
            ndcg_at_k(np.zeros((2, 2)), np.zeros((2, 2)))
        with pytest.raises(ValueError, match="k must be"):
            ndcg_at_k([1.0], [1.0], k=0)


class TestEvalResult:
    def test_empty(self):
        result = EvalResult()
        assert result.count == 0
        assert result.mean == 0.0
        assert result.std == 0.0

    def test_mean_and_std(self):
        values = [0.2, 0.5, 0.8, 1.0]
        result = EvalResult(rows=[EvalRow(w, 0, v) for w, v in enumerate(values)])
        assert result.count == 4
        np.testing.assert_allclose(result.mean, np.mean(values), atol=1e-15)
        np.testing.assert_allclose(result.std, np.std(values), atol=1e-15)

    def test_write_csv(self, tmp_path):
        result = EvalResult(rows=[EvalRow(0, 2, 0.5), EvalRow(1, 0, 1.0)])
        path = tmp_path / "eval.csv"
        result.write_csv(str(path))
        assert path.read_text().splitlines() == [
            "window,source,ndcg",
            "0,2,0.5",
            "1,0,1.0",
        ]


def two_window_stream():
    events = [
        Event(src=0, dst=1, time=1.0, feature=np.array([4.0])),
        Event(src=0, dst=2, time=11.0, feature=np.array([8.0])),
    ]
    return EventStream(events, num_nodes=3)


class TestEvaluateStream:
    def test_predictions_exclude_the_current_window(self):
        """Window w is scored from history strictly before w starts."""
        stream = two_window_stream()
        labels = compute_affinity_labels(stream, 10.0, normalize=False)
        engine = MessageAverageEngine(3, k=1)
        result = evaluate_stream(engine, stream, labels, period=10.0, k=3)
        by_window = {row.window: row.ndcg for row in result.rows}
        # window 0: nothing seen yet, all scores 0, relevant item lands mid-rank
        assert by_window[0] == 1.0 / np.log2(3.0)
        # window 1: only window 0's message is known; a leaked window-1 event
        # would promote destination 2 to the top and score 1.0 instead
        assert by_window[1] == 0.5

    def test_windows_filter_restricts_rows(self):
        stream = two_window_stream()
        labels = compute_affinity_labels(stream, 10.0, normalize=False)
        result = evaluate_stream(
            MessageAverageEngine(3, k=1), stream, labels, period=10.0, k=3, windows={1}
        )
        assert [(row.window, row.source) for row in result.rows] == [(1, 0)]
        assert result.rows[0].ndcg == 0.5

    def test_csv_output(self, tmp_path):
        stream = two_window_stream()
        labels = compute_affinity_labels(stream, 10.0, normalize=False)
        path = tmp_path / "rows.csv"
        evaluate_stream(
            MessageAverageEngine(3, k=1),
            stream,
            labels,
            period=10.0,
            k=3,
            csv_path=str(path),
        )
        lines = path.read_text().splitlines()
        assert lines[0] == "window,source,ndcg"
        assert len(lines) == 3
        window, source, ndcg = lines[2].split(",")
        assert (window, source) == ("1", "0")
        assert float(ndcg) == 0.5

    def test_empty_stream(self):
        result = evaluate_stream(
            MessageAverageEngine(3, k=1), EventStream([], num_nodes=3), [], period=10.0
        )
        assert result.count == 0

    def test_batch_size_does_not_change_rows(self):
        stream = two_window_stream()
        labels = compute_affinity_labels(stream, 10.0, normalize=False)
        a = evaluate_stream(MessageAverageEngine(3, k=1), stream, labels, period=10.0, batch_size=1)
        b = evaluate_stream(MessageAverageEngine(3, k=1), stream, labels, period=10.0, batch_size=8)
        assert [(r.window, r.source, r.ndcg) for r in a.rows] == [
            (r.window, r.source, r.ndcg) for r in b.rows
        ]
