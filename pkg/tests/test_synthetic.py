"""Seeded stream generators."""

import numpy as np
import pytest

from tgaffinity.synthetic import SyntheticSpec, generate_stream, pair_means, random_stream


class TestSyntheticSpec:
    def test_validation(self):
        with pytest.raises(ValueError, match="num_nodes"):
            SyntheticSpec(num_nodes=1)
        with pytest.raises(ValueError, match="num_events"):
            SyntheticSpec(num_events=0)
        with pytest.raises(ValueError, match="noise"):
            SyntheticSpec(noise=-0.1)
        with pytest.raises(ValueError, match="mean_high"):
            SyntheticSpec(mean_low=2.0, mean_high=2.0)


class TestPairMeans:
    def test_deterministic_per_seed(self):
        spec = SyntheticSpec(num_nodes=5, seed=3)
        np.testing.assert_array_equal(pair_means(spec), pair_means(spec))

    def test_seed_changes_means(self):
        a = pair_means(SyntheticSpec(num_nodes=5, seed=0))
        b = pair_means(SyntheticSpec(num_nodes=5, seed=1))
        assert np.max(np.abs(a - b)) > 1e-6

    def test_zero_diagonal_and_range(self):
        spec = SyntheticSpec(num_nodes=6, mean_low=0.5, mean_high=3.0)
        means = pair_means(spec)
        np.testing.assert_array_equal(np.diag(means), np.zeros(6))
        off = means[~np.eye(6, dtype=bool)]
        assert np.all((off >= 0.5) & (off <= 3.0))


class TestGenerateStream:
    def test_deterministic_per_seed(self):
        spec = SyntheticSpec(num_nodes=4, num_events=50, seed=7)
        a, b = generate_stream(spec), generate_stream(spec)
        assert list(a) == list(b)

    def test_times_are_consecutive_integers(self):
        stream = generate_stream(SyntheticSpec(num_nodes=4, num_events=30))
        assert [e.time for e in stream] == [float(t) for t in range(1, 31)]

    def test_no_self_loops(self):
        stream = generate_stream(SyntheticSpec(num_nodes=3, num_events=200))
        assert all(e.src != e.dst for e in stream)

    def test_values_floored_at_001(self):
        stream = generate_stream(SyntheticSpec(num_nodes=4, num_events=300, noise=5.0))
        values = np.array([e.value for e in stream])
        assert values.min() >= 0.01
        # heavy noise must actually hit the floor somewhere
        assert np.any(values == 0.01)

    def test_noiseless_values_equal_pair_means(self):
        spec = SyntheticSpec(num_nodes=4, num_events=100, noise=0.0)
        means = pair_means(spec)
        for event in generate_stream(spec):
            np.testing.assert_allclose(event.value, means[event.src, event.dst], atol=1e-12)

    def test_all_pairs_eventually_used(self):
        stream = generate_stream(SyntheticSpec(num_nodes=3, num_events=300))
        pairs = {(e.src, e.dst) for e in stream}
        assert pairs == {(s, d) for s in range(3) for d in range(3) if s != d}


class TestRandomStream:
    def test_deterministic_per_seed(self):
        assert list(random_stream(4, 40, seed=2)) == list(random_stream(4, 40, seed=2))

    def test_seed_changes_values(self):
        a = random_stream(4, 40, seed=0)
        b = random_stream(4, 40, seed=1)
        assert [e.value for e in a] != [e.value for e in b]

    def test_shape_properties(self):
        stream = random_stream(5, 60, seed=0)
        assert stream.num_nodes == 5
        assert len(stream) == 60
        assert [e.time for e in stream] == [float(t) for t in range(1, 61)]
        assert all(e.src != e.dst for e in stream)
        assert all(0 <= e.src < 5 and 0 <= e.dst < 5 for e in stream)

    def test_too_few_nodes_rejected(self):
        with pytest.raises(ValueError, match="num_nodes"):
            random_stream(1, 10)
