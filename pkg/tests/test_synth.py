import json

import numpy as np
import pytest

from driftmap.engine import EngineParams
from driftmap.synth import (
    BlobSpec,
    DriftScenario,
    EmergeEvent,
    SplitEvent,
    adjusted_rand_index,
    evaluate_run,
    generate,
    load_scenario,
    run_stream,
    scenario_from_dict,
)
from conftest import axis_vec, emergence_scenario, split_scenario, null_scenario
from oracles import ari_pairs_oracle


class TestGenerate:
    def test_stationary_mixture(self):
        batches, truth = generate(null_scenario(1, batch_size=50, n_batches=4))
        assert len(batches) == 4
        assert set(truth.values()) == {"A", "B"}
        assert sum(len(b.records) for b in batches) == 200
        assert len(truth) == 200

    def test_emerge_share_within_binomial_bounds(self):
        scenario = emergence_scenario(2, batch_size=400, n_batches=5)
        batches, truth = generate(scenario)
        for batch in batches:
            ids = [r.id for r in batch.records]
            share = sum(truth[i] == "C" for i in ids) / len(ids)
            if batch.index < 3:
                assert share == 0.0
            else:
                sd = np.sqrt(0.3 * 0.7 / 400)
                assert abs(share - 0.30) < 5 * sd

    def test_split_moves_fraction_of_parent(self):
        scenario = split_scenario(3, batch_size=500, n_batches=5)
        batches, truth = generate(scenario)
        for batch in batches[3:]:
            ids = [r.id for r in batch.records]
            n_child = sum(truth[i] == "A-child" for i in ids)
            n_parent = sum(truth[i] == "A" for i in ids)
            # parent weight 0.6 splits 0.36/0.24
            assert abs(n_child / 500 - 0.24) < 5 * np.sqrt(0.24 * 0.76 / 500)
            assert abs(n_parent / 500 - 0.36) < 5 * np.sqrt(0.36 * 0.64 / 500)

    def test_deterministic_per_seed(self):
        s = emergence_scenario(9, batch_size=40, n_batches=4)
        b1, t1 = generate(s)
        b2, t2 = generate(s)
        assert t1 == t2
        for x, y in zip(b1, b2):
            assert [r.id for r in x.records] == [r.id for r in y.records]
            assert all(np.array_equal(a.vector, b.vector) for a, b in zip(x.records, y.records))

    def test_separation_invariant_enforced(self):
        with pytest.raises(ValueError, match="apart"):
            DriftScenario(
                dim=4,
                batch_size=10,
                n_batches=5,
                blobs=[BlobSpec("A", axis_vec(4, 0, 0.0), 1.0, 0.5), BlobSpec("B", axis_vec(4, 0, 3.0), 1.0, 0.5)],
            )
        with pytest.raises(ValueError, match="need >="):
            DriftScenario(
                dim=4,
                batch_size=10,
                n_batches=5,
                blobs=[BlobSpec("A", axis_vec(4, 0, 0.0), 1.0, 1.0)],
                events=[EmergeEvent(at_batch=2, blob=BlobSpec("C", axis_vec(4, 1, 4.0), 1.0, 0.3))],
            )

    def test_event_batch_range_enforced(self):
        with pytest.raises(ValueError, match="outside"):
            DriftScenario(
                dim=4,
                batch_size=10,
                n_batches=5,
                blobs=[BlobSpec("A", axis_vec(4, 0, 0.0), 1.0, 1.0)],
                events=[EmergeEvent(at_batch=1, blob=BlobSpec("C", axis_vec(4, 1, 20.0), 1.0, 0.3))],
            )

    def test_split_fraction_bounds(self):
        with pytest.raises(ValueError):
            SplitEvent(at_batch=3, parent="A", offset=axis_vec(4, 0, 9.0), fraction=1.2)

    def test_unknown_split_parent(self):
        with pytest.raises(ValueError, match="unknown"):
            DriftScenario(
                dim=4,
                batch_size=10,
                n_batches=5,
                blobs=[BlobSpec("A", axis_vec(4, 0, 0.0), 1.0, 1.0)],
                events=[SplitEvent(at_batch=3, parent="Z", offset=axis_vec(4, 1, 9.0), fraction=0.4)],
            )


class TestScenarioJson:
    def test_round_trip(self, tmp_path):
        doc = {
            "dim": 4,
            "batch_size": 20,
            "n_batches": 6,
            "seed": 5,
            "blobs": [
                {"label": "A", "mean": [0, 0, 0, 0], "sigma": 1.0, "weight": 0.5},
                {"label": "B", "mean": [9, 0, 0, 0], "sigma": 1.0, "weight": 0.5},
            ],
            "events": [
                {"at_batch": 3, "kind": "emerge", "blob": {"label": "C", "mean": [0, 25, 0, 0], "sigma": 1.0, "weight": 0.3}},
                {"at_batch": 5, "kind": "split", "parent": "B", "offset": [0, 0, 8, 0], "fraction": 0.4},
            ],
        }
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(doc))
        scenario = load_scenario(path)
        assert scenario.dim == 4 and len(scenario.events) == 2
        batches, truth = generate(scenario)
        assert {"A", "B", "C", "B-child"} == set(truth.values())

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="kind"):
            scenario_from_dict(
                {
                    "dim": 2,
                    "batch_size": 10,
                    "n_batches": 3,
                    "blobs": [{"label": "A", "mean": [0, 0], "sigma": 1.0, "weight": 1.0}],
                    "events": [{"at_batch": 2, "kind": "merge"}],
                }
            )


class TestAri:
    def test_identical_partitions(self):
        labels = ["a", "b", "c", "a", "b", "c"]
        assert adjusted_rand_index(labels, [x.upper() for x in labels]) == 1.0

    def test_random_assignments_near_zero(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            a = rng.integers(0, 4, size=200).tolist()
            b = rng.integers(0, 4, size=200).tolist()
            assert abs(adjusted_rand_index(a, b)) < 0.1

    def test_matches_pair_counting_exactly(self, rng):
        for _ in range(10):
            n = int(rng.integers(5, 60))
            a = rng.integers(0, 4, size=n).tolist()
            b = rng.integers(0, 3, size=n).tolist()
            assert adjusted_rand_index(a, b) == pytest.approx(ari_pairs_oracle(a, b), abs=1e-12)

    def test_misaligned_rejected(self):
        with pytest.raises(ValueError):
            adjusted_rand_index([1, 2], [1])


class TestEvaluateRun:
    def test_perfect_detection(self):
        scenario = emergence_scenario(17, batch_size=200, n_batches=5)
        batches, truth = generate(scenario)
        run = run_stream(batches, EngineParams(seed=17))
        result = evaluate_run(run, truth, scenario)
        event = result.events[0]
        assert event.latency == 0
        assert event.detected_at == 3
        assert event.lineage_correct is True
        assert result.final_ari == 1.0
        assert result.coverage["C"][0] >= 0.9

    def test_mismatched_ids_rejected(self):
        scenario = null_scenario(3, batch_size=30, n_batches=3)
        batches, truth = generate(scenario)
        run = run_stream(batches, EngineParams(seed=3))
        truth_broken = dict(truth)
        truth_broken.pop(next(iter(truth_broken)))
        with pytest.raises(ValueError, match="absent"):
            evaluate_run(run, truth_broken, scenario)


class TestWideDimension:
    def test_emergence_detected_at_embedding_width(self):
        # same drift shape at the full 768-dim embedding width
        scenario = emergence_scenario(77, dim=768, batch_size=120, n_batches=4)
        batches, truth = generate(scenario)
        run = run_stream(batches, EngineParams(seed=77))
        result = evaluate_run(run, truth, scenario)
        assert run.model.k == 3
        assert result.events[0].latency == 0
        assert result.coverage["C"][0] >= 0.9
