import numpy as np
import pytest

from driftmap.engine import (
    ConceptModel,
    EngineParams,
    HistoryRecord,
    LineageEntry,
    assign,
    clone_model,
    detect_outliers,
    global_adjust,
    init_model,
    local_split,
    process_batch,
)
from driftmap.synth import generate, run_stream
from driftmap.vector_io import Batch, EmbeddingRecord
from conftest import axis_vec, emergence_scenario, null_scenario
from oracles import outlier_oracle


def records_from(vectors, prefix="x"):
    return [EmbeddingRecord(id=f"{prefix}{i}", vector=np.asarray(v, dtype=np.float64)) for i, v in enumerate(vectors)]


def bare_model(cc, params=None, dim=None, history=None, batch_counter=1):
    cc = np.asarray(cc, dtype=np.float64)
    k = cc.shape[0]
    model = ConceptModel(
        params=params or EngineParams(k0=min(2, k)),
        dim=dim or cc.shape[1],
        k=k,
        cc=cc,
        ss=[LineageEntry(root=None, child=j, created_at_batch=1) for j in range(k)],
        history=history or [],
        batch_counter=batch_counter,
    )
    model.validate()
    return model


def two_blob_batch(rng, n=100, sep=10.0, dim=16, sigma=0.1, index=1):
    half = n // 2
    a = sigma * rng.normal(size=(half, dim))
    b = axis_vec(dim, 0, sep) + sigma * rng.normal(size=(n - half, dim))
    labels = np.array([0] * half + [1] * (n - half))
    return Batch(index=index, records=records_from(np.vstack([a, b]))), labels


class TestInitModel:
    def test_two_blob_init(self, rng):
        batch, labels = two_blob_batch(rng, n=100)
        model = init_model(batch, EngineParams(seed=0))
        assert model.k == 2 and model.batch_counter == 1
        assert [e.root for e in model.ss] == [None, None]
        assert [e.child for e in model.ss] == [0, 1]
        # each centroid within 3*sigma/sqrt(50) of the matching blob's sample mean
        points = batch.vectors
        for lab, target in ((0, points[labels == 0].mean(axis=0)), (1, points[labels == 1].mean(axis=0))):
            best = min(np.linalg.norm(model.cc - target, axis=1))
            assert best < 3 * 0.1 / np.sqrt(50)

    def test_two_points_exact(self):
        batch = Batch(index=1, records=records_from([[0.0, 0.0], [4.0, 0.0]]))
        model = init_model(batch, EngineParams(seed=1))
        assert sorted(map(tuple, model.cc.tolist())) == [(0.0, 0.0), (4.0, 0.0)]

    def test_too_small_batch(self):
        batch = Batch(index=1, records=records_from([[1.0, 2.0]]))
        with pytest.raises(ValueError):
            init_model(batch, EngineParams(seed=0))


class TestDetectOutliers:
    def test_window_values_on_uniform_distances(self):
        model = bare_model([[0.0]], params=EngineParams(k0=1))
        batch = Batch(index=2, records=records_from([[float(i)] for i in range(1, 101)]))
        scan = detect_outliers(model, batch, 0)
        assert scan.l == pytest.approx(40.6)
        assert scan.u == pytest.approx(60.4)
        assert scan.lower == pytest.approx(35.65)
        assert scan.upper == pytest.approx(65.35)
        assert sorted(float(r.vector[0]) for r in scan.records) == [float(v) for v in range(66, 101)]

    def test_equal_distances_no_outliers(self):
        model = bare_model([[0.0]], params=EngineParams(k0=1))
        batch = Batch(index=2, records=records_from([[5.0], [-5.0], [5.0], [-5.0]]))
        scan = detect_outliers(model, batch, 0)
        assert scan.records == [] and scan.lower == scan.upper == scan.l

    def test_far_blob_flagged_upper_side(self, rng):
        # 70/30 near/far: both percentiles sit in the near band, the far blob is beyond upper
        model = bare_model([np.zeros(8)], params=EngineParams(k0=1))
        near = 0.25 * rng.normal(size=(70, 8))
        far = axis_vec(8, 0, 20.0) + 0.25 * rng.normal(size=(30, 8))
        batch = Batch(index=2, records=records_from(np.vstack([near, far])))
        scan = detect_outliers(model, batch, 0)
        flagged = {r.id for r in scan.records}
        # every far record is beyond upper; the thin window may also catch a few near-tail records
        assert {f"x{i}" for i in range(70, 100)} <= flagged
        oracle_idx, l, u, lower, upper = outlier_oracle(
            batch.vectors, model.cc, 0, 40, 60, 0.25, purview=True
        )
        assert flagged == {f"x{i}" for i in oracle_idx}
        assert (scan.l, scan.u, scan.lower, scan.upper) == (l, u, lower, upper)

    def test_matches_oracle_random_models(self):
        rng = np.random.default_rng(7)
        for trial in range(60):
            dim = int(rng.integers(2, 8))
            k = int(rng.integers(1, 5))
            cc = rng.normal(scale=5.0, size=(k, dim))
            purview = bool(trial % 2)
            params = EngineParams(
                k0=k,
                lo=float(rng.uniform(5, 50)),
                hi=float(rng.uniform(55, 95)),
                lam=float(rng.uniform(0, 1)),
                purview_filter=purview,
            )
            model = bare_model(cc, params=params)
            s = int(rng.integers(3, 50))
            batch = Batch(index=2, records=records_from(rng.normal(scale=6.0, size=(s, dim)), prefix=f"t{trial}-"))
            concept = int(rng.integers(k))
            scan = detect_outliers(model, batch, concept)
            oracle_idx, l, u, lower, upper = outlier_oracle(
                batch.vectors, cc, concept, params.lo, params.hi, params.lam, purview
            )
            assert {r.id for r in scan.records} == {batch.records[i].id for i in oracle_idx}
            assert scan.l == pytest.approx(l, abs=1e-12)
            assert scan.u == pytest.approx(u, abs=1e-12)

    def test_invalid_concept(self):
        model = bare_model([[0.0, 0.0]], params=EngineParams(k0=1))
        batch = Batch(index=2, records=records_from([[1.0, 1.0]]))
        with pytest.raises(ValueError):
            detect_outliers(model, batch, 3)


def model_with_history(rng, centers, per=60, sigma=0.1):
    centers = np.asarray(centers, dtype=np.float64)
    history = []
    chunks = []
    for j, c in enumerate(centers):
        pts = c + sigma * rng.normal(size=(per, centers.shape[1]))
        chunks.append(pts)
        history.extend(
            HistoryRecord(record=EmbeddingRecord(id=f"h{j}-{i}", vector=pts[i]), concept=j)
            for i in range(per)
        )
    model = bare_model(centers, history=history)
    return model, np.vstack(chunks)


class TestLocalSplit:
    def test_split_pulls_out_far_outliers(self, rng):
        model, _ = model_with_history(rng, [[0.0, 0.0], [30.0, 0.0]], per=100)
        outliers = records_from(np.array([8.0, 0.0]) + 0.1 * rng.normal(size=(30, 2)), prefix="o")
        before_c1 = {hr.record.id for hr in model.history if hr.concept == 1}
        entry = local_split(model, 0, outliers)
        assert model.k == 3 and entry.root == 0 and entry.child == 2
        assert model.ss[-1] == entry
        assert np.linalg.norm(model.cc[2] - [8.0, 0.0]) < 0.1
        assert np.linalg.norm(model.cc[0] - [0.0, 0.0]) < 0.1
        # locality: concept 1 membership untouched
        assert {hr.record.id for hr in model.history if hr.concept == 1} == before_c1

    def test_identical_union_rejected(self):
        history = [
            HistoryRecord(record=EmbeddingRecord(id=f"h{i}", vector=np.array([1.0, 1.0])), concept=0)
            for i in range(5)
        ]
        model = bare_model([[1.0, 1.0]], params=EngineParams(k0=1), history=history)
        outliers = [EmbeddingRecord(id="o1", vector=np.array([1.0, 1.0]))]
        with pytest.raises(ValueError, match="distinct"):
            local_split(model, 0, outliers)

    def test_nearer_subcluster_keeps_id(self, rng):
        # asymmetric outliers along one axis: the side nearer the old centroid keeps the id
        model, _ = model_with_history(rng, [[0.0, 0.0]], per=40, sigma=0.05)
        model.params = EngineParams(k0=1)
        near = records_from(np.array([-2.0, 0.0]) + 0.05 * rng.normal(size=(20, 2)), prefix="n")
        far = records_from(np.array([9.0, 0.0]) + 0.05 * rng.normal(size=(20, 2)), prefix="f")
        entry = local_split(model, 0, near + far)
        assert entry.root == 0
        assert abs(model.cc[0][0]) < 2.5  # keeper stays near the old centroid
        assert model.cc[entry.child][0] > 7.0


class TestGlobalAdjust:
    def test_fixed_point_unchanged(self, rng):
        model, points = model_with_history(rng, [[0.0, 0.0], [20.0, 0.0]])
        exact = np.stack([
            points[: len(points) // 2].mean(axis=0),
            points[len(points) // 2 :].mean(axis=0),
        ])
        model.cc = exact.copy()
        global_adjust(model)
        assert np.allclose(model.cc, exact, atol=1e-9)

    def test_perturbed_centroids_return_to_means(self, rng):
        model, points = model_with_history(rng, [[0.0, 0.0], [20.0, 0.0]])
        means = np.stack([
            points[: len(points) // 2].mean(axis=0),
            points[len(points) // 2 :].mean(axis=0),
        ])
        model.cc = means + 0.5
        global_adjust(model)
        assert np.allclose(model.cc, means, atol=1e-6)

    def test_k1_gives_global_mean(self, rng):
        model, points = model_with_history(rng, [[3.0, 3.0]], per=50)
        model.params = EngineParams(k0=1)
        model.cc = np.array([[10.0, -4.0]])
        global_adjust(model)
        assert np.allclose(model.cc[0], points.mean(axis=0), atol=1e-9)


class TestProcessBatch:
    def test_stationary_batch_no_splits(self, rng):
        init, _ = two_blob_batch(rng, n=100, sigma=1.0, sep=10.0)
        model = init_model(init, EngineParams(seed=0))
        nxt, _ = two_blob_batch(rng, n=100, sigma=1.0, sep=10.0, index=2)
        # oracle precondition: every concept's flagged count is under delta * s
        for c in range(model.k):
            idx, *_ = outlier_oracle(nxt.vectors, model.cc, c, 40, 60, 0.25, purview=True)
            assert len(idx) <= 0.15 * 100
        outcome = process_batch(model, nxt)
        assert outcome.splits == [] and outcome.k_after == 2
        assert model.batch_counter == 2
        assert set(outcome.assignments) == {r.id for r in nxt.records}

    def test_emergent_blob_splits_once(self, rng):
        init, _ = two_blob_batch(rng, n=200, sigma=1.0, sep=12.0)
        model = init_model(init, EngineParams(seed=1))
        emergent_mean = axis_vec(16, 1, 25.0)
        counts = [70, 70, 60]
        parts = [
            rng.normal(size=(counts[0], 16)),
            axis_vec(16, 0, 12.0) + rng.normal(size=(counts[1], 16)),
            emergent_mean + rng.normal(size=(counts[2], 16)),
        ]
        batch = Batch(index=2, records=records_from(np.vstack(parts), prefix="e"))
        outcome = process_batch(model, batch)
        assert len(outcome.splits) == 1 and outcome.k_after == 3
        child = outcome.splits[0][1]
        # norm of a D-dim sample-mean error concentrates at sigma*sqrt(D/m); allow 2x
        assert np.linalg.norm(model.cc[child] - emergent_mean) < 2.0 * np.sqrt(16.0 / counts[2])
        assert outcome.outlier_counts[outcome.splits[0][0]] > 0.15 * len(batch.records)

    def test_split_occurs_iff_threshold_exceeded(self, rng):
        for seed in range(5):
            batches, _ = generate(emergence_scenario(seed, batch_size=120, n_batches=5))
            run = run_stream(batches, EngineParams(seed=seed))
            for outcome in run.outcomes:
                s = 120
                split_roots = {root for root, _ in outcome.splits}
                for concept, count in outcome.outlier_counts.items():
                    assert (count > 0.15 * s) == (concept in split_roots)

    def test_dimension_mismatch(self, rng):
        init, _ = two_blob_batch(rng, n=50)
        model = init_model(init, EngineParams(seed=0))
        bad = Batch(index=2, records=records_from(rng.normal(size=(10, 3))))
        with pytest.raises(ValueError):
            process_batch(model, bad)


class TestAssignQuery:
    def test_record_on_centroid(self, rng):
        model = bare_model([[0.0, 0.0], [5.0, 5.0]])
        result = assign(model, [EmbeddingRecord(id="q", vector=np.array([5.0, 5.0]))])
        assert result == {"q": 1}

    def test_tie_lowest(self):
        model = bare_model([[1.0, 0.0], [-1.0, 0.0]])
        assert assign(model, [EmbeddingRecord(id="q", vector=np.zeros(2))]) == {"q": 0}

    def test_empty(self, rng):
        model = bare_model([[0.0, 0.0]], params=EngineParams(k0=1))
        assert assign(model, []) == {}

    def test_model_not_mutated(self, rng):
        model = bare_model([[0.0, 0.0], [5.0, 5.0]])
        before = model.cc.copy()
        assign(model, records_from(rng.normal(size=(5, 2))))
        assert np.array_equal(model.cc, before)


class TestInvariants:
    def test_monotone_k_and_lineage_soundness(self, rng):
        batches, _ = generate(emergence_scenario(3, batch_size=150, n_batches=6))
        model = init_model(batches[0], EngineParams(seed=3))
        prev_k = model.k
        for batch in batches[1:]:
            outcome = process_batch(model, batch)
            assert outcome.k_after >= prev_k
            assert outcome.k_after - prev_k == len(outcome.splits)
            prev_k = outcome.k_after
        children = [e.child for e in model.ss if e.root is not None]
        assert len(children) == len(set(children))
        for e in model.ss:
            if e.root is not None:
                assert e.root < e.child

    def test_determinism_identical_runs(self):
        batches, _ = generate(null_scenario(5, batch_size=80, n_batches=4))
        runs = []
        for _ in range(2):
            model = init_model(batches[0], EngineParams(seed=11))
            outcomes = [process_batch(model, b) for b in batches[1:]]
            runs.append((model, outcomes))
        m1, o1 = runs[0]
        m2, o2 = runs[1]
        assert np.array_equal(m1.cc, m2.cc)
        assert m1.ss == m2.ss
        assert [hr.concept for hr in m1.history] == [hr.concept for hr in m2.history]
        assert o1 == o2

    def test_null_stream_keeps_k0(self):
        for seed in range(5):
            batches, _ = generate(null_scenario(60 + seed, batch_size=120, n_batches=10))
            run = run_stream(batches, EngineParams(seed=seed))
            assert all(o.k_after == 2 for o in run.outcomes)

    def test_clone_is_independent(self, rng):
        init, _ = two_blob_batch(rng, n=60)
        model = init_model(init, EngineParams(seed=0))
        twin = clone_model(model)
        nxt, _ = two_blob_batch(rng, n=60, index=2)
        process_batch(model, nxt)
        assert twin.batch_counter == 1 and model.batch_counter == 2
