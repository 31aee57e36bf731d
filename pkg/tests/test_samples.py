import numpy as np
import pytest

from consensus_labeler.rasters import Raster
from consensus_labeler.samples import (FOREST, NON_FOREST, AnnotationRecord,
                                       DataError, EmptyRegionError,
                                       FeatureVector, LandCoverClass,
                                       SamplePoint, SampleStore,
                                       partition_by_certainty,
                                       ratio_mis_class, split_train_val,
                                       stratified_sample, type_certainty)


def sample(sid, votes=0, label=None, confirmed=False, **kw):
    return SamplePoint(id=sid, lon=0.0, lat=0.0, product_votes=votes,
                       current_label=label, confirmed=confirmed, **kw)


class TestBinaryProjection:
    def test_forest_maps_to_forest(self):
        assert LandCoverClass.forest.binary() == FOREST

    @pytest.mark.parametrize("cls", [c for c in LandCoverClass
                                     if c not in (LandCoverClass.forest,
                                                  LandCoverClass.unlabelable)])
    def test_others_map_to_nonforest(self, cls):
        assert cls.binary() == NON_FOREST

    def test_unlabelable_has_no_projection(self):
        assert LandCoverClass.unlabelable.binary() is None


class TestPartition:
    def test_one_of_each_vote(self):
        samples = [sample(f"s{v}", votes=v) for v in range(6)]
        part = partition_by_certainty(samples)
        assert len(part.certain_nonforest) == 1
        assert len(part.marginal) == 1
        assert len(part.uncertain) == 2
        assert len(part.certain_forest) == 2

    def test_consensus_labels_assigned(self):
        samples = [sample("a", votes=5), sample("b", votes=0),
                   sample("c", votes=1)]
        partition_by_certainty(samples)
        assert samples[0].current_label == FOREST
        assert samples[1].current_label == NON_FOREST
        # marginal samples are never auto-labeled
        assert samples[2].current_label is None

    def test_all_forest(self):
        part = partition_by_certainty([sample(f"s{i}", votes=5)
                                       for i in range(4)])
        assert len(part.certain_forest) == 4

    def test_empty_input(self):
        part = partition_by_certainty([])
        assert (part.certain_forest, part.certain_nonforest, part.uncertain,
                part.marginal) == ([], [], [], [])

    def test_disjoint_cover(self):
        rng = np.random.default_rng(1)
        samples = [sample(f"s{i}", votes=int(v))
                   for i, v in enumerate(rng.integers(0, 6, 100))]
        part = partition_by_certainty(samples)
        groups = [part.certain_forest, part.certain_nonforest,
                  part.uncertain, part.marginal]
        ids = [s.id for g in groups for s in g]
        assert len(ids) == len(set(ids)) == len(samples)

    def test_out_of_range_votes(self):
        with pytest.raises(DataError):
            partition_by_certainty([sample("s", votes=6)])


class TestTypeCertainty:
    def test_nine_of_ten_forest(self):
        samples = [sample(f"s{i}", votes=5,
                          label=FOREST if i < 9 else NON_FOREST,
                          confirmed=True) for i in range(10)]
        assert type_certainty(samples, 5, FOREST) == pytest.approx(0.9)

    def test_unanimous_nonforest(self):
        samples = [sample(f"s{i}", votes=0, label=NON_FOREST, confirmed=True)
                   for i in range(5)]
        assert type_certainty(samples, 0, NON_FOREST) == 1.0

    def test_complement_sums_to_one(self):
        rng = np.random.default_rng(2)
        samples = [sample(f"s{i}", votes=3,
                          label=FOREST if rng.random() < 0.6 else NON_FOREST,
                          confirmed=True) for i in range(40)]
        tc_f = type_certainty(samples, 3, FOREST)
        tc_n = type_certainty(samples, 3, NON_FOREST)
        assert tc_f + tc_n == 1.0

    def test_empty_scope(self):
        with pytest.raises(DataError):
            type_certainty([], 5, FOREST)


class TestRatioMisClass:
    def test_three_of_four(self):
        preds = [FOREST, FOREST, FOREST, NON_FOREST]
        assert ratio_mis_class(["a", "b", "c", "d"], preds) == 0.75

    def test_none_predicted_forest(self):
        assert ratio_mis_class(["a", "b"], [NON_FOREST, NON_FOREST]) == 0.0

    def test_empty_class(self):
        with pytest.raises(DataError):
            ratio_mis_class([], [])


class TestSplitTrainVal:
    def _pool(self, n_forest, n_nonforest):
        return ([sample(f"f{i}", label=FOREST) for i in range(n_forest)]
                + [sample(f"n{i}", label=NON_FOREST)
                   for i in range(n_nonforest)])

    def test_train_size_is_rounded_fraction(self):
        train, val = split_train_val(self._pool(60, 40), seed=0)
        assert len(train) == 30
        assert len(train) + len(val) == 100

    def test_small_stratified(self):
        train, val = split_train_val(self._pool(5, 5), seed=1)
        assert len(train) == 3
        labels = {s.current_label for s in train}
        assert labels == {FOREST, NON_FOREST}

    def test_deterministic(self):
        pool = self._pool(30, 20)
        t1, v1 = split_train_val(pool, seed=7)
        t2, v2 = split_train_val(pool, seed=7)
        assert [s.id for s in t1] == [s.id for s in t2]

    def test_disjoint_cover(self):
        pool = self._pool(33, 17)
        train, val = split_train_val(pool, seed=3)
        tids = {s.id for s in train}
        vids = {s.id for s in val}
        assert not tids & vids
        assert tids | vids == {s.id for s in pool}

    def test_class_ratio_preserved(self):
        train, _ = split_train_val(self._pool(70, 30), seed=5)
        n_forest = sum(1 for s in train if s.current_label == FOREST)
        assert abs(n_forest - 0.3 * 70) <= 1

    def test_too_few_samples(self):
        with pytest.raises(DataError):
            split_train_val(self._pool(4, 4))


class TestStratifiedSample:
    def _ndvi_raster(self, values):
        return Raster(values=np.array(values, dtype=float), x_origin=0.0,
                      y_origin=0.0, cellsize=1.0)

    def test_all_strata_populated(self):
        rng = np.random.default_rng(0)
        vals = rng.uniform(-1, 1, (120, 120))
        picked, shortfall = stratified_sample(self._ndvi_raster(vals),
                                              per_stratum=500, seed=1)
        assert len(picked) == 5000
        assert shortfall == {}

    def test_single_stratum_region(self):
        vals = np.full((30, 30), 0.1)   # all inside [0.0, 0.2)
        picked, shortfall = stratified_sample(self._ndvi_raster(vals),
                                              per_stratum=500, seed=1)
        assert len(picked) == 500
        assert all(0.0 <= p[4] < 0.2 for p in picked)

    def test_shortfall_reported(self):
        vals = np.full((3, 3), 0.1)
        picked, shortfall = stratified_sample(self._ndvi_raster(vals),
                                              per_stratum=500, seed=1)
        assert len(picked) == 9
        assert shortfall[5] == 491

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        vals = rng.uniform(-1, 1, (50, 50))
        r = self._ndvi_raster(vals)
        p1, _ = stratified_sample(r, per_stratum=50, seed=9)
        p2, _ = stratified_sample(r, per_stratum=50, seed=9)
        assert p1 == p2

    def test_no_duplicates_and_bounds(self):
        rng = np.random.default_rng(8)
        vals = rng.uniform(-1, 1, (60, 60))
        picked, _ = stratified_sample(self._ndvi_raster(vals),
                                      per_stratum=100, seed=2)
        locs = [(p[0], p[1]) for p in picked]
        assert len(locs) == len(set(locs))
        edges = np.linspace(-1, 1, 11)
        for _, _, _, _, v in picked:
            k = min(int((v + 1) / 0.2), 9)
            lo, hi = edges[k], edges[k + 1]
            assert lo <= v <= hi

    def test_ndvi_one_lands_in_last_stratum(self):
        vals = np.full((4, 4), 1.0)
        picked, _ = stratified_sample(self._ndvi_raster(vals),
                                      per_stratum=10, seed=0)
        assert len(picked) == 10

    def test_empty_region(self):
        vals = np.full((4, 4), np.nan)
        with pytest.raises(EmptyRegionError):
            stratified_sample(self._ndvi_raster(vals))


class TestStorePersistence:
    def _store(self):
        samples = [
            SamplePoint(id="a", lon=12.345678, lat=-3.000001, grid_id="c2_r0",
                        ecoregion_id=3, product_votes=4,
                        features=FeatureVector(blue=0.1, nir=0.5, ndvi=0.3),
                        patch_ref="a", init_label=FOREST,
                        current_label=FOREST, label_source="human",
                        confirmed=True,
                        annotations=[AnnotationRecord("ann1",
                                                      LandCoverClass.forest,
                                                      123.5)]),
            SamplePoint(id="b", lon=0.0, lat=0.0, product_votes=2),
        ]
        return SampleStore(samples)

    def test_round_trip_bit_exact(self, tmp_path):
        store = self._store()
        p1 = tmp_path / "s1.jsonl"
        p2 = tmp_path / "s2.jsonl"
        store.save(p1)
        SampleStore.load(p1).save(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_round_trip_preserves_fields(self, tmp_path):
        store = self._store()
        path = tmp_path / "s.jsonl"
        store.save(path)
        back = SampleStore.load(path)
        a = back.get("a")
        assert a.lon == 12.345678
        assert a.annotations[0].decided_class is LandCoverClass.forest
        assert a.annotations[0].timestamp == 123.5
        assert a.features.nir == 0.5

    def test_duplicate_id_rejected(self):
        with pytest.raises(DataError):
            SampleStore([sample("x"), sample("x")])

    def test_export_csv(self, tmp_path):
        path = tmp_path / "fss.csv"
        self._store().export_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "id,Lat,Lon,Type"
        assert lines[1].startswith("a,-3.000001,12.345678,forest")

    def test_bad_schema_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"schema": "other"}\n')
        with pytest.raises(DataError):
            SampleStore.load(path)
