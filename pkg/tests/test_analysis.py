import importlib
import math

import numpy as np
import pytest

from pyhwnas.analysis.base import ProcessFilters
from pyhwnas.analysis.metrics import (
    baseline_costs,
    dominance,
    knob_trend,
    pareto_front,
    pareto_mask,
    record_dominance,
    select_model,
    speedup,
    v_metrics,
)
from pyhwnas.analysis.record_filters import (
    AccuracyFilter,
    DominanceFilter,
    EnergyFilter,
    LatencyFilter,
    RangeFilter,
)
from pyhwnas.analysis.sweep import knob_grid, sweep
from pyhwnas.core.childnet import childnet_cost
from pyhwnas.core.models import ChildNet, LossKnobs, ModelRecord, SearchConfig
from pyhwnas.core.reader import read_records
from pyhwnas.utils.exceptions import ValidationError

from conftest import micro_arch, rigged_tables

# the package re-exports the sweep function under the module name
sweep_module = importlib.import_module("pyhwnas.analysis.sweep")


def record(model_id, accuracy, latency, energy, knobs=None, **extra) -> ModelRecord:
    return ModelRecord(model_id=model_id, knobs=knobs or LossKnobs(), accuracy=accuracy,
                       latency=latency, energy=energy, **extra)


# (accuracy, seconds, joules) from the published summary of final results.
MOBILENET_V2 = record(0, 0.924, 7.1, 18.24)
CONDENSENET = record(1, 0.911, 4.83, 9.28)
CHOSEN = record(2, 0.877, 2.88, 4.79)
SUMMARY = [MOBILENET_V2, CONDENSENET, CHOSEN]


def brute_force_front(records):
    keep = []
    for r in records:
        dominated = False
        for o in records:
            if o is r:
                continue
            no_worse = o.accuracy >= r.accuracy and o.latency <= r.latency and o.energy <= r.energy
            better = o.accuracy > r.accuracy or o.latency < r.latency or o.energy < r.energy
            dominated |= no_worse and better
        if not dominated:
            keep.append(r)
    return keep



class TestKnobMetrics:
    def test_latency_example(self):
        vlat, _ = v_metrics(LossKnobs(alpha=0.5, beta=1.5), 3.5, 18.43)
        assert vlat == pytest.approx(3.27395, abs=1e-5)

    def test_energy_example(self):
        _, vener = v_metrics(LossKnobs(gamma=0.5, delta=0.5), 3.5, 18.43)
        assert vener == pytest.approx(2.14651, abs=1e-5)

    def test_identity_knobs(self):
        assert v_metrics(LossKnobs(1.0, 1.0, 1.0, 1.0), 2.5, 7.0) == (2.5, 7.0)

    def test_non_positive_baseline(self):
        with pytest.raises(ValidationError, match="baselines"):
            v_metrics(LossKnobs(), 0.0, 1.0)

    def test_baselines_are_uniform_expectations(self, tables):
        lat0, ener0 = baseline_costs(*tables)
        assert lat0 == pytest.approx(2 * (8 * 10.0 + 1.0) / 9, abs=1e-12)
        assert ener0 == pytest.approx(2.0, abs=1e-12)



class TestDominance:
    def test_worked_example_is_latency_dominant(self):
        label = dominance(3.27395, 2.14651)
        assert label.label == "latency-dominant"
        assert label.ratio == pytest.approx(0.6557, abs=1e-4)

    def test_boundary_is_latency_dominant(self):
        assert dominance(2.0, 2.0).label == "latency-dominant"

    def test_energy_dominant(self):
        label = dominance(1.0, 4.0)
        assert label.label == "energy-dominant" and label.ratio == 4.0

    def test_equal_scale_factors_cancel(self):
        lat0, ener0 = 3.5, 18.43
        for beta, delta in ((1.5, 0.5), (1.0, 1.0), (0.5, 1.2)):
            labels = {dominance(*v_metrics(LossKnobs(c, beta, c, delta), lat0, ener0)).label for c in (0.1, 1.0, 7.0)}
            expected = "energy-dominant" if ener0 ** delta > lat0 ** beta else "latency-dominant"
            assert labels == {expected}

    def test_record_without_latency_knob(self):
        assert record_dominance(record(0, 0.5, 1.0, 1.0, vlat=0.0, vener=2.0)).label == "energy-dominant"
        assert record_dominance(record(0, 0.5, 1.0, 1.0, vlat=0.0, vener=0.0)).label == "latency-dominant"

    def test_non_positive_vlat(self):
        with pytest.raises(ValidationError):
            dominance(0.0, 1.0)



class TestPareto:
    def test_single_record(self):
        assert pareto_front([CHOSEN]) == [CHOSEN]

    def test_summary_rows_all_survive(self):
        assert pareto_front(SUMMARY) == SUMMARY

    def test_strictly_worse_record_dropped(self):
        worse = record(3, 0.85, 3.0, 5.0)
        assert pareto_front([*SUMMARY, worse]) == SUMMARY

    def test_duplicates_both_kept(self):
        twin = record(3, 0.877, 2.88, 4.79)
        assert pareto_front([CHOSEN, twin]) == [CHOSEN, twin]

    def test_matches_brute_force(self, rng):
        for n in (1, 7, 60, 500):
            acc = rng.integers(0, 20, size=n) / 20
            lat = rng.integers(1, 20, size=n).astype(float)
            ener = rng.integers(1, 20, size=n).astype(float)
            records = [record(i, a, l, e) for i, (a, l, e) in enumerate(zip(acc, lat, ener))]
            assert [r.model_id for r in pareto_front(records)] == [r.model_id for r in brute_force_front(records)]

    def test_idempotent(self, rng):
        records = [record(i, *v) for i, v in enumerate(zip(rng.uniform(0, 1, 80), rng.uniform(1, 5, 80),
                                                          rng.uniform(1, 5, 80)))]
        once = pareto_front(records)
        assert pareto_front(once) == once

    def test_mask_shape(self):
        np.testing.assert_array_equal(pareto_mask([0.9, 0.8], [1.0, 2.0], [1.0, 2.0]), [True, False])

    def test_empty(self):
        with pytest.raises(ValidationError):
            pareto_front([])



class TestSummaries:
    def test_speedup_over_the_baselines(self):
        assert speedup(MOBILENET_V2, CHOSEN) == pytest.approx((2.47, 3.81), abs=0.01)
        assert speedup(CONDENSENET, CHOSEN) == pytest.approx((1.68, 1.94), abs=0.01)

    def test_select_model(self):
        assert select_model(SUMMARY) is CHOSEN
        near = record(3, 0.9, 3.0, 5.0)
        assert select_model([*SUMMARY, near]) is near
        assert select_model([]) is None

    def test_accuracy_per_second(self):
        assert CHOSEN.accuracy_per_latency == pytest.approx(0.877 / 2.88)
        assert CHOSEN.accuracy_per_latency > MOBILENET_V2.accuracy_per_latency

    def test_latency_dominance_is_the_inverse(self):
        label = dominance(3.27395, 2.14651)
        assert label.latency_dominance == pytest.approx(1 / label.ratio)

    def test_record_serialises(self):
        data = CHOSEN.asdict()
        assert data["knobs"] == {"alpha": 0.0, "beta": 1.0, "gamma": 0.0, "delta": 1.0}
        assert '"latency": 2.88' in CHOSEN.asjson()

    def test_knob_trend(self):
        records = [record(i, 0.9, lat, 1.0, knobs=LossKnobs(alpha=a)) for i, (a, lat) in
                   enumerate(((0.0, 5.0), (0.25, 4.0), (0.5, 3.0), (1.0, 2.0)))]
        assert knob_trend(records, "alpha", "latency") == pytest.approx(-1.0)
        assert math.isnan(knob_trend(records, "alpha", "accuracy"))
        with pytest.raises(ValidationError):
            knob_trend(records, "epsilon", "latency")

    def test_knob_grid_order(self):
        grid = knob_grid(alphas=(0.0, 0.5), gammas=(0.1, 0.2, 0.3))
        assert len(grid) == 6
        assert grid[0] == LossKnobs(0.0, 1.0, 0.1, 1.0)
        assert grid[1] == LossKnobs(0.0, 1.0, 0.2, 1.0)
        assert grid[-1] == LossKnobs(0.5, 1.0, 0.3, 1.0)



class TestFilters:
    def test_range_is_inclusive(self):
        assert LatencyFilter(max_latency=4.83).apply(SUMMARY) == [CONDENSENET, CHOSEN]
        assert AccuracyFilter(min_accuracy=0.911).apply(SUMMARY) == [MOBILENET_V2, CONDENSENET]

    def test_composition(self):
        cheap = EnergyFilter(max_energy=10.0)
        accurate = AccuracyFilter(min_accuracy=0.9)
        assert (cheap & accurate).apply(SUMMARY) == [CONDENSENET]
        assert (cheap | accurate).apply(SUMMARY) == SUMMARY
        assert (~cheap).apply(SUMMARY) == [MOBILENET_V2]

    def test_process_filters(self):
        filters = [LatencyFilter(max_latency=5.0), AccuracyFilter(min_accuracy=0.9)]
        assert ProcessFilters(filters).apply(SUMMARY) == [CONDENSENET]
        assert ProcessFilters(filters, require_all=False).apply(SUMMARY) == SUMMARY
        assert ProcessFilters(filters, require_none=True).apply(SUMMARY) == []

    def test_open_bounds_keep_everything(self):
        assert RangeFilter(record_attr="energy").apply(SUMMARY) == SUMMARY

    def test_inverted_bounds(self):
        with pytest.raises(ValidationError, match="cannot be less"):
            LatencyFilter(min_latency=3.0, max_latency=1.0)

    def test_dominance_filter(self):
        records = [record(0, 0.5, 1.0, 1.0, vlat=1.0, vener=2.0), record(1, 0.5, 1.0, 1.0, vlat=2.0, vener=1.0)]
        assert [r.model_id for r in DominanceFilter("energy-dominant").apply(records)] == [0]
        with pytest.raises(ValidationError):
            DominanceFilter("balanced")



class TestSweep:
    @pytest.fixture
    def config(self):
        return SearchConfig.desk(epochs=2, warmup_epochs=1, batch_size=32, seed=3)

    def test_single_point_composition(self, arch, tables, separable, config):
        [rec] = sweep(knob_grid(), config, arch, tables, separable, child_epochs=1)
        assert rec.knobs == LossKnobs()
        assert (rec.latency, rec.energy) == childnet_cost(ChildNet(rec.choices, arch), *tables)
        assert (rec.vlat, rec.vener) == (0.0, 0.0)

    def test_rerun_gives_identical_csv(self, arch, tables, separable, config, tmp_path):
        grid = knob_grid(alphas=(0.0, 0.5))
        sweep(grid, config, arch, tables, separable, child_epochs=1, csv_path=tmp_path / "a.csv")
        sweep(grid, config, arch, tables, separable, child_epochs=1, csv_path=tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert [r.model_id for r in read_records(tmp_path / "a.csv")] == [0, 1]

    def test_failed_point_is_skipped(self, arch, tables, separable, config, tmp_path, monkeypatch):
        def flaky(index, knobs, *args, **kwargs):
            if index == 1:
                raise RuntimeError("diverged")
            return record(index, 0.5, 1.0 + index, 1.0, knobs=knobs)

        monkeypatch.setattr(sweep_module, "evaluate_point", flaky)
        grid = knob_grid(alphas=(0.0, 0.1, 0.2))
        records = sweep(grid, config.replace(strict=False), arch, tables, separable,
                        csv_path=tmp_path / "sweep.csv", max_workers=2)
        assert [r.model_id for r in records] == [0, 2]
        assert sorted(r.model_id for r in read_records(tmp_path / "sweep.csv")) == [0, 2]

    def test_empty_grid(self, arch, tables, separable, config):
        with pytest.raises(ValidationError, match="empty"):
            sweep([], config, arch, tables, separable)

    @pytest.mark.slow
    def test_latency_falls_as_alpha_grows(self, separable):
        arch = micro_arch()
        tables = rigged_tables(arch, cost=100.0)
        config = SearchConfig.desk(epochs=8, warmup_epochs=2, batch_size=16, seed=1)
        records = sweep(knob_grid(alphas=(0.0, 0.25, 0.5, 1.0)), config, arch, tables, separable,
                        child_epochs=1, paired=True)
        assert not knob_trend(records, "alpha", "latency") > 0
        assert records[-1].latency <= records[0].latency

    @pytest.mark.slow
    def test_energy_falls_as_gamma_grows(self, separable):
        arch = micro_arch()
        tables = rigged_tables(arch, cost=100.0, metric="energy")
        config = SearchConfig.desk(epochs=8, warmup_epochs=2, batch_size=16, seed=1)
        records = sweep(knob_grid(gammas=(0.0, 0.25, 0.5, 1.0)), config, arch, tables, separable,
                        child_epochs=1, paired=True)
        assert [r.knobs.gamma for r in records] == [0.0, 0.25, 0.5, 1.0]
        assert not knob_trend(records, "gamma", "energy") > 0
        assert records[-1].energy <= records[0].energy
        assert {r.latency for r in records} == {arch.num_layers * 1.0}
