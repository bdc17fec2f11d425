from .base import ProcessFilters, RecordFilter
from .metrics import (
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
from .record_filters import (
    AccuracyFilter,
    DominanceFilter,
    EnergyFilter,
    LatencyFilter,
    RangeFilter,
)
from .sweep import knob_grid, sweep
