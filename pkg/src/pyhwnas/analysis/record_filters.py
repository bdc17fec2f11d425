from ..core.models import ModelRecord
from ..utils.exceptions import ErrorCodes
from .base import RecordFilter




class RangeFilter(RecordFilter):
    """Inclusive bounds on one numeric ``ModelRecord`` attribute; ``None`` leaves a side open."""

    def __init__(
        self,
        min_arg: int | float = None,
        max_arg: int | float = None,
        *,
        record_attr: str,
        ) -> None:
        if min_arg is not None and max_arg is not None and max_arg < min_arg:
            raise ErrorCodes.raise_error(
                ErrorCodes.VALIDATION_ERROR,
                f"Max arg ({max_arg}) cannot be less than min arg ({min_arg})"
            )
        self._min_arg = min_arg
        self._max_arg = max_arg
        self._attr = record_attr

    def __call__(self, record: ModelRecord, **kwargs):
        value = getattr(record, self._attr)
        return all((
            self._min_arg is None or value >= self._min_arg,
            self._max_arg is None or value <= self._max_arg,
        ))



class AccuracyFilter(RangeFilter):
    def __init__(self, min_accuracy=None, max_accuracy=None):
        super().__init__(min_accuracy, max_accuracy, record_attr="accuracy")



class LatencyFilter(RangeFilter):
    def __init__(self, min_latency=None, max_latency=None):
        super().__init__(min_latency, max_latency, record_attr="latency")



class EnergyFilter(RangeFilter):
    def __init__(self, min_energy=None, max_energy=None):
        super().__init__(min_energy, max_energy, record_attr="energy")



class DominanceFilter(RecordFilter):
    def __init__(self, label: str):
        if label not in ("energy-dominant", "latency-dominant"):
            raise ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, f"Unknown dominance label {label!r}.")
        self._label = label

    def __call__(self, record: ModelRecord, **kwargs):
        from .metrics import record_dominance
        return record_dominance(record).label == self._label
