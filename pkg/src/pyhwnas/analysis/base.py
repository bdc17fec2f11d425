from abc import ABC, abstractmethod
from typing import Iterable

from ..core.models import ModelRecord



FILTER_ALL = all
FILTER_ANY = any
FILTER_NONE = lambda results: not any(results)



class RecordFilter(ABC):
    @abstractmethod
    def __call__(self, record: ModelRecord, **kwargs) -> bool:
        raise NotImplementedError

    def __and__(self, other): return AndFilter([self, other])
    def __or__(self, other): return OrFilter([self, other])
    def __invert__(self): return NotFilter([self])

    def apply(self, records: Iterable[ModelRecord]) -> list[ModelRecord]:
        return [r for r in records if self(r)]




class LogicalFilter(RecordFilter):
    def __init__(self, filters: Iterable[RecordFilter], method=None):
        self._filters = list(filters)
        self._method = method or FILTER_ALL

    def __call__(self, record, **kwargs):
        return self._method(func(record, **kwargs) for func in self._filters)


class AndFilter(LogicalFilter):
    def __init__(self, filters):
        super().__init__(filters, method=FILTER_ALL)


class OrFilter(LogicalFilter):
    def __init__(self, filters):
        super().__init__(filters, method=FILTER_ANY)


class NotFilter(LogicalFilter):
    def __init__(self, filters):
        super().__init__(filters, method=FILTER_NONE)




class ProcessFilters(LogicalFilter):
    def __init__(
        self,
        filters: Iterable[RecordFilter],
        require_all=True,
        require_none=False
        ) -> None:

        method = FILTER_ANY if not require_all else FILTER_ALL
        if require_none:
            method = FILTER_NONE
        super().__init__(filters, method=method)
