from .core.engine import SearchEngine




class pyhwnas(SearchEngine):
    """Pipeline facade.

    Example:
    ```python
    from pyhwnas import pyhwnas
    from pyhwnas.cli.config import parse_config

    with pyhwnas(parse_config("knobs.alpha=0.2\nrun.out=runs/a02")) as run:
        run.profile()
        theta, logs = run.search()
        child, _ = run.sample()
        print(run.train_child())
    ```
    """

    def __init__(self, config=None, verbose=True):
        super().__init__(config, verbose)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self._dataset = None
        self._tables = None
        return False
