from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def pmap(fn, items, workers: int = 1, chunksize: int = 1) -> list:
    """Ordered map, in-process for ``workers <= 1``.

    Results come back in input order whatever the completion order, so
    callers stay deterministic for any worker count.
    """
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=chunksize))
