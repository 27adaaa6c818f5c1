"""Replicate scheduling on a process pool with index-ordered results."""

import os
from concurrent.futures import ProcessPoolExecutor

ENV_WORKERS = "SLEZIP_MAX_WORKERS"


def max_workers(requested=None):
    """Worker count: ``requested``, else ``$SLEZIP_MAX_WORKERS``, else 1."""
    if requested is None:
        requested = os.environ.get(ENV_WORKERS, "1")
    try:
        n = int(requested)
    except (TypeError, ValueError):
        raise ValueError(f"{ENV_WORKERS} must be an integer, got {requested!r}") from None
    return max(1, n)


def map_ordered(fn, arg_list, workers=None):
    """``[fn(*args) for args in arg_list]``; results stay in input order."""
    n = max_workers(workers)
    if n == 1 or len(arg_list) < 2:
        return [fn(*a) for a in arg_list]
    with ProcessPoolExecutor(max_workers=n) as ex:
        futures = [ex.submit(fn, *a) for a in arg_list]
        return [f.result() for f in futures]
