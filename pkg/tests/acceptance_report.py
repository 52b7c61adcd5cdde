"""Collects one pass/fail line per acceptance criterion."""

import functools
import time

LINES = []


def criterion(number: int, title: str):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*a, **kw):
            t0 = time.perf_counter()
            try:
                detail = fn(*a, **kw)
            except BaseException as exc:
                msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
                LINES.append((number, f"criterion {number:2d} FAIL  {title}: {msg}"))
                print(LINES[-1][1])
                raise
            took = time.perf_counter() - t0
            LINES.append((number, f"criterion {number:2d} PASS  {title} ({detail or 'ok'}; {took:.1f}s)"))
            print(LINES[-1][1])

        return run

    return wrap
