"""Python access to the dynact runtime: scoring, retrieval, metrics, the
in-process executor and whole runs."""

from ._dynact import (
    DynactError,
    MockExecutor,
    coverage,
    cyclomatic_complexity,
    embed,
    parse_response,
    rank,
    report,
    run,
    score_answer,
)

__all__ = [
    "DynactError",
    "MockExecutor",
    "coverage",
    "cyclomatic_complexity",
    "embed",
    "parse_response",
    "rank",
    "report",
    "run",
    "score_answer",
]
