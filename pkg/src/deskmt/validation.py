"""Input validation helpers for the estimator-style API."""

from __future__ import annotations

from typing import Sequence

from .errors import AlignmentError


class NotFittedError(RuntimeError):
    pass


def as_token_lists(X) -> list[list[str]]:
    """Accept raw sentences or pre-split token lists; return token lists."""
    if X is None:
        raise ValueError("expected a sequence of sentences, got None")
    out = []
    for row in X:
        if isinstance(row, str):
            out.append(row.split())
        else:
            tokens = list(row)
            if not all(isinstance(t, str) for t in tokens):
                raise ValueError(f"sentence must be a string or tokens, got {row!r}")
            out.append(tokens)
    return out


def check_parallel_text(X, y) -> tuple[list[list[str]], list[list[str]]]:
    src = as_token_lists(X)
    tgt = as_token_lists(y)
    if len(src) != len(tgt):
        raise AlignmentError(f"{len(src)} source vs {len(tgt)} target sentences")
    if not src:
        raise ValueError("empty training corpus")
    return src, tgt


def check_is_fitted(estimator, attribute: str = "model_"):
    if not hasattr(estimator, attribute):
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit first")
