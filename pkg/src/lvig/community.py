"""Communities are sorted tuples of 0-based species indices.

Library code works with 0-based indices so they can be fed to numpy
directly.  Human-facing output (labels, JSON, CLI tables) uses 1-based
species numbers, e.g. ``(0, 2)`` is rendered as ``{1,3}``.
"""
from __future__ import annotations

import itertools
from typing import Iterable, Iterator

from .errors import InvalidCommunity

Community = tuple[int, ...]

EMPTY: Community = ()


def community(members: Iterable[int], n: int | None = None) -> Community:
    """Canonicalize ``members`` into a sorted, duplicate-free tuple."""
    members = list(members)
    if len(set(members)) != len(members):
        raise InvalidCommunity(f"duplicate species in {members}")
    out = tuple(sorted(int(i) for i in members))
    if n is not None and out and (out[0] < 0 or out[-1] >= n):
        raise InvalidCommunity(f"species index out of range 0..{n - 1}: {out}")
    return out


def sort_key(c: Community) -> tuple[int, Community]:
    """Cardinality first, then lexicographic."""
    return (len(c), c)


def all_subsets(members: Iterable[int]) -> Iterator[Community]:
    """Every subset of ``members`` in (cardinality, lexicographic) order."""
    members = sorted(members)
    for k in range(len(members) + 1):
        yield from itertools.combinations(members, k)


def complement(c: Community, n: int) -> Community:
    present = set(c)
    return tuple(i for i in range(n) if i not in present)


def label(c: Community) -> str:
    return "{" + ",".join(str(i + 1) for i in c) + "}"


def parse_label(text: str) -> Community:
    """Inverse of :func:`label`."""
    body = text.strip()
    if not (body.startswith("{") and body.endswith("}")):
        raise InvalidCommunity(f"not a community label: {text!r}")
    body = body[1:-1].strip()
    if not body:
        return EMPTY
    return community(int(tok) - 1 for tok in body.split(","))
