"""Database-side request handling with access accounting.

A server either echoes requested records or XOR-folds the records selected
by a binary vector; either way it counts every record it touches so the
cost model can be checked against measurements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Database


class RequestError(ValueError):
    """A request does not fit the database it was sent to."""


@dataclass(frozen=True)
class Records:
    """Echoed (index, record) pairs, in request order."""

    items: tuple[tuple[int, bytes], ...]


@dataclass(frozen=True)
class XorBlock:
    """XOR of all selected records; all-zero when nothing was selected."""

    block: bytes


ServerResponse = Records | XorBlock


def handle(db: Database, req) -> ServerResponse:
    """Answer one request against a read-only database.

    Safe under concurrent invocation; the access counter increments by the
    number of records touched (list length or selector popcount).
    """
    from .mechanisms import FetchIndices, XorSelect  # avoid import cycle

    n = len(db)
    if isinstance(req, FetchIndices):
        for idx in req.indices:
            if not 0 <= idx < n:
                raise RequestError(f"record index {idx} outside [0, {n})")
        db.add_accesses(len(req.indices))
        return Records(tuple((idx, db.record(idx)) for idx in req.indices))
    if isinstance(req, XorSelect):
        sel = np.asarray(req.selector)
        if sel.shape != (n,):
            raise RequestError(f"selector length {sel.shape} does not match n={n}")
        picked = np.flatnonzero(sel)
        db.add_accesses(len(picked))
        if len(picked) == 0:
            return XorBlock(bytes(db.record_bytes))
        folded = np.bitwise_xor.reduce(db.as_array()[picked], axis=0)
        return XorBlock(folded.tobytes())
    raise RequestError(f"unknown request type {type(req).__name__}")
