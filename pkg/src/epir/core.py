"""Core domain types shared by every retrieval mechanism.

Holds the system configuration tuple, fixed-size records, binary request
vectors, the replicated database with access accounting, and the seeded
random-stream contract that makes every experiment reproducible.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np

_MASK64 = (1 << 64) - 1


class ParameterError(ValueError):
    """An operation was invoked with out-of-contract parameters."""


@dataclass(frozen=True)
class SystemParams:
    """One experiment configuration.

    Attributes:
        n: number of records in each database replica (>= 2)
        d: number of database servers (>= 1)
        d_a: number of corrupt servers (0 <= d_a <= d)
        u: number of users issuing queries per round (>= 1)
        b: record size in bits (> 0, multiple of 8)
    """

    n: int
    d: int
    d_a: int = 0
    u: int = 1
    b: int = 64

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError(f"need at least 2 records, got n={self.n}")
        if self.d < 1:
            raise ParameterError(f"need at least 1 database, got d={self.d}")
        if not 0 <= self.d_a <= self.d:
            raise ParameterError(f"corrupt count d_a={self.d_a} outside [0, {self.d}]")
        if self.u < 1:
            raise ParameterError(f"need at least 1 user, got u={self.u}")
        if self.b <= 0 or self.b % 8 != 0:
            raise ParameterError(f"record size must be a positive multiple of 8 bits, got b={self.b}")

    @property
    def record_bytes(self) -> int:
        return self.b // 8


class RngStream:
    """Deterministic counter-based random stream.

    Identical (seed, stream_id) pairs replay identical sequences; distinct
    stream_ids are statistically independent, so parallel trials are
    reproduced by allocating one stream per trial rather than sharing one.
    A stream instance is single-owner and must not be used concurrently.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = seed
        self.stream_id = stream_id
        self._gen = np.random.Generator(
            np.random.Philox(key=[seed & _MASK64, stream_id & _MASK64])
        )

    def spawn(self, stream_id: int) -> "RngStream":
        """Independent stream under the same seed."""
        return RngStream(self.seed, stream_id)

    def integers(self, n: int, size=None):
        return self._gen.integers(0, n, size=size)

    def random(self, size=None):
        return self._gen.random(size=size)

    def permutation(self, k: int) -> np.ndarray:
        return self._gen.permutation(k)

    def bernoulli(self, theta: float, size) -> np.ndarray:
        """0/1 uint8 array of independent Bernoulli(theta) trials."""
        return (self._gen.random(size=size) < theta).astype(np.uint8)

    def bytes(self, nbytes: int) -> bytes:
        return self._gen.bytes(nbytes)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def sample_uniform_index(rng: RngStream, n: int) -> int:
    """Uniform integer in [0, n)."""
    if n < 1:
        raise ParameterError(f"cannot sample from empty range, n={n}")
    return int(rng.integers(n))


def parity_probability(trials: int, theta: float) -> float:
    """Probability that a Binomial(trials, theta) count is even.

    Closed form: 1/2 + 1/2 * (1 - 2*theta)**trials.
    """
    if trials < 0:
        raise ParameterError(f"trial count must be non-negative, got {trials}")
    if not 0.0 < theta <= 0.5:
        raise ParameterError(f"theta must lie in (0, 1/2], got {theta}")
    return 0.5 + 0.5 * (1.0 - 2.0 * theta) ** trials


# --- records ---------------------------------------------------------------
# A record is a plain bytes object of fixed length b/8; XOR is the only
# algebra the protocols need.


def zero_record(nbytes: int) -> bytes:
    return bytes(nbytes)


def xor_records(a: bytes, b: bytes) -> bytes:
    """Bytewise XOR of two equal-length records."""
    if len(a) != len(b):
        raise ParameterError(f"record length mismatch: {len(a)} != {len(b)}")
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(len(a), "big")


# --- bit vectors -----------------------------------------------------------
# Request vectors are 0/1 uint8 arrays of length n.


def unit_vector(n: int, q: int) -> np.ndarray:
    """All-zero length-n vector with a single 1 at position q."""
    if not 0 <= q < n:
        raise ParameterError(f"index {q} outside [0, {n})")
    v = np.zeros(n, dtype=np.uint8)
    v[q] = 1
    return v


def xor_vectors(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise ParameterError(f"vector length mismatch: {a.shape} != {b.shape}")
    return np.bitwise_xor(a, b)


def popcount(v: np.ndarray) -> int:
    return int(np.sum(v, dtype=np.int64))


class Database:
    """n equal-length records plus a cumulative access counter.

    Record contents are immutable after construction and safe to share
    across threads; the access counter tolerates concurrent increments.
    """

    def __init__(self, records: Sequence[bytes] | np.ndarray):
        if isinstance(records, np.ndarray):
            arr = np.ascontiguousarray(records, dtype=np.uint8)
            if arr.ndim != 2:
                raise ParameterError("record array must be 2-dimensional (n, record_bytes)")
        else:
            if not records:
                raise ParameterError("database needs at least one record")
            width = len(records[0])
            if any(len(r) != width for r in records):
                raise ParameterError("all records must have equal length")
            arr = np.frombuffer(b"".join(records), dtype=np.uint8).reshape(len(records), width)
        arr.setflags(write=False)
        self._records = arr
        self._accesses = 0
        self._lock = threading.Lock()

    @classmethod
    def random(cls, n: int, record_bytes: int, rng: RngStream) -> "Database":
        raw = np.frombuffer(rng.bytes(n * record_bytes), dtype=np.uint8)
        return cls(raw.reshape(n, record_bytes).copy())

    def __len__(self) -> int:
        return self._records.shape[0]

    @property
    def record_bytes(self) -> int:
        return self._records.shape[1]

    def record(self, idx: int) -> bytes:
        if not 0 <= idx < len(self):
            raise ParameterError(f"record index {idx} outside [0, {len(self)})")
        return self._records[idx].tobytes()

    def as_array(self) -> np.ndarray:
        """Read-only (n, record_bytes) uint8 view of the contents."""
        return self._records

    @property
    def access_counter(self) -> int:
        """Cumulative number of records touched by serving requests."""
        with self._lock:
            return self._accesses

    def add_accesses(self, k: int) -> None:
        if k < 0:
            raise ParameterError("access increment must be non-negative")
        with self._lock:
            self._accesses += k
