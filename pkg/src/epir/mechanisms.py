"""Client-side query generation and answer reconstruction.

Nine mechanisms share two request shapes: plain index fetches (dummy-based
schemes) and XOR-select vectors (Chor-style schemes). Every generator is a
pure function of (inputs, rng stream) and returns an immutable QueryPlan.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import ClassVar, Sequence, Union

import numpy as np

from .anonymity import AnonBatch
from .core import (
    Database,
    ParameterError,
    RngStream,
    SystemParams,
    unit_vector,
)
from .server import ServerResponse, Records, XorBlock, handle


class ReconstructionError(RuntimeError):
    """Responses do not match the plan they should answer."""


@dataclass(frozen=True)
class FetchIndices:
    """Request a list of records by index; the server echoes (index, record) pairs."""

    indices: tuple[int, ...]


@dataclass(frozen=True)
class XorSelect:
    """Request the XOR of all records whose selector bit is 1."""

    selector: np.ndarray  # 0/1 uint8, length n, read-only

    def __post_init__(self):
        self.selector.setflags(write=False)


ServerRequest = Union[FetchIndices, XorSelect]

PICK_INDEX = "pick"
XOR_ALL = "xor"

ANON_NONE = "none"
ANON_BUNDLED = "bundled"
ANON_SEPARATED = "separated"


@dataclass(frozen=True)
class QueryPlan:
    """Per-server request payloads plus the state needed to reconstruct.

    requests holds (server_id, request) pairs in dispatch order; servers are
    numbered 0..d-1. Partitioned mechanisms list each server exactly once,
    separated dispatch may repeat a server.
    """

    mechanism: str
    requests: tuple[tuple[int, ServerRequest], ...]
    target_index: int
    reconstruction: str
    anon_mode: str = ANON_NONE

    def per_server(self) -> dict[int, ServerRequest]:
        """server -> request mapping; rejects plans that repeat a server."""
        out: dict[int, ServerRequest] = {}
        for sid, req in self.requests:
            if sid in out:
                raise ParameterError(f"server {sid} appears twice in plan")
            out[sid] = req
        return out


# --- index-set sampling -----------------------------------------------------

SORTED_ORDER = "sorted"
SHUFFLED_ORDER = "shuffled"


def _draw_request_set(q: int, p: int, n: int, rng: RngStream) -> set[int]:
    """Redraw-until-full loop: uniform set of p distinct indices containing q."""
    if not 0 <= q < n:
        raise ParameterError(f"query index {q} outside [0, {n})")
    if not 1 < p <= n:
        raise ParameterError(f"request count p={p} outside (1, n={n}]")
    req = {q}
    while len(req) < p:
        # draw in blocks; consuming extra stream values does not change the
        # distribution of the resulting set
        for cand in rng.integers(n, size=max(2 * (p - len(req)), 8)):
            req.add(int(cand))
            if len(req) == p:
                break
    return req


def _pop_order(req: set[int], rng: RngStream, order: str) -> list[int]:
    """Materialize the set in pop order: ascending, or a uniform shuffle."""
    items = sorted(req)
    if order == SORTED_ORDER:
        return items
    if order == SHUFFLED_ORDER:
        perm = rng.permutation(len(items))
        return [items[k] for k in perm]
    raise ParameterError(f"unknown pop order {order!r}")


# --- generators -------------------------------------------------------------


def gen_naive_dummy(q: int, p: int, n: int, rng: RngStream) -> QueryPlan:
    """Hide q among p-1 uniform dummies sent to a single server."""
    req = _draw_request_set(q, p, n, rng)
    request = FetchIndices(tuple(sorted(req)))
    return QueryPlan("naive-dummy", ((0, request),), q, PICK_INDEX)


def gen_naive_anon(q: int, params: SystemParams, rng: RngStream) -> QueryPlan:
    """Send the bare query through the anonymity channel to a random server."""
    if not 0 <= q < params.n:
        raise ParameterError(f"query index {q} outside [0, {params.n})")
    sid = int(rng.integers(params.d))
    return QueryPlan("naive-anon", ((sid, FetchIndices((q,))),), q, PICK_INDEX, ANON_SEPARATED)


def gen_direct(
    q: int,
    p: int,
    params: SystemParams,
    rng: RngStream,
    order: str = SHUFFLED_ORDER,
) -> QueryPlan:
    """Partition p distinct indices (containing q) evenly across the d servers.

    The default pop order is a uniform shuffle, which makes every index's
    server assignment uniform; this symmetry is what the analytic bound
    requires. Ascending order is available as SORTED_ORDER but leaks the
    query's rank through the deterministic chunking (see tests).
    """
    d = params.d
    if p % d != 0:
        raise ParameterError(f"request count p={p} must be a multiple of d={d}")
    req = _draw_request_set(q, p, params.n, rng)
    seq = _pop_order(req, rng, order)
    per = p // d
    requests = tuple(
        (sid, FetchIndices(tuple(seq[sid * per : (sid + 1) * per]))) for sid in range(d)
    )
    return QueryPlan("direct", requests, q, PICK_INDEX)


def gen_bundled_anon(
    q: int,
    p: int,
    params: SystemParams,
    rng: RngStream,
    order: str = SHUFFLED_ORDER,
) -> QueryPlan:
    """Same payload as gen_direct, sent as one linkable bundle through the mix."""
    plan = gen_direct(q, p, params, rng, order=order)
    return replace(plan, mechanism="bundled-anon", anon_mode=ANON_BUNDLED)


def gen_separated_anon(
    q: int,
    p: int,
    params: SystemParams,
    rng: RngStream,
    order: str = SHUFFLED_ORDER,
) -> QueryPlan:
    """Dispatch each index as its own anonymous message to a random server.

    Server choices are independent draws, so one server may receive several
    of the user's messages.
    """
    d = params.d
    if p % d != 0:
        raise ParameterError(f"request count p={p} must be a multiple of d={d}")
    req = _draw_request_set(q, p, params.n, rng)
    seq = _pop_order(req, rng, order)
    requests = tuple((int(rng.integers(d)), FetchIndices((idx,))) for idx in seq)
    return QueryPlan("separated-anon", requests, q, PICK_INDEX, ANON_SEPARATED)


REJECTION = "rejection"
WEIGHT_FIRST = "weight"

_REJECTION_CAP = 10**6


def _column_weight_pmf(d: int, theta: float, odd: bool) -> np.ndarray:
    """Hamming-weight pmf of d Bernoulli(theta) trials conditioned on parity."""
    import math

    w = np.arange(d + 1)
    pmf = np.array([math.comb(d, k) * theta**k * (1 - theta) ** (d - k) for k in w])
    pmf[w % 2 != (1 if odd else 0)] = 0.0
    total = pmf.sum()
    if total <= 0.0:
        raise ParameterError(f"no column of the requested parity exists for d={d}")
    return pmf / total


def sample_parity_columns(
    odd_mask: np.ndarray,
    d: int,
    theta: float,
    rng: RngStream,
    strategy: str = REJECTION,
) -> np.ndarray:
    """(d, len(odd_mask)) matrix of Bernoulli(theta) columns conditioned on parity.

    Columns flagged in odd_mask get odd Hamming weight, the rest even. Both
    strategies sample the same conditional distribution; rejection redraws a
    column until its parity matches, weight-first draws the weight from the
    parity-conditioned pmf and then a uniform vector of that weight.
    """
    if not 0.0 < theta <= 0.5:
        raise ParameterError(f"theta must lie in (0, 1/2], got {theta}")
    cols = len(odd_mask)
    want = odd_mask.astype(np.uint8)
    if strategy == REJECTION:
        m = np.zeros((d, cols), dtype=np.uint8)
        alive = np.arange(cols)
        rounds = 0
        while alive.size:
            rounds += 1
            if rounds > _REJECTION_CAP:
                raise ParameterError("parity rejection sampling exceeded the attempt cap")
            draw = rng.bernoulli(theta, (d, alive.size))
            ok = (draw.sum(axis=0) & 1) == want[alive]
            m[:, alive[ok]] = draw[:, ok]
            alive = alive[~ok]
        return m
    if strategy == WEIGHT_FIRST:
        weights = np.zeros(cols, dtype=np.int64)
        for parity_odd in (False, True):
            sel = np.flatnonzero(odd_mask == parity_odd)
            if sel.size:
                pmf = _column_weight_pmf(d, theta, parity_odd)
                weights[sel] = rng._gen.choice(d + 1, size=sel.size, p=pmf)
        ranks = np.argsort(rng.random((d, cols)), axis=0)
        return (ranks < weights[np.newaxis, :]).astype(np.uint8)
    raise ParameterError(f"unknown sampling strategy {strategy!r}")


def gen_sparse(
    q: int,
    theta: float,
    params: SystemParams,
    rng: RngStream,
    strategy: str = REJECTION,
) -> QueryPlan:
    """Build the d x n request matrix column-wise with sparse Bernoulli entries.

    Column q has odd Hamming weight, every other column even, so the rows
    XOR to the unit vector at q; each server receives one row.
    """
    n, d = params.n, params.d
    if d < 2:
        raise ParameterError(f"need at least 2 servers, got d={d}")
    if not 0 <= q < n:
        raise ParameterError(f"query index {q} outside [0, {n})")
    odd = np.zeros(n, dtype=bool)
    odd[q] = True
    matrix = sample_parity_columns(odd, d, theta, rng, strategy=strategy)
    requests = tuple((i, XorSelect(matrix[i].copy())) for i in range(d))
    return QueryPlan("sparse", requests, q, XOR_ALL)


def gen_anon_sparse(
    q: int,
    theta: float,
    params: SystemParams,
    rng: RngStream,
    strategy: str = REJECTION,
) -> QueryPlan:
    """Sparse request matrix sent as one linkable bundle through the mix."""
    plan = gen_sparse(q, theta, params, rng, strategy=strategy)
    return replace(plan, mechanism="anon-sparse", anon_mode=ANON_BUNDLED)


def choose_subset_servers(t: int, d: int, rng: RngStream) -> list[int]:
    """t distinct servers, drawn by redrawing uniform picks until t are distinct."""
    chosen: list[int] = []
    seen: set[int] = set()
    while len(chosen) < t:
        s = int(rng.integers(d))
        if s not in seen:
            seen.add(s)
            chosen.append(s)
    return chosen


def gen_subset(q: int, t: int, params: SystemParams, rng: RngStream) -> QueryPlan:
    """Chor-style query against t of the d servers.

    t-1 uniform Bernoulli(1/2) vectors plus one correction vector XOR to the
    unit vector at q; the t servers are a uniform random subset.
    """
    n, d = params.n, params.d
    if not 2 <= t <= d:
        raise ParameterError(f"subset size t={t} outside [2, {d}]")
    if not 0 <= q < n:
        raise ParameterError(f"query index {q} outside [0, {n})")
    vectors = rng.bernoulli(0.5, (t - 1, n))
    last = np.bitwise_xor.reduce(vectors, axis=0) ^ unit_vector(n, q)
    servers = choose_subset_servers(t, d, rng)
    rows = [vectors[j] for j in range(t - 1)] + [last]
    requests = tuple((servers[j], XorSelect(rows[j].copy())) for j in range(t))
    return QueryPlan("subset", requests, q, XOR_ALL)


def gen_chor(q: int, params: SystemParams, rng: RngStream) -> QueryPlan:
    """Full-set Chor query: gen_subset with t = d."""
    if params.d < 2:
        raise ParameterError(f"need at least 2 servers, got d={params.d}")
    plan = gen_subset(q, params.d, params, rng)
    return replace(plan, mechanism="chor")


# --- reconstruction ---------------------------------------------------------


def reconstruct(plan: QueryPlan, responses: Sequence[ServerResponse]) -> bytes:
    """Recover the target record from one response per dispatched request.

    Responses may arrive in any order: index picking searches the echoed
    pairs and XOR folding is commutative.
    """
    if len(responses) != len(plan.requests):
        raise ReconstructionError(
            f"expected {len(plan.requests)} responses, got {len(responses)}"
        )
    if plan.reconstruction == PICK_INDEX:
        for resp in responses:
            if not isinstance(resp, Records):
                raise ReconstructionError(f"expected record lists, got {type(resp).__name__}")
            for idx, rec in resp.items:
                if idx == plan.target_index:
                    return rec
        raise ReconstructionError(f"no response carried record {plan.target_index}")
    if plan.reconstruction == XOR_ALL:
        acc: int | None = None
        width = 0
        for resp in responses:
            if not isinstance(resp, XorBlock):
                raise ReconstructionError(f"expected XOR blocks, got {type(resp).__name__}")
            if acc is None:
                acc, width = int.from_bytes(resp.block, "big"), len(resp.block)
            elif len(resp.block) != width:
                raise ReconstructionError("response blocks differ in length")
            else:
                acc ^= int.from_bytes(resp.block, "big")
        assert acc is not None
        return acc.to_bytes(width, "big")
    raise ReconstructionError(f"unknown reconstruction mode {plan.reconstruction!r}")


def execute_plan(plan: QueryPlan, databases: Sequence[Database], rng: RngStream) -> bytes:
    """Run a plan against in-process databases and reconstruct the record.

    Anonymous plans are routed through a single-user mix batch so the reply
    path is exercised the same way a multi-user round would.
    """
    if plan.anon_mode == ANON_NONE:
        responses = [handle(databases[sid], req) for sid, req in plan.requests]
        return reconstruct(plan, responses)

    batch = AnonBatch()
    if plan.anon_mode == ANON_BUNDLED:
        batch.submit(0, plan.requests)
        deliveries = batch.mix_and_deliver(rng)
        slot, bundle = deliveries[0]
        reply = tuple(handle(databases[sid], req) for sid, req in bundle)
        routed = batch.route_replies([(slot, reply)])
        return reconstruct(plan, list(routed[0][1]))
    if plan.anon_mode == ANON_SEPARATED:
        for msg in plan.requests:
            batch.submit(0, msg)
        deliveries = batch.mix_and_deliver(rng)
        replies = [(slot, handle(databases[sid], req)) for slot, (sid, req) in deliveries]
        routed = batch.route_replies(replies)
        return reconstruct(plan, [resp for _, resp in routed])
    raise ParameterError(f"unknown anonymity mode {plan.anon_mode!r}")


# --- mechanism parameter variants -------------------------------------------


@dataclass(frozen=True)
class NaiveDummy:
    p: int
    name: ClassVar[str] = "naive-dummy"

    def generate(self, q: int, params: SystemParams, rng: RngStream) -> QueryPlan:
        return gen_naive_dummy(q, self.p, params.n, rng)


@dataclass(frozen=True)
class NaiveAnon:
    name: ClassVar[str] = "naive-anon"

    def generate(self, q: int, params: SystemParams, rng: RngStream) -> QueryPlan:
        return gen_naive_anon(q, params, rng)


@dataclass(frozen=True)
class Direct:
    p: int
    order: str = SHUFFLED_ORDER
    name: ClassVar[str] = "direct"

    def generate(self, q: int, params: SystemParams, rng: RngStream) -> QueryPlan:
        return gen_direct(q, self.p, params, rng, order=self.order)


@dataclass(frozen=True)
class BundledAnon:
    p: int
    order: str = SHUFFLED_ORDER
    name: ClassVar[str] = "bundled-anon"

    def generate(self, q: int, params: SystemParams, rng: RngStream) -> QueryPlan:
        return gen_bundled_anon(q, self.p, params, rng, order=self.order)


@dataclass(frozen=True)
class SeparatedAnon:
    p: int
    order: str = SHUFFLED_ORDER
    name: ClassVar[str] = "separated-anon"

    def generate(self, q: int, params: SystemParams, rng: RngStream) -> QueryPlan:
        return gen_separated_anon(q, self.p, params, rng, order=self.order)


@dataclass(frozen=True)
class Sparse:
    theta: float
    strategy: str = REJECTION
    name: ClassVar[str] = "sparse"

    def generate(self, q: int, params: SystemParams, rng: RngStream) -> QueryPlan:
        return gen_sparse(q, self.theta, params, rng, strategy=self.strategy)


@dataclass(frozen=True)
class AnonSparse:
    theta: float
    strategy: str = REJECTION
    name: ClassVar[str] = "anon-sparse"

    def generate(self, q: int, params: SystemParams, rng: RngStream) -> QueryPlan:
        return gen_anon_sparse(q, self.theta, params, rng, strategy=self.strategy)


@dataclass(frozen=True)
class Subset:
    t: int
    name: ClassVar[str] = "subset"

    def generate(self, q: int, params: SystemParams, rng: RngStream) -> QueryPlan:
        return gen_subset(q, self.t, params, rng)


@dataclass(frozen=True)
class Chor:
    name: ClassVar[str] = "chor"

    def generate(self, q: int, params: SystemParams, rng: RngStream) -> QueryPlan:
        return gen_chor(q, params, rng)


MechanismParams = Union[
    NaiveDummy,
    NaiveAnon,
    Direct,
    BundledAnon,
    SeparatedAnon,
    Sparse,
    AnonSparse,
    Subset,
    Chor,
]
