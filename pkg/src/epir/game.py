"""Adversary distinguishability game: trials, estimators, and exact oracles.

One trial has a target user run one of two adversary-chosen queries while
every other user runs a third known query; the adversary sees full request
payloads at corrupt servers and only message counts elsewhere. The
Monte-Carlo estimator tallies a per-mechanism sufficient statistic over
many trials per arm and reports the worst smoothed likelihood ratio; exact
oracles enumerate the mechanism randomness at tiny sizes.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import mechanisms as m
from .analysis import delta_subset
from .anonymity import AnonBatch
from .core import ParameterError, RngStream, SystemParams, parity_probability


class OracleSizeError(ValueError):
    """The instance is too large for exact enumeration."""


@dataclass(frozen=True)
class GameConfig:
    """One game setup: mechanism, system, the three queries, corrupt servers."""

    mechanism: m.MechanismParams
    params: SystemParams
    q_i: int
    q_j: int
    q_0: int
    corrupt_set: frozenset[int]
    target_choice: str = "i"
    trials: int = 1000

    def __post_init__(self):
        n, d = self.params.n, self.params.d
        if len({self.q_i, self.q_j, self.q_0}) != 3:
            raise ParameterError("q_i, q_j, q_0 must be three distinct indices")
        for q in (self.q_i, self.q_j, self.q_0):
            if not 0 <= q < n:
                raise ParameterError(f"query index {q} outside [0, {n})")
        if not all(0 <= s < d for s in self.corrupt_set):
            raise ParameterError("corrupt set contains unknown server ids")
        if len(self.corrupt_set) != self.params.d_a:
            raise ParameterError(
                f"corrupt set size {len(self.corrupt_set)} != d_a={self.params.d_a}"
            )
        if self.target_choice not in ("i", "j"):
            raise ParameterError("target_choice must be 'i' or 'j'")
        if self.trials < 1:
            raise ParameterError("trials must be positive")

    def swapped(self) -> "GameConfig":
        """Same game with the two candidate queries exchanged."""
        return GameConfig(
            self.mechanism,
            self.params,
            self.q_j,
            self.q_i,
            self.q_0,
            self.corrupt_set,
            self.target_choice,
            self.trials,
        )


@dataclass(frozen=True)
class ObservationTrace:
    """Everything the adversary sees in one trial.

    corrupt_views maps each corrupt server to its received (link_id, request)
    pairs. Without an anonymity system link_ids are user ids (the target is
    user 0); behind a mix they are exit-slot ids that reveal at most which
    requests travelled in one bundle. Honest servers contribute message
    counts only; as_meta is the mix batch size (0 when no mix is used).
    """

    corrupt_views: dict[int, tuple[tuple[int, Any], ...]]
    honest_meta: dict[int, int]
    as_meta: int


def run_trial(cfg: GameConfig, rng: RngStream, target_query: int | None = None) -> ObservationTrace:
    """Execute one game round and return the adversary's view of it."""
    params = cfg.params
    if target_query is None:
        target_query = cfg.q_i if cfg.target_choice == "i" else cfg.q_j
    plans = []
    for user in range(params.u):
        query = target_query if user == 0 else cfg.q_0
        plans.append(cfg.mechanism.generate(query, params, rng))

    corrupt = cfg.corrupt_set
    views: dict[int, list[tuple[int, Any]]] = {s: [] for s in sorted(corrupt)}
    honest: dict[int, int] = {s: 0 for s in range(params.d) if s not in corrupt}

    anon_mode = plans[0].anon_mode
    if anon_mode == m.ANON_NONE:
        for user, plan in enumerate(plans):
            for sid, req in plan.requests:
                if sid in corrupt:
                    views[sid].append((user, req))
                else:
                    honest[sid] += 1
        batch_size = 0
    else:
        batch = AnonBatch()
        if anon_mode == m.ANON_BUNDLED:
            for user, plan in enumerate(plans):
                batch.submit(user, plan.requests)
            for slot, bundle in batch.mix_and_deliver(rng):
                for sid, req in bundle:
                    if sid in corrupt:
                        views[sid].append((slot, req))
                    else:
                        honest[sid] += 1
        else:
            for user, plan in enumerate(plans):
                for msg in plan.requests:
                    batch.submit(user, msg)
            for slot, (sid, req) in batch.mix_and_deliver(rng):
                if sid in corrupt:
                    views[sid].append((slot, req))
                else:
                    honest[sid] += 1
        batch_size = len(batch)

    return ObservationTrace(
        corrupt_views={s: tuple(v) for s, v in views.items()},
        honest_meta=honest,
        as_meta=batch_size,
    )


# --- sufficient statistics ---------------------------------------------------


def _fetch_indices_of(view_entries, link_id=None):
    out = []
    for link, req in view_entries:
        if link_id is None or link == link_id:
            out.extend(req.indices)
    return out


def observation_statistic(trace: ObservationTrace, cfg: GameConfig):
    """Reduce a trace to the hashable statistic the estimator tallies.

    The reduction keeps exactly the part of the observation that the
    likelihood ratio depends on; the exact oracle cross-checks this on full
    observations at tiny sizes.
    """
    mech = cfg.mechanism
    q_i, q_j = cfg.q_i, cfg.q_j

    if isinstance(mech, (m.NaiveDummy, m.Direct)):
        seen = set()
        for entries in trace.corrupt_views.values():
            seen.update(_fetch_indices_of(entries, link_id=0))
        return (q_i in seen, q_j in seen)

    if isinstance(mech, (m.NaiveAnon, m.SeparatedAnon)):
        seen: list[int] = []
        for entries in trace.corrupt_views.values():
            seen.extend(_fetch_indices_of(entries))
        return (seen.count(q_i), seen.count(q_j))

    if isinstance(mech, m.BundledAnon):
        slots: dict[int, set[int]] = {}
        for entries in trace.corrupt_views.values():
            for slot, req in entries:
                slots.setdefault(slot, set()).update(req.indices)
        pairs = sorted((q_i in s, q_j in s) for s in slots.values())
        return tuple(pairs)

    if isinstance(mech, m.Sparse):
        par_i = par_j = 0
        for entries in trace.corrupt_views.values():
            for link, req in entries:
                if link == 0:
                    par_i ^= int(req.selector[q_i])
                    par_j ^= int(req.selector[q_j])
        return (par_i, par_j)

    if isinstance(mech, m.AnonSparse):
        slots: dict[int, list[int]] = {}
        for entries in trace.corrupt_views.values():
            for slot, req in entries:
                acc = slots.setdefault(slot, [0, 0])
                acc[0] ^= int(req.selector[q_i])
                acc[1] ^= int(req.selector[q_j])
        return tuple(sorted((a, b) for a, b in slots.values()))

    if isinstance(mech, (m.Subset, m.Chor)):
        t = cfg.params.d if isinstance(mech, m.Chor) else mech.t
        target_rows = []
        for entries in trace.corrupt_views.values():
            for link, req in entries:
                if link == 0:
                    target_rows.append(req.selector)
        if len(target_rows) == t:
            # every contacted server is corrupt: the XOR of the observed
            # vectors is the unit query vector and reveals the index
            folded = np.bitwise_xor.reduce(np.stack(target_rows), axis=0)
            hits = np.flatnonzero(folded)
            revealed = int(hits[0]) if len(hits) == 1 else -1
            return ("exposed", revealed)
        return ("hidden",)

    raise ParameterError(f"no statistic defined for mechanism {mech!r}")


# --- Monte-Carlo estimation --------------------------------------------------


@dataclass
class LikelihoodReport:
    """Per-class tallies and the worst-case likelihood ratio they imply.

    classes maps each observed statistic to (weight under arm i, weight under
    arm j): counts for the Monte-Carlo estimator and exact probabilities for
    the oracles. max_ratio is smoothed for counts and exact for the oracle;
    zero_support_witness is a class observed on one side only, the signature
    of a mechanism that is not eps-private.
    """

    classes: dict[Any, tuple[float, float]]
    max_ratio: float
    epsilon_empirical: float
    zero_support_witness: Any | None
    trials_per_arm: int | None = None
    epsilon_std: float | None = None
    reduced_max_ratio: float | None = None


def monte_carlo_estimate(cfg: GameConfig, trials_per_arm: int, rng: RngStream) -> LikelihoodReport:
    """Run both game arms and report the worst smoothed frequency ratio.

    Laplace smoothing (+1 per class per arm) keeps every ratio finite;
    zero-support detection runs unsmoothed so the defining pathology of a
    non-private mechanism is surfaced, not averaged away.
    """
    if trials_per_arm < 1000:
        raise ParameterError("need at least 1000 trials per arm")
    counts_i: Counter = Counter()
    counts_j: Counter = Counter()
    for _ in range(trials_per_arm):
        trace = run_trial(cfg, rng, target_query=cfg.q_i)
        counts_i[observation_statistic(trace, cfg)] += 1
    for _ in range(trials_per_arm):
        trace = run_trial(cfg, rng, target_query=cfg.q_j)
        counts_j[observation_statistic(trace, cfg)] += 1

    classes = {key: (counts_i[key], counts_j[key]) for key in set(counts_i) | set(counts_j)}
    max_ratio = 1.0
    eps_std = 0.0
    witness = None
    witness_threshold = max(10, trials_per_arm // 1000)
    for key, (ci, cj) in classes.items():
        smoothed = max((ci + 1) / (cj + 1), (cj + 1) / (ci + 1))
        if smoothed > max_ratio:
            max_ratio = smoothed
            eps_std = math.sqrt(1.0 / (ci + 1) + 1.0 / (cj + 1))
        if (ci == 0 and cj >= witness_threshold) or (cj == 0 and ci >= witness_threshold):
            witness = key
    return LikelihoodReport(
        classes=classes,
        max_ratio=max_ratio,
        epsilon_empirical=math.log(max_ratio),
        zero_support_witness=witness,
        trials_per_arm=trials_per_arm,
        epsilon_std=eps_std,
    )


def subset_delta_estimate(cfg: GameConfig, trials: int, rng: RngStream) -> float:
    """Empirical frequency of the all-contacted-servers-corrupt event."""
    if not isinstance(cfg.mechanism, (m.Subset, m.Chor)):
        raise ParameterError("delta estimation applies to subset-style mechanisms")
    t = cfg.params.d if isinstance(cfg.mechanism, m.Chor) else cfg.mechanism.t
    d = cfg.params.d
    corrupt = cfg.corrupt_set
    hits = 0
    for _ in range(trials):
        servers = m.choose_subset_servers(t, d, rng)
        if all(s in corrupt for s in servers):
            hits += 1
    return hits / trials


def naive_composition_estimate(
    n: int,
    p: int,
    u: int,
    q_i: int,
    q_j: int,
    q_0: int,
    trials: int,
    rng: RngStream,
) -> tuple[float, float]:
    """Frequencies of the two catastrophic events for anonymized dummy requests.

    Arm one has the target run q_i: returns the frequency that every one of
    the u users requested q_i. Arm two has the target run q_j: returns the
    frequency that nobody requested q_i. Request sets are simulated with the
    same redraw-until-full loop the dummy generator uses, batched across
    trials (bitmask accumulation, hence n <= 64).
    """
    if n > 64:
        raise ParameterError("batched set simulation supports n <= 64")
    if len({q_i, q_j, q_0}) != 3:
        raise ParameterError("q_i, q_j, q_0 must be distinct")

    def contains(queries: np.ndarray, probe: int) -> np.ndarray:
        rows = len(queries)
        cum = (np.uint64(1) << queries.astype(np.uint64)).astype(np.uint64)
        size = np.ones(rows, dtype=np.int32)
        done = np.zeros(rows, dtype=bool)
        steps = 0
        while not done.all():
            steps += 1
            if steps > 10**6:
                raise ParameterError("set simulation exceeded the draw cap")
            draw = rng.integers(n, size=rows).astype(np.uint64)
            bit = np.uint64(1) << draw
            new = cum | bit
            grew = (new != cum) & ~done
            cum = np.where(done, cum, new)
            size += grew
            done |= size >= p
        return (cum >> np.uint64(probe)) & np.uint64(1) > 0

    # arm with target on q_i: does every user's set contain q_i?
    queries = np.full((trials, u), q_0, dtype=np.int64)
    queries[:, 0] = q_i
    got = contains(queries.ravel(), q_i).reshape(trials, u)
    freq_all = float(got.all(axis=1).mean())

    # arm with target on q_j: does no user's set contain q_i?
    queries[:, 0] = q_j
    got = contains(queries.ravel(), q_i).reshape(trials, u)
    freq_none = float((~got.any(axis=1)).mean())
    return freq_all, freq_none


# --- exact oracles ------------------------------------------------------------


def _report_from_exact(dist_i: dict, dist_j: dict, reduce_key) -> LikelihoodReport:
    keys = set(dist_i) | set(dist_j)
    max_ratio = 1.0
    witness = None
    for key in keys:
        pi, pj = dist_i.get(key, 0.0), dist_j.get(key, 0.0)
        if pi > 0.0 and pj > 0.0:
            max_ratio = max(max_ratio, pi / pj, pj / pi)
        elif pi != pj:
            max_ratio = math.inf
            if witness is None or max(pi, pj) > max(
                dist_i.get(witness, 0.0), dist_j.get(witness, 0.0)
            ):
                witness = key

    reduced_i: dict = {}
    reduced_j: dict = {}
    for key in keys:
        rkey = reduce_key(key)
        reduced_i[rkey] = reduced_i.get(rkey, 0.0) + dist_i.get(key, 0.0)
        reduced_j[rkey] = reduced_j.get(rkey, 0.0) + dist_j.get(key, 0.0)
    reduced_max = 1.0
    for rkey in set(reduced_i) | set(reduced_j):
        pi, pj = reduced_i.get(rkey, 0.0), reduced_j.get(rkey, 0.0)
        if pi > 0.0 and pj > 0.0:
            reduced_max = max(reduced_max, pi / pj, pj / pi)
        elif pi != pj:
            reduced_max = math.inf

    classes = {
        rkey: (reduced_i.get(rkey, 0.0), reduced_j.get(rkey, 0.0))
        for rkey in set(reduced_i) | set(reduced_j)
    }
    return LikelihoodReport(
        classes=classes,
        max_ratio=max_ratio,
        epsilon_empirical=math.log(max_ratio) if max_ratio != math.inf else math.inf,
        zero_support_witness=witness,
        reduced_max_ratio=reduced_max,
    )


def _oracle_naive_dummy(cfg: GameConfig) -> LikelihoodReport:
    n = cfg.params.n
    p = cfg.mechanism.p
    if math.comb(n - 1, p - 1) > 200_000:
        raise OracleSizeError("too many request sets to enumerate")

    def dist(q: int) -> dict:
        rest = [r for r in range(n) if r != q]
        total = math.comb(n - 1, p - 1)
        out: dict = {}
        for dummies in itertools.combinations(rest, p - 1):
            obs = tuple(sorted((q,) + dummies))
            out[obs] = out.get(obs, 0.0) + 1.0 / total
        return out

    def reduce_key(obs):
        return (cfg.q_i in obs, cfg.q_j in obs)

    return _report_from_exact(dist(cfg.q_i), dist(cfg.q_j), reduce_key)


def _oracle_naive_anon(cfg: GameConfig) -> LikelihoodReport:
    d, d_a = cfg.params.d, cfg.params.d_a
    p_seen = d_a / d

    def dist(armed: str) -> dict:
        hit = (1, 0) if armed == "i" else (0, 1)
        out = {hit: p_seen}
        if p_seen < 1.0:
            out[(0, 0)] = 1.0 - p_seen
        return out

    return _report_from_exact(dist("i"), dist("j"), lambda k: k)


def _oracle_direct(cfg: GameConfig) -> LikelihoodReport:
    params = cfg.params
    n, d = params.n, params.d
    p = cfg.mechanism.p
    order = cfg.mechanism.order
    if params.u != 1:
        raise OracleSizeError("direct oracle enumerates the single-user game only")
    if n > 8 or p > 4 or d > 4:
        raise OracleSizeError("direct oracle limited to n <= 8, p <= 4, d <= 4")
    if p % d != 0:
        raise ParameterError(f"p={p} must be a multiple of d={d}")
    per = p // d
    corrupt = sorted(cfg.corrupt_set)
    if order == m.SHUFFLED_ORDER:
        orders = list(itertools.permutations(range(p)))
    else:
        orders = [tuple(range(p))]

    def dist(q: int) -> dict:
        rest = [r for r in range(n) if r != q]
        total = math.comb(n - 1, p - 1) * len(orders)
        out: dict = {}
        for dummies in itertools.combinations(rest, p - 1):
            items = sorted((q,) + dummies)
            for perm in orders:
                seq = [items[k] for k in perm]
                obs = tuple(
                    (sid, tuple(sorted(seq[sid * per : (sid + 1) * per]))) for sid in corrupt
                )
                out[obs] = out.get(obs, 0.0) + 1.0 / total
        return out

    def reduce_key(obs):
        seen = {idx for _, chunk in obs for idx in chunk}
        return (cfg.q_i in seen, cfg.q_j in seen)

    return _report_from_exact(dist(cfg.q_i), dist(cfg.q_j), reduce_key)


def _oracle_sparse(cfg: GameConfig) -> LikelihoodReport:
    params = cfg.params
    d, d_a = params.d, params.d_a
    theta = cfg.mechanism.theta
    if d > 6:
        raise OracleSizeError("sparse oracle limited to d <= 6")
    hidden = d - d_a
    z_even_full = parity_probability(d, theta)
    z_full = {0: z_even_full, 1: 1.0 - z_even_full}
    z_even_hidden = parity_probability(hidden, theta) if hidden > 0 else 1.0
    z_hidden = {0: z_even_hidden, 1: 1.0 - z_even_hidden}

    def col_prob(obs_bits: tuple[int, ...], parity: int) -> float:
        # probability of seeing these corrupt-row bits in a column whose full
        # Hamming weight has the given parity
        w = sum(obs_bits)
        bern = theta**w * (1.0 - theta) ** (d_a - w)
        need = (parity - w) % 2
        if hidden == 0:
            return bern / z_full[parity] if need == 0 else 0.0
        return bern * z_hidden[need] / z_full[parity]

    cells = list(itertools.product((0, 1), repeat=d_a))

    def dist(arm: str) -> dict:
        par_i, par_j = (1, 0) if arm == "i" else (0, 1)
        out: dict = {}
        for o_i in cells:
            pi = col_prob(o_i, par_i)
            if pi == 0.0:
                continue
            for o_j in cells:
                pj = col_prob(o_j, par_j)
                if pj == 0.0:
                    continue
                out[(o_i, o_j)] = pi * pj
        return out

    def reduce_key(obs):
        o_i, o_j = obs
        return (sum(o_i) % 2, sum(o_j) % 2)

    # columns other than the two candidates contribute identical factors to
    # both arms, so enumerating the candidate columns is exact for ratios
    return _report_from_exact(dist("i"), dist("j"), reduce_key)


def _oracle_subset(cfg: GameConfig) -> LikelihoodReport:
    params = cfg.params
    t = params.d if isinstance(cfg.mechanism, m.Chor) else cfg.mechanism.t
    delta = delta_subset(params.d, params.d_a, t).delta

    def dist(q: int) -> dict:
        out: dict = {}
        if delta > 0.0:
            out[("exposed", q)] = delta
        if delta < 1.0:
            out[("hidden",)] = 1.0 - delta
        return out

    return _report_from_exact(dist(cfg.q_i), dist(cfg.q_j), lambda k: k)


def exact_oracle(cfg: GameConfig) -> LikelihoodReport:
    """Exact likelihood report by enumerating all mechanism randomness.

    max_ratio is computed over full observations; reduced_max_ratio over the
    estimator's statistic, so the sufficiency of the reduction is checkable.
    Refuses instances beyond enumeration size.
    """
    mech = cfg.mechanism
    if isinstance(mech, m.NaiveDummy):
        return _oracle_naive_dummy(cfg)
    if isinstance(mech, m.NaiveAnon):
        return _oracle_naive_anon(cfg)
    if isinstance(mech, m.Direct):
        return _oracle_direct(cfg)
    if isinstance(mech, m.Sparse):
        return _oracle_sparse(cfg)
    if isinstance(mech, (m.Subset, m.Chor)):
        return _oracle_subset(cfg)
    raise OracleSizeError(f"no exact oracle for mechanism {mech!r}")


# --- composition folding -------------------------------------------------------


def permutation_fold(likelihoods: list[tuple[float, float, float]]) -> tuple[float, float]:
    """Exact mixed-round likelihoods from per-observation likelihood triples.

    likelihoods[k] = (Pr(O_k | Q_a), Pr(O_k | Q_b), Pr(O_k | Q_0)). Because
    the mix makes every assignment of observations to users equally likely,
    Pr(trace | arm) = (1/u) * sum_k L_arm(O_k) * prod_{m != k} L_0(O_m).
    """
    u = len(likelihoods)
    if u < 1:
        raise ParameterError("need at least one observation")
    l0 = [trip[2] for trip in likelihoods]
    prefix = [1.0] * (u + 1)
    for k in range(u):
        prefix[k + 1] = prefix[k] * l0[k]
    suffix = [1.0] * (u + 1)
    for k in range(u - 1, -1, -1):
        suffix[k] = suffix[k + 1] * l0[k]
    pr_a = pr_b = 0.0
    for k, (la, lb, _) in enumerate(likelihoods):
        rest = prefix[k] * suffix[k + 1]
        pr_a += la * rest
        pr_b += lb * rest
    return pr_a / u, pr_b / u


def two_point_composition(eps1: float, u: int) -> float:
    """Worst-case log-ratio of a mixed round under the constant two-point model.

    Every observation likelihood is mu for the query that produced it and nu
    otherwise, with mu = e^eps1 * nu; folding the permutation sum with both
    extreme terms bounded through nu gives
    (mu^2 + (u-1) nu^2) * mu^(u-2) over u * nu^2 * mu^(u-2),
    whose log is ln(e^(2*eps1) + u - 1) - ln u (and 2*eps1 at u = 1).
    """
    if u < 1:
        raise ParameterError("user count must be >= 1")
    mu, nu = math.exp(eps1), 1.0
    shared = mu ** (u - 2)
    numerator = (mu**2 + (u - 1) * nu**2) * shared
    denominator = u * nu**2 * shared
    return math.log(numerator / denominator)


def exact_two_point_fold(eps1: float, u: int) -> float:
    """Log-ratio of the honestly folded two-point trace (tighter than the bound).

    Builds the worst realizable trace (target observation matching Q_a, the
    rest matching Q_0) and folds it exactly: the denominator's target term is
    nu * mu^(u-1), so the result is below two_point_composition and collapses
    to eps1 at u = 1.
    """
    mu, nu = math.exp(eps1), 1.0
    trace = [(mu, nu, nu)] + [(nu, nu, mu)] * (u - 1)
    pr_a, pr_b = permutation_fold(trace)
    return math.log(pr_a / pr_b)
