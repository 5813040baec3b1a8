"""Closed-form privacy bounds and the per-mechanism cost model.

Every bound is a pure function of the system parameters; the game harness
estimates the same quantities empirically and checks them against these
formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import ParameterError

INF = math.inf


@dataclass(frozen=True)
class PrivacyBound:
    """An (epsilon, delta) guarantee; epsilon = inf encodes "unbounded leakage"."""

    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not (self.epsilon >= 0.0):
            raise ParameterError(f"epsilon must be non-negative, got {self.epsilon}")
        if not 0.0 <= self.delta <= 1.0:
            raise ParameterError(f"delta must lie in [0, 1], got {self.delta}")


@dataclass(frozen=True)
class CostEstimate:
    """Server-side cost of answering one query.

    cm_records counts record blocks sent back to the user; cp_accesses counts
    record touches across all servers (kept real-valued because several
    mechanisms only fix its expectation); cp_weighted applies the
    caller-supplied per-access and per-processing unit costs.
    """

    cm_records: int
    cp_accesses: float
    cp_weighted: float


def arctanh(x: float) -> float:
    """Inverse hyperbolic tangent via (1/2)ln((1+x)/(1-x)); inf at |x| ~ 1."""
    if abs(x) >= 1.0 - 1e-15:
        return INF if x > 0 else -INF
    return 0.5 * math.log((1.0 + x) / (1.0 - x))


def _check_direct_params(n: int, d: int, d_a: int, p: int) -> None:
    if n < 2 or d < 1:
        raise ParameterError(f"need n >= 2 and d >= 1, got n={n}, d={d}")
    if not 0 <= d_a <= d:
        raise ParameterError(f"d_a={d_a} outside [0, {d}]")
    if not 1 < p <= n:
        raise ParameterError(f"request count p={p} outside (1, n={n}]")
    if p % d != 0:
        raise ParameterError(f"request count p={p} must be a multiple of d={d}")


def eps_direct(n: int, d: int, d_a: int, p: int) -> PrivacyBound:
    """Privacy bound for dummy requests partitioned across d servers.

    epsilon = ln( (1/(d-d_a)) * ( d*(n-1)/(p-1) - d_a ) ); with no honest
    server the leak is unbounded and epsilon is inf.
    """
    _check_direct_params(n, d, d_a, p)
    if d_a == d:
        return PrivacyBound(INF)
    ratio = (d * (n - 1) / (p - 1) - d_a) / (d - d_a)
    return PrivacyBound(max(0.0, math.log(ratio)))


def _compose_log(log_ratio: float, u: int) -> float:
    """ln((e^L + u - 1) / u), accurate for both tiny and huge L.

    The expm1/log1p form avoids the cancellation that makes the naive
    log-sum noisy (and non-monotone) once L drops below ~1e-15; the
    log-add-exp branch avoids overflow for large L.
    """
    if u == 1:
        return log_ratio
    if log_ratio > 500.0:
        hi, lo = log_ratio, math.log(u - 1)
        return hi + math.log1p(math.exp(lo - hi)) - math.log(u)
    return math.log1p(math.expm1(log_ratio) / u)


def eps_compose(eps1: float, u: int) -> float:
    """Privacy of an eps1-private mechanism run by u users behind a mix.

    epsilon_2 = ln(e^(2*eps1) + u - 1) - ln u; collapses to 2*eps1 at u = 1.
    """
    if u < 1:
        raise ParameterError(f"user count must be >= 1, got {u}")
    if eps1 < 0:
        raise ParameterError(f"epsilon must be non-negative, got {eps1}")
    if math.isinf(eps1):
        return INF
    return _compose_log(2.0 * eps1, u)


def eps_bundled(n: int, d: int, d_a: int, p: int, u: int) -> PrivacyBound:
    """Privacy bound for dummy-request bundles sent through an anonymity system.

    epsilon = ln( L^2 + u - 1 ) - ln u with L = exp(eps_direct); equals
    2 * eps_direct at u = 1.
    """
    base = eps_direct(n, d, d_a, p)
    if math.isinf(base.epsilon):
        return PrivacyBound(INF)
    return PrivacyBound(eps_compose(base.epsilon, u))


def eps_sparse(theta: float, d: int, d_a: int) -> PrivacyBound:
    """Privacy bound for sparse request vectors: 4*arctanh((1-2*theta)^(d-d_a))."""
    if not 0.0 < theta <= 0.5:
        raise ParameterError(f"theta must lie in (0, 1/2], got {theta}")
    if d < 1 or not 0 <= d_a <= d:
        raise ParameterError(f"bad server counts d={d}, d_a={d_a}")
    if d_a == d:
        return PrivacyBound(INF)
    x = (1.0 - 2.0 * theta) ** (d - d_a)
    return PrivacyBound(4.0 * arctanh(x))


def eps_anon_sparse(theta: float, d: int, d_a: int, u: int) -> PrivacyBound:
    """Privacy bound for sparse request vectors behind an anonymity system.

    epsilon = ln( ((1+x)/(1-x))^4 + u - 1 ) - ln u with x = (1-2*theta)^(d-d_a);
    identical to eps_compose(eps_sparse(theta, d, d_a), u).
    """
    if u < 1:
        raise ParameterError(f"user count must be >= 1, got {u}")
    base = eps_sparse(theta, d, d_a)
    if math.isinf(base.epsilon):
        return PrivacyBound(INF)
    x = (1.0 - 2.0 * theta) ** (d - d_a)
    quartic_log = 4.0 * math.log((1.0 + x) / (1.0 - x))
    return PrivacyBound(_compose_log(quartic_log, u))


def delta_subset(d: int, d_a: int, t: int) -> PrivacyBound:
    """Probability that all t contacted servers are corrupt.

    epsilon = 0 and delta = prod_{i=0}^{t-1} (d_a - i)/(d - i) when t <= d_a,
    else delta = 0. Accepts t = 1 for formula evaluation even though the
    query generator requires t >= 2.
    """
    if d < 1 or not 0 <= d_a <= d:
        raise ParameterError(f"bad server counts d={d}, d_a={d_a}")
    if not 1 <= t <= d:
        raise ParameterError(f"subset size t={t} outside [1, {d}]")
    if t > d_a:
        return PrivacyBound(0.0, 0.0)
    delta = 1.0
    for i in range(t):
        delta *= (d_a - i) / (d - i)
    return PrivacyBound(0.0, delta)


def naive_composition_deltas(n: int, p: int, u: int) -> tuple[float, float]:
    """Bounds on the two catastrophic events for anonymized dummy requests.

    Returns (delta_0, delta_u): the probability no user requests the target
    candidate is at most ((n-p)/(n-1))^(u-1); the probability every user
    requests it is at most ((p-1)/(n-1))^(u-1).
    """
    if n < 2 or not 1 < p <= n:
        raise ParameterError(f"need 1 < p <= n, got p={p}, n={n}")
    if u < 1:
        raise ParameterError(f"user count must be >= 1, got {u}")
    delta_0 = ((n - p) / (n - 1)) ** (u - 1)
    delta_u = ((p - 1) / (n - 1)) ** (u - 1)
    return delta_0, delta_u


def cost_model(mechanism, params, c_acc: float = 1.0, c_prc: float = 1.0) -> CostEstimate:
    """Expected server-side cost of one query under the given mechanism.

    Fetch-style mechanisms only pay the access cost; XOR-scan mechanisms pay
    access plus processing on every selected record.
    """
    from . import mechanisms as m  # local import to avoid a cycle

    n, d = params.n, params.d
    mech = mechanism
    if isinstance(mech, (m.Direct, m.BundledAnon, m.SeparatedAnon, m.NaiveDummy)):
        return CostEstimate(mech.p, float(mech.p), mech.p * c_acc)
    if isinstance(mech, m.NaiveAnon):
        return CostEstimate(1, 1.0, c_acc)
    if isinstance(mech, (m.Sparse, m.AnonSparse)):
        accesses = mech.theta * d * n
        return CostEstimate(d, accesses, accesses * (c_acc + c_prc))
    if isinstance(mech, m.Chor):
        accesses = 0.5 * d * n
        return CostEstimate(d, accesses, accesses * (c_acc + c_prc))
    if isinstance(mech, m.Subset):
        accesses = 0.5 * mech.t * n
        return CostEstimate(mech.t, accesses, accesses * (c_acc + c_prc))
    raise ParameterError(f"unknown mechanism {mechanism!r}")
