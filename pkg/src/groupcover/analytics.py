"""Closed-form connectivity analysis and design planning.

Everything here is a pure function of a GraphProfile. The connection law
between a random group pair is Poisson(n*d/m^2) in the large-m limit; the
double integral refines it with normal fluctuations of group size and of
the group's total friend count, and the planners invert the Poisson tail
to choose m for the light, hybrid, and stream regimes.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass

from scipy import integrate

from .degrees import GraphProfile
from .errors import ConfigurationError, NumericError, PlanningError

LIGHT = "light"
HYBRID = "hybrid"
STREAM = "stream"

INTEGRAL_ABS_TOL = 1e-6
# half-width of the quadrature windows, in standard deviations
WINDOW_SIGMAS = 8.0


@dataclass(frozen=True)
class DesignPlan:
    """A chosen operating point: regime, group count, and its implied stats."""

    regime: str
    m: int
    lambda_: float
    epsilon: float
    l: int | None
    k: int
    expected_group_size: float

    def __post_init__(self):
        if self.regime not in (LIGHT, HYBRID, STREAM):
            raise ConfigurationError(f"unknown regime {self.regime!r}")
        if self.regime == HYBRID and self.l != 1:
            raise ConfigurationError("hybrid regime requires l = 1")
        if self.m < 1:
            raise ConfigurationError(f"m must be >= 1, got {self.m}")

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "m": self.m,
            "lambda": self.lambda_,
            "epsilon": self.epsilon,
            "l": self.l,
            "k": self.k,
            "expected_group_size": self.expected_group_size,
        }


@dataclass(frozen=True)
class ResourceEstimate:
    """Per-user retrieval costs relative to the messages meant for the user."""

    bandwidth_ratio: float
    computation_ratio: float
    expected_connections: float

    def __post_init__(self):
        if min(self.bandwidth_ratio, self.computation_ratio, self.expected_connections) <= 0:
            raise ConfigurationError("resource estimates must be positive")

    def to_dict(self) -> dict:
        return {
            "bandwidth": self.bandwidth_ratio,
            "computation": self.computation_ratio,
            "connections": self.expected_connections,
        }


def poisson_lambda(profile: GraphProfile, m: int) -> float:
    """Expected edges between a random group pair: n*d/m^2."""
    if m < 1:
        raise ConfigurationError(f"m must be >= 1, got {m}")
    return profile.n * profile.d / (m * m)


def prob_at_least(l: int, lam: float) -> float:
    """P[Poisson(lam) >= l]."""
    if l < 0 or lam < 0:
        raise ConfigurationError("l and lambda must be nonnegative")
    if l == 0:
        return 1.0
    # running pmf term keeps the sum stable; underflow of e^-lam means the
    # tail is 1 to machine precision
    term = math.exp(-lam)
    cdf = term
    for i in range(1, l):
        term *= lam / i
        cdf += term
    return max(0.0, 1.0 - cdf)


def conditional_mean_streams(lam: float) -> float:
    """Mean stream size given the pair is connected: lam/(1-e^-lam).

    Diagnostic only; the resource model uses the unconditional mean.
    """
    if lam <= 0:
        raise ConfigurationError("lambda must be positive")
    return lam / -math.expm1(-lam)


def disconnect_prob_integral(profile: GraphProfile, m: int) -> float:
    """P[a random group pair has no edge], by nested adaptive quadrature.

    Integrates (1-1/m)^x against the group-size normal N(n/m, sqrt(n/m))
    and the friend-count normal N(j*d, sqrt(j)*sigma) over the positive
    quadrant, windows at +-8 sigma. Absolute error at most 1e-6 or a
    NumericError carrying the achieved tolerance.
    """
    if m < 2:
        raise ConfigurationError(f"integral needs m >= 2, got {m}")
    n, d, sigma = profile.n, profile.d, profile.sigma
    mean_j = n / m
    if mean_j < 30:
        warnings.warn(
            f"n/m = {mean_j:.1f} below 30; normal approximations are rough",
            stacklevel=2,
        )
    log_keep = math.log1p(-1.0 / m)  # ln(1 - 1/m), exact for large m
    sd_j = math.sqrt(mean_j)
    j_lo = max(0.0, mean_j - WINDOW_SIGMAS * sd_j)
    j_hi = mean_j + WINDOW_SIGMAS * sd_j

    def size_density(j):
        z = (j - mean_j) / sd_j
        return math.exp(-0.5 * z * z) / (sd_j * math.sqrt(2.0 * math.pi))

    if sigma == 0.0:
        # friend count is exactly j*d; the inner integral collapses
        def outer(j):
            return math.exp(j * d * log_keep) * size_density(j)

        val, err = integrate.quad(outer, j_lo, j_hi, epsabs=1e-9, limit=200)
        if err > INTEGRAL_ABS_TOL:
            raise NumericError(
                f"quadrature reached abs error {err:.3g} > {INTEGRAL_ABS_TOL}",
                achieved_tolerance=err,
            )
        return min(max(val, 0.0), 1.0)

    def outer(j):
        sd_x = math.sqrt(j) * sigma
        mean_x = j * d
        x_lo = max(0.0, mean_x - WINDOW_SIGMAS * sd_x)
        x_hi = mean_x + WINDOW_SIGMAS * sd_x

        def inner(x):
            z = (x - mean_x) / sd_x
            return math.exp(x * log_keep - 0.5 * z * z) / (sd_x * math.sqrt(2.0 * math.pi))

        val, _ = integrate.quad(inner, x_lo, x_hi, epsabs=1e-10, limit=200)
        return val * size_density(j)

    val, err = integrate.quad(outer, j_lo, j_hi, epsabs=1e-8, limit=200)
    if err > INTEGRAL_ABS_TOL:
        raise NumericError(
            f"quadrature reached abs error {err:.3g} > {INTEGRAL_ABS_TOL}",
            achieved_tolerance=err,
        )
    return min(max(val, 0.0), 1.0)


def disconnect_prob_mgf(profile: GraphProfile, m: int) -> float:
    """Closed-form reduction of the disconnect integral.

    With t = ln(1-1/m), the inner normal integrates to exp(j*c) for
    c = d*t + sigma^2 t^2 / 2, and the outer normal then gives
    exp((n/m)(c + c^2/2)). Exact for untruncated normals; only valid while
    c is small and negative, where truncation to the positive quadrant is
    immaterial. Shares no code with the quadrature route on purpose.
    """
    if m < 2:
        raise ConfigurationError(f"closed form needs m >= 2, got {m}")
    n, d, sigma = profile.n, profile.d, profile.sigma
    t = math.log1p(-1.0 / m)
    c = d * t + 0.5 * (sigma * t) ** 2
    if c >= 0.0 or abs(c) > 0.5:
        raise NumericError(
            f"closed form invalid at m={m}: c={c:.4g} outside (-0.5, 0); "
            "the normal tails dominate and the reduction diverges"
        )
    return math.exp((n / m) * (c + 0.5 * c * c))


def connection_curve(profile: GraphProfile, m_grid) -> list[tuple[int, float]]:
    """(m, P[connected]) along a grid of group counts."""
    if not len(m_grid):
        raise ConfigurationError("m_grid must be nonempty")
    return [(int(m), 1.0 - disconnect_prob_integral(profile, int(m))) for m in m_grid]


def _bisect_largest(pred, lo: int) -> int:
    """Largest m >= lo with pred(m) true; pred must be monotone nonincreasing."""
    hi = lo
    while pred(hi * 2):
        hi *= 2
    lo_good, hi_bad = hi, hi * 2
    while hi_bad - lo_good > 1:
        mid = (lo_good + hi_bad) // 2
        if pred(mid):
            lo_good = mid
        else:
            hi_bad = mid
    return lo_good


def _plan(regime: str, profile: GraphProfile, m: int, epsilon: float, l) -> DesignPlan:
    return DesignPlan(
        regime=regime,
        m=m,
        lambda_=poisson_lambda(profile, m),
        epsilon=epsilon,
        l=l,
        k=profile.n // (2 * m),
        expected_group_size=profile.n / m,
    )


def plan_light(profile: GraphProfile, uniqueness_failure: float) -> DesignPlan:
    """Smallest m making a second edge on a connected pair unlikely.

    Removing the known edge leaves the pair's law unchanged, so the
    criterion is 1 - e^{-lambda(m)} <= uniqueness_failure.
    """
    if not 0.0 < uniqueness_failure < 1.0:
        raise ConfigurationError("uniqueness_failure must lie in (0, 1)")
    if profile.d == 0:
        raise PlanningError("cannot plan for a graph with mean degree 0")

    def too_crowded(m):
        return prob_at_least(1, poisson_lambda(profile, m)) > uniqueness_failure

    if not too_crowded(1):
        return _plan(LIGHT, profile, 1, uniqueness_failure, None)
    # too_crowded is monotone nonincreasing in m; find its last true point
    m = _bisect_largest(too_crowded, 1) + 1
    return _plan(LIGHT, profile, m, uniqueness_failure, None)


def plan_stream(profile: GraphProfile, l: int, confidence: float) -> DesignPlan:
    """Largest m keeping P[stream size >= l] at or above confidence."""
    if l < 1:
        raise ConfigurationError(f"l must be >= 1, got {l}")
    if not 0.0 < confidence < 1.0:
        raise ConfigurationError("confidence must lie in (0, 1)")
    if profile.d == 0:
        raise PlanningError("cannot plan for a graph with mean degree 0")

    def satisfied(m):
        return prob_at_least(l, poisson_lambda(profile, m)) >= confidence

    if not satisfied(1):
        raise PlanningError(
            f"confidence {confidence} for l={l} unreachable even at m=1"
        )
    m = _bisect_largest(satisfied, 1)
    regime = HYBRID if l == 1 else STREAM
    return _plan(regime, profile, m, 1.0 - confidence, l)


TABLE1_CONFIDENCES = (0.999, 0.995, 0.99, 0.9, 0.8, 0.75, 0.2, 0.1, 0.01)

TABLE1_COLUMNS = ("confidence", "m", "group_size", "lambda")


def table1(profile: GraphProfile, confidences=TABLE1_CONFIDENCES) -> list[dict]:
    """Group counts and sizes across confidence targets, one row each."""
    rows = []
    for confidence in confidences:
        plan = plan_stream(profile, l=1, confidence=confidence)
        rows.append(
            {
                "confidence": confidence,
                "m": plan.m,
                "group_size": plan.expected_group_size,
                "lambda": plan.lambda_,
            }
        )
    return rows


def harmonic(k: int) -> float:
    return sum(1.0 / i for i in range(1, k + 1))


def coupon_expectation(d_b: int) -> float:
    """Expected uniform polls to visit all d_b friend groups: d_b * H_{d_b}."""
    if d_b < 1:
        raise ConfigurationError(f"d_b must be >= 1, got {d_b}")
    return d_b * harmonic(d_b)


RESOURCE_COLUMNS = ("strategy", "bandwidth", "computation", "connections")


def resource_table(
    plan: DesignPlan, phi: float, d_b: int, group_size: int
) -> dict[str, ResourceEstimate]:
    """Per-strategy retrieval cost model.

    Polling a stream/hybrid design downloads the whole stream per friend
    group (mu(1+phi) bandwidth, header decryptions phi*mu plus the one body);
    the light design is free of overhead by construction. Bulk download
    fetches the entire group box in one connection; its decryption work
    matches the non-bulk value because box labels carry cleartext source
    groups, so foreign messages are discarded undecrypted.
    """
    if not 0.0 <= phi < 1.0:
        raise ConfigurationError("phi must lie in [0, 1)")
    if group_size < 1:
        raise ConfigurationError("group_size must be >= 1")
    polls = coupon_expectation(d_b)
    if plan.regime == LIGHT:
        poll = ResourceEstimate(1.0, 1.0, polls)
    else:
        mu = plan.lambda_
        poll = ResourceEstimate(mu * (1.0 + phi), 1.0 + phi * mu, polls)
    bulk = ResourceEstimate(
        bandwidth_ratio=group_size * (1.0 + phi),
        computation_ratio=poll.computation_ratio,
        expected_connections=1.0,
    )
    return {"poll": poll, "bulk_download": bulk}


def edge_privacy_closed_form(profile: GraphProfile, m: int) -> float:
    """P[the group pair stays connected after deleting one sender's edges].

    Any single user's edges are a negligible share of a stream at scale, so
    the law is the unchanged Poisson and the answer is 1 - e^{-lambda}.
    """
    if m < 2:
        raise ConfigurationError(f"edge privacy needs m >= 2, got {m}")
    return -math.expm1(-poisson_lambda(profile, m))


def replan_for_growth(
    plan: DesignPlan, new_profile: GraphProfile
) -> tuple[DesignPlan, float]:
    """Re-run the plan's own planner on a grown network.

    Returns the new plan and the growth factor of m.
    """
    old_n = round(plan.m * plan.expected_group_size)
    if new_profile.n < old_n:
        raise ConfigurationError(
            f"new profile has n={new_profile.n}, below the plan's n={old_n}"
        )
    if plan.regime == LIGHT:
        new_plan = plan_light(new_profile, plan.epsilon)
    else:
        new_plan = plan_stream(new_profile, plan.l, 1.0 - plan.epsilon)
    return new_plan, new_plan.m / plan.m


def write_rows_csv(rows: list[dict], columns, path_or_handle) -> None:
    """Emit dict rows as CSV with a fixed column order."""

    def _write(fh):
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row[c] for c in columns])

    if hasattr(path_or_handle, "write"):
        _write(path_or_handle)
    else:
        with open(path_or_handle, "w", newline="") as fh:
            _write(fh)


def write_rows_json(rows: list[dict], columns, path_or_handle) -> None:
    payload = [{c: row[c] for c in columns} for row in rows]

    if hasattr(path_or_handle, "write"):
        json.dump(payload, path_or_handle, indent=2)
        path_or_handle.write("\n")
    else:
        with open(path_or_handle, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
