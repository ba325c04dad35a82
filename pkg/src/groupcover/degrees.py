"""Degree laws for the social graph.

A graph is summarized by (n, d, sigma) and, when needed, a sampleable
degree distribution: either an ingested empirical histogram or a
discretized lognormal matched to the published moments.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import ndtr

from .errors import ConfigurationError, FitError, ParseError

EMPIRICAL = "empirical-histogram"
PARAMETRIC = "parametric-fit"

# relative moment fidelity required of parametric fits
MOMENT_TOL = 0.005


@dataclass(frozen=True)
class GraphProfile:
    """Population summary: user count, mean degree, degree std."""

    n: int
    d: float
    sigma: float

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError(f"n must be >= 1, got {self.n}")
        if self.d < 0 or self.sigma < 0:
            raise ConfigurationError("d and sigma must be nonnegative")
        if self.d >= self.n:
            raise ConfigurationError(f"mean degree {self.d} infeasible for n={self.n}")


@dataclass(frozen=True)
class DegreeDistribution:
    """Discrete degree law over a finite support.

    degrees and masses are parallel arrays; masses sum to 1.
    provenance records whether the law came from data or from a fit.
    """

    degrees: np.ndarray
    masses: np.ndarray
    provenance: str = EMPIRICAL

    def __post_init__(self):
        deg = np.asarray(self.degrees, dtype=np.int64)
        mass = np.asarray(self.masses, dtype=np.float64)
        if deg.ndim != 1 or deg.shape != mass.shape or deg.size == 0:
            raise ConfigurationError("degrees and masses must be matching nonempty 1-d arrays")
        if np.any(deg < 0):
            raise ConfigurationError("degrees must be nonnegative")
        if np.any(mass < 0):
            raise ConfigurationError("masses must be nonnegative")
        if abs(mass.sum() - 1.0) > 1e-9:
            raise ConfigurationError(f"masses sum to {mass.sum()!r}, expected 1 within 1e-9")
        if self.provenance not in (EMPIRICAL, PARAMETRIC):
            raise ConfigurationError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "degrees", deg)
        object.__setattr__(self, "masses", mass)

    @property
    def support(self) -> list[tuple[int, float]]:
        return list(zip(self.degrees.tolist(), self.masses.tolist()))

    def mean(self) -> float:
        return float(np.dot(self.degrees, self.masses))

    def std(self) -> float:
        mu = self.mean()
        var = float(np.dot((self.degrees - mu) ** 2, self.masses))
        return math.sqrt(max(var, 0.0))

    def profile(self, n: int) -> GraphProfile:
        """Summarize as a GraphProfile for a population of n users."""
        return GraphProfile(n=n, d=self.mean(), sigma=self.std())


def load_histogram(path) -> DegreeDistribution:
    """Read a two-column CSV of (degree, count) rows and normalize it.

    A single non-numeric header row is tolerated. Counts may be zero for
    individual degrees but not for all of them.
    """
    totals: dict[int, float] = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue  # blank line
            if len(row) != 2:
                raise ParseError(f"{path}: line {lineno}: expected 2 columns, got {len(row)}")
            try:
                degree = int(row[0])
                count = float(row[1])
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise ParseError(f"{path}: line {lineno}: non-numeric row {row!r}") from None
            if degree < 0 or count < 0:
                raise ParseError(f"{path}: line {lineno}: negative value in row {row!r}")
            totals[degree] = totals.get(degree, 0.0) + count
    if not totals:
        raise ParseError(f"{path}: no data rows")
    degrees = np.array(sorted(totals), dtype=np.int64)
    counts = np.array([totals[k] for k in degrees], dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise ConfigurationError(f"{path}: histogram has no positive counts")
    return DegreeDistribution(degrees=degrees, masses=counts / total, provenance=EMPIRICAL)


def _discretized_lognormal(mu: float, s: float, max_degree: int):
    """Masses of round(LN(mu, s)) on 0..max_degree, renormalized.

    Cell k covers [k-1/2, k+1/2); mass beyond max_degree+1/2 is dropped.
    """
    edges = np.arange(max_degree + 1) + 0.5  # upper edges of cells 0..max_degree
    cdf = ndtr((np.log(edges) - mu) / s)
    masses = np.diff(np.concatenate(([0.0], cdf)))
    total = masses.sum()
    if total <= 0:
        return None
    return masses / total


def _moments(masses: np.ndarray):
    k = np.arange(masses.size, dtype=np.float64)
    mean = float(np.dot(k, masses))
    var = float(np.dot((k - mean) ** 2, masses))
    return mean, math.sqrt(max(var, 0.0))


def fit_matched_lognormal(profile: GraphProfile, max_degree: int) -> DegreeDistribution:
    """Fit a discretized, truncated lognormal whose post-truncation moments
    match (profile.d, profile.sigma) within 0.5%.

    The continuous parameters are solved so the moments hold after
    discretization and truncation, not before. Raises FitError when sigma
    cannot be reached inside the truncation window.
    """
    d, sigma = profile.d, profile.sigma
    if d <= 0 or sigma <= 0:
        raise ConfigurationError("fit requires d > 0 and sigma > 0")
    if max_degree <= d:
        raise ConfigurationError(f"max_degree {max_degree} must exceed mean degree {d}")

    def mean_matched_mu(s: float) -> float | None:
        # mean is increasing in mu; the truncated density pivots toward the
        # upper cells once mu > s^2, so the bracket must grow with s
        lo = math.log(d) - 12.0 - 6.0 * s
        hi = math.log(max_degree) + 2.0 + s * s

        def gap(mu):
            masses = _discretized_lognormal(mu, s, max_degree)
            if masses is None:
                # all mass escaped past max_degree, so the mean is too high
                return float(d)
            return _moments(masses)[0] - d

        glo, ghi = gap(lo), gap(hi)
        if glo > 0 or ghi < 0:
            return None
        return optimize.brentq(gap, lo, hi, xtol=1e-13, maxiter=200)

    def std_gap(s: float) -> float:
        mu = mean_matched_mu(s)
        if mu is None:
            return -sigma
        masses = _discretized_lognormal(mu, s, max_degree)
        return _moments(masses)[1] - sigma

    # moment-matched continuous init gives the right order of magnitude
    s_init = math.sqrt(math.log(1.0 + (sigma / d) ** 2))
    s_lo, s_hi = max(s_init / 64.0, 1e-9), max(4.0 * s_init, 1.0)
    g_lo, g_hi = std_gap(s_lo), std_gap(s_hi)
    for _ in range(40):
        if g_lo < 0:
            break
        s_lo /= 8.0
        g_lo = std_gap(s_lo)
    for _ in range(8):
        if g_hi > 0:
            break
        s_hi *= 2.0
        g_hi = std_gap(s_hi)
    if g_hi < 0:
        raise FitError(
            f"sigma={sigma} unreachable with max_degree={max_degree}: "
            f"truncated law tops out {abs(g_hi):.4g} below the target"
        )
    if g_lo > 0:
        raise FitError(f"sigma={sigma} below the discretization floor at mean {d}")
    s = optimize.brentq(std_gap, s_lo, s_hi, xtol=1e-13, maxiter=200)
    mu = mean_matched_mu(s)
    masses = _discretized_lognormal(mu, s, max_degree)
    mean, std = _moments(masses)

    if abs(mean - d) / d > MOMENT_TOL or abs(std - sigma) / sigma > MOMENT_TOL:
        # coordinate solve stalled (stiff near-degenerate case); polish both
        def residual(params):
            mm = _discretized_lognormal(params[0], abs(params[1]) + 1e-12, max_degree)
            if mm is None:
                return [1.0, 1.0]
            a, b = _moments(mm)
            return [(a - d) / d, (b - sigma) / sigma]

        sol = optimize.least_squares(residual, x0=[mu, s], xtol=1e-15, ftol=1e-15)
        mu, s = sol.x[0], abs(sol.x[1]) + 1e-12
        masses = _discretized_lognormal(mu, s, max_degree)
        mean, std = _moments(masses)
        if abs(mean - d) / d > MOMENT_TOL or abs(std - sigma) / sigma > MOMENT_TOL:
            raise FitError(
                f"fit reached mean={mean:.6g} std={std:.6g}, "
                f"target d={d} sigma={sigma} outside 0.5%"
            )

    keep = masses > 0
    return DegreeDistribution(
        degrees=np.arange(max_degree + 1, dtype=np.int64)[keep],
        masses=masses[keep] / masses[keep].sum(),
        provenance=PARAMETRIC,
    )


def sample_degree_sequence(dist: DegreeDistribution, n: int, seed) -> np.ndarray:
    """Draw n independent degrees; bump the last one if the total is odd.

    The parity repair guarantees a realizable multigraph and biases the
    mean by at most 1/n.
    """
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    if dist.degrees.size == 1:
        seq = np.full(n, dist.degrees[0], dtype=np.int64)
    else:
        seq = rng.choice(dist.degrees, size=n, p=dist.masses)
    if int(seq.sum()) % 2 == 1:
        seq = seq.copy()
        seq[-1] += 1
    return seq
