"""Degree-law tests: histogram ingestion, moment-matched fits, sampling."""
import math

import numpy as np
import pytest

from groupcover import (
    ConfigurationError,
    DegreeDistribution,
    FitError,
    GraphProfile,
    ParseError,
    FACEBOOK_PROFILE,
    fit_matched_lognormal,
    load_histogram,
    sample_degree_sequence,
)
from groupcover.degrees import EMPIRICAL, PARAMETRIC, MOMENT_TOL


def _write(tmp_path, text, name="hist.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadHistogram:
    def test_two_point_histogram(self, tmp_path):
        dist = load_histogram(_write(tmp_path, "degree,count\n1,1\n3,1\n"))
        assert dist.support == [(1, 0.5), (3, 0.5)]
        assert dist.mean() == pytest.approx(2.0)
        assert dist.std() == pytest.approx(1.0)
        assert dist.provenance == EMPIRICAL

    def test_single_row_is_point_mass(self, tmp_path):
        dist = load_histogram(_write(tmp_path, "5,10\n"))
        assert dist.support == [(5, 1.0)]
        assert dist.std() == 0.0

    def test_headerless_and_blank_lines(self, tmp_path):
        dist = load_histogram(_write(tmp_path, "\n2,3\n\n4,1\n"))
        assert dist.support == [(2, 0.75), (4, 0.25)]

    def test_duplicate_degrees_accumulate(self, tmp_path):
        dist = load_histogram(_write(tmp_path, "2,1\n2,3\n"))
        assert dist.support == [(2, 1.0)]

    def test_moments_match_independent_summation(self, tmp_path):
        # oracle: brute-force weighted moments with fsum, no numpy
        rng = np.random.default_rng(7)
        degrees = np.arange(100)
        counts = rng.integers(0, 50, size=100)
        counts[counts.argmax()] += 1  # at least one positive
        text = "\n".join(f"{k},{c}" for k, c in zip(degrees, counts))
        dist = load_histogram(_write(tmp_path, text + "\n"))

        total = math.fsum(float(c) for c in counts)
        mean = math.fsum(float(k) * float(c) for k, c in zip(degrees, counts)) / total
        var = (
            math.fsum(float(c) * (float(k) - mean) ** 2 for k, c in zip(degrees, counts))
            / total
        )
        assert dist.mean() == pytest.approx(mean, abs=1e-9)
        assert dist.std() == pytest.approx(math.sqrt(var), abs=1e-9)

    def test_malformed_row_names_its_line(self, tmp_path):
        path = _write(tmp_path, "degree,count\n1,2\nbad,row\n")
        with pytest.raises(ParseError, match="line 3"):
            load_histogram(path)

    def test_wrong_column_count(self, tmp_path):
        with pytest.raises(ParseError, match="line 2"):
            load_histogram(_write(tmp_path, "1,2\n3,4,5\n"))

    def test_negative_count_rejected(self, tmp_path):
        with pytest.raises(ParseError, match="negative"):
            load_histogram(_write(tmp_path, "1,-2\n"))

    def test_empty_file_rejected(self, tmp_path):
        with pytest.raises(ParseError, match="no data rows"):
            load_histogram(_write(tmp_path, "degree,count\n"))

    def test_all_zero_counts_rejected(self, tmp_path):
        with pytest.raises(ConfigurationError, match="no positive counts"):
            load_histogram(_write(tmp_path, "1,0\n2,0\n"))


class TestDistributionValidation:
    def test_masses_must_sum_to_one(self):
        with pytest.raises(ConfigurationError, match="sum"):
            DegreeDistribution(np.array([1, 2]), np.array([0.5, 0.4]))

    def test_empty_support_rejected(self):
        with pytest.raises(ConfigurationError):
            DegreeDistribution(np.array([], dtype=np.int64), np.array([]))

    def test_negative_degree_rejected(self):
        with pytest.raises(ConfigurationError):
            DegreeDistribution(np.array([-1, 2]), np.array([0.5, 0.5]))

    def test_profile_carries_moments(self):
        dist = DegreeDistribution(np.array([1, 3]), np.array([0.5, 0.5]))
        prof = dist.profile(n=100)
        assert prof == GraphProfile(100, 2.0, 1.0)


class TestGraphProfile:
    def test_degenerate_sigma_allowed(self):
        assert GraphProfile(10, 3.0, 0.0).sigma == 0.0

    def test_mean_degree_must_fit_population(self):
        with pytest.raises(ConfigurationError):
            GraphProfile(10, 10.0, 1.0)

    def test_negative_moments_rejected(self):
        with pytest.raises(ConfigurationError):
            GraphProfile(10, -1.0, 0.0)
        with pytest.raises(ConfigurationError):
            GraphProfile(0, 1.0, 0.0)


class TestLognormalFit:
    def test_facebook_moments_within_contract(self):
        dist = fit_matched_lognormal(FACEBOOK_PROFILE, max_degree=5000)
        assert dist.provenance == PARAMETRIC
        assert abs(dist.mean() - FACEBOOK_PROFILE.d) / FACEBOOK_PROFILE.d < MOMENT_TOL
        assert abs(dist.std() - FACEBOOK_PROFILE.sigma) / FACEBOOK_PROFILE.sigma < MOMENT_TOL
        # solver actually lands much closer than the 0.5% contract
        assert dist.mean() == pytest.approx(FACEBOOK_PROFILE.d, abs=1e-3)
        assert dist.std() == pytest.approx(FACEBOOK_PROFILE.sigma, abs=1e-3)

    def test_masses_normalized_and_supported(self):
        dist = fit_matched_lognormal(FACEBOOK_PROFILE, max_degree=5000)
        assert dist.masses.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(dist.masses > 0)
        assert dist.degrees[-1] <= 5000

    def test_near_degenerate_sigma(self):
        dist = fit_matched_lognormal(GraphProfile(100, 10.0, 0.001), max_degree=50)
        assert dist.mean() == pytest.approx(10.0, rel=MOMENT_TOL)
        assert dist.std() == pytest.approx(0.001, rel=MOMENT_TOL)
        assert dist.masses.max() > 0.999  # nearly a point mass at 10

    def test_heavy_tail_fit(self):
        dist = fit_matched_lognormal(GraphProfile(10_000_000, 5.0, 30.0), max_degree=2000)
        assert dist.mean() == pytest.approx(5.0, rel=MOMENT_TOL)
        assert dist.std() == pytest.approx(30.0, rel=MOMENT_TOL)

    def test_unreachable_sigma_raises(self):
        # support 0..20 cannot produce std 500
        with pytest.raises(FitError, match="unreachable"):
            fit_matched_lognormal(GraphProfile(1000, 10.0, 500.0), max_degree=20)

    def test_max_degree_below_mean_rejected(self):
        with pytest.raises(ConfigurationError):
            fit_matched_lognormal(FACEBOOK_PROFILE, max_degree=100)

    def test_zero_sigma_rejected(self):
        with pytest.raises(ConfigurationError):
            fit_matched_lognormal(GraphProfile(100, 10.0, 0.0), max_degree=50)


class TestSampling:
    def test_point_mass_sequence(self):
        dist = DegreeDistribution(np.array([2]), np.array([1.0]))
        assert sample_degree_sequence(dist, 5, seed=0).tolist() == [2, 2, 2, 2, 2]

    def test_odd_total_repaired(self):
        dist = DegreeDistribution(np.array([3]), np.array([1.0]))
        seq = sample_degree_sequence(dist, 3, seed=0)
        assert seq.tolist() == [3, 3, 4]
        assert seq.sum() % 2 == 0

    def test_sum_always_even(self):
        dist = DegreeDistribution(np.array([1, 3]), np.array([0.5, 0.5]))
        for seed in range(20):
            assert sample_degree_sequence(dist, 11, seed=seed).sum() % 2 == 0

    def test_deterministic_per_seed(self):
        dist = DegreeDistribution(np.array([1, 3]), np.array([0.5, 0.5]))
        a = sample_degree_sequence(dist, 1000, seed=42)
        b = sample_degree_sequence(dist, 1000, seed=42)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, sample_degree_sequence(dist, 1000, seed=43))

    def test_two_point_sample_mean(self):
        dist = DegreeDistribution(np.array([1, 3]), np.array([0.5, 0.5]))
        seq = sample_degree_sequence(dist, 100_000, seed=3)
        # SE of the mean is 1/sqrt(1e5)
        assert abs(seq.mean() - 2.0) < 3.0 / math.sqrt(100_000)

    def test_fit_sample_mean_within_three_se(self):
        """A million draws from the fitted law reproduce the target mean."""
        dist = fit_matched_lognormal(FACEBOOK_PROFILE, max_degree=5000)
        seq = sample_degree_sequence(dist, 1_000_000, seed=9)
        se = FACEBOOK_PROFILE.sigma / math.sqrt(1_000_000)
        assert abs(seq.mean() - FACEBOOK_PROFILE.d) < 3 * se

    def test_empty_population_rejected(self):
        dist = DegreeDistribution(np.array([2]), np.array([1.0]))
        with pytest.raises(ConfigurationError):
            sample_degree_sequence(dist, 0, seed=0)
