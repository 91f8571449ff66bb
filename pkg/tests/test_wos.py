#!/usr/bin/env python3

import math
import os
import unittest
from dataclasses import replace

import numpy as np

import sys
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src import console
from src.errors import (
    ContextMismatch, InvalidParameter, PointOutsideDomain, TooManyTimeouts,
)
from src.geometry import build_koebe, build_unit_disk, build_unit_disk_slit, with_escape_circle
from src.oracles import koebe_omega_hat, slit_disk_escape
from src.wos import (
    DecompositionTally, HitClass, TallyEstimate, WosConfig, _classify,
    estimate_decomposition, estimate_omega, estimate_omega_hat, exit_points, merge,
    mix64, sample_exit, stream_keys, uniform_draws,
)


class QuietTestCase(unittest.TestCase):

    def setUp(self):
        console.set_quiet(True)

    def tearDown(self):
        console.set_quiet(False)


class TestWosConfig(unittest.TestCase):

    def test_defaults(self):
        """Test the WosConfig defaults."""
        config = WosConfig()
        self.assertEqual(config.eps, 1e-4)
        self.assertEqual(config.samples, 100000)
        self.assertEqual(config.batch, 4096)

    def test_batch_is_clamped_to_samples(self):
        """Test that batch never exceeds samples."""
        self.assertEqual(WosConfig(samples=10).batch, 10)

    def test_rejects_bad_values(self):
        """Test that invalid WosConfig values are rejected."""
        bad = [
            {"eps": 0.0}, {"eps": math.nan}, {"samples": 0}, {"batch": -1},
            {"max_steps": 2.5}, {"workers": True}, {"seed": 1 << 64},
        ]
        for kwargs in bad:
            with self.assertRaises(InvalidParameter):
                WosConfig(**kwargs)


class TestRandomStreams(unittest.TestCase):

    def test_splitmix_reference_value(self):
        """Test mix64 against the SplitMix64 reference output."""
        # first output of SplitMix64 seeded with 0
        self.assertEqual(int(mix64(np.zeros(1, dtype=np.uint64))[0]), 0xE220A8397B1DCDAF)

    def test_draws_are_reproducible_and_in_range(self):
        """Test that draws repeat for the same counters and lie in [0, 1)."""
        keys = stream_keys(42, np.arange(1000, dtype=np.uint64))
        first = uniform_draws(keys, np.zeros(1000, dtype=np.uint64))
        again = uniform_draws(stream_keys(42, np.arange(1000, dtype=np.uint64)), np.zeros(1000, dtype=np.uint64))
        np.testing.assert_array_equal(first, again)
        self.assertTrue(np.all((first >= 0) & (first < 1)))

    def test_streams_differ(self):
        """Test that distinct walk indices get distinct streams."""
        keys = stream_keys(0, np.arange(10000, dtype=np.uint64))
        self.assertEqual(np.unique(keys).size, 10000)
        self.assertFalse(np.array_equal(stream_keys(0, np.arange(5, dtype=np.uint64)),
                                        stream_keys(1, np.arange(5, dtype=np.uint64))))

    def test_draws_look_uniform(self):
        """Test that draws fill the unit interval evenly."""
        keys = stream_keys(7, np.arange(100000, dtype=np.uint64))
        draws = uniform_draws(keys, np.full(100000, 3, dtype=np.uint64))
        self.assertAlmostEqual(float(np.mean(draws)), 0.5, delta=0.01)
        counts, _ = np.histogram(draws, bins=10, range=(0, 1))
        self.assertTrue(np.all(np.abs(counts - 10000) < 600))


class TestTallies(unittest.TestCase):

    def test_estimate_properties(self):
        """Test p_hat and stderr of a tally."""
        tally = TallyEstimate(hits=30, samples=100, ambiguous=5, timeouts=5)
        self.assertEqual(tally.effective, 90)
        self.assertEqual(tally.misses, 60)
        self.assertAlmostEqual(tally.p_hat, 1 / 3, places=12)
        self.assertAlmostEqual(tally.stderr, math.sqrt((1 / 3) * (2 / 3) / 90), places=12)
        self.assertAlmostEqual(tally.ambiguous_frac, 0.05, places=12)
        self.assertAlmostEqual(tally.timeout_frac, 0.05, places=12)

    def test_empty_tally(self):
        """Test that a zero-sample tally is rejected."""
        tally = TallyEstimate(hits=0, samples=4, ambiguous=4)
        self.assertEqual(tally.p_hat, 0.0)
        self.assertEqual(tally.stderr, 0.0)

    def test_inconsistent_counts(self):
        """Test that negative counts or counts above the sample size are rejected."""
        with self.assertRaises(InvalidParameter):
            TallyEstimate(hits=11, samples=10)
        with self.assertRaises(InvalidParameter):
            TallyEstimate(hits=-1, samples=10)

    def test_merge(self):
        """Test that merge adds counts and keeps the smallest seed."""
        a = TallyEstimate(hits=3, samples=10, ambiguous=1, steps=40, seed=5, domain="disk", R=0.5)
        b = TallyEstimate(hits=4, samples=20, timeouts=2, steps=70, seed=2, domain="disk", R=0.5)
        merged = merge([a, b])
        self.assertEqual((merged.hits, merged.samples, merged.ambiguous, merged.timeouts), (7, 30, 1, 2))
        self.assertEqual(merged.steps, 110)
        self.assertEqual(merged.seed, 2)
        self.assertEqual(merge([a]), a)
        self.assertEqual(merge([a, b]).hits, merge([b, a]).hits)

    def test_merge_rejects_mixed_contexts(self):
        """Test that merge refuses tallies from different contexts."""
        a = TallyEstimate(hits=3, samples=10, domain="disk", R=0.5)
        for other in (replace(a, eps=1e-3), replace(a, domain="koebe"), replace(a, R=0.6)):
            with self.assertRaises(ContextMismatch):
                merge([a, other])
        with self.assertRaises(InvalidParameter):
            merge([])

    def test_decomposition_views(self):
        """Test the omega, omega_hat and conditional views of a decomposition."""
        tally = DecompositionTally(escaped_far=20, escaped_near=10, near_first=65,
                                   ambiguous=3, timeouts=2, samples=100)
        self.assertEqual(tally.escaped, 30)
        self.assertEqual(tally.omega_hat().hits, 30)
        self.assertEqual(tally.omega_hat().effective, 95)
        self.assertEqual(tally.omega().hits, 20)
        given = tally.near_given_escape()
        self.assertEqual((given.hits, given.samples), (10, 30))


class TestClassification(unittest.TestCase):

    def test_close_pieces_of_different_classes_are_ambiguous(self):
        """Test that a hit near two pieces of different classes is ambiguous."""
        domain = with_escape_circle(build_unit_disk_slit(0.5), 0.5)
        points = np.array([0.5 - 1e-6 + 0j])
        classes = _classify(domain, points, domain.distance_matrix(points), 0.5, 5e-5)
        self.assertEqual(classes[0], HitClass.AMBIGUOUS)

    def test_escape_circle_hit(self):
        """Test that a hit on the escape circle is an escape."""
        domain = with_escape_circle(build_unit_disk(), 0.5)
        points = np.array([0.5 - 1e-6 + 0j])
        classes = _classify(domain, points, domain.distance_matrix(points), 0.5, 5e-5)
        self.assertEqual(classes[0], HitClass.ESCAPE)

    def test_far_and_near_feet(self):
        """Test that feet beyond R are far and the rest near."""
        domain = build_unit_disk_slit(0.5)
        points = np.array([0.6 + 1e-6j, 0.9 + 1e-6j, -1 + 1e-6 + 0j])
        classes = _classify(domain, points, domain.distance_matrix(points), 0.75, 5e-5)
        self.assertEqual(list(classes), [HitClass.NEAR, HitClass.FAR, HitClass.FAR])

    def test_no_radius_means_far(self):
        """Test that every hit is far when no radius is given."""
        domain = build_unit_disk_slit(0.5)
        points = np.array([0.6 + 1e-6j])
        classes = _classify(domain, points, domain.distance_matrix(points), None, 5e-5)
        self.assertEqual(classes[0], HitClass.FAR)


class TestSingleWalks(QuietTestCase):

    def test_disk_walk_ends_on_the_circle_in_one_jump(self):
        """Test that a walk from the disk's center exits in one jump."""
        cls, steps = sample_exit(build_unit_disk(), 0, None, WosConfig(samples=1), 0)
        self.assertEqual((cls, steps), (HitClass.FAR, 1))

    def test_escape_in_one_jump(self):
        """Test that a walk from the center reaches a small escape circle in one jump."""
        domain = with_escape_circle(build_unit_disk(), 0.5)
        cls, steps = sample_exit(domain, 0, 0.5, WosConfig(samples=1), 12)
        self.assertEqual((cls, steps), (HitClass.ESCAPE, 1))

    def test_sample_exit_matches_the_batch_run(self):
        """Test that sample_exit reproduces the batched walk."""
        domain = with_escape_circle(build_unit_disk_slit(0.5), 0.75)
        config = WosConfig(samples=40, batch=16)
        classes, _ = exit_points(domain, None, 0.75, config)
        for index in (0, 17, 39):
            self.assertEqual(sample_exit(domain, None, 0.75, config, index)[0], classes[index])

    def test_start_outside(self):
        """Test that a start outside the domain is rejected."""
        with self.assertRaises(PointOutsideDomain):
            sample_exit(build_unit_disk_slit(0.5), 0.75, None, WosConfig(samples=1), 0)
        domain = with_escape_circle(build_unit_disk(), 0.5)
        with self.assertRaises(PointOutsideDomain):
            sample_exit(domain, 0.6, 0.5, WosConfig(samples=1), 0)


class TestEstimators(QuietTestCase):

    def setUp(self):
        super().setUp()
        self.config = WosConfig(samples=400, batch=100, seed=3)

    def test_certain_outcomes(self):
        """Test estimates whose outcome is certain."""
        self.assertEqual(estimate_omega_hat(build_unit_disk(), 0.5, self.config).p_hat, 1.0)
        self.assertEqual(estimate_omega_hat(build_koebe(), 0.1, self.config).p_hat, 1.0)
        self.assertEqual(estimate_omega(build_unit_disk(), 2.0, self.config).p_hat, 0.0)
        self.assertEqual(estimate_omega(build_unit_disk(), 1.0, self.config).p_hat, 1.0)

    def test_tally_echoes_its_context(self):
        """Test that a tally records its domain, R, eps and seed."""
        tally = estimate_omega_hat(build_unit_disk(), 0.5, self.config)
        self.assertEqual((tally.samples, tally.seed, tally.eps, tally.domain, tally.R),
                         (400, 3, 1e-4, "disk", 0.5))
        self.assertEqual(tally.steps, 400)

    def test_results_do_not_depend_on_batching(self):
        """Test that the batch size leaves results unchanged."""
        domain = build_unit_disk_slit(0.5)
        base = estimate_omega_hat(domain, 0.75, self.config)
        self.assertEqual(estimate_omega_hat(domain, 0.75, replace(self.config, batch=1000)), base)
        self.assertEqual(estimate_omega_hat(domain, 0.75, replace(self.config, batch=37)), base)

    def test_results_do_not_depend_on_workers(self):
        """Test that the worker count leaves results unchanged."""
        domain = build_unit_disk_slit(0.5)
        serial = estimate_omega(domain, 0.75, self.config)
        parallel = estimate_omega(domain, 0.75, replace(self.config, workers=2))
        self.assertEqual(serial, parallel)

    def test_seed_changes_the_draws(self):
        """Test that a different seed gives different walks."""
        domain = build_unit_disk_slit(0.5)
        a = estimate_omega(domain, 0.75, self.config)
        b = estimate_omega(domain, 0.75, replace(self.config, seed=4))
        self.assertNotEqual(a.steps, b.steps)

    def test_slit_disk_against_closed_form(self):
        """Test the slit-disk estimate against its closed form."""
        config = WosConfig(samples=4000, seed=11)
        domain = replace(build_unit_disk_slit(0.5), basepoint=-0.25 + 0j)
        tally = estimate_omega(domain, 1.0, config, start=-0.25)
        exact = slit_disk_escape(0.5, 0.25)
        self.assertLess(abs(tally.p_hat - exact), 4 * tally.stderr + 5 * config.eps)

    def test_koebe_against_closed_form(self):
        """Test the Koebe estimates against their closed forms."""
        config = WosConfig(samples=4000, seed=5)
        tally = estimate_omega_hat(build_koebe(), 1.0, config)
        self.assertLess(abs(tally.p_hat - koebe_omega_hat(1.0)), 4 * tally.stderr + 5 * config.eps)

    def test_rejects_bad_radius_and_domain(self):
        """Test that bad radii and pre-escaped domains are rejected."""
        for R in (0.0, -1.0, math.inf, None):
            with self.assertRaises(InvalidParameter):
                estimate_omega(build_unit_disk(), R, self.config)
        with self.assertRaises(InvalidParameter):
            estimate_omega(with_escape_circle(build_unit_disk(), 0.5), 0.7, self.config)

    def test_step_cap(self):
        """Test that hitting the step cap raises TooManyTimeouts."""
        config = WosConfig(samples=100, max_steps=1)
        with self.assertRaises(TooManyTimeouts):
            estimate_omega_hat(build_unit_disk_slit(0.5), 0.75, config)


class TestExitPoints(QuietTestCase):

    def test_points_lie_in_the_absorbing_shell(self):
        """Test that exit points lie within the absorbing shell."""
        config = WosConfig(samples=300, batch=64, seed=9)
        classes, points = exit_points(build_unit_disk(), 0.3j, None, config)
        self.assertEqual(classes.shape, (300,))
        self.assertTrue(np.all(classes == HitClass.FAR))
        self.assertTrue(np.all(np.abs(1 - np.abs(points)) < config.eps))


class TestDecomposition(QuietTestCase):

    def setUp(self):
        super().setUp()
        self.domain = build_unit_disk_slit(0.5)
        self.config = WosConfig(samples=2000, batch=500, seed=21)

    def test_counts_partition_the_samples(self):
        """Test that the decomposition counts add up to the sample size."""
        tally = estimate_decomposition(self.domain, 0.75, self.config)
        total = tally.escaped + tally.near_first + tally.ambiguous + tally.timeouts
        self.assertEqual(total, self.config.samples)
        self.assertLessEqual(tally.omega().p_hat, tally.omega_hat().p_hat)

    def test_escapes_match_the_omega_hat_run(self):
        """Test that decomposition escapes agree with a direct omega_hat run."""
        tally = estimate_decomposition(self.domain, 0.75, self.config)
        direct = estimate_omega_hat(self.domain, 0.75, self.config)
        # walks that escaped and then ended ambiguous or timed out leave the split counts
        self.assertLessEqual(tally.escaped, direct.hits)
        self.assertLessEqual(direct.hits - tally.escaped, tally.ambiguous + tally.timeouts)

    def test_rejects_escaped_domain(self):
        """Test that a domain with an escape circle is rejected."""
        with self.assertRaises(InvalidParameter):
            estimate_decomposition(with_escape_circle(self.domain, 0.75), 0.8, self.config)


if __name__ == '__main__':
    unittest.main()
