"""Exact formulas, Monte Carlo estimation, and report tables."""

import itertools
from fractions import Fraction

import numpy as np
import pytest

from blockembed.errors import ConfigError, PreconditionError
from blockembed.fields import Y0Class, classify_y0_block
from blockembed.hierarchy import Block, Component, LatticeBlock, build_level0
from blockembed.lattice import LatticeAnimal, Rect
from blockembed.params import named_profile
from blockembed.stats import (
    ProbabilityEstimate,
    class_probabilities,
    clopper_pearson,
    estimate_S,
    exact_S0,
    good_prob_report,
    size_report,
    tail_report,
)


def _bad_component(cells):
    blocks = tuple(
        Block(0, LatticeBlock(0, LatticeAnimal(frozenset([c]))),
              frozenset([c]), frozenset([c]), good=False)
        for c in sorted(cells)
    )
    return Component(0, LatticeAnimal(frozenset(cells)), blocks, "really-bad",
                     (len(cells), len(cells)))


class _ClassContent:
    """Fixed class content for fabricated target-side components."""

    def __init__(self, mapping, default=Y0Class.ONE):
        self.mapping = mapping
        self.default = default

    def class_at(self, cell):
        return self.mapping.get(cell, self.default)


class _BitContent:
    def __init__(self, bit):
        self.bit = bit

    def bit_at(self, cell):
        return self.bit


class TestClassProbabilities:
    def test_sum_to_one(self):
        for m0 in (2, 3, 6):
            cp = class_probabilities(m0)
            assert cp.good + cp.zero + cp.one == 1

    def test_full_enumeration_m0_2(self):
        # Independent oracle: enumerate all 2^4 blocks.
        p = named_profile("toy-m0-2")
        counts = {Y0Class.GOOD: 0, Y0Class.ZERO: 0, Y0Class.ONE: 0}
        for bits in itertools.product((0, 1), repeat=4):
            counts[classify_y0_block(np.array(bits), p)] += 1
        cp = class_probabilities(2)
        assert cp.good == Fraction(counts[Y0Class.GOOD], 16)
        assert cp.zero == Fraction(counts[Y0Class.ZERO], 16)
        assert cp.one == Fraction(counts[Y0Class.ONE], 16)

    def test_accepts_bit_frozen_values(self):
        # Frozen from full enumeration of all target blocks.
        assert class_probabilities(2).accepts_bit(0) == Fraction(11, 16)
        assert class_probabilities(3).accepts_bit(0) == Fraction(233, 256)

    def test_symmetry(self):
        cp = class_probabilities(3)
        assert cp.zero == cp.one
        assert cp.accepts_bit(0) == cp.accepts_bit(1)


class TestExactS0:
    def test_good_component_is_one(self, toy1):
        block = Block(0, LatticeBlock(0, LatticeAnimal(frozenset([(0, 0)]))),
                      frozenset([(0, 0)]), frozenset([(0, 0)]), good=True)
        comp = Component(0, block.animal, (block,), "good-singleton", (0, 0))
        assert exact_S0(comp, "Y", toy1) == 1

    def test_bad_component_2_pow_v(self, toy1):
        for v in (1, 2, 3):
            comp = _bad_component([(i, 0) for i in range(v)])
            assert exact_S0(comp, "Y", toy1) == Fraction(1, 2**v)

    def test_source_singleton(self):
        p = named_profile("toy-m0-2")
        comp = _bad_component([(0, 0)])
        assert exact_S0(comp, "X", p, structure=_BitContent(0)) == Fraction(11, 16)

    def test_source_product_over_cells(self):
        p = named_profile("toy-m0-2")
        comp = _bad_component([(0, 0), (1, 0)])
        got = exact_S0(comp, "X", p, structure=_BitContent(1))
        assert got == Fraction(11, 16) ** 2

    def test_level_restriction(self, toy1):
        comp = _bad_component([(0, 0)])
        object.__setattr__(comp, "level", 1)
        with pytest.raises(ConfigError):
            exact_S0(comp, "Y", toy1)


class TestEstimateS:
    def test_zero_trials_rejected(self, toy1):
        comp = _bad_component([(0, 0)])
        with pytest.raises(PreconditionError):
            estimate_S(comp, 0, 0, 1, toy1)

    def test_deterministic(self, toy1):
        comp = _bad_component([(0, 0)])
        content = _ClassContent({})
        a = estimate_S(comp, 0, 5000, 42, toy1, family="Y", structure=content)
        b = estimate_S(comp, 0, 5000, 42, toy1, family="Y", structure=content)
        assert a == b

    def test_matches_exact_within_3_sigma(self, toy1):
        for v, seed in ((1, 5), (2, 6), (3, 7)):
            comp = _bad_component([(i, 0) for i in range(v)])
            est = estimate_S(comp, 0, 20000, seed, toy1, family="Y",
                             structure=_ClassContent({}))
            exact = float(exact_S0(comp, "Y", toy1))
            sigma = (exact * (1 - exact) / 20000) ** 0.5
            assert abs(est.point - exact) <= 3 * sigma

    def test_source_side_matches_exact(self):
        p = named_profile("toy-m0-2")
        comp = _bad_component([(0, 0)])
        est = estimate_S(comp, 0, 20000, 9, p, family="X", structure=_BitContent(0))
        exact = float(Fraction(11, 16))
        sigma = (exact * (1 - exact) / 20000) ** 0.5
        assert abs(est.point - exact) <= 3 * sigma

    def test_random_components_both_families(self):
        # Exact vs estimated agreement on components taken from real builds.
        toy1 = named_profile("toy-m0-3")
        s = build_level0(toy1, "Y", 31, Rect(0, 0, 30, 30))
        checked = 0
        for comp in s.bad_components:
            if comp.censored:
                continue
            est = estimate_S(comp, 0, 20000, 100 + checked, toy1,
                             family="Y", structure=s)
            exact = float(exact_S0(comp, "Y", toy1))
            sigma = max((exact * (1 - exact) / 20000) ** 0.5, 1e-9)
            assert abs(est.point - exact) <= 3 * sigma
            checked += 1
            if checked == 20:
                break
        assert checked >= 5

    def test_good_component_estimates_one(self, toy1):
        block = Block(0, LatticeBlock(0, LatticeAnimal(frozenset([(0, 0)]))),
                      frozenset([(0, 0)]), frozenset([(0, 0)]), good=True)
        comp = Component(0, block.animal, (block,), "good-singleton", (0, 0))
        est = estimate_S(comp, 0, 1000, 3, toy1, family="Y",
                         structure=_ClassContent({(0, 0): Y0Class.GOOD}))
        assert est.point == 1.0


class TestIntervals:
    def test_degenerate_ends(self):
        lo, hi = clopper_pearson(0, 100)
        assert lo == 0.0 and hi < 0.05
        lo, hi = clopper_pearson(100, 100)
        assert lo > 0.95 and hi == 1.0

    def test_contains_point(self):
        est = ProbabilityEstimate.from_counts(37, 100, 0)
        assert est.ci_low <= est.point <= est.ci_high

    def test_invalid_counts(self):
        with pytest.raises(ConfigError):
            clopper_pearson(5, 3)

    def test_calibration(self):
        # Coverage of the 95% interval on synthetic Bernoulli streams.
        rng = np.random.default_rng(7)
        for p in (0.1, 0.5, 0.9):
            covered = 0
            for _ in range(100):
                k = int(rng.binomial(400, p))
                lo, hi = clopper_pearson(k, 400)
                covered += lo <= p <= hi
            assert covered >= 90


class TestReports:
    def test_tail_monotone(self, toy1):
        rng = np.random.default_rng(1)
        samples = [(float(rng.random()), int(rng.integers(1, 5))) for _ in range(200)]
        rep = tail_report(samples, toy1, 0)
        by_v = {}
        for level, x, v, n, emp, bound, ratio in rep.rows:
            by_v.setdefault(v, []).append((x, emp))
        for v, col in by_v.items():
            xs = [x for x, _ in col]
            emps = [e for _, e in col]
            assert xs == sorted(xs)
            assert emps == sorted(emps)  # CDF monotone in x
        # Anti-monotone in v at fixed x.
        for x in {r[1] for r in rep.rows}:
            col = [r[4] for r in rep.rows if r[1] == x]
            assert col == sorted(col, reverse=True)

    def test_tail_bound_formula(self, toy1):
        L = toy1.scale(0)
        x = 1.0 - 1.0 / L
        rep = tail_report([(0.5, 1)], toy1, 0, x_grid=[x])
        row = rep.rows[0]
        assert row[5] == pytest.approx(x ** toy1.m_exponent(0) * L ** (-toy1.beta))

    def test_tail_recount(self, toy1):
        samples = [(0.5, 1), (0.5, 1), (1.0, 1), (0.25, 2)]
        rep = tail_report(samples, toy1, 0, x_grid=[0.5])
        row_v1 = next(r for r in rep.rows if r[2] == 1)
        assert row_v1[4] == 3 / 4  # P(S <= 1/2, V >= 1)

    def test_size_report(self, toy1):
        rep = size_report([1, 1, 2, 3], toy1, 0)
        assert rep.rows[0][3] == 1.0  # P(V >= 1) = 1
        emps = [r[3] for r in rep.rows]
        assert emps == sorted(emps, reverse=True)

    def test_good_prob_report(self, toy1):
        rep = good_prob_report({0: [True] * 90 + [False] * 10}, toy1)
        row = rep.rows[0]
        assert row[2] == 0.9
        assert row[3] <= 0.9 <= row[4]

    def test_reports_byte_identical(self, toy1):
        samples = [(0.5, 1), (0.25, 2)]
        a = tail_report(samples, toy1, 0)
        b = tail_report(samples, toy1, 0)
        assert a.to_csv() == b.to_csv()
        assert a.to_records() == b.to_records()

    def test_empty_samples_rejected(self, toy1):
        with pytest.raises(PreconditionError):
            tail_report([], toy1, 0)
        with pytest.raises(PreconditionError):
            size_report([], toy1, 0)
