"""Algebraic systems: exact measures vs enumeration, kernels, sampling."""

from fractions import Fraction

import numpy as np
import pytest

from mixlab import gf2
from mixlab.algebraic import (
    AlgebraicSystem,
    CylinderConstraint,
    LEDRAPPIER_PATTERN,
    RelationPattern,
    WindowCapError,
    bernoulli_cylinder_measure,
    cylinder_measure,
    default_torus_for,
    grid_from_json,
    grid_from_pbm,
    grid_satisfies_pattern,
    grid_to_json,
    grid_to_pbm,
    homoclinic_decay,
    kernel_dimension_bruteforce,
    ledrappier_system,
    mc_cylinder_measure,
    merge_site_bits,
    relation_space,
    sample_configuration,
    torus_kernel,
    transfer_matrix,
)
from mixlab.rng import substream

from conftest import enumeration_measure, enumeration_relations

SYS = ledrappier_system()
FIVE = ((0, 0), (1, 0), (-1, 0), (0, 1), (0, -1))


class TestCylinderMeasure:
    def test_single_site(self):
        assert cylinder_measure(SYS, CylinderConstraint(((0, 0),), (0,))).exact == Fraction(1, 2)

    def test_five_point_all_zero(self):
        mv = cylinder_measure(SYS, CylinderConstraint(FIVE, (0,) * 5))
        assert mv.exact == Fraction(1, 16)

    def test_five_point_violation(self):
        mv = cylinder_measure(SYS, CylinderConstraint(FIVE, (1, 0, 0, 0, 0)))
        assert mv.exact == 0

    def test_five_point_matches_enumeration(self, ledrappier_support):
        # independent oracle: raw enumeration of window configurations
        sites = list(FIVE)
        for bits in [(0, 0, 0, 0, 0), (1, 0, 0, 0, 0), (1, 1, 0, 0, 0), (0, 1, 1, 0, 0)]:
            expected = enumeration_measure(ledrappier_support, sites, bits)
            got = cylinder_measure(SYS, CylinderConstraint(FIVE, bits)).exact
            assert got == expected

    def test_dyadic_reduction_matches_window(self):
        # scales 2^k for k <= 7 run through the window path; compare against
        # the reduction applied by hand
        for k in range(1, 8):
            s = 1 << k
            sites = ((0, 0), (s, 0), (-s, 0), (0, s), (0, -s))
            mv = cylinder_measure(SYS, CylinderConstraint(sites, (0,) * 5))
            assert mv.exact == Fraction(1, 16)
            assert mv.meta["method"] == "window"

    def test_dyadic_path_beyond_cap(self):
        s = 1 << 8
        sites = ((0, 0), (s, 0), (-s, 0), (0, s), (0, -s))
        mv = cylinder_measure(SYS, CylinderConstraint(sites, (0,) * 5))
        assert mv.exact == Fraction(1, 16)
        assert mv.meta == {"method": "dyadic", "scale": 256}

    def test_window_cap_error_mentions_monte_carlo(self):
        sites = ((0, 0), (600, 0), (0, 601))
        with pytest.raises(WindowCapError, match="Monte Carlo"):
            cylinder_measure(SYS, CylinderConstraint(sites, (0, 0, 0)))

    def test_empty_constraint_has_full_measure(self):
        assert cylinder_measure(SYS, CylinderConstraint((), ())).exact == 1

    def test_shift_invariance(self):
        gen = substream(11, "shift")
        for _ in range(10):
            sites = set()
            while len(sites) < 4:
                sites.add((int(gen.integers(-10, 11)), int(gen.integers(-10, 11))))
            sites = tuple(sorted(sites))
            bits = tuple(int(b) for b in gen.integers(0, 2, size=4))
            base = cylinder_measure(SYS, CylinderConstraint(sites, bits)).exact
            dv = (int(gen.integers(-50, 51)), int(gen.integers(-50, 51)))
            moved = CylinderConstraint(sites, bits).translated(dv)
            assert cylinder_measure(SYS, moved).exact == base

    def test_monotone_under_refinement(self):
        gen = substream(12, "monotone")
        for _ in range(10):
            sites = []
            while len(sites) < 5:
                cand = (int(gen.integers(-8, 9)), int(gen.integers(-8, 9)))
                if cand not in sites:
                    sites.append(cand)
            bits = [int(b) for b in gen.integers(0, 2, size=5)]
            prev = Fraction(1)
            for k in range(1, 6):
                mv = cylinder_measure(SYS, CylinderConstraint(tuple(sites[:k]), tuple(bits[:k])))
                assert mv.exact <= prev
                prev = mv.exact


class TestRelationSpace:
    def test_five_point_single_relation(self, ledrappier_support):
        rels = relation_space(SYS, FIVE)
        assert [v.to_list() for v in rels] == [[1, 1, 1, 1, 1]]
        assert enumeration_relations(ledrappier_support, list(FIVE)) == [0b11111]

    def test_generic_pair_no_relations(self):
        assert relation_space(SYS, [(0, 0), (5, 7)]) == []

    def test_single_site_no_relations(self):
        assert relation_space(SYS, [(0, 0)]) == []

    def test_frobenius_identity_all_scales(self):
        # the defining relation replicates at every dyadic scale
        for k in range(0, 8):
            s = 1 << k
            sites = [(0, 0), (s, 0), (-s, 0), (0, s), (0, -s)]
            rels = relation_space(SYS, sites)
            assert [v.to_list() for v in rels] == [[1, 1, 1, 1, 1]]

    def test_dyadic_reduction_cross_validation(self):
        # reduction and window method agree for scales up to 128
        for k in range(1, 8):
            s = 1 << k
            sites = [(3, 4), (3 + s, 4), (3 - s, 4), (3, 4 + s), (3, 4 - s), (3 + 2 * s, 4)]
            via_window = relation_space(SYS, sites)
            reduced = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1), (2, 0)]
            via_reduction = relation_space(SYS, reduced)
            assert [v.to_list() for v in via_window] == [v.to_list() for v in via_reduction]


class TestTorusKernel:
    @pytest.mark.parametrize("w,h", [(3, 3), (3, 4), (4, 4), (3, 5), (4, 3), (5, 3)])
    def test_dimension_matches_enumeration(self, w, h):
        assert torus_kernel(SYS, w, h).dim == kernel_dimension_bruteforce(SYS, w, h)

    def test_zero_configuration_always_present(self):
        k = torus_kernel(SYS, 6, 9)
        # The zero combination is in the span by construction; basis elements
        # must each satisfy the wrapped relations.
        for vec in k.basis:
            n = k.width * k.height
            raw = vec.bits.to_bytes((n + 7) // 8, "little")
            grid = np.unpackbits(np.frombuffer(raw, dtype=np.uint8),
                                 bitorder="little")[:n].reshape(k.height, k.width)
            assert grid_satisfies_pattern(SYS.pattern, grid)

    def test_transfer_matrix_size(self):
        t = transfer_matrix(LEDRAPPIER_PATTERN, 7)
        assert t.rows == t.cols == 14

    def test_small_dimensions_rejected(self):
        with pytest.raises(ValueError):
            torus_kernel(SYS, 2, 5)


class TestSampling:
    def test_trivial_kernel_samples_zero_grid(self):
        k = torus_kernel(SYS, 4, 4)  # power-of-two torus: kernel is trivial
        assert k.dim == 0
        assert not sample_configuration(k, 9).any()

    def test_determinism(self):
        k = torus_kernel(SYS, 12, 12)
        a = sample_configuration(k, 1234)
        b = sample_configuration(k, 1234)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, sample_configuration(k, 1235))

    def test_samples_satisfy_relations(self):
        k = torus_kernel(SYS, 12, 12)
        for seed in range(5):
            assert grid_satisfies_pattern(SYS.pattern, sample_configuration(k, seed))


class TestMonteCarlo:
    def test_single_site_estimate(self):
        k = torus_kernel(SYS, 12, 12)
        mv = mc_cylinder_measure(k, CylinderConstraint(((0, 0),), (0,)), 100000, 5)
        assert abs(mv.estimate - 0.5) <= 4 * mv.stderr

    def test_five_point_estimate(self):
        c = CylinderConstraint(FIVE, (0,) * 5)
        k = default_torus_for(SYS, c)
        mv = mc_cylinder_measure(k, c, 100000, 6)
        assert abs(mv.estimate - 1 / 16) <= 4 * mv.stderr

    def test_contradiction_is_exactly_zero(self):
        c = CylinderConstraint(FIVE, (1, 0, 0, 0, 0))
        k = default_torus_for(SYS, CylinderConstraint(FIVE, (0,) * 5))
        assert mc_cylinder_measure(k, c, 20000, 7).estimate == 0.0

    def test_window_and_mc_agree_on_random_constellations(self):
        gen = substream(999, "consistency")
        kernel = None
        for trial in range(20):
            n_sites = int(gen.integers(2, 6))
            sites = set()
            while len(sites) < n_sites:
                sites.add((int(gen.integers(0, 33)), int(gen.integers(0, 33))))
            c = CylinderConstraint(tuple(sorted(sites)),
                                   tuple(int(b) for b in gen.integers(0, 2, size=n_sites)))
            exact = cylinder_measure(SYS, c).exact
            if kernel is None:
                kernel = default_torus_for(SYS, CylinderConstraint(
                    ((0, 0), (32, 0), (0, 32)), (0, 0, 0)))
            est = mc_cylinder_measure(kernel, c, 20000, 100 + trial)
            assert abs(est.estimate - float(exact)) <= 4 * est.stderr + 1e-9


class TestBernoulli:
    def test_single_site(self):
        assert bernoulli_cylinder_measure(CylinderConstraint((0,), (0,))).exact == Fraction(1, 2)

    def test_three_distinct_sites(self):
        c = CylinderConstraint((0, 5, 9), (0, 1, 0))
        assert bernoulli_cylinder_measure(c).exact == Fraction(1, 8)

    def test_conflicting_bits_zero(self):
        assert bernoulli_cylinder_measure([(3, 0), (3, 1)]).exact == 0

    def test_duplicate_consistent_bits_merge(self):
        assert bernoulli_cylinder_measure([(3, 1), (3, 1), (7, 0)]).exact == Fraction(1, 4)


class TestHomoclinic:
    def _direct(self, sites, bits, flip, n):
        # enumerate bits on the union of B's sites and the conjugated flip
        moved = flip - n
        window = sorted(set(sites) | {moved})
        total = 0
        hits = 0
        for cfg in range(1 << len(window)):
            val = {s: (cfg >> i) & 1 for i, s in enumerate(window)}
            in_b = all(val[s] == b for s, b in zip(sites, bits))
            flipped = dict(val)
            flipped[moved] ^= 1
            in_b_flip = all(flipped[s] == b for s, b in zip(sites, bits))
            total += 1
            if in_b != in_b_flip:
                hits += 1
        return Fraction(hits, total)

    def test_flip_complements_event(self):
        b = CylinderConstraint((0,), (0,))
        assert homoclinic_decay(b, 0, 0).exact == 1

    def test_decay_after_one_step(self):
        b = CylinderConstraint((0,), (0,))
        for n in range(1, 6):
            assert homoclinic_decay(b, 0, n).exact == 0

    def test_window_event_decay(self):
        b = CylinderConstraint((0, 1, 2), (0, 1, 0))
        assert homoclinic_decay(b, 0, 5).exact == 0

    def test_matches_direct_set_calculus(self):
        gen = substream(77, "homoclinic")
        for _ in range(20):
            k = int(gen.integers(1, 5))
            sites = tuple(sorted(int(s) for s in gen.choice(20, size=k, replace=False)))
            bits = tuple(int(b) for b in gen.integers(0, 2, size=k))
            flip = int(gen.integers(-3, 10))
            n = int(gen.integers(0, 8))
            got = homoclinic_decay(CylinderConstraint(sites, bits), flip, n).exact
            assert got == self._direct(sites, bits, flip, n)


class TestGridIO:
    def test_json_roundtrip(self):
        k = torus_kernel(SYS, 9, 12)
        grid = sample_configuration(k, 3)
        assert np.array_equal(grid_from_json(grid_to_json(grid)), grid)

    def test_pbm_roundtrip_and_color_convention(self):
        k = torus_kernel(SYS, 9, 9)
        grid = sample_configuration(k, 4)
        pbm = grid_to_pbm(grid)
        # bit 0 renders dark: PBM black pixel (1) at zero bits
        first_row = pbm.splitlines()[3].split()
        assert first_row[0] == ("1" if grid[0, 0] == 0 else "0")
        assert np.array_equal(grid_from_pbm(pbm), grid)


class TestValidation:
    def test_distinct_sites_required(self):
        with pytest.raises(ValueError):
            CylinderConstraint(((0, 0), (0, 0)), (0, 1))

    def test_bit_values_checked(self):
        with pytest.raises(ValueError):
            CylinderConstraint(((0, 0),), (2,))

    def test_merge_detects_contradiction(self):
        assert merge_site_bits([((0, 0), 0), ((0, 0), 1)]) is None

    def test_pattern_needs_support(self):
        with pytest.raises(ValueError):
            RelationPattern(frozenset())
