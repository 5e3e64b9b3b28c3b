"""Joining tensors and the Markov operator calculus."""

import itertools
from fractions import Fraction

import pytest

from mixlab.algebraic import CylinderConstraint, LedrappierOracle
from mixlab.correlations import dyadic_family
from mixlab.joinings import (
    ChainReport,
    Classification,
    FinitePermutationSystem,
    JoiningDiagnosticError,
    JoiningError,
    JoiningTensor,
    MarkovOperator,
    NonStabilizingError,
    Partition,
    adjoint_maps_mean_zero,
    averaging_operator,
    chain_check,
    classify,
    compose_P3,
    compose_P5,
    diagonal_tensor,
    group_sum_tensor,
    intertwining_residual,
    limit_joining,
    lower_order,
    markov_from_joining,
    marginal,
    mean_zero_restricted_norm,
    pair_compose,
    parity_tensor,
    product_tensor,
    raise_order,
    uniform_partition,
)
from mixlab.measure import MeasureValue
from mixlab.rng import substream

U2 = uniform_partition(2)
SIGN = [Fraction(1), Fraction(-1)]  # mean-zero witness under uniform masses


def _tensor_indices(d, order):
    return itertools.product(range(d), repeat=order)


def _indicator(d, cell):
    return [Fraction(1) if i == cell else Fraction(0) for i in range(d)]


def _tensor_indicator(d, cells):
    out = []
    for idx in _tensor_indices(d, len(cells)):
        out.append(Fraction(1) if idx == tuple(cells) else Fraction(0))
    return out


class TestTensors:
    def test_parity_entries(self):
        t = parity_tensor(5)
        assert t.entry((0, 0, 0, 0, 0)) == Fraction(1, 16)
        assert t.entry((1, 0, 0, 0, 0)) == 0
        assert sum(t.entries) == 1

    def test_invariants_enforced(self):
        # marginals off: all mass on the first row
        with pytest.raises(JoiningError):
            JoiningTensor(2, 2, U2.weights, (Fraction(1, 2), Fraction(1, 2),
                                             Fraction(0), Fraction(0)))
        # negative entry
        with pytest.raises(JoiningError):
            JoiningTensor(2, 2, U2.weights, (Fraction(3, 4), Fraction(-1, 4),
                                             Fraction(-1, 4), Fraction(3, 4)))
        # wrong mass
        with pytest.raises(JoiningError):
            JoiningTensor(2, 2, U2.weights, (Fraction(1, 4),) * 3 + (Fraction(1, 2),))

    def test_partition_validation(self):
        with pytest.raises(ValueError):
            Partition((Fraction(1, 2), Fraction(1, 3)))
        with pytest.raises(ValueError):
            Partition((Fraction(3, 2), Fraction(-1, 2)))


class TestMarginal:
    def test_parity_four_axis_marginal_uniform(self):
        t = parity_tensor(5)
        for axes in itertools.combinations(range(5), 4):
            sub = marginal(t, axes)
            assert set(sub.entries) == {Fraction(1, 16)}

    def test_product_marginal_is_product(self):
        part = Partition((Fraction(1, 4), Fraction(3, 4)))
        t = product_tensor(part, 4)
        sub = marginal(t, (0, 2))
        assert sub.entries == product_tensor(part, 2).entries

    def test_single_axis_returns_weights(self):
        t = parity_tensor(3)
        assert marginal(t, (1,)) == [Fraction(1, 2), Fraction(1, 2)]

    def test_axes_validation(self):
        t = parity_tensor(3)
        with pytest.raises(ValueError):
            marginal(t, ())
        with pytest.raises(ValueError):
            marginal(t, (0, 1, 2))


class TestClassify:
    def test_parity5_is_m45(self):
        cls = classify(parity_tensor(5))
        assert not cls.is_product
        assert cls.label == "M(4,5)"

    def test_product_detected(self):
        gen = substream(31, "classify")
        for _ in range(5):
            raw = [int(x) for x in gen.integers(1, 9, size=3)]
            total = sum(raw)
            part = Partition(tuple(Fraction(r, total) for r in raw))
            assert classify(product_tensor(part, 3)).is_product

    def test_perturbed_pairwise_independent_detected(self):
        # product tensor plus a parity-signed perturbation: 2-marginals stay
        # product, the tensor does not
        d = 2
        eps = Fraction(1, 16)
        entries = []
        for idx in _tensor_indices(d, 3):
            sign = 1 if sum(idx) % 2 == 0 else -1
            entries.append(Fraction(1, 8) + sign * eps)
        t = JoiningTensor(3, 2, U2.weights, tuple(entries))
        cls = classify(t)
        assert not cls.is_product
        assert cls.label == "M(2,3)"


class TestMarkovFromJoining:
    def test_product_gives_averaging(self):
        part = Partition((Fraction(1, 3), Fraction(2, 3)))
        p = markov_from_joining(product_tensor(part, 3))
        assert p.matrix == averaging_operator(part, 2).matrix

    def test_parity_nonzero_on_mean_zero(self):
        p2 = markov_from_joining(parity_tensor(3))
        # sign x sign tensor function
        f = [SIGN[a] * SIGN[b] for a, b in _tensor_indices(2, 2)]
        img = p2.apply(f)
        assert img == SIGN  # the parity pairing sends sign x sign to sign

    def test_diagonal_acts_as_conditional_expectation(self):
        part = Partition((Fraction(1, 4), Fraction(3, 4)))
        p = markov_from_joining(diagonal_tensor(part, 2))
        f = [Fraction(5), Fraction(-2)]
        assert p.apply(f) == f  # P(f x 1) = f on the cell algebra

    def test_mean_zero_adjoint_inclusion(self):
        # holds exactly for tensors with product 2-marginals
        assert adjoint_maps_mean_zero(markov_from_joining(parity_tensor(3)))
        assert adjoint_maps_mean_zero(markov_from_joining(product_tensor(U2, 3)))
        mix_entries = tuple(
            Fraction(1, 2) * a + Fraction(1, 2) * b
            for a, b in zip(parity_tensor(3).entries, product_tensor(U2, 3).entries))
        assert adjoint_maps_mean_zero(
            markov_from_joining(JoiningTensor(3, 2, U2.weights, mix_entries)))

    def test_degenerate_masses_rejected(self):
        t = parity_tensor(3)
        broken = JoiningTensor.__new__(JoiningTensor)
        object.__setattr__(broken, "order", 3)
        object.__setattr__(broken, "dims", 2)
        object.__setattr__(broken, "weights", (Fraction(0), Fraction(1)))
        object.__setattr__(broken, "entries", t.entries)
        object.__setattr__(broken, "exact", True)
        object.__setattr__(broken, "tol", 1e-9)
        with pytest.raises(ValueError):
            markov_from_joining(broken)


class TestPairings:
    def test_averaging_composes_to_averaging(self):
        avg = averaging_operator(U2, 2)
        p3 = compose_P3(avg)
        assert p3.matrix == averaging_operator(U2, 3).matrix
        p5 = compose_P5(p3)
        assert p5.matrix == averaging_operator(U2, 5).matrix

    def test_parity_p3_nonzero_on_mean_zero(self):
        p3 = compose_P3(markov_from_joining(parity_tensor(3)))
        f = [SIGN[a] * SIGN[b] * SIGN[c] for a, b, c in _tensor_indices(2, 3)]
        assert p3.apply(f) == SIGN

    def test_p3_pairing_identity_100_random_quadruples(self):
        p2 = markov_from_joining(parity_tensor(3))
        p3 = compose_P3(p2)
        gen = substream(41, "quadruples")
        for _ in range(100):
            a1, a2, a3, a4 = (int(x) for x in gen.integers(0, 2, size=4))
            lhs = p3.pair(_indicator(2, a4), _tensor_indicator(2, (a1, a2, a3)))
            left = p2.apply(_tensor_indicator(2, (a1, a2)))
            right = p2.apply(_tensor_indicator(2, (a3, a4)))
            rhs = sum(w * x * y for w, x, y in zip(p2.weights, left, right))
            assert lhs == rhs

    def test_p3_p5_pairing_exhaustive_d3(self):
        q = (Fraction(1, 2), Fraction(1, 4), Fraction(1, 4))
        p2 = markov_from_joining(group_sum_tensor(3, q))
        p3 = compose_P3(p2)
        p5 = compose_P5(p3)
        d = 3
        for cells in _tensor_indices(d, 4):
            lhs = p3.pair(_indicator(d, cells[3]), _tensor_indicator(d, cells[:3]))
            left = p2.apply(_tensor_indicator(d, cells[:2]))
            right = p2.apply(_tensor_indicator(d, cells[2:]))
            rhs = sum(w * x * y for w, x, y in zip(p2.weights, left, right))
            assert lhs == rhs
        gen = substream(42, "d3-p5")
        for _ in range(200):
            cells = tuple(int(x) for x in gen.integers(0, d, size=6))
            lhs = p5.pair(_indicator(d, cells[5]), _tensor_indicator(d, cells[:5]))
            left = p3.apply(_tensor_indicator(d, cells[:3]))
            right = p3.apply(_tensor_indicator(d, cells[3:]))
            rhs = sum(w * x * y for w, x, y in zip(p3.weights, left, right))
            assert lhs == rhs

    def test_p5_pairing_random_tuples_d6(self):
        d = 6
        gen = substream(43, "d6")
        raw = [int(x) for x in gen.integers(1, 6, size=d * d * d)]
        # random exact joining-like operator: rows normalized to sum 1
        rows = []
        for i in range(d):
            chunk = raw[i * d * d:(i + 1) * d * d]
            total = sum(chunk)
            rows.append(tuple(Fraction(c, total) for c in chunk))
        p2 = MarkovOperator(2, uniform_partition(d).weights, tuple(rows))
        p3 = pair_compose(p2)
        p5 = pair_compose(p3)
        for _ in range(1000):
            cells = tuple(int(x) for x in gen.integers(0, d, size=6))
            lhs = p5.pair(_indicator(d, cells[5]), _tensor_indicator(d, cells[:5]))
            left = p3.apply(_tensor_indicator(d, cells[:3]))
            right = p3.apply(_tensor_indicator(d, cells[3:]))
            rhs = sum(w * x * y for w, x, y in zip(p3.weights, left, right))
            assert lhs == rhs


class TestChain:
    def test_averaging_all_norms_zero(self):
        rep = chain_check(averaging_operator(U2, 2))
        assert rep.norm_p2 == rep.norm_p3 == rep.norm_p5 == 0.0

    def test_parity_norms_positive_and_chain_holds(self):
        rep = chain_check(markov_from_joining(parity_tensor(3)))
        assert min(rep.norm_p2, rep.norm_p3, rep.norm_p5) > 0.5
        assert rep.holds_p2() and rep.holds_p3()

    def test_random_stochastic_operators_50_seeds(self):
        for seed in range(50):
            gen = substream(seed, "chain")
            d = int(gen.integers(2, 4))
            raw = gen.integers(1, 9, size=(d, d * d))
            rows = []
            for i in range(d):
                total = int(raw[i].sum())
                rows.append(tuple(Fraction(int(x), total) for x in raw[i]))
            weights_raw = [int(x) for x in gen.integers(1, 5, size=d)]
            wt = sum(weights_raw)
            weights = tuple(Fraction(x, wt) for x in weights_raw)
            p2 = MarkovOperator(2, weights, tuple(rows))
            rep = chain_check(p2)
            assert rep.holds_p2(), f"seed {seed}: {rep.to_json()}"
            assert rep.holds_p3(), f"seed {seed}: {rep.to_json()}"


class TestRaiseLower:
    def test_averaging_raises_to_product(self):
        t, report = raise_order(averaging_operator(U2, 3))
        assert classify(t).is_product
        assert report["normalized"] and report["nonnegative"]

    def test_parity_raises_to_order6_parity(self):
        p3 = compose_P3(markov_from_joining(parity_tensor(3)))
        t, report = raise_order(p3)
        assert t.entries == parity_tensor(6).entries
        assert report["class"] == "M(5,6)"
        assert report["marginals_product"]
        assert sum(t.entries) == 1
        assert mean_zero_restricted_norm(markov_from_joining(t)) > 0.5

    def test_product_lowers_to_product(self):
        t, report = lower_order(product_tensor(U2, 5))
        assert classify(t).is_product

    def test_parity5_lowers_to_parity4(self):
        t, report = lower_order(parity_tensor(5))
        assert t.entries == parity_tensor(4).entries
        assert report["class"] == "M(3,4)"

    def test_lowering_matches_direct_contraction(self):
        # recompute nu2(a1,a2,b1,b2) = sum_B nu(a1,a2,B) nu(b1,b2,B) / w_B
        # with independent loops and compare entry by entry
        t = parity_tensor(5)
        lowered, _ = lower_order(t)
        d = t.dims
        for a1, a2, b1, b2 in itertools.product(range(d), repeat=4):
            acc = Fraction(0)
            for rest in itertools.product(range(d), repeat=3):
                wb = Fraction(1)
                for i in rest:
                    wb *= t.weights[i]
                acc += t.entry((a1, a2) + rest) * t.entry((b1, b2) + rest) / wb
            assert lowered.entry((a1, a2, b1, b2)) == acc

    def test_insufficient_marginals_rejected(self):
        with pytest.raises(JoiningError):
            lower_order(diagonal_tensor(U2, 4))

    def test_non_joining_source_flagged(self):
        # an operator with a negative pairing cell cannot arise from a
        # joining; build one directly and watch raise_order flag it
        rows = (
            (Fraction(2), Fraction(-1), Fraction(0), Fraction(0),
             Fraction(0), Fraction(0), Fraction(0), Fraction(0)),
            (Fraction(0), Fraction(0), Fraction(0), Fraction(0),
             Fraction(0), Fraction(0), Fraction(0), Fraction(1)),
        )
        with pytest.raises(ValueError):
            MarkovOperator(3, U2.weights, rows)


class TestIntertwining:
    def test_identity_permutation_any_operator(self):
        sysm = FinitePermutationSystem((0, 1, 2, 3), (0, 0, 1, 1))
        p2 = markov_from_joining(parity_tensor(3))
        assert intertwining_residual(sysm, p2) == 0.0

    def test_cyclic_with_diagonal_joining(self):
        sysm = FinitePermutationSystem((1, 2, 3, 0), (0, 1, 2, 3))
        part = sysm.partition()
        p2 = markov_from_joining(diagonal_tensor(part, 3))
        assert intertwining_residual(sysm, p2) == 0.0

    def test_shuffled_tensor_positive_residual(self):
        sysm = FinitePermutationSystem((1, 2, 0), (0, 1, 2))
        part = sysm.partition()
        d = 3
        entries = []
        for idx in itertools.product(range(d), repeat=3):
            # diagonal joining twisted on one axis: breaks equivariance
            entries.append(part.weights[idx[0]]
                           if (idx[0], (idx[1] + 1) % d, idx[2]) == (idx[0], idx[0], idx[0])
                           else Fraction(0))
        # fix marginals: this twisted diagonal still has uniform marginals
        t = JoiningTensor(3, d, part.weights, tuple(entries))
        p2 = markov_from_joining(t)
        assert intertwining_residual(sysm, p2) > 0.1

    def test_unexpressible_partition_rejected(self):
        # permutation does not map cells onto cells
        sysm = FinitePermutationSystem((1, 0, 2), (0, 0, 1))
        with pytest.raises(ValueError, match="refined"):
            sysm.koopman_cell_matrix()


class TestLimitJoining:
    def test_ledrappier_parity_pipeline(self):
        oracle = LedrappierOracle()
        cells = [CylinderConstraint(((0, 0),), (b,)) for b in (0, 1)]
        t = limit_joining(oracle, U2, cells, dyadic_family(range(1, 6)), order=5)
        assert t.entries == parity_tensor(5).entries
        assert classify(t).label == "M(4,5)"

    def test_bernoulli_separated_family_gives_product(self):
        from mixlab.algebraic import BernoulliOracle
        oracle = BernoulliOracle()
        cells = [CylinderConstraint((0,), (b,)) for b in (0, 1)]
        family = [(0, 10 * s, 20 * s) for s in range(1, 6)]
        t = limit_joining(oracle, U2, cells, family, order=3)
        assert t.entries == product_tensor(U2, 3).entries

    def test_constant_synthetic_oracle_returns_own_tensor(self):
        target = parity_tensor(3)

        class TensorOracle:
            def event_measure(self, event):
                return MeasureValue.of_exact(Fraction(1, 2))

            def intersection_measure(self, shifts, events):
                return MeasureValue.of_exact(target.entry(tuple(events)))

        cells = [0, 1]
        t = limit_joining(TensorOracle(), U2, cells, [(0, 1, 2)] * 4, order=3)
        assert t.entries == target.entries

    def test_non_stabilizing_family_fails_loudly(self):
        class DriftingOracle:
            def __init__(self):
                self.calls = 0

            def event_measure(self, event):
                return MeasureValue.of_exact(Fraction(1, 2))

            def intersection_measure(self, shifts, events):
                # depends on the shift scale: never settles
                s = shifts[1]
                if tuple(events) == (0, 0, 0):
                    return MeasureValue.of_exact(Fraction(1, 4) + Fraction(1, 8 + s))
                if tuple(events) == (0, 0, 1):
                    return MeasureValue.of_exact(Fraction(1, 4) - Fraction(1, 8 + s))
                if tuple(events) in ((0, 1, 0), (0, 1, 1)):
                    return MeasureValue.of_exact(Fraction(1, 8))
                if tuple(events) in ((1, 0, 0), (1, 0, 1)):
                    return MeasureValue.of_exact(Fraction(1, 8))
                s2 = Fraction(1, 8)
                return MeasureValue.of_exact(s2)

        cells = [0, 1]
        with pytest.raises(NonStabilizingError) as err:
            limit_joining(DriftingOracle(), U2, cells,
                          [(0, s, 2 * s) for s in range(1, 8)], order=3)
        assert len(err.value.trace) >= 2
