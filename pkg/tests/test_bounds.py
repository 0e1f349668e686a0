import math
from fractions import Fraction

import numpy as np
import pytest

from obcs.bounds import (
    AdversaryError,
    BoundError,
    bound_report,
    confusable_pair_nonneg,
    confusable_pair_real,
    cover_lower,
    extract_family,
    furedi_max_n,
    gv_count,
    gv_min_m,
    min_m_approx,
    min_m_support,
    regions_upper,
)
from obcs.constructions import RandomRuffConfig, design_from_code, reed_solomon_code, sample_random_ruff
from obcs.family import SetFamily, ViolationWitness, verify_ruff, verify_uff
from obcs.harness import planted_cover_matrix
from obcs.sensing import SensingMatrix, matrix_from_family, measure


class TestFuredi:
    def test_m10_k2(self):
        assert math.ceil((10 - 2) / 3) == 3
        assert furedi_max_n(10, 2) == 2 + math.comb(10, 3) == 122

    def test_m5_k2(self):
        assert furedi_max_n(5, 2) == 7

    @pytest.mark.parametrize("k", [2, 3, 5])
    def test_m_equals_k(self, k):
        assert furedi_max_n(k, k) == k + 1

    @pytest.mark.parametrize("args", [(10, 1), (3, 4)])
    def test_errors(self, args):
        with pytest.raises(BoundError):
            furedi_max_n(*args)

    @pytest.mark.parametrize("k", [2, 3, 4])
    def test_monotone_in_m(self, k):
        values = [furedi_max_n(m, k) for m in range(k, 61)]
        assert values == sorted(values)


class TestMinMSupport:
    def test_inverse_examples(self):
        assert min_m_support(122, 2) == 10
        assert min_m_support(123, 2) == 11
        assert min_m_support(7, 2) == 5

    @pytest.mark.parametrize("k", [2, 3, 4])
    def test_boundary(self, k):
        assert min_m_support(k + 1, k) == k

    def test_is_least(self):
        for k in (2, 3):
            for n in range(k + 1, 300, 7):
                m = min_m_support(n, k)
                assert furedi_max_n(m, k) >= n
                assert m == k or furedi_max_n(m - 1, k) < n

    def test_errors(self):
        with pytest.raises(BoundError):
            min_m_support(2, 2)


class TestApproxBounds:
    def test_regions(self):
        assert regions_upper(4, 2) == 24
        assert regions_upper(2, 1) == 4
        with pytest.raises(BoundError):
            regions_upper(4, 0)
        with pytest.raises(BoundError):
            regions_upper(3, 2)

    def test_cover(self):
        assert cover_lower(2, 0.1, 0.5) == 25
        assert cover_lower(7, "1/3", "1/3") == 1
        assert cover_lower(1, 0.01, 1) == 100
        with pytest.raises(BoundError):
            cover_lower(2, 0, 1)

    def test_min_m_approx(self):
        assert min_m_approx(2, 0.05, 0.5) == 8
        assert 4 * math.comb(7, 2) < 100 <= 4 * math.comb(8, 2)
        assert min_m_approx(3, 0.6, 0.5) == 6
        assert min_m_approx(1, 0.01, 1) == 50

    def test_gv(self):
        assert gv_count(10, 2, 0.5) == Fraction(9, 2)
        assert gv_min_m(10, 2, 0.5) == 3
        assert gv_count(10, 2, 1) == 1 and gv_min_m(10, 2, 1) == 0
        assert gv_count(100, 4, 0.5) == Fraction(math.comb(100, 4), math.comb(100, 2))
        # radius floors to 0 and is lifted to 1
        assert gv_count(10, 3, 0.2) == Fraction(math.comb(10, 3), 10)
        with pytest.raises(BoundError):
            gv_count(10, 2, 1.5)

    def test_report(self):
        r = bound_report("furedi_max_n", m=10, k=2).to_dict()
        assert r["value"] == 122 and r["inputs"] == {"m": 10, "k": 2} and "C(m, t)" in r["formula_ref"]
        assert bound_report("gv_count", n=10, k=2, epsilon=Fraction(1, 2)).to_dict()["value"] == "9/2"
        with pytest.raises(BoundError):
            bound_report("nope")


class TestExtractFamily:
    def test_round_trip(self):
        fam = SetFamily(6, [[1, 2, 3], [3, 4, 5], [1, 5, 6]])
        assert extract_family(matrix_from_family(fam)) == fam

    def test_nonzero_pattern(self):
        assert extract_family(SensingMatrix([[1, 0.5], [0, 0]])).sets == ((1,), (1,))

    def test_zero_matrix(self):
        assert extract_family(SensingMatrix(np.zeros((3, 2)))).sets == ((), ())


class TestConfusableNonneg:
    def test_example(self):
        A = SensingMatrix([[1, 1], [1, 0]])
        x1, x2 = confusable_pair_nonneg(A, ViolationWitness(2, (1,), 1), k=2)
        assert x1.to_dense().tolist() == [1, 0] and x2.to_dense().tolist() == [1, 1]
        assert (A.values @ x1.to_dense()).tolist() == [1, 1]
        assert (A.values @ x2.to_dense()).tolist() == [2, 1]
        assert measure(A, x1).values == measure(A, x2).values == (1, 1)

    def test_duplicate_columns(self):
        A = SensingMatrix([[1, 1, 0], [0, 0, 1], [1, 1, 0]])
        w = verify_uff(extract_family(A), 1).witness
        assert (w.j0, w.others) == (1, (2,))
        x1, x2 = confusable_pair_nonneg(A, w, k=2)
        assert x1.support == {2} and x2.support == {1, 2}

    def test_identity_has_no_witness(self):
        assert verify_uff(extract_family(SensingMatrix(np.eye(4))), 2).passed

    def test_invalid_witness(self):
        A = SensingMatrix(np.eye(3))
        with pytest.raises(AdversaryError):
            confusable_pair_nonneg(A, ViolationWitness(1, (2,), 0))

    def test_negative_matrix_rejected(self):
        with pytest.raises(AdversaryError):
            confusable_pair_nonneg(SensingMatrix([[-1, 1]]), ViolationWitness(1, (2,), 1))

    def test_arity_checked(self):
        A = SensingMatrix([[1, 1, 1]])
        with pytest.raises(AdversaryError):
            confusable_pair_nonneg(A, ViolationWitness(1, (2, 3), 1), k=2)


class TestConfusableReal:
    def test_example(self):
        A = SensingMatrix([[1, 0.5], [0, 0]])
        x1, x2 = confusable_pair_real(A, ViolationWitness(2, (1,), 1), epsilon=0.5, seed=0)
        (j, v), = x1.entries
        assert j == 1 and abs(v) == 1.0
        assert x2.entries == ((1, v), (2, 0.5))
        assert measure(A, x1) == measure(A, x2)
        assert measure(A, x1).values in ((1, 0), (-1, 0))

    def test_zero_column(self):
        A = SensingMatrix([[1, 0], [0.5, 0]])
        x1, x2 = confusable_pair_real(A, ViolationWitness(2, (), 0), epsilon=0.25)
        assert x1.l0 == 0 and x2.entries == ((2, 0.25),)
        assert measure(A, x1).values == measure(A, x2).values == (0, 0)

    def test_planted_5x6(self):
        A, j0, others = planted_cover_matrix(6, 5, 3, seed=17, signed=True)
        assert set(extract_family(A)[j0]) <= set().union(*(extract_family(A)[j] for j in others))
        w = ViolationWitness(j0, others, 0)
        x1, x2 = confusable_pair_real(A, w, epsilon=0.5, seed=3, k=3)
        assert measure(A, x1) == measure(A, x2)
        assert x1.support != x2.support and max(x1.l0, x2.l0) <= 3

    def test_degenerate_cancellation_reported(self):
        # the two covering columns are negatives of each other on row 1, but a
        # random draw cancels with probability zero, so this still succeeds
        A = SensingMatrix([[1, -1, 0.5], [0, 0, 0]])
        x1, x2 = confusable_pair_real(A, ViolationWitness(3, (1, 2), 1), epsilon=0.1, seed=1)
        assert measure(A, x1) == measure(A, x2)


def test_adversaries_sound_on_random_plants():
    for seed in range(60):
        rng = np.random.default_rng(seed)
        n, m, k = int(rng.integers(3, 12)), int(rng.integers(2, 20)), int(rng.integers(1, 4))
        for signed in (False, True):
            A, _, _ = planted_cover_matrix(n, m, k, seed, signed=signed)
            w = verify_uff(extract_family(A), k - 1).witness
            assert w is not None
            pairs = [confusable_pair_real(A, w, 0.5, seed, k)]
            if not signed:
                pairs.append(confusable_pair_nonneg(A, w, k))
            for x1, x2 in pairs:
                assert measure(A, x1) == measure(A, x2)
                assert x1.support != x2.support and max(x1.l0, x2.l0) <= k


def test_recovery_families_are_union_free_one_level_down():
    families = [sample_random_ruff(RandomRuffConfig(n=15, k=k, c_m=40, c_d=6, seed=k)) for k in (1, 2, 3)]
    for fam, params, _, _ in families:
        assert verify_ruff(fam, params).passed
        assert verify_uff(extract_family(matrix_from_family(fam)), params.k - 1).passed
        if params.k >= 2:
            assert fam.n <= furedi_max_n(fam.m, params.k)
    fam, params = design_from_code(reed_solomon_code(7, 2, 7))
    for k in (2, 3):
        if verify_uff(fam, k).passed:
            assert fam.n <= furedi_max_n(fam.m, k)
