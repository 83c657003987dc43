import math

import numpy as np
import pytest

from optex.model import (
    Design,
    FactorGrid,
    Term,
    TermSet,
    default_weight,
    evaluate_term,
    expand_preset,
    expand_presets,
    make_term,
    model_matrices,
    replication_summary,
    termset_from_exponents,
    treatment_labels,
)


def comb(n, k):
    return math.comb(n, k)


class TestFactorGrid:
    def test_levels_equally_spaced_on_unit_interval(self):
        g = FactorGrid.regular(1, 5)
        assert np.allclose(g.factor_values(0), [-1, -0.5, 0, 0.5, 1])
        g2 = FactorGrid.regular(1, 2)
        assert list(g2.factor_values(0)) == [-1.0, 1.0]
        g3 = FactorGrid.regular(1, 3)
        assert list(g3.factor_values(0)) == [-1.0, 0.0, 1.0]

    def test_grid_strictly_increasing_and_spans(self):
        for lev in range(2, 9):
            v = FactorGrid.regular(1, lev).factor_values(0)
            assert v[0] == -1.0 and v[-1] == 1.0
            assert (np.diff(v) > 0).all()
            assert np.allclose(np.diff(v), 2.0 / (lev - 1))

    def test_mixed_levels(self):
        g = FactorGrid.regular(3, [2, 3, 5])
        assert g.levels == (2, 3, 5)
        assert g.n_candidates == 30

    def test_too_few_levels_rejected(self):
        with pytest.raises(ValueError, match="needs >=2 levels"):
            FactorGrid.regular(2, 1)
        with pytest.raises(ValueError):
            FactorGrid.regular(2, [3])


class TestPresets:
    def test_main_effects_k2(self):
        ts = expand_preset("main_effects", 2)
        assert [t.exponents for t in ts.terms] == [(1, 0), (0, 1)]
        assert len(ts) == 2

    def test_second_order_k3_has_nine_terms(self):
        assert len(expand_preset("second_order", 3)) == 9

    def test_cubic_plus_third_order_k3_has_ten_terms(self):
        ts = expand_presets(["cubic_terms", "third_order_terms"], 3, role="potential")
        assert len(ts) == 10

    def test_ordering_degree_then_leading_factor(self):
        ts = expand_preset("second_order", 2)
        assert [t.exponents for t in ts.terms] == [
            (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]

    @pytest.mark.parametrize("k", range(2, 10))
    def test_preset_cardinalities(self, k):
        assert len(expand_preset("second_order", k)) == 2 * k + comb(k, 2)
        assert len(expand_preset("third_order_terms", k)) == comb(k, 3) + k * (k - 1)

    def test_unknown_preset(self):
        with pytest.raises(ValueError, match="unknown model preset"):
            expand_preset("fourth_order", 3)

    def test_preset_too_small_k(self):
        with pytest.raises(ValueError):
            expand_preset("linear_interactions", 1)
        with pytest.raises(ValueError):
            expand_preset("third_order_terms", 1)

    def test_quadratic_weight_convention(self):
        assert default_weight((2, 0)) == 0.25
        assert default_weight((0, 0, 2)) == 0.25
        assert default_weight((1, 0)) == 1.0
        assert default_weight((1, 1)) == 1.0
        assert default_weight((2, 1)) == 1.0
        assert default_weight((3, 0)) == 1.0
        ts = expand_preset("second_order", 2)
        assert [t.weight for t in ts.terms] == [1.0, 1.0, 0.25, 1.0, 0.25]


class TestTermSet:
    def test_duplicate_exponents_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            TermSet((make_term((1, 0)), make_term((1, 0))))

    def test_intercept_rejected(self):
        with pytest.raises(ValueError, match="degree >= 1"):
            Term((0, 0), 1.0)

    def test_explicit_exponent_vectors(self):
        ts = termset_from_exponents([[2, 0], [0, 2]], 2, role="potential")
        assert [t.weight for t in ts.terms] == [0.25, 0.25]
        with pytest.raises(ValueError, match="length"):
            termset_from_exponents([[1, 0, 0]], 2)


class TestEvaluateTerm:
    def setup_method(self):
        self.grid = FactorGrid.regular(2, 3)
        self.design = Design.from_indices([[0, 2], [2, 0]], self.grid)

    def test_linear_identity(self):
        col = evaluate_term(make_term((1, 0)), self.design, self.grid)
        assert list(col) == [-1.0, 1.0]

    def test_square(self):
        col = evaluate_term(make_term((2, 0)), self.design, self.grid)
        assert list(col) == [1.0, 1.0]

    def test_triple_product_on_five_level_grid(self):
        grid = FactorGrid.regular(3, 5)
        design = Design.from_indices([[0, 3, 4]], grid)  # (-1, 0.5, 1)
        col = evaluate_term(make_term((1, 1, 1)), design, grid)
        assert col[0] == pytest.approx(-0.5)

    def test_multiplicative_in_exponents(self):
        rng = np.random.default_rng(5)
        grid = FactorGrid.regular(3, 5)
        design = Design.from_indices(rng.integers(0, 5, size=(12, 3)), grid)
        for _ in range(20):
            e1 = rng.integers(0, 3, size=3)
            e2 = rng.integers(0, 3, size=3)
            if e1.sum() == 0 or e2.sum() == 0 or (e1 + e2).sum() == 0:
                continue
            c1 = evaluate_term(make_term(e1), design, grid)
            c2 = evaluate_term(make_term(e2), design, grid)
            c12 = evaluate_term(make_term(e1 + e2), design, grid)
            assert np.allclose(c12, c1 * c2, rtol=1e-12)


class TestModelMatrices:
    def test_two_level_full_factorial_main_effects(self):
        grid = FactorGrid.regular(2, 2)
        design = Design.from_indices([[0, 0], [0, 1], [1, 0], [1, 1]], grid)
        X1, X2 = model_matrices(design, expand_preset("main_effects", 2),
                                TermSet(tuple(), role="potential"), grid)
        assert np.array_equal(X1, [[-1, -1], [-1, 1], [1, -1], [1, 1]])
        assert X2.shape == (4, 0)

    def test_second_order_dimensions(self):
        grid = FactorGrid.regular(3, 5)
        rng = np.random.default_rng(0)
        design = Design.from_indices(rng.integers(0, 5, size=(36, 3)), grid)
        X1, _ = model_matrices(design, expand_preset("second_order", 3),
                               TermSet(tuple(), role="potential"), grid)
        assert X1.shape == (36, 9)


class TestLabelsAndReplication:
    def test_table_style_labels_k3_l5(self):
        grid = FactorGrid.regular(3, 5)
        design = Design.from_indices([[4, 2, 3], [0, 0, 0], [4, 4, 4]], grid)
        assert list(treatment_labels(design.settings, grid)) == [114, 1, 125]

    def test_two_level_k4_label(self):
        grid = FactorGrid.regular(4, 2)
        design = Design.from_indices([[1, 0, 0, 0]], grid)  # (1,-1,-1,-1)
        assert treatment_labels(design.settings, grid)[0] == 9

    def test_label_round_trip_bijection(self):
        for levels in ((3, 3), (2, 3, 4), (5, 5)):
            grid = FactorGrid.regular(len(levels), list(levels))
            total = grid.n_candidates
            seen = set()
            for c in range(total):
                idx, rem = [], c
                for j in range(grid.k):
                    stride = int(np.prod(levels[j + 1:], dtype=int)) if j + 1 < grid.k else 1
                    idx.append(rem // stride)
                    rem %= stride
                design = Design.from_indices([idx], grid)
                label = treatment_labels(design.settings, grid)[0]
                assert label == c + 1
                seen.add(label)
            assert seen == set(range(1, total + 1))

    def test_df_counts_from_known_split(self):
        grid = FactorGrid.regular(3, 5)
        rng = np.random.default_rng(3)
        distinct = rng.choice(125, size=20, replace=False)
        rows = np.concatenate([distinct, rng.choice(distinct, size=16)])
        idx = np.column_stack([rows // 25, (rows // 5) % 5, rows % 5])
        summary = replication_summary(Design.from_indices(idx, grid), grid, p=9)
        assert summary.t == 20
        assert summary.pe_df == 16
        assert summary.lof_df == 10

    def test_all_distinct_rows(self):
        grid = FactorGrid.regular(2, 4)
        idx = np.column_stack([np.arange(12) // 4, np.arange(12) % 4])
        summary = replication_summary(Design.from_indices(idx, grid), grid, p=4)
        assert summary.pe_df == 0
        assert summary.lof_df == 7

    def test_lof_df_floored_at_zero(self):
        grid = FactorGrid.regular(2, 2)
        design = Design.from_indices([[0, 0], [0, 0], [1, 1]], grid)
        summary = replication_summary(design, grid, p=4)
        assert summary.lof_df == 0

    def test_df_identity_fuzz(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            k = int(rng.integers(2, 7))
            lev = int(rng.integers(2, 5))
            grid = FactorGrid.regular(k, lev)
            n = int(rng.integers(8, 30))
            p = int(rng.integers(1, 6))
            design = Design.from_indices(rng.integers(0, lev, size=(n, k)), grid)
            s = replication_summary(design, grid, p)
            assert s.pe_df == n - s.t
            if s.t >= p + 1:
                assert s.pe_df + s.lof_df == n - p - 1


class TestDesign:
    def test_out_of_range_index_rejected(self):
        grid = FactorGrid.regular(2, 3)
        with pytest.raises(ValueError, match="column 2"):
            Design.from_indices([[0, 3]], grid)

    def test_settings_read_only(self):
        grid = FactorGrid.regular(2, 3)
        design = Design.from_indices([[0, 1]], grid)
        with pytest.raises(ValueError):
            design.settings[0, 0] = 2
