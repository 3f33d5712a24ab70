import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capsulewardrobe.catalog import Outfit, make_garment
from capsulewardrobe.errors import ValidationError
from capsulewardrobe.objective import (
    ObjectiveConfig,
    ObjectiveState,
    compatibility,
    coverage,
    objective,
    personalized_coverage,
)
from capsulewardrobe.scoring import TableScorer


def make_outfits(n):
    return [Outfit([make_garment(f"g{i}", 0, [i])]) for i in range(n)]


def table_config(thetas, compats=None, weights=None, coverage_weight=1.0):
    thetas = np.asarray(thetas, dtype=np.float64)
    outfits = make_outfits(len(thetas))
    compats = compats if compats is not None else np.ones(len(thetas))
    table = {
        o.key: (c, theta) for o, c, theta in zip(outfits, compats, thetas)
    }
    scorer = TableScorer(table, n_styles=thetas.shape[1])
    return outfits, ObjectiveConfig(scorer=scorer, weights=weights, coverage_weight=coverage_weight)


class TestCompatibility:
    def test_empty(self):
        _, config = table_config([[0.5, 0.5]])
        assert compatibility([], config) == 0.0

    def test_sum_of_steps(self):
        outfits, config = table_config(
            [[0.5, 0.5]] * 3, compats=[1.0, 0.0, 1.0]
        )
        assert compatibility(outfits, config) == 2.0

    def test_disjoint_additivity(self):
        outfits, config = table_config(np.random.default_rng(0).dirichlet([1, 1], 6))
        a, b = outfits[:2], outfits[2:]
        assert compatibility(a + b, config) == pytest.approx(
            compatibility(a, config) + compatibility(b, config)
        )


class TestCoverage:
    def test_empty(self):
        _, config = table_config([[0.5, 0.5]])
        assert coverage([], config) == 0.0

    def test_single_outfit_half_half(self):
        outfits, config = table_config([[0.5, 0.5]])
        assert coverage(outfits, config) == pytest.approx(1.0)

    def test_saturation(self):
        outfits, config = table_config([[1.0, 0.0], [1.0, 0.0]])
        assert coverage(outfits, config) == pytest.approx(1.0)

    def test_bounds(self, rng):
        thetas = rng.dirichlet(np.ones(4), size=6)
        outfits, config = table_config(thetas)
        for r in range(len(outfits) + 1):
            for subset in itertools.combinations(outfits, r):
                val = coverage(list(subset), config)
                assert 0.0 <= val <= 4.0 + 1e-12

    def test_monotone(self, rng):
        thetas = rng.dirichlet(np.ones(3), size=5)
        outfits, config = table_config(thetas)
        current = []
        prev = 0.0
        for o in outfits:
            current.append(o)
            val = coverage(current, config)
            assert val >= prev - 1e-12
            prev = val


class TestPersonalizedCoverage:
    def test_uniform_weights_scale(self, rng):
        k = 4
        thetas = rng.dirichlet(np.ones(k), size=5)
        outfits, config = table_config(thetas, weights=np.full(k, 1.0 / k))
        assert personalized_coverage(outfits, config) == pytest.approx(
            coverage(outfits, config) / k
        )

    def test_point_mass(self, rng):
        thetas = rng.dirichlet(np.ones(3), size=4)
        outfits, config = table_config(thetas, weights=np.array([1.0, 0.0, 0.0]))
        expected = 1.0 - np.prod([1.0 - t[0] for t in thetas])
        assert personalized_coverage(outfits, config) == pytest.approx(expected)

    def test_convex_bound(self, rng):
        thetas = rng.dirichlet(np.ones(3), size=5)
        w = rng.dirichlet(np.ones(3))
        outfits, config = table_config(thetas, weights=w)
        remaining = np.prod(1.0 - thetas, axis=0)
        assert personalized_coverage(outfits, config) <= (1.0 - remaining).max() + 1e-12

    def test_requires_weights(self):
        outfits, config = table_config([[0.5, 0.5]])
        with pytest.raises(ValidationError):
            personalized_coverage(outfits, config)

    def test_weight_validation(self):
        with pytest.raises(ValidationError):
            table_config([[0.5, 0.5]], weights=np.array([0.9, 0.2]))
        with pytest.raises(ValidationError):
            table_config([[0.5, 0.5]], weights=np.array([1.2, -0.2]))


class TestObjective:
    def test_empty(self):
        _, config = table_config([[0.5, 0.5]])
        assert objective([], config) == 0.0

    def test_definition(self, rng):
        thetas = rng.dirichlet(np.ones(3), size=5)
        outfits, config = table_config(thetas, compats=rng.integers(0, 2, 5))
        assert objective(outfits, config) == pytest.approx(
            compatibility(outfits, config) + coverage(outfits, config)
        )

    def test_marginal_gain_decomposition(self, rng):
        # adding one outfit changes the objective by c(o) plus per-style
        # coverage increments that are each non-negative
        for trial in range(20):
            thetas = rng.dirichlet(np.ones(4), size=6)
            compats = rng.integers(0, 2, 6).astype(float)
            outfits, config = table_config(thetas, compats=compats)
            base, new = outfits[:5], outfits[5]
            before_styles = 1.0 - np.prod(1.0 - thetas[:5], axis=0)
            after_styles = 1.0 - np.prod(1.0 - thetas, axis=0)
            deltas = after_styles - before_styles
            assert (deltas >= -1e-12).all()
            gain = objective(outfits, config) - objective(base, config)
            assert gain == pytest.approx(compats[5] + deltas.sum())

    def test_coverage_weight_scales(self, rng):
        thetas = rng.dirichlet(np.ones(3), size=4)
        outfits, config = table_config(thetas, coverage_weight=2.5)
        assert objective(outfits, config) == pytest.approx(
            compatibility(outfits, config) + 2.5 * coverage(outfits, config)
        )


@st.composite
def theta_sets(draw):
    k = draw(st.integers(min_value=2, max_value=5))
    n = draw(st.integers(min_value=1, max_value=6))
    rows = []
    for _ in range(n + 1):  # +1 for the extra element
        raw = draw(
            st.lists(
                st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
                min_size=k,
                max_size=k,
            )
        )
        total = sum(raw)
        rows.append([x / total for x in raw] if total > 0 else [1.0 / k] * k)
    return np.array(rows)


class TestSubmodularity:
    @given(theta_sets())
    @settings(max_examples=60, deadline=None)
    def test_outfit_level_diminishing_returns(self, thetas):
        outfits, config = table_config(thetas)
        *ground, extra = outfits
        for d_mask in itertools.product([0, 1], repeat=len(ground)):
            for b_mask in itertools.product([0, 1], repeat=len(ground)):
                if any(d > b for d, b in zip(d_mask, b_mask)):
                    continue
                d_set = [o for o, m in zip(ground, d_mask) if m]
                b_set = [o for o, m in zip(ground, b_mask) if m]
                gain_d = coverage(d_set + [extra], config) - coverage(d_set, config)
                gain_b = coverage(b_set + [extra], config) - coverage(b_set, config)
                assert gain_d >= gain_b - 1e-12

    def test_modularity_constant_gain(self, rng):
        thetas = rng.dirichlet(np.ones(3), size=5)
        compats = rng.integers(0, 2, 5).astype(float)
        outfits, config = table_config(thetas, compats=compats)
        *ground, extra = outfits
        for r in range(len(ground) + 1):
            for subset in itertools.combinations(ground, r):
                gain = compatibility(list(subset) + [extra], config) - compatibility(
                    list(subset), config
                )
                assert gain == pytest.approx(compats[-1])


class TestObjectiveState:
    def test_gain_matches_full_recompute(self, rng):
        for trial in range(25):
            thetas = rng.dirichlet(np.ones(4), size=8)
            compats = rng.integers(0, 2, 8).astype(float)
            outfits, config = table_config(thetas, compats=compats)
            state = ObjectiveState(config)
            folded = []
            for o in outfits:
                agg = state.aggregate([o])
                gain = state.gain(agg)
                full = objective(folded + [o], config) - objective(folded, config)
                assert gain == pytest.approx(full, abs=1e-9)
                state.fold(agg)
                folded.append(o)
            assert state.value() == pytest.approx(objective(folded, config), abs=1e-9)

    def test_weighted_state(self, rng):
        thetas = rng.dirichlet(np.ones(3), size=5)
        w = rng.dirichlet(np.ones(3))
        outfits, config = table_config(thetas, weights=w, coverage_weight=1.5)
        state = ObjectiveState(config)
        state.fold(state.aggregate(outfits))
        assert state.value() == pytest.approx(objective(outfits, config), abs=1e-9)
