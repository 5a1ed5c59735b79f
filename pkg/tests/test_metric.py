"""Dissimilarity metric tests: exact values, metric axioms, retrieval oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dialprosody.errors import FeatureError
from dialprosody.metric import dissimilarity, neighbors
from dialprosody.midlevel import N_DIMS, ProsodyVector


def vec(uid, values):
    return ProsodyVector(
        utterance_id=uid, track_id="c/s/ch0", values=np.asarray(values, dtype=float)
    )


def rand_vec(uid, rng, scale=1.0):
    return vec(uid, rng.normal(0.0, scale, N_DIMS))


finite_coord = st.floats(
    min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False
)


@st.composite
def vector_triple(draw):
    a = draw(st.lists(finite_coord, min_size=N_DIMS, max_size=N_DIMS))
    b = draw(st.lists(finite_coord, min_size=N_DIMS, max_size=N_DIMS))
    c = draw(st.lists(finite_coord, min_size=N_DIMS, max_size=N_DIMS))
    return vec("a", a), vec("b", b), vec("c", c)


class TestDissimilarity:
    def test_identity_zero(self):
        rng = np.random.default_rng(0)
        a = rand_vec("a", rng)
        b = vec("b", a.values.copy())
        assert dissimilarity(a, b) == 0.0

    def test_unit_basis(self):
        a = vec("a", np.zeros(N_DIMS))
        e = np.zeros(N_DIMS)
        e[37] = 1.0
        assert dissimilarity(a, vec("b", e)) == 1.0

    def test_three_four_five(self):
        a = vec("a", np.zeros(N_DIMS))
        b = np.zeros(N_DIMS)
        b[0], b[1] = 3.0, 4.0
        assert dissimilarity(a, vec("b", b)) == 5.0

    def test_wrong_shape(self):
        with pytest.raises(FeatureError):
            dissimilarity(vec("a", np.zeros(99)), vec("b", np.zeros(N_DIMS)))

    def test_non_finite(self):
        bad = np.zeros(N_DIMS)
        bad[3] = np.nan
        with pytest.raises(FeatureError):
            dissimilarity(vec("a", bad), vec("b", np.zeros(N_DIMS)))

    @given(vector_triple())
    @settings(max_examples=150, deadline=None)
    def test_metric_axioms(self, triple):
        a, b, c = triple
        dab = dissimilarity(a, b)
        dba = dissimilarity(b, a)
        dac = dissimilarity(a, c)
        dcb = dissimilarity(c, b)
        assert dab == dba  # exact symmetry
        assert dab >= 0.0
        assert dab <= dac + dcb + 1e-9  # triangle inequality

    @given(vector_triple(), st.floats(-1e5, 1e5, allow_nan=False))
    @settings(max_examples=60, deadline=None)
    def test_translation_invariance(self, triple, shift):
        a, b, _ = triple
        d0 = dissimilarity(a, b)
        d1 = dissimilarity(
            vec("a", a.values + shift), vec("b", b.values + shift)
        )
        assert d1 == pytest.approx(d0, abs=1e-9, rel=1e-9)


class TestNeighbors:
    def test_k1_ordering(self):
        anchor = vec("anchor", np.zeros(N_DIMS))
        pool = [anchor]
        for i, scale in enumerate([3.0, 1.0, 2.0]):
            v = np.zeros(N_DIMS)
            v[0] = scale
            pool.append(vec(f"u{i}", v))
        similar, dissimilar = neighbors(anchor, pool, k=1)
        assert similar[0][0].utterance_id == "u1"
        assert similar[0][1] == 1.0
        assert dissimilar[0][0].utterance_id == "u0"
        assert dissimilar[0][1] == 3.0

    def test_anchor_excluded_by_id(self):
        anchor = vec("anchor", np.zeros(N_DIMS))
        clone = vec("clone", np.zeros(N_DIMS))  # same values, different id
        far = vec("far", np.ones(N_DIMS))
        similar, _ = neighbors(anchor, [anchor, clone, far], k=2)
        ids = [p.utterance_id for p, _ in similar]
        assert ids == ["clone", "far"]

    def test_tie_breaks_lexicographic(self):
        anchor = vec("anchor", np.zeros(N_DIMS))
        e = np.zeros(N_DIMS)
        e[0] = 1.0
        pool = [vec("zed", e), vec("amy", e), vec("bob", e)]
        similar, dissimilar = neighbors(anchor, pool, k=3)
        assert [p.utterance_id for p, _ in similar] == ["amy", "bob", "zed"]
        # dissimilar lists descending distance; ties still resolved by id,
        # then the block is reversed
        assert [p.utterance_id for p, _ in dissimilar] == ["zed", "bob", "amy"]

    def test_brute_force_oracle(self):
        rng = np.random.default_rng(42)
        pool = [rand_vec(f"u{i:03d}", rng) for i in range(200)]
        # plant an exact tie pair
        pool[50] = vec("u050", pool[51].values.copy())
        anchor = rand_vec("anchor", rng)
        k = 7
        similar, dissimilar = neighbors(anchor, pool, k=k)

        def oracle_key(p):
            d = float(np.sqrt(np.sum((anchor.values - p.values) ** 2)))
            return (d, p.utterance_id)

        ranked = sorted(pool, key=oracle_key)
        assert [p.utterance_id for p, _ in similar] == [
            p.utterance_id for p in ranked[:k]
        ]
        assert [p.utterance_id for p, _ in dissimilar] == [
            p.utterance_id for p in ranked[-k:][::-1]
        ]
        for p, d in similar + dissimilar:
            assert d == dissimilarity(anchor, p)

    def test_k_exceeds_pool(self):
        anchor = vec("anchor", np.zeros(N_DIMS))
        pool = [vec("u0", np.ones(N_DIMS))]
        with pytest.raises(ValueError):
            neighbors(anchor, pool, k=2)

    def test_empty_pool(self):
        anchor = vec("anchor", np.zeros(N_DIMS))
        with pytest.raises(ValueError):
            neighbors(anchor, [anchor], k=1)
