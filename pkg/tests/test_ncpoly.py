import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from matent.ncpoly import (NcPoly, all_words, canonical_class, canonical_classes,
                           is_reversal_symmetric, star_word, trace_moment,
                           word_rotations)

words_n2 = st.lists(st.integers(min_value=1, max_value=2), min_size=0, max_size=7).map(tuple)
words_n3 = st.lists(st.integers(min_value=1, max_value=3), min_size=0, max_size=6).map(tuple)


@given(words_n3)
def test_star_is_reversal_and_involution(w):
    assert star_word(w) == tuple(reversed(w))
    assert star_word(star_word(w)) == w


@given(words_n3)
def test_canonical_class_idempotent(w):
    c = canonical_class(w)
    assert canonical_class(c) == c


@given(words_n3, st.integers(min_value=0, max_value=5))
def test_canonical_class_cyclic_invariant(w, k):
    if w:
        k = k % len(w)
        rotated = w[k:] + w[:k]
        assert canonical_class(rotated) == canonical_class(w)


@given(words_n3)
def test_canonical_class_reversal_invariant(w):
    assert canonical_class(star_word(w)) == canonical_class(w)


@given(words_n2)
def test_canonical_class_is_minimal_representative(w):
    c = canonical_class(w)
    pool = set(word_rotations(w)) | set(word_rotations(star_word(w)))
    assert c == min(pool) if w else c == ()


def test_word_counts():
    assert len(all_words(2, 3, min_degree=3)) == 8
    assert len(all_words(3, 2, min_degree=2)) == 9
    # degrees 0..2 over two letters: 1 + 2 + 4
    assert len(all_words(2, 2)) == 7


def test_class_counts_small():
    # n=1: one class per degree
    assert [len([c for c in canonical_classes(1, 6) if len(c) == d]) for d in range(7)] == [1] * 7
    # n=2, degree 2: (1,1), (1,2), (2,2)
    deg2 = [c for c in canonical_classes(2, 2) if len(c) == 2]
    assert deg2 == [(1, 1), (1, 2), (2, 2)]


def test_chirality_first_appears_at_degree_six_for_two_letters():
    for K in range(1, 6):
        assert all(is_reversal_symmetric(c) for c in canonical_classes(2, K))
    chiral = [c for c in canonical_classes(2, 6) if not is_reversal_symmetric(c)]
    assert chiral, "expected a chiral class of degree 6"
    assert all(len(c) == 6 for c in chiral)


def test_chirality_three_letters_degree_three():
    chiral = [c for c in canonical_classes(3, 3) if not is_reversal_symmetric(c)]
    assert chiral == [(1, 2, 3)]


def test_poly_algebra_star_antihomomorphism():
    x = NcPoly.generator(2, 1)
    y = NcPoly.generator(2, 2)
    p = x * y + 2.0 * x
    q = y * y - 1.5j * x
    assert ((p * q).star() - q.star() * p.star()).is_zero()
    assert (p + p.star()).is_self_adjoint()
    assert not (1j * x).is_self_adjoint()


def test_poly_scalar_coeffs_roundtrip():
    p = NcPoly(1, {(): 0.5, (1,): -1.0, (1, 1, 1): 2.0})
    np.testing.assert_allclose(p.scalar_coeffs(), [0.5, -1.0, 0.0, 2.0])


def test_poly_degree_and_zero():
    assert NcPoly.zero(3).degree == 0
    assert NcPoly.zero(3).is_zero()
    assert NcPoly.one(2).degree == 0
    assert NcPoly.from_word(2, (1, 2, 1)).degree == 3


def test_evaluate_matches_trace_moment():
    rng = np.random.default_rng(3)
    blocks = []
    for _ in range(2):
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        blocks.append((g + g.conj().T) / 2)
    w = (1, 2, 2, 1)
    p = NcPoly.from_word(2, w)
    ev = p.evaluate(blocks)
    assert np.trace(ev) / 4 == pytest.approx(trace_moment(blocks, w))


@given(words_n2.filter(lambda w: len(w) >= 1))
def test_trace_moment_reversal_conjugate(w):
    rng = np.random.default_rng(sum(w) + len(w))
    blocks = []
    for _ in range(2):
        g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        blocks.append((g + g.conj().T) / 2)
    a = trace_moment(blocks, w)
    b = trace_moment(blocks, star_word(w))
    assert a == pytest.approx(np.conjugate(b))


@given(words_n2.filter(lambda w: len(w) >= 2), st.integers(min_value=1, max_value=6))
def test_trace_moment_cyclic(w, k):
    rng = np.random.default_rng(len(w) * 7 + k)
    blocks = []
    for _ in range(2):
        g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        blocks.append((g + g.conj().T) / 2)
    k = k % len(w)
    rotated = w[k:] + w[:k]
    assert trace_moment(blocks, rotated) == pytest.approx(trace_moment(blocks, w))
