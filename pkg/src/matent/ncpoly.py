"""Words and *-polynomials in noncommuting self-adjoint generators.

A word is a tuple of 1-based generator indices; the empty tuple is the unit.
Since generators are self-adjoint, the adjoint of a word is its reversal, and
trace functionals are constant on cyclic rotations. The canonical
representative of a word is therefore the lexicographic minimum over all
rotations of the word and of its reversal; storing one value per canonical
class is enough to recover every word's trace value (up to conjugation for
the reversed orientation).
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence, Tuple

import numpy as np

__all__ = [
    "Word",
    "star_word",
    "word_rotations",
    "canonical_class",
    "is_reversal_symmetric",
    "all_words",
    "canonical_classes",
    "NcPoly",
    "trace_moment",
]

Word = Tuple[int, ...]


def star_word(word: Word) -> Word:
    """Adjoint of a word of self-adjoint generators: the reversal."""
    return tuple(reversed(word))


def word_rotations(word: Word):
    """All cyclic rotations of a word (the word itself included)."""
    w = tuple(word)
    return [w[i:] + w[:i] for i in range(max(len(w), 1))]


def canonical_class(word: Word) -> Word:
    """Lexicographically minimal rotation of the word or its reversal."""
    w = tuple(word)
    if not w:
        return w
    return min(min(word_rotations(w)), min(word_rotations(star_word(w))))


def is_reversal_symmetric(word: Word) -> bool:
    """True when the reversed word is a cyclic rotation of the word.

    For such classes the trace value is forced to be real on self-adjoint
    tuples; chiral classes (first appearing at length 4 for 3 generators,
    length 6 for 2) can carry a genuinely complex trace.
    """
    w = tuple(word)
    return star_word(w) in word_rotations(w)


def all_words(n: int, max_degree: int, min_degree: int = 0):
    """Every word in ``n`` generators with degree in [min_degree, max_degree]."""
    if n < 1:
        raise ValueError("need at least one generator")
    out = []
    for k in range(min_degree, max_degree + 1):
        if k == 0:
            out.append(())
            continue
        words = [()]
        for _ in range(k):
            words = [w + (g,) for w in words for g in range(1, n + 1)]
        out.extend(words)
    return out


def canonical_classes(n: int, max_degree: int, min_degree: int = 0):
    """Canonical class representatives with degree in the given range, sorted
    by (degree, word)."""
    seen = set()
    for w in all_words(n, max_degree, min_degree):
        seen.add(canonical_class(w))
    return sorted(seen, key=lambda w: (len(w), w))


def _validate_word(word: Iterable[int], n: int) -> Word:
    w = tuple(int(g) for g in word)
    for g in w:
        if not 1 <= g <= n:
            raise ValueError(f"generator index {g} outside 1..{n}")
    return w


class NcPoly:
    """A *-polynomial: finite complex combination of words.

    Supports the ring operations, the adjoint (``star``), and evaluation on a
    tuple of matrices. Zero-coefficient terms are dropped on construction.
    """

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms: Mapping[Word, complex]):
        if n < 1:
            raise ValueError("need at least one generator")
        clean = {}
        for word, coeff in terms.items():
            w = _validate_word(word, n)
            c = complex(coeff)
            if c != 0:
                clean[w] = clean.get(w, 0.0) + c
        self.n = int(n)
        self.terms = {w: c for w, c in clean.items() if c != 0}

    @classmethod
    def zero(cls, n: int) -> "NcPoly":
        return cls(n, {})

    @classmethod
    def one(cls, n: int) -> "NcPoly":
        return cls(n, {(): 1.0})

    @classmethod
    def generator(cls, n: int, i: int) -> "NcPoly":
        return cls(n, {(i,): 1.0})

    @classmethod
    def from_word(cls, n: int, word: Iterable[int], coeff: complex = 1.0) -> "NcPoly":
        return cls(n, {tuple(word): coeff})

    @property
    def degree(self) -> int:
        return max((len(w) for w in self.terms), default=0)

    def star(self) -> "NcPoly":
        return NcPoly(self.n, {star_word(w): c.conjugate() for w, c in self.terms.items()})

    def is_self_adjoint(self, tol: float = 1e-12) -> bool:
        adj = self.star().terms
        words = set(self.terms) | set(adj)
        return all(abs(self.terms.get(w, 0.0) - adj.get(w, 0.0)) <= tol for w in words)

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other):
        other = self._coerce(other)
        merged = dict(self.terms)
        for w, c in other.terms.items():
            merged[w] = merged.get(w, 0.0) + c
        return NcPoly(self.n, merged)

    def __radd__(self, other):
        return self.__add__(other)

    def __neg__(self):
        return NcPoly(self.n, {w: -c for w, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return NcPoly(self.n, {w: other * c for w, c in self.terms.items()})
        other = self._coerce(other)
        prod: dict = {}
        for w1, c1 in self.terms.items():
            for w2, c2 in other.terms.items():
                w = w1 + w2
                prod[w] = prod.get(w, 0.0) + c1 * c2
        return NcPoly(self.n, prod)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self.__mul__(other)
        return self._coerce(other).__mul__(self)

    def _coerce(self, other) -> "NcPoly":
        if isinstance(other, NcPoly):
            if other.n != self.n:
                raise ValueError("mixed generator counts")
            return other
        if isinstance(other, (int, float, complex)):
            return NcPoly(self.n, {(): other})
        raise TypeError(f"cannot combine NcPoly with {type(other).__name__}")

    def __eq__(self, other):
        return (isinstance(other, NcPoly) and other.n == self.n
                and other.terms == self.terms)

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    def __repr__(self):
        if not self.terms:
            return "NcPoly(0)"
        bits = []
        for w, c in sorted(self.terms.items(), key=lambda t: (len(t[0]), t[0])):
            mono = "1" if not w else "*".join(f"x{g}" for g in w)
            bits.append(f"({c:.6g})*{mono}")
        return "NcPoly(" + " + ".join(bits) + ")"

    def scalar_coeffs(self) -> np.ndarray:
        """Coefficients by power for single-generator polynomials.

        Returns the real vector ``c`` with ``p = sum_k c[k] x^k``; only valid
        when ``n == 1`` and the polynomial is self-adjoint (real coefficients).
        """
        if self.n != 1:
            raise ValueError("scalar_coeffs needs a single-generator polynomial")
        coeffs = np.zeros(self.degree + 1)
        for w, c in self.terms.items():
            if abs(c.imag) > 1e-12:
                raise ValueError("complex coefficient in a scalar polynomial")
            coeffs[len(w)] = c.real
        return coeffs

    def evaluate(self, blocks: Sequence[np.ndarray]) -> np.ndarray:
        """Value of the polynomial on a tuple of matrices."""
        if len(blocks) != self.n:
            raise ValueError(f"expected {self.n} blocks, got {len(blocks)}")
        N = blocks[0].shape[0]
        out = np.zeros((N, N), dtype=complex)
        eye = np.eye(N)
        for w, c in self.terms.items():
            if not w:
                out += c * eye
                continue
            prod = blocks[w[0] - 1]
            for g in w[1:]:
                prod = prod @ blocks[g - 1]
            out += c * prod
        return out


def trace_moment(blocks: Sequence[np.ndarray], word: Word) -> complex:
    """Normalized trace (1/N) Tr of the word evaluated on matrices."""
    w = tuple(word)
    if not w:
        return 1.0 + 0.0j
    prod = blocks[w[0] - 1]
    for g in w[1:]:
        prod = prod @ blocks[g - 1]
    return complex(np.trace(prod) / prod.shape[0])
