"""Reduced-word arithmetic and tree geometry in a rank-r free group.

Words are tuples of nonzero ints: letter ``+i`` is the i-th generator
(1-based), ``-i`` its inverse.  The string form uses one lowercase letter
per generator and the matching uppercase letter for its inverse, so
``"aB"`` is s1 * s2^-1 and ``""`` is the identity.

All enumeration follows shortlex order: first by word length, then
letterwise with a < A < b < B < ...
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .errors import InputError

Word = tuple  # reduced word as a tuple of signed letter indices

IDENTITY: Word = ()


def reduce_word(letters: Iterable[int]) -> Word:
    """Freely reduce a letter sequence; idempotent."""
    out: list[int] = []
    for letter in letters:
        if letter == 0:
            raise InputError("letter index 0 is not a generator")
        if out and out[-1] == -letter:
            out.pop()
        else:
            out.append(letter)
    return tuple(out)


def mul(g: Word, h: Word) -> Word:
    """Product of two reduced words (cancels across the seam)."""
    i = len(g)
    j = 0
    while i > 0 and j < len(h) and g[i - 1] == -h[j]:
        i -= 1
        j += 1
    return g[:i] + h[j:]


def inv(g: Word) -> Word:
    return tuple(-letter for letter in reversed(g))


def word_length(g: Word) -> int:
    return len(g)


def letter_sort_key(letter: int) -> tuple[int, int]:
    # a < A < b < B < ...
    return (abs(letter), 0 if letter > 0 else 1)


def word_sort_key(w: Word) -> tuple:
    return (len(w), tuple(letter_sort_key(letter) for letter in w))


@lru_cache(maxsize=None)
def _ball_tree(rank: int, radius: int) -> tuple[tuple[Word, int, int], ...]:
    """Shortlex ball with parent links: entries (word, parent index, letter).

    The root is (identity, -1, 0).  Each non-root word extends its parent
    by one letter on the right, so parents always precede children.
    """
    letters = [sign * i for i in range(1, rank + 1) for sign in (1, -1)]
    entries: list[tuple[Word, int, int]] = [(IDENTITY, -1, 0)]
    frontier = [(IDENTITY, 0)]
    for _ in range(radius):
        nxt: list[tuple[Word, int]] = []
        for word, idx in frontier:
            last = word[-1] if word else 0
            for letter in letters:
                if letter == -last:
                    continue
                child = word + (letter,)
                entries.append((child, idx, letter))
                nxt.append((child, len(entries) - 1))
        frontier = nxt
    return tuple(entries)


@dataclass(frozen=True)
class FreeGroupCtx:
    """Rank and generator naming for one free group."""

    rank: int
    names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.rank < 1:
            raise InputError(f"rank must be >= 1, got {self.rank}")
        names = self.names or tuple(string.ascii_lowercase[: self.rank])
        if len(names) != self.rank:
            raise InputError("need one name per generator")
        if len(set(names)) != self.rank:
            raise InputError("generator names must be distinct")
        for name in names:
            if len(name) != 1 or name not in string.ascii_lowercase:
                raise InputError(f"generator name must be a lowercase letter: {name!r}")
        object.__setattr__(self, "names", names)

    @property
    def letters(self) -> tuple[int, ...]:
        """All 2r signed letters in shortlex letter order: +1, -1, +2, -2, ..."""
        return tuple(sign * i for i in range(1, self.rank + 1) for sign in (1, -1))

    def letter_name(self, letter: int) -> str:
        name = self.names[abs(letter) - 1]
        return name if letter > 0 else name.upper()

    def parse(self, s: str) -> Word:
        letters = []
        for ch in s:
            low = ch.lower()
            if low not in self.names:
                raise InputError(f"unknown generator letter {ch!r}")
            idx = self.names.index(low) + 1
            letters.append(idx if ch.islower() else -idx)
        return reduce_word(letters)

    def format(self, w: Word) -> str:
        return "".join(self.letter_name(letter) for letter in w)

    def ball(self, radius: int) -> tuple[Word, ...]:
        """All reduced words of length <= radius, in shortlex order."""
        if radius < 0:
            raise InputError("radius must be >= 0")
        return tuple(entry[0] for entry in _ball_tree(self.rank, radius))

    def ball_tree(self, radius: int) -> tuple[tuple[Word, int, int], ...]:
        if radius < 0:
            raise InputError("radius must be >= 0")
        return _ball_tree(self.rank, radius)

    def ball_size(self, radius: int) -> int:
        """Closed-form count of the shortlex ball."""
        if self.rank == 1:
            return 2 * radius + 1
        q = 2 * self.rank - 1
        return 1 + 2 * self.rank * (q**radius - 1) // (q - 1)

    def past_window(self, g1: Word, g2: Word, m: int) -> tuple[Word, ...]:
        """Elements f of the radius-m ball whose geodesic to g1 in the left
        Cayley tree passes through g2.

        Left Cayley edges join g and sg, so the tree distance between f and
        h is the length of h * f^-1.
        """
        if g1 == g2:
            raise InputError("past window requires g1 != g2")
        ball = self.ball(m)
        ball_set = set(ball)
        if g1 not in ball_set or g2 not in ball_set:
            raise InputError("g1 and g2 must lie in the radius-m ball")
        gap = len(mul(g1, inv(g2)))
        out = []
        for f in ball:
            f_inv = inv(f)
            if len(mul(g2, f_inv)) + gap == len(mul(g1, f_inv)):
                out.append(f)
        return tuple(out)


def sort_words(words: Sequence[Word]) -> tuple[Word, ...]:
    return tuple(sorted(words, key=word_sort_key))
