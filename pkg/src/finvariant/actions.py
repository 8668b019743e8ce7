"""Finite actions of a free group: r permutations of [n], sampling and
exhaustive enumeration of all homomorphisms into Sym(n)."""

from __future__ import annotations

import hashlib
import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Iterator

from .errors import InputError, ResourceCapError
from .freegroup import Word


def derive_seed(seed: int, *indices: int) -> int:
    """Stable per-task seed so parallel draws are order-independent."""
    tag = ":".join(str(x) for x in (seed, *indices)).encode()
    return int.from_bytes(hashlib.sha256(tag).digest()[:8], "big")


@dataclass(frozen=True)
class FiniteAction:
    """A homomorphism into Sym(n), stored as one permutation per generator.

    ``perms[i-1][v]`` is the image of vertex v under generator s_i.  Being a
    free group there are no relations to check; any r-tuple of permutations
    is a valid action.
    """

    n: int
    perms: tuple[tuple[int, ...], ...]
    _inv: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for p in self.perms:
            if sorted(p) != list(range(self.n)):
                raise InputError("each generator image must be a permutation of [n]")
        invs = []
        for p in self.perms:
            q = [0] * self.n
            for v, w in enumerate(p):
                q[w] = v
            invs.append(tuple(q))
        object.__setattr__(self, "_inv", tuple(invs))

    @property
    def rank(self) -> int:
        return len(self.perms)

    def letter_perm(self, letter: int) -> tuple[int, ...]:
        """Permutation of the signed letter: sigma(s_i) or its inverse."""
        return self.perms[letter - 1] if letter > 0 else self._inv[-letter - 1]

    def word_perm(self, word: Word) -> tuple[int, ...]:
        """Permutation of a word; composition applies the rightmost letter first."""
        arr = list(range(self.n))
        for letter in reversed(word):
            p = self.letter_perm(letter)
            arr = [p[v] for v in arr]
        return tuple(arr)

    def apply(self, word: Word, v: int) -> int:
        for letter in reversed(word):
            v = self.letter_perm(letter)[v]
        return v

    def to_json(self) -> dict:
        return {"n": self.n, "rank": self.rank, "perms": [list(p) for p in self.perms]}

    @classmethod
    def from_json(cls, data: dict) -> "FiniteAction":
        try:
            n = int(data["n"])
            perms = tuple(tuple(int(v) for v in p) for p in data["perms"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed action json: {exc}") from exc
        return cls(n, perms)


@dataclass(frozen=True)
class Microstate:
    """A labeling of [n], optionally paired with a second labeling."""

    labels: tuple
    labels2: tuple | None = None

    def __post_init__(self):
        if self.labels2 is not None and len(self.labels2) != len(self.labels):
            raise InputError("paired labelings must share n")

    @property
    def n(self) -> int:
        return len(self.labels)


def sample_action(n: int, rank: int, seed: int) -> FiniteAction:
    """Uniform draw from Hom(G, Sym(n)): one Fisher-Yates shuffle per generator."""
    rng = random.Random(seed)
    perms = []
    for _ in range(rank):
        arr = list(range(n))
        for i in range(n - 1, 0, -1):
            j = rng.randint(0, i)
            arr[i], arr[j] = arr[j], arr[i]
        perms.append(tuple(arr))
    return FiniteAction(n, tuple(perms))


def hom_count(n: int, rank: int) -> int:
    return math.factorial(n) ** rank


def enumerate_actions(n: int, rank: int, cap: int = 10**6) -> Iterator[FiniteAction]:
    """All of Hom(G, Sym(n)) in a fixed lexicographic order."""
    total = hom_count(n, rank)
    if total > cap:
        raise ResourceCapError(f"{total} = n!^r homomorphisms exceeds cap {cap}")
    perms = list(itertools.permutations(range(n)))
    for combo in itertools.product(perms, repeat=rank):
        yield FiniteAction(n, combo)
