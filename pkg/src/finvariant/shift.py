"""Patterns on finite windows of the group, the left shift action, pullback
names of finite actions, empirical distributions and l1 pattern distances.

A window is a shortlex-sorted tuple of words.  Distributions key their
entries by the tuple of symbols aligned to the window, which keeps the hot
counting loops allocation-light; ``Pattern`` objects wrap the same data for
the single-pattern operations.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product as iter_product
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .actions import FiniteAction
from .errors import InputError
from .freegroup import FreeGroupCtx, Word, inv, mul, sort_words, word_sort_key


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple

    def __post_init__(self):
        if not self.symbols:
            raise InputError("alphabet must be nonempty")
        if len(set(self.symbols)) != len(self.symbols):
            raise InputError("alphabet symbols must be distinct")


class Pattern:
    """A total assignment window -> symbols, domain canonically shortlex-sorted."""

    __slots__ = ("domain", "values", "_index")

    def __init__(self, domain: Sequence[Word], values: Sequence):
        if len(domain) != len(values):
            raise InputError("pattern needs one value per domain word")
        order = sorted(range(len(domain)), key=lambda k: word_sort_key(domain[k]))
        dom = tuple(domain[k] for k in order)
        if len(set(dom)) != len(dom):
            raise InputError("pattern domain has repeated words")
        object.__setattr__(self, "domain", dom)
        object.__setattr__(self, "values", tuple(values[k] for k in order))
        object.__setattr__(self, "_index", {w: k for k, w in enumerate(dom)})

    def __setattr__(self, name, value):
        raise AttributeError("Pattern is immutable")

    @classmethod
    def from_dict(cls, mapping: Mapping[Word, object]) -> "Pattern":
        items = list(mapping.items())
        return cls([w for w, _ in items], [v for _, v in items])

    def __contains__(self, w: Word) -> bool:
        return w in self._index

    def __getitem__(self, w: Word):
        try:
            return self.values[self._index[w]]
        except KeyError:
            raise InputError(f"word {w} outside pattern domain") from None

    def get(self, w: Word, default=None):
        k = self._index.get(w)
        return default if k is None else self.values[k]

    def as_dict(self) -> dict:
        return dict(zip(self.domain, self.values))

    def restrict(self, words: Iterable[Word]) -> "Pattern":
        ws = list(words)
        return Pattern(ws, [self[w] for w in ws])

    def __eq__(self, other):
        return (
            isinstance(other, Pattern)
            and self.domain == other.domain
            and self.values == other.values
        )

    def __hash__(self):
        return hash((self.domain, self.values))

    def __repr__(self):
        return f"Pattern({dict(zip(self.domain, self.values))!r})"


def shift_pattern(g: Word, p: Pattern) -> Pattern:
    """Left shift: (g.p)(f) = p(g^-1 f), so the domain moves to g * domain."""
    g_inv = inv(g)
    new_domain = [mul(g, w) for w in p.domain]
    return Pattern(new_domain, [p[mul(g_inv, w)] for w in new_domain])


class PatternDistribution:
    """Probabilities of patterns on a fixed window.

    ``probs`` maps symbol tuples (aligned to the window order) to weights;
    weights may be floats or Fractions and must sum to 1.
    """

    __slots__ = ("window", "probs")

    def __init__(self, window: Sequence[Word], probs: Mapping[tuple, object], tol: float = 1e-12):
        win = sort_words(window)
        if win != tuple(window):
            raise InputError("window must be shortlex-sorted")
        for key in probs:
            if len(key) != len(win):
                raise InputError("distribution key does not match window size")
        total = sum(probs.values())
        if abs(float(total) - 1.0) > tol:
            raise InputError(f"probabilities sum to {float(total)}, not 1")
        if any(float(p) < -tol for p in probs.values()):
            raise InputError("negative probability")
        self.window = win
        self.probs = dict(probs)

    def is_exact(self) -> bool:
        return all(isinstance(p, (Fraction, int)) for p in self.probs.values())

    def project(self, subwindow: Sequence[Word]) -> "PatternDistribution":
        sub = sort_words(subwindow)
        index = {w: k for k, w in enumerate(self.window)}
        try:
            cols = [index[w] for w in sub]
        except KeyError as exc:
            raise InputError(f"projection window not contained: {exc}") from None
        out: dict[tuple, object] = {}
        for key, p in self.probs.items():
            small = tuple(key[c] for c in cols)
            out[small] = out.get(small, 0) + p
        return PatternDistribution(sub, out)

    def pattern_items(self):
        for key, p in self.probs.items():
            yield Pattern(self.window, key), p

    def to_json(self, ctx: FreeGroupCtx) -> dict:
        radius = max((len(w) for w in self.window), default=0)
        if self.window != ctx.ball(radius):
            raise InputError("json serialization requires a ball window")
        entries = []
        for key in sorted(self.probs, key=repr):
            p = self.probs[key]
            pattern = {ctx.format(w): key[k] for k, w in enumerate(self.window)}
            if isinstance(p, Fraction):
                entries.append({"pattern": pattern, "p": {"num": p.numerator, "den": p.denominator}})
            else:
                entries.append({"pattern": pattern, "p": float(p)})
        return {"window_radius": radius, "entries": entries}

    @classmethod
    def from_json(cls, ctx: FreeGroupCtx, data: dict) -> "PatternDistribution":
        try:
            radius = int(data["window_radius"])
            entries = data["entries"]
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed distribution json: {exc}") from exc
        window = ctx.ball(radius)
        probs: dict[tuple, object] = {}
        for entry in entries:
            pat = {ctx.parse(k): v for k, v in entry["pattern"].items()}
            if set(pat) != set(window):
                raise InputError("distribution entry does not cover the window")
            key = tuple(pat[w] for w in window)
            p = entry["p"]
            probs[key] = Fraction(p["num"], p["den"]) if isinstance(p, dict) else float(p)
        return cls(window, probs)


def l1_distance(d1: PatternDistribution, d2: PatternDistribution):
    """l1 distance of two distributions on the same window; range [0, 2]."""
    if d1.window != d2.window:
        raise InputError("l1 distance needs matching windows")
    keys = set(d1.probs) | set(d2.probs)
    return sum(abs(d1.probs.get(k, 0) - d2.probs.get(k, 0)) for k in keys)


def d_star(ctx: FreeGroupCtx, d1: PatternDistribution, d2: PatternDistribution):
    """Sum over generators of the l1 distance of the {e, s_i} pair marginals."""
    total = 0
    for i in range(1, ctx.rank + 1):
        window = sort_words([(), (i,)])
        total += l1_distance(d1.project(window), d2.project(window))
    return total


def window_columns(ctx: FreeGroupCtx, action: FiniteAction, window: Sequence[Word]) -> list[tuple[int, ...]]:
    """Per-window-word vertex lookup tables: entry g gives sigma(g)^-1 v."""
    return [action.word_perm(inv(g)) for g in window]


def pullback_name(ctx: FreeGroupCtx, action: FiniteAction, labels: Sequence, v: int, m: int) -> Pattern:
    """The pullback name at vertex v on the radius-m ball: g -> x(sigma(g)^-1 v).

    Walks the ball tree, extending by one letter at a time, so each cell
    costs a single permutation lookup.
    """
    tree = ctx.ball_tree(m)
    verts = [0] * len(tree)
    verts[0] = v
    values = [None] * len(tree)
    values[0] = labels[v]
    for k in range(1, len(tree)):
        _, parent, letter = tree[k]
        # sigma((g s)^-1) v = sigma(s)^-1 sigma(g^-1) v
        u = action.letter_perm(-letter)[verts[parent]]
        verts[k] = u
        values[k] = labels[u]
    return Pattern([entry[0] for entry in tree], values)


def _pullback_keys(ctx, action, labels, window):
    cols = window_columns(ctx, action, window)
    n = action.n
    return [tuple(labels[col[v]] for col in cols) for v in range(n)]


def empirical_distribution(
    ctx: FreeGroupCtx, action: FiniteAction, labels: Sequence, m: int
) -> PatternDistribution:
    """Empirical distribution of pullback names, projected to the radius-m ball.

    Probabilities come out as exact multiples of 1/n.
    """
    window = ctx.ball(m)
    n = action.n
    counts: dict[tuple, int] = {}
    for key in _pullback_keys(ctx, action, labels, window):
        counts[key] = counts.get(key, 0) + 1
    return PatternDistribution(window, {k: Fraction(c, n) for k, c in counts.items()})


def empirical_product_distribution(
    ctx: FreeGroupCtx, action: FiniteAction, labels: Sequence, labels2: Sequence, m: int
) -> PatternDistribution:
    """Joint empirical distribution of a paired labeling; keys are pairs of
    symbol tuples, packaged as one tuple per vertex."""
    window = ctx.ball(m)
    n = action.n
    keys1 = _pullback_keys(ctx, action, labels, window)
    keys2 = _pullback_keys(ctx, action, labels2, window)
    counts: dict[tuple, int] = {}
    for k1, k2 in zip(keys1, keys2):
        key = ((k1, k2),)
        counts[key] = counts.get(key, 0) + 1
    return PatternDistribution(((),), {k: Fraction(c, n) for k, c in counts.items()})


@dataclass(frozen=True)
class BlockCode:
    """A continuous observable with window radius w: a dense table from
    patterns on the radius-w ball to output symbols."""

    window_radius: int
    alphabet: Alphabet
    table: Mapping[tuple, object]

    def __post_init__(self):
        size = len(self.alphabet.symbols)
        for key in self.table:
            for sym in key:
                if sym not in self.alphabet.symbols:
                    raise InputError(f"table key uses unknown symbol {sym!r}")
        # density is checked against the key length; apply_block_code verifies
        # that length against the actual ball of the window radius
        lengths = {len(k) for k in self.table}
        if len(lengths) != 1:
            raise InputError("block code table keys must share the window size")
        (cells,) = lengths
        if len(self.table) != size**cells:
            raise InputError(
                f"block code table must be total: expected {size ** cells} entries, got {len(self.table)}"
            )


def identity_code(alphabet: Alphabet) -> BlockCode:
    return BlockCode(0, alphabet, {(s,): s for s in alphabet.symbols})


def join_code(ctx: FreeGroupCtx, alphabet: Alphabet, m: int) -> BlockCode:
    """The radius-m join observable: a pattern maps to itself as a tuple."""
    cells = len(ctx.ball(m))
    table = {key: key for key in iter_product(alphabet.symbols, repeat=cells)}
    return BlockCode(m, alphabet, table)


def apply_block_code(
    ctx: FreeGroupCtx, code: BlockCode, action: FiniteAction, labels: Sequence
) -> tuple:
    """Recode a labeling through the observable: y(v) = code(pullback name at v)."""
    window = ctx.ball(code.window_radius)
    if any(len(k) != len(window) for k in code.table):
        raise InputError("block code table does not match the window ball")
    out = []
    for key in _pullback_keys(ctx, action, labels, window):
        try:
            out.append(code.table[key])
        except KeyError:
            raise InputError(f"block code table missing pattern {key!r}") from None
    return tuple(out)
