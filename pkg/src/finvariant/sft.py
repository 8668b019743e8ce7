"""Constraint systems on shift spaces: forbidden-pattern checks over finite
actions, the axiom verifier for bounded orbit-change configurations, and a
budgeted backtracking sampler for constrained labelings.

The orbit-change alphabet assigns to every signed generator a word of length
at most rho.  A configuration is admissible when every pullback pattern on
the radius rho^2+1 ball satisfies:

  Axiom 1:  z_e(s) * z_s(s^-1) = e for every signed generator s;
  Axiom 2:  every h of length <= rho has exactly one reduced word
            s_1 ... s_n with n <= rho^2 + 1 whose telescoped product
            z_e(s_1) z_{s_1}(s_2) ... equals h, and that witness satisfies
            the geodesic bound n <= rho |h|.

Membership is predicate-backed: the forbidden-pattern set is the complement
of the axiom-satisfying patterns and is never materialized.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from itertools import product as iter_product
from typing import Callable, Iterator, Sequence

from .actions import FiniteAction, Microstate, derive_seed
from .errors import InputError
from .freegroup import IDENTITY, FreeGroupCtx, Word, inv, mul
from .shift import Pattern, pullback_name


def letter_index(letter: int) -> int:
    """Position of a signed letter in the canonical letter order +1,-1,+2,-2,..."""
    return 2 * (abs(letter) - 1) + (0 if letter > 0 else 1)


@dataclass(frozen=True)
class OrbitAlphabet:
    """Symbols are tuples of words, one per signed generator, each of length
    at most rho."""

    ctx: FreeGroupCtx
    rho: int

    def size(self) -> int:
        return self.ctx.ball_size(self.rho) ** (2 * self.ctx.rank)

    def symbols(self) -> Iterator[tuple]:
        ball = self.ctx.ball(self.rho)
        return iter_product(ball, repeat=2 * self.ctx.rank)

    def identity_symbol(self) -> tuple:
        return tuple((letter,) for letter in self.ctx.letters)

    def symbol_from_map(self, images: dict) -> tuple:
        sym = tuple(images[letter] for letter in self.ctx.letters)
        for w in sym:
            if len(w) > self.rho:
                raise InputError(f"entry {w} exceeds displacement {self.rho}")
        return sym


def symbol_entry(symbol: tuple, letter: int) -> Word:
    return symbol[letter_index(letter)]


@dataclass(frozen=True)
class SftSpec:
    """Forbidden-pattern description of a constraint system.

    Either an explicit list of forbidden patterns (``nearest_neighbor`` when
    every domain is an {e, s_i} pair) or a predicate over patterns on the
    radius ``predicate_radius`` ball.  ``edge_filter`` is an optional sound
    but incomplete pairwise condition used by the sampler for early pruning.
    """

    alphabet: tuple | None = None
    forbidden: tuple = ()
    nearest_neighbor: bool = False
    predicate: Callable[[Pattern], bool] | None = None
    predicate_radius: int | None = None
    edge_filter: Callable | None = None
    builtin: str | None = None
    rho: int | None = None

    def __post_init__(self):
        if self.predicate is not None and self.predicate_radius is None:
            raise InputError("predicate specs need a window radius")
        if self.nearest_neighbor:
            for w in self.forbidden:
                if len(w.domain) != 2 or w.domain[0] != IDENTITY or len(w.domain[1]) != 1 or w.domain[1][0] < 0:
                    raise InputError("nearest-neighbor patterns live on {e, s_i} domains")

    @property
    def forbidden_pairs(self) -> frozenset:
        """(a, b, i) triples excluded along generator edges; nearest-neighbor only."""
        if not self.nearest_neighbor:
            raise InputError("forbidden pairs only defined for nearest-neighbor specs")
        pairs = set()
        for w in self.forbidden:
            i = w.domain[1][0]
            pairs.add((w[IDENTITY], w[w.domain[1]], i))
        return frozenset(pairs)

    def to_json(self, ctx: FreeGroupCtx) -> dict:
        if self.builtin:
            return {"builtin": self.builtin, "rho": self.rho}
        return {
            "alphabet": list(self.alphabet or ()),
            "forbidden": [
                {ctx.format(g): w[g] for g in w.domain} for w in self.forbidden
            ],
            "nearest_neighbor": self.nearest_neighbor,
        }

    @classmethod
    def from_json(cls, ctx: FreeGroupCtx, data: dict) -> "SftSpec":
        if "builtin" in data:
            if data["builtin"] != "z_rho":
                raise InputError(f"unknown builtin spec {data['builtin']!r}")
            return zrho_spec(ctx, int(data["rho"]))
        try:
            forbidden = tuple(
                Pattern.from_dict({ctx.parse(k): v for k, v in pat.items()})
                for pat in data["forbidden"]
            )
            return cls(
                alphabet=tuple(data["alphabet"]),
                forbidden=forbidden,
                nearest_neighbor=bool(data.get("nearest_neighbor", False)),
            )
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed sft json: {exc}") from exc


def nn_spec(alphabet: Sequence, forbidden_pairs: Sequence[tuple]) -> SftSpec:
    """Nearest-neighbor constraint system from (a, b, i) forbidden triples."""
    patterns = tuple(
        Pattern([IDENTITY, (i,)], [a, b]) for (a, b, i) in forbidden_pairs
    )
    return SftSpec(alphabet=tuple(alphabet), forbidden=patterns, nearest_neighbor=True)


# ---------------------------------------------------------------------------
# the axiom verifier
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AxiomsReport:
    ok: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.ok


def telescope_walk(
    ctx: FreeGroupCtx, pattern: Pattern, base: Word, max_len: int
) -> Iterator[tuple[Word, Word]]:
    """All (reduced word u, telescoped product) pairs with 1 <= |u| <= max_len.

    The product of u = s_1...s_n from ``base`` is
    z_{base}(s_1) z_{base s_1}(s_2) ... z_{base s_1..s_{n-1}}(s_n); every
    prefix position base * s_1..s_{k-1} must lie in the pattern domain.
    """
    letters = ctx.letters
    stack = [(IDENTITY, IDENTITY)]
    while stack:
        prefix, prod = stack.pop()
        pos = mul(base, prefix)
        sym = pattern.get(pos)
        if sym is None:
            raise InputError(f"pattern domain misses position {pos}")
        last = prefix[-1] if prefix else 0
        for letter in reversed(letters):
            if letter == -last:
                continue
            word = prefix + (letter,)
            new_prod = mul(prod, symbol_entry(sym, letter))
            yield word, new_prod
            if len(word) < max_len:
                stack.append((word, new_prod))


def axioms_check(ctx: FreeGroupCtx, rho: int, pattern: Pattern) -> AxiomsReport:
    """Verify both axioms for a pattern on the radius rho^2+1 ball.

    One walk over all reduced words up to length rho^2+1 collects every
    telescope witness; each target h in the radius-rho ball must then have
    exactly one witness, of length at most rho|h|.  A target whose only
    witnesses exceed the geodesic bound is reported distinctly.
    """
    if rho < 1:
        raise InputError("rho must be >= 1")
    depth = rho * rho + 1
    needed = set(ctx.ball(depth))
    if not needed.issubset(set(pattern.domain)):
        raise InputError(f"pattern must cover the radius-{depth} ball")
    base_sym = pattern[IDENTITY]
    for letter in ctx.letters:
        out = symbol_entry(base_sym, letter)
        back = symbol_entry(pattern[(letter,)], -letter)
        if mul(out, back) != IDENTITY:
            return AxiomsReport(
                False,
                f"axiom 1 fails for letter {ctx.letter_name(letter)}: "
                f"{ctx.format(out)} * {ctx.format(back)} != e",
            )
    targets = {h: [] for h in ctx.ball(rho)}
    for word, prod in telescope_walk(ctx, pattern, IDENTITY, depth):
        if prod in targets:
            targets[prod].append(word)
    for h, witnesses in targets.items():
        if h == IDENTITY:
            # the empty word is the implicit witness; any other breaks uniqueness
            if witnesses:
                return AxiomsReport(
                    False,
                    f"axiom 2 fails: nonempty witness {ctx.format(witnesses[0])} telescopes to e",
                )
            continue
        if not witnesses:
            return AxiomsReport(False, f"axiom 2 fails: no witness for {ctx.format(h)}")
        if len(witnesses) > 1:
            ws = ", ".join(ctx.format(u) for u in witnesses[:3])
            return AxiomsReport(
                False, f"axiom 2 fails: multiple witnesses for {ctx.format(h)}: {ws}"
            )
        if len(witnesses[0]) > rho * len(h):
            return AxiomsReport(
                False,
                f"axiom 2 fails: witness for {ctx.format(h)} has length "
                f"{len(witnesses[0])}, beyond the geodesic bound {rho * len(h)}",
            )
    return AxiomsReport(True)


def _zrho_edge_filter(ctx: FreeGroupCtx):
    def ok(sym_v: tuple, sym_u: tuple, letter: int) -> bool:
        # necessary pair condition from axiom 1 along the edge u = sigma(letter)^-1 v
        return mul(symbol_entry(sym_v, letter), symbol_entry(sym_u, -letter)) == IDENTITY

    return ok


def zrho_spec(ctx: FreeGroupCtx, rho: int) -> SftSpec:
    """The constraint system whose admissible configurations encode
    displacement-rho orbit-change maps.  Membership is predicate-backed; the
    forbidden set is astronomically large and never materialized."""
    alphabet = tuple(OrbitAlphabet(ctx, rho).symbols())

    def predicate(pattern: Pattern) -> bool:
        return axioms_check(ctx, rho, pattern).ok

    return SftSpec(
        alphabet=alphabet,
        predicate=predicate,
        predicate_radius=rho * rho + 1,
        edge_filter=_zrho_edge_filter(ctx),
        builtin="z_rho",
        rho=rho,
    )


# ---------------------------------------------------------------------------
# checking configurations over finite actions
# ---------------------------------------------------------------------------


def _check_local(ctx: FreeGroupCtx, spec: SftSpec, action: FiniteAction, labels, v: int) -> bool:
    """No forbidden pattern (or predicate failure) at vertex v itself."""
    if spec.predicate is not None:
        return spec.predicate(pullback_name(ctx, action, labels, v, spec.predicate_radius))
    for w in spec.forbidden:
        if all(labels[action.apply(inv(f), v)] == w[f] for f in w.domain):
            return False
    return True


def sft_check_all(ctx: FreeGroupCtx, spec: SftSpec, action: FiniteAction, labels) -> bool:
    """Every pullback name avoids the forbidden set.

    For nearest-neighbor specs this walks each Schreier edge once; the
    equivalence of that fast path with the general check is part of the test
    suite.
    """
    n = action.n
    if spec.predicate is None and spec.nearest_neighbor:
        pairs = spec.forbidden_pairs
        if not pairs:
            return True
        by_gen: dict[int, set] = {}
        for a, b, i in pairs:
            by_gen.setdefault(i, set()).add((a, b))
        for i, bad in by_gen.items():
            perm_inv = action.letter_perm(-i)
            for v in range(n):
                if (labels[v], labels[perm_inv[v]]) in bad:
                    return False
        return True
    return all(_check_local(ctx, spec, action, labels, v) for v in range(n))


def orbit_of(action: FiniteAction, v: int) -> tuple[int, ...]:
    """Vertices reachable from v under all generators and inverses."""
    seen = {v}
    queue = [v]
    while queue:
        u = queue.pop(0)
        for i in range(1, action.rank + 1):
            for w in (action.letter_perm(i)[u], action.letter_perm(-i)[u]):
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
    return tuple(sorted(seen))


def sft_check_vertex(
    ctx: FreeGroupCtx, spec: SftSpec, action: FiniteAction, labels, v: int
) -> bool:
    """Whether the pullback name at v lies in the constraint system.

    Shifts of the pullback name realize every vertex in the orbit of v, so
    this inspects the whole orbit, not just v.
    """
    return all(_check_local(ctx, spec, action, labels, u) for u in orbit_of(action, v))


# ---------------------------------------------------------------------------
# sampling admissible configurations
# ---------------------------------------------------------------------------


class _Budget:
    __slots__ = ("left",)

    def __init__(self, total: int):
        self.left = total

    def spend(self) -> bool:
        self.left -= 1
        return self.left >= 0


class _BudgetExhausted(Exception):
    pass


def _bfs_vertex_order(action: FiniteAction) -> list[int]:
    n = action.n
    seen = [False] * n
    order: list[int] = []
    for start in range(n):
        if seen[start]:
            continue
        seen[start] = True
        queue = [start]
        while queue:
            u = queue.pop(0)
            order.append(u)
            for i in range(1, action.rank + 1):
                for w in (action.letter_perm(i)[u], action.letter_perm(-i)[u]):
                    if not seen[w]:
                        seen[w] = True
                        queue.append(w)
    return order


def sample_sft_config(
    ctx: FreeGroupCtx,
    spec: SftSpec,
    action: FiniteAction,
    seed: int,
    budget: int = 20000,
    restarts: int = 4,
    hint: Microstate | None = None,
) -> Microstate | None:
    """Backtracking search for a labeling passing the constraint system.

    Vertices are assigned in BFS order from vertex 0; symbol order is the
    hint's symbol first, then a seed-shuffled pass over the alphabet.  Each
    restart derives a fresh seed.  The search is budgeted rather than
    exhaustive, so ``None`` means "not found", which is not an error.
    Deterministic given (seed, action, hint).
    """
    if spec.alphabet is None:
        raise InputError("sampling needs an explicit alphabet")
    n = action.n
    order = _bfs_vertex_order(action)
    pos = {v: k for k, v in enumerate(order)}
    symbols = list(spec.alphabet)

    # constraints indexed by the BFS position at which they become decidable
    checks_at: list[list] = [[] for _ in range(n)]

    if spec.edge_filter is not None:
        seen_pairs = set()
        for v in range(n):
            for letter in ctx.letters:
                u = action.letter_perm(-letter)[v]
                # (v, u, s) and (u, v, s^-1) express the same pair condition
                key = (v, u, letter) if letter > 0 else (u, v, -letter)
                if key in seen_pairs:
                    continue
                seen_pairs.add(key)
                checks_at[max(pos[v], pos[u])].append(("edge", v, u, letter))

    if spec.predicate is not None:
        window = ctx.ball(spec.predicate_radius)
        for v in range(n):
            verts = tuple(action.apply(inv(g), v) for g in window)
            checks_at[max(pos[u] for u in verts)].append(("predicate", v))
    else:
        for w in spec.forbidden:
            cols = [tuple(action.apply(inv(f), v) for v in range(n)) for f in w.domain]
            for v in range(n):
                verts = tuple(col[v] for col in cols)
                checks_at[max(pos[u] for u in verts)].append(
                    ("pattern", verts, w.values)
                )

    def run_checks(assign: list, k: int) -> bool:
        for check in checks_at[k]:
            kind = check[0]
            if kind == "edge":
                _, v, u, letter = check
                if not spec.edge_filter(assign[v], assign[u], letter):
                    return False
            elif kind == "pattern":
                _, verts, values = check
                if all(assign[u] == val for u, val in zip(verts, values)):
                    return False
            else:
                _, v = check
                if not spec.predicate(
                    pullback_name(ctx, action, assign, v, spec.predicate_radius)
                ):
                    return False
        return True

    for restart in range(restarts):
        rng = random.Random(derive_seed(seed, restart))
        per_vertex_symbols = []
        for v in range(n):
            shuffled = symbols[:]
            rng.shuffle(shuffled)
            if hint is not None:
                h = hint.labels[v]
                shuffled = [h] + [s for s in shuffled if s != h]
            per_vertex_symbols.append(shuffled)
        assign: list = [None] * n
        bud = _Budget(budget)

        def backtrack(k: int) -> bool:
            if k == n:
                return True
            v = order[k]
            for sym in per_vertex_symbols[v]:
                if not bud.spend():
                    raise _BudgetExhausted
                assign[v] = sym
                if run_checks(assign, k) and backtrack(k + 1):
                    return True
            assign[v] = None
            return False

        try:
            if backtrack(0):
                return Microstate(tuple(assign))
        except _BudgetExhausted:
            continue
    return None
