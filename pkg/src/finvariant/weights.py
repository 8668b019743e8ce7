"""Weights, Markov measures on the free-group tree, Shannon entropy, and the
exact free-group entropy functional.

A weight assigns a probability to every symbol (vertex weight) and to every
ordered symbol pair along each generator (edge weight), subject to

  Balanced:    sum_b W(a,b;i) = W(a) = sum_b W(b,a;i)   for every i, a
  Normalized:  sum_a W(a) = 1.

Such a weight determines a unique shift-invariant measure whose pattern
probabilities on connected subtrees factor as

  prod_edges W(p(g), p(g s_i); i) * prod_vertices W(p(g)) ** (1 - deg(g)),

where the tree structure uses right-multiplication edges (g, g s_i).  That
factorization is the computational backbone of everything here.

Entropies of weights with exact rational entries are carried symbolically as
rational combinations of logs of primes, so identities like "the invariant of
a product weight equals the base entropy" hold with exact equality, not just
within float tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product as iter_product
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

from .errors import ConstructionError, InputError, ResourceCapError, WeightError
from .freegroup import FreeGroupCtx, Word, mul, sort_words
from .shift import Pattern, PatternDistribution

Number = object  # float | int | Fraction

BALANCE_TOL = 1e-12


# ---------------------------------------------------------------------------
# exact entropy values
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _factor(n: int) -> tuple[tuple[int, int], ...]:
    """Prime factorization by trial division; inputs stay desk-sized."""
    if n <= 0:
        raise InputError("can only factor positive integers")
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            e = 0
            while n % d == 0:
                n //= d
                e += 1
            out.append((d, e))
        d += 1 if d == 2 else 2
    if n > 1:
        out.append((n, 1))
    return tuple(out)


def _log_combo(x: Fraction) -> dict[int, Fraction]:
    """ln(x) as a rational combination of logs of primes."""
    combo: dict[int, Fraction] = {}
    for p, e in _factor(x.numerator):
        combo[p] = combo.get(p, Fraction(0)) + e
    for p, e in _factor(x.denominator):
        combo[p] = combo.get(p, Fraction(0)) - e
    return {p: c for p, c in combo.items() if c}


def _combo_value(combo: Mapping[int, Fraction]) -> float:
    return sum(float(c) * math.log(p) for p, c in sorted(combo.items()))


class EntropyValue:
    """An extended real in [-inf, inf), optionally with an exact symbolic form.

    The exact form is a dict prime -> rational coefficient representing
    sum c_p * ln(p); two exact values compare by coefficient equality.
    """

    __slots__ = ("value", "combo")

    def __init__(self, value: float, combo: dict[int, Fraction] | None = None):
        self.value = float(value)
        self.combo = combo

    @classmethod
    def exact(cls, combo: Mapping[int, Fraction]) -> "EntropyValue":
        combo = {p: Fraction(c) for p, c in combo.items() if c}
        return cls(_combo_value(combo), combo)

    @classmethod
    def zero(cls) -> "EntropyValue":
        return cls.exact({})

    @classmethod
    def neg_inf(cls) -> "EntropyValue":
        return cls(float("-inf"))

    @property
    def is_exact(self) -> bool:
        return self.combo is not None

    def is_neg_inf(self) -> bool:
        return self.value == float("-inf")

    def __float__(self) -> float:
        return self.value

    def _binop(self, other: "EntropyValue", sign: int) -> "EntropyValue":
        if self.combo is not None and other.combo is not None:
            combo = dict(self.combo)
            for p, c in other.combo.items():
                combo[p] = combo.get(p, Fraction(0)) + sign * c
            return EntropyValue.exact(combo)
        return EntropyValue(self.value + sign * other.value)

    def __add__(self, other: "EntropyValue") -> "EntropyValue":
        return self._binop(other, 1)

    def __sub__(self, other: "EntropyValue") -> "EntropyValue":
        return self._binop(other, -1)

    def scaled(self, c) -> "EntropyValue":
        if self.combo is not None and isinstance(c, (int, Fraction)):
            return EntropyValue.exact({p: Fraction(c) * v for p, v in self.combo.items()})
        return EntropyValue(float(c) * self.value)

    def __eq__(self, other):
        if not isinstance(other, EntropyValue):
            return NotImplemented
        if self.combo is not None and other.combo is not None:
            return self.combo == other.combo
        return self.value == other.value

    def __repr__(self):
        tag = " exact" if self.is_exact else ""
        return f"EntropyValue({self.value!r}{tag})"


def shannon_entropy(probs) -> EntropyValue:
    """Shannon entropy in nats of a distribution given as a mapping or an
    iterable of probabilities; 0 log 0 = 0.  Exact rational inputs produce an
    exact symbolic value."""
    if isinstance(probs, PatternDistribution):
        values = list(probs.probs.values())
    elif isinstance(probs, Mapping):
        values = list(probs.values())
    else:
        values = list(probs)
    total = sum(values)
    if abs(float(total) - 1.0) > 1e-9:
        raise InputError(f"entropy input sums to {float(total)}, not 1")
    if all(isinstance(p, (int, Fraction)) for p in values):
        combo: dict[int, Fraction] = {}
        for p in values:
            p = Fraction(p)
            if p == 0:
                continue
            for q, c in _log_combo(p).items():
                combo[q] = combo.get(q, Fraction(0)) - p * c
        return EntropyValue.exact(combo)
    acc = 0.0
    for p in values:
        p = float(p)
        if p > 0.0:
            acc -= p * math.log(p)
    return EntropyValue(acc)


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Weight:
    """Vertex and edge probabilities defining a Markov measure.

    ``edge`` is keyed by (from_symbol, to_symbol, generator_index) with the
    generator index 1-based; missing keys mean probability zero.
    """

    rank: int
    alphabet: tuple
    vertex: Mapping
    edge: Mapping

    def __post_init__(self):
        if self.rank < 1:
            raise WeightError("weight rank must be >= 1")
        if len(set(self.alphabet)) != len(self.alphabet) or not self.alphabet:
            raise WeightError("alphabet must be nonempty with distinct symbols")
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        object.__setattr__(self, "vertex", dict(self.vertex))
        object.__setattr__(self, "edge", dict(self.edge))

    @property
    def is_exact(self) -> bool:
        entries = list(self.vertex.values()) + list(self.edge.values())
        return all(isinstance(x, (int, Fraction)) for x in entries)

    def vertex_prob(self, a):
        return self.vertex.get(a, 0)

    def edge_prob(self, a, b, i):
        return self.edge.get((a, b, i), 0)

    def validate(self, tol: float = BALANCE_TOL) -> None:
        for a in self.vertex:
            if a not in self.alphabet:
                raise WeightError(f"vertex symbol {a!r} not in alphabet")
        for a, b, i in self.edge:
            if a not in self.alphabet or b not in self.alphabet:
                raise WeightError(f"edge symbols ({a!r},{b!r}) not in alphabet")
            if not 1 <= i <= self.rank:
                raise WeightError(f"edge generator index {i} out of range")
        for x in list(self.vertex.values()) + list(self.edge.values()):
            v = float(x)
            if v < -tol or v > 1 + tol:
                raise WeightError(f"weight entry {v} outside [0, 1]")
        total = sum(self.vertex_prob(a) for a in self.alphabet)
        if abs(float(total) - 1.0) > tol:
            raise WeightError(f"vertex weights sum to {float(total)}, not 1")
        for i in range(1, self.rank + 1):
            for a in self.alphabet:
                row = sum(self.edge_prob(a, b, i) for b in self.alphabet)
                col = sum(self.edge_prob(b, a, i) for b in self.alphabet)
                va = self.vertex_prob(a)
                if abs(float(row - va)) > tol or abs(float(col - va)) > tol:
                    raise WeightError(
                        f"balance fails at symbol {a!r}, generator {i}: "
                        f"row {float(row)}, col {float(col)}, vertex {float(va)}"
                    )
        for a in self.alphabet:
            if float(self.vertex_prob(a)) == 0.0:
                for b in self.alphabet:
                    for i in range(1, self.rank + 1):
                        if float(self.edge_prob(a, b, i)) != 0.0 or float(self.edge_prob(b, a, i)) != 0.0:
                            raise WeightError(
                                f"symbol {a!r} has zero vertex weight but a positive edge"
                            )

    def to_json(self) -> dict:
        def enc(x):
            if isinstance(x, (int, Fraction)):
                f = Fraction(x)
                return {"num": f.numerator, "den": f.denominator}
            return float(x)

        edges = [
            {"from": a, "to": b, "gen": i, "p": enc(p)}
            for (a, b, i), p in sorted(self.edge.items(), key=lambda kv: (kv[0][2], str(kv[0][0]), str(kv[0][1])))
        ]
        return {
            "rank": self.rank,
            "alphabet": list(self.alphabet),
            "vertex": {str(a): enc(self.vertex_prob(a)) for a in self.alphabet},
            "edge": edges,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Weight":
        def dec(x):
            if isinstance(x, dict):
                return Fraction(int(x["num"]), int(x["den"]))
            return float(x)

        try:
            rank = int(data["rank"])
            alphabet = tuple(data["alphabet"])
            vertex = {a: dec(p) for a, p in data["vertex"].items()}
            edge = {
                (e["from"], e["to"], int(e["gen"])): dec(e["p"]) for e in data["edge"]
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed weight json: {exc}") from exc
        w = cls(rank, alphabet, vertex, edge)
        w.validate()
        return w


def bernoulli_weight(base: Mapping, rank: int) -> Weight:
    """Product weight: vertex = base, edge(a,b;i) = base(a) * base(b)."""
    for p in base.values():
        if float(p) < 0:
            raise WeightError("base probabilities must be nonnegative")
    total = sum(base.values())
    if abs(float(total) - 1.0) > BALANCE_TOL:
        raise WeightError("base must sum to 1")
    alphabet = tuple(base)
    edge = {
        (a, b, i): base[a] * base[b]
        for a in alphabet
        for b in alphabet
        for i in range(1, rank + 1)
    }
    w = Weight(rank, alphabet, dict(base), edge)
    w.validate()
    return w


def weight_distance(w1: Weight, w2: Weight):
    """l1 distance over all edge entries (a, b, i)."""
    if w1.alphabet != w2.alphabet or w1.rank != w2.rank:
        raise InputError("weight distance needs matching alphabet and rank")
    keys = set(w1.edge) | set(w2.edge)
    return sum(abs(w1.edge_prob(a, b, i) - w2.edge_prob(a, b, i)) for (a, b, i) in keys)


# ---------------------------------------------------------------------------
# pattern probabilities on subtrees
# ---------------------------------------------------------------------------


def _window_structure(window: Sequence[Word], rank: int):
    """Edges and a spanning order for a connected word set.

    Returns (edges, order) where edges are (parent_pos, child_pos, i, forward)
    in BFS order from position 0 and order lists positions reached.  Raises if
    the set is not connected in the right-Cayley tree.
    """
    index = {w: k for k, w in enumerate(window)}
    adj: list[list[tuple[int, int, bool]]] = [[] for _ in window]
    for k, g in enumerate(window):
        for i in range(1, rank + 1):
            h = mul(g, (i,))
            j = index.get(h)
            if j is not None:
                # edge (g, g s_i): forward from k means pair (sym_k, sym_j)
                adj[k].append((j, i, True))
                adj[j].append((k, i, False))
    seen = [False] * len(window)
    seen[0] = True
    order = [0]
    edges: list[tuple[int, int, int, bool]] = []
    head = 0
    while head < len(order):
        k = order[head]
        head += 1
        for j, i, forward in adj[k]:
            if not seen[j]:
                seen[j] = True
                order.append(j)
                edges.append((k, j, i, forward))
    if not all(seen):
        raise InputError("word set is not connected in the Cayley tree")
    return edges, order


def pattern_probability(w: Weight, pattern: Pattern):
    """Probability of a pattern on a connected subtree under the weight's
    Markov measure.  Domains not containing the identity are translated
    there first; the result is translation-invariant."""
    domain = pattern.domain
    values = pattern.values
    if () not in pattern:
        base = domain[0]
        shifted = Pattern([mul(tuple(-l for l in reversed(base)), g) for g in domain], values)
        return pattern_probability(w, shifted)
    edges, order = _window_structure(domain, w.rank)
    prob = w.vertex_prob(values[order[0]])
    for parent, child, i, forward in edges:
        vp = w.vertex_prob(values[parent])
        if float(vp) == 0.0:
            return 0 if isinstance(vp, (int, Fraction)) else 0.0
        if forward:
            pair = w.edge_prob(values[parent], values[child], i)
        else:
            pair = w.edge_prob(values[child], values[parent], i)
        prob = prob * pair / vp
    return prob


def marginal_distribution(w: Weight, window: Sequence[Word], cap: int = 1 << 22) -> PatternDistribution:
    """Exact finite-window marginal of the weight's Markov measure.

    Enumerates only patterns of positive probability, walking the window in
    spanning-tree order with incremental conditional factors.
    """
    window = sort_words(window)
    if () not in window:
        raise InputError("marginal windows must contain the identity")
    if len(w.alphabet) ** len(window) > cap:
        raise ResourceCapError(
            f"{len(w.alphabet)}^{len(window)} window patterns exceed cap {cap}"
        )
    edges, order = _window_structure(window, w.rank)
    probs: dict[tuple, object] = {}
    values: list = [None] * len(window)

    def extend(step: int, prob):
        if step == len(edges):
            probs[tuple(values)] = probs.get(tuple(values), 0) + prob
            return
        parent, child, i, forward = edges[step]
        vp = w.vertex_prob(values[parent])
        for sym in w.alphabet:
            pair = (
                w.edge_prob(values[parent], sym, i)
                if forward
                else w.edge_prob(sym, values[parent], i)
            )
            if float(pair) == 0.0:
                continue
            values[child] = sym
            extend(step + 1, prob * pair / vp)
        values[child] = None

    for sym in w.alphabet:
        v = w.vertex_prob(sym)
        if float(v) == 0.0:
            continue
        values[order[0]] = sym
        extend(0, v)
    return PatternDistribution(window, probs)


def _window_entropy_enumerate(w: Weight, window: Sequence[Word]) -> EntropyValue:
    dist = marginal_distribution(w, window)
    return shannon_entropy(dist)


def _edge_counts(window: Sequence[Word], rank: int) -> list[int]:
    index = set(window)
    counts = [0] * (rank + 1)
    for g in window:
        for i in range(1, rank + 1):
            if mul(g, (i,)) in index:
                counts[i] += 1
    return counts


def _window_entropy_chain(w: Weight, window: Sequence[Word]) -> EntropyValue:
    """Entropy of the window marginal via the chain rule along the tree.

    The factorized pattern probability is a tree-indexed chain whose one-step
    conditionals have entropy H(edge_i) - H(vertex), so the joint entropy of a
    connected window is H(vertex) + sum_i E_i * (H(edge_i) - H(vertex)) with
    E_i the number of generator-i edges inside the window.  This is an exact
    identity for the measure defined by the weight, not an approximation.
    """
    _window_structure(window, w.rank)  # connectivity check
    h_vertex = shannon_entropy({a: w.vertex_prob(a) for a in w.alphabet})
    counts = _edge_counts(window, w.rank)
    total = h_vertex
    for i in range(1, w.rank + 1):
        pairs = {
            (a, b): w.edge_prob(a, b, i) for a in w.alphabet for b in w.alphabet
        }
        h_edge = shannon_entropy(pairs)
        total = total + (h_edge - h_vertex).scaled(counts[i])
    return total


def window_entropy(
    w: Weight, window: Sequence[Word], method: str = "auto", enum_cap: int = 1 << 18
) -> EntropyValue:
    """Entropy of the measure's marginal on a connected window.

    ``enumerate`` walks every positive-probability pattern; ``chain`` uses
    the exact tree chain rule.  ``auto`` enumerates when the pattern space is
    small (and the weight is float-valued), otherwise uses the chain form.
    The two routes agree and that agreement is part of the test suite.
    """
    window = sort_words(window)
    if method == "enumerate":
        return _window_entropy_enumerate(w, window)
    if method == "chain":
        return _window_entropy_chain(w, window)
    if method != "auto":
        raise InputError(f"unknown entropy method {method!r}")
    if not w.is_exact and len(w.alphabet) ** len(window) <= enum_cap:
        return _window_entropy_enumerate(w, window)
    return _window_entropy_chain(w, window)


# ---------------------------------------------------------------------------
# the entropy functional
# ---------------------------------------------------------------------------


def F_value(
    ctx: FreeGroupCtx,
    w: Weight,
    join_radius: int,
    method: str = "auto",
    cell_cap: int = 20000,
) -> EntropyValue:
    """(1 - 2r) H(ball marginal) + sum_i H(marginal on ball, union s_i ball).

    ``join_radius`` 0 evaluates the functional on the single-site observable.
    """
    if ctx.rank != w.rank:
        raise InputError("context and weight rank differ")
    if join_radius < 0:
        raise InputError("join radius must be >= 0")
    ball = ctx.ball(join_radius)
    if len(ball) > cell_cap:
        raise ResourceCapError(f"ball of radius {join_radius} has {len(ball)} cells, cap {cell_cap}")
    r = ctx.rank
    h_ball = window_entropy(w, ball, method=method)
    total = h_ball.scaled(1 - 2 * r)
    for i in range(1, r + 1):
        union = set(ball)
        union.update(mul((i,), g) for g in ball)
        h_join = window_entropy(w, sort_words(union), method=method)
        total = total + h_join
    return total


def f_markov(ctx: FreeGroupCtx, w: Weight, method: str = "auto") -> EntropyValue:
    """The invariant of the weight's Markov measure; equals the functional at
    radius zero."""
    return F_value(ctx, w, 0, method=method)


@dataclass(frozen=True)
class ConstancyReport:
    rows: tuple[tuple[int, float, float], ...]  # (radius, value, delta vs radius 0)
    tol: float

    @property
    def ok(self) -> bool:
        return all(abs(delta) <= self.tol for _, _, delta in self.rows)

    @property
    def worst(self) -> float:
        return max(abs(delta) for _, _, delta in self.rows)


def constancy_check(
    ctx: FreeGroupCtx, w: Weight, rho_max: int, tol: float = 1e-9, method: str = "auto"
) -> ConstancyReport:
    """The functional of a Markov weight should not depend on the join radius;
    a violation signals a pattern-probability bug."""
    base = float(F_value(ctx, w, 0, method=method))
    rows = []
    for rho in range(rho_max + 1):
        val = float(F_value(ctx, w, rho, method=method))
        rows.append((rho, val, val - base))
    return ConstancyReport(tuple(rows), tol)


# ---------------------------------------------------------------------------
# markovization of finite-window statistics
# ---------------------------------------------------------------------------


def pattern_symbol_name(ctx: FreeGroupCtx, window: Sequence[Word], key: tuple) -> str:
    return ",".join(f"{ctx.format(g)}={key[k]}" for k, g in enumerate(window))


def markovize(
    ctx: FreeGroupCtx, dist: PatternDistribution, tol: float = 1e-9
) -> Weight:
    """Collapse a radius-(m+1) marginal into a weight over the super-alphabet
    of radius-m patterns.

    Vertex weights are the projected pattern probabilities; the edge weight of
    (c, c', i) is the mass of configurations showing c at the identity and c'
    across the s_i edge.  Overlap-inconsistent gluings receive zero mass, so
    the support is a nearest-neighbor constraint system by construction.
    """
    radius = max((len(g) for g in dist.window), default=0)
    if dist.window != ctx.ball(radius) or radius < 1:
        raise InputError("markovize needs a ball window of radius >= 1")
    m = radius - 1
    inner = ctx.ball(m)
    big_index = {g: k for k, g in enumerate(dist.window)}
    inner_cols = [big_index[g] for g in inner]
    shift_cols = []
    for i in range(1, ctx.rank + 1):
        cols = []
        for g in inner:
            h = mul((i,), g)
            if h not in big_index:
                raise InputError("window too small to glue across a generator edge")
            cols.append(big_index[h])
        shift_cols.append(cols)

    base_symbols = sorted({k for key in dist.probs for k in key}, key=repr)
    alphabet = tuple(
        pattern_symbol_name(ctx, inner, key)
        for key in iter_product(base_symbols, repeat=len(inner))
    )
    vertex: dict[str, object] = {}
    edge: dict[tuple, object] = {}
    for key, p in dist.probs.items():
        c = pattern_symbol_name(ctx, inner, tuple(key[k] for k in inner_cols))
        vertex[c] = vertex.get(c, 0) + p
        for i in range(1, ctx.rank + 1):
            cprime = pattern_symbol_name(
                ctx, inner, tuple(key[k] for k in shift_cols[i - 1])
            )
            edge_key = (c, cprime, i)
            edge[edge_key] = edge.get(edge_key, 0) + p
    w = Weight(ctx.rank, alphabet, vertex, edge)
    try:
        w.validate(tol=tol)
    except WeightError as exc:
        raise InputError(f"marginals are not projection-consistent: {exc}") from exc
    return w


# ---------------------------------------------------------------------------
# rationalization
# ---------------------------------------------------------------------------


def _as_fraction_checked(x, q: int):
    if isinstance(x, (int, Fraction)):
        f = Fraction(x)
        return f if f.denominator <= q else None
    f = Fraction(x).limit_denominator(q)
    return f if abs(float(f) - float(x)) <= 1e-12 else None


def _try_exact_passthrough(w: Weight, q: int) -> Weight | None:
    vertex = {}
    edge = {}
    for a in w.alphabet:
        f = _as_fraction_checked(w.vertex_prob(a), q)
        if f is None:
            return None
        vertex[a] = f
    for key, p in w.edge.items():
        f = _as_fraction_checked(p, q)
        if f is None:
            return None
        edge[key] = f
    out = Weight(w.rank, w.alphabet, vertex, edge)
    try:
        out.validate(tol=0.0)
    except WeightError:
        return None
    return out


def _round_vertex(w: Weight, n_total: int) -> dict:
    """Largest-remainder rounding of vertex weights to integers summing to
    n_total, preserving zeros."""
    raw = {a: Fraction(w.vertex_prob(a)) if isinstance(w.vertex_prob(a), (int, Fraction)) else Fraction(float(w.vertex_prob(a))) for a in w.alphabet}
    floors = {a: int(raw[a] * n_total) for a in w.alphabet}
    assigned = sum(floors.values())
    remainders = sorted(
        w.alphabet,
        key=lambda a: (-(raw[a] * n_total - floors[a]), str(a)),
    )
    out = dict(floors)
    k = 0
    while assigned < n_total:
        a = remainders[k % len(remainders)]
        if float(w.vertex_prob(a)) > 0:
            out[a] += 1
            assigned += 1
        k += 1
        if k > 10 * len(remainders) and assigned < n_total:
            raise ConstructionError("cannot round vertex weights: no positive mass")
    return out


def _integer_transport(w: Weight, i: int, counts: dict, n_total: int):
    """Nonnegative integer matrix with row and column sums ``counts`` and
    support inside the positive entries of generator i, close to W * N.

    Starts from entrywise floors and repairs deficits with BFS augmenting
    paths; returns None with a certificate string when no such matrix exists.
    """
    alpha = list(w.alphabet)
    support = {
        (a, b) for a in alpha for b in alpha if float(w.edge_prob(a, b, i)) > 0
    }
    mat = {}
    for a, b in support:
        p = w.edge_prob(a, b, i)
        frac = Fraction(p) if isinstance(p, (int, Fraction)) else Fraction(float(p))
        mat[(a, b)] = min(int(frac * n_total), counts[a], counts[b])
    # trim rows/columns that overflow their target (floors can exceed after min-clamps interplay)
    def row_sum(a):
        return sum(mat.get((a, b), 0) for b in alpha)

    def col_sum(b):
        return sum(mat.get((a, b), 0) for a in alpha)

    for a in alpha:
        while row_sum(a) > counts[a]:
            b = max((x for x in alpha if mat.get((a, x), 0) > 0), key=lambda x: mat[(a, x)])
            mat[(a, b)] -= 1
    for b in alpha:
        while col_sum(b) > counts[b]:
            a = max((x for x in alpha if mat.get((x, b), 0) > 0), key=lambda x: mat[(x, b)])
            mat[(a, b)] -= 1

    guard = 0
    while True:
        deficit_rows = [a for a in alpha if row_sum(a) < counts[a]]
        if not deficit_rows:
            break
        guard += 1
        if guard > 4 * n_total + 4 * len(alpha) ** 2 + 16:
            return None, "augmentation budget exhausted"
        # BFS over alternating row/col states from any deficit row
        start = deficit_rows[0]
        parent: dict[tuple, tuple | None] = {("r", start): None}
        queue = [("r", start)]
        end = None
        while queue and end is None:
            kind, node = queue.pop(0)
            if kind == "r":
                for b in alpha:
                    if (node, b) in support and ("c", b) not in parent:
                        parent[("c", b)] = ("r", node)
                        if col_sum(b) < counts[b]:
                            end = ("c", b)
                            break
                        queue.append(("c", b))
            else:
                for a in alpha:
                    if mat.get((a, node), 0) > 0 and ("r", a) not in parent:
                        parent[("r", a)] = ("c", node)
                        queue.append(("r", a))
        if end is None:
            rows = sorted(str(n) for k, n in parent if k == "r")
            cols = sorted(str(n) for k, n in parent if k == "c")
            return None, (
                f"generator {i}: rows {{{', '.join(rows)}}} can only reach "
                f"columns {{{', '.join(cols)}}} whose targets are saturated"
            )
        # apply the alternating path: +1 on row->col edges, -1 on col->row
        node = end
        while parent[node] is not None:
            prev = parent[node]
            if node[0] == "c":
                mat[(prev[1], node[1])] = mat.get((prev[1], node[1]), 0) + 1
            else:
                mat[(node[1], prev[1])] -= 1
            node = prev
    return mat, None


def rationalize_weight(w: Weight, q: int, support: "object | None" = None) -> Weight:
    """Round a weight to exact rationals with denominator <= q, keeping it
    exactly balanced and normalized and preserving every zero entry.

    ``support`` may carry a nearest-neighbor constraint system; the weight is
    then required to vanish on its forbidden edges before rounding.  The l1
    change is O(|A|^2 r / q).
    """
    if q < 1:
        raise InputError("denominator bound must be >= 1")
    w.validate()
    if support is not None:
        forbidden = getattr(support, "forbidden_pairs", None)
        if forbidden is None:
            raise InputError("support must expose nearest-neighbor forbidden pairs")
        for a, b, i in forbidden:
            if float(w.edge_prob(a, b, i)) != 0.0:
                raise InputError(
                    f"weight is not supported on the constraint system: edge ({a!r},{b!r};{i}) positive"
                )
    exact = _try_exact_passthrough(w, q)
    if exact is not None:
        return exact

    certificates = []
    n_tries = min(q, 2 * len(w.alphabet) + 2)
    for n_total in range(q, q - n_tries, -1):
        if n_total < 1:
            break
        counts = _round_vertex(w, n_total)
        mats = {}
        failed = None
        for i in range(1, w.rank + 1):
            mat, cert = _integer_transport(w, i, counts, n_total)
            if mat is None:
                failed = f"denominator {n_total}: {cert}"
                break
            mats[i] = mat
        if failed:
            certificates.append(failed)
            continue
        vertex = {a: Fraction(counts[a], n_total) for a in w.alphabet}
        edge = {}
        for i, mat in mats.items():
            for (a, b), k in mat.items():
                if k:
                    edge[(a, b, i)] = Fraction(k, n_total)
        out = Weight(w.rank, w.alphabet, vertex, edge)
        out.validate(tol=0.0)
        return out
    raise ConstructionError(
        "no balanced rational rounding exists at denominators "
        f"{max(1, q - n_tries + 1)}..{q}; certificates: " + "; ".join(certificates)
    )
