"""Finite-window orbit-change maps, their edge-label encodings, the two
group actions on them, and the periodic-orbit rearrangement.

A LocalBijection is the restriction to a ball of an identity-fixing
bijection of the group whose one-step displacements |phi(g)^-1 phi(gs)| are
bounded by rho.  Every operation below shrinks the window by a stated
amount and raises a WindowError rather than guessing beyond it; the
underlying objects are infinite and truncation has to stay explicit.
"""

from __future__ import annotations

from typing import Mapping

from .actions import FiniteAction, Microstate
from .errors import (
    ConstructionError,
    InputError,
    PreconditionError,
    VerificationError,
    WindowError,
)
from .freegroup import IDENTITY, FreeGroupCtx, Word, inv, mul
from .shift import Pattern, pullback_name, shift_pattern
from .sft import axioms_check, symbol_entry, telescope_walk


class LocalBijection:
    """A table phi: ball(window) -> G with phi(e) = e, injective, with
    displacement bound rho in both directions where evaluable."""

    __slots__ = ("window", "rho", "table", "_inverse")

    def __init__(self, window: int, rho: int, table: Mapping[Word, Word]):
        self.window = window
        self.rho = rho
        self.table = dict(table)
        self._inverse: dict | None = None

    def __call__(self, g: Word) -> Word:
        try:
            return self.table[g]
        except KeyError:
            raise WindowError(f"word {g} outside the radius-{self.window} window") from None

    def defined(self, g: Word) -> bool:
        return g in self.table

    def inverse_table(self) -> dict:
        if self._inverse is None:
            self._inverse = {v: k for k, v in self.table.items()}
        return self._inverse

    def inverse_word(self, target: Word) -> Word:
        try:
            return self.inverse_table()[target]
        except KeyError:
            raise WindowError(f"{target} not in the image within the window") from None

    def validate(self, ctx: FreeGroupCtx) -> None:
        ball = ctx.ball(self.window)
        if set(self.table) != set(ball):
            raise InputError("table must cover exactly the window ball")
        if self.table[IDENTITY] != IDENTITY:
            raise InputError("orbit-change maps must fix the identity")
        if len(set(self.table.values())) != len(self.table):
            raise InputError("table is not injective on its window")
        for g in ball:
            for letter in ctx.letters:
                h = mul(g, (letter,))
                if h in self.table:
                    step = mul(inv(self.table[g]), self.table[h])
                    if len(step) > self.rho:
                        raise InputError(
                            f"displacement {len(step)} at ({g}, {h}) exceeds rho={self.rho}"
                        )
        inverse = self.inverse_table()
        for g in inverse:
            for letter in ctx.letters:
                h = mul(g, (letter,))
                if h in inverse:
                    step = mul(inv(inverse[g]), inverse[h])
                    if len(step) > self.rho:
                        raise InputError(
                            f"inverse displacement {len(step)} at ({g}, {h}) exceeds rho={self.rho}"
                        )

    def __eq__(self, other):
        return (
            isinstance(other, LocalBijection)
            and self.window == other.window
            and self.table == other.table
        )

    def __repr__(self):
        return f"LocalBijection(window={self.window}, rho={self.rho}, {len(self.table)} entries)"

    def to_json(self, ctx: FreeGroupCtx) -> dict:
        return {
            "window": self.window,
            "rho": self.rho,
            "map": {ctx.format(g): ctx.format(v) for g, v in sorted(self.table.items())},
        }

    @classmethod
    def from_json(cls, ctx: FreeGroupCtx, data: dict) -> "LocalBijection":
        try:
            table = {ctx.parse(k): ctx.parse(v) for k, v in data["map"].items()}
            out = cls(int(data["window"]), int(data["rho"]), table)
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed orbit-map json: {exc}") from exc
        out.validate(ctx)
        return out


def agree_on_common_window(a: LocalBijection, b: LocalBijection) -> bool:
    common = set(a.table) & set(b.table)
    return all(a.table[g] == b.table[g] for g in common)


def realized_displacement(ctx: FreeGroupCtx, table: Mapping[Word, Word]) -> int:
    worst = 1
    for g, val in table.items():
        for letter in ctx.letters:
            h = mul(g, (letter,))
            if h in table:
                worst = max(worst, len(mul(inv(val), table[h])))
    return worst


def identity_bijection(ctx: FreeGroupCtx, window: int) -> LocalBijection:
    return LocalBijection(window, 1, {g: g for g in ctx.ball(window)})


def compose(ctx: FreeGroupCtx, outer: LocalBijection, inner: LocalBijection) -> LocalBijection:
    """outer after inner, on the largest ball where the chain stays evaluable."""
    table = {}
    radius = 0
    for m in range(inner.window + 1):
        ball = ctx.ball(m)
        if all(inner.defined(g) and outer.defined(inner(g)) for g in ball):
            radius = m
        else:
            break
    for g in ctx.ball(radius):
        table[g] = outer(inner(g))
    if radius < 1:
        raise WindowError("composition leaves no usable window")
    return LocalBijection(radius, realized_displacement(ctx, table), table)


def invert(ctx: FreeGroupCtx, phi: LocalBijection) -> LocalBijection:
    """The inverse table restricted to the largest ball inside the image."""
    inverse = phi.inverse_table()
    radius = -1
    for m in range(phi.window + 1):
        if all(g in inverse for g in ctx.ball(m)):
            radius = m
        else:
            break
    if radius < 0:
        raise WindowError("image does not cover any ball")
    table = {g: inverse[g] for g in ctx.ball(radius)}
    return LocalBijection(radius, realized_displacement(ctx, table), table)


# ---------------------------------------------------------------------------
# the two actions
# ---------------------------------------------------------------------------


def theta_action(ctx: FreeGroupCtx, h: Word, phi: LocalBijection) -> LocalBijection:
    """(h . phi)(g) = phi(h^-1)^-1 phi(h^-1 g); window shrinks by |h|."""
    new_window = phi.window - len(h)
    if new_window < 0:
        raise WindowError(f"window {phi.window} exhausted by translate of length {len(h)}")
    h_inv = inv(h)
    base = inv(phi(h_inv))
    table = {g: mul(base, phi(mul(h_inv, g))) for g in ctx.ball(new_window)}
    return LocalBijection(new_window, phi.rho, table)


def upsilon_action(ctx: FreeGroupCtx, h: Word, phi: LocalBijection) -> LocalBijection:
    """(h . phi)(g) = h phi(phi^-1(h^-1) g), realized as the theta translate
    by phi^-1(h^-1)^-1; window shrinks by |phi^-1(h^-1)| <= rho |h|."""
    g0 = phi.inverse_word(inv(h))
    return theta_action(ctx, inv(g0), phi)


def same_orbit_witness_theta(phi: LocalBijection, h: Word) -> Word:
    """h' with (upsilon-h phi) = (theta-h' phi)."""
    return inv(phi.inverse_word(inv(h)))


def same_orbit_witness_upsilon(phi: LocalBijection, h: Word) -> Word:
    """h'' with (theta-h phi) = (upsilon-h'' phi)."""
    return inv(phi(inv(h)))


# ---------------------------------------------------------------------------
# encodings
# ---------------------------------------------------------------------------


def encode_E(ctx: FreeGroupCtx, phi: LocalBijection) -> Pattern:
    """Edge-label encoding on the radius window-1 ball: the symbol at h sends
    each signed letter s to phi(h)^-1 phi(h s)."""
    radius = phi.window - 1
    if radius < 0:
        raise WindowError("window too small to encode")
    values = []
    domain = ctx.ball(radius)
    for h in domain:
        base = inv(phi(h))
        sym = []
        for letter in ctx.letters:
            step = mul(base, phi(mul(h, (letter,))))
            if len(step) > phi.rho:
                raise InputError(
                    f"displacement {len(step)} at {h} exceeds the declared bound {phi.rho}"
                )
            sym.append(step)
        values.append(tuple(sym))
    return Pattern(domain, values)


def decode_E(ctx: FreeGroupCtx, pattern: Pattern) -> LocalBijection:
    """Rebuild the map from its encoding: phi(e) = e and phi(gs) = phi(g) x_g(s).

    The window grows by one over the pattern radius.  A non-injective result
    certifies that the input violates the constraint system.
    """
    radius = max((len(g) for g in pattern.domain), default=0)
    if pattern.domain != ctx.ball(radius):
        raise InputError("decoding needs a pattern on a full ball")
    tree = ctx.ball_tree(radius + 1)
    table: dict[Word, Word] = {IDENTITY: IDENTITY}
    words = [entry[0] for entry in tree]
    for k in range(1, len(tree)):
        word, parent, letter = tree[k]
        parent_word = words[parent]
        table[word] = mul(table[parent_word], symbol_entry(pattern[parent_word], letter))
    seen: dict[Word, Word] = {}
    for g, val in table.items():
        if val in seen:
            raise VerificationError(
                "decoded map is not injective on its window: "
                f"{ctx.format(seen[val])} and {ctx.format(g)} both map to {ctx.format(val)}"
            )
        seen[val] = g
    rho = max(
        (len(symbol_entry(sym, letter)) for sym in pattern.values for letter in ctx.letters),
        default=1,
    )
    return LocalBijection(radius + 1, max(rho, 1), table)


def inverse_eval(phi: LocalBijection, target: Word) -> Word:
    """phi^-1(target) within the window; the geodesic witness behind this
    lookup is unique for admissible encodings."""
    return phi.inverse_word(target)


def encode_F(ctx: FreeGroupCtx, phi: LocalBijection) -> Pattern:
    """Companion encoding along the second action: the symbol at h sends s to
    h^-1 phi(phi^-1(h) s).  The window shrinks by the displacement factor."""
    radius = (phi.window - 1) // phi.rho
    if radius < 0:
        raise WindowError("window too small to encode")
    domain = ctx.ball(radius)
    values = []
    for h in domain:
        gh = phi.inverse_word(h)
        h_inv = inv(h)
        sym = tuple(mul(h_inv, phi(mul(gh, (letter,)))) for letter in ctx.letters)
        values.append(sym)
    return Pattern(domain, values)


def compose_after_inverse(phi: LocalBijection, ypattern: Pattern) -> Pattern:
    """y o phi^-1: the value of y at f reappears at phi(f)."""
    domain = []
    values = []
    for f in ypattern.domain:
        if phi.defined(f):
            domain.append(phi(f))
            values.append(ypattern[f])
    if not domain:
        raise WindowError("no overlap between the label window and the map window")
    return Pattern(domain, values)


def encode_E_product(ctx: FreeGroupCtx, phi: LocalBijection, ypattern: Pattern):
    return encode_E(ctx, phi), ypattern


def encode_F_product(ctx: FreeGroupCtx, phi: LocalBijection, ypattern: Pattern):
    return encode_F(ctx, phi), compose_after_inverse(phi, ypattern)


def theta_tilde(ctx: FreeGroupCtx, h: Word, phi: LocalBijection, ypattern: Pattern):
    return theta_action(ctx, h, phi), shift_pattern(h, ypattern)


def upsilon_tilde(ctx: FreeGroupCtx, h: Word, phi: LocalBijection, ypattern: Pattern):
    mover = inv(phi.inverse_word(inv(h)))
    return upsilon_action(ctx, h, phi), shift_pattern(mover, ypattern)


# ---------------------------------------------------------------------------
# reconstruction from patterns and the rearranged action
# ---------------------------------------------------------------------------


def pattern_inverse_eval(ctx: FreeGroupCtx, rho: int, pattern: Pattern, target: Word) -> Word:
    """Evaluate the inverse map directly from an encoding pattern.

    Builds psi(target) letter by letter: each letter t extends the current
    position by the unique reduced word of length <= rho whose telescoped
    product from that position equals t.
    """
    cur = IDENTITY
    for t in target:
        witnesses = [
            u for u, prod in telescope_walk(ctx, pattern, cur, rho) if prod == (t,)
        ]
        if len(witnesses) != 1:
            raise PreconditionError(
                f"expected a unique length-<={rho} witness for {ctx.letter_name(t)} "
                f"at {ctx.format(cur)}, found {len(witnesses)}"
            )
        cur = mul(cur, witnesses[0])
    return cur


def verify_zrho(
    ctx: FreeGroupCtx, rho: int, action: FiniteAction, labels
) -> list[Pattern]:
    """Check every pullback against the admissibility axioms; returns the
    pullback patterns for reuse.  Raises naming the first failing vertex."""
    radius = rho * rho + 1
    patterns = []
    for v in range(action.n):
        pat = pullback_name(ctx, action, labels, v, radius)
        report = axioms_check(ctx, rho, pat)
        if not report.ok:
            raise PreconditionError(f"vertex {v}: {report.reason}", vertex=v)
        patterns.append(pat)
    return patterns


def tau_construct(
    ctx: FreeGroupCtx, rho: int, action: FiniteAction, labels
) -> FiniteAction:
    """The rearranged action: tau(g) v = sigma(phi_v^-1(g^-1)^-1) v, with
    phi_v read off lazily from the pullback encoding at v.

    Requires every pullback to pass the admissibility axioms; the returned
    generator images are then bijections and the defining formula is
    multiplicative in g.
    """
    patterns = verify_zrho(ctx, rho, action, labels)
    n = action.n
    perms = []
    for i in range(1, ctx.rank + 1):
        images = []
        for v in range(n):
            w = pattern_inverse_eval(ctx, rho, patterns[v], (-i,))
            images.append(action.apply(inv(w), v))
        if sorted(images) != list(range(n)):
            raise VerificationError(
                f"rearranged generator {i} is not a bijection; admissibility was vacuous"
            )
        perms.append(tuple(images))
    return FiniteAction(n, tuple(perms))


def upsilon_rearrange(
    ctx: FreeGroupCtx, rho: int, action: FiniteAction, state: Microstate
) -> tuple[FiniteAction, Microstate]:
    """(sigma, x, y) -> (tau, x, y); the labels pass through unchanged."""
    tau = tau_construct(ctx, rho, action, state.labels)
    return tau, state


def reconstruct_sigma(ctx: FreeGroupCtx, tau: FiniteAction, labels) -> FiniteAction:
    """Invert the rearrangement from (tau, x): sigma(h) v = tau(x(v)(h^-1)^-1) v
    for each signed generator h."""
    n = tau.n
    perms = []
    for i in range(1, ctx.rank + 1):
        images = []
        for v in range(n):
            w = symbol_entry(labels[v], -i)
            images.append(tau.apply(inv(w), v))
        if sorted(images) != list(range(n)):
            raise VerificationError(f"reconstructed generator {i} is not a bijection")
        perms.append(tuple(images))
    return FiniteAction(n, tuple(perms))


# ---------------------------------------------------------------------------
# automorphism test vectors
# ---------------------------------------------------------------------------


class Automorphism:
    """A free-group automorphism given by generator images; produces window
    tables and constant admissible configurations for any finite action."""

    def __init__(self, ctx: FreeGroupCtx, images: Mapping[int, Word], _inverse=None):
        self.ctx = ctx
        full = {}
        for i in range(1, ctx.rank + 1):
            try:
                img = images[i]
            except KeyError:
                raise InputError(f"missing image for generator {i}") from None
            full[i] = img
            full[-i] = inv(img)
        self.images = full
        self._inverse = _inverse
        if _inverse is None:
            self._check_bijective()

    @classmethod
    def from_names(cls, ctx: FreeGroupCtx, images: Mapping[str, str]) -> "Automorphism":
        by_index = {}
        for name, word in images.items():
            g = ctx.parse(name)
            if len(g) != 1 or g[0] < 0:
                raise InputError(f"image keys must be single generators, got {name!r}")
            by_index[g[0]] = ctx.parse(word)
        return cls(ctx, by_index)

    def apply(self, w: Word) -> Word:
        out: Word = IDENTITY
        for letter in w:
            out = mul(out, self.images[letter])
        return out

    @property
    def forward_displacement(self) -> int:
        return max(len(img) for img in self.images.values())

    @property
    def displacement(self) -> int:
        inv_auto = self.inverse()
        return max(self.forward_displacement, inv_auto.forward_displacement)

    def _find_preimage(self, target: Word, search_radius: int) -> Word | None:
        for w in self.ctx.ball(search_radius):
            if self.apply(w) == target:
                return w
        return None

    def _check_bijective(self) -> None:
        rho = self.forward_displacement
        test_ball = self.ctx.ball(2 * rho)
        seen = {}
        for g in test_ball:
            img = self.apply(g)
            if img in seen:
                raise ConstructionError(
                    "images do not define a bijection on the test ball: "
                    f"{self.ctx.format(seen[img])} and {self.ctx.format(g)} collide"
                )
            seen[img] = g
        inverse_images = {}
        for i in range(1, self.ctx.rank + 1):
            pre = self._find_preimage((i,), 2 * rho + 2)
            if pre is None:
                raise ConstructionError(
                    "images do not define a bijection on the test ball: "
                    f"generator {self.ctx.letter_name(i)} has no preimage"
                )
            inverse_images[i] = pre
        self._inverse = Automorphism(self.ctx, inverse_images, _inverse=self)

    def inverse(self) -> "Automorphism":
        return self._inverse

    def bijection(self, window: int) -> LocalBijection:
        table = {g: self.apply(g) for g in self.ctx.ball(window)}
        return LocalBijection(window, self.forward_displacement, table)

    def constant_symbol(self) -> tuple:
        """One orbit-alphabet symbol: each signed letter maps to the inverse
        automorphism's image, matching an orbit-change map constantly equal
        to the inverse."""
        inv_auto = self.inverse()
        return tuple(inv_auto.images[letter] for letter in self.ctx.letters)

    def constant_config(self, n: int) -> Microstate:
        return Microstate((self.constant_symbol(),) * n)


def automorphism_examples(ctx: FreeGroupCtx, images: Mapping[str, str]) -> Automorphism:
    """Build the automorphism-backed test-vector factory from named images,
    e.g. {"a": "ab", "b": "b"}."""
    return Automorphism.from_names(ctx, images)


def constant_config_of(ctx: FreeGroupCtx, phi_letter_images: Mapping[int, Word], n: int) -> Microstate:
    """Constant configuration whose every vertex carries the symbol
    s -> phi(s); admissible exactly when those entries extend to a bounded
    bijection."""
    sym = tuple(phi_letter_images[letter] for letter in ctx.letters)
    return Microstate((sym,) * n)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def sym_distance(
    ctx: FreeGroupCtx, phi: LocalBijection, psi: LocalBijection, depth: int
) -> float:
    """Truncated pointwise-convergence metric over the shortlex enumeration:
    sum 2^-k over disagreements of the maps and of their inverses.  Positions
    outside either window count as disagreements."""
    total = 0.0
    phi_inv = phi.inverse_table()
    psi_inv = psi.inverse_table()
    for k, g in enumerate(ctx.ball(depth), start=1):
        weight = 2.0**-k
        if phi.table.get(g, ("?",)) != psi.table.get(g, ("!",)):
            total += weight
        if phi_inv.get(g, ("?",)) != psi_inv.get(g, ("!",)):
            total += weight
    return total
