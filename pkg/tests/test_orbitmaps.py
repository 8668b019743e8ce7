"""Orbit-change maps: encodings, the two actions, equivariances, and the
rearrangement pipeline.

The upsilon-action oracle below evaluates the defining formula literally and
independently of the library's theta-reduction, so the same-orbit identities
are genuine cross-checks rather than restatements of the implementation.
"""

import random

import pytest

from finvariant import (
    Automorphism,
    ConstructionError,
    FiniteAction,
    FreeGroupCtx,
    LocalBijection,
    Pattern,
    PreconditionError,
    WindowError,
    decode_E,
    encode_E,
    encode_E_product,
    encode_F,
    encode_F_product,
    identity_bijection,
    inverse_eval,
    pattern_inverse_eval,
    pullback_name,
    reconstruct_sigma,
    sample_action,
    shift_pattern,
    sym_distance,
    tau_construct,
    theta_action,
    theta_tilde,
    upsilon_action,
    upsilon_tilde,
    verify_zrho,
    zrho_spec,
)
from finvariant.freegroup import IDENTITY, inv, mul
from finvariant.orbitmaps import (
    agree_on_common_window,
    compose,
    compose_after_inverse,
    invert,
    realized_displacement,
    same_orbit_witness_theta,
    same_orbit_witness_upsilon,
)
from finvariant.sft import sft_check_all

CTX = FreeGroupCtx(2)

AUTOS = {
    "identity": Automorphism.from_names(CTX, {"a": "a", "b": "b"}),
    "swap": Automorphism.from_names(CTX, {"a": "b", "b": "a"}),
    "inversion": Automorphism.from_names(CTX, {"a": "A", "b": "b"}),
    "nielsen": Automorphism.from_names(CTX, {"a": "ab", "b": "b"}),
}


def transposition(ctx, window, u, v):
    """Swap two nonidentity group elements, identity elsewhere; a genuinely
    non-automorphism bounded bijection."""
    table = {g: g for g in ctx.ball(window)}
    table[u], table[v] = table[v], table[u]
    phi = LocalBijection(window, realized_displacement(ctx, table), table)
    return phi


def phi_pool(window=6):
    """Mixed pool: automorphisms, a tree transposition, and their composites."""
    pool = [auto.bijection(window) for auto in AUTOS.values()]
    t = transposition(CTX, window, CTX.parse("a"), CTX.parse("aa"))
    pool.append(t)
    pool.append(compose(CTX, AUTOS["swap"].bijection(window), t))
    pool.append(compose(CTX, t, AUTOS["inversion"].bijection(window)))
    return pool


def direct_upsilon_table(ctx, h, phi):
    """Oracle: (h . phi)(g) = h phi(phi^-1(h^-1) g) evaluated literally."""
    target = inv(h)
    g0 = None
    for k, val in phi.table.items():
        if val == target:
            g0 = k
            break
    assert g0 is not None
    out = {}
    for g in ctx.ball(max(phi.window - len(g0), 0)):
        arg = mul(g0, g)
        if arg in phi.table:
            out[g] = mul(h, phi.table[arg])
    return out


class TestActions:
    def test_theta_fixes_identity(self):
        phi = identity_bijection(CTX, 4)
        th = theta_action(CTX, CTX.parse("ab"), phi)
        assert all(th.table[g] == g for g in th.table)

    def test_theta_and_upsilon_fix_automorphisms(self):
        for auto in AUTOS.values():
            phi = auto.bijection(5)
            for h in [CTX.parse("a"), CTX.parse("bA")]:
                th = theta_action(CTX, h, phi)
                assert all(th.table[g] == phi.table[g] for g in th.table)
                uh = upsilon_action(CTX, h, phi)
                assert all(uh.table[g] == phi.table[g] for g in uh.table)

    def test_theta_action_law(self):
        rng = random.Random(1)
        pool = phi_pool(7)
        for _ in range(120):
            phi = rng.choice(pool)
            h1 = random_word(rng, 1)
            h2 = random_word(rng, 1)
            lhs = theta_action(CTX, h1, theta_action(CTX, h2, phi))
            rhs = theta_action(CTX, mul(h1, h2), phi)
            assert agree_on_common_window(lhs, rhs)

    def test_window_exhaustion(self):
        phi = identity_bijection(CTX, 1)
        with pytest.raises(WindowError):
            theta_action(CTX, CTX.parse("ab"), phi)

    def test_upsilon_matches_direct_formula(self):
        rng = random.Random(2)
        pool = phi_pool(6)
        for _ in range(150):
            phi = rng.choice(pool)
            h = random_word(rng, 2)
            if not h:
                continue
            got = upsilon_action(CTX, h, phi)
            want = direct_upsilon_table(CTX, h, phi)
            common = set(got.table) & set(want)
            assert common and all(got.table[g] == want[g] for g in common)

    def test_same_orbit_witnesses(self):
        rng = random.Random(3)
        pool = phi_pool(6)
        for _ in range(150):
            phi = rng.choice(pool)
            h = random_word(rng, 2)
            if not h:
                continue
            # upsilon-h equals theta at the explicit witness
            h1 = same_orbit_witness_theta(phi, h)
            lhs = direct_upsilon_table(CTX, h, phi)
            rhs = theta_action(CTX, h1, phi)
            common = set(lhs) & set(rhs.table)
            assert common and all(lhs[g] == rhs.table[g] for g in common)
            # theta-h equals upsilon at the reverse witness
            h2 = same_orbit_witness_upsilon(phi, h)
            lhs2 = theta_action(CTX, h, phi)
            rhs2 = direct_upsilon_table(CTX, h2, phi)
            common2 = set(lhs2.table) & set(rhs2)
            assert common2 and all(lhs2.table[g] == rhs2[g] for g in common2)


def random_word(rng, max_len):
    from finvariant.freegroup import reduce_word

    return reduce_word(rng.choices(CTX.letters, k=rng.randint(0, max_len)))


class TestEncodeDecode:
    def test_identity_encodes_to_letters(self):
        phi = identity_bijection(CTX, 3)
        x = encode_E(CTX, phi)
        assert all(sym == tuple((l,) for l in CTX.letters) for sym in x.values)

    def test_swap_encodes_to_swapped_letters(self):
        swap = AUTOS["swap"]
        x = encode_E(CTX, swap.bijection(3))
        expected = tuple(swap.images[l] for l in CTX.letters)
        assert all(sym == expected for sym in x.values)

    def test_encoding_determined_by_identity_cell_and_equivariance(self):
        phi = AUTOS["nielsen"].bijection(4)
        x = encode_E(CTX, phi)
        assert x[IDENTITY] == tuple(phi(CTX.parse(s)) for s in ("a", "A", "b", "B"))
        for h in (CTX.parse("a"), CTX.parse("b")):
            lhs = encode_E(CTX, theta_action(CTX, h, phi))
            rhs = shift_pattern(h, x)
            common = [g for g in lhs.domain if g in rhs]
            assert common and all(lhs[g] == rhs[g] for g in common)

    def test_decode_constant_identity(self):
        phi = identity_bijection(CTX, 3)
        dec = decode_E(CTX, encode_E(CTX, phi))
        assert dec.table == phi.table

    def test_decode_swap_telescopes(self):
        dec = decode_E(CTX, encode_E(CTX, AUTOS["swap"].bijection(4)))
        assert dec.table[CTX.parse("ab")] == CTX.parse("ba")

    def test_round_trip_random_pool(self):
        rng = random.Random(4)
        pool = phi_pool(6)
        for _ in range(100):
            base = rng.choice(pool)
            t = random_word(rng, 1)
            try:
                phi = theta_action(CTX, t, base)
            except WindowError:
                continue
            dec = decode_E(CTX, encode_E(CTX, phi))
            assert all(dec.table[g] == phi.table[g] for g in dec.table)

    def test_decode_flags_non_injective(self):
        # collapse everything onto powers of a: the rebuilt map collides
        sym = tuple(
            {1: (1,), -1: (-1,), 2: (1,), -2: (-1,)}[l] for l in CTX.letters
        )
        ball = CTX.ball(2)
        pattern = Pattern(ball, [sym] * len(ball))
        from finvariant import VerificationError

        with pytest.raises(VerificationError):
            decode_E(CTX, pattern)

    def test_inverse_eval(self):
        phi = AUTOS["swap"].bijection(4)
        assert inverse_eval(phi, CTX.parse("a")) == CTX.parse("b")
        assert inverse_eval(identity_bijection(CTX, 3), CTX.parse("ab")) == CTX.parse("ab")
        with pytest.raises(WindowError):
            inverse_eval(phi, CTX.parse("ababab"))


class TestEncodeF:
    def test_identity(self):
        f = encode_F(CTX, identity_bijection(CTX, 4))
        assert all(sym == tuple((l,) for l in CTX.letters) for sym in f.values)

    def test_automorphisms_agree_with_E(self):
        for auto in AUTOS.values():
            phi = auto.bijection(5)
            e_pat = encode_E(CTX, phi)
            f_pat = encode_F(CTX, phi)
            assert all(f_pat[g] == e_pat[g] for g in f_pat.domain)

    def test_equivariance_under_upsilon(self):
        rng = random.Random(5)
        pool = phi_pool(7)
        for _ in range(100):
            phi = rng.choice(pool)
            h = random_word(rng, 1)
            if not h:
                continue
            try:
                lhs = encode_F(CTX, upsilon_action(CTX, h, phi))
            except WindowError:
                continue
            rhs = shift_pattern(h, encode_F(CTX, phi))
            common = [g for g in lhs.domain if g in rhs]
            assert common and all(lhs[g] == rhs[g] for g in common)


class TestProductMaps:
    def _ypattern(self, rng, radius=2):
        ball = CTX.ball(radius)
        return Pattern(ball, [rng.choice("pq") for _ in ball])

    def test_identity_product(self):
        rng = random.Random(6)
        y = self._ypattern(rng)
        phi = identity_bijection(CTX, 4)
        fx, fy = encode_F_product(CTX, phi, y)
        assert fy.restrict(y.domain[:3]) == y.restrict(y.domain[:3])

    def test_swap_moves_labels(self):
        rng = random.Random(7)
        y = self._ypattern(rng, 1)
        phi = AUTOS["swap"].bijection(4)
        _, fy = encode_F_product(CTX, phi, y)
        assert fy[CTX.parse("a")] == y[CTX.parse("b")]
        assert fy[CTX.parse("b")] == y[CTX.parse("a")]

    def test_e_tilde_equivariance(self):
        rng = random.Random(8)
        pool = phi_pool(6)
        for _ in range(100):
            phi = rng.choice(pool)
            y = self._ypattern(rng, 3)
            h = random_word(rng, 1)
            if not h:
                continue
            tphi, ty = theta_tilde(CTX, h, phi, y)
            lx, ly = encode_E_product(CTX, tphi, ty)
            rx = shift_pattern(h, encode_E(CTX, phi))
            ry = shift_pattern(h, y)
            common = [g for g in lx.domain if g in rx]
            assert common and all(lx[g] == rx[g] for g in common)
            assert ly == ry

    def test_f_tilde_equivariance(self):
        rng = random.Random(9)
        pool = phi_pool(7)
        for _ in range(100):
            phi = rng.choice(pool)
            y = self._ypattern(rng, 3)
            h = random_word(rng, 1)
            if not h:
                continue
            try:
                uphi, uy = upsilon_tilde(CTX, h, phi, y)
                lx, ly = encode_F_product(CTX, uphi, uy)
            except WindowError:
                continue
            rx, ry = encode_F_product(CTX, phi, y)
            rx, ry = shift_pattern(h, rx), shift_pattern(h, ry)
            cx = [g for g in lx.domain if g in rx]
            assert cx and all(lx[g] == rx[g] for g in cx)
            cy = [g for g in ly.domain if g in ry]
            assert cy and all(ly[g] == ry[g] for g in cy)


class TestPatternInverse:
    def test_swap(self):
        swap = AUTOS["swap"]
        pattern = encode_E(CTX, swap.bijection(4))
        assert pattern_inverse_eval(CTX, 1, pattern, CTX.parse("a")) == CTX.parse("b")
        assert pattern_inverse_eval(CTX, 1, pattern, CTX.parse("ab")) == CTX.parse("ba")

    def test_matches_table_inverse_on_pool(self):
        rng = random.Random(10)
        for phi in phi_pool(7):
            pattern = encode_E(CTX, phi)
            rho = phi.rho
            for _ in range(20):
                target = random_word(rng, 2)
                try:
                    expected = phi.inverse_word(target)
                except WindowError:
                    continue
                if len(expected) > rho * max(len(target), 1):
                    continue
                got = pattern_inverse_eval(CTX, rho, pattern, target)
                assert got == expected


class TestTau:
    def test_identity_config_gives_sigma(self):
        action = sample_action(7, 2, seed=11)
        labels = AUTOS["identity"].constant_config(7).labels
        tau = tau_construct(CTX, 1, action, labels)
        assert tau == action

    def test_swap_config_brute_force(self):
        action = sample_action(6, 2, seed=12)
        labels = AUTOS["swap"].constant_config(6).labels
        tau = tau_construct(CTX, 1, action, labels)
        # phi_v is constantly the swap (its own inverse): tau(g) = sigma(swap(g))
        assert tau.perms[0] == action.perms[1]
        assert tau.perms[1] == action.perms[0]

    def test_nielsen_config(self):
        action = sample_action(6, 2, seed=13)
        auto = AUTOS["nielsen"]
        labels = auto.constant_config(6).labels
        tau = tau_construct(CTX, 2, action, labels)
        # phi_v = nielsen^-1, so tau(g) = sigma(nielsen(g))
        for i, name in ((1, "a"), (2, "b")):
            word = auto.apply(CTX.parse(name))
            assert tau.perms[i - 1] == action.word_perm(word)

    def test_precondition_error_names_vertex(self):
        action = sample_action(5, 2, seed=14)
        labels = list(AUTOS["swap"].constant_config(5).labels)
        sym = list(labels[3])
        sym[0] = CTX.parse("a")
        labels[3] = tuple(sym)
        with pytest.raises(PreconditionError):
            tau_construct(CTX, 1, action, tuple(labels))

    def test_pullback_identity(self):
        action = sample_action(6, 2, seed=15)
        for name in ("swap", "inversion"):
            labels = AUTOS[name].constant_config(6).labels
            tau = tau_construct(CTX, 1, action, labels)
            for v in range(6):
                phi_v = decode_E(CTX, pullback_name(CTX, action, labels, v, 2))
                lhs = pullback_name(CTX, tau, labels, v, 2)
                rhs = encode_F(CTX, phi_v).restrict(CTX.ball(2))
                assert lhs == rhs

    def test_reconstruction_round_trip(self):
        for seed, name in [(16, "swap"), (17, "nielsen"), (18, "identity")]:
            action = sample_action(6, 2, seed=seed)
            auto = AUTOS[name]
            labels = auto.constant_config(6).labels
            tau = tau_construct(CTX, auto.displacement, action, labels)
            assert reconstruct_sigma(CTX, tau, labels) == action


class TestAutomorphismFactory:
    def test_identity_rho_one(self):
        assert AUTOS["identity"].displacement == 1

    def test_swap_rho_one(self):
        assert AUTOS["swap"].displacement == 1

    def test_nielsen_rho_two_and_zrho_pass(self):
        auto = AUTOS["nielsen"]
        assert auto.displacement == 2
        action = sample_action(8, 2, seed=19)
        spec = zrho_spec(CTX, 2)
        assert sft_check_all(CTX, spec, action, auto.constant_config(8).labels)

    def test_non_bijective_images_rejected(self):
        with pytest.raises(ConstructionError):
            Automorphism.from_names(CTX, {"a": "a", "b": "a"})
        with pytest.raises(ConstructionError):
            Automorphism.from_names(CTX, {"a": "aa", "b": "b"})

    def test_inverse_images(self):
        auto = AUTOS["nielsen"]
        inverse = auto.inverse()
        assert inverse.apply(CTX.parse("a")) == CTX.parse("aB")
        for name in ("a", "b"):
            w = CTX.parse(name)
            assert auto.apply(inverse.apply(w)) == w

    def test_bijection_validates(self):
        for auto in AUTOS.values():
            auto.bijection(4).validate(CTX)


class TestInclusions:
    """Both directions of the encoding/constraint-system correspondence."""

    def test_encodings_of_bounded_bijections_are_admissible(self):
        # includes a genuinely non-automorphism element: the tree transposition
        from finvariant import axioms_check

        t = transposition(CTX, 7, CTX.parse("a"), CTX.parse("aa"))
        assert t.rho == 2
        t.validate(CTX)
        cases = [
            (AUTOS["swap"].bijection(7), 1),
            (AUTOS["nielsen"].bijection(7), 2),
            (t, 2),
            (compose(CTX, AUTOS["inversion"].bijection(8), t), 2),
        ]
        for phi, rho in cases:
            pattern = encode_E(CTX, phi).restrict(CTX.ball(rho * rho + 1))
            assert axioms_check(CTX, rho, pattern).ok
            # translates of admissible encodings stay admissible
            shifted = theta_action(CTX, CTX.parse("a"), phi)
            pattern2 = encode_E(CTX, shifted).restrict(CTX.ball(rho * rho + 1))
            assert axioms_check(CTX, rho, pattern2).ok

    def test_accepted_patterns_decode_to_bounded_bijections(self):
        from finvariant import axioms_check

        t = transposition(CTX, 7, CTX.parse("a"), CTX.parse("aa"))
        pattern = encode_E(CTX, t).restrict(CTX.ball(5))
        assert axioms_check(CTX, 2, pattern).ok
        phi = decode_E(CTX, pattern)
        image = set(phi.table.values())
        assert all(h in image for h in CTX.ball(2))
        assert encode_E(CTX, phi).restrict(CTX.ball(5)) == pattern


class TestDiagnostics:
    def test_sym_distance_zero_on_equal(self):
        phi = AUTOS["swap"].bijection(4)
        assert sym_distance(CTX, phi, phi, 3) == 0.0

    def test_sym_distance_positive_on_different(self):
        a = AUTOS["swap"].bijection(4)
        b = identity_bijection(CTX, 4)
        assert sym_distance(CTX, a, b, 3) > 0

    def test_compose_and_invert(self):
        t = transposition(CTX, 6, CTX.parse("a"), CTX.parse("aa"))
        ti = invert(CTX, t)
        assert all(ti.table[g] == t.table[g] for g in ti.table)  # involution
        comp = compose(CTX, t, t)
        assert all(comp.table[g] == g for g in comp.table)


class TestLabeledTransport:
    def test_label_transport_identity(self):
        rng = random.Random(20)
        action = sample_action(6, 2, seed=21)
        for name in ("swap", "nielsen"):
            auto = AUTOS[name]
            rho = auto.displacement
            labels = auto.constant_config(6).labels
            ylabels = tuple(rng.choice("pq") for _ in range(6))
            tau = tau_construct(CTX, rho, action, labels)
            for v in range(6):
                phi_v = decode_E(CTX, pullback_name(CTX, action, labels, v, rho * rho + 1))
                lhs = pullback_name(CTX, tau, ylabels, v, 1)
                y_sigma = pullback_name(CTX, action, ylabels, v, rho)
                rhs = compose_after_inverse(phi_v, y_sigma).restrict(CTX.ball(1))
                assert lhs == rhs
