"""Batch experiment runner.

Subcommands
-----------
f-exact       exact invariant of a weight, with a join-radius constancy table
f-estimate    finite-n growth-rate table (CSV) for a weight's neighborhood counts
rearrange     build the rearranged action from an admissible configuration and
              verify the transport identities
sft-verify    check a configuration against the orbit-change constraint system
weight-tools  validate | rationalize | markovize | distance

Every command is deterministic given its config (seed included); reports and
CSVs carry a hash of the resolved config for provenance.  Exit codes: 0 ok,
1 verification failure, 2 input error, 3 resource cap.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import random
import sys
from fractions import Fraction

from .actions import FiniteAction, Microstate, sample_action
from .counting import Caps, f_estimate
from .errors import (
    FinvariantError,
    InputError,
    ResourceCapError,
    VerificationError,
)
from .freegroup import FreeGroupCtx, inv
from .orbitmaps import (
    Automorphism,
    compose_after_inverse,
    decode_E,
    encode_F,
    pattern_inverse_eval,
    reconstruct_sigma,
    tau_construct,
    verify_zrho,
)
from .sft import SftSpec, axioms_check, sample_sft_config, zrho_spec
from .shift import (
    PatternDistribution,
    empirical_distribution,
    empirical_product_distribution,
    l1_distance,
    pullback_name,
)
from .weights import (
    F_value,
    Weight,
    shannon_entropy,
    constancy_check,
    f_markov,
    markovize,
    rationalize_weight,
    weight_distance,
)

MAX_CLI_RANK = 4
MAX_CLI_RHO = 2


def _fmt(x) -> str:
    if x == float("-inf"):
        return "-inf"
    return f"{float(x):.15g}"


def _config_hash(config: dict) -> str:
    # threads is an execution knob: results are independent of it by contract,
    # so it stays out of the provenance hash
    scrubbed = {k: v for k, v in config.items() if k != "threads"}
    blob = json.dumps(scrubbed, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid json: {exc}") from exc


def _ctx_for_rank(rank: int) -> FreeGroupCtx:
    if not 1 <= rank <= MAX_CLI_RANK:
        raise InputError(f"cli supports ranks 1..{MAX_CLI_RANK}, got {rank}")
    return FreeGroupCtx(rank)


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_weight(path: str) -> Weight:
    return Weight.from_json(_load_json(path))


# ---------------------------------------------------------------------------
# f-exact
# ---------------------------------------------------------------------------


def cmd_f_exact(args) -> int:
    config = _load_json(args.config) if args.config else {}
    if args.weight:
        config["weight"] = args.weight
    if "weight" not in config:
        raise InputError("f-exact needs a weight file (--weight or config)")
    config.setdefault("rho_max", MAX_CLI_RHO)
    weight = _load_weight(config["weight"])
    ctx = _ctx_for_rank(weight.rank)
    rho_max = int(config["rho_max"])
    if rho_max > MAX_CLI_RHO:
        raise ResourceCapError(f"cli caps the join radius at {MAX_CLI_RHO}")

    value = f_markov(ctx, weight)
    report = constancy_check(ctx, weight, rho_max)
    lines = [f"config_hash: {_config_hash(config)}", "command: f-exact"]
    lines.append(f"alphabet_size: {len(weight.alphabet)}")
    lines.append(f"rank: {weight.rank}")
    lines.append(f"exact_arithmetic: {'yes' if weight.is_exact else 'no'}")
    lines.append(f"f_nats: {_fmt(float(value))}")
    h_vertex = shannon_entropy({a: weight.vertex_prob(a) for a in weight.alphabet})
    lines.append(f"vertex_entropy: {_fmt(float(h_vertex))}")
    for i in range(1, weight.rank + 1):
        pairs = {
            (a, b): weight.edge_prob(a, b, i)
            for a in weight.alphabet
            for b in weight.alphabet
        }
        lines.append(f"edge_entropy_{i}: {_fmt(float(shannon_entropy(pairs)))}")
    lines.append("constancy_table:")
    lines.append("rho F delta")
    for rho, val, delta in report.rows:
        lines.append(f"{rho} {_fmt(val)} {_fmt(delta)}")
    lines.append(f"constancy_ok: {'yes' if report.ok else 'no'}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0 if report.ok else 1


# ---------------------------------------------------------------------------
# f-estimate
# ---------------------------------------------------------------------------


def _parse_epsilon(raw):
    if isinstance(raw, str):
        return Fraction(raw)
    if isinstance(raw, dict):
        return Fraction(int(raw["num"]), int(raw["den"]))
    return raw


def cmd_f_estimate(args) -> int:
    if not args.config:
        raise InputError("f-estimate needs --config")
    config = _load_json(args.config)
    if args.seed is not None:
        config["seed"] = args.seed
    if args.threads is not None:
        config["threads"] = args.threads
    for key in ("window", "epsilon", "n_list"):
        if key not in config:
            raise InputError(f"f-estimate config missing {key!r}")
    if "weight" not in config and "marginals" not in config:
        raise InputError("f-estimate config needs 'weight' or 'marginals'")
    mode = config.get("mode", "monte_carlo")
    if mode == "monte_carlo" and "seed" not in config:
        raise InputError("a seed is mandatory for randomized commands")
    config.setdefault("seed", 0)
    config.setdefault("samples", 100)
    config.setdefault("threads", 1)
    config.setdefault("distance_mode", "window")

    weight = target = alphabet = None
    if "weight" in config:
        weight = _load_weight(config["weight"])
        ctx = _ctx_for_rank(weight.rank)
    else:
        data = _load_json(config["marginals"])
        ctx = _ctx_for_rank(int(data.get("rank", 2)))
        target = PatternDistribution.from_json(ctx, data)
        alphabet = tuple(sorted({sym for key in target.probs for sym in key}, key=str))
    caps = Caps(
        exact_actions=args.cap_exact or Caps.exact_actions,
        labelings=args.cap_labels or Caps.labelings,
    )
    sft = None
    if config.get("sft"):
        raw = config["sft"]
        sft = SftSpec.from_json(ctx, _load_json(raw) if isinstance(raw, str) else raw)
    result = f_estimate(
        ctx,
        weight,
        int(config["window"]),
        _parse_epsilon(config["epsilon"]),
        [int(n) for n in config["n_list"]],
        mode=mode,
        samples=int(config["samples"]),
        seed=int(config["seed"]),
        sft=sft,
        distance_mode=config["distance_mode"],
        caps=caps,
        threads=int(config["threads"]),
        target=target,
        alphabet=alphabet,
    )
    for warning in result.warnings:
        sys.stderr.write(f"warning: {warning}\n")
    lines = [f"# config_hash {_config_hash(config)}"]
    lines.append("n,samples,mean_count,log_mean_over_n,stderr")
    for row in result.rows:
        lines.append(
            f"{row.n},{row.samples},{_fmt(row.mean_count)},"
            f"{_fmt(row.log_mean_over_n)},{_fmt(row.stderr)}"
        )
    _emit("\n".join(lines) + "\n", args.out)
    return 0


# ---------------------------------------------------------------------------
# configuration sources shared by rearrange / sft-verify
# ---------------------------------------------------------------------------


def _resolve_action(ctx: FreeGroupCtx, config: dict, seed_flag) -> FiniteAction:
    spec = config.get("sigma") or config.get("action")
    if spec is None:
        raise InputError("config must provide an action under 'sigma' or 'action'")
    if "file" in spec:
        return FiniteAction.from_json(_load_json(spec["file"]))
    if "perms" in spec:
        return FiniteAction.from_json(spec)
    n = int(spec.get("n", config.get("n", 0)))
    if n < 1:
        raise InputError("action needs n >= 1")
    seed = spec.get("seed", seed_flag)
    if seed is None:
        raise InputError("a seed is mandatory for randomized commands")
    return sample_action(n, ctx.rank, int(seed))


def _decode_symbol(ctx: FreeGroupCtx, raw: dict) -> tuple:
    images = {}
    for name, word in raw.items():
        g = ctx.parse(name)
        if len(g) != 1:
            raise InputError(f"symbol keys must be single letters, got {name!r}")
        images[g[0]] = ctx.parse(word)
    return tuple(images[letter] for letter in ctx.letters)


def _encode_symbol(ctx: FreeGroupCtx, sym: tuple) -> dict:
    return {
        ctx.letter_name(letter): ctx.format(sym[k])
        for k, letter in enumerate(ctx.letters)
    }


def _resolve_config_labels(
    ctx: FreeGroupCtx, config: dict, action: FiniteAction, rho: int, seed_flag
) -> Microstate:
    spec = config.get("x") or config.get("config")
    if spec is None:
        raise InputError("config must provide a configuration under 'x' or 'config'")
    if isinstance(spec, list):
        return Microstate(tuple(_decode_symbol(ctx, sym) for sym in spec))
    if "file" in spec:
        data = _load_json(spec["file"])
        return Microstate(tuple(_decode_symbol(ctx, sym) for sym in data["labels"]))
    if "automorphism" in spec:
        auto = Automorphism.from_names(ctx, spec["automorphism"]["images"])
        if auto.displacement > rho:
            raise InputError(
                f"automorphism displacement {auto.displacement} exceeds rho={rho}"
            )
        return auto.constant_config(action.n)
    if "sampler" in spec:
        seed = spec["sampler"].get("seed", seed_flag)
        if seed is None:
            raise InputError("a seed is mandatory for randomized commands")
        found = sample_sft_config(
            ctx,
            zrho_spec(ctx, rho),
            action,
            int(seed),
            budget=int(spec["sampler"].get("budget", 20000)),
            restarts=int(spec["sampler"].get("restarts", 4)),
        )
        if found is None:
            raise VerificationError("sampler found no admissible configuration")
        return found
    raise InputError("unrecognized configuration source")


# ---------------------------------------------------------------------------
# rearrange
# ---------------------------------------------------------------------------


def cmd_rearrange(args) -> int:
    if not args.config:
        raise InputError("rearrange needs --config")
    config = _load_json(args.config)
    if args.seed is not None:
        config["seed"] = args.seed
    rho = int(config.get("rho", 1))
    if rho > MAX_CLI_RHO:
        raise ResourceCapError(f"cli caps rho at {MAX_CLI_RHO}")
    rank = int(config.get("rank", 2))
    ctx = _ctx_for_rank(rank)
    action = _resolve_action(ctx, config, config.get("seed"))
    state = _resolve_config_labels(ctx, config, action, rho, config.get("seed"))
    labels = state.labels

    lines = [f"config_hash: {_config_hash(config)}", "command: rearrange"]
    lines.append(f"n: {action.n}")
    lines.append(f"rho: {rho}")
    failures = []

    patterns = verify_zrho(ctx, rho, action, labels)  # raises naming the vertex
    lines.append("admissibility: PASS")
    tau = tau_construct(ctx, rho, action, labels)
    lines.append("tau:")
    for i, perm in enumerate(tau.perms, start=1):
        lines.append(f"  {ctx.letter_name(i)}: {list(perm)}")

    # defining formula stays multiplicative on length-2 words
    multiplicative = True
    words = [w for w in ctx.ball(2) if w]
    for g in words:
        for v in range(action.n):
            w = pattern_inverse_eval(ctx, rho, patterns[v], inv(g))
            if tau.apply(g, v) != action.apply(inv(w), v):
                multiplicative = False
                failures.append(f"multiplicativity fails at word {ctx.format(g)}, vertex {v}")
    lines.append(f"homomorphism_property: {'PASS' if multiplicative else 'FAIL'}")

    # pullback identity on the guaranteed window
    m = (rho * rho + 1) // rho
    pullback_ok = True
    for v in range(action.n):
        phi_v = decode_E(ctx, patterns[v])
        expected = encode_F(ctx, phi_v).restrict(ctx.ball(m))
        actual = pullback_name(ctx, tau, labels, v, m)
        if expected != actual:
            pullback_ok = False
            failures.append(f"pullback identity fails at vertex {v}")
    lines.append(f"pullback_identity: {'PASS' if pullback_ok else 'FAIL'}")

    sigma_back = reconstruct_sigma(ctx, tau, labels)
    recon_ok = sigma_back == action
    if not recon_ok:
        failures.append("sigma reconstruction mismatch")
    lines.append(f"sigma_reconstruction: {'PASS' if recon_ok else 'FAIL'}")

    # empirical pushforward across the rearrangement, with labels when given
    y_alphabet = config.get("y_alphabet")
    transport_ok = True
    if y_alphabet:
        seed = config.get("y_seed", config.get("seed"))
        if seed is None:
            raise InputError("a seed is mandatory for randomized commands")
        rng = random.Random(int(seed))
        ylabels = tuple(rng.choice(y_alphabet) for _ in range(action.n))
        lhs = empirical_product_distribution(ctx, tau, labels, ylabels, m)
        transported: dict = {}
        for v in range(action.n):
            phi_v = decode_E(ctx, patterns[v])
            xpat = encode_F(ctx, phi_v).restrict(ctx.ball(m))
            ypat = pullback_name(ctx, action, ylabels, v, rho * m)
            ymoved = compose_after_inverse(phi_v, ypat).restrict(ctx.ball(m))
            key = ((tuple(xpat.values), tuple(ymoved.values)),)
            transported[key] = transported.get(key, 0) + Fraction(1, action.n)
        rhs = PatternDistribution(((),), transported)
        if l1_distance(lhs, rhs) != 0:
            transport_ok = False
            failures.append("empirical transport mismatch")
        lines.append(f"empirical_transport: {'PASS' if transport_ok else 'FAIL'}")
    else:
        lhs = empirical_distribution(ctx, tau, labels, m)
        transported = {}
        for v in range(action.n):
            phi_v = decode_E(ctx, patterns[v])
            xpat = encode_F(ctx, phi_v).restrict(ctx.ball(m))
            key = tuple(xpat.values)
            transported[key] = transported.get(key, 0) + Fraction(1, action.n)
        rhs = PatternDistribution(ctx.ball(m), transported)
        if l1_distance(lhs, rhs) != 0:
            transport_ok = False
            failures.append("empirical transport mismatch")
        lines.append(f"empirical_transport: {'PASS' if transport_ok else 'FAIL'}")

    ok = multiplicative and pullback_ok and recon_ok and transport_ok
    lines.append(f"overall: {'PASS' if ok else 'FAIL'}")
    for failure in failures:
        lines.append(f"failure: {failure}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# sft-verify
# ---------------------------------------------------------------------------


def cmd_sft_verify(args) -> int:
    if not args.config:
        raise InputError("sft-verify needs --config")
    config = _load_json(args.config)
    rho = int(config.get("rho", 1))
    if rho > MAX_CLI_RHO:
        raise ResourceCapError(f"cli caps rho at {MAX_CLI_RHO}")
    rank = int(config.get("rank", 2))
    ctx = _ctx_for_rank(rank)
    action = _resolve_action(ctx, config, args.seed)
    state = _resolve_config_labels(ctx, config, action, rho, args.seed)

    lines = [f"config_hash: {_config_hash(config)}", "command: sft-verify", f"rho: {rho}"]
    ok = True
    radius = rho * rho + 1
    for v in range(action.n):
        report = axioms_check(ctx, rho, pullback_name(ctx, action, state.labels, v, radius))
        lines.append(f"vertex {v}: {'OK' if report.ok else 'FAIL ' + (report.reason or '')}")
        ok = ok and report.ok
    lines.append(f"overall: {'PASS' if ok else 'FAIL'}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# weight-tools
# ---------------------------------------------------------------------------


def cmd_weight_tools(args) -> int:
    action = args.action
    if action == "validate":
        weight = _load_weight(args.weight)
        weight.validate()
        _emit(
            f"config_hash: {_config_hash({'weight': args.weight})}\n"
            f"weight: valid ({len(weight.alphabet)} symbols, rank {weight.rank}, "
            f"exact={'yes' if weight.is_exact else 'no'})\n",
            args.out,
        )
        return 0
    if action == "distance":
        w1 = _load_weight(args.weight)
        w2 = _load_weight(args.weight2)
        _emit(f"distance: {_fmt(weight_distance(w1, w2))}\n", args.out)
        return 0
    if action == "rationalize":
        weight = _load_weight(args.weight)
        ctx = _ctx_for_rank(weight.rank)
        support = None
        if args.sft:
            support = SftSpec.from_json(ctx, _load_json(args.sft))
        result = rationalize_weight(weight, args.q, support=support)
        dist = weight_distance(weight, result)
        bound = 4 * len(weight.alphabet) ** 2 * weight.rank / args.q
        text = json.dumps(result.to_json(), indent=2, sort_keys=True) + "\n"
        if args.out:
            _emit(text, args.out)
            sys.stdout.write(f"distance: {_fmt(dist)} (bound {_fmt(bound)})\n")
        else:
            sys.stdout.write(text)
            sys.stdout.write(f"distance: {_fmt(dist)} (bound {_fmt(bound)})\n")
        return 0
    if action == "markovize":
        data = _load_json(args.marginals)
        rank = int(data.get("rank", 2))
        ctx = _ctx_for_rank(rank)
        dist = PatternDistribution.from_json(ctx, data)
        weight = markovize(ctx, dist)
        value = f_markov(ctx, weight)
        text = json.dumps(weight.to_json(), indent=2, sort_keys=True) + "\n"
        if args.out:
            _emit(text, args.out)
        else:
            sys.stdout.write(text)
        sys.stdout.write(f"f_nats: {_fmt(float(value))}\n")
        if args.weight:
            reference = _load_weight(args.weight)
            ref_value = f_markov(_ctx_for_rank(reference.rank), reference)
            delta = abs(float(value) - float(ref_value))
            sys.stdout.write(f"reference_f_nats: {_fmt(float(ref_value))}\n")
            sys.stdout.write(f"f_delta: {_fmt(delta)}\n")
        return 0
    raise InputError(f"unknown weight-tools action {action!r}")


# ---------------------------------------------------------------------------
# ball
# ---------------------------------------------------------------------------


def cmd_ball(args) -> int:
    ctx = _ctx_for_rank(args.rank)
    radius = args.radius
    if radius < 0:
        raise InputError("radius must be >= 0")
    if ctx.ball_size(radius) > 10**6:
        raise ResourceCapError(f"ball of radius {radius} exceeds a million words")
    _emit("\n".join(ctx.format(w) for w in ctx.ball(radius)) + "\n", args.out)
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="finvariant")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="json experiment config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--cap-exact", type=int, default=None, dest="cap_exact")
        p.add_argument("--cap-labels", type=int, default=None, dest="cap_labels")
        p.add_argument("--out", help="output path (default stdout)")

    p = sub.add_parser("f-exact", help="exact invariant of a weight")
    common(p)
    p.add_argument("--weight", help="weight json file")
    p.set_defaults(func=cmd_f_exact)

    p = sub.add_parser("f-estimate", help="finite-n growth-rate table")
    common(p)
    p.set_defaults(func=cmd_f_estimate)

    p = sub.add_parser("rearrange", help="rearranged action and transport checks")
    common(p)
    p.set_defaults(func=cmd_rearrange)

    p = sub.add_parser("sft-verify", help="verify an orbit-change configuration")
    common(p)
    p.set_defaults(func=cmd_sft_verify)

    p = sub.add_parser("ball", help="emit a word-metric ball, one word per line")
    common(p)
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--radius", type=int, required=True)
    p.set_defaults(func=cmd_ball)

    p = sub.add_parser("weight-tools", help="weight utilities")
    common(p)
    p.add_argument("action", choices=["validate", "rationalize", "markovize", "distance"])
    p.add_argument("--weight", help="weight json file")
    p.add_argument("--weight2", help="second weight json file (distance)")
    p.add_argument("--q", type=int, default=1000, help="denominator bound (rationalize)")
    p.add_argument("--sft", help="nearest-neighbor support spec json (rationalize)")
    p.add_argument("--marginals", help="pattern distribution json (markovize)")
    p.set_defaults(func=cmd_weight_tools)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ResourceCapError as exc:
        sys.stderr.write(f"resource cap: {exc}\n")
        return 3
    except (VerificationError,) as exc:
        sys.stderr.write(f"verification failure: {exc}\n")
        return 1
    except (InputError,) as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return 2
    except FinvariantError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
