"""Counting labelings whose empirical statistics sit near a target, averaging
those counts over random or exhaustively enumerated finite actions, and the
finite-n growth-rate table for the invariant.

Counts are exhaustive over the labeling space A^n under a configurable cap.
Monte Carlo averaging derives one seed per sample index, so results do not
depend on thread count or evaluation order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import product as iter_product
from typing import Sequence

from .actions import FiniteAction, derive_seed, enumerate_actions, hom_count, sample_action
from .errors import InputError, ResourceCapError
from .freegroup import FreeGroupCtx
from .shift import PatternDistribution, window_columns
from .sft import SftSpec, sft_check_all
from .weights import Weight, marginal_distribution


@dataclass(frozen=True)
class Caps:
    """Desk-scale guardrails, overridable from the CLI."""

    exact_actions: int = 10**6  # n!^r for exhaustive averaging
    labelings: int = 10**7  # |A|^n for exhaustive counting


@dataclass(frozen=True)
class Neighborhood:
    """An l1 ball around a target finite-window distribution, optionally
    intersected with a constraint system.

    ``mode`` selects the statistic: ``window`` compares the full marginal on
    the target's window; ``edge_star`` sums the per-generator pair-marginal
    distances.  epsilon = 0 demands exact statistics and therefore an exact
    rational target.
    """

    target: PatternDistribution
    epsilon: float | Fraction
    mode: str = "window"
    sft: SftSpec | None = None

    def __post_init__(self):
        if self.mode not in ("window", "edge_star"):
            raise InputError(f"unknown distance mode {self.mode!r}")
        if float(self.epsilon) < 0:
            raise InputError("epsilon must be >= 0")
        if float(self.epsilon) == 0 and not self.target.is_exact():
            raise InputError("exact-statistics counting needs an exact rational target")


def _edge_windows(ctx: FreeGroupCtx):
    return [tuple(sorted([(), (i,)], key=len)) for i in range(1, ctx.rank + 1)]


def count_omega(
    ctx: FreeGroupCtx,
    action: FiniteAction,
    alphabet: Sequence,
    nbhd: Neighborhood,
    caps: Caps = Caps(),
) -> int:
    """Exhaustive count of labelings in A^n whose empirical distribution lies
    in the neighborhood (and passes the attached constraint system, if any)."""
    n = action.n
    total = len(alphabet) ** n
    if total > caps.labelings:
        raise ResourceCapError(f"|A|^n = {total} labelings exceed cap {caps.labelings}")

    eps = nbhd.epsilon
    exact = float(eps) == 0

    if nbhd.mode == "window":
        window = nbhd.target.window
        cols = window_columns(ctx, action, window)
        vertex_cols = [tuple(col[v] for col in cols) for v in range(n)]
        target_items = nbhd.target.probs
        if exact:
            required = {}
            feasible = True
            for key, p in target_items.items():
                want = Fraction(p) * n
                if want.denominator != 1:
                    feasible = False
                    break
                required[key] = int(want)
            if not feasible:
                return 0
    else:
        windows = _edge_windows(ctx)
        projections = [nbhd.target.project(w) for w in windows]
        pair_cols = []
        for i in range(1, ctx.rank + 1):
            perm_inv = action.letter_perm(-i)
            pair_cols.append(perm_inv)
        if exact:
            required_pairs = []
            for proj in projections:
                req = {}
                feasible = True
                for key, p in proj.probs.items():
                    want = Fraction(p) * n
                    if want.denominator != 1:
                        feasible = False
                        break
                    req[key] = int(want)
                if not feasible:
                    return 0
                required_pairs.append(req)

    spec = nbhd.sft
    count = 0
    for labels in iter_product(alphabet, repeat=n):
        if nbhd.mode == "window":
            counts: dict[tuple, int] = {}
            for vc in vertex_cols:
                key = tuple(labels[c] for c in vc)
                counts[key] = counts.get(key, 0) + 1
            if exact:
                if counts != required:
                    continue
            else:
                dist = 0.0
                matched = 0.0
                for key, c in counts.items():
                    t = target_items.get(key, 0)
                    dist += abs(c / n - float(t))
                    matched += float(t)
                dist += 1.0 - matched
                if dist > eps + 1e-12:
                    continue
        else:
            ok = True
            star = 0.0
            for i in range(ctx.rank):
                perm_inv = pair_cols[i]
                pcounts: dict[tuple, int] = {}
                for v in range(n):
                    key = (labels[v], labels[perm_inv[v]])
                    pcounts[key] = pcounts.get(key, 0) + 1
                if exact:
                    if pcounts != required_pairs[i]:
                        ok = False
                        break
                else:
                    proj = projections[i].probs
                    matched = 0.0
                    for key, c in pcounts.items():
                        t = proj.get(key, 0)
                        star += abs(c / n - float(t))
                        matched += float(t)
                    star += 1.0 - matched
            if not ok or (not exact and star > eps + 1e-12):
                continue
        if spec is not None and not sft_check_all(ctx, spec, action, labels):
            continue
        count += 1
    return count


@dataclass(frozen=True)
class CountStats:
    mean: float
    stderr: float
    samples: int


def expected_count(
    ctx: FreeGroupCtx,
    n: int,
    alphabet: Sequence,
    nbhd: Neighborhood,
    mode: str = "exact",
    samples: int = 0,
    seed: int = 0,
    caps: Caps = Caps(),
    threads: int = 1,
) -> CountStats:
    """Mean neighborhood count over finite actions.

    ``exact`` averages over all n!^r homomorphisms (stderr 0); ``monte_carlo``
    averages over ``samples`` uniform draws with per-index derived seeds and
    reports the standard error of the mean.
    """
    if mode == "exact":
        total = hom_count(n, ctx.rank)
        if total > caps.exact_actions:
            raise ResourceCapError(f"n!^r = {total} exceeds cap {caps.exact_actions}")
        acc = 0
        for action in enumerate_actions(n, ctx.rank, cap=caps.exact_actions):
            acc += count_omega(ctx, action, alphabet, nbhd, caps)
        return CountStats(acc / total, 0.0, total)
    if mode != "monte_carlo":
        raise InputError(f"unknown mode {mode!r}")
    if samples < 1:
        raise InputError("monte carlo needs at least one sample")

    def one(idx: int) -> int:
        action = sample_action(n, ctx.rank, derive_seed(seed, idx))
        return count_omega(ctx, action, alphabet, nbhd, caps)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            counts = list(pool.map(one, range(samples)))
    else:
        counts = [one(idx) for idx in range(samples)]
    mean = sum(counts) / samples
    if samples > 1:
        var = sum((c - mean) ** 2 for c in counts) / (samples - 1)
        stderr = math.sqrt(var / samples)
    else:
        stderr = 0.0
    return CountStats(mean, stderr, samples)


@dataclass(frozen=True)
class EstimateRow:
    n: int
    samples: int
    mean_count: float
    log_mean_over_n: float
    stderr: float


@dataclass(frozen=True)
class EstimateResult:
    rows: tuple[EstimateRow, ...]
    warnings: tuple[str, ...] = ()


def f_estimate(
    ctx: FreeGroupCtx,
    weight: Weight | None,
    window_radius: int,
    epsilon,
    n_list: Sequence[int],
    mode: str = "monte_carlo",
    samples: int = 100,
    seed: int = 0,
    sft: SftSpec | None = None,
    distance_mode: str = "window",
    caps: Caps = Caps(),
    threads: int = 1,
    target: PatternDistribution | None = None,
    alphabet: Sequence | None = None,
) -> EstimateResult:
    """Per-n growth-rate table (1/n) log E[count].

    The target marginal comes from the weight at the given window radius, or
    is supplied directly as ``target`` (with an explicit ``alphabet``).  A
    zero mean is reported as -inf, not an error.
    """
    if weight is not None:
        target = marginal_distribution(weight, ctx.ball(window_radius))
        alphabet = weight.alphabet
    elif target is None or alphabet is None:
        raise InputError("estimation needs a weight, or a target with an alphabet")
    nbhd = Neighborhood(target=target, epsilon=epsilon, mode=distance_mode, sft=sft)
    warnings = []
    if float(epsilon) == 0:
        denominators = [
            Fraction(p).denominator for p in target.probs.values()
        ]
        lcm = math.lcm(*denominators) if denominators else 1
        for n in n_list:
            if n % lcm:
                warnings.append(
                    f"n={n} is not a multiple of the target denominator lcm {lcm}; "
                    "exact statistics are unattainable and counts will be 0"
                )
    rows = []
    for n in n_list:
        stats = expected_count(
            ctx,
            n,
            alphabet,
            nbhd,
            mode=mode,
            samples=samples,
            seed=derive_seed(seed, n),
            caps=caps,
            threads=threads,
        )
        log_over_n = math.log(stats.mean) / n if stats.mean > 0 else float("-inf")
        rows.append(EstimateRow(n, stats.samples, stats.mean, log_over_n, stats.stderr))
    return EstimateResult(tuple(rows), tuple(warnings))
