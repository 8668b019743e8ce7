"""Shared fixtures: contexts, canonical automorphisms, and the pool of
accepted (action, configuration) instances used by the rearrangement suites."""

from __future__ import annotations

import random
from dataclasses import dataclass

import pytest

from finvariant import (
    Automorphism,
    FiniteAction,
    FreeGroupCtx,
    Microstate,
    sample_action,
    sample_sft_config,
    zrho_spec,
)


@pytest.fixture(scope="session")
def ctx2() -> FreeGroupCtx:
    return FreeGroupCtx(2)


@pytest.fixture(scope="session")
def ctx1() -> FreeGroupCtx:
    return FreeGroupCtx(1)


def canonical_automorphisms(ctx: FreeGroupCtx) -> dict[str, Automorphism]:
    return {
        "identity": Automorphism.from_names(ctx, {"a": "a", "b": "b"}),
        "swap": Automorphism.from_names(ctx, {"a": "b", "b": "a"}),
        "inversion": Automorphism.from_names(ctx, {"a": "A", "b": "b"}),
        "nielsen": Automorphism.from_names(ctx, {"a": "ab", "b": "b"}),
    }


@pytest.fixture(scope="session")
def autos(ctx2) -> dict[str, Automorphism]:
    return canonical_automorphisms(ctx2)


@dataclass
class Instance:
    """One accepted (sigma, x, y) triple with the displacement it verifies at."""

    name: str
    rho: int
    action: FiniteAction
    labels: tuple
    ylabels: tuple
    source: str = "automorphism"


def _block_action(a: FiniteAction, b: FiniteAction) -> FiniteAction:
    n = a.n + b.n
    perms = []
    for i in range(a.rank):
        perm = tuple(a.perms[i]) + tuple(v + a.n for v in b.perms[i])
        perms.append(perm)
    return FiniteAction(n, tuple(perms))


def build_instances(ctx: FreeGroupCtx, min_count: int = 50) -> list[Instance]:
    autos = canonical_automorphisms(ctx)
    rng = random.Random(20240901)
    instances: list[Instance] = []

    def ylabels_for(n: int) -> tuple:
        return tuple(rng.choice(("p", "q")) for _ in range(n))

    seed = 0
    while len(instances) < min_count:
        for name, auto in autos.items():
            n = 6 + seed % 7
            action = sample_action(n, ctx.rank, seed=1000 + seed)
            instances.append(
                Instance(
                    name=f"{name}-s{seed}",
                    rho=auto.displacement,
                    action=action,
                    labels=auto.constant_config(n).labels,
                    ylabels=ylabels_for(n),
                )
            )
            seed += 1

    # mixed-orbit instances: different automorphisms on different orbits give
    # genuinely non-constant accepted configurations (single transitive orbits
    # at displacement 1 force one constant automorphism, so this is the
    # structural source of non-constant coverage)
    pairs = [
        ("identity", "swap"),
        ("swap", "inversion"),
        ("identity", "nielsen"),
        ("nielsen", "swap"),
        ("inversion", "nielsen"),
        ("inversion", "identity"),
    ]
    for k, (left, right) in enumerate(pairs):
        a1 = sample_action(5, ctx.rank, seed=2000 + k)
        a2 = sample_action(6, ctx.rank, seed=3000 + k)
        action = _block_action(a1, a2)
        labels = (
            autos[left].constant_config(5).labels + autos[right].constant_config(6).labels
        )
        rho = max(autos[left].displacement, autos[right].displacement)
        instances.append(
            Instance(
                name=f"mixed-{left}-{right}",
                rho=rho,
                action=action,
                labels=labels,
                ylabels=ylabels_for(11),
                source="mixed",
            )
        )

    # sampler-found instances: hinted on transitive actions (the hint is the
    # only solution family there) and unhinted on small multi-orbit actions,
    # where backtracking discovers non-constant solutions on its own
    spec = zrho_spec(ctx, 1)
    hint = autos["swap"].constant_config(6)
    for k in range(3):
        action = sample_action(6, ctx.rank, seed=4000 + k)
        found = sample_sft_config(ctx, spec, action, seed=k, budget=4000, hint=hint)
        if found is not None:
            instances.append(
                Instance(
                    name=f"sampled-{k}",
                    rho=1,
                    action=action,
                    labels=found.labels,
                    ylabels=ylabels_for(6),
                    source="sampler",
                )
            )
    for k in range(4):
        action = _block_action(
            sample_action(2, ctx.rank, seed=5000 + k),
            sample_action(3, ctx.rank, seed=6000 + k),
        )
        found = sample_sft_config(ctx, spec, action, seed=50 + k, budget=60000, restarts=2)
        if found is not None:
            instances.append(
                Instance(
                    name=f"sampled-free-{k}",
                    rho=1,
                    action=action,
                    labels=found.labels,
                    ylabels=ylabels_for(5),
                    source="sampler",
                )
            )
    return instances


@pytest.fixture(scope="session")
def accepted_instances(ctx2) -> list[Instance]:
    return build_instances(ctx2)
