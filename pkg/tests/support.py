"""Test support: random instances and an independent brute-force oracle.

The oracle evaluates the definitional semantics directly: Floyd-Warshall
distances instead of the engine's index, full enumeration instead of
binary-searched bands, no conjunction reordering, no short-circuiting, no
parallelism, and sugar (or/always/eventually/everywhere/somewhere)
interpreted by its own meaning rather than by rewriting. It shares nothing
with the engine's evaluation path.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from sastl import (
    Agg,
    Always,
    And,
    Atom,
    Count,
    Eventually,
    Everywhere,
    Interval,
    Labeling,
    Not,
    Or,
    PsiNot,
    PsiOr,
    PsiProp,
    PsiTrue,
    SampleGrid,
    Somewhere,
    SpatialDomain,
    SpatialGraph,
    SpatioTemporalSignal,
    Until,
    Verum,
    build_index,
    horizon,
)

VARIABLES = ("x", "y")
PROPOSITIONS = ("P", "Q", "R")


@dataclass
class Env:
    """One random deployment, in both engine and oracle-friendly form."""

    nodes: list
    dist: dict  # (a, b) -> finite shortest-path distance; absent = unreachable
    labels: dict  # node -> set of propositions
    cells: dict  # (t, node, var) -> float | None
    n_samples: int
    step: float
    graph: SpatialGraph
    labeling: Labeling
    index: object
    signal: SpatioTemporalSignal


def floyd_warshall(nodes, edges) -> dict:
    """All-pairs shortest paths by repeated relaxation (not Dijkstra).

    Returns only finite entries; unreachable pairs are absent.
    """
    import numpy as np

    n = len(nodes)
    ix = {node: i for i, node in enumerate(nodes)}
    d = np.full((n, n), math.inf)
    np.fill_diagonal(d, 0.0)
    for a, b, w in edges:
        i, j = ix[a], ix[b]
        d[i, j] = min(d[i, j], w)
        d[j, i] = min(d[j, i], w)
    for k in range(n):
        d = np.minimum(d, d[:, k, None] + d[None, k, :])
    out = {}
    for i, a in enumerate(nodes):
        for j, b in enumerate(nodes):
            if math.isfinite(d[i, j]):
                out[(a, b)] = float(d[i, j])
    return out


def make_env(
    rng: random.Random,
    *,
    max_nodes: int = 10,
    max_samples: int = 10,
    undefined_p: float = 0.1,
    edge_p: float = 0.45,
) -> Env:
    n = rng.randint(1, max_nodes)
    nodes = [f"l{i}" for i in range(n)]
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < edge_p:
                edges.append((nodes[i], nodes[j], round(rng.uniform(0.0, 3.0), 2)))
    labels = {
        node: {p for p in PROPOSITIONS if rng.random() < 0.35} for node in nodes
    }
    n_samples = rng.randint(1, max_samples)
    cells = {}
    for t in range(n_samples):
        for node in nodes:
            for var in VARIABLES:
                if rng.random() < undefined_p:
                    cells[(t, node, var)] = None
                else:
                    cells[(t, node, var)] = round(rng.uniform(-10.0, 10.0), 3)

    graph = SpatialGraph(nodes, edges)
    labeling = Labeling(labels)
    index = build_index(graph)
    grid = SampleGrid(0.0, 1.0, n_samples)
    signal = SpatioTemporalSignal.from_cells(grid, nodes, VARIABLES, cells)
    return Env(
        nodes=nodes,
        dist=floyd_warshall(nodes, edges),
        labels=labels,
        cells=cells,
        n_samples=n_samples,
        step=1.0,
        graph=graph,
        labeling=labeling,
        index=index,
        signal=signal,
    )


# --- random formulas ---------------------------------------------------------


def gen_psi(rng: random.Random, depth: int = 2):
    roll = rng.random()
    if depth <= 0 or roll < 0.35:
        return PsiProp(rng.choice(PROPOSITIONS)) if rng.random() < 0.8 else PsiTrue()
    if roll < 0.6:
        return PsiNot(gen_psi(rng, depth - 1))
    return PsiOr(gen_psi(rng, depth - 1), gen_psi(rng, depth - 1))


def gen_domain(rng: random.Random) -> SpatialDomain:
    d1 = rng.choice([0.0, 0.0, 0.5, 1.0, round(rng.uniform(0, 2), 2)])
    if rng.random() < 0.25:
        d2 = math.inf
    else:
        d2 = d1 + rng.choice([0.0, 0.5, 1.0, 2.0, round(rng.uniform(0, 4), 2)])
    return SpatialDomain(d1, d2, gen_psi(rng))


def gen_atom(rng: random.Random) -> Atom:
    return Atom(
        rng.choice(VARIABLES),
        rng.choice(("<", "<=", ">", ">=")),
        round(rng.uniform(-10.0, 10.0), 3),
    )


def _gen_count_threshold(rng: random.Random, op: str, cmp: str, n_hint: int) -> float:
    strict_low = cmp in (">=", "<")
    if op == "sum":
        # occasionally infeasible (above the location count) on purpose
        c = rng.uniform(0.0, n_hint + 2.0)
        if rng.random() < 0.4:
            c = float(rng.randint(0, n_hint + 1))
        if strict_low:
            c = max(c, 0.5)
        return c
    choices = [0.2, 1 / 3, 0.5, 0.75, 0.9, round(rng.uniform(0.01, 0.99), 3)]
    if strict_low:
        choices.append(1.0)
    else:
        choices.append(0.0)
    return rng.choice(choices)


def gen_formula(rng: random.Random, depth: int, time_budget: int, n_hint: int = 5):
    """Random formula with horizon at most time_budget samples."""
    if depth <= 0:
        return Verum() if rng.random() < 0.08 else gen_atom(rng)
    kind = rng.choices(
        ("atom", "not", "and", "or", "until", "always", "eventually",
         "agg", "count", "everywhere", "somewhere"),
        weights=(14, 10, 12, 10, 9, 9, 9, 10, 10, 4, 4),
    )[0]
    if kind == "atom":
        return gen_atom(rng)
    if kind == "not":
        return Not(gen_formula(rng, depth - 1, time_budget, n_hint))
    if kind in ("and", "or"):
        left = gen_formula(rng, depth - 1, time_budget, n_hint)
        right = gen_formula(rng, depth - 1, time_budget, n_hint)
        return And(left, right) if kind == "and" else Or(left, right)
    if kind in ("until", "always", "eventually"):
        hi = rng.randint(0, min(3, time_budget))
        lo = rng.randint(0, hi)
        interval = Interval(float(lo), float(hi))
        rest = time_budget - hi
        if kind == "until":
            return Until(
                interval,
                gen_formula(rng, depth - 1, rest, n_hint),
                gen_formula(rng, depth - 1, rest, n_hint),
            )
        child = gen_formula(rng, depth - 1, rest, n_hint)
        return Always(interval, child) if kind == "always" else Eventually(interval, child)
    domain = gen_domain(rng)
    if kind == "agg":
        return Agg(
            rng.choice(("max", "min", "sum", "avg")),
            domain,
            rng.choice(VARIABLES),
            rng.choice(("<", "<=", ">", ">=")),
            round(rng.uniform(-10.0, 10.0), 3),
        )
    if kind == "count":
        op = rng.choice(("max", "min", "sum", "avg"))
        cmp = rng.choice(("<", "<=", ">", ">="))
        c = _gen_count_threshold(rng, op, cmp, n_hint)
        return Count(op, domain, gen_formula(rng, depth - 1, time_budget, n_hint), cmp, c)
    child = gen_formula(rng, depth - 1, time_budget, n_hint)
    return Everywhere(domain, child) if kind == "everywhere" else Somewhere(domain, child)


def gen_instance(rng: random.Random, env: Env, *, depth: int = 4):
    """(formula, anchor sample, anchor location) with full horizon coverage."""
    budget = env.n_samples - 1
    f = gen_formula(rng, rng.randint(1, depth), budget, n_hint=len(env.nodes))
    h = math.ceil(horizon(f) - 1e-9)
    t = rng.randint(0, env.n_samples - 1 - h)
    loc = rng.choice(env.nodes)
    return f, t, loc


# --- brute-force oracle -------------------------------------------------------


def oracle_domain(env: Env, location: str, domain: SpatialDomain) -> list:
    """Brute-force band members, ordered by the oracle's own distances.

    Membership is algorithm-independent (the band tolerance is part of the
    query semantics and shared with the engine). Ordering of equal-distance
    members can differ from the engine at the last float bit because the two
    shortest-path algorithms sum path weights in different orders, so
    cross-checks compare membership, and ordering is asserted separately
    against the engine's own metric (see `assert_descan_ordered`).
    """
    tol = 1e-9
    hits = []
    for other in env.nodes:
        d = env.dist.get((location, other))
        if d is None or math.isinf(d):
            continue
        if domain.d1 - tol <= d <= domain.d2 + tol and oracle_psi(env, other, domain.psi):
            hits.append((d, other))
    hits.sort()
    return [node for _, node in hits]


def assert_descan_ordered(index, location: str, members: list) -> None:
    """The engine's output must ascend in its own distances, ids on ties."""
    keys = [(index.distance(location, m), m) for m in members]
    assert keys == sorted(keys)


def oracle_psi(env: Env, location: str, psi) -> bool:
    if isinstance(psi, PsiTrue):
        return True
    if isinstance(psi, PsiProp):
        return psi.name in env.labels[location]
    if isinstance(psi, PsiNot):
        return not oracle_psi(env, location, psi.child)
    return oracle_psi(env, location, psi.left) or oracle_psi(env, location, psi.right)


def _window(env: Env, interval: Interval, t: int) -> range:
    lo = t + math.ceil(interval.lo / env.step - 1e-9)
    hi = t + math.floor(interval.hi / env.step + 1e-9)
    return range(lo, hi + 1)


def _compare(value: float, cmp: str, c: float) -> bool:
    return {
        "<": value < c,
        "<=": value <= c,
        ">": value > c,
        ">=": value >= c,
    }[cmp]


def _agg_values(env: Env, variable: str, domain: SpatialDomain, t: int, loc: str):
    return [
        env.cells[(t, other, variable)]
        for other in oracle_domain(env, loc, domain)
        if env.cells[(t, other, variable)] is not None
    ]


def _apply_op(op: str, values: list) -> float:
    if op == "max":
        return max(values)
    if op == "min":
        return min(values)
    if op == "sum":
        return sum(values)
    return sum(values) / len(values)


def oracle_sat(f, env: Env, t: int, loc: str) -> bool:
    """Definitional Boolean satisfaction. No optimization of any kind."""
    if isinstance(f, Verum):
        return True
    if isinstance(f, Atom):
        v = env.cells[(t, loc, f.variable)]
        if v is None:
            return True
        return _compare(v, f.cmp, f.threshold)
    if isinstance(f, Not):
        return not oracle_sat(f.child, env, t, loc)
    if isinstance(f, And):
        left = oracle_sat(f.left, env, t, loc)
        right = oracle_sat(f.right, env, t, loc)
        return left and right
    if isinstance(f, Or):
        left = oracle_sat(f.left, env, t, loc)
        right = oracle_sat(f.right, env, t, loc)
        return left or right
    if isinstance(f, Until):
        witnesses = []
        for tp in _window(env, f.interval, t):
            right = oracle_sat(f.right, env, tp, loc)
            prefix = [oracle_sat(f.left, env, s, loc) for s in range(t, tp + 1)]
            witnesses.append(right and all(prefix))
        return any(witnesses)
    if isinstance(f, Always):
        return all(oracle_sat(f.child, env, tp, loc) for tp in _window(env, f.interval, t))
    if isinstance(f, Eventually):
        hits = [oracle_sat(f.child, env, tp, loc) for tp in _window(env, f.interval, t)]
        return any(hits)
    if isinstance(f, Agg):
        values = _agg_values(env, f.variable, f.domain, t, loc)
        if not values:
            return True
        return _compare(_apply_op(f.op, values), f.cmp, f.threshold)
    if isinstance(f, Count):
        members = oracle_domain(env, loc, f.domain)
        if not members:
            return True
        g = [1.0 if oracle_sat(f.child, env, t, other) else 0.0 for other in members]
        return _compare(_apply_op(f.op, g), f.cmp, f.threshold)
    if isinstance(f, Everywhere):
        members = oracle_domain(env, loc, f.domain)
        if not members:
            return True
        return all(oracle_sat(f.child, env, t, other) for other in members)
    if isinstance(f, Somewhere):
        members = oracle_domain(env, loc, f.domain)
        if not members:
            return True
        return any(oracle_sat(f.child, env, t, other) for other in members)
    raise TypeError(f"oracle cannot evaluate {f!r}")


def _oracle_rank(target: float, cmp: str) -> int:
    r = round(target)
    if abs(target - r) <= 1e-9:
        target = r
    if cmp == ">":
        return math.floor(target) + 1
    return max(1, math.ceil(target))


def _oracle_kth_largest(values: list, k: int) -> float:
    if k > len(values):
        return -math.inf
    return sorted(values, reverse=True)[k - 1]


def oracle_rho(f, env: Env, t: int, loc: str) -> float:
    """Definitional robustness."""
    if isinstance(f, Verum):
        return math.inf
    if isinstance(f, Atom):
        v = env.cells[(t, loc, f.variable)]
        if v is None:
            return math.inf
        return v - f.threshold if f.cmp in (">", ">=") else f.threshold - v
    if isinstance(f, Not):
        return -oracle_rho(f.child, env, t, loc)
    if isinstance(f, And):
        return min(oracle_rho(f.left, env, t, loc), oracle_rho(f.right, env, t, loc))
    if isinstance(f, Or):
        return max(oracle_rho(f.left, env, t, loc), oracle_rho(f.right, env, t, loc))
    if isinstance(f, Until):
        best = -math.inf
        for tp in _window(env, f.interval, t):
            right = oracle_rho(f.right, env, tp, loc)
            prefix = min(oracle_rho(f.left, env, s, loc) for s in range(t, tp + 1))
            best = max(best, min(right, prefix))
        return best
    if isinstance(f, Always):
        return min(
            (oracle_rho(f.child, env, tp, loc) for tp in _window(env, f.interval, t)),
            default=math.inf,
        )
    if isinstance(f, Eventually):
        return max(
            (oracle_rho(f.child, env, tp, loc) for tp in _window(env, f.interval, t)),
            default=-math.inf,
        )
    if isinstance(f, Agg):
        values = _agg_values(env, f.variable, f.domain, t, loc)
        if not values:
            return math.inf
        if f.op == "sum":
            margin = (sum(values) - f.threshold) / len(values)
        else:
            margin = _apply_op(f.op, values) - f.threshold
        return margin if f.cmp in (">", ">=") else -margin
    if isinstance(f, Count):
        members = oracle_domain(env, loc, f.domain)
        if not members:
            return math.inf
        child = [oracle_rho(f.child, env, t, other) for other in members]
        return _oracle_count_rho(f.op, f.cmp, f.threshold, child)
    if isinstance(f, Everywhere):
        members = oracle_domain(env, loc, f.domain)
        if not members:
            return math.inf
        return min(oracle_rho(f.child, env, t, other) for other in members)
    if isinstance(f, Somewhere):
        members = oracle_domain(env, loc, f.domain)
        if not members:
            return math.inf
        return max(oracle_rho(f.child, env, t, other) for other in members)
    raise TypeError(f"oracle cannot evaluate {f!r}")


def _oracle_count_rho(op: str, cmp: str, c: float, child: list) -> float:
    if cmp in ("<", "<="):
        dual = ">=" if cmp == "<" else ">"
        return -_oracle_count_rho(op, dual, c, child)
    if op == "max":
        return max(child)
    if op == "min":
        return min(child)
    target = c if op == "sum" else c * len(child)
    return _oracle_kth_largest(child, _oracle_rank(target, cmp))
