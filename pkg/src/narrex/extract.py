"""Storyline extraction: maximize the weakest edge coherence of a single
forward path of exactly K nodes, subject to cluster-coverage constraints.

The optimum is found by bottleneck decomposition, which is exact:

* phase 1 binary-searches the bottleneck value over the sorted distinct
  edge coherences; a threshold is feasible when the subgraph of edges at or
  above it still carries an exactly-K source-to-target path (a bitmask
  reachability DP) that can meet the coverage requirement (trivially true
  when at most one cluster is required; otherwise a MILP feasibility
  check);
* phase 2 picks, among the paths attaining that bottleneck, the one with
  maximum total coherence — an exact length-indexed DP when coverage does
  not bind, a MILP with the same flow-and-coverage structure otherwise —
  resolving remaining ties toward the lexicographically smallest id
  sequence on the DP path.

The MILP form forces one simple forward path via binary edge variables
x(u,v) and node variables y(v): out(source)=1, in(target)=1, in=out=y for
interior nodes, sum y = K; per-category binaries z(c) <= sum of y over the
category with sum z >= ceil(mincover * C).  The tie-break budget of 1e-4
bounds how far any accepted solution may sit from the pure bottleneck
optimum; the decomposition attains the bottleneck exactly, using the
budget only as the documented allowance.

Every returned map is re-validated against the invariants independently of
the solver.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .coherence import CoherenceGraph
from .corpus import CorpusManifest
from .errors import InfeasibleExtractionError, NarrexError, SolverTimeoutError
from .milp import MilpInfeasible, MilpProblem, solve_milp

TIE_BREAK_BUDGET = 1e-4
_DP_TOL = 1e-9


@dataclass
class ExtractionParams:
    source_id: str
    target_id: str
    K: int
    mincover: float = 0.2
    space_name: str = "high"
    itf: bool = False

    def validate(self) -> None:
        if self.K < 2:
            raise NarrexError(f"K must be at least 2, got {self.K}")
        if not 0.0 <= self.mincover <= 1.0:
            raise NarrexError(f"mincover must lie in [0, 1], got {self.mincover}")
        if self.source_id == self.target_id:
            raise NarrexError("source and target must differ")

    def to_json(self) -> dict:
        return {
            "source_id": self.source_id,
            "target_id": self.target_id,
            "K": self.K,
            "mincover": self.mincover,
            "space": self.space_name,
            "itf": self.itf,
        }


@dataclass
class SolverStats:
    wall_time_s: float
    num_nodes: int
    num_edges: int
    num_binaries: int
    optimal: bool
    status: str

    def to_json(self) -> dict:
        # wall time is deliberately left out so artifacts stay byte-identical
        return {
            "num_nodes": self.num_nodes,
            "num_edges": self.num_edges,
            "num_binaries": self.num_binaries,
            "optimal": self.optimal,
            "status": self.status,
        }


@dataclass
class NarrativeMap:
    params: ExtractionParams
    nodes: list[str]
    edges: list[tuple[str, str, float, float, float]]
    main_route: list[str]
    mu_star: float
    covered_clusters: list[str]
    solver_stats: SolverStats

    def to_json(self) -> dict:
        return {
            "params": self.params.to_json(),
            "nodes": self.nodes,
            "edges": [
                {"source": u, "target": v, "coherence": coh,
                 "raw_similarity": raw, "topic_similarity": topic}
                for u, v, coh, raw, topic in self.edges
            ],
            "main_route": self.main_route,
            "mu_star": self.mu_star,
            "covered_clusters": self.covered_clusters,
            "solver_stats": self.solver_stats.to_json(),
        }


@dataclass
class FeasibilityReport:
    feasible: bool
    k_feasible: bool
    coverage_feasible: bool
    max_path_length: int
    required_coverage: int
    coverage_upper_bound: list[str]
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "feasible": self.feasible,
            "k_feasible": self.k_feasible,
            "coverage_feasible": self.coverage_feasible,
            "max_path_length": self.max_path_length,
            "required_coverage": self.required_coverage,
            "coverage_upper_bound": self.coverage_upper_bound,
            "detail": self.detail,
        }


class _Interval:
    """Graph slice between source and target positions in temporal order.

    Node indices are interval-relative (0 = source, m-1 = target); edges are
    kept as parallel arrays sorted by (from, to) for deterministic order.
    """

    def __init__(self, g: CoherenceGraph, corpus: CorpusManifest, params: ExtractionParams):
        params.validate()
        try:
            s_row = corpus.row_of(params.source_id)
            t_row = corpus.row_of(params.target_id)
        except KeyError as exc:
            raise NarrexError(f"unknown record id {exc.args[0]!r}") from None
        s_pos = g.pos(s_row)
        t_pos = g.pos(t_row)
        if s_pos >= t_pos:
            raise NarrexError(
                f"source {params.source_id!r} must precede target {params.target_id!r} in temporal order"
            )
        self.g = g
        self.corpus = corpus
        self.params = params
        self.s_pos = s_pos
        self.t_pos = t_pos
        self.m = t_pos - s_pos + 1
        triples = sorted(
            (g.pos(u) - s_pos, g.pos(v) - s_pos, coh, raw, topic)
            for u, v, coh, raw, topic in g.edges
            if s_pos <= g.pos(u) and g.pos(v) <= t_pos
        )
        self.eu = np.array([e[0] for e in triples], dtype=np.int64)
        self.ev = np.array([e[1] for e in triples], dtype=np.int64)
        self.coh = np.array([e[2] for e in triples], dtype=np.float64)
        self.raw = np.array([e[3] for e in triples], dtype=np.float64)
        self.topic = np.array([e[4] for e in triples], dtype=np.float64)
        self.cats = [self._category_of(i) for i in range(self.m)]

    @property
    def n_edges(self) -> int:
        return len(self.eu)

    def _category_of(self, idx: int) -> str:
        cat = self.corpus.records[self.g.node_order[self.s_pos + idx]].effective_category
        if cat is None:
            raise NarrexError("all records need effective categories before extraction")
        return cat

    def id_of(self, idx: int) -> str:
        return self.corpus.records[self.g.node_order[self.s_pos + idx]].id

    def exact_k_reachable(self, k: int, mask: np.ndarray | None = None) -> bool:
        """Bitmask DP: bit L of masks[v] set iff some L-node path reaches v."""
        masks = [0] * self.m
        masks[0] = 1 << 1
        cap = (1 << (k + 1)) - 1
        sel = range(self.n_edges) if mask is None else np.flatnonzero(mask)
        for i in sel:
            u, v = int(self.eu[i]), int(self.ev[i])
            masks[v] |= (masks[u] << 1) & cap
        return bool(masks[self.m - 1] >> k & 1)

    def max_path_length(self) -> int:
        """Longest source-to-target path, counted in nodes; 0 if unreachable."""
        best = [-1] * self.m
        best[0] = 1
        for i in range(self.n_edges):
            u, v = int(self.eu[i]), int(self.ev[i])
            if best[u] >= 1:
                best[v] = max(best[v], best[u] + 1)
        return max(0, best[self.m - 1])


def required_coverage(corpus: CorpusManifest, mincover: float) -> int:
    return math.ceil(mincover * len(corpus.effective_categories()))


def check_feasibility(g: CoherenceGraph, corpus: CorpusManifest,
                      params: ExtractionParams) -> FeasibilityReport:
    """Per-constraint-family verdicts ahead of a full solve.

    The coverage verdict uses the union of categories over interval nodes as
    an upper bound; the exact joint check is the solver's job.
    """
    iv = _Interval(g, corpus, params)
    max_len = iv.max_path_length()
    k_ok = params.K <= max_len and iv.exact_k_reachable(params.K)
    req = required_coverage(corpus, params.mincover)
    interval_cats = sorted(set(iv.cats))
    cov_ok = req <= min(params.K, len(interval_cats))
    return FeasibilityReport(
        feasible=k_ok and cov_ok,
        k_feasible=k_ok,
        coverage_feasible=cov_ok,
        max_path_length=max_len,
        required_coverage=req,
        coverage_upper_bound=interval_cats,
        detail={
            "interval_size": iv.m,
            "interval_edges": iv.n_edges,
            "K": params.K,
        },
    )


def _build_path_problem(iv: _Interval, k: int, req: int, mask: np.ndarray,
                        objective_coh: bool) -> tuple[MilpProblem, list[int], np.ndarray]:
    """Flow + coverage model over the masked edge subset.

    Returns (problem, x variable ids aligned with the selected edges,
    selected edge indices).
    """
    sel = np.flatnonzero(mask)
    problem = MilpProblem()
    x_vars = [problem.add_binary(objective=float(iv.coh[i]) if objective_coh else 0.0)
              for i in sel]
    y_vars = [problem.add_binary() for _ in range(iv.m)]
    out_of: list[list[int]] = [[] for _ in range(iv.m)]
    into: list[list[int]] = [[] for _ in range(iv.m)]
    for j, i in enumerate(sel):
        out_of[int(iv.eu[i])].append(j)
        into[int(iv.ev[i])].append(j)

    problem.add_constraint({y_vars[0]: 1.0}, lb=1.0, ub=1.0)
    problem.add_constraint({y_vars[iv.m - 1]: 1.0}, lb=1.0, ub=1.0)
    problem.add_constraint({x_vars[j]: 1.0 for j in out_of[0]}, lb=1.0, ub=1.0)
    problem.add_constraint({x_vars[j]: 1.0 for j in into[iv.m - 1]}, lb=1.0, ub=1.0)
    if into[0]:
        problem.add_constraint({x_vars[j]: 1.0 for j in into[0]}, lb=0.0, ub=0.0)
    if out_of[iv.m - 1]:
        problem.add_constraint({x_vars[j]: 1.0 for j in out_of[iv.m - 1]}, lb=0.0, ub=0.0)
    for v in range(1, iv.m - 1):
        coeffs_in = {x_vars[j]: 1.0 for j in into[v]}
        coeffs_in[y_vars[v]] = coeffs_in.get(y_vars[v], 0.0) - 1.0
        problem.add_constraint(coeffs_in, lb=0.0, ub=0.0)
        coeffs_out = {x_vars[j]: 1.0 for j in out_of[v]}
        coeffs_out[y_vars[v]] = coeffs_out.get(y_vars[v], 0.0) - 1.0
        problem.add_constraint(coeffs_out, lb=0.0, ub=0.0)
    problem.add_constraint({y: 1.0 for y in y_vars}, lb=float(k), ub=float(k))

    if req > 0:
        cats = sorted(set(iv.cats))
        z_vars = {}
        for cat in cats:
            z = problem.add_binary()
            z_vars[cat] = z
            coeffs = {y_vars[v]: 1.0 for v in range(iv.m) if iv.cats[v] == cat}
            coeffs[z] = -1.0
            problem.add_constraint(coeffs, lb=0.0)
        problem.add_constraint({z: 1.0 for z in z_vars.values()}, lb=float(req))
    return problem, x_vars, sel


def _decode_route(iv: _Interval, sel: np.ndarray, x_values: np.ndarray,
                  x_vars: list[int]) -> list[int]:
    succ: dict[int, int] = {}
    for j, i in enumerate(sel):
        if x_values[x_vars[j]] > 0.5:
            u = int(iv.eu[i])
            if u in succ:
                raise NarrexError("internal error: node with two outgoing route edges")
            succ[u] = int(iv.ev[i])
    route = [0]
    while route[-1] != iv.m - 1:
        nxt = succ.get(route[-1])
        if nxt is None:
            raise NarrexError("internal error: route breaks before the target")
        route.append(nxt)
    return route


class _Budget:
    def __init__(self, limit: float):
        self.limit = limit
        self.started = time.perf_counter()

    def remaining(self) -> float:
        left = self.limit - (time.perf_counter() - self.started)
        if left <= 0:
            raise SolverTimeoutError("extraction hit the time limit")
        return left


def _coverage_feasible(iv: _Interval, k: int, req: int, mask: np.ndarray,
                       budget: _Budget) -> list[int] | None:
    """A route meeting coverage over the masked edges, or None."""
    problem, x_vars, sel = _build_path_problem(iv, k, req, mask, objective_coh=False)
    try:
        result = solve_milp(problem, time_limit=budget.remaining())
    except MilpInfeasible:
        return None
    return _decode_route(iv, sel, result.values, x_vars)


def _tiebreak_dp(iv: _Interval, k: int, mask: np.ndarray) -> list[int]:
    """Max total coherence over exactly-K paths on the masked subgraph;
    ties go to the lexicographically smallest id sequence."""
    sel = np.flatnonzero(mask)
    eu, ev, w = iv.eu[sel], iv.ev[sel], iv.coh[sel]
    m = iv.m
    neg = -math.inf
    fwd = np.full((k + 1, m), neg)
    fwd[1, 0] = 0.0
    for length in range(2, k + 1):
        vals = fwd[length - 1][eu] + w
        np.maximum.at(fwd[length], ev, vals)
    total = fwd[k, m - 1]
    if total == neg:
        raise NarrexError("internal error: tie-break DP found no path at the optimum")
    bwd = np.full((k + 1, m), neg)
    bwd[1, m - 1] = 0.0
    for length in range(2, k + 1):
        vals = w + bwd[length - 1][ev]
        np.maximum.at(bwd[length], eu, vals)

    out_of: dict[int, list[tuple[str, int, float]]] = {}
    for j in range(len(sel)):
        out_of.setdefault(int(eu[j]), []).append((iv.id_of(int(ev[j])), int(ev[j]), float(w[j])))
    route = [0]
    used = 1
    acc = 0.0
    while route[-1] != m - 1:
        u = route[-1]
        chosen = None
        for _vid, v, weight in sorted(out_of.get(u, [])):
            rem = k - used  # nodes still to place, v included
            if rem < 1 or bwd[rem, v] == neg:
                continue
            if abs(acc + weight + bwd[rem, v] - total) <= _DP_TOL:
                chosen = (v, weight)
                break
        if chosen is None:
            # float drift fallback: best-scoring continuation
            best_val, best = neg, None
            for _vid, v, weight in sorted(out_of.get(u, [])):
                rem = k - used
                if rem >= 1 and bwd[rem, v] != neg and acc + weight + bwd[rem, v] > best_val:
                    best_val, best = acc + weight + bwd[rem, v], (v, weight)
            if best is None:
                raise NarrexError("internal error: tie-break walk lost the optimal path")
            chosen = best
        route.append(chosen[0])
        acc += chosen[1]
        used += 1
    return route


def extract_map(g: CoherenceGraph, corpus: CorpusManifest, params: ExtractionParams,
                time_limit: float = 60.0) -> NarrativeMap:
    """Solve the weakest-link path problem and decode the storyline.

    Raises :class:`InfeasibleExtractionError` with a structured report when
    no exact-K path exists or coverage cannot be met, and re-checks every
    map invariant on the decoded solution before returning it.
    """
    budget = _Budget(time_limit)
    iv = _Interval(g, corpus, params)
    k = params.K
    if k > iv.m:
        raise InfeasibleExtractionError({
            "failed_families": ["path-length"],
            "reason": f"K={k} exceeds the {iv.m}-node interval between "
                      f"{params.source_id!r} and {params.target_id!r}",
            "max_path_length": iv.max_path_length(),
        })
    if not iv.exact_k_reachable(k):
        raise InfeasibleExtractionError({
            "failed_families": ["path-length"],
            "reason": f"no path of exactly {k} nodes from {params.source_id!r} "
                      f"to {params.target_id!r}",
            "max_path_length": iv.max_path_length(),
        })
    req = required_coverage(corpus, params.mincover)
    interval_cats = sorted(set(iv.cats))
    if req > min(k, len(interval_cats)):
        raise InfeasibleExtractionError({
            "failed_families": ["coverage"],
            "reason": f"required coverage {req} exceeds what a {k}-node path over this "
                      f"interval can reach (categories available: {len(interval_cats)})",
            "required_coverage": req,
            "coverage_upper_bound": interval_cats,
        })

    # phase 1: exact bottleneck via binary search on distinct coherences.
    # feasibility is monotone: lowering the threshold only adds edges.
    thresholds = np.unique(iv.coh)
    covering_route: list[int] | None = None
    incumbent: list[str] | None = None
    milp_solves = 0

    def feasible(tau_idx: int) -> bool:
        nonlocal covering_route, milp_solves
        mask = iv.coh >= thresholds[tau_idx]
        if not iv.exact_k_reachable(k, mask):
            return False
        if req <= 1:
            # every node carries a category, so any path covers at least one
            return True
        milp_solves += 1
        route = _coverage_feasible(iv, k, req, mask, budget)
        if route is None:
            return False
        covering_route = route
        return True

    try:
        if not feasible(0):
            raise InfeasibleExtractionError({
                "failed_families": ["coverage"],
                "reason": f"no {k}-node path touches {req} distinct clusters",
                "required_coverage": req,
                "coverage_upper_bound": interval_cats,
            })
        if covering_route is not None:
            incumbent = [iv.id_of(v) for v in covering_route]
        lo, hi = 0, len(thresholds) - 1  # invariant: lo feasible, above hi not
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if feasible(mid):
                lo = mid
                if covering_route is not None:
                    incumbent = [iv.id_of(v) for v in covering_route]
            else:
                hi = mid - 1
        mu_star = float(thresholds[lo])
        mask = iv.coh >= mu_star

        # phase 2: maximum total coherence among bottleneck-optimal paths
        if req <= 1:
            route = _tiebreak_dp(iv, k, mask)
            optimal = True
        else:
            problem, x_vars, sel = _build_path_problem(iv, k, req, mask, objective_coh=True)
            result = solve_milp(problem, time_limit=budget.remaining())
            route = _decode_route(iv, sel, result.values, x_vars)
            optimal = result.optimal
            milp_solves += 1
    except SolverTimeoutError as exc:
        raise SolverTimeoutError(
            f"extraction exceeded {time_limit:.1f}s", incumbent=incumbent) from exc

    route_ids = [iv.id_of(v) for v in route]
    edge_idx = {(int(iv.eu[i]), int(iv.ev[i])): i for i in range(iv.n_edges)}
    route_edges = []
    coherences = []
    for a, b in zip(route, route[1:]):
        i = edge_idx[(a, b)]
        route_edges.append((iv.id_of(a), iv.id_of(b),
                            float(iv.coh[i]), float(iv.raw[i]), float(iv.topic[i])))
        coherences.append(float(iv.coh[i]))
    achieved = min(coherences)
    if achieved != mu_star:
        raise NarrexError("internal error: decoded route does not attain the bottleneck optimum")
    covered = sorted({iv.cats[v] for v in route})
    stats = SolverStats(
        wall_time_s=time.perf_counter() - budget.started,
        num_nodes=iv.m,
        num_edges=iv.n_edges,
        num_binaries=iv.n_edges + iv.m,
        optimal=optimal,
        status=f"optimal ({milp_solves} milp solves)" if optimal else "incumbent",
    )
    narrative = NarrativeMap(
        params=params,
        nodes=route_ids,
        edges=route_edges,
        main_route=route_ids,
        mu_star=mu_star,
        covered_clusters=covered,
        solver_stats=stats,
    )
    _validate_map(narrative, iv, req)
    return narrative


def _validate_map(narrative: NarrativeMap, iv: _Interval, req: int) -> None:
    """Solver-independent re-check of every map invariant."""
    route = narrative.main_route
    params = narrative.params
    if route[0] != params.source_id or route[-1] != params.target_id:
        raise NarrexError("internal error: route endpoints do not match the request")
    if len(route) != params.K:
        raise NarrexError(f"internal error: route has {len(route)} nodes, expected K={params.K}")
    if len(set(route)) != len(route):
        raise NarrexError("internal error: route revisits a node")
    positions = [iv.g.pos(iv.corpus.row_of(rid)) for rid in route]
    if any(b <= a for a, b in zip(positions, positions[1:])):
        raise NarrexError("internal error: route is not strictly forward in temporal order")
    edge_lookup = {(int(iv.eu[i]) + iv.s_pos, int(iv.ev[i]) + iv.s_pos): float(iv.coh[i])
                   for i in range(iv.n_edges)}
    coherences = []
    for a, b in zip(positions, positions[1:]):
        if (a, b) not in edge_lookup:
            raise NarrexError("internal error: consecutive route pair is not a graph edge")
        coherences.append(edge_lookup[(a, b)])
    if min(coherences) != narrative.mu_star:
        raise NarrexError("internal error: mu_star does not equal the route's weakest edge")
    if len(narrative.covered_clusters) < req:
        raise NarrexError("internal error: returned map violates the coverage constraint")


def extract_main_route(map_or_edges, source_id: str | None = None,
                       target_id: str | None = None) -> list[str]:
    """Most-likely path: maximize the sum of log coherences (the product of
    coherences) from source to target over a map graph.

    Accepts a :class:`NarrativeMap` (endpoints implied) or an iterable of
    ``(u, v, coherence)`` tuples plus explicit endpoints.  Ties are resolved
    toward the lexicographically smallest path.
    """
    if isinstance(map_or_edges, NarrativeMap):
        edges3 = [(u, v, coh) for u, v, coh, *_ in map_or_edges.edges]
        source_id = map_or_edges.params.source_id
        target_id = map_or_edges.params.target_id
    else:
        edges3 = [(u, v, coh) for u, v, coh, *_ in map_or_edges]
        if source_id is None or target_id is None:
            raise NarrexError("edge-list form needs explicit source and target ids")

    out: dict[str, list[tuple[str, float]]] = {}
    nodes = {source_id, target_id}
    for u, v, coh in edges3:
        out.setdefault(u, []).append((v, coh))
        nodes.update((u, v))

    log_w = {
        (u, v): (-math.inf if coh <= 0.0 else math.log(coh))
        for u, v, coh in edges3
    }

    # nodes with any path to the target at all, regardless of coherence
    reaches = {target_id}
    changed = True
    while changed:
        changed = False
        for u, v, _ in edges3:
            if v in reaches and u not in reaches:
                reaches.add(u)
                changed = True
    if source_id not in reaches:
        raise NarrexError(f"no path from {source_id!r} to {target_id!r} in the map graph")

    # best log-product score from each node to the target, memoized (DAG input)
    best: dict[str, float] = {target_id: 0.0}

    def score(u: str) -> float:
        if u in best:
            return best[u]
        candidates = [
            log_w[(u, v)] + score(v) for v, _ in out.get(u, []) if v in reaches
        ]
        best[u] = max(candidates) if candidates else -math.inf
        return best[u]

    import sys
    if len(nodes) + 100 > sys.getrecursionlimit():
        sys.setrecursionlimit(len(nodes) + 1000)
    score(source_id)

    route = [source_id]
    current = source_id
    while current != target_id:
        nexts = sorted(v for v, _ in out.get(current, []) if v in reaches)
        chosen = nexts[0]
        for v in nexts:
            got = log_w[(current, v)] + score(v)
            want = score(current)
            if got == want or (want != -math.inf and abs(got - want) <= 1e-9):
                chosen = v
                break
        route.append(chosen)
        current = chosen
    return route
