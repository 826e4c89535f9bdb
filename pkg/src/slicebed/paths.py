"""Candidate path generation on the expanded network.

Dijkstra and Yen-style k-shortest loopless search, then latency pruning and
a standalone residual-capacity prefilter. Ties between equal-weight paths are
broken lexicographically on the node sequence, so candidate sets are
reproducible and nested as k grows.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

from .model import (PhysicalNetwork, ResidualState, SliceRequest, TrustRelation,
                    allowed_operators)
from .expand import ExpandedNetwork, ExpEdge, UnreachableEndpoints, build_expanded
from .pricing import PriceSnapshot

COST = "cost"
LATENCY = "latency"


@dataclass(frozen=True)
class CandidatePath:
    """Pre-validated allocation option for one service: placement, route and
    the exact resource footprint it would reserve."""
    service_id: int
    index: int
    placement: dict[int, int]
    routes: tuple[tuple[int, ...], ...]
    cost: float
    latency: float
    link_units: tuple[tuple[int, float], ...]          # (link id, bandwidth)
    node_units: tuple[tuple[int, int, float], ...]     # (node id, resource, amount)


def _edge_weight(edge: ExpEdge, weight: str) -> float:
    return edge.cost if weight == COST else edge.latency


def shortest_path(exp: ExpandedNetwork, weight: str = COST):
    """Minimum-weight source-to-target path, or None if disconnected.

    Among equal-weight paths, returns the one with the lexicographically
    smallest node sequence.
    """
    return _dijkstra(exp, exp.source, banned_nodes=frozenset(),
                     banned_edges=frozenset(), weight=weight)


def _dijkstra(exp, start, banned_nodes, banned_edges, weight):
    # Heap entries: (dist, node sequence, edge key sequence, edge sequence).
    # The key sequence keeps ties orderable when parallel edges join the
    # same node pair (ExpEdge itself has no ordering).
    if start in banned_nodes:
        return None
    target = exp.target
    heap = [(0.0, (start,), (), ())]
    done = set()
    while heap:
        dist, nodes, keys, edges = heapq.heappop(heap)
        node = nodes[-1]
        if node in done:
            continue
        done.add(node)
        if node == target:
            return list(edges)
        for e in exp.out_edges(node):
            if e.dst in done or e.dst in banned_nodes:
                continue
            if (e.src, e.dst, e.kind, e.ref) in banned_edges:
                continue
            heapq.heappush(heap, (dist + _edge_weight(e, weight),
                                  nodes + (e.dst,), keys + ((e.kind, e.ref),),
                                  edges + (e,)))
    return None


def _path_nodes(exp, path):
    nodes = [exp.source]
    for e in path:
        nodes.append(e.dst)
    return tuple(nodes)


def k_shortest_paths(exp: ExpandedNetwork, k: int, weight: str = COST):
    """Up to k minimum-weight loopless paths in nondecreasing weight.

    Yen's deviation search. Deterministic: candidate ordering is
    (weight, node sequence).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    first = shortest_path(exp, weight)
    if first is None:
        return []

    def keys_of(path):
        return tuple((e.kind, e.ref) for e in path)

    found = [first]
    found_keys = [keys_of(first)]
    pool: list = []        # (weight, node seq, edge key seq, edge list)
    seen = {found_keys[0]}

    while len(found) < k:
        prev = found[-1]
        prev_nodes = _path_nodes(exp, prev)
        prev_keys = found_keys[-1]
        for i in range(len(prev)):
            spur_node = prev_nodes[i]
            root = prev[:i]
            root_keys = prev_keys[:i]
            root_weight = sum(_edge_weight(e, weight) for e in root)

            banned_edges = set()
            for p, pk in zip(found, found_keys):
                if pk[:i] == root_keys and len(p) > i:
                    e = p[i]
                    banned_edges.add((e.src, e.dst, e.kind, e.ref))
            banned_nodes = frozenset(prev_nodes[:i])

            spur = _dijkstra(exp, spur_node, banned_nodes,
                             frozenset(banned_edges), weight)
            if spur is None:
                continue
            total = list(root) + spur
            total_keys = keys_of(total)
            if total_keys in seen:
                continue
            seen.add(total_keys)
            w = root_weight + sum(_edge_weight(e, weight) for e in spur)
            heapq.heappush(pool, (w, _path_nodes(exp, total), total_keys, total))
        if not pool:
            break
        _, _, keys, path = heapq.heappop(pool)
        found.append(path)
        found_keys.append(keys)
    return found


def candidate_from_path(exp: ExpandedNetwork, slc: SliceRequest, path,
                        index: int) -> CandidatePath:
    from .expand import map_back

    placement, routes, cost, latency = map_back(exp, path)
    svc = exp.service
    link_units: dict[int, float] = {}
    for route in routes:
        for eid in route:
            link_units[eid] = link_units.get(eid, 0.0) + svc.bandwidth
    node_units: dict[tuple[int, int], float] = {}
    for pos, vid in placement.items():
        demand = slc.vnf_catalog[svc.vnf_sequence[pos]].vnf.demand
        for r, amount in enumerate(demand):
            if amount:
                node_units[(vid, r)] = node_units.get((vid, r), 0.0) + amount
    return CandidatePath(
        service_id=svc.id,
        index=index,
        placement=placement,
        routes=routes,
        cost=cost,
        latency=latency,
        link_units=tuple(sorted(link_units.items())),
        node_units=tuple((v, r, a) for (v, r), a in sorted(node_units.items())),
    )


def _fits_standalone(cand: CandidatePath, state: ResidualState) -> bool:
    eps = 1e-9
    for eid, amount in cand.link_units:
        if amount > state.link_residual(eid) + eps:
            return False
    for vid, r, amount in cand.node_units:
        if amount > state.node_residual(vid, r) + eps:
            return False
    return True


def generate_candidates(net: PhysicalNetwork, trust: TrustRelation,
                        state: ResidualState, slc: SliceRequest, k: int,
                        prices: PriceSnapshot) -> dict[int, list[CandidatePath]]:
    """Per-service candidate lists, cheapest first.

    Generation runs the k-shortest search by cost on each service's expanded
    network, then drops paths violating the latency bound and paths whose
    standalone footprint no longer fits the residual capacities. An empty
    list for any service means the request cannot be served from candidates.

    Raises UntrustableRequest when the trust specification leaves no
    operator at all.
    """
    allowed = allowed_operators(slc, trust)
    out: dict[int, list[CandidatePath]] = {}
    eps = 1e-9
    for svc in slc.services:
        try:
            exp = build_expanded(net, svc, slc, allowed, prices)
        except UnreachableEndpoints:
            out[svc.id] = []
            continue
        kept = []
        for path in k_shortest_paths(exp, k, COST):
            cand = candidate_from_path(exp, slc, path, len(kept))
            if cand.latency > svc.max_latency + eps:
                continue
            if not _fits_standalone(cand, state):
                continue
            kept.append(cand)
        out[svc.id] = kept
    return out
