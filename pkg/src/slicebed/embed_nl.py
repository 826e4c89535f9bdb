"""Node-Link ILP: exact per-request embedding over the physical network.

Builds one integer program per slice request with placement binaries x[f,v]
and per-hop routing binaries y[g,h,e], solves it with branch-and-bound, and
decodes the assignment back into placements and physical routes. This is the
benchmark engine; the path-based engine in embed_pl trades optimality for
speed.

Constraints, per service g with chain f_1..f_m (hops h = 0..m run
source -> f_1 -> ... -> f_m -> sink):

  C1  each chain position picks exactly one deployment node
  C2  per-hop flow conservation, hop endpoints tied to the x variables
  C3  link capacity against current residuals
  C4  node resources against current residuals
  C5  end-to-end latency: link delays plus fixed processing delays

Operators outside the slice's trusted set are filtered out before any
variable is created, so the model never sees disallowed nodes or links.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .milp import BINARY, IlpModel, IlpSolution, MilpError, branch_and_bound
from .model import (Blocked, Embedding, PhysicalNetwork, ResidualState,
                    ServiceEmbedding, SliceRequest, TrustRelation,
                    allowed_operators)
from .pricing import PriceSnapshot

_EPS = 1e-9


@dataclass
class NlMeta:
    """Decode metadata: variable ids by role."""
    allowed_nodes: frozenset[int]
    shared: bool
    # default mode: (service_id, position) -> {node: var};
    # shared mode:  vnf_id -> {node: var}
    x_groups: dict = field(default_factory=dict)
    # (service_id, hop, link_id) -> var
    y_vars: dict = field(default_factory=dict)


def _placement_key(svc_id: int, pos: int, fid: int, shared: bool):
    return fid if shared else (svc_id, pos)


def build_nl(net: PhysicalNetwork, trust: TrustRelation, state: ResidualState,
             slc: SliceRequest, prices: PriceSnapshot,
             shared_vnf_per_slice: bool = False):
    """Build the Node-Link model for one request.

    Returns (IlpModel, NlMeta), or Blocked when trust filtering leaves no
    admissible placement or endpoint before any solving is needed.
    Raises UntrustableRequest if the trusted operator set is empty.
    """
    allowed_ops = allowed_operators(slc, trust)
    allowed_nodes = frozenset(v for v, n in net.nodes.items()
                              if n.operator_id in allowed_ops)
    for svc in slc.services:
        if svc.source not in allowed_nodes or svc.sink not in allowed_nodes:
            return Blocked("unreachable_endpoints",
                           f"service {svc.id}: endpoint operator not trusted")

    model = IlpModel()
    meta = NlMeta(allowed_nodes=allowed_nodes, shared=shared_vnf_per_slice)

    # --- placement variables (C1 groups) ------------------------------------
    def placement_sites(fid):
        slot = slc.vnf_catalog[fid]
        trusted = [v for v in sorted(slot.deploy_nodes) if v in allowed_nodes]
        if not trusted:
            return None, None
        demand = slot.vnf.demand
        fitting = [v for v in trusted
                   if all(amount <= state.node_residual(v, r) + _EPS
                          for r, amount in enumerate(demand) if amount)]
        return trusted, fitting

    seen_groups = set()
    for svc in slc.services:
        for pos, fid in enumerate(svc.vnf_sequence):
            key = _placement_key(svc.id, pos, fid, shared_vnf_per_slice)
            if key in seen_groups:
                continue
            seen_groups.add(key)
            trusted, fitting = placement_sites(fid)
            if trusted is None:
                return Blocked("no_placement_nodes",
                               f"vnf {fid}: no trusted deployment node")
            if not fitting:
                return Blocked("infeasible",
                               f"vnf {fid}: no deployment node with residual capacity")
            group = {}
            demand = slc.vnf_catalog[fid].vnf.demand
            for v in fitting:
                cost = prices.placement_cost(net, v, demand)
                group[v] = model.add_variable(f"x_{key}_{v}", BINARY, obj=cost)
            meta.x_groups[key] = group
            model.add_constraint({var: 1.0 for var in group.values()}, "=", 1.0,
                                 name=f"C1_{key}")

    # --- routing variables --------------------------------------------------
    allowed_links = [eid for eid in sorted(net.links)
                     if net.links[eid].src in allowed_nodes
                     and net.links[eid].dst in allowed_nodes]
    for svc in slc.services:
        hops = len(svc.vnf_sequence) + 1
        for h in range(hops):
            for eid in allowed_links:
                if svc.bandwidth > state.link_residual(eid) + _EPS:
                    continue        # this service can never fit on the link
                cost = prices.link[eid] * svc.bandwidth
                meta.y_vars[(svc.id, h, eid)] = model.add_variable(
                    f"y_{svc.id}_{h}_{eid}", BINARY, obj=cost)

    # --- C2: flow conservation per (service, hop, node) ---------------------
    out_by_node = {v: [] for v in allowed_nodes}
    in_by_node = {v: [] for v in allowed_nodes}
    for eid in allowed_links:
        link = net.links[eid]
        out_by_node[link.src].append(eid)
        in_by_node[link.dst].append(eid)

    for svc in slc.services:
        m = len(svc.vnf_sequence)
        for h in range(m + 1):
            for v in sorted(allowed_nodes):
                coeffs: dict[int, float] = {}
                for eid in out_by_node[v]:
                    var = meta.y_vars.get((svc.id, h, eid))
                    if var is not None:
                        coeffs[var] = coeffs.get(var, 0.0) + 1.0
                for eid in in_by_node[v]:
                    var = meta.y_vars.get((svc.id, h, eid))
                    if var is not None:
                        coeffs[var] = coeffs.get(var, 0.0) - 1.0
                rhs = 0.0
                if h == 0:
                    if v == svc.source:
                        rhs += 1.0
                else:
                    fid = svc.vnf_sequence[h - 1]
                    key = _placement_key(svc.id, h - 1, fid, shared_vnf_per_slice)
                    var = meta.x_groups[key].get(v)
                    if var is not None:
                        coeffs[var] = coeffs.get(var, 0.0) - 1.0
                if h == m:
                    if v == svc.sink:
                        rhs -= 1.0
                else:
                    fid = svc.vnf_sequence[h]
                    key = _placement_key(svc.id, h, fid, shared_vnf_per_slice)
                    var = meta.x_groups[key].get(v)
                    if var is not None:
                        coeffs[var] = coeffs.get(var, 0.0) + 1.0
                coeffs = {k: c for k, c in coeffs.items() if c != 0.0}
                if coeffs or rhs != 0.0:
                    model.add_constraint(coeffs, "=", rhs,
                                         name=f"C2_{svc.id}_{h}_{v}")

    # --- C3: link capacity --------------------------------------------------
    for eid in allowed_links:
        coeffs = {}
        for svc in slc.services:
            for h in range(len(svc.vnf_sequence) + 1):
                var = meta.y_vars.get((svc.id, h, eid))
                if var is not None:
                    coeffs[var] = svc.bandwidth
        if coeffs:
            model.add_constraint(coeffs, "<=", max(0.0, state.link_residual(eid)),
                                 name=f"C3_{eid}")

    # --- C4: node resources -------------------------------------------------
    usage: dict[tuple[int, int], dict[int, float]] = {}
    for key, group in meta.x_groups.items():
        # key is the vnf id directly (shared) or (service_id, position)
        if shared_vnf_per_slice:
            demand = slc.vnf_catalog[key].vnf.demand
        else:
            svc = next(s for s in slc.services if s.id == key[0])
            demand = slc.vnf_catalog[svc.vnf_sequence[key[1]]].vnf.demand
        for v, var in group.items():
            for r, amount in enumerate(demand):
                if amount:
                    row = usage.setdefault((v, r), {})
                    row[var] = row.get(var, 0.0) + amount
    for (v, r) in sorted(usage):
        model.add_constraint(usage[(v, r)], "<=",
                             max(0.0, state.node_residual(v, r)),
                             name=f"C4_{v}_{r}")

    # --- C5: latency budget -------------------------------------------------
    for svc in slc.services:
        fixed = sum(slc.vnf_catalog[f].vnf.proc_delay for f in svc.vnf_sequence)
        coeffs = {}
        for h in range(len(svc.vnf_sequence) + 1):
            for eid in allowed_links:
                var = meta.y_vars.get((svc.id, h, eid))
                if var is not None:
                    coeffs[var] = net.links[eid].prop_delay
        model.add_constraint(coeffs, "<=", svc.max_latency - fixed,
                             name=f"C5_{svc.id}")

    return model, meta


def _trace_route(net, chosen: list[int], origin: int, dest: int) -> tuple[int, ...]:
    """Simple path from origin to dest inside the chosen link set.

    Flow conservation guarantees such a path exists; any leftover circulation
    in the assignment is dropped. Deterministic: neighbors tried in link-id
    order.
    """
    if origin == dest:
        return ()
    adj: dict[int, list[int]] = {}
    for eid in sorted(chosen):
        adj.setdefault(net.links[eid].src, []).append(eid)
    stack = [(origin, iter(adj.get(origin, ())))]
    on_path = {origin}
    edges: list[int] = []
    while stack:
        node, it = stack[-1]
        advanced = False
        for eid in it:
            nxt = net.links[eid].dst
            if nxt in on_path:
                continue
            edges.append(eid)
            if nxt == dest:
                return tuple(edges)
            on_path.add(nxt)
            stack.append((nxt, iter(adj.get(nxt, ()))))
            advanced = True
            break
        if not advanced:
            stack.pop()
            if edges:
                edges.pop()
            if stack:
                on_path.discard(node)
    raise MilpError(f"no route from {origin} to {dest} in solver assignment")


def decode_nl(net: PhysicalNetwork, slc: SliceRequest, prices: PriceSnapshot,
              meta: NlMeta, sol: IlpSolution) -> Embedding:
    """Turn a solver assignment into an Embedding with recomputed costs.

    Costs and latencies are recomputed from the decoded placement/routes, so
    any cost-neutral circulation present in the raw assignment is excluded.
    """
    assignment = sol.assignment
    services = []
    total = 0.0
    seen_fv = set()     # (fid, node) pairs already charged in shared mode
    for svc in slc.services:
        m = len(svc.vnf_sequence)
        placement = {}
        for pos in range(m):
            fid = svc.vnf_sequence[pos]
            key = _placement_key(svc.id, pos, fid, meta.shared)
            node = None
            for v, var in sorted(meta.x_groups[key].items()):
                if assignment[var] > 0.5:
                    node = v
                    break
            if node is None:
                raise MilpError(f"no placement chosen for vnf {fid}")
            placement[pos] = node
        anchors = [svc.source] + [placement[i] for i in range(m)] + [svc.sink]
        routes = []
        for h in range(m + 1):
            chosen = [eid for (sid, hh, eid), var in meta.y_vars.items()
                      if sid == svc.id and hh == h and assignment[var] > 0.5]
            routes.append(_trace_route(net, chosen, anchors[h], anchors[h + 1]))
        latency = sum(net.links[eid].prop_delay for rt in routes for eid in rt)
        latency += sum(slc.vnf_catalog[f].vnf.proc_delay for f in svc.vnf_sequence)
        cost = sum(prices.link[eid] * svc.bandwidth for rt in routes for eid in rt)
        for pos, v in placement.items():
            fid = svc.vnf_sequence[pos]
            if meta.shared:
                # shared placements are charged once per (vnf, node) pair,
                # attributed to the first service that uses them
                if (fid, v) in seen_fv:
                    continue
                seen_fv.add((fid, v))
            cost += prices.placement_cost(net, v, slc.vnf_catalog[fid].vnf.demand)
        services.append(ServiceEmbedding(svc.id, placement, tuple(routes),
                                         latency, cost))
        total += cost
    return Embedding(slc.id, tuple(services), total,
                     optimal=sol.status == "optimal")


def solve_nl_detailed(net: PhysicalNetwork, trust: TrustRelation,
                      state: ResidualState, slc: SliceRequest,
                      prices: PriceSnapshot, *, time_limit_ms: float | None = None,
                      shared_vnf_per_slice: bool = False):
    """Like solve_nl but also returns the raw IlpSolution (or None)."""
    from .model import UntrustableRequest

    try:
        built = build_nl(net, trust, state, slc, prices, shared_vnf_per_slice)
    except UntrustableRequest as exc:
        return Blocked("untrustable_request", str(exc)), None
    if isinstance(built, Blocked):
        return built, None
    model, meta = built
    sol = branch_and_bound(model, time_limit_ms=time_limit_ms)
    if sol.status == "unbounded":
        raise MilpError("embedding model unbounded; prices must be nonnegative")
    if sol.status == "infeasible":
        return Blocked("infeasible"), sol
    if sol.assignment is None:
        return Blocked("time_limit_no_incumbent"), sol
    return decode_nl(net, slc, prices, meta, sol), sol


def solve_nl(net: PhysicalNetwork, trust: TrustRelation, state: ResidualState,
             slc: SliceRequest, prices: PriceSnapshot, *,
             time_limit_ms: float | None = None,
             shared_vnf_per_slice: bool = False):
    """Solve one request exactly. Returns Embedding or Blocked."""
    result, _ = solve_nl_detailed(net, trust, state, slc, prices,
                                  time_limit_ms=time_limit_ms,
                                  shared_vnf_per_slice=shared_vnf_per_slice)
    return result
