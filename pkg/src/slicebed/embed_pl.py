"""Path-Link ILP: fast per-request embedding over pre-generated candidates.

One binary z[g,p] per candidate path p of service g. Latency and trust were
already enforced during candidate generation, so the program only couples the
services through shared link and node capacities:

  P1  exactly one candidate per service
  P2  link capacity over candidate footprints
  P3  node resources over candidate footprints

Candidate lists are cost-ordered, so k'=1 degenerates to "cheapest path per
service if jointly feasible".
"""
from __future__ import annotations

from dataclasses import dataclass

from .milp import BINARY, IlpModel, MilpError, branch_and_bound
from .model import (Blocked, Embedding, PhysicalNetwork, ResidualState,
                    ServiceEmbedding, SliceRequest, TrustRelation)
from .paths import CandidatePath, generate_candidates
from .pricing import PriceSnapshot


@dataclass
class PlMeta:
    # var index -> (service_id, candidate)
    choices: dict[int, tuple[int, CandidatePath]]


def build_pl(candidates: dict[int, list[CandidatePath]], state: ResidualState,
             slc: SliceRequest):
    """Build the Path-Link model. Returns (IlpModel, PlMeta) or Blocked."""
    for svc in slc.services:
        if not candidates.get(svc.id):
            return Blocked("no_candidate_path", f"service {svc.id}")

    model = IlpModel()
    meta = PlMeta(choices={})
    link_rows: dict[int, dict[int, float]] = {}
    node_rows: dict[tuple[int, int], dict[int, float]] = {}
    for svc in slc.services:
        group = []
        for cand in candidates[svc.id]:
            var = model.add_variable(f"z_{svc.id}_{cand.index}", BINARY,
                                     obj=cand.cost)
            meta.choices[var] = (svc.id, cand)
            group.append(var)
            for eid, amount in cand.link_units:
                link_rows.setdefault(eid, {})[var] = amount
            for vid, r, amount in cand.node_units:
                node_rows.setdefault((vid, r), {})[var] = amount
        model.add_constraint({v: 1.0 for v in group}, "=", 1.0,
                             name=f"P1_{svc.id}")

    for eid in sorted(link_rows):
        model.add_constraint(link_rows[eid], "<=",
                             max(0.0, state.link_residual(eid)),
                             name=f"P2_{eid}")
    for (vid, r) in sorted(node_rows):
        model.add_constraint(node_rows[(vid, r)], "<=",
                             max(0.0, state.node_residual(vid, r)),
                             name=f"P3_{vid}_{r}")
    return model, meta


def decode_pl(slc: SliceRequest, meta: PlMeta, assignment,
              optimal: bool) -> Embedding:
    chosen: dict[int, CandidatePath] = {}
    for var, (sid, cand) in meta.choices.items():
        if assignment[var] > 0.5:
            chosen[sid] = cand
    services = []
    total = 0.0
    for svc in slc.services:
        cand = chosen[svc.id]
        services.append(ServiceEmbedding(svc.id, dict(cand.placement),
                                         cand.routes, cand.latency, cand.cost))
        total += cand.cost
    return Embedding(slc.id, tuple(services), total, optimal=optimal)


def solve_pl_detailed(net: PhysicalNetwork, trust: TrustRelation,
                      state: ResidualState, slc: SliceRequest,
                      prices: PriceSnapshot, k: int, *,
                      time_limit_ms: float | None = None,
                      candidates: dict[int, list[CandidatePath]] | None = None):
    """Like solve_pl but also returns the raw IlpSolution (or None).

    Pass ``candidates`` to reuse a previously generated set (the per-request
    snapshot must match).
    """
    from .model import UntrustableRequest

    if candidates is None:
        try:
            candidates = generate_candidates(net, trust, state, slc, k, prices)
        except UntrustableRequest as exc:
            return Blocked("untrustable_request", str(exc)), None
    built = build_pl(candidates, state, slc)
    if isinstance(built, Blocked):
        return built, None
    model, meta = built
    sol = branch_and_bound(model, time_limit_ms=time_limit_ms)
    if sol.status == "unbounded":
        raise MilpError("path choice model unbounded; costs must be nonnegative")
    if sol.status == "infeasible":
        return Blocked("infeasible"), sol
    if sol.assignment is None:
        return Blocked("time_limit_no_incumbent"), sol
    return decode_pl(slc, meta, sol.assignment, sol.status == "optimal"), sol


def solve_pl(net: PhysicalNetwork, trust: TrustRelation, state: ResidualState,
             slc: SliceRequest, prices: PriceSnapshot, k: int, *,
             time_limit_ms: float | None = None):
    """Embed one request from k-shortest candidates. Embedding or Blocked."""
    result, _ = solve_pl_detailed(net, trust, state, slc, prices, k,
                                  time_limit_ms=time_limit_ms)
    return result
