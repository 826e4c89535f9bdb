"""k-shortest path search versus exhaustive enumeration, and candidate pruning."""
import random

import pytest

from slicebed.expand import UnreachableEndpoints, build_expanded
from slicebed.model import (
    ResidualState,
    allowed_operators,
    load_request,
    load_scenario,
)
from slicebed.paths import (
    COST,
    LATENCY,
    CandidatePath,
    candidate_from_path,
    generate_candidates,
    k_shortest_paths,
    shortest_path,
)
from slicebed.pricing import PriceSnapshot, PricingPolicy

from oracles import dfs_all_expanded_paths, tiny_request, tiny_scenario


def _weight(path, attr):
    return sum(getattr(e, attr) for e in path)


def _keyseq(path):
    return tuple((e.kind, e.ref) for e in path)


def _nodeseq(exp, path):
    nodes = [exp.source]
    nodes.extend(e.dst for e in path)
    return tuple(nodes)


def _instances(seed, count):
    """Yield (exp, all_paths) for random tiny expanded networks."""
    rng = random.Random(seed)
    made = 0
    while made < count:
        scn = tiny_scenario(rng, max_nodes=5)
        req = tiny_request(rng, scn)
        if req is None:
            continue
        try:
            allowed = allowed_operators(req, scn.trust)
        except Exception:
            continue
        snap = PriceSnapshot(PricingPolicy(), scn.net, ResidualState(scn.net))
        for svc in req.services:
            try:
                exp = build_expanded(scn.net, svc, req, allowed, snap)
            except UnreachableEndpoints:
                continue
            paths = dfs_all_expanded_paths(exp)
            if len(paths) > 1200:
                continue
            yield exp, paths, req, snap, scn
            made += 1
            if made >= count:
                return


def test_yen_matches_exhaustive_enumeration():
    """All paths, sorted weights, looplessness, dedup — against DFS."""
    seen = 0
    for exp, all_paths, *_ in _instances(20240817, 120):
        total = len(all_paths)
        found = k_shortest_paths(exp, total + 5, COST)
        assert len(found) == total
        assert {_keyseq(p) for p in found} == {_keyseq(p) for p in all_paths}
        weights = [_weight(p, "cost") for p in found]
        # recomputing a sum in a different order can shift the last bit, so
        # allow dust when checking the nondecreasing ordering
        assert all(a <= b + 1e-9 for a, b in zip(weights, weights[1:]))
        for p in found:
            nodes = _nodeseq(exp, p)
            assert len(set(nodes)) == len(nodes), "loop in reported path"
        seen += 1
    assert seen == 120


def test_first_path_is_dijkstra_shortest():
    for exp, all_paths, *_ in _instances(99, 60):
        if not all_paths:
            assert shortest_path(exp) is None
            assert k_shortest_paths(exp, 1, COST) == []
            continue
        best = min(_weight(p, "cost") for p in all_paths)
        sp = shortest_path(exp)
        ks = k_shortest_paths(exp, 1, COST)
        assert sp is not None and len(ks) == 1
        assert _weight(sp, "cost") == pytest.approx(best)
        assert _keyseq(ks[0]) == _keyseq(sp)
        # among exactly-tied minimum paths, the node sequence is lexicographic
        tied = [p for p in all_paths if _weight(p, "cost") == _weight(sp, "cost")]
        if len(tied) >= 1:
            assert _nodeseq(exp, sp) <= min(_nodeseq(exp, p) for p in tied)


def test_prefix_property_and_determinism():
    """k' <= k gives exactly the first k' paths; reruns are identical."""
    for exp, all_paths, *_ in _instances(7, 40):
        total = len(all_paths)
        if total == 0:
            continue
        full = [_keyseq(p) for p in k_shortest_paths(exp, total, COST)]
        for k in (1, 2, total // 2 or 1):
            sub = [_keyseq(p) for p in k_shortest_paths(exp, k, COST)]
            assert sub == full[:min(k, total)]
        again = [_keyseq(p) for p in k_shortest_paths(exp, total, COST)]
        assert again == full


def test_latency_weight_mode():
    for exp, all_paths, *_ in _instances(5150, 40):
        if not all_paths:
            continue
        found = k_shortest_paths(exp, len(all_paths), LATENCY)
        lats = [_weight(p, "latency") for p in found]
        assert all(a <= b + 1e-9 for a, b in zip(lats, lats[1:]))
        assert lats[0] == pytest.approx(
            min(_weight(p, "latency") for p in all_paths))


def test_candidate_footprint_construction():
    for exp, all_paths, req, snap, scn in _instances(31337, 25):
        svc = exp.service
        for i, path in enumerate(all_paths[:20]):
            cand = candidate_from_path(exp, req, path, i)
            assert isinstance(cand, CandidatePath)
            assert cand.service_id == svc.id
            # footprint bandwidth counts each traversal of a link
            per_link = {}
            for rt in cand.routes:
                for eid in rt:
                    per_link[eid] = per_link.get(eid, 0.0) + svc.bandwidth
            assert dict(cand.link_units) == per_link
            total_node = sum(a for _, _, a in cand.node_units)
            expected = sum(sum(req.vnf_catalog[f].vnf.demand)
                           for f in svc.vnf_sequence)
            assert total_node == pytest.approx(expected)


def _demo_setup():
    scn = load_scenario("scenarios/demo_3op.json")
    req = load_request("scenarios/demo_request.json", scn)
    state = ResidualState(scn.net)
    snap = PriceSnapshot(PricingPolicy(), scn.net, state)
    return scn, req, state, snap


def test_generate_candidates_sorted_and_indexed():
    scn, req, state, snap = _demo_setup()
    cands = generate_candidates(scn.net, scn.trust, state, req, 8, snap)
    assert set(cands) == {s.id for s in req.services}
    for svc in req.services:
        lst = cands[svc.id]
        assert lst, "demo services should have candidates"
        costs = [c.cost for c in lst]
        assert costs == sorted(costs)
        assert [c.index for c in lst] == list(range(len(lst)))
        assert all(c.latency <= svc.max_latency + 1e-9 for c in lst)


def test_generate_candidates_latency_filter():
    scn, req, state, snap = _demo_setup()
    loose = generate_candidates(scn.net, scn.trust, state, req, 16, snap)
    # shrink every latency bound below the cheapest feasible path's latency
    from slicebed.model import request_from_dict, request_to_dict
    doc = request_to_dict(req)
    for s in doc["services"]:
        s["max_latency"] = 0.05
    tight_req = request_from_dict(doc, scn)
    tight = generate_candidates(scn.net, scn.trust, state, tight_req, 16, snap)
    for sid in loose:
        assert len(tight[sid]) == 0 or \
            max(c.latency for c in tight[sid]) <= 0.05 + 1e-9
    assert any(len(tight[sid]) < len(loose[sid]) for sid in loose)


def test_generate_candidates_capacity_prefilter():
    scn, req, state, snap = _demo_setup()
    base = generate_candidates(scn.net, scn.trust, state, req, 32, snap)
    # consume almost all bandwidth on one link the candidates rely on
    used_links = {eid for lst in base.values() for c in lst
                  for eid, _ in c.link_units}
    eid = sorted(used_links)[0]
    state.used_bw[eid] = scn.net.links[eid].capacity - 0.5
    pruned = generate_candidates(scn.net, scn.trust, state, req, 32, snap)
    for sid, lst in pruned.items():
        for c in lst:
            assert all(e != eid or amt <= 0.5 + 1e-9 for e, amt in c.link_units)
    assert sum(map(len, pruned.values())) < sum(map(len, base.values()))


def test_generate_candidates_unreachable_service_gets_empty_list():
    scn, req, state, snap = _demo_setup()
    from slicebed.model import request_from_dict, request_to_dict
    doc = request_to_dict(req)
    doc["allow_operators"] = []      # origin 1 trusts {1,2}: sinks 5/6 (op 3)
    narrowed = request_from_dict(doc, scn)
    cands = generate_candidates(scn.net, scn.trust, state, narrowed, 8, snap)
    assert all(lst == [] for lst in cands.values())


def test_generate_candidates_untrustable_raises():
    scn, req, state, snap = _demo_setup()
    from slicebed.model import request_from_dict, request_to_dict
    from slicebed.model import UntrustableRequest
    doc = request_to_dict(req)
    doc["deny_operators"] = [doc["origin_operator"]]
    doc["allow_operators"] = []
    bad = request_from_dict(doc, scn)
    with pytest.raises(UntrustableRequest):
        generate_candidates(scn.net, scn.trust, state, bad, 8, snap)
