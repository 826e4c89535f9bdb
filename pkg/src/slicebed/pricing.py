"""Static and utilization-dependent resource pricing.

In dynamic mode the marginal price of a link or node resource is inflated by
the M/M/1 congestion shape 1/(1-u), capped at a multiplier M, where u is the
current utilization. Prices are snapshotted once per request so that candidate
generation and model building see one consistent objective.
"""
from __future__ import annotations

from dataclasses import dataclass

from .model import PhysicalNetwork, ResidualState

STATIC = "static"
KLEINROCK = "kleinrock"


@dataclass(frozen=True)
class PricingPolicy:
    mode: str = STATIC
    cap: float = 100.0          # maximum multiplier M, > 1
    apply_to: str = "both"      # "links", "nodes" or "both"

    def __post_init__(self):
        if self.mode not in (STATIC, KLEINROCK):
            raise ValueError(f"unknown pricing mode '{self.mode}'")
        if self.mode == KLEINROCK and not self.cap > 1:
            raise ValueError("cap must be > 1")
        if self.apply_to not in ("links", "nodes", "both"):
            raise ValueError(f"invalid apply_to '{self.apply_to}'")

    @classmethod
    def from_config(cls, cfg: dict) -> "PricingPolicy":
        return cls(mode=cfg.get("mode", STATIC),
                   cap=float(cfg.get("cap", 100.0)),
                   apply_to=cfg.get("apply_to", "both"))


def congestion_multiplier(used: float, capacity: float, cap: float) -> float:
    """min(M, 1/(1-u)); continuous on [0, 1-1/M], saturating at M."""
    if capacity <= 0:
        return 1.0
    u = used / capacity
    if u >= 1.0 - 1.0 / cap:
        return cap
    return 1.0 / (1.0 - u)


def link_price(policy: PricingPolicy, net: PhysicalNetwork, eid: int,
               state: ResidualState) -> float:
    """Current price per unit bandwidth on link ``eid``."""
    base = net.links[eid].unit_price
    if policy.mode == STATIC or policy.apply_to == "nodes":
        return base
    link = net.links[eid]
    return base * congestion_multiplier(state.link_used(eid), link.capacity, policy.cap)


def node_price(policy: PricingPolicy, net: PhysicalNetwork, vid: int, r: int,
               state: ResidualState) -> float:
    """Current price per unit of resource ``r`` at node ``vid``."""
    node = net.nodes[vid]
    base = node.unit_price[r]
    if policy.mode == STATIC or policy.apply_to == "links":
        return base
    return base * congestion_multiplier(state.node_used(vid, r), node.capacity[r], policy.cap)


class PriceSnapshot:
    """Per-request freeze of all link and (node, resource) prices."""

    def __init__(self, policy: PricingPolicy, net: PhysicalNetwork, state: ResidualState):
        self.link: dict[int, float] = {
            eid: link_price(policy, net, eid, state) for eid in net.links
        }
        self.node: dict[tuple[int, int], float] = {}
        for vid, n in net.nodes.items():
            if not n.is_function_node:
                continue
            for r in range(net.num_resources):
                self.node[(vid, r)] = node_price(policy, net, vid, r, state)

    def placement_cost(self, net: PhysicalNetwork, vid: int, demand) -> float:
        """Cost of placing a VNF with the given demand vector at ``vid``."""
        return sum(self.node[(vid, r)] * amount
                   for r, amount in enumerate(demand) if amount)
