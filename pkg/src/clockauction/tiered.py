"""Extended auction with three deployment tiers per product.

Every product is offered at Low, Medium and High deployment levels sharing
one supply.  Overdemand is hierarchical (a tier counts demand at itself plus
all stricter tiers), so higher commitments see less frequent price increases.
Bidder utility subtracts a lump-sum deployment cost once per (area, tier)
engaged.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .core import (Bundle, IncrementSchedule, PriceVector, ProductCatalog,
                   clock_price, posted_price)
from .errors import ValidationError
from .engine import AuctionConfig, BidderAgent
from .estimation import ValuationModel
from .ingest import BundleBase
from .solver import EQ, LE, LinearProgram, MixedIntegerProgram, solve_mip

TIERS = ("low", "medium", "high")
TIER_RANK = {t: i for i, t in enumerate(TIERS)}


@dataclass(frozen=True)
class TieredValuationAdjustment:
    """Lump-sum deployment cost per (bidder, area, tier), in cents."""
    costs: dict[tuple[str, str, str], int]

    def __post_init__(self):
        object.__setattr__(self, "costs", dict(self.costs))
        grouped: dict[tuple[str, str], dict[str, int]] = {}
        for (bidder, area, tier), cost in self.costs.items():
            if tier not in TIER_RANK:
                raise ValidationError(f"unknown tier {tier!r}")
            if cost < 0:
                raise ValidationError("negative deployment cost")
            grouped.setdefault((bidder, area), {})[tier] = cost
        for key, per_tier in grouped.items():
            ordered = [per_tier.get(t, 0) for t in TIERS]
            if ordered != sorted(ordered):
                raise ValidationError(f"costs not monotone in tier for {key}")

    def cost(self, bidder: str, area: str, tier: str) -> int:
        try:
            return self.costs[(bidder, area, tier)]
        except KeyError:
            raise ValidationError(
                f"no deployment cost for ({bidder}, {area}, {tier})") from None

    @staticmethod
    def zero(bidders, areas) -> "TieredValuationAdjustment":
        return TieredValuationAdjustment(
            {(b, a, t): 0 for b in bidders for a in areas for t in TIERS})


def tier_overdemand(demands: dict[str, int], supply: int) -> dict[str, bool]:
    """Hierarchical overdemand: a tier is overdemanded when demand at itself
    plus all stricter tiers exceeds the shared supply."""
    for t, d in demands.items():
        if d < 0:
            raise ValidationError(f"negative demand at tier {t!r}")
    d_low = demands.get("low", 0)
    d_med = demands.get("medium", 0)
    d_high = demands.get("high", 0)
    return {
        "high": d_high > supply,
        "medium": d_med + d_high > supply,
        "low": d_low + d_med + d_high > supply,
    }


# A tiered bid assigns each demanded product one tier and one quantity.
TieredBundle = dict[str, tuple[str, int]]  # product_id -> (tier, quantity)


@dataclass(frozen=True)
class TieredRoundRecord:
    round: int
    start: dict[tuple[str, str], int]    # (product, tier) -> cents
    clock: dict[tuple[str, str], int]
    posted: dict[tuple[str, str], int]
    aggregate: dict[tuple[str, str], int]
    bids: dict[str, TieredBundle]
    eligibility: dict[str, int]


@dataclass
class TieredAuctionTrace:
    rounds: list[TieredRoundRecord]
    final_allocation: dict[str, TieredBundle]
    revenue: int
    rounds_used: int
    truncated: bool = False
    deployment_costs: dict[str, int] = field(default_factory=dict)


def _best_tiered_copies(base: BundleBase, model: ValuationModel,
                        prices: dict[tuple[str, str], int], eligibility: int,
                        catalog: ProductCatalog, bidder_id: str,
                        adjustment: TieredValuationAdjustment
                        ) -> tuple[TieredBundle, float] | None:
    """Level and tier choice for one base: BEST_COPIES with a tier layer plus
    binary (area, tier) engagement variables carrying the lump-sum costs."""
    lp = LinearProgram()
    binaries: list[str] = []
    level_vars: dict[tuple[str, str, int], str] = {}
    area_of = {j: catalog.get(j).area_id for j in base.quantities}
    areas = sorted(set(area_of.values()))

    min_cost = 0
    for j, base_q in sorted(base.quantities.items()):
        levels = [q for q in model.ladder(j) if q >= base_q]
        if not levels:
            raise ValidationError(f"base quantity of {j!r} off the model ladder")
        min_cost += levels[0] * catalog.get(j).eligibility_points
        for t in TIERS:
            for q in levels:
                name = f"I::{j}::{t}::{q}"
                lp.add_variable(name, lb=0.0, ub=1.0)
                binaries.append(name)
                level_vars[(j, t, q)] = name
    if min_cost > eligibility:
        return None

    engage_vars: dict[tuple[str, str], str] = {}
    for a in areas:
        for t in TIERS:
            name = f"Y::{a}::{t}"
            lp.add_variable(name, lb=0.0, ub=1.0)
            binaries.append(name)
            engage_vars[(a, t)] = name

    objective: dict[str, float] = {}
    for (j, t, q), name in level_vars.items():
        utility = model.cumulative_value(j, q) - q * prices[(j, t)]
        objective[name] = -utility  # minimize negative utility
    for (a, t), name in engage_vars.items():
        objective[name] = float(adjustment.cost(bidder_id, a, t))
    lp.objective = objective

    for j in sorted(base.quantities):
        lp.add_constraint(
            {name: 1.0 for (jj, t, q), name in level_vars.items() if jj == j},
            EQ, 1.0)
    lp.add_constraint(
        {name: float(q * catalog.get(j).eligibility_points)
         for (j, t, q), name in level_vars.items()},
        LE, float(eligibility))
    for (j, t, q), name in level_vars.items():
        lp.add_constraint({name: 1.0, engage_vars[(area_of[j], t)]: -1.0}, LE, 0.0)

    sol = solve_mip(MixedIntegerProgram(lp=lp, binaries=binaries))
    if sol.status == "infeasible":
        return None
    bundle: TieredBundle = {}
    for (j, t, q), name in level_vars.items():
        if sol.values[name] > 0.5:
            bundle[j] = (t, q)
    utility = -sol.objective_value  # includes the engaged deployment costs
    return bundle, utility


def _myopic_tiered_bid(agent: BidderAgent, prices: dict[tuple[str, str], int],
                       catalog: ProductCatalog, eligibility: int,
                       adjustment: TieredValuationAdjustment
                       ) -> TieredBundle | None:
    best_u = -math.inf
    best_bundle = None
    for base in agent.space.bases:
        result = _best_tiered_copies(base, agent.model, prices, eligibility,
                                     catalog, agent.bidder_id, adjustment)
        if result is None:
            continue
        bundle, inner_u = result
        u = inner_u + agent.model.base_values.get(base.base_id, 0.0)
        if u > best_u:
            best_u = u
            best_bundle = bundle
    if best_bundle is not None and best_u >= 0:
        return best_bundle
    return None


def _tiered_cost(bundle: TieredBundle, catalog: ProductCatalog) -> int:
    return sum(q * catalog.get(j).eligibility_points
               for j, (t, q) in bundle.items())


def run_extended_auction(config: AuctionConfig, agents: list[BidderAgent],
                         adjustment: TieredValuationAdjustment) -> TieredAuctionTrace:
    """Same round loop as the standard engine, over (product, tier) pairs with
    hierarchical overdemand deciding which tier prices escalate."""
    if not agents:
        raise ValidationError("need at least one agent")
    catalog = config.catalog
    ids = catalog.ids()
    pairs = [(j, t) for j in ids for t in TIERS]
    # opening prices identical across the three tiers of a product
    start = {(j, t): catalog.get(j).opening_price for (j, t) in pairs}
    eligibility = {a.bidder_id: a.start_eligibility(catalog) for a in agents}
    exited: set[str] = set()

    rounds: list[TieredRoundRecord] = []
    truncated = False
    while True:
        rnd = len(rounds) + 1
        clock = {(j, t): clock_price(start[(j, t)], config.increments(j, rnd))
                 for (j, t) in pairs}
        bids: dict[str, TieredBundle] = {}
        for agent in agents:
            if agent.bidder_id in exited:
                bids[agent.bidder_id] = {}
                continue
            bid = _myopic_tiered_bid(agent, start, catalog,
                                     eligibility[agent.bidder_id], adjustment)
            if bid is None:
                exited.add(agent.bidder_id)
                eligibility[agent.bidder_id] = 0
                bids[agent.bidder_id] = {}
            else:
                bids[agent.bidder_id] = bid

        aggregate = {pair: 0 for pair in pairs}
        for bundle in bids.values():
            for j, (t, q) in bundle.items():
                aggregate[(j, t)] += q

        posted = {}
        any_overdemand = False
        for j in ids:
            supply = catalog.get(j).supply
            over = tier_overdemand({t: aggregate[(j, t)] for t in TIERS}, supply)
            for t in TIERS:
                posted[(j, t)] = clock[(j, t)] if over[t] else start[(j, t)]
                any_overdemand = any_overdemand or over[t]

        rounds.append(TieredRoundRecord(
            round=rnd, start=dict(start), clock=clock, posted=posted,
            aggregate=aggregate, bids=dict(bids), eligibility=dict(eligibility)))

        for agent in agents:
            if agent.bidder_id not in exited:
                cost = _tiered_cost(bids[agent.bidder_id], catalog)
                eligibility[agent.bidder_id] = min(
                    eligibility[agent.bidder_id],
                    int(config.activity_rule * cost))

        if not any_overdemand:
            break
        if rnd >= config.max_rounds:
            truncated = True
            break
        start = posted

    final = rounds[-1]
    allocation = {a.bidder_id: final.bids[a.bidder_id] for a in agents}
    revenue = sum(q * final.posted[(j, t)]
                  for bundle in allocation.values()
                  for j, (t, q) in bundle.items())
    deployment_costs = {}
    for bidder, bundle in allocation.items():
        engaged = {(catalog.get(j).area_id, t) for j, (t, q) in bundle.items()}
        deployment_costs[bidder] = sum(
            adjustment.cost(bidder, a, t) for (a, t) in sorted(engaged))
    return TieredAuctionTrace(rounds=rounds, final_allocation=allocation,
                              revenue=revenue, rounds_used=len(rounds),
                              truncated=truncated,
                              deployment_costs=deployment_costs)


# ---------------------------------------------------------------------------
# coverage reporting


@dataclass(frozen=True)
class CoverageSummary:
    licenses_by_class_tier: dict[str, dict[str, int]]
    additional_population: int


def coverage_report(trace: TieredAuctionTrace, catalog: ProductCatalog,
                    demographics, coverage_targets: dict[tuple[str, str], float]
                    ) -> CoverageSummary:
    """License counts per area-class and tier, plus population newly reached
    within five years by Medium/High commitments relative to the Low baseline.

    Population in an area counts once, at the strongest tier any license in
    that area carries.
    """
    by_class_tier: dict[str, dict[str, int]] = {}
    strongest: dict[str, str] = {}
    for bundle in trace.final_allocation.values():
        for j, (t, q) in bundle.items():
            product = catalog.get(j)
            if product.area_id not in demographics:
                raise ValidationError(f"no demographics for area {product.area_id!r}")
            by_class_tier.setdefault(product.area_class, {}).setdefault(t, 0)
            by_class_tier[product.area_class][t] += q
            prev = strongest.get(product.area_id)
            if prev is None or TIER_RANK[t] > TIER_RANK[prev]:
                strongest[product.area_id] = t

    additional = 0.0
    for area_id, tier in sorted(strongest.items()):
        stats = demographics[area_id]
        low = coverage_targets[(stats.area_class, "low")]
        delta = coverage_targets[(stats.area_class, tier)] - low
        additional += delta * stats.population
    return CoverageSummary(licenses_by_class_tier=by_class_tier,
                           additional_population=int(round(additional)))


def tiered_round_to_json(record: TieredRoundRecord) -> str:
    def flat(d):
        return {f"{j}::{t}": v for (j, t), v in sorted(d.items())}

    doc = {
        "round": record.round,
        "start": flat(record.start),
        "clock": flat(record.clock),
        "posted": flat(record.posted),
        "aggregate": flat(record.aggregate),
        "bids": {bidder: {j: [t, q] for j, (t, q) in sorted(bundle.items())}
                 for bidder, bundle in sorted(record.bids.items())},
        "eligibility": dict(sorted(record.eligibility.items())),
    }
    return json.dumps(doc, sort_keys=True)


def tiered_trace_to_jsonl(trace: TieredAuctionTrace) -> str:
    return "\n".join(tiered_round_to_json(r) for r in trace.rounds) + "\n"


def tiered_trace_summary(trace: TieredAuctionTrace) -> dict:
    return {
        "final_allocation": {
            bidder: {j: [t, q] for j, (t, q) in sorted(bundle.items())}
            for bidder, bundle in sorted(trace.final_allocation.items())},
        "revenue_cents": trace.revenue,
        "rounds_used": trace.rounds_used,
        "truncated": trace.truncated,
        "deployment_costs_cents": dict(sorted(trace.deployment_costs.items())),
    }
