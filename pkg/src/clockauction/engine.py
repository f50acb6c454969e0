"""Clock-auction round loop with myopic bidders.

Each round, every agent picks the utility-maximizing bundle at the round's
start prices: per base, a small MIP (BEST_COPIES) chooses one ladder level
per product under the eligibility budget; the outer strategy adds the base
complementarity value and keeps the best base.  Overdemanded products move to
the clock price; the loop ends when every product clears.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .core import (Bundle, EMPTY_BUNDLE, IncrementSchedule, PriceVector,
                   ProductCatalog, RoundRecord, aggregate_demand, clock_price,
                   eligibility_cost, payment, posted_price)
from .errors import ValidationError
from .estimation import ValuationModel, bundle_utility, initial_eligibility
from .ingest import BundleBase, BundleSpace
from .solver import EQ, LE, LinearProgram, MixedIntegerProgram, solve_mip


@dataclass
class AuctionConfig:
    catalog: ProductCatalog
    increments: IncrementSchedule
    max_rounds: int = 200
    activity_rule: float = 1.0  # next eligibility = rule * cost of current bid

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ValidationError("max_rounds must be >= 1")


@dataclass
class BidderAgent:
    bidder_id: str
    model: ValuationModel
    space: BundleSpace
    eligibility: int | None = None  # None: cost of the maximal variant

    def start_eligibility(self, catalog: ProductCatalog) -> int:
        if self.eligibility is not None:
            return self.eligibility
        return initial_eligibility(self.space, catalog)


@dataclass
class AuctionTrace:
    rounds: list[RoundRecord]
    final_allocation: dict[str, Bundle]
    revenue: int
    rounds_used: int
    truncated: bool = False


def best_copies(base: BundleBase, model: ValuationModel, prices: PriceVector,
                eligibility: int, catalog: ProductCatalog) -> Bundle | None:
    """Utility-maximizing ladder levels for one base via a binary MIP.

    One binary per (product, ladder level >= base level); objective uses the
    cumulative increment value up to the chosen level minus quantity * price.
    Returns None when even the minimum levels exceed the eligibility budget.
    """
    choices: dict[str, list[int]] = {}
    utilities: dict[tuple[str, int], float] = {}
    for j, base_q in base.quantities.items():
        levels = [q for q in model.ladder(j) if q >= base_q]
        if not levels:
            raise ValidationError(f"base quantity of {j!r} off the model ladder")
        choices[j] = levels
        for q in levels:
            utilities[(j, q)] = model.cumulative_value(j, q) - q * prices[j]

    min_cost = sum(choices[j][0] * catalog.get(j).eligibility_points
                   for j in choices)
    if min_cost > eligibility:
        return None

    # fast path: with eligibility slack at the per-product argmax levels the
    # products decouple and the MIP is unnecessary
    # utility ties go to the higher quantity: under minimal estimated
    # marginals a bidder is exactly indifferent at the last price where it
    # still held the larger level, and held it
    greedy = {j: max(choices[j], key=lambda q: (utilities[(j, q)], q))
              for j in choices}
    greedy_cost = sum(q * catalog.get(j).eligibility_points for j, q in greedy.items())
    if greedy_cost <= eligibility:
        return Bundle(greedy)

    lp = LinearProgram()
    names: dict[tuple[str, int], str] = {}
    binaries = []
    for j in sorted(choices):
        for q in choices[j]:
            name = f"I::{j}::{q}"
            lp.add_variable(name, lb=0.0, ub=1.0)
            names[(j, q)] = name
            binaries.append(name)
    lp.objective = {names[(j, q)]: -utilities[(j, q)] for (j, q) in names}
    for j in sorted(choices):
        lp.add_constraint({names[(j, q)]: 1.0 for q in choices[j]}, EQ, 1.0)
    lp.add_constraint(
        {names[(j, q)]: float(q * catalog.get(j).eligibility_points)
         for (j, q) in names},
        LE, float(eligibility))
    sol = solve_mip(MixedIntegerProgram(lp=lp, binaries=binaries))
    if sol.status == "infeasible":
        return None
    quantities = {}
    for (j, q), name in names.items():
        if sol.values[name] > 0.5:
            quantities[j] = q
    return Bundle(quantities)


def myopic_bid(agent: BidderAgent, prices: PriceVector, catalog: ProductCatalog,
               eligibility: int) -> Bundle | None:
    """Algorithm: best_copies per base, keep the max-utility bundle (base
    complementarity value included); bid it if utility >= 0, else exit."""
    best_u = -math.inf
    best_bundle = None
    for base in agent.space.bases:
        bundle = best_copies(base, agent.model, prices, eligibility, catalog)
        if bundle is None:
            continue
        u = bundle_utility(agent.model, bundle, base, prices)
        if u > best_u:  # strict: ties keep the lower-indexed base
            best_u = u
            best_bundle = bundle
    if best_bundle is not None and best_u >= 0:
        return best_bundle
    return None


def run_auction(config: AuctionConfig, agents: list[BidderAgent]) -> AuctionTrace:
    if not agents:
        raise ValidationError("need at least one agent")
    catalog = config.catalog
    ids = catalog.ids()
    start = PriceVector({j: catalog.get(j).opening_price for j in ids})
    eligibility = {a.bidder_id: a.start_eligibility(catalog) for a in agents}
    exited: set[str] = set()

    rounds: list[RoundRecord] = []
    truncated = False
    while True:
        rnd = len(rounds) + 1
        clock = PriceVector({j: clock_price(start[j], config.increments(j, rnd))
                             for j in ids})
        bids: dict[str, Bundle] = {}
        for agent in agents:
            if agent.bidder_id in exited:
                bids[agent.bidder_id] = EMPTY_BUNDLE
                continue
            bid = myopic_bid(agent, start, catalog, eligibility[agent.bidder_id])
            if bid is None:
                # exit is permanent: zero demand and zero eligibility onward
                exited.add(agent.bidder_id)
                eligibility[agent.bidder_id] = 0
                bids[agent.bidder_id] = EMPTY_BUNDLE
            else:
                bids[agent.bidder_id] = bid

        aggregate = {j: aggregate_demand(bids.values(), j) for j in ids}
        posted = PriceVector({
            j: posted_price(start[j], clock[j], aggregate[j], catalog.get(j).supply)
            for j in ids})
        rounds.append(RoundRecord(
            round=rnd, start=start, clock=clock, posted=posted,
            aggregate=aggregate, bids=dict(bids), eligibility=dict(eligibility)))

        for agent in agents:
            if agent.bidder_id not in exited:
                cost = eligibility_cost(bids[agent.bidder_id], catalog)
                eligibility[agent.bidder_id] = min(
                    eligibility[agent.bidder_id],
                    int(config.activity_rule * cost))

        overdemanded = any(aggregate[j] > catalog.get(j).supply for j in ids)
        if not overdemanded:
            break
        if rnd >= config.max_rounds:
            truncated = True
            break
        start = posted

    final = rounds[-1]
    allocation = {a.bidder_id: final.bids[a.bidder_id] for a in agents}
    revenue = sum(payment(b, final.posted) for b in allocation.values())
    return AuctionTrace(rounds=rounds, final_allocation=allocation,
                        revenue=revenue, rounds_used=len(rounds),
                        truncated=truncated)


def compare_allocations(a: dict[str, Bundle], b: dict[str, Bundle],
                        catalog: ProductCatalog) -> tuple[dict[str, float], float]:
    """Per-bidder RMSE of final quantities over all catalog products, plus the
    mean across bidders."""
    if set(a) != set(b):
        raise ValidationError("allocations cover different bidder sets")
    per_bidder = {}
    for bidder in sorted(a):
        sq = [(a[bidder][j] - b[bidder][j]) ** 2 for j in catalog.ids()]
        per_bidder[bidder] = math.sqrt(sum(sq) / len(sq)) if sq else 0.0
    aggregate = sum(per_bidder.values()) / len(per_bidder) if per_bidder else 0.0
    return per_bidder, aggregate


# ---------------------------------------------------------------------------
# trace serialization (JSON-lines rounds + summary)


def _price_doc(pv: PriceVector, ids) -> dict:
    return {j: pv[j] for j in ids}


def round_to_json(record: RoundRecord, catalog: ProductCatalog) -> str:
    ids = catalog.ids()
    doc = {
        "round": record.round,
        "start": _price_doc(record.start, ids),
        "clock": _price_doc(record.clock, ids),
        "posted": _price_doc(record.posted, ids),
        "aggregate": {j: record.aggregate[j] for j in ids},
        "bids": {bidder: dict(bundle.quantities)
                 for bidder, bundle in sorted(record.bids.items())},
        "eligibility": dict(sorted(record.eligibility.items())),
    }
    return json.dumps(doc, sort_keys=True)


def trace_to_jsonl(trace: AuctionTrace, catalog: ProductCatalog) -> str:
    return "\n".join(round_to_json(r, catalog) for r in trace.rounds) + "\n"


def trace_from_jsonl(text: str, truncated: bool = False) -> AuctionTrace:
    """Rebuild a trace from its JSON-lines form (inverse of trace_to_jsonl)."""
    rounds = []
    for line in text.splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        rounds.append(RoundRecord(
            round=doc["round"],
            start=PriceVector(doc["start"]),
            clock=PriceVector(doc["clock"]),
            posted=PriceVector(doc["posted"]),
            aggregate=doc["aggregate"],
            bids={bidder: Bundle(q) for bidder, q in doc["bids"].items()},
            eligibility=doc["eligibility"],
        ))
    if not rounds:
        raise ValidationError("empty trace")
    final = rounds[-1]
    allocation = dict(final.bids)
    revenue = sum(payment(b, final.posted) for b in allocation.values())
    return AuctionTrace(rounds=rounds, final_allocation=allocation,
                        revenue=revenue, rounds_used=len(rounds),
                        truncated=truncated)


def trace_summary(trace: AuctionTrace) -> dict:
    return {
        "final_allocation": {bidder: dict(bundle.quantities)
                             for bidder, bundle in sorted(trace.final_allocation.items())},
        "revenue_cents": trace.revenue,
        "rounds_used": trace.rounds_used,
        "truncated": trace.truncated,
    }
