"""End-to-end orchestration: log -> smooth -> estimate -> agents -> replay.

Bid-log CSVs carry no prices, so per-round start prices are reconstructed by
replaying the posted-price rule on the raw log's aggregate demand.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (Bundle, IncrementSchedule, PriceVector, ProductCatalog,
                   aggregate_demand, clock_price, posted_price)
from .engine import AuctionConfig, AuctionTrace, BidderAgent, compare_allocations, run_auction
from .errors import ValidationError
from .estimation import (EstimationReport, ValuationModel, estimate,
                         reconstruct_eligibility)
from .ingest import (BidRow, BundleSpace, RawBidLog, SmoothedBidLog,
                     build_bundle_space, smooth_monotone)


def reconstruct_prices(log: RawBidLog, catalog: ProductCatalog,
                       increments: IncrementSchedule
                       ) -> tuple[dict[int, PriceVector], dict[int, PriceVector]]:
    """(start, posted) price vectors per round, replayed from aggregate demand."""
    R = log.num_rounds()
    if R == 0:
        raise ValidationError("empty bid log")
    ids = catalog.ids()
    start_prices: dict[int, PriceVector] = {}
    posted_prices: dict[int, PriceVector] = {}
    start = PriceVector({j: catalog.get(j).opening_price for j in ids})
    for rnd in range(1, R + 1):
        bundles = [log.bundle(bidder, rnd) for bidder in log.bidders()]
        clock = PriceVector({j: clock_price(start[j], increments(j, rnd)) for j in ids})
        posted = PriceVector({
            j: posted_price(start[j], clock[j],
                            aggregate_demand(bundles, j), catalog.get(j).supply)
            for j in ids})
        start_prices[rnd] = start
        posted_prices[rnd] = posted
        start = posted
    return start_prices, posted_prices


@dataclass(frozen=True)
class BidderEstimate:
    model: ValuationModel
    space: BundleSpace
    report: EstimationReport


def estimate_all(raw: RawBidLog, catalog: ProductCatalog,
                 increments: IncrementSchedule, backend: str = "highs"
                 ) -> dict[str, BidderEstimate]:
    """Smooth the log and run the valuation LP for every bidder in it."""
    smoothed = smooth_monotone(raw)
    start_prices, _ = reconstruct_prices(raw, catalog, increments)
    out = {}
    for bidder in smoothed.bidders():
        space = build_bundle_space(smoothed, bidder)
        if not space.bases:
            continue  # bidder never demanded anything
        eligibility = reconstruct_eligibility(space, smoothed, catalog)
        model, report = estimate(space, smoothed, start_prices, eligibility,
                                 catalog, backend=backend)
        out[bidder] = BidderEstimate(model=model, space=space, report=report)
    return out


def agents_from_estimates(estimates: dict[str, BidderEstimate]) -> list[BidderAgent]:
    return [BidderAgent(bidder_id=bidder, model=est.model, space=est.space)
            for bidder, est in sorted(estimates.items())]


def trace_to_bidlog(trace: AuctionTrace) -> RawBidLog:
    rows = []
    for record in trace.rounds:
        for bidder, bundle in sorted(record.bids.items()):
            for j, q in bundle.quantities.items():
                rows.append(BidRow(round=record.round, bidder_id=bidder,
                                   product_id=j, quantity=q))
    return RawBidLog(rows=tuple(rows))


@dataclass(frozen=True)
class RoundTripResult:
    original: AuctionTrace
    replayed: AuctionTrace
    rmse_per_bidder: dict[str, float]
    rmse_mean: float


def roundtrip(config: AuctionConfig, agents: list[BidderAgent],
              backend: str = "highs") -> RoundTripResult:
    """Simulate with known agents, estimate from the resulting log, replay
    with the estimated valuations, and compare final allocations."""
    original = run_auction(config, agents)
    raw = trace_to_bidlog(original)
    estimates = estimate_all(raw, config.catalog, config.increments, backend=backend)
    replay_agents = []
    for agent in agents:
        if agent.bidder_id in estimates:
            est = estimates[agent.bidder_id]
            replay_agents.append(BidderAgent(bidder_id=agent.bidder_id,
                                             model=est.model, space=est.space))
        else:
            # never bid: re-simulate with an empty-bidding stand-in
            replay_agents.append(agent)
    replayed = run_auction(config, replay_agents)
    a = {b: original.final_allocation.get(b, Bundle({})) for b in
         (ag.bidder_id for ag in agents)}
    b = {bb: replayed.final_allocation.get(bb, Bundle({})) for bb in a}
    per_bidder, mean = compare_allocations(a, b, config.catalog)
    return RoundTripResult(original=original, replayed=replayed,
                           rmse_per_bidder=per_bidder, rmse_mean=mean)
