"""Deployment cost tables under the four weighting scenarios.

The per-(bidder, area, tier) cost is tower deficit x per-tower cost plus the
fibre backhaul run, with the fibre rate adjusted for market markup, inflation
and currency, then optionally weighted by population density (sparse areas
cost more per person reached) and land area (big areas need longer runs).

Run:  python3 demos/demo_cost_scenarios.py
"""

from clockauction.core import Product, ProductCatalog, cents_to_dollars
from clockauction.costs import (SCENARIOS, AreaStats, CostParameters,
                                TowerInventory, build_cost_table)
from clockauction.tiered import TIERS


def main() -> None:
    catalog = ProductCatalog(products=(
        Product("P-metro", "A-metro", "metro", 4, 3, 250_000_00),
        Product("P-rural", "A-rural", "rural", 2, 1, 40_000_00),
        Product("P-remote", "A-remote", "remote", 1, 1, 10_000_00)))
    demographics = {
        "A-metro": AreaStats("A-metro", "metro", 1_200_000, 350.0),
        "A-rural": AreaStats("A-rural", "rural", 80_000, 4_500.0),
        "A-remote": AreaStats("A-remote", "remote", 12_000, 20_000.0)}
    inventory = TowerInventory({
        ("incumbent", "A-metro"): 40, ("incumbent", "A-rural"): 1,
        ("incumbent", "A-remote"): 0,
        ("entrant", "A-metro"): 0, ("entrant", "A-rural"): 0,
        ("entrant", "A-remote"): 0})

    params = CostParameters()
    print(f"tower cost (mid): ${cents_to_dollars(int(params.tower_cost_mid))}")
    print(f"adjusted fibre rate: ${cents_to_dollars(int(params.fibre_rate()))}/km\n")

    for key, scenario in SCENARIOS.items():
        table = build_cost_table(catalog, demographics, inventory, scenario, params)
        print(f"scenario {key!r} ({scenario.name}: towers at "
              f"{scenario.base_cost_level}, weighting {scenario.weighting})")
        for bidder in ("incumbent", "entrant"):
            for area in sorted(demographics):
                row = " / ".join(
                    f"{cents_to_dollars(table.costs[(bidder, area, t)]):>15}"
                    for t in TIERS)
                print(f"  {bidder:<10} {area:<9} L/M/H $ {row}")
        print()

    print("the incumbent's metro towers wipe out its deficit there, so its "
          "metro column is zero in every scenario; the entrant pays full "
          "freight, and weighting moves the rural/remote fibre components.")


if __name__ == "__main__":
    main()
