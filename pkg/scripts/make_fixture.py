#!/usr/bin/env python3
"""Regenerate the bundled fixture snapshot (tests/data/fixture_snapshot.json).

The fixture is a hand-laid-out miniature ecosystem: 30 ASes across all six
traffic classes at 5 IXPs in two countries, plus one AS and one IXP without
any membership (they stay out of the graph), one AS with two router ports at
the same IXP (aggregation) and one zero-speed port (ignored at build time).
AS 64500 is a dominant outbound network whose port size at every IXP is at
least 20x anyone else's, which pins it to reverse-PageRank rank 1 among ASes
for any sensible parameter choice.
"""
from __future__ import annotations

import json
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "fixture_snapshot.json"

IXPS = [
    (1, "FrankfurtHub", "DE"),
    (2, "BerlinExchange", "DE"),
    (3, "MunichIX", "DE"),
    (4, "AshburnExchange", "US"),
    (5, "SeattlePeering", "US"),
    (9, "EmptyIX", "US"),  # no members: present in the dump, absent from the graph
]

# asn, info_ratio, info_type, memberships [(ixp_id, speed Mbit/s), ...]
NETWORKS = [
    (64500, "Heavy Outbound", "Content",
     [(1, 2_000_000), (2, 2_000_000), (3, 2_000_000), (4, 2_000_000), (5, 2_000_000)]),
    (64501, "Heavy Outbound", "Content", [(1, 80_000), (4, 60_000)]),
    (64502, "Heavy Outbound", "Content", [(2, 50_000), (3, 20_000), (5, 30_000)]),
    (64503, "Heavy Outbound", "Content", [(1, 40_000), (2, 10_000)]),
    (64504, "Heavy Outbound", "Content", [(4, 70_000), (5, 50_000)]),
    (64505, "Mostly Outbound", "Content", [(1, 60_000), (3, 30_000)]),
    (64506, "Mostly Outbound", "NSP", [(4, 40_000), (5, 20_000)]),
    (64507, "Mostly Outbound", "Content", [(2, 25_000), (4, 25_000)]),
    (64508, "Mostly Outbound", "NSP", [(1, 15_000), (2, 15_000), (3, 10_000)]),
    (64509, "Mostly Outbound", "Content", [(5, 45_000)]),
    (64510, "Balanced", "NSP", [(1, 50_000), (2, 40_000), (4, 30_000)]),
    (64511, "Balanced", "Cable/DSL/ISP", [(3, 20_000), (3, 15_000)]),  # two routers
    (64512, "Balanced", "NSP", [(4, 35_000), (5, 35_000)]),
    (64513, "Balanced", "Not Disclosed", [(2, 10_000)]),
    (64514, "Balanced", "NSP", [(1, 25_000), (5, 25_000)]),  # DE/US -> Tied
    (64515, "Mostly Inbound", "Cable/DSL/ISP", [(1, 90_000), (2, 70_000)]),
    (64516, "Mostly Inbound", "Cable/DSL/ISP", [(4, 100_000), (5, 80_000)]),
    (64517, "Mostly Inbound", "Cable/DSL/ISP", [(3, 60_000)]),
    (64518, "Mostly Inbound", "Not Disclosed", [(5, 55_000)]),
    (64519, "Mostly Inbound", "Cable/DSL/ISP", [(1, 30_000), (2, 20_000), (3, 25_000)]),
    (64520, "Heavy Inbound", "Cable/DSL/ISP", [(2, 85_000), (3, 65_000)]),
    (64521, "Heavy Inbound", "Cable/DSL/ISP", [(5, 95_000)]),
    (64522, "Heavy Inbound", "Not Disclosed", [(4, 45_000), (5, 40_000)]),
    (64523, "Heavy Inbound", "Cable/DSL/ISP", [(1, 35_000), (1, 0)]),  # zero-speed port
    (64524, "Heavy Inbound", "Cable/DSL/ISP", [(3, 55_000), (2, 15_000)]),
    (64525, "Not Disclosed", "Not Disclosed", [(1, 12_000)]),
    (64526, "Not Disclosed", "Not Disclosed", [(4, 18_000)]),
    (64527, "Not Disclosed", "Cable/DSL/ISP", [(2, 22_000), (5, 22_000)]),  # Tied
    (64528, "Not Disclosed", "NSP", [(3, 8_000)]),
    (64529, "Not Disclosed", "Not Disclosed", [(5, 500)]),
    (64999, "Balanced", "NSP", []),  # registered but not present at any IXP
]


def main() -> None:
    net = [
        {
            "asn": asn,
            "name": f"Fixture-AS{asn}",
            "info_ratio": ratio,
            "info_scope": "Regional",
            "info_type": info_type,
        }
        for asn, ratio, info_type, _ in NETWORKS
    ]
    ix = [{"id": i, "name": name, "country": country} for i, name, country in IXPS]
    netixlan = [
        {"asn": asn, "ix_id": ixp_id, "speed": speed}
        for asn, _, _, memberships in NETWORKS
        for ixp_id, speed in memberships
    ]
    dump = {"net": {"data": net}, "ix": {"data": ix}, "netixlan": {"data": netixlan}}
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(dump, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {OUT} ({len(net)} nets, {len(ix)} ixps, {len(netixlan)} ports)")


if __name__ == "__main__":
    main()
