"""Networks, zone-to-zone travel times, and detour costs.

Loads the bundled benchmark-scale network (1,052 nodes / 2,836 directed
links / 147 zones, free-flow minutes), computes all-zone-pairs shortest
paths, and evaluates a few detour costs: the extra minutes a driver on trip
(o, d) spends picking up at r and delivering at s.
"""
import numpy as np

from csdmatch import network

# ---------------------------------------------------------------------------
# Load and summarize
# ---------------------------------------------------------------------------
net = network.load_benchmark_network()
print(f"network: {net.num_nodes} nodes, {net.num_links} links, "
      f"{net.num_zones} zones")
print(f"link free-flow time: {net.time.min():.2f} .. {net.time.max():.2f} min")

ttm = network.all_zone_times(net)
off_diag = ttm.t[ttm.t > 0]
print(f"zone-to-zone time: median {np.median(off_diag):.1f} min, "
      f"max {off_diag.max():.1f} min")

# ---------------------------------------------------------------------------
# Detour costs
# ---------------------------------------------------------------------------
# A task on the driver's own trip costs nothing extra.
od = (int(ttm.zones[3]), int(ttm.zones[90]))
print(f"\ndriver trip {od}: direct time "
      f"{ttm.t[ttm.index_of(od[0]), ttm.index_of(od[1])]:.1f} min")
print(f"detour for serving the trip itself: "
      f"{network.detour_cost(ttm, od, od):.3f} min")

rng = np.random.default_rng(1)
print("\nfive random pickup-delivery pairs:")
for _ in range(5):
    i, j = rng.choice(len(ttm.zones), size=2, replace=False)
    rs = (int(ttm.zones[i]), int(ttm.zones[j]))
    c = network.detour_cost(ttm, od, rs)
    print(f"  task {rs}: detour {c:6.2f} min")

# ---------------------------------------------------------------------------
# Round trip through the TNTP text format
# ---------------------------------------------------------------------------
network.write_tntp(net, "/tmp/demo_network.tntp")
back = network.parse_tntp("/tmp/demo_network.tntp")
print(f"\nTNTP round trip: {back.num_nodes} nodes, {back.num_links} links "
      f"(wrote /tmp/demo_network.tntp)")
