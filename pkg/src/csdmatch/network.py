"""Transportation networks, zone-to-zone travel times, and detour costs.

Networks come from TNTP text files (or the bundled synthetic benchmark
network of the same scale).  Travel times are free-flow minutes on directed
links, taken exactly as listed; congestion columns of the TNTP format are
parsed and dropped.  Zone-to-zone times are all-pairs shortest paths from
each zone, computed with a priority-queue label-setting method.
"""
from __future__ import annotations

import importlib.resources
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import ParseError, ValidationError

BENCHMARK_NETWORK_RESOURCE = "synthetic_1052.tntp"


@dataclass(frozen=True)
class Network:
    """Directed network with free-flow link times in minutes.

    nodes : ascending int node ids
    tail, head : per-link endpoint node ids
    time : per-link nonnegative minutes
    zones : ordered subset of nodes usable as trip endpoints
    """

    nodes: np.ndarray
    tail: np.ndarray
    head: np.ndarray
    time: np.ndarray
    zones: np.ndarray

    def __post_init__(self):
        if np.any(self.time < 0):
            raise ValidationError("negative link travel time")
        node_set = set(self.nodes.tolist())
        for arr, name in ((self.tail, "tail"), (self.head, "head")):
            unknown = [v for v in np.unique(arr).tolist() if v not in node_set]
            if unknown:
                raise ValidationError(
                    f"link {name} references unknown node(s) {unknown[:5]}")
        if not set(self.zones.tolist()) <= node_set:
            raise ValidationError("zones must be a subset of nodes")

    @property
    def num_nodes(self):
        return int(self.nodes.shape[0])

    @property
    def num_links(self):
        return int(self.tail.shape[0])

    @property
    def num_zones(self):
        return int(self.zones.shape[0])


@dataclass(frozen=True)
class TravelTimeMatrix:
    """Shortest-path minutes between every ordered zone pair.

    zones : node ids, in the network's zone order
    t : (Z, Z) float64, t[i, i] = 0, all entries finite
    """

    zones: np.ndarray
    t: np.ndarray

    def index_of(self, zone_id):
        pos = np.searchsorted(self._sorted_zones, zone_id)
        if pos >= self.zones.shape[0] or self._sorted_zones[pos] != zone_id:
            raise KeyError(f"unknown zone id {zone_id}")
        return int(self._order[pos])

    def __post_init__(self):
        order = np.argsort(self.zones, kind="stable")
        object.__setattr__(self, "_order", order)
        object.__setattr__(self, "_sorted_zones", self.zones[order])


def parse_tntp(path):
    """Parse a TNTP network file into a Network.

    The metadata header must declare <NUMBER OF ZONES>, <NUMBER OF NODES>
    and <NUMBER OF LINKS>; link rows are whitespace separated, terminated
    by ';', with columns (init node, term node, capacity, length, free flow
    time, ...).  Lines starting with '~' are comments.
    """
    meta = {}
    links = []
    in_meta = True
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("~"):
                continue
            if in_meta:
                if line.startswith("<END OF METADATA>"):
                    in_meta = False
                    continue
                if line.startswith("<"):
                    key, _, value = line.partition(">")
                    meta[key.lstrip("<").strip()] = value.strip()
                    continue
                raise ParseError(f"{path}:{lineno}: expected metadata, got {line!r}")
            fields = line.rstrip(";").split()
            if not fields:
                continue
            if len(fields) < 5:
                raise ParseError(
                    f"{path}:{lineno}: link row needs at least 5 columns, got {line!r}")
            try:
                tail = int(fields[0])
                head = int(fields[1])
                fftime = float(fields[4])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: non-numeric link field: {exc}") from None
            links.append((tail, head, fftime))
    for key in ("NUMBER OF ZONES", "NUMBER OF NODES", "NUMBER OF LINKS"):
        if key not in meta:
            raise ParseError(f"{path}: metadata header missing <{key}>")
    try:
        n_zones = int(meta["NUMBER OF ZONES"])
        n_nodes = int(meta["NUMBER OF NODES"])
        n_links = int(meta["NUMBER OF LINKS"])
    except ValueError as exc:
        raise ParseError(f"{path}: non-numeric metadata value: {exc}") from None
    if len(links) != n_links:
        raise ValidationError(
            f"{path}: header declares {n_links} links but {len(links)} rows found")
    tail = np.array([l[0] for l in links], dtype=np.int64)
    head = np.array([l[1] for l in links], dtype=np.int64)
    time = np.array([l[2] for l in links], dtype=np.float64)
    nodes = np.arange(1, n_nodes + 1, dtype=np.int64)
    zones = np.arange(1, n_zones + 1, dtype=np.int64)
    return Network(nodes=nodes, tail=tail, head=head, time=time, zones=zones)


def write_tntp(net, path):
    """Write a Network in canonical TNTP form (free-flow time only)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"<NUMBER OF ZONES> {net.num_zones}\n")
        fh.write(f"<NUMBER OF NODES> {net.num_nodes}\n")
        fh.write(f"<FIRST THRU NODE> 1\n")
        fh.write(f"<NUMBER OF LINKS> {net.num_links}\n")
        fh.write("<END OF METADATA>\n\n")
        fh.write("~ \tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\tspeed\ttoll\ttype\t;\n")
        for i in range(net.num_links):
            t = net.time[i]
            fh.write(f"\t{net.tail[i]}\t{net.head[i]}\t9999\t{t:.6f}\t{t:.6f}"
                     f"\t0\t0\t0\t0\t1\t;\n")


def all_zone_times(net):
    """All-zone-pairs shortest-path travel times.

    Runs one label-setting (Dijkstra) search per zone.  Unreachable zone
    pairs abort with an error listing the offending pairs rather than being
    silently assigned infinity.
    """
    id_to_idx = {int(n): i for i, n in enumerate(net.nodes)}
    tail_idx = np.array([id_to_idx[int(v)] for v in net.tail], dtype=np.int64)
    head_idx = np.array([id_to_idx[int(v)] for v in net.head], dtype=np.int64)
    n = net.num_nodes
    graph = csr_matrix((net.time, (tail_idx, head_idx)), shape=(n, n))
    zone_idx = np.array([id_to_idx[int(z)] for z in net.zones], dtype=np.int64)
    dist = dijkstra(graph, directed=True, indices=zone_idx)
    t = dist[:, zone_idx]
    np.fill_diagonal(t, 0.0)
    if not np.all(np.isfinite(t)):
        bad = np.argwhere(~np.isfinite(t))
        pairs = [(int(net.zones[i]), int(net.zones[j])) for i, j in bad[:10]]
        raise ValidationError(
            f"{bad.shape[0]} zone pair(s) unreachable, e.g. {pairs}")
    return TravelTimeMatrix(zones=net.zones.copy(), t=t)


def detour_cost(ttm, od, rs):
    """Extra minutes for a driver on ``od`` to serve a pickup-delivery ``rs``.

    Both arguments are (zone id, zone id) pairs.  The value is
    t[o,r] + t[r,s] + t[s,d] - t[o,d]; the shortest-path triangle
    inequality keeps it nonnegative (tiny float residue is clipped).
    """
    o, d = (ttm.index_of(od[0]), ttm.index_of(od[1]))
    r, s = (ttm.index_of(rs[0]), ttm.index_of(rs[1]))
    t = ttm.t
    return max(t[o, r] + t[r, s] + t[s, d] - t[o, d], 0.0)


def detour_cost_matrix(ttm, od_idx, rs_idx):
    """Detour-cost matrix over zone-position index pairs.

    od_idx : (W, 2) int array of zone positions
    rs_idx : (T, 2) int array of zone positions
    Returns a (W, T) float64 matrix, elementwise equal to `detour_cost`.
    """
    t = ttm.t
    o = od_idx[:, 0][:, None]
    d = od_idx[:, 1][:, None]
    r = rs_idx[:, 0][None, :]
    s = rs_idx[:, 1][None, :]
    c = t[o, r] + t[rs_idx[:, 0], rs_idx[:, 1]][None, :] + t[s, d] - t[o, d]
    return np.maximum(c, 0.0)


def make_scaled_network(num_nodes=1052, num_links=2836, num_zones=147, seed=7151):
    """Deterministic synthetic network with the benchmark network's scale.

    Nodes are scattered in a square whose side is about a half-hour drive;
    a nearest-earlier-neighbor tree guarantees strong connectivity and the
    remaining link budget goes to the geographically shortest non-tree
    pairs.  Every undirected edge is listed in both directions with a
    symmetric free-flow time, so the defaults yield exactly ``num_links``
    directed links.  Zones are the first ``num_zones`` node ids.
    """
    if num_links % 2 != 0:
        raise ValidationError("num_links must be even (edges listed both ways)")
    n_edges = num_links // 2
    if n_edges < num_nodes - 1:
        raise ValidationError("not enough links for a connected network")
    rng = np.random.default_rng(seed)
    pos = rng.uniform(0.0, 7.5, size=(num_nodes, 2))
    dist = np.sqrt(((pos[:, None, :] - pos[None, :, :]) ** 2).sum(axis=2))
    edges = set()
    for i in range(1, num_nodes):
        j = int(np.argmin(dist[i, :i]))
        edges.add((min(i, j), max(i, j)))
    iu, ju = np.triu_indices(num_nodes, k=1)
    order = np.argsort(dist[iu, ju], kind="stable")
    for k in order:
        if len(edges) >= n_edges:
            break
        pair = (int(iu[k]), int(ju[k]))
        edges.add(pair)
    edge_arr = np.array(sorted(edges), dtype=np.int64)
    # Minutes at urban free-flow speed with mild per-edge variation.
    jitter = rng.uniform(0.9, 1.2, size=edge_arr.shape[0])
    minutes = dist[edge_arr[:, 0], edge_arr[:, 1]] * 1.4 * jitter
    minutes = np.maximum(minutes, 0.05)
    tail = np.concatenate([edge_arr[:, 0], edge_arr[:, 1]]) + 1
    head = np.concatenate([edge_arr[:, 1], edge_arr[:, 0]]) + 1
    time = np.concatenate([minutes, minutes])
    nodes = np.arange(1, num_nodes + 1, dtype=np.int64)
    zones = np.arange(1, num_zones + 1, dtype=np.int64)
    return Network(nodes=nodes, tail=tail.astype(np.int64),
                   head=head.astype(np.int64), time=time, zones=zones)


def benchmark_network_path():
    """Filesystem path of the bundled benchmark-scale TNTP file."""
    return importlib.resources.files("csdmatch.data") / BENCHMARK_NETWORK_RESOURCE


def load_benchmark_network():
    """Parse the bundled 1052-node / 2836-link / 147-zone network."""
    return parse_tntp(str(benchmark_network_path()))
