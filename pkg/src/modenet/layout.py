"""Readability-aware layered diagrams for nets, with DOT emission.

Geometry is discrete: a node sits at (layer, lane); lanes are signed integers
so "left of the net" and "right of the net" are exact predicates.  The first
path colour owns the negative lanes, later colours the positive ones.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

from .reach import Limits, equivalent, group_sync_transitions

__all__ = [
    "Diagram",
    "DiagramArc",
    "Weights",
    "ReadabilityReport",
    "SideSwitches",
    "layered_layout",
    "count_crossings",
    "count_side_switches",
    "group_counters",
    "optimize_layout",
    "OptimizeResult",
    "render_dot",
    "render_svg",
    "readability",
    "mirror_lanes_after",
]


@dataclass(frozen=True)
class DiagramArc:
    src: str
    dst: str
    key: tuple
    sync_role: str | None = None


@dataclass(frozen=True)
class Diagram:
    """Positions (layer, lane) per node, drawn arcs, colour tags, clusters."""

    positions: tuple[tuple[str, tuple[int, int]], ...]
    arcs: tuple[DiagramArc, ...]
    kinds: tuple[tuple[str, str], ...]  # node -> "place" | "transition"
    colours: tuple[tuple[str, str], ...]  # node -> tag
    colour_order: tuple[str, ...]
    clusters: tuple[tuple[str, tuple[str, ...]], ...] = ()

    def position_map(self):
        return dict(self.positions)

    def colour_map(self):
        return dict(self.colours)

    def kind_map(self):
        return dict(self.kinds)

    def point(self, node):
        layer, lane = dict(self.positions)[node]
        return (lane, layer)

    def routes(self):
        """Straight segments per drawn arc, derived from node positions."""
        pos = self.position_map()
        out = []
        for arc in self.arcs:
            (l1, x1), (l2, x2) = pos[arc.src], pos[arc.dst]
            out.append((arc, ((x1, l1), (x2, l2))))
        return out

    def with_positions(self, mapping):
        canon = tuple(sorted(mapping.items()))
        return replace(self, positions=canon)


@dataclass(frozen=True)
class Weights:
    crossing: int = 1
    side_switch: int = 2
    sync_arrow: int = 1


DEFAULT_WEIGHTS = Weights()


@dataclass(frozen=True)
class SideSwitches:
    per_colour: tuple[tuple[str, int], ...]
    uncoloured: tuple[str, ...]

    @property
    def total(self):
        return sum(count for _, count in self.per_colour)

    def of(self, tag):
        for name, count in self.per_colour:
            if name == tag:
                return count
        return 0


@dataclass(frozen=True)
class ReadabilityReport:
    crossings: int
    side_switches: SideSwitches
    sync_arrows: int
    composite: int
    weights: Weights = DEFAULT_WEIGHTS


def _node_arcs(net):
    arcs = []
    for t in net.transitions:
        for i, arc in enumerate(t.inputs):
            arcs.append(
                DiagramArc(arc.place, t.name, ("in", t.name, arc.place, i), t.sync_role)
            )
        for i, arc in enumerate(t.outputs):
            arcs.append(
                DiagramArc(t.name, arc.place, ("out", t.name, arc.place, i), t.sync_role)
            )
    return tuple(arcs)


def _longest_path_layers(nodes, arcs, sources):
    """Longest-path layering; arcs closing a cycle (DFS back edges) are skipped."""
    succ: dict[str, list[str]] = {n: [] for n in nodes}
    for arc in arcs:
        succ[arc.src].append(arc.dst)
    for lst in succ.values():
        lst.sort()

    state = {n: 0 for n in nodes}  # 0 unseen, 1 on stack, 2 done
    back_edges = set()
    order = []

    def dfs(start):
        stack = [(start, iter(succ[start]))]
        state[start] = 1
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if state[nxt] == 0:
                    state[nxt] = 1
                    stack.append((nxt, iter(succ[nxt])))
                    advanced = True
                    break
                if state[nxt] == 1:
                    back_edges.add((node, nxt))
            if not advanced:
                state[node] = 2
                order.append(node)
                stack.pop()

    for source in sources:
        if state[source] == 0:
            dfs(source)
    for node in sorted(nodes):
        if state[node] == 0:
            dfs(node)

    layer = {n: 0 for n in nodes}
    for node in reversed(order):
        for nxt in succ[node]:
            if (node, nxt) in back_edges:
                continue
            layer[nxt] = max(layer[nxt], layer[node] + 1)
    return layer


def _assign_lanes(nodes_by_layer, colour_map, colour_order, orderings=None):
    """Unique integer lanes per layer: first colour < 0, others > 0, untagged
    in between around zero."""
    first = colour_order[0] if colour_order else None
    positions = {}
    for layer, nodes in nodes_by_layer.items():
        neg, mid, pos = [], [], []
        for node in nodes:
            tag = colour_map.get(node)
            if tag is None:
                mid.append(node)
            elif tag == first:
                neg.append(node)
            else:
                pos.append(node)
        if orderings:
            key = orderings.get(layer, {})
            neg.sort(key=lambda n: (key.get(n, 0), n))
            mid.sort(key=lambda n: (key.get(n, 0), n))
            pos.sort(key=lambda n: (key.get(n, 0), n))
        else:
            neg.sort()
            mid.sort()
            pos.sort(key=lambda n: (colour_order.index(colour_map[n]), n))
        for i, node in enumerate(neg):
            positions[node] = (layer, -(len(neg) - i))
        for i, node in enumerate(mid):
            positions[node] = (layer, i)
        start = max(1, len(mid))
        for i, node in enumerate(pos):
            positions[node] = (layer, start + i)
    return positions


def layered_layout(net, colours=None):
    """Deterministic longest-path layout.

    `colours` maps path tags to node collections, first tag drawn on the
    left.  Initially-marked places are the layer-0 sources.
    """
    colours = colours or {}
    colour_order = tuple(colours)
    colour_map = {}
    for tag, members in colours.items():
        for node in members:
            colour_map[node] = tag
    nodes = [p.name for p in net.places] + [t.name for t in net.transitions]
    arcs = _node_arcs(net)
    sources = sorted(p.name for p in net.places if p.init)
    layer = _longest_path_layers(nodes, arcs, sources)
    by_layer: dict[int, list[str]] = {}
    for node, lyr in layer.items():
        by_layer.setdefault(lyr, []).append(node)
    positions = _assign_lanes(by_layer, colour_map, colour_order)
    kinds = tuple(
        sorted(
            [(p.name, "place") for p in net.places]
            + [(t.name, "transition") for t in net.transitions]
        )
    )
    return Diagram(
        positions=tuple(sorted(positions.items())),
        arcs=arcs,
        kinds=kinds,
        colours=tuple(sorted(colour_map.items())),
        colour_order=colour_order,
    )


# -- metrics --------------------------------------------------------------------


def _proper_intersection(seg1, seg2):
    """Strict interior crossing of two segments (integer endpoints, exact)."""
    (ax, ay), (bx, by) = seg1
    (cx, cy), (dx, dy) = seg2
    r = (bx - ax, by - ay)
    s = (dx - cx, dy - cy)
    denom = r[0] * s[1] - r[1] * s[0]
    if denom == 0:
        return False  # parallel or collinear: no single crossing point
    qp = (cx - ax, cy - ay)
    t_num = qp[0] * s[1] - qp[1] * s[0]
    u_num = qp[0] * r[1] - qp[1] * r[0]
    t = Fraction(t_num, denom)
    u = Fraction(u_num, denom)
    return 0 < t < 1 and 0 < u < 1


def count_crossings(diagram):
    """Proper pairwise segment crossings; arcs meeting at a node don't count."""
    routes = diagram.routes()
    count = 0
    for i in range(len(routes)):
        arc_i, seg_i = routes[i]
        ends_i = {arc_i.src, arc_i.dst}
        for j in range(i + 1, len(routes)):
            arc_j, seg_j = routes[j]
            if ends_i & {arc_j.src, arc_j.dst}:
                continue
            if _proper_intersection(seg_i, seg_j):
                count += 1
    return count


def count_side_switches(diagram):
    """Per-colour count of lane-sign flips along the path's layer order."""
    pos = diagram.position_map()
    colour_map = diagram.colour_map()
    uncoloured = tuple(sorted(n for n in pos if n not in colour_map))
    per_colour = []
    for tag in diagram.colour_order:
        members = sorted(
            (n for n, t in colour_map.items() if t == tag),
            key=lambda n: (pos[n][0], pos[n][1], n),
        )
        signs = []
        for node in members:
            lane = pos[node][1]
            if lane != 0:
                signs.append(1 if lane > 0 else -1)
        flips = sum(1 for a, b in zip(signs, signs[1:]) if a != b)
        per_colour.append((tag, flips))
    return SideSwitches(tuple(per_colour), uncoloured)


def count_sync_arrows(diagram):
    return sum(1 for arc in diagram.arcs if arc.sync_role is not None)


def readability(diagram, weights=DEFAULT_WEIGHTS):
    crossings = count_crossings(diagram)
    switches = count_side_switches(diagram)
    sync = count_sync_arrows(diagram)
    composite = (
        weights.crossing * crossings
        + weights.side_switch * switches.total
        + weights.sync_arrow * sync
    )
    return ReadabilityReport(crossings, switches, sync, composite, weights)


# -- transformations --------------------------------------------------------------


def counter_clusters(net):
    """Counter -> transitions touching it (references or matching sync_role)."""
    clusters = {}
    for counter in net.counters:
        members = set()
        for t in net.transitions:
            if counter.name in t.referenced_names() or t.sync_role == counter.name:
                members.add(t.name)
        if members:
            clusters[counter.name] = tuple(sorted(members))
    return clusters


def group_counters(net, diagram):
    """Box counter-touching nodes together and stop drawing the arcs of pure
    counter-synchronisation transitions.  The net itself is untouched."""
    clusters = counter_clusters(net)
    if not clusters:
        return diagram
    kept_arcs = tuple(arc for arc in diagram.arcs if arc.sync_role is None)
    return replace(
        diagram,
        arcs=kept_arcs,
        clusters=tuple(sorted(clusters.items())),
    )


def mirror_lanes_after(diagram, layer):
    """Flip lane signs of coloured nodes strictly below `layer` (a deliberately
    bad baseline used to exercise the side-switch repair)."""
    colour_map = diagram.colour_map()
    out = {}
    for node, (lyr, lane) in diagram.positions:
        if lyr > layer and node in colour_map:
            out[node] = (lyr, -lane)
        else:
            out[node] = (lyr, lane)
    return diagram.with_positions(out)


def _barycentre_orderings(diagram, sweeps=10):
    """Within-layer orderings refined by neighbour averages, keeping sides."""
    pos = diagram.position_map()
    layers: dict[int, list[str]] = {}
    for node, (lyr, _) in pos.items():
        layers.setdefault(lyr, []).append(node)
    neighbours: dict[str, list[str]] = {n: [] for n in pos}
    for arc in diagram.arcs:
        neighbours[arc.src].append(arc.dst)
        neighbours[arc.dst].append(arc.src)
    ordering = {lyr: {n: pos[n][1] for n in nodes} for lyr, nodes in layers.items()}
    for _ in range(sweeps):
        changed = False
        for lyr in sorted(layers):
            lane_now = {}
            for other_lyr, keys in ordering.items():
                for n, v in keys.items():
                    lane_now[n] = v
            for node in layers[lyr]:
                nbs = [lane_now[n] for n in neighbours[node] if n in lane_now]
                if nbs:
                    mean = sum(nbs) / len(nbs)
                    if ordering[lyr][node] != mean:
                        ordering[lyr][node] = mean
                        changed = True
        if not changed:
            break
    return ordering


@dataclass(frozen=True)
class OptimizeResult:
    diagram: Diagram
    before: ReadabilityReport
    after: ReadabilityReport
    derived_net: object = None
    equivalence: object = None
    diagnostic: str | None = None


def optimize_layout(
    net,
    diagram,
    weights=DEFAULT_WEIGHTS,
    rewrite_sync=True,
    limits=Limits(max_nodes=400),
):
    """Same-side repair, barycentre crossing reduction, counter grouping.

    The composite score never increases; when the sync-arc rewrite produces a
    derived net, its equivalence with the original is checked and a failure
    aborts the optimization (original diagram returned with a diagnostic).
    """
    before = readability(diagram, weights)

    derived = None
    eq = None
    if rewrite_sync and any(t.sync_role is not None for t in net.transitions):
        derived = group_sync_transitions(net)
        eq = equivalent(net, derived, limits)
        if not eq:
            return OptimizeResult(
                diagram,
                before,
                before,
                derived,
                eq,
                "sync-arc rewrite is not behaviour-preserving; aborted",
            )

    # same-side repair: lanes rebuilt from the colour sides
    pos = diagram.position_map()
    by_layer: dict[int, list[str]] = {}
    for node, (lyr, _) in pos.items():
        by_layer.setdefault(lyr, []).append(node)
    repaired_positions = _assign_lanes(
        by_layer, diagram.colour_map(), diagram.colour_order
    )
    candidate = diagram.with_positions(repaired_positions)

    orderings = _barycentre_orderings(candidate)
    swept = candidate.with_positions(
        _assign_lanes(by_layer, diagram.colour_map(), diagram.colour_order, orderings)
    )
    if count_crossings(swept) <= count_crossings(candidate):
        candidate = swept

    candidate = group_counters(net, candidate)
    after = readability(candidate, weights)
    if after.composite > before.composite:
        return OptimizeResult(diagram, before, before, derived, eq, "no improvement")
    return OptimizeResult(candidate, before, after, derived, eq)


# -- rendering --------------------------------------------------------------------


_PALETTE = ("forestgreen", "firebrick", "royalblue", "darkorange", "purple", "teal")


def _tag_colour(diagram, tag):
    if tag is None:
        return None
    try:
        return _PALETTE[diagram.colour_order.index(tag) % len(_PALETTE)]
    except ValueError:
        return None


def _quote(text):
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def render_dot(diagram):
    """Deterministic DOT text: places as ellipses, transitions as boxes,
    counter clusters as subgraph clusters; byte-stable for equal diagrams."""
    pos = diagram.position_map()
    kinds = diagram.kind_map()
    colour_map = diagram.colour_map()
    clustered = {n for _, members in diagram.clusters for n in members}

    def node_line(node, indent="  "):
        layer, lane = pos[node]
        shape = "ellipse" if kinds.get(node) == "place" else "box"
        attrs = [f"shape={shape}", f'pos="{lane},{-layer}!"']
        colour = _tag_colour(diagram, colour_map.get(node))
        if colour:
            attrs.append(f"color={colour}")
        return f"{indent}{_quote(node)} [{', '.join(attrs)}];"

    lines = ["digraph net {", "  rankdir=TB;"]
    for counter, members in diagram.clusters:
        lines.append(f"  subgraph cluster_{counter} {{")
        lines.append(f"    label={_quote(counter)};")
        lines.append("    style=rounded;")
        for node in members:
            if node in pos:
                lines.append(node_line(node, "    "))
        lines.append("  }")
    for node in sorted(pos):
        if node not in clustered:
            lines.append(node_line(node))
    for arc in sorted(diagram.arcs, key=lambda a: a.key):
        attrs = []
        tag = colour_map.get(arc.src) or colour_map.get(arc.dst)
        colour = _tag_colour(diagram, tag)
        if colour:
            attrs.append(f"color={colour}")
        suffix = f" [{', '.join(attrs)}]" if attrs else ""
        lines.append(f"  {_quote(arc.src)} -> {_quote(arc.dst)}{suffix};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def render_svg(diagram, scale=60):
    """Minimal SVG derived from the same positions as the DOT output."""
    pos = diagram.position_map()
    kinds = diagram.kind_map()
    colour_map = diagram.colour_map()
    if pos:
        min_lane = min(lane for _, lane in pos.values())
        max_lane = max(lane for _, lane in pos.values())
        max_layer = max(layer for layer, _ in pos.values())
    else:
        min_lane = max_lane = max_layer = 0
    width = (max_lane - min_lane + 2) * scale
    height = (max_layer + 2) * scale

    def xy(node):
        layer, lane = pos[node]
        return ((lane - min_lane + 1) * scale, (layer + 1) * scale)

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">'
    ]
    for arc in sorted(diagram.arcs, key=lambda a: a.key):
        (x1, y1), (x2, y2) = xy(arc.src), xy(arc.dst)
        colour = _tag_colour(diagram, colour_map.get(arc.src) or colour_map.get(arc.dst))
        stroke = colour or "black"
        lines.append(
            f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" stroke="{stroke}" />'
        )
    for node in sorted(pos):
        x, y = xy(node)
        colour = _tag_colour(diagram, colour_map.get(node)) or "black"
        if kinds.get(node) == "place":
            lines.append(
                f'<ellipse cx="{x}" cy="{y}" rx="24" ry="14" fill="white" '
                f'stroke="{colour}" />'
            )
        else:
            lines.append(
                f'<rect x="{x - 24}" y="{y - 12}" width="48" height="24" '
                f'fill="white" stroke="{colour}" />'
            )
        lines.append(
            f'<text x="{x}" y="{y + 4}" font-size="9" text-anchor="middle">'
            f"{node}</text>"
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
