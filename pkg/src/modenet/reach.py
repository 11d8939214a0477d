"""Bounded explicit-state exploration, graph equivalence, counter expansion.

Reachability graphs are rooted, edge-labelled digraphs over canonical
markings.  Equivalence between two nets means their graphs are isomorphic
with matching transition labels, except that edges fired by pure
counter-synchronisation transitions (sync_role set) match one another
regardless of name.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field, replace

from .cpn import (
    COUNTER,
    Arc,
    ColourSet,
    ColouredNet,
    NetError,
    Place,
    Transition,
    enabled_bindings,
    fire,
    validate_net,
)
from .expr import parse_expr, render_expr, subst_expr

__all__ = [
    "Limits",
    "ReachGraph",
    "Edge",
    "reachability_graph",
    "BoundError",
    "EquivalenceResult",
    "equivalent",
    "expand_counters",
    "SYNC_LABEL",
]

SYNC_LABEL = "⚓sync"  # wildcard label for counter-synchronisation edges


class BoundError(ValueError):
    """Exploration hit its limits where a complete graph was required."""


@dataclass(frozen=True)
class Limits:
    max_nodes: int = 10_000
    max_depth: int | None = None

    def __post_init__(self):
        if self.max_nodes < 1:
            raise ValueError("max_nodes must be >= 1")


@dataclass(frozen=True)
class Edge:
    src: int
    transition: str
    binding: tuple
    dst: int


@dataclass
class ReachGraph:
    net: ColouredNet
    nodes: list
    edges: list
    truncated: bool
    limits: Limits
    out: dict = field(default_factory=dict)

    def labelled_edges(self):
        """(src, label, dst) triples with sync transitions collapsed to a marker."""
        out = []
        for e in self.edges:
            t = self.net.transition_map[e.transition]
            label = SYNC_LABEL if t.sync_role is not None else t.display_label
            out.append((e.src, label, e.dst))
        return out

    @property
    def node_count(self):
        return len(self.nodes)

    @property
    def edge_count(self):
        return len(self.edges)


def reachability_graph(net, limits=Limits()):
    """BFS over enabled bindings from the initial marking, up to `limits`."""
    root = net.initial_marking()
    nodes = [root]
    index = {root: 0}
    edges = []
    out: dict[int, list[int]] = {0: []}
    queue = deque([(0, 0)])
    truncated = False
    while queue:
        node_id, depth = queue.popleft()
        if limits.max_depth is not None and depth >= limits.max_depth:
            truncated = True
            continue
        marking = nodes[node_id]
        for binding in enabled_bindings(net, marking):
            successor = fire(net, marking, binding)
            dst = index.get(successor)
            if dst is None:
                if len(nodes) >= limits.max_nodes:
                    truncated = True
                    continue
                dst = len(nodes)
                nodes.append(successor)
                index[successor] = dst
                out[dst] = []
                queue.append((dst, depth + 1))
            edges.append(Edge(node_id, binding.transition, binding.values, dst))
            out[node_id].append(len(edges) - 1)
    return ReachGraph(net, nodes, edges, truncated, limits, out)


# -- labelled rooted digraph isomorphism ---------------------------------------


def _adjacency(graph):
    n = graph.node_count
    out = [[] for _ in range(n)]
    into = [[] for _ in range(n)]
    for src, label, dst in graph.labelled_edges():
        out[src].append((label, dst))
        into[dst].append((label, src))
    for lst in out:
        lst.sort()
    for lst in into:
        lst.sort()
    return out, into


def _signatures(out, into, rounds=4):
    n = len(out)
    sig = [0] * n
    for _ in range(rounds):
        table = {}
        fresh = []
        for v in range(n):
            key = (
                sig[v],
                tuple(sorted((label, sig[d]) for label, d in out[v])),
                tuple(sorted((label, sig[s]) for label, s in into[v])),
            )
            fresh.append(table.setdefault(key, len(table)))
        sig = fresh
    return sig


def _isomorphic_rooted(g1, g2):
    if g1.node_count != g2.node_count or g1.edge_count != g2.edge_count:
        return False
    out1, in1 = _adjacency(g1)
    out2, in2 = _adjacency(g2)
    sig1 = _signatures(out1, in1)
    sig2 = _signatures(out2, in2)
    if sorted(sig1) != sorted(sig2):
        return False
    if sig1[0] != sig2[0]:
        return False
    n = g1.node_count
    mapping = [-1] * n
    reverse = [-1] * n

    def labels_multiset(adj, v):
        return tuple(sorted(label for label, _ in adj[v]))

    def try_map(a, b):
        if mapping[a] == b:
            return True
        if mapping[a] != -1 or reverse[b] != -1:
            return False
        if sig1[a] != sig2[b]:
            return False
        if labels_multiset(out1, a) != labels_multiset(out2, b):
            return False
        if labels_multiset(in1, a) != labels_multiset(in2, b):
            return False
        mapping[a] = b
        reverse[b] = a
        # group successors by label; within a label group, match by backtracking
        groups1: dict[str, list[int]] = {}
        for label, d in out1[a]:
            groups1.setdefault(label, []).append(d)
        groups2: dict[str, list[int]] = {}
        for label, d in out2[b]:
            groups2.setdefault(label, []).append(d)
        for label, dests1 in groups1.items():
            dests2 = groups2.get(label, [])
            if len(dests1) != len(dests2):
                mapping[a] = -1
                reverse[b] = -1
                return False
            if not _match_group(dests1, dests2):
                mapping[a] = -1
                reverse[b] = -1
                return False
        return True

    def _match_group(dests1, dests2):
        if not dests1:
            return True
        d1, rest1 = dests1[0], dests1[1:]
        for i, d2 in enumerate(dests2):
            saved_map = mapping.copy()
            saved_rev = reverse.copy()
            if try_map(d1, d2) and _match_group(rest1, dests2[:i] + dests2[i + 1 :]):
                return True
            mapping[:] = saved_map
            reverse[:] = saved_rev
        return False

    if not try_map(0, 0):
        return False
    # unreachable-from-root remainder (should not exist for reach graphs)
    return all(m != -1 for m in mapping)


def _distinguishing_trace(g1, g2, max_depth=64):
    """Shortest label path after which the determinized graphs disagree."""
    out1, _ = _adjacency(g1)
    out2, _ = _adjacency(g2)

    def step(adj, states, label):
        nxt = set()
        for s in states:
            for lab, d in adj[s]:
                if lab == label:
                    nxt.add(d)
        return frozenset(nxt)

    def menu(adj, states):
        return frozenset(lab for s in states for lab, _ in adj[s])

    start = (frozenset((0,)), frozenset((0,)))
    seen = {start}
    queue = deque([(start, [])])
    while queue:
        (s1, s2), path = queue.popleft()
        m1, m2 = menu(out1, s1), menu(out2, s2)
        if m1 != m2:
            difference = sorted(m1.symmetric_difference(m2))[0]
            return path + [difference]
        if len(path) >= max_depth:
            continue
        for label in sorted(m1):
            nxt = (step(out1, s1, label), step(out2, s2, label))
            if nxt not in seen:
                seen.add(nxt)
                queue.append((nxt, path + [label]))
    return None


@dataclass(frozen=True)
class EquivalenceResult:
    equal: bool
    witness: tuple | None = None
    reason: str = ""

    def __bool__(self):
        return self.equal


def equivalent(a, b, limits=Limits()):
    """Bounded-graph equality of two nets (rooted labelled isomorphism).

    Raises BoundError when either exploration was truncated.  On inequality
    the witness is a distinguishing label path when one exists.
    """
    ga = reachability_graph(a, limits)
    gb = reachability_graph(b, limits)
    if ga.truncated or gb.truncated:
        raise BoundError("bound too small: exploration truncated")
    if _isomorphic_rooted(ga, gb):
        return EquivalenceResult(True)
    witness = _distinguishing_trace(ga, gb)
    if witness is not None:
        return EquivalenceResult(
            False, tuple(witness), "behaviour differs after the witness path"
        )
    reason = (
        f"graphs differ structurally "
        f"({ga.node_count} vs {gb.node_count} nodes, "
        f"{ga.edge_count} vs {gb.edge_count} edges)"
    )
    return EquivalenceResult(False, None, reason)


# -- counter expansion ----------------------------------------------------------


_STEP_VALUE = "o"


def _counter_place(counter, value):
    return f"{counter.name}={value}"


def expand_counters(net):
    """Unfold every bounded counter into value places and transition variants.

    The result has no counter variables; each original transition touching a
    counter becomes one variant per feasible counter value (guards get the
    value substituted in, increments move the value token).  Variant labels
    keep the original name, so `equivalent(net, expand_counters(net))` holds.
    """
    violations = validate_net(net)
    if violations:
        raise NetError("net must validate before expansion: " + str(violations[0]))
    counters = net.counters
    if not counters:
        return net
    for c in counters:
        if c.bound is None:
            raise NetError(f"cannot expand: counter {c.name!r} has no bound")

    step_set_name = "CounterStep"
    existing = {cs.name for cs in net.colour_sets}
    while step_set_name in existing:
        step_set_name += "_"
    colour_sets = list(net.colour_sets) + [ColourSet(step_set_name, (_STEP_VALUE,))]

    places = list(net.places)
    initial_store = {v.name: v.init for v in net.variables}
    for c in counters:
        for value in range(c.bound + 1):
            places.append(
                Place(
                    name=_counter_place(c, value),
                    colour=step_set_name,
                    component=c.scope or "net",
                    capacity=1,
                    init=(_STEP_VALUE,) if initial_store[c.name] == value else (),
                )
            )

    counter_names = {c.name: c for c in counters}
    transitions = []
    for t in net.transitions:
        touched = sorted(
            name for name in t.referenced_names() if name in counter_names
        )
        if not touched:
            transitions.append(t)
            continue
        increments = {}
        kept_assignments = []
        for target, rhs in t.assignments:
            if target in counter_names:
                increments[target] = rhs
            else:
                kept_assignments.append((target, rhs))
        domains = []
        for name in touched:
            bound = counter_names[name].bound
            inc = increments.get(name)
            if inc is None:
                domains.append(range(bound + 1))
            else:
                # increments are `name + k`; variants exist while the bound holds
                k = _increment_of(inc, name)
                domains.append(range(0, bound - k + 1))
        for combo in itertools.product(*domains):
            values = dict(zip(touched, combo))
            substitution = {name: ("int", v) for name, v in values.items()}
            guard_ast = subst_expr(t.guard.ast, substitution)
            substituted_assignments = tuple(
                (target, subst_expr(rhs, substitution))
                for target, rhs in kept_assignments
            )
            inputs = list(t.inputs)
            outputs = list(t.outputs)
            for name in touched:
                c = counter_names[name]
                value = values[name]
                inc = increments.get(name)
                src = Arc.of(_counter_place(c, value), _STEP_VALUE)
                inputs.append(src)
                if inc is None:
                    outputs.append(src)  # pure read
                else:
                    k = _increment_of(inc, name)
                    outputs.append(Arc.of(_counter_place(c, value + k), _STEP_VALUE))
            suffix = ",".join(f"{n}={values[n]}" for n in touched)
            transitions.append(
                replace(
                    t,
                    name=f"{t.name}#{suffix}",
                    label=t.display_label,
                    guard=_guard_from_ast(guard_ast),
                    inputs=tuple(inputs),
                    outputs=tuple(outputs),
                    assignments=substituted_assignments,
                )
            )

    variables = tuple(v for v in net.variables if v.kind != COUNTER)
    return ColouredNet.build(
        f"{net.name}+expanded", colour_sets, places, transitions, variables
    )


def _increment_of(rhs, name):
    ast = rhs
    if ast[0] == "add":
        left, right = ast[1], ast[2]
        if left == ("name", name) and right[0] == "int":
            return right[1]
        if right == ("name", name) and left[0] == "int":
            return left[1]
    raise NetError(f"counter update on {name!r} is not an increment")


def _guard_from_ast(ast):
    from .cpn import Guard

    return Guard(render_expr(ast), ast)


def group_sync_transitions(net):
    """Derived net where counter-sync transitions are folded into group labels.

    The rewrite is name-level only (arcs untouched), so the derived net is
    semantically identical; callers verify with `equivalent`.
    """
    transitions = []
    for t in net.transitions:
        if t.sync_role is not None:
            transitions.append(
                replace(t, name=f"{t.sync_role}.group.{t.name}", label=None)
            )
        else:
            transitions.append(t)
    return ColouredNet.build(
        f"{net.name}+grouped", net.colour_sets, net.places, transitions, net.variables
    )
