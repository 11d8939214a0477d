"""Hierarchical mode automata, lock-step parallel product, net refinements.

Automata are immutable; a ModeConfig tracks the single active leaf plus the
run-to-completion queue of in-flight operations, which drain before any
mode-exit transition fires.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction

from .cpn import ColouredNet
from .expr import eval_expr

__all__ = [
    "ModeError",
    "Mode",
    "ModeTransition",
    "ModeAutomaton",
    "ModeConfig",
    "ProductAutomaton",
    "step",
    "flatten",
    "parallel_product",
    "hierarchical_parallel_equivalent",
    "refine",
    "default_selector",
    "reachable_mode_graph",
]


class ModeError(ValueError):
    pass


@dataclass(frozen=True)
class Mode:
    """Tree node; a leaf when `children` is empty.  Leaf names must be unique
    across the whole tree (they identify automaton states)."""

    name: str
    children: tuple["Mode", ...] = ()
    initial: str | None = None
    refinement: ColouredNet | None = None

    def __post_init__(self):
        names = [c.name for c in self.children]
        if len(set(names)) != len(names):
            raise ModeError(f"mode {self.name!r}: duplicate child names")
        if self.children and self.initial is not None and self.initial not in names:
            raise ModeError(f"mode {self.name!r}: initial child {self.initial!r} missing")

    @property
    def is_leaf(self):
        return not self.children

    def child(self, name):
        for c in self.children:
            if c.name == name:
                return c
        raise ModeError(f"mode {self.name!r} has no child {name!r}")

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def leaves(self):
        return tuple(m.name for m in self.walk() if m.is_leaf)

    def initial_leaf(self):
        """Transitive initial descendant; errors on a composite without one."""
        node = self
        while not node.is_leaf:
            if node.initial is None:
                raise ModeError(f"mode {node.name!r}: no initial child")
            node = node.child(node.initial)
        return node.name


@dataclass(frozen=True)
class ModeTransition:
    source: str
    event: str
    target: str
    guard: tuple | None = None  # expression AST over net-wide parameters
    probability: Fraction | None = None

    def __post_init__(self):
        if self.probability is not None:
            p = Fraction(self.probability)
            if not (0 < p <= 1):
                raise ModeError("transition probability outside (0, 1]")
            object.__setattr__(self, "probability", p)


@dataclass(frozen=True)
class ModeAutomaton:
    """Mode tree plus leaf-to-leaf transition relation.

    Transitions may name composite modes; `flatten` resolves them to leaves.
    `entry_assigns` lists net-wide parameter re-assignments applied when a
    mode is entered (the only place parameters may change).
    """

    root: Mode
    events: tuple[str, ...]
    transitions: tuple[ModeTransition, ...]
    entry_assigns: tuple[tuple[str, str, int | str], ...] = ()  # (mode, var, value)

    def __post_init__(self):
        leaf_names = self.root.leaves()
        if len(set(leaf_names)) != len(leaf_names):
            raise ModeError("leaf names must be unique across the tree")
        known = {m.name for m in self.root.walk()}
        for t in self.transitions:
            if t.event not in self.events:
                raise ModeError(f"transition event {t.event!r} not in alphabet")
            if t.source not in known or t.target not in known:
                raise ModeError(
                    f"transition {t.source!r} -{t.event}-> {t.target!r} "
                    f"references unknown modes"
                )
        self._check_probability_sums()

    def _check_probability_sums(self):
        groups: dict[tuple[str, str], list[Fraction | None]] = {}
        for t in self.transitions:
            groups.setdefault((t.source, t.event), []).append(t.probability)
        for (source, event), probs in groups.items():
            stated = [p for p in probs if p is not None]
            if stated and len(stated) == len(probs) and len(probs) > 1:
                if sum(stated) != 1:
                    raise ModeError(
                        f"probabilities for ({source!r}, {event!r}) sum to "
                        f"{sum(stated)}, expected 1"
                    )

    @property
    def leaves(self):
        return self.root.leaves()

    def initial_config(self):
        return ModeConfig(self.root.initial_leaf())

    def mode(self, name):
        for m in self.root.walk():
            if m.name == name:
                return m
        raise ModeError(f"unknown mode {name!r}")

    def outgoing(self, leaf, event):
        return tuple(
            t for t in self.transitions if t.source == leaf and t.event == event
        )

    def entry_assignments_for(self, mode_name):
        """Assignments along the entry path mode -> transitive initial leaf."""
        path = []
        node = self.mode(mode_name)
        path.append(node.name)
        while not node.is_leaf:
            if node.initial is None:
                raise ModeError(f"mode {node.name!r}: no initial child")
            node = node.child(node.initial)
            path.append(node.name)
        out = []
        for mode in path:
            for m, var, value in self.entry_assigns:
                if m == mode:
                    out.append((var, value))
        return tuple(out)


@dataclass(frozen=True)
class ModeConfig:
    active: str
    pending: tuple[str, ...] = ()

    def with_pending(self, ops):
        return replace(self, pending=self.pending + tuple(ops))


def default_selector(alternatives):
    """Highest stated probability; ties (and absent probabilities) fall back to
    target name order."""
    return min(
        alternatives,
        key=lambda t: (-(t.probability if t.probability is not None else 0), t.target),
    )


def step(auto, cfg, event, selector=None, env=None):
    """Run-to-completion step.  Unknown-source events leave the config as is;
    events outside the alphabet are errors."""
    if event not in auto.events:
        raise ModeError(f"unknown event {event!r}")
    candidates = [
        t
        for t in auto.outgoing(cfg.active, event)
        if t.guard is None or eval_expr(t.guard, env or {}) is True
    ]
    if not candidates:
        return cfg
    chosen = (selector or default_selector)(candidates)
    pending = cfg.pending
    if chosen.target != chosen.source and pending:
        pending = ()  # in-flight operations complete before the mode exits
    target_leaf = auto.mode(chosen.target).initial_leaf()
    return ModeConfig(target_leaf, pending)


def flatten(auto):
    """Leaf-level automaton: composite sources fan out to descendant leaves,
    composite targets resolve to their transitive initial leaf."""
    root = auto.root
    by_name = {m.name: m for m in root.walk()}
    flat_transitions = []
    for t in auto.transitions:
        src_mode = by_name[t.source]
        sources = src_mode.leaves() if not src_mode.is_leaf else (t.source,)
        target = by_name[t.target].initial_leaf()
        for source in sources:
            flat_transitions.append(replace(t, source=source, target=target))
    flat_root = Mode(
        name=root.name,
        children=tuple(Mode(name) for name in root.leaves()),
        initial=None,
    )
    flat_root = replace(flat_root, initial=root.initial_leaf())
    entry = tuple(
        (mode, var, value)
        for mode, var, value in auto.entry_assigns
        if mode in root.leaves()
    )
    return ModeAutomaton(flat_root, auto.events, tuple(flat_transitions), entry)


PAIR_SEP = "|"


@dataclass(frozen=True)
class ProductAutomaton:
    """Lock-step product: shared events synchronise, local events interleave."""

    factors: tuple[ModeAutomaton, ...]
    shared: tuple[str, ...]
    automaton: ModeAutomaton

    @property
    def leaves(self):
        return self.automaton.leaves

    def initial_config(self):
        return self.automaton.initial_config()


def _combine_probability(pa, pb):
    if pa is None and pb is None:
        return None
    left = pa if pa is not None else Fraction(1)
    right = pb if pb is not None else Fraction(1)
    return left * right


def parallel_product(a, b):
    fa, fb = flatten(a), flatten(b)
    shared = tuple(sorted(set(fa.events) & set(fb.events)))
    events = tuple(sorted(set(fa.events) | set(fb.events)))
    pairs = [(la, lb) for la in fa.leaves for lb in fb.leaves]
    transitions = []
    for la, lb in pairs:
        source = f"{la}{PAIR_SEP}{lb}"
        for event in events:
            outs_a = fa.outgoing(la, event) if event in fa.events else ()
            outs_b = fb.outgoing(lb, event) if event in fb.events else ()
            if event in shared:
                # lock-step: both factors must participate
                for ta in outs_a:
                    for tb in outs_b:
                        transitions.append(
                            ModeTransition(
                                source,
                                event,
                                f"{ta.target}{PAIR_SEP}{tb.target}",
                                probability=_combine_probability(
                                    ta.probability, tb.probability
                                ),
                            )
                        )
            elif event in fa.events:
                for ta in outs_a:
                    transitions.append(
                        ModeTransition(
                            source,
                            event,
                            f"{ta.target}{PAIR_SEP}{lb}",
                            probability=ta.probability,
                        )
                    )
            else:
                for tb in outs_b:
                    transitions.append(
                        ModeTransition(
                            source,
                            event,
                            f"{la}{PAIR_SEP}{tb.target}",
                            probability=tb.probability,
                        )
                    )
    root = Mode(
        name=f"{fa.root.name}{PAIR_SEP}{fb.root.name}",
        children=tuple(Mode(f"{la}{PAIR_SEP}{lb}") for la, lb in pairs),
        initial=f"{fa.root.initial_leaf()}{PAIR_SEP}{fb.root.initial_leaf()}",
    )
    entry = []
    for mode, var, value in fa.entry_assigns:
        entry.extend((f"{mode}{PAIR_SEP}{lb}", var, value) for lb in fb.leaves)
    for mode, var, value in fb.entry_assigns:
        entry.extend((f"{la}{PAIR_SEP}{mode}", var, value) for la in fa.leaves)
    composed = ModeAutomaton(root, events, tuple(transitions), tuple(entry))
    return ProductAutomaton((a, b), shared, composed)


def reachable_mode_graph(auto, env=None):
    """(nodes, edges) reachable from the initial leaf; edges carry event and
    probability labels."""
    start = auto.root.initial_leaf()
    seen = {start}
    queue = [start]
    edges = set()
    while queue:
        leaf = queue.pop()
        for t in auto.transitions:
            if t.source != leaf:
                continue
            if t.guard is not None and eval_expr(t.guard, env or {}) is not True:
                continue
            edges.add((t.source, t.event, t.probability, t.target))
            if t.target not in seen:
                seen.add(t.target)
                queue.append(t.target)
    return frozenset(seen), frozenset(edges)


def default_pairing(leaf):
    """Hierarchical leaf "A.B" -> product leaf "A|B"."""
    if "." not in leaf:
        return leaf
    camera, auto = leaf.rsplit(".", 1)
    camera_leaf = camera.split(".")[-1]
    return f"{camera_leaf}{PAIR_SEP}{auto}"


def hierarchical_parallel_equivalent(h, p, pairing=default_pairing):
    """Compare reachable configuration graphs under an explicit node pairing.

    Returns (equal, witness); the witness names the first configuration or
    transition present on one side only.
    """
    nodes_h, edges_h = reachable_mode_graph(h)
    nodes_p, edges_p = reachable_mode_graph(p.automaton)
    mapped_nodes = {pairing(n) for n in nodes_h}
    if mapped_nodes != nodes_p:
        missing = sorted(mapped_nodes.symmetric_difference(nodes_p))
        return False, ("configuration", missing[0])
    mapped_edges = {
        (pairing(s), e, prob, pairing(d)) for s, e, prob, d in edges_h
    }
    if mapped_edges != edges_p:
        diff = sorted(
            mapped_edges.symmetric_difference(edges_p),
            key=lambda edge: (edge[0], edge[1], edge[3]),
        )
        return False, ("transition", diff[0])
    return True, None


def refine(auto, mode_name):
    """Net bound to a mode, with entry re-assignments folded into the initial
    variable store."""
    mode = auto.mode(mode_name)
    if mode.refinement is None:
        raise ModeError(f"unrefined mode {mode_name!r}")
    net = mode.refinement
    assigns = auto.entry_assignments_for(mode_name)
    if not assigns:
        return net
    variables = []
    for v in net.variables:
        value = None
        for var, val in assigns:
            if var == v.name:
                value = val
        variables.append(v if value is None else replace(v, init=value))
    return ColouredNet.build(
        net.name, net.colour_sets, net.places, net.transitions, variables
    )
