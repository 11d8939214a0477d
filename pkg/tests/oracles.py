"""Independent oracles the test-suite checks the implementation against.

Each function recomputes a result through a different route than the library
(tick simulation instead of event scheduling, plain backtracking instead of
signature-pruned search, orientation tests instead of parametric solving).
"""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from modenet.cpn import (
    Arc,
    ColourSet,
    ColouredNet,
    Guard,
    Place,
    Transition,
    Variable,
    enabled_bindings,
    fire,
)


# -- naive reachability enumerator ------------------------------------------------


def enumerate_markings(net, limit=100_000):
    """DFS set enumeration of reachable markings and labelled edges."""
    root = net.initial_marking()
    seen = {root}
    edges = []
    stack = [root]
    while stack:
        marking = stack.pop()
        for binding in enabled_bindings(net, marking):
            nxt = fire(net, marking, binding)
            edges.append((marking, binding.transition, nxt))
            if nxt not in seen:
                if len(seen) >= limit:
                    raise RuntimeError("oracle enumeration limit hit")
                seen.add(nxt)
                stack.append(nxt)
    return seen, edges


# -- brute-force labelled rooted-graph isomorphism ----------------------------------


def naive_isomorphic(adj1, adj2):
    """Backtracking matcher over adjacency lists [(label, dst)...], root 0.

    Purely functional state (copied maps), no pruning beyond label multisets;
    meant for small graphs only.
    """
    if len(adj1) != len(adj2):
        return False

    def walk(mapping, reverse, queue):
        if not queue:
            return len(mapping) == len(adj1)
        (a, b), rest = queue[0], queue[1:]
        if a in mapping:
            return mapping[a] == b and walk(mapping, reverse, rest)
        if b in reverse:
            return False
        if sorted(l for l, _ in adj1[a]) != sorted(l for l, _ in adj2[b]):
            return False
        extended = dict(mapping)
        extended[a] = b
        rev = dict(reverse)
        rev[b] = a
        groups1: dict[str, list[int]] = {}
        for label, dst in adj1[a]:
            groups1.setdefault(label, []).append(dst)
        groups2: dict[str, list[int]] = {}
        for label, dst in adj2[b]:
            groups2.setdefault(label, []).append(dst)

        def try_groups(labels, paired):
            if not labels:
                return walk(extended, rev, rest + paired)
            label = labels[0]
            for perm in itertools.permutations(groups2[label]):
                if try_groups(labels[1:], paired + list(zip(groups1[label], perm))):
                    return True
            return False

        return try_groups(sorted(groups1), [])

    if not adj1:
        return True
    return walk({}, {}, [(0, 0)])


def graph_adjacency(graph):
    """Adjacency lists [(label, dst)...] from a ReachGraph."""
    adj = [[] for _ in range(graph.node_count)]
    for src, label, dst in graph.labelled_edges():
        adj[src].append((label, dst))
    for lst in adj:
        lst.sort()
    return adj


# -- segment crossing oracle ---------------------------------------------------------


def crossings_oracle(diagram):
    """Orientation-test counting of strict proper intersections."""

    def ccw(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    routes = diagram.routes()
    count = 0
    for i in range(len(routes)):
        arc_i, (p1, p2) = routes[i]
        for j in range(i + 1, len(routes)):
            arc_j, (p3, p4) = routes[j]
            if {arc_i.src, arc_i.dst} & {arc_j.src, arc_j.dst}:
                continue
            d1 = ccw(p1, p2, p3)
            d2 = ccw(p1, p2, p4)
            d3 = ccw(p3, p4, p1)
            d4 = ccw(p3, p4, p2)
            if 0 in (d1, d2, d3, d4):
                continue  # touching or collinear is not a proper crossing
            if (d1 > 0) != (d2 > 0) and (d3 > 0) != (d4 > 0):
                count += 1
    return count


# -- burst feasibility: tick-by-tick discrete simulation -----------------------------


def burst_oracle(cfg, max_frames=20):
    """First delayed frame among the first `max_frames`, else None."""
    shoot, store, cap = cfg.shoot_period, cfg.store_period, cfg.buffer_capacity
    t = 0
    buffered = 0
    storing_until = None
    next_desired = 0
    shot = 0
    while shot < max_frames:
        if storing_until is not None and t == storing_until:
            buffered -= 1
            storing_until = None
        if storing_until is None and buffered > 0:
            storing_until = t + store
        if t >= next_desired and buffered < cap:
            if t > next_desired:
                return shot
            buffered += 1
            if storing_until is None:
                storing_until = t + store
            shot += 1
            next_desired = t + shoot
        t += 1
    return None


# -- exhaustive deployment search ---------------------------------------------------


def assignment_oracle(ops, matrix, profile, objective, context_mode=None):
    """Minimum objective value over every feasible assignment."""
    ops = tuple(sorted(ops))
    domains = []
    for op in ops:
        targets = [
            t
            for t in matrix.allowed(op)
            if not (context_mode == "IDLE" and t == "DSP")
        ]
        if not targets:
            return None
        domains.append(targets)
    best = None
    for combo in itertools.product(*domains):
        total = 0
        for op, target in zip(ops, combo):
            entry = profile.entry(op, target)
            total += entry.wcet if objective == "min-worst-time" else entry.wcec
        if best is None or total < best:
            best = total
    return best


# -- expected-cost: memoized trace-tree enumeration ----------------------------------


def _oracle_net_consumed(net, transition):
    t = net.transition_map[transition]
    balance: dict[str, int] = {}
    for arc in t.inputs:
        balance[arc.place] = balance.get(arc.place, 0) + sum(m for m, _ in arc.terms)
    for arc in t.outputs:
        balance[arc.place] = balance.get(arc.place, 0) - sum(m for m, _ in arc.terms)
    return frozenset(p for p, v in balance.items() if v > 0)


def expectation_oracle(net, assignment, profile, horizon):
    """(expected time, expected energy) by direct recursion over markings."""

    def distribution(marking):
        options = enabled_bindings(net, marking)
        if not options:
            return ()
        consumed = [_oracle_net_consumed(net, b.transition) for b in options]
        cluster_of = list(range(len(options)))
        for i in range(len(options)):
            for j in range(len(options)):
                if consumed[i] & consumed[j]:
                    target = min(cluster_of[i], cluster_of[j])
                    source = max(cluster_of[i], cluster_of[j])
                    cluster_of = [target if c == source else c for c in cluster_of]
        clusters: dict[int, list[int]] = {}
        for i, c in enumerate(cluster_of):
            clusters.setdefault(c, []).append(i)
        out = []
        share = Fraction(1, len(clusters))
        for members in clusters.values():
            names = {options[i].transition for i in members}
            if len(names) > 1:
                probs = {n: net.transition_map[n].probability for n in names}
                total = sum(probs.values())
                for i in members:
                    name = options[i].transition
                    siblings = sum(
                        1 for k in members if options[k].transition == name
                    )
                    out.append((options[i], share * probs[name] / total / siblings))
            else:
                for i in members:
                    out.append((options[i], share / len(members)))
        return tuple(out)

    memo = {}

    def rec(marking, depth):
        if depth == 0:
            return (0.0, 0.0)
        key = (marking, depth)
        if key in memo:
            return memo[key]
        total_t = total_e = 0.0
        for binding, p in distribution(marking):
            t = net.transition_map[binding.transition]
            entry = profile.entry(t.op, assignment.target_of(t.op))
            rt, re_ = rec(fire(net, marking, binding), depth - 1)
            total_t += float(p) * (entry.acet + rt)
            total_e += float(p) * (entry.acec + re_)
        memo[key] = (total_t, total_e)
        return memo[key]

    return rec(net.initial_marking(), horizon)


# -- random generators ----------------------------------------------------------------


def random_counter_net(seed):
    """Small valid ring net with one or two bounded counters."""
    rng = random.Random(seed)
    unit = ColourSet("U", ("u",))
    n = rng.randint(2, 4)
    places = [
        Place(f"p{i}", "U", "main", init=("u",) if i == 0 else ())
        for i in range(n)
    ]
    n_counters = rng.randint(1, 2)
    variables = [
        Variable(f"c{k}", "counter", scope="main", bound=rng.randint(1, 3), init=0)
        for k in range(n_counters)
    ]
    transitions = []
    for i in range(n):
        assignments = ()
        guard = Guard.true()
        counter = variables[rng.randrange(n_counters)].name
        roll = rng.random()
        if roll < 0.5:
            step = rng.randint(1, 2)
            assignments = ((counter, ("add", ("name", counter), ("int", step))),)
        elif roll < 0.8:
            limit = rng.randint(0, 3)
            op = rng.choice(["<=", "<", "=="])
            guard = Guard.of(f"{counter} {op} {limit}")
        transitions.append(
            Transition(
                f"t{i}",
                "main",
                inputs=(Arc.of(f"p{i}", "u"),),
                outputs=(Arc.of(f"p{(i + 1) % n}", "u"),),
                guard=guard,
                assignments=assignments,
            )
        )
    if rng.random() < 0.5:
        # add a branching consumer to get genuine choice in the graph
        transitions.append(
            Transition(
                "t_branch",
                "main",
                inputs=(Arc.of("p0", "u"),),
                outputs=(Arc.of(f"p{n - 1}", "u"),),
            )
        )
    return ColouredNet.build(f"rnd{seed}", [unit], places, transitions, variables)


def random_diagram(seed, max_nodes=40):
    """Random integer-coordinate diagram for crossing-count checks."""
    from modenet.layout import Diagram, DiagramArc

    rng = random.Random(seed)
    n = rng.randint(4, max_nodes)
    positions = {}
    for i in range(n):
        positions[f"n{i}"] = (rng.randint(0, 12), rng.randint(-6, 6))
    arcs = []
    n_arcs = rng.randint(3, min(100, 2 * n))
    for k in range(n_arcs):
        a, b = rng.sample(range(n), 2)
        arcs.append(DiagramArc(f"n{a}", f"n{b}", ("e", k)))
    kinds = tuple((f"n{i}", "place") for i in range(n))
    return Diagram(
        positions=tuple(sorted(positions.items())),
        arcs=tuple(arcs),
        kinds=kinds,
        colours=(),
        colour_order=(),
    )


def random_model_doc(seed):
    """Random but structurally valid document touching every section kind."""
    from fractions import Fraction as F

    from modenet.budget import (
        BudgetConfig,
        DeploymentMatrix,
        ProfileEntry,
        ResourceProfile,
    )
    from modenet.modelfile import ModelDoc
    from modenet.modes import Mode, ModeAutomaton, ModeTransition

    rng = random.Random(seed)
    colour = ColourSet("Col", tuple(f"v{i}" for i in range(rng.randint(1, 3))))
    n_places = rng.randint(1, 4)
    places = []
    for i in range(n_places):
        init_count = rng.randint(0, 2)
        capacity = rng.choice([None, max(2, init_count)])
        places.append(
            Place(
                f"place {i}" if rng.random() < 0.3 else f"p{i}",
                "Col",
                rng.choice(["main", "aux"]),
                capacity=capacity,
                init=tuple(rng.choice(colour.values) for _ in range(init_count)),
            )
        )
    variables = []
    if rng.random() < 0.6:
        variables.append(
            Variable("cnt", "counter", scope="main", bound=rng.randint(1, 4), init=0)
        )
    if rng.random() < 0.4:
        variables.append(
            Variable("param", "global", colour="Col", init=rng.choice(colour.values))
        )
    if rng.random() < 0.3:
        variables.append(Variable("clk", "clock", bound=rng.randint(2, 9), init=0))
    transitions = []
    for i in range(rng.randint(0, 3)):
        src = rng.choice(places)
        dst = rng.choice(places)
        guard = Guard.true()
        if any(v.name == "cnt" for v in variables) and rng.random() < 0.5:
            guard = Guard.of(f"cnt <= {rng.randint(0, 3)}")
        assignments = ()
        if any(v.name == "cnt" for v in variables) and rng.random() < 0.5:
            assignments = (("cnt", ("add", ("name", "cnt"), ("int", 1))),)
        transitions.append(
            Transition(
                f"t{i}" if rng.random() < 0.7 else f"do T{i}",
                "main",
                inputs=(Arc.of(src.name, rng.choice(colour.values)),),
                outputs=(Arc.of(dst.name, rng.choice(colour.values)),),
                guard=guard,
                assignments=assignments,
                probability=rng.choice([None, F(1, 2), F(9, 10)]),
                sync_role="cnt" if rng.random() < 0.2 and variables else None,
                operation=rng.choice([None, "OP"]),
                label=rng.choice([None, "shared"]),
            )
        )
    net = ColouredNet.build(f"net{seed}", [colour], places, transitions, variables)

    automata = ()
    if rng.random() < 0.7:
        leaves = tuple(Mode(f"m{i}") for i in range(rng.randint(1, 3)))
        root = Mode("machine", children=leaves, initial=leaves[0].name)
        events = ("go", "stop")
        mode_transitions = []
        for _ in range(rng.randint(0, 3)):
            a, b = rng.choice(leaves).name, rng.choice(leaves).name
            mode_transitions.append(
                ModeTransition(a, rng.choice(events), b, probability=None)
            )
        auto = ModeAutomaton(root, events, tuple(mode_transitions))
        automata = (("machine", auto),)

    matrix = None
    profile = None
    if rng.random() < 0.5:
        _, matrix, profile = random_ops_matrix_profile(seed + 1000, max_ops=3)
    config = None
    if rng.random() < 0.5:
        config = BudgetConfig(
            buffer_capacity=rng.randint(1, 6),
            card_size=rng.randint(100, 2000),
            image_size=rng.randint(1, 60),
            compression=F(rng.randint(1, 4), 4),
            shoot_period=rng.randint(1, 30),
            store_period=rng.randint(1, 60),
        )
    return ModelDoc(
        nets=((net.name, net),),
        automata=automata,
        matrix=matrix,
        profile=profile,
        config=config,
    )


def random_ops_matrix_profile(seed, max_ops=8, idle_safe=False):
    """Random operations, allowed-target rows and a consistent profile."""
    from modenet.budget import DeploymentMatrix, ProfileEntry, ResourceProfile

    rng = random.Random(seed)
    ops = [f"op{i}" for i in range(rng.randint(1, max_ops))]
    rows = {}
    entries = {}
    for op in ops:
        pool = ["GPP", "DSP", "Motors"]
        count = rng.randint(1, 3)
        targets = rng.sample(pool, count)
        if idle_safe and all(t == "DSP" for t in targets):
            targets.append("GPP")
        rows[op] = tuple(targets)
        for target in rows[op]:
            b = rng.randint(1, 20)
            a = b + rng.randint(0, 10)
            w = a + rng.randint(0, 10)
            eb = rng.randint(1, 20)
            ea = eb + rng.randint(0, 10)
            ew = ea + rng.randint(0, 10)
            entries[(op, target)] = ProfileEntry(b, a, w, eb, ea, ew)
    return ops, DeploymentMatrix.of(rows), ResourceProfile.of(entries)
