"""Timing/energy cost envelopes, deployment choice, probabilistic expectation.

Costs compose sequentially (no pipelining overlap), which over-approximates
any real schedule.  Units are abstract integers.  All functions are pure;
Monte Carlo sampling is driven by an explicit seed.
"""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass
from fractions import Fraction

from .reach import Limits, reachability_graph

__all__ = [
    "TARGETS",
    "BudgetError",
    "ProfileEntry",
    "ResourceProfile",
    "DeploymentMatrix",
    "DeploymentAssignment",
    "BudgetConfig",
    "CostEnvelope",
    "ExpectedCost",
    "deployment_options",
    "trace_cost",
    "expected_cost",
    "burst_feasibility",
    "max_frames",
    "optimize_assignment",
]

TARGETS = ("GPP", "DSP", "Motors")

IDLE_CONTEXT = "IDLE"


class BudgetError(ValueError):
    pass


def _check_target(target):
    if target not in TARGETS:
        raise BudgetError(f"unknown deployment target {target!r}")
    return target


@dataclass(frozen=True)
class ProfileEntry:
    """Best/average/worst execution time and energy for one (op, target)."""

    bcet: int
    acet: int
    wcet: int
    bcec: int
    acec: int
    wcec: int

    def __post_init__(self):
        if not (self.bcet <= self.acet <= self.wcet):
            raise BudgetError("time triple must satisfy bcet <= acet <= wcet")
        if not (self.bcec <= self.acec <= self.wcec):
            raise BudgetError("energy triple must satisfy bcec <= acec <= wcec")


@dataclass(frozen=True)
class ResourceProfile:
    entries: tuple[tuple[tuple[str, str], ProfileEntry], ...]

    @classmethod
    def of(cls, mapping):
        canon = tuple(sorted(((op, _check_target(tg)), e) for (op, tg), e in mapping.items()))
        return cls(canon)

    def entry(self, op, target):
        for key, entry in self.entries:
            if key == (op, target):
                return entry
        raise BudgetError(f"no profile entry for operation {op!r} on {target!r}")

    def has(self, op, target):
        return any(key == (op, target) for key, _ in self.entries)

    def operations(self):
        return tuple(sorted({op for (op, _), _ in self.entries}))


@dataclass(frozen=True)
class DeploymentMatrix:
    """Allowed targets per operation."""

    rows: tuple[tuple[str, tuple[str, ...]], ...]

    @classmethod
    def of(cls, mapping):
        rows = []
        for op, targets in sorted(mapping.items()):
            targets = tuple(sorted(set(targets)))
            if not targets:
                raise BudgetError(f"operation {op!r} has an empty target set")
            for t in targets:
                _check_target(t)
            rows.append((op, targets))
        return cls(tuple(rows))

    def allowed(self, op):
        for name, targets in self.rows:
            if name == op:
                return targets
        raise BudgetError(f"unknown operation {op!r}")

    def operations(self):
        return tuple(name for name, _ in self.rows)


@dataclass(frozen=True)
class DeploymentAssignment:
    choices: tuple[tuple[str, str], ...]
    context: str | None = None

    @classmethod
    def of(cls, mapping, context=None):
        return cls(tuple(sorted(mapping.items())), context)

    def target_of(self, op):
        for name, target in self.choices:
            if name == op:
                return target
        raise BudgetError(f"no deployment chosen for operation {op!r}")

    def targets(self):
        return tuple(sorted({target for _, target in self.choices}))

    def as_dict(self):
        return dict(self.choices)


@dataclass(frozen=True)
class BudgetConfig:
    buffer_capacity: int
    card_size: int
    image_size: int
    compression: Fraction
    shoot_period: int
    store_period: int

    def __post_init__(self):
        object.__setattr__(self, "compression", Fraction(self.compression))
        for name in ("buffer_capacity", "card_size", "image_size", "shoot_period", "store_period"):
            if getattr(self, name) <= 0:
                raise BudgetError(f"{name} must be positive")
        if not (0 < self.compression <= 1):
            raise BudgetError("compression must lie in (0, 1]")


@dataclass(frozen=True)
class CostEnvelope:
    time: tuple[int, int, int]  # best, expected, worst
    energy: tuple[int, int, int]

    def __post_init__(self):
        for triple in (self.time, self.energy):
            if not (triple[0] <= triple[1] <= triple[2]):
                raise BudgetError("envelope must satisfy best <= expected <= worst")

    @classmethod
    def zero(cls):
        return cls((0, 0, 0), (0, 0, 0))

    def plus(self, other):
        return CostEnvelope(
            tuple(a + b for a, b in zip(self.time, other.time)),
            tuple(a + b for a, b in zip(self.energy, other.energy)),
        )


def deployment_options(op, matrix):
    """Targets an operation may deploy to, per the matrix row."""
    return set(matrix.allowed(op))


def _op_of(net, transition_name):
    return net.transition_map[transition_name].op


def trace_cost(trace, profile, assignment, net=None):
    """Envelope of a firing sequence under sequential composition.

    `trace` holds transition names when `net` is given (operations looked up
    on the net), otherwise operation names directly.
    """
    total = CostEnvelope.zero()
    for item in trace:
        op = _op_of(net, item) if net is not None else item
        target = assignment.target_of(op)
        if not profile.has(op, target):
            raise BudgetError(f"missing profile entry for ({op!r}, {target!r})")
        e = profile.entry(op, target)
        total = total.plus(
            CostEnvelope((e.bcet, e.acet, e.wcet), (e.bcec, e.acec, e.wcec))
        )
    return total


# -- probabilistic expectation ---------------------------------------------------


@dataclass(frozen=True)
class ExpectedCost:
    time: float
    energy: float
    time_se: float | None = None
    energy_se: float | None = None
    runs: int | None = None


def _net_consumed_places(net, transition_name):
    """Places a transition net-consumes from (input weight exceeds returned)."""
    t = net.transition_map[transition_name]
    taken: dict[str, int] = {}
    for arc in t.inputs:
        taken[arc.place] = taken.get(arc.place, 0) + sum(m for m, _ in arc.terms)
    for arc in t.outputs:
        if arc.place in taken:
            taken[arc.place] -= sum(m for m, _ in arc.terms)
    return frozenset(p for p, k in taken.items() if k > 0)


def _edge_distribution(net, graph, node_id):
    """Flattened choice distribution at a node.

    Enabled transitions cluster by transitive sharing of net-consumed places;
    a cluster is picked uniformly, a member by its stated probabilities.
    Multi-member clusters with missing annotations are an error.
    """
    edge_ids = graph.out[node_id]
    if not edge_ids:
        return ()
    infos = []
    for eid in edge_ids:
        edge = graph.edges[eid]
        infos.append((eid, edge, _net_consumed_places(net, edge.transition)))
    # transitive clustering on shared net-consumed places
    parent = list(range(len(infos)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(infos)):
        for j in range(i + 1, len(infos)):
            if infos[i][2] & infos[j][2]:
                parent[find(i)] = find(j)
    clusters: dict[int, list[int]] = {}
    for i in range(len(infos)):
        clusters.setdefault(find(i), []).append(i)
    cluster_list = sorted(clusters.values(), key=lambda ids: ids[0])
    cluster_p = Fraction(1, len(cluster_list))
    distribution = []
    for ids in cluster_list:
        transitions = {infos[i][1].transition for i in ids}
        probs = {
            name: net.transition_map[name].probability for name in transitions
        }
        if len(transitions) > 1 and any(p is None for p in probs.values()):
            unannotated = sorted(n for n, p in probs.items() if p is None)
            raise BudgetError(
                "probabilities missing on a reached conflict: "
                + ", ".join(unannotated)
            )
        total = sum(probs.values()) if len(transitions) > 1 else Fraction(1)
        for i in ids:
            eid, edge, _ = infos[i]
            if len(transitions) > 1:
                weight = probs[edge.transition] / total
                # bindings of one transition split its share evenly
                siblings = sum(
                    1 for k in ids if infos[k][1].transition == edge.transition
                )
                weight = weight / siblings
            else:
                weight = Fraction(1, len(ids))
            distribution.append((eid, cluster_p * weight))
    return tuple(distribution)


def _edge_cost(net, profile, assignment, edge):
    op = _op_of(net, edge.transition)
    target = assignment.target_of(op)
    if not profile.has(op, target):
        raise BudgetError(f"missing profile entry for ({op!r}, {target!r})")
    e = profile.entry(op, target)
    return e.acet, e.acec


def expected_cost(
    net,
    assignment,
    profile,
    horizon,
    method="exact",
    seed=0,
    runs=10_000,
    limits=None,
):
    """Expected (time, energy) of the probability-weighted behaviour.

    `horizon` caps the number of firings along a trace.  The exact method
    sums over the weighted reachability graph; "monte-carlo" samples the same
    chain and reports standard errors.
    """
    if horizon < 0:
        raise BudgetError("horizon must be >= 0")
    graph = reachability_graph(net, limits or Limits(max_nodes=50_000))
    if graph.truncated:
        raise BudgetError("state space exceeded limits while computing expectation")
    dists = [_edge_distribution(net, graph, node) for node in range(graph.node_count)]
    costs = [_edge_cost(net, profile, assignment, e) for e in graph.edges]

    if method == "exact":
        # bottom-up over remaining steps; probabilities exact, sums in doubles
        n = graph.node_count
        flat = [
            [(float(p), graph.edges[eid].dst, costs[eid]) for eid, p in dists[node]]
            for node in range(n)
        ]
        prev_t = [0.0] * n
        prev_e = [0.0] * n
        for _ in range(horizon):
            cur_t = [0.0] * n
            cur_e = [0.0] * n
            changed = False
            for node in range(n):
                t_total = 0.0
                e_total = 0.0
                for p, dst, (ct, ce) in flat[node]:
                    t_total += p * (ct + prev_t[dst])
                    e_total += p * (ce + prev_e[dst])
                cur_t[node] = t_total
                cur_e[node] = e_total
                if t_total != prev_t[node] or e_total != prev_e[node]:
                    changed = True
            prev_t, prev_e = cur_t, cur_e
            if not changed:  # fixpoint: every trace already terminates
                break
        return ExpectedCost(prev_t[0], prev_e[0])

    if method == "monte-carlo":
        # precompute cumulative weights per node for fast sampling
        tables = []
        for dist in dists:
            if not dist:
                tables.append(None)
                continue
            cum = []
            acc = 0.0
            dests = []
            step_costs = []
            for eid, p in dist:
                acc += float(p)
                cum.append(acc)
                dests.append(graph.edges[eid].dst)
                step_costs.append(costs[eid])
            tables.append((cum, dests, step_costs))
        rng = random.Random(seed)
        sum_t = sum_e = 0.0
        sumsq_t = sumsq_e = 0.0
        for _ in range(runs):
            node = 0
            t_acc = 0
            e_acc = 0
            for _ in range(horizon):
                table = tables[node]
                if table is None:
                    break
                cum, dests, step_costs = table
                i = bisect.bisect_left(cum, rng.random() * cum[-1])
                if i >= len(dests):
                    i = len(dests) - 1
                ct, ce = step_costs[i]
                t_acc += ct
                e_acc += ce
                node = dests[i]
            sum_t += t_acc
            sum_e += e_acc
            sumsq_t += t_acc * t_acc
            sumsq_e += e_acc * e_acc
        mean_t = sum_t / runs
        mean_e = sum_e / runs
        var_t = max(sumsq_t / runs - mean_t * mean_t, 0.0)
        var_e = max(sumsq_e / runs - mean_e * mean_e, 0.0)
        return ExpectedCost(
            mean_t,
            mean_e,
            math.sqrt(var_t / runs),
            math.sqrt(var_e / runs),
            runs,
        )

    raise BudgetError(f"unknown method {method!r}")


# -- buffer feasibility -----------------------------------------------------------


def burst_feasibility(cfg):
    """Index of the first burst frame whose shot is delayed by a full buffer,
    or None when draining keeps pace (store_period <= shoot_period).

    Shots are paced one per shoot_period; the storage path drains one image
    per store_period, sequentially.  Simultaneous free-and-shoot counts as
    not delayed.
    """
    if cfg.store_period <= cfg.shoot_period:
        return None
    capacity = cfg.buffer_capacity
    in_buffer = 0
    store_free_at = 0  # when the storage path can accept the next image
    completions: list[int] = []  # store completion times, ascending
    last_shot = None
    frame = 0
    while True:
        desired = 0 if last_shot is None else last_shot + cfg.shoot_period
        shoot_at = desired
        while True:
            # apply completions due by the candidate time
            while completions and completions[0] <= shoot_at:
                completions.pop(0)
                in_buffer -= 1
            if in_buffer < capacity:
                break
            shoot_at = completions[0]  # wait for the next slot to free
        if shoot_at > desired:
            return frame
        in_buffer += 1
        start = max(shoot_at, store_free_at)
        store_free_at = start + cfg.store_period
        completions.append(store_free_at)
        last_shot = shoot_at
        frame += 1


def max_frames(cfg):
    """Frames fitting the card: floor(card_size / (image_size * compression))."""
    per_image = Fraction(cfg.image_size) * cfg.compression
    return int(Fraction(cfg.card_size) / per_image)


# -- deployment optimization ------------------------------------------------------


def _operations_of(net_or_ops):
    if hasattr(net_or_ops, "transitions"):
        return tuple(sorted({t.op for t in net_or_ops.transitions}))
    return tuple(sorted(set(net_or_ops)))


def _objective_value(ops, choice, profile, objective):
    total = 0
    for op in ops:
        entry = profile.entry(op, choice[op])
        total += entry.wcet if objective == "min-worst-time" else entry.wcec
    return total


def optimize_assignment(net_or_ops, matrix, profile, objective, context_mode=None):
    """Exhaustively choose one target per operation, minimising the objective.

    `objective` is "min-worst-time" or "min-worst-energy".  In the IDLE
    context the DSP is excluded.  Ties prefer GPP, then target name order.
    Returns (DeploymentAssignment, CostEnvelope of one execution per op).
    """
    if objective not in ("min-worst-time", "min-worst-energy"):
        raise BudgetError(f"unknown objective {objective!r}")
    ops = _operations_of(net_or_ops)
    allowed = {}
    for op in ops:
        targets = list(matrix.allowed(op))
        if context_mode == IDLE_CONTEXT:
            targets = [t for t in targets if t != "DSP"]
        if not targets:
            raise BudgetError(
                f"infeasible: operation {op!r} has no allowed target in "
                f"context {context_mode!r}"
            )
        # tie preference: GPP first, then name order
        targets.sort(key=lambda t: (t != "GPP", t))
        allowed[op] = targets

    best_choice = None
    best_value = None

    def walk(i, choice):
        nonlocal best_choice, best_value
        if i == len(ops):
            value = _objective_value(ops, choice, profile, objective)
            if best_value is None or value < best_value:
                best_value = value
                best_choice = dict(choice)
            return
        op = ops[i]
        for target in allowed[op]:
            if not profile.has(op, target):
                raise BudgetError(f"missing profile entry for ({op!r}, {target!r})")
            choice[op] = target
            walk(i + 1, choice)
        del choice[op]

    walk(0, {})
    assignment = DeploymentAssignment.of(best_choice, context=context_mode)
    envelope = trace_cost(ops, profile, assignment)
    return assignment, envelope
