"""Coloured Petri net kernel: construction, validation, firing, timed steps.

Nets are immutable after construction and safe to share between threads; a
running marking belongs to one simulation at a time.  Variables come in four
kinds: component-local state, read-only net-wide parameters, monotone bounded
counters and bounded clocks.  Counters and clocks are integer-valued; locals
and parameters take values from a colour set or integers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property

from .expr import (
    EvalError,
    comparison_atoms,
    eval_expr,
    expr_names,
    parse_expr,
    render_expr,
    TRUE,
)

__all__ = [
    "NetError",
    "MarkingError",
    "FiringError",
    "TimeInfeasibleError",
    "ColourSet",
    "Place",
    "Variable",
    "Guard",
    "Arc",
    "Transition",
    "ColouredNet",
    "Marking",
    "Binding",
    "Violation",
    "validate_net",
    "enabled_bindings",
    "fire",
    "advance_time",
    "LOCAL",
    "GLOBAL",
    "COUNTER",
    "CLOCK",
]

LOCAL = "local"
GLOBAL = "global"  # read-only net-wide parameter
COUNTER = "counter"
CLOCK = "clock"

_KINDS = (LOCAL, GLOBAL, COUNTER, CLOCK)


class NetError(ValueError):
    """Structurally malformed net element."""


class MarkingError(ValueError):
    """Marking inconsistent with the net it is used against."""


class FiringError(ValueError):
    """Attempt to fire a binding that is not enabled."""


class TimeInfeasibleError(ValueError):
    """A time advance pushed a clock outside its feasible interval."""

    def __init__(self, clock, attempted, interval):
        super().__init__(
            f"time infeasible: clock {clock!r} would reach {attempted}, "
            f"feasible interval is [{interval[0]}, {interval[1]}]"
        )
        self.clock = clock
        self.attempted = attempted
        self.interval = interval


@dataclass(frozen=True)
class ColourSet:
    """Finite ordered set of symbolic constants."""

    name: str
    values: tuple[str, ...]

    def __post_init__(self):
        if not self.values:
            raise NetError(f"colour set {self.name!r} is empty")
        if len(set(self.values)) != len(self.values):
            raise NetError(f"colour set {self.name!r} has duplicate values")

    def index(self, value):
        try:
            return self.values.index(value)
        except ValueError:
            raise NetError(f"{value!r} not in colour set {self.name!r}") from None


@dataclass(frozen=True)
class Place:
    name: str
    colour: str
    component: str
    capacity: int | None = None
    init: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "init", tuple(sorted(self.init)))
        if self.capacity is not None and self.capacity < 1:
            raise NetError(f"place {self.name!r}: capacity must be >= 1")


@dataclass(frozen=True)
class Variable:
    """Declared net variable; `bound` applies to counters and clocks."""

    name: str
    kind: str
    colour: str | None = None
    scope: str | None = None
    bound: int | None = None
    init: int | str = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise NetError(f"variable {self.name!r}: unknown kind {self.kind!r}")
        if self.bound is not None and self.bound < 0:
            raise NetError(f"variable {self.name!r}: bound must be >= 0")
        if self.kind == GLOBAL and self.scope is not None:
            raise NetError(f"parameter {self.name!r} must not carry a scope")


@dataclass(frozen=True)
class Guard:
    """Boolean expression; text is kept canonical (re-rendered from the AST)."""

    text: str
    ast: tuple

    @classmethod
    def of(cls, text):
        ast = parse_expr(text)
        return cls(render_expr(ast), ast)

    @classmethod
    def true(cls):
        return cls("true", TRUE)

    def __str__(self):
        return self.text


@dataclass(frozen=True)
class Arc:
    """One inscription: multiset of (multiplicity, value expression) terms."""

    place: str
    terms: tuple[tuple[int, tuple], ...]

    @classmethod
    def of(cls, place, inscription):
        """Build from text like "f", "2'frame + s" or an empty string."""
        terms = []
        for part in inscription.split("+"):
            part = part.strip()
            if not part:
                continue
            if "'" in part:
                mult_text, value_text = part.split("'", 1)
                mult = int(mult_text.strip())
            else:
                mult, value_text = 1, part
            if mult < 1:
                raise NetError(f"arc on {place!r}: multiplicity must be >= 1")
            terms.append((mult, parse_expr(value_text.strip())))
        if not terms:
            raise NetError(f"arc on {place!r}: empty inscription")
        return cls(place, tuple(terms))

    def inscription(self):
        parts = []
        for mult, ast in self.terms:
            text = render_expr(ast)
            parts.append(text if mult == 1 else f"{mult}'{text}")
        return " + ".join(parts)

    def names(self):
        out = frozenset()
        for _, ast in self.terms:
            out |= expr_names(ast)
        return out


def _canon_arcs(arcs):
    return tuple(sorted(arcs, key=lambda a: (a.place, a.inscription())))


@dataclass(frozen=True)
class Transition:
    name: str
    component: str
    inputs: tuple[Arc, ...] = ()
    outputs: tuple[Arc, ...] = ()
    guard: Guard = field(default_factory=Guard.true)
    assignments: tuple[tuple[str, tuple], ...] = ()
    probability: Fraction | None = None
    sync_role: str | None = None
    operation: str | None = None
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "inputs", _canon_arcs(self.inputs))
        object.__setattr__(self, "outputs", _canon_arcs(self.outputs))
        object.__setattr__(
            self,
            "assignments",
            tuple(sorted(self.assignments, key=lambda kv: kv[0])),
        )
        if self.probability is not None:
            p = Fraction(self.probability)
            if not (0 < p <= 1):
                raise NetError(f"transition {self.name!r}: probability outside (0, 1]")
            object.__setattr__(self, "probability", p)

    @property
    def op(self):
        """Operation key used for costs and deployment; defaults to the name."""
        return self.operation if self.operation is not None else self.name

    @property
    def display_label(self):
        """Label used when comparing reachability graphs; defaults to the name."""
        return self.label if self.label is not None else self.name

    def referenced_names(self):
        out = expr_names(self.guard.ast)
        for arc in self.inputs + self.outputs:
            out |= arc.names()
        for target, rhs in self.assignments:
            out |= frozenset((target,)) | expr_names(rhs)
        return out


@dataclass(frozen=True)
class Marking:
    """Canonical net state: non-empty place multisets, variable store, time."""

    tokens: tuple[tuple[str, tuple[str, ...]], ...]
    store: tuple[tuple[str, int | str], ...]
    time: int = 0

    def tokens_of(self, place):
        for name, values in self.tokens:
            if name == place:
                return values
        return ()

    def value_of(self, var):
        for name, value in self.store:
            if name == var:
                return value
        raise MarkingError(f"no stored value for variable {var!r}")

    def store_dict(self):
        return dict(self.store)

    def pretty(self):
        toks = ", ".join(f"{p}:{{{','.join(vs)}}}" for p, vs in self.tokens)
        vals = ", ".join(f"{k}={v}" for k, v in self.store)
        return f"<{toks} | {vals} | t={self.time}>"


@dataclass(frozen=True)
class Binding:
    """Complete assignment of colour values to a transition's free variables."""

    transition: str
    values: tuple[tuple[str, str], ...] = ()

    def env(self):
        return dict(self.values)


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    message: str

    def __str__(self):
        return f"[{self.code}] {self.subject}: {self.message}"


@dataclass(frozen=True)
class ColouredNet:
    """Immutable net; use `build` so collections arrive canonically sorted."""

    name: str
    colour_sets: tuple[ColourSet, ...]
    places: tuple[Place, ...]
    transitions: tuple[Transition, ...]
    variables: tuple[Variable, ...] = ()

    @classmethod
    def build(cls, name, colour_sets, places, transitions, variables=()):
        net = cls(
            name=name,
            colour_sets=tuple(sorted(colour_sets, key=lambda c: c.name)),
            places=tuple(sorted(places, key=lambda p: p.name)),
            transitions=tuple(sorted(transitions, key=lambda t: t.name)),
            variables=tuple(sorted(variables, key=lambda v: v.name)),
        )
        net._check_structure()
        return net

    def _check_structure(self):
        for group, items in (
            ("colour set", [c.name for c in self.colour_sets]),
            ("place", [p.name for p in self.places]),
            ("transition", [t.name for t in self.transitions]),
            ("variable", [v.name for v in self.variables]),
        ):
            seen = set()
            for item in items:
                if item in seen:
                    raise NetError(f"duplicate {group} {item!r}")
                seen.add(item)
        sets = {c.name: c for c in self.colour_sets}
        constants = self._colour_constants
        for place in self.places:
            if place.colour not in sets:
                raise NetError(f"place {place.name!r}: unknown colour set {place.colour!r}")
            for value in place.init:
                if value not in sets[place.colour].values:
                    raise NetError(
                        f"place {place.name!r}: initial token {value!r} not in "
                        f"colour set {place.colour!r}"
                    )
            if place.capacity is not None and len(place.init) > place.capacity:
                raise NetError(f"place {place.name!r}: initial marking exceeds capacity")
        place_names = {p.name for p in self.places}
        for t in self.transitions:
            for arc in t.inputs + t.outputs:
                if arc.place not in place_names:
                    raise NetError(
                        f"transition {t.name!r}: arc references undeclared place {arc.place!r}"
                    )
        for v in self.variables:
            if v.colour is not None and v.colour not in sets:
                raise NetError(f"variable {v.name!r}: unknown colour set {v.colour!r}")
            if v.name in constants:
                raise NetError(
                    f"variable {v.name!r} collides with a colour constant"
                )

    @cached_property
    def _colour_constants(self):
        out = {}
        for cset in self.colour_sets:
            for value in cset.values:
                out[value] = value
        return out

    @cached_property
    def colour_set_map(self):
        return {c.name: c for c in self.colour_sets}

    @cached_property
    def place_map(self):
        return {p.name: p for p in self.places}

    @cached_property
    def transition_map(self):
        return {t.name: t for t in self.transitions}

    @cached_property
    def variable_map(self):
        return {v.name: v for v in self.variables}

    @cached_property
    def components(self):
        """Partition of node names per component, derived from node attributes."""
        out: dict[str, dict[str, tuple]] = {}
        for place in self.places:
            entry = out.setdefault(place.component, {"places": [], "transitions": []})
            entry["places"].append(place.name)
        for t in self.transitions:
            entry = out.setdefault(t.component, {"places": [], "transitions": []})
            entry["transitions"].append(t.name)
        return {
            comp: {
                "places": tuple(sorted(entry["places"])),
                "transitions": tuple(sorted(entry["transitions"])),
            }
            for comp, entry in sorted(out.items())
        }

    @cached_property
    def counters(self):
        return tuple(v for v in self.variables if v.kind == COUNTER)

    @cached_property
    def clocks(self):
        return tuple(v for v in self.variables if v.kind == CLOCK)

    @cached_property
    def _free_vars(self):
        """Per transition: (var -> domain tuple), inferred from arc colour sets."""
        declared = set(self.variable_map)
        out = {}
        for t in self.transitions:
            domains: dict[str, tuple[str, ...]] = {}
            for arc in t.inputs + t.outputs:
                colour = self.colour_set_map[self.place_map[arc.place].colour]
                for _, ast in arc.terms:
                    for name in expr_names(ast):
                        if name in declared or name in self._colour_constants:
                            continue
                        if name in domains:
                            domains[name] = tuple(
                                v for v in domains[name] if v in colour.values
                            )
                        else:
                            domains[name] = colour.values
            out[t.name] = domains
        return out

    def free_variables(self, transition_name):
        return self._free_vars[transition_name]

    def sort_tokens(self, place_name, values):
        colour = self.colour_set_map[self.place_map[place_name].colour]
        for value in values:
            if value not in colour.values:
                raise MarkingError(
                    f"token {value!r} in {place_name!r} outside colour set "
                    f"{colour.name!r}"
                )
        return tuple(sorted(values, key=colour.index))

    def marking(self, tokens=None, store=None, time=0):
        """Build a canonical marking; omitted pieces fall back to declarations."""
        token_map = {}
        if tokens is None:
            for place in self.places:
                if place.init:
                    token_map[place.name] = place.init
        else:
            token_map = {p: tuple(vs) for p, vs in tokens.items() if vs}
        canon = []
        for place_name in sorted(token_map):
            if place_name not in self.place_map:
                raise MarkingError(f"unknown place {place_name!r}")
            canon.append((place_name, self.sort_tokens(place_name, token_map[place_name])))
        store_map = {v.name: v.init for v in self.variables}
        if store is not None:
            for name, value in store.items():
                if name not in store_map:
                    raise MarkingError(f"unknown variable {name!r}")
                store_map[name] = value
        m = Marking(tuple(canon), tuple(sorted(store_map.items())), time)
        self.check_marking(m)
        return m

    def initial_marking(self):
        return self.marking()

    def check_marking(self, m):
        for place_name, values in m.tokens:
            place = self.place_map.get(place_name)
            if place is None:
                raise MarkingError(f"unknown place {place_name!r}")
            colour = self.colour_set_map[place.colour]
            for value in values:
                if value not in colour.values:
                    raise MarkingError(
                        f"token {value!r} in {place_name!r} outside colour set "
                        f"{place.colour!r}"
                    )
            if place.capacity is not None and len(values) > place.capacity:
                raise MarkingError(f"place {place_name!r} over capacity")
        store = m.store_dict()
        if set(store) != set(self.variable_map):
            raise MarkingError("variable store does not match declared variables")
        for v in self.variables:
            value = store[v.name]
            if v.kind in (COUNTER, CLOCK):
                if not isinstance(value, int) or isinstance(value, bool):
                    raise MarkingError(f"{v.kind} {v.name!r} holds non-integer value")
                if v.bound is not None and value > v.bound:
                    raise MarkingError(f"{v.kind} {v.name!r} exceeds bound {v.bound}")
        if m.time < 0:
            raise MarkingError("time must be non-negative")

    def base_env(self, m):
        env = dict(self._colour_constants)
        env.update(m.store_dict())
        return env


# -- validation ---------------------------------------------------------------


def _affine_increment(ast, counter):
    """Return k if `ast` is `counter + k` with k >= 1, else None."""
    if ast[0] == "add":
        left, right = ast[1], ast[2]
        if left == ("name", counter) and right[0] == "int" and right[1] >= 1:
            return right[1]
        if right == ("name", counter) and left[0] == "int" and left[1] >= 1:
            return left[1]
    return None


def validate_net(net):
    """Scope/discipline check; returns a list of violations (empty = valid)."""
    violations = []
    var_map = net.variable_map

    for v in net.variables:
        if v.kind in (COUNTER, CLOCK) and v.bound is None:
            violations.append(
                Violation(
                    "unbounded-" + v.kind,
                    v.name,
                    f"{v.kind} must declare an integer bound",
                )
            )
        if v.kind in (LOCAL, COUNTER) and v.scope is None:
            violations.append(
                Violation("missing-scope", v.name, f"{v.kind} must name its component")
            )

    for t in net.transitions:
        free = net.free_variables(t.name)
        for name, domain in free.items():
            if not domain:
                violations.append(
                    Violation(
                        "uninferable-variable",
                        t.name,
                        f"free variable {name!r} has no consistent colour domain",
                    )
                )
        for name in expr_names(t.guard.ast):
            if name in var_map or name in net._colour_constants or name in free:
                continue
            violations.append(
                Violation(
                    "unknown-identifier",
                    t.name,
                    f"guard references undeclared identifier {name!r}",
                )
            )
        # scope discipline: locals and counters stay inside their component
        for name in t.referenced_names():
            v = var_map.get(name)
            if v is None:
                continue
            if v.kind in (LOCAL, COUNTER) and v.scope is not None:
                if v.scope != t.component:
                    violations.append(
                        Violation(
                            v.kind + "-crosses-component",
                            t.name,
                            f"{v.kind} {name!r} (scope {v.scope!r}) used in "
                            f"component {t.component!r}",
                        )
                    )
        for arc in t.inputs + t.outputs:
            for name in arc.names():
                v = var_map.get(name)
                if v is not None and v.kind in (COUNTER, CLOCK):
                    violations.append(
                        Violation(
                            "integer-in-arc",
                            t.name,
                            f"{v.kind} {name!r} cannot appear in an arc "
                            f"expression (arc on {arc.place!r})",
                        )
                    )
        for target, rhs in t.assignments:
            v = var_map.get(target)
            if v is None:
                violations.append(
                    Violation(
                        "unknown-assignment-target",
                        t.name,
                        f"assignment targets undeclared variable {target!r}",
                    )
                )
                continue
            if v.kind == GLOBAL:
                violations.append(
                    Violation(
                        "global-written",
                        t.name,
                        f"parameter {target!r} is read-only inside the net",
                    )
                )
            elif v.kind == CLOCK:
                violations.append(
                    Violation(
                        "clock-written",
                        t.name,
                        f"clock {target!r} only advances with time",
                    )
                )
            elif v.kind == COUNTER:
                if _affine_increment(rhs, target) is None:
                    violations.append(
                        Violation(
                            "counter-update",
                            t.name,
                            f"counter {target!r} must be updated as "
                            f"{target} + k with constant k >= 1",
                        )
                    )
    return violations


# -- enabling and firing -------------------------------------------------------


def _arc_demand(net, arcs, env):
    """Evaluate inscriptions to a per-place multiset (dict value -> count)."""
    demand: dict[str, dict[str, int]] = {}
    for arc in arcs:
        colour = net.colour_set_map[net.place_map[arc.place].colour]
        bucket = demand.setdefault(arc.place, {})
        for mult, ast in arc.terms:
            value = eval_expr(ast, env)
            if not isinstance(value, str) or value not in colour.values:
                raise EvalError(
                    f"arc on {arc.place!r} produced {value!r}, expected a value "
                    f"of colour set {colour.name!r}"
                )
            bucket[value] = bucket.get(value, 0) + mult
    return demand


def _binding_effect(net, t, m, env):
    """Check one binding; returns (consumed, produced, new_store) or None."""
    try:
        if eval_expr(t.guard.ast, env) is not True:
            return None
        consumed = _arc_demand(net, t.inputs, env)
        produced = _arc_demand(net, t.outputs, env)
    except EvalError:
        return None
    for place_name, need in consumed.items():
        have: dict[str, int] = {}
        for value in m.tokens_of(place_name):
            have[value] = have.get(value, 0) + 1
        for value, count in need.items():
            if have.get(value, 0) < count:
                return None
    for place_name, bucket in produced.items():
        place = net.place_map[place_name]
        if place.capacity is None:
            continue
        current = len(m.tokens_of(place_name))
        eaten = sum(consumed.get(place_name, {}).values())
        added = sum(bucket.values())
        if current - eaten + added > place.capacity:
            return None
    new_store = {}
    for target, rhs in t.assignments:
        v = net.variable_map.get(target)
        try:
            value = eval_expr(rhs, env)
        except EvalError:
            return None
        if v is not None and v.kind == COUNTER:
            if not isinstance(value, int) or isinstance(value, bool):
                return None
            if v.bound is not None and value > v.bound:
                return None
        new_store[target] = value
    return consumed, produced, new_store


def _binding_env(net, m, binding):
    env = net.base_env(m)
    env.update(binding.env())
    return env


def enabled_bindings(net, m):
    """All bindings enabled at `m`, in deterministic order."""
    net.check_marking(m)
    result = []
    for t in net.transitions:
        domains = net.free_variables(t.name)
        names = sorted(domains)
        for combo in itertools.product(*(domains[n] for n in names)):
            binding = Binding(t.name, tuple(zip(names, combo)))
            env = _binding_env(net, m, binding)
            if _binding_effect(net, t, m, env) is not None:
                result.append(binding)
    result.sort(key=lambda b: (b.transition, b.values))
    return tuple(result)


def fire(net, m, binding):
    """Fire an enabled binding; returns the successor marking (value semantics)."""
    t = net.transition_map.get(binding.transition)
    if t is None:
        raise FiringError(f"unknown transition {binding.transition!r}")
    env = _binding_env(net, m, binding)
    effect = _binding_effect(net, t, m, env)
    if effect is None:
        raise FiringError(f"binding for {t.name!r} is not enabled")
    consumed, produced, new_store = effect
    tokens = {place: list(values) for place, values in m.tokens}
    for place_name, need in consumed.items():
        pool = tokens.get(place_name, [])
        for value, count in need.items():
            for _ in range(count):
                pool.remove(value)
    for place_name, bucket in produced.items():
        pool = tokens.setdefault(place_name, [])
        for value, count in bucket.items():
            pool.extend([value] * count)
    store = m.store_dict()
    store.update(new_store)
    return net.marking(
        tokens={p: vs for p, vs in tokens.items() if vs},
        store=store,
        time=m.time,
    )


def _clock_guard_uppers(net, clock_name):
    """Syntactic upper limits on a clock from guard atoms (c <= k, c < k, c == k)."""
    uppers = []
    for t in net.transitions:
        for atom in comparison_atoms(t.guard.ast):
            _, op, left, right = atom
            if left == ("name", clock_name) and right[0] == "int":
                if op in ("<=", "=="):
                    uppers.append(right[1])
                elif op == "<":
                    uppers.append(right[1] - 1)
            elif right == ("name", clock_name) and left[0] == "int":
                if op in (">=", "=="):
                    uppers.append(left[1])
                elif op == ">":
                    uppers.append(left[1] - 1)
    return uppers


def advance_time(net, m, delta):
    """Advance global time; clocks move with it, saturating at their bound.

    A clock that would exceed its bound while some guard constrains it from
    above makes the advance infeasible (empty integer interval).
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    net.check_marking(m)
    if delta == 0:
        return m
    store = m.store_dict()
    for clock in net.clocks:
        value = store[clock.name] + delta
        bound = clock.bound
        if bound is not None and value > bound:
            uppers = _clock_guard_uppers(net, clock.name)
            if uppers:
                feasible_hi = min([bound] + uppers)
                raise TimeInfeasibleError(clock.name, value, (0, feasible_hi))
            value = bound
        store[clock.name] = value
    return net.marking(
        tokens={p: vs for p, vs in m.tokens},
        store=store,
        time=m.time + delta,
    )


def replace_transition(net, name, **changes):
    """Copy of `net` with one transition rebuilt via dataclasses.replace."""
    new_transitions = []
    found = False
    for t in net.transitions:
        if t.name == name:
            new_transitions.append(replace(t, **changes))
            found = True
        else:
            new_transitions.append(t)
    if not found:
        raise NetError(f"unknown transition {name!r}")
    return ColouredNet.build(
        net.name, net.colour_sets, net.places, new_transitions, net.variables
    )
