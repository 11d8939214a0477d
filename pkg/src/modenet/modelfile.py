"""Line-oriented model file format: nets, automata, matrix, profile, config.

One directive per line; identifiers with spaces or operators are quoted.
Net elements attach to the most recent `net` line; everything else is
order-free.  Parsing is strict: unknown keys and dangling references are
errors carrying line and column.  `parse_model(serialize_model(doc))` is a
structural identity.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .budget import (
    BudgetConfig,
    DeploymentMatrix,
    ProfileEntry,
    ResourceProfile,
)
from .cpn import (
    Arc,
    ColourSet,
    ColouredNet,
    Guard,
    NetError,
    Place,
    Transition,
    Variable,
)
from .expr import ExprError, parse_expr, render_expr
from .modes import Mode, ModeAutomaton, ModeError, ModeTransition

__all__ = ["ModelParseError", "ModelDoc", "parse_model", "serialize_model"]

FORMAT_VERSION = 1


class ModelParseError(ValueError):
    def __init__(self, message, line, col=1):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class ModelDoc:
    version: int = FORMAT_VERSION
    nets: tuple[tuple[str, ColouredNet], ...] = ()
    automata: tuple[tuple[str, ModeAutomaton], ...] = ()
    matrix: DeploymentMatrix | None = None
    profile: ResourceProfile | None = None
    config: BudgetConfig | None = None

    def net(self, name):
        for net_name, net in self.nets:
            if net_name == name:
                return net
        raise KeyError(f"no net {name!r} in document")

    def automaton(self, name):
        for auto_name, auto in self.automata:
            if auto_name == name:
                return auto
        raise KeyError(f"no automaton {name!r} in document")


# -- tokenizing -----------------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    text: str
    col: int
    quoted: bool
    eq_split: tuple[str, str] | None  # (key, value) when an unquoted '=' splits it


def _tokenize_line(line, lineno):
    tokens = []
    i = 0
    n = len(line)
    while i < n:
        ch = line[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "#":
            break
        start = i
        parts = []
        eq_at = None
        while i < n and not line[i].isspace() and line[i] != "#":
            if line[i] == '"':
                j = i + 1
                buf = []
                while j < n and line[j] != '"':
                    buf.append(line[j])
                    j += 1
                if j >= n:
                    raise ModelParseError("unterminated string", lineno, i + 1)
                parts.append(("".join(buf), True))
                i = j + 1
            else:
                j = i
                while j < n and not line[j].isspace() and line[j] not in '"#':
                    j += 1
                text = line[i:j]
                if eq_at is None and "=" in text:
                    eq_at = sum(len(p) for p, _ in parts) + text.index("=")
                parts.append((text, False))
                i = j
        full = "".join(p for p, _ in parts)
        quoted = any(q for _, q in parts)
        eq_split = None
        if eq_at is not None and 0 < eq_at:
            key = full[:eq_at]
            value = full[eq_at + 1 :]
            eq_split = (key, value)
        tokens.append(_Token(full, start + 1, quoted, eq_split))
    return tokens


def _split_attrs(tokens, lineno, allowed, positional=0):
    """First `positional` tokens are positional; the rest must be key=value."""
    if len(tokens) < positional:
        raise ModelParseError("missing arguments", lineno)
    pos = [t.text for t in tokens[:positional]]
    attrs = {}
    for token in tokens[positional:]:
        if token.eq_split is None or token.quoted and token.eq_split is None:
            raise ModelParseError(
                f"expected key=value, got {token.text!r}", lineno, token.col
            )
        key, value = token.eq_split
        if key not in allowed:
            raise ModelParseError(f"unknown key {key!r}", lineno, token.col)
        if key in attrs:
            raise ModelParseError(f"duplicate key {key!r}", lineno, token.col)
        attrs[key] = (value, token.col)
    return pos, attrs


def _parse_int(value, lineno, col):
    try:
        return int(value)
    except ValueError:
        raise ModelParseError(f"expected integer, got {value!r}", lineno, col) from None


def _parse_fraction(value, lineno, col):
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError):
        raise ModelParseError(f"expected rational, got {value!r}", lineno, col) from None


def _parse_scalar(value):
    try:
        return int(value)
    except ValueError:
        return value


def _parse_multiset(text, lineno, col):
    values = []
    for part in text.split("+"):
        part = part.strip()
        if not part:
            continue
        if "'" in part:
            mult_text, value = part.split("'", 1)
            mult = _parse_int(mult_text.strip(), lineno, col)
        else:
            mult, value = 1, part
        values.extend([value.strip()] * mult)
    return tuple(values)


def _parse_expr_at(text, lineno, col):
    try:
        return parse_expr(text)
    except ExprError as exc:
        raise ModelParseError(f"bad expression: {exc}", lineno, col) from None


def _parse_triple(value, lineno, col):
    parts = value.split("/")
    if len(parts) != 3:
        raise ModelParseError(f"expected b/a/w triple, got {value!r}", lineno, col)
    return tuple(_parse_int(p, lineno, col) for p in parts)


# -- parsing ----------------------------------------------------------------------


class _NetBuilder:
    def __init__(self, name, lineno):
        self.name = name
        self.lineno = lineno
        self.colour_sets = []
        self.places = []
        self.variables = []
        self.transition_specs = {}  # name -> dict
        self.order = {"colourset": set(), "place": set(), "var": set()}

    def check_fresh(self, kind, name, lineno, col):
        group = self.order.setdefault(kind, set())
        if name in group:
            raise ModelParseError(f"duplicate {kind} {name!r}", lineno, col)
        group.add(name)

    def build(self):
        transitions = []
        for name, spec in self.transition_specs.items():
            transitions.append(
                Transition(
                    name=name,
                    component=spec["component"],
                    inputs=tuple(spec["inputs"]),
                    outputs=tuple(spec["outputs"]),
                    guard=spec["guard"],
                    assignments=tuple(spec["assignments"]),
                    probability=spec["probability"],
                    sync_role=spec["sync"],
                    operation=spec["operation"],
                    label=spec["label"],
                )
            )
        try:
            return ColouredNet.build(
                self.name, self.colour_sets, self.places, transitions, self.variables
            )
        except NetError as exc:
            raise ModelParseError(f"net {self.name!r}: {exc}", self.lineno) from None


class _AutomatonBuilder:
    def __init__(self, name, initial, events, lineno):
        self.name = name
        self.initial = initial
        self.events = events
        self.lineno = lineno
        self.modes = []  # (name, parent, initial, refine, lineno, col)
        self.transitions = []
        self.entries = []

    def build(self, nets):
        children: dict[str | None, list] = {}
        specs = {}
        for name, parent, initial, refine, lineno, col in self.modes:
            if name in specs:
                raise ModelParseError(f"duplicate mode {name!r}", lineno, col)
            specs[name] = (initial, refine, lineno, col)
            children.setdefault(parent, []).append(name)
        for name, parent, _, _, lineno, col in self.modes:
            if parent is not None and parent not in specs:
                raise ModelParseError(f"unknown parent mode {parent!r}", lineno, col)

        def make(name):
            initial, refine, lineno, col = specs[name]
            refinement = None
            if refine is not None:
                for net_name, net in nets:
                    if net_name == refine:
                        refinement = net
                        break
                else:
                    raise ModelParseError(f"unknown net {refine!r}", lineno, col)
            kids = tuple(make(k) for k in children.get(name, []))
            return Mode(name, kids, initial, refinement)

        roots = tuple(make(k) for k in children.get(None, []))
        root = Mode(self.name, roots, self.initial)
        try:
            return ModeAutomaton(
                root, self.events, tuple(self.transitions), tuple(self.entries)
            )
        except ModeError as exc:
            raise ModelParseError(f"automaton {self.name!r}: {exc}", self.lineno) from None


def parse_model(text):
    """Parse a model document; raises ModelParseError at the first problem."""
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise ModelParseError("missing header", 1)
    header = lines[0].split()
    if len(header) != 2 or header[0] != "model-format":
        raise ModelParseError("missing header (expected 'model-format 1')", 1)
    version = _parse_int(header[1], 1, len("model-format ") + 1)
    if version != FORMAT_VERSION:
        raise ModelParseError(f"unsupported format version {version}", 1)

    nets: list[_NetBuilder] = []
    automata: list[_AutomatonBuilder] = []
    matrix_rows = {}
    profile_entries = {}
    config_attrs = None
    current_net = None
    current_auto = None

    def fresh_doc_name(name, lineno, col):
        taken = {b.name for b in nets} | {b.name for b in automata}
        if name in taken:
            raise ModelParseError(f"duplicate section name {name!r}", lineno, col)

    for lineno, raw in enumerate(lines[1:], start=2):
        tokens = _tokenize_line(raw, lineno)
        if not tokens:
            continue
        head = tokens[0].text
        rest = tokens[1:]

        if head == "net":
            if len(rest) != 1:
                raise ModelParseError("usage: net <name>", lineno)
            fresh_doc_name(rest[0].text, lineno, rest[0].col)
            current_net = _NetBuilder(rest[0].text, lineno)
            nets.append(current_net)
        elif head == "colourset":
            if current_net is None:
                raise ModelParseError("colourset outside a net", lineno)
            if len(rest) < 3 or rest[1].text != "=":
                raise ModelParseError("usage: colourset <name> = <values...>", lineno)
            name = rest[0].text
            current_net.check_fresh("colourset", name, lineno, rest[0].col)
            values = tuple(t.text for t in rest[2:])
            current_net.colour_sets.append(ColourSet(name, values))
        elif head == "place":
            if current_net is None:
                raise ModelParseError("place outside a net", lineno)
            pos, attrs = _split_attrs(
                rest, lineno, {"colour", "component", "capacity", "init"}, 1
            )
            name = pos[0]
            current_net.check_fresh("place", name, lineno, tokens[1].col)
            for required in ("colour", "component"):
                if required not in attrs:
                    raise ModelParseError(f"place needs {required}=", lineno)
            capacity = None
            if "capacity" in attrs:
                capacity = _parse_int(attrs["capacity"][0], lineno, attrs["capacity"][1])
            init = ()
            if "init" in attrs:
                init = _parse_multiset(attrs["init"][0], lineno, attrs["init"][1])
            current_net.places.append(
                Place(name, attrs["colour"][0], attrs["component"][0], capacity, init)
            )
        elif head == "var":
            if current_net is None:
                raise ModelParseError("var outside a net", lineno)
            pos, attrs = _split_attrs(
                rest, lineno, {"kind", "colour", "scope", "bound", "init"}, 1
            )
            name = pos[0]
            current_net.check_fresh("var", name, lineno, tokens[1].col)
            if "kind" not in attrs:
                raise ModelParseError("var needs kind=", lineno)
            bound = None
            if "bound" in attrs:
                bound = _parse_int(attrs["bound"][0], lineno, attrs["bound"][1])
            init = _parse_scalar(attrs["init"][0]) if "init" in attrs else 0
            current_net.variables.append(
                Variable(
                    name,
                    attrs["kind"][0],
                    attrs["colour"][0] if "colour" in attrs else None,
                    attrs["scope"][0] if "scope" in attrs else None,
                    bound,
                    init,
                )
            )
        elif head == "transition":
            if current_net is None:
                raise ModelParseError("transition outside a net", lineno)
            pos, attrs = _split_attrs(
                rest,
                lineno,
                {"component", "operation", "guard", "prob", "sync", "label"},
                1,
            )
            name = pos[0]
            if name in current_net.transition_specs:
                raise ModelParseError(
                    f"duplicate transition {name!r}", lineno, tokens[1].col
                )
            if "component" not in attrs:
                raise ModelParseError("transition needs component=", lineno)
            guard = Guard.true()
            if "guard" in attrs:
                ast = _parse_expr_at(attrs["guard"][0], lineno, attrs["guard"][1])
                guard = Guard(render_expr(ast), ast)
            current_net.transition_specs[name] = {
                "component": attrs["component"][0],
                "operation": attrs["operation"][0] if "operation" in attrs else None,
                "guard": guard,
                "probability": (
                    _parse_fraction(attrs["prob"][0], lineno, attrs["prob"][1])
                    if "prob" in attrs
                    else None
                ),
                "sync": attrs["sync"][0] if "sync" in attrs else None,
                "label": attrs["label"][0] if "label" in attrs else None,
                "inputs": [],
                "outputs": [],
                "assignments": [],
            }
        elif head == "arc":
            if current_net is None:
                raise ModelParseError("arc outside a net", lineno)
            if len(rest) != 4 or rest[0].text not in ("in", "out"):
                raise ModelParseError(
                    "usage: arc in|out <transition> <place> <inscription>", lineno
                )
            direction, t_name, p_name, inscription = (t.text for t in rest)
            spec = current_net.transition_specs.get(t_name)
            if spec is None:
                raise ModelParseError(
                    f"arc references unknown transition {t_name!r}", lineno, rest[1].col
                )
            if not any(p.name == p_name for p in current_net.places):
                raise ModelParseError(
                    f"arc references unknown place {p_name!r}", lineno, rest[2].col
                )
            try:
                arc = Arc.of(p_name, inscription)
            except (NetError, ExprError) as exc:
                raise ModelParseError(str(exc), lineno, rest[3].col) from None
            spec["inputs" if direction == "in" else "outputs"].append(arc)
        elif head == "assign":
            if current_net is None:
                raise ModelParseError("assign outside a net", lineno)
            if len(rest) != 3:
                raise ModelParseError(
                    "usage: assign <transition> <variable> <expression>", lineno
                )
            t_name, var_name, expr_text = (t.text for t in rest)
            spec = current_net.transition_specs.get(t_name)
            if spec is None:
                raise ModelParseError(
                    f"assign references unknown transition {t_name!r}",
                    lineno,
                    rest[0].col,
                )
            ast = _parse_expr_at(expr_text, lineno, rest[2].col)
            spec["assignments"].append((var_name, ast))
        elif head == "automaton":
            pos, attrs = _split_attrs(rest, lineno, {"initial", "events"}, 1)
            fresh_doc_name(pos[0], lineno, tokens[1].col)
            if "events" not in attrs:
                raise ModelParseError("automaton needs events=", lineno)
            events = tuple(attrs["events"][0].split(","))
            initial = attrs["initial"][0] if "initial" in attrs else None
            current_auto = _AutomatonBuilder(pos[0], initial, events, lineno)
            automata.append(current_auto)
        elif head == "mode":
            if current_auto is None:
                raise ModelParseError("mode outside an automaton", lineno)
            pos, attrs = _split_attrs(rest, lineno, {"parent", "initial", "refine"}, 1)
            parent = attrs["parent"][0] if "parent" in attrs else None
            if parent == "-":
                parent = None
            current_auto.modes.append(
                (
                    pos[0],
                    parent,
                    attrs["initial"][0] if "initial" in attrs else None,
                    attrs["refine"][0] if "refine" in attrs else None,
                    lineno,
                    tokens[1].col,
                )
            )
        elif head == "modetrans":
            if current_auto is None:
                raise ModelParseError("modetrans outside an automaton", lineno)
            pos, attrs = _split_attrs(rest, lineno, {"prob", "guard"}, 3)
            guard = None
            if "guard" in attrs:
                guard = _parse_expr_at(attrs["guard"][0], lineno, attrs["guard"][1])
            prob = None
            if "prob" in attrs:
                prob = _parse_fraction(attrs["prob"][0], lineno, attrs["prob"][1])
            current_auto.transitions.append(
                ModeTransition(pos[0], pos[1], pos[2], guard, prob)
            )
        elif head == "entry":
            if current_auto is None:
                raise ModelParseError("entry outside an automaton", lineno)
            if len(rest) != 3:
                raise ModelParseError("usage: entry <mode> <var> <value>", lineno)
            current_auto.entries.append(
                (rest[0].text, rest[1].text, _parse_scalar(rest[2].text))
            )
        elif head == "matrix":
            if len(rest) < 3 or rest[1].text != "=":
                raise ModelParseError("usage: matrix <op> = <targets...>", lineno)
            op = rest[0].text
            if op in matrix_rows:
                raise ModelParseError(f"duplicate matrix row {op!r}", lineno, rest[0].col)
            matrix_rows[op] = tuple(t.text for t in rest[2:])
        elif head == "profile":
            pos, attrs = _split_attrs(rest, lineno, {"time", "energy"}, 2)
            key = (pos[0], pos[1])
            if key in profile_entries:
                raise ModelParseError(
                    f"duplicate profile entry {key!r}", lineno, tokens[1].col
                )
            if "time" not in attrs or "energy" not in attrs:
                raise ModelParseError("profile needs time= and energy=", lineno)
            bcet, acet, wcet = _parse_triple(attrs["time"][0], lineno, attrs["time"][1])
            bcec, acec, wcec = _parse_triple(
                attrs["energy"][0], lineno, attrs["energy"][1]
            )
            profile_entries[key] = ProfileEntry(bcet, acet, wcet, bcec, acec, wcec)
        elif head == "config":
            if config_attrs is not None:
                raise ModelParseError("duplicate config line", lineno)
            _, attrs = _split_attrs(
                rest,
                lineno,
                {
                    "buffer_capacity",
                    "card_size",
                    "image_size",
                    "compression",
                    "shoot_period",
                    "store_period",
                },
                0,
            )
            config_attrs = (attrs, lineno)
        else:
            raise ModelParseError(f"unknown directive {head!r}", lineno, tokens[0].col)

    built_nets = tuple(sorted((b.name, b.build()) for b in nets))
    built_automata = tuple(
        sorted((b.name, b.build(built_nets)) for b in automata)
    )
    matrix = DeploymentMatrix.of(matrix_rows) if matrix_rows else None
    profile = ResourceProfile.of(profile_entries) if profile_entries else None
    config = None
    if config_attrs is not None:
        attrs, lineno = config_attrs
        required = {
            "buffer_capacity",
            "card_size",
            "image_size",
            "compression",
            "shoot_period",
            "store_period",
        }
        missing = required - set(attrs)
        if missing:
            raise ModelParseError(f"config missing {sorted(missing)}", lineno)
        config = BudgetConfig(
            buffer_capacity=_parse_int(*_at(attrs, "buffer_capacity", lineno)),
            card_size=_parse_int(*_at(attrs, "card_size", lineno)),
            image_size=_parse_int(*_at(attrs, "image_size", lineno)),
            compression=_parse_fraction(*_at(attrs, "compression", lineno)),
            shoot_period=_parse_int(*_at(attrs, "shoot_period", lineno)),
            store_period=_parse_int(*_at(attrs, "store_period", lineno)),
        )
    return ModelDoc(version, built_nets, built_automata, matrix, profile, config)


def _at(attrs, key, lineno):
    value, col = attrs[key]
    return value, lineno, col


# -- serializing ------------------------------------------------------------------


_BARE_RE = re.compile(r"^[A-Za-z0-9_.+\-]+$")


def _q(text):
    text = str(text)
    if _BARE_RE.match(text):
        return text
    return '"' + text.replace('"', "'") + '"'


def _fraction_text(value):
    f = Fraction(value)
    return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"


def _multiset_text(values):
    counts = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    parts = []
    for value in sorted(counts):
        count = counts[value]
        parts.append(value if count == 1 else f"{count}'{value}")
    return " + ".join(parts)


def _serialize_net(name, net, out):
    out.append(f"net {_q(name)}")
    for cset in net.colour_sets:
        out.append(f"colourset {_q(cset.name)} = " + " ".join(cset.values))
    for place in net.places:
        attrs = [f"colour={_q(place.colour)}", f"component={_q(place.component)}"]
        if place.capacity is not None:
            attrs.append(f"capacity={place.capacity}")
        if place.init:
            attrs.append(f'init="{_multiset_text(place.init)}"')
        out.append(f"place {_q(place.name)} " + " ".join(attrs))
    for v in net.variables:
        attrs = [f"kind={v.kind}"]
        if v.colour is not None:
            attrs.append(f"colour={_q(v.colour)}")
        if v.scope is not None:
            attrs.append(f"scope={_q(v.scope)}")
        if v.bound is not None:
            attrs.append(f"bound={v.bound}")
        attrs.append(f"init={_q(v.init)}")
        out.append(f"var {_q(v.name)} " + " ".join(attrs))
    for t in net.transitions:
        attrs = [f"component={_q(t.component)}"]
        if t.operation is not None:
            attrs.append(f"operation={_q(t.operation)}")
        if t.guard.text != "true":
            attrs.append(f'guard="{t.guard.text}"')
        if t.probability is not None:
            attrs.append(f"prob={_fraction_text(t.probability)}")
        if t.sync_role is not None:
            attrs.append(f"sync={_q(t.sync_role)}")
        if t.label is not None:
            attrs.append(f"label={_q(t.label)}")
        out.append(f"transition {_q(t.name)} " + " ".join(attrs))
        for arc in t.inputs:
            out.append(f"arc in {_q(t.name)} {_q(arc.place)} {_q(arc.inscription())}")
        for arc in t.outputs:
            out.append(f"arc out {_q(t.name)} {_q(arc.place)} {_q(arc.inscription())}")
        for target, rhs in t.assignments:
            out.append(f"assign {_q(t.name)} {_q(target)} {_q(render_expr(rhs))}")


def _serialize_automaton(name, auto, nets_by_id, out):
    events = ",".join(auto.events)
    out.append(
        f"automaton {_q(name)} initial={_q(auto.root.initial)} events={events}"
        if auto.root.initial is not None
        else f"automaton {_q(name)} events={events}"
    )

    def emit_mode(mode, parent):
        attrs = [f"parent={_q(parent) if parent else '-'}"]
        if mode.initial is not None:
            attrs.append(f"initial={_q(mode.initial)}")
        if mode.refinement is not None:
            net_name = nets_by_id.get(id(mode.refinement))
            if net_name is None:
                raise ValueError(
                    f"mode {mode.name!r} refines a net missing from the document"
                )
            attrs.append(f"refine={_q(net_name)}")
        out.append(f"mode {_q(mode.name)} " + " ".join(attrs))
        for child in mode.children:
            emit_mode(child, mode.name)

    for child in auto.root.children:
        emit_mode(child, None)
    for t in auto.transitions:
        attrs = []
        if t.probability is not None:
            attrs.append(f"prob={_fraction_text(t.probability)}")
        if t.guard is not None:
            attrs.append(f'guard="{render_expr(t.guard)}"')
        suffix = (" " + " ".join(attrs)) if attrs else ""
        out.append(
            f"modetrans {_q(t.source)} {_q(t.event)} {_q(t.target)}{suffix}"
        )
    for mode, var, value in auto.entry_assigns:
        out.append(f"entry {_q(mode)} {_q(var)} {_q(value)}")


def serialize_model(doc):
    """Canonical text; serializing twice is byte-identical."""
    out = [f"model-format {doc.version}"]
    if doc.config is not None:
        cfg = doc.config
        out.append(
            "config "
            f"buffer_capacity={cfg.buffer_capacity} "
            f"card_size={cfg.card_size} "
            f"image_size={cfg.image_size} "
            f"compression={_fraction_text(cfg.compression)} "
            f"shoot_period={cfg.shoot_period} "
            f"store_period={cfg.store_period}"
        )
    if doc.matrix is not None:
        for op, targets in doc.matrix.rows:
            out.append(f"matrix {_q(op)} = " + " ".join(targets))
    if doc.profile is not None:
        for (op, target), e in doc.profile.entries:
            out.append(
                f"profile {_q(op)} {target} "
                f"time={e.bcet}/{e.acet}/{e.wcet} "
                f"energy={e.bcec}/{e.acec}/{e.wcec}"
            )
    nets_by_id = {id(net): name for name, net in doc.nets}
    for name, net in sorted(doc.nets):
        _serialize_net(name, net, out)
    for name, auto in sorted(doc.automata):
        _serialize_automaton(name, auto, nets_by_id, out)
    return "\n".join(out) + "\n"
