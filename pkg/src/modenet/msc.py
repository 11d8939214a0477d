"""Message sequence charts derived from deployments and traces.

A firing that touches places of a foreign component becomes one message; the
sending side is the first foreign component supplying tokens (else the
executing target), the receiving side the first foreign component receiving
them.  Same-component firings are local actions on the executing target's
lifeline.  The textual output follows the small grammar documented in
docs/msc-format.md.
"""

from __future__ import annotations

from dataclasses import dataclass

from .cpn import Binding, enabled_bindings, fire

__all__ = [
    "MscError",
    "MscEvent",
    "Msc",
    "lifelines",
    "trace_to_msc",
    "modes_to_hmsc",
    "render_msc",
]

LIFELINE_ORDER = ("GPP", "DSP", "Motors", "Buffer", "Flash")
STORE_LIFELINES = ("Motors", "Buffer", "Flash")


class MscError(ValueError):
    pass


@dataclass(frozen=True)
class MscEvent:
    kind: str  # "action" | "send" | "recv"
    label: str
    lifeline: str
    peer: str | None = None  # other end of a message


@dataclass(frozen=True)
class Msc:
    name: str
    lifelines: tuple[str, ...]
    events: tuple[MscEvent, ...] = ()
    references: tuple[tuple[str, "Msc"], ...] = ()
    edges: tuple[tuple[str, str, str], ...] = ()  # (src ref, event, dst ref)

    def messages(self):
        return tuple(e for e in self.events if e.kind == "send")

    def check_send_receive(self):
        """Every send pairs with a later receive on another lifeline."""
        open_sends = []
        for i, e in enumerate(self.events):
            if e.kind == "send":
                open_sends.append((i, e))
            elif e.kind == "recv":
                if not open_sends:
                    raise MscError(f"receive without send at position {i}")
                j, send = open_sends.pop()
                if send.lifeline == e.lifeline:
                    raise MscError(
                        f"message {send.label!r} sends and receives on one lifeline"
                    )
                if j >= i:
                    raise MscError("receive precedes its send")
        if open_sends:
            raise MscError(f"unmatched send {open_sends[0][1].label!r}")
        return True

    def reference_names(self):
        return tuple(name for name, _ in self.references)


def _lifeline_sort_key(name):
    try:
        return (LIFELINE_ORDER.index(name), name)
    except ValueError:
        return (len(LIFELINE_ORDER), name)


def _store_components(net):
    return tuple(
        comp
        for comp, entry in net.components.items()
        if not entry["transitions"]
    )


def lifelines(net, assignment):
    """One lifeline per deployed target plus the passive stores the net holds,
    in the fixed order GPP, DSP, Motors, Buffer, Flash."""
    targets = set()
    for t in net.transitions:
        targets.add(assignment.target_of(t.op))
    stores = set(_store_components(net))
    return tuple(sorted(targets | stores, key=_lifeline_sort_key))


def _component_lifeline(component, stores):
    return component if component in stores else None


def _firing_events(net, t, executor, stores):
    own = t.component
    foreign_in = []
    for arc in t.inputs:
        comp = net.place_map[arc.place].component
        if comp != own and comp not in foreign_in:
            foreign_in.append(comp)
    foreign_out = []
    for arc in t.outputs:
        comp = net.place_map[arc.place].component
        if comp != own and comp not in foreign_out:
            foreign_out.append(comp)
    foreign_in.sort(key=_lifeline_sort_key)
    foreign_out.sort(key=_lifeline_sort_key)
    if not foreign_in and not foreign_out:
        return (MscEvent("action", t.name, executor),)
    src = None
    if foreign_in:
        src = _component_lifeline(foreign_in[0], stores)
    if src is None:
        src = executor
    dst = None
    for comp in foreign_out:
        lifeline = _component_lifeline(comp, stores)
        if lifeline is not None and lifeline != src:
            dst = lifeline
            break
    if dst is None and foreign_out:
        dst = _component_lifeline(foreign_out[0], stores)
    if dst is None:
        dst = executor
    if src == dst:
        src = executor
    if src == dst:
        return (MscEvent("action", t.name, executor),)
    return (
        MscEvent("send", t.name, src, dst),
        MscEvent("recv", t.name, dst, src),
    )


def trace_to_msc(net, trace, assignment, name="trace"):
    """Translate a firing sequence; errors at the first infeasible step.

    `trace` holds transition names or Binding objects.
    """
    stores = set(_store_components(net))
    marking = net.initial_marking()
    events = []
    for pos, item in enumerate(trace):
        if isinstance(item, Binding):
            binding = item
        else:
            candidates = [
                b for b in enabled_bindings(net, marking) if b.transition == item
            ]
            if not candidates:
                raise MscError(
                    f"trace infeasible at step {pos}: {item!r} is not enabled"
                )
            binding = candidates[0]
        t = net.transition_map[binding.transition]
        marking = fire(net, marking, binding)
        executor = assignment.target_of(t.op)
        events.extend(_firing_events(net, t, executor, stores))
    return Msc(name, lifelines(net, assignment), tuple(events))


def _canonical_trace(net, max_steps=32):
    """First trace in deterministic exploration order: repeatedly fire the
    least enabled binding until deadlock, a revisit, or the step cap."""
    marking = net.initial_marking()
    seen = {marking}
    trace = []
    for _ in range(max_steps):
        options = enabled_bindings(net, marking)
        if not options:
            break
        binding = options[0]
        trace.append(binding)
        marking = fire(net, marking, binding)
        if marking in seen:
            break
        seen.add(marking)
    return trace


def modes_to_hmsc(auto, refinements, name="modes"):
    """Hierarchical MSC: the mode graph on top, one referenced chart per mode
    showing a canonical trace of its refinement.

    `refinements` maps mode name -> (net, assignment); every mode referenced
    by the automaton's transitions must be present.
    """
    leaves = auto.leaves
    references = []
    seen_lifelines = []
    for leaf in leaves:
        if leaf not in refinements:
            raise MscError(f"unrefined referenced mode {leaf!r}")
        net, assignment = refinements[leaf]
        sub = trace_to_msc(net, _canonical_trace(net), assignment, name=leaf)
        references.append((leaf, sub))
        for line in sub.lifelines:
            if line not in seen_lifelines:
                seen_lifelines.append(line)
    edges = []
    for t in auto.transitions:
        edge = (t.source, t.event, t.target)
        if edge not in edges:
            edges.append(edge)
    top = Msc(
        name,
        tuple(sorted(seen_lifelines, key=_lifeline_sort_key)),
        events=(),
        references=tuple(references),
        edges=tuple(edges),
    )
    _check_reference_acyclicity(top)
    return top


def _check_reference_acyclicity(msc):
    def visit(chart, path):
        if chart.name in path:
            raise MscError(f"reference cycle through {chart.name!r}")
        for _, sub in chart.references:
            visit(sub, path | {chart.name})

    visit(msc, frozenset())
    return True


def render_msc(msc):
    """Deterministic text form (grammar in docs/msc-format.md)."""
    lines = []

    def emit_chart(chart):
        lines.append(f"msc {chart.name};")
        for lifeline in chart.lifelines:
            lines.append(f"  instance {lifeline};")
        for src, event, dst in chart.edges:
            lines.append(f"  edge {src} -{event}-> {dst};")
        for name, _ in chart.references:
            lines.append(f"  reference {name};")
        i = 0
        events = chart.events
        while i < len(events):
            e = events[i]
            if e.kind == "send":
                lines.append(
                    f'  message "{e.label}" from {e.lifeline} to {e.peer};'
                )
                i += 2  # skip the paired receive
            else:
                lines.append(f'  action "{e.label}" on {e.lifeline};')
                i += 1
        lines.append("endmsc;")

    emit_chart(msc)
    for _, sub in msc.references:
        lines.append("")
        emit_chart(sub)
    return "\n".join(lines) + "\n"
