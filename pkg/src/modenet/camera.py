"""Executable digital-camera model: mode automata, high-speed shooting net,
deployment matrix, synthetic cost profile, scenario runner.

The net topology is a hand-modelled RECONSTRUCTION of the camera design this
package demonstrates; every number in the default profile is synthetic and
chosen so that time- and energy-optimal deployments differ.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .budget import (
    BudgetConfig,
    DeploymentAssignment,
    DeploymentMatrix,
    ProfileEntry,
    ResourceProfile,
    burst_feasibility,
    optimize_assignment,
    trace_cost,
)
from .cpn import (
    Arc,
    Binding,
    ColourSet,
    ColouredNet,
    Guard,
    Place,
    Transition,
    Variable,
    fire,
)
from .layout import layered_layout, mirror_lanes_after
from .modes import (
    Mode,
    ModeAutomaton,
    ModeTransition,
    ProductAutomaton,
    flatten,
    parallel_product,
    step,
)

__all__ = [
    "EVENT_KINDS",
    "CameraEvent",
    "ScenarioError",
    "ScenarioResult",
    "build_hs_net",
    "build_idle_net",
    "build_mode_level_net",
    "build_camera_mode_tree",
    "build_auto_automaton",
    "build_camera_automata",
    "default_matrix_and_profile",
    "default_config",
    "default_assignment",
    "idle_assignment",
    "camera_colours",
    "build_baseline_hs_diagram",
    "run_scenario",
    "scenario_burst_script",
    "scenario_single_shot_script",
]

EVENT_KINDS = (
    "half-press",
    "full-press",
    "hold",
    "release",
    "select-SF",
    "select-MF",
    "toggle-AF",
    "toggle-AE",
)

AUTO_LEAVES = ("FE", "F", "E", "0")
AUTO_PARAM_VALUES = {"FE": "FE", "F": "F", "E": "E", "0": "OFF"}


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class CameraEvent:
    kind: str
    at: int

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ScenarioError(f"unknown camera event kind {self.kind!r}")
        if self.at < 0:
            raise ScenarioError("event times must be non-negative")


# -- nets ---------------------------------------------------------------------


def build_hs_net(buffer_capacity=4, frames=3, name="hs"):
    """High-speed shooting net: shutter pipeline feeding a bounded buffer, a
    storage path draining it, and a buffer check throttling the next shot.

    `frames` bounds the burst (tokens on Hold), keeping exploration finite.
    """
    frame_set = ColourSet("Frame", ("frame",))
    slot_set = ColourSet("Slot", ("slot",))
    cap = buffer_capacity
    places = [
        Place("Hold", "Frame", "HS_SHOOT", init=("frame",) * frames),
        Place("ShootReady", "Frame", "HS_SHOOT", capacity=1, init=("frame",)),
        Place("Armed", "Frame", "HS_SHOOT", capacity=1),
        Place("ShutterOpen", "Frame", "HS_SHOOT", capacity=1),
        Place("Exposed", "Frame", "HS_SHOOT", capacity=1),
        Place("Captured", "Frame", "HS_SHOOT", capacity=1),
        Place("Cycle", "Frame", "HS_SHOOT", capacity=1),
        Place("Blocked", "Frame", "HS_SHOOT", capacity=1),
        Place("BufImg", "Frame", "Buffer", capacity=cap),
        Place("BufFree", "Slot", "Buffer", capacity=cap, init=("slot",) * cap),
        Place("StoreIdle", "Slot", "HS_STORE", capacity=1, init=("slot",)),
        Place("Flash", "Frame", "Flash"),
    ]
    transitions = [
        Transition(
            "Shoot_Sync",
            "HS_SHOOT",
            inputs=(Arc.of("Hold", "frame"), Arc.of("ShootReady", "frame")),
            outputs=(Arc.of("Armed", "frame"),),
            operation="SYNC",
            sync_role="shotCount",
        ),
        Transition(
            "do AS",
            "HS_SHOOT",
            inputs=(Arc.of("Armed", "frame"),),
            outputs=(Arc.of("ShutterOpen", "frame"),),
            operation="AS",
        ),
        Transition(
            "Shoot",
            "HS_SHOOT",
            inputs=(Arc.of("ShutterOpen", "frame"),),
            outputs=(Arc.of("Exposed", "frame"),),
            operation="SHOOT",
        ),
        Transition(
            "do IB",
            "HS_SHOOT",
            inputs=(Arc.of("Exposed", "frame"), Arc.of("BufFree", "slot")),
            outputs=(Arc.of("Captured", "frame"), Arc.of("BufImg", "frame")),
            assignments=(("shotCount", ("add", ("name", "shotCount"), ("int", 1))),),
            operation="IB",
        ),
        Transition(
            "do IP",
            "HS_SHOOT",
            inputs=(Arc.of("Captured", "frame"),),
            outputs=(Arc.of("Cycle", "frame"),),
            operation="IP",
        ),
        Transition(
            "no BF",
            "HS_SHOOT",
            inputs=(Arc.of("Cycle", "frame"), Arc.of("BufFree", "slot")),
            outputs=(Arc.of("ShootReady", "frame"), Arc.of("BufFree", "slot")),
            operation="BC",
            probability=Fraction(9, 10),
        ),
        Transition(
            "on BF",
            "HS_SHOOT",
            inputs=(Arc.of("Cycle", "frame"), Arc.of("BufImg", f"{cap}'frame")),
            outputs=(Arc.of("Blocked", "frame"), Arc.of("BufImg", f"{cap}'frame")),
            operation="BC",
            probability=Fraction(1, 10),
        ),
        Transition(
            "BF_Sync",
            "HS_SHOOT",
            inputs=(Arc.of("Blocked", "frame"), Arc.of("BufFree", "slot")),
            outputs=(Arc.of("ShootReady", "frame"), Arc.of("BufFree", "slot")),
            operation="SYNC",
            sync_role="shotCount",
        ),
        Transition(
            "do IS",
            "HS_STORE",
            inputs=(Arc.of("BufImg", "frame"), Arc.of("StoreIdle", "slot")),
            outputs=(
                Arc.of("Flash", "frame"),
                Arc.of("BufFree", "slot"),
                Arc.of("StoreIdle", "slot"),
            ),
            assignments=(("storedCount", ("add", ("name", "storedCount"), ("int", 1))),),
            operation="IS",
        ),
    ]
    variables = [
        Variable("shotCount", "counter", scope="HS_SHOOT", bound=frames, init=0),
        Variable("storedCount", "counter", scope="HS_STORE", bound=frames, init=0),
    ]
    return ColouredNet.build(name, [frame_set, slot_set], places, transitions, variables)


def build_idle_net():
    """Idle-mode refinement: composing a picture with optional AF/AE, gated by
    the automation parameter."""
    act = ColourSet("Act", ("act",))
    auto_set = ColourSet("AutoMode", ("FE", "F", "E", "OFF"))
    places = [Place("Composing", "Act", "IDLE_CTRL", capacity=1, init=("act",))]
    transitions = [
        Transition(
            "do AF",
            "IDLE_CTRL",
            inputs=(Arc.of("Composing", "act"),),
            outputs=(Arc.of("Composing", "act"),),
            guard=Guard.of("auto == FE or auto == F"),
            operation="AF",
        ),
        Transition(
            "do AE",
            "IDLE_CTRL",
            inputs=(Arc.of("Composing", "act"),),
            outputs=(Arc.of("Composing", "act"),),
            guard=Guard.of("auto == FE or auto == E"),
            operation="AE",
        ),
    ]
    variables = [Variable("auto", "global", colour="AutoMode", init="FE")]
    return ColouredNet.build("idle", [act, auto_set], places, transitions, variables)


def build_mode_level_net():
    """Mode-level net: one token per mode variable, constant-arc moves.  Its
    reachable markings are exactly the camera-by-automation configurations."""
    camera_set = ColourSet("CameraMode", ("IDLE", "SF", "HS", "LS"))
    auto_set = ColourSet("AutoMode", ("FE", "F", "E", "OFF"))
    places = [
        Place("cam", "CameraMode", "CameraFsm", capacity=1, init=("IDLE",)),
        Place("auto_mode", "AutoMode", "AutoFsm", capacity=1, init=("FE",)),
    ]

    def move(name, component, place, src, dst):
        return Transition(
            name,
            component,
            inputs=(Arc.of(place, src),),
            outputs=(Arc.of(place, dst),),
        )

    transitions = [
        move("full_press_sf", "CameraFsm", "cam", "IDLE", "SF"),
        move("full_press_mf", "CameraFsm", "cam", "IDLE", "HS"),
        move("buffer_full", "CameraFsm", "cam", "HS", "LS"),
        move("buffer_freed", "CameraFsm", "cam", "LS", "HS"),
        move("release_hs", "CameraFsm", "cam", "HS", "IDLE"),
        move("release_ls", "CameraFsm", "cam", "LS", "IDLE"),
        move("shoot_complete", "CameraFsm", "cam", "SF", "IDLE"),
    ]
    toggles = {
        "toggle_af": {"FE": "E", "F": "OFF", "E": "FE", "OFF": "F"},
        "toggle_ae": {"FE": "F", "F": "FE", "E": "OFF", "OFF": "E"},
    }
    for event, flips in toggles.items():
        for src, dst in flips.items():
            transitions.append(
                move(f"{event}_{src}", "AutoFsm", "auto_mode", src, dst)
            )
    return ColouredNet.build(
        "mode-level", [camera_set, auto_set], places, transitions
    )


# -- automata -------------------------------------------------------------------


# full vocabulary = camera-factor events plus the automation toggles
CAMERA_EVENTS = (
    "half-press",
    "full-press",
    "release",
    "buffer-full",
    "buffer-freed",
    "shoot-complete",
    "select-SF",
    "select-MF",
)
TOGGLE_EVENTS = ("toggle-AF", "toggle-AE")

_CAMERA_EDGES = (
    ("IDLE", "half-press", "IDLE", None),
    ("IDLE", "select-SF", "IDLE", None),
    ("IDLE", "select-MF", "IDLE", None),
    ("IDLE", "full-press", "SF", Fraction(1, 2)),
    ("IDLE", "full-press", "MF", Fraction(1, 2)),
    ("SF", "shoot-complete", "IDLE", None),
    ("HS", "buffer-full", "LS", None),
    ("LS", "buffer-freed", "HS", None),
    ("HS", "release", "IDLE", None),
    ("LS", "release", "IDLE", None),
)

_TOGGLE_EDGES = (
    ("FE", "toggle-AF", "E"),
    ("F", "toggle-AF", "0"),
    ("E", "toggle-AF", "FE"),
    ("0", "toggle-AF", "F"),
    ("FE", "toggle-AE", "F"),
    ("F", "toggle-AE", "FE"),
    ("E", "toggle-AE", "0"),
    ("0", "toggle-AE", "E"),
)


def build_camera_mode_tree(config=None, refine_nets=True):
    """Camera modes {IDLE, SF, MF{HS, LS}}; MF enters at HS.  Transitions may
    target the composite MF; `flatten` resolves them."""
    cfg = config or default_config()
    refinements = {}
    if refine_nets:
        idle = build_idle_net()
        hs = build_hs_net(cfg.buffer_capacity, 3)
        single = build_hs_net(cfg.buffer_capacity, 1, name="hs_single")
        refinements = {"IDLE": idle, "SF": single, "HS": hs, "LS": hs}
    root = Mode(
        "camera",
        children=(
            Mode("IDLE", refinement=refinements.get("IDLE")),
            Mode("SF", refinement=refinements.get("SF")),
            Mode(
                "MF",
                children=(
                    Mode("HS", refinement=refinements.get("HS")),
                    Mode("LS", refinement=refinements.get("LS")),
                ),
                initial="HS",
            ),
        ),
        initial="IDLE",
    )
    transitions = tuple(
        ModeTransition(src, event, dst, probability=p)
        for src, event, dst, p in _CAMERA_EDGES
    )
    entry = (("IDLE", "auto", "FE"),)
    return ModeAutomaton(root, CAMERA_EVENTS, transitions, entry)


def build_auto_automaton():
    """Automation submodes: FE (AF and AE), F, E, 0 (both off)."""
    root = Mode(
        "auto",
        children=tuple(Mode(name) for name in AUTO_LEAVES),
        initial="FE",
    )
    transitions = tuple(
        ModeTransition(src, event, dst) for src, event, dst in _TOGGLE_EDGES
    )
    entry = tuple(
        (leaf, "auto", AUTO_PARAM_VALUES[leaf]) for leaf in AUTO_LEAVES
    )
    return ModeAutomaton(root, ("toggle-AF", "toggle-AE"), transitions, entry)


def build_camera_automata(config=None):
    """(16-leaf hierarchical automaton, camera-by-automation product).

    The hierarchical tree nests the four automation submodes under every
    camera mode; the product composes the two single-concern automata.  Both
    describe the same 16 reachable configurations.
    """
    camera = build_camera_mode_tree(config)
    auto = build_auto_automaton()
    flat_camera = flatten(camera)

    def submodes(mode):
        return tuple(Mode(f"{mode}.{sub}") for sub in AUTO_LEAVES)

    root = Mode(
        "camera",
        children=(
            Mode("IDLE", children=submodes("IDLE"), initial="IDLE.FE"),
            Mode("SF", children=submodes("SF"), initial="SF.FE"),
            Mode(
                "MF",
                children=(
                    Mode("HS", children=submodes("HS"), initial="HS.FE"),
                    Mode("LS", children=submodes("LS"), initial="LS.FE"),
                ),
                initial="HS",
            ),
        ),
        initial="IDLE",
    )
    transitions = []
    for t in flat_camera.transitions:
        for sub in AUTO_LEAVES:
            transitions.append(
                ModeTransition(
                    f"{t.source}.{sub}",
                    t.event,
                    f"{t.target}.{sub}",
                    probability=t.probability,
                )
            )
    for camera_leaf in flat_camera.leaves:
        for src, event, dst in _TOGGLE_EDGES:
            transitions.append(
                ModeTransition(f"{camera_leaf}.{src}", event, f"{camera_leaf}.{dst}")
            )
    events = tuple(sorted(set(CAMERA_EVENTS) | set(TOGGLE_EVENTS)))
    entry = tuple(
        (f"{camera_leaf}.{sub}", "auto", AUTO_PARAM_VALUES[sub])
        for camera_leaf in flat_camera.leaves
        for sub in AUTO_LEAVES
    )
    hierarchical = ModeAutomaton(root, events, tuple(transitions), entry)
    product = parallel_product(camera, auto)
    return hierarchical, product


# -- deployment -------------------------------------------------------------------


def default_matrix_and_profile():
    """(matrix, profile, config): allowed targets per operation, the synthetic
    cost table (DSP runs twice as fast and twice as hungry as GPP), and the
    default buffer/card/timing configuration."""
    matrix = DeploymentMatrix.of(
        {
            "AF": ("GPP", "DSP"),
            "AE": ("GPP", "DSP"),
            "IP": ("DSP",),
            "IB": ("DSP",),
            "IS": ("GPP",),
            "AS": ("GPP", "DSP"),
            "BC": ("DSP",),
            # actuation and control handshakes are model-specific additions
            "SHOOT": ("Motors",),
            "SYNC": ("GPP",),
        }
    )
    profile = ResourceProfile.of(
        {
            ("AF", "GPP"): ProfileEntry(8, 12, 16, 8, 12, 16),
            ("AF", "DSP"): ProfileEntry(4, 6, 8, 16, 24, 32),
            ("AE", "GPP"): ProfileEntry(6, 8, 12, 6, 8, 12),
            ("AE", "DSP"): ProfileEntry(3, 4, 6, 12, 16, 24),
            ("AS", "GPP"): ProfileEntry(4, 6, 8, 4, 6, 8),
            ("AS", "DSP"): ProfileEntry(2, 3, 4, 8, 12, 16),
            ("IS", "GPP"): ProfileEntry(20, 30, 40, 20, 30, 40),
            ("IB", "DSP"): ProfileEntry(4, 7, 10, 8, 14, 20),
            ("IP", "DSP"): ProfileEntry(12, 18, 25, 24, 36, 50),
            ("BC", "DSP"): ProfileEntry(1, 1, 2, 2, 2, 4),
            ("SHOOT", "Motors"): ProfileEntry(5, 8, 12, 10, 16, 24),
            ("SYNC", "GPP"): ProfileEntry(1, 1, 1, 1, 1, 1),
        }
    )
    return matrix, profile, default_config()


def default_config():
    return BudgetConfig(
        buffer_capacity=4,
        card_size=1000,
        image_size=25,
        compression=Fraction(1, 5),
        shoot_period=10,
        store_period=40,
    )


def default_assignment(net=None, objective="min-worst-time"):
    """Deployment used by scenarios and exports (time-optimal by default)."""
    matrix, profile, _ = default_matrix_and_profile()
    target_net = net if net is not None else build_hs_net()
    assignment, _ = optimize_assignment(target_net, matrix, profile, objective)
    return assignment


def idle_assignment():
    matrix, profile, _ = default_matrix_and_profile()
    assignment, _ = optimize_assignment(
        ("AF", "AE"), matrix, profile, "min-worst-energy", context_mode="IDLE"
    )
    return assignment


# -- diagrams ---------------------------------------------------------------------


def camera_colours(net):
    """Two-path colouring of the shooting net; sync handshakes stay untagged."""
    components = net.components
    shoot = []
    for kind in ("places", "transitions"):
        shoot.extend(components.get("HS_SHOOT", {kind: ()})[kind])
    shoot = [
        n
        for n in shoot
        if net.transition_map.get(n) is None or net.transition_map[n].sync_role is None
    ]
    store = []
    for comp in ("HS_STORE", "Buffer", "Flash"):
        entry = components.get(comp)
        if entry:
            store.extend(entry["places"] + entry["transitions"])
    return {"shoot": tuple(sorted(shoot)), "store": tuple(sorted(store))}


def build_baseline_hs_diagram(net=None):
    """Layered diagram with the two paths deliberately swapped after "do AS",
    reproducing the readability defect the optimizer repairs."""
    net = net or build_hs_net()
    diagram = layered_layout(net, camera_colours(net))
    swap_layer = diagram.position_map()["do AS"][0]
    return mirror_lanes_after(diagram, swap_layer)


# -- scenarios --------------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioResult:
    trace: tuple[tuple[int, str], ...]  # (time, transition name)
    timeline: tuple[tuple[int, str, str, int | None], ...]  # (time, src, dst, frame)
    cost: object
    completed_ops: tuple[tuple[int, str], ...]
    frames_shot: int
    final_mode: str

    def mode_switches(self):
        return tuple((src, dst) for _, src, dst, _ in self.timeline)


def scenario_burst_script(press_at=0, release_at=95):
    return (
        CameraEvent("select-MF", press_at),
        CameraEvent("full-press", press_at),
        CameraEvent("hold", press_at),
        CameraEvent("release", release_at),
    )


def scenario_single_shot_script():
    return (
        CameraEvent("select-SF", 0),
        CameraEvent("half-press", 5),
        CameraEvent("full-press", 10),
        CameraEvent("release", 30),
    )


def _pending_ops(auto_leaf):
    return {
        "FE": ("AF", "AE"),
        "F": ("AF",),
        "E": ("AE",),
        "0": (),
    }[auto_leaf]


def _camera_part(product_leaf):
    return product_leaf.split("|", 1)[0]


def _auto_part(product_leaf):
    return product_leaf.split("|", 1)[1]


class _BurstPlan:
    """Timed schedule of one burst: shot times, store completions, delays."""

    def __init__(self, cfg, press_at, release_at, max_frames):
        self.firings = []  # (time, order_rank, transition name)
        self.delayed = []  # (frame index, block time, resume time)
        shoot, store = cfg.shoot_period, cfg.store_period
        capacity = cfg.buffer_capacity
        in_buffer = 0
        store_free = press_at
        completions = []
        last_shot = None
        frame = 0
        while frame < max_frames:
            desired = press_at if last_shot is None else last_shot + shoot
            if desired >= release_at:
                break
            shoot_at = desired
            blocked_at = None
            while True:
                while completions and completions[0][0] <= shoot_at:
                    at, _ = completions.pop(0)
                    in_buffer -= 1
                    self.firings.append((at, 0, "do IS"))
                if in_buffer < capacity:
                    break
                blocked_at = desired
                shoot_at = completions[0][0]
            if blocked_at is not None:
                if shoot_at >= release_at:
                    # released while waiting on the buffer; frame never shot
                    self.firings.append((blocked_at, 1, "on BF"))
                    self.delayed.append((frame, blocked_at, None))
                    break
                self.firings.append((blocked_at, 1, "on BF"))
                self.firings.append((shoot_at, 1, "BF_Sync"))
                self.delayed.append((frame, blocked_at, shoot_at))
            elif last_shot is not None:
                self.firings.append((shoot_at, 1, "no BF"))
            for rank, name in enumerate(
                ("Shoot_Sync", "do AS", "Shoot", "do IB", "do IP"), start=2
            ):
                self.firings.append((shoot_at, rank, name))
            in_buffer += 1
            start = max(shoot_at, store_free)
            store_free = start + store
            completions.append((store_free, frame))
            last_shot = shoot_at
            frame += 1
        for at, _ in completions:
            self.firings.append((at, 0, "do IS"))
        self.firings.sort(key=lambda item: (item[0], item[1]))
        self.frames = frame
        self.last_time = max((at for at, _, _ in self.firings), default=press_at)


def _replay(net, firings):
    """Validate a timed firing list against the net; returns the trace."""
    marking = net.initial_marking()
    trace = []
    for at, _, name in firings:
        marking = fire(net, marking, Binding(name))
        trace.append((at, name))
    return trace


def run_scenario(script, cfg=None, matrix=None, profile=None, assignment=None, seed=None):
    """Drive the camera through a user script.

    Returns the firing trace (validated against a fresh shooting net per
    burst), the mode-switch timeline, and the sequentially composed cost.
    Without an explicit selection, `seed` samples probabilistic alternatives
    (Monte Carlo opt-in); seed None keeps the deterministic default selector.
    """
    cfg = cfg or default_config()
    if matrix is None or profile is None:
        matrix, profile, _ = default_matrix_and_profile()
    rng = random.Random(seed) if seed is not None else None
    events = list(script)
    for i, event in enumerate(events):
        if not isinstance(event, CameraEvent):
            raise ScenarioError(f"event {i} is not a CameraEvent")
        if i and event.at < events[i - 1].at:
            raise ScenarioError(
                f"event {i} ({event.kind!r} at {event.at}) is out of order"
            )

    _, product = build_camera_automata(cfg)
    auto = product.automaton
    cfg_state = product.initial_config()
    selection = None
    pending: list[str] = []
    completed: list[tuple[int, str]] = []
    trace: list[tuple[int, str]] = []
    timeline: list[tuple[int, str, str, int | None]] = []
    frames_total = 0
    cost = trace_cost((), profile, DeploymentAssignment.of({}))
    idle_assign = idle_assignment()

    def advance(event_kind, at, frame=None, selector=None):
        nonlocal cfg_state
        before = cfg_state.active
        cfg_state = step(auto, cfg_state, event_kind, selector=selector)
        after = cfg_state.active
        if _camera_part(before) != _camera_part(after):
            timeline.append((at, _camera_part(before), _camera_part(after), frame))

    i = 0
    while i < len(events):
        event = events[i]
        kind, at = event.kind, event.at
        if kind == "hold":
            pass
        elif kind == "half-press":
            pending.extend(_pending_ops(_auto_part(cfg_state.active)))
        elif kind in ("select-SF", "select-MF"):
            selection = "SF" if kind == "select-SF" else "MF"
            advance(kind, at)
        elif kind in ("toggle-AF", "toggle-AE"):
            advance(kind, at)
        elif kind == "release":
            advance("release", at)
        elif kind == "full-press":
            if pending:
                drained = tuple(pending)
                pending.clear()
                completed.extend((at, op) for op in drained)
                cost = cost.plus(trace_cost(drained, profile, idle_assign))
            if selection is not None:
                want = "SF" if selection == "SF" else "HS"

                def pick(alternatives):
                    for t in alternatives:
                        if _camera_part(t.target) == want:
                            return t
                    return alternatives[0]

            elif rng is not None:

                def pick(alternatives):
                    ordered = sorted(alternatives, key=lambda t: t.target)
                    weights = [
                        float(t.probability) if t.probability is not None else 1.0
                        for t in ordered
                    ]
                    return rng.choices(ordered, weights=weights, k=1)[0]

            else:
                pick = None
            advance("full-press", at, selector=pick)
            mode = _camera_part(cfg_state.active)
            if mode == "SF":
                release_at, next_i = at + cfg.shoot_period, i + 1
                max_frames = 1
            else:
                release_at, next_i = None, None
                for j in range(i + 1, len(events)):
                    if events[j].kind == "release":
                        release_at, next_i = events[j].at, j + 1
                        break
                    if events[j].kind != "hold":
                        raise ScenarioError(
                            f"event {j} ({events[j].kind!r}) arrived during a "
                            f"multi-frame burst; expected hold or release"
                        )
                if release_at is None:
                    raise ScenarioError("multi-frame burst needs a release event")
                max_frames = 10_000
            plan = _BurstPlan(cfg, at, release_at, max_frames)
            burst_net = build_hs_net(cfg.buffer_capacity, max(plan.frames, 1))
            trace.extend(_replay(burst_net, plan.firings))
            names = [name for _, _, name in plan.firings]
            assign = assignment or default_assignment(burst_net)
            cost = cost.plus(trace_cost(names, profile, assign, net=burst_net))
            frames_total += plan.frames
            for frame_index, blocked_at, resume_at in plan.delayed:
                advance("buffer-full", blocked_at, frame=frame_index)
                if resume_at is not None:
                    advance("buffer-freed", resume_at, frame=frame_index)
            if mode == "SF":
                advance("shoot-complete", at + cfg.shoot_period)
                i += 1
                continue
            advance("release", release_at)
            i = next_i
            continue
        i += 1

    return ScenarioResult(
        trace=tuple(sorted(trace, key=lambda item: item[0])),
        timeline=tuple(timeline),
        cost=cost,
        completed_ops=tuple(completed),
        frames_shot=frames_total,
        final_mode=_camera_part(cfg_state.active),
    )
