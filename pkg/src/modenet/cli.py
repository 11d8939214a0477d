"""Command-line entry points: check, simulate, budget, layout, export-msc,
demo-camera.

Exit codes: 0 success, 1 analysis findings (violations, infeasibility),
2 usage or parse errors.  All outputs are deterministic for a fixed seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import camera
from .budget import BudgetError, optimize_assignment
from .cpn import validate_net
from .layout import layered_layout, optimize_layout, readability, render_dot, render_svg
from .modelfile import ModelDoc, ModelParseError, parse_model, serialize_model
from .modes import flatten
from .msc import modes_to_hmsc, render_msc
from .reach import Limits

__all__ = ["main", "console_main"]

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2


def _write(path, text):
    Path(path).write_text(text, encoding="utf-8")


def _emit_json(payload, out=None):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        _write(out, text)
    else:
        sys.stdout.write(text)


def _envelope_json(envelope):
    best_t, exp_t, worst_t = envelope.time
    best_e, exp_e, worst_e = envelope.energy
    return {
        "time": {"best": best_t, "expected": exp_t, "worst": worst_t},
        "energy": {"best": best_e, "expected": exp_e, "worst": worst_e},
    }


def _load_doc(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelParseError(f"cannot read {path}: {exc.strerror}", 1) from None
    return parse_model(text)


def _report_json(report):
    return {
        "crossings": report.crossings,
        "side_switches": {tag: n for tag, n in report.side_switches.per_colour},
        "side_switches_total": report.side_switches.total,
        "uncoloured": list(report.side_switches.uncoloured),
        "sync_arrows": report.sync_arrows,
        "composite": report.composite,
    }


def _net_colours(net):
    if "HS_SHOOT" in net.components and "HS_STORE" in net.components:
        return camera.camera_colours(net)
    return {comp: entry["places"] + entry["transitions"]
            for comp, entry in net.components.items()}


def _refinement_net(doc, mode_name):
    for _, auto in doc.automata:
        for mode in auto.root.walk():
            if mode.name == mode_name:
                if mode.refinement is None:
                    raise BudgetError(f"mode {mode_name!r} has no refinement net")
                return mode.refinement
    raise BudgetError(f"mode {mode_name!r} not found in the document")


def _pick_net(doc, args):
    if getattr(args, "net", None):
        return doc.net(args.net)
    if getattr(args, "mode", None):
        return _refinement_net(doc, args.mode)
    if not doc.nets:
        raise BudgetError("document has no nets")
    return doc.nets[0][1]


# -- subcommands ------------------------------------------------------------------


def _cmd_check(args):
    doc = _load_doc(args.model)
    findings = 0
    for name, net in doc.nets:
        for violation in validate_net(net):
            findings += 1
            print(f"{name}: {violation}")
    if findings:
        print(f"{findings} violation(s)")
        return EXIT_FINDINGS
    print(f"ok: {len(doc.nets)} net(s) valid")
    return EXIT_OK


def _cmd_simulate(args):
    doc = _load_doc(args.model)
    scenario = json.loads(Path(args.scenario).read_text(encoding="utf-8"))
    script = [
        camera.CameraEvent(entry["kind"], entry["at"])
        for entry in scenario["events"]
    ]
    result = camera.run_scenario(
        script,
        cfg=doc.config,
        matrix=doc.matrix,
        profile=doc.profile,
        seed=args.seed,
    )
    payload = {
        "seed": args.seed,
        "frames_shot": result.frames_shot,
        "final_mode": result.final_mode,
        "trace": [[at, name] for at, name in result.trace],
        "timeline": [
            [at, src, dst, frame] for at, src, dst, frame in result.timeline
        ],
        "completed_ops": [[at, op] for at, op in result.completed_ops],
        "cost": _envelope_json(result.cost),
    }
    _emit_json(payload, args.out)
    return EXIT_OK


def _cmd_budget(args):
    doc = _load_doc(args.model)
    if doc.matrix is None or doc.profile is None:
        print("document lacks matrix/profile sections", file=sys.stderr)
        return EXIT_FINDINGS
    net = _pick_net(doc, args)
    objective = "min-worst-time" if args.objective == "time" else "min-worst-energy"
    context = args.mode if args.mode == "IDLE" else None
    try:
        assignment, envelope = optimize_assignment(
            net, doc.matrix, doc.profile, objective, context_mode=context
        )
    except BudgetError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_FINDINGS
    payload = {
        "objective": args.objective,
        "mode": args.mode,
        "assignment": assignment.as_dict(),
        "envelope": _envelope_json(envelope),
    }
    _emit_json(payload, args.out)
    return EXIT_OK


def _cmd_layout(args):
    doc = _load_doc(args.model)
    net = _pick_net(doc, args)
    diagram = layered_layout(net, _net_colours(net))
    payload = {"net": net.name, "before": _report_json(readability(diagram))}
    if args.optimize:
        result = optimize_layout(net, diagram, limits=Limits(max_nodes=args.max_nodes))
        if result.diagnostic:
            print(result.diagnostic, file=sys.stderr)
            return EXIT_FINDINGS
        diagram = result.diagram
        payload["after"] = _report_json(result.after)
        payload["side_switches_after"] = result.after.side_switches.total
        payload["equivalence_checked"] = bool(result.equivalence)
    _write(args.out, render_dot(diagram))
    if args.svg:
        _write(args.svg, render_svg(diagram))
    _emit_json(payload, args.report)
    return EXIT_OK


def _cmd_export_msc(args):
    doc = _load_doc(args.model)
    auto = doc.automaton(args.automaton)
    flat = flatten(auto)
    refinements = {}
    for leaf in flat.leaves:
        mode = auto.mode(leaf)
        if mode.refinement is None:
            print(f"mode {leaf!r} has no refinement net", file=sys.stderr)
            return EXIT_FINDINGS
        net = mode.refinement
        if doc.matrix is None or doc.profile is None:
            print("document lacks matrix/profile sections", file=sys.stderr)
            return EXIT_FINDINGS
        assignment, _ = optimize_assignment(
            net,
            doc.matrix,
            doc.profile,
            "min-worst-time",
            context_mode="IDLE" if leaf == "IDLE" else None,
        )
        refinements[leaf] = (net, assignment)
    chart = modes_to_hmsc(flat, refinements, name=args.automaton)
    text = render_msc(chart)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_demo_camera(args):
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = camera_model_doc()
    _write(out_dir / "camera.model", serialize_model(doc))

    # diagrams: deliberately swapped baseline vs optimized
    net = doc.net("hs")
    baseline = camera.build_baseline_hs_diagram(net)
    result = optimize_layout(net, baseline)
    _write(out_dir / "hs_baseline.dot", render_dot(baseline))
    _write(out_dir / "hs_optimized.dot", render_dot(result.diagram))
    _write(out_dir / "hs_optimized.svg", render_svg(result.diagram))
    _emit_json(
        {
            "net": "hs",
            "before": _report_json(result.before),
            "after": _report_json(result.after),
            "side_switches_after": result.after.side_switches.total,
            "equivalence_checked": bool(result.equivalence),
        },
        out_dir / "layout_report.json",
    )

    scripts = {
        "scenario_burst": camera.scenario_burst_script(),
        "scenario_single": camera.scenario_single_shot_script(),
    }
    for name, script in scripts.items():
        _write(
            out_dir / f"{name}.json",
            json.dumps(
                {"events": [{"kind": e.kind, "at": e.at} for e in script]},
                indent=2,
                sort_keys=True,
            )
            + "\n",
        )

    argv_base = ["simulate", str(out_dir / "camera.model"), "--seed", "0"]
    for name in scripts:
        code = main(
            argv_base
            + [
                "--scenario",
                str(out_dir / f"{name}.json"),
                "--out",
                str(out_dir / f"{name}_report.json"),
            ]
        )
        if code != EXIT_OK:
            return code
    for objective, mode, filename in (
        ("time", "HS", "budget_time.json"),
        ("energy", "HS", "budget_energy.json"),
        ("energy", "IDLE", "budget_idle_energy.json"),
    ):
        code = main(
            [
                "budget",
                str(out_dir / "camera.model"),
                "--objective",
                objective,
                "--mode",
                mode,
                "--out",
                str(out_dir / filename),
            ]
        )
        if code != EXIT_OK:
            return code
    code = main(
        [
            "export-msc",
            str(out_dir / "camera.model"),
            "--automaton",
            "camera",
            "--out",
            str(out_dir / "camera.msc"),
        ]
    )
    if code != EXIT_OK:
        return code
    print(f"wrote demo artifacts to {out_dir}")
    return EXIT_OK


def camera_model_doc():
    """The shipped camera model as a document (dogfoods the file format)."""
    matrix, profile, cfg = camera.default_matrix_and_profile()
    tree = camera.build_camera_mode_tree(cfg)
    auto = camera.build_auto_automaton()
    hs = tree.mode("HS").refinement
    single = tree.mode("SF").refinement
    idle = tree.mode("IDLE").refinement
    return ModelDoc(
        nets=(("hs", hs), ("hs_single", single), ("idle", idle)),
        automata=(("auto", auto), ("camera", tree)),
        matrix=matrix,
        profile=profile,
        config=cfg,
    )


# -- argument parsing ---------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="modenet",
        description="Mode-automata / coloured-net modelling and analysis kit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="validate every net in a model file")
    p.add_argument("model")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("simulate", help="run a camera scenario script")
    p.add_argument("model")
    p.add_argument("--scenario", required=True, help="JSON scenario file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("budget", help="optimise a deployment assignment")
    p.add_argument("model")
    p.add_argument("--objective", choices=("time", "energy"), required=True)
    p.add_argument("--mode", required=True)
    p.add_argument("--net", help="override the net (defaults to the mode's refinement)")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_budget)

    p = sub.add_parser("layout", help="lay out a net and emit DOT")
    p.add_argument("model")
    p.add_argument("--mode")
    p.add_argument("--net")
    p.add_argument("--optimize", action="store_true")
    p.add_argument("--max-nodes", type=int, default=400)
    p.add_argument("--out", required=True, help="DOT output path")
    p.add_argument("--svg")
    p.add_argument("--report", help="write the readability report JSON here")
    p.set_defaults(func=_cmd_layout)

    p = sub.add_parser("export-msc", help="emit a hierarchical MSC")
    p.add_argument("model")
    p.add_argument("--automaton", default="camera")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_export_msc)

    p = sub.add_parser("demo-camera", help="regenerate the camera demo artifacts")
    p.add_argument("--out", default="golden")
    p.set_defaults(func=_cmd_demo_camera)

    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ModelParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (json.JSONDecodeError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BudgetError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FINDINGS


def console_main():
    raise SystemExit(main())


if __name__ == "__main__":
    console_main()
