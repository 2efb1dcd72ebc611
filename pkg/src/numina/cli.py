"""Command-line interface.

Subcommands mirror the pipeline phases:

* ``identify``  bundles + prompt -> countable layout + mismatch report
                (exit 0 aligned, 3 misaligned)
* ``refine``    layout + prompt -> count-correct layout + edit log + deltas
* ``guide``     refined layout (+ optional pre-softmax scores) -> NGDF field
* ``eval``      count records -> CountAcc / TC report
* ``synth``     scene spec -> fixture bundles + ground-truth layout

Every run writes the fully resolved configuration next to its outputs so any
artifact can be re-derived.  Exit codes: 0 success/aligned, 2 bad input,
3 count mismatch detected, 4 no valid placement, 5 missing scores,
1 unexpected failure.
"""

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import io as nio
from .config import ENV_CONFIG, RunConfig
from .errors import (
    FormatError,
    MissingScores,
    NoValidPlacement,
    NuminaError,
    PromptError,
    TooFewFrames,
)
from .guidance import DecaySchedule, build_guidance
from .metrics import evaluate_record, evaluate_records
from .pipeline import identify
from .prompt import CountEntry, CountSpec, bind_to_tokens, load_lexicon, parse_count_spec
from .refine import Edit, RefinedLayout, refine_to_count, _fill_delta_masks
from .synth import load_scene_spec, synth_scene

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INPUT = 2
EXIT_MISALIGNED = 3
EXIT_NO_PLACEMENT = 4
EXIT_MISSING_SCORES = 5


def _radius(text):
    if text == "auto":
        return None
    return float(text)


def _bandwidth(text):
    if text == "auto":
        return None
    return float(text)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help=f"config JSON (default: ${ENV_CONFIG})")
    p.add_argument("--tau", type=float, help="region retention threshold (0.2)")
    p.add_argument("--lambda", dest="lam", type=float,
                   help="temporal cost weight (8)")
    p.add_argument("--k", dest="boost", type=float,
                   help="circle-template boost coefficient (0.8)")
    p.add_argument("--gamma", type=float, help="edge-score weight (0.5)")
    p.add_argument("--block", type=int, help="block size for S2 (8)")
    p.add_argument("--peak-ratio", type=float, help="focus-mask threshold (0.1)")
    p.add_argument("--eps", type=float, help="DBSCAN radius (2.0)")
    p.add_argument("--min-pts", type=int, help="DBSCAN density (3)")
    p.add_argument("--bandwidth", type=_bandwidth,
                   help="mean-shift bandwidth ('auto' = max(H,W)/6)")
    p.add_argument("--radius", type=_radius,
                   help="circle template radius ('auto' = min(H,W)/8)")
    p.add_argument("--neg-const", type=float, help="suppression bias (-1e4)")
    p.add_argument("--stride", type=int, help="placement candidate stride (2)")
    p.add_argument("--fraction", type=float, help="guided fraction of steps (0.6)")
    p.add_argument("--steps", dest="total_steps", type=int,
                   help="denoising step count (50)")
    p.add_argument("--timestep", type=int, help="capture timestep (20)")
    p.add_argument("--layer", type=int, help="capture layer (15)")
    p.add_argument("--seed", type=int, help="run seed (0)")
    p.add_argument("--debug-dir", help="dump per-head maps and scores here")


def _resolve_config(args) -> RunConfig:
    if args.config:
        cfg = RunConfig.from_file(args.config)
    else:
        cfg = RunConfig.from_env()
    overrides = {}
    for f in dataclasses.fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            overrides[f.name] = value
    return dataclasses.replace(cfg, **overrides).validate()


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump_debug(debug_dir, self_bundle, config) -> None:
    from .heads import discriminability_score, pca_grayscale

    debug = Path(debug_dir)
    debug.mkdir(parents=True, exist_ok=True)
    scores = []
    eff_block = max(2, min(config.block, self_bundle.grid_h, self_bundle.grid_w))
    for f in range(self_bundle.frames):
        for h in range(self_bundle.heads):
            gmap = pca_grayscale(self_bundle.data[f, h], self_bundle.grid_h,
                                 self_bundle.grid_w)
            sc = discriminability_score(gmap, gamma=config.gamma, block=eff_block)
            scores.append({"frame": f, "head": h, "s1": sc.s1, "s2": sc.s2,
                           "s3": sc.s3, "total": sc.total})
            _write_pgm(debug / f"map_f{f}_h{h}.pgm", gmap.values)
    with open(debug / "head_scores.json", "w") as fh:
        json.dump(scores, fh, indent=2)


def _write_pgm(path, values) -> None:
    img = np.clip(np.asarray(values) * 255.0, 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(img.tobytes())


def _parse_prompt(args) -> CountSpec:
    lexicon = load_lexicon(args.lexicon) if getattr(args, "lexicon", None) else None
    return parse_count_spec(args.prompt, lexicon=lexicon)


def cmd_identify(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    self_bundle = nio.read_bundle(args.self_path)
    cross_bundle = nio.read_bundle(args.cross_path)
    spec = bind_to_tokens(_parse_prompt(args), cross_bundle.tokens)
    if args.debug_dir:
        _dump_debug(args.debug_dir, self_bundle, cfg)
    result = identify(self_bundle, cross_bundle, spec, cfg)
    token_indices = {e.noun: e.token_index for e in spec.entries}
    nio.write_layout(result.layout, out / "layout.nlay",
                     targets=spec.targets(),
                     extra={"token_indices": token_indices})
    with open(out / "identify_report.json", "w") as fh:
        json.dump(result.report_obj(), fh, indent=2)
    cfg.save(out / "run_config.json")
    for cat in result.categories:
        status = "MISMATCH" if cat.mismatch else "ok"
        print(f"{cat.name}: target {cat.target}, counts {cat.counts} [{status}]")
    return EXIT_OK if result.aligned else EXIT_MISALIGNED


def _spec_from_trailer(trailer, layout) -> CountSpec:
    targets = trailer.get("targets", {})
    token_indices = trailer.get("token_indices", {})
    entries = []
    for lid in sorted(layout.labels):
        name = layout.labels[lid]
        if name not in targets:
            continue
        entries.append(CountEntry(noun=name,
                                  token_index=int(token_indices.get(name, 0)),
                                  count=int(targets[name])))
    return CountSpec(entries=entries)


def cmd_refine(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    layout, trailer = nio.read_layout(args.layout_path)
    if args.prompt:
        spec = _parse_prompt(args)
        token_indices = trailer.get("token_indices", {})
        entries = [
            CountEntry(noun=e.noun, token_index=int(token_indices.get(e.noun, e.token_index)),
                       count=e.count)
            for e in spec.entries
        ]
        spec = CountSpec(entries=entries)
    else:
        spec = _spec_from_trailer(trailer, layout)
        if not spec.entries:
            print("no targets in layout trailer and no --prompt given",
                  file=sys.stderr)
            return EXIT_INPUT
    refined = refine_to_count(layout, spec, lam=cfg.lam, radius=cfg.radius,
                              stride=cfg.stride)
    token_indices = {e.noun: e.token_index for e in spec.entries}
    nio.write_layout(refined.layout, out / "refined.nlay",
                     targets=spec.targets(),
                     extra={"token_indices": token_indices})
    edit_log = {
        "edits": [
            {
                "frame": e.frame,
                "category": e.category,
                "op": e.op,
                "center": list(e.center) if e.center is not None else None,
                "area": e.area,
                "pixels": e.pixels.tolist(),
                "origin": e.origin,
                "ref_pixels": e.ref_pixels.tolist() if e.ref_pixels is not None else None,
            }
            for e in refined.edits
        ],
    }
    with open(out / "edit_log.json", "w") as fh:
        json.dump(edit_log, fh, indent=2)
    _write_delta_layouts(refined, out)
    cfg.save(out / "run_config.json")
    print(f"{len(refined.edits)} edits; targets met for "
          f"{', '.join(e.noun for e in spec.entries)}")
    return EXIT_OK


def _write_delta_layouts(refined: RefinedLayout, out: Path) -> None:
    from .layout import Layout

    for cat in refined.delta_add:
        grids = []
        for f in range(refined.layout.frames):
            grid = np.zeros((refined.layout.grid_h, refined.layout.grid_w),
                            dtype=np.uint16)
            grid[refined.delta_add[cat][f]] = 1
            grid[refined.delta_rem[cat][f]] = 2
            grids.append(grid)
        delta = Layout(grids=grids, labels={1: "add", 2: "remove"},
                       grid_h=refined.layout.grid_h, grid_w=refined.layout.grid_w)
        nio.write_layout(delta, out / f"deltas_{cat}.nlay")


def _refined_from_files(layout_path, edit_log_path):
    layout, trailer = nio.read_layout(layout_path)
    with open(edit_log_path) as fh:
        log = json.load(fh)
    edits = [
        Edit(
            frame=int(e["frame"]), category=e["category"], op=e["op"],
            pixels=np.asarray(e["pixels"], dtype=np.int64),
            center=tuple(e["center"]) if e.get("center") is not None else None,
            area=int(e["area"]), origin=e.get("origin"),
            ref_pixels=(np.asarray(e["ref_pixels"], dtype=np.int64)
                        if e.get("ref_pixels") is not None else None),
        )
        for e in log["edits"]
    ]
    refined = RefinedLayout(layout=layout, edits=edits)
    spec = _spec_from_trailer(trailer, layout)
    _fill_delta_masks(refined, layout, spec)
    return refined, spec


def cmd_guide(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    edit_log = args.edit_log or str(Path(args.refined_path).parent / "edit_log.json")
    refined, spec = _refined_from_files(args.refined_path, edit_log)
    if not spec.entries:
        print("refined layout carries no targets", file=sys.stderr)
        return EXIT_INPUT
    scores = nio.read_bundle(args.scores_path) if args.scores_path else None
    schedule = DecaySchedule(total_steps=cfg.total_steps, fraction=cfg.fraction)
    field = build_guidance(refined, spec, scores=scores, boost=cfg.boost,
                           neg_const=cfg.neg_const, schedule=schedule)
    nio.write_field(field, out / "field.ngdf")
    cfg.save(out / "run_config.json")
    for cat, counts in field.summary().items():
        print(f"{cat}: suppressed {counts['suppressed']} px, "
              f"boosted {counts['boosted']} px, "
              f"overwritten {counts['overwritten']} px")
    return EXIT_OK


def cmd_eval(args) -> int:
    with open(args.counts_path) as fh:
        obj = json.load(fh)
    if isinstance(obj, list):
        records = [
            nio.CountRecord(classes=list(o["classes"]), targets=list(o["targets"]),
                            frames=np.asarray(o["frames"], dtype=np.int64).reshape(
                                len(o["frames"]), len(o["classes"])))
            for o in obj
        ]
        report = evaluate_records(records)
    else:
        record = nio.CountRecord(classes=list(obj["classes"]),
                                 targets=list(obj["targets"]),
                                 frames=np.asarray(obj["frames"], dtype=np.int64).reshape(
                                     len(obj["frames"]), len(obj["classes"])))
        report = evaluate_record(record)
    payload = report.to_json_obj()
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["numeral", "count_acc"])
            for k, v in sorted(report.per_numeral.items()):
                writer.writerow([k, v])
    return EXIT_OK


def cmd_synth(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(args)
    spec = load_scene_spec(args.spec_path)
    scene = synth_scene(spec)
    nio.write_bundle(scene.self_bundle, out / "self.atnb")
    nio.write_bundle(scene.cross_bundle, out / "cross.atnb")
    nio.write_bundle(scene.presoftmax_bundle, out / "presoftmax.atnb")
    cats = scene.truth.labels
    targets = {}
    for lid, name in cats.items():
        targets[name] = sum(
            1 for inst in spec.instances if inst.category == name)
    nio.write_layout(scene.truth, out / "truth.nlay", targets=targets)
    cfg.save(out / "run_config.json")
    print(f"wrote fixtures for {len(spec.instances)} instances, "
          f"{spec.frames} frames, {spec.heads} heads -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="numina",
        description="identify-then-guide pipeline over dumped attention bundles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("identify", help="detect count misalignment, write layout")
    p.add_argument("--self", dest="self_path", required=True,
                   help="self-attention ATNB bundle")
    p.add_argument("--cross", dest="cross_path", required=True,
                   help="cross-attention ATNB bundle")
    p.add_argument("--prompt", required=True)
    p.add_argument("--lexicon", help="extra numeral lexicon JSON")
    p.add_argument("--out-dir", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("refine", help="edit a layout until counts match targets")
    p.add_argument("--layout", dest="layout_path", required=True)
    p.add_argument("--prompt", help="prompt to parse targets from "
                   "(default: layout trailer targets)")
    p.add_argument("--lexicon", help="extra numeral lexicon JSON")
    p.add_argument("--out-dir", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("guide", help="emit an attention-guidance field")
    p.add_argument("--refined", dest="refined_path", required=True)
    p.add_argument("--edit-log", dest="edit_log",
                   help="edit log JSON (default: sibling of the refined layout)")
    p.add_argument("--scores", dest="scores_path",
                   help="pre-softmax ATNB bundle (needed for copied templates)")
    p.add_argument("--out-dir", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_guide)

    p = sub.add_parser("eval", help="score count records (CountAcc / TC)")
    p.add_argument("--counts", dest="counts_path", required=True)
    p.add_argument("--out", help="write the report JSON here as well")
    p.add_argument("--csv", help="write the per-numeral breakdown as CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate fixture bundles from a scene spec")
    p.add_argument("--spec", dest="spec_path", required=True)
    p.add_argument("--out-dir", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NoValidPlacement as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_PLACEMENT
    except MissingScores as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_SCORES
    except (FormatError, PromptError, TooFewFrames, ValueError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NuminaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - unexpected
        print(f"unexpected error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
