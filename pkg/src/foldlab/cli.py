"""Command-line entry points.

``foldlab serve`` runs the WebSocket service; the batch subcommands
replay demonstration logs, score masks/images, render the built-in goal
masks, and analyze study CSVs.  Exit code 0 on success, 2 on any
validation error (bad input files, malformed logs, unknown goals).
"""

from __future__ import annotations

import json
import os
import sys

import click

from .analysis import format_mean_sigma, load_csv, rm_anova_2x2, summarize
from .cloth import ClothSpec, GridSpec
from .errors import FoldLabError
from .fold import FoldParams
from .goals import builtin_goals, get_goal, render_goal
from .mask import read_image_ppm, read_mask_pgm, write_mask_pgm
from .scoring import (DEFAULT_ALIGN_RADIUS, HsvRange, score_trial,
                      segment_hsv)
from .service import SessionStore, build_app, replay
from .session import parse_log

# Default segmentation range: a broadly blue cloth on a neutral ground.
DEFAULT_HSV = "180,280,0.2,1,0.2,1"


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


@click.group()
def main() -> None:
    """Cloth-folding demonstration workbench."""


@main.command()
@click.option("--port", default=8765, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--data-dir", default="foldlab-data", show_default=True,
              help="Directory for append-only session logs.")
@click.option("--static-dir", default=None,
              help="Directory of UI assets to serve at / (optional).")
def serve(port: int, host: str, data_dir: str, static_dir: str | None) -> None:
    """Run the WebSocket session service."""
    import uvicorn

    store = SessionStore(data_dir=data_dir)
    if static_dir is None:
        candidate = os.path.join(os.getcwd(), "frontend", "dist")
        static_dir = candidate if os.path.isdir(candidate) else None
    app = build_app(store, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


@main.command("replay")
@click.argument("logfile", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default=None, type=click.Path(dir_okay=False),
              help="Write the final mask as a P5 graymap.")
def replay_cmd(logfile: str, out: str | None) -> None:
    """Re-run a demonstration log and score its outcome."""
    try:
        with open(logfile) as fh:
            log = parse_log(fh.read())
        _, mask, score = replay(log)
    except FoldLabError as exc:
        _fail(str(exc))
    if out:
        write_mask_pgm(mask, out)
    click.echo(f"iou={score.iou:.4f} offset=({score.offset[0]},{score.offset[1]})"
               + (f" completion_time={score.completion_time:.3f}s"
                  if score.completion_time is not None else ""))


def _load_result_mask(path: str, hsv: str):
    lower = path.lower()
    if lower.endswith(".pgm"):
        return read_mask_pgm(path)
    if lower.endswith(".ppm"):
        try:
            parts = [float(v) for v in hsv.split(",")]
            if len(parts) != 6:
                raise ValueError("need 6 comma-separated numbers")
            hsv_range = HsvRange(hue=(parts[0], parts[1]),
                                 saturation=(parts[2], parts[3]),
                                 value=(parts[4], parts[5]))
            hsv_range.validate()
        except ValueError as exc:
            _fail(f"bad --hsv: {exc}")
        return segment_hsv(read_image_ppm(path), hsv_range)
    _fail(f"unsupported result format {path!r}: expected .pgm or .ppm")


@main.command("score")
@click.option("--result", "result_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Achieved shape: P5 mask or P6 RGB image.")
@click.option("--goal", "goal_ref", required=True,
              help="Goal: a built-in id (G1..G4) or a P5 mask path.")
@click.option("--hsv", default=DEFAULT_HSV, show_default=True,
              help="h0,h1,s0,s1,v0,v1 segmentation range for P6 input.")
@click.option("--align", "align_radius", default=DEFAULT_ALIGN_RADIUS,
              show_default=True, type=int, help="Alignment search radius (px).")
def score_cmd(result_path: str, goal_ref: str, hsv: str, align_radius: int) -> None:
    """Score an achieved cloth shape against a goal shape."""
    try:
        result = _load_result_mask(result_path, hsv)
        if os.path.exists(goal_ref):
            goal = read_mask_pgm(goal_ref)
        else:
            goal = render_goal(get_goal(goal_ref), ClothSpec(), FoldParams(),
                               GridSpec())
        score = score_trial(result, goal, radius=align_radius)
    except FoldLabError as exc:
        _fail(str(exc))
    click.echo(f"iou={score.iou:.4f} offset=({score.offset[0]},{score.offset[1]})")


@main.group()
def goals() -> None:
    """Built-in goal shapes."""


@goals.command("render")
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False))
def goals_render(out_dir: str) -> None:
    """Render G1..G4 as P5 masks plus a manifest."""
    os.makedirs(out_dir, exist_ok=True)
    cloth, params, grid = ClothSpec(), FoldParams(), GridSpec()
    manifest = {}
    for g in builtin_goals():
        mask = render_goal(g, cloth, params, grid)
        filename = f"{g.id}.pgm"
        write_mask_pgm(mask, os.path.join(out_dir, filename))
        manifest[g.id] = {
            "name": g.name,
            "description": g.description,
            "file": filename,
            "area_px": mask.area,
            "script": [{"pick": list(a.pick), "place": list(a.place)}
                       for a in g.script],
        }
        click.echo(f"{g.id} -> {filename} ({mask.area} px)")
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


@main.command("analyze")
@click.argument("csvfile", type=click.Path(exists=True, dir_okay=False))
def analyze_cmd(csvfile: str) -> None:
    """Per-measure condition summaries and 2x2 within-subject ANOVA."""
    try:
        records = load_csv(csvfile)
    except FoldLabError as exc:
        _fail(str(exc))
    measures = sorted({r.measure for r in records})
    for measure in measures:
        subset = [r for r in records if r.measure == measure]
        click.echo(f"measure: {measure}")
        for factor in ("interface", "preview"):
            for level, mean, sigma, count in summarize(subset, factor):
                click.echo(f"  {factor}={level}: "
                           f"{format_mean_sigma(mean, sigma)}  n={count}")
        try:
            result = rm_anova_2x2(subset)
        except FoldLabError as exc:
            click.echo(f"  anova: skipped ({exc})")
            continue
        for effect in (result.interface, result.preview, result.interaction):
            click.echo(f"  anova {effect.name}: F({effect.df[0]},{effect.df[1]})"
                       f"={effect.f:.4g} p={effect.p:.4g}")


if __name__ == "__main__":
    main()
