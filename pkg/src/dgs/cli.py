"""Command-line surface for the difficulty-guided distillation pipeline.

Every command is a pure function of its inputs and flags: all randomness
flows through --seed, files are written with fixed names under --out, and
reruns produce byte-identical artifacts. Computation failures exit 1,
input/validation problems exit 2, with messages on standard error.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import math
import os
import sys
from dataclasses import dataclass

import click

from .dag import (
    DEFAULT_T_STOP,
    GuidanceSpec,
    Mixture,
    interval_kmeans,
    make_schedule,
    reverse_sample,
)
from .distribution import (
    NUM_INTERVALS,
    PLAN_SHAPES,
    histogram,
    kde_curve,
    scale_to_ipc,
)
from .errors import DgsError, DomainError, IoError, ValidationError
from .manifest import collect_errors, load_manifest, write_manifest
from .metrics import metrics_report
from .sampler import DEFICIT_RULES, STRATEGIES, SamplingPolicy, dgs_run
from .smoothing import smooth_dataset


@dataclass(frozen=True)
class RunConfig:
    """Knobs shared across commands, echoed verbatim into every report."""

    lam: float = 0.5
    pool_factor: int = 5
    grid_max_percent: int = 20
    seed: int = 0
    shape: str = "scale"

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "pool_factor": self.pool_factor,
            "grid_max_percent": self.grid_max_percent,
            "seed": self.seed,
            "shape": self.shape,
        }


def guarded(fn):
    """Map domain errors to exit codes: validation 2, computation 1."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValidationError, IoError, DomainError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except DgsError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _dump_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _dump_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _emit(text: str, out: str | None, filename: str) -> None:
    """Write text to out/filename, or stdout when no --out was given."""
    if out is None:
        click.echo(text, nl=False)
        return
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, filename)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    click.echo(f"wrote {path}", err=True)


seed_option = click.option("--seed", type=int, default=0, show_default=True,
                           help="Seed for every random draw in the command.")
lambda_option = click.option("--lambda", "lam", type=float, default=0.5, show_default=True,
                             help="Smoothing objective weight toward the original histogram.")
grid_option = click.option("--grid-max-percent", type=int, default=20, show_default=True,
                           help="Largest per-side clip percentage the search considers.")
out_option = click.option("--out", type=click.Path(file_okay=False), default=None,
                          help="Directory for output files (stdout when omitted).")
format_option = click.option("--format", "fmt", type=click.Choice(["json", "csv"]),
                             default="json", show_default=True)


@click.group()
def main():
    """Difficulty-guided sampling and difficulty-aware guidance tools."""


@main.command()
@click.argument("manifest", type=click.Path())
@click.option("--items", "show_items", is_flag=True,
              help="Include per-item difficulties in the report.")
@guarded
def validate(manifest, show_items):
    """Check a JSONL manifest; exit 0 when valid, 2 with an error list."""
    errors = collect_errors(manifest)
    if errors:
        click.echo(_dump_json({"valid": False, "errors": errors}), nl=False)
        sys.exit(2)
    loaded = load_manifest(manifest)
    payload = {
        "valid": True,
        "items": len(loaded),
        "classes": loaded.labels,
        "latent_dim": loaded.latent_dim,
    }
    if show_items:
        payload["item_difficulties"] = [
            {"id": i.id, "label": i.label, "prob_true": i.prob_true, "difficulty": i.difficulty}
            for i in loaded.items
        ]
    click.echo(_dump_json(payload), nl=False)


@main.command()
@click.option("--manifest", required=True, type=click.Path())
@out_option
@format_option
@guarded
def dist(manifest, out, fmt):
    """Per-class difficulty histograms over the 10 fixed intervals."""
    loaded = load_manifest(manifest)
    per_class = {
        label: histogram([i.difficulty for i in items], label).to_dict()
        for label, items in sorted(loaded.by_label().items())
    }
    overall = histogram([i.difficulty for i in loaded.items], "ALL").to_dict()
    if fmt == "json":
        text = _dump_json({"classes": per_class, "overall": overall})
    else:
        rows = [["label"] + [f"i{k}" for k in range(NUM_INTERVALS)] + ["total"]]
        for label, data in per_class.items():
            rows.append([label] + list(data["counts"]) + [data["total"]])
        rows.append(["ALL"] + list(overall["counts"]) + [overall["total"]])
        text = _dump_csv(rows)
    _emit(text, out, f"dist.{fmt}")


@main.command()
@click.option("--manifest", required=True, type=click.Path())
@lambda_option
@grid_option
@out_option
@format_option
@guarded
def smooth(manifest, lam, grid_max_percent, out, fmt):
    """Search clip thresholds per class and write the smoothing report.

    With --out, also writes the manifest re-annotated with smoothed
    difficulties (smoothed.jsonl).
    """
    loaded = load_manifest(manifest)
    config = RunConfig(lam=lam, grid_max_percent=grid_max_percent)
    results = smooth_dataset(loaded, lam, grid=range(grid_max_percent + 1))
    if fmt == "json":
        text = _dump_json({
            "config": config.to_dict(),
            "classes": {label: res.to_dict() for label, res in sorted(results.items())},
        })
    else:
        rows = [["label", "b", "t", "lambda", "objective",
                 "kl_to_original", "kl_to_uniform", "degenerate"]]
        for label, res in sorted(results.items()):
            d = res.to_dict()
            rows.append([d[k] for k in rows[0]])
        text = _dump_csv(rows)
    _emit(text, out, f"smooth_report.{fmt}")
    if out is not None:
        from .distribution import bin_index
        from .manifest import build_manifest

        annotated = []
        for label, items in sorted(loaded.by_label().items()):
            for item, value in zip(items, results[label].transformed):
                annotated.append(item.with_annotations(float(value), bin_index(value)))
        write_manifest(build_manifest(annotated, role=loaded.role),
                       os.path.join(out, "smoothed.jsonl"))
        click.echo(f"wrote {os.path.join(out, 'smoothed.jsonl')}", err=True)


@main.command()
@click.option("--original", required=True, type=click.Path())
@click.option("--pool", required=True, type=click.Path())
@click.option("--ipc", required=True, type=int)
@click.option("--shape", type=click.Choice(list(PLAN_SHAPES)), default="scale", show_default=True)
@click.option("--strategy", type=click.Choice(list(STRATEGIES)),
              default="seeded-random", show_default=True)
@click.option("--deficit-rule", type=click.Choice(list(DEFICIT_RULES)),
              default="adjacent-spill", show_default=True)
@click.option("--no-smooth", is_flag=True, help="Sample on raw difficulties.")
@click.option("--pool-factor", type=int, default=5, show_default=True,
              help="Expected pool size as a multiple of --ipc; smaller pools warn.")
@seed_option
@lambda_option
@grid_option
@click.option("--out", type=click.Path(file_okay=False), default=".", show_default=True)
@guarded
def sample(original, pool, ipc, shape, strategy, deficit_rule, no_smooth,
           pool_factor, seed, lam, grid_max_percent, out):
    """Distill a pool into ipc items per class (distilled.jsonl + report)."""
    orig = load_manifest(original)
    pool_m = load_manifest(pool, role="pool")
    for label, items in sorted(pool_m.by_label().items()):
        if len(items) < pool_factor * ipc:
            click.echo(f"warning: class {label!r} pool has {len(items)} items, "
                       f"below pool_factor*ipc = {pool_factor * ipc}", err=True)
    policy = SamplingPolicy(strategy=strategy, seed=seed, deficit_rule=deficit_rule)
    config = RunConfig(lam=lam, pool_factor=pool_factor,
                       grid_max_percent=grid_max_percent, seed=seed, shape=shape)
    distilled, report = dgs_run(orig, pool_m, ipc, lam=lam, shape=shape, policy=policy,
                                apply_smoothing=not no_smooth,
                                grid=range(grid_max_percent + 1))
    os.makedirs(out, exist_ok=True)
    write_manifest(distilled, os.path.join(out, "distilled.jsonl"))
    payload = {"config": config.to_dict(), "ipc": ipc, "report": report.to_dict()}
    with open(os.path.join(out, "sample_report.json"), "w", encoding="utf-8") as fh:
        fh.write(_dump_json(payload))
    click.echo(f"wrote {os.path.join(out, 'distilled.jsonl')}", err=True)
    click.echo(f"wrote {os.path.join(out, 'sample_report.json')}", err=True)


@main.command()
@click.option("--original", required=True, type=click.Path())
@click.option("--generated", required=True, type=click.Path())
@out_option
@guarded
def metrics(original, generated, out):
    """Representativeness, diversity, and bias of generated latents."""
    orig = load_manifest(original)
    gen = load_manifest(generated, role="distilled")
    payload = {"config": RunConfig().to_dict(), **metrics_report(orig, gen)}
    _emit(_dump_json(payload), out, "metrics.json")


@main.group()
def dag():
    """Difficulty-aware guidance: clustering and the reverse simulator."""


@dag.command()
@click.option("--manifest", required=True, type=click.Path())
@click.option("--ipc", required=True, type=int)
@seed_option
@out_option
@format_option
@guarded
def cluster(manifest, ipc, seed, out, fmt):
    """Per-interval k-means centers over each class's latents."""
    loaded = load_manifest(manifest)
    if loaded.latent_dim == 0:
        raise ValidationError("manifest carries no latent vectors")
    config = RunConfig(seed=seed)
    classes = {}
    for label, items in sorted(loaded.by_label().items()):
        plan = scale_to_ipc(histogram([i.difficulty for i in items], label), ipc)
        centers = interval_kmeans(items, plan, seed=seed)
        classes[label] = {str(k): [[float(x) for x in c] for c in centers[k]]
                          for k in sorted(centers)}
    if fmt == "json":
        text = _dump_json({"config": config.to_dict(), "ipc": ipc, "classes": classes})
    else:
        rows = [["label", "interval", "center", "coordinates"]]
        for label, intervals in sorted(classes.items()):
            for k, centers in sorted(intervals.items(), key=lambda kv: int(kv[0])):
                for j, center in enumerate(centers):
                    rows.append([label, k, j, " ".join(f"{x:.17g}" for x in center)])
        text = _dump_csv(rows)
    _emit(text, out, f"centers.{fmt}")


@dag.command()
@click.option("--mixture", "mixture_path", required=True, type=click.Path(),
              help="JSON mixture config: {dim, components: [{weight, mean, std}]}.")
@click.option("--lambda-gui", type=float, default=0.0, show_default=True)
@click.option("--t-stop", type=int, default=DEFAULT_T_STOP, show_default=True)
@click.option("--steps", type=int, default=50, show_default=True)
@click.option("--center", type=str, default=None,
              help="Guidance target as comma-separated coordinates.")
@click.option("--sigma-mode", type=click.Choice(["posterior", "residual"]),
              default="posterior", show_default=True,
              help="Noise scale used inside the guidance term.")
@click.option("--guide-target", type=click.Choice(["denoised", "noisy"]),
              default="denoised", show_default=True)
@seed_option
@out_option
@guarded
def simulate(mixture_path, lambda_gui, t_stop, steps, center, sigma_mode,
             guide_target, seed, out):
    """One reverse-diffusion trajectory, optionally guided (CSV: t, coords)."""
    try:
        with open(mixture_path, "r", encoding="utf-8") as fh:
            mixture = Mixture.from_config(json.load(fh))
    except OSError as exc:
        raise IoError(f"cannot read mixture {mixture_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"mixture {mixture_path}: invalid JSON: {exc}") from exc
    schedule = make_schedule(steps)
    guidance = None
    if center is not None:
        try:
            coords = tuple(float(x) for x in center.split(","))
        except ValueError as exc:
            raise DomainError(f"bad --center {center!r}: {exc}") from exc
        guidance = GuidanceSpec(center=coords, lambda_gui=lambda_gui, t_stop=t_stop)
    elif lambda_gui > 0:
        raise DomainError("--lambda-gui > 0 needs a --center to steer toward")
    trajectory, _ = reverse_sample(schedule, mixture, guidance, seed=seed,
                                   sigma_mode=sigma_mode, guide_target=guide_target)
    rows = [["t"] + [f"x{i}" for i in range(mixture.dim)]]
    for step, z in zip(range(schedule.T, -1, -1), trajectory):
        rows.append([step] + [f"{x:.17g}" for x in z])
    _emit(_dump_csv(rows), out, "trajectory.csv")


def _svg_plot(series: list[tuple[str, list[int], list[tuple[float, float]]]]) -> str:
    """Minimal SVG: per-interval density bars plus a KDE polyline per series."""
    width, height, margin = 640, 360, 40
    plot_w, plot_h = width - 2 * margin, height - 2 * margin
    colors = ["#4878a8", "#e08214", "#5aa469", "#a05195"]

    max_density = 0.0
    scaled = []
    for name, counts, kde in series:
        total = sum(counts)
        dens = [c / (total * (1.0 / NUM_INTERVALS)) for c in counts]
        max_density = max(max_density, *dens, *(d for _, d in kde))
        scaled.append((name, dens, kde))
    max_density = max(max_density, 1e-9)

    def sx(x):
        return margin + x * plot_w

    def sy(d):
        return margin + plot_h * (1.0 - d / max_density)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="#333"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="#333"/>',
    ]
    for k in range(NUM_INTERVALS + 1):
        x = sx(k / NUM_INTERVALS)
        parts.append(f'<text x="{x:.2f}" y="{height - margin + 16}" font-size="10" '
                     f'text-anchor="middle" fill="#333">{k / NUM_INTERVALS:.1f}</text>')
    for idx, (name, dens, kde) in enumerate(scaled):
        color = colors[idx % len(colors)]
        bar_w = plot_w / NUM_INTERVALS
        for k, d in enumerate(dens):
            x = margin + k * bar_w
            y = sy(d)
            parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{bar_w:.2f}" '
                         f'height="{height - margin - y:.2f}" fill="{color}" '
                         f'fill-opacity="0.35"/>')
        points = " ".join(f"{sx(x):.2f},{sy(d):.2f}" for x, d in kde)
        parts.append(f'<polyline points="{points}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{width - margin - 6}" y="{margin + 14 + 14 * idx}" '
                     f'font-size="11" text-anchor="end" fill="{color}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


@main.command()
@click.option("--manifest", required=True, type=click.Path())
@click.option("--pool", type=click.Path(), default=None,
              help="Second manifest to overlay for comparison.")
@click.option("--out", type=click.Path(file_okay=False), default=".", show_default=True)
@guarded
def plot(manifest, pool, out):
    """Difficulty histogram + KDE as CSV data and a standalone SVG."""
    series = []
    loaded = load_manifest(manifest)
    values = [i.difficulty for i in loaded.items]
    series.append(("original", list(histogram(values).counts), kde_curve(values)))
    if pool is not None:
        pl = load_manifest(pool, role="pool")
        pvals = [i.difficulty for i in pl.items]
        series.append(("pool", list(histogram(pvals).counts), kde_curve(pvals)))

    rows = [["kind", "series", "x", "y"]]
    for name, counts, kde in series:
        for k, c in enumerate(counts):
            rows.append(["hist", name, f"{k / NUM_INTERVALS:.1f}", c])
        for x, d in kde:
            rows.append(["kde", name, f"{x:.17g}", f"{d:.17g}"])
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "plot.csv"), "w", encoding="utf-8") as fh:
        fh.write(_dump_csv(rows))
    with open(os.path.join(out, "plot.svg"), "w", encoding="utf-8") as fh:
        fh.write(_svg_plot(series))
    click.echo(f"wrote {os.path.join(out, 'plot.csv')}", err=True)
    click.echo(f"wrote {os.path.join(out, 'plot.svg')}", err=True)


if __name__ == "__main__":
    main()
