"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data or format error. Commands only
write to their declared --out/--outdir paths (render also writes the
provenance sidecar next to its output image). WEIGHTSCAPE_THREADS controls
render parallelism; output bytes do not depend on it.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from . import metrics, perturb, render
from .configs import resolve_config
from .errors import ConfigError, WeightscapeError
from .graph import ALL_KINDS, BlockId, build_graph


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _parse_blocks(text: str) -> list[BlockId]:
    """Accept 'B2', 'B1..B7', or comma-separated mixes of both."""
    out: list[BlockId] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo_id, hi_id = BlockId.parse(lo), BlockId.parse(hi)
            if lo_id.stage != 1 or hi_id.stage != 1 or lo_id.index > hi_id.index:
                raise ConfigError(f"bad block range {part!r}")
            out.extend(BlockId.block(i) for i in range(lo_id.index, hi_id.index + 1))
        elif part:
            out.append(BlockId.parse(part))
    if not out:
        raise ConfigError(f"no blocks in {text!r}")
    return out


def _parse_kinds(text: str | None) -> frozenset[str]:
    if text is None:
        return perturb.DEFAULT_KIND_FILTER
    kinds = frozenset(k.strip() for k in text.split(",") if k.strip())
    unknown = kinds - set(ALL_KINDS)
    if unknown:
        raise ConfigError(f"unknown kinds: {', '.join(sorted(unknown))}")
    return kinds


def _load_with_source(path: str) -> ckpt.Checkpoint:
    c = ckpt.load(path)
    c.meta.setdefault("source", str(path))
    return c


def _write_derived(derived: ckpt.Checkpoint, out: str) -> None:
    ckpt.save(derived, out)
    print(f"wrote {out}")


def _cmd_synth(args: argparse.Namespace) -> int:
    cfg = resolve_config(args.config)
    c = ckpt.synthesize(cfg, seed=args.seed, scheme=args.scheme)
    ckpt.save(c, args.out)
    graph = build_graph(cfg)
    print(f"wrote {args.out}: {len(c.entries)} entries, "
          f"{graph.param_count()} trainable parameters")
    return 0


def _cmd_perturb(args: argparse.Namespace) -> int:
    base = _load_with_source(args.base)
    derived = perturb.perturb_multiplicative(
        base, alpha=args.alpha, seed=args.seed, kind_filter=_parse_kinds(args.kinds)
    )
    _write_derived(derived, args.out)
    return 0


def _cmd_randomize_block(args: argparse.Namespace) -> int:
    base = _load_with_source(args.base)
    targets = frozenset(_parse_blocks(args.blocks))
    derived = perturb.randomize_block(
        base, targets, seed=args.seed,
        per_pixel_stats=not args.whole_entry_stats,
    )
    _write_derived(derived, args.out)
    return 0


def _render_to(graph, variants, args, out_path: Path, latent_index=None) -> render.ImageGrid:
    request = render.RenderRequest(
        latent_seed=args.latent_seed,
        latent_count=args.count,
        classes=tuple(args.classes),
        variants=tuple(variants),
        latent_index=latent_index,
    )
    grid = render.render_grid(request, graph)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    render.write_grid(grid, out_path)
    return grid


def _cmd_block_sweep(args: argparse.Namespace) -> int:
    base = _load_with_source(args.base)
    cfg = resolve_config(args.graph)
    graph = build_graph(cfg)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for block in _parse_blocks(args.blocks):
        derived = perturb.randomize_block(base, frozenset({block}), seed=args.seed)
        tag = str(block).lower()
        ckpt.save(derived, outdir / f"{tag}.ckpt")
        report = [
            {"name": d.name, "block": str(d.block), "max_abs_diff": d.max_abs_diff,
             "differing": d.differing}
            for d in ckpt.diff(base, derived)
            if d.differing
        ]
        (outdir / f"{tag}.diff.json").write_text(json.dumps(report, indent=2) + "\n")
        variants = [render.VariantSpec(tag, derived), render.VariantSpec("base", base)]
        grid = _render_to(graph, variants, args, outdir / f"{tag}.png")
        print(f"{block}: {len(report)} entries touched, grid {grid.rows}x{grid.cols}")
    return 0


def _cmd_render(args: argparse.Namespace) -> int:
    cfg = resolve_config(args.graph)
    graph = build_graph(cfg)
    variants = []
    for path in args.checkpoints.split(","):
        path = path.strip()
        variants.append(render.VariantSpec(Path(path).stem, _load_with_source(path)))
    grid = _render_to(graph, variants, args, Path(args.out), latent_index=args.latent_index)
    print(f"wrote {args.out}: {grid.rows} rows x {grid.cols} cols, tile {grid.tile_size}")
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    c = ckpt.load(args.checkpoint)
    stats = ckpt.compute_stats(c, per_pixel_conv=not args.whole_entry_stats)
    for e in c.entries:
        st = stats[e.name]
        record = {
            "name": e.name, "block": str(e.block), "kind": e.kind,
            "shape": list(e.shape), "size": e.size,
            "mean": np.asarray(st.mean).tolist(), "std": np.asarray(st.std).tolist(),
            "per_pixel": st.per_pixel,
        }
        print(json.dumps(record))
    return 0


def _cmd_diff(args: argparse.Namespace) -> int:
    a = ckpt.load(args.a)
    b = ckpt.load(args.b)
    for d in ckpt.diff(a, b):
        print(json.dumps({"name": d.name, "block": str(d.block), "size": d.size,
                          "max_abs_diff": d.max_abs_diff, "differing": d.differing}))
    return 0


def _cmd_diverge(args: argparse.Namespace) -> int:
    base = _load_with_source(args.base)
    cfg = resolve_config(args.graph)
    graph = build_graph(cfg)
    alphas = [float(a) for a in args.alphas.split(",")]
    z = render.sample_latents(args.latent_seed, 1, cfg.latent_dim)[0]
    curve = metrics.divergence_curve(base, graph, alphas, args.seed, z, args.class_index)
    for alpha, dist in curve:
        print(json.dumps({"alpha": alpha, "image_l2": dist}))
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        base_path=args.base,
        graph_config=args.graph,
        gallery_dir=args.gallery,
        studio_dir=args.studio,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _add_render_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--classes", type=lambda s: [int(c) for c in s.split(",")],
                   default=[0], help="comma-separated class indices (default 0)")
    p.add_argument("--latent-seed", type=int, default=0)
    p.add_argument("--count", type=int, default=2, help="latents per class (default 2)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="weightscape", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-checkpoint", help="synthesize a deterministic checkpoint")
    p.add_argument("--config", required=True, help="built-in name (tiny64, paper256) or JSON file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--scheme", choices=["unit_normal", "scaled_fan_in"], default="unit_normal")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("perturb", help="multiplicative weight perturbation")
    p.add_argument("--base", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--kinds", help="comma-separated parameter kinds to affect")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_perturb)

    p = sub.add_parser("randomize-block", help="statistics-matched block randomization")
    p.add_argument("--base", required=True)
    p.add_argument("--blocks", required=True, help="e.g. B2 or B1..B3,B5")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--whole-entry-stats", action="store_true",
                   help="match whole-entry stats instead of per-pixel conv stats")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_randomize_block)

    p = sub.add_parser("block-sweep", help="randomize each block in turn; emit checkpoint+grid per block")
    p.add_argument("--base", required=True)
    p.add_argument("--blocks", required=True, help="e.g. B1..B7")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--outdir", required=True)
    _add_render_flags(p)
    p.set_defaults(func=_cmd_block_sweep)

    p = sub.add_parser("render", help="render a comparison grid over checkpoint variants")
    p.add_argument("--graph", required=True)
    p.add_argument("--checkpoints", required=True, help="comma-separated checkpoint files (columns)")
    p.add_argument("--out", required=True)
    p.add_argument("--latent-index", type=int, default=None,
                   help="render a single latent stream element instead of --count latents")
    _add_render_flags(p)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("stats", help="per-entry statistics as JSON lines")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--whole-entry-stats", action="store_true")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("diff", help="per-entry differences as JSON lines")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=_cmd_diff)

    p = sub.add_parser("diverge", help="image distance vs perturbation strength")
    p.add_argument("--base", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--alphas", required=True, help="comma-separated, ascending, first 0")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--class-index", type=int, default=0)
    p.add_argument("--latent-seed", type=int, default=0)
    p.set_defaults(func=_cmd_diverge)

    p = sub.add_parser("serve", help="run the exploration HTTP service")
    p.add_argument("--base", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--gallery", default="gallery")
    p.add_argument("--studio", default=None, help="directory of static studio files to serve at /")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"weightscape: {exc}", file=sys.stderr)
        return 1
    except (WeightscapeError, OSError) as exc:
        print(f"weightscape: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
