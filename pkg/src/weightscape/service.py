"""HTTP session API driving interactive exploration.

Sessions sit over one base checkpoint each (the server's default, or a
`{base, graph_config}` override given at session creation). Clients set a
perturbation plan, render comparison grids, lock a latent for the
identical-inputs protocol, and save picks (tile + provenance) into an on-disk
gallery. Rendering is stateless: any grid is a pure function of its provenance
record, which is stored alongside every image. Derived checkpoints are cached
per (base content, plan text) with a bounded budget; evicted ones are
recomputed deterministically on demand.
"""

from __future__ import annotations

import io
import json
import threading
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse, Response
from PIL import Image
from pydantic import BaseModel

from . import checkpoint as ckpt
from . import perturb, render
from .configs import resolve_config
from .errors import WeightscapeError
from .graph import BlockId, GeneratorGraph, build_graph


class SessionBody(BaseModel):
    base: str | None = None
    graph_config: str | None = None


class PlanBody(BaseModel):
    mode: str
    seed: int
    alpha: float = 0.0
    blocks: list[str] = []


class RenderBody(BaseModel):
    classes: list[int]
    latent_seed: int = 0
    count: int = 1
    compare_base: bool = True


class LockLatentBody(BaseModel):
    latent_seed: int
    index: int


class SaveBody(BaseModel):
    grid_id: str
    tile: list[int]  # [row, col]


@dataclass
class Session:
    id: str
    base: ckpt.Checkpoint
    base_key: str
    graph: GeneratorGraph
    plan: perturb.PerturbationPlan | None = None
    locked_latent: tuple[int, int] | None = None  # (latent_seed, index)
    history: list[dict] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


class _DerivedCache:
    """(base content key, plan text) -> derived checkpoint, LRU with a fixed budget."""

    def __init__(self, budget: int = 8):
        self._budget = budget
        self._items: OrderedDict[tuple[str, str], ckpt.Checkpoint] = OrderedDict()
        self._lock = threading.Lock()

    def get(self, base: ckpt.Checkpoint, base_key: str,
            plan: perturb.PerturbationPlan) -> ckpt.Checkpoint:
        key = (base_key, plan.to_text())
        with self._lock:
            if key in self._items:
                self._items.move_to_end(key)
                return self._items[key]
        derived = perturb.apply_plan(base, plan)
        with self._lock:
            self._items[key] = derived
            self._items.move_to_end(key)
            while len(self._items) > self._budget:
                self._items.popitem(last=False)
        return derived


def _error(status: int, code: str, message: str, detail: str = "") -> HTTPException:
    return HTTPException(status_code=status,
                         detail={"code": code, "message": message, "detail": detail})


def _plan_from_body(body: PlanBody) -> perturb.PerturbationPlan:
    try:
        targets = frozenset(BlockId.parse(b) for b in body.blocks)
        plan = perturb.PerturbationPlan(
            mode=body.mode, alpha=body.alpha, seed=body.seed, target_blocks=targets,
        )
        plan.validate()
        return plan
    except WeightscapeError as exc:
        raise _error(400, "invalid_plan", "plan rejected", str(exc)) from exc


def create_app(
    base_path: str | Path,
    graph_config: str,
    gallery_dir: str | Path = "gallery",
    cache_budget: int = 8,
    studio_dir: str | Path | None = None,
) -> FastAPI:
    default_base = ckpt.load(base_path)
    default_base.meta.setdefault("source", str(base_path))
    default_base_key = default_base.content_key()
    default_config = resolve_config(graph_config)
    default_graph = build_graph(default_config)
    cache = _DerivedCache(budget=cache_budget)
    gallery = Path(gallery_dir)

    sessions: dict[str, Session] = {}
    grids: dict[str, tuple[bytes, dict]] = {}  # grid_id -> (png bytes, provenance)
    state_lock = threading.Lock()

    app = FastAPI(title="weightscape exploration service")

    @app.exception_handler(HTTPException)
    async def _http_error(_request, exc: HTTPException):
        detail = exc.detail if isinstance(exc.detail, dict) else {
            "code": "error", "message": str(exc.detail), "detail": ""}
        return JSONResponse(status_code=exc.status_code, content=detail)

    def _session(session_id: str) -> Session:
        with state_lock:
            s = sessions.get(session_id)
        if s is None:
            raise _error(404, "unknown_session", f"no session {session_id}")
        return s

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "graph": default_config.name,
                "base": default_base.meta.get("source", "")}

    @app.post("/sessions")
    def create_session(body: SessionBody | None = None) -> dict:
        body = body or SessionBody()
        base, base_key, graph = default_base, default_base_key, default_graph
        try:
            if body.graph_config is not None:
                graph = build_graph(resolve_config(body.graph_config))
            if body.base is not None:
                base = ckpt.load(body.base)
                base.meta.setdefault("source", str(body.base))
                base_key = base.content_key()
            ckpt.validate_against(graph, base)
        except (WeightscapeError, OSError) as exc:
            raise _error(400, "invalid_session", "cannot open session", str(exc)) from exc
        s = Session(id=uuid.uuid4().hex, base=base, base_key=base_key, graph=graph)
        with state_lock:
            sessions[s.id] = s
        cfg = graph.config
        return {"session_id": s.id, "graph": cfg.to_dict(),
                "num_blocks": cfg.num_blocks, "num_classes": cfg.num_classes}

    @app.post("/sessions/{session_id}/plan")
    def set_plan(session_id: str, body: PlanBody) -> dict:
        s = _session(session_id)
        plan = _plan_from_body(body)
        with s.lock:
            s.plan = plan
        return {"plan_id": plan.to_text()}

    @app.post("/sessions/{session_id}/lock-latent")
    def lock_latent(session_id: str, body: LockLatentBody) -> dict:
        if body.index < 0:
            raise _error(400, "invalid_latent", f"index must be >= 0, got {body.index}")
        s = _session(session_id)
        with s.lock:
            s.locked_latent = (body.latent_seed, body.index)
        return {"locked": {"latent_seed": body.latent_seed, "index": body.index}}

    @app.post("/sessions/{session_id}/unlock-latent")
    def unlock_latent(session_id: str) -> dict:
        s = _session(session_id)
        with s.lock:
            s.locked_latent = None
        return {"locked": None}

    @app.post("/sessions/{session_id}/render")
    def render_session(session_id: str, body: RenderBody) -> dict:
        s = _session(session_id)
        with s.lock:
            plan = s.plan
            locked = s.locked_latent
        variants: list[render.VariantSpec] = []
        if plan is not None:
            variants.append(render.VariantSpec("derived", cache.get(s.base, s.base_key, plan)))
        if body.compare_base or plan is None:
            variants.append(render.VariantSpec("base", s.base))
        num_classes = s.graph.config.num_classes
        if not body.classes:
            raise _error(400, "invalid_render", "classes must be non-empty")
        if any(not 0 <= c < num_classes for c in body.classes):
            raise _error(400, "invalid_render",
                         f"class indices must be in [0, {num_classes})")
        if body.count < 1:
            raise _error(400, "invalid_render", "count must be >= 1")
        latent_seed, latent_index = body.latent_seed, None
        if locked is not None:
            latent_seed, latent_index = locked
        request = render.RenderRequest(
            latent_seed=latent_seed,
            latent_count=body.count,
            classes=tuple(body.classes),
            variants=tuple(variants),
            latent_index=latent_index,
        )
        try:
            grid = render.render_grid(request, s.graph)
        except WeightscapeError as exc:
            raise _error(400, "render_failed", "render rejected", str(exc)) from exc
        grid_id = uuid.uuid4().hex
        png = grid.to_png_bytes()
        with state_lock:
            grids[grid_id] = (png, grid.provenance)
        with s.lock:
            s.history.append({"plan": plan.to_text() if plan else None, "grid_id": grid_id})
        return {"grid_id": grid_id, "rows": grid.rows, "cols": grid.cols,
                "tile_size": grid.tile_size,
                "columns": [v.label for v in variants]}

    def _grid(grid_id: str) -> tuple[bytes, dict]:
        with state_lock:
            item = grids.get(grid_id)
        if item is None:
            raise _error(404, "unknown_grid", f"no grid {grid_id}")
        return item

    @app.get("/grids/{grid_id}.png")
    def grid_png(grid_id: str) -> Response:
        png, _ = _grid(grid_id)
        return Response(content=png, media_type="image/png")

    @app.get("/grids/{grid_id}/provenance")
    def grid_provenance(grid_id: str) -> dict:
        _, provenance = _grid(grid_id)
        return provenance

    @app.post("/sessions/{session_id}/save")
    def save_pick(session_id: str, body: SaveBody) -> dict:
        _session(session_id)
        png, provenance = _grid(body.grid_id)
        if len(body.tile) != 2:
            raise _error(400, "invalid_tile", "tile must be [row, col]")
        row, col = body.tile
        if not (0 <= row < provenance["rows"] and 0 <= col < provenance["cols"]):
            raise _error(400, "invalid_tile",
                         f"tile {body.tile} outside {provenance['rows']}x{provenance['cols']}")
        r = provenance["tile_size"]
        pixels = np.asarray(Image.open(io.BytesIO(png)).convert("RGB"))
        tile = pixels[row * r : (row + 1) * r, col * r : (col + 1) * r]
        buf = io.BytesIO()
        Image.fromarray(tile).save(buf, format="PNG")

        pick_id = uuid.uuid4().hex
        gallery.mkdir(parents=True, exist_ok=True)
        (gallery / f"{pick_id}.png").write_bytes(buf.getvalue())
        record = {"pick_id": pick_id, "grid_id": body.grid_id,
                  "tile": [row, col], "provenance": provenance}
        (gallery / f"{pick_id}.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
        return record

    @app.get("/gallery")
    def list_gallery() -> list[dict]:
        if not gallery.is_dir():
            return []
        out = []
        for path in sorted(gallery.glob("*.json")):
            out.append(json.loads(path.read_text()))
        return out

    if studio_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(studio_dir), html=True), name="studio")

    return app
