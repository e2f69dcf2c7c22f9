"""HTTP/JSON service over a project: query registration, search, labelling, builds.

All relation logic lives in the library modules; the service is a thin,
stateless-between-requests layer over the persisted project directory, so a
restart reproduces identical GET responses.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import bootstrap, engine, querylang
from .bootstrap import BootstrapError
from .errors import SynsearchError
from .project import Project, ProjectError, config_from_dict
from .querylang import QueryParseError


class QueryIn(BaseModel):
    id: str | None = None
    raw: str
    conllu: str | None = None
    trigger_map: dict[str, list[str]] | None = None
    dry_run: bool = False


class LabelsIn(BaseModel):
    labels: list[str | bool]


class DatasetIn(BaseModel):
    id: str
    relation: str
    query_ids: list[str]
    max_positives: int = 100
    neg_ratio: int = 10
    seed: int = 0
    signature_override: list[list[str]] | None = None


def _element_to_dict(el: querylang.QueryElement) -> dict:
    return {
        "surface": el.surface,
        "role": el.role,
        "capture_name": el.capture_name,
        "expand": el.expand,
        "constraints": [
            {"key": c.key, "values": list(c.values), "bare": c.bare}
            for c in el.constraints
        ],
    }


def _match_payload(project: Project, match: engine.Match) -> dict:
    payload = engine.match_to_dict(match)
    payload["tokens"] = project.corpus.get(match.sentence_id).words()
    return payload


def create_app(project: Project, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="synsearch", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(SynsearchError)
    async def _synsearch_error(request, exc):
        return JSONResponse(status_code=400, content={"detail": {"message": str(exc)}})

    @app.get("/corpus/stats")
    def corpus_stats():
        return project.index.stats()

    @app.post("/queries")
    def register_query(body: QueryIn):
        try:
            if body.dry_run:
                query = querylang.parse_query(body.raw, query_id=body.id)
                return {
                    "elements": [_element_to_dict(el) for el in query.elements],
                    "stripped": querylang.strip(query),
                }
            if not body.id:
                raise HTTPException(
                    status_code=400,
                    detail={"message": "query registration requires an id"})
            return project.register_query(
                body.id, body.raw, conllu_text=body.conllu,
                trigger_map=body.trigger_map)
        except QueryParseError as err:
            raise HTTPException(
                status_code=400,
                detail={"message": str(err), "position": err.position})

    @app.get("/queries")
    def list_queries():
        out = []
        for qid in sorted(project.queries):
            record = project.queries[qid]
            out.append({
                "id": qid,
                "raw": record["raw"],
                "compile": record["compile"],
                "verdict": project.verdict_for(qid),
            })
        return {"queries": out}

    @app.get("/queries/{query_id}")
    def get_query(query_id: str):
        try:
            record = project.get_query(query_id)
        except ProjectError as err:
            raise HTTPException(status_code=404, detail={"message": str(err)})
        return {**record, "verdict": project.verdict_for(query_id)}

    @app.post("/queries/{query_id}/search")
    def search_query(query_id: str, limit: int = Query(10, ge=0),
                     offset: int = Query(0, ge=0)):
        try:
            pattern = project.pattern_for(query_id)
        except ProjectError as err:
            raise HTTPException(status_code=404, detail={"message": str(err)})
        page, total = engine.search(pattern, project.index, limit=limit, offset=offset)
        return {
            "total": total,
            "limit": limit,
            "offset": offset,
            "matches": [_match_payload(project, m) for m in page],
        }

    @app.post("/queries/{query_id}/sample")
    def sample_query(query_id: str, n: int = Query(5, ge=1), seed: int = Query(0)):
        try:
            project.pattern_for(query_id)
        except ProjectError as err:
            raise HTTPException(status_code=404, detail={"message": str(err)})
        quality = project.sample_for_validation(query_id, n=n, seed=seed)
        matches = [
            {**ref, "tokens": project.corpus.get(ref["sentence_id"]).words()}
            for ref in quality["matches"]
        ]
        return {"seed": seed, "n": n, "matches": matches, "verdict": quality["verdict"]}

    @app.post("/queries/{query_id}/labels")
    def label_query(query_id: str, body: LabelsIn):
        try:
            labels = bootstrap.parse_labels(body.labels)
        except ValueError as err:
            raise HTTPException(status_code=400, detail={"message": str(err)})
        try:
            verdict = project.submit_labels(query_id, labels)
        except ProjectError as err:
            status = 404 if "unknown query" in str(err) else 400
            raise HTTPException(status_code=status, detail={"message": str(err)})
        return {"id": query_id, "verdict": verdict}

    @app.post("/datasets")
    def build_dataset(body: DatasetIn, include_pending: bool = Query(False)):
        config = config_from_dict(body.model_dump())
        for qid in config.query_ids:
            if qid not in project.queries:
                raise HTTPException(
                    status_code=404, detail={"message": f"unknown query id {qid!r}"})
        try:
            return project.build_dataset(body.id, config, include_pending=include_pending)
        except BootstrapError as err:
            if "pending verdicts" in str(err):
                raise HTTPException(status_code=409, detail={"message": str(err)})
            raise HTTPException(status_code=400, detail={"message": str(err)})
        except ProjectError as err:
            raise HTTPException(status_code=409, detail={"message": str(err)})

    @app.get("/datasets")
    def list_datasets():
        return {"datasets": project.dataset_ids()}

    @app.get("/datasets/{dataset_id}")
    def dataset_info(dataset_id: str):
        try:
            info = project.dataset_info(dataset_id)
        except ProjectError as err:
            raise HTTPException(status_code=404, detail={"message": str(err)})
        info["downloads"] = {
            "jsonl": f"/datasets/{dataset_id}/download/jsonl",
            "markers": f"/datasets/{dataset_id}/download/markers",
        }
        return info

    @app.get("/datasets/{dataset_id}/status")
    def dataset_status(dataset_id: str):
        try:
            info = project.dataset_info(dataset_id)
        except ProjectError as err:
            raise HTTPException(status_code=404, detail={"message": str(err)})
        return {"id": dataset_id, "status": info["status"]}

    @app.get("/datasets/{dataset_id}/download/{artifact}")
    def dataset_download(dataset_id: str, artifact: str):
        names = {"jsonl": "dataset.jsonl", "markers": "markers.txt"}
        if artifact not in names:
            raise HTTPException(status_code=404, detail={"message": "unknown artifact"})
        path = project.dataset_dir(dataset_id) / names[artifact]
        if not path.exists():
            raise HTTPException(status_code=404, detail={"message": "unknown dataset id"})
        media = "application/jsonl" if artifact == "jsonl" else "text/plain"
        return FileResponse(path, media_type=media,
                            filename=f"{dataset_id}-{names[artifact]}")

    if ui_dir:
        ui_path = Path(ui_dir)
        if ui_path.is_dir():
            app.mount("/", StaticFiles(directory=ui_path, html=True), name="ui")

    return app
