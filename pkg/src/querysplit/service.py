"""HTTP front end: accepts a raw multi-intent query and answers with the
executable single-intent sub-queries, plus batch evaluation and health."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel

from . import dataio, metrics
from .backends import Backend, build_backend, cached
from .errors import ConfigError, PipelineError, QuerySplitError
from .pipeline import PipelineConfig, run_pipeline, two_stage_once_config
from .textkit import FillerLexicon, default_lexicon

ENV_PREFIX = "QUERYSPLIT_"


@dataclass
class ServiceConfig:
    listen: str = "127.0.0.1:8080"
    pipeline_config: Optional[str] = None  # path; None = rule two-stage default
    backends: dict = field(default_factory=dict)  # id -> backend spec mapping
    lexicon: Optional[str] = None  # path; None = built-in lexicon
    timeout_s: float = 10.0
    cache_capacity: int = 0

    @property
    def host(self) -> str:
        return self.listen.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen.rsplit(":", 1)[1])


def load_service_config(
    path=None, env: Optional[Mapping[str, str]] = None, **overrides
) -> ServiceConfig:
    """Merge a config file, environment variables, and explicit overrides.

    Precedence: overrides (CLI flags) > environment > file > defaults. The
    environment names are QUERYSPLIT_LISTEN, QUERYSPLIT_PIPELINE_CONFIG,
    QUERYSPLIT_BACKENDS (JSON), QUERYSPLIT_LEXICON, QUERYSPLIT_TIMEOUT_S and
    QUERYSPLIT_CACHE_CAPACITY.
    """
    env = os.environ if env is None else env
    data: dict = {}
    if path is not None:
        try:
            data.update(json.loads(Path(path).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read service config {path}: {exc}") from exc
    casts = {
        "listen": str,
        "pipeline_config": str,
        "lexicon": str,
        "timeout_s": float,
        "cache_capacity": int,
        "backends": json.loads,
    }
    for name, cast in casts.items():
        env_value = env.get(ENV_PREFIX + name.upper())
        if env_value is not None:
            try:
                data[name] = cast(env_value)
            except (ValueError, json.JSONDecodeError) as exc:
                raise ConfigError(f"bad {ENV_PREFIX}{name.upper()}: {exc}") from exc
    for name, value in overrides.items():
        if value is not None:
            data[name] = value
    unknown = set(data) - set(ServiceConfig.__dataclass_fields__)
    if unknown:
        raise ConfigError(f"unknown service config field(s): {', '.join(sorted(unknown))}")
    return ServiceConfig(**data)


class _SplitRequest(BaseModel):
    query: str


class _EvalInstancePayload(BaseModel):
    pred: list[str]
    ref: list[str]
    rewrite_flags: Optional[list[bool]] = None


class _EvalRequest(BaseModel):
    instances: Optional[list[_EvalInstancePayload]] = None
    corpus_path: Optional[str] = None


def _build_runtime(config: ServiceConfig):
    if config.lexicon:
        if not Path(config.lexicon).exists():
            raise ConfigError(f"lexicon file not found: {config.lexicon}")
        lexicon = FillerLexicon.from_file(config.lexicon)
    else:
        lexicon = default_lexicon()
    if config.pipeline_config:
        if not Path(config.pipeline_config).exists():
            raise ConfigError(f"pipeline config not found: {config.pipeline_config}")
        pipeline_config = PipelineConfig.from_file(config.pipeline_config)
    else:
        pipeline_config = two_stage_once_config()
    registry: dict[str, Backend] = {}
    for backend_id, spec in config.backends.items():
        backend = build_backend(spec)
        if config.cache_capacity and spec.get("kind") == "remote":
            backend = cached(backend, config.cache_capacity)
        registry[backend_id] = backend
    missing = pipeline_config.backend_ids() - set(registry)
    if missing:
        raise ConfigError(f"pipeline references unregistered backend(s): {sorted(missing)}")
    return lexicon, pipeline_config, registry


def create_app(config: Optional[ServiceConfig] = None) -> FastAPI:
    config = config or ServiceConfig()
    lexicon, pipeline_config, registry = _build_runtime(config)
    app = FastAPI(title="querysplit")

    @app.post("/v1/split")
    def split(body: _SplitRequest, trace: int = Query(default=0)):
        if not body.query or not body.query.strip():
            raise HTTPException(status_code=400, detail={"error": "query must be non-empty"})
        try:
            result = run_pipeline(pipeline_config, body.query, registry, lexicon=lexicon)
        except PipelineError as exc:
            raise HTTPException(
                status_code=502,
                detail={"error": str(exc), "stage": exc.stage_index, "step": exc.step},
            ) from exc
        except QuerySplitError as exc:
            raise HTTPException(status_code=500, detail={"error": str(exc)}) from exc
        payload = {"sub_queries": list(result.final)}
        if trace:
            payload["trace"] = result.to_dict()
        return payload

    @app.post("/v1/evaluate")
    def evaluate(body: _EvalRequest):
        if (body.instances is None) == (body.corpus_path is None):
            raise HTTPException(
                status_code=400,
                detail={"error": "provide exactly one of 'instances' or 'corpus_path'"},
            )
        if body.instances is not None:
            try:
                pairs = [
                    metrics.make_instance(p.pred, p.ref, p.rewrite_flags)
                    for p in body.instances
                ]
                report = metrics.evaluate(pairs)
            except (ValueError, QuerySplitError) as exc:
                raise HTTPException(status_code=400, detail={"error": str(exc)}) from exc
            return report.to_dict()
        try:
            corpus = dataio.load(body.corpus_path)
        except (OSError, QuerySplitError) as exc:
            raise HTTPException(status_code=400, detail={"error": str(exc)}) from exc
        pairs = []
        for inst in corpus:
            try:
                result = run_pipeline(pipeline_config, inst.aggregated, registry, lexicon=lexicon)
                predicted = list(result.final)
            except QuerySplitError:
                predicted = []
            pairs.append(
                metrics.make_instance(predicted, inst.completed_queries, inst.rewrite_flags)
            )
        return metrics.evaluate(pairs).to_dict()

    @app.get("/v1/health")
    def health():
        reachability = {bid: backend.is_healthy() for bid, backend in registry.items()}
        status = "ok" if all(reachability.values()) else "degraded"
        return {"status": status, "backends": reachability}

    return app


def serve(config: ServiceConfig) -> None:  # pragma: no cover - manual entry point
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port)
