"""HTTP generation server.

Implements the generation wire contract: POST /v1/generate with
``{task, input, max_length, seed, request_id}`` answering
``{output, request_id}``. Stub mode serves the deterministic rule
transformations; model mode decodes with a seq2seq checkpoint.
"""

from __future__ import annotations

import argparse
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .rules import apply_task

ENV_PREFIX = "GENBRIDGE_"


@dataclass
class BridgeConfig:
    mode: str = "stub"  # "stub" or "model"
    model_id: Optional[str] = None
    device: str = "cpu"
    beam_size: int = 4
    max_length: int = 128
    end_to_end_behavior: str = "rule"  # or "echo"

    def validate(self) -> "BridgeConfig":
        if self.mode not in ("stub", "model"):
            raise ValueError(f"unknown mode: {self.mode!r}")
        if self.mode == "model" and not self.model_id:
            raise ValueError("model mode needs a model_id")
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.end_to_end_behavior not in ("rule", "echo"):
            raise ValueError(f"unknown end_to_end_behavior: {self.end_to_end_behavior!r}")
        return self


def load_config(path=None, env=None, **overrides) -> BridgeConfig:
    """File < environment < explicit overrides."""
    env = os.environ if env is None else env
    data: dict = {}
    if path:
        data.update(json.loads(Path(path).read_text(encoding="utf-8")))
    casts = {
        "mode": str,
        "model_id": str,
        "device": str,
        "beam_size": int,
        "max_length": int,
        "end_to_end_behavior": str,
    }
    for name, cast in casts.items():
        value = env.get(ENV_PREFIX + name.upper())
        if value is not None:
            data[name] = cast(value)
    for name, value in overrides.items():
        if value is not None:
            data[name] = value
    return BridgeConfig(**data).validate()


class _ModelRunner:
    """Lazy wrapper around a seq2seq checkpoint; only built in model mode."""

    def __init__(self, config: BridgeConfig):
        try:
            from transformers import AutoModelForSeq2SeqLM, AutoTokenizer
        except ImportError as exc:  # pragma: no cover - depends on extras
            raise RuntimeError(
                "model mode needs the 'model' extra (transformers + torch)"
            ) from exc
        self.tokenizer = AutoTokenizer.from_pretrained(config.model_id)
        self.model = AutoModelForSeq2SeqLM.from_pretrained(config.model_id)
        self.model.to(config.device)
        self.model.eval()
        self.config = config

    def generate(self, text: str, max_length: Optional[int]) -> str:  # pragma: no cover
        import torch

        inputs = self.tokenizer(text, return_tensors="pt").to(self.config.device)
        with torch.no_grad():
            output = self.model.generate(
                **inputs,
                num_beams=self.config.beam_size,
                max_length=max_length or self.config.max_length,
            )
        return self.tokenizer.decode(output[0], skip_special_tokens=True)


class _GenerateBody(BaseModel):
    task: str = Field(min_length=1)
    input: str = Field(min_length=1)
    max_length: Optional[int] = None
    seed: Optional[int] = None
    request_id: str = Field(min_length=1)


def create_app(config: Optional[BridgeConfig] = None) -> FastAPI:
    config = (config or BridgeConfig()).validate()
    runner = _ModelRunner(config) if config.mode == "model" else None
    app = FastAPI(title="genbridge")

    @app.post("/v1/generate")
    def generate(body: _GenerateBody):
        if body.max_length is not None and body.max_length < 1:
            raise HTTPException(
                status_code=400, detail={"error": "max_length must be >= 1"}
            )
        if runner is not None:
            output = runner.generate(body.input, body.max_length)
        else:
            output = apply_task(body.task, body.input, config.end_to_end_behavior)
            if output is None:
                raise HTTPException(
                    status_code=400, detail={"error": f"unknown task {body.task!r}"}
                )
        return {"output": output, "request_id": body.request_id}

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "mode": config.mode}

    return app


def main(argv=None) -> int:  # pragma: no cover - manual entry point
    import uvicorn

    parser = argparse.ArgumentParser(prog="genbridge")
    parser.add_argument("--config", help="bridge config JSON")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8091)
    parser.add_argument("--mode", choices=("stub", "model"))
    parser.add_argument("--model-id")
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, mode=args.mode, model_id=args.model_id)
        app = create_app(config)
    except (ValueError, RuntimeError, OSError) as exc:
        parser.exit(status=1, message=f"startup failed: {exc}\n")
    uvicorn.run(app, host=args.host, port=args.port)
    return 0
