"""HTTP serving of the tiny models behind the engine's wire contracts.

POST /v1/chat/completions takes {model, messages, temperature, max_tokens,
n, seed?} and returns {model, choices: [{index, message: {role, content}}]}.
POST /score takes {prompt, code} and returns {score}.
"""

from __future__ import annotations

import threading
import time

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .reward_model import TinyRewardModel
from .tinylm import TinyLM


class ChatMessage(BaseModel):
    role: str
    content: str


class ChatRequest(BaseModel):
    model: str = ""
    messages: list[ChatMessage]
    temperature: float = Field(default=0.0, ge=0.0, le=2.0)
    max_tokens: int = Field(default=128, ge=1)
    n: int = Field(default=1, ge=1)
    seed: int | None = None


class ScoreRequest(BaseModel):
    prompt: str
    code: str


def make_app(generator: TinyLM | None = None, scorer: TinyRewardModel | None = None) -> FastAPI:
    app = FastAPI(title="codeloop-bridge")

    @app.get("/health")
    def health():
        return {"ok": True, "generator": generator is not None, "scorer": scorer is not None}

    @app.post("/v1/chat/completions")
    def chat(request: ChatRequest):
        if generator is None:
            raise HTTPException(status_code=503, detail="no generator loaded")
        completions = generator.complete(
            [m.model_dump() for m in request.messages],
            temperature=request.temperature,
            max_tokens=request.max_tokens,
            n=request.n,
            seed=request.seed,
        )
        return {
            "model": request.model or "tinylm",
            "choices": [
                {"index": i, "message": {"role": "assistant", "content": text}}
                for i, text in enumerate(completions)
            ],
        }

    @app.post("/score")
    def score(request: ScoreRequest):
        if scorer is None:
            raise HTTPException(status_code=503, detail="no scorer loaded")
        return {"score": scorer.score(request.prompt, request.code)}

    return app


class ServerHandle:
    """A uvicorn server on an ephemeral port, runnable from tests."""

    def __init__(self, app, port: int = 0):
        import uvicorn

        self._config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning")
        self._server = uvicorn.Server(self._config)
        self._thread = threading.Thread(target=self._server.run, daemon=True)

    def __enter__(self):
        self._thread.start()
        deadline = time.monotonic() + 15
        while not self._server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("bridge server did not start in time")
            time.sleep(0.02)
        return self

    def __exit__(self, *exc):
        self._server.should_exit = True
        self._thread.join(timeout=10)

    @property
    def port(self) -> int:
        servers = self._server.servers
        return servers[0].sockets[0].getsockname()[1]

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    @property
    def chat_url(self) -> str:
        return f"{self.base_url}/v1/chat/completions"

    @property
    def score_url(self) -> str:
        return f"{self.base_url}/score"
