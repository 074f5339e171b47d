"""Chat-completions endpoint over a trained adapter.

POST /v1/chat/completions takes the standard body: a model name and a
messages list whose system entry is the task instruction and whose user
entry is the input text. The two are folded into the training prompt format
and decoded greedily, so callers asking for temperature 0 get exactly that.
Malformed requests get HTTP 400 with a JSON error body; request handling is
serialized around the model, matching the single-copy weights.
"""

from __future__ import annotations

import hashlib
import json
import socket
import threading
from pathlib import Path

import uvicorn
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .generate import greedy_generate
from .sft import format_prompt
from .errors import StartupError
from .train import load_adapter


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": {"message": message}})


def _extract_messages(body: dict) -> tuple[str, str] | str:
    """Pull (instruction, input) out of the request body, or an error string."""
    messages = body.get("messages")
    if not isinstance(messages, list) or not messages:
        return "request must carry a non-empty 'messages' list"
    instruction = ""
    user_text = None
    for entry in messages:
        if not isinstance(entry, dict):
            return "every message must be an object"
        role, content = entry.get("role"), entry.get("content")
        if not isinstance(role, str) or not isinstance(content, str):
            return "every message needs string 'role' and 'content'"
        if role == "system":
            instruction = content
        elif role == "user":
            user_text = content
    if user_text is None:
        return "messages must include a user entry"
    return instruction, user_text


def create_app(adapter_dir: str | Path) -> FastAPI:
    model, tokenizer, manifest = load_adapter(adapter_dir)
    lock = threading.Lock()
    app = FastAPI()

    @app.post("/v1/chat/completions")
    async def chat_completions(request: Request):
        try:
            body = json.loads(await request.body())
        except (json.JSONDecodeError, UnicodeDecodeError):
            return _error(400, "request body is not valid JSON")
        if not isinstance(body, dict):
            return _error(400, "request body must be a JSON object")
        extracted = _extract_messages(body)
        if isinstance(extracted, str):
            return _error(400, extracted)
        instruction, user_text = extracted
        prompt = format_prompt(instruction, user_text)
        with lock:
            content = greedy_generate(model, tokenizer, prompt)
        completion_id = hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]
        return JSONResponse(
            {
                "id": f"cmpl-{completion_id}",
                "object": "chat.completion",
                "created": 0,
                "model": manifest["base_model_id"],
                "choices": [
                    {
                        "index": 0,
                        "message": {"role": "assistant", "content": content},
                        "finish_reason": "stop",
                    }
                ],
            }
        )

    return app


def _check_port_free(host: str, port: int) -> None:
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        raise StartupError(f"cannot bind {host}:{port}: {exc}") from exc
    finally:
        probe.close()


def run_server(adapter_dir: str | Path, host: str = "127.0.0.1", port: int = 8080) -> None:
    """Load the adapter and serve until interrupted; fails fast on a busy port."""
    _check_port_free(host, port)
    app = create_app(adapter_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
