"""Request loop speaking the predictor wire protocol.

Requests arrive as JSON lines {"id", "task", "input"} on stdin; each
answer is one line {"id", "output"} with the raw generated string,
unrepaired (mapping onto the label set is the harness's job). A
malformed request line yields an error record on stderr and processing
continues; an empty stream is a clean exit.
"""

from __future__ import annotations

import json
import sys
from typing import IO, Optional

from .config import AdapterConfig


class EchoBackend:
    """Debug backend: answers with the last whitespace-separated word."""

    def generate(self, task: str, text: str) -> str:
        words = text.split()
        return words[-1] if words else ""


class ModelBackend:
    """Seq2seq checkpoint backend (beam width from the config)."""

    def __init__(self, checkpoint: str, config: Optional[AdapterConfig] = None):
        from .model import load_model

        self.config = config or AdapterConfig()
        self.tokenizer, self.model = load_model(checkpoint, self.config)

    def generate(self, task: str, text: str) -> str:
        from .model import generate_one

        return generate_one(self.tokenizer, self.model, text, self.config)


def serve(
    backend,
    source: Optional[IO[str]] = None,
    sink: Optional[IO[str]] = None,
    errors: Optional[IO[str]] = None,
) -> int:
    source = source if source is not None else sys.stdin
    sink = sink if sink is not None else sys.stdout
    errors = errors if errors is not None else sys.stderr
    for lineno, line in enumerate(source, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
            request_id = request["id"]
            task = request.get("task", "")
            text = request["input"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            errors.write(
                json.dumps({"error": f"malformed request: {exc}", "line": lineno})
                + "\n"
            )
            errors.flush()
            continue
        output = backend.generate(task, text)
        sink.write(json.dumps({"id": request_id, "output": output}) + "\n")
        sink.flush()
    return 0
