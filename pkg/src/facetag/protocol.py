"""Client for external predictors speaking newline-delimited JSON.

Request line:  {"id": str, "task": "face acts"|"dialog acts", "input": str}
Response line: {"id": str, "output": str}

Two transports: a spawned subprocess (requests on its stdin, responses on
its stdout, logs on stderr) or paired request/response files. Responses
are matched by id and may arrive out of order; up to `window` requests
are kept in flight in subprocess mode.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .predict import RawPrediction


class ProtocolError(RuntimeError):
    pass


class MissingResponseError(ProtocolError):
    def __init__(self, ids: Sequence[str]):
        self.ids = list(ids)
        shown = ", ".join(self.ids[:5])
        more = "" if len(self.ids) <= 5 else f" (+{len(self.ids) - 5} more)"
        super().__init__(f"no response for id(s): {shown}{more}")


@dataclass(frozen=True)
class PredictRequest:
    id: str
    task: str
    input: str

    def to_json(self) -> dict:
        return {"id": self.id, "task": self.task, "input": self.input}


@dataclass(frozen=True)
class SubprocessConfig:
    command: Sequence[str]
    window: int = 64
    timeout: float = 60.0  # seconds without any response line


@dataclass(frozen=True)
class FileConfig:
    requests_path: Path
    responses_path: Path
    # Optional command to produce the responses file; receives
    # --requests / --responses arguments. When absent, the responses
    # file must already exist.
    command: Optional[Sequence[str]] = None
    timeout: float = 600.0


def _parse_response_line(line: str, lineno: int) -> tuple[str, str]:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"response line {lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(obj, dict) or "id" not in obj or "output" not in obj:
        raise ProtocolError(f"response line {lineno}: expected object with id and output")
    return str(obj["id"]), str(obj["output"])


def _collect(
    lines: Sequence[str],
    expected: dict[str, None],
) -> dict[str, str]:
    responses: dict[str, str] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        rid, output = _parse_response_line(line, lineno)
        if rid not in expected:
            raise ProtocolError(f"response line {lineno}: unknown id {rid!r}")
        if rid in responses:
            raise ProtocolError(f"response line {lineno}: duplicate id {rid!r}")
        responses[rid] = output
    return responses


def run_external_subprocess(
    requests: Sequence[PredictRequest],
    config: SubprocessConfig,
) -> list[RawPrediction]:
    ids = {r.id: None for r in requests}
    if len(ids) != len(requests):
        raise ProtocolError("duplicate request ids")
    proc = subprocess.Popen(
        list(config.command),
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=None,
        text=True,
        bufsize=1,
    )
    responses: dict[str, str] = {}
    inflight = threading.Semaphore(config.window)
    lines: queue.Queue = queue.Queue()

    def reader():
        try:
            for line in proc.stdout:
                lines.put(line)
        finally:
            lines.put(None)

    def writer():
        try:
            for req in requests:
                inflight.acquire()
                proc.stdin.write(json.dumps(req.to_json(), ensure_ascii=False) + "\n")
                proc.stdin.flush()
            proc.stdin.close()
        except BrokenPipeError:
            pass

    threads = [threading.Thread(target=reader, daemon=True),
               threading.Thread(target=writer, daemon=True)]
    for t in threads:
        t.start()

    lineno = 0
    error: Optional[ProtocolError] = None
    try:
        while True:
            try:
                line = lines.get(timeout=config.timeout)
            except queue.Empty:
                raise ProtocolError(
                    f"timeout: no response within {config.timeout}s "
                    f"({len(responses)}/{len(requests)} received)"
                ) from None
            if line is None:
                break
            lineno += 1
            if not line.strip():
                continue
            rid, output = _parse_response_line(line, lineno)
            if rid not in ids:
                raise ProtocolError(f"response line {lineno}: unknown id {rid!r}")
            if rid in responses:
                raise ProtocolError(f"response line {lineno}: duplicate id {rid!r}")
            responses[rid] = output
            inflight.release()
    except ProtocolError as exc:
        error = exc
        proc.kill()
    finally:
        proc.wait()
        for t in threads:
            t.join(timeout=5)
    if error is not None:
        raise error
    if proc.returncode != 0:
        raise ProtocolError(f"external predictor exited with status {proc.returncode}")
    missing = [rid for rid in ids if rid not in responses]
    if missing:
        raise MissingResponseError(missing)
    return [RawPrediction(example_id=r.id, output=responses[r.id]) for r in requests]


def run_external_files(
    requests: Sequence[PredictRequest],
    config: FileConfig,
) -> list[RawPrediction]:
    ids = {r.id: None for r in requests}
    if len(ids) != len(requests):
        raise ProtocolError("duplicate request ids")
    with open(config.requests_path, "w", encoding="utf-8") as fh:
        for req in requests:
            fh.write(json.dumps(req.to_json(), ensure_ascii=False) + "\n")
    if config.command is not None:
        argv = list(config.command) + [
            "--requests", str(config.requests_path),
            "--responses", str(config.responses_path),
        ]
        proc = subprocess.run(argv, timeout=config.timeout)
        if proc.returncode != 0:
            raise ProtocolError(f"external predictor exited with status {proc.returncode}")
    if not Path(config.responses_path).exists():
        raise ProtocolError(f"responses file not found: {config.responses_path}")
    with open(config.responses_path, encoding="utf-8") as fh:
        responses = _collect(fh.readlines(), ids)
    missing = [rid for rid in ids if rid not in responses]
    if missing:
        raise MissingResponseError(missing)
    return [RawPrediction(example_id=r.id, output=responses[r.id]) for r in requests]


def run_external(
    requests: Sequence[PredictRequest],
    config: SubprocessConfig | FileConfig,
) -> list[RawPrediction]:
    """Dispatch to the configured transport; raw outputs are returned
    unfiltered for downstream repair."""
    if isinstance(config, SubprocessConfig):
        return run_external_subprocess(requests, config)
    if isinstance(config, FileConfig):
        return run_external_files(requests, config)
    raise TypeError(f"unsupported endpoint config: {type(config).__name__}")
