import io
import json
import os
import shutil
import subprocess
import sys

import pytest

from facetag_adapter.config import AdapterConfig
from facetag_adapter.serve import EchoBackend, serve

SERVE_ECHO = [sys.executable, "-m", "facetag_adapter", "serve", "--mode", "echo"]


def run_serve(lines, extra_args=()):
    proc = subprocess.run(
        SERVE_ECHO + list(extra_args),
        input="".join(lines),
        capture_output=True,
        text=True,
        timeout=120,
    )
    return proc


class TestConfig:
    def test_cited_defaults(self):
        config = AdapterConfig()
        assert config.batch_size == 32
        assert config.grad_accumulation == 2
        assert config.learning_rate == 3e-4
        assert config.weight_decay == 0.01
        assert config.epsilon == 1e-8
        assert config.patience == 3
        assert config.beam_width == 1

    def test_invalid_values_rejected(self):
        with pytest.raises(ValueError):
            AdapterConfig(batch_size=0)
        with pytest.raises(ValueError):
            AdapterConfig(beam_width=0)
        with pytest.raises(ValueError):
            AdapterConfig(learning_rate=0.0)


class TestEchoProtocol:
    def test_thousand_request_round_trip(self):
        requests = [
            json.dumps({"id": f"r{i}", "task": "face acts", "input": f"words w{i}"})
            + "\n"
            for i in range(1000)
        ]
        proc = run_serve(requests)
        assert proc.returncode == 0
        responses = [json.loads(line) for line in proc.stdout.splitlines()]
        assert [r["id"] for r in responses] == [f"r{i}" for i in range(1000)]
        assert all(r["output"] == f"w{i}" for i, r in enumerate(responses))
        assert all(set(r) == {"id", "output"} for r in responses)

    def test_empty_stream_exits_cleanly(self):
        proc = run_serve([])
        assert proc.returncode == 0
        assert proc.stdout == ""

    def test_malformed_line_reported_and_skipped(self):
        lines = [
            json.dumps({"id": "a", "task": "face acts", "input": "x one"}) + "\n",
            "not json at all\n",
            json.dumps({"task": "face acts", "input": "missing id"}) + "\n",
            json.dumps({"id": "b", "task": "face acts", "input": "y two"}) + "\n",
        ]
        proc = run_serve(lines)
        assert proc.returncode == 0
        responses = [json.loads(line) for line in proc.stdout.splitlines()]
        assert [r["id"] for r in responses] == ["a", "b"]
        errors = [json.loads(line) for line in proc.stderr.splitlines()]
        assert len(errors) == 2
        assert errors[0]["line"] == 2
        assert errors[1]["line"] == 3

    def test_outputs_are_raw_and_unrepaired(self):
        # Repair belongs to the harness: a garbled final word passes
        # through untouched.
        line = json.dumps({"id": "g", "task": "face acts", "input": "say sneg"}) + "\n"
        proc = run_serve([line])
        assert json.loads(proc.stdout)["output"] == "sneg"

    def test_blank_lines_ignored(self):
        lines = ["\n", json.dumps({"id": "a", "task": "t", "input": "w"}) + "\n", "\n"]
        proc = run_serve(lines)
        assert len(proc.stdout.splitlines()) == 1


class TestServeInProcess:
    def test_streams_are_injectable(self):
        source = io.StringIO(json.dumps({"id": "x", "task": "t", "input": "a b"}) + "\n")
        sink, errors = io.StringIO(), io.StringIO()
        assert serve(EchoBackend(), source, sink, errors) == 0
        assert json.loads(sink.getvalue()) == {"id": "x", "output": "b"}
        assert errors.getvalue() == ""


@pytest.mark.skipif(
    shutil.which("facetag") is None,
    reason="primary harness CLI not installed",
)
class TestHarnessInterop:
    def test_harness_drives_adapter_over_the_wire(self, tmp_path):
        # Black-box integration: the harness spawns this adapter as an
        # external predictor and repairs its raw outputs.
        examples = tmp_path / "examples.jsonl"
        with open(examples, "w") as fh:
            for i in range(20):
                fh.write(json.dumps({
                    "id": f"c{i}:0",
                    "input": f"ER: some words token{i}",
                    "target": "other",
                    "variant": "fos",
                    "fold": i % 2,
                }) + "\n")
        out = tmp_path / "preds.jsonl"
        proc = subprocess.run(
            ["facetag", "predict", "--examples", str(examples),
             "--external-cmd", " ".join(SERVE_ECHO), "--out", str(out)],
            capture_output=True, text=True, timeout=120,
        )
        assert proc.returncode == 0, proc.stderr
        preds = [json.loads(line) for line in out.read_text().splitlines()]
        assert len(preds) == 20
        assert all(p["raw"] == f"token{i}" for i, p in enumerate(preds))
        assert all(p["repaired"] for p in preds)


MODEL = os.environ.get("FACETAG_ADAPTER_MODEL")


@pytest.mark.skipif(
    MODEL is None,
    reason="set FACETAG_ADAPTER_MODEL to a local seq2seq checkpoint",
)
class TestModelBackend:
    def test_serve_generates_strings(self):
        proc = subprocess.run(
            [sys.executable, "-m", "facetag_adapter", "serve",
             "--mode", "model", "--checkpoint", MODEL],
            input=json.dumps({"id": "m1", "task": "face acts",
                              "input": "ER: would you like to donate?"}) + "\n",
            capture_output=True, text=True, timeout=600,
        )
        assert proc.returncode == 0, proc.stderr
        response = json.loads(proc.stdout)
        assert response["id"] == "m1"
        assert isinstance(response["output"], str)

    def test_smoke_finetune_one_epoch(self, tmp_path):
        from facetag_adapter.config import AdapterConfig
        from facetag_adapter.model import finetune, generate_one, load_model

        examples = tmp_path / "train.jsonl"
        with open(examples, "w") as fh:
            for i in range(50):
                fh.write(json.dumps({
                    "id": f"s{i}:0",
                    "input": f"ER: sample input {i}",
                    "target": "other" if i % 2 else "hpos+",
                    "variant": "fos",
                    "fold": 0,
                }) + "\n")
        config = AdapterConfig(model_id=MODEL, batch_size=8, max_epochs=1)
        out = finetune(examples, tmp_path / "ckpt", config)
        tokenizer, model = load_model(str(out), config)
        output = generate_one(tokenizer, model, "ER: sample input 3", config)
        assert isinstance(output, str)
