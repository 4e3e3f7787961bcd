"""Pluggable generator clients: HTTP endpoint, recorded replay, scripted mock.

Every request is a (task, payload) pair; replay transcripts are content
addressed by a digest of that pair so recorded sessions never depend on
entry order.  All clients are safe to share across batch worker threads.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from typing import Optional

import requests

from .errors import ClientError

TASK_DESCRIBE = "describe_to_ccs"
TASK_REFLECT = "reflect"
TASK_CORRECT = "correct"
TASK_CONSENSUS = "consensus"

TOKEN_ENV_VAR = "CCSTOOLS_API_TOKEN"


def request_digest(task: str, payload: dict) -> str:
    """Canonical content address of one generator request."""
    canon = json.dumps({"task": task, "payload": payload},
                       sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


class GeneratorClient:
    """Abstract text-generation capability used by the pipeline."""

    def request(self, task: str, payload: dict) -> str:
        raise NotImplementedError

    def describe_to_ccs(self, description: str) -> str:
        return self.request(TASK_DESCRIBE, {"description": description})

    def reflect(self, description: str, gt_ccs: str, issues: str) -> str:
        return self.request(TASK_REFLECT, {"description": description,
                                           "gt_ccs": gt_ccs, "issues": issues})

    def correct(self, description: str, predicted_ccs: str, confidence) -> str:
        return self.request(TASK_CORRECT, {
            "description": description,
            "predicted_ccs": predicted_ccs,
            "confidence": [[c, a] for c, a in confidence],
        })

    def consensus(self, description_a: str, description_b: str) -> str:
        """Generic two-description consistency check.  No pipeline stage
        issues this by default; it exists for callers that cross-check
        independently produced descriptions."""
        return self.request(TASK_CONSENSUS, {"description_a": description_a,
                                             "description_b": description_b})


class HttpClient(GeneratorClient):
    """POST {task, payload} to a remote endpoint, expecting {"text": ...}.

    Retries transport failures and 5xx responses with exponential backoff.
    A bearer token is read from the environment when present.
    """

    def __init__(self, endpoint: str, timeout: float = 60.0, max_retries: int = 3,
                 backoff: float = 1.0, token_env: str = TOKEN_ENV_VAR):
        self.endpoint = endpoint
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self.token_env = token_env

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def request(self, task: str, payload: dict) -> str:
        last_error: Optional[Exception] = None
        for attempt in range(self.max_retries + 1):
            try:
                resp = requests.post(self.endpoint,
                                     json={"task": task, "payload": payload},
                                     headers=self._headers(), timeout=self.timeout)
                if resp.status_code >= 500:
                    raise ClientError(f"server error {resp.status_code}")
                if resp.status_code != 200:
                    raise ClientError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                body = resp.json()
                if "text" not in body:
                    raise ClientError("response missing 'text' field")
                return body["text"]
            except (requests.RequestException, ClientError) as exc:
                last_error = exc
                if attempt < self.max_retries:
                    time.sleep(self.backoff * (2 ** attempt))
        raise ClientError(f"request failed after {self.max_retries + 1} attempts: "
                          f"{last_error}")


class ReplayClient(GeneratorClient):
    """Serve responses from a recorded transcript; no network involved.

    Transcript file layout:
        {"entries": [{"task": ..., "payload": {...}, "response": "..."}]}
    Entries are indexed by request digest at load time.
    """

    def __init__(self, transcript):
        if isinstance(transcript, (str, os.PathLike)):
            with open(transcript, "r", encoding="utf-8") as fh:
                transcript = json.load(fh)
        self._responses = {}
        for entry in transcript["entries"]:
            self._responses[request_digest(entry["task"], entry["payload"])] = \
                entry["response"]

    def request(self, task: str, payload: dict) -> str:
        digest = request_digest(task, payload)
        try:
            return self._responses[digest]
        except KeyError:
            raise ClientError(f"no recorded response for {task} request "
                              f"{digest[:12]}...") from None


class MockClient(GeneratorClient):
    """Scripted test client.

    Each task maps to a callable invoked with the payload, or to a list of
    canned response strings consumed in order.
    """

    def __init__(self, describe=None, reflect=None, correct=None, consensus=None):
        self._scripts = {TASK_DESCRIBE: describe, TASK_REFLECT: reflect,
                         TASK_CORRECT: correct, TASK_CONSENSUS: consensus}
        self.calls: list = []

    def request(self, task: str, payload: dict) -> str:
        self.calls.append((task, payload))
        script = self._scripts.get(task)
        if script is None:
            raise ClientError(f"mock has no script for task {task!r}")
        if callable(script):
            return script(payload)
        if isinstance(script, list):
            if not script:
                raise ClientError(f"mock script for {task!r} exhausted")
            return script.pop(0)
        return str(script)


class EchoClient(GeneratorClient):
    """Treats the description text as the CCS itself (CLI smoke client)."""

    def request(self, task: str, payload: dict) -> str:
        if task == TASK_DESCRIBE:
            return payload["description"]
        if task == TASK_REFLECT:
            return payload["description"]
        if task == TASK_CORRECT:
            return payload["predicted_ccs"]
        raise ClientError(f"unknown task {task!r}")


def transcript_entry(task: str, payload: dict, response: str) -> dict:
    return {"task": task, "payload": payload, "response": response}
