"""Deterministic scripted backend plus the recorder that produces it."""

import copy
import threading

from .backend import ModelBackend
from .canonical import request_digest
from .types import ScenarioEntry, ScriptedScenario


class ScriptedBackend(ModelBackend):
    """Replay canned responses keyed by canonical request digest.

    Stateless between requests, so it is trivially shareable across
    concurrent sessions, and the same request always gets the same
    answer.
    """

    def __init__(self, scenario: ScriptedScenario):
        self.scenario = scenario

    def send(self, kind: str, payload: dict) -> dict:
        return self.scenario.lookup(kind, request_digest(kind, payload))

    def describe(self) -> str:
        return f"scripted:{self.scenario.name}"


class RecordingBackend(ModelBackend):
    """Pass requests through to an inner backend and log every exchange.

    Appends are locked; the pointing fan-out may run concurrently.
    """

    def __init__(self, inner: ModelBackend):
        self.inner = inner
        self._entries = []
        self._lock = threading.Lock()

    def send(self, kind: str, payload: dict) -> dict:
        digest = request_digest(kind, payload)
        response = self.inner.send(kind, payload)
        with self._lock:
            self._entries.append(
                ScenarioEntry(kind=kind, request_digest=digest, response=copy.deepcopy(response))
            )
        return response

    def to_scenario(self, name: str) -> ScriptedScenario:
        with self._lock:
            return ScriptedScenario(name=name, entries=tuple(self._entries))

    def describe(self) -> str:
        return f"recording({self.inner.describe()})"


def record_scenario(live_backend: ModelBackend, name: str, run) -> ScriptedScenario:
    """Capture every exchange of one run against a backend.

    `run` is called with the recording wrapper and should drive the
    pipeline (or any request sequence); replaying the frozen scenario
    against the same inputs reproduces the responses bit-exactly.
    """
    recorder = RecordingBackend(live_backend)
    run(recorder)
    return recorder.to_scenario(name)
