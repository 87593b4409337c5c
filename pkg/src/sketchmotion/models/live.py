"""HTTP backend for live model endpoints.

Requests are JSON with base64 PNG image payloads and a rendered prompt
template; auth rides a bearer token sourced from the environment. The
response grammar (JSON with point lists) is this artifact's convention;
a live deployment is expected to sit behind an adapter that enforces it.
"""

import base64
import json
import os
import time
from importlib import resources

import numpy as np
import requests

from ..errors import InvalidResponseError, TransportError
from ..raster import encode_png
from .backend import ModelBackend

ENV_URL = "CI_LIVE_URL"
ENV_TOKEN = "CI_LIVE_TOKEN"

_PROMPT_FILES = {
    "keypoints": "keypoints.txt",
    "point": "pointing.txt",
    "trajectories": "trajectories.txt",
    "poses": "poses.txt",
}


def load_prompt_template(kind: str) -> str:
    """The versioned prompt text asset for one request kind."""
    name = _PROMPT_FILES[kind]
    return resources.files("sketchmotion.models").joinpath("prompts", name).read_text("utf-8")


def render_prompt(kind: str, payload: dict) -> str:
    """Fill a template's named placeholders from the payload.

    Image placeholders name the attachment slot rather than inlining
    pixels; structured fields are inlined as JSON.
    """
    text = load_prompt_template(kind)
    keypoints = {
        "descriptors": payload.get("descriptors", []),
        "pointed": payload.get("pointed", []),
    }
    fills = {
        "{INSTRUCTION_IMAGE}": "annotated_image",
        "{KEYPOINTS}": json.dumps(keypoints, sort_keys=True),
        "{TRAJECTORY_3D}": json.dumps(payload.get("trajectory_3d", []), sort_keys=True),
    }
    for placeholder, value in fills.items():
        text = text.replace(placeholder, value)
    return text


def _wire_value(value):
    if isinstance(value, np.ndarray) and value.dtype == np.uint8:
        return {"png_b64": base64.b64encode(encode_png(value)).decode("ascii")}
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {k: _wire_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_wire_value(v) for v in value]
    return value


class LiveBackend(ModelBackend):
    """POST each request to {base_url}/v1/{kind} with retries."""

    def __init__(self, base_url, token=None, timeout_s=60.0, retries=2, retry_delay_s=0.5, session=None):
        self.base_url = base_url.rstrip("/")
        self.token = token
        self.timeout_s = timeout_s
        self.retries = retries
        self.retry_delay_s = retry_delay_s
        self.session = session if session is not None else requests.Session()

    def send(self, kind: str, payload: dict) -> dict:
        url = f"{self.base_url}/v1/{kind}"
        body = _wire_value(payload)
        body["prompt"] = render_prompt(kind, payload)
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        attempts = 0
        last_error = None
        while attempts <= self.retries:
            attempts += 1
            try:
                resp = self.session.post(url, json=body, headers=headers, timeout=self.timeout_s)
            except requests.RequestException as e:
                last_error = str(e)
                if attempts <= self.retries and self.retry_delay_s > 0:
                    time.sleep(self.retry_delay_s)
                continue
            if resp.status_code >= 500:
                last_error = f"server error {resp.status_code}"
                if attempts <= self.retries and self.retry_delay_s > 0:
                    time.sleep(self.retry_delay_s)
                continue
            if resp.status_code >= 400:
                raise InvalidResponseError(
                    f"{kind} request rejected with status {resp.status_code}: {resp.text[:200]}"
                )
            try:
                return resp.json()
            except ValueError as e:
                raise InvalidResponseError(f"{kind} response is not JSON: {e}") from e
        raise TransportError(
            f"{kind} request failed after {attempts} attempts: {last_error}",
            attempts=attempts,
            url=url,
        )

    def describe(self) -> str:
        return "live"


def live_backend_from_env(**kwargs) -> LiveBackend:
    url = os.environ.get(ENV_URL)
    if not url:
        raise TransportError(f"{ENV_URL} is not set", attempts=0, url=None)
    return LiveBackend(base_url=url, token=os.environ.get(ENV_TOKEN), **kwargs)
