"""HTTP client for a remote content service.

Wire protocol (all bodies JSON):
  POST /inpaint  {prompt, frame_index, width, height, image_png_b64, mask_png_b64}
                 -> {image_png_b64}
  POST /depth    same request -> {disparity_raw_b64, dtype: "f32le", width, height}
  GET  /healthz  -> 200

4xx responses are permanent failures; 5xx, transport errors, timeouts and
malformed bodies are retriable (3 attempts, exponential backoff 1/2/4 s).
"""

import json
import logging
import time

import numpy as np
import requests

from .. import pngio
from .base import (Provider, ProviderRequest, RemoteHTTPError, RemoteProtocolError,
                   RemoteTimeoutError, RemoteTransportError)

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 120.0
DEFAULT_RETRIES = 3
DEFAULT_BACKOFF = (1.0, 2.0, 4.0)
MIN_REMOTE_DISPARITY = 1e-6


class RemoteProvider(Provider):
    def __init__(self, base_url, timeout=DEFAULT_TIMEOUT, retries=DEFAULT_RETRIES,
                 backoff=DEFAULT_BACKOFF, session=None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.session = session or requests.Session()

    def _post(self, path, payload):
        attempt = 0
        while True:
            try:
                resp = self.session.post(self.base_url + path, json=payload,
                                         timeout=self.timeout)
            except requests.Timeout as exc:
                err = RemoteTimeoutError(f"{path}: timed out after {self.timeout}s")
            except requests.RequestException as exc:
                err = RemoteTransportError(f"{path}: {exc}")
            else:
                if 400 <= resp.status_code < 500:
                    raise RemoteHTTPError(resp.status_code, resp.text[:200],
                                          retriable=False)
                if resp.status_code >= 500:
                    err = RemoteHTTPError(resp.status_code, resp.text[:200],
                                          retriable=True)
                else:
                    try:
                        return resp.json()
                    except (json.JSONDecodeError, ValueError):
                        err = RemoteProtocolError(f"{path}: response is not JSON")
            if attempt >= self.retries:
                raise err
            delay = self.backoff[min(attempt, len(self.backoff) - 1)]
            log.warning("remote %s failed (%s); retry %d/%d in %.1fs",
                        path, err, attempt + 1, self.retries, delay)
            time.sleep(delay)
            attempt += 1

    def _payload(self, prompt, frame_index, image, mask):
        h, w = np.asarray(mask).shape
        return {
            "prompt": prompt,
            "frame_index": int(frame_index),
            "width": int(w),
            "height": int(h),
            "image_png_b64": pngio.b64encode(pngio.image_to_png_bytes(image)),
            "mask_png_b64": pngio.b64encode(pngio.mask_to_png_bytes(mask)),
        }

    def inpaint(self, request: ProviderRequest):
        body = self._post("/inpaint", self._payload(
            request.prompt, request.frame_index, request.image, request.mask))
        if "image_png_b64" not in body:
            raise RemoteProtocolError("inpaint response missing image_png_b64")
        try:
            image = pngio.png_bytes_to_image(pngio.b64decode(body["image_png_b64"]))
        except Exception as exc:
            raise RemoteProtocolError(f"undecodable inpaint image: {exc}") from exc
        if image.shape[:2] != request.mask.shape:
            raise RemoteProtocolError(
                f"inpaint returned {image.shape[:2]}, expected {request.mask.shape}")
        return image

    def predict_depth(self, image, frame_index):
        image = np.asarray(image)
        h, w = image.shape[:2]
        body = self._post("/depth", self._payload(
            "", frame_index, image, np.ones((h, w), dtype=bool)))
        for key in ("disparity_raw_b64", "dtype", "width", "height"):
            if key not in body:
                raise RemoteProtocolError(f"depth response missing {key}")
        if body["dtype"] != "f32le":
            raise RemoteProtocolError(f"unsupported depth dtype {body['dtype']!r}")
        raw = pngio.b64decode(body["disparity_raw_b64"])
        if len(raw) != body["width"] * body["height"] * 4:
            raise RemoteProtocolError("disparity byte count mismatch")
        disp = np.frombuffer(raw, dtype="<f4").reshape(body["height"], body["width"])
        disp = disp.astype(np.float64)
        if not np.isfinite(disp).all():
            raise RemoteProtocolError("non-finite values in disparity raster")
        if (body["height"], body["width"]) != (h, w):
            raise RemoteProtocolError(
                f"depth raster is {body['height']}x{body['width']}, expected {h}x{w}")
        return 1.0 / np.maximum(disp, MIN_REMOTE_DISPARITY)

    def healthcheck(self):
        try:
            resp = self.session.get(self.base_url + "/healthz", timeout=self.timeout)
        except requests.RequestException as exc:
            raise RemoteTransportError(f"/healthz: {exc}") from exc
        if resp.status_code != 200:
            raise RemoteHTTPError(resp.status_code, "health check failed",
                                  retriable=resp.status_code >= 500)
