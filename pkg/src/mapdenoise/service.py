"""HTTP denoising service.

A small JSON-over-HTTP front end for a loaded model. One POST endpoint
accepts a PNG image plus a noise map spec and returns the restored image
together with the resolved full-resolution map, so an interactive client
can show what the model was told about the noise. The server holds no
per-request state; identical requests produce byte-identical responses.

Wire conventions: images travel as PNG only, noise levels in the JSON
spec and in the returned map are in 8-bit sigma units [0, 75], and the
returned map is row-major little-endian float32 in base64.
"""

from __future__ import annotations

import base64
import binascii
import io
import json
import logging
import secrets

import numpy as np
from fastapi import FastAPI, File, Form, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from PIL import Image, UnidentifiedImageError

from .data import decode_image_bytes, encode_png
from .errors import ContractError, DataError
from .model import ParameterSet, denoise, receptive_field
from .noise import (
    SIGMA_MAX,
    SIGMA_SCALE,
    NoiseLevelMap,
    RegionAnchor,
    anchored_map,
    uniform_map,
)

DEFAULT_MAX_PIXELS = 4_000_000
_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"

log = logging.getLogger(__name__)


class BadRequest(ValueError):
    """Client error in the request body; maps to HTTP 400."""


class PayloadTooLarge(ValueError):
    """Image exceeds the configured pixel budget; maps to HTTP 413."""


def _sigma_from(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise BadRequest(f"{where}: sigma must be a number")
    sigma = float(value)
    if not np.isfinite(sigma) or not 0.0 <= sigma <= SIGMA_MAX:
        raise BadRequest(f"{where}: sigma must be in [0, {SIGMA_MAX:g}]")
    return sigma


def _index_from(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise BadRequest(f"{where}: expected an integer")
    return value


def parse_map_spec(obj, height: int, width: int) -> NoiseLevelMap:
    """Build the full-resolution map described by a request spec.

    Accepts the three documented forms:

    - ``{"kind": "uniform", "sigma": S}``
    - ``{"kind": "anchors", "points": [{"r": R, "c": C, "sigma": S}, ...]}``
    - ``{"kind": "raw", "encoding": "f32le", "width": W, "height": H,
      "data": "<base64>"}`` with sigma values in [0, 75]

    Anything else raises BadRequest.
    """
    if not isinstance(obj, dict):
        raise BadRequest("map spec must be a JSON object")
    kind = obj.get("kind")
    if kind == "uniform":
        return uniform_map(height, width, _sigma_from(obj.get("sigma"), "uniform"))
    if kind == "anchors":
        points = obj.get("points")
        if not isinstance(points, list) or not points:
            raise BadRequest("anchors: points must be a non-empty list")
        anchors = []
        for i, p in enumerate(points):
            if not isinstance(p, dict):
                raise BadRequest(f"anchors: point {i} must be an object")
            anchors.append(RegionAnchor(
                _index_from(p.get("r"), f"point {i}"),
                _index_from(p.get("c"), f"point {i}"),
                _sigma_from(p.get("sigma"), f"point {i}"),
            ))
        try:
            return anchored_map(height, width, anchors)
        except ContractError as e:
            raise BadRequest(str(e))
    if kind == "raw":
        if obj.get("encoding") != "f32le":
            raise BadRequest('raw: encoding must be "f32le"')
        w = _index_from(obj.get("width"), "raw width")
        h = _index_from(obj.get("height"), "raw height")
        if (h, w) != (height, width):
            raise BadRequest(
                f"raw: map is {w}x{h}, image is {width}x{height}")
        data = obj.get("data")
        if not isinstance(data, str):
            raise BadRequest("raw: data must be a base64 string")
        try:
            blob = base64.b64decode(data, validate=True)
        except (binascii.Error, ValueError):
            raise BadRequest("raw: data is not valid base64")
        if len(blob) != h * w * 4:
            raise BadRequest(
                f"raw: expected {h * w * 4} bytes of f32le data, got {len(blob)}")
        sigmas = np.frombuffer(blob, dtype="<f4").astype(np.float64).reshape(h, w)
        if not np.all(np.isfinite(sigmas)):
            raise BadRequest("raw: map values must be finite")
        if sigmas.min() < 0.0 or sigmas.max() > SIGMA_MAX:
            raise BadRequest(f"raw: map values must be in [0, {SIGMA_MAX:g}]")
        return NoiseLevelMap(sigmas / SIGMA_SCALE, kind="raw")
    raise BadRequest(f"unknown map spec kind: {kind!r}")


def map_payload(m: NoiseLevelMap) -> dict:
    """JSON object carrying the map as base64 f32le sigma values."""
    h, w = m.shape
    sigmas = np.ascontiguousarray((m.values * SIGMA_SCALE).astype("<f4"))
    return {
        "encoding": "f32le",
        "width": w,
        "height": h,
        "data": base64.b64encode(sigmas.tobytes()).decode("ascii"),
    }


def create_app(params: ParameterSet, max_pixels: int = DEFAULT_MAX_PIXELS) -> FastAPI:
    """Wrap a loaded model in a FastAPI application."""
    from fastapi.middleware.cors import CORSMiddleware

    config = params.config
    app = FastAPI(title="mapdenoise", docs_url=None, redoc_url=None)
    # The browser client is served separately (a static page), so requests
    # arrive cross-origin. Everything here is read-only computation.
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request, exc):
        return JSONResponse(status_code=400,
                            content={"error": "malformed request body"})

    @app.get("/api/model")
    def model_info() -> dict:
        return {
            "layers": config.num_layers,
            "channels": config.num_channels,
            "color": config.in_channels == 3,
            "noise_range": [0.0, SIGMA_MAX],
            "merged": params.merged,
            "receptive_field": receptive_field(config),
        }

    def process(blob: bytes, spec_text: str) -> dict:
        if blob[:8] != _PNG_MAGIC:
            raise BadRequest("image must be a PNG file")
        try:
            with Image.open(io.BytesIO(blob)) as im:
                w, h = im.size
        except UnidentifiedImageError:
            raise BadRequest("image is not a decodable PNG")
        if h * w > max_pixels:
            raise PayloadTooLarge(
                f"image has {h * w} pixels, limit is {max_pixels}")
        try:
            tensor = decode_image_bytes(blob, label="upload")
        except DataError as e:
            raise BadRequest(str(e))
        if tensor.shape[1] != config.in_channels:
            kind = "color" if config.in_channels == 3 else "grayscale"
            raise BadRequest(f"model expects a {kind} image")
        try:
            spec_obj = json.loads(spec_text)
        except json.JSONDecodeError:
            raise BadRequest("map spec is not valid JSON")
        noise_map = parse_map_spec(spec_obj, h, w)
        restored = denoise(params, tensor, noise_map)
        return {
            "image": base64.b64encode(encode_png(restored)).decode("ascii"),
            "map": map_payload(noise_map),
            "width": w,
            "height": h,
            "channels": tensor.shape[1],
            "mean_sigma": float(noise_map.mean_sigma()),
        }

    @app.post("/api/denoise")
    def denoise_endpoint(image: UploadFile = File(...), spec: str = Form(...)):
        try:
            try:
                payload = process(image.file.read(), spec)
            except BadRequest as e:
                return JSONResponse(status_code=400, content={"error": str(e)})
            except PayloadTooLarge as e:
                return JSONResponse(status_code=413, content={"error": str(e)})
            return JSONResponse(content=payload)
        except Exception:
            error_id = secrets.token_hex(8)
            log.exception("denoise request %s failed", error_id)
            return JSONResponse(status_code=500,
                                content={"error": "internal error", "id": error_id})

    return app
