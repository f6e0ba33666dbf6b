"""HTTP service: wire schema, status codes, determinism."""

import base64
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from mapdenoise import service
from mapdenoise.data import decode_image_bytes, encode_png, load_image
from mapdenoise.metrics import psnr
from mapdenoise.model import denoise, load_model
from mapdenoise.noise import SIGMA_SCALE, anchored_map, gradient_map, uniform_map
from mapdenoise.rng import make_rng
from tests.conftest import REPO_ROOT

FIXTURES = REPO_ROOT / "frontend" / "fixtures"


@pytest.fixture(scope="module")
def golden_params(golden_model_path):
    return load_model(golden_model_path)


@pytest.fixture(scope="module")
def client(golden_params):
    return TestClient(service.create_app(golden_params))


@pytest.fixture(scope="module")
def clock_png(testdata_dir):
    clean = load_image(testdata_dir / "images" / "clock.pgm")
    return encode_png(clean), clean


def post_denoise(client, image_bytes, spec):
    if not isinstance(spec, str):
        spec = json.dumps(spec)
    return client.post(
        "/api/denoise",
        files={"image": ("input.png", image_bytes, "image/png")},
        data={"spec": spec},
    )


def decode_map_payload(payload):
    blob = base64.b64decode(payload["data"])
    arr = np.frombuffer(blob, dtype="<f4")
    return arr.reshape(payload["height"], payload["width"])


class TestModelInfo:
    def test_reports_golden_config(self, client):
        r = client.get("/api/model")
        assert r.status_code == 200
        body = r.json()
        assert body["layers"] == 4
        assert body["channels"] == 24
        assert body["color"] is False
        assert body["noise_range"] == [0.0, 75.0]
        assert body["merged"] is True
        assert body["receptive_field"] == 18

    def test_unknown_route_is_404(self, client):
        assert client.get("/api/nope").status_code == 404

    def test_get_is_idempotent(self, client):
        assert client.get("/api/model").content == client.get("/api/model").content

    def test_cross_origin_requests_allowed(self, client):
        r = client.get("/api/model", headers={"Origin": "http://localhost:5173"})
        assert r.headers.get("access-control-allow-origin") == "*"


class TestDenoiseSuccess:
    def test_uniform_spec_envelope(self, client, clock_png):
        png, clean = clock_png
        r = post_denoise(client, png, {"kind": "uniform", "sigma": 25})
        assert r.status_code == 200
        body = r.json()
        h, w = clean.shape[2], clean.shape[3]
        assert body["width"] == w and body["height"] == h
        assert body["channels"] == 1
        assert body["mean_sigma"] == pytest.approx(25.0)
        restored = decode_image_bytes(base64.b64decode(body["image"]))
        assert restored.shape == clean.shape
        resolved = decode_map_payload(body["map"])
        assert resolved.shape == (h, w)
        np.testing.assert_allclose(resolved, 25.0, atol=1e-4)

    def test_identical_requests_are_byte_identical(self, client, clock_png):
        png, _ = clock_png
        spec = {"kind": "uniform", "sigma": 30}
        a = post_denoise(client, png, spec)
        b = post_denoise(client, png, spec)
        assert a.content == b.content

    def test_single_anchor_equals_uniform(self, client, clock_png):
        png, _ = clock_png
        a = post_denoise(client, png, {"kind": "uniform", "sigma": 25})
        b = post_denoise(client, png, {
            "kind": "anchors", "points": [{"r": 0, "c": 0, "sigma": 25}]})
        assert a.status_code == b.status_code == 200
        assert a.content == b.content

    def test_sigma_zero_matches_direct_inference(
            self, client, golden_params, clock_png):
        png, clean = clock_png
        r = post_denoise(client, png, {"kind": "uniform", "sigma": 0})
        assert r.status_code == 200
        h, w = clean.shape[2], clean.shape[3]
        expected = encode_png(denoise(golden_params, clean, uniform_map(h, w, 0.0)))
        assert base64.b64decode(r.json()["image"]) == expected

    def test_raw_map_round_trips(self, client, clock_png):
        png, clean = clock_png
        h, w = clean.shape[2], clean.shape[3]
        sigmas = (gradient_map(h, w, 5.0, 50.0).values * SIGMA_SCALE).astype("<f4")
        data = base64.b64encode(sigmas.tobytes()).decode("ascii")
        r = post_denoise(client, png, {
            "kind": "raw", "encoding": "f32le",
            "width": w, "height": h, "data": data})
        assert r.status_code == 200
        assert r.json()["map"]["data"] == data

    def test_anchors_resolve_to_interpolated_map(self, client, clock_png):
        png, clean = clock_png
        h, w = clean.shape[2], clean.shape[3]
        points = [{"r": 10, "c": 20, "sigma": 30}, {"r": 100, "c": 50, "sigma": 5}]
        r = post_denoise(client, png, {"kind": "anchors", "points": points})
        assert r.status_code == 200
        resolved = decode_map_payload(r.json()["map"])
        expected = service.parse_map_spec(
            {"kind": "anchors", "points": points}, h, w)
        np.testing.assert_array_equal(
            resolved, (expected.values * SIGMA_SCALE).astype("<f4"))

    def test_denoising_actually_cleans(self, client, golden_params, clock_png):
        from mapdenoise.noise import NoiseSpec, add_awgn

        _, clean = clock_png
        h, w = clean.shape[2], clean.shape[3]
        noisy = add_awgn(clean, NoiseSpec(uniform_map(h, w, 25.0), seed=3))
        r = post_denoise(client, encode_png(noisy), {"kind": "uniform", "sigma": 25})
        assert r.status_code == 200
        restored = decode_image_bytes(base64.b64decode(r.json()["image"]))
        assert psnr(clean, restored) > psnr(clean, noisy) + 4.0


class TestSharedFixtures:
    """The JSON specs under frontend/fixtures are the wire contract."""

    def test_uniform_fixture_parses(self):
        obj = json.loads((FIXTURES / "uniform.json").read_text())
        m = service.parse_map_spec(obj, 8, 8)
        np.testing.assert_allclose(m.values * SIGMA_SCALE, 25.0)

    def test_anchors_fixture_parses(self):
        obj = json.loads((FIXTURES / "anchors.json").read_text())
        m = service.parse_map_spec(obj, 128, 128)
        assert m.values[10, 20] * SIGMA_SCALE == pytest.approx(30.0)
        assert m.values[100, 50] * SIGMA_SCALE == pytest.approx(5.0)

    def test_single_anchor_fixture_equals_uniform_over_http(
            self, client, clock_png):
        png, _ = clock_png
        single = (FIXTURES / "single_anchor.json").read_text()
        uniform = (FIXTURES / "uniform.json").read_text()
        a = post_denoise(client, png, single)
        b = post_denoise(client, png, uniform)
        assert a.status_code == b.status_code == 200
        assert a.content == b.content

    def test_raw_fixture_parses_to_expected_grid(self):
        obj = json.loads((FIXTURES / "raw.json").read_text())
        m = service.parse_map_spec(obj, 3, 4)
        expected = np.arange(12, dtype="<f4").reshape(3, 4) * 5.0
        np.testing.assert_array_equal(
            (m.values * SIGMA_SCALE).astype("<f4"), expected)


class TestClientErrors:
    def test_malformed_json_spec(self, client, clock_png):
        png, _ = clock_png
        r = post_denoise(client, png, "{not json")
        assert r.status_code == 400
        assert "JSON" in r.json()["error"]

    def test_unknown_kind(self, client, clock_png):
        png, _ = clock_png
        assert post_denoise(client, png, {"kind": "magic"}).status_code == 400

    def test_sigma_out_of_range(self, client, clock_png):
        png, _ = clock_png
        r = post_denoise(client, png, {"kind": "uniform", "sigma": 80})
        assert r.status_code == 400

    def test_sigma_wrong_type(self, client, clock_png):
        png, _ = clock_png
        r = post_denoise(client, png, {"kind": "uniform", "sigma": "25"})
        assert r.status_code == 400

    def test_empty_anchor_list(self, client, clock_png):
        png, _ = clock_png
        r = post_denoise(client, png, {"kind": "anchors", "points": []})
        assert r.status_code == 400

    def test_anchor_outside_image(self, client, clock_png):
        png, _ = clock_png
        r = post_denoise(client, png, {
            "kind": "anchors", "points": [{"r": 9999, "c": 0, "sigma": 25}]})
        assert r.status_code == 400

    def test_raw_wrong_dimensions(self, client, clock_png):
        png, _ = clock_png
        r = post_denoise(client, png, {
            "kind": "raw", "encoding": "f32le", "width": 4, "height": 3,
            "data": base64.b64encode(b"\x00" * 48).decode()})
        assert r.status_code == 400

    def test_raw_bad_base64(self, client, clock_png):
        png, clean = clock_png
        h, w = clean.shape[2], clean.shape[3]
        r = post_denoise(client, png, {
            "kind": "raw", "encoding": "f32le", "width": w, "height": h,
            "data": "@@not base64@@"})
        assert r.status_code == 400

    def test_raw_payload_size_mismatch(self, client, clock_png):
        png, clean = clock_png
        h, w = clean.shape[2], clean.shape[3]
        r = post_denoise(client, png, {
            "kind": "raw", "encoding": "f32le", "width": w, "height": h,
            "data": base64.b64encode(b"\x00" * 16).decode()})
        assert r.status_code == 400

    def test_raw_values_out_of_range(self, client, clock_png):
        png, clean = clock_png
        h, w = clean.shape[2], clean.shape[3]
        sigmas = np.full((h, w), 90.0, dtype="<f4")
        r = post_denoise(client, png, {
            "kind": "raw", "encoding": "f32le", "width": w, "height": h,
            "data": base64.b64encode(sigmas.tobytes()).decode()})
        assert r.status_code == 400

    def test_non_png_image(self, client):
        pgm = b"P5\n4 4\n255\n" + bytes(16)
        r = post_denoise(client, pgm, {"kind": "uniform", "sigma": 25})
        assert r.status_code == 400
        assert "PNG" in r.json()["error"]

    def test_truncated_png(self, client, clock_png):
        png, _ = clock_png
        r = post_denoise(client, png[:100], {"kind": "uniform", "sigma": 25})
        assert r.status_code == 400

    def test_color_image_to_grayscale_model(self, client):
        rgb = make_rng(5).random((1, 3, 16, 16))
        r = post_denoise(client, encode_png(rgb), {"kind": "uniform", "sigma": 25})
        assert r.status_code == 400
        assert "grayscale" in r.json()["error"]

    def test_missing_spec_field(self, client, clock_png):
        png, _ = clock_png
        r = client.post("/api/denoise",
                        files={"image": ("input.png", png, "image/png")})
        assert r.status_code == 400

    def test_missing_image_field(self, client):
        r = client.post("/api/denoise", data={"spec": '{"kind":"uniform","sigma":25}'})
        assert r.status_code == 400


class TestLimitsAndFailures:
    def test_oversize_image_is_413(self, golden_params):
        small = TestClient(service.create_app(golden_params, max_pixels=1000))
        png = encode_png(make_rng(1).random((1, 1, 64, 64)))
        r = post_denoise(small, png, {"kind": "uniform", "sigma": 25})
        assert r.status_code == 413

    def test_at_limit_is_accepted(self, golden_params):
        exact = TestClient(service.create_app(golden_params, max_pixels=64 * 64))
        png = encode_png(make_rng(1).random((1, 1, 64, 64)))
        r = post_denoise(exact, png, {"kind": "uniform", "sigma": 25})
        assert r.status_code == 200

    def test_internal_failure_returns_opaque_id(
            self, golden_params, clock_png, monkeypatch):
        png, _ = clock_png
        boom = TestClient(service.create_app(golden_params))

        def explode(*args, **kwargs):
            raise RuntimeError("secret internal detail")

        monkeypatch.setattr(service, "denoise", explode)
        r = post_denoise(boom, png, {"kind": "uniform", "sigma": 25})
        assert r.status_code == 500
        body = r.json()
        assert body["error"] == "internal error"
        assert "secret" not in json.dumps(body)
        second = post_denoise(boom, png, {"kind": "uniform", "sigma": 25}).json()
        assert body["id"] != second["id"]
