import math

import numpy as np
import pytest

from mapdenoise.errors import ContractError
from mapdenoise.init import default_init
from mapdenoise.metrics import (
    format_db,
    psnr,
    sensitivity_sweep,
    sweep_csv,
    sweep_table,
    variant_noise_report,
)
from mapdenoise.model import ModelConfig
from mapdenoise.noise import NoiseSpec, add_awgn, uniform_map
from mapdenoise.rng import make_rng


class TestPsnr:
    def test_identical_is_inf(self):
        x = make_rng(0).random((1, 1, 8, 8))
        assert psnr(x, x) == math.inf

    def test_full_scale_error_is_zero_db(self):
        a = np.zeros((1, 1, 4, 4))
        b = np.ones((1, 1, 4, 4))
        assert psnr(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_twenty_db_closed_form(self):
        a = np.zeros((1, 1, 10, 10))
        b = np.full((1, 1, 10, 10), 0.1)
        assert psnr(a, b) == pytest.approx(20.0, abs=1e-12)

    def test_symmetry(self):
        g = make_rng(1)
        a, b = g.random((1, 1, 6, 6)), g.random((1, 1, 6, 6))
        assert psnr(a, b) == psnr(b, a)

    def test_shape_mismatch(self):
        with pytest.raises(ContractError):
            psnr(np.zeros((1, 1, 4, 4)), np.zeros((1, 1, 4, 5)))

    def test_monotone_in_noise_level(self):
        clean = make_rng(2).random((1, 1, 64, 64)) * 0.5 + 0.25
        values = []
        for sigma in (5.0, 15.0, 40.0):
            noisy = add_awgn(clean, NoiseSpec(uniform_map(64, 64, sigma), seed=3))
            values.append(psnr(clean, noisy))
        assert values[0] > values[1] > values[2]

    def test_quantize_mode(self):
        g = make_rng(4)
        a = g.integers(0, 256, (1, 1, 8, 8)) / 255.0
        b = a + 1e-6  # below half a quantization step everywhere
        assert psnr(a, b) < math.inf
        assert psnr(a, b, quantize=True) == math.inf

    def test_format_db(self):
        assert format_db(math.inf) == "inf"
        assert format_db(29.186) == "29.19"


@pytest.fixture(scope="module")
def small_net():
    return default_init(ModelConfig(3, 8), seed=11)


class TestSensitivitySweep:
    def test_single_entry(self, small_net):
        clean = make_rng(5).random((1, 1, 16, 16))
        rows = sensitivity_sweep(small_net, clean, 25.0, [25.0], seed=6)
        assert len(rows) == 1
        assert rows[0][0] == 25.0
        assert np.isfinite(rows[0][1])

    def test_length_and_order_preserved(self, small_net):
        clean = make_rng(7).random((1, 1, 16, 16))
        sigmas = [50.0, 5.0, 25.0]
        rows = sensitivity_sweep(small_net, clean, 25.0, sigmas, seed=8)
        assert [s for s, _ in rows] == sigmas

    def test_deterministic(self, small_net):
        clean = make_rng(9).random((1, 1, 16, 16))
        a = sensitivity_sweep(small_net, clean, 20.0, [10.0, 20.0], seed=10)
        b = sensitivity_sweep(small_net, clean, 20.0, [10.0, 20.0], seed=10)
        assert a == b

    def test_odd_sized_image_accepted(self, small_net):
        clean = make_rng(11).random((1, 1, 15, 17))
        rows = sensitivity_sweep(small_net, clean, 15.0, [15.0], seed=12)
        assert np.isfinite(rows[0][1])


class TestVariantNoiseReport:
    def test_uniform_true_map_gives_equal_psnrs(self, small_net):
        clean = make_rng(13).random((1, 1, 16, 16))
        matched, flat = variant_noise_report(small_net, clean, uniform_map(16, 16, 30.0), seed=14)
        assert matched == flat

    def test_deterministic(self, small_net):
        from mapdenoise.noise import gradient_map

        clean = make_rng(15).random((1, 1, 16, 16))
        m = gradient_map(16, 16, 5, 50, axis="x")
        assert variant_noise_report(small_net, clean, m, seed=16) == \
            variant_noise_report(small_net, clean, m, seed=16)


class TestReportFormats:
    def test_csv(self):
        text = sweep_csv([(5.0, 28.123), (25.0, math.inf)])
        lines = text.splitlines()
        assert lines[0] == "input_sigma,psnr"
        assert lines[1] == "5,28.12"
        assert lines[2] == "25,inf"
        assert text.endswith("\n")

    def test_table(self):
        text = sweep_table([(5.0, 28.123), (25.0, math.inf)])
        lines = text.splitlines()
        assert len(lines) == 3
        assert "psnr_db" in lines[0]
        assert "inf" in lines[2]
