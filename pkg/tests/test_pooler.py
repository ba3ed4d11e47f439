"""Event backbone: stage wiring against op-composition oracles."""

import numpy as np
import pytest

import evtrack.tensor as T
from evtrack.errors import ConfigError
from evtrack.model import TrackingModel
from evtrack.config import RunConfig
from evtrack.pooler import (
    BackboneConfig,
    EventBackbone,
    MspStage,
    Stage1,
    multi_scale_pool,
)
from evtrack.tensor import Tensor


def rng64(seed, *shape):
    return Tensor(np.random.default_rng(seed).standard_normal(shape),
                  dtype=np.float64)


def cast64(module):
    for p in module.parameters():
        p.tensor.data = p.tensor.data.astype(np.float64)


class TestStage1:
    def test_zero_input_zero_biases(self):
        m = Stage1(np.random.default_rng(0), 2, 4)
        out = m(Tensor(np.zeros((1, 2, 16, 16), dtype=np.float32)))
        assert not out.data.any()

    def test_constant_propagation_with_identity_convs(self):
        m = Stage1(np.random.default_rng(0), 4, 4)
        eye = np.eye(4, dtype=np.float32).reshape(4, 4, 1, 1)
        for conv in (m.conv_in, m.conv_max, m.conv_avg):
            conv.weight.data = eye
            conv.bias.data = np.zeros(4, dtype=np.float32)
        c = 0.75
        out = m(Tensor(np.full((1, 4, 16, 16), c, dtype=np.float32)))
        # interior cells: max path gives c, avg path gives c, sum 2c; the
        # first row/column is diluted by the avg pool's zero padding
        assert np.allclose(out.data[:, :, 1:, 1:], 2 * c, atol=1e-6)
        assert (out.data[:, :, 0, :] < 2 * c).all()

    def test_matches_op_composition(self):
        m = Stage1(np.random.default_rng(1), 2, 4)
        cast64(m)
        x = rng64(2, 1, 2, 16, 16)
        out = m(x)
        f = T.maxpool2d(m.conv_in(x), 3, 2, 1)
        fi = T.maxpool2d(m.conv_max(f), 3, 2, 1)
        fj = T.avgpool2d(m.conv_avg(f), 3, 2, 1)
        ref = T.add(fi, fj)
        assert np.array_equal(out.data, ref.data)
        assert out.shape == (1, 4, 4, 4)


class TestMsp:
    def test_single_group_constant(self):
        x = Tensor(np.full((1, 4, 5, 5), 1.5, dtype=np.float64))
        out = multi_scale_pool(x, (3,), cascade_from_group=3)
        assert np.array_equal(out.data, x.data)

    def test_channel_partition_quarters(self):
        x = rng64(3, 1, 64, 4, 4)
        cap = []
        out = multi_scale_pool(x, (3, 5, 7, 9), capture=cap)
        assert out.shape == (1, 64, 4, 4)
        assert [g.shape[1] for g in cap] == [16, 16, 16, 16]

    def test_matches_per_group_cascade_oracle(self):
        x = rng64(4, 1, 8, 6, 6)
        out = multi_scale_pool(x, (3, 5, 7, 9), cascade_from_group=3)
        xs = T.split(x, [2, 2, 2, 2], axis=1)
        g1 = T.maxpool2d(xs[0], 3, 1, 1)
        g2 = T.maxpool2d(xs[1], 5, 1, 2)
        g3 = T.maxpool2d(T.add(xs[2], g2), 7, 1, 3)
        g4 = T.maxpool2d(T.add(xs[3], g3), 9, 1, 4)
        ref = T.concat([g1, g2, g3, g4], axis=1)
        assert np.array_equal(out.data, ref.data)

    def test_cascade_from_group_two(self):
        x = rng64(5, 1, 4, 5, 5)
        out = multi_scale_pool(x, (3, 5), cascade_from_group=2)
        xs = T.split(x, [2, 2], axis=1)
        g1 = T.maxpool2d(xs[0], 3, 1, 1)
        g2 = T.maxpool2d(T.add(xs[1], g1), 5, 1, 2)
        ref = T.concat([g1, g2], axis=1)
        assert np.array_equal(out.data, ref.data)

    def test_indivisible_channels_rejected(self):
        with pytest.raises(ConfigError):
            multi_scale_pool(rng64(6, 1, 6, 4, 4), (3, 5, 7, 9))

    def test_monotone(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((1, 8, 6, 6))
        y = x + np.abs(rng.standard_normal((1, 8, 6, 6)))
        ox = multi_scale_pool(Tensor(x, dtype=np.float64), (3, 5, 7, 9)).data
        oy = multi_scale_pool(Tensor(y, dtype=np.float64), (3, 5, 7, 9)).data
        assert (ox <= oy).all()


class TestMspStage:
    def test_zero_input(self):
        m = MspStage(np.random.default_rng(8), 4, 8, (3, 5, 7, 9), 3)
        out = m(Tensor(np.zeros((1, 4, 8, 8), dtype=np.float32)))
        assert not out.data.any()

    def test_halves_spatial_dims(self):
        m = MspStage(np.random.default_rng(9), 4, 8, (3, 5, 7, 9), 3)
        out = m(rng64(10, 2, 4, 12, 10))
        assert out.shape == (2, 8, 6, 5)

    def test_odd_dims_rejected(self):
        m = MspStage(np.random.default_rng(11), 4, 8, (3, 5, 7, 9), 3)
        with pytest.raises(ConfigError, match="even"):
            m(rng64(12, 1, 4, 7, 8))

    def test_matches_op_composition(self):
        m = MspStage(np.random.default_rng(13), 4, 8, (3, 5, 7, 9), 3)
        cast64(m)
        x = rng64(14, 1, 4, 8, 8)
        out = m(x)
        d = m.stem(x)
        ref = T.add(m.proj(multi_scale_pool(d, (3, 5, 7, 9), 3)), m.shortcut(d))
        assert np.array_equal(out.data, ref.data)


class TestBackbone:
    def cfg(self, c3=16):
        return BackboneConfig(in_channels=2, stage_channels=(8, 8, c3),
                              msp_groups=4, msp_kernels=(3, 5, 7, 9))

    def test_search_token_count(self):
        bb = EventBackbone(np.random.default_rng(15), self.cfg())
        ts = bb.tokens(Tensor(np.zeros((1, 2, 256, 256), dtype=np.float32)), "search")
        assert ts.count == 256
        assert ts.grid == (16, 16)
        assert ts.width == 16

    def test_template_token_count(self):
        bb = EventBackbone(np.random.default_rng(16), self.cfg())
        ts = bb.tokens(Tensor(np.zeros((1, 2, 128, 128), dtype=np.float32)), "template")
        assert ts.count == 64

    def test_total_stride_sixteen(self):
        bb = EventBackbone(np.random.default_rng(17), self.cfg())
        f = bb.features(rng64(18, 1, 2, 64, 32))
        assert f.shape == (1, 16, 4, 2)

    def test_indivisible_input_rejected(self):
        bb = EventBackbone(np.random.default_rng(19), self.cfg())
        with pytest.raises(ConfigError, match="divisible by 16"):
            bb.features(rng64(20, 1, 2, 40, 40))

    def test_row_major_token_flattening(self):
        bb = EventBackbone(np.random.default_rng(21), self.cfg())
        x = rng64(22, 1, 2, 32, 32)
        f = bb.features(x)
        ts = bb.tokens(x, "search")
        h, w = ts.grid
        for n in (0, 1, w, h * w - 1):
            iy, ix = divmod(n, w)
            assert np.array_equal(ts.tokens.data[0, n], f.data[0, :, iy, ix])

    def test_config_validation(self):
        with pytest.raises(ConfigError, match="divisible"):
            BackboneConfig(stage_channels=(48, 90, 192)).validate()
        with pytest.raises(ConfigError, match="odd"):
            BackboneConfig(msp_kernels=(3, 4, 7, 9)).validate()
        with pytest.raises(ConfigError, match="increasing"):
            BackboneConfig(msp_kernels=(3, 3, 7, 9)).validate()


class TestLightweightClaim:
    def test_pooler_params_at_least_5x_smaller_than_encoder(self):
        model = TrackingModel(RunConfig().model, seed=0)
        pooler = sum(p.data.size for n, p in model.named_parameters()
                     if n.startswith("pooler."))
        encoder = sum(p.data.size for n, p in model.named_parameters()
                      if n.startswith("rgb."))
        assert pooler * 5 <= encoder
