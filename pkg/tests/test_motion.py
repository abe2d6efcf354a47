import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vidinpaint.errors import InvalidArgumentError, InvalidShapeError, LoadError
from vidinpaint.motion import (
    LAYERS,
    AttentionParams,
    TextEmbedding,
    attention_cost_report,
    damped_global_attention,
    init_motion_block,
    motion_block_forward,
    temporal_attention,
    textual_cross_attention,
)
from vidinpaint.tensor import Tape, Tensor, finite_diff_grad, ops, relative_error

from . import oracles


def T64(a):
    return Tensor(np.asarray(a, dtype=np.float64))


def random_attention(rng, d, heads, d_in=None):
    d_in = d if d_in is None else d_in
    return AttentionParams(
        wq=T64(rng.standard_normal((d, d)) / np.sqrt(d)),
        wk=T64(rng.standard_normal((d_in, d)) / np.sqrt(d_in)),
        wv=T64(rng.standard_normal((d_in, d)) / np.sqrt(d_in)),
        wo=T64(rng.standard_normal((d, d)) / np.sqrt(d)),
        heads=heads,
    )


def np_params(p):
    return [p.wq.data, p.wk.data, p.wv.data, p.wo.data]


# -- loop oracles ---------------------------------------------------------------------

def oracle_self_attention(tokens, p):
    wq, wk, wv, wo = np_params(p)
    q, k, v = (oracles.linear(tokens, w) for w in (wq, wk, wv))
    return oracles.linear(oracles.naive_attention(q, k, v, p.heads), wo)


def oracle_temporal(x, p):
    b, f, c, w, h = x.shape
    out = np.zeros_like(x)
    for bi in range(b):
        for i in range(w):
            for j in range(h):
                out[bi, :, :, i, j] = oracle_self_attention(x[bi, :, :, i, j], p)
    return out


def _tokens(small):
    # [f, c, w', h'] -> [f*w'*h', c], frame-major then row-major
    f, c, tw, th = small.shape
    return np.array([small[fi, :, i, j] for fi in range(f) for i in range(tw) for j in range(th)])


def _grid(tokens, f, c, tw, th):
    grid = np.zeros((f, c, tw, th))
    n = 0
    for fi in range(f):
        for i in range(tw):
            for j in range(th):
                grid[fi, :, i, j] = tokens[n]
                n += 1
    return grid


def oracle_dga(x, p, target):
    b, f, c, w, h = x.shape
    out = np.zeros_like(x)
    for bi in range(b):
        small = oracles.resize_clip(x[bi], target)
        att = oracle_self_attention(_tokens(small), p)
        out[bi] = oracles.resize_clip(_grid(att, f, c, *target), (w, h))
    return out


def oracle_cross(x, text, p, target):
    b, f, c, w, h = x.shape
    wq, wk, wv, wo = np_params(p)
    out = np.zeros_like(x)
    for bi in range(b):
        small = oracles.resize_clip(x[bi], target)
        q = oracles.linear(_tokens(small), wq)
        att = oracles.naive_attention(q, oracles.linear(text, wk), oracles.linear(text, wv), p.heads)
        out[bi] = oracles.resize_clip(_grid(oracles.linear(att, wo), f, c, *target), (w, h))
    return out


# -- temporal --------------------------------------------------------------------------

class TestTemporal:
    def test_single_frame_is_value_projection(self):
        rng = np.random.default_rng(0)
        p = random_attention(rng, 4, 2)
        x = rng.standard_normal((1, 1, 4, 3, 2))
        got = temporal_attention(T64(x), p).data
        tokens = x.transpose(0, 1, 3, 4, 2)
        want = (tokens @ p.wv.data @ p.wo.data).transpose(0, 1, 4, 2, 3)
        assert np.allclose(got, want, atol=1e-12)

    def test_frame_constant_input(self):
        rng = np.random.default_rng(1)
        p = random_attention(rng, 4, 2)
        x = np.repeat(rng.standard_normal((1, 1, 4, 3, 3)), 5, axis=1)
        out = temporal_attention(T64(x), p).data
        assert np.allclose(out, out[:, :1], atol=1e-12)

    def test_matches_per_site_oracle(self):
        rng = np.random.default_rng(2)
        p = random_attention(rng, 4, 2)
        x = rng.standard_normal((1, 2, 4, 2, 2))
        assert np.allclose(temporal_attention(T64(x), p).data, oracle_temporal(x, p), rtol=1e-5, atol=1e-10)

    def test_spatially_local(self):
        rng = np.random.default_rng(3)
        p = random_attention(rng, 4, 2)
        x = np.zeros((1, 3, 4, 3, 3))
        x[:, :, :, 1, 2] = rng.standard_normal((1, 3, 4))
        base = temporal_attention(T64(np.zeros_like(x)), p).data
        out = temporal_attention(T64(x), p).data
        mask = np.ones((3, 3), bool)
        mask[1, 2] = False
        assert np.allclose(out[..., mask], base[..., mask], atol=1e-6)

    def test_frame_permutation_equivariant(self):
        rng = np.random.default_rng(4)
        p = random_attention(rng, 4, 2)
        x = rng.standard_normal((2, 4, 4, 2, 3))
        perm = [2, 0, 3, 1]
        a = temporal_attention(T64(x[:, perm]), p).data
        b = temporal_attention(T64(x), p).data[:, perm]
        assert np.allclose(a, b, atol=1e-6)

    def test_channel_mismatch(self):
        p = random_attention(np.random.default_rng(5), 4, 2)
        with pytest.raises(InvalidShapeError):
            temporal_attention(T64(np.zeros((1, 2, 3, 2, 2))), p)


class TestDGA:
    def test_sequence_length(self):
        # f=16 frames on an 8x6 grid: one sequence of 16*8*6 tokens
        rng = np.random.default_rng(6)
        p = random_attention(rng, 2, 1)
        x = Tensor(rng.standard_normal((1, 16, 2, 8, 6)))
        with Tape() as tape:
            damped_global_attention(x, p, (8, 6))
        (node,) = [n for n in tape.nodes if n.op == "attention"]
        assert node.inputs[0].shape == (1, 768, 2)
        assert attention_cost_report(1, 16, 2, 8, 6, (8, 6), 1).row("dga").seq_len == 768

    def test_constant_input(self):
        rng = np.random.default_rng(7)
        p = random_attention(rng, 4, 2)
        x = np.broadcast_to(rng.standard_normal((1, 1, 4, 1, 1)), (2, 3, 4, 4, 4))
        out = damped_global_attention(T64(x), p, (2, 2)).data
        assert np.allclose(out, out[:1, :1, :, :1, :1], atol=1e-12)

    def test_composition_oracle_tiny(self):
        rng = np.random.default_rng(8)
        p = random_attention(rng, 4, 2)
        x = rng.standard_normal((1, 2, 4, 2, 2))
        # by hand: 1x1 resize averages each 2x2 frame, L = 2 tokens
        means = x.mean(axis=(3, 4))[0]
        att = oracle_self_attention(means, p)
        want = np.broadcast_to(att[None, :, :, None, None], x.shape)
        got = damped_global_attention(T64(x), p, (1, 1)).data
        assert np.allclose(got, want, rtol=1e-5, atol=1e-10)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(9)
        p = random_attention(rng, 4, 2)
        x = rng.standard_normal((2, 3, 4, 4, 3))
        got = damped_global_attention(T64(x), p, (2, 2)).data
        assert np.allclose(got, oracle_dga(x, p, (2, 2)), rtol=1e-5, atol=1e-10)

    def test_mixes_space_and_time(self):
        # unlike temporal attention, a single-site impulse reaches other sites
        rng = np.random.default_rng(10)
        p = random_attention(rng, 4, 2)
        x = np.zeros((1, 2, 4, 4, 4))
        x[0, 0, :, 0, 0] = 5 * rng.standard_normal(4)
        base = damped_global_attention(T64(np.zeros_like(x)), p, (2, 2)).data
        out = damped_global_attention(T64(x), p, (2, 2)).data
        assert not np.allclose(out[0, 1, :, 3, 3], base[0, 1, :, 3, 3])

    def test_frame_permutation_equivariant(self):
        rng = np.random.default_rng(11)
        p = random_attention(rng, 4, 2)
        x = rng.standard_normal((1, 3, 4, 4, 4))
        perm = [1, 2, 0]
        a = damped_global_attention(T64(x[:, perm]), p, (2, 3)).data
        b = damped_global_attention(T64(x), p, (2, 3)).data[:, perm]
        assert np.allclose(a, b, atol=1e-6)

    @pytest.mark.parametrize("target", [(0, 2), (5, 2), (2, 5)])
    def test_invalid_target(self, target):
        p = random_attention(np.random.default_rng(12), 4, 2)
        with pytest.raises(InvalidArgumentError):
            damped_global_attention(T64(np.zeros((1, 1, 4, 4, 4))), p, target)


class TestCross:
    def test_single_text_token_uniform_injection(self):
        rng = np.random.default_rng(13)
        p = random_attention(rng, 4, 2, d_in=6)
        token = rng.standard_normal((1, 6))
        x = rng.standard_normal((1, 2, 4, 4, 4))
        out = textual_cross_attention(T64(x), TextEmbedding(T64(token)), p, (2, 2)).data
        want = (token @ p.wv.data @ p.wo.data)[0]
        assert np.allclose(out, want[None, None, :, None, None], atol=1e-12)

    def test_text_permutation_invariant(self):
        rng = np.random.default_rng(14)
        p = random_attention(rng, 4, 2, d_in=6)
        text = rng.standard_normal((5, 6))
        x = T64(rng.standard_normal((1, 2, 4, 2, 2)))
        a = textual_cross_attention(x, TextEmbedding(T64(text)), p, (2, 2)).data
        b = textual_cross_attention(x, TextEmbedding(T64(text[[3, 1, 4, 0, 2]])), p, (2, 2)).data
        assert np.allclose(a, b, atol=1e-6)

    def test_matches_direct_oracle(self):
        rng = np.random.default_rng(15)
        p = random_attention(rng, 4, 2, d_in=5)
        x = rng.standard_normal((1, 2, 4, 2, 2))
        text = rng.standard_normal((3, 5))
        got = textual_cross_attention(T64(x), TextEmbedding(T64(text)), p, (2, 2)).data
        assert np.allclose(got, oracle_cross(x, text, p, (2, 2)), rtol=1e-5, atol=1e-10)

    def test_quoted_cost_factor(self):
        r = attention_cost_report(1, 16, 8, 8, 6, (8, 6), 7)
        assert r.cross_quoted_naive // r.cross_quoted_reduced == (8 * 6) ** 2 == 2304
        assert r.cross_quoted_naive % r.cross_quoted_reduced == 0

    def test_dim_mismatch(self):
        p = random_attention(np.random.default_rng(16), 4, 2, d_in=6)
        with pytest.raises(InvalidShapeError):
            textual_cross_attention(T64(np.zeros((1, 1, 4, 2, 2))), TextEmbedding(T64(np.zeros((2, 5)))), p, (1, 1))


class TestBlock:
    def _setup(self, seed=0, d=4, heads=2, d_text=3, target=(2, 2), zero=False):
        params = init_motion_block(seed, d_model=d, d_text=d_text, heads=heads, target=target,
                                   zero_init_output=zero, dtype=np.float64)
        rng = np.random.default_rng(seed + 100)
        text = TextEmbedding(T64(rng.standard_normal((3, d_text))))
        return params, text, rng

    def test_zero_output_projections_identity(self):
        params, text, rng = self._setup()
        zeroed = params.with_parameters({f"motion.{l}.wo": T64(np.zeros((4, 4))) for l in LAYERS})
        x = rng.standard_normal((1, 2, 4, 4, 4))
        assert np.array_equal(motion_block_forward(T64(x), text, zeroed).data, x)

    def test_fresh_block_is_identity(self):
        params, text, rng = self._setup(zero=True)
        x = rng.standard_normal((2, 3, 4, 4, 4))
        assert np.abs(motion_block_forward(T64(x), text, params).data - x).max() == 0

    def test_deterministic(self):
        params, text, rng = self._setup()
        x = T64(rng.standard_normal((1, 2, 4, 4, 4)))
        assert np.array_equal(motion_block_forward(x, text, params).data, motion_block_forward(x, text, params).data)

    def test_degenerate_single_token(self):
        params, text, rng = self._setup(target=(1, 1))
        out = motion_block_forward(T64(rng.standard_normal((1, 1, 4, 1, 1))), text, params)
        assert out.shape == (1, 1, 4, 1, 1)
        assert np.isfinite(out.data).all()

    def test_all_parameter_gradients(self):
        params, text, rng = self._setup()
        named = params.named_parameters()
        x = T64(rng.standard_normal((1, 2, 4, 4, 4)))
        r = rng.standard_normal(x.shape)

        def loss_for(p):
            return float(np.sum(motion_block_forward(x, text, p).data * r))

        with Tape() as tape:
            out = motion_block_forward(x, text, params)
            loss = ops.sum(ops.mul(out, T64(r)))
        grads = dict(zip(named, tape.gradient(loss, list(named.values()))))
        for key, value in named.items():
            fd = finite_diff_grad(lambda a, key=key: loss_for(params.with_parameters({key: Tensor(a)})),
                                  value.data.astype(np.float64), 1e-3)
            assert relative_error(grads[key], fd) < 1e-4, key


class TestInit:
    def test_seed_determinism(self):
        a = init_motion_block(7).named_parameters()
        b = init_motion_block(7).named_parameters()
        assert all(np.array_equal(a[k].data, b[k].data) for k in a)

    def test_kaiming_variance(self):
        p = init_motion_block(3, d_model=64, d_text=64, heads=8, zero_init_output=False)
        samples = np.concatenate([getattr(p, l).wq.data.ravel() for l in ("temporal1", "temporal2", "dga")])
        assert samples.size >= 10_000
        ratio = samples.var() / (2 / 64)
        assert 0.8 <= ratio <= 1.2

    def test_pretrained_pass_through(self):
        w = np.random.default_rng(0).standard_normal((8, 8)).astype(np.float32)
        p = init_motion_block(1, pretrained={"motion.temporal1.wq": w})
        assert np.array_equal(p.temporal1.wq.data, w)
        assert not np.array_equal(p.dga.wq.data, w)

    def test_pretrained_shape_mismatch_names_entry(self):
        with pytest.raises(LoadError, match="motion.temporal2.wk"):
            init_motion_block(1, pretrained={"motion.temporal2.wk": np.zeros((4, 8))})

    def test_new_layers_ignore_checkpoint(self):
        w = np.ones((8, 8))
        p = init_motion_block(1, pretrained={"motion.dga.wq": w})
        assert not np.array_equal(p.dga.wq.data, w)

    def test_bad_heads(self):
        with pytest.raises(InvalidArgumentError):
            init_motion_block(1, d_model=6, heads=4)


class TestCostReport:
    def test_sixteen_fold(self):
        r = attention_cost_report(1, 16, 8, 8, 8, (4, 4), 7)
        assert r.row("dga").map_elements == 256 ** 2
        assert r.row("global_naive").map_elements == 1024 ** 2
        assert r.dga_reduction == 16

    def test_full_target_no_reduction(self):
        r = attention_cost_report(2, 4, 8, 5, 3, (5, 3), 2)
        assert r.row("dga").map_elements == r.row("global_naive").map_elements

    def test_temporal_counts(self):
        r = attention_cost_report(2, 16, 8, 8, 6, (4, 3), 7)
        assert r.row("temporal").maps == 2 * 8 * 6
        assert r.row("temporal").map_elements == 2 * 8 * 6 * 16 ** 2

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 4), st.integers(1, 32), st.integers(1, 16), st.integers(1, 16), st.data())
    def test_dga_never_exceeds_global(self, b, f, w, h, data):
        tw, th = data.draw(st.integers(1, w)), data.draw(st.integers(1, h))
        r = attention_cost_report(b, f, 4, w, h, (tw, th), 3)
        assert r.row("dga").map_elements <= r.row("global_naive").map_elements

    def test_invalid(self):
        with pytest.raises(InvalidArgumentError):
            attention_cost_report(0, 1, 1, 1, 1, (1, 1), 1)
