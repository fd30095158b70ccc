import math

import numpy as np
import pytest

from ssnl import autodiff as ad
from ssnl.autodiff import Tensor
from ssnl.data import Patch
from ssnl.errors import ConfigError, ContractError, MagicError, ShapeError
from ssnl.model import (
    ModelConfig,
    ModelParams,
    bi_network_forward,
    expected_shapes,
    init_model,
    load_model,
    model_forward,
    normalize_input,
    predict,
    project,
    reverse_spectral,
    save_model,
    spatial_forward,
)
from ssnl.train import cross_entropy, gradient_check_model


def small_config(**overrides):
    base = dict(bands=6, num_classes=3, patch_size=3, hidden_dim=4,
                spatial_channels=3, classifier_hidden=8)
    base.update(overrides)
    return ModelConfig(**base)


def random_patch(config, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(
        (config.patch_size, config.patch_size, config.bands)
    )


# -- config validation -------------------------------------------------------------


def test_config_rejects_even_kernels():
    with pytest.raises(ConfigError):
        small_config(seq_kernel=2)
    with pytest.raises(ConfigError):
        small_config(spatial_kernel=4)


def test_config_rejects_all_branches_off():
    with pytest.raises(ConfigError):
        small_config(forward_on=False, backward_on=False, spatial_on=False)


def test_config_feature_dim_follows_flags():
    assert small_config().feature_dim == 3 + 4
    assert small_config(spatial_on=False).feature_dim == 4
    assert small_config(forward_on=False, backward_on=False).feature_dim == 3


# -- init ---------------------------------------------------------------------------


def test_init_deterministic():
    cfg = small_config()
    a = init_model(cfg, seed=5)
    b = init_model(cfg, seed=5)
    for (_, ta), (_, tb) in zip(a.named_tensors(), b.named_tensors()):
        np.testing.assert_array_equal(ta.data, tb.data)


def test_init_norm_gain_is_ones_and_offsets_zero():
    params = init_model(small_config(), seed=0)
    np.testing.assert_array_equal(params.norm_gain.data, np.ones(6, dtype=np.float32))
    np.testing.assert_array_equal(params.norm_bias.data, np.zeros(6, dtype=np.float32))
    np.testing.assert_array_equal(params.delta_raw.data, np.zeros(4, dtype=np.float32))
    np.testing.assert_array_equal(params.classifier_b2.data, np.zeros(3, dtype=np.float32))


def test_init_projection_within_fan_in_bound():
    cfg = small_config()
    params = init_model(cfg, seed=1)
    bound = 1.0 / math.sqrt(cfg.bands)
    assert (np.abs(params.proj_fwd.data) <= bound).all()
    assert (np.abs(params.proj_bwd.data) <= bound).all()


def test_init_shapes_match_contract():
    cfg = small_config()
    params = init_model(cfg, seed=2)
    for name, tensor in params.named_tensors():
        assert tensor.shape == expected_shapes(cfg)[name], name


# -- normalize / project / reverse -----------------------------------------------------


def test_normalize_constant_spectrum_pixel_is_zero():
    cfg = small_config()
    params = init_model(cfg, seed=0, dtype=np.float64)
    patch = np.ones((3, 3, 6))
    out = normalize_input(patch, params, cfg)
    np.testing.assert_array_equal(out.data, np.zeros((9, 6)))


def test_normalize_output_shape():
    cfg = small_config(patch_size=5)
    params = init_model(cfg, seed=0)
    out = normalize_input(random_patch(cfg), params, cfg)
    assert out.shape == (25, 6)


def test_normalize_two_band_formula():
    cfg = ModelConfig(bands=2, num_classes=2, patch_size=1, hidden_dim=2,
                      spatial_channels=2, classifier_hidden=2, spatial_kernel=1)
    params = init_model(cfg, seed=0, dtype=np.float64)
    out = normalize_input(np.array([[[0.0, 2.0]]]), params, cfg, eps=1e-14)
    np.testing.assert_allclose(out.data, [[-1.0, 1.0]], atol=1e-6)


def test_project_identity_weights():
    cfg = small_config(hidden_dim=6)
    params = init_model(cfg, seed=0, dtype=np.float64)
    params.proj_fwd.data = np.eye(6)
    x_norm = Tensor(np.random.default_rng(0).standard_normal((9, 6)))
    x_proj, _ = project(x_norm, params)
    np.testing.assert_array_equal(x_proj.data, x_norm.data)


def test_project_zero_input():
    cfg = small_config()
    params = init_model(cfg, seed=0)
    x_proj, z_proj = project(Tensor(np.zeros((9, 6), dtype=np.float32)), params)
    np.testing.assert_array_equal(x_proj.data, np.zeros((9, 4)))
    np.testing.assert_array_equal(z_proj.data, np.zeros((9, 4)))


def test_project_single_pixel_matmul_oracle():
    cfg = ModelConfig(bands=2, num_classes=2, patch_size=1, hidden_dim=2,
                      spatial_channels=1, classifier_hidden=2, spatial_kernel=1)
    params = init_model(cfg, seed=0, dtype=np.float64)
    params.proj_fwd.data = np.array([[2.0, 0.0], [0.0, 3.0]])
    x_proj, _ = project(Tensor(np.array([[1.0, 0.0]])), params)
    np.testing.assert_array_equal(x_proj.data, [[2.0, 0.0]])


def test_reverse_spectral_involution_and_order():
    rows = np.arange(12.0).reshape(3, 4)
    rev = reverse_spectral(Tensor(rows))
    np.testing.assert_array_equal(rev.data, rows[::-1])
    np.testing.assert_array_equal(reverse_spectral(rev).data, rows)
    single = Tensor(np.arange(4.0).reshape(1, 4))
    np.testing.assert_array_equal(reverse_spectral(single).data, single.data)


# -- bidirectional block -----------------------------------------------------------------


def _delta_kernels(params):
    k = params.kernel_fwd.shape[1]
    delta = np.zeros((params.kernel_fwd.shape[0], k), dtype=params.kernel_fwd.data.dtype)
    delta[:, k // 2] = 1.0
    params.kernel_fwd.data = delta.copy()
    params.kernel_bwd.data = delta.copy()


def _naive_direction(seq_rows, kernel):
    # (length, hidden) rows -> depthwise conv along the sequence, silu, tanh
    hidden, k = kernel.shape
    length = seq_rows.shape[0]
    seq = seq_rows.T
    conv = np.zeros((hidden, length))
    pad = (k - 1) // 2
    for i in range(length):
        for j in range(k):
            src = i + j - pad
            if 0 <= src < length:
                conv[:, i] += kernel[:, j] * seq[:, src]
    act = conv * (1.0 / (1.0 + np.exp(-conv)))
    return np.tanh(act)


def test_bi_network_modulation_vanishes():
    # zero mix matrices and a hugely negative delta_raw (softplus -> exactly 0)
    # reduce the block to mean(tanh(f(conv(x)))) per direction
    cfg = small_config()
    params = init_model(cfg, seed=3, dtype=np.float64)
    params.mix_fwd.data = np.zeros((4, 4))
    params.mix_bwd.data = np.zeros((4, 4))
    params.delta_raw.data = np.full(4, -1e9)
    x_norm = Tensor(np.random.default_rng(1).standard_normal((9, 6)))
    combined = bi_network_forward(x_norm, params, cfg)

    fwd = _naive_direction(x_norm.data @ params.proj_fwd.data, params.kernel_fwd.data)
    bwd = _naive_direction(
        (x_norm.data @ params.proj_bwd.data)[::-1], params.kernel_bwd.data
    )
    expected = fwd.mean(axis=1) + bwd.mean(axis=1)
    np.testing.assert_allclose(combined.data, expected, atol=1e-12)


def test_bi_network_zero_everything_gives_zero():
    cfg = small_config()
    params = init_model(cfg, seed=0, dtype=np.float64)
    params.kernel_fwd.data = np.zeros_like(params.kernel_fwd.data)
    params.kernel_bwd.data = np.zeros_like(params.kernel_bwd.data)
    params.mix_fwd.data = np.zeros_like(params.mix_fwd.data)
    params.mix_bwd.data = np.zeros_like(params.mix_bwd.data)
    params.delta_raw.data = np.full(4, -1e9)
    combined = bi_network_forward(Tensor(np.zeros((9, 6))), params, cfg)
    np.testing.assert_array_equal(combined.data, np.zeros(4))


def test_bi_network_scalar_chain_hand_derived():
    # L=1, hidden=1, k=1: both directions compute tanh(silu(w*u) + a*d),
    # so the combined output is exactly twice that value
    cfg = ModelConfig(bands=1, num_classes=2, patch_size=1, hidden_dim=1,
                      seq_kernel=1, spatial_channels=1, spatial_kernel=1,
                      classifier_hidden=2)
    params = init_model(cfg, seed=0, dtype=np.float64)
    w, a, raw, u = 0.8, -1.3, 0.4, 1.7
    params.proj_fwd.data = np.array([[1.0]])
    params.proj_bwd.data = np.array([[1.0]])
    params.kernel_fwd.data = np.array([[w]])
    params.kernel_bwd.data = np.array([[w]])
    params.mix_fwd.data = np.array([[a]])
    params.mix_bwd.data = np.array([[a]])
    params.delta_raw.data = np.array([raw])
    combined = bi_network_forward(Tensor(np.array([[u]])), params, cfg)
    d = math.log1p(math.exp(raw))
    f = (w * u) / (1.0 + math.exp(-(w * u)))
    expected = 2.0 * math.tanh(f + a * d)
    assert combined.data[0] == pytest.approx(expected, rel=1e-12)


def test_bi_network_disabled_direction_contributes_zero():
    cfg = small_config(backward_on=False)
    params = init_model(cfg, seed=4, dtype=np.float64)
    x_norm = Tensor(np.random.default_rng(2).standard_normal((9, 6)))
    combined = bi_network_forward(x_norm, params, cfg)
    both = small_config()
    params_fwd_only = init_model(both, seed=4, dtype=np.float64)
    trace_probe = bi_network_forward(x_norm, params_fwd_only, both)
    assert not np.array_equal(combined.data, trace_probe.data)
    # forward-only equals the full block minus the backward mean
    cfg_bwd = small_config(forward_on=False)
    bwd_only = bi_network_forward(x_norm, init_model(cfg_bwd, seed=4, dtype=np.float64), cfg_bwd)
    np.testing.assert_allclose(combined.data + bwd_only.data, trace_probe.data, atol=1e-12)


def test_bi_network_reversal_invariance_with_delta_kernels():
    # spatial off + identity (delta) kernels: reversing the pixel sequence
    # swaps what the two paths see, and the order-invariant mean keeps
    # h_combined bitwise unchanged
    cfg = small_config(spatial_on=False)
    params = init_model(cfg, seed=5, dtype=np.float64)
    _delta_kernels(params)
    rng = np.random.default_rng(3)
    x_norm = rng.standard_normal((9, 6))
    a = bi_network_forward(Tensor(x_norm), params, cfg)
    b = bi_network_forward(Tensor(x_norm[::-1].copy()), params, cfg)
    np.testing.assert_array_equal(a.data, b.data)


def test_bi_network_palindrome_symmetry():
    # shared projections/kernels/mixes: on a palindromic sequence the two
    # direction means coincide bitwise
    cfg = small_config()
    params = init_model(cfg, seed=6, dtype=np.float64)
    params.proj_bwd.data = params.proj_fwd.data.copy()
    params.kernel_bwd.data = params.kernel_fwd.data.copy()
    params.mix_bwd.data = params.mix_fwd.data.copy()
    rng = np.random.default_rng(4)
    half = rng.standard_normal((4, 6))
    middle = rng.standard_normal((1, 6))
    x_norm = np.vstack([half, middle, half[::-1]])
    trace_cfg = cfg
    from ssnl.model import ForwardTrace
    trace = ForwardTrace(x_norm=None, x_proj=None, z_proj_reversed=None,
                         x_forward=None, x_backward=None, h_forward=None,
                         h_backward=None, h_combined=None, h_spatial=None,
                         h_final=None, logits=None, probabilities=None)
    bi_network_forward(Tensor(x_norm), params, trace_cfg, trace)
    fwd_mean = ad.mean(trace.h_forward, axis=1)
    bwd_mean = ad.mean(trace.h_backward, axis=1)
    np.testing.assert_array_equal(fwd_mean.data, bwd_mean.data)


# -- spatial branch -------------------------------------------------------------------


def test_spatial_zero_patch_zero_bias_gives_zero():
    cfg = small_config()
    params = init_model(cfg, seed=0, dtype=np.float64)
    out = spatial_forward(Tensor(np.zeros((6, 3, 3))), params, cfg)
    np.testing.assert_array_equal(out.data, np.zeros(3))


def test_spatial_degenerate_one_by_one_patch():
    # pooling is a no-op for a 1x1 patch with 1x1 kernels: the branch is
    # silu(W @ spectrum + bias)
    cfg = ModelConfig(bands=4, num_classes=2, patch_size=1, hidden_dim=2,
                      spatial_channels=3, spatial_kernel=1, classifier_hidden=2)
    params = init_model(cfg, seed=7, dtype=np.float64)
    rng = np.random.default_rng(5)
    spectrum = rng.standard_normal(4)
    out = spatial_forward(Tensor(spectrum.reshape(4, 1, 1)), params, cfg)
    w = params.spatial_kernels.data.reshape(3, 4)
    pre = w @ spectrum + params.spatial_bias.data
    expected = pre / (1.0 + np.exp(-pre))
    np.testing.assert_allclose(out.data, expected, atol=1e-12)


def test_spatial_constant_patch_conv_oracle():
    cfg = ModelConfig(bands=1, num_classes=2, patch_size=3, hidden_dim=2,
                      spatial_channels=1, spatial_kernel=3, classifier_hidden=2)
    params = init_model(cfg, seed=8, dtype=np.float64)
    params.spatial_kernels.data = np.ones((1, 1, 3, 3))
    params.spatial_bias.data = np.zeros(1)
    patch = np.full((1, 3, 3), 2.0)
    out = spatial_forward(Tensor(patch), params, cfg)
    # zero same-padding: corner sums 4 cells, edge 6, center 9
    conv = 2.0 * np.array([[4, 6, 4], [6, 9, 6], [4, 6, 4]], dtype=float)
    act = conv / (1.0 + np.exp(-conv))
    assert out.data[0] == pytest.approx(act.mean(), rel=1e-12)


def test_spatial_disabled_branch_rejected():
    cfg = small_config(spatial_on=False)
    params = init_model(cfg, seed=0)
    with pytest.raises(ContractError):
        spatial_forward(Tensor(np.zeros((6, 3, 3))), params, cfg)


# -- full forward -----------------------------------------------------------------------


def test_forward_probabilities_sum_to_one():
    cfg = small_config()
    params = init_model(cfg, seed=9)
    rng = np.random.default_rng(6)
    for _ in range(1000):
        probs, _ = model_forward(rng.standard_normal((3, 3, 6)), params, cfg)
        assert (probs.data > 0).all()
        assert abs(float(probs.data.sum()) - 1.0) < 1e-6


def test_forward_deterministic_bitwise():
    cfg = small_config()
    params = init_model(cfg, seed=10)
    patch = random_patch(cfg, seed=7)
    p1, _ = model_forward(patch, params, cfg)
    p2, _ = model_forward(patch, params, cfg)
    np.testing.assert_array_equal(p1.data, p2.data)


def test_forward_symmetric_logits_give_uniform():
    cfg = small_config(num_classes=2)
    params = init_model(cfg, seed=11, dtype=np.float64)
    params.classifier_w2.data = np.zeros_like(params.classifier_w2.data)
    params.classifier_b2.data = np.full(2, 3.3)
    probs, _ = model_forward(random_patch(cfg, seed=8), params, cfg)
    np.testing.assert_allclose(probs.data, [0.5, 0.5], atol=1e-12)


def test_forward_patch_mismatch_rejected():
    cfg = small_config()
    params = init_model(cfg, seed=0)
    with pytest.raises(ShapeError):
        model_forward(np.zeros((5, 5, 6)), params, cfg)
    with pytest.raises(ShapeError):
        model_forward(np.zeros((3, 3, 7)), params, cfg)


def test_forward_trace_shapes():
    cfg = small_config()
    params = init_model(cfg, seed=12)
    _, trace = model_forward(random_patch(cfg, seed=9), params, cfg)
    assert trace.h_combined.shape == (4,)
    assert trace.h_spatial.shape == (3,)
    assert trace.h_final.shape == (7,)
    assert trace.probabilities.shape == (3,)
    assert abs(float(trace.probabilities.data.sum()) - 1.0) < 1e-6


def test_forward_ablation_shrinks_feature_vector():
    patch_seed = 13
    cfg_ns = small_config(spatial_on=False)
    params = init_model(cfg_ns, seed=1)
    _, trace = model_forward(random_patch(cfg_ns, seed=patch_seed), params, cfg_ns)
    assert trace.h_final.shape == (4,)
    assert trace.h_spatial is None
    cfg_so = small_config(forward_on=False, backward_on=False)
    params = init_model(cfg_so, seed=1)
    _, trace = model_forward(random_patch(cfg_so, seed=patch_seed), params, cfg_so)
    assert trace.h_final.shape == (3,)
    np.testing.assert_array_equal(trace.h_combined.data, np.zeros(4, dtype=np.float32))


# -- predict -------------------------------------------------------------------------


def _forced_logit_params(cfg, logits):
    params = init_model(cfg, seed=0, dtype=np.float64)
    params.classifier_w2.data = np.zeros_like(params.classifier_w2.data)
    params.classifier_b2.data = np.asarray(logits, dtype=np.float64)
    return params


def test_predict_forced_logits():
    cfg = small_config(num_classes=2)
    params = _forced_logit_params(cfg, [0.0, 10.0])
    assert predict(random_patch(cfg, seed=1), params, cfg) == 2


def test_predict_tie_breaks_low():
    cfg = small_config()
    params = _forced_logit_params(cfg, [1.5, 1.5, 1.5])
    assert predict(random_patch(cfg, seed=2), params, cfg) == 1


def test_predict_shift_invariant():
    cfg = small_config()
    params = _forced_logit_params(cfg, [0.2, 1.9, -0.7])
    first = predict(random_patch(cfg, seed=3), params, cfg)
    params.classifier_b2.data = params.classifier_b2.data + 100.0
    assert predict(random_patch(cfg, seed=3), params, cfg) == first == 2


# -- checkpoints ------------------------------------------------------------------------


def test_checkpoint_roundtrip_bits(tmp_path):
    cfg = small_config()
    params = init_model(cfg, seed=14)
    first = tmp_path / "a.ckpt"
    second = tmp_path / "b.ckpt"
    save_model(first, params, cfg)
    loaded, loaded_cfg = load_model(first)
    assert loaded_cfg == cfg
    save_model(second, loaded, loaded_cfg)
    assert first.read_bytes() == second.read_bytes()
    for (_, ta), (_, tb) in zip(params.named_tensors(), loaded.named_tensors()):
        np.testing.assert_array_equal(ta.data, tb.data)


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"WRONGMAG1\nx\n")
    with pytest.raises(MagicError):
        load_model(path)


def test_checkpoint_shape_mismatch(tmp_path):
    cfg = small_config()
    params = init_model(cfg, seed=15)
    path = tmp_path / "c.ckpt"
    save_model(path, params, cfg)
    raw = bytearray(path.read_bytes())
    # corrupt the first shape line ("6" -> "7"): norm_gain no longer matches
    shape_start = raw.index(b"\n", len(b"SSNLCKPT1\n")) + 1
    assert raw[shape_start:shape_start + 2] == b"6\n"
    raw[shape_start:shape_start + 1] = b"7"
    path.write_bytes(bytes(raw))
    with pytest.raises(ShapeError):
        load_model(path)


def test_checkpoint_truncated(tmp_path):
    from ssnl.errors import TruncatedError

    cfg = small_config()
    params = init_model(cfg, seed=16)
    path = tmp_path / "d.ckpt"
    save_model(path, params, cfg)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(TruncatedError):
        load_model(path)


def test_checkpoint_preserves_ablation_flags(tmp_path):
    cfg = small_config(backward_on=False)
    params = init_model(cfg, seed=17)
    path = tmp_path / "e.ckpt"
    save_model(path, params, cfg)
    _, loaded_cfg = load_model(path)
    assert loaded_cfg.backward_on is False and loaded_cfg.forward_on is True


# -- end-to-end gradient check ------------------------------------------------------------


def test_end_to_end_gradient_check():
    cfg = small_config()
    assert gradient_check_model(cfg, seed=0) < 1e-5


def test_end_to_end_gradient_check_ablated():
    assert gradient_check_model(small_config(spatial_on=False), seed=1) < 1e-5
    assert gradient_check_model(small_config(backward_on=False), seed=2) < 1e-5
