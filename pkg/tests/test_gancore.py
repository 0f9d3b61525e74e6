import numpy as np
import pytest
import torch

from instructpaint.config import ModelConfig
from instructpaint.models import (
    Discriminator,
    Generator,
    compose,
    visual_increment,
)


@pytest.fixture()
def tiny_gen(tiny_model_config):
    torch.manual_seed(0)
    g = Generator(tiny_model_config)
    g.eval()
    return g


@pytest.fixture()
def tiny_disc(tiny_model_config):
    torch.manual_seed(1)
    d = Discriminator(tiny_model_config)
    d.eval()
    return d


def test_generator_encoder_shape_desk(vocab):
    cfg = ModelConfig(vocab_size=len(vocab))
    torch.manual_seed(0)
    g = Generator(cfg).eval()
    with torch.no_grad():
        v = g.encode_image(torch.rand(2, 3, 64, 64) * 2 - 1)
    assert v.shape == (2, 128, 8, 8)


@pytest.mark.slow
def test_generator_encoder_shape_paper_scale(vocab):
    cfg = ModelConfig.paper_scale(vocab_size=len(vocab))
    torch.manual_seed(0)
    g = Generator(cfg).eval()
    with torch.no_grad():
        v = g.encode_image(torch.rand(1, 3, 128, 128) * 2 - 1)
    assert v.shape == (1, 256, 16, 16)


def test_encoder_zero_weights_zero_map(tiny_gen, tiny_disc, tiny_model_config):
    for module in (tiny_gen.image_encoder, tiny_disc.image_encoder):
        with torch.no_grad():
            for p in module.parameters():
                p.zero_()
        out = module(torch.randn(2, 3, 8, 8))
        assert (out == 0).all()


def test_encoder_wrong_resolution_rejected(tiny_gen):
    with pytest.raises(ValueError):
        tiny_gen.encode_image(torch.randn(1, 3, 16, 16))


def test_project_intent_shape_and_zero(tiny_gen, tiny_model_config):
    c = torch.randn(3, tiny_model_config.cond_dim)
    out = tiny_gen.project_intent(c)
    assert out.shape == (3, 4, 2, 2)
    with torch.no_grad():
        for p in tiny_gen.intent.parameters():
            p.zero_()
    assert (tiny_gen.project_intent(c) == 0).all()


def test_project_intent_linearity_single_layer(vocab, tiny_model_config):
    from dataclasses import replace
    cfg = replace(tiny_model_config, intent_hidden=())
    torch.manual_seed(0)
    g = Generator(cfg)
    with torch.no_grad():
        g.intent.mlp[0].bias.zero_()
    c = torch.randn(2, cfg.cond_dim)
    assert torch.allclose(g.project_intent(2 * c), 2 * g.project_intent(c), atol=1e-5)


def test_compose_identities():
    v = torch.randn(2, 4, 2, 2)
    zero = torch.zeros_like(v)
    assert torch.equal(compose(v, zero), v)
    assert torch.equal(compose(zero, v), v)
    a = torch.tensor([[[[1.5]]]])
    b = torch.tensor([[[[-0.25]]]])
    assert float(compose(a, b)) == 1.25


def test_visual_increment_identities():
    v = torch.randn(2, 4, 2, 2)
    w = torch.randn(2, 4, 2, 2)
    assert (visual_increment(v, v) == 0).all()
    assert torch.equal(visual_increment(v, w), -visual_increment(w, v))
    assert float(visual_increment(torch.tensor([[[[0.7]]]]), torch.tensor([[[[0.2]]]]))) == pytest.approx(0.5)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        compose(torch.zeros(1, 4, 2, 2), torch.zeros(1, 4, 2, 3))
    with pytest.raises(ValueError):
        visual_increment(torch.zeros(1, 4, 2, 2), torch.zeros(1, 2, 2, 2))


def test_decode_output_shape_and_determinism(tiny_gen, tiny_model_config):
    core = torch.randn(2, 4, 2, 2)
    v = torch.randn(2, 4, 2, 2)
    c = torch.randn(2, tiny_model_config.cond_dim)
    with torch.no_grad():
        one = tiny_gen.decode(core, v, c)
        two = tiny_gen.decode(core, v, c)
    assert one.shape == (2, 3, 8, 8)
    assert one.min() >= -1 and one.max() <= 1
    assert torch.equal(one, two)


def test_decode_conditioning_effectiveness(tiny_model_config):
    # different condition vectors must change the output at random init
    distances = []
    for seed in range(5):
        torch.manual_seed(seed)
        g = Generator(tiny_model_config).eval()
        core = torch.randn(1, 4, 2, 2)
        v = torch.randn(1, 4, 2, 2)
        c1 = torch.randn(1, tiny_model_config.cond_dim)
        c2 = torch.randn(1, tiny_model_config.cond_dim)
        with torch.no_grad():
            distances.append(float((g.decode(core, v, c1) - g.decode(core, v, c2)).abs().max()))
    assert all(d > 0 for d in distances)


def test_generate_equals_manual_composition(tiny_gen, tiny_model_config):
    img = torch.rand(2, 3, 8, 8) * 2 - 1
    c = torch.randn(2, tiny_model_config.cond_dim)
    with torch.no_grad():
        auto = tiny_gen(img, c)
        v = tiny_gen.encode_image(img)
        manual = tiny_gen.decode(compose(v, tiny_gen.project_intent(c)), v, c)
    assert torch.equal(auto, manual)


def test_discriminate_equals_manual_composition(tiny_disc, tiny_model_config):
    a = torch.rand(2, 3, 8, 8) * 2 - 1
    b = torch.rand(2, 3, 8, 8) * 2 - 1
    h = torch.randn(2, tiny_model_config.condition_width)
    with torch.no_grad():
        auto = tiny_disc(a, b, h)
        v_t, v_p = tiny_disc.encode_image(a), tiny_disc.encode_image(b)
        manual = tiny_disc.score(visual_increment(v_t, v_p), v_p, h)
    assert torch.equal(auto, manual)


def test_discriminator_shared_encoder_instance(tiny_disc):
    img = torch.rand(1, 3, 8, 8)
    with torch.no_grad():
        one = tiny_disc.encode_image(img)
        two = tiny_disc.encode_image(img)
    assert torch.equal(one, two)
    # source and target literally go through the same module object
    assert tiny_disc.encode_image.__self__ is tiny_disc


def test_projection_score_hand_case(tiny_disc):
    # x = (1, 2), h = (3, 4), psi(x) = x1  ->  r = 3 + 8 + 1 = 12
    from instructpaint.models.layers import SNLinear
    tiny_disc.psi = SNLinear(2, 1)
    with torch.no_grad():
        tiny_disc.psi.weight.copy_(torch.tensor([[1.0, 0.0]]))
        tiny_disc.psi.bias.zero_()
        tiny_disc.psi.sn_u.fill_(1.0)
        tiny_disc.psi.sn_v.copy_(torch.tensor([1.0, 0.0]))
    tiny_disc.eval()
    x = torch.tensor([[1.0, 2.0]])
    h = torch.tensor([[3.0, 4.0]])
    with torch.no_grad():
        r = tiny_disc.project_score(x, h)
    assert float(r) == pytest.approx(12.0, abs=1e-9)


def test_score_with_zero_condition_is_psi(tiny_disc, tiny_model_config):
    v = torch.randn(1, 4, 2, 2)
    inc = torch.randn(1, 4, 2, 2)
    h0 = torch.zeros(1, tiny_model_config.condition_width)
    with torch.no_grad():
        x = tiny_disc.fuse(inc, v)
        assert torch.allclose(tiny_disc.score(inc, v, h0), tiny_disc.psi(x).squeeze(-1))


def test_score_with_zero_psi_is_inner_product(tiny_disc, tiny_model_config):
    v = torch.randn(1, 4, 2, 2)
    inc = torch.randn(1, 4, 2, 2)
    h = torch.randn(1, tiny_model_config.condition_width)
    with torch.no_grad():
        tiny_disc.psi.weight.zero_()
        tiny_disc.psi.bias.zero_()
        x = tiny_disc.fuse(inc, v)
        assert torch.allclose(tiny_disc.score(inc, v, h), (h * x).sum(-1))


def test_discriminate_no_change_input_finite(tiny_disc, tiny_model_config):
    img = torch.rand(2, 3, 8, 8) * 2 - 1
    h = torch.randn(2, tiny_model_config.condition_width)
    with torch.no_grad():
        r = tiny_disc(img, img, h)
    assert torch.isfinite(r).all()


def test_discriminate_swap_asymmetry(tiny_model_config):
    # swapping target and source changes the score in general
    diffs = []
    for seed in range(5):
        torch.manual_seed(seed)
        d = Discriminator(tiny_model_config).eval()
        a = torch.rand(1, 3, 8, 8) * 2 - 1
        b = torch.rand(1, 3, 8, 8) * 2 - 1
        h = torch.randn(1, tiny_model_config.condition_width)
        with torch.no_grad():
            diffs.append(abs(float(d(a, b, h) - d(b, a, h))))
    assert max(diffs) > 1e-4


def _numeric_grad(f, x, eps):
    g = torch.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.numel()):
        orig = float(flat[i])
        flat[i] = orig + eps
        hi = f()
        flat[i] = orig - eps
        lo = f()
        flat[i] = orig
        gf[i] = (hi - lo) / (2 * eps)
    return g


def test_finite_difference_gradients(tiny_model_config):
    # analytic d r / d (generator input, condition) vs central differences
    torch.manual_seed(3)
    gen = Generator(tiny_model_config).double().eval()
    disc = Discriminator(tiny_model_config).double().eval()
    img = (torch.rand(1, 3, 8, 8, dtype=torch.float64) * 2 - 1).requires_grad_(True)
    c = torch.randn(1, tiny_model_config.cond_dim, dtype=torch.float64).requires_grad_(True)
    h = torch.randn(1, tiny_model_config.condition_width, dtype=torch.float64)

    def r_value():
        return float(disc(gen(img, c), img, h))

    r = disc(gen(img, c), img, h)
    g_img, g_c = torch.autograd.grad(r, [img, c])

    with torch.no_grad():
        num_c = _numeric_grad(r_value, c, eps=1e-5)
        num_img = _numeric_grad(r_value, img, eps=1e-5)

    for analytic, numeric in [(g_c, num_c), (g_img, num_img)]:
        rel = (analytic - numeric).norm() / numeric.norm().clamp(min=1e-12)
        assert float(rel) <= 1e-3
    assert g_c.abs().max() > 0  # gradient actually flows to the condition
