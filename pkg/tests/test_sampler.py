import pytest
import torch

import singen
from singen.metrics import diversity
from singen.pyramid import resize
from singen.sampler import edit, generate, harmonize
from singen.smoothing import smooth


def mse(a, b):
    return ((a - b) ** 2).mean().item()


def laplacian_energy(x):
    lap = torch.tensor([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])
    weight = lap.view(1, 1, 3, 3).expand(3, 1, 3, 3)
    return torch.nn.functional.conv2d(x, weight, groups=3).pow(2).mean().item()


def paste_square(image, value=0.8, frac=3):
    out = image.clone()
    h, w = image.shape[-2:]
    hs, ws = h // frac, w // frac
    out[..., hs:2 * hs, ws:2 * ws] = value
    return out


class TestGenerate:
    def test_deterministic_under_seed(self, toy_cascade):
        a = generate(toy_cascade, count=3, seed=21)
        b = generate(toy_cascade, count=3, seed=21)
        assert all(torch.equal(x, y) for x, y in zip(a, b))

    def test_different_seeds_differ(self, toy_cascade):
        a = generate(toy_cascade, count=1, seed=1)[0]
        b = generate(toy_cascade, count=1, seed=2)[0]
        assert (a - b).abs().max().item() > 0

    def test_output_dims_and_range(self, toy_cascade):
        imgs = generate(toy_cascade, count=2, seed=0)
        for img in imgs:
            assert tuple(img.shape[-2:]) == toy_cascade.pyramid.dims(0)
            assert img.min() >= -1.0 and img.max() <= 1.0

    @pytest.mark.parametrize("mult", [(1.0, 1.0), (1.0, 2.0), (2.0, 1.0)])
    def test_arbitrary_size_aspect_ratios(self, toy_cascade, mult):
        hm, wm = mult
        h0, w0 = toy_cascade.pyramid.dims(0)
        out_dims = (round(h0 * hm), round(w0 * wm))
        img = generate(toy_cascade, count=1, seed=4, out_dims=out_dims)[0]
        assert tuple(img.shape[-2:]) == out_dims

    def test_out_dims_below_receptive_field_rejected(self, toy_cascade):
        with pytest.raises(ValueError, match="receptive-field"):
            generate(toy_cascade, count=1, seed=0, out_dims=(8, 8))

    def test_start_scale_out_of_range(self, toy_cascade):
        with pytest.raises(ValueError):
            generate(toy_cascade, count=1, seed=0,
                     start_scale=toy_cascade.coarsest_index + 1)

    def test_intermediate_start_scale_dims(self, toy_cascade):
        img = generate(toy_cascade, count=1, seed=0, start_scale=0)[0]
        assert tuple(img.shape[-2:]) == toy_cascade.pyramid.dims(0)

    def test_incomplete_run_rejected(self, toy_cascade):
        broken = singen.Cascade(cfg=toy_cascade.cfg, pyramid=toy_cascade.pyramid,
                                models=list(toy_cascade.models),
                                state=toy_cascade.state)
        broken.models = broken.models[:]  # shallow copy
        incomplete_state = type(toy_cascade.state)(seed=0)
        broken.state = incomplete_state
        with pytest.raises(RuntimeError, match="not fully trained"):
            generate(broken, count=1, seed=0)

    def test_diversity_ordering_start_scale(self, toy_cascade):
        # finer start scales repaint less -> no more diverse than coarser
        real01 = (toy_cascade.pyramid[0] + 1) / 2
        scalars = []
        for s in (toy_cascade.coarsest_index, 0):
            samples = generate(toy_cascade, count=30, seed=13, start_scale=s)
            scalars.append(diversity([(x + 1) / 2 for x in samples], real01).scalar)
        assert scalars[0] >= scalars[1]


class TestHarmonize:
    def test_untouched_real_stays_close_to_reconstruction(self, toy_cascade):
        out = harmonize(toy_cascade, toy_cascade.pyramid[0], 1, seed=3)
        x_rec = toy_cascade.state.x_rec[0]
        rand_mse = [mse(g, x_rec) for g in generate(toy_cascade, count=5, seed=5)]
        assert mse(out, x_rec) < min(rand_mse)

    def test_finer_injection_stays_closer(self, toy_cascade):
        composite = paste_square(toy_cascade.pyramid[0])
        fine = harmonize(toy_cascade, composite, 0, seed=3)
        coarse = harmonize(toy_cascade, composite, 1, seed=3)
        assert mse(fine, composite) < mse(coarse, composite)

    def test_pasted_flat_square_gains_texture(self, toy_cascade):
        composite = paste_square(toy_cascade.pyramid[0])
        out = harmonize(toy_cascade, composite, 1, seed=3)
        h, w = composite.shape[-2:]
        hs, ws = h // 3, w // 3
        region = slice(hs, 2 * hs), slice(ws, 2 * ws)
        before = laplacian_energy(composite[..., region[0], region[1]])
        after = laplacian_energy(out[..., region[0], region[1]])
        assert after > before

    def test_inject_at_coarsest_rejected(self, toy_cascade):
        with pytest.raises(ValueError, match="inject_scale"):
            harmonize(toy_cascade, toy_cascade.pyramid[0],
                      toy_cascade.coarsest_index, seed=0)

    def test_deterministic(self, toy_cascade):
        composite = paste_square(toy_cascade.pyramid[0])
        a = harmonize(toy_cascade, composite, 1, seed=8)
        b = harmonize(toy_cascade, composite, 1, seed=8)
        assert torch.equal(a, b)

    def test_zero_noise_deterministic_repaint(self, toy_cascade):
        composite = paste_square(toy_cascade.pyramid[0])
        a = harmonize(toy_cascade, composite, 1, seed=1, noise_scale=0.0)
        b = harmonize(toy_cascade, composite, 1, seed=2, noise_scale=0.0)
        assert torch.equal(a, b)  # noise off: seed is irrelevant


class TestEdit:
    def make_mask(self, cascade, on=True):
        h, w = cascade.pyramid.dims(0)
        mask = torch.zeros(1, 1, h, w)
        if on:
            mask[..., h // 3:2 * h // 3, w // 3:2 * w // 3] = 1.0
        return mask

    def test_zero_mask_returns_original(self, toy_cascade):
        edited = paste_square(toy_cascade.pyramid[0])
        out = edit(toy_cascade, edited, self.make_mask(toy_cascade, on=False),
                   1, seed=4)
        assert torch.equal(out, edited)

    def test_full_mask_equals_harmonize(self, toy_cascade):
        edited = paste_square(toy_cascade.pyramid[0])
        mask = torch.ones(1, 1, *toy_cascade.pyramid.dims(0))
        out = edit(toy_cascade, edited, mask, 1, seed=4)
        harm = harmonize(toy_cascade, edited, 1, seed=4)
        assert torch.equal(out, harm)

    def test_far_outside_pixels_bit_equal(self, toy_cascade):
        edited = paste_square(toy_cascade.pyramid[0])
        mask = self.make_mask(toy_cascade)
        feather = 5
        out = edit(toy_cascade, edited, mask, 1, seed=4, feather_px=feather)
        h, w = edited.shape[-2:]
        # pixels farther than the feather width from the rectangle
        far = torch.ones(1, 1, h, w, dtype=torch.bool)
        lo_h, hi_h = h // 3 - feather, 2 * h // 3 + feather
        lo_w, hi_w = w // 3 - feather, 2 * w // 3 + feather
        far[..., max(0, lo_h):hi_h, max(0, lo_w):hi_w] = False
        assert torch.equal(out.masked_select(far), edited.masked_select(far))
        # and inside the mask the repaint actually happened
        assert not torch.equal(out, edited)

    def test_inside_mask_matches_harmonized(self, toy_cascade):
        edited = paste_square(toy_cascade.pyramid[0])
        mask = self.make_mask(toy_cascade)
        out = edit(toy_cascade, edited, mask, 1, seed=4)
        harm = harmonize(toy_cascade, edited, 1, seed=4)
        inside = mask[0, 0].bool()
        assert torch.equal(out[0, :, inside], harm[0, :, inside])

    def test_non_binary_mask_rejected(self, toy_cascade):
        edited = toy_cascade.pyramid[0]
        mask = self.make_mask(toy_cascade) * 0.5
        with pytest.raises(ValueError, match="binary"):
            edit(toy_cascade, edited, mask, 1, seed=0)

    def test_wrong_dims_rejected(self, toy_cascade):
        edited = toy_cascade.pyramid[0]
        with pytest.raises(ValueError, match="mask"):
            edit(toy_cascade, edited, torch.zeros(1, 1, 8, 8), 1, seed=0)
        small = resize(edited, (20, 20), "area")
        with pytest.raises(ValueError, match="finest"):
            edit(toy_cascade, small, self.make_mask(toy_cascade), 1, seed=0)

    def test_feather_blend_is_smooth(self, toy_cascade):
        mask = self.make_mask(toy_cascade)
        blend = torch.maximum(mask, smooth(mask, 5 / 3.0))
        assert blend.min() >= 0 and blend.max() <= 1.0 + 1e-6
        assert ((blend > 0) & (blend < 1)).any()  # an actual ramp exists
