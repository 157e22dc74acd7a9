import numpy as np
import pytest

from texadiff.diffusion import (
    AnalyticGaussianModel,
    ConditionSet,
    DenoiserConfig,
    DenoiserModel,
    NoiseSchedule,
    SftLayer,
    TaSamplerConfig,
    TrainConfig,
    TrainItem,
    analytic_gaussian_eps,
    cross_normalize,
    ddpm_step,
    denoise_forward,
    make_schedule,
    q_sample,
    sample,
    sft_inject,
    tadl_loss,
    train,
)
from texadiff.errors import DimensionError, NumericError
from texadiff.nnkit import ParameterSet, Tensor, grad_check
from texadiff.rtdm import BinaryMask


def custom_schedule(alpha_bars):
    """Schedule stub with prescribed cumulative products (limit-case tests)."""
    alpha_bars = np.asarray(alpha_bars, dtype=np.float64)
    alphas = np.empty_like(alpha_bars)
    alphas[0] = alpha_bars[0]
    alphas[1:] = alpha_bars[1:] / alpha_bars[:-1]
    return NoiseSchedule(len(alpha_bars), 1.0 - alphas, alphas, alpha_bars)


class TestSchedule:
    def test_single_step(self):
        s = make_schedule(1, 1e-4, 0.02)
        assert s.alpha_bars.shape == (1,)
        assert s.alpha_bar(1) == 1 - 1e-4

    def test_running_product_exact(self):
        s = make_schedule(50)
        for t in range(2, 51):
            assert s.alpha_bar(t) == s.alpha_bar(t - 1) * s.alpha(t)

    def test_default_endpoint_nearly_pure_noise(self):
        s = make_schedule(1000)
        assert s.alpha_bar(1000) < 0.01
        assert s.alpha_bar(1) >= 0.999

    def test_strictly_decreasing(self):
        s = make_schedule(100)
        assert np.all(np.diff(s.alpha_bars) < 0)

    def test_invalid_bounds(self):
        with pytest.raises(ValueError):
            make_schedule(10, 0.0, 0.02)
        with pytest.raises(ValueError):
            make_schedule(10, 0.03, 0.02)
        with pytest.raises(ValueError):
            make_schedule(10, 0.1, 1.0)

    def test_out_of_range_t(self):
        s = make_schedule(10)
        with pytest.raises(ValueError):
            s.alpha_bar(0)
        with pytest.raises(ValueError):
            s.alpha_bar(11)


class TestQSample:
    def test_alpha_bar_one_returns_z0(self, rng):
        s = custom_schedule([1.0])
        z0 = rng.standard_normal((1, 1, 3, 3))
        assert np.array_equal(q_sample(z0, 1, np.ones_like(z0), s), z0)

    def test_alpha_bar_zero_returns_eps(self, rng):
        s = custom_schedule([0.5, 0.0])
        z0 = rng.standard_normal((2, 2))
        eps = rng.standard_normal((2, 2))
        assert np.array_equal(q_sample(z0, 2, eps, s), eps)

    def test_scalar_arithmetic(self):
        s = custom_schedule([0.64])
        out = q_sample(np.array([0.5]), 1, np.array([-1.0]), s)
        assert abs(out[0] - (-0.2)) < 1e-12

    def test_shape_mismatch(self, rng):
        s = make_schedule(10)
        with pytest.raises(DimensionError):
            q_sample(np.zeros((2, 2)), 1, np.zeros((3, 2)), s)


class TestDdpmStep:
    def test_tiny_beta_is_identity(self, rng):
        s = custom_schedule([1 - 1e-12, (1 - 1e-12) ** 2])
        z = rng.standard_normal((1, 1, 4, 4))
        out = ddpm_step(z, np.zeros_like(z), 2, s, np.zeros_like(z))
        assert np.abs(out - z).max() <= 1e-6

    def test_scalar_closed_form(self):
        betas = np.array([0.1, 0.2])
        alphas = 1 - betas
        s = NoiseSchedule(2, betas, alphas, np.cumprod(alphas))
        z = np.array([1.5])
        eps = np.array([0.4])
        noise = np.array([2.0])
        abar2 = 0.9 * 0.8
        want = (1.5 - 0.2 / np.sqrt(1 - abar2) * 0.4) / np.sqrt(0.8) + np.sqrt(0.2) * 2.0
        got = ddpm_step(z, eps, 2, s, noise)
        assert abs(got[0] - want) < 1e-12

    def test_zero_inputs_scale_only(self, rng):
        s = make_schedule(10)
        z = rng.standard_normal((2, 2))
        out = ddpm_step(z, np.zeros_like(z), 5, s, np.zeros_like(z))
        assert np.allclose(out, z / np.sqrt(s.alpha(5)))

    def test_noise_ignored_at_t1(self, rng):
        s = make_schedule(10)
        z = rng.standard_normal((2, 2))
        a = ddpm_step(z, np.zeros_like(z), 1, s, rng.standard_normal((2, 2)))
        b = ddpm_step(z, np.zeros_like(z), 1, s, np.zeros_like(z))
        assert np.array_equal(a, b)

    def test_t_zero_rejected(self, rng):
        s = make_schedule(10)
        z = np.zeros((2, 2))
        with pytest.raises(ValueError):
            ddpm_step(z, z, 0, s, z)


class TestTadlLoss:
    def test_zero_mask_is_mse(self, rng):
        eps = rng.standard_normal((2, 1, 4, 4))
        pred = Tensor(rng.standard_normal((2, 1, 4, 4)))
        mse = float(((eps - pred.data) ** 2).mean())
        got = tadl_loss(eps, pred, np.zeros((4, 4)), alpha_w=1.0).item()
        assert abs(got - mse) <= 1e-12

    @pytest.mark.parametrize("alpha", [0.0, 0.5, 1.0])
    def test_ones_mask_scales_mse(self, rng, alpha):
        eps = rng.standard_normal((1, 1, 5, 5))
        pred = Tensor(rng.standard_normal((1, 1, 5, 5)))
        mse = float(((eps - pred.data) ** 2).mean())
        got = tadl_loss(eps, pred, np.ones((5, 5)), alpha_w=alpha).item()
        assert abs(got - (1 + alpha) * mse) <= 1e-12

    def test_two_by_two_example(self):
        eps = np.zeros((1, 1, 2, 2))
        pred = Tensor(np.ones((1, 1, 2, 2)))  # residuals all 1
        mask = np.array([[1, 0], [0, 0]], dtype=float)
        got = tadl_loss(eps, pred, mask, alpha_w=1.0).item()
        assert abs(got - 1.25) < 1e-12

    def test_accepts_binary_mask_type(self, rng):
        eps = rng.standard_normal((1, 1, 2, 2))
        pred = Tensor(rng.standard_normal((1, 1, 2, 2)))
        mask = BinaryMask(np.array([[1, 0], [0, 1]], dtype=np.uint8), "latent")
        a = tadl_loss(eps, pred, mask).item()
        b = tadl_loss(eps, pred, mask.data.astype(float)).item()
        assert a == b

    def test_monotone_in_mask(self, rng):
        eps = rng.standard_normal((1, 1, 4, 4))
        pred = Tensor(rng.standard_normal((1, 1, 4, 4)))
        base = np.zeros((4, 4))
        prev = tadl_loss(eps, pred, base).item()
        order = [(i, j) for i in range(4) for j in range(4)]
        rng.shuffle(order)
        for i, j in order:
            base = base.copy()
            base[i, j] = 1
            cur = tadl_loss(eps, pred, base).item()
            assert cur >= prev - 1e-15
            prev = cur

    def test_gradient_formula(self, rng):
        eps = rng.standard_normal((1, 1, 3, 3))
        pred = Tensor(rng.standard_normal((1, 1, 3, 3)), requires_grad=True)
        mask = (rng.random((3, 3)) > 0.5).astype(float)
        loss = tadl_loss(eps, pred, mask, alpha_w=1.0)
        loss.backward()
        n = eps.size
        want = -2.0 * (1 + mask[None, None]) * (eps - pred.data) / n
        assert np.abs(pred.grad - want).max() <= 1e-12

    def test_gradient_matches_finite_differences(self, rng):
        ps = ParameterSet()
        ps.add("pred", rng.standard_normal((1, 1, 3, 3)))
        eps = rng.standard_normal((1, 1, 3, 3))
        mask = (rng.random((3, 3)) > 0.5).astype(float)
        err = grad_check(lambda p: tadl_loss(eps, p["pred"], mask, 1.0), ps)
        assert err <= 1e-3

    def test_shape_mismatch(self, rng):
        with pytest.raises(DimensionError):
            tadl_loss(np.zeros((1, 1, 2, 2)), Tensor(np.zeros((1, 1, 2, 2))),
                      np.zeros((3, 3)))

    def test_negative_alpha_rejected(self):
        with pytest.raises(ValueError):
            tadl_loss(np.zeros((1, 1, 2, 2)), Tensor(np.zeros((1, 1, 2, 2))),
                      np.zeros((2, 2)), alpha_w=-0.5)


class TestCrossNormalize:
    def test_constant_main_collapses_to_it(self, rng):
        ctrl = Tensor(rng.standard_normal((1, 3, 4, 4)))
        main = Tensor(np.full((1, 3, 4, 4), 0.7))
        out = cross_normalize(ctrl, main)
        assert np.abs(out.data - 0.7).max() <= 1e-4

    def test_identity_when_equal(self, rng):
        f = Tensor(rng.standard_normal((2, 3, 5, 5)))
        out = cross_normalize(f, f)
        assert np.abs(out.data - f.data).max() <= 1e-4

    def test_output_stats_match_main(self, rng):
        ctrl = Tensor(rng.standard_normal((1, 4, 6, 6)) * 3 + 2)
        main = Tensor(rng.standard_normal((1, 4, 6, 6)) * 0.5 - 1)
        out = cross_normalize(ctrl, main).data
        for c in range(4):
            assert abs(out[0, c].mean() - main.data[0, c].mean()) <= 1e-4
            assert abs(out[0, c].std() - main.data[0, c].std()) <= 1e-4

    def test_shape_mismatch(self, rng):
        with pytest.raises(ValueError):
            cross_normalize(Tensor(np.zeros((1, 2, 4, 4))),
                            Tensor(np.zeros((1, 3, 4, 4))))

    @pytest.mark.parametrize("seed", range(5))
    def test_grad_check(self, seed):
        r = np.random.default_rng(seed)
        ps = ParameterSet()
        ps.add("c", r.standard_normal((1, 2, 4, 4)))
        ps.add("m", r.standard_normal((1, 2, 4, 4)))
        err = grad_check(
            lambda p: (cross_normalize(p["c"], p["m"]) ** 2.0).mean(), ps
        )
        assert err <= 1e-3


class TestSftInject:
    def test_fresh_layer_is_identity(self, rng):
        ps = ParameterSet()
        layer = SftLayer(ps, "sft", feat_ch=4, cond_ch=2, rng=rng)
        feat = Tensor(rng.standard_normal((1, 4, 5, 5)))
        cond = Tensor(rng.standard_normal((1, 2, 5, 5)))
        out = sft_inject(feat, cond, layer)
        assert np.array_equal(out.data, feat.data)

    def test_forced_constant_output(self, rng):
        ps = ParameterSet()
        layer = SftLayer(ps, "sft", feat_ch=2, cond_ch=1, rng=rng)
        # silence the shared stack, then force scale to 0 and shift to 0.3
        ps["sft.shared.w"].data[:] = 0.0
        ps["sft.shared.b"].data[:] = 0.0
        ps["sft.gamma.b"].data[:] = -1.0  # scale = 1 + (-1) = 0
        ps["sft.beta.b"].data[:] = 0.3
        feat = Tensor(rng.standard_normal((1, 2, 4, 4)))
        out = sft_inject(feat, Tensor(rng.standard_normal((1, 1, 4, 4))), layer)
        assert np.abs(out.data - 0.3).max() <= 1e-12

    def test_matches_scalar_recompute(self, rng):
        ps = ParameterSet()
        layer = SftLayer(ps, "sft", feat_ch=2, cond_ch=2, rng=rng)
        for name in ("sft.gamma", "sft.beta"):
            ps[f"{name}.w"].data = rng.standard_normal(ps[f"{name}.w"].shape) * 0.3
            ps[f"{name}.b"].data = rng.standard_normal(ps[f"{name}.b"].shape) * 0.1
        feat = Tensor(rng.standard_normal((1, 2, 4, 4)))
        cond = Tensor(rng.standard_normal((1, 2, 4, 4)))
        out = sft_inject(feat, cond, layer)
        h = layer.shared(cond).silu()
        gamma = layer.gamma(h).data
        beta = layer.beta(h).data
        want = feat.data * (1 + gamma) + beta
        assert np.abs(out.data - want).max() <= 1e-5

    def test_spatial_mismatch(self, rng):
        ps = ParameterSet()
        layer = SftLayer(ps, "sft", feat_ch=2, cond_ch=1, rng=rng)
        with pytest.raises(ValueError):
            sft_inject(Tensor(np.zeros((1, 2, 4, 4))),
                       Tensor(np.zeros((1, 1, 5, 5))), layer)

    @pytest.mark.parametrize("seed", range(5))
    def test_grad_check(self, seed):
        r = np.random.default_rng(seed)
        ps = ParameterSet()
        layer = SftLayer(ps, "sft", feat_ch=2, cond_ch=1, rng=r)
        for name, t in ps.params.items():
            if name.startswith(("sft.gamma", "sft.beta")):
                t.data = r.standard_normal(t.shape) * 0.2
        feat = r.standard_normal((1, 2, 3, 3))
        cond = r.standard_normal((1, 1, 3, 3))
        err = grad_check(
            lambda p: (sft_inject(Tensor(feat), Tensor(cond), layer) ** 2.0).mean(),
            ps, max_coords=4,
        )
        assert err <= 1e-3


def tiny_model(seed=0):
    return DenoiserModel(DenoiserConfig(base_width=16, ctrl_width=4, temb_dim=16),
                         seed=seed)


def random_conds(rng, n=1, hw=8):
    return ConditionSet(
        noisy_latent=rng.standard_normal((n, 1, hw, hw)),
        lr_cond=rng.standard_normal((n, 1, hw, hw)) * 0.5,
        rtdm=(rng.random((n, 1, hw, hw)) > 0.5).astype(float),
    )


class TestDenoiseForward:
    def test_zero_init_control_is_inert(self, rng):
        model = tiny_model()
        conds = random_conds(rng)
        with_ctrl = denoise_forward(model, conds, 7).data
        without = denoise_forward(model, conds, 7, use_control=False).data
        assert np.array_equal(with_ctrl, without)

    def test_deterministic(self, rng):
        model = tiny_model()
        conds = random_conds(rng)
        a = denoise_forward(model, conds, 3).data
        b = denoise_forward(model, conds, 3).data
        assert np.array_equal(a, b)

    def test_mask_sensitivity_after_perturbation(self, rng):
        model = tiny_model()
        # every zero-initialized stage on the mask pathway must be perturbed
        # before a mask flip can reach the output
        for name in ("ctrl.sft.gamma.w", "ctrl.sft.beta.w", "ctrl.proj.w",
                     "backbone.out_conv.w"):
            p = model.params[name]
            p.data = rng.standard_normal(p.shape) * 0.5
        conds = random_conds(rng)
        base = denoise_forward(model, conds, 5).data
        flipped = conds.rtdm.copy()
        flipped[0, 0, 3, 3] = 1.0 - flipped[0, 0, 3, 3]
        conds2 = ConditionSet(noisy_latent=conds.noisy_latent,
                              lr_cond=conds.lr_cond, rtdm=flipped)
        other = denoise_forward(model, conds2, 5).data
        assert np.abs(base - other).max() > 0.0

    def test_output_shape_matches_latent(self, rng):
        model = tiny_model()
        conds = random_conds(rng, n=3, hw=8)
        out = denoise_forward(model, conds, 2)
        assert out.shape == conds.noisy_latent.shape

    def test_control_params_under_ten_percent(self):
        for cfg in (DenoiserConfig(), DenoiserConfig(base_width=16, ctrl_width=4, temb_dim=16)):
            model = DenoiserModel(cfg)
            n_ctrl = model.params.param_count("ctrl.")
            n_back = model.params.param_count("backbone.")
            assert n_ctrl < 0.1 * n_back

    def test_missing_conditions_rejected(self, rng):
        model = tiny_model()
        conds = ConditionSet(noisy_latent=rng.standard_normal((1, 1, 8, 8)))
        with pytest.raises(DimensionError):
            denoise_forward(model, conds, 1)

    def test_condition_spatial_mismatch(self, rng):
        with pytest.raises(DimensionError):
            ConditionSet(
                noisy_latent=np.zeros((1, 1, 8, 8)),
                lr_cond=np.zeros((1, 1, 4, 4)),
            )


def perturbed_model(rng, seed=0):
    """Tiny model with nonzero output and control projections, so epsilon
    predictions actually depend on the latent and the mask."""
    model = tiny_model(seed)
    for name in ("backbone.out_conv.w", "ctrl.proj.w"):
        p = model.params[name]
        p.data = rng.standard_normal(p.shape) * 0.1
    return model


def plain_ddpm(model, conds_builder, sched, seed, shape):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(shape)
    for t in range(sched.T, 0, -1):
        eps = model.predict_eps_np(conds_builder(z, t), t)
        noise = rng.standard_normal(shape)
        z = ddpm_step(z, eps, t, sched, noise)
    return np.clip(z, -1.0, 1.0)


class TestSampler:
    def _builder(self, rng, hw, mask_val):
        lr_cond = rng.standard_normal((1, 1, hw, hw)) * 0.3
        mask = np.full((1, 1, hw, hw), mask_val)
        return lambda z, t: ConditionSet(noisy_latent=z, lr_cond=lr_cond, rtdm=mask)

    def test_disabled_ta_matches_plain_ddpm(self, rng):
        model = perturbed_model(rng)
        sched = make_schedule(50)
        builder = self._builder(rng, 8, 1.0)
        got = sample(model, builder, sched, TaSamplerConfig(enabled=False),
                     seed=3, shape=(1, 1, 8, 8))
        want = plain_ddpm(model, builder, sched, 3, (1, 1, 8, 8))
        assert np.array_equal(got, want)

    def test_all_ones_mask_matches_plain_ddpm(self, rng):
        model = perturbed_model(rng)
        sched = make_schedule(50)
        builder = self._builder(rng, 8, 1.0)
        ta = TaSamplerConfig(t_lo=10, t_hi=30, enabled=True)
        got = sample(model, builder, sched, ta, seed=4, shape=(1, 1, 8, 8))
        want = plain_ddpm(model, builder, sched, 4, (1, 1, 8, 8))
        assert np.array_equal(got, want)

    def test_all_zeros_mask_freezes_selective_steps(self, rng):
        model = perturbed_model(rng)
        sched = make_schedule(60)
        builder = self._builder(rng, 8, 0.0)
        ta = TaSamplerConfig(t_lo=10, t_hi=40, enabled=True)
        events = []

        def on_step(t, z_before, z_after, selective):
            if selective:
                events.append((t, np.array_equal(z_before, z_after)))

        sample(model, builder, sched, ta, seed=5, shape=(1, 1, 8, 8),
               on_step=on_step)
        expected_ts = [t for t in range(40, 9, -1) if (40 - t) % 2 == 0]
        assert [t for t, _ in events] == expected_ts
        assert all(ok for _, ok in events)

    def test_parity_odd_shifts_selective_steps(self, rng):
        model = perturbed_model(rng)
        sched = make_schedule(30)
        builder = self._builder(rng, 8, 0.0)
        ta = TaSamplerConfig(t_lo=5, t_hi=15, parity="odd", enabled=True)
        seen = []
        sample(model, builder, sched, ta, seed=6, shape=(1, 1, 8, 8),
               on_step=lambda t, a, b, sel: seen.append(t) if sel else None)
        assert seen == [t for t in range(15, 4, -1) if (15 - t) % 2 == 1]

    def test_seeded_determinism(self, rng):
        model = perturbed_model(rng)
        sched = make_schedule(40)
        builder = self._builder(rng, 8, 0.5)

        def run():
            mask = np.zeros((1, 1, 8, 8))
            mask[0, 0, :4] = 1.0
            b = lambda z, t: ConditionSet(noisy_latent=z,
                                          lr_cond=builder(z, t).lr_cond, rtdm=mask)
            return sample(model, b, sched, TaSamplerConfig(t_lo=5, t_hi=20),
                          seed=11, shape=(1, 1, 8, 8))

        assert np.array_equal(run(), run())

    def test_partial_mask_freezes_only_sparse(self, rng):
        model = perturbed_model(rng)
        sched = make_schedule(40)
        mask = np.zeros((1, 1, 8, 8))
        mask[0, 0, :, :4] = 1.0
        lr_cond = rng.standard_normal((1, 1, 8, 8)) * 0.3
        builder = lambda z, t: ConditionSet(noisy_latent=z, lr_cond=lr_cond, rtdm=mask)
        ta = TaSamplerConfig(t_lo=5, t_hi=25, enabled=True)
        checks = []

        def on_step(t, z_before, z_after, selective):
            if selective:
                checks.append(np.array_equal(z_before[0, 0, :, 4:], z_after[0, 0, :, 4:]))

        sample(model, builder, sched, ta, seed=12, shape=(1, 1, 8, 8), on_step=on_step)
        assert checks and all(checks)

    def test_window_exceeding_t_rejected(self, rng):
        model = perturbed_model(rng)
        sched = make_schedule(50)
        with pytest.raises(ValueError):
            sample(model, self._builder(rng, 8, 1.0), sched,
                   TaSamplerConfig(t_lo=10, t_hi=100), seed=0, shape=(1, 1, 8, 8))

    def test_output_clamped(self, rng):
        model = perturbed_model(rng)
        sched = make_schedule(30)
        out = sample(model, self._builder(rng, 8, 1.0), sched,
                     TaSamplerConfig(enabled=False), seed=1, shape=(1, 1, 8, 8))
        assert out.min() >= -1.0 and out.max() <= 1.0


class TestAnalyticGaussian:
    def test_zero_variance_posterior_is_prior_mean(self, rng):
        sched = make_schedule(100)
        z = rng.standard_normal((3, 3))
        out = analytic_gaussian_eps(z, 50, sched, mu0=0.4, var0=0.0)
        abar = sched.alpha_bar(50)
        want = (z - np.sqrt(abar) * 0.4) / np.sqrt(1 - abar)
        assert np.abs(out - want).max() <= 1e-12

    def test_half_alpha_bar_algebra(self):
        sched = custom_schedule([0.5])
        z = np.array([1.2, -0.7])
        out = analytic_gaussian_eps(z, 1, sched, mu0=0.0, var0=1.0)
        m_post = z / np.sqrt(2.0)
        want = (z - np.sqrt(0.5) * m_post) / np.sqrt(0.5)
        assert np.abs(out - want).max() <= 1e-12

    def test_negative_variance_rejected(self):
        with pytest.raises(ValueError):
            analytic_gaussian_eps(np.zeros(2), 1, make_schedule(10), 0.0, -1.0)

    def test_beats_constant_predictors_in_mse(self):
        rng = np.random.default_rng(0)
        sched = make_schedule(100)
        mu0, var0, t = 0.3, 0.5, 60
        n = 100_000
        z0 = mu0 + np.sqrt(var0) * rng.standard_normal(n)
        eps = rng.standard_normal(n)
        z_t = q_sample(z0, t, eps, sched)
        pred = analytic_gaussian_eps(z_t, t, sched, mu0, var0)
        mse = float(((eps - pred) ** 2).mean())
        for const in (-0.5, 0.0, 0.5):
            const_mse = float(((eps - const) ** 2).mean())
            assert mse <= const_mse


def make_items(rng, n, hw=8):
    items = []
    for _ in range(n):
        mask = np.zeros((1, hw, hw))
        mask[0, :, : hw // 2] = 1.0
        z0 = np.where(mask.astype(bool), rng.uniform(-0.8, 0.8, (1, hw, hw)), 0.2)
        lr = np.full((1, hw, hw), 0.1)
        items.append(TrainItem(z0, lr, mask))
    return items


class TestTrain:
    def test_loss_decreases(self, rng):
        items = make_items(rng, 10)
        sched = make_schedule(50)
        model = tiny_model()
        log = train(model, items, sched, TrainConfig(steps=200, batch_size=4,
                                                     lr=2e-3, seed=0))
        first = np.mean([r.loss for r in log[:20]])
        last = np.mean([r.loss for r in log[-20:]])
        assert last < first

    def test_alpha_zero_matches_plain_mse_log(self, rng, monkeypatch):
        items = make_items(rng, 6)
        sched = make_schedule(50)
        log_a = train(tiny_model(), items, sched,
                      TrainConfig(steps=25, batch_size=2, seed=4, alpha_w=0.0))

        # literal plain-MSE objective under identical conditioning and seeds
        import importlib

        train_mod = importlib.import_module("texadiff.diffusion.train")

        def plain_mse(eps, pred, rtdm, alpha_w=1.0):
            diff = pred - Tensor(np.asarray(eps, dtype=np.float64))
            return (diff * diff).mean()

        monkeypatch.setattr(train_mod, "tadl_loss", plain_mse)
        log_b = train_mod.train(tiny_model(), items, sched,
                                TrainConfig(steps=25, batch_size=2, seed=4))
        assert [r.loss for r in log_a] == [r.loss for r in log_b]

    def test_fully_frozen_parameters_stay_put(self, rng):
        items = make_items(rng, 4)
        sched = make_schedule(20)
        model = tiny_model()
        model.params.freeze_prefix("")
        snap = model.params.snapshot()
        train(model, items, sched, TrainConfig(steps=10, batch_size=2, seed=1))
        after = model.params.snapshot()
        assert all(np.array_equal(snap[k], after[k]) for k in snap)

    def test_paper_freeze_preset(self, rng):
        items = make_items(rng, 4)
        sched = make_schedule(20)
        model = tiny_model()
        model.apply_freeze_preset("paper")
        frozen = sorted(model.params.freeze_mask)
        assert any(n.startswith("backbone.down2.") for n in frozen)
        assert any(n.startswith("backbone.mid.") for n in frozen)
        assert not any(n.startswith("backbone.down1.") for n in frozen)
        assert not any(n.startswith("backbone.up1.") for n in frozen)
        assert not any(n.startswith("ctrl.") for n in frozen)
        snap = model.params.snapshot(frozen)
        train(model, items, sched, TrainConfig(steps=8, batch_size=2, seed=2))
        after = model.params.snapshot(frozen)
        assert all(np.array_equal(snap[k], after[k]) for k in snap)
        # something else must have moved
        moved = [k for k in model.params.names() if k not in model.params.freeze_mask]
        assert any(
            not np.array_equal(model.params[k].data, tiny_model().params[k].data)
            for k in moved
        )

    def test_nonfinite_loss_aborts(self, rng):
        items = make_items(rng, 2)
        sched = make_schedule(10)
        model = tiny_model()
        model.params["backbone.out_conv.w"].data[:] = 1e200
        model.params["backbone.out_conv.b"].data[:] = 1e200
        with pytest.raises(NumericError):
            train(model, items, sched, TrainConfig(steps=3, batch_size=2, seed=0))

    def test_checkpoint_roundtrip(self, rng, tmp_path):
        from texadiff import tnsr as tn

        model = tiny_model()
        ck = model.to_checkpoint((50, 1e-4, 0.02))
        path = tmp_path / "m.tnsr"
        tn.save_checkpoint(path, ck)
        back, meta = DenoiserModel.from_checkpoint(tn.load_checkpoint(path))
        assert meta == (50, pytest.approx(1e-4), pytest.approx(0.02))
        conds = random_conds(rng)
        a = denoise_forward(model, conds, 5).data
        b = denoise_forward(back, conds, 5).data
        assert np.abs(a - b).max() < 1e-6
