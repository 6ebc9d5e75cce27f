import math

import numpy as np
import pytest
import torch

from pfxdiff import (
    EmbeddingTable,
    clamp_to_table,
    make_schedule,
    p_sample_step,
    posterior,
    q_sample,
    q_sample_step,
    reconstruct_x0,
    sample,
    sample_batch,
)
from pfxdiff.errors import BadConfig, BadSchedule, BadTimestep, NonFinite, ShapeMismatch
from pfxdiff.schedule import Schedule


def raw_schedule(betas) -> Schedule:
    """Hand-built schedule bypassing make_schedule validation (test double)."""
    beta = np.asarray(betas, dtype=np.float64)
    return Schedule(kind="linear", beta=beta, alpha=1.0 - beta, alpha_bar=np.cumprod(1.0 - beta))


class TestForward:
    def test_single_step_hand_value(self):
        x = torch.tensor([1.0, 0.0], dtype=torch.float64)
        noise = torch.tensor([0.0, 1.0], dtype=torch.float64)
        out = q_sample_step(x, 0.01, noise)
        np.testing.assert_allclose(out.numpy(), [math.sqrt(0.99), 0.1], atol=1e-12)

    def test_zero_beta_is_identity(self):
        x = torch.randn(3, 4, generator=torch.Generator().manual_seed(0))
        assert torch.equal(q_sample_step(x, 0.0, torch.randn_like(x)), x)

    def test_beta_one_rejected(self):
        x = torch.zeros(2)
        with pytest.raises(BadSchedule):
            q_sample_step(x, 1.0, x)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            q_sample_step(torch.zeros(2), 0.01, torch.zeros(3))

    def test_closed_form_at_t1(self):
        sched = make_schedule("linear", 3)
        x0 = torch.tensor([1.0, 0.0], dtype=torch.float64)
        noise = torch.tensor([0.0, 1.0], dtype=torch.float64)
        out = q_sample(x0, 1, sched, noise)
        np.testing.assert_allclose(out.numpy(), [math.sqrt(0.99), 0.1], atol=1e-12)

    def test_alpha_bar_one_keeps_x0(self):
        sched = raw_schedule([1e-30, 1e-30])
        assert sched.alpha_bar_at(2) == 1.0
        x0 = torch.randn(4, 3, generator=torch.Generator().manual_seed(1))
        assert torch.equal(q_sample(x0, 2, sched, torch.randn_like(x0)), x0)

    def test_bad_timestep(self):
        sched = make_schedule("linear", 3)
        with pytest.raises(BadTimestep):
            q_sample(torch.zeros(2), 4, sched, torch.zeros(2))

    def test_chain_matches_closed_form_distribution(self):
        sched = make_schedule("linear", 5, 0.05, 0.3)
        draws = 20000
        gen = torch.Generator().manual_seed(99)
        x0 = torch.full((draws,), 0.8, dtype=torch.float64)
        stepped = x0.clone()
        for t in range(1, 6):
            stepped = q_sample_step(stepped, sched.beta_at(t), torch.randn(draws, generator=gen, dtype=torch.float64))
        abar = sched.alpha_bar_at(5)
        want_mean = math.sqrt(abar) * 0.8
        want_var = 1.0 - abar
        tol = 3.0 * math.sqrt(want_var / draws)
        assert abs(float(stepped.mean()) - want_mean) < tol
        assert abs(float(stepped.var()) - want_var) < 3.0 * want_var * math.sqrt(2.0 / draws)


class TestReconstruct:
    def test_inverts_q_sample(self):
        gen = torch.Generator().manual_seed(4)
        kinds = ("square", "linear", "cosine", "t_cosine", "t_linear")
        for case in range(200):
            sched = make_schedule(kinds[case % 5], 50)
            t = int(torch.randint(1, 51, (1,), generator=gen))
            x0 = torch.randn(3, 4, generator=gen, dtype=torch.float64)
            noise = torch.randn(3, 4, generator=gen, dtype=torch.float64)
            x_t = q_sample(x0, t, sched, noise)
            np.testing.assert_allclose(reconstruct_x0(x_t, t, sched, noise).numpy(), x0.numpy(), atol=1e-6)

    def test_scalar_hand_value(self):
        sched = raw_schedule([0.75])
        out = reconstruct_x0(torch.tensor([1.0], dtype=torch.float64), 1, sched, torch.tensor([0.5], dtype=torch.float64))
        # (1 - sqrt(0.75) * 0.5) / 0.5, hand-computed
        np.testing.assert_allclose(out.numpy(), [1.1339745962155614], atol=1e-12)

    def test_shape_mismatch(self):
        sched = make_schedule("linear", 3)
        with pytest.raises(ShapeMismatch):
            reconstruct_x0(torch.zeros(2), 1, sched, torch.zeros(3))


class TestPosterior:
    def test_t1_collapses_to_x0(self):
        sched = make_schedule("linear", 3)
        x_t = torch.randn(2, 3, generator=torch.Generator().manual_seed(0))
        x0 = torch.randn(2, 3, generator=torch.Generator().manual_seed(1))
        post = posterior(x_t, x0, 1, sched)
        assert torch.equal(post.mean, x0)
        assert post.var == 0.0

    def test_scalar_hand_values_at_t2(self):
        sched = make_schedule("linear", 3)
        post = posterior(torch.tensor([1.0]), torch.tensor([0.0]), 2, sched)
        # coef_xt = sqrt(0.98) * 0.01 / 0.0298, var = (0.01 / 0.0298) * 0.02
        np.testing.assert_allclose(post.mean.numpy(), [0.3321978166648208], atol=1e-9)
        assert abs(post.var - 0.006711409395973154) < 1e-12

    @pytest.mark.parametrize("kind", ["linear", "cosine", "t_linear"])
    def test_matches_precision_weighted_form(self, kind):
        # Independent derivation: product of the two Gaussians in x_{t-1}.
        sched = make_schedule(kind, 30)
        gen = torch.Generator().manual_seed(12)
        for _ in range(40):
            t = int(torch.randint(2, 31, (1,), generator=gen))
            x_t = torch.randn((), generator=gen, dtype=torch.float64)
            x0 = torch.randn((), generator=gen, dtype=torch.float64)
            alpha_t = sched.alpha_at(t)
            beta_t = sched.beta_at(t)
            abar_prev = sched.alpha_bar_before(t)
            precision = alpha_t / beta_t + 1.0 / (1.0 - abar_prev)
            want_mean = (
                math.sqrt(alpha_t) * float(x_t) / beta_t
                + math.sqrt(abar_prev) * float(x0) / (1.0 - abar_prev)
            ) / precision
            post = posterior(x_t, x0, t, sched)
            assert abs(float(post.mean) - want_mean) < 1e-12
            assert abs(post.var - 1.0 / precision) < 1e-12

    def test_coefficients_convex_at_t1_only(self):
        sched = make_schedule("linear", 3)
        c = torch.full((2, 2), 0.7)
        post = posterior(c, c, 1, sched)
        assert torch.allclose(post.mean, c)

    def test_shape_mismatch(self):
        sched = make_schedule("linear", 3)
        with pytest.raises(ShapeMismatch):
            posterior(torch.zeros(2), torch.zeros(3), 2, sched)


class TestClamp:
    def test_snaps_to_exact_rows(self):
        table = EmbeddingTable.init_gaussian(10, 4, std=1.0, seed=3)
        x = table.matrix[[2, 5, 7]] + 0.05
        out = clamp_to_table(x, table)
        assert torch.equal(out, table.matrix[[2, 5, 7]])

    def test_batched(self):
        table = EmbeddingTable.init_gaussian(10, 4, std=1.0, seed=3)
        x = table.matrix[[2, 5]].reshape(1, 2, 4).repeat(3, 1, 1) - 0.05
        out = clamp_to_table(x, table)
        assert out.shape == (3, 2, 4)
        assert torch.equal(out[1], table.matrix[[2, 5]])


class TestReverseStep:
    def test_t1_ignores_noise(self):
        sched = make_schedule("linear", 4)
        denoiser = lambda x, t, f: torch.zeros_like(x)
        x = torch.randn(3, 2, generator=torch.Generator().manual_seed(8))
        feat = torch.zeros(5)
        a = p_sample_step(x, 1, sched, denoiser, feat, torch.full_like(x, 100.0), clamp=False)
        b = p_sample_step(x, 1, sched, denoiser, feat, torch.zeros_like(x), clamp=False)
        assert torch.equal(a, b)

    def test_zero_denoiser_closed_form(self):
        sched = make_schedule("linear", 4)
        denoiser = lambda x, t, f: torch.zeros_like(x)
        x = torch.randn(2, 3, generator=torch.Generator().manual_seed(9), dtype=torch.float64)
        noise = torch.randn_like(x)
        out = p_sample_step(x, 3, sched, denoiser, torch.zeros(5), noise, clamp=False)
        x0_hat = x / math.sqrt(sched.alpha_bar_at(3))
        post = posterior(x, x0_hat, 3, sched)
        np.testing.assert_allclose(out.numpy(), (post.mean + math.sqrt(post.var) * noise).numpy(), atol=1e-12)

    def test_parameterizations_agree(self):
        sched = make_schedule("linear", 6)
        x = torch.randn(2, 3, generator=torch.Generator().manual_seed(10), dtype=torch.float64)
        noise = torch.randn_like(x)
        x0_target = torch.randn_like(x) * 0.1
        t = 4
        abar = sched.alpha_bar_at(t)
        eps_equiv = (x - math.sqrt(abar) * x0_target) / math.sqrt(1.0 - abar)
        out_x0 = p_sample_step(x, t, sched, lambda a, b, c: x0_target, torch.zeros(5), noise, clamp=False, parameterization="x0")
        out_eps = p_sample_step(x, t, sched, lambda a, b, c: eps_equiv, torch.zeros(5), noise, clamp=False, parameterization="eps")
        np.testing.assert_allclose(out_x0.numpy(), out_eps.numpy(), atol=1e-10)

    def test_clamped_x0_row_used(self):
        table = EmbeddingTable.init_gaussian(8, 3, std=1.0, seed=2)
        sched = make_schedule("linear", 5)
        x0_near = table.matrix[4] + 0.01
        denoiser = lambda x, t, f: x0_near.expand_as(x)
        x = torch.randn(2, 3, generator=torch.Generator().manual_seed(3))
        noise = torch.zeros_like(x)
        out = p_sample_step(x, 2, sched, denoiser, torch.zeros(5), noise, emb=table, clamp=True, parameterization="x0")
        post = posterior(x, table.matrix[4].expand_as(x), 2, sched)
        assert torch.allclose(out, post.mean, atol=1e-6)

    def test_non_finite_denoiser_rejected(self):
        sched = make_schedule("linear", 5)
        denoiser = lambda x, t, f: torch.full_like(x, float("nan"))
        with pytest.raises(NonFinite):
            p_sample_step(torch.zeros(2, 2), 2, sched, denoiser, torch.zeros(3), torch.zeros(2, 2))

    def test_unknown_parameterization(self):
        sched = make_schedule("linear", 5)
        with pytest.raises(BadConfig):
            p_sample_step(torch.zeros(2, 2), 2, sched, lambda x, t, f: x, torch.zeros(3), torch.zeros(2, 2), parameterization="velocity")

    def test_step_distribution_monte_carlo(self):
        sched = make_schedule("linear", 8, 0.05, 0.2)
        t = 5
        x = torch.full((1,), 0.4, dtype=torch.float64)
        x0_pred = torch.full((1,), -0.3, dtype=torch.float64)
        post = posterior(x, x0_pred, t, sched)
        gen = torch.Generator().manual_seed(6)
        draws = 10000
        outs = torch.stack([
            p_sample_step(x, t, sched, lambda a, b, c: x0_pred, torch.zeros(1), torch.randn(1, generator=gen, dtype=torch.float64), clamp=False, parameterization="x0")
            for _ in range(draws)
        ])
        assert abs(float(outs.mean()) - float(post.mean)) < 3.0 * math.sqrt(post.var / draws)
        assert abs(float(outs.var()) - post.var) < 3.0 * post.var * math.sqrt(2.0 / draws)


class TestSampler:
    def _table(self):
        return EmbeddingTable.init_gaussian(9, 4, seed=21)

    def test_deterministic_for_a_seed(self):
        sched = make_schedule("t_linear", 60)
        denoiser = lambda x, t, f: torch.zeros_like(x)
        feat = torch.ones(3)
        a = sample(denoiser, feat, sched, 10, seed=5, shape=(4, 4), clamp=False)
        b = sample(denoiser, feat, sched, 10, seed=5, shape=(4, 4), clamp=False)
        assert torch.equal(a.x, b.x)
        assert a.t == 0

    def test_seeds_differ(self):
        sched = make_schedule("t_linear", 60)
        denoiser = lambda x, t, f: torch.zeros_like(x)
        feat = torch.ones(3)
        a = sample(denoiser, feat, sched, 10, seed=5, shape=(4, 4), clamp=False)
        b = sample(denoiser, feat, sched, 10, seed=6, shape=(4, 4), clamp=False)
        assert not torch.equal(a.x, b.x)

    def test_batch_rows_match_individual_chains(self):
        sched = make_schedule("linear", 40)
        denoiser = lambda x, t, f: 0.1 * x
        feats = torch.zeros(3, 5)
        batch = sample_batch(denoiser, feats, sched, 8, [11, 12, 13], (4, 2), clamp=False)
        for i, seed in enumerate((11, 12, 13)):
            solo = sample(denoiser, feats[i], sched, 8, seed=seed, shape=(4, 2), clamp=False)
            assert torch.equal(batch[i], solo.x)

    def test_visits_original_timesteps_descending(self):
        sched = make_schedule("linear", 100)
        seen = []

        def denoiser(x, t, f):
            seen.append(int(t))
            return torch.zeros_like(x)

        sample(denoiser, torch.zeros(3), sched, 10, seed=0, shape=(2, 2), clamp=False)
        assert len(seen) == 10
        assert seen == sorted(seen, reverse=True)
        assert seen[0] == 100 and seen[-1] == 1

    def test_full_chain_visits_every_t(self):
        sched = make_schedule("linear", 25)
        seen = []

        def denoiser(x, t, f):
            seen.append(int(t))
            return torch.zeros_like(x)

        sample(denoiser, torch.zeros(3), sched, 25, seed=0, shape=(2, 2), clamp=False)
        assert seen == list(range(25, 0, -1))

    def test_single_step_calls_denoiser_once_at_t_max(self):
        sched = make_schedule("linear", 50)
        seen = []

        def denoiser(x, t, f):
            seen.append(int(t))
            return torch.zeros_like(x)

        sample(denoiser, torch.zeros(3), sched, 1, seed=0, shape=(2, 2), clamp=False)
        assert seen == [50]

    def test_clamped_sampling_lands_on_table_rows(self):
        table = self._table()
        sched = make_schedule("t_linear", 30)
        denoiser = lambda x, t, f: torch.zeros_like(x)
        state = sample(denoiser, torch.zeros(3), sched, 6, seed=7, shape=(5, 4), emb=table)
        # Final step output is a posterior mean at t=1: exactly the clamped row.
        d2 = ((state.x.unsqueeze(1) - table.matrix.unsqueeze(0)) ** 2).sum(-1)
        assert float(d2.min(dim=1).values.max()) < 1e-10
