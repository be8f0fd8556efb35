import numpy as np
import pytest
import torch
import torch.nn.functional as F

from distill_pipeline import KDConfig, difficulty_scores, difficulty_sort, kd_loss, softmax_t

from conftest import StubTeacher, id_images


def numerical_gradient(f, z, h=1e-5):
    """Central differences of scalar f() with respect to tensor z, in place."""
    grad = torch.zeros_like(z)
    flat = z.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * h)
    return grad


class TestKdLoss:
    def test_alpha_zero_is_exactly_ce(self, rng):
        zs = torch.tensor(rng.standard_normal((6, 10)))
        zt = torch.tensor(rng.standard_normal((6, 10)))
        y = torch.tensor(rng.integers(0, 10, 6))
        cfg = KDConfig(alpha_kd=0.0, temperature=5.0)
        assert torch.equal(kd_loss(zs, zt, y, cfg), F.cross_entropy(zs, y))

    def test_identical_logits_kl_term_zero(self, rng):
        zs = torch.tensor(rng.standard_normal((4, 10)))
        y = torch.tensor(rng.integers(0, 10, 4))
        cfg = KDConfig(alpha_kd=1.0, temperature=2.0)
        assert kd_loss(zs, zs.clone(), y, cfg).item() == pytest.approx(0.0, abs=1e-12)

    def test_alpha_one_is_scaled_kl_termwise(self, rng):
        zs = rng.standard_normal((5, 10))
        zt = rng.standard_normal((5, 10))
        y = torch.tensor(rng.integers(0, 10, 5))
        T = 3.0
        cfg = KDConfig(alpha_kd=1.0, temperature=T)
        loss = kd_loss(torch.tensor(zs), torch.tensor(zt), y, cfg).item()

        def softmax(z):
            e = np.exp(z / T - (z / T).max(axis=1, keepdims=True))
            return e / e.sum(axis=1, keepdims=True)

        ps, pt = softmax(zs), softmax(zt)
        kl = (ps * (np.log(ps) - np.log(pt))).sum(axis=1).mean()
        assert loss == pytest.approx(T * T * kl, rel=1e-10)

    def test_gradient_matches_central_differences(self, rng):
        zs = torch.tensor(rng.standard_normal((4, 10)), requires_grad=True)
        zt = torch.tensor(rng.standard_normal((4, 10)))
        y = torch.tensor(rng.integers(0, 10, 4))
        cfg = KDConfig(alpha_kd=0.7, temperature=3.5)

        loss = kd_loss(zs, zt, y, cfg)
        loss.backward()
        analytic = zs.grad.clone()

        with torch.no_grad():
            probe = zs.detach().clone()
            numeric = numerical_gradient(
                lambda: kd_loss(probe, zt, y, cfg).item(), probe
            )
        rel = (analytic - numeric).norm() / max(analytic.norm(), numeric.norm())
        assert rel.item() <= 1e-4

    def test_shape_mismatch_rejected(self):
        cfg = KDConfig()
        with pytest.raises(ValueError):
            kd_loss(torch.zeros(2, 10), torch.zeros(2, 9), torch.zeros(2).long(), cfg)

    def test_nonfinite_rejected(self):
        cfg = KDConfig()
        zs = torch.full((1, 10), float("inf"))
        with pytest.raises(ValueError):
            kd_loss(zs, torch.zeros(1, 10), torch.zeros(1).long(), cfg)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            KDConfig(alpha_kd=1.5)
        with pytest.raises(ValueError):
            KDConfig(temperature=0.0)


class TestTemperature:
    def test_probability_spread_shrinks_as_t_grows(self, rng):
        logits = torch.tensor(rng.standard_normal(10) * 3)
        spreads = []
        for T in (0.5, 1.0, 2.0, 4.0, 8.0, 16.0):
            p = softmax_t(logits, T)
            spreads.append((p.max() - p.min()).item())
        assert all(b < a for a, b in zip(spreads, spreads[1:]))

    def test_softmax_t_normalized(self, rng):
        p = softmax_t(torch.tensor(rng.standard_normal((3, 10))), 4.0)
        np.testing.assert_allclose(p.sum(dim=1).numpy(), 1.0, atol=1e-6)


class TestCurriculum:
    def test_confident_correct_before_wrong(self):
        # sample 0: teacher confidently right; sample 1: confidently wrong
        table = np.zeros((2, 10), dtype=np.float32)
        table[0, 0] = 10.0  # label 0, confident correct
        table[1, 3] = 10.0  # label 0, confident wrong
        teacher = StubTeacher(table)
        images = id_images(2)
        labels = np.array([0, 0])
        _, _, order = difficulty_sort(images, labels, teacher)
        assert order.tolist() == [0, 1]

    def test_stable_on_equal_scores(self):
        table = np.tile(np.arange(10, dtype=np.float32), (5, 1))
        teacher = StubTeacher(table)
        images = id_images(5)
        labels = np.full(5, 9)
        _, _, order = difficulty_sort(images, labels, teacher)
        assert order.tolist() == [0, 1, 2, 3, 4]

    def test_uniform_teacher_scores_log_n_classes(self):
        table = np.zeros((4, 10), dtype=np.float32)
        scores = difficulty_scores(torch.tensor(table), torch.tensor([0, 3, 5, 9]))
        np.testing.assert_allclose(scores, np.log(10), rtol=1e-6)

    def test_sorted_scores_ascending(self, rng):
        table = rng.standard_normal((20, 10)).astype(np.float32)
        teacher = StubTeacher(table)
        images = id_images(20)
        labels = rng.integers(0, 10, 20)
        _, _, order = difficulty_sort(images, labels, teacher)
        scores = difficulty_scores(
            torch.tensor(table), torch.tensor(labels, dtype=torch.long)
        )
        assert (np.diff(scores[order]) >= -1e-12).all()
