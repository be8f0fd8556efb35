import pytest
import torch

from distill_pipeline import StudentNet, enable_weight_qat, fake_quantize8
from distill_pipeline.qat import disable_weight_qat


class TestFakeQuantize:
    def test_values_land_on_8bit_grid(self, rng):
        w = torch.tensor(rng.standard_normal(500))
        q = fake_quantize8(w)
        scale = w.abs().max() / 127
        steps = q / scale
        assert torch.allclose(steps, steps.round(), atol=1e-6)
        assert steps.abs().max() <= 127

    def test_zero_tensor_unchanged(self):
        w = torch.zeros(10)
        assert torch.equal(fake_quantize8(w), w)

    def test_zero_stays_zero(self, rng):
        w = torch.tensor(rng.standard_normal(100))
        w[::2] = 0.0
        q = fake_quantize8(w)
        assert (q[::2] == 0).all()

    def test_straight_through_gradient(self, rng):
        w = torch.tensor(rng.standard_normal(50), requires_grad=True)
        fake_quantize8(w).sum().backward()
        assert torch.equal(w.grad, torch.ones_like(w))

    def test_quantization_error_bounded(self, rng):
        w = torch.tensor(rng.standard_normal(1000))
        scale = w.abs().max() / 127
        assert (fake_quantize8(w) - w).abs().max() <= scale / 2 + 1e-9


class TestModelQat:
    def test_registers_on_all_conv_linear(self):
        student = StudentNet()
        assert enable_weight_qat(student) == 5  # four convs + classifier head

    def test_effective_weights_quantized(self):
        student = StudentNet()
        enable_weight_qat(student)
        w = student.conv1.weight
        scale = w.abs().max() / 127
        steps = w / scale
        assert torch.allclose(steps, steps.round(), atol=1e-5)

    def test_forward_still_works(self):
        student = StudentNet()
        enable_weight_qat(student)
        out = student(torch.randn(2, 1, 32, 32))
        assert out.shape == (2, 10)

    def test_disable_bakes_values(self):
        student = StudentNet()
        enable_weight_qat(student)
        quantized = student.conv1.weight.detach().clone()
        disable_weight_qat(student)
        assert torch.equal(student.conv1.weight.detach(), quantized)
