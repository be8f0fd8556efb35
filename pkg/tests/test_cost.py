import itertools
import json

import numpy as np
import pytest

from acam_edge import (
    ConvLayerSpec,
    CostReport,
    EnergyConstants,
    conv_macs,
    effective_macs,
    energy_report,
    frontend_energy,
    sparsity_schedule,
)

STUDENT_TOTAL = 23_785_120
TEACHER_TOTAL = 3_858_551_808
REMOVED_HEAD_OPS = 7_850


def brute_force_macs(spec: ConvLayerSpec) -> int:
    """Oracle: enumerate every output position, kernel tap, and channel pair."""
    dims = (spec.h_out, spec.w_out, spec.k_h, spec.k_w, spec.c_in, spec.c_out)
    return sum(1 for _ in itertools.product(*(range(d) for d in dims)))


class TestConvMacs:
    def test_all_ones(self):
        assert conv_macs(ConvLayerSpec(1, 1, 1, 1, 1, 1)) == 1

    def test_worked_example(self):
        spec = ConvLayerSpec(h_out=8, w_out=8, k_h=3, k_w=3, c_in=4, c_out=16)
        assert conv_macs(spec) == 36_864
        assert brute_force_macs(spec) == 36_864

    def test_exhaustive_small_dims(self):
        for dims in itertools.product(range(1, 4), repeat=6):
            spec = ConvLayerSpec(*dims)
            assert conv_macs(spec) == brute_force_macs(spec)

    def test_sampled_dims_up_to_eight(self, rng):
        for _ in range(300):
            spec = ConvLayerSpec(*(int(d) for d in rng.integers(1, 9, 6)))
            assert conv_macs(spec) == brute_force_macs(spec)

    def test_invalid_dims_rejected(self):
        with pytest.raises(ValueError):
            ConvLayerSpec(0, 1, 1, 1, 1, 1)


class TestEffectiveMacs:
    def test_published_sparsity_chain(self):
        assert effective_macs(STUDENT_TOTAL, 0.8, 0) == 4_757_024
        assert effective_macs(STUDENT_TOTAL, 0.8, REMOVED_HEAD_OPS) == 4_749_174

    def test_identity_when_dense(self):
        assert effective_macs(12345, 0.0, 0) == 12345

    def test_divisible_by_five_property(self, rng):
        for _ in range(50):
            total = int(rng.integers(1, 10**7)) * 5
            assert effective_macs(total, 0.8, 0) == total // 5

    def test_removed_exceeding_survivors_rejected(self):
        with pytest.raises(ValueError):
            effective_macs(100, 0.9, 11)

    def test_sparsity_range_checked(self):
        with pytest.raises(ValueError):
            effective_macs(100, 1.1, 0)


class TestFrontendEnergy:
    def test_published_hybrid_value(self):
        units = frontend_energy(4_749_174)
        assert units == pytest.approx(96_075_790.02)
        # in joules at the femtojoule interpretation: 96.0758 nJ
        assert units * 1e-15 == pytest.approx(96.07579002e-9)

    def test_zero_ops(self):
        assert frontend_energy(0) == 0.0

    def test_reference_model_value(self):
        units = frontend_energy(TEACHER_TOTAL)
        assert units == pytest.approx(7.805850307584e10)
        assert units * 1e-15 == pytest.approx(78.06e-6, rel=1e-4)

    def test_per_mac_composition(self):
        c = EnergyConstants(e_mul=0.2, e_add=0.03, e_mem=20.0)
        assert c.per_mac == pytest.approx(20.23)


class TestSparsitySchedule:
    def test_endpoints(self):
        assert sparsity_schedule(0, 100) == 0.50
        assert sparsity_schedule(100, 100) == 0.80

    def test_midpoint(self):
        assert sparsity_schedule(50, 100) == pytest.approx(0.7625)

    def test_monotone_on_grid(self):
        values = [sparsity_schedule(t, 99) for t in range(100)]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_bad_bounds_rejected(self):
        with pytest.raises(ValueError):
            sparsity_schedule(0, 10, s_initial=0.9, s_final=0.5)
        with pytest.raises(ValueError):
            sparsity_schedule(11, 10)


class TestEnergyReport:
    def _reference_report(self):
        return energy_report(
            total_macs=STUDENT_TOTAL,
            sparsity=0.8,
            removed_ops=REMOVED_HEAD_OPS,
            n_templates=10,
            n_features=784,
            e_cell_joules=185e-15,
            reference_macs=TEACHER_TOTAL,
        )

    def test_reduction_ratio_near_800(self):
        report = self._reference_report()
        assert 790 <= report.reduction_ratio <= 810
        assert report.reduction_ratio == pytest.approx(800.385, abs=0.01)

    def test_totals_compose(self):
        report = self._reference_report()
        assert report.total_energy == pytest.approx(
            report.frontend_energy + report.backend_energy
        )
        assert report.to_joules(report.total_energy) == pytest.approx(97.52619e-9, rel=1e-6)

    def test_backend_only_report(self):
        report = energy_report(n_templates=10, n_features=784, e_cell_joules=185e-15)
        assert report.frontend_energy == 0.0
        assert report.total_energy == report.backend_energy
        assert report.to_joules(report.backend_energy) == pytest.approx(1.4504e-9, rel=1e-9)
        assert report.reduction_ratio is None

    def test_equal_reference_gives_ratio_one(self):
        report = energy_report(
            total_macs=1000, sparsity=0.0, removed_ops=0, reference_macs=1000
        )
        assert report.reduction_ratio == pytest.approx(1.0)

    def test_zero_hybrid_energy_rejected_with_reference(self):
        with pytest.raises(ValueError):
            energy_report(total_macs=0, reference_macs=100)

    def test_discrepancy_flagged(self):
        report = self._reference_report()
        d = report.as_dict()
        assert d["reported_reference_ratio"] == 792.0
        assert any("792" in note for note in d["notes"])

    def test_serialization_roundtrip(self):
        report = self._reference_report()
        blob = report.to_json()
        again = CostReport.from_dict(json.loads(blob))
        assert again == report

    def test_invariants_enforced(self):
        with pytest.raises(ValueError):
            CostReport(
                total_macs=10,
                effective_macs=20,
                removed_ops=0,
                frontend_energy=1.0,
                backend_energy=1.0,
                total_energy=2.0,
                reference_energy=None,
                reduction_ratio=None,
            )
        with pytest.raises(ValueError):
            CostReport(
                total_macs=10,
                effective_macs=10,
                removed_ops=0,
                frontend_energy=1.0,
                backend_energy=1.0,
                total_energy=3.0,
                reference_energy=None,
                reduction_ratio=None,
            )
