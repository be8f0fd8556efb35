import numpy as np
import pytest

from acam_edge import FeatureMapSet, FmapDType, Template, TemplateBank, TemplateMode, ThresholdMethod


def binary_template(bits, class_id=0, member_count=1):
    bits = np.asarray(bits, dtype=np.float64)
    return Template(class_id=class_id, lower=bits, upper=bits, member_count=member_count)


def binary_bank(rows_by_class, thresholds=None):
    """Bank with one or more binary templates per class.

    ``rows_by_class`` maps class_id -> list of bit rows.
    """
    templates = []
    n_features = None
    for class_id in sorted(rows_by_class):
        for bits in rows_by_class[class_id]:
            templates.append(binary_template(bits, class_id=class_id))
            n_features = len(bits)
    return TemplateBank(
        n_classes=max(rows_by_class) + 1,
        n_features=n_features,
        templates=tuple(templates),
        mode=TemplateMode.BINARY,
        threshold_method=ThresholdMethod.MEAN,
        seed=0,
        thresholds=thresholds,
    )


def window_bank(bounds_by_class):
    """Bank of per-feature [lower, upper] windows, one template per class."""
    templates = []
    n_features = None
    for class_id in sorted(bounds_by_class):
        lower, upper = bounds_by_class[class_id]
        templates.append(
            Template(
                class_id=class_id,
                lower=np.asarray(lower, dtype=np.float64),
                upper=np.asarray(upper, dtype=np.float64),
                member_count=1,
            )
        )
        n_features = len(lower)
    return TemplateBank(
        n_classes=max(bounds_by_class) + 1,
        n_features=n_features,
        templates=tuple(templates),
        mode=TemplateMode.WINDOW,
        threshold_method=ThresholdMethod.MEAN,
        seed=0,
    )


def fset(data, labels, n_classes, dtype=FmapDType.F32):
    return FeatureMapSet(
        data=np.asarray(data), labels=np.asarray(labels), n_classes=n_classes, dtype=dtype
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
