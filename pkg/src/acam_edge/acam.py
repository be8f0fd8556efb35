"""Behavioral model of the analogue-CAM back-end.

Queries map affinely onto an input voltage range; every cell reports a
match when its input falls inside the cell's programmed voltage window;
a row (one template) aggregates cell matches on its matchline, compared
against a sense threshold expressed as a fraction of matching cells; a
winner-take-all stage reduces per-class scores to a one-hot argmax.

Matchline dynamics (charge rates, time-to-charge) are abstracted into
the count-versus-threshold test, and the charging and precharging cell
variants both reduce to the same window-match behavior at this level.
Device variability is modeled as Gaussian perturbation of the programmed
window bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .fmap import FeatureMapSet, TemplateBank
from .matcher import ClassDecision, _decide

DEFAULT_E_CELL = 185e-15  # joules per cell per similarity search


@dataclass(frozen=True)
class AcamConfig:
    """Device-model parameters.

    ``sense_theta`` is the fraction of matching cells a row needs for its
    matchline to register a match; ``sigma_window`` is the Gaussian
    perturbation applied to programmed window bounds (volts).
    """

    v_min: float = 0.2
    v_max: float = 0.8
    sense_theta: float = 0.0
    sigma_window: float = 0.0
    e_cell: float = DEFAULT_E_CELL
    seed: int = 0

    def __post_init__(self):
        if not self.v_min < self.v_max:
            raise ValueError("v_min must be below v_max")
        if not 0.0 <= self.sense_theta <= 1.0:
            raise ValueError("sense_theta must lie in [0, 1]")
        if self.sigma_window < 0:
            raise ValueError("sigma_window must be non-negative")
        if self.e_cell <= 0:
            raise ValueError("e_cell must be positive")


def map_to_voltage(
    values: np.ndarray | float,
    value_range: tuple[float, float],
    cfg: AcamConfig,
) -> np.ndarray | float:
    """Affine map from the declared value range onto [v_min, v_max]."""
    lo, hi = value_range
    if not lo < hi:
        raise ValueError("value_range must satisfy lo < hi")
    arr = np.asarray(values, dtype=np.float64)
    if arr.size and (arr.min() < lo or arr.max() > hi):
        raise ValueError(
            f"value outside declared range [{lo}, {hi}]"
        )
    volts = cfg.v_min + (arr - lo) * (cfg.v_max - cfg.v_min) / (hi - lo)
    return float(volts) if np.isscalar(values) else volts


def cell_match(v_in: float, window: tuple[float, float]) -> bool:
    """One cell's verdict: input inside its window, bounds inclusive."""
    v_lo, v_hi = window
    if v_lo > v_hi:
        raise ValueError("window must satisfy v_lo <= v_hi")
    return bool(v_lo <= v_in <= v_hi)


def row_evaluate(
    v_inputs: np.ndarray,
    row_lower: np.ndarray,
    row_upper: np.ndarray,
    sense_theta: float,
) -> tuple[bool, int]:
    """Matchline verdict for one template row.

    Returns ``(match, match_count)`` where the row matches when at least
    ``ceil(sense_theta * N)`` cells match.
    """
    v = np.asarray(v_inputs, dtype=np.float64).reshape(-1)
    lo = np.asarray(row_lower, dtype=np.float64).reshape(-1)
    hi = np.asarray(row_upper, dtype=np.float64).reshape(-1)
    if not (v.shape == lo.shape == hi.shape):
        raise ValueError("inputs and window rows disagree on width")
    count = int(((v >= lo) & (v <= hi)).sum())
    needed = math.ceil(sense_theta * v.shape[0])
    return count >= needed, count


def wta(similarities: np.ndarray) -> tuple[np.ndarray, int]:
    """Winner-take-all: one-hot of the maximum, lowest index on ties."""
    sims = np.asarray(similarities, dtype=np.float64).reshape(-1)
    if sims.size == 0:
        raise ValueError("winner-take-all needs a non-empty input")
    winner = int(np.argmax(sims))
    one_hot = np.zeros(sims.shape[0], dtype=np.int64)
    one_hot[winner] = 1
    return one_hot, winner


def backend_energy(
    n_templates: int, n_features: int, e_cell: float = DEFAULT_E_CELL
) -> float:
    """Energy of one parallel similarity search: templates x features x e_cell."""
    if n_templates < 0 or n_features < 0:
        raise ValueError("counts must be non-negative")
    return n_templates * n_features * e_cell


@dataclass(frozen=True)
class VoltageBank:
    """A template bank programmed into voltage windows, (T, N) each."""

    lowers: np.ndarray
    uppers: np.ndarray
    class_ids: np.ndarray
    template_ords: np.ndarray
    n_classes: int

    def __post_init__(self):
        if (self.lowers > self.uppers).any():
            raise ValueError("voltage windows must satisfy lower <= upper")

    @property
    def n_templates(self) -> int:
        return self.lowers.shape[0]

    @property
    def n_features(self) -> int:
        return self.lowers.shape[1]


def bank_to_voltages(
    bank: TemplateBank, value_range: tuple[float, float], cfg: AcamConfig
) -> VoltageBank:
    """Program a bank's bounds into the device's voltage space."""
    lowers, uppers, class_ids, ords = bank.stacked_bounds()
    return VoltageBank(
        lowers=map_to_voltage(lowers, value_range, cfg),
        uppers=map_to_voltage(uppers, value_range, cfg),
        class_ids=class_ids,
        template_ords=ords,
        n_classes=bank.n_classes,
    )


def perturb_windows(vbank: VoltageBank, sigma_window: float, seed: int) -> VoltageBank:
    """Shift every bound by an independent Gaussian draw, then re-sort
    each window so lower <= upper.  Deterministic per seed; sigma 0 is
    the identity."""
    if sigma_window < 0:
        raise ValueError("sigma_window must be non-negative")
    rng = np.random.default_rng(seed)
    lo = vbank.lowers + rng.normal(0.0, sigma_window, size=vbank.lowers.shape)
    hi = vbank.uppers + rng.normal(0.0, sigma_window, size=vbank.uppers.shape)
    return replace(
        vbank, lowers=np.minimum(lo, hi), uppers=np.maximum(lo, hi)
    )


class AcamBackend:
    """Parallel similarity search over one voltage-programmed template array.

    The classification path counts matching cells per template row, keeps
    each class's best row, and feeds the per-class scores through the
    winner-take-all stage; the sense threshold only gates the per-row
    matchline flag reported by :meth:`search`.
    """

    def __init__(
        self,
        bank: TemplateBank,
        config: AcamConfig = AcamConfig(),
        value_range: tuple[float, float] = (0.0, 1.0),
    ):
        self.config = config
        self.value_range = value_range
        vbank = bank_to_voltages(bank, value_range, config)
        if config.sigma_window > 0:
            vbank = perturb_windows(vbank, config.sigma_window, config.seed)
        self.vbank = vbank

    def _match_counts(self, Q: np.ndarray) -> np.ndarray:
        """Per-row matching-cell counts for a (B, N) voltage block."""
        lo = self.vbank.lowers[None, :, :]
        hi = self.vbank.uppers[None, :, :]
        T, N = self.vbank.lowers.shape
        chunk = max(1, 32_000_000 // max(1, T * N))
        parts = []
        for i in range(0, Q.shape[0], chunk):
            Qb = Q[i : i + chunk, None, :]
            parts.append(((Qb >= lo) & (Qb <= hi)).sum(axis=2))
        if not parts:
            return np.zeros((0, T), dtype=np.int64)
        return np.concatenate(parts, axis=0)

    def search(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """One query against all rows: (match_counts, matchline flags)."""
        v = map_to_voltage(
            np.asarray(values, dtype=np.float64).reshape(-1),
            self.value_range,
            self.config,
        )
        if v.shape[0] != self.vbank.n_features:
            raise ValueError(
                f"query has {v.shape[0]} features, array has {self.vbank.n_features}"
            )
        counts = self._match_counts(v[None, :])[0]
        needed = math.ceil(self.config.sense_theta * self.vbank.n_features)
        return counts, counts >= needed

    def classify(self, values: np.ndarray) -> ClassDecision:
        return self.classify_batch(np.asarray(values, dtype=np.float64)[None, :])[0]

    def classify_batch(
        self, queries: FeatureMapSet | np.ndarray
    ) -> list[ClassDecision]:
        Q = queries.data if isinstance(queries, FeatureMapSet) else queries
        Q = np.asarray(Q, dtype=np.float64)
        if Q.ndim != 2 or Q.shape[1] != self.vbank.n_features:
            raise ValueError(
                f"queries must be (B, {self.vbank.n_features}), got {Q.shape}"
            )
        volts = map_to_voltage(Q, self.value_range, self.config)
        counts = self._match_counts(volts)
        return _decide(
            counts, self.vbank.class_ids, self.vbank.template_ords, self.vbank.n_classes
        )

    def search_energy(self) -> float:
        """Energy of one full parallel search over the programmed array."""
        return backend_energy(
            self.vbank.n_templates, self.vbank.n_features, self.config.e_cell
        )
