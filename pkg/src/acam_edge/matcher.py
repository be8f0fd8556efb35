"""Template-matching inference: feature-count and similarity-window scoring.

Feature-count scoring tallies features that hit a template exactly (or
within epsilon).  Similarity scoring divides the in-window hit ratio by
``1 + alpha * D`` where ``D`` accumulates squared overshoot outside the
window.  On binary banks the two rank templates identically, so argmax
decisions agree; both are exposed because window banks separate them.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .fmap import FeatureMapSet, FmapDType, Template, TemplateBank, TemplateMode, ThresholdMethod
from .templates import AUTO_K, make_templates

# cap on B*T*N elements per scoring chunk, to bound transient memory
_CHUNK_ELEMENTS = 32_000_000


class MatchMethod(str, enum.Enum):
    FEATURE_COUNT = "fc"
    SIMILARITY = "sim"


@dataclass(frozen=True)
class MatchParams:
    method: MatchMethod = MatchMethod.FEATURE_COUNT
    epsilon: float = 0.0
    alpha_sim: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "method", MatchMethod(self.method))
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.alpha_sim < 0:
            raise ValueError("alpha_sim must be non-negative")


@dataclass(frozen=True)
class ClassDecision:
    """Outcome of classifying one query.

    ``per_class_best`` holds each class's best template score,
    ``best_template`` the winning template's ordinal within its class,
    and ``tie`` flags a max attained by more than one class (broken in
    favor of the lowest class index).
    """

    predicted: int
    per_class_best: np.ndarray
    best_template: np.ndarray
    tie: bool


def _check_width(q: np.ndarray, n_features: int) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if q.shape[0] != n_features:
        raise ValueError(f"query has {q.shape[0]} features, template has {n_features}")
    return q


def score_fc(q: np.ndarray, t: Template, epsilon: float = 0.0) -> int:
    """Count of features within epsilon of the template's stored value.

    With epsilon 0 this is the exact-equality feature count.
    """
    q = _check_width(q, t.n_features)
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    return int((np.abs(q - t.lower) <= epsilon).sum())


def score_distance(q: np.ndarray, t: Template) -> float:
    """Sum of squared overshoot for features outside [lower, upper]."""
    q = _check_width(q, t.n_features)
    below = np.maximum(t.lower - q, 0.0)
    above = np.maximum(q - t.upper, 0.0)
    return float((below * below + above * above).sum())


def hit_ratio(q: np.ndarray, t: Template) -> float:
    """Fraction of features inside the template window, bounds inclusive."""
    q = _check_width(q, t.n_features)
    return float(((q >= t.lower) & (q <= t.upper)).mean())


def score_sim(q: np.ndarray, t: Template, alpha_sim: float = 1.0) -> float:
    """Hit ratio damped by the out-of-window distance: H / (1 + alpha * D)."""
    if alpha_sim < 0:
        raise ValueError("alpha_sim must be non-negative")
    return hit_ratio(q, t) / (1.0 + alpha_sim * score_distance(q, t))


def _score_block(Q: np.ndarray, lowers: np.ndarray, uppers: np.ndarray,
                 params: MatchParams) -> np.ndarray:
    """Scores for a (B, N) query block against (T, N) bounds -> (B, T)."""
    if params.method is MatchMethod.FEATURE_COUNT:
        hits = np.abs(Q[:, None, :] - lowers[None, :, :]) <= params.epsilon
        return hits.sum(axis=2)
    Qb = Q[:, None, :]
    below = np.maximum(lowers[None, :, :] - Qb, 0.0)
    above = np.maximum(Qb - uppers[None, :, :], 0.0)
    dist = (below * below + above * above).sum(axis=2)
    hit = ((Qb >= lowers[None, :, :]) & (Qb <= uppers[None, :, :])).mean(axis=2)
    return hit / (1.0 + params.alpha_sim * dist)


def score_matrix(Q: np.ndarray, bank: TemplateBank, params: MatchParams) -> np.ndarray:
    """Per-template scores for a query batch, (B, n_templates)."""
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[1] != bank.n_features:
        raise ValueError(
            f"queries must be (B, {bank.n_features}), got {Q.shape}"
        )
    lowers, uppers, _, _ = bank.stacked_bounds()
    T, N = lowers.shape
    chunk = max(1, _CHUNK_ELEMENTS // max(1, T * N))
    blocks = [
        _score_block(Q[i : i + chunk], lowers, uppers, params)
        for i in range(0, Q.shape[0], chunk)
    ]
    if not blocks:
        dtype = np.int64 if params.method is MatchMethod.FEATURE_COUNT else np.float64
        return np.zeros((0, T), dtype=dtype)
    return np.concatenate(blocks, axis=0)


def _decide(scores: np.ndarray, class_ids: np.ndarray, ords: np.ndarray,
            n_classes: int) -> list[ClassDecision]:
    """Reduce per-template scores (B, T) to one decision per query."""
    B = scores.shape[0]
    is_int = np.issubdtype(scores.dtype, np.integer)
    fill = np.iinfo(np.int64).min if is_int else -np.inf
    per_class = np.full((B, n_classes), fill, dtype=scores.dtype)
    best_ord = np.zeros((B, n_classes), dtype=np.int64)
    for c in range(n_classes):
        cols = np.nonzero(class_ids == c)[0]
        sub = scores[:, cols]
        pick = np.argmax(sub, axis=1)
        per_class[:, c] = sub[np.arange(B), pick]
        best_ord[:, c] = ords[cols][pick]
    predicted = np.argmax(per_class, axis=1)
    top = per_class[np.arange(B), predicted]
    ties = (per_class == top[:, None]).sum(axis=1) > 1
    return [
        ClassDecision(
            predicted=int(predicted[b]),
            per_class_best=per_class[b].copy(),
            best_template=best_ord[b].copy(),
            tie=bool(ties[b]),
        )
        for b in range(B)
    ]


def classify(q: np.ndarray, bank: TemplateBank,
             params: MatchParams = MatchParams()) -> ClassDecision:
    """Score one query against every template and argmax over classes."""
    q = _check_width(q, bank.n_features)
    return classify_batch(q[None, :], bank, params)[0]


def classify_batch(
    queries: FeatureMapSet | np.ndarray,
    bank: TemplateBank,
    params: MatchParams = MatchParams(),
    jobs: int | None = None,
) -> list[ClassDecision]:
    """Elementwise :func:`classify`; order preserved regardless of ``jobs``."""
    Q = queries.data if isinstance(queries, FeatureMapSet) else queries
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 2:
        raise ValueError("queries must be a 2-D matrix")
    if Q.shape[1] != bank.n_features:
        raise ValueError(
            f"queries have {Q.shape[1]} features, bank has {bank.n_features}"
        )
    _, _, class_ids, ords = bank.stacked_bounds()

    def run(block: np.ndarray) -> list[ClassDecision]:
        scores = score_matrix(block, bank, params)
        return _decide(scores, class_ids, ords, bank.n_classes)

    if jobs is None or jobs <= 1 or Q.shape[0] < 2:
        return run(Q)
    splits = np.array_split(np.arange(Q.shape[0]), jobs)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        parts = pool.map(run, (Q[s] for s in splits if s.size))
    out: list[ClassDecision] = []
    for part in parts:
        out.extend(part)
    return out


def predictions(decisions: list[ClassDecision]) -> np.ndarray:
    return np.array([d.predicted for d in decisions], dtype=np.int64)


def prepare_queries(
    queries: FeatureMapSet | np.ndarray, bank: TemplateBank
) -> np.ndarray:
    """Quantize queries the way the bank's templates were quantized.

    Binary banks carry the per-feature thresholds that formed them;
    continuous queries are binarized against those before matching, while
    already-binary data and window banks pass through untouched.
    """
    if isinstance(queries, FeatureMapSet):
        if queries.dtype is FmapDType.BIT:
            return np.asarray(queries.data, dtype=np.float64)
        Q = np.asarray(queries.data, dtype=np.float64)
    else:
        Q = np.asarray(queries, dtype=np.float64)
    if bank.mode is TemplateMode.BINARY and bank.thresholds is not None:
        if Q.shape[-1] != bank.n_features:
            raise ValueError(
                f"queries have {Q.shape[-1]} features, bank has {bank.n_features}"
            )
        return (Q > bank.thresholds).astype(np.float64)
    return Q


class TemplateMatchingClassifier(ClassifierMixin, BaseEstimator):
    """Nearest-template classifier over binarized or windowed feature maps.

    Fitting derives per-feature thresholds from the training split,
    clusters each class's feature maps, and stores one to three templates
    per class; prediction scores queries against every stored template
    and takes the per-class best, then the argmax over classes.

    Parameters
    ----------
    k : int or 'auto', default='auto'
        Templates per class; 'auto' picks among {1, 2, 3} by silhouette.
    mode : {'binary', 'window'}, default='binary'
        Template encoding (see :func:`acam_edge.make_templates`).
    threshold_method : {'mean', 'median'}, default='mean'
    gamma : float, default=1.0
        Window half-width in cluster standard deviations (window mode).
    method : {'fc', 'sim'}, default='fc'
        Scoring rule used for prediction.
    epsilon : float, default=0.0
        Feature-count tolerance; 0 means exact equality.
    alpha_sim : float, default=1.0
        Distance-penalty scale in similarity scoring.
    window_bounds : {'std', 'minmax'}, default='std'
    auto_min_silhouette : float, default=0.05
    random_state : int, default=0

    Attributes
    ----------
    classes_ : ndarray of shape (n_classes,)
    bank_ : TemplateBank
    n_features_in_ : int

    Examples
    --------
    >>> from acam_edge import synth_fixture, TemplateMatchingClassifier
    >>> fx = synth_fixture(3, 32, 20, 0.02, seed=7)
    >>> clf = TemplateMatchingClassifier(k=1).fit(fx.data, fx.labels)
    >>> (clf.predict(fx.data) == fx.labels).mean()
    1.0
    """

    def __init__(
        self,
        k: int | str = AUTO_K,
        mode: str = "binary",
        threshold_method: str = "mean",
        gamma: float = 1.0,
        method: str = "fc",
        epsilon: float = 0.0,
        alpha_sim: float = 1.0,
        window_bounds: str = "std",
        auto_min_silhouette: float = 0.05,
        random_state: int = 0,
    ):
        self.k = k
        self.mode = mode
        self.threshold_method = threshold_method
        self.gamma = gamma
        self.method = method
        self.epsilon = epsilon
        self.alpha_sim = alpha_sim
        self.window_bounds = window_bounds
        self.auto_min_silhouette = auto_min_silhouette
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_ = np.unique(y)
        indices = np.searchsorted(self.classes_, y)
        train = FeatureMapSet(
            data=X.astype(np.float32),
            labels=indices,
            n_classes=self.classes_.shape[0],
            dtype=FmapDType.F32,
        )
        self.bank_ = make_templates(
            train,
            k_per_class=self.k,
            mode=self.mode,
            threshold_method=self.threshold_method,
            gamma=self.gamma,
            seed=self.random_state,
            window_bounds=self.window_bounds,
            auto_min_silhouette=self.auto_min_silhouette,
        )
        self.n_features_in_ = X.shape[1]
        return self

    def _params(self) -> MatchParams:
        return MatchParams(
            method=MatchMethod(self.method),
            epsilon=self.epsilon,
            alpha_sim=self.alpha_sim,
        )

    def decision_function(self, X) -> np.ndarray:
        """Per-class best template scores, shape (n_samples, n_classes)."""
        check_is_fitted(self, "bank_")
        X = check_array(X, dtype=np.float64)
        Q = prepare_queries(X, self.bank_)
        decisions = classify_batch(Q, self.bank_, self._params())
        return np.stack([d.per_class_best.astype(np.float64) for d in decisions])

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "bank_")
        X = check_array(X, dtype=np.float64)
        Q = prepare_queries(X, self.bank_)
        decisions = classify_batch(Q, self.bank_, self._params())
        return self.classes_[predictions(decisions)]
