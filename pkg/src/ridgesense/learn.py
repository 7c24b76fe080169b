"""k-NN classification, repeated stratified k-fold evaluation, ANOVA and Tukey HSD.

The studentized-range critical value is computed by direct numerical
quadrature of its distribution, so arbitrary (group count, df) combinations
from experiment grids are supported without lookup tables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from .features import LabeledDataset, normalize


@dataclass(frozen=True)
class KnnConfig:
    k: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")


@dataclass(frozen=True)
class CvPlan:
    folds: int = 5
    repeats: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("need at least 2 folds")
        if self.repeats < 1:
            raise ValueError("need at least 1 repeat")


# Model-count presets: 50 models for the screening stage, 300 for the
# velocity-split analyses.
PLAN_50_MODELS = CvPlan(folds=5, repeats=10)
PLAN_300_MODELS = CvPlan(folds=5, repeats=60)


@dataclass(frozen=True)
class AccuracyDistribution:
    accuracies: np.ndarray  # one per (repeat, fold), repeat-major order
    folds: int
    repeats: int

    def __post_init__(self):
        acc = np.asarray(self.accuracies, dtype=float)
        if acc.size != self.folds * self.repeats:
            raise ValueError("accuracy count must equal folds * repeats")
        if np.any(acc < 0) or np.any(acc > 1):
            raise ValueError("accuracies must lie in [0, 1]")
        acc.setflags(write=False)
        object.__setattr__(self, "accuracies", acc)

    @property
    def mean(self) -> float:
        return float(self.accuracies.mean())

    @property
    def std(self) -> float:
        return float(self.accuracies.std())


@dataclass(frozen=True)
class TukeyResult:
    group_a: object
    group_b: object
    mean_diff: float
    q: float
    q_critical: float
    significant: bool


def knn_predict(train: LabeledDataset, query, cfg: KnnConfig = KnnConfig()):
    """Majority vote among the k nearest training rows (Euclidean distance).

    Vote ties break to the tied label with the smallest mean neighbor
    distance, then to the lowest label; equal-distance neighbors at the
    k-boundary are admitted in stable input order.
    """
    if len(train) == 0:
        raise ValueError("training set is empty")
    q = np.asarray(getattr(query, "values", query), dtype=float)
    if q.shape != (train.vectors.shape[1],):
        raise ValueError(
            f"query dimension {q.shape} does not match training {train.vectors.shape[1]}"
        )
    k = min(cfg.k, len(train))
    dists = np.sqrt(np.sum((train.vectors - q) ** 2, axis=1))
    nearest = np.argsort(dists, kind="stable")[:k]
    votes = {}
    for idx in nearest:
        votes.setdefault(train.labels[idx], []).append(dists[idx])
    best = min(votes.items(), key=lambda kv: (-len(kv[1]), float(np.mean(kv[1])), kv[0]))
    return best[0]


def stratified_folds(dataset: LabeledDataset, plan: CvPlan):
    """Per-repeat fold assignments: seeded shuffle then round-robin per class.

    Returns an array of shape (repeats, n) with fold ids in [0, folds).
    """
    labels = np.asarray(dataset.labels, dtype=object)
    classes = sorted(set(dataset.labels), key=str)
    for cls in classes:
        if np.sum(labels == cls) < plan.folds:
            raise ValueError(f"class {cls!r} has fewer members than folds")
    n = len(dataset)
    assignments = np.empty((plan.repeats, n), dtype=int)
    for rep in range(plan.repeats):
        rng = np.random.default_rng(np.random.SeedSequence(plan.seed, spawn_key=(rep,)))
        for cls in classes:
            idx = np.flatnonzero(labels == cls)
            rng.shuffle(idx)
            assignments[rep, idx] = np.arange(idx.size) % plan.folds
    return assignments


def evaluate(
    dataset: LabeledDataset,
    plan: CvPlan,
    cfg: KnnConfig = KnnConfig(),
    normalize_mode: str = "fold-safe",
) -> AccuracyDistribution:
    """Repeated stratified k-fold accuracy of the k-NN classifier.

    normalize_mode 'fold-safe' fits the unit-group min/max on training rows
    only; 'full' fits on the whole dataset before splitting (matching a
    leakage-prone but common protocol). Both are deterministic given the plan
    seed.
    """
    if normalize_mode not in ("fold-safe", "full"):
        raise ValueError(f"unknown normalize mode {normalize_mode!r}")
    if normalize_mode == "full":
        dataset = normalize(dataset)
    assignments = stratified_folds(dataset, plan)
    accuracies = []
    for rep in range(plan.repeats):
        for fold in range(plan.folds):
            test_idx = np.flatnonzero(assignments[rep] == fold)
            train_idx = np.flatnonzero(assignments[rep] != fold)
            if normalize_mode == "fold-safe":
                normed = normalize(dataset, fit_rows=train_idx)
            else:
                normed = dataset
            train = LabeledDataset(
                vectors=normed.vectors[train_idx],
                labels=[normed.labels[i] for i in train_idx],
                meta=[normed.meta[i] for i in train_idx],
                layout_version=normed.layout_version,
            )
            correct = sum(
                1
                for i in test_idx
                if knn_predict(train, normed.vectors[i], cfg) == normed.labels[i]
            )
            accuracies.append(correct / test_idx.size)
    return AccuracyDistribution(
        accuracies=np.array(accuracies), folds=plan.folds, repeats=plan.repeats
    )


def anova_oneway(groups):
    """One-way ANOVA: (F, p, df_between, df_within)."""
    groups = [np.asarray(g, dtype=float) for g in groups]
    if len(groups) < 2 or any(g.size < 2 for g in groups):
        raise ValueError("need at least 2 groups with at least 2 values each")
    all_vals = np.concatenate(groups)
    grand = all_vals.mean()
    n_total = all_vals.size
    k = len(groups)
    ssb = sum(g.size * (g.mean() - grand) ** 2 for g in groups)
    ssw = sum(float(np.sum((g - g.mean()) ** 2)) for g in groups)
    df_b = k - 1
    df_w = n_total - k
    if ssw <= 0:
        if ssb <= 0:
            return 0.0, 1.0, df_b, df_w
        return float("inf"), 0.0, df_b, df_w
    f_stat = (ssb / df_b) / (ssw / df_w)
    p = float(special.fdtrc(df_b, df_w, f_stat))
    return float(f_stat), p, df_b, df_w


def _range_cdf_given_scale(q: float, k: int, z_nodes, z_weights):
    """P(range of k standard normals < q), by Gauss-Legendre over the max value."""
    phi = np.exp(-0.5 * z_nodes**2) / np.sqrt(2.0 * np.pi)
    inner = special.ndtr(z_nodes) - special.ndtr(z_nodes - q)
    return float(np.sum(z_weights * k * phi * np.maximum(inner, 0.0) ** (k - 1)))


_GL_INNER = np.polynomial.legendre.leggauss(160)
_GL_OUTER = np.polynomial.legendre.leggauss(120)
_Z_LO, _Z_HI = -9.0, 9.0
_S_LO, _S_HI = 1e-9, 4.0


def studentized_range_cdf(q: float, k: int, df: float) -> float:
    """CDF of the studentized range by fixed-order quadrature.

    Outer integral over the chi/sqrt(df) scale density (Gauss-Legendre, 120
    nodes on (0, 4]), inner integral over the location of the group maximum
    (160 nodes on [-9, 9]).
    """
    if q <= 0:
        return 0.0
    zx, zw = _GL_INNER
    z_nodes = 0.5 * (_Z_HI - _Z_LO) * zx + 0.5 * (_Z_HI + _Z_LO)
    z_weights = 0.5 * (_Z_HI - _Z_LO) * zw
    if np.isinf(df):
        return _range_cdf_given_scale(q, k, z_nodes, z_weights)
    sx, sw = _GL_OUTER
    s_nodes = 0.5 * (_S_HI - _S_LO) * sx + 0.5 * (_S_HI + _S_LO)
    s_weights = 0.5 * (_S_HI - _S_LO) * sw
    # density of s = chi_df / sqrt(df)
    log_norm = (df / 2.0) * np.log(df / 2.0) - special.gammaln(df / 2.0) + np.log(2.0)
    log_dens = log_norm + (df - 1.0) * np.log(s_nodes) - df * s_nodes**2 / 2.0
    dens = np.exp(log_dens)
    inner = np.array(
        [_range_cdf_given_scale(q * s, k, z_nodes, z_weights) for s in s_nodes]
    )
    return float(np.sum(s_weights * dens * inner))


def q_critical(alpha: float, k: int, df: float) -> float:
    """Upper-alpha quantile of the studentized range distribution."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    target = 1.0 - alpha
    return float(
        optimize.brentq(lambda q: studentized_range_cdf(q, k, df) - target, 1e-6, 100.0)
    )


def tukey_hsd(groups, alpha: float = 0.05, group_ids=None):
    """All-pairs Tukey HSD comparisons at the given alpha.

    q = |mean_i - mean_j| / sqrt(MSW/2 * (1/n_i + 1/n_j)); significance via
    the studentized-range critical value for (k groups, df_within).
    """
    groups = [np.asarray(g, dtype=float) for g in groups]
    if len(groups) < 2 or any(g.size < 2 for g in groups):
        raise ValueError("need at least 2 groups with at least 2 values each")
    if group_ids is None:
        group_ids = list(range(len(groups)))
    k = len(groups)
    df_w = sum(g.size for g in groups) - k
    msw = sum(float(np.sum((g - g.mean()) ** 2)) for g in groups) / df_w
    q_crit = q_critical(alpha, k, df_w)
    results = []
    for i in range(k):
        for j in range(i + 1, k):
            diff = groups[i].mean() - groups[j].mean()
            if msw > 0:
                se = np.sqrt(msw / 2.0 * (1.0 / groups[i].size + 1.0 / groups[j].size))
                q = abs(diff) / se
            else:
                q = 0.0 if diff == 0 else float("inf")
            results.append(
                TukeyResult(
                    group_a=group_ids[i],
                    group_b=group_ids[j],
                    mean_diff=float(diff),
                    q=float(q),
                    q_critical=q_crit,
                    significant=bool(q > q_crit),
                )
            )
    return results
