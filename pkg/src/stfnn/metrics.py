"""Error metrics and two-sample significance tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ValidationError


def rmse(predictions, truths) -> float:
    p = np.asarray(predictions, dtype=float).reshape(-1)
    t = np.asarray(truths, dtype=float).reshape(-1)
    if p.size == 0 or p.size != t.size:
        raise ValidationError(f"need equal nonempty lengths, got {p.size} and {t.size}")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def improvement(rmse_baseline: float, rmse_model: float) -> float:
    """Relative RMSE reduction over a baseline, in percent (negative when worse)."""
    if not rmse_baseline > 0:
        raise ValidationError("baseline RMSE must be positive")
    return 100.0 * (rmse_baseline - rmse_model) / rmse_baseline


@dataclass(frozen=True)
class SignificanceResult:
    t_p_value: float
    wilcoxon_p_value: float
    degenerate: bool = False

    def significant(self, level: float = 0.05) -> bool:
        return self.t_p_value < level and self.wilcoxon_p_value < level


def rank_sum_test(a, b, method: str = "normal") -> float:
    """Two-sided Wilcoxon rank-sum p-value.

    ``method="normal"`` uses the normal approximation with tie correction.
    ``method="exact"`` uses the exact null distribution of the statistic,
    which is only defined without ties and is meant for small samples.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if method == "exact":
        if np.unique(np.concatenate([a, b])).size != a.size + b.size:
            raise ValidationError("the exact rank-sum distribution needs untied values")
        return float(stats.mannwhitneyu(a, b, alternative="two-sided", method="exact").pvalue)
    if method != "normal":
        raise ValidationError(f"unknown rank-sum method {method!r}")
    n1, n2 = a.size, b.size
    ranks = stats.rankdata(np.concatenate([a, b]))
    w = ranks[:n1].sum()
    n = n1 + n2
    _, counts = np.unique(ranks, return_counts=True)
    tie = np.sum(counts**3 - counts)
    var = n1 * n2 / 12.0 * ((n + 1) - tie / (n * (n - 1)))
    if var <= 0:
        return 1.0
    z = (w - n1 * (n + 1) / 2.0) / np.sqrt(var)
    return float(2 * stats.norm.sf(abs(z)))


def significance_tests(errors_a, errors_b) -> SignificanceResult:
    """Two-sided two-sample t-test and Wilcoxon rank-sum test.

    Inputs are per-sample absolute errors of two models. When every value in
    both samples is identical both p-values are 1 and ``degenerate`` is set.
    """
    a = np.asarray(errors_a, dtype=float).reshape(-1)
    b = np.asarray(errors_b, dtype=float).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise ValidationError("empty error sample")
    pooled = np.concatenate([a, b])
    if np.all(pooled == pooled[0]):
        return SignificanceResult(1.0, 1.0, degenerate=True)
    if a.size < 2 or b.size < 2 or (np.ptp(a) == 0 and np.ptp(b) == 0):
        t_p = 0.0 if a.mean() != b.mean() else 1.0
    else:
        t_p = float(stats.ttest_ind(a, b, equal_var=True).pvalue)
    return SignificanceResult(t_p, rank_sum_test(a, b))
