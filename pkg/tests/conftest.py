import numpy as np
from scipy.stats import chi2


def chisquare_pvalue(observed: np.ndarray, probs: np.ndarray) -> float:
    """Goodness-of-fit p-value with small-expectation bins pooled.

    Bins with expected count below 5 are merged into one pooled bin.
    Observations in zero-probability bins force a zero p-value.
    """
    observed = np.asarray(observed, dtype=float)
    probs = np.asarray(probs, dtype=float)
    total = observed.sum()
    if observed[probs == 0.0].sum() > 0:
        return 0.0
    observed = observed[probs > 0.0]
    expected = probs[probs > 0.0] * total

    order = np.argsort(expected)
    observed, expected = observed[order], expected[order]
    small = expected < 5.0
    if small.any():
        pooled_obs = observed[small].sum()
        pooled_exp = expected[small].sum()
        observed = np.append(observed[~small], pooled_obs)
        expected = np.append(expected[~small], pooled_exp)
    if len(observed) < 2:
        return 1.0
    stat = float(((observed - expected) ** 2 / expected).sum())
    dof = len(observed) - 1
    return float(chi2.sf(stat, dof))
