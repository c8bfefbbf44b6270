"""Statistical checks and report rows.

Every check returns a StatReport whose pass flag is exactly
``statistic <= threshold``, so a row can be re-judged from its numbers.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from .kernel import stationary_distribution


@dataclass
class StatReport:
    name: str
    statistic: float
    threshold: float
    passed: bool
    n: int = 0
    seed: Optional[int] = None

    @classmethod
    def at_most(cls, name, statistic, threshold, n=0, seed=None):
        statistic = float(statistic)
        return cls(name, statistic, float(threshold), bool(statistic <= threshold), int(n), seed)


def ks_two_sample(a, b, alpha: float = 0.01, name: str = "ks_two_sample", seed=None) -> StatReport:
    """Two-sample KS; passes when D stays below the asymptotic level-alpha critical value."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    D = stats.ks_2samp(a, b, method="asymp").statistic
    n, m = a.size, b.size
    crit = np.sqrt(-0.5 * np.log(alpha / 2)) * np.sqrt((n + m) / (n * m))
    return StatReport.at_most(name, D, crit, n + m, seed)


def ks_one_sample(sample, cdf, alpha: float = 0.01, name: str = "ks_one_sample", seed=None) -> StatReport:
    sample = np.asarray(sample, dtype=float).ravel()
    D = stats.kstest(sample, cdf).statistic
    crit = stats.kstwo.ppf(1 - alpha, sample.size)
    return StatReport.at_most(name, D, crit, sample.size, seed)


def martingale_mc_check(increments, states=None, n_sigma: float = 3.0, name: str = "martingale_mc",
                        seed=None, min_group: int = 30) -> StatReport:
    """Ensemble means of martingale increments must sit within n_sigma SE of zero.

    ``increments`` has shape (paths, steps).  Columns are tested per time step;
    with ``states`` (the X_n each increment starts from, same shape) the
    increments are instead grouped by starting state.  The statistic is the
    largest |mean| / SE; zero-variance groups must have mean exactly 0.
    Groups with fewer than ``min_group`` samples carry no usable SE and are skipped.
    """
    inc = np.atleast_2d(np.asarray(increments, dtype=float))
    if states is None:
        groups = [inc[:, j] for j in range(inc.shape[1])]
    else:
        st = np.asarray(states).reshape(inc.shape)
        groups = [inc[st == s] for s in np.unique(st)]
    worst = 0.0
    for grp in groups:
        if grp.size < max(2, min_group):
            continue
        mean = grp.mean()
        se = grp.std(ddof=1) / np.sqrt(grp.size)
        if se == 0:
            z = 0.0 if abs(mean) <= 1e-12 else np.inf
        else:
            z = abs(mean) / se
        worst = max(worst, z)
    return StatReport.at_most(name, worst, n_sigma, inc.size, seed)


def tav_constant(k, sol, r=None) -> float:
    """Time-average variance constant of S_n(r) through the Poisson solution.

    sigma^2 = sum_x pi(x) [(P g^2)(x) - ((P g)(x))^2], i.e. the stationary mean
    of Var(g(X_1) | X_0).  Standard Markov-chain CLT material, computed here as
    a diagnostic from an exact discrete solution.  ``sol`` already carries r_c,
    so ``r`` is not needed.
    """
    pi = stationary_distribution(k)
    P = k.matrix
    g = sol.g - sol.g.mean()  # shift-invariant
    return max(float(pi @ (P @ g**2 - (P @ g) ** 2)), 0.0)


def binomial_ci(successes: int, trials: int, level: float = 0.99):
    """Clopper-Pearson interval."""
    return tuple(stats.binomtest(int(successes), int(trials)).proportion_ci(confidence_level=level))


def write_report(rows, out=None) -> str:
    """CSV with columns name,statistic,threshold,pass,n,seed."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "statistic", "threshold", "pass", "n", "seed"])
    for row in rows:
        w.writerow([
            row.name, fmt(row.statistic), fmt(row.threshold), int(row.passed), row.n,
            "" if row.seed is None else row.seed,
        ])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


def fmt(value) -> str:
    """17 significant digits, enough to round-trip a double."""
    return format(float(value), ".17g")
