"""Similarity kernel, association effect sizes, and hypothesis tests.

The association effect size is a Cohen's d over cosine-based association
scores: the score of a target vector w against attribute sets A and B is

    s(w, A, B) = mean_a cos(w, a) - mean_b cos(w, b)

and the two-target-group test divides the difference of group-mean scores
by a standard deviation chosen via ``denominator_mode``:

    union_std            sample std over the scores of both groups combined
    pooled_std           variance-weighted pooled std of the two samples
    downsample_equalize  union_std after randomly equalizing group sizes,
                         averaged over repeated draws

p-values come from a two-sided Welch's t-test on the two score samples; a
seeded label-permutation test is available as a nonparametric cross-check.
All computation is float64; inputs may be any array-likes.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateStatisticError
from .seeds import subseed
from .tdist import student_t_two_sided_p

UNION_STD = "union_std"
POOLED_STD = "pooled_std"
DOWNSAMPLE_EQUALIZE = "downsample_equalize"
DENOMINATOR_MODES = (UNION_STD, POOLED_STD, DOWNSAMPLE_EQUALIZE)

# Smallest positive double; reported instead of 0 when two constant samples
# are perfectly separated and the Welch statistic diverges.
_P_FLOOR = 5e-324

NEGLIGIBLE = "negligible"
SMALL = "small"
MEDIUM = "medium"
LARGE = "large"


@dataclass
class EffectSizeResult:
    """Cohen's d with its Welch test, as produced by eat() / sc_eat()."""

    d: float
    p_value: float
    n_x: int
    n_y: int
    denominator_mode: str
    t_stat: float
    df: float

    def __post_init__(self):
        if not 0.0 < self.p_value <= 1.0:
            raise ValueError(f"p_value {self.p_value} outside (0, 1]")
        if self.n_x < 2 or self.n_y < 2:
            raise ValueError("group sizes must be at least 2")
        if not self.df > 0.0:
            raise ValueError("degrees of freedom must be positive")

    @property
    def label(self) -> str:
        return interpret_effect_size(self.d)


def _as_matrix(vectors, name: str) -> np.ndarray:
    m = np.asarray(vectors, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise DataError(f"{name} must be a nonempty set of vectors")
    return m


def _unit_rows(m: np.ndarray, name: str) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1)
    if np.any(norms == 0.0):
        raise DataError(f"{name} contains a zero vector")
    return m / norms[:, None]


def cosine(u, v) -> float:
    """Cosine similarity of two vectors, clamped to [-1, 1]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise DataError(f"mismatched vector shapes {u.shape} and {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DataError("cosine is undefined for a zero vector")
    if np.array_equal(u, v):
        return 1.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def _cosine_matrix(targets: np.ndarray, attrs: np.ndarray) -> np.ndarray:
    sims = _unit_rows(targets, "target set") @ _unit_rows(attrs, "attribute set").T
    return np.clip(sims, -1.0, 1.0)


def association_scores(targets, a_set, b_set) -> np.ndarray:
    """s(w, A, B) for each row w of targets."""
    targets = _as_matrix(targets, "target set")
    a = _as_matrix(a_set, "attribute set A")
    b = _as_matrix(b_set, "attribute set B")
    if a.shape[1] != targets.shape[1] or b.shape[1] != targets.shape[1]:
        raise DataError("attribute vectors must match target dimensionality")
    return _cosine_matrix(targets, a).mean(axis=1) - _cosine_matrix(targets, b).mean(axis=1)


def association_score(w, a_set, b_set) -> float:
    """Association of one vector with attribute set A over attribute set B."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1:
        raise DataError("w must be a single vector")
    return float(association_scores(w.reshape(1, -1), a_set, b_set)[0])


def _mean(values: np.ndarray) -> float:
    # fsum is exactly rounded, hence order-independent and sign-symmetric;
    # this is what makes the eat()/welch swap antisymmetries exact.
    return math.fsum(values) / values.size


def _sample_var(values: np.ndarray, mean: float) -> float:
    return math.fsum((v - mean) ** 2 for v in values) / (values.size - 1)


def pooled_std(s1: float, n1: int, s2: float, n2: int) -> float:
    """Pooled standard deviation of two samples from their stds and sizes."""
    if n1 < 2 or n2 < 2:
        raise DataError("pooled std requires both sample sizes >= 2")
    if s1 < 0.0 or s2 < 0.0:
        raise DataError("standard deviations must be nonnegative")
    return math.sqrt(((n1 - 1) * s1 * s1 + (n2 - 1) * s2 * s2) / (n1 + n2 - 2))


def welch_t(sample1, sample2) -> tuple[float, float, float]:
    """Two-sided Welch's t-test.

    Returns (t, df, p) with the Welch-Satterthwaite degrees of freedom.
    Raises DegenerateStatisticError when both samples have zero variance.
    """
    x = np.asarray(sample1, dtype=np.float64)
    y = np.asarray(sample2, dtype=np.float64)
    if x.size < 2 or y.size < 2:
        raise DataError("Welch's t-test requires both samples of size >= 2")
    m1 = _mean(x)
    m2 = _mean(y)
    v1 = _sample_var(x, m1)
    v2 = _sample_var(y, m2)
    if v1 == 0.0 and v2 == 0.0:
        raise DegenerateStatisticError("zero variance in both samples")
    q1 = v1 / x.size
    q2 = v2 / y.size
    t = (m1 - m2) / math.sqrt(q1 + q2)
    df = (q1 + q2) ** 2 / (q1 * q1 / (x.size - 1) + q2 * q2 / (y.size - 1))
    p = student_t_two_sided_p(t, df) if t != 0.0 else 1.0
    return float(t), float(df), float(p)


def _welch_allow_separated(sx: np.ndarray, sy: np.ndarray) -> tuple[float, float, float]:
    # eat()/sc_eat() must still report d when both score samples are
    # constant (the Welch statistic diverges); p underflows to the smallest
    # positive double rather than violating p > 0.
    if _sample_var(sx, _mean(sx)) == 0.0 and _sample_var(sy, _mean(sy)) == 0.0:
        df = float(sx.size + sy.size - 2)
        diff = _mean(sx) - _mean(sy)
        if diff == 0.0:
            return 0.0, df, 1.0
        return math.copysign(math.inf, diff), df, _P_FLOOR
    return welch_t(sx, sy)


def _resolve_mode(mode, n1: int, n2: int) -> str:
    if mode is None:
        return POOLED_STD if n1 != n2 else UNION_STD
    if mode not in DENOMINATOR_MODES:
        raise DataError(f"unknown denominator mode {mode!r}")
    return mode


def _union_std(scores: np.ndarray) -> float:
    var = _sample_var(scores, _mean(scores))
    if var == 0.0:
        raise DegenerateStatisticError("zero variance: all association scores identical")
    return math.sqrt(var)


def _union_d(sx: np.ndarray, sy: np.ndarray) -> float:
    return (_mean(sx) - _mean(sy)) / _union_std(np.concatenate([sx, sy]))


def _downsampled_d(sx: np.ndarray, sy: np.ndarray, seed: int, reps: int) -> float:
    if sx.size == sy.size:
        return _union_d(sx, sy)
    small = min(sx.size, sy.size)
    larger_is_x = sx.size > sy.size
    larger = sx if larger_is_x else sy
    total = 0.0
    for r in range(reps):
        rng = np.random.default_rng(subseed(seed, "downsample", r))
        pick = larger[rng.choice(larger.size, size=small, replace=False)]
        a, b = (pick, sy) if larger_is_x else (sx, pick)
        total += _union_d(a, b)
    return total / reps


def _effect_size(sx: np.ndarray, sy: np.ndarray, mode, seed, downsample_reps) -> EffectSizeResult:
    mode = _resolve_mode(mode, sx.size, sy.size)
    if mode == UNION_STD:
        d = _union_d(sx, sy)
    elif mode == POOLED_STD:
        m1 = _mean(sx)
        m2 = _mean(sy)
        denom = pooled_std(math.sqrt(_sample_var(sx, m1)), sx.size,
                           math.sqrt(_sample_var(sy, m2)), sy.size)
        if denom == 0.0:
            raise DegenerateStatisticError("zero variance: all association scores identical")
        d = (m1 - m2) / denom
    else:
        if seed is None:
            raise DataError("downsample_equalize requires a seed")
        d = _downsampled_d(sx, sy, seed, downsample_reps)
    t, df, p = _welch_allow_separated(sx, sy)
    return EffectSizeResult(
        d=float(d), p_value=p, n_x=int(sx.size), n_y=int(sy.size),
        denominator_mode=mode, t_stat=t, df=df,
    )


def eat(x_set, y_set, a_set, b_set, mode=None, seed=None, downsample_reps=1000) -> EffectSizeResult:
    """Two-target-group association test of X vs Y against attributes A, B.

    mode defaults to pooled_std when |X| != |Y| and union_std otherwise.
    downsample_equalize requires a seed and averages d over downsample_reps
    independent draws that shrink the larger group to the smaller size.
    """
    x = _as_matrix(x_set, "target set X")
    y = _as_matrix(y_set, "target set Y")
    if x.shape[0] < 2 or y.shape[0] < 2:
        raise DataError("target groups must each contain at least 2 vectors")
    sx = association_scores(x, a_set, b_set)
    sy = association_scores(y, a_set, b_set)
    return _effect_size(sx, sy, mode, seed, downsample_reps)


def sc_eat(w, a_set, b_set, mode=None, seed=None, downsample_reps=1000) -> EffectSizeResult:
    """Single-target association test: one vector w against attributes A, B.

    The two samples are the cosines of w with A and with B; d, denominator
    modes, and the Welch p-value are as in eat(). n_x and n_y report |A|
    and |B|.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1:
        raise DataError("w must be a single vector")
    a = _as_matrix(a_set, "attribute set A")
    b = _as_matrix(b_set, "attribute set B")
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise DataError("attribute groups must each contain at least 2 vectors")
    ca = _cosine_matrix(w.reshape(1, -1), a)[0]
    cb = _cosine_matrix(w.reshape(1, -1), b)[0]
    return _effect_size(ca, cb, mode, seed, downsample_reps)


def mean_diff_permutation_p(sample1, sample2, n_perm: int, seed: int) -> float:
    """Two-sided Monte-Carlo permutation p for a difference of sample means.

    Labels of the pooled values are reshuffled n_perm times; the p-value uses
    add-one smoothing, (1 + #extreme) / (n_perm + 1).
    """
    if n_perm < 100:
        raise DataError("permutation test requires n_perm >= 100")
    s1 = np.asarray(sample1, dtype=np.float64)
    s2 = np.asarray(sample2, dtype=np.float64)
    pooled = np.concatenate([s1, s2])
    if pooled.size < 4:
        raise DataError("groups too small to permute (need at least 4 values)")
    n1 = s1.size
    observed = abs(s1.mean() - s2.mean())
    rng = np.random.default_rng(seed)
    extreme = 0
    block = 4096
    done = 0
    while done < n_perm:
        rows = min(block, n_perm - done)
        mat = np.broadcast_to(pooled, (rows, pooled.size)).copy()
        rng.permuted(mat, axis=1, out=mat)
        stats = mat[:, :n1].mean(axis=1) - mat[:, n1:].mean(axis=1)
        extreme += int(np.count_nonzero(np.abs(stats) >= observed))
        done += rows
    return (1 + extreme) / (n_perm + 1)


def permutation_p(x_set, y_set, a_set, b_set, n_perm: int, seed: int) -> float:
    """Permutation p for an eat() instance.

    The statistic is the difference of group-mean association scores (the
    effect-size numerator; the denominator cancels under relabeling).
    """
    sx = association_scores(_as_matrix(x_set, "target set X"), a_set, b_set)
    sy = association_scores(_as_matrix(y_set, "target set Y"), a_set, b_set)
    return mean_diff_permutation_p(sx, sy, n_perm, seed)


def pearson(x, y) -> tuple[float, float]:
    """Sample Pearson correlation with its two-sided p-value."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or x.size != y.size:
        raise DataError("series must be one-dimensional and of equal length")
    n = x.size
    if n < 3:
        raise DataError("correlation requires at least 3 observations")
    xm = x - x.mean()
    ym = y - y.mean()
    sxx = float(xm @ xm)
    syy = float(ym @ ym)
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateStatisticError("zero variance: constant series")
    rho = float(np.clip((xm @ ym) / math.sqrt(sxx * syy), -1.0, 1.0))
    if abs(rho) == 1.0:
        return rho, 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return rho, student_t_two_sided_p(t, float(n - 2))


def ols_r2(predictors, y) -> float:
    """R-squared of an ordinary least squares fit with intercept."""
    p = np.asarray(predictors, dtype=np.float64)
    if p.ndim == 1:
        p = p.reshape(-1, 1)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or p.shape[0] != y.size:
        raise DataError("predictor rows must match the length of y")
    n, k = p.shape
    if n < k + 2:
        raise DataError(f"need at least {k + 2} rows for {k} predictors, got {n}")
    design = np.column_stack([np.ones(n), p])
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise DegenerateStatisticError("rank deficiency in the design matrix")
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ beta
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise DegenerateStatisticError("zero variance: constant response")
    r2 = 1.0 - float(resid @ resid) / ss_tot
    return min(1.0, max(0.0, r2))


def interpret_effect_size(d: float) -> str:
    """Magnitude label for |d| at the .2 / .5 / .8 thresholds."""
    if not math.isfinite(d):
        raise DataError("effect size must be finite")
    a = abs(d)
    if a < 0.2:
        return NEGLIGIBLE
    if a < 0.5:
        return SMALL
    if a < 0.8:
        return MEDIUM
    return LARGE
