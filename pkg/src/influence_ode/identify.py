"""Per-recipient regression: design assembly, OLS fit, and diagnostics.

The regression form of the influence update is

    x_i(t+1) = b_ii * x_i(t) + sum_j b_ij * x_j(t)

with no intercept.  Fitting is plain least squares; the influence weights
are recovered from the coefficients by w_ij = b_ij and
w_ii = b_ii + sum_j b_ij.  Because the model passes through the origin, R^2
uses the uncentered convention (total sum of squares is sum(y^2)) and the
adjusted value is 1 - (1 - R^2) * n / (n - p).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .dynamics import InfluenceNetwork, InfluenceWeights, OpinionSeries

# Singular values below RANK_RCOND * (largest singular value) count as zero.
RANK_RCOND = 1e-10


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Regression inputs for one recipient.

    Row t holds the kernel-t opinions (recipient first, then influencers in
    network order); the response is the recipient's kernel-(t+1) opinion.
    """

    X: np.ndarray
    y: np.ndarray
    column_ids: tuple[str, ...]

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=float)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ValueError("design must be (n, p) with response of length n")
        if len(self.column_ids) != X.shape[1]:
            raise ValueError("one column id required per design column")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "column_ids", tuple(self.column_ids))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def recipient_id(self) -> str:
        return self.column_ids[0]


@dataclass(frozen=True, eq=False)
class FitDiagnostics:
    """OLS outputs for one recipient.

    ``saturated`` marks fits with n <= p (no residual degrees of freedom);
    ``zero_response`` marks the all-zero-response convention R^2 = 1.
    F is +inf with prob_f = 0 whenever the residual is exactly zero or the
    model is saturated.
    """

    recipient_id: str
    column_ids: tuple[str, ...]
    betas: np.ndarray
    rank: int
    n_observations: int
    n_predictors: int
    r_squared: float
    adj_r_squared: float
    f_statistic: float
    prob_f: float
    residuals: np.ndarray
    bound_violations: list[tuple[str, float]]
    saturated: bool = False
    zero_response: bool = False

    @property
    def n_influencers(self) -> int:
        return self.n_predictors - 1

    def weights(self) -> InfluenceWeights:
        return betas_to_weights(self.betas, self.column_ids)


def build_design(
    recipient: OpinionSeries, influencers: Sequence[OpinionSeries]
) -> DesignMatrix:
    """Assemble the lagged design for one recipient.

    All series must share one length T >= 3 and be forward-filled (finite
    everywhere).  The result has n = T - 1 rows and p = 1 + len(influencers)
    columns, recipient column first.
    """
    series = [recipient] + list(influencers)
    T = len(recipient)
    for s in series:
        if len(s) != T:
            raise ValueError(
                f"series length mismatch: {s.user_id!r} has {len(s)}, "
                f"recipient {recipient.user_id!r} has {T}"
            )
        if not s.is_filled:
            raise ValueError(f"series for {s.user_id!r} has unfilled gaps")
    if T < 3:
        raise ValueError(f"need series length >= 3 to regress, got {T}")

    X = np.column_stack([s.values[:-1] for s in series])
    y = recipient.values[1:]
    column_ids = tuple(s.user_id for s in series)
    return DesignMatrix(X, y, column_ids)


def betas_to_weights(betas, column_ids: Sequence[str]) -> InfluenceWeights:
    """Map regression coefficients back to influence weights.

    w_ij = b_ij for each influencer, w_ii = b_ii + sum_j b_ij; inverts the
    beta mapping exactly.
    """
    betas = np.asarray(betas, dtype=float)
    if betas.shape != (len(column_ids),):
        raise ValueError("one coefficient required per column id")
    self_weight = math.fsum(betas.tolist())
    influence = dict(zip(column_ids[1:], (float(b) for b in betas[1:])))
    return InfluenceWeights(column_ids[0], self_weight, influence)


def weights_to_betas(weights: InfluenceWeights) -> tuple[np.ndarray, tuple[str, ...]]:
    """Coefficient vector and column ids for a weight set (recipient first)."""
    betas = weights.betas
    column_ids = (weights.recipient_id,) + weights.influencer_ids
    return np.array([betas[c] for c in column_ids]), column_ids


def _betacf(a: float, b: float, x: float) -> float:
    # Continued fraction for the incomplete beta function (modified Lentz).
    MAXIT, EPS, FPMIN = 300, 1e-16, 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < FPMIN:
        d = FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            return h
    raise ArithmeticError(f"incomplete beta did not converge (a={a}, b={b}, x={x})")


def _betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_bt = (
        a * math.log(x)
        + b * math.log1p(-x)
        - (math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))
    )
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def f_cdf(x: float, d1: int, d2: int) -> float:
    """CDF of the F distribution with (d1, d2) degrees of freedom.

    Evaluates I_z(d1/2, d2/2) at z = d1*x / (d1*x + d2), where I is the
    regularized incomplete beta function.

    Raises:
        ValueError: x < 0 or non-positive degrees of freedom.
    """
    if d1 <= 0 or d2 <= 0:
        raise ValueError(f"degrees of freedom must be positive, got ({d1}, {d2})")
    if not x >= 0.0:
        raise ValueError(f"F statistic must be >= 0, got {x}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    z = d1 * x / (d1 * x + d2)
    return min(1.0, max(0.0, _betainc_reg(d1 / 2.0, d2 / 2.0, z)))


def f_sf(x: float, d1: int, d2: int) -> float:
    """Upper tail 1 - f_cdf(x), computed directly for small-tail accuracy."""
    if d1 <= 0 or d2 <= 0:
        raise ValueError(f"degrees of freedom must be positive, got ({d1}, {d2})")
    if not x >= 0.0:
        raise ValueError(f"F statistic must be >= 0, got {x}")
    if x == 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    z = d2 / (d1 * x + d2)
    return min(1.0, max(0.0, _betainc_reg(d2 / 2.0, d1 / 2.0, z)))


def regression_diagnostics(
    design: DesignMatrix, betas, rank: int | None = None
) -> FitDiagnostics:
    """Diagnostics for fitted coefficients on a no-intercept design.

    R^2 = 1 - SSR / sum(y^2); adjusted R^2 = 1 - (1 - R^2) * n / (n - p);
    F = (R^2 / p) / ((1 - R^2) / (n - p)) on (p, n - p) degrees of freedom,
    with prob_f its upper-tail probability.  A zero response fits itself
    perfectly by convention (R^2 = 1); n <= p is flagged as saturated with
    F reported as +inf and prob_f = 0.
    """
    betas = np.asarray(betas, dtype=float)
    X, y = design.X, design.y
    n, p = design.n, design.p
    if rank is None:
        svals = scipy.linalg.svdvals(X) if min(n, p) else np.array([])
        cutoff = RANK_RCOND * (svals[0] if svals.size else 0.0)
        rank = int(np.sum(svals > cutoff))

    residuals = y - X @ betas
    ssr = float(residuals @ residuals)
    sst = float(y @ y)
    saturated = n <= p
    zero_response = sst == 0.0

    if zero_response:
        r_squared = 1.0
    else:
        r_squared = min(1.0, max(0.0, 1.0 - ssr / sst))
    if saturated and ssr <= 1e-24 * max(sst, 1.0):
        # Full-row-rank saturated fits interpolate; report the convention exactly.
        r_squared = 1.0

    if saturated:
        adj_r_squared = r_squared
    else:
        adj_r_squared = 1.0 - (1.0 - r_squared) * n / (n - p)

    if saturated or r_squared == 1.0:
        f_statistic, prob_f = math.inf, 0.0
    else:
        f_statistic = (r_squared / p) / ((1.0 - r_squared) / (n - p))
        prob_f = f_sf(f_statistic, p, n - p)

    weights = betas_to_weights(betas, design.column_ids)
    return FitDiagnostics(
        recipient_id=design.recipient_id,
        column_ids=design.column_ids,
        betas=betas,
        rank=rank,
        n_observations=n,
        n_predictors=p,
        r_squared=r_squared,
        adj_r_squared=adj_r_squared,
        f_statistic=f_statistic,
        prob_f=prob_f,
        residuals=residuals,
        bound_violations=weights.bound_violations(),
        saturated=saturated,
        zero_response=zero_response,
    )


def fit_ols(design: DesignMatrix) -> FitDiagnostics:
    """Least-squares fit of the no-intercept design.

    Solves min ||y - X b||^2 through LAPACK's pivoted-QR route (complete
    orthogonal factorization), which returns the minimum-norm solution on
    rank-deficient designs; the effective rank uses RANK_RCOND.  Rank
    deficiency and saturation are flagged in the diagnostics, not raised.
    """
    if design.n < 1 or design.p < 1:
        raise ValueError(f"need n >= 1 and p >= 1, got {design.n} x {design.p}")
    betas, _, rank, _ = scipy.linalg.lstsq(
        design.X, design.y, cond=RANK_RCOND, lapack_driver="gelsy"
    )
    return regression_diagnostics(design, betas, rank=int(rank))


@dataclass(frozen=True)
class CohortSummary:
    """Cohort-level aggregates; variances are population variances."""

    n_models: int
    n_observations: int | None
    adj_r_squared_mean: float
    adj_r_squared_var: float
    prob_f_mean: float
    prob_f_var: float
    influencer_count_mean: float
    influencer_count_var: float


@dataclass(frozen=True)
class CohortResult:
    fits: list[FitDiagnostics]
    failures: list[tuple[str, str]]
    summary: CohortSummary


def summarize_fits(fits: Sequence[FitDiagnostics]) -> CohortSummary:
    """Aggregate per-recipient diagnostics into the cohort summary."""
    if not fits:
        return CohortSummary(0, None, math.nan, math.nan, math.nan, math.nan,
                             math.nan, math.nan)
    adj = np.array([f.adj_r_squared for f in fits])
    pf = np.array([f.prob_f for f in fits])
    counts = np.array([f.n_influencers for f in fits])
    n_obs = {f.n_observations for f in fits}
    return CohortSummary(
        n_models=len(fits),
        n_observations=n_obs.pop() if len(n_obs) == 1 else None,
        adj_r_squared_mean=float(adj.mean()),
        adj_r_squared_var=float(adj.var()),
        prob_f_mean=float(pf.mean()),
        prob_f_var=float(pf.var()),
        influencer_count_mean=float(counts.mean()),
        influencer_count_var=float(counts.var()),
    )


def fit_cohort(
    network: InfluenceNetwork, series: Mapping[str, OpinionSeries]
) -> CohortResult:
    """Fit every recipient in the network independently.

    Influencer-influencer links play no role: each recipient's model sees
    only its own influencer columns.  Per-recipient failures (missing or
    mismatched series, numeric errors) are collected, never raised; results
    come back sorted by recipient id.
    """
    fits: list[FitDiagnostics] = []
    failures: list[tuple[str, str]] = []
    for rid in sorted(network.recipient_ids()):
        try:
            recipient = series[rid]
            influencers = [series[j] for j in network.influencers_of(rid)]
        except KeyError as exc:
            failures.append((rid, f"no series for user {exc.args[0]!r}"))
            continue
        try:
            fits.append(fit_ols(build_design(recipient, influencers)))
        except (ValueError, ArithmeticError, scipy.linalg.LinAlgError) as exc:
            failures.append((rid, str(exc)))
    return CohortResult(fits=fits, failures=failures, summary=summarize_fits(fits))
