"""Independent ground-truth machinery.

Nothing here shares code paths with the solvers it checks: the exhaustive
search enumerates every candidate, the alpha scan evaluates the raw objective
on a grid, and the dithering experiment estimates variances by plain Monte
Carlo against the closed forms.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .calibration import AlphaStrategy, CalibBatch, objective_direct, sample_folded_alphas
from .errors import BudgetExceeded
from .rng import SeededRng

__all__ = [
    "OracleResult",
    "DitherSetup",
    "DitherResult",
    "AlphaScan",
    "exhaustive_row",
    "alpha_grid_scan",
    "dither_experiment",
    "sampling_variance_sweep",
]

ENUMERATION_BUDGET = 10_000_000
_CHUNK = 1 << 16


@dataclass(frozen=True)
class OracleResult:
    """Global minimizer found by full enumeration."""

    best_codes: np.ndarray   # level index per coordinate
    best_values: np.ndarray  # dequantized values
    best_cost: float
    n_evaluated: int


def exhaustive_row(
    r_upper: np.ndarray,
    y: np.ndarray,
    levels_per_coord: list[np.ndarray],
    budget: int = ENUMERATION_BUDGET,
) -> OracleResult:
    """Exact discrete minimizer of ||R q - y||^2 by full enumeration.

    Candidates are visited in lexicographic order (last coordinate fastest),
    and only strict improvements are kept, so ties resolve to the
    lexicographically smallest code vector.

    Raises:
        BudgetExceeded: the candidate count exceeds ``budget``.
    """
    r_upper = np.asarray(r_upper, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    n = r_upper.shape[0]
    sizes = np.array([len(lv) for lv in levels_per_coord], dtype=np.int64)
    total = int(np.prod(sizes))
    if total > budget:
        raise BudgetExceeded(f"{total} candidates exceed the budget of {budget}")
    strides = np.ones(n, dtype=np.int64)
    for j in range(n - 2, -1, -1):
        strides[j] = strides[j + 1] * sizes[j + 1]

    level_arrays = [np.asarray(lv, dtype=np.float64) for lv in levels_per_coord]
    best_cost = np.inf
    best_codes = None
    for start in range(0, total, _CHUNK):
        lin = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        codes = (lin[:, None] // strides[None, :]) % sizes[None, :]
        values = np.empty((len(lin), n))
        for j in range(n):
            values[:, j] = level_arrays[j][codes[:, j]]
        resid = values @ r_upper.T - y[None, :]
        costs = np.sum(resid * resid, axis=1)
        k = int(np.argmin(costs))
        if costs[k] < best_cost:
            best_cost = float(costs[k])
            best_codes = codes[k].copy()
    best_values = np.array([level_arrays[j][best_codes[j]] for j in range(n)])
    return OracleResult(
        best_codes=best_codes.astype(np.int64),
        best_values=best_values,
        best_cost=best_cost,
        n_evaluated=total,
    )


@dataclass(frozen=True)
class AlphaScan:
    """Objective evaluated on an even grid over [0, 1]."""

    alpha_best: float
    alphas: np.ndarray
    values: np.ndarray


def alpha_grid_scan(
    w: np.ndarray, w_hat: np.ndarray, batch: CalibBatch, grid_points: int = 101
) -> AlphaScan:
    """Scan the interpolation weight on an even grid; quadratic, so convex."""
    if grid_points < 3:
        raise ValueError(f"grid_points must be >= 3, got {grid_points}")
    alphas = np.linspace(0.0, 1.0, grid_points)
    values = np.array([objective_direct(w, w_hat, batch, a) for a in alphas])
    return AlphaScan(alpha_best=float(alphas[int(np.argmin(values))]), alphas=alphas, values=values)


# ---------------------------------------------------------------------------
# binary-grid dithering experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DitherSetup:
    """Scalar binary-rounding setup for the calibration-variance experiment."""

    w: float
    x: float
    tau_s: float = 1.0
    tau_z: float = 0.2
    n_sequences: int = 128
    n_trials: int = 100_000

    def __post_init__(self):
        if self.tau_s <= 0 or self.tau_z <= 0:
            raise ValueError("tau_s and tau_z must be positive")
        if self.n_sequences < 1 or self.n_trials < 1:
            raise ValueError("n_sequences and n_trials must be >= 1")


@dataclass(frozen=True)
class DitherResult:
    var_fixed_hat: float
    var_smoothed_hat: float
    var_fixed_closed: float
    var_bound: float
    se_fixed_hat: float
    se_smoothed_hat: float


def _variance_se(samples: np.ndarray) -> float:
    """Asymptotic standard error of the sample variance."""
    n = len(samples)
    if n < 2:
        return 0.0
    c = samples - samples.mean()
    m2 = float(np.mean(c * c))
    m4 = float(np.mean(c ** 4))
    return math.sqrt(max(m4 - m2 * m2, 0.0) / n)


def dither_experiment(setup: DitherSetup, rng: SeededRng) -> DitherResult:
    """Monte Carlo check of the binary-grid dithering proposition.

    The fixed-weight target sits at the rounding boundary, 1/2 + U with
    U ~ N(0, tau_s^2 / N); the hard rule Q(m) = 1{m >= 1/2} then flips on the
    sign of U, giving an N-independent metric variance with closed form
    (x^2/4)(|1-w| - |w|)^2. The dithered (smoothed) metric

        G = |x| (|w| + (|1-w| - |w|) Phi(U / tau_z))

    is Lipschitz in U, with variance bounded by
    x^2 (|1-w| - |w|)^2 / (2 pi tau_z^2) * tau_s^2 / N.
    """
    w, x = setup.w, setup.x
    u = rng.normal(size=setup.n_trials, scale=setup.tau_s / math.sqrt(setup.n_sequences))
    span = abs(1.0 - w) - abs(w)

    loss_fixed = abs(x) * np.where(u >= 0.0, abs(1.0 - w), abs(w))
    smooth = abs(x) * (abs(w) + span * ndtr(u / setup.tau_z))

    var_fixed_closed = (x * x / 4.0) * span * span
    var_bound = (x * x * span * span) / (2.0 * math.pi * setup.tau_z ** 2) * (
        setup.tau_s ** 2 / setup.n_sequences
    )
    return DitherResult(
        var_fixed_hat=float(np.var(loss_fixed)),
        var_smoothed_hat=float(np.var(smooth)),
        var_fixed_closed=var_fixed_closed,
        var_bound=var_bound,
        se_fixed_hat=_variance_se(loss_fixed),
        se_smoothed_hat=_variance_se(smooth),
    )


# ---------------------------------------------------------------------------
# run-to-run variability of the end proxy loss
# ---------------------------------------------------------------------------

_ALPHA_MEAN_STREAM = 9001
_ALPHA_MEAN_DRAWS = 100_000


def folded_alpha_mean(beta_lambda: float, seed: int = 0) -> float:
    """Monte Carlo estimate of E[min(b, 1-b)] for b ~ Beta(l, l)."""
    rng = SeededRng(seed, _ALPHA_MEAN_STREAM)
    return float(np.mean(sample_folded_alphas(_ALPHA_MEAN_DRAWS, beta_lambda, rng)))


def sampling_variance_sweep(
    pipeline_config, n_repeats: int, vary_seeds: bool = True
) -> dict:
    """Run-to-run spread of the end proxy loss: fixed-at-mean vs sampled.

    Re-runs the full toy-chain quantization ``n_repeats`` times per mode,
    resampling the calibration data each run (unless ``vary_seeds`` is off, in
    which case every repeat is identical and both spreads are zero). Reports
    mean and standard deviation of the total proxy loss per mode; no hard
    ordering is asserted, the result just flags the observed direction.
    """
    from . import pipeline  # deferred: the oracle is otherwise pipeline-free

    if n_repeats < 1:
        raise ValueError(f"n_repeats must be >= 1, got {n_repeats}")
    if n_repeats == 1:
        warnings.warn("n_repeats == 1: standard deviations degenerate to 0", stacklevel=2)

    lam = pipeline_config.alpha.beta_lambda
    mean_alpha = folded_alpha_mean(lam, pipeline_config.seed)
    modes = {
        "fixed_at_mean": AlphaStrategy(mode="fixed", alpha_value=mean_alpha, beta_lambda=lam),
        "sampled": AlphaStrategy(
            mode="sampled", alpha_value=pipeline_config.alpha.alpha_value, beta_lambda=lam
        ),
    }

    out: dict = {"n_repeats": n_repeats, "alpha_mean": mean_alpha, "modes": {}}
    for name, strategy in modes.items():
        vals = []
        for rep in range(n_repeats):
            seed = pipeline_config.seed + rep if vary_seeds else pipeline_config.seed
            cfg = pipeline_config.with_updates(alpha=strategy, seed=seed, out_dir=None)
            net = pipeline.synth_network(cfg.network, cfg.network_seed())
            report = pipeline.quantize_network(net, cfg)
            vals.append(sum(rec["proxy_loss"] for rec in report["layers"]))
        arr = np.array(vals)
        out["modes"][name] = {
            "mean": float(arr.mean()),
            "std": float(arr.std(ddof=1)) if n_repeats > 1 else 0.0,
            "losses": vals,
        }
    out["sampled_std_leq_fixed"] = bool(
        out["modes"]["sampled"]["std"] <= out["modes"]["fixed_at_mean"]["std"]
    )
    return out
