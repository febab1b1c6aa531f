"""Grid verdicts for the doubling, decay, and regularity weight classes.

A radial weight is classified by the behaviour of its tail along the
dyadic boundaries 1 - 2^-ell of a radial grid.  Three verdicts are
produced, each a finite-grid statement about an asymptotic property:

* ``in_Dhat``: the tail halving ratio omegahat(r)/omegahat((1+r)/2)
  stays bounded.  On the grid the midpoint lands exactly on the next
  boundary, so the ratios are exact boundary quotients.
* ``in_Dcheck``: for some lag K in {2, 4, 8, 16} the decay ratio
  omegahat(r)/omegahat(1 - (1-r)/K) stays above a floor 1 + delta.
* ``regular``: the pointwise ratio omega(r)(1-r)/omegahat(r) is trapped
  in a band of bounded dynamic range.

All three are limit statements, and a finite grid can only exhibit a
trend, so every report carries ``grid_limited=True``.  Two trend guards
sharpen the raw sup/inf rules:

* A bounded-ratio claim is rejected when the last window of halving
  ratios is strictly increasing with material total growth.  Ratios
  that climb toward a finite limit decelerate and stay below the
  material threshold; genuinely unbounded families keep accelerating.
* A decay ratio that declines across the last window is extrapolated
  linearly in 1/(1 - log(1-r)); the verdict then tests the projected
  limit instead of the grid infimum.  Log-type tails decay with ratios
  that sit exactly on such a line and project to 1, below any floor,
  while power-type tails project to their true limit.

Fitted exponents accompany the verdicts: beta is the log-log slope of
the tail over the deep half of the grid, gamma the mean per-octave log
decay for the winning lag.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .quadrature import RadialGrid
from .weights import RadialWeight

__all__ = [
    "DoublingVerdict",
    "DecayVerdict",
    "RegularityVerdict",
    "WeightClassReport",
    "classify",
]

_LN2 = math.log(2.0)
# last grid levels inspected by the trend guards
_WINDOW = 5
# strictly increasing halving ratios are benign until they grow by this
# much over the window; convergent families measure ~2%, divergent >100%
_GROWTH_TOL = 0.10
# declining decay ratios below this total drop are treated as flat
_DECLINE_TOL = 0.01
_K_LAGS = (1, 2, 3, 4)


def _exp_clip(x):
    """exp(x) continued to inf instead of raising on overflow."""
    if x > 709.0:
        return math.inf
    return math.exp(x)


def _material_growth(values):
    """True when values strictly increase by more than _GROWTH_TOL overall."""
    window = values[-_WINDOW:]
    if not all(window[i] < window[i + 1] for i in range(len(window) - 1)):
        return False
    return window[-1] - window[0] > math.log1p(_GROWTH_TOL)


def _declining(values):
    window = values[-_WINDOW:]
    if not all(window[i] > window[i + 1] for i in range(len(window) - 1)):
        return False
    return (window[0] - window[-1]) / window[0] > _DECLINE_TOL


def _projected_limit(t_left, values):
    """Intercept of the least-squares line through (1/t, value)."""
    window = np.asarray(values[-_WINDOW:], dtype=float)
    x = 1.0 / np.asarray(t_left[-_WINDOW:], dtype=float)
    return float(np.polyfit(x, window, 1)[1])


@dataclass(frozen=True)
class DoublingVerdict:
    """Bounded tail-halving verdict with its constant and exponent."""

    holds: bool
    constant: float
    exponent: float


@dataclass(frozen=True)
class DecayVerdict:
    """Tail decay verdict for the best lag K with constant and exponent."""

    holds: bool
    K: int
    constant: float
    exponent: float


@dataclass(frozen=True)
class RegularityVerdict:
    """Band verdict for omega(r)(1-r)/omegahat(r) over the grid."""

    holds: bool
    ratio_min: float
    ratio_max: float

    def __post_init__(self):
        # reported band must be ordered
        if self.ratio_min > self.ratio_max:
            raise ValueError("regularity band inverted")


@dataclass(frozen=True)
class WeightClassReport:
    """Classification verdicts for one weight on one grid."""

    in_Dhat: DoublingVerdict
    in_Dcheck: DecayVerdict
    regular: RegularityVerdict
    grid: RadialGrid
    grid_limited: bool = True


def _doubling_verdict(log_tails, log_u, cap):
    ratios = log_tails[:-1] - log_tails[1:]
    sup_log = float(np.max(ratios))
    growing = _material_growth(list(ratios))
    holds = sup_log < math.log(cap) and not growing
    # slope of log tail vs log(1-r) over the deep half of the grid
    half = len(log_u) // 2
    beta = float(np.polyfit(log_u[half:], log_tails[half:], 1)[0])
    return DoublingVerdict(holds, _exp_clip(sup_log), beta)


def _decay_verdict(log_tails, t_bounds, delta):
    floor = math.log1p(delta)
    best = None
    for j in _K_LAGS:
        lag_ratios = log_tails[:-j] - log_tails[j:]
        inf_log = float(np.min(lag_ratios))
        holds = inf_log >= floor
        if holds:
            with np.errstate(over="ignore"):
                linear = np.exp(lag_ratios)
            if _declining(list(linear)):
                t_left = t_bounds[: len(lag_ratios)]
                limit = _projected_limit(list(t_left), list(linear))
                holds = limit >= 1.0 + delta
        half = len(lag_ratios) // 2
        gamma = float(np.mean(lag_ratios[half:])) / (j * _LN2)
        candidate = (holds, inf_log, 2 ** j, gamma)
        if best is None or (candidate[0], candidate[1]) > (best[0], best[1]):
            best = candidate
    holds, inf_log, lag, gamma = best
    return DecayVerdict(holds, lag, _exp_clip(inf_log), gamma)


def _regularity_verdict(log_ratio, t_bounds, cap):
    finite = np.isfinite(log_ratio)
    if not finite.all():
        # a vanishing density pins the band floor at zero
        top = float(np.max(log_ratio[finite])) if finite.any() else -math.inf
        return RegularityVerdict(False, 0.0, _exp_clip(top))
    lo, hi = float(np.min(log_ratio)), float(np.max(log_ratio))
    holds = hi - lo <= math.log(cap)
    with np.errstate(over="ignore"):
        linear = np.exp(log_ratio)
    if holds and _declining(list(linear)):
        limit = _projected_limit(list(t_bounds), list(linear))
        holds = limit > 0.0 and hi - math.log(limit) <= math.log(cap)
    return RegularityVerdict(holds, _exp_clip(lo), _exp_clip(hi))


def classify(w, grid, *, doubling_cap=1e6, delta=0.05, regularity_cap=100.0):
    """Classify a radial weight on a dyadic grid.

    Parameters
    ----------
    w : RadialWeight
        Weight whose tail drives all three verdicts.
    grid : RadialGrid
        Supplies the dyadic boundaries; must reach 1 - 2^-20 so the
        trend windows see genuinely deep behaviour.
    doubling_cap : float, optional
        Bound demanded of the tail halving ratio.
    delta : float, optional
        Decay ratios must stay at or above 1 + delta.
    regularity_cap : float, optional
        Largest admissible dynamic range max/min of the regularity
        ratio.

    Returns
    -------
    WeightClassReport
        Verdicts are always produced; none of the checks raises on
        unusual tail behaviour.

    Raises
    ------
    DomainError
        If the grid is too shallow for the verdicts to mean anything.
    """
    if not isinstance(w, RadialWeight):
        raise DomainError("classify needs a RadialWeight")
    if grid.cut < 1.0 - 2.0 ** -20:
        raise DomainError("grid must reach at least 1 - 2^-20")
    ell = np.arange(grid.levels + 1, dtype=float)
    bounds = grid.boundaries
    log_u = -ell * _LN2
    t_bounds = 1.0 + ell * _LN2
    log_tails = np.asarray(w.log_tails(bounds), dtype=float)

    dhat = _doubling_verdict(log_tails, log_u, doubling_cap)
    dcheck = _decay_verdict(log_tails, t_bounds, delta)

    log_ratio = np.asarray(w.log_density(bounds), dtype=float) + log_u - log_tails
    regular = _regularity_verdict(log_ratio, t_bounds, regularity_cap)
    if regular.holds and not (dhat.holds and dcheck.holds):
        # a band verdict cannot outvote the classes that contain it
        regular = RegularityVerdict(False, regular.ratio_min, regular.ratio_max)
    return WeightClassReport(dhat, dcheck, regular, grid)
