"""Panel quadrature on [0, 1) with dyadic refinement toward 1.

Radial integrands in this package are smooth on [0, 1) but may blow up,
vanish to high order, or change scale rapidly as r -> 1.  Uniform panels
miss that endpoint entirely, and truncating at any fixed cut silently
drops tail mass: a log-decaying suffix keeps roughly half its remaining
mass beyond every dyadic level.  The scheme here therefore always pairs
dyadic Gauss panels with an explicit tail model fitted near the cut.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, DomainError

__all__ = [
    "gauss_rule",
    "TailFit",
    "fit_tail",
    "integrate",
    "RadialGrid",
    "CumulativeTables",
]


@lru_cache(maxsize=64)
def gauss_rule(n):
    """Gauss-Legendre nodes and weights on [-1, 1], cached per node count."""
    if n < 1:
        raise DomainError(f"node count must be >= 1, got {n}")
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _gauss_panel(f, lo, hi, n):
    x, w = gauss_rule(n)
    half = 0.5 * (hi - lo)
    vals = np.asarray(f(0.5 * (lo + hi) + half * x), dtype=float)
    return float(np.dot(w, vals)) * half


@dataclass(frozen=True)
class TailFit:
    """Modelled mass of an integrand over [1 - u0, 1).

    value      estimated integral (may be inf when no convergent model fits)
    model      'power' (G ~ u^c), 'log-power' (G ~ t^-q, t = 1 - log u),
               'zero', or 'divergent'
    exponent   fitted exponent of the chosen model
    flagged    True when the fit is near its divergence boundary or the
               probes do not match either model well
    """

    value: float
    model: str
    exponent: float
    flagged: bool


def _ls_slope(xs, ys):
    # least-squares slope plus max absolute residual, 2 or 3 points
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    xm = xs - xs.mean()
    slope = float(np.dot(xm, ys) / np.dot(xm, xm))
    fit = ys.mean() + slope * xm
    return slope, float(np.max(np.abs(ys - fit)))


def fit_tail(f, u0, *, u_form=None):
    """Fit the suffix integral of f over [1 - u0, 1).

    Probes G(u) = u * f(1 - u) at three geometrically spaced u below u0 and
    fits both a pure power G ~ u^c and a log-power G ~ (1 - log u)^-q,
    picking the model with the smaller fit residual.  Substituting
    t = 1 - log u turns the suffix into the integral of G over [t0, inf),
    so either model integrates in closed form.  Exact for endpoint behavior
    (1-s)^a and 1/((1-s) log^q), the two regimes radial weights live in.

    u_form, when given, evaluates the integrand directly as a function of
    u = 1 - s; forming s = 1 - u in float64 costs up to 2^(53+log2 u)
    relative error in anything u-sensitive, so callers that can express
    their integrand in u should.  The integrand must be nonnegative near
    1; a negative probe raises DomainError.
    """
    if not 0.0 < u0 <= 0.5:
        raise DomainError(f"tail cut u0 must lie in (0, 0.5], got {u0}")
    if u_form is not None:
        # u-space probes never form 1 - u, so depth is not limited by the
        # float64 grid at 1; only keep clear of the subnormal floor
        spacing = 8.0
        if u0 < 1e-300:
            raise DomainError("tail cut below the float64 range")
    else:
        spacing = 8.0 if u0 >= 2.0 ** -44 else 2.0
        if u0 / spacing ** 2 < 2.0 ** -52:
            raise DomainError("tail cut too deep for float64 probes")
    us = u0 / spacing ** np.arange(3.0)
    raw = u_form(us) if u_form is not None else f(1.0 - us)
    gs = np.asarray(raw, dtype=float) * us
    if not np.all(np.isfinite(gs)):
        raise DomainError("tail probes returned non-finite values")
    if np.any(gs < 0.0):
        raise DomainError("tail fit requires a nonnegative integrand near 1")

    keep = gs > 0.0
    if not keep.any():
        return TailFit(0.0, "zero", math.inf, False)
    if keep.sum() == 1:
        # decay faster than the probe window resolves; remaining mass is
        # below the single positive probe times its t-width
        return TailFit(0.0, "zero", math.inf, True)
    us, gs = us[keep], gs[keep]

    ts = 1.0 - np.log(us)
    lg = np.log(gs)
    c, res_u = _ls_slope(np.log(us), lg)
    mq, res_t = _ls_slope(np.log(ts), lg)
    q = -mq
    g0, t0 = gs[0], ts[0]

    # the model that better explains the probes decides convergence;
    # ties go to log-power, the conservative (slower-decay) reading
    res, model, expo = min((res_t, "log-power", q), (res_u, "power", c))
    # the divergence margin must absorb probe noise: at deep cuts the
    # probes span a log-t window ~ 2 log(spacing) / t0, so a fitted
    # exponent carries noise far above float epsilon; 1e-6 still sits
    # orders of magnitude below any exponent these integrands produce
    if model == "power":
        if expo <= 1e-6:
            return TailFit(math.inf, "divergent", expo, True)
        value, near = g0 / expo, expo < 0.05
    else:
        if expo <= 1.0 + 1e-6:
            return TailFit(math.inf, "divergent", expo, True)
        value, near = g0 * t0 / (expo - 1.0), expo < 1.2
    return TailFit(value, model, expo, near or res > 1e-2)


# (depth, subdivisions) refinement ladder; depth 46 keeps the tail probes
# clear of the float64 resolution limit at 1; m strictly increases so no
# panel estimate is ever reused between stages (equal-m pairs would let
# unresolved oscillatory error agree with itself)
_STAGES = ((10, 1), (16, 2), (22, 3), (28, 4), (34, 5), (40, 6), (46, 8))
# u-space integrands have no resolution limit at 1, so the ladder may
# continue where slow log-decay needs the extra certification room
_STAGES_U = _STAGES + ((52, 10), (58, 12), (64, 14), (70, 16))


def _stage_estimate(f, a, b, depth, m, n, u_form=None):
    one_minus_a = 1.0 - a
    pieces = []
    if b == 1.0 and u_form is not None:
        # work entirely in u = 1-s: dyadic boundaries (1-a) 2^-k are exact
        # and no node placement ever touches the resolution limit at 1
        for k in range(depth):
            u_hi = one_minus_a * 2.0 ** -k
            step = 0.5 * u_hi / m
            for j in range(m):
                pieces.append(
                    _gauss_panel(u_form, 0.5 * u_hi + j * step,
                                 0.5 * u_hi + (j + 1) * step, n))
        tail = fit_tail(None, one_minus_a * 2.0 ** -depth, u_form=u_form)
        if math.isinf(tail.value):
            return math.inf
        pieces.append(tail.value)
        return math.fsum(pieces)
    if b == 1.0:
        bounds = [a] + [1.0 - one_minus_a * 2.0 ** -k for k in range(1, depth + 1)]
    else:
        bounds = [a]
        k = 1
        while True:
            c = 1.0 - one_minus_a * 2.0 ** -k
            if c >= b or k > depth:
                break
            bounds.append(c)
            k += 1
        bounds.append(b)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi <= lo:
            continue
        step = (hi - lo) / m
        for j in range(m):
            pieces.append(_gauss_panel(f, lo + j * step, lo + (j + 1) * step, n))
    if b == 1.0:
        tail = fit_tail(f, one_minus_a * 2.0 ** -depth)
        if math.isinf(tail.value):
            return math.inf
        pieces.append(tail.value)
    return math.fsum(pieces)


def integrate(f, a, b, *, tol=1e-10, nodes=16, u_form=None):
    """Integrate a vectorized f over [a, b], 0 <= a < b <= 1.

    f is only evaluated on the open interval, so a blow-up at b = 1 is fine
    as long as the integral converges; for b = 1 the integrand must be
    nonnegative near 1 (the tail model needs a sign).  A suffix judged
    divergent at every remaining depth is returned as inf; a divergence
    verdict at shallow depth alone is not trusted, because an integrand
    rising toward an unresolved interior peak looks divergent until the
    probes pass the peak.  Raises ConvergenceError, carrying the best
    estimate and the tolerance achieved, if the refinement ladder is
    exhausted before two successive stages agree to tol.

    When b = 1 a caller may pass u_form, the integrand as a function of
    u = 1 - s (f may then be None); this sidesteps the float64 resolution
    limit near 1 and is required for relative accuracy much below ~1e-8
    whenever the integrand carries mass at u < 2^-40.
    """
    if not 0.0 <= a < b <= 1.0:
        raise DomainError(f"bad interval [{a}, {b}]")
    if tol <= 0.0:
        raise DomainError("tol must be positive")
    if f is None and (u_form is None or b != 1.0):
        raise DomainError("need an s-form integrand unless u_form covers b=1")
    prev = None
    achieved = math.inf
    ladder = _STAGES if u_form is None or b != 1.0 else _STAGES_U
    for depth, m in ladder:
        est = _stage_estimate(f, a, b, depth, m, nodes, u_form)
        if prev is not None and not (math.isinf(est) or math.isinf(prev)):
            scale = max(abs(est), abs(prev), 1e-300)
            achieved = abs(est - prev) / scale
            if achieved <= tol:
                return est
        prev = est
    if math.isinf(prev):
        return prev
    raise ConvergenceError(
        f"refinement budget exhausted (achieved {achieved:.3e}, wanted {tol:.3e})",
        best=prev,
        achieved=achieved,
    )


@dataclass(frozen=True)
class RadialGrid:
    """Dyadic Gauss-Legendre grid on [0, 1 - 2^-levels].

    Panel ell covers [1 - 2^-ell, 1 - 2^-(ell+1)] for ell = 0..levels-1;
    boundaries has levels+1 entries ending at the cut.  One extra half
    panel beyond the cut is kept for tail control only and is not part of
    the main node set.
    """

    levels: int
    nodes_per_panel: int
    boundaries: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    extra_nodes: np.ndarray
    extra_weights: np.ndarray

    @classmethod
    def build(cls, levels=24, nodes_per_panel=16):
        if not 2 <= levels <= 40:
            raise DomainError(f"levels must be in [2, 40], got {levels}")
        if nodes_per_panel < 2:
            raise DomainError("need at least 2 nodes per panel")
        bounds = 1.0 - 2.0 ** -np.arange(levels + 1, dtype=float)
        x, w = gauss_rule(nodes_per_panel)
        los, his = bounds[:-1], bounds[1:]
        half = 0.5 * (his - los)
        nodes = (0.5 * (los + his)[:, None] + half[:, None] * x[None, :]).ravel()
        weights = (half[:, None] * w[None, :]).ravel()
        cut = bounds[-1]
        ehalf = 0.5 * (2.0 ** -levels - 2.0 ** -(levels + 1))
        emid = cut + ehalf
        extra_nodes = emid + ehalf * x
        extra_weights = ehalf * np.ones_like(x) * w
        for arr in (bounds, nodes, weights, extra_nodes, extra_weights):
            arr.setflags(write=False)
        return cls(levels, nodes_per_panel, bounds, nodes, weights,
                   extra_nodes, extra_weights)

    @property
    def cut(self):
        return float(self.boundaries[-1])

    def panel_of(self, r):
        """Index of the panel containing r, 0 <= r <= cut."""
        if not 0.0 <= r <= self.cut:
            raise DomainError(f"r={r} outside [0, {self.cut}]")
        k = int(np.searchsorted(self.boundaries, r, side="right")) - 1
        return min(k, self.levels - 1)


class CumulativeTables:
    """Prefix and suffix integrals of a nonnegative integrand on a grid.

    The suffix direction is the dangerous one twice over: mass beyond the
    grid cut is estimated by one extra half panel plus a fitted tail model
    (kept visible separately so callers can see what the model added), and
    deep suffixes sink far below eps * total, so they are accumulated from
    the right rather than formed as total - prefix, which would round them
    to subtraction noise.  prefix(r) + suffix(r) matches .total to
    rounding, not bitwise.
    """

    def __init__(self, f, grid, *, nonnegative=True):
        self._f = f
        self.grid = grid
        vals = np.asarray(f(grid.nodes), dtype=float)
        if vals.shape != grid.nodes.shape:
            raise DomainError("integrand must be vectorized over node arrays")
        if not np.all(np.isfinite(vals)):
            raise DomainError("integrand not finite on grid nodes")
        if nonnegative and np.any(vals < 0.0):
            raise DomainError("integrand must be nonnegative")
        contrib = vals * grid.weights
        per_panel = contrib.reshape(grid.levels, grid.nodes_per_panel)
        self.panel_sums = np.array([math.fsum(row) for row in per_panel])
        self.boundary_prefix = np.array(
            [math.fsum(self.panel_sums[:k]) for k in range(grid.levels + 1)]
        )
        # prefix just before each node plus half its own contribution;
        # quadrature-grade approximation of the integral up to that node
        self.node_prefix_mid = np.cumsum(contrib) - 0.5 * contrib

        evals = np.asarray(f(grid.extra_nodes), dtype=float)
        self.extra_panel = float(np.dot(evals, grid.extra_weights))
        fit = fit_tail(f, 2.0 ** -(grid.levels + 1))
        self.tail = fit.value
        self.tail_model = fit.model
        self.tail_exponent = fit.exponent
        self.tail_flagged = fit.flagged
        self.total = self.boundary_prefix[-1] + self.extra_panel + self.tail

        beyond = self.extra_panel + self.tail
        self.boundary_suffix = np.array(
            [math.fsum(self.panel_sums[k:]) + beyond
             for k in range(grid.levels + 1)]
        )
        self.node_suffix_mid = (
            np.cumsum(contrib[::-1])[::-1] - 0.5 * contrib + beyond)

    def prefix(self, r):
        """Integral over [0, r], r in [0, cut]."""
        grid = self.grid
        if not 0.0 <= r <= grid.cut:
            raise DomainError(f"r={r} outside [0, {grid.cut}]")
        k = int(np.searchsorted(grid.boundaries, r, side="right")) - 1
        if k >= 0 and grid.boundaries[min(k, grid.levels)] == r:
            return float(self.boundary_prefix[min(k, grid.levels)])
        part = _gauss_panel(self._f, float(grid.boundaries[k]), r,
                            grid.nodes_per_panel)
        return float(self.boundary_prefix[k]) + part

    def prefixes(self, r):
        """Vectorized prefix; one integrand call covers all partial panels."""
        grid = self.grid
        arr = np.asarray(r, dtype=float)
        flat = arr.ravel()
        if flat.size and (np.min(flat) < 0.0 or np.max(flat) > grid.cut):
            raise DomainError(f"radii outside [0, {grid.cut}]")
        k = np.minimum(np.searchsorted(grid.boundaries, flat, side="right") - 1,
                       grid.levels)
        out = self.boundary_prefix[k].copy()
        lo = grid.boundaries[k]
        part = flat != lo
        if np.any(part):
            x, w = gauss_rule(grid.nodes_per_panel)
            half = 0.5 * (flat[part] - lo[part])
            mid = 0.5 * (flat[part] + lo[part])
            pts = mid[:, None] + half[:, None] * x[None, :]
            vals = np.asarray(self._f(pts.ravel()), dtype=float)
            out[part] += (vals.reshape(pts.shape) @ w) * half
        return out.reshape(arr.shape)

    def suffix(self, r):
        """Integral over [r, 1), including modelled tail mass."""
        grid = self.grid
        if not 0.0 <= r <= grid.cut:
            raise DomainError(f"r={r} outside [0, {grid.cut}]")
        k = int(np.searchsorted(grid.boundaries, r, side="right")) - 1
        if k >= 0 and grid.boundaries[min(k, grid.levels)] == r:
            return float(self.boundary_suffix[min(k, grid.levels)])
        hi = float(grid.boundaries[k + 1])
        part = _gauss_panel(self._f, r, hi, grid.nodes_per_panel)
        return part + float(self.boundary_suffix[k + 1])
