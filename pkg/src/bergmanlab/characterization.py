"""Characterizing constants for boundedness of the maximal projection.

Everything here is a functional of a weight triple (omega, nu, eta) and
an exponent p: the source space is the p-norm against nu, the target is
the p-norm against eta, and the projection is generated by omega's
kernel.  Two suprema decide boundedness:

* M_p: the product Phi(r)^(1/p) Psi(r)^(1/p') built from the prefix
  integral Phi(r) = int_0^r eta / omegahat^p and the suffix integral
  Psi(r) = int_r^1 (omega / nu^(1/p))^(p'),
* N_p: etahat(r)^(1/p) Psi(r)^(1/p') / omegahat(r), the weak-type
  variant with the same suffix factor.

Both are reported as traces over a dyadic grid with a three-way verdict
(finite / diverging / inconclusive).  The verdict is a grid convention,
not a theorem: a supremum over all r < 1 cannot be evaluated, so the
trace watches the last five dyadic levels.  Strict growth by a total
factor above 2 is divergence; strict growth below that still counts
when the increments refuse to decay geometrically (slow log-type
divergence produces increment ratios near 1, while every convergent
trace in this domain decays with ratios well under 0.85); otherwise a
final-level move under 1% is convergence and anything else is
inconclusive.

The remaining operations are the comparison prefix J_omega, the
prefix-vs-tail hypothesis ratio, the p = 1 sup (a remark-level path
with its own verdict), the test-function lower bound for necessity,
and the capped test functions themselves.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .quadrature import CumulativeTables, integrate
from .weights import RadialWeight

__all__ = [
    "TripleConfig",
    "ConstantTrace",
    "HypothesisReport",
    "P1Report",
    "LowerBoundReport",
    "J_omega",
    "Mp_constant",
    "Np_constant",
    "hypothesis_ratio",
    "p1_constant",
    "p1_value",
    "necessity_lower_bound",
    "test_function",
]

# trace radii this close to 1 lose all relative accuracy in 1 - r
_RADIUS_CAP = 1.0 - 2.0 ** -25

_WINDOW = 5
_DIVERGENCE_FACTOR = 2.0
_SLOW_GROWTH = 0.005
_SLOW_RATIO = 0.85
_SETTLED_CHANGE = 0.01


@dataclass(frozen=True)
class TripleConfig:
    """A weight triple with its exponent pair.

    p = 1 is allowed only for the remark-level path; every Theorem-level
    operation requires 1 < p < inf.
    """

    omega: RadialWeight
    nu: RadialWeight
    eta: RadialWeight
    p: float

    def __post_init__(self):
        for name in ("omega", "nu", "eta"):
            if not isinstance(getattr(self, name), RadialWeight):
                raise DomainError(f"{name} must be a RadialWeight")
        p = self.p
        if not (np.isfinite(p) and p >= 1.0):
            raise DomainError(f"exponent must satisfy 1 <= p < inf, got {p}")
        object.__setattr__(self, "p", float(p))
        if p > 1.0 and abs(1.0 / p + 1.0 / self.p_conjugate - 1.0) > 8e-16:
            raise DomainError("conjugate exponent identity failed")

    @property
    def p_conjugate(self):
        return math.inf if self.p == 1.0 else self.p / (self.p - 1.0)


def _require_theorem_exponent(cfg):
    if not cfg.p > 1.0:
        raise DomainError("this operation requires 1 < p < inf")


def _require_positive_tails(cfg, grid):
    cut = grid.cut
    for name in ("omega", "nu", "eta"):
        w = getattr(cfg, name)
        if not np.isfinite(float(w.log_tails(cut)[0])):
            raise DomainError(f"{name} has no mass beyond the grid cut")


def _log_density_checked(w, arr):
    return np.asarray(w.log_density(arr), dtype=float)


def _phi_density(cfg):
    """t -> eta(t) / omegahat(t)^p, vectorized, in log space."""

    def f(t):
        arr = np.atleast_1d(np.asarray(t, dtype=float))
        le = _log_density_checked(cfg.eta, arr)
        lw = np.asarray(cfg.omega.log_tails(arr), dtype=float)
        with np.errstate(over="ignore"):
            out = np.exp(le - cfg.p * lw)
        return out if np.ndim(t) else float(out[0])

    return f


def _psi_density(cfg):
    """t -> (omega(t) / nu(t)^(1/p))^(p'), vectorized, in log space.

    nu may vanish only where omega vanishes; anywhere else the source
    norm cannot control the projection and the configuration is

    rejected.
    """

    def f(t):
        arr = np.atleast_1d(np.asarray(t, dtype=float))
        lw = _log_density_checked(cfg.omega, arr)
        lv = _log_density_checked(cfg.nu, arr)
        alive = lw > -math.inf
        if np.any(alive & (lv == -math.inf)):
            raise DomainError(
                "nu vanishes where omega is positive; the source norm "
                "cannot see the kernel there")
        out = np.zeros_like(arr)
        with np.errstate(over="ignore"):
            out[alive] = np.exp(
                cfg.p_conjugate * (lw[alive] - lv[alive] / cfg.p))
        return out if np.ndim(t) else float(out[0])

    return f


def _density_table(w, grid):
    def f(t):
        arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.exp(_log_density_checked(w, arr))
        return out if np.ndim(t) else float(out[0])

    return CumulativeTables(f, grid)


def _verdict(window):
    """Three-way verdict from the last dyadic-boundary samples."""
    window = np.asarray(window, dtype=float)
    if np.any(np.isnan(window)):
        return "inconclusive"
    if np.any(np.isinf(window)):
        return "diverging"
    increasing = bool(np.all(np.diff(window) > 0.0))
    if increasing and window[0] > 0.0:
        factor = window[-1] / window[0]
        if factor > _DIVERGENCE_FACTOR:
            return "diverging"
        inc = np.diff(window)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = inc[1:] / inc[:-1]
        if factor > 1.0 + _SLOW_GROWTH and np.all(ratios >= _SLOW_RATIO):
            return "diverging"
    scale = abs(window[-2])
    if scale > 0.0 and abs(window[-1] - window[-2]) / scale < _SETTLED_CHANGE:
        return "finite"
    return "inconclusive"


@dataclass(frozen=True)
class ConstantTrace:
    """Per-radius characterizing quantities over one grid.

    radii are the grid's dyadic panel boundaries, where prefix and
    suffix integrals are exact panel sums rather than interpolated
    values; the reported sups therefore track the true sups from below
    at quadrature accuracy.  The verdict judges the column named by
    ``quantity`` on the last dyadic levels.
    """

    radii: np.ndarray
    Phi: np.ndarray
    Psi: np.ndarray
    m: np.ndarray
    n: np.ndarray
    Mp_sup: float
    Np_sup: float
    Mp_radius: float
    Np_radius: float
    verdict: str
    quantity: str


def _build_trace(cfg, grid, quantity):
    _require_theorem_exponent(cfg)
    _require_positive_tails(cfg, grid)
    p, pc = cfg.p, cfg.p_conjugate
    phi_tab = CumulativeTables(_phi_density(cfg), grid)
    psi_tab = CumulativeTables(_psi_density(cfg), grid)
    eta_tab = _density_table(cfg.eta, grid)

    radii = grid.boundaries.copy()
    phi = phi_tab.boundary_prefix.copy()
    psi = psi_tab.boundary_suffix.copy()
    etahat = eta_tab.boundary_suffix
    lw = np.asarray(cfg.omega.log_tails(radii), dtype=float)

    with np.errstate(over="ignore", invalid="ignore"):
        m = phi ** (1.0 / p) * psi ** (1.0 / pc)
        n = etahat ** (1.0 / p) * psi ** (1.0 / pc) * np.exp(-lw)

    m_arg = int(np.argmax(m))
    n_arg = int(np.argmax(n))
    window = m[-_WINDOW:] if quantity == "m" else n[-_WINDOW:]
    for arr in (radii, phi, psi, m, n):
        arr.setflags(write=False)
    return ConstantTrace(
        radii, phi, psi, m, n,
        float(m[m_arg]), float(n[n_arg]),
        float(radii[m_arg]), float(radii[n_arg]),
        _verdict(window), quantity)


def Mp_constant(cfg, grid):
    """Trace of the strong-type constant; verdict follows the m column."""
    return _build_trace(cfg, grid, "m")


def Np_constant(cfg, grid):
    """Trace of the weak-type constant; verdict follows the n column."""
    return _build_trace(cfg, grid, "n")


@dataclass(frozen=True)
class HypothesisReport:
    """Prefix-vs-tail comparison Phi(r) omegahat(r)^p / etahat(r)."""

    radii: np.ndarray
    values: np.ndarray
    sup: float
    sup_radius: float
    verdict: str

    @property
    def holds(self):
        return self.verdict == "finite"


def hypothesis_ratio(cfg, grid):
    """Ratio trace deciding whether the prefix obeys the tail bound.

    The bounded verdict uses the same window rule as the constants:
    a ratio that keeps growing without geometric decay of increments
    fails the hypothesis.
    """
    _require_theorem_exponent(cfg)
    _require_positive_tails(cfg, grid)
    phi_tab = CumulativeTables(_phi_density(cfg), grid)
    eta_tab = _density_table(cfg.eta, grid)
    radii = grid.boundaries.copy()
    lw = np.asarray(cfg.omega.log_tails(radii), dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        vals = phi_tab.boundary_prefix * np.exp(
            cfg.p * lw - np.log(eta_tab.boundary_suffix))
    arg = int(np.argmax(vals))
    for arr in (radii, vals):
        arr.setflags(write=False)
    return HypothesisReport(radii, vals, float(vals[arg]),
                            float(radii[arg]), _verdict(vals[-_WINDOW:]))


@dataclass(frozen=True)
class P1Report:
    """The p = 1 sup (omega/nu)(r) * int_0^1 eta(t)/omegahat(tr) dt.

    A remark-level quantity: the mainline theorems assume p > 1, so the
    report carries its own level tag.
    """

    radii: np.ndarray
    values: np.ndarray
    sup: float
    sup_radius: float
    verdict: str
    level: str = "remark"

    @property
    def bounded(self):
        return self.verdict == "finite"


def p1_value(cfg, r, *, tol=1e-9):
    """The p = 1 quantity (omega/nu)(r) * int_0^1 eta(t)/omegahat(tr) dt."""
    if cfg.p != 1.0:
        raise DomainError("the p = 1 path requires p exactly 1")
    if not 0.0 <= r < 1.0:
        raise DomainError(f"radius {r} outside [0, 1)")
    omega, nu, eta = cfg.omega, cfg.nu, cfg.eta
    lw = float(omega.log_density(r))
    lv = float(nu.log_density(r))
    if lw > -math.inf and lv == -math.inf:
        raise DomainError("nu vanishes where omega is positive")
    if lw == -math.inf:
        return 0.0

    def u_form(u):
        s = np.asarray(u, dtype=float)
        tails = np.asarray(omega.tails(r * (1.0 - s)), dtype=float)
        return np.asarray(eta._density_u(s), dtype=float) / tails

    inner = integrate(None, 0.0, 1.0, tol=tol, u_form=u_form)
    return math.exp(lw - lv) * inner


def p1_constant(cfg, grid, *, tol=1e-9):
    """Evaluate the p = 1 quantity at the grid's dyadic boundaries."""
    if cfg.p != 1.0:
        raise DomainError("the p = 1 path requires p exactly 1")
    _require_positive_tails(cfg, grid)
    vals = np.array([p1_value(cfg, float(r), tol=tol)
                     for r in grid.boundaries])
    arg = int(np.argmax(vals))
    vals.setflags(write=False)
    return P1Report(grid.boundaries, vals, float(vals[arg]),
                    float(grid.boundaries[arg]), _verdict(vals[-_WINDOW:]))


def J_omega(w, s, *, tol=1e-10):
    """Comparison prefix J(s) = int_0^s dt / (omegahat(t)(1-t))."""
    if not isinstance(w, RadialWeight):
        raise DomainError("J_omega needs a RadialWeight")
    if not 0.0 <= s < _RADIUS_CAP:
        raise DomainError(f"radius {s} outside [0, 1 - 2^-25)")
    if s == 0.0:
        return 0.0

    def f(t):
        arr = np.atleast_1d(np.asarray(t, dtype=float))
        lw = np.asarray(w.log_tails(arr), dtype=float)
        out = np.exp(-lw - np.log1p(-arr))
        return out if np.ndim(t) else float(out[0])

    return float(integrate(f, 0.0, s, tol=tol))


@dataclass(frozen=True)
class LowerBoundReport:
    """Test-function lower bound over splitting radii on one grid."""

    radii: np.ndarray
    values: np.ndarray
    sup: float
    sup_radius: float


def necessity_lower_bound(cfg, grid):
    """LB(t) = (int_0^t eta (J+1)^p r dr)^(1/p) (int_t^1 psi s ds)^(1/p').

    Both integrals carry the area-measure factor; the constants in
    Mp_constant deliberately do not, and reports keep the two forms
    separate rather than asserting any constant between them.
    """
    _require_theorem_exponent(cfg)
    _require_positive_tails(cfg, grid)
    p, pc = cfg.p, cfg.p_conjugate
    j_tab = CumulativeTables(_j_density(cfg.omega), grid)
    psi = _psi_density(cfg)

    cut = grid.cut

    def first_density(t):
        arr = np.atleast_1d(np.asarray(t, dtype=float))
        # beyond-cut evaluations only feed this table's unused tail model;
        # freeze J at its cut value there instead of extrapolating
        j_vals = np.array(
            [j_tab.prefix(min(float(v), cut)) for v in arr])
        le = _log_density_checked(cfg.eta, arr)
        out = np.exp(le) * (j_vals + 1.0) ** p * arr
        return out if np.ndim(t) else float(out[0])

    def second_density(t):
        arr = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.asarray(psi(arr), dtype=float) * arr
        return out if np.ndim(t) else float(out[0])

    first = CumulativeTables(first_density, grid)
    second = CumulativeTables(second_density, grid)
    with np.errstate(invalid="ignore"):
        vals = (first.boundary_prefix ** (1.0 / p)
                * second.boundary_suffix ** (1.0 / pc))
    arg = int(np.argmax(vals))
    vals.setflags(write=False)
    return LowerBoundReport(grid.boundaries, vals, float(vals[arg]),
                            float(grid.boundaries[arg]))


def _j_density(w):
    def f(t):
        arr = np.atleast_1d(np.asarray(t, dtype=float))
        lw = np.asarray(w.log_tails(arr), dtype=float)
        out = np.exp(-lw - np.log1p(-arr))
        return out if np.ndim(t) else float(out[0])

    return f


def test_function(cfg, n, t, grid):
    """Samples of the capped ratio function on the grid nodes.

    Zero below the splitting radius t; min(n, (omega/nu)^(1/(p-1)))
    from t outward.  The cap keeps the function in the source space
    whatever the ratio does near the boundary.
    """
    _require_theorem_exponent(cfg)
    if isinstance(n, bool) or not (isinstance(n, (int, np.integer)) and n >= 1):
        raise DomainError(f"cap must be a positive integer, got {n}")
    if not 0.0 <= t < 1.0:
        raise DomainError(f"splitting radius {t} outside [0, 1)")
    r = grid.nodes
    lw = _log_density_checked(cfg.omega, r)
    lv = _log_density_checked(cfg.nu, r)
    if np.any((lw > -math.inf) & (lv == -math.inf)):
        raise DomainError("nu vanishes where omega is positive")
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = np.exp((lw - lv) / (cfg.p - 1.0))
    ratio = np.where(lw == -math.inf, 0.0, ratio)
    vals = np.where(r < t, 0.0, np.minimum(float(n), ratio))
    vals.setflags(write=False)
    return vals
