"""Reproducing kernels of radial weights: series, circle means, norms.

The kernel of a radial weight has the one-variable series form
B(z, zeta) = sum a_n (conj(z) zeta)^n with a_n = 1/(2 omega_{2n+1}), so
everything here reduces to coefficient sequences and functions of the
single product x = |z zeta|.  Three layers:

* ``KernelEvaluator`` owns the coefficient cache.  Standard weights use
  the exact ratio recurrence a_{n+1}/a_n = (n+alpha+2)/(n+1); all other
  families get odd moments in bulk from a fixed 56-level dyadic grid in
  u = 1-s (nodes stay exact where s-space flats out at float64
  resolution), with a bracketed correction for the mass beyond the grid.
* ``circle_mean`` averages |B|^p over a circle by uniform angular
  sampling evaluated with an FFT.  The node count starts at the series
  length (fewer angles would alias the polynomial values) and doubles
  until the mean stabilizes; for p = 2 the first doubling is already
  exact and a separate coefficient-sum route cross-checks it.
* ``MeanTable`` interpolates log phi_p on dyadic Chebyshev panels in
  u = 1-x up to a cap, and beyond the cap extrapolates through the
  comparison integral G_p(x) = int_0^x dt/(omegahat(t)(1-t))^p: the
  ratio phi_p^p/G_p is fitted affinely in u on the deepest panel, which
  captures the limit and its first-order correction.

Series truncation targets a tail below tol * (1-x) * S where S is the
running positive-coefficient sum: the circle mean spans a dynamic range
of order 1/(1-x)^2 between the near and far sides of the circle, so a
tail small relative to S alone would still pollute the mean.  Weights
whose tail-halving ratio is unbounded get a hard cap of 2^16 terms and
an accuracy flag (their coefficients grow faster than any polynomial
and the geometric tail bound loses its safety margin); bounded-ratio
weights may spend up to 2^22 terms.
"""

import math
from dataclasses import dataclass

import numpy as np

from .classify import classify
from .errors import ConvergenceError, DomainError
from .quadrature import CumulativeTables, RadialGrid, gauss_rule
from .weights import RadialWeight, StandardWeight

__all__ = [
    "KernelEvaluator",
    "MeanTable",
    "RatioSweep",
    "kernel_norm",
    "theoremA_ratio_sweep",
]

# arguments beyond this make the series cost diverge; means continue by
# comparison-integral extrapolation instead
SERIES_CAP = 1.0 - 2.0 ** -30

_N_CAP_DOUBLING = 2 ** 22
_N_CAP_FLAGGED = 2 ** 16
_ANGLE_CAP = 2 ** 21
_MEAN_RTOL = 1e-9

# fixed bulk-moment grid: dyadic panels in u = 1-s
_BATCH_LEVELS = 56
_BATCH_NODES = 24
_batch_grid_cache = []


def _batch_grid():
    if not _batch_grid_cache:
        x, w = gauss_rule(_BATCH_NODES)
        his = 2.0 ** -np.arange(_BATCH_LEVELS, dtype=float)
        los = 0.5 * his
        mid = 0.5 * (los + his)
        half = 0.5 * (his - los)
        u = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        uw = (half[:, None] * w[None, :]).ravel()
        lg = np.log1p(-u)
        for arr in (u, uw, lg):
            arr.setflags(write=False)
        _batch_grid_cache.append((u, uw, lg))
    return _batch_grid_cache[0]


class KernelEvaluator:
    """Coefficient cache and series evaluation for one weight's kernel.

    Parameters
    ----------
    weight : RadialWeight
        The weight whose odd moments define the coefficients.
    tail_tolerance : float, optional
        Relative series cut; the geometric tail bound must fall below
        ``tail_tolerance * (1-x)`` times the running sum.
    in_doubling : bool, optional
        Whether the weight has bounded tail-halving ratios.  Probed on
        a 20-level grid when omitted; determines the term budget and
        the accuracy flag.
    """

    def __init__(self, weight, *, tail_tolerance=1e-12, in_doubling=None):
        if not isinstance(weight, RadialWeight):
            raise DomainError("KernelEvaluator needs a RadialWeight")
        if not 0.0 < tail_tolerance < 1e-3:
            raise DomainError("tail_tolerance must lie in (0, 1e-3)")
        self.weight = weight
        self.tail_tolerance = float(tail_tolerance)
        if in_doubling is None:
            probe = classify(weight, RadialGrid.build(levels=20, nodes_per_panel=2))
            in_doubling = probe.in_Dhat.holds
        self.in_doubling = bool(in_doubling)
        self.flagged = not self.in_doubling
        self.n_cap = _N_CAP_DOUBLING if self.in_doubling else _N_CAP_FLAGGED
        self._coeff_cache = np.empty(0)

    @property
    def coeffs(self):
        """Read-only view of the coefficients computed so far."""
        view = self._coeff_cache[:]
        view.setflags(write=False)
        return view

    def _extend(self, n):
        have = len(self._coeff_cache)
        if n <= have:
            return
        n = min(max(n, 2 * have, 256), self.n_cap)
        w = self.weight
        if isinstance(w, StandardWeight):
            # a_{k+1}/a_k = (k+alpha+2)/(k+1), a_0 = 1
            k = np.arange(n, dtype=float)
            ratios = (k + w.alpha + 1.0) / k.clip(min=1.0)
            ratios[0] = 1.0
            coeffs = np.cumprod(ratios)
        else:
            coeffs = np.empty(n)
            coeffs[:have] = self._coeff_cache
            moments = _odd_moment_batch(w, have, n)
            # moments that underflow give inf coefficients; the series
            # machinery treats those as a budget failure, not a value
            with np.errstate(divide="ignore", over="ignore"):
                coeffs[have:] = 0.5 / moments
        coeffs.setflags(write=False)
        self._coeff_cache = coeffs

    def coefficients(self, n):
        """First n coefficients a_0 .. a_{n-1}."""
        if n > self.n_cap:
            raise ConvergenceError(
                f"kernel needs {n} coefficients, cap is {self.n_cap}",
                best=None,
                achieved=math.inf,
            )
        self._extend(n)
        return self._coeff_cache[:n]

    def _series_length(self, x):
        """Terms needed at argument x, by the geometric tail bound."""
        if not 0.0 <= x <= SERIES_CAP:
            raise DomainError(f"series argument {x} outside [0, 1 - 2^-30]")
        if x == 0.0:
            return 1
        target = self.tail_tolerance * (1.0 - x)
        log_x = math.log(x)
        n = 0
        total = 0.0
        while n < self.n_cap:
            hi = min(max(256, 2 * n), self.n_cap)
            coeffs = self.coefficients(hi)
            with np.errstate(over="ignore"):
                block = coeffs[n:hi] * np.exp(np.arange(n, hi) * log_x)
            if not np.all(np.isfinite(block)):
                break
            total += float(np.sum(block))
            t_last, t_prev = float(block[-1]), float(block[-2])
            if t_last == 0.0:
                return hi
            q = t_last / t_prev
            if q < 1.0 and t_last * q / (1.0 - q) <= target * total:
                return hi
            n = hi
        raise ConvergenceError(
            f"kernel series not convergent under cap: x={x:.17g}, terms={n}",
            best=total if n else None,
            achieved=math.inf,
        )

    def kernel_eval(self, z, zeta):
        """Kernel value B(z, zeta) by compensated series summation."""
        y = complex(np.conj(complex(z)) * complex(zeta))
        ay = abs(y)
        if ay > SERIES_CAP:
            raise DomainError(f"|z zeta| = {ay} beyond the series cap")
        n = self._series_length(ay)
        coeffs = self.coefficients(n)
        total = 0j
        comp = 0j
        power = 1.0 + 0j
        for k in range(n):
            term = coeffs[k] * power - comp
            t = total + term
            comp = (t - total) - term
            total = t
            power *= y
        return total

    def _scaled_coefficients(self, x, n):
        coeffs = self.coefficients(n)
        with np.errstate(over="ignore"):
            return coeffs * np.exp(np.arange(n) * math.log(x))

    def circle_mean(self, p, x):
        """phi_p(x): the p-mean of |B| over a circle of argument x.

        Uniform angles evaluated by FFT, starting at the first power of
        two above the series length (the polynomial values would alias
        on fewer nodes) and doubling until the mean moves by less than
        1e-9 relatively.
        """
        if not (np.isfinite(p) and p > 0.0):
            raise DomainError("mean exponent p must be positive")
        if not 0.0 <= x <= SERIES_CAP:
            raise DomainError(f"mean argument {x} outside [0, 1 - 2^-30]")
        n = self._series_length(x)
        if x == 0.0:
            return float(self.coefficients(1)[0])
        c = self._scaled_coefficients(x, n)
        m = 64
        while m < n + 1:
            m *= 2
        prev = None
        while m <= _ANGLE_CAP:
            g = np.fft.rfft(c, n=m)
            mag = np.abs(g) ** p
            # even symmetry: interior bins count twice
            mean_p = (mag[0] + mag[-1] + 2.0 * np.sum(mag[1:-1])) / m
            if prev is not None and abs(mean_p - prev) <= _MEAN_RTOL * mean_p:
                return float(mean_p ** (1.0 / p))
            prev = mean_p
            m *= 2
        raise ConvergenceError(
            f"circle mean not converged: x={x:.17g}, angles={_ANGLE_CAP}",
            best=None if prev is None else float(prev ** (1.0 / p)),
            achieved=math.inf,
        )

    def mean_p2_exact(self, x):
        """phi_2(x) by the coefficient sum, independent of any angles."""
        if not 0.0 <= x <= SERIES_CAP:
            raise DomainError(f"mean argument {x} outside [0, 1 - 2^-30]")
        if x == 0.0:
            return float(self.coefficients(1)[0])
        n = self._series_length(x)
        c = self._scaled_coefficients(x, n)
        return float(math.sqrt(np.sum(c * c)))


def _kink_grid(bks):
    """Batch grid whose panel edges include the kink points 1 - r."""
    u_cut = 2.0 ** -_BATCH_LEVELS
    edges = 2.0 ** -np.arange(_BATCH_LEVELS + 1, dtype=float)
    uk = 1.0 - np.asarray(bks, dtype=float)
    edges = np.unique(np.concatenate((edges, uk[uk > u_cut])))
    x, wts = gauss_rule(_BATCH_NODES)
    los, his = edges[:-1], edges[1:]
    mid = 0.5 * (los + his)
    half = 0.5 * (his - los)
    u = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    uw = (half[:, None] * wts[None, :]).ravel()
    return u, uw, np.log1p(-u)


def _odd_moment_batch(w, lo, hi):
    """omega_{2n+1} for n in [lo, hi) on the fixed deep grid."""
    bks = getattr(w, "breakpoints", ())
    u, uw, lg = _kink_grid(bks) if len(bks) else _batch_grid()
    base = uw * np.asarray(w._density_u(u), dtype=float)
    if not np.all(np.isfinite(base)):
        raise DomainError("weight density not finite on the moment grid")
    u_cut = 2.0 ** -_BATCH_LEVELS
    tail_cut = float(w._tail_u(np.asarray(u_cut)))
    lg_cut = math.log1p(-u_cut)
    out = np.empty(hi - lo)
    xs = 2.0 * np.arange(lo, hi, dtype=float) + 1.0
    block = 2048
    for start in range(0, len(xs), block):
        xb = xs[start : start + block]
        powers = np.exp(lg[:, None] * xb[None, :])
        vals = base @ powers
        # mass beyond the grid, bracketed between s_cut^x and 1
        vals += 0.5 * (1.0 + np.exp(xb * lg_cut)) * tail_cut
        out[start : start + len(xb)] = vals
    return out


def _log_comparison_density(w, p):
    """Vectorized s -> (omegahat(s)(1-s))^-p in log space."""

    def f(s):
        arr = np.atleast_1d(np.asarray(s, dtype=float))
        lt = np.asarray(w.log_tails(arr), dtype=float)
        # overflow to inf is meaningful: tails decaying faster than any
        # power make G_p exceed float range, and callers handle that
        with np.errstate(over="ignore"):
            out = np.exp(-p * (lt + np.log1p(-arr)))
        return out if np.ndim(s) else float(out[0])

    return f


def comparison_prefix(w, p, *, levels=30, nodes=16):
    """Prefix table of G_p(x) = int_0^x dt/(omegahat(t)(1-t))^p."""
    grid = RadialGrid.build(levels=levels, nodes_per_panel=nodes)
    return CumulativeTables(_log_comparison_density(w, p), grid)


@dataclass(frozen=True)
class MeanTable:
    """Panelized circle means phi_p as a function of x = |z zeta|.

    ``x`` and ``values`` hold the interpolation nodes and their means;
    between nodes the table interpolates log phi_p by Chebyshev panels
    in u = 1-x.  Beyond ``cap_x`` it returns the affine-in-u ratio fit
    times the comparison integral G_p.
    """

    p: float
    cap_x: float
    x: np.ndarray
    values: np.ndarray
    _panels: tuple
    _ratio_fit: tuple
    _gp: CumulativeTables

    @classmethod
    def build(cls, kernel, p, *, cap_level=12, panel_nodes=16):
        """Tabulate means of ``kernel`` for exponent p up to 1 - 2^-cap_level."""
        if not (np.isfinite(p) and p > 0.0):
            raise DomainError("mean exponent p must be positive")
        if not 2 <= cap_level <= 29:
            raise DomainError("cap_level must lie in [2, 29]")
        if panel_nodes < 4:
            raise DomainError("need at least 4 nodes per panel")
        deg = panel_nodes - 1
        cheb_t = np.cos(np.pi * np.arange(panel_nodes) / deg)
        panels = []
        xs, vals = [], []
        for k in range(cap_level):
            hi = 2.0 ** -k
            lo = 0.5 * hi
            u_nodes = 0.5 * (lo + hi) + 0.5 * (hi - lo) * cheb_t
            x_nodes = 1.0 - u_nodes
            if p == 2.0:
                phi = np.array([kernel.mean_p2_exact(float(v)) for v in x_nodes])
            else:
                phi = np.array([kernel.circle_mean(p, float(v)) for v in x_nodes])
            coeff = np.polynomial.chebyshev.chebfit(cheb_t, np.log(phi), deg)
            panels.append((lo, hi, coeff))
            xs.append(x_nodes)
            vals.append(phi)
        try:
            gp = comparison_prefix(kernel.weight, p)
        except (DomainError, OverflowError):
            # comparison integrand overflew (tails decay faster than any
            # power); the table then has no extrapolation beyond the cap
            gp = None
        if gp is None:
            intercept = slope = math.nan
        else:
            deep_u = 1.0 - xs[-1]
            deep_g = np.array([gp.prefix(float(v)) for v in xs[-1]])
            ratio = vals[-1] ** p / deep_g
            slope, intercept = np.polyfit(deep_u, ratio, 1)
        x_all = np.concatenate(xs)
        v_all = np.concatenate(vals)
        # panel endpoints are shared between neighbors; keep each once
        x_all, keep = np.unique(x_all, return_index=True)
        v_all = v_all[keep]
        for arr in (x_all, v_all):
            arr.setflags(write=False)
        return cls(float(p), 1.0 - 2.0 ** -cap_level, x_all, v_all,
                   tuple(panels), (float(intercept), float(slope)), gp)

    def evaluate(self, x):
        """phi_p at scalar or array arguments in [0, 1 - 2^-30]."""
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(arr < 0.0) or np.any(arr > SERIES_CAP):
            raise DomainError("mean argument outside [0, 1 - 2^-30]")
        out = np.empty_like(arr)
        u = 1.0 - arr
        inside = arr <= self.cap_x
        if np.any(inside):
            ui = u[inside]
            res = np.empty_like(ui)
            with np.errstate(divide="ignore"):
                idx = np.clip(-np.log2(ui).astype(int), 0, len(self._panels) - 1)
            for k in np.unique(idx):
                lo, hi, coeff = self._panels[k]
                sel = idx == k
                t = (ui[sel] - 0.5 * (lo + hi)) / (0.5 * (hi - lo))
                res[sel] = np.exp(np.polynomial.chebyshev.chebval(t, coeff))
            out[inside] = res
        if np.any(~inside):
            if self._gp is None:
                raise DomainError(
                    "argument beyond the table cap and this weight has no "
                    "comparison-integral extrapolation")
            a, b = self._ratio_fit
            g = self._gp.prefixes(arr[~inside])
            out[~inside] = ((a + b * u[~inside]) * g) ** (1.0 / self.p)
        return float(out[0]) if np.ndim(x) == 0 else out


def kernel_norm(kernel, nu, p, a, *, table=None, tol=1e-8):
    """Norm of the kernel at point a in the p-space weighted by nu.

    Radial reduction: (2 int_0^1 phi_p(a s)^p nu(s) s ds)^(1/p).
    """
    from .quadrature import integrate

    if not isinstance(nu, RadialWeight):
        raise DomainError("kernel_norm needs a RadialWeight for nu")
    if not (np.isfinite(p) and p > 0.0):
        raise DomainError("norm exponent p must be positive")
    if not 0.0 <= a <= 1.0 - 2.0 ** -25:
        raise DomainError(f"kernel point {a} outside [0, 1 - 2^-25]")
    if table is None:
        depth = 4 if a == 0.0 else int(math.ceil(-math.log2(1.0 - a))) + 1
        table = MeanTable.build(kernel, p, cap_level=min(12, max(4, depth)))

    def u_form(uu):
        s = 1.0 - uu
        return table.evaluate(a * s) ** p * nu._density_u(uu) * s

    val = integrate(None, 0.0, 1.0, tol=tol, u_form=u_form)
    return float((2.0 * val) ** (1.0 / p))


@dataclass(frozen=True)
class RatioSweep:
    """Computed-to-comparison ratios for means and norms over radii."""

    radii: np.ndarray
    mean_ratios: np.ndarray
    norm_ratios: np.ndarray
    mean_spread: float
    norm_spread: float


def theoremA_ratio_sweep(kernel, nu, p, radii, *, table=None):
    """Ratio of means and norms to their comparison integrals.

    For each radius r the mean side compares phi_p(r)^p against
    G_p(r) = int_0^r dt/(omegahat(t)(1-t))^p, and the norm side
    compares the kernel norm at a = r against
    H_p(r) = int_0^r nuhat(t)/(omegahat(t)(1-t))^p dt.  Reported
    spreads are max/min per side; bounded spread is the testable claim.
    """
    arr = np.asarray(radii, dtype=float)
    if arr.ndim != 1 or len(arr) == 0:
        raise DomainError("radii must be a nonempty 1-d collection")
    if np.any(arr < 0.5) or np.any(arr > 1.0 - 2.0 ** -25):
        raise DomainError("sweep radii must lie in [0.5, 1 - 2^-25]")
    w = kernel.weight
    gp = comparison_prefix(w, p)
    base = _log_comparison_density(w, p)

    def h_density(s):
        svec = np.atleast_1d(np.asarray(s, dtype=float))
        nuhat = np.exp(np.asarray(nu.log_tails(svec), dtype=float))
        out = nuhat * base(svec)
        return out if np.ndim(s) else float(out[0])

    hp = CumulativeTables(h_density, RadialGrid.build(levels=30, nodes_per_panel=16))
    if table is None:
        table = MeanTable.build(kernel, p)
    means = np.array([kernel.circle_mean(p, float(r)) for r in arr])
    mean_ratios = means ** p / np.array([gp.prefix(float(r)) for r in arr])
    norms = np.array(
        [kernel_norm(kernel, nu, p, float(r), table=table) for r in arr]
    )
    norm_ratios = norms ** p / np.array([hp.prefix(float(r)) for r in arr])
    for name, ratios in (("mean", mean_ratios), ("norm", norm_ratios)):
        if not np.all(np.isfinite(ratios)) or np.any(ratios <= 0.0):
            raise ConvergenceError(
                f"{name} ratios degenerate over the sweep",
                best=None,
                achieved=math.inf,
            )
    return RatioSweep(
        arr,
        mean_ratios,
        norm_ratios,
        float(np.max(mean_ratios) / np.min(mean_ratios)),
        float(np.max(norm_ratios) / np.min(norm_ratios)),
    )
