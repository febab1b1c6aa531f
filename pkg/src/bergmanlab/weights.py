"""Radial weight families on the unit disc: densities, tails, moments.

A weight is a nonnegative integrable density omega(r) on [0, 1); its tail
omegahat(r) is the integral of omega over [r, 1).  Every family exposes
density/tail plus log-space variants, because exponential-type weights
underflow float64 tails beyond dyadic level ~9 while the mathematics
downstream (class membership, kernel coefficients) only ever needs ratios.

Closed-form tails and moments are used wherever they exist; families
without them fall back to the panel quadrature of .quadrature, and the two
routes are cross-checked in the test suite rather than merged.
"""

from __future__ import annotations

import math
import threading

import numpy as np
from scipy import special

from .errors import ConvergenceError, DomainError, WeightSpecError
from .quadrature import integrate

__all__ = [
    "RadialWeight",
    "StandardWeight",
    "PowerLogWeight",
    "ExponentialWeight",
    "InverseLogWeight",
    "CounterexampleNuWeight",
    "CounterexampleEtaWeight",
    "TabulatedWeight",
    "parse_weight",
    "quadrature_tail",
    "log_factor",
]

_TAIL_TOL = 1e-10
_MOMENT_TOL = 1e-12

_laguerre_cache = {}


def _laguerre_rule(n=60):
    """Gauss-Laguerre nodes/weights for integrals against exp(-w) on [0, inf)."""
    rule = _laguerre_cache.get(n)
    if rule is None:
        rule = np.polynomial.laguerre.laggauss(n)
        for arr in rule:
            arr.setflags(write=False)
        rule = _laguerre_cache.setdefault(n, rule)
    return rule


def log_factor(r):
    """log(e/(1-r)) = 1 - log(1-r), the slowly varying factor near 1."""
    return 1.0 - np.log1p(-np.asarray(r, dtype=float))


def _check_radius(r):
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0.0) or np.any(arr >= 1.0):
        raise DomainError("radius must lie in [0, 1)")
    return arr


def _as_like(arr, r):
    return float(arr) if np.ndim(r) == 0 else arr


class RadialWeight:
    """Base class; subclasses fill in the family formula.

    Instances are immutable after construction.  The moment cache allows
    concurrent readers; insertions are serialized on a lock.
    """

    family = "abstract"

    def __init__(self):
        self._moment_cache = {}
        self._lock = threading.Lock()

    # subclasses override _density(u, r) with u = 1 - r computed exactly
    def _density(self, u, r):
        raise NotImplementedError

    def _density_u(self, u):
        # density as a function of u = 1 - r; only the u-insensitive
        # factors see the rounded radius, so deep quadrature stays exact
        u = np.asarray(u, dtype=float)
        return self._density(u, 1.0 - u)

    def _tail_u(self, u):
        u = np.asarray(u, dtype=float)
        if u.ndim != 0:
            return np.array([self._tail_u(float(v)) for v in u])
        cut = float(u)
        if 1.0 - cut < 1.0:
            return self.tail(1.0 - cut)
        # u below the float64 resolution limit at 1: rescale u = cut * v
        # (exact when cut is a power of two) and refine toward v = 0
        return integrate(
            None, 0.0, 1.0, tol=_TAIL_TOL,
            u_form=lambda v: cut * self._density_u(cut * v))

    def density(self, r):
        """Pointwise omega(r); accepts scalars or arrays in [0, 1)."""
        arr = _check_radius(r)
        return _as_like(self._density(1.0 - arr, arr), r)

    def log_density(self, r):
        """log omega(r); -inf where the density vanishes."""
        arr = _check_radius(r)
        vals = self._density(1.0 - arr, arr)
        with np.errstate(divide="ignore"):
            return _as_like(np.log(vals), r)

    @property
    def has_closed_form_tail(self):
        return False

    def tail(self, r):
        """omegahat(r), the mass of omega over [r, 1)."""
        arr = _check_radius(r)
        if arr.ndim == 0:
            return self._tail_scalar(float(arr))
        return np.array([self._tail_scalar(float(v)) for v in arr])

    def tails(self, r):
        """Vectorized tail; same values as tail()."""
        return self.tail(r)

    def _tail_scalar(self, r):
        return integrate(None, r, 1.0, tol=_TAIL_TOL, u_form=self._density_u)

    def log_tail(self, r):
        """log omegahat(r); overridden where the tail underflows float64."""
        t = self.tail(r)
        with np.errstate(divide="ignore"):
            return _as_like(np.log(t), r)

    def log_tails(self, r):
        arr = _check_radius(np.atleast_1d(r))
        return np.array([self.log_tail(float(v)) for v in arr])

    def _closed_moment(self, x):
        return None

    @property
    def breakpoints(self):
        """Radii where the density is not smooth; quadrature splits there."""
        return ()

    def moment(self, x):
        """omega_x = integral of s^x omega(s) over [0, 1), cached per x."""
        if not (np.isfinite(x) and x >= 0.0):
            raise DomainError(f"moment order must be finite and >= 0, got {x}")
        key = float(x)
        val = self._moment_cache.get(key)
        if val is not None:
            return val
        val = self._closed_moment(key)
        if val is None:
            # s^x = exp(x log(1-u)) keeps full precision at both endpoints
            val = integrate(
                None, 0.0, 1.0, tol=_MOMENT_TOL,
                u_form=lambda u: np.exp(key * np.log1p(-u)) * self._density_u(u))
        with self._lock:
            val = self._moment_cache.setdefault(key, val)
        return val

    @property
    def spec(self):
        """Round-trippable mini-language string for this weight."""
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.spec!r})"


class StandardWeight(RadialWeight):
    """omega(r) = (1+alpha)(1-r^2)^alpha, alpha > -1.

    Normalized so the classical kernel identity holds with constant 1:
    the odd moments are 2*omega_{2n+1} = 1/binom(n+alpha+1, n).
    """

    family = "standard"

    def __init__(self, alpha):
        super().__init__()
        if not (np.isfinite(alpha) and alpha > -1.0):
            raise DomainError(f"standard family needs alpha > -1, got {alpha}")
        self.alpha = float(alpha)

    def _density(self, u, r):
        return (1.0 + self.alpha) * (u * (1.0 + r)) ** self.alpha

    @property
    def has_closed_form_tail(self):
        return True

    def _tail_u(self, u):
        u = np.asarray(u, dtype=float)
        a = self.alpha
        return (0.5 * (1.0 + a) * special.beta(0.5, a + 1.0)
                * special.betainc(a + 1.0, 0.5, u * (2.0 - u)))

    def tail(self, r):
        arr = _check_radius(r)
        return _as_like(self._tail_u(1.0 - arr), r)

    def _closed_moment(self, x):
        a = self.alpha
        return float(0.5 * (1.0 + a)
                     * math.exp(special.betaln(0.5 * (x + 1.0), a + 1.0)))

    def log_tails(self, r):
        # closed-form tail vectorizes; bypass the scalar fallback loop
        arr = _check_radius(np.atleast_1d(r))
        with np.errstate(divide="ignore"):
            return np.log(self._tail_u(1.0 - arr))

    @property
    def spec(self):
        return f"std:alpha={self.alpha:g}"


class PowerLogWeight(RadialWeight):
    """omega(r) = (1-r)^alpha * log(e/(1-r))^beta, alpha > -1, beta real."""

    family = "power_log"

    def __init__(self, alpha, beta):
        super().__init__()
        if not (np.isfinite(alpha) and alpha > -1.0):
            raise DomainError(f"power_log family needs alpha > -1, got {alpha}")
        if not np.isfinite(beta):
            raise DomainError(f"power_log beta must be finite, got {beta}")
        self.alpha = float(alpha)
        self.beta = float(beta)

    def _density(self, u, r):
        t = 1.0 - np.log(u)
        return u**self.alpha * t**self.beta

    @property
    def has_closed_form_tail(self):
        # upper incomplete gamma needs beta + 1 > 0
        return self.beta > -1.0

    def _tail_u(self, u):
        if not self.has_closed_form_tail:
            return super()._tail_u(u)
        u = np.asarray(u, dtype=float)
        a1 = self.alpha + 1.0
        t = 1.0 - np.log(u)
        return (math.exp(a1) * a1 ** (-self.beta - 1.0)
                * special.gamma(self.beta + 1.0)
                * special.gammaincc(self.beta + 1.0, a1 * t))

    def tail(self, r):
        if not self.has_closed_form_tail:
            return super().tail(r)
        arr = _check_radius(r)
        return _as_like(self._tail_u(1.0 - arr), r)

    def _closed_moment(self, x):
        if self.beta != 0.0:
            return None
        return float(math.exp(special.betaln(x + 1.0, self.alpha + 1.0)))

    @property
    def spec(self):
        return f"powlog:alpha={self.alpha:g},beta={self.beta:g}"


class ExponentialWeight(RadialWeight):
    """omega(r) = exp(-c/(1-r)^kappa), c > 0, kappa > 0.

    Tails underflow float64 already at moderate depth, so log_tail is the
    primary interface, split by z = c/(1-r)^kappa: closed form through
    E_2 for kappa = 1; for z in [2, 600] the substitution y = c v^-kappa
    turns the tail into (c^{1/kappa}/kappa) e^-z times a Gauss-Laguerre
    integral of (z+w)^(-1-1/kappa), exact to ~1e-14 (panel quadrature
    cannot resolve the boundary layer once z is large); an
    integration-by-parts asymptotic series (relative error ~ z^-5)
    beyond 600; plain panel quadrature below 2 where the integrand is
    fat and smooth.
    """

    family = "exponential"
    _ASYMPTOTIC_Z = 600.0
    _LAGUERRE_Z = 2.0

    def __init__(self, c, kappa):
        super().__init__()
        if not (np.isfinite(c) and c > 0.0):
            raise DomainError(f"exponential family needs c > 0, got {c}")
        if not (np.isfinite(kappa) and kappa > 0.0):
            raise DomainError(f"exponential family needs kappa > 0, got {kappa}")
        self.c = float(c)
        self.kappa = float(kappa)

    def _density(self, u, r):
        with np.errstate(over="ignore"):
            return np.exp(-self.c * u**-self.kappa)

    def log_density(self, r):
        arr = _check_radius(r)
        return _as_like(-self.c * (1.0 - arr) ** -self.kappa, r)

    @property
    def has_closed_form_tail(self):
        return self.kappa == 1.0

    def _log_tail_asymptotic(self, u):
        # integral of exp(-c v^-kappa) over [0, u]; IBP series in 1/(kappa z)
        k = self.kappa
        z = self.c * u**-k
        a = 1.0 / (k * z)
        series = 1.0
        term = 1.0
        for j in range(1, 6):
            term *= -(j * k + 1.0) * a
            series += term
        return math.log(u) - z - math.log(k * z) + math.log(series)

    def _log_tail_u_scalar(self, u):
        z = self.c * u**-self.kappa
        if z > self._ASYMPTOTIC_Z:
            return self._log_tail_asymptotic(u)
        if self.kappa == 1.0:
            return math.log(u * special.expn(2, z))
        if z >= self._LAGUERRE_Z:
            x, w = _laguerre_rule()
            s = float(np.sum(w * (z + x) ** (-1.0 - 1.0 / self.kappa)))
            return math.log(self.c) / self.kappa - math.log(self.kappa) - z + math.log(s)
        return math.log(integrate(None, 1.0 - u, 1.0, tol=_TAIL_TOL,
                                   u_form=self._density_u))

    def _tail_u(self, u):
        u = np.asarray(u, dtype=float)
        if u.ndim != 0:
            return np.array([self._tail_u(float(v)) for v in u])
        lt = self._log_tail_u_scalar(float(u))
        return math.exp(lt) if lt > -745.0 else 0.0

    def log_tail(self, r):
        arr = _check_radius(r)
        if arr.ndim != 0:
            return np.array([self.log_tail(float(v)) for v in arr])
        return self._log_tail_u_scalar(1.0 - float(arr))

    def tail(self, r):
        arr = _check_radius(r)
        return _as_like(self._tail_u(1.0 - arr), r)

    @property
    def spec(self):
        return f"exp:c={self.c:g},kappa={self.kappa:g}"


class InverseLogWeight(RadialWeight):
    """omega(r) = (1-r)^-1 log(e/(1-r))^-2; tail is exactly 1/log(e/(1-r)).

    The canonical member of D-hat minus D-check: mass decays so slowly
    that every fixed truncation misses a constant fraction of the tail.
    """

    family = "inverse_log"

    def __init__(self):
        super().__init__()

    def _density(self, u, r):
        t = 1.0 - np.log(u)
        return 1.0 / (u * t * t)

    @property
    def has_closed_form_tail(self):
        return True

    def _tail_u(self, u):
        return 1.0 / (1.0 - np.log(np.asarray(u, dtype=float)))

    def tail(self, r):
        arr = _check_radius(r)
        return _as_like(1.0 / log_factor(arr), r)

    @property
    def spec(self):
        return "invlog:"


def _derived_base_checks(base, p):
    if not isinstance(base, RadialWeight):
        raise DomainError("base must be a RadialWeight")
    if not (np.isfinite(p) and p > 1.0):
        raise DomainError(f"derived families need 1 < p < inf, got {p}")


class CounterexampleNuWeight(RadialWeight):
    """nu(s) = omega(s) * omegahat(s)^(p/p') * log(e/(1-s))^(2p/p').

    Source-side member of the separating triple: built so the tail
    constant stays finite while the Muckenhoupt-type constant diverges.
    """

    family = "counterexample_nu"

    def __init__(self, base, p):
        super().__init__()
        _derived_base_checks(base, p)
        self.base = base
        self.p = float(p)
        self._ratio = self.p - 1.0  # p/p'

    def _density(self, u, r):
        t = 1.0 - np.log(u)
        return (self.base._density(u, r) * self.base.tails(r) ** self._ratio
                * t ** (2.0 * self._ratio))

    def _density_u(self, u):
        u = np.asarray(u, dtype=float)
        t = 1.0 - np.log(u)
        return (self.base._density_u(u) * self.base._tail_u(u) ** self._ratio
                * t ** (2.0 * self._ratio))

    def log_density(self, r):
        arr = _check_radius(r)
        val = (self.base.log_density(arr)
               + self._ratio * self.base.log_tails(arr)
               + 2.0 * self._ratio * np.log(log_factor(arr)))
        return _as_like(val, r)

    @property
    def spec(self):
        return f"cex-nu:base={self.base.spec},p={self.p:g}"


class CounterexampleEtaWeight(RadialWeight):
    """eta(s) = omega(s) * omegahat(s)^(p/p') * log(e/(1-s))^(e(s)*p/p').

    The literal construction has a radius-dependent exponent e(s) = s;
    exponent=<const> switches to a fixed exponent for sensitivity studies.
    """

    family = "counterexample_eta"

    def __init__(self, base, p, exponent=None):
        super().__init__()
        _derived_base_checks(base, p)
        if exponent is not None and not np.isfinite(exponent):
            raise DomainError("exponent override must be finite")
        self.base = base
        self.p = float(p)
        self.exponent = None if exponent is None else float(exponent)
        self._ratio = self.p - 1.0

    def _log_exponent(self, r):
        e = r if self.exponent is None else self.exponent
        return e * self._ratio

    def _density(self, u, r):
        t = 1.0 - np.log(u)
        return (self.base._density(u, r) * self.base.tails(r) ** self._ratio
                * t ** self._log_exponent(r))

    def _density_u(self, u):
        u = np.asarray(u, dtype=float)
        t = 1.0 - np.log(u)
        return (self.base._density_u(u) * self.base._tail_u(u) ** self._ratio
                * t ** self._log_exponent(1.0 - u))

    def log_density(self, r):
        arr = _check_radius(r)
        val = (self.base.log_density(arr)
               + self._ratio * self.base.log_tails(arr)
               + self._log_exponent(arr) * np.log(log_factor(arr)))
        return _as_like(val, r)

    @property
    def spec(self):
        s = f"cex-eta:base={self.base.spec},p={self.p:g}"
        if self.exponent is not None:
            s += f",exponent={self.exponent:g}"
        return s


class TabulatedWeight(RadialWeight):
    """Piecewise-linear density through (r_i, omega(r_i)) sample rows.

    Constant extension on both sides of the sampled range keeps the density
    defined on all of [0, 1); tails integrate the interpolant exactly.
    """

    family = "tabulated"

    def __init__(self, radii, values, path=None):
        super().__init__()
        r = np.asarray(radii, dtype=float)
        v = np.asarray(values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size == 0:
            raise DomainError("need matching 1-d radius/value arrays")
        if np.any(np.diff(r) <= 0.0):
            raise DomainError("radii must be strictly increasing")
        if r[0] < 0.0 or r[-1] >= 1.0:
            raise DomainError("radii must lie in [0, 1)")
        if not np.all(np.isfinite(v)) or np.any(v < 0.0):
            raise DomainError("values must be finite and nonnegative")
        self.radii = r
        self.values = v
        self.path = path
        # exact suffix integrals of the interpolant at each breakpoint,
        # built right to left; beyond the last sample the density is
        # constant v[-1] up to 1
        suffix = np.empty(r.size)
        suffix[-1] = v[-1] * (1.0 - r[-1])
        for i in range(r.size - 2, -1, -1):
            seg = 0.5 * (v[i] + v[i + 1]) * (r[i + 1] - r[i])
            suffix[i] = suffix[i + 1] + seg
        self._suffix = suffix

    def _density(self, u, r):
        return np.interp(r, self.radii, self.values,
                         left=self.values[0], right=self.values[-1])

    @property
    def has_closed_form_tail(self):
        return True

    def tail(self, r):
        arr = _check_radius(r)
        scalar = arr.ndim == 0
        arr = np.atleast_1d(arr)
        out = np.empty(arr.shape)
        for i, rv in enumerate(arr):
            if rv <= self.radii[0]:
                out[i] = self.values[0] * (self.radii[0] - rv) + self._suffix[0]
            elif rv >= self.radii[-1]:
                out[i] = self.values[-1] * (1.0 - rv)
            else:
                k = int(np.searchsorted(self.radii, rv, side="right")) - 1
                mid = float(self._density(1.0 - rv, rv))
                seg = 0.5 * (mid + self.values[k + 1]) * (self.radii[k + 1] - rv)
                out[i] = seg + self._suffix[k + 1]
        return float(out[0]) if scalar else out

    def _closed_moment(self, x):
        # int s^x (a + b s) ds is exact per linear segment; panel ladders
        # stall on the interpolant's kinks
        knots = np.concatenate(([0.0], self.radii, [1.0]))
        dens = np.concatenate(
            ([self.values[0]], self.values, [self.values[-1]]))
        total = 0.0
        for lo, hi, vlo, vhi in zip(knots[:-1], knots[1:],
                                    dens[:-1], dens[1:]):
            if hi <= lo:
                continue
            b = (vhi - vlo) / (hi - lo)
            a = vlo - b * lo
            total += (a * (hi ** (x + 1.0) - lo ** (x + 1.0)) / (x + 1.0)
                      + b * (hi ** (x + 2.0) - lo ** (x + 2.0)) / (x + 2.0))
        return float(total)

    @property
    def breakpoints(self):
        return tuple(float(v) for v in self.radii)

    @property
    def spec(self):
        if self.path is not None:
            return f"file:{self.path}"
        return f"tabulated:<{self.radii.size} samples>"


def quadrature_tail(w, r, *, tol=_TAIL_TOL):
    """Tail of w by panel quadrature, ignoring any closed form.

    The independent route for cross-checking closed-form tails; uses the
    u = 1-r form of the density so deep radii keep full precision.
    """
    _check_radius(np.asarray(r, dtype=float))
    return integrate(None, float(r), 1.0, tol=tol, u_form=w._density_u)


def _parse_params(text, spec):
    params = {}
    if not text:
        return params
    for tok in text.split(","):
        if "=" not in tok:
            raise WeightSpecError(f"expected key=value, got {tok!r} in {spec!r}")
        key, _, val = tok.partition("=")
        params[key.strip()] = val.strip()
    return params


def _want_float(params, key, spec, *, default=None):
    if key not in params:
        if default is not None:
            return default
        raise WeightSpecError(f"missing required parameter {key!r} in {spec!r}")
    raw = params.pop(key)
    try:
        return float(raw)
    except ValueError as exc:
        raise WeightSpecError(f"bad numeric value {raw!r} for {key!r} in {spec!r}") from exc


def _no_leftovers(params, spec):
    if params:
        raise WeightSpecError(f"unknown parameters {sorted(params)} in {spec!r}")


def _parse_derived(cls, rest, spec):
    # cex-level keys (p=, exponent=) may appear anywhere; the remaining
    # comma tokens form the base sub-spec, which may itself contain '='
    toks = rest.split(",") if rest else []
    own, base_toks = {}, []
    for tok in toks:
        key = tok.partition("=")[0].strip()
        if key in ("p", "exponent"):
            own[key] = tok.partition("=")[2].strip()
        else:
            base_toks.append(tok)
    base_text = ",".join(base_toks)
    if not base_text.startswith("base="):
        raise WeightSpecError(f"derived family needs base=<spec> in {spec!r}")
    base = parse_weight(base_text[len("base="):])
    try:
        p = float(own["p"])
    except KeyError:
        raise WeightSpecError(f"missing required parameter 'p' in {spec!r}") from None
    except ValueError as exc:
        raise WeightSpecError(f"bad numeric value for 'p' in {spec!r}") from exc
    kwargs = {}
    if cls is CounterexampleEtaWeight and "exponent" in own:
        try:
            kwargs["exponent"] = float(own["exponent"])
        except ValueError as exc:
            raise WeightSpecError(f"bad numeric value for 'exponent' in {spec!r}") from exc
    elif cls is CounterexampleNuWeight and "exponent" in own:
        raise WeightSpecError(f"cex-nu takes no 'exponent' parameter in {spec!r}")
    try:
        return cls(base, p, **kwargs)
    except DomainError as exc:
        raise WeightSpecError(str(exc)) from exc


def parse_weight(spec):
    """Parse the weight mini-language into a RadialWeight.

    Grammar: `std:alpha=1`, `powlog:alpha=0.5,beta=1`, `exp:c=1,kappa=1`,
    `invlog:`, `cex-nu:base=<spec>,p=<p>`, `cex-eta:base=<spec>,p=<p>`
    (optional `exponent=<const>` for the constant-exponent variant), and
    `file:<path>` with CSV rows `r,omega(r)`, r strictly increasing in
    [0, 1).  Raises WeightSpecError on malformed input.
    """
    if not isinstance(spec, str) or not spec.strip():
        raise WeightSpecError(f"empty weight spec {spec!r}")
    text = spec.strip()
    family, sep, rest = text.partition(":")
    family = family.strip()
    if family == "std":
        params = _parse_params(rest, spec)
        alpha = _want_float(params, "alpha", spec)
        _no_leftovers(params, spec)
        try:
            return StandardWeight(alpha)
        except DomainError as exc:
            raise WeightSpecError(str(exc)) from exc
    if family == "powlog":
        params = _parse_params(rest, spec)
        alpha = _want_float(params, "alpha", spec)
        beta = _want_float(params, "beta", spec)
        _no_leftovers(params, spec)
        try:
            return PowerLogWeight(alpha, beta)
        except DomainError as exc:
            raise WeightSpecError(str(exc)) from exc
    if family == "exp":
        params = _parse_params(rest, spec)
        c = _want_float(params, "c", spec)
        kappa = _want_float(params, "kappa", spec)
        _no_leftovers(params, spec)
        try:
            return ExponentialWeight(c, kappa)
        except DomainError as exc:
            raise WeightSpecError(str(exc)) from exc
    if family == "invlog":
        if rest.strip():
            raise WeightSpecError(f"invlog takes no parameters, got {rest!r}")
        return InverseLogWeight()
    if family == "cex-nu":
        return _parse_derived(CounterexampleNuWeight, rest, spec)
    if family == "cex-eta":
        return _parse_derived(CounterexampleEtaWeight, rest, spec)
    if family == "file":
        if not sep or not rest:
            raise WeightSpecError(f"file family needs a path in {spec!r}")
        try:
            data = np.loadtxt(rest, delimiter=",", ndmin=2)
        except OSError as exc:
            raise WeightSpecError(f"cannot read weight file {rest!r}: {exc}") from exc
        except ValueError as exc:
            raise WeightSpecError(f"malformed weight CSV {rest!r}: {exc}") from exc
        if data.shape[1] != 2:
            raise WeightSpecError(f"weight CSV must have rows r,omega(r): {rest!r}")
        try:
            return TabulatedWeight(data[:, 0], data[:, 1], path=rest)
        except DomainError as exc:
            raise WeightSpecError(str(exc)) from exc
    raise WeightSpecError(f"unknown weight family {family!r} in {spec!r}")
