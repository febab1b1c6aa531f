"""Discretized radial operator and power-iteration norm estimates.

Applied to a radial input, the maximal projection collapses to a one
dimensional positive kernel acting on the radius alone,

    (Tf)(r) = 2 int_0^1 f(s) phi_1(r s) omega(s) s ds,

with phi_1 the exponent-1 circle mean of the kernel series.  On a dyadic
grid the integral becomes the matrix K[i, j] = 2 phi_1(r_i s_j)
omega(s_j) s_j w_j applied to node samples of f, where w_j are the
quadrature weights.  Norms run from L^p of the source measure nu(s) s ds
to L^p of the target measure eta(r) r dr.

The restriction to radial inputs makes every estimate here a
radial-restricted estimate: a genuine lower bound for the norm over all
inputs, and comparable to the full norm exactly when the strong constant
of the triple is finite.  Two further conventions, fixed at assembly:

* the output rows are the grid nodes preceded by a diagnostic row at
  r = 0 carrying zero target mass, so the constant-profile identity of
  the kernel can be checked without influencing any norm;
* the grid truncates both radii at the cut 1 - 2^-levels, and the
  kernel mass omitted beyond the cut is summarised by ``corner_mass``,
  a crude upper bound reported alongside estimates and never added to
  them.  For power-type weights the deepest rows see corner influence
  of order one, so the bound does not shrink as levels grow.

The norm estimator is the classical power iteration for positive
kernels, which drives a Rayleigh quotient upward monotonically; the
trace of successive quotients is therefore nondecreasing and its last
entry is a lower estimate of the discrete operator norm.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .characterization import TripleConfig
from .errors import ConvergenceError, DomainError
from .kernel import KernelEvaluator, MeanTable
from .quadrature import RadialGrid
from .weights import RadialWeight

__all__ = [
    "NormEstimate",
    "RadialOperator",
    "adjoint",
    "apply_at",
    "assemble",
    "boyd_norm",
    "monomial_identity_check",
    "rayleigh",
]

_TRACE_SLACK = 10.0 * np.finfo(float).eps


def _p_norm(values, measure, q):
    """L^q norm of node samples against a discrete measure."""
    if q == math.inf:
        live = measure > 0.0
        return float(np.max(np.abs(values[live]))) if np.any(live) else 0.0
    with np.errstate(over="ignore"):
        return float(np.sum(np.abs(values) ** q * measure) ** (1.0 / q))


def _as_samples(f, size, label):
    arr = np.asarray(f, dtype=float)
    if arr.shape != (size,):
        raise DomainError(
            f"{label} must be a length-{size} sample vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{label} must be finite")
    return arr


@dataclass(frozen=True)
class RadialOperator:
    """Matrix form of the radialized positive kernel between two measures.

    Parameters
    ----------
    grid : RadialGrid
        Discretization the node sets came from.
    p : float
        Exponent of the source and target Lebesgue spaces.
    matrix : ndarray
        Kernel matrix, shape (out, in), entries nonnegative.
    out_radii, in_radii : ndarray
        Output and input sample radii.
    target_measure, source_measure : ndarray
        Node masses of eta(r) r dr on the output side and nu(s) s ds on
        the input side.
    kernel_measure : ndarray, optional
        Node masses omega(s) s w of the kernel's own weight; retained by
        ``assemble`` so rows can be rebuilt at arbitrary radii.
    means : MeanTable, optional
        The circle-mean table the matrix was built from.
    transposed : bool
        When True the object acts as the adjoint: input samples live on
        the output radii and the roles of the measures swap, together
        with the exponent moving to its conjugate.
    corner_mass : float
        Crude upper bound for the kernel mass omitted beyond the grid
        cut; reported, never added.
    """

    grid: RadialGrid
    p: float
    matrix: np.ndarray
    out_radii: np.ndarray
    in_radii: np.ndarray
    target_measure: np.ndarray
    source_measure: np.ndarray
    kernel_measure: np.ndarray | None = None
    means: MeanTable | None = None
    transposed: bool = False
    corner_mass: float = 0.0

    def __post_init__(self):
        if not isinstance(self.grid, RadialGrid):
            raise DomainError("grid must be a RadialGrid")
        if not (np.isfinite(self.p) and self.p >= 1.0):
            raise DomainError(f"exponent p must satisfy p >= 1, got {self.p}")
        k = np.asarray(self.matrix)
        if k.ndim != 2:
            raise DomainError("matrix must be two dimensional")
        n_out, n_in = k.shape
        pairs = [
            ("out_radii", self.out_radii, n_out),
            ("in_radii", self.in_radii, n_in),
            ("target_measure", self.target_measure, n_out),
            ("source_measure", self.source_measure, n_in),
        ]
        if self.kernel_measure is not None:
            pairs.append(("kernel_measure", self.kernel_measure, n_in))
        for name, arr, want in pairs:
            a = np.asarray(arr)
            if a.shape != (want,):
                raise DomainError(f"{name} must have shape ({want},)")
            if not np.all(np.isfinite(a)):
                raise DomainError(f"{name} must be finite")
        if not np.all(np.isfinite(k)) or k.size and float(k.min()) < 0.0:
            raise DomainError("matrix entries must be finite and nonnegative")
        for name, arr in (("target_measure", self.target_measure),
                          ("source_measure", self.source_measure)):
            if float(np.min(arr)) < 0.0:
                raise DomainError(f"{name} must be nonnegative")
        if not (np.isfinite(self.corner_mass) or self.corner_mass == math.inf) \
                or self.corner_mass < 0.0:
            raise DomainError("corner_mass must be a nonnegative bound")

    @property
    def exponent(self):
        """Exponent of the space the operator currently acts from."""
        if not self.transposed:
            return self.p
        return math.inf if self.p == 1.0 else self.p / (self.p - 1.0)

    @property
    def input_radii(self):
        return self.out_radii if self.transposed else self.in_radii

    @property
    def output_radii(self):
        return self.in_radii if self.transposed else self.out_radii

    @property
    def input_measure(self):
        return self.target_measure if self.transposed else self.source_measure

    @property
    def output_measure(self):
        return self.source_measure if self.transposed else self.target_measure

    def apply(self, f):
        """Operator action on input-side samples.

        The forward direction is the plain matrix product.  The
        transposed direction is the measure adjoint: samples are
        weighted by the target masses, pushed through the transposed
        matrix, and divided by the source masses, so that discrete
        pairings satisfy <Tf, g>_target = <f, T*g>_source.  Points with
        zero source mass return zero; they are invisible to the pairing.
        """
        f = _as_samples(f, len(self.input_radii), "input samples")
        if not self.transposed:
            return self.matrix @ f
        pushed = self.matrix.T @ (f * self.target_measure)
        live = self.source_measure > 0.0
        out = np.zeros_like(pushed)
        out[live] = pushed[live] / self.source_measure[live]
        return out


@dataclass(frozen=True)
class NormEstimate:
    """Outcome of the power iteration.

    ``trace`` holds one Rayleigh quotient per iteration; positivity of
    the kernel makes it nondecreasing (a tiny rounding slack is
    tolerated), and ``value`` is always its last entry, a lower bound
    for the discrete operator norm.
    """

    value: float
    iterations: int
    trace: np.ndarray
    converged: bool

    def __post_init__(self):
        tr = np.asarray(self.trace, dtype=float)
        if tr.ndim != 1 or tr.size == 0:
            raise DomainError("trace must be a nonempty vector")
        if not np.all(np.isfinite(tr)) or float(tr.min()) < 0.0:
            raise DomainError("trace entries must be finite and nonnegative")
        slack = _TRACE_SLACK * np.maximum(np.abs(tr[:-1]), 1.0)
        if tr.size > 1 and np.any(np.diff(tr) < -slack):
            raise DomainError("trace must be nondecreasing")
        if self.value != float(tr[-1]):
            raise DomainError("value must equal the last trace entry")
        if self.iterations != tr.size:
            raise DomainError("iterations must count the trace entries")


def assemble(cfg, grid, means):
    """Discretize the radialized kernel of cfg.omega on the grid.

    Parameters
    ----------
    cfg : TripleConfig
        Weight triple and exponent; omega shapes the kernel, nu the
        source measure, eta the target measure.
    grid : RadialGrid
        Node and weight source for both axes.
    means : MeanTable
        Exponent-1 circle means of the kernel built from cfg.omega; the
        pairing is trusted, only the exponent is checked.  The table
        must cover arguments up to the largest product of an output and
        an input radius, through its extrapolation if necessary.

    Returns
    -------
    RadialOperator
        Output rows at [0] + nodes (the r = 0 row carries zero target
        mass and exists for diagnostics), input columns at the nodes.

    Raises
    ------
    DomainError
        Malformed arguments, a mean table for the wrong exponent, or a
        table that cannot reach the deepest product (coverage gap).
    """
    if not isinstance(cfg, TripleConfig):
        raise DomainError("cfg must be a TripleConfig")
    if not isinstance(grid, RadialGrid):
        raise DomainError("grid must be a RadialGrid")
    if not isinstance(means, MeanTable):
        raise DomainError("means must be a MeanTable")
    if means.p != 1.0:
        raise DomainError(
            f"assembly needs the exponent-1 mean table, got p={means.p}")
    s = grid.nodes
    w = grid.weights
    out_r = np.concatenate(([0.0], s))
    max_x = float(out_r[-1] * s[-1])
    try:
        means.evaluate(max_x)
    except DomainError as err:
        raise DomainError(
            f"mean table coverage gap: assembly needs arguments up to "
            f"{max_x!r}") from err
    phi = means.evaluate((out_r[:, None] * s[None, :]).ravel())
    kernel_measure = cfg.omega.density(s) * s * w
    matrix = 2.0 * phi.reshape(len(out_r), len(s)) * kernel_measure[None, :]
    source = cfg.nu.density(s) * s * w
    target = np.concatenate(([0.0], cfg.eta.density(s) * s * w))
    try:
        corner = 2.0 * float(means.evaluate(float(s[-1]))) \
            * float(cfg.omega.tail(grid.cut))
    except (DomainError, ConvergenceError):
        corner = math.inf
    for arr in (matrix, out_r, target, source, kernel_measure):
        arr.setflags(write=False)
    return RadialOperator(
        grid=grid, p=cfg.p, matrix=matrix, out_radii=out_r, in_radii=s,
        target_measure=target, source_measure=source,
        kernel_measure=kernel_measure, means=means, corner_mass=corner)


def adjoint(T):
    """Adjoint of T: same matrix, roles of the two measures swapped.

    The returned operator maps samples on the output radii, measured by
    the target masses with the conjugate exponent, back to the input
    side.  Taking the adjoint twice returns the original orientation
    with the identical matrix object, so the round trip is bit exact.
    """
    if not isinstance(T, RadialOperator):
        raise DomainError("adjoint needs a RadialOperator")
    return dataclasses.replace(T, transposed=not T.transposed)


def boyd_norm(T, *, tol=1e-6, maxiter=500):
    """Power-iteration lower estimate of the operator norm of T.

    Iterates f <- [T*((Tf)^(q-1))]^(1/(q-1)) from the seed f = 1 on the
    support of the input measure, renormalizing each round, where q is
    the acting exponent (p forward, its conjugate for an adjoint) and
    T* the measure adjoint.  Positivity of the kernel drives the
    Rayleigh quotients upward, so successive quotients settle from
    below; convergence is declared when they agree to ``tol``
    relatively.

    Returns
    -------
    NormEstimate
        ``converged`` is False when maxiter rounds pass without the
        quotients settling; the best (last) estimate is still returned.

    Raises
    ------
    DomainError
        Exponent outside (1, inf), bad tolerance, or an empty input
        support.
    ConvergenceError
        The quotient overflowed to a non-finite value.
    """
    if not isinstance(T, RadialOperator):
        raise DomainError("boyd_norm needs a RadialOperator")
    q = T.exponent
    if not 1.0 < q < math.inf:
        raise DomainError(
            f"power iteration needs an exponent in (1, inf), got {q}")
    if not (np.isfinite(tol) and tol > 0.0):
        raise DomainError(f"tol must be positive, got {tol}")
    if not maxiter >= 1:
        raise DomainError(f"maxiter must be at least 1, got {maxiter}")
    mu_in = T.input_measure
    mu_out = T.output_measure
    active = mu_in > 0.0
    if not np.any(active):
        raise DomainError("input measure vanishes everywhere")
    co = adjoint(T)
    f = np.where(active, 1.0, 0.0)
    f /= _p_norm(f, mu_in, q)
    trace = []
    prev = None
    converged = False
    for _ in range(maxiter):
        g = T.apply(f)
        lam = _p_norm(g, mu_out, q)
        if not np.isfinite(lam):
            raise ConvergenceError(
                "power iteration overflowed", best=prev, achieved=math.inf)
        trace.append(lam)
        if lam == 0.0:
            # the kernel annihilates the whole support: the norm is 0
            converged = True
            break
        if prev is not None and abs(lam - prev) <= tol * lam:
            converged = True
            break
        prev = lam
        h = co.apply(g ** (q - 1.0))
        f = np.where(active, h, 0.0) ** (1.0 / (q - 1.0))
        norm_f = _p_norm(f, mu_in, q)
        if not (np.isfinite(norm_f) and norm_f > 0.0):
            raise ConvergenceError(
                "power iterate left the cone of admissible inputs",
                best=lam, achieved=math.inf)
        f /= norm_f
    out = np.asarray(trace, dtype=float)
    out.setflags(write=False)
    return NormEstimate(value=float(out[-1]), iterations=len(out),
                        trace=out, converged=converged)


def rayleigh(T, f):
    """Norm quotient of one admissible witness: |Tf|_out / |f|_in.

    Any nonnegative f that the input measure can see gives a lower
    bound for the operator norm, so this is the direct way to feed the
    capped test functions through the discretization.

    Raises
    ------
    DomainError
        Negative samples, or a witness with zero input norm.
    """
    if not isinstance(T, RadialOperator):
        raise DomainError("rayleigh needs a RadialOperator")
    f = _as_samples(f, len(T.input_radii), "witness")
    if float(f.min()) < 0.0:
        raise DomainError("witness must be nonnegative")
    q = T.exponent
    den = _p_norm(f, T.input_measure, q)
    if den == 0.0:
        raise DomainError("witness vanishes on the input measure")
    return _p_norm(T.apply(f), T.output_measure, q) / den


def apply_at(T, r, f):
    """Forward action (Tf)(r) at an arbitrary radius r in [0, 1).

    Rebuilds the kernel row 2 phi_1(r s_j) omega(s_j) s_j w_j from the
    stored mean table, so r need not be a grid point.  Only assembled
    forward operators carry the data this needs.
    """
    if not isinstance(T, RadialOperator):
        raise DomainError("apply_at needs a RadialOperator")
    if T.transposed:
        raise DomainError("pointwise rows belong to the forward operator")
    if T.means is None or T.kernel_measure is None:
        raise DomainError("this operator carries no mean table to build rows")
    if not (np.isfinite(r) and 0.0 <= r < 1.0):
        raise DomainError(f"radius must lie in [0, 1), got {r}")
    f = _as_samples(f, len(T.in_radii), "input samples")
    row = 2.0 * T.means.evaluate(float(r) * T.in_radii) * T.kernel_measure
    return float(row @ f)


def monomial_identity_check(omega, n, z, *, kernel=None):
    """Relative residual of the reproducing identity on one monomial.

    For radial weights the projection applied to the n-th monomial
    returns it exactly, because the coefficient a_n and the odd moment
    cancel: 2 omega_{2n+1} a_n = 1.  This computes
    2 omega_{2n+1} a_n z^n through two independent routes, the moment by
    adaptive integration of the weight and a_n from the kernel
    coefficient table, and returns |result - z^n| / z^n.

    Parameters
    ----------
    omega : RadialWeight
    n : int
        Monomial degree, 0 through 8.
    z : float
        Evaluation radius in (0, 0.9].
    kernel : KernelEvaluator, optional
        Reuse an existing coefficient table for omega; one is built
        when omitted.
    """
    if not isinstance(omega, RadialWeight):
        raise DomainError("monomial_identity_check needs a RadialWeight")
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise DomainError("monomial degree must be an integer")
    if not 0 <= n <= 8:
        raise DomainError(f"monomial degree must lie in [0, 8], got {n}")
    if not (np.isfinite(z) and 0.0 < z <= 0.9):
        raise DomainError(f"radius must lie in (0, 0.9], got {z}")
    if kernel is None:
        kernel = KernelEvaluator(omega)
    elif not isinstance(kernel, KernelEvaluator):
        raise DomainError("kernel must be a KernelEvaluator")
    a_n = float(kernel.coefficients(int(n) + 1)[int(n)])
    moment = float(omega.moment(2 * int(n) + 1))
    zn = float(z) ** int(n)
    return abs(2.0 * moment * a_n * zn - zn) / zn
