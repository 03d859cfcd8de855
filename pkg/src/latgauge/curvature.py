"""Curvature constants, fitting and the numerical experiments built on them."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .chains import ChainConfig, sample
from .errors import NonPositiveMagnitude, UnsupportedFamily
from .groups import Family, GroupSpec, exp_batch, haar_batch, inner, log_batch, random_algebra_batch
from .lattice import TorusLattice
from .sigma import (
    BoundaryFields,
    EntryObservable,
    SigmaField,
    SigmaParams,
    covariance_scan,
    sigma_action,
    sigma_langevin_step,
)
from .thresholds import bakry_emery_constant, beta_threshold, hessian_constant
from .ym import RectangleSet, YMParams

NOISE_FLOOR_SIGMA = 3.0
HESSIAN_STEP = 1e-3
HESSIAN_TOLERANCE = 1e-3


# --- fitting -------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    """Model log(magnitude) = log_prefactor - rate * abscissa."""

    log_prefactor: float
    rate: float
    r_squared: float
    covariance_of_fit: np.ndarray = field(repr=False)
    n_points: int = 0

    @property
    def rate_stderr(self) -> float:
        return float(math.sqrt(max(self.covariance_of_fit[1, 1], 0.0)))

    def rate_positive(self, n_sigma: float) -> bool:
        return self.rate - n_sigma * self.rate_stderr > 0

    def to_dict(self) -> dict:
        return {"log_prefactor": self.log_prefactor, "rate": self.rate, "rate_stderr": self.rate_stderr,
                "r_squared": self.r_squared, "covariance_of_fit": self.covariance_of_fit.tolist(),
                "n_points": self.n_points}


def loglinear_fit(points) -> FitResult:
    """Weighted least squares of log(magnitude) on the abscissa.

    ``points`` holds ``(abscissa, magnitude, stderr)`` triples.  Each log
    value gets the propagated error ``stderr / magnitude``; when any stderr is
    missing or zero the fit is unweighted and the parameter covariance is
    scaled by the residual variance instead.

    Raises
    ------
    NonPositiveMagnitude
        If a magnitude is zero, negative or not finite.
    """
    pts = [tuple(p) + (0.0,) * (3 - len(p)) for p in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points to fit")
    x = np.array([p[0] for p in pts], dtype=float)
    mag = np.array([p[1] for p in pts], dtype=float)
    err = np.array([p[2] for p in pts], dtype=float)
    if not np.all(np.isfinite(mag)) or np.any(mag <= 0):
        raise NonPositiveMagnitude(f"magnitudes must be positive, got {mag.tolist()}")
    y = np.log(mag)
    weighted = bool(np.all(err > 0))
    w = (mag / err) ** 2 if weighted else np.ones_like(y)
    X = np.column_stack([np.ones_like(x), -x])
    XtW = X.T * w
    cov = np.linalg.inv(XtW @ X)
    beta = cov @ (XtW @ y)
    resid = y - X @ beta
    ybar = np.sum(w * y) / np.sum(w)
    ss_tot = float(np.sum(w * (y - ybar) ** 2))
    ss_res = float(np.sum(w * resid ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    if not weighted:
        dof = len(y) - 2
        cov = cov * (ss_res / dof if dof > 0 else 0.0)
    return FitResult(float(beta[0]), float(beta[1]), r2, cov, len(y))


# --- exact two-dimensional oracle ----------------------------------------------


def d2_wilson_oracle(spec: GroupSpec, beta: float) -> float:
    """Single-plaquette average c(beta) of the normalized trace in d = 2.

    In two dimensions a planar rectangular loop of area A has expectation
    c(beta)^A.  For SU(2) the class function integral uses the Weyl density
    sin^2(theta) and weight exp(4 beta cos theta); for U(1) the weight is
    exp(beta cos theta).
    """
    spec = GroupSpec(*spec) if isinstance(spec, tuple) else spec
    if spec.family is Family.SU and spec.n == 2:
        k, density = 4.0 * beta, lambda t: math.sin(t) ** 2
    elif spec.family is Family.U and spec.n == 1:
        k, density = float(beta), lambda t: 1.0
    else:
        raise UnsupportedFamily(f"no d = 2 oracle for {spec}")
    # subtract the maximum of the exponent to keep the weights bounded
    num = integrate.quad(lambda t: math.cos(t) * math.exp(k * (math.cos(t) - 1.0)) * density(t), 0.0, math.pi,
                         epsabs=1e-13, epsrel=1e-13)[0]
    den = integrate.quad(lambda t: math.exp(k * (math.cos(t) - 1.0)) * density(t), 0.0, math.pi,
                         epsabs=1e-13, epsrel=1e-13)[0]
    return num / den


# --- Hessian bound --------------------------------------------------------------


@dataclass
class HessianReport:
    max_ratio: float
    violations: int
    n_trials: int
    bound: float

    def to_dict(self) -> dict:
        return {"max_ratio": self.max_ratio, "violations": self.violations, "n_trials": self.n_trials,
                "bound": self.bound}


def hessian_form(Q: np.ndarray, X: np.ndarray, bc: BoundaryFields, beta: float, spec: GroupSpec,
                 h: float = HESSIAN_STEP) -> float:
    """Second derivative of t -> S((exp(t X_x) Q_x)_x) at t = 0.

    Central second differences with steps h and h/2, combined by one
    Richardson extrapolation.
    """
    def f(t):
        return sigma_action(exp_batch(spec, t * X) @ Q, bc, beta, spec)

    f0 = f(0.0)

    def second(step):
        return (f(step) - 2.0 * f0 + f(-step)) / step ** 2

    coarse, fine = second(h), second(h / 2)
    return fine + (fine - coarse) / 3.0


def hessian_check(spec: GroupSpec, m: int, beta: float, n_trials: int, rng: np.random.Generator,
                  L: int = 3) -> HessianReport:
    """Compare |Hess S(v, v)| with 4 m N beta |v|^2 on random configurations.

    Each trial draws Haar U(N) boundary fields, Haar spins and a Gaussian
    tangent vector v = (X_x Q_x) on an m-dimensional slice of side L.
    """
    if m < 1 or n_trials < 1:
        raise ValueError("need m >= 1 and n_trials >= 1")
    sl = TorusLattice(m, L)
    bound = hessian_constant(spec.n, beta, m)
    max_ratio, violations = 0.0, 0
    for _ in range(n_trials):
        bc = BoundaryFields.haar(sl, spec.n, rng)
        Q = haar_batch(spec, rng, sl.n_vertices).astype(np.complex128)
        X = random_algebra_batch(spec, rng, sl.n_vertices)
        v2 = float(np.sum(inner(X, X)))
        if v2 == 0.0 or bound == 0.0:
            continue
        ratio = abs(hessian_form(Q, X, bc, beta, spec)) / (bound * v2)
        max_ratio = max(max_ratio, ratio)
        violations += ratio > 1.0 + HESSIAN_TOLERANCE
    return HessianReport(max_ratio, int(violations), n_trials, bound)


# --- area law -------------------------------------------------------------------


@dataclass
class AreaLawResult:
    shapes: list
    estimates: list
    included: list
    status: str
    fit: FitResult | None = None
    oracle_rate: float | None = None
    passed: bool = False

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "passed": self.passed,
            "oracle_rate": self.oracle_rate,
            "fit": self.fit.to_dict() if self.fit else None,
            "loops": [
                {"R": r, "T": t, "area": r * t, "included": inc, **e.to_dict()}
                for (r, t), e, inc in zip(self.shapes, self.estimates, self.included)
            ],
        }


def area_law_experiment(params: YMParams, loop_set, cfg: ChainConfig, improved="auto", method: str = "auto",
                        workers: int | None = None) -> AreaLawResult:
    """Estimate rectangular Wilson loops and fit log|<W>| against the area.

    Loops below the 3-sigma noise floor are left out of the fit; at least
    three must survive.  The experiment passes when the fitted rate is
    positive at 3 sigma.  Loops are averaged over position, plane and
    orientation.
    """
    shapes = [(int(r), int(t)) for r, t in loop_set]
    L = params.lattice.L
    for r, t in shapes:
        if not (1 <= r and 1 <= t and 2 * r <= L and 2 * t <= L):
            raise ValueError(f"loop {r}x{t} violates 1 <= R, T <= L/2")
    if params.outside_regime:
        warnings.warn(f"beta = {params.beta} is not below beta* = {params.beta_star}", stacklevel=2)
    su2 = params.spec.family is Family.SU and params.spec.n == 2
    if improved == "auto":
        improved = su2 and params.beta > 0
    trace = sample(RectangleSet(tuple(shapes), bool(improved)), params, cfg, method, workers=workers)
    ests = [e for e in trace.estimates()]
    mags = [abs(e.mean) for e in ests]
    included = [m > NOISE_FLOOR_SIGMA * e.stderr for m, e in zip(mags, ests)]
    oracle = None
    if params.lattice.d == 2 and (su2 or (params.spec.family is Family.U and params.spec.n == 1)) and params.beta > 0:
        oracle = -math.log(d2_wilson_oracle(params.spec, params.beta))
    if not any(included):
        return AreaLawResult(shapes, ests, included, "AllConsistentWithZero", None, oracle, params.beta == 0)
    if sum(included) < 3:
        return AreaLawResult(shapes, ests, included, "TooFewPoints", None, oracle, False)
    pts = [(r * t, m, e.stderr) for (r, t), m, e, inc in zip(shapes, mags, ests, included) if inc]
    fit = loglinear_fit(pts)
    return AreaLawResult(shapes, ests, included, "fit", fit, oracle, fit.rate_positive(3.0))


# --- covariance decay -----------------------------------------------------------


@dataclass
class DecayResult:
    boundary_id: str
    covariances: list
    fit: FitResult | None
    passed: bool
    ratio: float | None = None

    def to_dict(self) -> dict:
        return {"boundary_id": self.boundary_id, "passed": self.passed, "ratio_first_last": self.ratio,
                "fit": self.fit.to_dict() if self.fit else None,
                "covariances": [c.to_dict() for c in self.covariances]}


def decay_pairs(sl: TorusLattice, distances, axis: int = 0, i: int = 1, j: int = 1):
    """(f_x^{ij}, g_y^{ij}) with x at the origin and y = x + r e_axis."""
    origin = (0,) * sl.d
    pairs = []
    for r in distances:
        y = [0] * sl.d
        y[axis] = int(r)
        pairs.append((EntryObservable("f", origin, i, j), EntryObservable("g", tuple(y), i, j)))
    return pairs


def covariance_decay_experiment(params: SigmaParams, boundaries, distances, cfg: ChainConfig, n_sigma: float = 2.0,
                                improved="auto", workers: int | None = None) -> list[DecayResult]:
    """Scan |Cov(f_x^{11}, g_y^{11})| over d(x, y) for each boundary draw and fit the decay.

    All distances enter the fit, each weighted by its propagated error, so
    covariances lost in the noise carry little weight.  A draw passes when
    its fitted rate is positive at ``n_sigma``.  At beta = 0 the measure is a
    product and a draw passes when every covariance is within 3 sigma of 0.
    """
    distances = [int(r) for r in distances]
    L = params.slice.L
    if any(r < 1 or 2 * r > L for r in distances):
        raise ValueError(f"distances must lie in [1, L/2] = [1, {L // 2}]")
    out = []
    for bc in boundaries:
        covs = covariance_scan(bc, params, decay_pairs(params.slice, distances), cfg, improved, workers=workers)
        mags = [abs(c.value) for c in covs]
        ratio = mags[0] / mags[-1] if mags[-1] > 0 else math.inf
        if params.beta == 0:
            ok = all(m <= 3.0 * c.stderr for m, c in zip(mags, covs))
            out.append(DecayResult(bc.label, covs, None, ok, ratio))
            continue
        fit = loglinear_fit([(c.distance, m, c.stderr) for c, m in zip(covs, mags)])
        out.append(DecayResult(bc.label, covs, fit, fit.rate_positive(n_sigma), ratio))
    return out


# --- coupling contraction -------------------------------------------------------


@dataclass
class ContractionResult:
    rate: float
    rate_stderr: float
    expected: float | None
    times: np.ndarray = field(repr=False)
    mean_distance: np.ndarray = field(repr=False)

    def within(self, rel: float) -> bool:
        return self.expected is not None and abs(self.rate - self.expected) <= rel * abs(self.expected)

    def to_dict(self) -> dict:
        return {"rate": self.rate, "rate_stderr": self.rate_stderr, "expected_2K": self.expected}


def transported_noise(spec: GroupSpec, Q: np.ndarray, Qp: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Parallel transport of the noise xi Q_x to Q'_x along the connecting geodesic.

    With Q' = exp(H) Q the transported increment is Ad_{exp(H/2)} xi.
    """
    H = log_batch(spec, Qp @ np.conj(np.swapaxes(Q, -1, -2)))
    g = exp_batch(spec, 0.5 * H)
    return g @ xi @ np.conj(np.swapaxes(g, -1, -2))


def coupling_contraction(params: SigmaParams, bc: BoundaryFields, dt: float, horizon: float,
                         rng: np.random.Generator, n_pairs: int = 16, separation: float = 0.2) -> ContractionResult:
    """Decay rate of the mean squared distance sum_x |Q_x - Q'_x|^2 of two coupled Langevin chains.

    Both chains are driven by the same Gaussian noise, carried from one to
    the other by parallel transport.  The rate comes from a straight-line fit
    of the log mean distance in time; its error is a jackknife over the
    ``n_pairs`` independent pairs.  ``expected`` is 2 K.
    """
    if dt > 0.01:
        raise ValueError("coupling experiment needs dt <= 0.01")
    spec = params.spec
    n_steps = int(round(horizon / dt))
    V = params.slice.n_vertices
    dist = np.empty((n_pairs, n_steps + 1))
    for k in range(n_pairs):
        Q = SigmaField.haar(params.slice, spec, rng)
        X = random_algebra_batch(spec, rng, V)
        X *= separation / math.sqrt(float(np.sum(inner(X, X))))
        Qp = SigmaField(params.slice, spec, exp_batch(spec, X) @ Q.values)
        dist[k, 0] = float(np.sum(np.abs(Q.values - Qp.values) ** 2))
        for s in range(n_steps):
            xi = random_algebra_batch(spec, rng, V)
            xi_p = transported_noise(spec, Q.values, Qp.values, xi)
            Q = sigma_langevin_step(Q, bc, params, rng, dt, noise=xi)
            Qp = sigma_langevin_step(Qp, bc, params, rng, dt, noise=xi_p)
            dist[k, s + 1] = float(np.sum(np.abs(Q.values - Qp.values) ** 2))
    times = dt * np.arange(n_steps + 1)

    def rate_of(d):
        return -np.polyfit(times, np.log(d.mean(axis=0)), 1)[0]

    rate = rate_of(dist)
    reps = np.array([rate_of(np.delete(dist, k, axis=0)) for k in range(n_pairs)])
    err = math.sqrt((n_pairs - 1) / n_pairs * float(np.sum((reps - reps.mean()) ** 2))) if n_pairs > 1 else 0.0
    expected = None
    if spec.family in (Family.SU, Family.SO):
        expected = 2.0 * bakry_emery_constant(spec.family, spec.n, params.beta, params.m + 1)
    return ContractionResult(float(rate), err, expected, times, dist.mean(axis=0))


def threshold_table(families=("SU", "SO", "U"), ns=range(2, 7), ds=(2, 3, 4)) -> list[dict]:
    """beta* and K(beta*) for a grid of groups and dimensions."""
    rows = []
    for fam in families:
        for n in ns:
            for d in ds:
                b = beta_threshold(fam, n, d)
                k = None if fam == "U" else bakry_emery_constant(fam, n, b, d)
                rows.append({"family": fam, "n": n, "d": d, "beta_star": b, "K_at_beta_star": k})
    return rows
