"""Slab sigma model with U(N) boundary fields.

Spins ``Q_x`` live on the vertices of an m-dimensional slice torus.  Given
boundary fields ``A`` (lower plane) and ``B`` (upper plane) on the slice
edges, the action is

    S_{A,B}(Q) = N beta sum_{e=(x,y)} Re Tr(Q_x A_e Q_y^{-1} B_e^{-1}).

Arrays: spins ``(V, N, N)``, boundary fields ``(V, m, N, N)`` indexed by the
edge's base vertex and direction.  Self-loops (slice side 1) carry no term.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .chains import ChainConfig, ChainTrace, Trace, run_chains
from .errors import NoCenter, StepTooLarge
from .groups import (
    AlgebraElement,
    Family,
    GroupSpec,
    center_phase,
    dagger,
    exp_batch,
    haar_batch,
    matrix_to_coeffs,
    project_algebra,
    random_algebra_batch,
    residuals,
)
from .lattice import SlabGeometry, TorusLattice, get_lattice
from .seeding import derive_aux_rng
from .stats import Estimate, jackknife_covariance
from .thresholds import beta_threshold
from .ym import GaugeField, proposal_kicks, su2_conditional_mean

MAX_LANGEVIN_DT = 0.1
U_SPEC = {}


def _u(n: int) -> GroupSpec:
    if n not in U_SPEC:
        U_SPEC[n] = GroupSpec(Family.U, n)
    return U_SPEC[n]


# --- data types ----------------------------------------------------------------


@dataclass(eq=False)
class BoundaryFields:
    """U(N)-valued boundary matrices on the slice edges.

    ``A[x, mu]`` sits on the lower-plane edge ``(x, x + mu)`` and ``B[x, mu]``
    on the matching upper-plane edge.
    """

    slice: TorusLattice
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    label: str = ""

    def __post_init__(self):
        self.A = np.ascontiguousarray(self.A, dtype=np.complex128)
        self.B = np.ascontiguousarray(self.B, dtype=np.complex128)
        V, m = self.slice.n_vertices, self.slice.d
        if self.A.shape[:2] != (V, m) or self.A.shape != self.B.shape:
            raise ValueError(f"boundary arrays must have shape ({V}, {m}, N, N)")

    @property
    def n(self) -> int:
        return self.A.shape[-1]

    def check(self, tol: float = 1e-10) -> bool:
        spec = _u(self.n)
        return max(residuals(spec, self.A)[0], residuals(spec, self.B)[0]) <= tol

    @classmethod
    def identity(cls, sl: TorusLattice, n: int, label: str = "identity") -> "BoundaryFields":
        eye = np.broadcast_to(np.eye(n, dtype=np.complex128), (sl.n_vertices, sl.d, n, n))
        return cls(sl, eye.copy(), eye.copy(), label)

    @classmethod
    def haar(cls, sl: TorusLattice, n: int, rng: np.random.Generator, label: str = "haar") -> "BoundaryFields":
        shape = (sl.n_vertices, sl.d)
        return cls(sl, haar_batch(_u(n), rng, shape), haar_batch(_u(n), rng, shape), label)

    @classmethod
    def twisted(cls, sl: TorusLattice, spin: GroupSpec, rng: np.random.Generator,
                label: str = "twisted") -> "BoundaryFields":
        """Identity boundary with every A-edge multiplied by a random power of the center phase.

        Groups with trivial center get random signs instead.
        """
        z = center_phase(spin)
        order = spin.n if spin.family is Family.SU else 2
        base = z if z is not None else -1.0
        powers = rng.integers(0, order, size=(sl.n_vertices, sl.d))
        phases = np.asarray(base, dtype=np.complex128) ** powers
        bc = cls.identity(sl, spin.n, label)
        bc.A *= phases[:, :, None, None]
        return bc

    def conjugated(self, U: np.ndarray) -> "BoundaryFields":
        """(U A U^dagger, U B U^dagger) edgewise."""
        Ud = dagger(U)
        return BoundaryFields(self.slice, U @ self.A @ Ud, U @ self.B @ Ud, self.label)


@dataclass(frozen=True)
class SigmaParams:
    """Spin group, coupling and slice of a slab sigma model (m = slice dimension)."""

    spec: GroupSpec
    beta: float
    slice: TorusLattice

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")

    @property
    def m(self) -> int:
        return self.slice.d

    @property
    def coupling(self) -> float:
        return self.spec.n * float(self.beta)

    @property
    def beta_star(self) -> float:
        return beta_threshold(self.spec.family, self.spec.n, self.m + 1)

    @property
    def outside_regime(self) -> bool:
        return self.beta >= self.beta_star


def make_sigma_params(family, n: int, beta: float, m: int, L: int) -> SigmaParams:
    return SigmaParams(GroupSpec(Family(family), n), float(beta), get_lattice(m, L))


@dataclass(eq=False)
class SigmaField:
    slice: TorusLattice
    spec: GroupSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.complex128)
        expect = (self.slice.n_vertices, self.spec.n, self.spec.n)
        if self.values.shape != expect:
            raise ValueError(f"spin array shape {self.values.shape} != {expect}")

    @classmethod
    def identity(cls, sl: TorusLattice, spec: GroupSpec) -> "SigmaField":
        eye = np.broadcast_to(np.eye(spec.n, dtype=np.complex128), (sl.n_vertices, spec.n, spec.n))
        return cls(sl, spec, eye.copy())

    @classmethod
    def haar(cls, sl: TorusLattice, spec: GroupSpec, rng: np.random.Generator) -> "SigmaField":
        return cls(sl, spec, haar_batch(spec, rng, sl.n_vertices))

    def copy(self) -> "SigmaField":
        return SigmaField(self.slice, self.spec, self.values.copy())

    def check(self, tol: float = 1e-10) -> bool:
        unit, det = residuals(self.spec, self.values)
        real_ok = self.spec.is_complex or np.max(np.abs(self.values.imag), initial=0.0) <= tol
        return unit <= tol and det <= tol and real_ok


def _spins(Q) -> np.ndarray:
    return Q.values if isinstance(Q, SigmaField) else np.asarray(Q, dtype=np.complex128)


# --- action, gradient ----------------------------------------------------------------


def edge_traces(Q, bc: BoundaryFields) -> np.ndarray:
    """Tr(Q_x A_e Q_y^dagger B_e^dagger) for every slice edge; 0 on self-loops."""
    q = _spins(Q)
    sl = bc.slice
    heads = sl.shift[:, :, 0]
    t = np.einsum("xab,xmbc,xmdc,xmad->xm", q, bc.A, np.conj(q[heads]), np.conj(bc.B))
    t[heads == np.arange(sl.n_vertices)[:, None]] = 0.0
    return t


def sigma_action(Q, bc: BoundaryFields, beta: float, spec: GroupSpec) -> float:
    """S_{A,B}(Q) = N beta sum_e Re Tr(Q_x A_e Q_y^{-1} B_e^{-1})."""
    if beta == 0:
        return 0.0
    return spec.n * float(beta) * float(np.sum(edge_traces(Q, bc).real))


def boundary_from_ym(field: GaugeField, slab: SlabGeometry) -> tuple[BoundaryFields, SigmaField]:
    """Condition a gauge field on the two horizontal planes of a slab.

    ``A`` and ``B`` are the lower and upper plane links.  The spin over slice
    vertex x is the inverse of the vertical link at x (the link read from the
    upper plane down), so each sigma term equals one vertical plaquette:
    Re Tr(Q_x A_e Q_y^{-1} B_e^{-1}) = Re Tr(Q_p).
    """
    U = field.values
    bc = BoundaryFields(slab.slice, U[slab.bottom_edge_of], U[slab.top_edge_of], "ym")
    spins = SigmaField(slab.slice, field.spec, dagger(U[slab.vertical_edge_of]))
    return bc, spins


def environments(Q, bc: BoundaryFields) -> np.ndarray:
    """M_x with S = N beta Re Tr(Q_x M_x) + (terms without Q_x)."""
    sl = bc.slice
    return K.sigma_all_environments(_spins(Q), bc.A, bc.B, sl.shift, sl.d)


def sigma_gradients(Q, bc: BoundaryFields, beta: float, spec: GroupSpec) -> np.ndarray:
    """Riemannian gradient at every vertex as algebra matrices ``(V, N, N)``.

    d/dt S(exp(tX) Q_x) = N beta Re Tr(X Q_x M_x) = <X, -N beta Q_x M_x>, so the
    gradient is the algebra projection of -N beta Q_x M_x.
    """
    q = _spins(Q)
    P = q @ environments(q, bc)
    return project_algebra(spec, -spec.n * float(beta) * P)


def sigma_gradient(Q, bc: BoundaryFields, beta: float, spec: GroupSpec, x) -> AlgebraElement:
    v = x if isinstance(x, (int, np.integer)) else bc.slice.vertex_index(x)
    g = sigma_gradients(Q, bc, beta, spec)[v]
    return AlgebraElement(spec, matrix_to_coeffs(spec, g))


# --- samplers ----------------------------------------------------------------------


class SigmaSampler:
    """Sweeps targeting exp(S_{A,B}) dQ.

    SU(2) uses the exact heat bath by default; other groups use Metropolis
    with proposals exp(eps X) Q_x and a step tuned toward 50% acceptance.
    """

    def __init__(self, params: SigmaParams, bc: BoundaryFields, method: str = "auto",
                 proposal_scale: float = 0.5, target_acceptance: float = 0.5):
        su2 = params.spec.family is Family.SU and params.spec.n == 2
        if method == "auto":
            method = "heatbath" if su2 else "metropolis"
        if method == "heatbath" and not su2:
            raise ValueError("heat bath is only available for SU(2)")
        if method not in ("heatbath", "metropolis"):
            raise ValueError(f"unknown sampler {method!r}")
        if bc.n != params.spec.n:
            raise ValueError("boundary fields and spins must have the same matrix size")
        self.params = params
        self.bc = bc
        self.method = method
        self.proposal_scale = float(proposal_scale)
        self.target_acceptance = target_acceptance

    def sweep(self, Q: SigmaField, rng: np.random.Generator) -> float:
        p, bc, sl = self.params, self.bc, self.bc.slice
        q = Q.values
        if p.beta == 0:
            q[:] = haar_batch(p.spec, rng, sl.n_vertices)
            return 1.0
        if self.method == "heatbath":
            K.sigma_heatbath_su2_sweep(q, bc.A, bc.B, sl.shift, sl.d, p.coupling, rng)
            acc = 1.0
        else:
            kicks = proposal_kicks(p.spec, rng, sl.n_vertices, self.proposal_scale)
            u = rng.random(sl.n_vertices)
            acc = K.sigma_metropolis_sweep(q, bc.A, bc.B, sl.shift, sl.d, p.coupling, kicks, u) / sl.n_vertices
        K.reorthonormalize(q, p.spec.family is Family.SU)
        return acc

    def tune(self, acceptance: float) -> None:
        if self.method != "metropolis":
            return
        s = self.proposal_scale * math.exp(acceptance - self.target_acceptance)
        self.proposal_scale = min(max(s, 1e-4), 2.0 * math.pi)


def sigma_mcmc_sweep(Q: SigmaField, bc: BoundaryFields, params: SigmaParams, rng: np.random.Generator,
                     proposal_scale: float = 0.5, method: str = "metropolis") -> SigmaField:
    """One Metropolis sweep over all slice vertices (in place)."""
    SigmaSampler(params, bc, method, proposal_scale).sweep(Q, rng)
    return Q


def sigma_langevin_step(Q: SigmaField, bc: BoundaryFields, params: SigmaParams, rng: np.random.Generator,
                        dt: float = 0.01, noise: np.ndarray | None = None) -> SigmaField:
    """Geodesic Euler-Maruyama step Q_x <- exp(dt grad_x S + sqrt(2 dt) xi_x) Q_x.

    All vertices move from the same pre-step configuration.  ``noise`` may
    supply the standard Gaussian algebra elements ``xi`` (shape ``(V, N, N)``).
    """
    if not 0 < dt <= MAX_LANGEVIN_DT:
        raise StepTooLarge(f"dt = {dt} outside (0, {MAX_LANGEVIN_DT}]")
    spec = params.spec
    if noise is None:
        noise = random_algebra_batch(spec, rng, Q.slice.n_vertices)
    drift = sigma_gradients(Q, bc, params.beta, spec) if params.beta else 0.0
    step = exp_batch(spec, dt * drift + math.sqrt(2.0 * dt) * noise)
    new = (step @ Q.values).astype(np.complex128)
    K.reorthonormalize(new, spec.family is Family.SU)
    return SigmaField(Q.slice, spec, new)


# --- observables -------------------------------------------------------------------


@dataclass(frozen=True)
class EntryObservable:
    """Matrix entry f_x^{ij} = (Q_x)_{ij} (kind "f") or g_x^{ij} = (Q_x^{-1})_{ij} (kind "g").

    Indices are 1-based.  The support is the single vertex x, and the sup-norm
    of the gradient is at most 1 (``gradient_bound``).
    """

    kind: str
    x: tuple
    i: int = 1
    j: int = 1

    def __post_init__(self):
        if self.kind not in ("f", "g"):
            raise ValueError("kind must be 'f' or 'g'")
        object.__setattr__(self, "x", tuple(int(c) for c in self.x))

    def validate(self, n: int) -> None:
        if not (1 <= self.i <= n and 1 <= self.j <= n):
            raise ValueError(f"entry ({self.i}, {self.j}) outside 1..{n}")

    @property
    def support(self) -> frozenset:
        return frozenset({self.x})

    gradient_bound = 1.0

    def of_matrices(self, q: np.ndarray) -> np.ndarray:
        """Value on a stack of spin matrices ``(..., N, N)`` at this vertex."""
        if self.kind == "f":
            return q[..., self.i - 1, self.j - 1]
        return np.conj(q[..., self.j - 1, self.i - 1])

    def __call__(self, Q, sl: TorusLattice) -> complex:
        return complex(self.of_matrices(_spins(Q)[sl.vertex_index(self.x)]))


def conditional_means(Q, bc: BoundaryFields, params: SigmaParams) -> np.ndarray:
    """E[Q_x | all other spins] for every vertex (SU(2) closed form)."""
    return su2_conditional_mean(environments(Q, bc), params.coupling)


def _improvable(params: SigmaParams) -> bool:
    return params.spec.family is Family.SU and params.spec.n == 2 and params.beta > 0


@dataclass(frozen=True)
class PairMeasurement:
    """Columns (F, G, F*G) for each observable pair, for jackknifed covariances.

    With ``improved`` set the single-vertex means use conditional expectations;
    products at distance 1 integrate the first vertex only and at distance >= 2
    both, which is exact because non-adjacent spins are conditionally
    independent given the rest.
    """

    pairs: tuple
    improved: bool = False

    def __call__(self, Q: SigmaField, bc: BoundaryFields, params: SigmaParams) -> np.ndarray:
        q = Q.values
        sl = bc.slice
        qbar = conditional_means(q, bc, params) if self.improved else q
        out = np.empty(3 * len(self.pairs), dtype=np.complex128)
        for k, (o1, o2) in enumerate(self.pairs):
            x, y = sl.vertex_index(o1.x), sl.vertex_index(o2.x)
            dist = sl.distance(o1.x, o2.x)
            f_bar, g_bar = o1.of_matrices(qbar[x]), o2.of_matrices(qbar[y])
            if dist == 0:
                prod = o1.of_matrices(q[x]) * o2.of_matrices(q[y])
            elif dist == 1:
                prod = f_bar * o2.of_matrices(q[y])
            else:
                prod = f_bar * g_bar
            out[3 * k: 3 * k + 3] = (f_bar, g_bar, prod)
        return out


@dataclass(frozen=True)
class EntryMeasurement:
    """Values of several entry observables (conditional means when improved)."""

    observables: tuple
    improved: bool = False

    def __call__(self, Q: SigmaField, bc: BoundaryFields, params: SigmaParams) -> np.ndarray:
        q = conditional_means(Q.values, bc, params) if self.improved else Q.values
        sl = bc.slice
        return np.array([o.of_matrices(q[sl.vertex_index(o.x)]) for o in self.observables])


@dataclass(frozen=True)
class EdgeTerm:
    """Re tr(Q_x A_e Q_y^{-1} B_e^{-1}) on the edge (x, x + mu), normalized trace."""

    x: int = 0
    mu: int = 0

    def __call__(self, Q, bc, params) -> np.ndarray:
        q = _spins(Q)
        y = bc.slice.shift[self.x, self.mu, 0]
        m = q[self.x] @ bc.A[self.x, self.mu] @ dagger(q[y]) @ dagger(bc.B[self.x, self.mu])
        return np.array([np.trace(m).real / q.shape[-1]])


@dataclass(frozen=True)
class TraceSquare:
    """|tr Q_x|^2 with the normalized trace."""

    x: int = 0

    def __call__(self, Q, bc, params) -> np.ndarray:
        q = _spins(Q)
        return np.array([abs(np.trace(q[self.x]) / q.shape[-1]) ** 2])


@dataclass(frozen=True)
class Stack:
    """Concatenate the outputs of several measurements."""

    parts: tuple

    def __call__(self, Q, bc, params) -> np.ndarray:
        return np.concatenate([np.atleast_1d(p(Q, bc, params)) for p in self.parts])


# --- chains ------------------------------------------------------------------------


def _sigma_chain(params: SigmaParams, bc: BoundaryFields, measure, cfg: ChainConfig, method: str,
                 chain_index: int, rng: np.random.Generator) -> ChainTrace:
    Q = SigmaField.haar(params.slice, params.spec, rng)
    if method == "disintegration":
        sampler = DisintegrationSampler(params, bc)
    else:
        sampler = SigmaSampler(params, bc, method)
    for _ in range(cfg.burn_in):
        sampler.tune(sampler.sweep(Q, rng))
    sweeps = cfg.measured_sweeps()
    rows, acc, nxt = [], 0.0, 0
    for s in range(cfg.burn_in, cfg.sweeps):
        acc += sampler.sweep(Q, rng)
        if nxt < sweeps.size and s == sweeps[nxt]:
            rows.append(np.asarray(measure(Q, bc, params), dtype=np.complex128).ravel())
            nxt += 1
    return ChainTrace(sweeps, np.array(rows), acc / (cfg.sweeps - cfg.burn_in))


def sigma_sample(measure, bc: BoundaryFields, params: SigmaParams, cfg: ChainConfig, method: str = "auto",
                 workers: int | None = None) -> Trace:
    """Run ``cfg.n_chains`` chains and record ``measure(Q, bc, params)``.

    ``method`` is ``"auto"``, ``"heatbath"``, ``"metropolis"`` or (U(N) only)
    ``"disintegration"``.
    """
    cfg.check_budget()
    job = functools.partial(_sigma_chain, params, bc, measure, cfg, method)
    return Trace.merge(run_chains(job, cfg.n_chains, cfg.seed, workers))


@dataclass(frozen=True)
class CovEstimate:
    value: complex
    stderr: float
    distance: int
    boundary_id: str = ""
    n_samples: int = 0

    def to_dict(self) -> dict:
        return {"re": self.value.real, "im": self.value.imag, "stderr": self.stderr,
                "distance": self.distance, "boundary_id": self.boundary_id, "n_samples": self.n_samples}


def covariance_scan(bc: BoundaryFields, params: SigmaParams, pairs, cfg: ChainConfig, improved="auto",
                    method: str = "auto", workers: int | None = None) -> list[CovEstimate]:
    """Cov(F, G) = E[F G] - E[F] E[G] for each pair of entry observables, in one run.

    Errors come from a 50-bin jackknife.  ``improved="auto"`` uses conditional
    means whenever the spin group is SU(2).
    """
    pairs = tuple((o1, o2) for o1, o2 in pairs)
    for o1, o2 in pairs:
        o1.validate(params.spec.n)
        o2.validate(params.spec.n)
    if improved == "auto":
        improved = _improvable(params)
    trace = sigma_sample(PairMeasurement(pairs, bool(improved)), bc, params, cfg, method, workers)
    out = []
    for k, (o1, o2) in enumerate(pairs):
        v = trace.values[:, :, 3 * k: 3 * k + 3]
        val, err = jackknife_covariance(v[..., 0], v[..., 1], f_for_product=v[..., 2],
                                        g_for_product=np.ones_like(v[..., 2]))
        out.append(CovEstimate(complex(val), err, bc.slice.distance(o1.x, o2.x), bc.label, v[..., 0].size))
    return out


def covariance_estimate(bc: BoundaryFields, params: SigmaParams, obs1: EntryObservable, obs2: EntryObservable,
                        cfg: ChainConfig, improved="auto", method: str = "auto") -> CovEstimate:
    """Jackknife estimate of Cov_{A,B}(obs1, obs2) = E[obs1 obs2] - E[obs1] E[obs2].

    Raises
    ------
    InsufficientSamples
        Fewer than 100 measurements in total.
    """
    return covariance_scan(bc, params, [(obs1, obs2)], cfg, improved, method)[0]


def require_center(spec: GroupSpec) -> complex:
    z = center_phase(spec)
    if z is None:
        raise NoCenter(f"{spec} has trivial center; the one-point vanishing argument does not apply")
    return z


def one_point_scan(bc: BoundaryFields, params: SigmaParams, observables, cfg: ChainConfig, improved="auto",
                   method: str = "auto", workers: int | None = None) -> list[Estimate]:
    require_center(params.spec)
    observables = tuple(observables)
    for o in observables:
        o.validate(params.spec.n)
    if improved == "auto":
        improved = _improvable(params)
    trace = sigma_sample(EntryMeasurement(observables, bool(improved)), bc, params, cfg, method, workers)
    return trace.estimates()


def one_point_estimate(bc: BoundaryFields, params: SigmaParams, obs: EntryObservable, cfg: ChainConfig,
                       improved="auto", method: str = "auto") -> Estimate:
    """Estimate E_{A,B}[f]; the center symmetry forces it to vanish.

    Raises
    ------
    NoCenter
        If the spin group has no nontrivial central element.
    """
    return one_point_scan(bc, params, [obs], cfg, improved, method)[0]


# --- U(1) x SU(N) disintegration ---------------------------------------------------


class DisintegrationSampler:
    """Gibbs sampler for mu_{A,B} on U(N) through Q_x = z_x Qt_x.

    The pair (z, Qt) in U(1)^V x SU(N)^V is sampled from exp(S_{A,B}(z Qt)).
    Given Qt, each z_x has a von Mises conditional; given z, Qt follows the
    SU(N) model with rescaled boundary At_e = z_x z_y^{-1} A_e.  The state
    ``Q`` seen by callers is the product z Qt, a U(N) spin field.
    """

    def __init__(self, params: SigmaParams, bc: BoundaryFields, method: str = "auto"):
        if params.spec.family is not Family.U:
            raise ValueError("the disintegration sampler targets U(N) spins")
        self.params = params
        self.bc = bc
        self.su_params = SigmaParams(GroupSpec(Family.SU, params.spec.n), params.beta, params.slice)
        self.inner = SigmaSampler(self.su_params, bc, method)

    def split(self, Q: SigmaField, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Write Q = z Qt with det(Qt) = 1, using a uniformly random N-th root."""
        n = self.params.spec.n
        det = np.linalg.det(Q.values)
        k = rng.integers(0, n, size=det.shape)
        z = np.exp(1j * (np.angle(det) + 2.0 * np.pi * k) / n)
        return z, Q.values / z[:, None, None]

    def update_phases(self, z: np.ndarray, qt: np.ndarray, rng: np.random.Generator) -> None:
        sl = self.bc.slice
        n = self.params.spec.n
        t = edge_traces(qt, self.bc)
        heads = sl.shift[:, :, 0]
        tails = sl.shift[:, :, 1]
        for x in range(sl.n_vertices):
            c = 0j
            for mu in range(sl.d):
                y = heads[x, mu]
                if y == x:
                    continue
                w = tails[x, mu]
                c += np.conj(z[y]) * t[x, mu] + np.conj(z[w] * t[w, mu])
            kappa = n * self.params.beta * abs(c)
            mu0 = -np.angle(c) if kappa > 0 else 0.0
            z[x] = np.exp(1j * rng.vonmises(mu0, kappa)) if kappa > 0 else np.exp(2j * np.pi * rng.random())

    def sweep(self, Q: SigmaField, rng: np.random.Generator) -> float:
        if self.params.beta == 0:
            Q.values[:] = haar_batch(self.params.spec, rng, Q.slice.n_vertices)
            return 1.0
        z, qt = self.split(Q, rng)
        self.update_phases(z, qt, rng)
        twist = z[:, None] * np.conj(z[self.bc.slice.shift[:, :, 0]])
        self.inner.bc = BoundaryFields(self.bc.slice, twist[:, :, None, None] * self.bc.A, self.bc.B, self.bc.label)
        tilde = SigmaField(Q.slice, self.su_params.spec, qt)
        acc = self.inner.sweep(tilde, rng)
        self.inner.tune(acc)
        Q.values[:] = z[:, None, None] * tilde.values
        return acc

    def tune(self, acceptance: float) -> None:
        pass


def disintegration_sampler(bc: BoundaryFields, beta: float, n: int, rng: np.random.Generator,
                           state: SigmaField | None = None, sweeps: int = 1) -> SigmaField:
    """Advance a U(N) spin field by ``sweeps`` Gibbs sweeps of the U(1) x SU(N) sampler.

    Starts from Haar-random spins when ``state`` is None.
    """
    params = SigmaParams(_u(n), float(beta), bc.slice)
    Q = SigmaField.haar(bc.slice, params.spec, rng) if state is None else state.copy()
    sampler = DisintegrationSampler(params, bc)
    for _ in range(sweeps):
        sampler.sweep(Q, rng)
    return Q


# --- boundary ensembles ------------------------------------------------------------


BOUNDARY_KINDS = ("haar", "identity", "twisted")


def boundary_ensemble(sl: TorusLattice, spin: GroupSpec, kinds=BOUNDARY_KINDS, seed: int = 0) -> list[BoundaryFields]:
    """One boundary draw per entry of ``kinds``, labeled ``"<kind>-<index>"``.

    Random draws use auxiliary streams derived from ``seed`` and the position
    in the list, so the ensemble is reproducible.
    """
    out = []
    for k, kind in enumerate(kinds):
        rng = derive_aux_rng(seed, k, "boundary")
        label = f"{kind}-{k}"
        if kind == "haar":
            out.append(BoundaryFields.haar(sl, spin.n, rng, label))
        elif kind == "identity":
            out.append(BoundaryFields.identity(sl, spin.n, label))
        elif kind == "twisted":
            out.append(BoundaryFields.twisted(sl, spin, rng, label))
        else:
            raise ValueError(f"unknown boundary kind {kind!r}")
    return out
