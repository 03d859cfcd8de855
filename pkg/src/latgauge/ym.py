"""Lattice Yang-Mills measure exp(S_YM) dQ on the torus and its samplers.

The action is ``S_YM(Q) = N beta sum_p Re Tr(Q_p)`` over positively oriented
plaquettes.  Fields are stored as a ``(n_edges, N, N)`` complex array in the
lattice's edge order (``v * d + mu``).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import _kernels as K
from .groups import (
    Family,
    GroupElement,
    GroupSpec,
    dagger,
    exp_batch,
    haar_batch,
    random_algebra_batch,
    residuals,
)
from .lattice import Edge, Loop, TorusLattice, get_lattice
from .thresholds import beta_threshold

log = logging.getLogger(__name__)

MAX_PROPOSAL_SCALE = 2.0 * math.pi


@dataclass(frozen=True)
class YMParams:
    spec: GroupSpec
    beta: float
    lattice: TorusLattice

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")

    @property
    def coupling(self) -> float:
        """N * beta, the prefactor of Re Tr in the action."""
        return self.spec.n * float(self.beta)

    @property
    def beta_star(self) -> float:
        return beta_threshold(self.spec.family, self.spec.n, self.lattice.d)

    @property
    def outside_regime(self) -> bool:
        return self.beta >= self.beta_star


@dataclass(eq=False)
class GaugeField:
    lattice: TorusLattice
    spec: GroupSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.complex128)
        expect = (self.lattice.n_edges, self.spec.n, self.spec.n)
        if v.shape != expect:
            raise ValueError(f"field shape {v.shape} != {expect}")
        self.values = v

    @classmethod
    def identity(cls, lattice: TorusLattice, spec: GroupSpec) -> "GaugeField":
        vals = np.broadcast_to(np.eye(spec.n, dtype=np.complex128), (lattice.n_edges, spec.n, spec.n))
        return cls(lattice, spec, vals.copy())

    @classmethod
    def haar(cls, lattice: TorusLattice, spec: GroupSpec, rng: np.random.Generator) -> "GaugeField":
        return cls(lattice, spec, haar_batch(spec, rng, lattice.n_edges).astype(np.complex128))

    def copy(self) -> "GaugeField":
        return GaugeField(self.lattice, self.spec, self.values.copy())

    def link(self, edge: Edge) -> np.ndarray:
        """Matrix of an oriented edge (inverse for negative orientation)."""
        u = self.values[self.lattice.edge_index(edge)]
        return u if edge.orientation == 1 else dagger(u)

    def __getitem__(self, edge: Edge) -> GroupElement:
        m = self.link(edge)
        return GroupElement(self.spec, m if self.spec.is_complex else m.real)

    def check(self, tol: float = 1e-10) -> bool:
        unit, det = residuals(self.spec, self.values)
        real_ok = self.spec.is_complex or np.max(np.abs(self.values.imag), initial=0.0) <= tol
        return unit <= tol and det <= tol and real_ok


# --- action and observables --------------------------------------------------


def plaquette_retraces(field: GaugeField) -> np.ndarray:
    return K.plaquette_retrace(field.values, field.lattice.plaq_edges)


def ym_action(field: GaugeField, params: YMParams) -> float:
    if params.beta == 0:
        return 0.0
    return params.coupling * float(np.sum(plaquette_retraces(field)))


def loop_matrix(field: GaugeField, loop: Loop) -> np.ndarray:
    out = np.eye(field.spec.n, dtype=np.complex128)
    for e in loop.edges:
        out = out @ field.link(e)
    return out


def wilson_loop(field: GaugeField, loop: Loop) -> complex:
    """Normalized trace (1/N) Tr of the ordered loop product."""
    return complex(np.trace(loop_matrix(field, loop))) / field.spec.n


def gauge_transform(field: GaugeField, g) -> GaugeField:
    """Q_e -> g_x Q_e g_y^{-1} for e = (x, y).

    ``g`` is a ``(n_vertices, N, N)`` array, a sequence of GroupElements, or a
    mapping from vertex tuples to GroupElements.
    """
    lat = field.lattice
    if isinstance(g, dict):
        g = np.array([np.asarray(g[lat.vertex(v)].mat) for v in range(lat.n_vertices)])
    elif not isinstance(g, np.ndarray):
        g = np.array([np.asarray(x.mat) for x in g])
    g = np.asarray(g, dtype=np.complex128)
    d = lat.d
    U = field.values.reshape(lat.n_vertices, d, field.spec.n, field.spec.n)
    heads = lat.shift[:, :, 0]
    new = g[:, None] @ U @ dagger(g[heads])
    return GaugeField(lat, field.spec, new.reshape(field.values.shape))


def staple_sum(field: GaugeField, e: Edge) -> np.ndarray:
    """M_e with S_YM = N beta Re Tr(Q_e M_e) + (terms without Q_e)."""
    if e.orientation != 1:
        raise ValueError("staples are defined for positively oriented edges")
    M = np.empty((field.spec.n, field.spec.n), dtype=np.complex128)
    K.ym_staple(field.values, field.lattice.shift, field.lattice.d, field.lattice.edge_index(e), M)
    return M


def conditional_mean_links(field: GaugeField, params: YMParams) -> np.ndarray:
    """E[Q_e | all other links] for every edge (SU(2) only).

    For environment M = k W (W in SU(2)) the conditional law of V = Q_e W is
    exp(2 N beta k a0) dHaar, so E[Q_e | rest] = I_2(lam)/I_1(lam) W^dagger
    with lam = 2 N beta k.
    """
    if not (params.spec.family is Family.SU and params.spec.n == 2):
        raise ValueError("closed-form link integration is implemented for SU(2) only")
    Ms = K.ym_all_staples(field.values, field.lattice.shift, field.lattice.d)
    return su2_conditional_mean(Ms, params.coupling)


def su2_conditional_mean(Ms: np.ndarray, coupling: float) -> np.ndarray:
    ks, wd = K.su2_conditional_params(Ms)
    lam = 2.0 * coupling * ks
    r = np.zeros_like(lam)
    pos = lam > 0
    r[pos] = special.ive(2, lam[pos]) / special.ive(1, lam[pos])
    return r[:, None, None] * wd


# --- loop shapes -------------------------------------------------------------


def rectangle_steps(mu: int, nu: int, R: int, T: int) -> np.ndarray:
    steps = [(mu, 1)] * R + [(nu, 1)] * T + [(mu, -1)] * R + [(nu, -1)] * T
    return np.array(steps, dtype=np.int64)


def _step_links(lattice: TorusLattice, steps: np.ndarray, v0: int = 0) -> list[int]:
    v, out = v0, []
    for mu, s in steps:
        if s > 0:
            out.append(v * lattice.d + mu)
            v = lattice.shift[v, mu, 0]
        else:
            v = lattice.shift[v, mu, 1]
            out.append(v * lattice.d + mu)
    return out


def integrable_links(lattice: TorusLattice, steps: np.ndarray) -> np.ndarray:
    """Greedy mask of loop links that share no plaquette with each other.

    Those links are conditionally independent given the rest of the field,
    so replacing each by its conditional mean leaves the loop expectation
    unchanged.
    """
    links = _step_links(lattice, steps)
    used_plaqs: set[int] = set()
    chosen: set[int] = set()
    mask = np.zeros(len(links), dtype=np.bool_)
    for i, e in enumerate(links):
        if links.count(e) > 1 or e in chosen:
            continue
        plaqs = {int(p) for p in lattice.edge_plaqs[e, :, 0]}
        if plaqs & used_plaqs:
            continue
        mask[i] = True
        chosen.add(e)
        used_plaqs |= plaqs
    return mask


@dataclass(frozen=True)
class RectangleSet:
    """Observable: R x T Wilson loops averaged over position, plane and orientation.

    With ``improved`` set (SU(2) only) the integrable links of each loop are
    replaced by their conditional means, an unbiased lower-variance estimator.
    """

    shapes: tuple
    improved: bool = False

    def __post_init__(self):
        object.__setattr__(self, "shapes", tuple((int(r), int(t)) for r, t in self.shapes))

    def _plan(self, lattice):
        key = (lattice.d, lattice.L)
        cache = self.__dict__.setdefault("_plans", {})
        if key not in cache:
            plans = []
            for R, T in self.shapes:
                variants = []
                for mu in range(lattice.d):
                    for nu in range(mu + 1, lattice.d):
                        for a, b in [(R, T)] + ([(T, R)] if R != T else []):
                            steps = rectangle_steps(mu, nu, a, b)
                            variants.append((steps, integrable_links(lattice, steps)))
                plans.append(variants)
            cache[key] = plans
        return cache[key]

    def __call__(self, field: GaugeField, params: YMParams) -> np.ndarray:
        lat = field.lattice
        ubar = conditional_mean_links(field, params) if self.improved else field.values
        out = np.empty(len(self.shapes), dtype=np.complex128)
        for i, variants in enumerate(self._plan(lat)):
            acc = 0j
            for steps, mask in variants:
                m = mask if self.improved else np.zeros_like(mask)
                acc += K.loop_traces(field.values, lat.shift, lat.d, steps, ubar, m).mean()
            out[i] = acc / len(variants)
        return out


@dataclass(frozen=True)
class LoopAt:
    """Wilson loop of one fixed loop (JSON edge triples)."""

    loop_json: tuple

    @classmethod
    def of(cls, loop: Loop) -> "LoopAt":
        return cls(tuple((tuple(b), d, o) for b, d, o in loop.to_json()))

    def __call__(self, field: GaugeField, params: YMParams) -> np.ndarray:
        loop = Loop.from_json([list(e) for e in self.loop_json], field.lattice.L)
        return np.array([wilson_loop(field, loop)])


@dataclass(frozen=True)
class LinkTrace:
    """Normalized trace of a single link (marginal checks)."""

    edge_index: int = 0

    def __call__(self, field, params):
        return np.array([np.trace(field.values[self.edge_index]) / field.spec.n])


@dataclass(frozen=True)
class Constant:
    value: complex = 1.0

    def __call__(self, field, params):
        return np.array([self.value], dtype=np.complex128)


# --- samplers ----------------------------------------------------------------


def metropolis_accept_probability(delta_s: float) -> float:
    """Acceptance for a symmetric proposal under the weight exp(S)."""
    return 1.0 if delta_s >= 0 else math.exp(delta_s)


def proposal_kicks(spec: GroupSpec, rng: np.random.Generator, n: int, scale: float) -> np.ndarray:
    """exp(scale * X) with X standard Gaussian in the algebra; symmetric under inversion."""
    x = random_algebra_batch(spec, rng, n)
    return exp_batch(spec, scale * x).astype(np.complex128)


class YMSampler:
    """Sweep driver holding the tunable Metropolis step.

    ``method`` is ``"heatbath"`` (SU(2) only), ``"metropolis"``, or ``"auto"``
    (heat bath when available).  At beta = 0 every sweep draws fresh Haar links.
    """

    def __init__(self, params: YMParams, method: str = "auto", proposal_scale: float = 0.5,
                 target_acceptance: float = 0.5):
        su2 = params.spec.family is Family.SU and params.spec.n == 2
        if method == "auto":
            method = "heatbath" if su2 else "metropolis"
        if method == "heatbath" and not su2:
            raise ValueError("heat bath is only available for SU(2)")
        if method not in ("heatbath", "metropolis"):
            raise ValueError(f"unknown sampler {method!r}")
        self.params = params
        self.method = method
        self.proposal_scale = float(proposal_scale)
        self.target_acceptance = target_acceptance

    def sweep(self, field: GaugeField, rng: np.random.Generator) -> float:
        p = self.params
        lat = field.lattice
        if p.beta == 0:
            field.values[:] = haar_batch(p.spec, rng, lat.n_edges)
            return 1.0
        if self.method == "heatbath":
            K.ym_heatbath_su2_sweep(field.values, lat.shift, lat.d, p.coupling, rng)
            acc = 1.0
        else:
            kicks = proposal_kicks(p.spec, rng, lat.n_edges, self.proposal_scale)
            u = rng.random(lat.n_edges)
            acc = K.ym_metropolis_sweep(field.values, lat.shift, lat.d, p.coupling, kicks, u) / lat.n_edges
        K.reorthonormalize(field.values, p.spec.family is Family.SU)
        return acc

    def tune(self, acceptance: float) -> None:
        if self.method != "metropolis":
            return
        s = self.proposal_scale * math.exp(acceptance - self.target_acceptance)
        self.proposal_scale = min(max(s, 1e-4), MAX_PROPOSAL_SCALE)


def mcmc_sweep(field: GaugeField, params: YMParams, rng: np.random.Generator, proposal_scale: float = 0.5,
               method: str = "auto") -> tuple[GaugeField, float]:
    """One full-lattice sweep (in place); returns the field and acceptance rate."""
    acc = YMSampler(params, method, proposal_scale).sweep(field, rng)
    return field, acc


def make_params(family, n: int, beta: float, d: int, L: int) -> YMParams:
    return YMParams(GroupSpec(Family(family), n), float(beta), get_lattice(d, L))
