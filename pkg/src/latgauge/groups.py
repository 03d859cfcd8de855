"""Compact matrix groups U(N), SU(N), SO(N) and their Lie algebras.

All algebra inner products use ``<X, Y> = Re Tr(X^dagger Y)`` with no extra
normalization.  Functions ending in ``_batch`` act on stacks of matrices with
shape ``(..., N, N)``; the :class:`GroupElement` / :class:`AlgebraElement`
wrappers are the single-matrix API.
"""
from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularInput

UNITARITY_TOL = 1e-10


class Family(str, enum.Enum):
    U = "U"
    SU = "SU"
    SO = "SO"


@dataclass(frozen=True)
class GroupSpec:
    family: Family
    n: int

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError(f"matrix size must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if self.family is Family.SU and self.n < 2:
            raise ValueError("SU(1) is the trivial group and is excluded")

    @property
    def is_complex(self) -> bool:
        return self.family is not Family.SO

    @property
    def dtype(self):
        return np.complex128 if self.is_complex else np.float64

    @property
    def dim(self) -> int:
        n = self.n
        return {Family.U: n * n, Family.SU: n * n - 1, Family.SO: n * (n - 1) // 2}[self.family]

    def __str__(self):
        return f"{self.family.value}({self.n})"

    @classmethod
    def parse(cls, text: str) -> "GroupSpec":
        """Parse strings like ``"SU(2)"`` or ``"SO4"``."""
        s = text.strip().upper().replace("(", " ").replace(")", " ")
        for fam in ("SU", "SO", "U"):
            if s.startswith(fam):
                return cls(Family(fam), int(s[len(fam):]))
        raise ValueError(f"cannot parse group {text!r}")


@functools.lru_cache(maxsize=None)
def _basis_array(spec: GroupSpec) -> np.ndarray:
    n = spec.n
    mats = []
    for i in range(n):
        for j in range(i + 1, n):
            m = np.zeros((n, n), dtype=np.complex128)
            m[i, j], m[j, i] = 1.0, -1.0
            mats.append(m / np.sqrt(2.0))
            if spec.is_complex:
                m = np.zeros((n, n), dtype=np.complex128)
                m[i, j] = m[j, i] = 1j
                mats.append(m / np.sqrt(2.0))
    if spec.is_complex:
        # generalized Gell-Mann diagonals, then i*I/sqrt(N) for u(N)
        for k in range(1, n):
            diag = np.zeros(n)
            diag[:k] = 1.0
            diag[k] = -k
            mats.append(1j * np.diag(diag) / np.sqrt(k * (k + 1)))
        if spec.family is Family.U:
            mats.append(1j * np.eye(n) / np.sqrt(n))
    out = np.array(mats, dtype=np.complex128).reshape(len(mats), n, n)
    if not spec.is_complex:
        out = out.real.copy()
    out.setflags(write=False)
    return out


def algebra_basis(spec: GroupSpec) -> list["AlgebraElement"]:
    """Orthonormal basis of the Lie algebra under Re Tr(X^dagger Y)."""
    dim = spec.dim
    return [AlgebraElement(spec, np.eye(dim)[a]) for a in range(dim)]


def basis_matrices(spec: GroupSpec) -> np.ndarray:
    """The basis as a read-only array of shape ``(dim, N, N)``."""
    return _basis_array(spec)


def inner(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Re Tr(X^dagger Y) over the trailing two axes."""
    return np.real(np.einsum("...ij,...ij->...", np.conj(x), y))


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def coeffs_to_matrix(spec: GroupSpec, coeffs: np.ndarray) -> np.ndarray:
    """Map coefficient arrays ``(..., dim)`` to algebra matrices ``(..., N, N)``."""
    return np.tensordot(np.asarray(coeffs, dtype=float), _basis_array(spec), axes=(-1, 0))


def matrix_to_coeffs(spec: GroupSpec, x: np.ndarray) -> np.ndarray:
    """Orthogonal projection of matrices onto the algebra, in basis coordinates."""
    b = _basis_array(spec)
    return np.real(np.einsum("aij,...ij->...a", np.conj(b), x))


def project_algebra(spec: GroupSpec, z: np.ndarray) -> np.ndarray:
    """Frobenius-orthogonal projection of arbitrary matrices onto the algebra."""
    if not spec.is_complex:
        r = np.real(z)
        return 0.5 * (r - np.swapaxes(r, -1, -2))
    a = 0.5 * (z - dagger(z))
    if spec.family is Family.SU:
        tr = np.trace(a, axis1=-2, axis2=-1)[..., None, None]
        a = a - tr * np.eye(spec.n) / spec.n
    return a


def random_algebra_batch(spec: GroupSpec, rng: np.random.Generator, shape=()) -> np.ndarray:
    """Standard Gaussian algebra elements (unit variance per basis direction)."""
    shape = tuple(np.atleast_1d(shape)) if shape != () else ()
    return coeffs_to_matrix(spec, rng.standard_normal(shape + (spec.dim,)))


def exp_batch(spec: GroupSpec, x: np.ndarray) -> np.ndarray:
    """Matrix exponential of algebra elements by Hermitian eigendecomposition."""
    h = 1j * np.asarray(x, dtype=np.complex128)
    h = 0.5 * (h + dagger(h))
    w, v = np.linalg.eigh(h)
    out = (v * np.exp(-1j * w)[..., None, :]) @ dagger(v)
    if not spec.is_complex:
        return np.ascontiguousarray(out.real)
    return out


def log_batch(spec: GroupSpec, q: np.ndarray) -> np.ndarray:
    """Principal logarithm of unitary matrices (eigenvalues away from -1)."""
    w, v = np.linalg.eig(np.asarray(q, dtype=np.complex128))
    ang = np.angle(w)
    out = (v * (1j * ang)[..., None, :]) @ np.linalg.inv(v)
    out = project_algebra(GroupSpec(Family.U, spec.n), out)
    if not spec.is_complex:
        return np.ascontiguousarray(out.real)
    return out


def haar_batch(spec: GroupSpec, rng: np.random.Generator, shape=()) -> np.ndarray:
    """Haar-distributed matrices of shape ``shape + (N, N)``.

    QR of a Ginibre matrix with the phases of ``diag(R)`` moved into ``Q``;
    SU(N) divides out a determinant root, SO(N) flips one column when det = -1.
    """
    shape = tuple(np.atleast_1d(shape)) if shape != () else ()
    n = spec.n
    if spec.is_complex:
        z = rng.standard_normal(shape + (n, n)) + 1j * rng.standard_normal(shape + (n, n))
        z /= np.sqrt(2.0)
    else:
        z = rng.standard_normal(shape + (n, n))
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    ph = d / np.abs(d)
    q = q * ph[..., None, :]
    if spec.family is Family.SU:
        det = np.linalg.det(q)
        q = q * (det ** (-1.0 / n))[..., None, None]
    elif spec.family is Family.SO:
        det = np.linalg.det(q)
        q[..., :, 0] *= np.sign(det)[..., None]
    return np.ascontiguousarray(q)


def project_batch(spec: GroupSpec, m: np.ndarray, *, rcond: float = 1e-8) -> np.ndarray:
    """Nearest group element by polar decomposition plus determinant fix."""
    m = np.asarray(m, dtype=spec.dtype)
    u, s, vh = np.linalg.svd(m)
    if np.any(s[..., -1] <= rcond * np.maximum(s[..., 0], 1e-300)):
        raise SingularInput("matrix is rank deficient; cannot project onto the group")
    q = u @ vh
    if spec.family is Family.SU:
        det = np.linalg.det(q)
        q = q * (det ** (-1.0 / spec.n))[..., None, None]
    elif spec.family is Family.SO:
        det = np.linalg.det(q)
        if np.any(det < 0):
            raise SingularInput("matrix lies in the det = -1 component of O(N)")
    return np.ascontiguousarray(q)


def reunitarize(spec: GroupSpec, q: np.ndarray) -> np.ndarray:
    """Cheap re-projection used after every sweep; same result as project_batch."""
    return project_batch(spec, q)


def residuals(spec: GroupSpec, q: np.ndarray) -> tuple[float, float]:
    """Max-norm unitarity residual and determinant residual over a stack."""
    q = np.asarray(q)
    n = spec.n
    unit = np.max(np.abs(dagger(q) @ q - np.eye(n)), initial=0.0)
    if spec.family is Family.U:
        det = 0.0
    else:
        det = float(np.max(np.abs(np.linalg.det(q) - 1.0), initial=0.0))
    return float(unit), det


def center_phase(spec: GroupSpec) -> complex | None:
    """Scalar z != 1 with z*I in the group, or None for trivial center."""
    if spec.family is Family.SU:
        return complex(np.exp(2j * np.pi / spec.n))
    if spec.family is Family.U:
        return -1.0 + 0j
    if spec.n % 2 == 0:
        return -1.0 + 0j
    return None


def center_element(spec: GroupSpec) -> "GroupElement | None":
    z = center_phase(spec)
    if z is None:
        return None
    mat = z * np.eye(spec.n, dtype=np.complex128)
    return GroupElement(spec, mat if spec.is_complex else mat.real)


@dataclass(frozen=True, eq=False)
class GroupElement:
    spec: GroupSpec
    mat: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.mat, dtype=self.spec.dtype if self.spec.is_complex else None)
        if not self.spec.is_complex:
            if np.iscomplexobj(m):
                if np.max(np.abs(m.imag), initial=0.0) > UNITARITY_TOL:
                    raise ValueError("SO(N) elements must be real")
                m = m.real
            m = m.astype(np.float64)
        if m.shape != (self.spec.n, self.spec.n):
            raise ValueError(f"expected {self.spec.n}x{self.spec.n} matrix, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)

    def check(self, tol: float = UNITARITY_TOL) -> bool:
        unit, det = residuals(self.spec, self.mat)
        return unit <= tol and det <= tol

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(self.spec, self.mat @ other.mat)

    def inverse(self) -> "GroupElement":
        return GroupElement(self.spec, dagger(self.mat))

    def trace(self) -> complex:
        return complex(np.trace(self.mat))

    @classmethod
    def identity(cls, spec: GroupSpec) -> "GroupElement":
        return cls(spec, np.eye(spec.n, dtype=spec.dtype))


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    spec: GroupSpec
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64).reshape(-1)
        if c.shape != (self.spec.dim,):
            raise ValueError(f"{self.spec} algebra has dimension {self.spec.dim}, got {c.size} coefficients")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def matrix(self) -> np.ndarray:
        return coeffs_to_matrix(self.spec, self.coeffs)

    @classmethod
    def from_matrix(cls, spec: GroupSpec, x: np.ndarray) -> "AlgebraElement":
        return cls(spec, matrix_to_coeffs(spec, x))

    def norm2(self) -> float:
        return float(self.coeffs @ self.coeffs)

    def __neg__(self):
        return AlgebraElement(self.spec, -self.coeffs)

    def __mul__(self, s: float):
        return AlgebraElement(self.spec, s * self.coeffs)

    __rmul__ = __mul__


def exp_map(x: AlgebraElement) -> GroupElement:
    return GroupElement(x.spec, exp_batch(x.spec, x.matrix))


def haar_sample(spec: GroupSpec, rng: np.random.Generator) -> GroupElement:
    return GroupElement(spec, haar_batch(spec, rng))


def project_to_group(m: np.ndarray, spec: GroupSpec) -> GroupElement:
    return GroupElement(spec, project_batch(spec, m))
