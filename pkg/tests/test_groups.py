import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize, stats

from latgauge.errors import SingularInput
from latgauge.groups import (
    AlgebraElement,
    Family,
    GroupElement,
    GroupSpec,
    algebra_basis,
    basis_matrices,
    center_element,
    coeffs_to_matrix,
    exp_batch,
    exp_map,
    haar_batch,
    haar_sample,
    inner,
    log_batch,
    project_batch,
    project_to_group,
    random_algebra_batch,
    residuals,
)

SPECS = [GroupSpec(Family.U, 1), GroupSpec(Family.U, 3), GroupSpec(Family.SU, 2), GroupSpec(Family.SU, 3),
         GroupSpec(Family.SO, 3), GroupSpec(Family.SO, 4)]


def power_series_exp(x, terms=40):
    out = np.eye(x.shape[0], dtype=complex)
    term = np.eye(x.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ x / k
        out = out + term
    return out


class TestSpec:
    def test_su1_rejected(self):
        with pytest.raises(ValueError):
            GroupSpec(Family.SU, 1)

    def test_scalar_field(self):
        assert GroupSpec("SO", 4).dtype == np.float64
        assert GroupSpec("U", 2).is_complex and GroupSpec("SU", 2).is_complex

    def test_parse(self):
        assert GroupSpec.parse("SU(3)") == GroupSpec(Family.SU, 3)
        assert GroupSpec.parse("so4") == GroupSpec(Family.SO, 4)


class TestBasis:
    @pytest.mark.parametrize("spec,dim", [(GroupSpec("SU", 2), 3), (GroupSpec("SO", 4), 6),
                                          (GroupSpec("U", 3), 9), (GroupSpec("SU", 4), 15)])
    def test_dimension(self, spec, dim):
        assert len(algebra_basis(spec)) == dim == spec.dim

    @pytest.mark.parametrize("spec", SPECS)
    def test_orthonormal(self, spec):
        b = basis_matrices(spec)
        gram = inner(b[:, None], b[None, :])
        np.testing.assert_allclose(gram, np.eye(spec.dim), atol=1e-14)

    @pytest.mark.parametrize("spec", SPECS)
    def test_in_algebra(self, spec):
        b = basis_matrices(spec)
        np.testing.assert_allclose(b + np.conj(np.swapaxes(b, 1, 2)), 0, atol=1e-15)
        if spec.family is Family.SU:
            np.testing.assert_allclose(np.trace(b, axis1=1, axis2=2), 0, atol=1e-15)
        if spec.family is Family.SO:
            assert not np.iscomplexobj(b)

    def test_u3_contains_scalar_direction(self):
        b = basis_matrices(GroupSpec("U", 3))
        scalar = 1j * np.eye(3) / math.sqrt(3)
        assert any(np.allclose(m, scalar) for m in b)

    def test_deterministic(self):
        a = basis_matrices(GroupSpec("SU", 3)).copy()
        assert np.array_equal(a, basis_matrices(GroupSpec("SU", 3)))

    @pytest.mark.parametrize("spec", SPECS)
    def test_coefficient_norm_matches_matrix_norm(self, spec):
        rng = np.random.default_rng(1)
        for _ in range(20):
            x = AlgebraElement(spec, rng.standard_normal(spec.dim))
            m = x.matrix
            assert x.norm2() == pytest.approx(np.trace(np.conj(m).T @ m).real, abs=1e-12)
            np.testing.assert_allclose(AlgebraElement.from_matrix(spec, m).coeffs, x.coeffs, atol=1e-13)


class TestExp:
    def test_zero(self):
        spec = GroupSpec("SU", 3)
        assert np.allclose(exp_map(AlgebraElement(spec, np.zeros(8))).mat, np.eye(3))

    def test_diagonal(self):
        theta = 0.7
        x = np.diag([1j * theta, -1j * theta])
        np.testing.assert_allclose(exp_batch(GroupSpec("SU", 2), x), np.diag(np.exp([1j * theta, -1j * theta])),
                                   atol=1e-15)

    @pytest.mark.parametrize("spec", SPECS)
    def test_power_series_oracle(self, spec):
        rng = np.random.default_rng(2)
        for _ in range(10):
            c = rng.standard_normal(spec.dim)
            x = coeffs_to_matrix(spec, c / np.linalg.norm(c) * rng.uniform(0, 1))
            np.testing.assert_allclose(exp_batch(spec, x), power_series_exp(x), atol=1e-12)

    @pytest.mark.parametrize("spec", SPECS)
    def test_inverse_pair(self, spec):
        rng = np.random.default_rng(3)
        x = random_algebra_batch(spec, rng, 200)
        x *= (5 * rng.uniform(size=200) / np.sqrt(inner(x, x) + 1e-300))[:, None, None]
        prod = exp_batch(spec, x) @ exp_batch(spec, -x)
        np.testing.assert_allclose(prod, np.broadcast_to(np.eye(spec.n), prod.shape), atol=1e-10)

    @pytest.mark.parametrize("spec", SPECS)
    def test_result_in_group(self, spec):
        q = exp_batch(spec, 3 * random_algebra_batch(spec, np.random.default_rng(4), 100))
        unit, det = residuals(spec, q)
        assert unit < 1e-10 and det < 1e-10

    @pytest.mark.parametrize("spec", SPECS)
    def test_log_round_trip(self, spec):
        rng = np.random.default_rng(5)
        x = random_algebra_batch(spec, rng, 100)
        x *= (rng.uniform(0, 2, 100) / np.sqrt(inner(x, x)))[:, None, None]
        np.testing.assert_allclose(log_batch(spec, exp_batch(spec, x)), x, atol=1e-10)


class TestHaar:
    @pytest.mark.parametrize("spec", SPECS)
    def test_constraints(self, spec):
        q = haar_batch(spec, np.random.default_rng(6), 500)
        unit, det = residuals(spec, q)
        assert unit <= 1e-10 and det <= 1e-10
        if not spec.is_complex:
            assert q.dtype == np.float64

    def test_single_sample_wrapper(self):
        g = haar_sample(GroupSpec("SU", 3), np.random.default_rng(7))
        assert g.check() and abs(np.linalg.det(g.mat) - 1) < 1e-10

    def test_su2_trace_mean_vanishes(self):
        q = haar_batch(GroupSpec("SU", 2), np.random.default_rng(8), 100_000)
        tr = np.trace(q, axis1=1, axis2=2) / 2
        err = tr.real.std() / math.sqrt(tr.size)
        assert abs(tr.real.mean()) <= 3 * err
        assert abs(tr.imag.mean()) <= 1e-12

    def test_u2_trace_second_moment(self):
        # Weyl integration formula on U(2): density |e^{ia} - e^{ib}|^2 on the torus
        def weight(a, b):
            return abs(np.exp(1j * a) - np.exp(1j * b)) ** 2

        num = integrate.dblquad(lambda a, b: abs(np.exp(1j * a) + np.exp(1j * b)) ** 2 * weight(a, b),
                                0, 2 * np.pi, 0, 2 * np.pi)[0]
        den = integrate.dblquad(weight, 0, 2 * np.pi, 0, 2 * np.pi)[0]
        oracle = num / den
        assert oracle == pytest.approx(1.0, abs=1e-8)
        q = haar_batch(GroupSpec("U", 2), np.random.default_rng(9), 100_000)
        t2 = np.abs(np.trace(q, axis1=1, axis2=2)) ** 2
        assert abs(t2.mean() - oracle) <= 3 * t2.std() / math.sqrt(t2.size)

    @pytest.mark.parametrize("spec", [GroupSpec("SU", 2), GroupSpec("U", 3), GroupSpec("SO", 4)])
    def test_left_invariance_ks(self, spec):
        rng = np.random.default_rng(10)
        u = haar_batch(spec, rng)
        a = haar_batch(spec, rng, 10_000)
        b = haar_batch(spec, rng, 10_000)
        tr_shifted = np.trace(u @ a, axis1=1, axis2=2).real
        tr_plain = np.trace(b, axis1=1, axis2=2).real
        assert stats.ks_2samp(tr_shifted, tr_plain).pvalue > 0.01


class TestProjection:
    @pytest.mark.parametrize("spec", SPECS)
    def test_idempotent(self, spec):
        q = haar_batch(spec, np.random.default_rng(11), 50)
        np.testing.assert_allclose(project_batch(spec, q), q, atol=1e-12)
        np.testing.assert_allclose(project_batch(spec, project_batch(spec, q)), project_batch(spec, q), atol=1e-12)

    def test_scaled_identity(self):
        np.testing.assert_allclose(project_to_group(1.001 * np.eye(2), GroupSpec("U", 2)).mat, np.eye(2), atol=1e-15)

    @pytest.mark.parametrize("spec", SPECS)
    def test_perturbation_restores_constraints(self, spec):
        rng = np.random.default_rng(12)
        q = haar_batch(spec, rng, 50)
        e = rng.standard_normal(q.shape) + (1j * rng.standard_normal(q.shape) if spec.is_complex else 0)
        e *= 1e-3 / np.linalg.norm(e, axis=(1, 2))[:, None, None]
        unit, det = residuals(spec, project_batch(spec, q @ (np.eye(spec.n) + e)))
        assert unit <= 1e-12 and det <= 1e-12

    def test_matches_constrained_optimum_u2(self):
        rng = np.random.default_rng(13)
        spec = GroupSpec("U", 2)
        q = haar_batch(spec, rng)
        e = 1e-3 * (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
        m = q @ (np.eye(2) + e)

        def unitary(p):
            phi, a, b, c, d = p
            v = np.array([a, b, c, d]) / np.linalg.norm([a, b, c, d])
            su = np.array([[v[0] + 1j * v[3], v[2] + 1j * v[1]], [-v[2] + 1j * v[1], v[0] - 1j * v[3]]])
            return np.exp(1j * phi) * su

        # start from the exact answer's neighborhood in parameter space
        best = min((optimize.minimize(lambda p: np.linalg.norm(m - unitary(p)) ** 2, x0, method="Nelder-Mead",
                                      options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 20000})
                    for x0 in rng.standard_normal((8, 5))), key=lambda r: r.fun)
        np.testing.assert_allclose(project_batch(spec, m), unitary(best.x), atol=1e-6)

    def test_singular_input(self):
        with pytest.raises(SingularInput):
            project_batch(GroupSpec("U", 2), np.array([[1.0, 0.0], [0.0, 0.0]]))


class TestCenter:
    def test_su2(self):
        np.testing.assert_allclose(center_element(GroupSpec("SU", 2)).mat, -np.eye(2))

    def test_so3_none(self):
        assert center_element(GroupSpec("SO", 3)) is None

    def test_so4(self):
        np.testing.assert_allclose(center_element(GroupSpec("SO", 4)).mat, -np.eye(4))

    def test_su3_phase(self):
        z = center_element(GroupSpec("SU", 3)).mat[0, 0]
        assert z != 1 and abs(z ** 3 - 1) < 1e-12

    @pytest.mark.parametrize("spec", [GroupSpec("SU", 2), GroupSpec("SU", 3), GroupSpec("U", 2), GroupSpec("SO", 4)])
    def test_commutes_and_belongs(self, spec):
        z = center_element(spec)
        assert z.check()
        q = haar_batch(spec, np.random.default_rng(14), 100)
        np.testing.assert_allclose(z.mat @ q, q @ z.mat, atol=1e-10)


class TestElements:
    def test_so_rejects_complex(self):
        with pytest.raises(ValueError):
            GroupElement(GroupSpec("SO", 2), np.array([[1j, 0], [0, -1j]]))

    def test_check_flags_non_unitary(self):
        assert not GroupElement(GroupSpec("U", 2), 1.1 * np.eye(2)).check()

    def test_inverse_and_product(self):
        g = haar_sample(GroupSpec("SU", 3), np.random.default_rng(15))
        np.testing.assert_allclose((g @ g.inverse()).mat, np.eye(3), atol=1e-12)

    def test_immutable(self):
        g = GroupElement.identity(GroupSpec("SU", 2))
        with pytest.raises(ValueError):
            g.mat[0, 0] = 2


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(SPECS), st.integers(0, 2 ** 32 - 1), st.floats(0.0, 5.0))
def test_exp_inverse_property(spec, seed, scale):
    x = random_algebra_batch(spec, np.random.default_rng(seed))
    x = x * scale / max(math.sqrt(float(inner(x, x))), 1e-300)
    np.testing.assert_allclose(exp_batch(spec, x) @ exp_batch(spec, -x), np.eye(spec.n), atol=1e-10)
