"""Compiled inner loops for the samplers and loop measurements.

Link and spin arrays are complex128 with shape (n, N, N) for every family
(SO(N) data carries an exactly-zero imaginary part).  Random numbers come
from a ``numpy.random.Generator`` passed straight into the compiled code so
each chain's stream advances exactly as it would in Python.
"""
import math

import numba
import numpy as np

_jit = numba.njit(cache=True, nogil=True)


@_jit
def _mm(a, b, out):
    n = a.shape[0]
    for i in range(n):
        for j in range(n):
            s = 0j
            for k in range(n):
                s += a[i, k] * b[k, j]
            out[i, j] = s


@_jit
def _mm_ad(a, b, out):
    """out = a @ b^dagger"""
    n = a.shape[0]
    for i in range(n):
        for j in range(n):
            s = 0j
            for k in range(n):
                s += a[i, k] * np.conj(b[j, k])
            out[i, j] = s


@_jit
def _mm_da(a, b, out):
    """out = a^dagger @ b"""
    n = a.shape[0]
    for i in range(n):
        for j in range(n):
            s = 0j
            for k in range(n):
                s += np.conj(a[k, i]) * b[k, j]
            out[i, j] = s


@_jit
def _retr_prod(a, b):
    """Re Tr(a @ b)"""
    n = a.shape[0]
    s = 0.0
    for i in range(n):
        for k in range(n):
            s += (a[i, k] * b[k, i]).real
    return s


@_jit
def _add_staple(U, shift, d, v, mu, nu, M, t1, t2):
    """Accumulate the two staples of link (v, mu) in the (mu, nu) plane into M."""
    v_mu = shift[v, mu, 0]
    v_nu = shift[v, nu, 0]
    v_mnu = shift[v, nu, 1]
    v_mu_mnu = shift[v_mu, nu, 1]
    # forward: U_nu(v+mu) U_mu(v+nu)^dag U_nu(v)^dag
    _mm_ad(U[v_mu * d + nu], U[v_nu * d + mu], t1)
    _mm_ad(t1, U[v * d + nu], t2)
    M += t2
    # backward: U_nu(v+mu-nu)^dag U_mu(v-nu)^dag U_nu(v-nu)
    n = M.shape[0]
    a = U[v_mu_mnu * d + nu]
    b = U[v_mnu * d + mu]
    for i in range(n):
        for j in range(n):
            s = 0j
            for k in range(n):
                s += np.conj(a[k, i]) * np.conj(b[j, k])
            t1[i, j] = s
    _mm(t1, U[v_mnu * d + nu], t2)
    M += t2


@_jit
def ym_staple_buf(U, shift, d, e, M, t1, t2):
    M[:, :] = 0.0
    v = e // d
    mu = e % d
    for nu in range(d):
        if nu != mu:
            _add_staple(U, shift, d, v, mu, nu, M, t1, t2)


@_jit
def ym_staple(U, shift, d, e, M):
    n = U.shape[1]
    t1 = np.empty((n, n), dtype=np.complex128)
    t2 = np.empty((n, n), dtype=np.complex128)
    M[:, :] = 0.0
    v = e // d
    mu = e % d
    for nu in range(d):
        if nu != mu:
            _add_staple(U, shift, d, v, mu, nu, M, t1, t2)


@_jit
def ym_all_staples(U, shift, d):
    E = U.shape[0]
    n = U.shape[1]
    out = np.empty((E, n, n), dtype=np.complex128)
    M = np.empty((n, n), dtype=np.complex128)
    t1 = np.empty((n, n), dtype=np.complex128)
    t2 = np.empty((n, n), dtype=np.complex128)
    for e in range(E):
        ym_staple_buf(U, shift, d, e, M, t1, t2)
        out[e] = M
    return out


# --- SU(2) heat bath ---------------------------------------------------------


@_jit
def _sample_su2_a0(lam, rng):
    """Draw a0 in [-1, 1] with density proportional to sqrt(1 - a0^2) exp(lam a0)."""
    if lam < 1e-12:
        while True:
            x = 2.0 * rng.random() - 1.0
            if rng.random() ** 2 <= 1.0 - x * x:
                return x
    if lam < 4.0:
        lo = math.exp(-2.0 * lam)
        while True:
            y = lo + (1.0 - lo) * rng.random()
            x = 1.0 + math.log(y) / lam
            if rng.random() ** 2 <= 1.0 - x * x:
                return x
    # Kennedy-Pendleton
    while True:
        r1 = 1.0 - rng.random()
        r2 = rng.random()
        r3 = 1.0 - rng.random()
        c = math.cos(2.0 * math.pi * r2)
        delta = -(math.log(r1) + c * c * math.log(r3)) / lam
        r4 = rng.random()
        if r4 * r4 <= 1.0 - 0.5 * delta:
            return 1.0 - delta


@_jit
def _su2_quaternion_part(M):
    """(p, q) with Re Tr(U M) = Re(U00 p) + Re(U10 q) for every U in SU(2)."""
    p = M[0, 0] + np.conj(M[1, 1])
    q = M[0, 1] - np.conj(M[1, 0])
    return p, q


@_jit
def su2_heatbath_draw(M, coupling, rng, out):
    """Sample U in SU(2) with density proportional to exp(coupling * Re Tr(U M))."""
    p, q = _su2_quaternion_part(M)
    k = 0.5 * math.sqrt(abs(p) ** 2 + abs(q) ** 2)
    lam = 2.0 * coupling * k
    a0 = _sample_su2_a0(lam, rng)
    r = math.sqrt(max(0.0, 1.0 - a0 * a0))
    cth = 2.0 * rng.random() - 1.0
    sth = math.sqrt(max(0.0, 1.0 - cth * cth))
    phi = 2.0 * math.pi * rng.random()
    a1 = r * sth * math.cos(phi)
    a2 = r * sth * math.sin(phi)
    a3 = r * cth
    v00 = a0 + 1j * a3
    v01 = a2 + 1j * a1
    v10 = -a2 + 1j * a1
    v11 = a0 - 1j * a3
    if k < 1e-300:
        out[0, 0] = v00
        out[0, 1] = v01
        out[1, 0] = v10
        out[1, 1] = v11
        return
    # W = Mtilde / k with Mtilde = [[p/2, q/2], [-conj(q)/2, conj(p)/2]]; U = V W^dagger
    w00 = 0.5 * p / k
    w01 = 0.5 * q / k
    w10 = -0.5 * np.conj(q) / k
    w11 = 0.5 * np.conj(p) / k
    out[0, 0] = v00 * np.conj(w00) + v01 * np.conj(w01)
    out[0, 1] = v00 * np.conj(w10) + v01 * np.conj(w11)
    out[1, 0] = v10 * np.conj(w00) + v11 * np.conj(w01)
    out[1, 1] = v10 * np.conj(w10) + v11 * np.conj(w11)


@_jit
def su2_conditional_params(Ms):
    """For each environment matrix, return (k, W^dagger) of its SU(2) projection."""
    n = Ms.shape[0]
    ks = np.empty(n)
    wd = np.zeros((n, 2, 2), dtype=np.complex128)
    for i in range(n):
        p, q = _su2_quaternion_part(Ms[i])
        k = 0.5 * math.sqrt(abs(p) ** 2 + abs(q) ** 2)
        ks[i] = k
        if k > 1e-300:
            wd[i, 0, 0] = np.conj(0.5 * p / k)
            wd[i, 0, 1] = np.conj(-0.5 * np.conj(q) / k)
            wd[i, 1, 0] = np.conj(0.5 * q / k)
            wd[i, 1, 1] = np.conj(0.5 * np.conj(p) / k)
    return ks, wd


@_jit
def ym_heatbath_su2_sweep(U, shift, d, coupling, rng):
    M = np.empty((2, 2), dtype=np.complex128)
    new = np.empty((2, 2), dtype=np.complex128)
    t1 = np.empty((2, 2), dtype=np.complex128)
    t2 = np.empty((2, 2), dtype=np.complex128)
    for e in range(U.shape[0]):
        ym_staple_buf(U, shift, d, e, M, t1, t2)
        su2_heatbath_draw(M, coupling, rng, new)
        U[e] = new


@_jit
def ym_metropolis_sweep(U, shift, d, coupling, kicks, uniforms):
    """Sequential Metropolis with proposals U_e -> kicks[e] @ U_e; returns accept count."""
    n = U.shape[1]
    M = np.empty((n, n), dtype=np.complex128)
    prop = np.empty((n, n), dtype=np.complex128)
    t1 = np.empty((n, n), dtype=np.complex128)
    t2 = np.empty((n, n), dtype=np.complex128)
    acc = 0
    for e in range(U.shape[0]):
        ym_staple_buf(U, shift, d, e, M, t1, t2)
        _mm(kicks[e], U[e], prop)
        ds = coupling * (_retr_prod(prop, M) - _retr_prod(U[e], M))
        if ds >= 0.0 or uniforms[e] < math.exp(ds):
            U[e] = prop
            acc += 1
    return acc


# --- sigma model -------------------------------------------------------------


@_jit
def sigma_environment(Q, A, B, shift, m, x, M):
    """M_x with S_{A,B} = coupling * Re Tr(Q_x M_x) + (terms without Q_x)."""
    n = Q.shape[1]
    t1 = np.empty((n, n), dtype=np.complex128)
    t2 = np.empty((n, n), dtype=np.complex128)
    sigma_environment_buf(Q, A, B, shift, m, x, M, t1, t2)


@_jit
def sigma_environment_buf(Q, A, B, shift, m, x, M, t1, t2):
    n = Q.shape[1]
    M[:, :] = 0.0
    for mu in range(m):
        y = shift[x, mu, 0]
        if y == x:
            continue
        # edge (x, y): A_e Q_y^dag B_e^dag
        _mm_ad(A[x, mu], Q[y], t1)
        _mm_ad(t1, B[x, mu], t2)
        M += t2
        # edge (w, x) with w = x - mu: A_e^dag Q_w^dag B_e
        w = shift[x, mu, 1]
        a = A[w, mu]
        qw = Q[w]
        for i in range(n):
            for j in range(n):
                s = 0j
                for k in range(n):
                    s += np.conj(a[k, i]) * np.conj(qw[j, k])
                t1[i, j] = s
        _mm(t1, B[w, mu], t2)
        M += t2


@_jit
def sigma_all_environments(Q, A, B, shift, m):
    V = Q.shape[0]
    n = Q.shape[1]
    out = np.empty((V, n, n), dtype=np.complex128)
    M = np.empty((n, n), dtype=np.complex128)
    t1 = np.empty((n, n), dtype=np.complex128)
    t2 = np.empty((n, n), dtype=np.complex128)
    for x in range(V):
        sigma_environment_buf(Q, A, B, shift, m, x, M, t1, t2)
        out[x] = M
    return out


@_jit
def sigma_heatbath_su2_sweep(Q, A, B, shift, m, coupling, rng):
    M = np.empty((2, 2), dtype=np.complex128)
    new = np.empty((2, 2), dtype=np.complex128)
    t1 = np.empty((2, 2), dtype=np.complex128)
    t2 = np.empty((2, 2), dtype=np.complex128)
    for x in range(Q.shape[0]):
        sigma_environment_buf(Q, A, B, shift, m, x, M, t1, t2)
        su2_heatbath_draw(M, coupling, rng, new)
        Q[x] = new


@_jit
def sigma_metropolis_sweep(Q, A, B, shift, m, coupling, kicks, uniforms):
    n = Q.shape[1]
    M = np.empty((n, n), dtype=np.complex128)
    prop = np.empty((n, n), dtype=np.complex128)
    t1 = np.empty((n, n), dtype=np.complex128)
    t2 = np.empty((n, n), dtype=np.complex128)
    acc = 0
    for x in range(Q.shape[0]):
        sigma_environment_buf(Q, A, B, shift, m, x, M, t1, t2)
        _mm(kicks[x], Q[x], prop)
        ds = coupling * (_retr_prod(prop, M) - _retr_prod(Q[x], M))
        if ds >= 0.0 or uniforms[x] < math.exp(ds):
            Q[x] = prop
            acc += 1
    return acc


# --- loops -------------------------------------------------------------------


@_jit
def loop_traces(U, shift, d, steps, Ubar, improved):
    """Normalized trace of a loop shape translated to every base vertex.

    ``steps`` rows are (mu, sign); where ``improved[i]`` is set the link is
    taken from ``Ubar`` (its conditional expectation) instead of ``U``.
    """
    n = U.shape[1]
    V = shift.shape[0]
    out = np.empty(V, dtype=np.complex128)
    P = np.empty((n, n), dtype=np.complex128)
    T = np.empty((n, n), dtype=np.complex128)
    for v0 in range(V):
        P[:, :] = 0.0
        for i in range(n):
            P[i, i] = 1.0
        v = v0
        for s in range(steps.shape[0]):
            mu = steps[s, 0]
            src = Ubar if improved[s] else U
            if steps[s, 1] > 0:
                _mm(P, src[v * d + mu], T)
                v = shift[v, mu, 0]
            else:
                w = shift[v, mu, 1]
                _mm_ad(P, src[w * d + mu], T)
                v = w
            P[:, :] = T
        tr = 0j
        for i in range(n):
            tr += P[i, i]
        out[v0] = tr / n
    return out


@_jit
def plaquette_retrace(U, plaq_edges):
    """Re Tr of every plaquette word (+,+,-,-)."""
    n = U.shape[1]
    P = plaq_edges.shape[0]
    out = np.empty(P)
    t1 = np.empty((n, n), dtype=np.complex128)
    t2 = np.empty((n, n), dtype=np.complex128)
    for p in range(P):
        _mm(U[plaq_edges[p, 0]], U[plaq_edges[p, 1]], t1)
        _mm_ad(t1, U[plaq_edges[p, 2]], t2)
        out[p] = 0.0
        a = U[plaq_edges[p, 3]]
        s = 0.0
        for i in range(n):
            for k in range(n):
                s += (t2[i, k] * np.conj(a[i, k])).real
        out[p] = s
    return out


# --- re-projection -----------------------------------------------------------


@_jit
def _det(X, work):
    n = X.shape[0]
    if n == 1:
        return X[0, 0]
    if n == 2:
        return X[0, 0] * X[1, 1] - X[0, 1] * X[1, 0]
    work[:, :] = X
    det = 1.0 + 0j
    for c in range(n):
        piv = c
        best = abs(work[c, c])
        for r in range(c + 1, n):
            if abs(work[r, c]) > best:
                best = abs(work[r, c])
                piv = r
        if best == 0.0:
            return 0j
        if piv != c:
            for j in range(n):
                tmp = work[c, j]
                work[c, j] = work[piv, j]
                work[piv, j] = tmp
            det = -det
        det *= work[c, c]
        for r in range(c + 1, n):
            f = work[r, c] / work[c, c]
            for j in range(c, n):
                work[r, j] -= f * work[c, j]
    return det


@_jit
def reorthonormalize(Q, special):
    """Gram-Schmidt on columns, then (if special) remove the determinant phase."""
    n = Q.shape[1]
    work = np.empty((n, n), dtype=np.complex128)
    for a in range(Q.shape[0]):
        X = Q[a]
        for j in range(n):
            for k in range(j):
                s = 0j
                for i in range(n):
                    s += np.conj(X[i, k]) * X[i, j]
                for i in range(n):
                    X[i, j] -= s * X[i, k]
            nrm = 0.0
            for i in range(n):
                nrm += X[i, j].real ** 2 + X[i, j].imag ** 2
            nrm = math.sqrt(nrm)
            for i in range(n):
                X[i, j] /= nrm
        if special and n > 1:
            det = _det(X, work)
            ang = math.atan2(det.imag, det.real) / n
            c = complex(math.cos(ang), -math.sin(ang))
            for i in range(n):
                for j in range(n):
                    X[i, j] *= c
