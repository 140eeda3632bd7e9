"""Compiled inner loops for the projected-gradient iterations.

Objectives arrive as per-block observables ``w[k, b]`` plus a combiner code
(see ``objectives.EXPECTATION`` etc.); every iterate is re-orthonormalized
with a Gram-Schmidt QR whose R factor has a positive real diagonal.
"""
import numpy as np
from numba import njit

OK, MAX_ITERS, MEASURE_ZERO, NON_FINITE, RANK_DEFICIENT, INFEASIBLE = range(6)

_MEASURE_ZERO = 1e-12
_SURROGATE = 1e-12
_RANK = 1e-12


@njit(cache=True)
def _orthonormalize(a):
    n, l = a.shape
    q = a.copy()
    for k in range(l):
        for _ in range(2):
            for m in range(k):
                c = 0j
                for i in range(n):
                    c += np.conj(q[i, m]) * q[i, k]
                for i in range(n):
                    q[i, k] -= c * q[i, m]
        nrm = 0.0
        for i in range(n):
            nrm += q[i, k].real ** 2 + q[i, k].imag ** 2
        nrm = np.sqrt(nrm)
        if nrm < _RANK:
            return q, False
        for i in range(n):
            q[i, k] /= nrm
    return q, True


@njit(cache=True)
def _mm(a, b, out):
    n, m = a.shape
    p = b.shape[1]
    for i in range(n):
        for k in range(p):
            acc = 0j
            for t in range(m):
                acc += a[i, t] * b[t, k]
            out[i, k] = acc


@njit(cache=True)
def _mm_adj(a, b, out):
    # a @ b^H
    n, m = a.shape
    p = b.shape[0]
    for i in range(n):
        for k in range(p):
            acc = 0j
            for t in range(m):
                acc += a[i, t] * np.conj(b[k, t])
            out[i, k] = acc


@njit(cache=True)
def _tangent_step(s, m, scale):
    # s + scale * pi_S(m)
    sm = s.conj().T @ m
    sym = 0.5 * (sm + sm.conj().T)
    return s + scale * (m - s @ sym)


@njit(cache=True)
def _stiefel_error(s):
    e = s.conj().T @ s
    worst = 0.0
    for i in range(e.shape[0]):
        for j in range(e.shape[1]):
            v = e[i, j] - (1.0 if i == j else 0.0)
            worst = max(worst, abs(v))
    return worst


@njit(cache=True)
def _combine(kind, j, targets, coeffs):
    # returns (value, status)
    if kind == 0:
        coeffs[0] = 1.0
        return j[0], OK
    if kind == 1:
        acc = 0.0
        for k in range(j.shape[0]):
            acc += (j[k] - targets[k]) ** 2
        dist = np.sqrt(acc)
        for k in range(j.shape[0]):
            r = j[k] - targets[k]
            coeffs[k] = 2.0 * r if dist <= _SURROGATE else r / dist
        return dist, OK
    j1 = j[0]
    j2 = j[1]
    if not j2 >= _MEASURE_ZERO:
        return np.nan, MEASURE_ZERO
    coeffs[0] = 1.0 / j2
    coeffs[1] = -j1 / (j2 * j2)
    return j1 / j2, OK


@njit(cache=True)
def _local_eval(sa, sb, rho, w, kind, targets, want_a, want_b, j, coeffs):
    """Value, combined functionals and the factor gradients M_A / M_B."""
    na = sa.shape[1]
    nb = sb.shape[1]
    d = na * nb
    nk = w.shape[0]
    ra = na * na
    rb = nb * nb
    ys = np.empty((ra * rb, d, d), dtype=np.complex128)
    for k in range(nk):
        j[k] = 0.0
    x = np.empty((d, d), dtype=np.complex128)
    out = np.empty((d, d), dtype=np.complex128)
    for i in range(ra):
        for jj in range(rb):
            b = i * rb + jj
            for p in range(na):
                for q in range(na):
                    apq = sa[i * na + p, q]
                    for r in range(nb):
                        for s in range(nb):
                            x[p * nb + r, q * nb + s] = apq * sb[jj * nb + r, s]
            _mm(x, rho, ys[b])
            _mm_adj(ys[b], x, out)
            for k in range(nk):
                acc = 0.0
                for u in range(d):
                    for v in range(d):
                        acc += (out[u, v] * w[k, b, v, u]).real
                j[k] += acc
    value, status = _combine(kind, j, targets, coeffs)
    ma = np.zeros(sa.shape, dtype=np.complex128)
    mb = np.zeros(sb.shape, dtype=np.complex128)
    if status != OK or not (want_a or want_b):
        return value, status, ma, mb
    norm_a = 0.0
    for v in sa.ravel():
        norm_a += v.real ** 2 + v.imag ** 2
    norm_b = 0.0
    for v in sb.ravel():
        norm_b += v.real ** 2 + v.imag ** 2
    h = np.empty((d, d), dtype=np.complex128)
    g = np.empty((d, d), dtype=np.complex128)
    for i in range(ra):
        for jj in range(rb):
            b = i * rb + jj
            h[:, :] = 0.0
            for k in range(nk):
                if coeffs[k] != 0.0:
                    h += 2.0 * coeffs[k] * w[k, b]
            _mm(h, ys[b], g)
            for p in range(na):
                for q in range(na):
                    for r in range(nb):
                        for s in range(nb):
                            gv = g[p * nb + r, q * nb + s]
                            if want_a:
                                ma[i * na + p, q] += gv * np.conj(sb[jj * nb + r, s])
                            if want_b:
                                mb[jj * nb + r, s] += gv * np.conj(sa[i * na + p, q])
    ma /= norm_b
    mb /= norm_a
    return value, status, ma, mb


@njit(cache=True)
def ascend_local_loop(sa, sb, rho, w, kind, targets, step_a, step_b, sign, tol,
                      max_iters, record, stride, check_every):
    nk = w.shape[0]
    j = np.zeros(nk)
    coeffs = np.zeros(nk)
    n_rec = max_iters // stride + 2 if record else 1
    traj = np.full((n_rec, 4), np.nan)
    n_traj = 0
    value, status, ma, mb = _local_eval(sa, sb, rho, w, kind, targets, True, False, j, coeffs)
    if status != OK:
        return sa, sb, sa, sb, value, 0, status, traj[:0], 0
    if record:
        traj[0, 0] = 0
        traj[0, 1] = value
        traj[0, 2] = j[0] / j[1] if kind == 2 else (value if kind == 0 else np.nan)
        traj[0, 3] = j[1] if kind == 2 else 1.0
        n_traj = 1
    best_val = value
    best_a = sa.copy()
    best_b = sb.copy()
    dips = 0
    it = 0
    status = MAX_ITERS
    while it < max_iters:
        it += 1
        sa, good = _orthonormalize(_tangent_step(sa, ma, sign * step_a))
        if not good:
            status = RANK_DEFICIENT
            break
        _, st, _, mb = _local_eval(sa, sb, rho, w, kind, targets, False, True, j, coeffs)
        if st != OK:
            status = st
            break
        sb, good = _orthonormalize(_tangent_step(sb, mb, sign * step_b))
        if not good:
            status = RANK_DEFICIENT
            break
        new, st, ma, _ = _local_eval(sa, sb, rho, w, kind, targets, True, False, j, coeffs)
        if st != OK:
            status = st
            break
        if not np.isfinite(new):
            status = NON_FINITE
            break
        if check_every > 0 and it % check_every == 0:
            if _stiefel_error(sa) > 1e-10 or _stiefel_error(sb) > 1e-10:
                status = INFEASIBLE
                break
        if sign * (new - value) < -10.0 * tol:
            dips += 1
        if record and it % stride == 0:
            traj[n_traj, 0] = it
            traj[n_traj, 1] = new
            traj[n_traj, 2] = j[0] / j[1] if kind == 2 else (new if kind == 0 else np.nan)
            traj[n_traj, 3] = j[1] if kind == 2 else 1.0
            n_traj += 1
        if sign * (new - best_val) > 0:
            best_val = new
            best_a[:, :] = sa
            best_b[:, :] = sb
        delta = abs(new - value)
        value = new
        if delta < tol:
            status = OK
            break
    if record and (n_traj == 0 or traj[n_traj - 1, 0] != it) and status in (OK, MAX_ITERS):
        traj[n_traj, 0] = it
        traj[n_traj, 1] = value
        traj[n_traj, 2] = j[0] / j[1] if kind == 2 else (value if kind == 0 else np.nan)
        traj[n_traj, 3] = j[1] if kind == 2 else 1.0
        n_traj += 1
    return sa, sb, best_a, best_b, best_val, it, status, traj[:n_traj], dips


@njit(cache=True)
def _nonlocal_eval(s, rho, w, kind, targets, j, coeffs):
    d = s.shape[1]
    nblocks = d * d
    nk = w.shape[0]
    for k in range(nk):
        j[k] = 0.0
    ys = np.empty((nblocks, d, d), dtype=np.complex128)
    for b in range(nblocks):
        x = np.ascontiguousarray(s[b * d:(b + 1) * d, :])
        y = x @ rho
        ys[b] = y
        out = y @ x.conj().T
        for k in range(nk):
            acc = 0.0
            for u in range(d):
                for v in range(d):
                    acc += (out[u, v] * w[k, b, v, u]).real
            j[k] += acc
    value, status = _combine(kind, j, targets, coeffs)
    g = np.zeros(s.shape, dtype=np.complex128)
    if status != OK:
        return value, status, g
    h = np.empty((d, d), dtype=np.complex128)
    for b in range(nblocks):
        h[:, :] = 0.0
        for k in range(nk):
            if coeffs[k] != 0.0:
                h += coeffs[k] * w[k, b]
        g[b * d:(b + 1) * d, :] = 2.0 * (h @ ys[b])
    return value, status, g


@njit(cache=True)
def ascend_nonlocal_loop(s, rho, w, kind, targets, step, sign, tol, max_iters,
                         record, stride, check_every):
    nk = w.shape[0]
    j = np.zeros(nk)
    coeffs = np.zeros(nk)
    n_rec = max_iters // stride + 2 if record else 1
    traj = np.full((n_rec, 4), np.nan)
    n_traj = 0
    value, status, g = _nonlocal_eval(s, rho, w, kind, targets, j, coeffs)
    if status != OK:
        return s, s, value, 0, status, traj[:0], 0
    if record:
        traj[0, 0] = 0
        traj[0, 1] = value
        traj[0, 2] = j[0] / j[1] if kind == 2 else (value if kind == 0 else np.nan)
        traj[0, 3] = j[1] if kind == 2 else 1.0
        n_traj = 1
    best_val = value
    best = s.copy()
    dips = 0
    it = 0
    status = MAX_ITERS
    while it < max_iters:
        it += 1
        s, good = _orthonormalize(_tangent_step(s, g, sign * step))
        if not good:
            status = RANK_DEFICIENT
            break
        new, st, g = _nonlocal_eval(s, rho, w, kind, targets, j, coeffs)
        if st != OK:
            status = st
            break
        if not np.isfinite(new):
            status = NON_FINITE
            break
        if check_every > 0 and it % check_every == 0 and _stiefel_error(s) > 1e-10:
            status = INFEASIBLE
            break
        if sign * (new - value) < -10.0 * tol:
            dips += 1
        if record and it % stride == 0:
            traj[n_traj, 0] = it
            traj[n_traj, 1] = new
            traj[n_traj, 2] = j[0] / j[1] if kind == 2 else (new if kind == 0 else np.nan)
            traj[n_traj, 3] = j[1] if kind == 2 else 1.0
            n_traj += 1
        if sign * (new - best_val) > 0:
            best_val = new
            best[:, :] = s
        delta = abs(new - value)
        value = new
        if delta < tol:
            status = OK
            break
    if record and (n_traj == 0 or traj[n_traj - 1, 0] != it) and status in (OK, MAX_ITERS):
        traj[n_traj, 0] = it
        traj[n_traj, 1] = value
        traj[n_traj, 2] = j[0] / j[1] if kind == 2 else (value if kind == 0 else np.nan)
        traj[n_traj, 3] = j[1] if kind == 2 else 1.0
        n_traj += 1
    return s, best, best_val, it, status, traj[:n_traj], dips
