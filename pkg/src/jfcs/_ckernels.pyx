# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same contracts as ``jfcs._pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log1p, fabs, INFINITY, isfinite

cnp.import_array()


cdef double _wf_total(double mu, double[::1] a, double[::1] b, double[::1] pmin) noexcept nogil:
    cdef Py_ssize_t k
    cdef double total = 0.0, p
    for k in range(a.shape[0]):
        p = a[k] / mu - b[k]
        total += pmin[k] if p < pmin[k] else p
    return total


def waterfill_total(double mu, double[::1] a, double[::1] b, double[::1] pmin):
    return _wf_total(mu, a, b, pmin)


def waterfill_power(double mu, double[::1] a, double[::1] b, double[::1] pmin):
    cdef Py_ssize_t k, n = a.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double p
    for k in range(n):
        if mu > 0.0:
            p = a[k] / mu - b[k]
        else:
            p = INFINITY if a[k] > 0.0 else -b[k]
        o[k] = pmin[k] if p < pmin[k] else p
    return out


def waterfill_bisect(double[::1] a, double[::1] b, double[::1] pmin, double p_max,
                     double rel_tol=1e-9, long max_iter=4000):
    cdef Py_ssize_t k, n = a.shape[0]
    cdef double amax = 0.0, hi, lo = 0.0, mid, delta
    cdef long it = 0
    for k in range(n):
        if a[k] > amax:
            amax = a[k]
    if n == 0 or amax <= 0.0:
        return 0.0, waterfill_power(0.0, a, b, pmin), 0
    with nogil:
        hi = amax / (p_max / (10.0 * n))
        while _wf_total(hi, a, b, pmin) > p_max:
            hi *= 2.0
        delta = rel_tol * hi
        while hi - lo > delta and it < max_iter:
            mid = 0.5 * (lo + hi)
            if _wf_total(mid, a, b, pmin) <= p_max:
                hi = mid
            else:
                lo = mid
            it += 1
    return hi, waterfill_power(hi, a, b, pmin), it


cdef void _project_capped(double* y, Py_ssize_t* idx, Py_ssize_t n, double cap,
                          double* work) noexcept nogil:
    # projection of y[idx[0..n)] onto {p >= 0, sum p <= cap}, in place
    cdef Py_ssize_t i, j
    cdef double s = 0.0, t, css, theta = 0.0
    for i in range(n):
        if y[idx[i]] > 0.0:
            s += y[idx[i]]
    if s <= cap:
        for i in range(n):
            if y[idx[i]] < 0.0:
                y[idx[i]] = 0.0
        return
    for i in range(n):
        work[i] = y[idx[i]]
    # insertion sort, descending; groups are small
    for i in range(1, n):
        t = work[i]
        j = i - 1
        while j >= 0 and work[j] < t:
            work[j + 1] = work[j]
            j -= 1
        work[j + 1] = t
    css = 0.0
    theta = work[0] - cap
    for i in range(n):
        css += work[i]
        if work[i] - (css - cap) / (i + 1.0) > 0.0:
            theta = (css - cap) / (i + 1.0)
    for i in range(n):
        t = y[idx[i]] - theta
        y[idx[i]] = t if t > 0.0 else 0.0


def project_capped_simplex(y, double cap):
    out = np.array(y, dtype=float, copy=True)
    cdef double[::1] o = out
    cdef Py_ssize_t n = o.shape[0], i
    idx = np.arange(n, dtype=np.intp)
    work = np.empty(max(n, 1))
    cdef Py_ssize_t[::1] ix = idx
    cdef double[::1] wk = work
    if n:
        _project_capped(&o[0], &ix[0], n, cap, &wk[0])
    return out


cdef void _project_groups(double* x, Py_ssize_t* order, Py_ssize_t* starts,
                          Py_ssize_t ngroups, double* caps, double* work) noexcept nogil:
    cdef Py_ssize_t g
    for g in range(ngroups):
        if starts[g + 1] > starts[g]:
            _project_capped(x, order + starts[g], starts[g + 1] - starts[g], caps[g], work)


def _group_layout(group, Py_ssize_t ngroups):
    group = np.asarray(group, dtype=np.intp)
    order = np.argsort(group, kind="stable").astype(np.intp)
    counts = np.bincount(group, minlength=ngroups)
    starts = np.zeros(ngroups + 1, dtype=np.intp)
    starts[1:] = np.cumsum(counts)
    return order, starts


def project_groups(x, group, caps):
    caps = np.ascontiguousarray(caps, dtype=float)
    out = np.array(x, dtype=float, copy=True)
    order, starts = _group_layout(group, caps.shape[0])
    work = np.empty(max(out.shape[0], 1))
    cdef double[::1] o = out
    cdef Py_ssize_t[::1] od = order
    cdef Py_ssize_t[::1] st = starts
    cdef double[::1] cp = caps
    cdef double[::1] wk = work
    if o.shape[0]:
        _project_groups(&o[0], &od[0], &st[0], cp.shape[0], &cp[0], &wk[0])
    return out


cdef void _project_ball(double* y, Py_ssize_t* idx, Py_ssize_t n, double cap) noexcept nogil:
    cdef Py_ssize_t i
    cdef double n2 = 0.0, sc
    for i in range(n):
        if y[idx[i]] < 0.0:
            y[idx[i]] = 0.0
        n2 += y[idx[i]] * y[idx[i]]
    if n2 > cap:
        sc = sqrt(cap / n2)
        for i in range(n):
            y[idx[i]] *= sc


cdef void _project_groups_ball(double* y, Py_ssize_t* order, Py_ssize_t* starts,
                               Py_ssize_t ngroups, double* caps) noexcept nogil:
    cdef Py_ssize_t g
    for g in range(ngroups):
        if starts[g + 1] > starts[g]:
            _project_ball(y, order + starts[g], starts[g + 1] - starts[g], caps[g])


def project_groups_ball(y, group, caps):
    caps = np.ascontiguousarray(caps, dtype=float)
    out = np.array(y, dtype=float, copy=True)
    order, starts = _group_layout(group, caps.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t[::1] od = order
    cdef Py_ssize_t[::1] st = starts
    cdef double[::1] cp = caps
    if o.shape[0]:
        _project_groups_ball(&o[0], &od[0], &st[0], cp.shape[0], &cp[0])
    return out


cdef double _objective(double[::1] y, double[::1] nu, double[:, ::1] G, double[::1] w,
                       double[::1] vbar, double[::1] zbar, double[::1] rbar, double rho,
                       double[::1] grad, double[::1] omega, double[::1] cc) noexcept nogil:
    # surrogate in root-power coordinates x = y^2
    cdef Py_ssize_t l, m, L = y.shape[0]
    cdef double f = 0.0, z, v, c, s, short, acc, alpha
    for l in range(L):
        z = 1.0
        for m in range(L):
            z += G[l, m] * y[m] * y[m]
        v = nu[l] * y[l] * y[l]
        c = vbar[l] / (zbar[l] * (zbar[l] + vbar[l]))
        alpha = 2.0 * sqrt(vbar[l] * nu[l]) / zbar[l]
        s = log1p(vbar[l] / zbar[l]) - vbar[l] / zbar[l] + alpha * y[l] - c * (z + v)
        f += w[l] * s
        omega[l] = w[l]
        if isfinite(rbar[l]):
            short = rbar[l] - s
            if short > 0.0:
                f -= rho * short
                omega[l] = w[l] + rho
        cc[l] = c
        grad[l] = omega[l] * (alpha - 2.0 * c * nu[l] * y[l])
    for m in range(L):
        acc = 0.0
        for l in range(L):
            acc += G[l, m] * omega[l] * cc[l]
        grad[m] -= 2.0 * y[m] * acc
    return f


def penalised_objective(y, nu, G, w, vbar, zbar, rbar, double rho):
    cdef Py_ssize_t L = len(y)
    grad = np.empty(L)
    omega = np.empty(L)
    cc = np.empty(L)
    f = _objective(np.ascontiguousarray(y, float), np.ascontiguousarray(nu, float),
                   np.ascontiguousarray(G, float), np.ascontiguousarray(w, float),
                   np.ascontiguousarray(vbar, float), np.ascontiguousarray(zbar, float),
                   np.ascontiguousarray(rbar, float), rho, grad, omega, cc)
    return f, grad


def pg_ascent(x0, nu, G, w, vbar, zbar, rbar, group, caps, double rho,
              long max_steps=500, double tol=1e-6):
    caps = np.ascontiguousarray(caps, dtype=float)
    cdef Py_ssize_t L = len(x0), i
    order, starts = _group_layout(group, caps.shape[0])
    x_arr = project_groups_ball(np.sqrt(np.maximum(np.asarray(x0, float), 0.0)), group, caps)
    xn_arr = np.empty(L)
    g_arr = np.empty(L)
    gn_arr = np.empty(L)
    omega = np.empty(L)
    cc = np.empty(L)
    cdef double[::1] x = x_arr, xn = xn_arr, g = g_arr, gn = gn_arr
    cdef double[::1] om = omega, cv = cc, cp = caps
    cdef double[::1] nu_v = np.ascontiguousarray(nu, float)
    cdef double[:, ::1] G_v = np.ascontiguousarray(G, float)
    cdef double[::1] w_v = np.ascontiguousarray(w, float)
    cdef double[::1] vb = np.ascontiguousarray(vbar, float)
    cdef double[::1] zb = np.ascontiguousarray(zbar, float)
    cdef double[::1] rb = np.ascontiguousarray(rbar, float)
    cdef Py_ssize_t[::1] od = order
    cdef Py_ssize_t[::1] st = starts
    cdef double f, fn, gnorm, alpha, step = 1.0, moved, dec, d
    cdef long n = 0, it
    if L == 0:
        return x_arr, 0
    with nogil:
        f = _objective(x, nu_v, G_v, w_v, vb, zb, rb, rho, g, om, cv)
        for it in range(1, max_steps + 1):
            n = it
            gnorm = 0.0
            for i in range(L):
                if fabs(g[i]) > gnorm:
                    gnorm = fabs(g[i])
            if gnorm == 0.0:
                break
            alpha = step if step < 1e6 else 1e6
            if not alpha > 0.0:
                alpha = 1.0
            while True:
                for i in range(L):
                    xn[i] = x[i] + alpha * g[i]
                _project_groups_ball(&xn[0], &od[0], &st[0], cp.shape[0], &cp[0])
                fn = _objective(xn, nu_v, G_v, w_v, vb, zb, rb, rho, gn, om, cv)
                dec = 0.0
                for i in range(L):
                    dec += g[i] * (xn[i] - x[i])
                if fn >= f + 1e-4 * dec or alpha < 1e-16:
                    break
                alpha *= 0.5
            moved = 0.0
            for i in range(L):
                d = fabs(xn[i] - x[i])
                if d > moved:
                    moved = d
                x[i] = xn[i]
                g[i] = gn[i]
            f = fn
            step = 2.0 * alpha
            if moved / alpha < tol or moved < 1e-15:
                break
    return x_arr * x_arr, n
