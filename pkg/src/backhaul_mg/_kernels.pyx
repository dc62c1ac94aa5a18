# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: Poisson-binomial expectations and the learner loop."""

import numpy as np
from libc.math cimport INFINITY, exp, fabs, fmax, log2


def poisson_binomial_pmf(const double[::1] p):
    cdef Py_ssize_t n = p.shape[0], i, k
    out = np.zeros(n + 1)
    cdef double[::1] o = out
    cdef double q
    o[0] = 1.0
    for i in range(n):
        q = 1.0 - p[i]
        for k in range(i + 1, 0, -1):
            o[k] = o[k] * q + o[k - 1] * p[i]
        o[0] *= q
    return out


cdef void _prefix(const double[::1] p, double[:, ::1] pre, bint reverse) noexcept nogil:
    cdef Py_ssize_t G = p.shape[0], i, k
    cdef double pi
    pre[0, 0] = 1.0
    for i in range(G):
        pi = p[G - 1 - i] if reverse else p[i]
        pre[i + 1, i + 1] = pre[i, i] * pi
        for k in range(i, 0, -1):
            pre[i + 1, k] = pre[i, k] * (1.0 - pi) + pre[i, k - 1] * pi
        pre[i + 1, 0] = pre[i, 0] * (1.0 - pi)


def loo_expected_c(const double[::1] p, const double[::1] u_c):
    cdef Py_ssize_t G = p.shape[0], i, a, b, nb
    pre_arr = np.zeros((G + 1, G + 1))
    suf_arr = np.zeros((G + 1, G + 1))
    out = np.empty(G)
    cdef double[:, ::1] pre = pre_arr
    cdef double[:, ::1] suf = suf_arr
    cdef double[::1] o = out
    cdef double acc, pa
    with nogil:
        _prefix(p, pre, False)
        _prefix(p, suf, True)
        for i in range(G):
            nb = G - 1 - i
            acc = 0.0
            for a in range(i + 1):
                pa = pre[i, a]
                if pa == 0.0:
                    continue
                for b in range(nb + 1):
                    acc += pa * suf[nb, b] * u_c[a + b]
            o[i] = acc
    return out


cdef inline double _logistic(double x) noexcept nogil:
    cdef double e
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def learning_block(double[::1] p, double[:, ::1] u_hat, const double[::1] u_c,
                   const double[:, ::1] unif, const double[:, ::1] gauss, double sigma,
                   const double[::1] alpha, const double[::1] lam, const double[::1] kappa,
                   bint kappa_decay, long t0, double[:, ::1] hist, double tol, long window,
                   bint trace, unsigned char[:, ::1] tr_act, double[:, ::1] tr_obs,
                   double[:, ::1] tr_p):
    cdef Py_ssize_t G = p.shape[0], B = unif.shape[0], b, i
    cdef long t, W1 = window + 1, f_c
    cdef double obs, k, beta, dev, uc_pay, ud_pay
    cdef unsigned char[::1] act = np.zeros(G, dtype=np.uint8)
    with nogil:
        for b in range(B):
            t = t0 + b + 1
            f_c = 0
            for i in range(G):
                act[i] = unif[b, i] < p[i]
                f_c += act[i]
            uc_pay = u_c[f_c - 1] if f_c > 0 else 0.0
            ud_pay = -u_c[f_c] if f_c < G else 0.0
            dev = 0.0
            for i in range(G):
                if act[i]:
                    obs = uc_pay + sigma * gauss[b, i]
                    u_hat[i, 0] += alpha[b] * (obs - u_hat[i, 0])
                else:
                    obs = ud_pay + sigma * gauss[b, i]
                    u_hat[i, 1] += alpha[b] * (obs - u_hat[i, 1])
                k = kappa[i] / t if kappa_decay else kappa[i]
                beta = _logistic(k * (u_hat[i, 0] - u_hat[i, 1]))
                p[i] += lam[b] * (beta - p[i])
                if trace:
                    tr_act[b, i] = act[i]
                    tr_obs[b, i] = obs
                    tr_p[b, i] = p[i]
                hist[t % W1, i] = p[i]
                if t >= window:
                    dev = max(dev, fabs(p[i] - hist[(t - window) % W1, i]))
            if t >= window and dev < tol:
                with gil:
                    return b + 1, t - window
    return B, -1


cdef void _sub6_block_rates(Py_ssize_t j, signed char[:, :, ::1] eta, Py_ssize_t k,
                            const double[:, :, ::1] rx6, const double[::1] bw6, double noise6,
                            double[:, ::1] w6) noexcept nogil:
    cdef Py_ssize_t M = eta.shape[1], N = eta.shape[2], m, o, i, t
    cdef double interf
    cdef bint on
    for i in range(N):
        w6[j, i] = 0.0
    for m in range(M):
        for i in range(N):
            if eta[k, m, i]:
                interf = 0.0
                for o in range(M):
                    if o == m:
                        continue
                    on = False
                    for t in range(N):
                        if eta[k, o, t]:
                            on = True
                            break
                    if on:
                        interf += rx6[j, o, i]
                w6[j, i] += bw6[j] * log2(1.0 + rx6[j, m, i] / (noise6 + interf))


def greedy_assign(const double[::1] demand, const double[::1] wired,
                  const double[:, :, ::1] mmw_rate, const double[:, :, ::1] rx6,
                  const double[::1] bw6, double noise6, long floor, double rtol):
    cdef Py_ssize_t M = mmw_rate.shape[0], K1 = mmw_rate.shape[1], N = mmw_rate.shape[2]
    cdef Py_ssize_t K2 = rx6.shape[0], i, j, k, m, n, bk, bm
    eta_arr = np.zeros((K1 + K2, M, N), dtype=np.int8)
    w6_arr = np.zeros((K2, N))
    cdef signed char[:, :, ::1] eta = eta_arr
    cdef double[:, ::1] w6 = w6_arr
    cdef long[::1] held = np.zeros(N, dtype=np.int_)
    cdef double[::1] w_mmw = np.zeros(N)
    cdef unsigned char[::1] mmw_free = np.ones(max(K1, 1), dtype=np.uint8)
    cdef unsigned char[:, ::1] active = np.zeros((max(K2, 1), M), dtype=np.uint8)
    cdef long free_left = K1 + K2 * M
    cdef bint any_below, ok
    cdef double unmet, best_unmet, best_rate, interf, r, w
    with nogil:
        while free_left > 0:
            any_below = False
            for i in range(N):
                if held[i] < floor:
                    any_below = True
            n = -1
            best_unmet = -INFINITY
            for i in range(N):
                w = w_mmw[i]
                for j in range(K2):
                    w += w6[j, i]
                unmet = demand[i] - wired[i] - w
                if any_below:
                    ok = held[i] < floor
                else:
                    ok = unmet > rtol * fmax(1.0, demand[i])
                if ok and unmet > best_unmet:
                    n = i
                    best_unmet = unmet
            if n < 0:
                break
            best_rate = -1.0
            bk = -1
            bm = -1
            for k in range(K1):
                if mmw_free[k]:
                    for m in range(M):
                        if mmw_rate[m, k, n] > best_rate:
                            best_rate = mmw_rate[m, k, n]
                            bk = k
                            bm = m
            for j in range(K2):
                interf = 0.0
                for m in range(M):
                    if active[j, m]:
                        interf += rx6[j, m, n]
                for m in range(M):
                    if not active[j, m]:
                        r = bw6[j] * log2(1.0 + rx6[j, m, n] / (noise6 + interf))
                        if r > best_rate:
                            best_rate = r
                            bk = K1 + j
                            bm = m
            eta[bk, bm, n] = 1
            held[n] += 1
            free_left -= 1
            if bk < K1:
                mmw_free[bk] = False
                w_mmw[n] += mmw_rate[bm, bk, n]
            else:
                active[bk - K1, bm] = True
                _sub6_block_rates(bk - K1, eta, bk, rx6, bw6, noise6, w6)
    return eta_arr
