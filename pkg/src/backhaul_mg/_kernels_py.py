"""Pure-Python/numpy implementations of the hot kernels.

Semantics match ``_kernels.pyx`` line for line; this module is used when the
compiled extension is unavailable or ``BACKHAUL_MG_PURE=1`` is set.
"""

import math

import numpy as np


def poisson_binomial_pmf(p):
    """Distribution of the number of successes among independent Bernoulli(p_i)."""
    p = np.asarray(p, dtype=float)
    pmf = np.zeros(p.shape[0] + 1)
    pmf[0] = 1.0
    for i, pi in enumerate(p):
        pmf[1:i + 2] = pmf[1:i + 2] * (1.0 - pi) + pmf[0:i + 1] * pi
        pmf[0] *= 1.0 - pi
    return pmf


def _prefix_pmfs(p):
    G = p.shape[0]
    pre = np.zeros((G + 1, G + 1))
    pre[0, 0] = 1.0
    for i in range(G):
        pre[i + 1, : i + 2] = 0.0
        pre[i + 1, : i + 1] += pre[i, : i + 1] * (1.0 - p[i])
        pre[i + 1, 1 : i + 2] += pre[i, : i + 1] * p[i]
    return pre


def loo_expected_c(p, u_c):
    """Expected utility of requesting for each player, opponents drawn from ``p``.

    ``u_c[k]`` is the payoff when ``k`` opponents also request.
    """
    p = np.asarray(p, dtype=float)
    u_c = np.asarray(u_c, dtype=float)
    G = p.shape[0]
    pre = _prefix_pmfs(p)  # pre[i]: players 0..i-1
    suf = _prefix_pmfs(p[::-1])  # suf[j]: last j players
    out = np.empty(G)
    for i in range(G):
        opp = np.convolve(pre[i, : i + 1], suf[G - 1 - i, : G - i])
        out[i] = opp @ u_c
    return out


def _logistic(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def learning_block(p, u_hat, u_c, unif, gauss, sigma, alpha, lam, kappa, kappa_decay,
                   t0, hist, tol, window, trace, tr_act, tr_obs, tr_p):
    """Advance the request/defer learners over one block of sub-slots.

    Mutates ``p``, ``u_hat`` and ``hist`` in place.  Returns
    ``(steps_done, converged_at)`` with ``converged_at = -1`` when the window
    criterion did not fire inside the block.
    """
    G = p.shape[0]
    B = unif.shape[0]
    W1 = window + 1
    logistic = np.vectorize(_logistic, otypes=[float])
    for b in range(B):
        t = t0 + b + 1
        act = unif[b] < p
        f_c = int(act.sum())
        noise = sigma * gauss[b]
        obs = np.where(act, u_c[f_c - 1] if f_c > 0 else 0.0,
                       -u_c[f_c] if f_c < G else 0.0) + noise
        a = alpha[b]
        u_hat[act, 0] += a * (obs[act] - u_hat[act, 0])
        u_hat[~act, 1] += a * (obs[~act] - u_hat[~act, 1])
        k = kappa / t if kappa_decay else kappa
        beta = logistic(k * (u_hat[:, 0] - u_hat[:, 1]))
        p += lam[b] * (beta - p)
        if trace:
            tr_act[b] = act
            tr_obs[b] = obs
            tr_p[b] = p
        hist[t % W1] = p
        if t >= window and np.max(np.abs(p - hist[(t - window) % W1])) < tol:
            return b + 1, t - window
    return B, -1


def _sub6_block_rates(j, eta_j, rx6, bw6, noise6, out):
    """Rate each SBS receives on sub-6 block ``j`` given its (M, N) links."""
    M, N = eta_j.shape
    for i in range(N):
        out[i] = 0.0
    for m in range(M):
        for i in range(N):
            if eta_j[m, i]:
                interf = 0.0
                for o in range(M):
                    if o != m and eta_j[o].any():
                        interf += rx6[j, o, i]
                out[i] += bw6[j] * math.log2(1.0 + rx6[j, m, i] / (noise6 + interf))


def greedy_assign(demand, wired, mmw_rate, rx6, bw6, noise6, floor, rtol):
    """Greedy (MBS, block) -> SBS assignment; see ``allocation.allocate``.

    ``mmw_rate`` is (M, K1, N) in bits/s, ``rx6`` the sub-6 received powers
    (K2, M, N).  Returns eta with shape (K1 + K2, M, N).
    """
    M, K1, N = mmw_rate.shape
    K2 = rx6.shape[0]
    eta = np.zeros((K1 + K2, M, N), dtype=np.int8)
    held = [0] * N
    w_mmw = [0.0] * N
    w6 = np.zeros((K2, N))
    mmw_free = [True] * K1
    active = np.zeros((K2, M), dtype=bool)
    free_left = K1 + K2 * M
    while free_left > 0:
        any_below = any(h < floor for h in held)
        n, best_unmet = -1, -math.inf
        for i in range(N):
            unmet = demand[i] - wired[i] - w_mmw[i] - w6[:, i].sum()
            ok = held[i] < floor if any_below else unmet > rtol * max(1.0, demand[i])
            if ok and unmet > best_unmet:
                n, best_unmet = i, unmet
        if n < 0:
            break
        best_rate, bk, bm = -1.0, -1, -1
        for k in range(K1):  # mmW scanned first, so ties go to mmW
            if mmw_free[k]:
                for m in range(M):
                    if mmw_rate[m, k, n] > best_rate:
                        best_rate, bk, bm = mmw_rate[m, k, n], k, m
        for j in range(K2):
            interf = 0.0
            for m in range(M):
                if active[j, m]:
                    interf += rx6[j, m, n]
            for m in range(M):
                if not active[j, m]:
                    r = bw6[j] * math.log2(1.0 + rx6[j, m, n] / (noise6 + interf))
                    if r > best_rate:
                        best_rate, bk, bm = r, K1 + j, m
        eta[bk, bm, n] = 1
        held[n] += 1
        free_left -= 1
        if bk < K1:
            mmw_free[bk] = False
            w_mmw[n] += mmw_rate[bm, bk, n]
        else:
            j = bk - K1
            active[j, bm] = True
            _sub6_block_rates(j, eta[bk], rx6, bw6, noise6, w6[j])
    return eta
