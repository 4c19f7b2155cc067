"""Numba twins of the kernels in ``_numpy.py``.

Same signatures and semantics, written as explicit loops (the layer widths
are tiny, so scalar loops compile to better code than vectorized temporaries
would).  See ``_numpy.py`` for the documented conventions.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from . import _spec as S


@njit(cache=True)
def log_softmax2d(Z):
    N, K = Z.shape
    out = np.empty((N, K))
    for i in range(N):
        m = Z[i, 0]
        for k in range(1, K):
            if Z[i, k] > m:
                m = Z[i, k]
        s = 0.0
        for k in range(K):
            s += np.exp(Z[i, k] - m)
        lse = m + np.log(s)
        for k in range(K):
            out[i, k] = Z[i, k] - lse
    return out


@njit(cache=True)
def forward_cached(widths, params, X):
    n_layers = widths.shape[0] - 1
    N = X.shape[0]
    max_w = 0
    for i in range(widths.shape[0]):
        if widths[i] > max_w:
            max_w = widths[i]
    cache = np.zeros((n_layers + 1, N, max_w))
    for i in range(N):
        for j in range(widths[0]):
            cache[0, i, j] = X[i, j]
    off = 0
    for layer in range(n_layers):
        d_in = widths[layer]
        d_out = widths[layer + 1]
        w0 = off
        b0 = off + d_out * d_in
        off += d_out * (d_in + 1)
        last = layer == n_layers - 1
        for i in range(N):
            for o in range(d_out):
                z = params[b0 + o]
                wrow = w0 + o * d_in
                for j in range(d_in):
                    z += params[wrow + j] * cache[layer, i, j]
                if (not last) and z < 0.0:
                    z = 0.0
                cache[layer + 1, i, o] = z
    return cache


@njit(cache=True)
def mlp_log_probs(widths, params, X):
    n_layers = widths.shape[0] - 1
    K = widths[n_layers]
    N = X.shape[0]
    cache = forward_cached(widths, params, X)
    Z = np.empty((N, K))
    for i in range(N):
        for k in range(K):
            Z[i, k] = cache[n_layers, i, k]
    return log_softmax2d(Z)


@njit(cache=True)
def pred_value_grad(P, Y, spec_i, spec_f, mu_table, var_table):
    N, K = P.shape
    G = np.zeros((N, K))
    value = 0.0

    pred = spec_i[S.I_PRED]
    if pred == S.PRED_DIRICHLET:
        am1 = spec_f[S.F_ALPHA] - 1.0
        for i in range(N):
            for k in range(K):
                value += am1 * P[i, k]
                G[i, k] += am1
    elif pred == S.PRED_DIRCLIP:
        am1 = spec_f[S.F_ALPHA] - 1.0
        v = spec_f[S.F_CLIP]
        for i in range(N):
            for k in range(K):
                if P[i, k] > v:
                    value += am1 * P[i, k]
                    G[i, k] += am1
                else:
                    value += am1 * v
    elif pred == S.PRED_NDG:
        for i in range(N):
            y = Y[i]
            for k in range(K):
                dev = P[i, k] - mu_table[y, k]
                var = var_table[y, k]
                value += -0.5 * dev * dev / var
                G[i, k] += -dev / var
    elif pred == S.PRED_CONFIDENCE:
        c = 1.0 / spec_f[S.F_CONF_T] - 1.0
        for i in range(N):
            top = 0
            for k in range(1, K):
                if P[i, k] > P[i, top]:
                    top = k
            value += c * P[i, top]
            G[i, top] += c

    lik = spec_i[S.I_LIK]
    if lik == S.LIK_CATEGORICAL:
        for i in range(N):
            value += P[i, Y[i]]
            G[i, Y[i]] += 1.0
    elif lik == S.LIK_NDGQ:
        a = spec_f[S.F_NDG_A]
        b = spec_f[S.F_NDG_B]
        for i in range(N):
            py = P[i, Y[i]]
            value += a * py + b * py * py
            G[i, Y[i]] += a + 2.0 * b * py

    return value, G


@njit(cache=True)
def posterior_value_and_grad(widths, params, X, Y, spec_i, spec_f, mu_table, var_table):
    n_layers = widths.shape[0] - 1
    K = widths[n_layers]
    N = X.shape[0]

    cache = forward_cached(widths, params, X)
    Z = np.empty((N, K))
    for i in range(N):
        for k in range(K):
            Z[i, k] = cache[n_layers, i, k]
    P = log_softmax2d(Z)

    obs_value, G = pred_value_grad(P, Y, spec_i, spec_f, mu_table, var_table)

    delta = np.empty((N, K))
    for i in range(N):
        gplus = 0.0
        for k in range(K):
            gplus += G[i, k]
        for k in range(K):
            delta[i, k] = G[i, k] - np.exp(P[i, k]) * gplus

    off_w = np.zeros(n_layers, dtype=np.int64)
    off_b = np.zeros(n_layers, dtype=np.int64)
    off = 0
    for layer in range(n_layers):
        d_in = widths[layer]
        d_out = widths[layer + 1]
        off_w[layer] = off
        off_b[layer] = off + d_out * d_in
        off += d_out * (d_in + 1)

    grad = np.zeros(params.shape[0])
    cur = delta
    for layer in range(n_layers - 1, -1, -1):
        d_in = widths[layer]
        d_out = widths[layer + 1]
        w0 = off_w[layer]
        b0 = off_b[layer]
        for o in range(d_out):
            db = 0.0
            for i in range(N):
                db += cur[i, o]
            grad[b0 + o] = db
            wrow = w0 + o * d_in
            for j in range(d_in):
                s = 0.0
                for i in range(N):
                    s += cur[i, o] * cache[layer, i, j]
                grad[wrow + j] = s
        if layer > 0:
            nxt = np.zeros((N, d_in))
            for i in range(N):
                for j in range(d_in):
                    if cache[layer, i, j] > 0.0:
                        s = 0.0
                        for o in range(d_out):
                            s += cur[i, o] * params[w0 + o * d_in + j]
                        nxt[i, j] = s
            cur = nxt

    data_scale = spec_f[S.F_DATA_SCALE]
    value = data_scale * obs_value
    for t in range(grad.shape[0]):
        grad[t] *= data_scale

    if spec_i[S.I_PARAM] == S.PARAM_NORMAL:
        sig2 = spec_f[S.F_SIGMA] * spec_f[S.F_SIGMA]
        ss = 0.0
        for t in range(params.shape[0]):
            ss += params[t] * params[t]
            grad[t] += -params[t] / sig2
        value += -0.5 * ss / sig2

    inv_t = spec_f[S.F_INV_TEMP]
    for t in range(grad.shape[0]):
        grad[t] *= inv_t
    return inv_t * value, grad


@njit(cache=True)
def flow_run(logp0, label, spec_i, spec_f, mu_table, var_table,
             eps, n_steps, clamp, store_every):
    n, K = logp0.shape
    Y = np.full(n, label, dtype=np.int64)

    logp = np.empty((n, K))
    for i in range(n):
        s = 0.0
        for k in range(K):
            s += np.exp(logp0[i, k])
        lse = np.log(s)
        for k in range(K):
            logp[i, k] = logp0[i, k] - lse

    n_stored = n_steps // store_every + 1
    traj = np.zeros((n, n_stored, K))
    for i in range(n):
        for k in range(K):
            traj[i, 0, k] = logp[i, k]

    clamp_events = 0
    stored = 1
    for step in range(1, n_steps + 1):
        _, G = pred_value_grad(logp, Y, spec_i, spec_f, mu_table, var_table)
        for i in range(n):
            gplus = 0.0
            ydotg = 0.0
            ysq = 0.0
            for k in range(K):
                y = np.exp(logp[i, k])
                gplus += G[i, k]
                ydotg += y * G[i, k]
                ysq += y * y
            for k in range(K):
                y = np.exp(logp[i, k])
                d = G[i, k] - y * gplus - ydotg + gplus * ysq
                v = logp[i, k] + eps * d
                if v < -clamp:
                    v = -clamp
                    clamp_events += 1
                elif v > clamp:
                    v = clamp
                    clamp_events += 1
                logp[i, k] = v
            m = logp[i, 0]
            for k in range(1, K):
                if logp[i, k] > m:
                    m = logp[i, k]
            s = 0.0
            for k in range(K):
                s += np.exp(logp[i, k] - m)
            lse = m + np.log(s)
            for k in range(K):
                logp[i, k] -= lse
        if step % store_every == 0:
            for i in range(n):
                for k in range(K):
                    traj[i, stored, k] = logp[i, k]
            stored += 1
    return traj, clamp_events
