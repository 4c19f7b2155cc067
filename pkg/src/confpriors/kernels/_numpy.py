"""Pure-numpy kernels.

Reference implementations of the hot numerical paths; the numba twins in
``_numba.py`` mirror these signatures one-to-one.  Conventions:

* ``widths`` is an int64 vector ``[input_dim, h1, ..., K]``.
* ``params`` is a flat float64 vector laid out per layer as the row-major
  weight matrix (out x in) followed by the bias vector (out).
* Log-densities are unnormalized; see the spec codes in ``_spec.py`` for
  how a posterior is encoded.
"""

from __future__ import annotations

import numpy as np

from . import _spec as S


def log_softmax2d(Z):
    """Row-wise log-softmax of a logits matrix, numerically stable."""
    m = Z.max(axis=1)
    shifted = Z - m[:, None]
    lse = np.log(np.exp(shifted).sum(axis=1))
    return shifted - lse[:, None]


def forward_cached(widths, params, X):
    """Forward pass caching every activation row block.

    Returns a (n_layers+1, N, max_width) array whose slab ``l`` holds the
    layer-``l`` activations in its leading ``widths[l]`` columns: slab 0 is
    the input, intermediate slabs are post-ReLU, the last slab is raw logits.
    """
    n_layers = len(widths) - 1
    N = X.shape[0]
    max_w = int(max(widths))
    cache = np.zeros((n_layers + 1, N, max_w))
    cache[0, :, : widths[0]] = X
    A = X
    off = 0
    for layer in range(n_layers):
        d_in = int(widths[layer])
        d_out = int(widths[layer + 1])
        W = params[off : off + d_out * d_in].reshape(d_out, d_in)
        off += d_out * d_in
        b = params[off : off + d_out]
        off += d_out
        Z = A @ W.T + b
        A = np.maximum(Z, 0.0) if layer < n_layers - 1 else Z
        cache[layer + 1, :, :d_out] = A
    return cache


def mlp_log_probs(widths, params, X):
    """Log-probabilities (N x K) of the MLP classifier on a batch."""
    n_layers = len(widths) - 1
    K = int(widths[-1])
    cache = forward_cached(widths, params, X)
    return log_softmax2d(cache[n_layers, :, :K])


def pred_value_grad(P, Y, spec_i, spec_f, mu_table, var_table):
    """Prediction-space log-density and its gradient w.r.t. log-probs.

    ``P`` is an (N, K) matrix of log-probabilities, ``Y`` the labels.
    Returns the summed log-density of prediction prior plus likelihood and
    the (N, K) gradient matrix.
    """
    N, K = P.shape
    G = np.zeros((N, K))
    value = 0.0
    rows = np.arange(N)

    pred = spec_i[S.I_PRED]
    if pred == S.PRED_DIRICHLET:
        am1 = spec_f[S.F_ALPHA] - 1.0
        value += am1 * P.sum()
        G += am1
    elif pred == S.PRED_DIRCLIP:
        am1 = spec_f[S.F_ALPHA] - 1.0
        v = spec_f[S.F_CLIP]
        value += am1 * np.maximum(P, v).sum()
        # gradient flows only through unclipped entries
        G += am1 * (P > v)
    elif pred == S.PRED_NDG:
        mu = mu_table[Y]
        var = var_table[Y]
        dev = P - mu
        value += -0.5 * (dev * dev / var).sum()
        G += -dev / var
    elif pred == S.PRED_CONFIDENCE:
        c = 1.0 / spec_f[S.F_CONF_T] - 1.0
        top = np.argmax(P, axis=1)
        value += c * P[rows, top].sum()
        G[rows, top] += c

    lik = spec_i[S.I_LIK]
    if lik == S.LIK_CATEGORICAL:
        py = P[rows, Y]
        value += py.sum()
        G[rows, Y] += 1.0
    elif lik == S.LIK_NDGQ:
        a = spec_f[S.F_NDG_A]
        b = spec_f[S.F_NDG_B]
        py = P[rows, Y]
        value += (a * py + b * py * py).sum()
        G[rows, Y] += a + 2.0 * b * py

    return value, G


def posterior_value_and_grad(widths, params, X, Y, spec_i, spec_f, mu_table, var_table):
    """Log-density of an encoded posterior and its gradient w.r.t. params.

    Computes (1/T_post) * [param prior + data_scale * sum_i(pred prior + lik)]
    with the gradient obtained by reverse-mode backpropagation through the
    MLP, the log-softmax, and each density family.
    """
    n_layers = len(widths) - 1
    K = int(widths[-1])
    N = X.shape[0]

    cache = forward_cached(widths, params, X)
    Z = cache[n_layers, :, :K]
    P = log_softmax2d(Z)

    obs_value, G = pred_value_grad(P, Y, spec_i, spec_f, mu_table, var_table)

    # d/dz_j of sum_k g_k log yhat_k is g_j - yhat_j * sum(g)
    yhat = np.exp(P)
    gplus = G.sum(axis=1)
    delta = G - yhat * gplus[:, None]

    # per-layer parameter offsets
    off_w = np.zeros(n_layers, dtype=np.int64)
    off_b = np.zeros(n_layers, dtype=np.int64)
    off = 0
    for layer in range(n_layers):
        d_in = int(widths[layer])
        d_out = int(widths[layer + 1])
        off_w[layer] = off
        off_b[layer] = off + d_out * d_in
        off += d_out * (d_in + 1)

    grad = np.zeros_like(params)
    for layer in range(n_layers - 1, -1, -1):
        d_in = int(widths[layer])
        d_out = int(widths[layer + 1])
        A_prev = cache[layer, :, :d_in]
        grad[off_w[layer] : off_w[layer] + d_out * d_in] = (delta.T @ A_prev).ravel()
        grad[off_b[layer] : off_b[layer] + d_out] = delta.sum(axis=0)
        if layer > 0:
            W = params[off_w[layer] : off_w[layer] + d_out * d_in].reshape(d_out, d_in)
            dA = delta @ W
            delta = dA * (cache[layer, :, :d_in] > 0.0)

    data_scale = spec_f[S.F_DATA_SCALE]
    value = data_scale * obs_value
    grad *= data_scale

    if spec_i[S.I_PARAM] == S.PARAM_NORMAL:
        sig2 = spec_f[S.F_SIGMA] * spec_f[S.F_SIGMA]
        value += -0.5 * float(params @ params) / sig2
        grad += -params / sig2

    inv_t = spec_f[S.F_INV_TEMP]
    return inv_t * value, inv_t * grad


def flow_run(logp0, label, spec_i, spec_f, mu_table, var_table,
             eps, n_steps, clamp, store_every):
    """Integrate the prediction-space gradient flow on the simplex.

    Particles move by the logit-space update
    ``dlog yhat = eps * (g - g_plus*yhat - (yhat.g) + g_plus*sum(yhat^2))``
    and are renormalized to the log-simplex after every step.  Log-probs
    escaping ``[-clamp, clamp]`` are clamped and counted.

    Returns (trajectory of log-probs with shape (n, n_steps//store_every + 1, K),
    number of clamp events).
    """
    n, K = logp0.shape
    Y = np.full(n, label, dtype=np.int64)
    logp = logp0 - np.log(np.exp(logp0).sum(axis=1))[:, None]

    n_stored = n_steps // store_every + 1
    traj = np.zeros((n, n_stored, K))
    traj[:, 0, :] = logp
    clamp_events = 0
    stored = 1
    for step in range(1, n_steps + 1):
        _, G = pred_value_grad(logp, Y, spec_i, spec_f, mu_table, var_table)
        yhat = np.exp(logp)
        gplus = G.sum(axis=1)
        ydotg = (yhat * G).sum(axis=1)
        ysq = (yhat * yhat).sum(axis=1)
        delta = G - yhat * gplus[:, None] - ydotg[:, None] + (gplus * ysq)[:, None]
        logp = logp + eps * delta

        out_of_range = np.count_nonzero((logp < -clamp) | (logp > clamp))
        if out_of_range:
            clamp_events += int(out_of_range)
            logp = np.clip(logp, -clamp, clamp)

        m = logp.max(axis=1)
        lse = m + np.log(np.exp(logp - m[:, None]).sum(axis=1))
        logp = logp - lse[:, None]

        if step % store_every == 0:
            traj[:, stored, :] = logp
            stored += 1
    return traj, clamp_events
