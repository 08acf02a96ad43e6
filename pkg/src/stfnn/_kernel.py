"""Compiled full-batch Adam loop for one network.

Parameters live in one flat vector laid out like
``NetworkParameters.flatten()``: beta, bias, W_0..W_L, b_0..b_L. Each
iteration runs forward and backward layer by layer over all rows, giving
the loss ``0.5 * sum_i rw_i (yhat_i - y_i)^2 / sum_i rw_i`` and its gradient.
"""

import math

import numpy as np
from numba import njit

ACT_CODES = {"identity": 0, "tanh": 1, "sigmoid": 2, "relu": 3}


@njit(cache=True, inline="always")
def _tanh(z):
    # exp-based form; agrees with libm tanh to a few ulp and is ~3x faster
    e = math.exp(-2.0 * abs(z))
    t = (1.0 - e) / (1.0 + e)
    return t if z >= 0.0 else -t


@njit(cache=True, inline="always")
def _act(code, z):
    if code == 1:
        return _tanh(z)
    if code == 2:
        return 0.5 * (1.0 + _tanh(0.5 * z))
    if code == 3:
        return z if z > 0.0 else 0.0
    return z


@njit(cache=True, inline="always")
def _dact(code, z, a):
    if code == 1:
        return 1.0 - a * a
    if code == 2:
        return a * (1.0 - a)
    if code == 3:
        return 1.0 if z > 0.0 else 0.0
    return 1.0


@njit(cache=True, fastmath={"reassoc", "contract", "nsz"})
def _loss_grad(theta, grad, Ct, y, s, rw, rw_sum, Et, J1, P, ne, widths, acts, woff, boff, z, a, d):
    # Arrays are feature-major (rows innermost) so every inner loop runs over
    # independent rows: Ct is (P, n), Et is (ne, n), z/a/d are (L+1, maxw, n).
    L = widths.shape[0]
    n = Ct.shape[1]
    off_bias = J1 * P
    grad[:] = 0.0
    # functional layer
    for j in range(J1):
        zj = z[0, j]
        b = theta[off_bias + j]
        for i in range(n):
            zj[i] = 0.0
        for p in range(P):
            w = theta[j * P + p]
            cp = Ct[p]
            for i in range(n):
                zj[i] += w * cp[i]
        aj = a[0, j]
        for i in range(n):
            zj[i] = s[i] * zj[i] + b
            aj[i] = _act(acts[0], zj[i])
    # dense layers
    fan = J1
    for l in range(L):
        w0 = woff[l]
        wl = widths[l]
        for k in range(wl):
            zk = z[l + 1, k]
            b = theta[boff[l] + k]
            for i in range(n):
                zk[i] = b
            for j in range(fan):
                w = theta[w0 + j * wl + k]
                aj = a[l, j]
                for i in range(n):
                    zk[i] += w * aj[i]
            if l == 0:
                for e in range(ne):
                    w = theta[w0 + (J1 + e) * wl + k]
                    ee = Et[e]
                    for i in range(n):
                        zk[i] += w * ee[i]
            ak = a[l + 1, k]
            for i in range(n):
                ak[i] = _act(acts[l + 1], zk[i])
        fan = wl
    # output residual
    loss = 0.0
    out = a[L, 0]
    dL = d[L, 0]
    for i in range(n):
        r = out[i] - y[i]
        loss += rw[i] * r * r
        dL[i] = rw[i] * r / rw_sum * _dact(acts[L], z[L, 0, i], out[i])
    loss = 0.5 * loss / rw_sum
    # backward
    for l in range(L - 1, -1, -1):
        w0 = woff[l]
        wl = widths[l]
        fan = J1 if l == 0 else widths[l - 1]
        for k in range(wl):
            dk = d[l + 1, k]
            acc = 0.0
            for i in range(n):
                acc += dk[i]
            grad[boff[l] + k] = acc
        for j in range(fan):
            aj = a[l, j]
            dj = d[l, j]
            for i in range(n):
                dj[i] = 0.0
            for k in range(wl):
                dk = d[l + 1, k]
                w = theta[w0 + j * wl + k]
                acc = 0.0
                for i in range(n):
                    acc += aj[i] * dk[i]
                    dj[i] += w * dk[i]
                grad[w0 + j * wl + k] = acc
            zj = z[l, j]
            for i in range(n):
                dj[i] *= _dact(acts[l], zj[i], aj[i])
        if l == 0:
            for e in range(ne):
                ee = Et[e]
                for k in range(wl):
                    dk = d[1, k]
                    acc = 0.0
                    for i in range(n):
                        acc += ee[i] * dk[i]
                    grad[w0 + (J1 + e) * wl + k] = acc
    for j in range(J1):
        dj = d[0, j]
        acc = 0.0
        for i in range(n):
            acc += dj[i]
            dj[i] *= s[i]
        grad[off_bias + j] = acc
        for p in range(P):
            cp = Ct[p]
            acc = 0.0
            for i in range(n):
                acc += dj[i] * cp[i]
            grad[j * P + p] = acc
    return loss


@njit(cache=True)
def train_one(C, y, s, rw, E, theta0, J1, ne, widths, acts, lr, b1, b2, eps, max_iter, tol, patience, every):
    P = C.shape[1]
    n = C.shape[0]
    L = widths.shape[0]
    maxw = J1
    for l in range(L):
        if widths[l] > maxw:
            maxw = widths[l]
    z = np.zeros((L + 1, maxw, n))
    a = np.zeros((L + 1, maxw, n))
    d = np.zeros((L + 1, maxw, n))
    Ct = np.ascontiguousarray(C.T)
    Et = np.ascontiguousarray(E.T)
    woff = np.empty(L, np.int64)
    boff = np.empty(L, np.int64)
    pos = J1 * P + J1
    fan = J1 + ne
    for l in range(L):
        woff[l] = pos
        pos += fan * widths[l]
        fan = widths[l]
    for l in range(L):
        boff[l] = pos
        pos += widths[l]
    rw_sum = 0.0
    for i in range(rw.shape[0]):
        rw_sum += rw[i]
    theta = theta0.copy()
    best = theta0.copy()
    grad = np.zeros_like(theta)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    best_loss = np.inf
    window = np.empty(patience + 1)
    hist = np.empty(max_iter // every + 2)
    nh = 0
    stopped = max_iter
    for it in range(max_iter + 1):
        loss = _loss_grad(theta, grad, Ct, y, s, rw, rw_sum, Et, J1, P, ne, widths, acts, woff, boff, z, a, d)
        if not np.isfinite(loss):
            return best, best_loss, hist[:nh], -it - 1
        if loss < best_loss:
            best_loss = loss
            best[:] = theta
        window[it % (patience + 1)] = best_loss
        if it % every == 0:
            hist[nh] = best_loss
            nh += 1
        if it >= patience:
            old = window[(it - patience) % (patience + 1)]
            if old - best_loss <= tol * abs(old):
                stopped = it
                break
        if it == max_iter:
            break
        t = it + 1
        c1 = 1.0 - b1**t
        c2 = 1.0 - b2**t
        for q in range(theta.shape[0]):
            g = grad[q]
            m[q] = b1 * m[q] + (1.0 - b1) * g
            v[q] = b2 * v[q] + (1.0 - b2) * g * g
            theta[q] -= lr * (m[q] / c1) / (np.sqrt(v[q] / c2) + eps)
    hist[nh] = best_loss
    nh += 1
    return best, best_loss, hist[:nh], stopped
