"""Hot numeric kernels: batched blob rendering and mixture noise-prediction terms.

Each kernel has a vectorized pure-numpy implementation and a numba @njit loop
implementation. The active path is chosen at import time:

    DIFFREWARD_NUMBA=0   force the numpy path
    DIFFREWARD_NUMBA=1   force numba (raises if numba is not importable)
    unset or "auto"      numba when importable, numpy otherwise

Both paths agree to float round-off; `benchmarks/bench_kernels.py` compares
their throughput.
"""

from __future__ import annotations

import os

import numpy as np

_MODE = os.environ.get("DIFFREWARD_NUMBA", "auto").strip().lower() or "auto"


def blob_images_numpy(cx, cy, height, width, radius):
    """Render isotropic Gaussian blobs with peak intensity 1.

    cx, cy: (B,) blob centers in pixel coordinates (column, row).
    Returns (B, height, width) float64 images.
    """
    cx = np.asarray(cx, dtype=np.float64)
    cy = np.asarray(cy, dtype=np.float64)
    jj = np.arange(width, dtype=np.float64)
    ii = np.arange(height, dtype=np.float64)
    dx2 = (jj[None, None, :] - cx[:, None, None]) ** 2
    dy2 = (ii[None, :, None] - cy[:, None, None]) ** 2
    return np.exp(-(dx2 + dy2) / (2.0 * radius * radius))


def gm_reward_terms_numpy(x0, eps0, sqrt_ab, noise_var, means, sigmas2, logw,
                          cond, n_frames):
    """Alignment / reconstruction term sums for a batch of corrupted observations.

    x0, eps0:  (B, D) clean observations and source noise, D = n_frames * frame_size.
    sqrt_ab:   (B,) per-row signal coefficient sqrt(alpha_bar_t).
    noise_var: (B,) per-row 1 - alpha_bar_t (must be > 0).
    means:     (K, D) mixture component means; sigmas2: (K,) component variances;
    logw:      (K,) log mixture weights.
    cond:      index of the conditioning component.

    Returns (align, rec), each (B, n_frames): per-frame sums of squared
    differences between the component-conditional and full-mixture noise
    predictions (align), and the reconstruction advantage of the conditional
    prediction over the mixture prediction (rec).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    eps0 = np.asarray(eps0, dtype=np.float64)
    s = np.asarray(sqrt_ab, dtype=np.float64)[:, None]
    v = np.asarray(noise_var, dtype=np.float64)[:, None]
    sq_v = np.sqrt(v)
    xt = s * x0 + sq_v * eps0

    ab = s * s
    wv = ab[:, None, :] * sigmas2[None, :, None] + v[:, None, :]   # (B, K, 1)
    diff = xt[:, None, :] - s[:, None, :] * means[None, :, :]      # (B, K, D)
    d2 = np.sum(diff * diff, axis=2, keepdims=True)                # (B, K, 1)
    D = x0.shape[1]
    log_resp = logw[None, :, None] - 0.5 * D * np.log(wv) - d2 / (2.0 * wv)
    log_resp -= log_resp.max(axis=1, keepdims=True)
    resp = np.exp(log_resp)
    resp /= resp.sum(axis=1, keepdims=True)

    # eps_k = sqrt(v) * (xt - s*mu_k) / wv_k ; uncond = responsibility mixture
    eps_k = sq_v[:, None, :] * diff / wv
    eps_u = np.sum(resp * eps_k, axis=1)
    eps_c = eps_k[:, cond, :]

    da = (eps_c - eps_u) ** 2
    du = (eps_u - eps0) ** 2
    dc = (eps_c - eps0) ** 2
    shape = (x0.shape[0], n_frames, D // n_frames)
    align = da.reshape(shape).sum(axis=2)
    rec = du.reshape(shape).sum(axis=2) - dc.reshape(shape).sum(axis=2)
    return align, rec


_HAVE_NUMBA = False
blob_images_numba = None
gm_reward_terms_numba = None

if _MODE != "0":
    try:
        from numba import njit
        _HAVE_NUMBA = True
    except ImportError:
        if _MODE == "1":
            raise

if _HAVE_NUMBA:

    @njit(cache=True)
    def _blob_images_nb(cx, cy, height, width, radius):
        B = cx.shape[0]
        out = np.empty((B, height, width))
        inv = 1.0 / (2.0 * radius * radius)
        for b in range(B):
            for i in range(height):
                dy2 = (i - cy[b]) ** 2
                for j in range(width):
                    d2 = (j - cx[b]) ** 2 + dy2
                    out[b, i, j] = np.exp(-d2 * inv)
        return out

    @njit(cache=True)
    def _gm_reward_terms_nb(x0, eps0, sqrt_ab, noise_var, means, sigmas2, logw,
                            cond, n_frames):
        B, D = x0.shape
        K = means.shape[0]
        Df = D // n_frames
        align = np.zeros((B, n_frames))
        rec = np.zeros((B, n_frames))
        xt = np.empty(D)
        log_resp = np.empty(K)
        wv = np.empty(K)
        for b in range(B):
            s = sqrt_ab[b]
            v = noise_var[b]
            sq_v = np.sqrt(v)
            ab = s * s
            for d in range(D):
                xt[d] = s * x0[b, d] + sq_v * eps0[b, d]
            for k in range(K):
                wv[k] = ab * sigmas2[k] + v
                d2 = 0.0
                for d in range(D):
                    diff = xt[d] - s * means[k, d]
                    d2 += diff * diff
                log_resp[k] = logw[k] - 0.5 * D * np.log(wv[k]) - d2 / (2.0 * wv[k])
            m = log_resp[0]
            for k in range(1, K):
                if log_resp[k] > m:
                    m = log_resp[k]
            tot = 0.0
            for k in range(K):
                log_resp[k] = np.exp(log_resp[k] - m)
                tot += log_resp[k]
            for k in range(K):
                log_resp[k] /= tot
            for d in range(D):
                f = d // Df
                eps_u = 0.0
                for k in range(K):
                    eps_u += log_resp[k] * sq_v * (xt[d] - s * means[k, d]) / wv[k]
                eps_c = sq_v * (xt[d] - s * means[cond, d]) / wv[cond]
                da = eps_c - eps_u
                du = eps_u - eps0[b, d]
                dc = eps_c - eps0[b, d]
                align[b, f] += da * da
                rec[b, f] += du * du - dc * dc
        return align, rec

    def blob_images_numba(cx, cy, height, width, radius):
        cx = np.ascontiguousarray(cx, dtype=np.float64)
        cy = np.ascontiguousarray(cy, dtype=np.float64)
        return _blob_images_nb(cx, cy, height, width, float(radius))

    def gm_reward_terms_numba(x0, eps0, sqrt_ab, noise_var, means, sigmas2,
                              logw, cond, n_frames):
        return _gm_reward_terms_nb(
            np.ascontiguousarray(x0, dtype=np.float64),
            np.ascontiguousarray(eps0, dtype=np.float64),
            np.ascontiguousarray(sqrt_ab, dtype=np.float64),
            np.ascontiguousarray(noise_var, dtype=np.float64),
            np.ascontiguousarray(means, dtype=np.float64),
            np.ascontiguousarray(sigmas2, dtype=np.float64),
            np.ascontiguousarray(logw, dtype=np.float64),
            int(cond), int(n_frames))


if _HAVE_NUMBA:
    blob_images = blob_images_numba
    gm_reward_terms = gm_reward_terms_numba
else:
    blob_images = blob_images_numpy
    gm_reward_terms = gm_reward_terms_numpy


def active_backend():
    """Name of the kernel path selected at import time."""
    return "numba" if _HAVE_NUMBA else "numpy"
