"""Brute-force reference implementations used as ground truth in tests.

Everything here enumerates the truncated state space explicitly and is
allowed to be slow.  State enumeration is row-major over the species order:
index = sum_k x_k * prod_{k'>k} n_{k'}, matching the densification of the TT
operators so comparisons need no permutation.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .network import ReactionNetwork

DENSE_STATE_LIMIT = 2 ** 16
SPARSE_STATE_LIMIT = 2 ** 22


def state_enumeration(truncation) -> np.ndarray:
    """All states as an (N, d) array in row-major lexicographic order."""
    grids = np.meshgrid(*[np.arange(n) for n in truncation], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def sparse_cme_matrix(net: ReactionNetwork) -> sp.csr_matrix:
    """CME generator as a sparse matrix; columns sum to zero."""
    if net.n_states > SPARSE_STATE_LIMIT:
        raise ValueError(f"state space of {net.n_states} states is too large")
    n = net.truncation
    states = state_enumeration(n)
    strides = np.array([int(np.prod(n[k + 1:], dtype=np.int64))
                        for k in range(len(n))])
    rows, cols, vals = [], [], []
    for m, r in enumerate(net.reactions):
        if r.is_parametric:
            raise ValueError("resolve parameter slots before dense assembly")
        nu = np.array(r.change)
        alpha = np.full(len(states), float(r.rate))
        for k in range(net.dim):
            alpha *= net.factor_values(m, k)[states[:, k]]
        target = states + nu
        inbox = np.all((target >= 0) & (target < np.array(n)), axis=1)
        src = np.nonzero(inbox & (alpha != 0))[0]
        dst = (target[src] * strides).sum(axis=1)
        rows.append(dst)
        cols.append(src)
        vals.append(alpha[src])
        rows.append(src)
        cols.append(src)
        vals.append(-alpha[src])
    if not rows:
        return sp.csr_matrix((len(states), len(states)))
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(states), len(states)))
    return mat.tocsr()


def dense_cme_matrix(net: ReactionNetwork) -> np.ndarray:
    if net.n_states > DENSE_STATE_LIMIT:
        raise ValueError(f"state space of {net.n_states} states exceeds the "
                         f"dense limit {DENSE_STATE_LIMIT}")
    return sparse_cme_matrix(net).toarray()


def dense_integrate(matrix, p0, t_end, steps: int = 1) -> np.ndarray:
    """Propagate dp/dt = A p to t_end through the exact matrix exponential
    action (internally step-controlled); conserves mass to 1e-10."""
    p = np.asarray(p0, dtype=float).ravel().copy()
    if t_end == 0:
        return p
    mass0 = p.sum()
    a = sp.csr_matrix(matrix)
    for _ in range(max(1, steps)):
        p = expm_multiply(a * (t_end / max(1, steps)), p)
        if not np.all(np.isfinite(p)):
            raise FloatingPointError("reference integration became unstable")
    drift = abs(p.sum() - mass0)
    if drift > 1e-10 * max(1.0, abs(mass0)):
        raise FloatingPointError(f"reference integration lost mass: {drift:.2e}")
    return p


def dense_integrate_path(matrix, p0, times) -> np.ndarray:
    """Solution snapshots at the given (sorted, >= 0) times."""
    out = []
    p = np.asarray(p0, dtype=float).ravel().copy()
    t_cur = 0.0
    a = sp.csr_matrix(matrix)
    for t in times:
        if t < t_cur:
            raise ValueError("times must be nondecreasing")
        if t > t_cur:
            p = expm_multiply(a * (t - t_cur), p)
            t_cur = t
        out.append(p.copy())
    return np.array(out)


def dense_forward_backward(matrix, obs_times, likelihoods, p0, t0=0.0):
    """Reference forward-backward smoother on the enumerated state space.

    `likelihoods` holds one observation-likelihood vector per observation
    time.  Returns (filtered, smoothed, log_evidence); row j of each array
    corresponds to observation time j.
    """
    a = sp.csr_matrix(matrix)
    at = a.T.tocsr()
    n_obs = len(obs_times)
    if n_obs != len(likelihoods):
        raise ValueError("one likelihood vector per observation time")
    p = np.asarray(p0, dtype=float).ravel().copy()
    p = p / p.sum()
    filtered = np.zeros((n_obs, p.size))
    log_evidence = 0.0
    t_cur = t0
    for j, (t, lik) in enumerate(zip(obs_times, likelihoods)):
        if t > t_cur:
            p = expm_multiply(a * (t - t_cur), p)
            t_cur = t
        p = p * lik
        z = p.sum()
        if z <= 0:
            raise FloatingPointError("degenerate observation in reference "
                                     "filter")
        log_evidence += np.log(z)
        p = p / z
        filtered[j] = p
    beta = np.ones(p.size)
    smoothed = np.zeros_like(filtered)
    smoothed[-1] = filtered[-1]
    for j in range(n_obs - 2, -1, -1):
        dt = obs_times[j + 1] - obs_times[j]
        b = beta * likelihoods[j + 1]
        beta = expm_multiply(at * dt, b)
        beta = beta / beta.sum()
        s = filtered[j] * beta
        smoothed[j] = s / s.sum()
    return filtered, smoothed, log_evidence


def dense_posterior(net: ReactionNetwork, theta_grid, obs_times, lik_fn, p0,
                    prior_fn):
    """Exhaustive posterior over a parameter grid by per-point filtering.

    `theta_grid` is a sequence of parameter dicts; `lik_fn(j)` returns the
    observation-likelihood vector for observation j; returns unnormalized
    log-posterior values and the normalized posterior (plain sum = 1).
    """
    logpost = np.empty(len(theta_grid))
    for r, theta in enumerate(theta_grid):
        mat = sparse_cme_matrix(net.with_rates(theta))
        liks = [lik_fn(j) for j in range(len(obs_times))]
        _, _, loglik = dense_forward_backward(mat, obs_times, liks, p0)
        logpost[r] = loglik + np.log(max(prior_fn(theta), 1e-300))
    shifted = np.exp(logpost - logpost.max())
    return logpost, shifted / shifted.sum()


def mh_sample(log_target, x0, n_samples, seed, step0=None, burn_in=None):
    """Gaussian random-walk Metropolis-Hastings with step adaptation.

    `log_target` maps a parameter vector to an (unnormalized) log density,
    -inf outside the support.  Adaptation targets ~30% acceptance during
    burn-in; the returned array excludes the burn-in.
    """
    rng = np.random.default_rng(seed)
    x = np.asarray(x0, dtype=float).copy()
    dim = x.size
    step = np.full(dim, 0.1) * np.maximum(np.abs(x), 1e-3) \
        if step0 is None else np.asarray(step0, dtype=float).copy()
    burn_in = n_samples // 4 if burn_in is None else burn_in
    lp = log_target(x)
    if not np.isfinite(lp):
        raise ValueError("x0 must have positive target density")
    out = np.empty((n_samples, dim))
    accepted = 0
    window = 0
    for i in range(n_samples + burn_in):
        prop = x + step * rng.standard_normal(dim)
        lp_new = log_target(prop)
        if np.log(rng.uniform()) < lp_new - lp:
            x, lp = prop, lp_new
            accepted += 1
        window += 1
        if i < burn_in and window == 50:
            rate = accepted / window
            step *= 1.3 if rate > 0.35 else (0.7 if rate < 0.2 else 1.0)
            accepted = 0
            window = 0
        if i >= burn_in:
            out[i - burn_in] = x
    return out
