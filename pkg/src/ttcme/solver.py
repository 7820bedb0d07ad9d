"""Multilinear system solvers in the TT format.

`als_solve` minimizes the residual norm over one core at a time with the
ranks fixed by the initial guess.  `amen_solve` optimizes merged two-core
supercores, re-splitting them by SVD so the ranks adapt, and enriches the
split basis with directions taken from the local residual.
"""

from __future__ import annotations

import time as _time
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .tt import (
    RoundingAccuracy,
    TtOperator,
    TtTensor,
    _rank_from_tail,
    tt_add,
    tt_norm,
    tt_round,
    tt_scale,
    tt_zeros,
    ttop_apply,
    ttop_compose,
    ttop_norm,
    ttop_transpose,
)


@dataclass
class SolverConfig:
    """Controls for the TT linear solvers."""

    relative_residual_target: float = 1e-8
    max_sweeps: int = 30
    max_rank: int = 300
    enrichment_rank: int = 4
    local_solver: str = "auto"  # direct | iterative | auto
    local_direct_limit: int = 1024
    local_maxiter: int = 600
    residual_budget: float = 4e9  # flop cap for exact TT residual evaluation
    max_rank_growth: int = 8      # per-bond rank growth allowed per visit
    refine: bool = True
    seed: int = 0
    verbose: bool = False

    def __post_init__(self):
        if not 0 < self.relative_residual_target < 1:
            raise ValueError("relative_residual_target must be in (0, 1)")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.local_solver not in ("auto", "direct", "iterative"):
            raise ValueError(f"unknown local_solver {self.local_solver!r}")


@dataclass
class SolveReport:
    achieved_relative_residual: float
    sweeps_used: int
    final_ranks: tuple
    converged: bool = True
    residual_measure: str = "exact"  # "exact" or "projected"
    regularized: bool = False
    local_iterations: int = 0


class SolverFailure(RuntimeError):
    """Raised when validation of solver inputs fails (shape errors etc.)."""


# ---------------------------------------------------------------------------
# frame contractions


def _phi_left_op(phi, xc_bra, ac, xc_ket):
    """Advance an (rx, rA, rx) frame past one (bra, operator, ket) triple."""
    t = np.tensordot(phi, xc_bra, axes=(0, 0))           # (al, c, i, a')
    t = np.tensordot(t, ac, axes=([0, 2], [0, 1]))       # (c, a', j, be)
    return np.tensordot(t, xc_ket, axes=([0, 2], [0, 1]))  # (a', be, c')


def _phi_right_op(phi, xc_bra, ac, xc_ket):
    t = np.tensordot(xc_bra, phi, axes=(2, 0))           # (a, i, be, c')
    t = np.tensordot(ac, t, axes=([1, 3], [1, 2]))       # (al, j, a, c')
    t = np.tensordot(xc_ket, t, axes=([1, 2], [1, 3]))   # (c, al, a)
    return t.transpose(2, 1, 0)


def _local_matvec_1(phi_l, ac, phi_r, u):
    """One-core local operator application."""
    t = np.tensordot(phi_l, u, axes=(2, 0))              # (a, alpha, j, c')
    t = np.tensordot(t, ac, axes=([1, 2], [0, 2]))       # (a, c', i, beta)
    t = np.tensordot(t, phi_r, axes=([1, 3], [2, 1]))    # (a, i, c)
    return t


def _local_matvec_2(phi_l, a1, a2, phi_r, u):
    """Two-core (supercore) local operator application."""
    t = np.tensordot(phi_l, u, axes=(2, 0))              # (a, al, j1, j2, c')
    t = np.tensordot(t, a1, axes=([1, 2], [0, 2]))       # (a, j2, c', i1, k)
    t = np.tensordot(t, a2, axes=([4, 1], [0, 2]))       # (a, c', i1, i2, be)
    t = np.tensordot(t, phi_r, axes=([1, 4], [2, 1]))    # (a, i1, i2, c)
    return t


def _local_rhs(phib_l, b_cores, phib_r):
    t = phib_l                                           # (a, gamma)
    for bc in b_cores:
        t = np.tensordot(t, bc, axes=(t.ndim - 1, 0))    # (a, ..., i, gamma')
    return np.tensordot(t, phib_r, axes=(t.ndim - 1, 1))  # (a, i.., c)


def _local_dense_1(phi_l, ac, phi_r):
    t = np.tensordot(phi_l, ac, axes=(1, 0))             # (a, a', i, j, beta)
    t = np.tensordot(t, phi_r, axes=(4, 1))              # (a, a', i, j, c, c')
    t = t.transpose(0, 2, 4, 1, 3, 5)
    n = t.shape[0] * t.shape[1] * t.shape[2]
    return t.reshape(n, -1)


def _local_dense_2(phi_l, a1, a2, phi_r):
    t = np.tensordot(phi_l, a1, axes=(1, 0))             # (a, a', i1, j1, k)
    t = np.tensordot(t, a2, axes=(4, 0))                 # (a,a',i1,j1,i2,j2,b)
    t = np.tensordot(t, phi_r, axes=(6, 1))              # (...,c,c')
    t = t.transpose(0, 2, 4, 6, 1, 3, 5, 7)
    n = t.shape[0] * t.shape[1] * t.shape[2] * t.shape[3]
    return t.reshape(n, -1)


# ---------------------------------------------------------------------------
# orthogonalization moves


def _qr_core_left(core):
    """Left-orthogonalize: core -> Q (columns orthonormal), carry R right."""
    r1, n, r2 = core.shape
    q, r = np.linalg.qr(core.reshape(r1 * n, r2))
    return q.reshape(r1, n, -1), r


def _qr_core_right(core):
    r1, n, r2 = core.shape
    q, r = np.linalg.qr(core.reshape(r1, n * r2).T)
    return q.T.reshape(-1, n, r2), r.T


# ---------------------------------------------------------------------------
# residual evaluation


def _exact_residual_cost(a: TtOperator, x: TtTensor, b: TtTensor) -> float:
    ra, rx, rb = a.ranks, x.ranks, b.ranks
    bond = [ra[k] * rx[k] + rb[k] for k in range(len(rx))]
    cost = 0.0
    for k, n in enumerate(x.mode_sizes):
        cost += n * bond[k] ** 2 * bond[k + 1]
    return cost


def relative_residual(a: TtOperator, x: TtTensor, b: TtTensor,
                      bnorm: float | None = None) -> float:
    """Exact relative residual ||Ax - b|| / ||b|| in TT arithmetic."""
    if bnorm is None:
        bnorm = tt_norm(b)
    if bnorm == 0.0:
        return tt_norm(ttop_apply(a, x))
    r = tt_add(ttop_apply(a, x), tt_scale(b, -1.0))
    return tt_norm(r) / bnorm


# ---------------------------------------------------------------------------
# local solve


def _solve_local(mat_or_op, rhs, u0, cfg: SolverConfig, tol_abs):
    """Solve a local system; returns (solution, iterations, regularized)."""
    n = rhs.size
    if isinstance(mat_or_op, np.ndarray):
        mat = mat_or_op
        try:
            lu, piv = scipy.linalg.lu_factor(mat, check_finite=False)
            sol = scipy.linalg.lu_solve((lu, piv), rhs.ravel(),
                                        check_finite=False)
            if not np.all(np.isfinite(sol)):
                raise np.linalg.LinAlgError
            return sol, 1, False
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError,
                ValueError):
            shift = 1e-14 * max(abs(np.trace(mat)) / n, 1.0)
            sol = scipy.linalg.solve(mat + shift * np.eye(n), rhs.ravel())
            return sol, 1, True
    # iterative path: BiCGStab first, restarted GMRES as the fallback
    it_count = [0]

    def _cb(_):
        it_count[0] += 1

    rhs_norm = np.linalg.norm(rhs)
    rtol = max(tol_abs / rhs_norm, 1e-14) if rhs_norm > 0 else 1e-14
    sol, info = spla.bicgstab(mat_or_op, rhs.ravel(), x0=u0.ravel(),
                              rtol=rtol, atol=0.0,
                              maxiter=cfg.local_maxiter, callback=_cb)
    good = info == 0 and np.all(np.isfinite(sol))
    if not good:
        x1 = sol if np.all(np.isfinite(sol)) and np.linalg.norm(
            mat_or_op.matvec(sol) - rhs.ravel()) < np.linalg.norm(
            mat_or_op.matvec(u0.ravel()) - rhs.ravel()) else u0.ravel()
        # full GMRES for small systems (convergence in <= n steps);
        # restarted above that
        restart = n if n <= 800 else 100
        sol, info = spla.gmres(mat_or_op, x0=x1, b=rhs.ravel(),
                               rtol=rtol, atol=0.0, restart=restart,
                               maxiter=max(3, cfg.local_maxiter // restart),
                               callback=_cb, callback_type="pr_norm")
    return sol, it_count[0], False


# ---------------------------------------------------------------------------
# AMEn


def amen_solve(a: TtOperator, b: TtTensor, x0: TtTensor,
               cfg: SolverConfig | None = None):
    """Solve A x = b by rank-adaptive two-core sweeps.

    Returns ``(x, report)``; on non-convergence the best iterate is returned
    with ``report.converged = False`` rather than raising.
    """
    cfg = cfg or SolverConfig()
    _check_system(a, b, x0)
    bnorm = tt_norm(b)
    if bnorm == 0.0:
        z = tt_zeros(b.mode_sizes)
        return z, SolveReport(0.0, 0, z.ranks)
    if x0.ndim == 1:
        return _solve_trivial_1d(a, b)

    rng = np.random.default_rng(cfg.seed)
    state = _AmenState(a, b, x0, cfg, bnorm, rng)
    # below this target, sweeping further is slower than outer refinement
    refine_floor = 1e-6
    sweep_target = cfg.relative_residual_target
    if cfg.refine and sweep_target < refine_floor and state.exact_affordable():
        sweep_target = refine_floor
    base_tol = sweep_target
    prev_res = np.inf
    res = np.inf
    sweeps = 0
    for sweep in range(cfg.max_sweeps):
        t0 = _time.time() if cfg.verbose else 0.0
        # truncate relative to the current accuracy: keeping singular values
        # far below the residual only inflates the local systems
        if np.isfinite(prev_res):
            split_tol = min(max(base_tol, 0.03 * prev_res), 1e-2)
        else:
            split_tol = max(base_tol, 1e-4)
        state.full_sweep(split_tol, sweep_target)
        sweeps = sweep + 1
        res = state.residual()
        if cfg.verbose:
            print(f"  sweep {sweeps}: res {res:.3e} ({state.residual_measure})"
                  f" ranks {state.tensor().ranks}"
                  f" iters {state.local_iterations} split {split_tol:.1e} "
                  f"{_time.time() - t0:.2f}s", flush=True)
        if res <= sweep_target:
            break
        if res > 0.3 * prev_res and split_tol <= base_tol:
            # stagnation at the truncation floor: tighten further
            base_tol = max(base_tol * 0.03, 1e-16)
        prev_res = res
    x = state.tensor()

    if res > cfg.relative_residual_target and cfg.refine \
            and state.exact_affordable():
        x, res, extra = _refine(a, b, x, cfg, bnorm)
        sweeps += extra
    converged = res <= cfg.relative_residual_target
    report = SolveReport(
        achieved_relative_residual=res,
        sweeps_used=sweeps,
        final_ranks=x.ranks,
        converged=converged,
        residual_measure=state.residual_measure,
        regularized=state.regularized,
        local_iterations=state.local_iterations,
    )
    return x, report


def _refine(a, b, x, cfg, bnorm, rounds: int = 10):
    """Iterative refinement: solve for TT corrections until the target holds."""
    res = relative_residual(a, x, b, bnorm)
    used = 0
    anorm = max(_op_norm_estimate(a, cfg.seed), 1e-300)
    for _ in range(rounds):
        if res <= cfg.relative_residual_target:
            break
        r = tt_add(b, tt_scale(ttop_apply(a, x), -1.0))
        r = tt_round(r, 1e-3)
        rnorm = tt_norm(r)
        if rnorm == 0.0:
            break
        inner = SolverConfig(
            relative_residual_target=max(
                1e-2, cfg.relative_residual_target * bnorm / rnorm * 0.1),
            max_sweeps=6, max_rank=cfg.max_rank,
            enrichment_rank=cfg.enrichment_rank,
            local_solver=cfg.local_solver,
            local_direct_limit=cfg.local_direct_limit,
            local_maxiter=cfg.local_maxiter, refine=False, seed=cfg.seed + 1)
        if inner.relative_residual_target >= 1:
            break
        d0 = tt_round(r, RoundingAccuracy(0.5, 4))
        delta, _ = amen_solve(a, r, d0, inner)
        xn = tt_add(x, delta)
        # keep the truncation loss a bit below the expected next residual
        xnorm = tt_norm(xn)
        expect = max(0.05 * res, cfg.relative_residual_target)
        tol = 0.1 * expect * bnorm / (anorm * xnorm)
        xn = tt_round(xn, max(tol, 1e-16))
        new_res = relative_residual(a, xn, b, bnorm)
        used += 1
        if new_res >= res:
            break
        x, res = xn, new_res
    return x, res, used


def _op_norm_estimate(a: TtOperator, seed: int, iters: int = 4) -> float:
    """Spectral norm estimate of a TT operator by rank-capped power steps."""
    rng = np.random.default_rng(seed)
    from .tt import tt_random

    ranks = [1] + [3] * (a.ndim - 1) + [1]
    v = tt_random(a.col_sizes, ranks, rng)
    v = tt_scale(v, 1.0 / max(tt_norm(v), 1e-300))
    at = ttop_transpose(a)
    est = 0.0
    for _ in range(iters):
        w = tt_round(ttop_apply(a, v), RoundingAccuracy(1e-6, 10))
        w = tt_round(ttop_apply(at, w), RoundingAccuracy(1e-6, 10))
        nrm = tt_norm(w)
        if nrm == 0.0:
            break
        est = np.sqrt(nrm)
        v = tt_scale(w, 1.0 / nrm)
    return est


def _op_fro_norm(a: TtOperator) -> float:
    return ttop_norm(a)


def _solve_trivial_1d(a: TtOperator, b: TtTensor):
    mat = a.cores[0][0, :, :, 0]
    rhs = b.cores[0][0, :, 0]
    sol, _, reg = _solve_local(mat, rhs, rhs, SolverConfig(), 0.0)
    x = TtTensor([sol.reshape(1, -1, 1)])
    res = np.linalg.norm(mat @ sol - rhs) / max(np.linalg.norm(rhs), 1e-300)
    return x, SolveReport(res, 1, x.ranks, res < 1, "exact", reg)


def _check_system(a: TtOperator, b: TtTensor, x0: TtTensor):
    if a.row_sizes != b.mode_sizes:
        raise SolverFailure(f"operator rows {a.row_sizes} != rhs modes "
                            f"{b.mode_sizes}")
    if a.col_sizes != x0.mode_sizes:
        raise SolverFailure(f"operator cols {a.col_sizes} != guess modes "
                            f"{x0.mode_sizes}")


class _AmenState:
    """Sweep state: solution cores plus left/right frames for A and b."""

    def __init__(self, a, b, x0, cfg, bnorm, rng):
        self.a = a
        self.b = b
        self.cfg = cfg
        self.bnorm = bnorm
        self.rng = rng
        self.d = x0.ndim
        cores = [c.copy() for c in x0.cores]
        for k in range(self.d - 1, 0, -1):  # right-orthogonalize
            q, r = _qr_core_right(cores[k])
            cores[k] = q
            cores[k - 1] = np.tensordot(cores[k - 1], r, axes=(2, 0))
        self.cores = cores
        ey = np.ones((1, 1, 1))
        ev = np.ones((1, 1))
        self.phiA = [ey] + [None] * (self.d - 1) + [ey]
        self.phib = [ev] + [None] * (self.d - 1) + [ev]
        for k in range(self.d - 1, 0, -1):
            self._push_right(k)
        self.max_local_res = 0.0
        self.regularized = False
        self.local_iterations = 0

    # frame updates -------------------------------------------------------
    def _push_left(self, k):
        self.phiA[k + 1] = _phi_left_op(self.phiA[k], self.cores[k],
                                        self.a.cores[k], self.cores[k])
        t = np.tensordot(self.phib[k], self.cores[k], axes=(0, 0))
        self.phib[k + 1] = np.tensordot(t, self.b.cores[k],
                                        axes=([0, 1], [0, 1]))

    def _push_right(self, k):
        self.phiA[k] = _phi_right_op(self.phiA[k + 1], self.cores[k],
                                     self.a.cores[k], self.cores[k])
        t = np.tensordot(self.cores[k], self.phib[k + 1], axes=(2, 0))
        self.phib[k] = np.tensordot(t, self.b.cores[k],
                                    axes=([1, 2], [1, 2]))

    # local solves ---------------------------------------------------------
    def _solve_supercore(self, k, split_tol, target, to_right):
        cfg = self.cfg
        a1, a2 = self.a.cores[k], self.a.cores[k + 1]
        phi_l, phi_r = self.phiA[k], self.phiA[k + 2]
        u0 = np.tensordot(self.cores[k], self.cores[k + 1], axes=(2, 0))
        shape = u0.shape
        rhs = _local_rhs(self.phib[k],
                         (self.b.cores[k], self.b.cores[k + 1]),
                         self.phib[k + 2])
        n_loc = rhs.size
        res_before = np.linalg.norm(
            _local_matvec_2(phi_l, a1, a2, phi_r, u0) - rhs)
        self.max_local_res = max(self.max_local_res, res_before / self.bnorm)

        use_direct = (cfg.local_solver == "direct"
                      or (cfg.local_solver == "auto"
                          and n_loc <= cfg.local_direct_limit))
        tol_final = 0.05 * target * self.bnorm
        # inexact sweeps: early local solves only need to beat the current
        # local residual by a good margin, not hit the final target
        tol_abs = max(tol_final, 0.03 * res_before)
        if res_before <= 0.5 * tol_final:
            u = u0  # already at target here; keep and just re-split
            r_loc = _local_matvec_2(phi_l, a1, a2, phi_r, u) - rhs
            self._split(k, u, r_loc, split_tol, to_right)
            return
        if use_direct:
            mat = _local_dense_2(phi_l, a1, a2, phi_r)
            sol, its, reg = _solve_local(mat, rhs, u0, cfg, tol_abs)
        else:
            op = spla.LinearOperator(
                (n_loc, n_loc),
                matvec=lambda v: _local_matvec_2(
                    phi_l, a1, a2, phi_r, v.reshape(shape)).ravel())
            sol, its, reg = _solve_local(op, rhs, u0, cfg, tol_abs)
        self.local_iterations += its
        self.regularized |= reg
        u = sol.reshape(shape)

        r_loc = _local_matvec_2(phi_l, a1, a2, phi_r, u) - rhs
        if np.linalg.norm(r_loc) > res_before:
            u = u0  # failed local solve must not damage the iterate
            r_loc = _local_matvec_2(phi_l, a1, a2, phi_r, u) - rhs
        self._split(k, u, r_loc, split_tol, to_right)

    def _split(self, k, u, r_loc, split_tol, to_right):
        cfg = self.cfg
        ra, n1, n2, rc = u.shape
        mat = u.reshape(ra * n1, n2 * rc)
        uu, ss, vv = np.linalg.svd(mat, full_matrices=False)
        delta = split_tol * np.linalg.norm(ss)
        # capping the growth per visit keeps early sweeps from keeping the
        # noise ranks of a far-from-converged iterate
        r_old = self.cores[k].shape[2]
        r = min(_rank_from_tail(ss, delta), cfg.max_rank,
                r_old + cfg.max_rank_growth)
        k_en = min(cfg.enrichment_rank, cfg.max_rank - r,
                   mat.shape[0] - r, mat.shape[1] - r)
        if to_right:
            basis = uu[:, :r]
            if k_en > 0:
                z = _dominant_range(r_loc.reshape(ra * n1, n2 * rc),
                                    k_en, self.rng)
                basis, _ = np.linalg.qr(np.hstack([basis, z]))
            coef = basis.T @ mat
            self.cores[k] = basis.reshape(ra, n1, -1)
            self.cores[k + 1] = coef.reshape(-1, n2, rc)
            self._push_left(k)
        else:
            basis = vv[:r].T
            if k_en > 0:
                z = _dominant_range(r_loc.reshape(ra * n1, n2 * rc).T,
                                    k_en, self.rng)
                basis, _ = np.linalg.qr(np.hstack([basis, z]))
            coef = mat @ basis
            self.cores[k + 1] = basis.T.reshape(-1, n2, rc)
            self.cores[k] = coef.reshape(ra, n1, -1)
            self._push_right(k + 1)

    def full_sweep(self, split_tol, target):
        self.max_local_res = 0.0
        for k in range(self.d - 1):
            self._solve_supercore(k, split_tol, target, to_right=True)
        for k in range(self.d - 2, -1, -1):
            self._solve_supercore(k, split_tol, target, to_right=False)

    # bookkeeping ----------------------------------------------------------
    def tensor(self) -> TtTensor:
        return TtTensor([c.copy() for c in self.cores])

    def exact_affordable(self) -> bool:
        return _exact_residual_cost(self.a, self.tensor(), self.b) \
            <= self.cfg.residual_budget

    def residual(self) -> float:
        if self.exact_affordable():
            self.residual_measure = "exact"
            return relative_residual(self.a, self.tensor(), self.b,
                                     self.bnorm)
        self.residual_measure = "projected"
        return self.max_local_res

    residual_measure = "exact"


def _dominant_range(z: np.ndarray, k: int, rng) -> np.ndarray:
    """Approximate dominant left singular directions of z (seeded sketch)."""
    k = min(k, min(z.shape))
    if k <= 0 or not np.any(z):
        return np.zeros((z.shape[0], 0))
    omega = rng.standard_normal((z.shape[1], k))
    y = z @ omega
    y = z @ (z.T @ y)  # one power iteration
    q, _ = np.linalg.qr(y)
    return q[:, :k]


# ---------------------------------------------------------------------------
# ALS (fixed ranks, residual-minimizing via the normal equations)


def als_solve(a: TtOperator, b: TtTensor, x0: TtTensor,
              cfg: SolverConfig | None = None, track_residual=None):
    """Fixed-rank alternating solve of min ||A x - b||_F.

    Each core update solves the projected normal equations, so the global
    residual is non-increasing per local update.  `track_residual`, when
    given, is called with the relative residual after every half-sweep.
    """
    cfg = cfg or SolverConfig()
    _check_system(a, b, x0)
    bnorm = tt_norm(b)
    if bnorm == 0.0:
        z = tt_zeros(b.mode_sizes)
        return z, SolveReport(0.0, 0, z.ranks)
    if x0.ndim == 1:
        return _solve_trivial_1d(a, b)

    g = ttop_compose(ttop_transpose(a), a)  # SPD normal operator
    c = ttop_apply(ttop_transpose(a), b)
    d = x0.ndim
    cores = [cc.copy() for cc in x0.cores]
    for k in range(d - 1, 0, -1):
        q, r = _qr_core_right(cores[k])
        cores[k] = q
        cores[k - 1] = np.tensordot(cores[k - 1], r, axes=(2, 0))

    ey = np.ones((1, 1, 1))
    ev = np.ones((1, 1))
    phiG = [ey] + [None] * (d - 1) + [ey]
    phic = [ev] + [None] * (d - 1) + [ev]
    for k in range(d - 1, 0, -1):
        phiG[k] = _phi_right_op(phiG[k + 1], cores[k], g.cores[k], cores[k])
        t = np.tensordot(cores[k], phic[k + 1], axes=(2, 0))
        phic[k] = np.tensordot(t, c.cores[k], axes=([1, 2], [1, 2]))

    regularized = False
    total_iters = 0

    def _update(k):
        nonlocal regularized, total_iters
        phi_l, phi_r = phiG[k], phiG[k + 1]
        rhs = _local_rhs(phic[k], (c.cores[k],), phic[k + 1])
        n_loc = rhs.size
        u0 = cores[k]
        use_direct = (cfg.local_solver == "direct"
                      or (cfg.local_solver == "auto"
                          and n_loc <= cfg.local_direct_limit))
        if use_direct:
            mat = _local_dense_1(phi_l, g.cores[k], phi_r)
            sol, its, reg = _solve_local(mat, rhs, u0, cfg, 0.0)
        else:
            op = spla.LinearOperator(
                (n_loc, n_loc),
                matvec=lambda v: _local_matvec_1(
                    phi_l, g.cores[k], phi_r, v.reshape(u0.shape)).ravel())
            tol_abs = 0.05 * cfg.relative_residual_target \
                * np.linalg.norm(rhs)
            sol, its, reg = _solve_local(op, rhs, u0, cfg, tol_abs)
        regularized |= reg
        total_iters += its
        cores[k] = sol.reshape(u0.shape)

    def _current():
        return TtTensor([cc.copy() for cc in cores])

    res = np.inf
    sweeps = 0
    for sweep in range(cfg.max_sweeps):
        for k in range(d):  # left-to-right half-sweep
            _update(k)
            if k < d - 1:
                q, r = _qr_core_left(cores[k])
                cores[k] = q
                cores[k + 1] = np.tensordot(r, cores[k + 1], axes=(1, 0))
                phiG[k + 1] = _phi_left_op(phiG[k], cores[k], g.cores[k],
                                           cores[k])
                t = np.tensordot(phic[k], cores[k], axes=(0, 0))
                phic[k + 1] = np.tensordot(t, c.cores[k],
                                           axes=([0, 1], [0, 1]))
        if track_residual is not None:
            track_residual(relative_residual(a, _current(), b, bnorm))
        for k in range(d - 1, -1, -1):  # right-to-left half-sweep
            _update(k)
            if k > 0:
                q, r = _qr_core_right(cores[k])
                cores[k] = q
                cores[k - 1] = np.tensordot(cores[k - 1], r, axes=(2, 0))
                phiG[k] = _phi_right_op(phiG[k + 1], cores[k], g.cores[k],
                                        cores[k])
                t = np.tensordot(cores[k], phic[k + 1], axes=(2, 0))
                phic[k] = np.tensordot(t, c.cores[k], axes=([1, 2], [1, 2]))
        sweeps = sweep + 1
        res = relative_residual(a, _current(), b, bnorm)
        if track_residual is not None:
            track_residual(res)
        if res <= cfg.relative_residual_target:
            break
    x = _current()
    report = SolveReport(
        achieved_relative_residual=res,
        sweeps_used=sweeps,
        final_ranks=x.ranks,
        converged=res <= cfg.relative_residual_target,
        residual_measure="exact",
        regularized=regularized,
        local_iterations=total_iters,
    )
    if not report.converged:
        warnings.warn(f"als_solve: residual {res:.2e} above target "
                      f"{cfg.relative_residual_target:.2e} after {sweeps} sweeps")
    return x, report
