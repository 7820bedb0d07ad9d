"""Bayesian state smoothing and parameter inference in the TT format.

The forward pass integrates the CME between observations and multiplies in
the rank-1 observation likelihood; the backward pass does the same with the
transposed generator in reversed time.  Smoothed marginals are the
normalized elementwise products of the two message streams.  Parameter
inference runs the forward filter on the joint state-parameter tensor,
expanding the parameter dependence in a B-spline basis and solving the
Galerkin-projected parameter-dependent CME between updates.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bspline import (
    BsplineBasis,
    QuadratureGrid,
    galerkin_stiffness,
    mass_operator,
    pdf_eval,
    pdf_moments,
)
from .network import ParameterSpace, ReactionNetwork
from .operator import build_cme_operator, build_parametric_operator
from .timestep import IntegrationConfig, TimeBasis, integrate, path_at_node
from .tt import (
    TtOperator,
    TtTensor,
    tt_hadamard,
    tt_kron,
    tt_marginal_sum,
    tt_ones,
    tt_rank1,
    tt_round,
    tt_scale,
    tt_sum,
    ttop_transpose,
)

log = logging.getLogger(__name__)

NOISE_KINDS = ("gaussian", "lognormal", "exact", "unobserved")


class DegenerateObservation(RuntimeError):
    """The observation likelihood vanished on the whole truncated box."""


class DegeneratePosterior(RuntimeError):
    """A posterior normalization constant came out nonpositive."""


@dataclass(frozen=True)
class ObservationModel:
    """Per-species noise specs: (kind, sigma) pairs, factorized over species."""

    species_models: tuple[tuple[str, float], ...]

    def __post_init__(self):
        specs = tuple((str(k), float(s)) for k, s in self.species_models)
        object.__setattr__(self, "species_models", specs)
        for kind, sigma in specs:
            if kind not in NOISE_KINDS:
                raise ValueError(f"unknown noise kind {kind!r}")
            if kind in ("gaussian", "lognormal") and sigma <= 0:
                raise ValueError(f"{kind} noise needs sigma > 0")

    @classmethod
    def gaussian(cls, dim: int, sigma: float) -> "ObservationModel":
        return cls(tuple(("gaussian", sigma) for _ in range(dim)))

    @classmethod
    def lognormal(cls, dim: int, sigma) -> "ObservationModel":
        sig = [sigma] * dim if np.isscalar(sigma) else list(sigma)
        return cls(tuple(("lognormal", s) for s in sig))

    @classmethod
    def exact(cls, dim: int) -> "ObservationModel":
        return cls(tuple(("exact", 0.0) for _ in range(dim)))

    def factor(self, k: int, y: float, n: int) -> np.ndarray:
        """Likelihood vector p(y | x_k = 0..n-1) for species k."""
        kind, sigma = self.species_models[k]
        x = np.arange(n, dtype=float)
        if kind == "unobserved" or (isinstance(y, float) and math.isnan(y)):
            return np.ones(n)
        if kind == "exact":
            v = np.zeros(n)
            j = int(round(y))
            if not 0 <= j < n:
                raise DegenerateObservation(
                    f"exact observation {y} outside the truncated range of "
                    f"species {k}")
            v[j] = 1.0
            return v
        if kind == "gaussian":
            return np.exp(-0.5 * ((y - x) / sigma) ** 2) \
                / (sigma * np.sqrt(2 * np.pi))
        # lognormal: y = x * exp(sigma Z); state 0 emits exactly 0
        v = np.zeros(n)
        if y <= 0:
            v[0] = 1.0
            return v
        pos = x > 0
        v[pos] = np.exp(-0.5 * ((np.log(y) - np.log(x[pos])) / sigma) ** 2) \
            / (y * sigma * np.sqrt(2 * np.pi))
        return v


@dataclass(frozen=True)
class ObservationSequence:
    """Strictly increasing times with one (possibly NaN-padded) row each."""

    times: np.ndarray
    values: np.ndarray
    model: ObservationModel

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if len(t) != len(v):
            raise ValueError("times and values disagree in length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("observation times must be strictly increasing")
        if not np.all(np.isfinite(t)):
            raise ValueError("observation times must be finite")
        for row, specs in zip(v.T, self.model.species_models):
            kind = specs[0]
            if kind != "unobserved" and np.any(np.isinf(row)):
                raise ValueError("observed values must be finite")
            if kind == "lognormal" and np.any(row[~np.isnan(row)] < 0):
                raise ValueError("lognormal-observed entries must be >= 0")

    def __len__(self) -> int:
        return len(self.times)


def observation_tensor(model: ObservationModel, y, truncation,
                       extra_modes=()) -> TtTensor:
    """Rank-1 likelihood tensor on the truncated box.

    `extra_modes` appends all-ones factors (parameter modes of the joint
    tensor, which the state observation does not touch).
    """
    factors = [model.factor(k, float(yk), n)
               for k, (yk, n) in enumerate(zip(y, truncation))]
    for f in factors:
        if not np.any(f > 0):
            raise DegenerateObservation(
                "observation likelihood vanished for every state in the box")
    factors.extend(np.ones(n) for n in extra_modes)
    return tt_rank1(factors)


@dataclass
class Messages:
    """Output of the smoothing passes at the observation times."""

    times: np.ndarray
    forward: list[TtTensor]
    backward: list[TtTensor]
    smoothed: list[TtTensor]
    log_normalizers: np.ndarray
    log_evidence: float
    forward_rank_pairs: list[tuple[tuple, tuple]] = field(default_factory=list)
    prediction: list[tuple[float, TtTensor]] = field(default_factory=list)


@dataclass
class SmoothingConfig:
    """Integrator settings for the passes between observations."""

    time_basis: TimeBasis
    integration: IntegrationConfig
    message_rounding: float = None  # defaults to solver residual target

    def __post_init__(self):
        if self.message_rounding is None:
            self.message_rounding = \
                self.integration.solver.relative_residual_target


def _propagate(op, p, t0, t1, cfg: SmoothingConfig, keep_paths=False):
    traj = integrate(op, p, (t0, t1), cfg.time_basis, cfg.integration,
                     keep_paths=keep_paths)
    if keep_paths:
        return traj[0][-1][1], traj
    return traj[-1][1]


def _normalize(t: TtTensor):
    z = tt_sum(t)
    if not z > 0:
        raise DegeneratePosterior(f"message normalization {z:.3e} <= 0")
    return tt_scale(t, 1.0 / z), z


def forward_pass(op: TtOperator, obs: ObservationSequence, p0: TtTensor,
                 cfg: SmoothingConfig, t0: float = 0.0,
                 obs_tensor_fn=None, keep_paths: bool = False):
    """Filtered messages at observation times.

    Returns (messages a^(j), log normalizers, paths) where a^(j) is the
    filtered state distribution after folding in observation j.
    """
    if obs_tensor_fn is None:
        def obs_tensor_fn(j):
            return observation_tensor(obs.model, obs.values[j],
                                      p0.mode_sizes)
    a, _ = _normalize(p0)
    out = []
    logz = []
    rank_pairs = []
    paths = []
    t_cur = t0
    for j, t in enumerate(obs.times):
        if t < t_cur - 1e-12:
            raise ValueError("observation before the current time")
        if t > t_cur + 1e-12:
            if keep_paths:
                a, seg = _propagate(op, a, t_cur, t, cfg, keep_paths=True)
                paths.append(seg)
            else:
                a = _propagate(op, a, t_cur, t, cfg)
            t_cur = t
        before = a.ranks
        a = tt_round(tt_hadamard(a, obs_tensor_fn(j)), cfg.message_rounding)
        rank_pairs.append((before, a.ranks))
        a, z = _normalize(a)
        logz.append(np.log(z))
        out.append(a)
    return out, np.array(logz), rank_pairs, paths


def backward_pass(op: TtOperator, obs: ObservationSequence, mode_sizes,
                  cfg: SmoothingConfig, obs_tensor_fn=None,
                  keep_paths: bool = False):
    """Backward likelihood messages b^(j) (terminal condition: all ones).

    b^(j) is proportional to p(y^(j+1..end) | state at t_j); each step is a
    solve with the transposed generator in reversed time, normalized for
    stability with the constants recorded.
    """
    if obs_tensor_fn is None:
        def obs_tensor_fn(j):
            return observation_tensor(obs.model, obs.values[j], mode_sizes)
    op_t = ttop_transpose(op)
    n_obs = len(obs)
    b = tt_ones(mode_sizes)
    out = [None] * n_obs
    out[-1] = b
    logz = np.zeros(n_obs)
    paths = []
    for j in range(n_obs - 2, -1, -1):
        dt = obs.times[j + 1] - obs.times[j]
        init = tt_round(tt_hadamard(out[j + 1], obs_tensor_fn(j + 1)),
                        cfg.message_rounding)
        init, z0 = _normalize(init)
        if keep_paths:
            b, seg = _propagate(op_t, init, 0.0, dt, cfg, keep_paths=True)
            paths.append(seg)
        else:
            b = _propagate(op_t, init, 0.0, dt, cfg)
        b, z1 = _normalize(b)
        logz[j] = np.log(z0) + np.log(z1)
        out[j] = b
    return out, logz, paths


def smooth(op: TtOperator, obs: ObservationSequence, p0: TtTensor,
           cfg: SmoothingConfig, t0: float = 0.0,
           prediction_nodes: int = 0) -> Messages:
    """Forward-backward smoothing; marginals at the observation times.

    With `prediction_nodes` > 0, smoothed states at interior Chebyshev nodes
    of every observation gap are also returned (forward and backward path
    tensors are combined node by node).
    """
    keep = prediction_nodes > 0
    fwd, logz, rank_pairs, fpaths = forward_pass(op, obs, p0, cfg, t0,
                                                 keep_paths=keep)
    bwd, logzb, bpaths = backward_pass(op, obs, p0.mode_sizes, cfg,
                                       keep_paths=keep)
    smoothed = []
    for a, b in zip(fwd, bwd):
        s = tt_round(tt_hadamard(a, b), cfg.message_rounding)
        s, _ = _normalize(s)
        smoothed.append(s)
    msgs = Messages(obs.times.copy(), fwd, bwd, smoothed, logz,
                    float(np.sum(logz)), rank_pairs)
    if keep:
        msgs.prediction = _prediction_nodes(obs, fpaths, bpaths, cfg,
                                            prediction_nodes, t0)
    return msgs


def _prediction_nodes(obs, fpaths, bpaths, cfg, n_nodes, t0):
    """Smoothed states between observations from stored path tensors."""
    out = []
    n_obs = len(obs.times)
    # fpaths[i] covers the gap ending at observation i (first gap may start
    # at t0); bpaths are stored from the last gap towards the first.
    for gap, fseg in enumerate(fpaths):
        t_start = t0 if gap == 0 and obs.times[0] > t0 else obs.times[gap - 1]
        # matching backward segment: bpaths index runs j = n-2 .. 0 where
        # bpaths[k] covers (t_j, t_{j+1}) with j = n_obs - 2 - k
        bk = n_obs - 1 - gap if gap >= 1 else None
        traj_f, steps_f = fseg
        if bk is None or bk >= len(bpaths):
            continue
        traj_b, steps_b = bpaths[bk]
        if len(steps_f) != len(steps_b):
            continue  # mismatched adaptive splits; skip interior nodes
        t_end = obs.times[gap]
        for sf, sb, (ts, _), (te, _) in zip(
                steps_f, steps_b[::-1], traj_f[:-1], traj_f[1:]):
            dt = te - ts
            basis = cfg.time_basis.with_dt(dt)
            for tau in _cheb_interior(dt, n_nodes):
                wf = basis.eval_weights(tau)
                wb = basis.eval_weights(dt - tau)
                a = path_at_node(sf.p_path, wf)
                b = path_at_node(sb.p_path, wb)
                s = tt_round(tt_hadamard(a, b), cfg.message_rounding)
                s, _ = _normalize(s)
                out.append((ts + tau, s))
    return out


def _cheb_interior(dt, n):
    j = np.arange(1, n + 1)
    return (1 - np.cos(np.pi * j / (n + 1))) / 2 * dt


def species_moments(t: TtTensor, k: int):
    """Mean and standard deviation of one state mode of a normalized PMF."""
    m = tt_marginal_sum(t, {k})
    vec = m.cores[0][0, :, 0]
    vec = vec / vec.sum()
    x = np.arange(len(vec))
    mean = float(x @ vec)
    var = float((x - mean) ** 2 @ vec)
    return mean, np.sqrt(max(var, 0.0))


def marginal_pmf(t: TtTensor, k: int) -> np.ndarray:
    m = tt_marginal_sum(t, {k})
    vec = m.cores[0][0, :, 0]
    return vec / vec.sum()


# ---------------------------------------------------------------------------
# joint state-parameter inference


@dataclass
class PosteriorGrid:
    """Parameter posterior as a coefficient tensor over the B-spline basis."""

    coefficients: TtTensor
    space: ParameterSpace
    bases: list[BsplineBasis] = None
    log_evidence: float = 0.0
    max_joint_bytes: int = 0
    resolution_warning: bool = False

    def __post_init__(self):
        if self.bases is None:
            self.bases = self.space.bases()

    def normalized(self) -> "PosteriorGrid":
        z, _, _ = pdf_moments(self.coefficients, self.bases)
        return PosteriorGrid(tt_scale(self.coefficients, 1.0 / z),
                             self.space, self.bases, self.log_evidence,
                             self.max_joint_bytes, self.resolution_warning)

    def density(self, theta) -> float:
        return pdf_eval(self.coefficients, self.bases, theta)

    def moments(self):
        return pdf_moments(self.coefficients, self.bases)


def project_prior(ps: ParameterSpace, prior_fns) -> TtTensor:
    """Independent priors projected per dimension onto the bases (rank 1).

    Small negative projection coefficients of peaked densities are clipped;
    the result is normalized to integrate to one.
    """
    bases = ps.bases()
    coeffs = []
    for basis, fn in zip(bases, prior_fns):
        c = basis.project(fn, clip_negative=True)
        w = basis.integrals(0)
        z = c @ w
        if z <= 0:
            raise DegeneratePosterior("prior projection integrates to <= 0")
        coeffs.append(c / z)
    return tt_rank1(coeffs)


def parametric_system(net: ReactionNetwork, ps: ParameterSpace):
    """Galerkin pieces of the parameter-dependent CME.

    Returns (stiffness K, mass E) over state + coefficient modes; solving
    E dp/dt = K p propagates the joint distribution's coefficients.
    """
    bases = ps.bases()
    grid = ps.grid()
    nodes = [q.nodes for q in grid.per_dim]
    a_bar = build_parametric_operator(net, ps, nodes)
    k_op = galerkin_stiffness(a_bar, bases, grid, net.dim)
    from .tt import ttop_identity, ttop_kron

    e_op = ttop_kron(ttop_identity(net.truncation), mass_operator(bases))
    return k_op, e_op


def infer_parameters(net: ReactionNetwork, ps: ParameterSpace,
                     obs: ObservationSequence, p0: TtTensor,
                     prior_fns, cfg: SmoothingConfig,
                     t0: float = 0.0) -> PosteriorGrid:
    """Joint filtering over states and parameters (single forward pass).

    The joint tensor starts as p0 (x) prior coefficients; every step solves
    the parameter-dependent CME, multiplies in the rank-1 observation
    tensor, and renormalizes with the basis integration weights.  After the
    last observation the state modes are summed out, leaving the posterior
    coefficients over the parameter box.
    """
    bases = ps.bases()
    k_op, e_op = parametric_system(net, ps)
    prior = project_prior(ps, prior_fns)
    joint = tt_kron(p0, prior)
    weights = [np.ones(n) for n in net.truncation] \
        + [b.integrals(0) for b in bases]

    def znorm(t: TtTensor) -> float:
        from .bspline import _contract

        return _contract(t, weights)

    z0 = znorm(joint)
    if z0 <= 0:
        raise DegeneratePosterior("initial joint density integrates to <= 0")
    joint = tt_scale(joint, 1.0 / z0)
    log_evidence = 0.0
    max_bytes = joint.storage_bytes
    t_cur = t0
    for j, t in enumerate(obs.times):
        if t > t_cur + 1e-12:
            traj = integrate(k_op, joint, (t_cur, t), cfg.time_basis,
                             cfg.integration, mass_op=e_op)
            joint = traj[-1][1]
            t_cur = t
        lik = observation_tensor(obs.model, obs.values[j], net.truncation,
                                 extra_modes=ps.basis_dims)
        joint = tt_round(tt_hadamard(joint, lik), cfg.message_rounding)
        z = znorm(joint)
        if z <= 0:
            raise DegeneratePosterior(
                f"normalization constant {z:.3e} <= 0 at observation {j}")
        joint = tt_scale(joint, 1.0 / z)
        log_evidence += np.log(z)
        max_bytes = max(max_bytes, joint.storage_bytes)
    post = tt_marginal_sum(joint, set(range(net.dim, net.dim + ps.dim)))
    grid = PosteriorGrid(post, ps, bases, log_evidence, max_bytes).normalized()
    grid.resolution_warning = _check_resolution(grid)
    if grid.resolution_warning:
        warnings.warn("posterior mass is concentrated below the basis "
                      "resolution; increase the basis dimension or shrink "
                      "the parameter bounds", RuntimeWarning)
    return grid


def _check_resolution(grid: PosteriorGrid) -> bool:
    _, _, var = grid.moments()
    for q, basis in enumerate(grid.bases):
        span = (basis.hi - basis.lo) / basis.spans
        if np.sqrt(max(var[q], 0.0)) < span:
            return True
    return False


@dataclass
class PosteriorReport:
    mean: np.ndarray
    variance: np.ndarray
    mode: np.ndarray
    marginals_1d: list[tuple[np.ndarray, np.ndarray]]
    marginals_2d: dict


def posterior_report(grid: PosteriorGrid, eval_points: int = 201,
                     pairs: bool = False) -> PosteriorReport:
    """Moments, argmax-node mode, and normalized marginal tables."""
    z, mean, var = grid.moments()
    coeffs = grid.coefficients
    bases = grid.bases
    dim = len(bases)
    w0 = [b.integrals(0) for b in bases]
    marginals = []
    mode = np.empty(dim)
    for q in range(dim):
        m = _basis_marginal(coeffs, w0, keep=(q,))
        vec = m.reshape(-1)
        xs = np.linspace(bases[q].lo, bases[q].hi, eval_points)
        dens = bases[q].eval(xs) @ vec
        total = np.trapezoid(dens, xs)
        if total <= 0:
            raise DegeneratePosterior("marginal integrates to <= 0")
        dens = dens / total
        marginals.append((xs, dens))
        mode[q] = xs[int(np.argmax(dens))]
    pairs_out = {}
    if pairs:
        for qa in range(dim):
            for qb in range(qa + 1, dim):
                m = _basis_marginal(coeffs, w0, keep=(qa, qb))
                xa = np.linspace(bases[qa].lo, bases[qa].hi, 61)
                xb = np.linspace(bases[qb].lo, bases[qb].hi, 61)
                dens = bases[qa].eval(xa) @ m @ bases[qb].eval(xb).T
                pairs_out[(qa, qb)] = (xa, xb, dens)
    return PosteriorReport(mean, var, mode, marginals, pairs_out)


def _basis_marginal(coeffs: TtTensor, w0, keep):
    """Integrate out all coefficient modes not in `keep`."""
    v = np.ones((1, 1))  # (flattened kept dims, right-rank)
    for q, c in enumerate(coeffs.cores):
        if q in keep:
            t = np.tensordot(v, c, axes=(1, 0))  # (cols, n, r2)
            v = t.reshape(-1, c.shape[2])
        else:
            m = np.tensordot(c, np.asarray(w0[q]), axes=(1, 0))  # (r1, r2)
            v = v @ m
    return v.reshape([coeffs.mode_sizes[q] for q in sorted(keep)])


def filtered_state_marginals(net, ps, obs, p0, prior_fns, cfg):
    """State marginals of the joint filter (diagnostic helper)."""
    bases = ps.bases()
    k_op, e_op = parametric_system(net, ps)
    prior = project_prior(ps, prior_fns)
    joint = tt_kron(p0, prior)
    weights = [np.ones(n) for n in net.truncation] \
        + [b.integrals(0) for b in bases]
    from .bspline import _contract

    joint = tt_scale(joint, 1.0 / _contract(joint, weights))
    out = []
    t_cur = 0.0
    for j, t in enumerate(obs.times):
        if t > t_cur + 1e-12:
            traj = integrate(k_op, joint, (t_cur, t), cfg.time_basis,
                             cfg.integration, mass_op=e_op)
            joint = traj[-1][1]
            t_cur = t
        lik = observation_tensor(obs.model, obs.values[j], net.truncation,
                                 extra_modes=ps.basis_dims)
        joint = tt_round(tt_hadamard(joint, lik), cfg.message_rounding)
        joint = tt_scale(joint, 1.0 / _contract(joint, weights))
        state = joint
        for q in range(ps.dim):
            # contract the trailing coefficient modes with their weights
            state = tt_marginal_sum_weighted(state, net.dim + ps.dim - 1 - q,
                                             weights[net.dim + ps.dim - 1 - q])
        out.append(state)
    return out


def tt_marginal_sum_weighted(t: TtTensor, mode: int, w) -> TtTensor:
    """Contract one mode with a weight vector (weighted marginalization)."""
    cores = list(t.cores)
    m = np.tensordot(cores[mode], np.asarray(w), axes=(1, 0))  # (r1, r2)
    if mode > 0:
        cores[mode - 1] = np.tensordot(cores[mode - 1], m, axes=(2, 0))
    else:
        cores[mode + 1] = np.tensordot(m, cores[mode + 1], axes=(1, 0))
    del cores[mode]
    return TtTensor(cores)
