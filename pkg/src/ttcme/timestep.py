"""Space-time propagation of dp/dt = A p in the TT format.

Time is appended as an extra tensor mode holding nodal values on a
subinterval [0, dt]; a single multilinear solve then yields the whole
subinterval.  The node set always contains both endpoints and the first
collocation row is replaced by the initial condition, so every scheme shares
the assembly

    M = E (x) (S+V)  -  K (x) P,      f = (E p0) (x) v,

where E/K default to the identity and the generator (they carry the
parameter-space mass and stiffness operators in the parameter-dependent
case), S+V is the time collocation matrix with the boundary row, P masks it
out, and v embeds the initial condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .solver import SolverConfig, SolveReport, amen_solve
from .tt import (
    TtOperator,
    TtTensor,
    qtt_mode_split,
    qtt_reshape,
    qtt_reshape_op,
    qtt_unreshape,
    tt_kron,
    tt_norm,
    tt_ones,
    tt_round,
    tt_scale,
    tt_sum,
    tt_to_dense,
    ttop_add,
    ttop_apply,
    ttop_identity,
    ttop_kron,
    ttop_rank1,
    ttop_scale,
)

SCHEMES = ("chebyshev", "implicit_euler", "crank_nicolson")


def _cgl_nodes(T: int) -> np.ndarray:
    """Chebyshev-Gauss-Lobatto nodes on [0, 1], ascending."""
    j = np.arange(T)
    return (1.0 - np.cos(np.pi * j / (T - 1))) / 2.0


def _diff_matrix(nodes: np.ndarray) -> np.ndarray:
    """Polynomial collocation differentiation matrix on arbitrary nodes."""
    T = len(nodes)
    c = np.ones(T)
    for j in range(T):
        c[j] = np.prod(nodes[j] - np.delete(nodes, j))
    d = np.zeros((T, T))
    for i in range(T):
        for j in range(T):
            if i != j:
                d[i, j] = (c[i] / c[j]) / (nodes[i] - nodes[j])
    d -= np.diag(d.sum(axis=1))
    return d


def _barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    w = np.ones(len(nodes))
    for j in range(len(nodes)):
        w[j] = 1.0 / np.prod(nodes[j] - np.delete(nodes, j))
    return w


@dataclass(frozen=True)
class TimeBasis:
    """Nodal time discretization of one subinterval [0, dt].

    `sv` is the collocation matrix with the t=0 boundary row folded in,
    `mass` masks the generator out of the boundary row, `v` embeds the
    initial condition, and `e_end` evaluates at t=dt.  `int_mass` and
    `int_v` are the same data premultiplied by sv^-1; assembling with them
    yields the equivalent integral-form system I - A (x) int_mass, whose
    conditioning does not degrade with stiffness.
    """

    kind: str
    dimension: int
    dt: float
    nodes: np.ndarray = field(repr=False)
    sv: np.ndarray = field(repr=False)
    mass: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    e_end: np.ndarray = field(repr=False)
    int_mass: np.ndarray = field(repr=False, default=None)
    int_v: np.ndarray = field(repr=False, default=None)

    def with_dt(self, dt: float) -> "TimeBasis":
        return time_basis(self.kind, self.dimension, dt)

    def refined(self, factor: int = 2) -> "TimeBasis":
        return time_basis(self.kind, factor * self.dimension, self.dt)

    def eval_weights(self, t: float) -> np.ndarray:
        """Interpolation weights at time t in [0, dt]."""
        if not 0 <= t <= self.dt * (1 + 1e-12):
            raise ValueError(f"t={t} outside [0, {self.dt}]")
        if self.kind == "chebyshev":
            w = _barycentric_weights(self.nodes)
            diff = t - self.nodes
            hit = np.argmin(np.abs(diff))
            if abs(diff[hit]) < 1e-14 * max(self.dt, 1.0):
                out = np.zeros(self.dimension)
                out[hit] = 1.0
                return out
            terms = w / diff
            return terms / terms.sum()
        # finite-difference nodes: piecewise-linear interpolation
        out = np.zeros(self.dimension)
        j = int(np.searchsorted(self.nodes, t, side="right")) - 1
        j = min(max(j, 0), self.dimension - 2)
        h = self.nodes[j + 1] - self.nodes[j]
        lam = (t - self.nodes[j]) / h
        out[j] = 1 - lam
        out[j + 1] = lam
        return out

    def interp_matrix(self, other: "TimeBasis") -> np.ndarray:
        """Matrix taking nodal values on this basis to the other's nodes."""
        return np.array([self.eval_weights(t) for t in other.nodes])


def time_basis(kind: str, dimension: int, dt: float) -> TimeBasis:
    """Build a time basis; `dimension` counts nodes including both ends."""
    if kind not in SCHEMES:
        raise ValueError(f"unknown scheme {kind!r}; choose from {SCHEMES}")
    if dimension < 2:
        raise ValueError("time basis needs at least two nodes")
    if dt <= 0:
        raise ValueError("dt must be positive")
    T = dimension
    if kind == "chebyshev":
        nodes = _cgl_nodes(T) * dt
        sv = _diff_matrix(nodes)
        mass = np.eye(T)
    else:
        nodes = np.linspace(0.0, dt, T)
        h = dt / (T - 1)
        sv = np.zeros((T, T))
        mass = np.zeros((T, T))
        for j in range(1, T):
            sv[j, j] = 1.0 / h
            sv[j, j - 1] = -1.0 / h
            if kind == "implicit_euler":
                mass[j, j] = 1.0
            else:  # crank_nicolson
                mass[j, j] = 0.5
                mass[j, j - 1] = 0.5
    sv[0] = 0.0
    sv[0, 0] = 1.0
    mass[0] = 0.0
    v = np.zeros(T)
    v[0] = 1.0
    e_end = np.zeros(T)
    e_end[-1] = 1.0
    int_mass = np.linalg.solve(sv, mass)
    int_v = np.linalg.solve(sv, v)
    return TimeBasis(kind, T, dt, nodes, sv, mass, v, e_end, int_mass, int_v)


@dataclass
class IntegrationConfig:
    """Subinterval length, error-indicator tolerance, and solver controls."""

    dt: float
    tol: float = 1e-6
    solver: SolverConfig = field(default_factory=SolverConfig)
    use_qtt: bool = False
    adapt: bool = False
    renormalize: bool = True
    rounding: float | None = None  # end-state rounding; default solver target

    def __post_init__(self):
        if self.dt <= 0 or self.tol <= 0:
            raise ValueError("dt and tol must be positive")


def assemble_spacetime_system(a: TtOperator, p0: TtTensor, basis: TimeBasis,
                              mass_op: TtOperator | None = None,
                              integral_form: bool = True):
    """Collocation system (M, f) over state x time modes.

    The default integral form premultiplies the time block by the inverse
    collocation matrix; it has the same exact solution as the differential
    form but stays well conditioned for stiff generators.
    """
    if a.row_sizes != a.col_sizes:
        raise ValueError("generator must be square")
    if a.col_sizes != p0.mode_sizes:
        raise ValueError(f"generator columns {a.col_sizes} do not match the "
                         f"initial state modes {p0.mode_sizes}")
    left = mass_op if mass_op is not None else ttop_identity(p0.mode_sizes)
    if integral_form:
        t_block, rhs_vec = basis.int_mass, basis.int_v
        lead = np.eye(basis.dimension)
    else:
        t_block, rhs_vec = basis.mass, basis.v
        lead = basis.sv
    m = ttop_add(ttop_kron(left, ttop_rank1([lead])),
                 ttop_scale(ttop_kron(a, ttop_rank1([t_block])), -1.0))
    rhs0 = ttop_apply(mass_op, p0) if mass_op is not None else p0
    f = tt_kron(rhs0, TtTensor([rhs_vec.reshape(1, -1, 1)]))
    return m, f


def path_at_node(p_path: TtTensor, weights: np.ndarray) -> TtTensor:
    """Contract the trailing time mode with interpolation weights."""
    cores = list(p_path.cores)
    last = np.tensordot(cores[-1], np.asarray(weights), axes=(1, 0))  # (R, 1)
    merged = np.tensordot(cores[-2], last, axes=(2, 0))
    return TtTensor(cores[:-2] + [merged])


@dataclass
class StepResult:
    p_path: TtTensor
    p_end: TtTensor
    report: SolveReport
    mass_drift: float
    renorm_factor: float = 1.0
    indicator: float | None = None


def step(a: TtOperator, p0: TtTensor, basis: TimeBasis,
         cfg: IntegrationConfig, mass_op: TtOperator | None = None,
         x0: TtTensor | None = None) -> StepResult:
    """Solve one subinterval and extract the end state.

    The end state is rounded (and renormalized to the initial mass when
    `cfg.renormalize` is set, the factor being reported).  Negative entries
    are kept: clipping would break the TT ranks and the adjoint symmetry
    used by the backward smoothing pass.
    """
    m, f = assemble_spacetime_system(a, p0, basis, mass_op)
    guess = x0 if x0 is not None else tt_kron(p0, tt_ones((basis.dimension,)))
    if cfg.use_qtt:
        modes = m.row_sizes
        mq = qtt_reshape_op(m)
        fq = qtt_reshape(f)
        gq = qtt_reshape(guess)
        sol_q, report = amen_solve(mq, fq, gq, cfg.solver)
        sol = qtt_unreshape(sol_q, modes)
    else:
        sol, report = amen_solve(m, f, guess, cfg.solver)
    if not report.converged:
        raise SolverDidNotConverge(report)
    round_tol = cfg.rounding if cfg.rounding is not None \
        else cfg.solver.relative_residual_target
    p_end = tt_round(path_at_node(sol, basis.e_end), round_tol)
    mass0 = tt_sum(p0)
    mass1 = tt_sum(p_end)
    drift = abs(mass1 - mass0)
    factor = 1.0
    if cfg.renormalize and mass1 > 0 and mass0 != 0:
        factor = mass0 / mass1
        p_end = tt_scale(p_end, factor)
    return StepResult(sol, p_end, report, drift, factor)


class SolverDidNotConverge(RuntimeError):
    def __init__(self, report: SolveReport):
        super().__init__(f"TT solver did not converge: relative residual "
                         f"{report.achieved_relative_residual:.3e} after "
                         f"{report.sweeps_used} sweeps")
        self.report = report


def error_indicator(m2: TtOperator, q: np.ndarray, p: TtTensor,
                    f2: TtTensor) -> float:
    """Residual norm of the solution interpolated onto the doubled basis."""
    d = p.ndim
    interp = ttop_kron(ttop_identity(p.mode_sizes[:d - 1]),
                       ttop_rank1([np.asarray(q)]))
    lifted = ttop_apply(interp, p)
    r = ttop_apply(m2, lifted) - f2
    return tt_norm(tt_round(r, 1e-10))


def adapt_step(dt: float, T: int, indicator: float, tol: float) -> float:
    """Subinterval length suggested by the error indicator."""
    if indicator <= 0:
        return dt
    return (tol / indicator) ** (1.0 / T) * dt


def integrate(a: TtOperator, p0: TtTensor, t_span, basis: TimeBasis,
              cfg: IntegrationConfig, mass_op: TtOperator | None = None,
              keep_paths: bool = False):
    """Chain subintervals over t_span; returns [(t, state), ...].

    With `cfg.adapt`, each accepted step rescales dt from the doubled-basis
    error indicator; a step whose indicator exceeds tol is redone with the
    shrunk dt.  Aborts with the partial trajectory attached on solver
    failure.
    """
    t0, t_end = float(t_span[0]), float(t_span[1])
    if t_end < t0:
        raise ValueError("t_span must be increasing")
    out = [(t0, p0)]
    paths = []
    t = t0
    p = p0
    dt = cfg.dt
    guard = 0
    while t < t_end - 1e-12 * max(1.0, abs(t_end)):
        dt_cur = min(dt, t_end - t)
        b = basis.with_dt(dt_cur)
        try:
            res = step(a, p, b, cfg, mass_op)
        except SolverDidNotConverge as exc:
            exc.trajectory = out
            raise
        if cfg.adapt:
            b2 = b.refined()
            m2, f2 = assemble_spacetime_system(a, p, b2, mass_op)
            ind = error_indicator(m2, b.interp_matrix(b2), res.p_path, f2)
            res.indicator = ind
            new_dt = adapt_step(dt_cur, b.dimension, ind, cfg.tol)
            if ind > cfg.tol and guard < 8:
                dt = new_dt
                guard += 1
                continue  # reject and redo with the shorter subinterval
            dt = min(new_dt, 2 * dt_cur) if ind > 0 else dt
            guard = 0
        t = t + dt_cur
        p = res.p_end
        out.append((t, p))
        if keep_paths:
            paths.append(res)
    return (out, paths) if keep_paths else out
