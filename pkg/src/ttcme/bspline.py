"""B-spline bases over the truncated parameter box.

Clamped uniform knot vectors on [lo, hi]; evaluation by the Cox-de Boor
recursion.  Quadrature is Gauss-Legendre per knot span with enough points to
integrate products of two basis functions times a linear rate factor
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tt import TtOperator, TtTensor, tt_rank1, ttop_rank1


@dataclass(frozen=True)
class BsplineBasis:
    """B-splines of a given degree on [lo, hi] with `dimension` functions."""

    degree: int
    lo: float
    hi: float
    dimension: int
    knots: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.dimension < self.degree + 1:
            raise ValueError("dimension must be at least degree + 1")
        if not self.lo < self.hi:
            raise ValueError("empty parameter range")
        spans = self.dimension - self.degree
        inner = np.linspace(self.lo, self.hi, spans + 1)
        knots = np.concatenate([np.full(self.degree, self.lo), inner,
                               np.full(self.degree, self.hi)])
        object.__setattr__(self, "knots", knots)

    @property
    def spans(self) -> int:
        return self.dimension - self.degree

    def eval(self, theta) -> np.ndarray:
        """Basis values; shape (len(theta), dimension).  Rows sum to one."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if np.any(theta < self.lo - 1e-12) or np.any(theta > self.hi + 1e-12):
            raise ValueError("parameter value outside the basis range")
        t = self.knots
        p = self.degree
        nfun = self.dimension
        out = np.zeros((len(theta), nfun))
        for row, x in enumerate(theta):
            x = min(max(x, self.lo), self.hi)
            # active span index j with t[j] <= x < t[j+1]
            j = int(np.searchsorted(t, x, side="right")) - 1
            j = min(max(j, p), nfun - 1)
            vals = np.zeros(p + 1)
            vals[0] = 1.0
            for deg in range(1, p + 1):  # Cox-de Boor triangle
                saved = 0.0
                for r in range(deg):
                    i = j - deg + 1 + r
                    den = t[i + deg] - t[i]
                    term = vals[r] / den if den > 0 else 0.0
                    vals[r] = saved + (t[i + deg] - x) * term
                    saved = (x - t[i]) * term
                vals[deg] = saved
            out[row, j - p:j + 1] = vals
        return out

    def gauss_rule(self, extra: int = 0):
        """Per-span Gauss nodes/weights, exact for products of two basis
        functions times a polynomial of degree 1 + extra."""
        npts = self.degree + 2 + (extra + 1) // 2
        gx, gw = np.polynomial.legendre.leggauss(npts)
        edges = np.linspace(self.lo, self.hi, self.spans + 1)
        nodes, weights = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            nodes.append((a + b) / 2 + (b - a) / 2 * gx)
            weights.append((b - a) / 2 * gw)
        return np.concatenate(nodes), np.concatenate(weights)

    def integrals(self, moment: int = 0) -> np.ndarray:
        """integral of theta^moment * L_l(theta) for each basis function."""
        x, w = self.gauss_rule(extra=max(moment - 1, 0))
        return (w * x ** moment) @ self.eval(x)

    def mass_matrix(self) -> np.ndarray:
        """Gram matrix of the basis; symmetric positive definite."""
        x, w = self.gauss_rule()
        b = self.eval(x)
        return b.T @ (w[:, None] * b)

    def weighted_gram(self, values: np.ndarray) -> np.ndarray:
        """integral of g(theta) L_n L_l given g's values on the Gauss grid."""
        x, w = self.gauss_rule()
        if len(values) != len(x):
            raise ValueError("values must be sampled on gauss_rule() nodes")
        b = self.eval(x)
        return b.T @ ((w * values)[:, None] * b)

    def project(self, fn, clip_negative: bool = False) -> np.ndarray:
        """Least-squares projection of a callable onto the basis.

        With `clip_negative`, small negative coefficients (projection
        overshoot of peaked densities) are clipped to zero.
        """
        x, w = self.gauss_rule(extra=6)
        b = self.eval(x)
        y = np.asarray([float(fn(v)) for v in x])
        gram = b.T @ (w[:, None] * b)
        rhs = b.T @ (w * y)
        coef = np.linalg.solve(gram, rhs)
        if clip_negative:
            coef = np.maximum(coef, 0.0)
        return coef


@dataclass(frozen=True)
class DimQuadrature:
    nodes: np.ndarray
    weights: np.ndarray


class QuadratureGrid:
    """Tensor-product Gauss grid matched to a list of univariate bases."""

    def __init__(self, bases: list[BsplineBasis]):
        self.bases = list(bases)
        self.per_dim = []
        for b in self.bases:
            x, w = b.gauss_rule(extra=1)
            self.per_dim.append(DimQuadrature(x, w))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(q.nodes) for q in self.per_dim)

    def weight_tensor(self) -> TtTensor:
        return tt_rank1([q.weights for q in self.per_dim])


def mass_operator(bases: list[BsplineBasis]) -> TtOperator:
    """Rank-1 TT operator holding the per-dimension mass matrices."""
    return ttop_rank1([b.mass_matrix() for b in bases])


def galerkin_stiffness(a_bar: TtOperator, bases: list[BsplineBasis],
                       grid: QuadratureGrid,
                       n_state_modes: int) -> TtOperator:
    """Project a grid-sampled parametric generator onto the bases.

    `a_bar` acts on state modes followed by parameter-grid modes whose sizes
    match `grid`; each parameter-mode core (diagonal over grid nodes) is
    contracted with w_r L_n(theta_r) L_l(theta_r), turning grid indices into
    basis-coefficient indices.  State cores pass through unchanged.
    """
    if a_bar.ndim != n_state_modes + len(bases):
        raise ValueError("operator order does not match state + parameter "
                         "modes")
    cores = list(a_bar.cores)
    for q, (basis, quad) in enumerate(zip(bases, grid.per_dim)):
        k = n_state_modes + q
        c = cores[k]
        if c.shape[1] != len(quad.nodes) or c.shape[2] != len(quad.nodes):
            raise ValueError(f"parameter mode {q} does not match the grid")
        diag = np.einsum("arrb->arb", c)
        bv = basis.eval(quad.nodes)                      # (R, l)
        wb = quad.weights[:, None] * bv
        # new core: sum_r diag[a,r,b] * w_r * L_n(r) * L_l(r)
        new = np.einsum("arb,rn,rl->anlb", diag, wb, bv, optimize=True)
        cores[k] = new
    return TtOperator(cores)


def pdf_eval(coeffs: TtTensor, bases: list[BsplineBasis], theta) -> float:
    """Evaluate a coefficient tensor at one parameter point."""
    theta = np.atleast_1d(theta)
    v = np.ones((1,))
    for c, basis, x in zip(coeffs.cores, bases, theta):
        vec = basis.eval(x)[0]
        v = v @ np.tensordot(c, vec, axes=(1, 0))
    return float(v[0])


def pdf_moments(coeffs: TtTensor, bases: list[BsplineBasis]):
    """Normalization, mean, and variance of a basis-expanded density."""
    m0 = [b.integrals(0) for b in bases]
    z = _contract(coeffs, m0)
    if z <= 0:
        raise ValueError(f"degenerate density: normalization {z:.3e} <= 0")
    dim = len(bases)
    mean = np.empty(dim)
    var = np.empty(dim)
    for q in range(dim):
        vecs = list(m0)
        vecs[q] = bases[q].integrals(1)
        mean[q] = _contract(coeffs, vecs) / z
        vecs[q] = bases[q].integrals(2)
        var[q] = _contract(coeffs, vecs) / z - mean[q] ** 2
    return z, mean, var


def _contract(t: TtTensor, vectors) -> float:
    v = np.ones((1,))
    for c, vec in zip(t.cores, vectors):
        v = v @ np.tensordot(c, np.asarray(vec), axes=(1, 0))
    return float(v[0])
