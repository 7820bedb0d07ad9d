"""Tensor-train tensors and operators.

A d-way array is stored as a chain of 3-way cores ``g[k]`` of shape
``(R[k-1], n[k], R[k])`` with boundary ranks ``R[0] = R[d] = 1``.  Operators
(tensor-matrices) use 4-way cores ``(R[k-1], n[k], m[k], R[k])``.  All
operations return new objects; cores are never mutated in place.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

DENSE_BUDGET = 2 ** 26  # element cap for densification


@dataclass(frozen=True)
class RoundingAccuracy:
    """Target for rank truncation: relative Frobenius error and optional rank cap."""

    relative_tolerance: float = 0.0
    max_rank: int | None = None

    def __post_init__(self):
        if self.relative_tolerance < 0:
            raise ValueError("relative_tolerance must be >= 0")
        if self.max_rank is not None and self.max_rank < 1:
            raise ValueError("max_rank must be >= 1")


def _as_accuracy(acc) -> RoundingAccuracy:
    if isinstance(acc, RoundingAccuracy):
        return acc
    return RoundingAccuracy(float(acc))


class TtTensor:
    """d-way array in tensor-train form.

    Parameters
    ----------
    cores : sequence of ndarray
        3-way cores; core k has shape (R_{k-1}, n_k, R_k), R_0 = R_d = 1.
    """

    __slots__ = ("cores",)

    def __init__(self, cores):
        cores = tuple(np.asarray(c, dtype=float) for c in cores)
        if not cores:
            raise ValueError("need at least one core")
        if cores[0].shape[0] != 1 or cores[-1].shape[-1] != 1:
            raise ValueError("boundary ranks must be 1")
        for k, c in enumerate(cores):
            if c.ndim != 3:
                raise ValueError(f"core {k} is not 3-way")
            if k and cores[k - 1].shape[-1] != c.shape[0]:
                raise ValueError(f"rank mismatch between cores {k-1} and {k}")
        self.cores = cores

    @property
    def ndim(self) -> int:
        return len(self.cores)

    @property
    def mode_sizes(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return (1,) + tuple(c.shape[2] for c in self.cores)

    @property
    def storage_bytes(self) -> int:
        return sum(c.nbytes for c in self.cores)

    def __repr__(self):
        return f"TtTensor(modes={self.mode_sizes}, ranks={self.ranks})"

    def __add__(self, other):
        return tt_add(self, other)

    def __sub__(self, other):
        return tt_add(self, tt_scale(other, -1.0))

    def __mul__(self, other):
        if isinstance(other, TtTensor):
            return tt_hadamard(self, other)
        return tt_scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return tt_scale(self, -1.0)


class TtOperator:
    """Tensor-matrix in tensor-train form; core k has shape (R_{k-1}, n_k, m_k, R_k)."""

    __slots__ = ("cores",)

    def __init__(self, cores):
        cores = tuple(np.asarray(c, dtype=float) for c in cores)
        if not cores:
            raise ValueError("need at least one core")
        if cores[0].shape[0] != 1 or cores[-1].shape[-1] != 1:
            raise ValueError("boundary ranks must be 1")
        for k, c in enumerate(cores):
            if c.ndim != 4:
                raise ValueError(f"core {k} is not 4-way")
            if k and cores[k - 1].shape[-1] != c.shape[0]:
                raise ValueError(f"rank mismatch between cores {k-1} and {k}")
        self.cores = cores

    @property
    def ndim(self) -> int:
        return len(self.cores)

    @property
    def row_sizes(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def col_sizes(self) -> tuple[int, ...]:
        return tuple(c.shape[2] for c in self.cores)

    @property
    def ranks(self) -> tuple[int, ...]:
        return (1,) + tuple(c.shape[3] for c in self.cores)

    @property
    def storage_bytes(self) -> int:
        return sum(c.nbytes for c in self.cores)

    def __repr__(self):
        return (f"TtOperator(rows={self.row_sizes}, cols={self.col_sizes}, "
                f"ranks={self.ranks})")

    def __matmul__(self, x):
        if isinstance(x, TtTensor):
            return ttop_apply(self, x)
        return NotImplemented

    def __add__(self, other):
        return ttop_add(self, other)

    def __sub__(self, other):
        return ttop_add(self, ttop_scale(other, -1.0))

    def __mul__(self, other):
        return ttop_scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return ttop_scale(self, -1.0)

    @property
    def T(self) -> "TtOperator":
        return ttop_transpose(self)


# ---------------------------------------------------------------------------
# constructors


def tt_zeros(mode_sizes) -> TtTensor:
    return TtTensor([np.zeros((1, n, 1)) for n in mode_sizes])


def tt_ones(mode_sizes) -> TtTensor:
    return TtTensor([np.ones((1, n, 1)) for n in mode_sizes])


def tt_rank1(vectors) -> TtTensor:
    """Outer product of 1-D factors as a rank-1 TT."""
    return TtTensor([np.asarray(v, dtype=float).reshape(1, -1, 1) for v in vectors])


def tt_unit(mode_sizes, index) -> TtTensor:
    """Indicator of a single multi-index."""
    vecs = []
    for n, i in zip(mode_sizes, index):
        v = np.zeros(n)
        v[i] = 1.0
        vecs.append(v)
    return tt_rank1(vecs)


def tt_random(mode_sizes, ranks, rng) -> TtTensor:
    """Random TT with prescribed interior ranks (for tests)."""
    d = len(mode_sizes)
    full = [1] + list(ranks) + [1] if len(ranks) == d - 1 else list(ranks)
    cores = [rng.standard_normal((full[k], mode_sizes[k], full[k + 1]))
             for k in range(d)]
    return TtTensor(cores)


def ttop_identity(mode_sizes) -> TtOperator:
    return TtOperator([np.eye(n).reshape(1, n, n, 1) for n in mode_sizes])


def ttop_zeros(row_sizes, col_sizes=None) -> TtOperator:
    col_sizes = row_sizes if col_sizes is None else col_sizes
    return TtOperator([np.zeros((1, n, m, 1))
                       for n, m in zip(row_sizes, col_sizes)])


def ttop_rank1(matrices) -> TtOperator:
    """Kronecker product of matrices as a rank-1 TT operator."""
    return TtOperator([np.asarray(m, dtype=float)[None, :, :, None]
                       for m in matrices])


def ttop_random(row_sizes, col_sizes, ranks, rng) -> TtOperator:
    d = len(row_sizes)
    full = [1] + list(ranks) + [1] if len(ranks) == d - 1 else list(ranks)
    cores = [rng.standard_normal((full[k], row_sizes[k], col_sizes[k], full[k + 1]))
             for k in range(d)]
    return TtOperator(cores)


def tt_kron(a: TtTensor, b: TtTensor) -> TtTensor:
    """Concatenate trains: dense result is the Kronecker/outer product a ⊗ b."""
    return TtTensor(list(a.cores) + list(b.cores))


def ttop_kron(a: TtOperator, b: TtOperator) -> TtOperator:
    return TtOperator(list(a.cores) + list(b.cores))


# ---------------------------------------------------------------------------
# dense conversion


def tt_from_dense(full, acc=0.0) -> TtTensor:
    """Compress a dense array into TT form by sequential SVDs.

    The result X' satisfies ||X' - X||_F <= tol * ||X||_F where tol is the
    relative tolerance of `acc`; the truncation budget is split evenly over
    the d-1 unfoldings.
    """
    acc = _as_accuracy(acc)
    full = np.asarray(full, dtype=float)
    if full.ndim < 1:
        full = full.reshape(1)
    if not np.all(np.isfinite(full)):
        raise ValueError("input contains non-finite entries")
    n = full.shape
    d = full.ndim
    norm = np.linalg.norm(full)
    if norm == 0.0:
        return tt_zeros(n)
    if d == 1:
        return TtTensor([full.reshape(1, -1, 1)])
    delta = acc.relative_tolerance * norm / np.sqrt(d - 1)
    cores = []
    r_prev = 1
    z = full
    for k in range(d - 1):
        z = z.reshape(r_prev * n[k], -1)
        u, s, vt = np.linalg.svd(z, full_matrices=False)
        r = _rank_from_tail(s, delta)
        if acc.max_rank is not None:
            r = min(r, acc.max_rank)
        cores.append(u[:, :r].reshape(r_prev, n[k], r))
        z = (s[:r, None] * vt[:r])
        r_prev = r
    cores.append(z.reshape(r_prev, n[-1], 1))
    return TtTensor(cores)


def tt_to_dense(t: TtTensor, budget: int = DENSE_BUDGET) -> np.ndarray:
    """Expand to a dense d-way array; refuses above `budget` elements."""
    total = int(np.prod(t.mode_sizes, dtype=np.int64))
    if total > budget:
        raise ValueError(f"dense expansion of {total} elements exceeds budget {budget}")
    out = t.cores[0].reshape(t.mode_sizes[0], -1)
    for c in t.cores[1:]:
        out = out @ c.reshape(c.shape[0], -1)
        out = out.reshape(-1, c.shape[2])
    return out.reshape(t.mode_sizes)


def ttop_from_dense(full, row_sizes, col_sizes, acc=0.0) -> TtOperator:
    """Compress a dense operator given as array of shape rows x cols (matrix)."""
    full = np.asarray(full, dtype=float)
    d = len(row_sizes)
    t = full.reshape(tuple(row_sizes) + tuple(col_sizes))
    # interleave (i_1, j_1, i_2, j_2, ...) then fuse pairs
    perm = [None] * (2 * d)
    perm[0::2] = range(d)
    perm[1::2] = range(d, 2 * d)
    t = t.transpose(perm).reshape([row_sizes[k] * col_sizes[k] for k in range(d)])
    tt = tt_from_dense(t, acc)
    cores = [c.reshape(c.shape[0], row_sizes[k], col_sizes[k], c.shape[2])
             for k, c in enumerate(tt.cores)]
    return TtOperator(cores)


def ttop_to_dense(a: TtOperator, budget: int = DENSE_BUDGET) -> np.ndarray:
    """Expand to the dense matrix over row-major flattened indices."""
    nr = int(np.prod(a.row_sizes, dtype=np.int64))
    nc = int(np.prod(a.col_sizes, dtype=np.int64))
    if nr * nc > budget:
        raise ValueError(f"dense expansion of {nr * nc} elements exceeds budget {budget}")
    d = a.ndim
    t = _op_as_tensor(a)
    full = tt_to_dense(t, budget)
    full = full.reshape([s for k in range(d)
                         for s in (a.row_sizes[k], a.col_sizes[k])])
    perm = list(range(0, 2 * d, 2)) + list(range(1, 2 * d, 2))
    return full.transpose(perm).reshape(nr, nc)


def _op_as_tensor(a: TtOperator) -> TtTensor:
    """View operator cores as 3-way cores with fused row/col mode."""
    return TtTensor([c.reshape(c.shape[0], c.shape[1] * c.shape[2], c.shape[3])
                     for c in a.cores])


def _tensor_as_op(t: TtTensor, row_sizes, col_sizes) -> TtOperator:
    return TtOperator([c.reshape(c.shape[0], n, m, c.shape[2])
                       for c, n, m in zip(t.cores, row_sizes, col_sizes)])


# ---------------------------------------------------------------------------
# arithmetic


def tt_scale(t: TtTensor, alpha: float) -> TtTensor:
    cores = list(t.cores)
    cores[0] = cores[0] * alpha
    return TtTensor(cores)


def ttop_scale(a: TtOperator, alpha: float) -> TtOperator:
    cores = list(a.cores)
    cores[0] = cores[0] * alpha
    return TtOperator(cores)


def tt_add(a: TtTensor, b: TtTensor) -> TtTensor:
    """Elementwise sum; interior ranks add (round afterwards if needed)."""
    if a.mode_sizes != b.mode_sizes:
        raise ValueError(f"mode mismatch: {a.mode_sizes} vs {b.mode_sizes}")
    d = a.ndim
    if d == 1:
        return TtTensor([a.cores[0] + b.cores[0]])
    cores = []
    for k in range(d):
        ca, cb = a.cores[k], b.cores[k]
        ra1, n, ra2 = ca.shape
        rb1, _, rb2 = cb.shape
        if k == 0:
            c = np.concatenate([ca, cb], axis=2)
        elif k == d - 1:
            c = np.concatenate([ca, cb], axis=0)
        else:
            c = np.zeros((ra1 + rb1, n, ra2 + rb2))
            c[:ra1, :, :ra2] = ca
            c[ra1:, :, ra2:] = cb
        cores.append(c)
    return TtTensor(cores)


def ttop_add(a: TtOperator, b: TtOperator) -> TtOperator:
    if a.row_sizes != b.row_sizes or a.col_sizes != b.col_sizes:
        raise ValueError("operator shape mismatch")
    t = tt_add(_op_as_tensor(a), _op_as_tensor(b))
    return _tensor_as_op(t, a.row_sizes, a.col_sizes)


def tt_hadamard(a: TtTensor, b: TtTensor) -> TtTensor:
    """Elementwise product; interior ranks multiply."""
    if a.mode_sizes != b.mode_sizes:
        raise ValueError(f"mode mismatch: {a.mode_sizes} vs {b.mode_sizes}")
    cores = []
    for ca, cb in zip(a.cores, b.cores):
        ra1, n, ra2 = ca.shape
        rb1, _, rb2 = cb.shape
        c = np.einsum("anb,cnd->acnbd", ca, cb, optimize=True)
        cores.append(c.reshape(ra1 * rb1, n, ra2 * rb2))
    return TtTensor(cores)


def tt_dot(a: TtTensor, b: TtTensor) -> float:
    """Frobenius inner product sum_i a_i b_i."""
    if a.mode_sizes != b.mode_sizes:
        raise ValueError(f"mode mismatch: {a.mode_sizes} vs {b.mode_sizes}")
    v = np.ones((1, 1))
    for ca, cb in zip(a.cores, b.cores):
        w = np.tensordot(v, ca, axes=(0, 0))         # (rb, n, ra')
        v = np.tensordot(cb, w, axes=([0, 1], [0, 1]))  # (rb', ra')
        v = v.T
    return float(v[0, 0])


def tt_norm(t: TtTensor) -> float:
    """Frobenius norm, computed stably via orthogonalization."""
    cores = _orthogonalize_rl(list(t.cores))
    return float(np.linalg.norm(cores[0]))


def ttop_norm(a: TtOperator) -> float:
    return tt_norm(_op_as_tensor(a))


def tt_sum(t: TtTensor) -> float:
    """Sum of all entries (contraction with the all-ones tensor)."""
    v = np.ones((1,))
    for c in t.cores:
        v = np.tensordot(v, c.sum(axis=1), axes=(0, 0))
    return float(v[0])


def ttop_apply(a: TtOperator, x: TtTensor) -> TtTensor:
    """Tensor-matrix times tensor; ranks multiply."""
    if a.col_sizes != x.mode_sizes:
        raise ValueError(f"shape mismatch: operator cols {a.col_sizes} "
                         f"vs tensor modes {x.mode_sizes}")
    cores = []
    for ca, cx in zip(a.cores, x.cores):
        ra1, n, m, ra2 = ca.shape
        rx1, _, rx2 = cx.shape
        c = np.tensordot(ca, cx, axes=(2, 1))        # (ra1, n, ra2, rx1, rx2)
        c = c.transpose(0, 3, 1, 2, 4)
        cores.append(c.reshape(ra1 * rx1, n, ra2 * rx2))
    return TtTensor(cores)


def ttop_transpose(a: TtOperator) -> TtOperator:
    return TtOperator([c.transpose(0, 2, 1, 3) for c in a.cores])


def ttop_compose(a: TtOperator, b: TtOperator) -> TtOperator:
    """Operator product (A B); ranks multiply."""
    if a.col_sizes != b.row_sizes:
        raise ValueError("operator composition shape mismatch")
    cores = []
    for ca, cb in zip(a.cores, b.cores):
        ra1, n, m, ra2 = ca.shape
        rb1, _, p, rb2 = cb.shape
        c = np.tensordot(ca, cb, axes=(2, 1))        # (ra1, n, ra2, rb1, p, rb2)
        c = c.transpose(0, 3, 1, 4, 2, 5)
        cores.append(c.reshape(ra1 * rb1, n, p, ra2 * rb2))
    return TtOperator(cores)


def tt_marginal_sum(t: TtTensor, keep) -> TtTensor:
    """Sum over all modes not in `keep`, preserving the kept modes' order."""
    keep = set(keep)
    if not keep:
        raise ValueError("keep must be nonempty; use tt_sum for a full sum")
    if not keep.issubset(range(t.ndim)):
        raise ValueError("keep contains invalid mode indices")
    cores = []
    carry = None  # pending left matrix from summed-out modes
    for k, c in enumerate(t.cores):
        if carry is not None:
            c = np.tensordot(carry, c, axes=(1, 0))
            carry = None
        if k in keep:
            cores.append(c)
        else:
            m = c.sum(axis=1)
            if cores:
                cores[-1] = np.tensordot(cores[-1], m, axes=(2, 0))
            else:
                carry = m
    # carry can remain only if the first kept mode came after summed ones,
    # which the loop already folded; nothing left to do.
    return TtTensor(cores)


# ---------------------------------------------------------------------------
# orthogonalization and rounding


def _rank_from_tail(s: np.ndarray, delta: float) -> int:
    """Smallest rank whose discarded tail energy is <= delta^2."""
    if delta <= 0:
        return max(1, int(np.sum(s > 0)))
    tail = np.cumsum(s[::-1] ** 2)[::-1]  # tail[r] = sum_{i>=r} s_i^2
    ok = np.nonzero(tail <= delta * delta)[0]
    r = int(ok[0]) if ok.size else len(s)
    return max(1, r)


def _orthogonalize_rl(cores: list[np.ndarray]) -> list[np.ndarray]:
    """Right-to-left QR sweep; afterwards all cores but the first are
    row-orthogonal and the tensor's norm equals ||cores[0]||_F."""
    cores = list(cores)
    for k in range(len(cores) - 1, 0, -1):
        r1, n, r2 = cores[k].shape
        q, r = np.linalg.qr(cores[k].reshape(r1, n * r2).T)
        rank = q.shape[1]
        cores[k] = q.T.reshape(rank, n, r2)
        cores[k - 1] = np.tensordot(cores[k - 1], r.T, axes=(2, 0))
    return cores


def tt_round(t: TtTensor, acc) -> TtTensor:
    """Reduce ranks with guaranteed relative Frobenius accuracy.

    Performs a right-to-left QR sweep followed by a left-to-right truncated
    SVD sweep; each unfolding discards at most eps/sqrt(d-1) * ||t||_F of
    energy so the total error stays within eps * ||t||_F.
    """
    acc = _as_accuracy(acc)
    d = t.ndim
    cores = _orthogonalize_rl(list(t.cores))
    norm = np.linalg.norm(cores[0])
    if norm == 0.0:
        return tt_zeros(t.mode_sizes)
    if d == 1:
        return TtTensor(cores)
    delta = acc.relative_tolerance * norm / np.sqrt(d - 1)
    for k in range(d - 1):
        r1, n, r2 = cores[k].shape
        u, s, vt = np.linalg.svd(cores[k].reshape(r1 * n, r2),
                                 full_matrices=False)
        r = _rank_from_tail(s, delta)
        if acc.max_rank is not None:
            r = min(r, acc.max_rank)
        cores[k] = u[:, :r].reshape(r1, n, r)
        sv = s[:r, None] * vt[:r]
        cores[k + 1] = np.tensordot(sv, cores[k + 1], axes=(1, 0))
    return TtTensor(cores)


def ttop_round(a: TtOperator, acc) -> TtOperator:
    t = tt_round(_op_as_tensor(a), acc)
    return _tensor_as_op(t, a.row_sizes, a.col_sizes)


# ---------------------------------------------------------------------------
# quantized (QTT) reshaping


def _bit_count(n: int) -> int:
    if n < 1 or (n & (n - 1)) != 0:
        raise ValueError(f"mode size {n} is not a power of two")
    return max(n.bit_length() - 1, 0)


def qtt_mode_split(mode_sizes) -> list[int]:
    """Number of binary modes each original mode expands into (>=1)."""
    return [max(_bit_count(n), 1) for n in mode_sizes]


def _split_core(core: np.ndarray, nbits: int) -> list[np.ndarray]:
    """TT-decompose one 3-way core into `nbits` binary cores (exact).

    Bit order is little-endian: the first produced core indexes the least
    significant bit of the original mode.
    """
    r1, n, r2 = core.shape
    if nbits == 1:
        return [core]
    # reshape puts the most significant bit first; reverse for little-endian
    z = core.reshape((r1,) + (2,) * nbits + (r2,))
    z = z.transpose((0,) + tuple(range(nbits, 0, -1)) + (nbits + 1,))
    return _split_plain(z.reshape(r1, n, r2), nbits, 2)


def qtt_reshape(t: TtTensor) -> TtTensor:
    """Split every power-of-two mode into binary modes (little-endian)."""
    cores = []
    for c, nb in zip(t.cores, qtt_mode_split(t.mode_sizes)):
        cores.extend(_split_core(c, nb))
    return TtTensor(cores)


def qtt_unreshape(q: TtTensor, original_modes) -> TtTensor:
    """Merge binary-mode groups back into the original modes."""
    splits = qtt_mode_split(original_modes)
    if sum(splits) != q.ndim:
        raise ValueError("binary mode count does not match original modes")
    cores = []
    pos = 0
    for n, nb in zip(original_modes, splits):
        group = q.cores[pos:pos + nb]
        pos += nb
        if nb == 1:
            cores.append(group[0])
            continue
        merged = group[0]
        for g in group[1:]:
            merged = np.tensordot(merged, g, axes=(merged.ndim - 1, 0))
        r1, r2 = merged.shape[0], merged.shape[-1]
        # merged axes: (r1, bit_0 .. bit_{nb-1}, r2), little-endian
        merged = merged.transpose((0,) + tuple(range(nb, 0, -1)) + (nb + 1,))
        cores.append(merged.reshape(r1, n, r2))
    return TtTensor(cores)


def qtt_reshape_op(a: TtOperator) -> TtOperator:
    """QTT form of an operator; every mode must be square power-of-two."""
    if a.row_sizes != a.col_sizes:
        raise ValueError("operator QTT reshaping requires square modes")
    cores = []
    for c, nb in zip(a.cores, qtt_mode_split(a.row_sizes)):
        r1, n, m, r2 = c.shape
        if nb == 1:
            cores.append(c)
            continue
        # split row and column indices into bits, pair bit k of row and col
        z = c.reshape((r1,) + (2,) * nb + (2,) * nb + (r2,))
        row_axes = tuple(range(nb, 0, -1))            # little-endian
        col_axes = tuple(range(2 * nb, nb, -1))
        order = (0,) + tuple(x for pair in zip(row_axes, col_axes) for x in pair) \
            + (2 * nb + 1,)
        z = z.transpose(order).reshape(r1, 4 ** nb, r2)
        # fused (row,col) digit pairs are already in chain order
        sub = _split_plain(z, nb, 4)
        cores.extend(s.reshape(s.shape[0], 2, 2, s.shape[2]) for s in sub)
    return TtOperator(cores)


def _split_plain(core: np.ndarray, parts: int, base: int) -> list[np.ndarray]:
    """Exact TT split of a core whose middle mode is base**parts, keeping
    the digit axes in their current (chain) order."""
    r1, n, r2 = core.shape
    out = []
    left = r1
    z = core.reshape(r1, n * r2)
    for _ in range(parts - 1):
        z = z.reshape(left * base, -1)
        u, s, vt = np.linalg.svd(z, full_matrices=False)
        r = max(1, int(np.sum(s > s[0] * 1e-14))) if s.size and s[0] > 0 else 1
        out.append(u[:, :r].reshape(left, base, r))
        z = s[:r, None] * vt[:r]
        left = r
    out.append(z.reshape(left, base, r2))
    return out


def qtt_unreshape_op(q: TtOperator, original_modes) -> TtOperator:
    splits = qtt_mode_split(original_modes)
    if sum(splits) != q.ndim:
        raise ValueError("binary mode count does not match original modes")
    cores = []
    pos = 0
    for n, nb in zip(original_modes, splits):
        group = q.cores[pos:pos + nb]
        pos += nb
        merged = group[0]
        for g in group[1:]:
            merged = np.tensordot(merged, g, axes=(merged.ndim - 1, 0))
        if nb == 1:
            cores.append(merged)
            continue
        r1 = merged.shape[0]
        r2 = merged.shape[-1]
        # axes: (r1, i0,j0, i1,j1, ..., r2) little-endian bit pairs
        row_axes = tuple(1 + 2 * b for b in range(nb))
        col_axes = tuple(2 + 2 * b for b in range(nb))
        order = (0,) + row_axes[::-1] + col_axes[::-1] + (2 * nb + 1,)
        merged = merged.transpose(order).reshape(r1, n, n, r2)
        cores.append(merged)
    return TtOperator(cores)


# ---------------------------------------------------------------------------
# binary serialization

_MAGIC_TENSOR = b"TTT1"
_MAGIC_OP = b"TTO1"


def save_tt(obj, path):
    """Write a TtTensor or TtOperator to a little-endian binary file."""
    with open(path, "wb") as fh:
        _write_tt(obj, fh)


def _write_tt(obj, fh: io.BufferedWriter):
    is_op = isinstance(obj, TtOperator)
    fh.write(_MAGIC_OP if is_op else _MAGIC_TENSOR)
    fh.write(b"<")  # endianness tag
    d = obj.ndim
    fh.write(struct.pack("<q", d))
    if is_op:
        fh.write(struct.pack(f"<{d}q", *obj.row_sizes))
        fh.write(struct.pack(f"<{d}q", *obj.col_sizes))
    else:
        fh.write(struct.pack(f"<{d}q", *obj.mode_sizes))
    fh.write(struct.pack(f"<{d + 1}q", *obj.ranks))
    for c in obj.cores:
        fh.write(np.ascontiguousarray(c, dtype="<f8").tobytes())


def load_tt(path):
    """Read a TtTensor or TtOperator written by save_tt."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic not in (_MAGIC_TENSOR, _MAGIC_OP):
            raise ValueError("not a TT file")
        if fh.read(1) != b"<":
            raise ValueError("unsupported endianness tag")
        (d,) = struct.unpack("<q", fh.read(8))
        if magic == _MAGIC_OP:
            rows = struct.unpack(f"<{d}q", fh.read(8 * d))
            cols = struct.unpack(f"<{d}q", fh.read(8 * d))
        else:
            rows = struct.unpack(f"<{d}q", fh.read(8 * d))
            cols = None
        ranks = struct.unpack(f"<{d + 1}q", fh.read(8 * (d + 1)))
        cores = []
        for k in range(d):
            if cols is None:
                shape = (ranks[k], rows[k], ranks[k + 1])
            else:
                shape = (ranks[k], rows[k], cols[k], ranks[k + 1])
            count = int(np.prod(shape))
            buf = fh.read(8 * count)
            cores.append(np.frombuffer(buf, dtype="<f8").reshape(shape).copy())
        return TtOperator(cores) if cols is not None else TtTensor(cores)
