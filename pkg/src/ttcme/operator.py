"""Assembly of the truncated CME generator as a TT operator.

Each reaction contributes a gain term (shifted by the stoichiometric change)
minus a loss term (diagonal), both exact rank-1 tensor-operators built from
per-species factor vectors.  Transitions that would leave the truncation box
are removed from both terms, which keeps the column sums of the generator at
zero and therefore conserves total probability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import ParameterSpace, ReactionNetwork
from .tt import (
    RoundingAccuracy,
    TtOperator,
    ttop_add,
    ttop_identity,
    ttop_kron,
    ttop_rank1,
    ttop_round,
    ttop_scale,
    ttop_zeros,
)

DEFAULT_OPERATOR_ACCURACY = RoundingAccuracy(1e-12)


def _reaction_matrices(net: ReactionNetwork, m: int):
    """Per-species (gain, loss) factor matrices for one reaction."""
    nu = net.reactions[m].change
    gains, losses = [], []
    for k, n in enumerate(net.truncation):
        f = net.factor_values(m, k)
        x = np.arange(n)
        inbox = (x + nu[k] >= 0) & (x + nu[k] <= n - 1)
        w = f * inbox
        loss = np.diag(w)
        gain = np.zeros((n, n))
        src = x[inbox]
        gain[src + nu[k], src] = w[src]
        gains.append(gain)
        losses.append(loss)
    return gains, losses


def build_reaction_operator(net: ReactionNetwork, m: int,
                            unit_rate: bool = False) -> TtOperator:
    """Generator contribution of reaction m (gain minus loss, TT-rank <= 2).

    With `unit_rate` the rate constant is left out, which is what the
    parameter-extended operator needs.
    """
    gains, losses = _reaction_matrices(net, m)
    op = ttop_add(ttop_rank1(gains), ttop_scale(ttop_rank1(losses), -1.0))
    if not unit_rate:
        rate = net.reactions[m].rate
        if isinstance(rate, str):
            raise ValueError(f"reaction {m} rate is the parameter {rate!r}; "
                             "build with unit_rate or resolve it first")
        op = ttop_scale(op, rate)
    return op


def build_cme_operator(net: ReactionNetwork,
                       acc=DEFAULT_OPERATOR_ACCURACY) -> TtOperator:
    """Full CME generator: sum over reactions, rounded at `acc`."""
    if net.param_names:
        raise ValueError("network has parameter slots; use "
                         "build_parametric_operator")
    if not net.reactions:
        return ttop_zeros(net.truncation)
    op = build_reaction_operator(net, 0)
    for m in range(1, len(net.reactions)):
        op = ttop_add(op, build_reaction_operator(net, m))
    return ttop_round(op, acc)


def build_parametric_operator(net: ReactionNetwork, ps: ParameterSpace,
                              nodes: list[np.ndarray] | None = None,
                              acc=DEFAULT_OPERATOR_ACCURACY) -> TtOperator:
    """Generator on the extended state x parameter-grid index set.

    Every reaction whose rate names parameter q contributes its unit-rate
    operator Kronecker-multiplied with diag of the q-th node vector (identity
    on the other parameter modes); fixed-rate reactions are extended with
    identities.  `nodes` defaults to the quadrature nodes of `ps`.
    """
    if nodes is None:
        nodes = [g.nodes for g in ps.grid().per_dim]
    if len(nodes) != ps.dim:
        raise ValueError("need one node vector per parameter")
    owner: dict[str, int] = {}
    for m, r in enumerate(net.reactions):
        if r.is_parametric:
            if r.rate not in ps.names:
                raise ValueError(f"parameter {r.rate!r} missing from the "
                                 "parameter space")
            if r.rate in owner:
                raise ValueError(
                    f"parameter {r.rate!r} governs reactions {owner[r.rate]} "
                    f"and {m}; one reaction per parameter is supported")
            owner[r.rate] = m

    sizes = [len(v) for v in nodes]
    terms = []
    for m, r in enumerate(net.reactions):
        base = build_reaction_operator(net, m, unit_rate=True)
        mats = [np.eye(s) for s in sizes]
        if r.is_parametric:
            q = ps.names.index(r.rate)
            mats[q] = np.diag(np.asarray(nodes[q], dtype=float))
        else:
            base = ttop_scale(base, r.rate)
        terms.append(ttop_kron(base, ttop_rank1(mats)))
    if not terms:
        return ttop_zeros(tuple(net.truncation) + tuple(sizes))
    op = terms[0]
    for t in terms[1:]:
        op = ttop_add(op, t)
    return ttop_round(op, acc)


@dataclass
class ReactionStructure:
    """Truncation diagnostics for one reaction."""

    reaction: int
    propensity_zero: list[np.ndarray]   # per species: factor vanishes here
    boundary_blocked: list[np.ndarray]  # per species: target leaves the box
    n_positive: int                     # states with positive propensity
    n_active: int                       # ... that also stay inside the box

    @property
    def n_suppressed(self) -> int:
        return self.n_positive - self.n_active


def stationary_structure_check(net: ReactionNetwork) -> list[ReactionStructure]:
    """Report which transitions the truncation indicators suppress."""
    out = []
    for m, r in enumerate(net.reactions):
        nu = r.change
        pz, bb = [], []
        n_pos, n_act = 1, 1
        for k, n in enumerate(net.truncation):
            f = net.factor_values(m, k)
            x = np.arange(n)
            inbox = (x + nu[k] >= 0) & (x + nu[k] <= n - 1)
            pz.append(f == 0)
            bb.append((f > 0) & ~inbox)
            n_pos *= int(np.sum(f > 0))
            n_act *= int(np.sum((f > 0) & inbox))
        out.append(ReactionStructure(m, pz, bb, n_pos, n_act))
    return out
