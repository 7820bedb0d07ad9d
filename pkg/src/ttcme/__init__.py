"""Tensor-train chemical master equation toolkit."""

from .tt import (
    RoundingAccuracy,
    TtOperator,
    TtTensor,
    load_tt,
    qtt_reshape,
    qtt_reshape_op,
    qtt_unreshape,
    qtt_unreshape_op,
    save_tt,
    tt_add,
    tt_dot,
    tt_from_dense,
    tt_hadamard,
    tt_kron,
    tt_marginal_sum,
    tt_norm,
    tt_ones,
    tt_random,
    tt_rank1,
    tt_round,
    tt_scale,
    tt_sum,
    tt_to_dense,
    tt_unit,
    tt_zeros,
    ttop_add,
    ttop_apply,
    ttop_compose,
    ttop_from_dense,
    ttop_identity,
    ttop_kron,
    ttop_norm,
    ttop_random,
    ttop_rank1,
    ttop_round,
    ttop_to_dense,
    ttop_transpose,
    ttop_scale,
    ttop_zeros,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
