"""Built-in reaction network corpus used by the CLI examples and tests."""

from __future__ import annotations

from .network import Reaction, ReactionNetwork


def _clip(state, truncation):
    return tuple(min(x, n - 1) for x, n in zip(state, truncation))


def simple_gene_expression(truncation=(64, 64)) -> ReactionNetwork:
    """Two-species transcription/translation model.

    Species: mRNA, Protein.  Rates: degradation 0.002, translation 0.015,
    transcription 0.1, protein degradation 0.01.
    """
    return ReactionNetwork(
        species=("mRNA", "Protein"),
        reactions=(
            Reaction((1, 0), (0, 0), 0.002),   # mRNA -> 0
            Reaction((1, 0), (1, 1), 0.015),   # mRNA -> mRNA + Protein
            Reaction((0, 0), (1, 0), 0.1),     # 0 -> mRNA
            Reaction((0, 1), (0, 0), 0.01),    # Protein -> 0
        ),
        truncation=truncation,
        initial_state=_clip((2, 4), truncation),
        name="simple-gene-expression",
    )


def seir(truncation=(128, 128, 64, 64), initial_state=(50, 4, 0, 0)) \
        -> ReactionNetwork:
    """Four-species epidemic model (susceptible, exposed, infected,
    recovered); the ordering keeps reacting species adjacent in the train,
    which keeps the operator and solution ranks low."""
    return ReactionNetwork(
        species=("S", "E", "I", "R"),
        reactions=(
            Reaction((1, 0, 1, 0), (0, 1, 1, 0), 0.1),    # S+I -> E+I
            Reaction((0, 1, 0, 0), (0, 0, 1, 0), 0.5),    # E -> I
            Reaction((0, 0, 1, 0), (1, 0, 0, 0), 1.0),    # I -> S
            Reaction((1, 0, 0, 0), (0, 0, 0, 0), 0.01),   # S -> 0
            Reaction((0, 1, 0, 0), (0, 0, 0, 0), 0.01),   # E -> 0
            Reaction((0, 0, 1, 0), (0, 0, 0, 1), 0.01),   # I -> R
            Reaction((0, 0, 0, 0), (1, 0, 0, 0), 0.4),    # 0 -> S
        ),
        truncation=truncation,
        initial_state=_clip(initial_state, truncation),
        name="seir",
    )


def three_stage_gene(truncation=(2, 16, 64, 2)) -> ReactionNetwork:
    """Gene expression with a negative feedback loop; species G, M, P, G*."""
    return ReactionNetwork(
        species=("G", "M", "P", "Gstar"),
        reactions=(
            Reaction((1, 0, 0, 0), (1, 1, 0, 0), 4.0),    # G -> G+M
            Reaction((0, 1, 0, 0), (0, 1, 1, 0), 10.0),   # M -> M+P
            Reaction((0, 1, 0, 0), (0, 0, 0, 0), 1.0),    # M -> 0
            Reaction((1, 0, 1, 0), (0, 0, 0, 1), 0.2),    # G+P -> G*
            Reaction((0, 0, 0, 1), (1, 0, 1, 0), 0.6),    # G* -> G+P
            Reaction((0, 0, 1, 0), (0, 0, 0, 0), 1.0),    # P -> 0
        ),
        truncation=truncation,
        initial_state=_clip((1, 0, 0, 0), truncation),
        name="three-stage-gene",
    )


def seiqr(truncation=(128, 64, 64, 32, 32), initial_state=(50, 4, 0, 0, 0)) \
        -> ReactionNetwork:
    """Five-species epidemic model with a quarantined compartment."""
    return ReactionNetwork(
        species=("S", "E", "I", "Q", "R"),
        reactions=(
            Reaction((1, 0, 1, 0, 0), (0, 1, 1, 0, 0), 0.04),    # S+I -> E+I
            Reaction((0, 1, 0, 0, 0), (0, 0, 1, 0, 0), 0.4),     # E -> I
            Reaction((0, 0, 1, 0, 0), (0, 0, 0, 1, 0), 0.4),     # I -> Q
            Reaction((0, 0, 1, 0, 0), (0, 0, 0, 0, 0), 0.004),   # I -> 0
            Reaction((0, 0, 1, 0, 0), (0, 0, 0, 0, 1), 0.12),    # I -> R
            Reaction((0, 0, 0, 1, 0), (0, 0, 0, 0, 1), 0.8765),  # Q -> R
            Reaction((0, 0, 1, 0, 0), (1, 0, 0, 0, 0), 0.01),    # I -> S
            Reaction((0, 0, 0, 1, 0), (1, 0, 0, 0, 0), 0.01),    # Q -> S
            Reaction((0, 0, 0, 0, 0), (1, 0, 0, 0, 0), 0.01),    # 0 -> S
        ),
        truncation=truncation,
        initial_state=_clip(initial_state, truncation),
        name="seiqr",
    )


def birth_death(n=64, birth=1.0, death=0.1, parametric_birth=False) \
        -> ReactionNetwork:
    """Single-species birth-death chain, optionally with the birth rate as a
    parameter slot named 'birth'."""
    return ReactionNetwork(
        species=("S",),
        reactions=(
            Reaction((0,), (1,), "birth" if parametric_birth else birth),
            Reaction((1,), (0,), death),
        ),
        truncation=(n,),
        initial_state=(0,),
        name="birth-death",
    )


CORPUS = {
    "simple-gene-expression": simple_gene_expression,
    "seir": seir,
    "three-stage-gene": three_stage_gene,
    "seiqr": seiqr,
    "birth-death": birth_death,
}
