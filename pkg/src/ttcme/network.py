"""Reaction networks on truncated state spaces.

States are counts ``x_k`` in ``0 .. n_k - 1`` per species; array index and
count coincide.  Mass-action propensities are the product of per-species
binomial factors times a rate constant; a rate may instead name a parameter
slot for the parameter-dependent machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tt import TtTensor, tt_rank1


@dataclass(frozen=True)
class Reaction:
    """One reaction: reactant counts q, product counts s, and a rate.

    `rate` is a float (fixed rate constant) or a string naming a parameter
    slot.  `factors` optionally overrides the mass-action per-species
    propensity factors with separable callables f_k(x); propensities that do
    not factorize over species are not representable.
    """

    reactants: tuple[int, ...]
    products: tuple[int, ...]
    rate: float | str
    factors: tuple[Callable | None, ...] | None = None

    def __post_init__(self):
        q = tuple(int(v) for v in self.reactants)
        s = tuple(int(v) for v in self.products)
        object.__setattr__(self, "reactants", q)
        object.__setattr__(self, "products", s)
        if len(q) != len(s):
            raise ValueError("reactant/product vectors differ in length")
        if any(v < 0 for v in q + s):
            raise ValueError("stoichiometric counts must be nonnegative")
        if not isinstance(self.rate, str):
            object.__setattr__(self, "rate", float(self.rate))
        if self.factors is not None:
            f = tuple(self.factors)
            if len(f) != len(q) or not all(g is None or callable(g) for g in f):
                raise ValueError("factors must be one callable (or None) per "
                                 "species; non-separable propensities are "
                                 "not supported")
            object.__setattr__(self, "factors", f)

    @property
    def change(self) -> tuple[int, ...]:
        return tuple(s - q for q, s in zip(self.reactants, self.products))

    @property
    def is_parametric(self) -> bool:
        return isinstance(self.rate, str)


def mass_action_factor(x, q: int):
    """x! / (q! (x-q)!) elementwise, zero below q; stable for n up to 2**10."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    out[x >= q] = 1.0
    for i in range(1, q + 1):
        out *= (x - (i - 1)) / i
    out[x < q] = 0.0
    return out


@dataclass(frozen=True)
class ReactionNetwork:
    """Species, reactions, truncation box, and the initial distribution."""

    species: tuple[str, ...]
    reactions: tuple[Reaction, ...]
    truncation: tuple[int, ...]
    initial_state: tuple[int, ...] | None = None
    initial_poisson: tuple[float, ...] | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "species", tuple(self.species))
        object.__setattr__(self, "reactions", tuple(self.reactions))
        object.__setattr__(self, "truncation",
                           tuple(int(n) for n in self.truncation))
        d = len(self.species)
        if d < 1:
            raise ValueError("need at least one species")
        if len(set(self.species)) != d:
            raise ValueError("duplicate species names")
        if len(self.truncation) != d or any(n < 1 for n in self.truncation):
            raise ValueError("truncation must give a size >= 1 per species")
        for r in self.reactions:
            if len(r.reactants) != d:
                raise ValueError("reaction arity does not match species count")
        if self.initial_state is not None:
            x0 = tuple(int(v) for v in self.initial_state)
            object.__setattr__(self, "initial_state", x0)
            if len(x0) != d or any(not 0 <= v < n
                                   for v, n in zip(x0, self.truncation)):
                raise ValueError("initial state outside the truncation box")
        if self.initial_poisson is not None:
            lam = tuple(float(v) for v in self.initial_poisson)
            object.__setattr__(self, "initial_poisson", lam)
            if len(lam) != d or any(v < 0 for v in lam):
                raise ValueError("Poisson means must be nonnegative")

    @property
    def dim(self) -> int:
        return len(self.species)

    @property
    def n_states(self) -> int:
        return int(np.prod(self.truncation, dtype=np.int64))

    @property
    def param_names(self) -> tuple[str, ...]:
        seen: list[str] = []
        for r in self.reactions:
            if r.is_parametric and r.rate not in seen:
                seen.append(r.rate)
        return tuple(seen)

    def species_index(self, name: str) -> int:
        return self.species.index(name)

    def factor_values(self, m: int, k: int, n: int | None = None):
        """Per-species propensity factor of reaction m over counts 0..n-1."""
        r = self.reactions[m]
        n = self.truncation[k] if n is None else n
        x = np.arange(n)
        if r.factors is not None and r.factors[k] is not None:
            vals = np.asarray([float(r.factors[k](v)) for v in x])
        else:
            vals = mass_action_factor(x, r.reactants[k])
        return vals

    def propensity(self, m: int, x) -> float:
        """Propensity of reaction m at an arbitrary (untruncated) state."""
        r = self.reactions[m]
        if r.is_parametric:
            raise ValueError(f"reaction {m} has unresolved parameter "
                             f"{r.rate!r}")
        out = r.rate
        for k, xk in enumerate(x):
            if r.factors is not None and r.factors[k] is not None:
                out *= float(r.factors[k](xk))
            else:
                out *= float(mass_action_factor(np.asarray([xk]),
                                                r.reactants[k])[0])
        return out

    def propensities(self, x) -> np.ndarray:
        return np.array([self.propensity(m, x)
                         for m in range(len(self.reactions))])

    def initial_pmf(self) -> TtTensor:
        """Initial distribution as a rank-1 TT over the truncation box."""
        if self.initial_state is not None:
            vecs = []
            for xk, n in zip(self.initial_state, self.truncation):
                v = np.zeros(n)
                v[xk] = 1.0
                vecs.append(v)
            return tt_rank1(vecs)
        if self.initial_poisson is not None:
            from scipy.stats import poisson

            vecs = []
            for lam, n in zip(self.initial_poisson, self.truncation):
                v = poisson.pmf(np.arange(n), lam)
                vecs.append(v / v.sum())
            return tt_rank1(vecs)
        raise ValueError("network has no initial distribution")

    def with_truncation(self, truncation) -> "ReactionNetwork":
        x0 = self.initial_state
        if x0 is not None:
            x0 = tuple(min(v, n - 1) for v, n in zip(x0, truncation))
        return ReactionNetwork(self.species, self.reactions,
                               tuple(truncation), x0, self.initial_poisson,
                               self.name)

    def with_rates(self, rates: dict[str, float]) -> "ReactionNetwork":
        """Substitute numeric values for named parameter slots."""
        new = []
        for r in self.reactions:
            if r.is_parametric:
                if r.rate not in rates:
                    raise KeyError(f"no value supplied for parameter "
                                   f"{r.rate!r}")
                new.append(Reaction(r.reactants, r.products,
                                    rates[r.rate], r.factors))
            else:
                new.append(r)
        return ReactionNetwork(self.species, tuple(new), self.truncation,
                               self.initial_state, self.initial_poisson,
                               self.name)


@dataclass(frozen=True)
class ParameterSpace:
    """Truncated box of rate parameters with per-dimension basis sizes."""

    names: tuple[str, ...]
    bounds: tuple[tuple[float, float], ...]
    basis_dims: tuple[int, ...]
    degree: int = 2

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "bounds",
                           tuple((float(a), float(b)) for a, b in self.bounds))
        object.__setattr__(self, "basis_dims",
                           tuple(int(v) for v in self.basis_dims))
        if not (len(self.names) == len(self.bounds) == len(self.basis_dims)):
            raise ValueError("names, bounds and basis_dims lengths differ")
        if any(a >= b for a, b in self.bounds):
            raise ValueError("each bound must satisfy min < max")
        if any(l < 2 for l in self.basis_dims):
            raise ValueError("basis dimensions must be >= 2")
        if self.degree < 0:
            raise ValueError("degree must be >= 0")

    @property
    def dim(self) -> int:
        return len(self.names)

    def bases(self):
        from .bspline import BsplineBasis

        return [BsplineBasis(self.degree, a, b, l)
                for (a, b), l in zip(self.bounds, self.basis_dims)]

    def grid(self):
        from .bspline import QuadratureGrid

        return QuadratureGrid(self.bases())
