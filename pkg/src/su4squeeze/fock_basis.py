"""Fixed-N occupation basis for the four Schwinger modes.

Mode order is ``a = |e,+1>``, ``b = |g,-1>``, ``c = |e,-1>``, ``d = |g,+1>``;
a state is the occupation quadruple ``(alpha, beta, gamma, delta)``.
"""
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = ["FockState", "FockBasis", "dimension", "enumerate_basis", "index_of", "dump_basis"]


class FockState(NamedTuple):
    alpha: int
    beta: int
    gamma: int
    delta: int

    @property
    def n_atoms(self):
        return self.alpha + self.beta + self.gamma + self.delta


def dimension(n_atoms):
    """Number of ways to put ``n_atoms`` bosons into four modes."""
    if n_atoms < 0:
        raise ValueError("n_atoms must be non-negative")
    return (n_atoms + 1) * (n_atoms + 2) * (n_atoms + 3) // 6


@dataclass(frozen=True)
class FockBasis:
    """Canonically ordered basis of all quadruples summing to ``n_atoms``.

    States are ordered lexicographically decreasing in ``(alpha, beta, gamma)``;
    ``delta`` is implied. ``occupations`` is the same list as an ``(dim, 4)``
    integer array, which is what operator builders vectorize over.
    """

    n_atoms: int
    states: tuple
    index_map: dict = field(repr=False, compare=False)
    occupations: np.ndarray = field(repr=False, compare=False)

    def __len__(self):
        return len(self.states)

    @property
    def dim(self):
        return len(self.states)

    def index(self, state):
        return index_of(self, state)

    def __iter__(self):
        return iter(self.states)


def enumerate_basis(n_atoms):
    if int(n_atoms) != n_atoms or n_atoms < 1:
        raise ValueError(f"need a positive integer atom number, got {n_atoms!r}")
    n_atoms = int(n_atoms)
    states = []
    for alpha in range(n_atoms, -1, -1):
        for beta in range(n_atoms - alpha, -1, -1):
            for gamma in range(n_atoms - alpha - beta, -1, -1):
                states.append(FockState(alpha, beta, gamma, n_atoms - alpha - beta - gamma))
    index_map = {s: i for i, s in enumerate(states)}
    occ = np.array(states, dtype=np.int64).reshape(-1, 4)
    occ.setflags(write=False)
    return FockBasis(n_atoms, tuple(states), index_map, occ)


def index_of(basis, state):
    """Position of ``state`` in ``basis``; raises ``KeyError`` if absent."""
    key = FockState(*state)
    try:
        return basis.index_map[key]
    except KeyError:
        raise KeyError(f"state {tuple(key)} not in basis with N={basis.n_atoms}") from None


def dump_basis(basis):
    """CSV lines ``index,alpha,beta,gamma,delta``, one per state."""
    return [f"{i},{s.alpha},{s.beta},{s.gamma},{s.delta}" for i, s in enumerate(basis.states)]
