"""Symmetric collective basis with perfect Rydberg blockade.

States are occupation tuples ``(alpha, beta, gamma, eta)`` counting atoms in
``|g>, |q>, |e>, |r>`` with ``eta <= 1``.  The basis is ordered
lexicographically in ``(eta, gamma, beta, alpha)``, so ``|g^N>`` is always
index 0.

A product-space construction for small ``N`` (:func:`brute_force_oracle`)
builds the same Hamiltonian from single-atom operators and serves as the
reference for the collective matrix elements.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DomainError, ResourceError

LEVELS = ("g", "q", "e", "r")
_LEVEL_INDEX = {name: i for i, name in enumerate(LEVELS)}

DEFAULT_ATOM_CAP = 80
ORACLE_ATOM_CAP = 4


class SymmetricState(NamedTuple):
    alpha: int
    beta: int
    gamma: int
    eta: int

    @property
    def atom_count(self):
        return self.alpha + self.beta + self.gamma + self.eta

    @property
    def excitations(self):
        """Atoms outside ``|g>``."""
        return self.beta + self.gamma + self.eta


@dataclass(frozen=True)
class CollectiveBasis:
    """Ordered symmetric states for ``atom_count`` atoms.

    ``max_excitations`` (if set) drops states with more than that many atoms
    outside ``|g>``; ``None`` keeps the full ``(N+1)**2`` basis.
    """

    atom_count: int
    states: tuple
    max_excitations: int | None = None
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.states)})

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __contains__(self, state):
        return state in self._index

    def index(self, state):
        try:
            return self._index[state]
        except KeyError:
            raise DomainError(f"{state} is not in the basis") from None

    @property
    def is_truncated(self):
        return self.max_excitations is not None and self.max_excitations < self.atom_count

    def occupation(self, level):
        """Occupation of ``level`` for every basis state, as a float array."""
        k = _level(level)
        return np.array([s[k] for s in self.states], dtype=float)

    def ground_index(self):
        return 0

    def rows(self):
        """``(index, alpha, beta, gamma, eta)`` rows for inspection dumps."""
        return [(i, *s) for i, s in enumerate(self.states)]


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense matrix of the collective operator ``sum_j |target><source|_j``."""

    target: str
    source: str
    matrix: np.ndarray

    @property
    def label(self):
        return f"sigma_{self.target}{self.source}"

    def dagger(self):
        return OperatorMatrix(self.source, self.target, self.matrix.conj().T)


def _level(name):
    try:
        return _LEVEL_INDEX[name]
    except (KeyError, TypeError):
        raise DomainError(f"unknown level {name!r}; expected one of {LEVELS}") from None


def basis_size(n):
    """Size of the untruncated blockaded symmetric basis, ``(n + 1)**2``."""
    return (n + 1) ** 2


def enumerate_basis(n, max_excitations=None, cap=DEFAULT_ATOM_CAP):
    """Enumerate symmetric states of ``n`` atoms with at most one Rydberg atom."""
    if int(n) != n or n < 0:
        raise DomainError(f"atom number must be a non-negative integer, got {n}")
    n = int(n)
    if n > cap:
        raise ResourceError(f"N = {n} exceeds the configured basis cap of {cap} atoms")
    if max_excitations is not None and max_excitations < 0:
        raise DomainError("max_excitations must be >= 0")
    states = []
    for eta in (0, 1):
        for gamma in range(n + 1):
            for beta in range(n + 1):
                alpha = n - eta - gamma - beta
                if alpha < 0:
                    break
                if max_excitations is not None and beta + gamma + eta > max_excitations:
                    continue
                states.append(SymmetricState(alpha, beta, gamma, eta))
    # the loops already produce (eta, gamma, beta) order; alpha is implied
    return CollectiveBasis(n, tuple(states), max_excitations)


def collective_operator(basis, mu, nu):
    """Matrix of ``sigma_mu_nu`` over ``basis``.

    Moving one atom from ``nu`` to ``mu`` carries amplitude
    ``sqrt(n_nu (n_mu + 1))``.  Targets outside the basis (a second Rydberg
    excitation, or beyond the excitation truncation) are annihilated.
    """
    src, dst = _level(nu), _level(mu)
    dim = len(basis)
    out = np.zeros((dim, dim), dtype=complex)
    for i, state in enumerate(basis.states):
        if src == dst:
            out[i, i] = state[src]
            continue
        if state[src] == 0:
            continue
        occ = list(state)
        amp = math.sqrt(occ[src] * (occ[dst] + 1))
        occ[src] -= 1
        occ[dst] += 1
        target = SymmetricState(*occ)
        if target in basis:
            out[basis.index(target), i] = amp
    return OperatorMatrix(mu, nu, out)


def write_basis_csv(basis, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "alpha", "beta", "gamma", "eta"])
        writer.writerows(basis.rows())


def write_operator_csv(op, path):
    """Non-zero entries of an operator as ``(row, col, re, im)``."""
    rows, cols = np.nonzero(op.matrix)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "col", "re", "im"])
        for r, c in zip(rows, cols):
            z = op.matrix[r, c]
            writer.writerow([r, c, f"{z.real:.17g}", f"{z.imag:.17g}"])


@dataclass(frozen=True)
class ProductSpaceOracle:
    """Blockade-projected product-space Hamiltonian and symmetric isometry.

    ``hamiltonian`` acts on the product states in ``configurations`` (tuples
    of single-atom level indices with at most one ``r``); the columns of
    ``isometry`` are the normalized symmetric states of the matching
    :class:`CollectiveBasis`.
    """

    basis: CollectiveBasis
    configurations: tuple
    hamiltonian: np.ndarray
    isometry: np.ndarray

    def excited_population_diag(self):
        e = _LEVEL_INDEX["e"]
        return np.array([sum(1 for x in c if x == e) for c in self.configurations], float)

    def restricted(self):
        """``W^dagger H W``, the product Hamiltonian seen in the symmetric basis."""
        w = self.isometry
        return w.conj().T @ self.hamiltonian @ w


def _single_atom_hamiltonian(omega_p, omega_c, omega_s, probe_detuning, delta_s, gamma_e, gamma_r):
    g, q, e, r = (_LEVEL_INDEX[x] for x in LEVELS)
    h = np.zeros((4, 4), dtype=complex)
    h[q, q] = -probe_detuning
    h[e, e] = -probe_detuning - 0.5j * gamma_e
    h[r, r] = -delta_s - 0.5j * gamma_r
    h[e, g] = h[g, e] = -0.5 * omega_p
    h[e, q] = h[q, e] = -0.5 * omega_c
    h[r, g] = h[g, r] = -0.5 * omega_s
    return h


def brute_force_oracle(n, params, delta_l=0.0):
    """Product-space construction of the rotating-frame Hamiltonian.

    The Hamiltonian is summed from single-atom terms over the full ``4**n``
    product space, then restricted to configurations with at most one
    Rydberg atom.  Only intended for ``n <= 4``.
    """
    if n < 1:
        raise DomainError("oracle needs at least one atom")
    if n > ORACLE_ATOM_CAP:
        raise ResourceError(f"product-space oracle is limited to N <= {ORACLE_ATOM_CAP}")
    h1 = _single_atom_hamiltonian(
        params.omega_p,
        params.omega_c,
        params.omega_s,
        params.delta_p + delta_l,
        params.delta_s,
        params.gamma_e,
        params.gamma_r,
    )
    eye = np.eye(4)
    full = np.zeros((4**n, 4**n), dtype=complex)
    for j in range(n):
        term = np.array([[1.0]])
        for k in range(n):
            term = np.kron(term, h1 if k == j else eye)
        full += term

    r = _LEVEL_INDEX["r"]
    configs = [c for c in itertools.product(range(4), repeat=n) if c.count(r) <= 1]
    # kron ordering: atom 0 is the most significant base-4 digit
    flat = [sum(x * 4 ** (n - 1 - k) for k, x in enumerate(c)) for c in configs]
    h = full[np.ix_(flat, flat)]

    basis = enumerate_basis(n)
    pos = {c: i for i, c in enumerate(configs)}
    w = np.zeros((len(configs), len(basis)), dtype=float)
    for col, state in enumerate(basis.states):
        members = [c for c in configs if tuple(c.count(k) for k in range(4)) == tuple(state)]
        for c in members:
            w[pos[c], col] = 1.0 / math.sqrt(len(members))
    return ProductSpaceOracle(basis, tuple(configs), h, w.astype(complex))
