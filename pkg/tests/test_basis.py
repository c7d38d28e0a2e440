import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from subpoisson.basis import (
    LEVELS,
    SymmetricState,
    basis_size,
    brute_force_oracle,
    collective_operator,
    enumerate_basis,
    write_basis_csv,
    write_operator_csv,
)
from subpoisson.dynamics import build_hamiltonian
from subpoisson.errors import DomainError, ResourceError


def count_by_brute_force(n):
    """Occupation tuples with at most one r, from all 4**n configurations."""
    seen = set()
    for config in itertools.product(range(4), repeat=n):
        occ = tuple(config.count(k) for k in range(4))
        if occ[3] <= 1:
            seen.add(occ)
    return len(seen)


class TestEnumeration:
    def test_empty(self):
        b = enumerate_basis(0)
        assert b.states == (SymmetricState(0, 0, 0, 0),)

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 8])
    def test_size_matches_exhaustive_count(self, n):
        assert len(enumerate_basis(n)) == count_by_brute_force(n) == basis_size(n)

    def test_eight_atoms(self):
        assert len(enumerate_basis(8)) == 81

    def test_sizes_up_to_forty(self):
        for n in range(41):
            assert len(enumerate_basis(n)) == (n + 1) ** 2

    def test_ground_state_first_and_order(self):
        b = enumerate_basis(5)
        assert b.states[0] == SymmetricState(5, 0, 0, 0)
        keys = [(s.eta, s.gamma, s.beta, s.alpha) for s in b.states]
        assert keys == sorted(keys)

    def test_invariants(self):
        for s in enumerate_basis(6):
            assert s.atom_count == 6
            assert s.eta in (0, 1)

    def test_cap(self):
        with pytest.raises(ResourceError, match="cap"):
            enumerate_basis(81)
        assert len(enumerate_basis(3, cap=3)) == 16

    def test_rejects_bad_n(self):
        with pytest.raises(DomainError):
            enumerate_basis(-1)
        with pytest.raises(DomainError):
            enumerate_basis(2.5)

    def test_truncation(self):
        b = enumerate_basis(10, max_excitations=2)
        assert b.is_truncated
        assert all(s.excitations <= 2 for s in b)
        # eta=0: 6 states with beta+gamma <= 2; eta=1: 3 with beta+gamma <= 1
        assert len(b) == 9
        assert not enumerate_basis(2, max_excitations=5).is_truncated

    def test_index_lookup(self):
        b = enumerate_basis(3)
        s = SymmetricState(1, 1, 0, 1)
        assert b.states[b.index(s)] == s
        with pytest.raises(DomainError):
            b.index(SymmetricState(1, 0, 0, 2))


class TestOperators:
    def test_collective_enhancement(self):
        for n in (1, 4, 9):
            b = enumerate_basis(n)
            op = collective_operator(b, "e", "g").matrix
            target = b.index(SymmetricState(n - 1, 0, 1, 0))
            assert op[target, 0] == pytest.approx(math.sqrt(n))

    def test_number_operator(self):
        b = enumerate_basis(4)
        op = collective_operator(b, "e", "e").matrix
        assert np.allclose(op, np.diag([s.gamma for s in b.states]))

    def test_blockade_annihilates_second_rydberg(self):
        b = enumerate_basis(3)
        op = collective_operator(b, "r", "g").matrix
        for col, s in enumerate(b.states):
            if s.eta == 1:
                assert not op[:, col].any()

    def test_unknown_level(self):
        with pytest.raises(DomainError):
            collective_operator(enumerate_basis(2), "x", "g")

    @pytest.mark.parametrize("n", [1, 2, 3, 5])
    def test_adjoint_pairs(self, n):
        b = enumerate_basis(n)
        for mu, nu in itertools.permutations(LEVELS, 2):
            a = collective_operator(b, mu, nu)
            c = collective_operator(b, nu, mu)
            assert np.array_equal(a.matrix, c.matrix.conj().T)
            assert np.array_equal(a.dagger().matrix, c.matrix)

    @given(st.integers(min_value=1, max_value=6))
    def test_commutator(self, n):
        b = enumerate_basis(n)
        eg = collective_operator(b, "e", "g").matrix
        ge = collective_operator(b, "g", "e").matrix
        comm = eg @ ge - ge @ eg
        expected = np.diag([s.gamma - s.alpha for s in b.states])
        assert np.allclose(comm, expected, atol=1e-12)

    def test_rg_matches_product_space_for_two_atoms(self, baseline_params):
        oracle = brute_force_oracle(2, baseline_params)
        w = oracle.isometry
        # the r<-g coupling is the only term proportional to omega_s
        r = 3
        g = 0
        single = np.zeros((4, 4))
        single[r, g] = 1.0
        full = np.kron(single, np.eye(4)) + np.kron(np.eye(4), single)
        flat = [a * 4 + b for a, b in oracle.configurations]
        projected = full[np.ix_(flat, flat)]
        sym = collective_operator(oracle.basis, "r", "g").matrix
        assert np.allclose(w.conj().T @ projected @ w, sym, atol=1e-14)


class TestOracle:
    def test_single_atom_is_identity_map(self, baseline_params):
        oracle = brute_force_oracle(1, baseline_params)
        assert oracle.isometry.shape == (4, 4)
        assert np.allclose(oracle.isometry, np.eye(4))

    def test_isometry_columns_orthonormal(self, baseline_params):
        w = brute_force_oracle(3, baseline_params).isometry
        assert np.allclose(w.conj().T @ w, np.eye(w.shape[1]), atol=1e-14)

    def test_two_atoms_baseline(self, baseline_params):
        # compared relative to the largest entry (~2e9 rad/s), where 1e-12 is meaningful
        oracle = brute_force_oracle(2, baseline_params)
        h = build_hamiltonian(baseline_params, 2).matrix
        scale = np.abs(h).max()
        assert np.abs(oracle.restricted() - h).max() / scale < 1e-12

    def test_three_atom_spectral_inclusion(self, baseline_params):
        oracle = brute_force_oracle(3, baseline_params, delta_l=2e4)
        sym = np.linalg.eigvals(build_hamiltonian(baseline_params, 3, delta_l=2e4).matrix)
        full = np.linalg.eigvals(oracle.hamiltonian)
        scale = np.abs(full).max()
        for lam in sym:
            assert np.abs(full - lam).min() / scale < 1e-9

    def test_cap(self, baseline_params):
        with pytest.raises(ResourceError):
            brute_force_oracle(5, baseline_params)


def test_csv_dumps(tmp_path):
    b = enumerate_basis(2)
    write_basis_csv(b, tmp_path / "basis.csv")
    lines = (tmp_path / "basis.csv").read_text().splitlines()
    assert lines[0] == "index,alpha,beta,gamma,eta"
    assert len(lines) == 1 + len(b)
    op = collective_operator(b, "e", "g")
    write_operator_csv(op, tmp_path / "op.csv")
    rows = (tmp_path / "op.csv").read_text().splitlines()[1:]
    assert len(rows) == np.count_nonzero(op.matrix)
