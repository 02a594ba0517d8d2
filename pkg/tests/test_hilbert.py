"""Basis enumeration and operator embedding."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polariton2d.hilbert import (
    Basis,
    BasisError,
    BasisSpec,
    build_basis,
    expectation,
    full_local_operator,
    local_operator,
    number_operator,
)

SECTOR2_STATES = (
    (0, 0, 0, 2),
    (0, 0, 1, 1),
    (0, 0, 2, 0),
    (0, 1, 0, 1),
    (0, 1, 1, 0),
    (1, 0, 0, 1),
    (1, 0, 1, 0),
    (1, 1, 0, 0),
)


def test_sector_two_enumeration():
    basis = build_basis(BasisSpec(n_ions=2, sector=2))
    assert basis.dim == 8
    assert basis.states == SECTOR2_STATES


def test_sector_states_are_lexicographic():
    basis = build_basis(BasisSpec(n_ions=2, sector=2))
    assert list(basis.states) == sorted(basis.states)


def test_full_dim_counts_spins_and_phonons():
    spec = BasisSpec(n_ions=2, phonon_cutoff=2)
    assert spec.full_dim == 4 * 9


def test_default_cutoff_follows_sector():
    spec = BasisSpec(n_ions=2, sector=2)
    assert spec.phonon_cutoff == 2


def test_projection_is_identity_without_sector():
    spec = BasisSpec(n_ions=2, phonon_cutoff=1)
    basis = build_basis(spec)
    m = np.arange(spec.full_dim**2, dtype=float).reshape(spec.full_dim, spec.full_dim)
    assert np.array_equal(basis.project(m), m)


def test_number_operator_diagonal_counts_excitations():
    spec = BasisSpec(n_ions=2, sector=2)
    basis = build_basis(spec)
    n = number_operator(spec, basis)
    assert np.allclose(n, 2.0 * np.eye(8), atol=1e-14)


def test_number_operator_full_space():
    spec = BasisSpec(n_ions=2, phonon_cutoff=2)
    basis = build_basis(spec)
    n = number_operator(spec, basis)
    want = [sum(s) for s in basis.states]
    assert np.allclose(np.diag(n).real, want, atol=1e-14)
    assert np.allclose(n, np.diag(np.diag(n)), atol=1e-14)


def test_annihilate_lowers_the_sector():
    spec = BasisSpec(n_ions=2, sector=2)
    a1 = local_operator("annihilate", 1, spec)
    target = build_basis(BasisSpec(n_ions=2, phonon_cutoff=2, sector=1))
    assert a1.shape == (target.dim, 8)


def test_raising_out_of_the_top_sector_is_empty():
    # spin up with cutoff 0 leaves nowhere for a new phonon to go
    spec = BasisSpec(n_ions=1, phonon_cutoff=0, sector=1)
    up = local_operator("create", 1, spec)
    assert up.shape[0] == 0


def test_sigma_z_stays_square():
    spec = BasisSpec(n_ions=2, sector=2)
    z = local_operator("sigma_z", 1, spec)
    assert z.shape == (8, 8)
    assert np.allclose(z, z.conj().T)


def test_commutation_on_a_single_site():
    spec = BasisSpec(n_ions=1, phonon_cutoff=4)
    a = full_local_operator("annihilate", 1, spec)
    adag = full_local_operator("create", 1, spec)
    comm = a @ adag - adag @ a
    # truncation corrupts only the highest occupation
    keep = [i for i, s in enumerate(build_basis(spec).states) if s[1] < 4]
    assert np.allclose(comm[np.ix_(keep, keep)], np.eye(len(keep)), atol=1e-14)


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        full_local_operator("sigma_x", 1, BasisSpec(n_ions=1, phonon_cutoff=1))


def test_site_out_of_range_rejected():
    with pytest.raises(ValueError):
        full_local_operator("annihilate", 3, BasisSpec(n_ions=2, phonon_cutoff=1))


def test_empty_sector_raises():
    with pytest.raises(BasisError):
        build_basis(BasisSpec(n_ions=1, phonon_cutoff=0, sector=2))


def test_expectation_dimension_guard():
    with pytest.raises(ValueError):
        expectation(np.eye(2), np.eye(3))


@settings(max_examples=30, deadline=None, derandomize=True)
@given(
    n_ions=st.integers(min_value=1, max_value=3),
    cutoff=st.integers(min_value=0, max_value=3),
)
def test_sectors_partition_the_full_space(n_ions, cutoff):
    spec = BasisSpec(n_ions=n_ions, phonon_cutoff=cutoff)
    total = 0
    for sector in range(n_ions + n_ions * cutoff + 1):
        try:
            total += build_basis(
                BasisSpec(n_ions=n_ions, phonon_cutoff=cutoff, sector=sector)
            ).dim
        except BasisError:
            pass
    assert total == spec.full_dim


@settings(max_examples=30, deadline=None, derandomize=True)
@given(n_ions=st.integers(min_value=1, max_value=2), cutoff=st.integers(min_value=1, max_value=3))
def test_projection_preserves_sector_blocks(n_ions, cutoff):
    # projecting a number-conserving full operator keeps its action exact
    spec = BasisSpec(n_ions=n_ions, phonon_cutoff=cutoff, sector=n_ions)
    basis = build_basis(spec)
    n_full = number_operator(
        BasisSpec(n_ions=n_ions, phonon_cutoff=cutoff),
        build_basis(BasisSpec(n_ions=n_ions, phonon_cutoff=cutoff)),
    )
    assert np.allclose(basis.project(n_full), float(n_ions) * np.eye(basis.dim), atol=1e-13)
