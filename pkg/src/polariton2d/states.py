"""The two competing filling-factor-one states and their eigenstate fidelities."""

from __future__ import annotations

import math

import numpy as np

from .hilbert import Basis, BasisSpec, BasisError, build_basis
from .model import ModelParams, PhononNetwork, build_polariton_hamiltonian


def atomic_insulator(spec: BasisSpec, basis: Basis | None = None) -> np.ndarray:
    """All spins excited, phonon vacuum: one-hot in the computational basis."""
    if spec.sector is not None and spec.sector != spec.n_ions:
        raise BasisError(
            f"the insulator state carries {spec.n_ions} excitations and cannot "
            f"live in sector {spec.sector}"
        )
    if basis is None:
        basis = build_basis(spec)
    target = (1,) * spec.n_ions + (0,) * spec.n_ions
    vec = np.zeros(basis.dim, dtype=complex)
    vec[basis.index[target]] = 1.0
    return vec


def phonon_superfluid(
    spec: BasisSpec, network: PhononNetwork, basis: Basis | None = None
) -> np.ndarray:
    """All spins down, N phonons condensed in the lowest collective mode.

    (b_1^dag)^N / sqrt(N!) acting on the vacuum, expanded over local
    occupations: the amplitude on a tuple (n_1..n_N) with sum n_k = N is
    sqrt(N!/(n_1!..n_N!)) * prod_k c_k1^{n_k}, a multinomial spread over
    the mode coefficients, normalized by mode-vector orthonormality.
    """
    n = spec.n_ions
    if spec.sector is not None and spec.sector != n:
        raise BasisError(
            f"the superfluid state carries {n} excitations and cannot "
            f"live in sector {spec.sector}"
        )
    if spec.phonon_cutoff < n:
        raise BasisError(
            f"phonon_cutoff={spec.phonon_cutoff} cannot hold the {n}-phonon "
            f"condensate; need at least {n}"
        )
    if basis is None:
        basis = build_basis(spec)
    c1 = network.mode_vectors[:, 0]
    vec = np.zeros(basis.dim, dtype=complex)
    spins = (0,) * n
    for i, state in enumerate(basis.states):
        if state[:n] != spins:
            continue
        occ = state[n:]
        if sum(occ) != n:
            continue
        amp = math.sqrt(
            math.factorial(n) / math.prod(math.factorial(k) for k in occ)
        )
        for site, k in enumerate(occ):
            amp *= c1[site] ** k
        vec[i] = amp
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        raise BasisError("superfluid state has no support in this basis")
    return vec / norm


def phase_fidelities(
    params: ModelParams, spec: BasisSpec, network: PhononNetwork
) -> tuple[float, float]:
    """Overlap of each phase state with its extreme eigenstate.

    For positive detuning the insulator tracks the top of the sector
    spectrum and the superfluid the bottom; negative detuning swaps the
    ends. Returns (f_atI, f_phSF) as squared overlaps.
    """
    if spec.sector != spec.n_ions:
        raise BasisError("fidelities are defined in the filling-one sector")
    basis = build_basis(spec)
    h = build_polariton_hamiltonian(network, params, spec)
    _, vectors = np.linalg.eigh(h)
    ins = atomic_insulator(spec, basis)
    sf = phonon_superfluid(spec, network, basis)
    top, bottom = vectors[:, -1], vectors[:, 0]
    if params.delta >= 0:
        f_ins = abs(np.vdot(top, ins)) ** 2
        f_sf = abs(np.vdot(bottom, sf)) ** 2
    else:
        f_ins = abs(np.vdot(bottom, ins)) ** 2
        f_sf = abs(np.vdot(top, sf)) ** 2
    return float(f_ins), float(f_sf)
