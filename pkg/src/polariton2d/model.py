"""Ion-chain geometry, phonon network, and the chain Hamiltonians.

Unit convention (binding for the whole package): every user-facing
frequency parameter is a linear frequency in kHz. Internally all
Hamiltonian and Liouvillian coefficients are angular, in rad/ms, i.e.
multiplied by 2*pi. Spectral axes downstream are therefore angular kHz
(rad/ms). Time is always in ms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import Basis, BasisSpec, build_basis, full_local_operator

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ModelParams:
    """Physical inputs, all linear kHz unless noted.

    nu_x is the radial trap frequency; it does not enter the rotating
    frame Hamiltonian and is kept for validity warnings and for the lab
    frame builder. hopping_scale is the product of nu_x with the
    dimensionless trap anisotropy, the single scale multiplying every
    Coulomb hopping. omega_opt, eta and rabi document the drive and are
    not used by the rotating-frame dynamics (pulse areas are normalized
    downstream).
    """

    nu_x: float = 1000.0
    hopping_scale: float = 5.0
    delta: float = 50.0
    g: float = 5.0
    gamma: float = 0.5
    omega_opt: float = 0.0
    eta: tuple[float, ...] | None = None
    rabi: float = 1.0

    def __post_init__(self):
        if self.nu_x <= 0:
            raise ValueError(f"nu_x must be positive, got {self.nu_x}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")

    def validity_warnings(self) -> list[str]:
        """Advisory checks that the rotating-frame reduction is trustworthy."""
        notes = []
        for name in ("hopping_scale", "delta", "g"):
            value = abs(getattr(self, name))
            if value > 0.1 * self.nu_x:
                notes.append(
                    f"{name}={getattr(self, name)} kHz is not small against "
                    f"nu_x={self.nu_x} kHz; rotating-frame model may be inaccurate"
                )
        return notes


@dataclass(frozen=True)
class ChainGeometry:
    n_ions: int
    positions: tuple[float, ...]  # dimensionless, in units of the chain length scale


@dataclass(frozen=True)
class PhononNetwork:
    """Coulomb couplings and normal modes, all angular (rad/ms).

    local_freqs obeys local_freqs[k] = -sum of row k of hoppings exactly.
    mode_vectors columns are the orthonormal mode coefficients c_kn with
    modes sorted by ascending frequency; column signs are fixed so that
    the first nonvanishing component of each mode is positive, which for
    two ions makes mode 1 the breathing combination (a_1 - a_2)/sqrt(2).
    """

    local_freqs: np.ndarray
    hoppings: np.ndarray
    mode_freqs: np.ndarray
    mode_vectors: np.ndarray


def equilibrium_positions(n_ions: int, max_iter: int = 200) -> ChainGeometry:
    """Equilibrium of N ions in a harmonic line trap with Coulomb repulsion.

    Dimensionless force balance: u_m = sum_{n<m} (u_m-u_n)^-2
    - sum_{n>m} (u_n-u_m)^-2. Solved by damped Newton iteration from an
    evenly spaced seed; the solution is unique up to reflection.
    """
    if n_ions < 2:
        raise ValueError(f"need at least two ions for a chain, got {n_ions}")
    u = np.linspace(-n_ions / 2.0, n_ions / 2.0, n_ions) * 0.6

    def residual(u):
        f = np.array(u, dtype=float)
        for m in range(n_ions):
            for n in range(n_ions):
                if n == m:
                    continue
                f[m] -= np.sign(u[m] - u[n]) / (u[m] - u[n]) ** 2
        return f

    def jacobian(u):
        jac = np.eye(n_ions)
        for m in range(n_ions):
            for n in range(n_ions):
                if n == m:
                    continue
                off = 2.0 * np.sign(u[m] - u[n]) / (u[m] - u[n]) ** 3
                jac[m, m] -= -off
                jac[m, n] -= off
        return jac

    f = residual(u)
    for _ in range(max_iter):
        if np.max(np.abs(f)) < 1e-12:
            break
        step = np.linalg.solve(jacobian(u), f)
        damp = 1.0
        while damp > 1e-6:
            trial = u - damp * step
            if np.all(np.diff(trial) > 0):
                f_trial = residual(trial)
                if np.linalg.norm(f_trial) < np.linalg.norm(f):
                    u, f = trial, f_trial
                    break
            damp /= 2.0
        else:
            raise RuntimeError("equilibrium position iteration stalled")
    else:
        raise RuntimeError(
            f"equilibrium positions did not converge in {max_iter} iterations "
            f"(residual {np.max(np.abs(f)):.2e})"
        )
    u = (u - u[::-1]) / 2.0  # exact reflection symmetry
    return ChainGeometry(n_ions=n_ions, positions=tuple(u))


def phonon_network(geometry: ChainGeometry, params: ModelParams) -> PhononNetwork:
    """Inverse-cube Coulomb hoppings and their normal-mode decomposition."""
    u = np.asarray(geometry.positions)
    n = geometry.n_ions
    scale = TWO_PI * params.hopping_scale
    hop = np.zeros((n, n))
    for k in range(n):
        for l in range(n):
            if k == l:
                continue
            sep = abs(u[k] - u[l])
            if sep < 1e-12:
                raise ValueError(f"coincident ion positions at sites {k + 1}, {l + 1}")
            hop[k, l] = scale / (2.0 * sep**3)
    local = -hop.sum(axis=1)
    freqs, vecs = np.linalg.eigh(np.diag(local) + hop)
    for m in range(n):
        first = np.nonzero(np.abs(vecs[:, m]) > 1e-12)[0][0]
        if vecs[first, m] < 0:
            vecs[:, m] = -vecs[:, m]
    return PhononNetwork(
        local_freqs=local, hoppings=hop, mode_freqs=freqs, mode_vectors=vecs
    )


def _hamiltonian_pieces(network: PhononNetwork, spec: BasisSpec):
    n = spec.n_ions
    lower = [full_local_operator("annihilate", k, spec) for k in range(1, n + 1)]
    raise_ = [full_local_operator("create", k, spec) for k in range(1, n + 1)]
    sp = [full_local_operator("sigma_plus", k, spec) for k in range(1, n + 1)]
    sm = [full_local_operator("sigma_minus", k, spec) for k in range(1, n + 1)]
    phonon = sum(
        network.local_freqs[k] * raise_[k] @ lower[k] for k in range(n)
    )
    for k in range(n):
        for l in range(k + 1, n):
            phonon = phonon + network.hoppings[k, l] * (
                raise_[k] @ lower[l] + raise_[l] @ lower[k]
            )
    spin = sum(sp[k] @ sm[k] for k in range(n))
    coupling = sum(sp[k] @ lower[k] + sm[k] @ raise_[k] for k in range(n))
    return phonon, spin, coupling


def build_polariton_hamiltonian(
    network: PhononNetwork, params: ModelParams, spec: BasisSpec
) -> np.ndarray:
    """Rotating-frame chain Hamiltonian, angular rad/ms.

    H = sum_k w_k a_k^dag a_k + sum_{k<l} t_kl (a_k^dag a_l + h.c.)
      + Delta sum_k sigma_k^+ sigma_k^-
      + g sum_k (sigma_k^+ a_k + sigma_k^- a_k^dag)

    Every term conserves the total excitation number, so the sector block
    is exact.
    """
    if network.local_freqs.shape[0] != spec.n_ions:
        raise ValueError(
            f"network has {network.local_freqs.shape[0]} sites, spec has {spec.n_ions}"
        )
    phonon, spin, coupling = _hamiltonian_pieces(network, spec)
    h_full = phonon + TWO_PI * params.delta * spin + TWO_PI * params.g * coupling
    return build_basis(spec).project(h_full)


def build_motional_hamiltonian(
    network: PhononNetwork, params: ModelParams, spec: BasisSpec
) -> np.ndarray:
    """Lab-frame chain Hamiltonian: absolute phonon frequencies, bare spin.

    Phonons sit at nu_x + w_k with the same hoppings; spins at the bare
    optical splitting. No spin-phonon coupling term (it only appears in
    the driven, rotating frame).
    """
    if network.local_freqs.shape[0] != spec.n_ions:
        raise ValueError(
            f"network has {network.local_freqs.shape[0]} sites, spec has {spec.n_ions}"
        )
    phonon, spin, _ = _hamiltonian_pieces(network, spec)
    n = spec.n_ions
    count = sum(
        full_local_operator("create", k, spec) @ full_local_operator("annihilate", k, spec)
        for k in range(1, n + 1)
    )
    h_full = phonon + TWO_PI * params.nu_x * count + TWO_PI * params.omega_opt * spin
    return build_basis(spec).project(h_full)


def spin_excitation_operator(spec: BasisSpec, basis: Basis | None = None) -> np.ndarray:
    """Total spin excitation count, projected like number_operator."""
    if basis is None:
        basis = build_basis(spec)
    n = spec.n_ions
    total = sum(
        full_local_operator("sigma_plus", k, spec) @ full_local_operator("sigma_minus", k, spec)
        for k in range(1, n + 1)
    )
    return basis.project(total)


def eigensweep(
    params: ModelParams, spec: BasisSpec, delta_over_g_range
) -> list[tuple[float, int, float, int, float]]:
    """Eigenvalue branches against the detuning-to-coupling ratio.

    Returns rows (delta_over_g, eig_index, energy_angular_khz, spin_label,
    label_confidence). The label is the spin-excitation expectation of the
    eigenvector rounded to the nearest integer; confidence 1 - 2*|dev|
    drops below 0.5 exactly when the fractional part enters (0.25, 0.75),
    flagging strongly polaritonic mixtures. Degenerate eigenvalues are
    ordered by label so sweep tables are stable.
    """
    if spec.sector is None:
        raise ValueError("eigensweep needs a sector-restricted basis")
    geometry = equilibrium_positions(spec.n_ions) if spec.n_ions >= 2 else None
    if geometry is not None:
        network = phonon_network(geometry, params)
    else:
        # single ion: no Coulomb partners, trivial network
        network = PhononNetwork(
            local_freqs=np.zeros(1),
            hoppings=np.zeros((1, 1)),
            mode_freqs=np.zeros(1),
            mode_vectors=np.eye(1),
        )
    basis = build_basis(spec)
    spin_count = spin_excitation_operator(spec, basis)
    g = params.g
    if g == 0:
        raise ValueError("delta/g sweep undefined at g = 0")
    rows = []
    for ratio in delta_over_g_range:
        swept = ModelParams(
            nu_x=params.nu_x,
            hopping_scale=params.hopping_scale,
            delta=ratio * g,
            g=g,
            gamma=params.gamma,
            omega_opt=params.omega_opt,
            eta=params.eta,
            rabi=params.rabi,
        )
        h = build_polariton_hamiltonian(network, swept, spec)
        energies, vectors = np.linalg.eigh(h)
        expect = np.real(np.einsum("ia,ij,ja->a", vectors.conj(), spin_count, vectors))
        order = np.lexsort((np.rint(expect), energies))
        for out_index, a in enumerate(order):
            label = int(np.rint(expect[a]))
            confidence = float(max(0.0, 1.0 - 2.0 * abs(expect[a] - label)))
            rows.append((float(ratio), out_index, float(energies[a]), label, confidence))
    return rows
