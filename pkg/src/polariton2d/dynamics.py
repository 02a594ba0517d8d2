"""Dissipative propagation and the pathway superoperators.

Density matrices are vectorized row-major, so a sandwich A rho B turns
into (A kron B^T) vec(rho). The Liouvillian is built dense; at the sector
sizes this package targets (dimension 8, superoperator 64) a matrix
exponential is exact and cheap, and an adaptive integrator takes over
automatically for larger problems.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.integrate import solve_ivp

from .hilbert import Basis, BasisSpec, build_basis, full_local_operator
from .model import PhononNetwork

# Dense exponential is exact and still fast up to this superoperator size.
EXPM_DIM_LIMIT = 128

TRACE_TOL = 1e-9
HERMITICITY_TOL = 1e-9
EIGENVALUE_FLOOR = -1e-9


class ToleranceError(RuntimeError):
    """A propagated state violated a physicality threshold."""


@dataclass
class HealthLog:
    """Worst physicality drifts seen across a batch of propagations."""

    trace_drift: float = 0.0
    hermiticity_drift: float = 0.0
    min_eigenvalue: float = 0.0
    checks: int = 0

    def record(self, trace_drift: float, herm_drift: float, min_eig: float):
        self.trace_drift = max(self.trace_drift, trace_drift)
        self.hermiticity_drift = max(self.hermiticity_drift, herm_drift)
        self.min_eigenvalue = min(self.min_eigenvalue, min_eig)
        self.checks += 1

    def ok(self) -> bool:
        return (
            self.trace_drift < TRACE_TOL
            and self.hermiticity_drift < HERMITICITY_TOL
            and self.min_eigenvalue > EIGENVALUE_FLOOR
        )


@dataclass(frozen=True)
class Liouvillian:
    """Generator L(rho) = -i[H, rho] + sum_j gamma_j D[A_j] rho, vectorized."""

    matrix: np.ndarray
    dim: int

    @property
    def superop_dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class PathwayKick:
    """One-sided excitation event: `count` powers of the collective
    raising (left, ket side) or lowering (right, bra side) operator."""

    side: str  # "left" or "right"
    operator: np.ndarray
    count: int = 1

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValueError(f"kick side must be 'left' or 'right', got {self.side!r}")
        if self.count < 0:
            raise ValueError(f"kick count must be >= 0, got {self.count}")


def collective_dephasing(spec: BasisSpec, gamma: float, basis: Basis | None = None):
    """Jump term for global phase noise: Z = sum_k sigma_z^k at rate gamma/2.

    The rate convention makes coherences between states whose total spin
    excitation differs by n decay at exactly n^2 * gamma_ang, gamma_ang
    being the angular rate 2*pi*gamma.
    """
    if gamma < 0:
        raise ValueError(f"dephasing rate must be >= 0, got {gamma}")
    if basis is None:
        basis = build_basis(spec)
    z = sum(
        full_local_operator("sigma_z", k, spec) for k in range(1, spec.n_ions + 1)
    )
    return (2.0 * np.pi * gamma / 2.0, basis.project(z))


def build_liouvillian(h: np.ndarray, jumps=()) -> Liouvillian:
    """Vectorized Lindblad generator from a Hamiltonian and jump terms.

    jumps is an iterable of (rate, operator) pairs; each contributes
    rate * (A rho A^dag - {A^dag A, rho}/2).
    """
    dim = h.shape[0]
    if h.shape != (dim, dim):
        raise ValueError(f"hamiltonian must be square, got {h.shape}")
    eye = np.eye(dim)
    gen = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for rate, op in jumps:
        if op.shape != (dim, dim):
            raise ValueError(
                f"jump operator shape {op.shape} does not match dimension {dim}"
            )
        anti = op.conj().T @ op
        gen = gen + rate * (
            np.kron(op, op.conj())
            - 0.5 * np.kron(anti, eye)
            - 0.5 * np.kron(eye, anti.T)
        )
    return Liouvillian(matrix=gen, dim=dim)


def _check_health(rho: np.ndarray, nominal_trace: complex, log: HealthLog | None):
    trace_drift = abs(np.trace(rho) - nominal_trace)
    herm_drift = float(np.max(np.abs(rho - rho.conj().T)))
    min_eig = float(np.linalg.eigvalsh((rho + rho.conj().T) / 2.0).min())
    if log is not None:
        log.record(trace_drift, herm_drift, min_eig)
    if trace_drift >= TRACE_TOL:
        raise ToleranceError(f"trace drifted by {trace_drift:.3e} (limit {TRACE_TOL})")
    if herm_drift >= HERMITICITY_TOL:
        raise ToleranceError(
            f"hermiticity drifted by {herm_drift:.3e} (limit {HERMITICITY_TOL})"
        )
    if min_eig <= EIGENVALUE_FLOOR:
        raise ToleranceError(
            f"negative population {min_eig:.3e} (floor {EIGENVALUE_FLOOR})"
        )


def apply_propagator(liouv: Liouvillian, x: np.ndarray, t: float) -> np.ndarray:
    """Evolve vectorized states (columns of x) by time t, no physicality checks.

    This is the raw kernel shared by propagate and the grid scans, which
    also push non-Hermitian single-pathway objects through it.
    """
    if t == 0:
        return x.copy()
    if liouv.superop_dim <= EXPM_DIM_LIMIT:
        return expm(liouv.matrix * t) @ x
    sol = solve_ivp(
        lambda _, v: liouv.matrix @ v,
        (0.0, t),
        np.asarray(x, dtype=complex).reshape(-1),
        method="DOP853",
        rtol=1e-10,
        atol=1e-12,
        t_eval=(t,),
    )
    if not sol.success:
        raise ToleranceError(f"integrator failed: {sol.message}")
    return sol.y[:, -1].reshape(x.shape)


def propagate(
    liouv: Liouvillian,
    rho: np.ndarray,
    t: float,
    log: HealthLog | None = None,
) -> np.ndarray:
    """Physical evolution rho -> e^{Lt} rho with physicality enforcement."""
    if t < 0:
        raise ValueError(f"propagation time must be >= 0, got {t}")
    nominal = np.trace(rho)
    out = apply_propagator(liouv, rho.reshape(-1), t).reshape(rho.shape)
    _check_health(out, nominal, log)
    return out


def collective_raising(network: PhononNetwork, spec: BasisSpec) -> np.ndarray:
    """J_+ b_1 in the full space: collective spin raising times lowest-mode
    phonon annihilation, both weighted by the mode coefficients."""
    c1 = network.mode_vectors[:, 0]
    n = spec.n_ions
    j_plus = sum(
        c1[k] * full_local_operator("sigma_plus", k + 1, spec) for k in range(n)
    )
    b_1 = sum(
        c1[k] * full_local_operator("annihilate", k + 1, spec) for k in range(n)
    )
    return j_plus @ b_1


def kick_operator(
    network: PhononNetwork, spec: BasisSpec, basis: Basis | None = None
) -> np.ndarray:
    """Sector block of the excitation operator J_+ b_1 (number conserving)."""
    if basis is None:
        basis = build_basis(spec)
    return basis.project(collective_raising(network, spec))


def pathway_kick(rho: np.ndarray, kick: PathwayKick) -> np.ndarray:
    """One-sided action selecting a Liouville pathway.

    left: A^count rho. right: rho (A^dag)^count. The output is generally
    neither Hermitian nor trace normalized; it is one term of the
    response, not a state.
    """
    power = np.linalg.matrix_power(kick.operator, kick.count)
    if kick.side == "left":
        return power @ rho
    return rho @ power.conj().T


def phase_cycle_extract(
    rho0: np.ndarray,
    liouv: Liouvillian,
    kick_op: np.ndarray,
    n_quanta: int,
    pulse_area: float,
    phases: int,
    t2: float,
) -> np.ndarray:
    """Isolate the n_quanta(phi_1 - phi_2) component of the two-pulse response.

    Each pulse applies the full unitary exp(-i eps K(phi)) with
    K(phi) = i (e^{i phi} A - e^{-i phi} A^dag) / 2, the system evolves
    freely between the pulses, and the two phases are cycled over an
    M-point grid. The discrete double Fourier projection is divided by
    its exact leading series coefficient ((eps/2)^n / n!)^2, so the
    result converges, component by component, to the nested commutator
    [A^dag, [..., rho]] pathway structure as eps -> 0. The projection of
    the result onto the one-sided kick composition is what the pulse
    sequence is designed to measure; strays with the same phase signature
    (both-sided terms of the commutators) are physical and left in place.
    """
    m = int(phases)
    if m < 2 * n_quanta + 2:
        raise ValueError(
            f"{m} phase steps alias the order-{n_quanta} signature; "
            f"need at least {2 * n_quanta + 2}"
        )
    if not 0 < pulse_area < 1:
        raise ValueError(f"pulse_area should be a small fraction, got {pulse_area}")
    dim = rho0.shape[0]
    acc = np.zeros((dim, dim), dtype=complex)
    grid = 2.0 * np.pi * np.arange(m) / m
    unitaries = []
    for phi in grid:
        k_op = 0.5j * (np.exp(1j * phi) * kick_op - np.exp(-1j * phi) * kick_op.conj().T)
        unitaries.append(expm(-1j * pulse_area * k_op))
    for p, u1 in enumerate(unitaries):
        after_first = u1 @ rho0 @ u1.conj().T
        evolved = apply_propagator(liouv, after_first.reshape(-1), t2).reshape(dim, dim)
        for q, u2 in enumerate(unitaries):
            term = u2 @ evolved @ u2.conj().T
            acc += np.exp(-1j * n_quanta * (grid[p] - grid[q])) * term
    acc /= m * m
    coefficient = ((pulse_area / 2.0) ** n_quanta / math.factorial(n_quanta)) ** 2
    return acc / coefficient


def pathway_amplitude(extracted: np.ndarray, target: np.ndarray) -> complex:
    """Component of an extracted term along a reference pathway matrix.

    Frobenius projection <target, extracted> / <target, target>. Equals
    1 + O(eps^2) for the two-pulse extraction above whenever the stray
    commutator terms are orthogonal to the target, which holds at t2 = 0
    because the insulator state is annihilated by the raising kick.
    """
    denom = np.vdot(target, target)
    if denom == 0:
        raise ValueError("reference pathway is identically zero")
    return complex(np.vdot(target, extracted) / denom)
