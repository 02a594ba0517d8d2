"""Composite spin-phonon Hilbert space with excitation-sector restriction.

The space is N spin-1/2 systems tensored with N truncated local oscillators.
Because the model conserves the total excitation number (spin flips plus
phonons), most work happens inside one fixed-sum sector. Operators are always
composed in the full product space first; only composite, number-conserving
matrices may be projected onto a sector. Projecting individual ladder factors
would silently zero them (they map the sector elsewhere), so the projection
helpers below take the full-space matrix, never a factor.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

LOCAL_KINDS = ("sigma_plus", "sigma_minus", "sigma_z", "annihilate", "create")


class BasisError(ValueError):
    pass


@dataclass(frozen=True)
class BasisSpec:
    """Shape of the composite space.

    phonon_cutoff is the maximum occupation per local mode. When left as
    None it defaults to n_ions + 1 in full-space mode (one spare level to
    catch leakage bugs) and to the sector total in sector mode, where the
    truncation is exact for every number-conserving composite.
    """

    n_ions: int
    phonon_cutoff: int | None = None
    sector: int | None = None

    def __post_init__(self):
        if self.n_ions < 1:
            raise BasisError(f"need at least one ion, got n_ions={self.n_ions}")
        if self.phonon_cutoff is None:
            cutoff = self.sector if self.sector is not None else self.n_ions + 1
            object.__setattr__(self, "phonon_cutoff", cutoff)
        if self.phonon_cutoff < 0:
            raise BasisError(f"phonon_cutoff must be >= 0, got {self.phonon_cutoff}")
        if self.sector is not None and self.sector < 0:
            raise BasisError(f"sector must be >= 0, got {self.sector}")

    @property
    def full_dim(self) -> int:
        return 2**self.n_ions * (self.phonon_cutoff + 1) ** self.n_ions


@dataclass(frozen=True)
class Basis:
    """Deterministic enumeration of composite basis states.

    states[i] is a tuple (s_1..s_N, n_1..n_N): spin bits first (0 down,
    1 up), then phonon occupations, site 1 leading within each block.
    The ordering is lexicographic in that tuple, so spin configurations
    vary slowest. In sector mode, full_index[i] locates sector state i
    inside the full-space enumeration.
    """

    spec: BasisSpec
    states: tuple[tuple[int, ...], ...]
    full_index: tuple[int, ...]
    index: dict[tuple[int, ...], int] = field(repr=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    def project(self, full_matrix: np.ndarray) -> np.ndarray:
        """Sector block of a full-space matrix.

        Only valid for composites that map the sector into itself; the
        caller is responsible for that (see module docstring).
        """
        if self.spec.sector is None:
            return full_matrix
        ix = np.asarray(self.full_index)
        return full_matrix[np.ix_(ix, ix)]

    def project_between(self, full_matrix: np.ndarray, target: "Basis") -> np.ndarray:
        """Rectangular block mapping this sector into another one."""
        rows = np.asarray(target.full_index)
        cols = np.asarray(self.full_index)
        return full_matrix[np.ix_(rows, cols)]


def _enumerate_full(spec: BasisSpec):
    spins = itertools.product(range(2), repeat=spec.n_ions)
    levels = range(spec.phonon_cutoff + 1)
    for s in spins:
        for n in itertools.product(levels, repeat=spec.n_ions):
            yield s + n


def build_basis(spec: BasisSpec) -> Basis:
    states = []
    full_index = []
    for i, st in enumerate(_enumerate_full(spec)):
        if spec.sector is not None and sum(st) != spec.sector:
            continue
        states.append(st)
        full_index.append(i)
    if not states:
        cap = spec.n_ions * (spec.phonon_cutoff + 1)
        raise BasisError(
            f"sector {spec.sector} is empty for N={spec.n_ions}, "
            f"phonon_cutoff={spec.phonon_cutoff} (max total excitation {cap}); "
            "raise phonon_cutoff or lower the sector"
        )
    return Basis(
        spec=spec,
        states=tuple(states),
        full_index=tuple(full_index),
        index={st: i for i, st in enumerate(states)},
    )


def _kron_chain(mats) -> np.ndarray:
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def full_local_operator(kind: str, site: int, spec: BasisSpec) -> np.ndarray:
    """Single-site operator embedded in the full product space, 1-based site.

    This is the raw building block: always the full matrix, ignoring any
    sector restriction on spec. Composite number-conserving products of
    these may then be cut down with Basis.project.
    """
    if kind not in LOCAL_KINDS:
        raise ValueError(f"unknown operator kind {kind!r}, expected one of {LOCAL_KINDS}")
    if not 1 <= site <= spec.n_ions:
        raise ValueError(f"site must be in 1..{spec.n_ions}, got {site}")
    k = site - 1
    nph = spec.phonon_cutoff + 1
    sigma_plus = np.array([[0.0, 0.0], [1.0, 0.0]])
    lower = np.diag(np.sqrt(np.arange(1, nph)), k=1) if nph > 1 else np.zeros((1, 1))
    spin_factors = [np.eye(2)] * spec.n_ions
    phonon_factors = [np.eye(nph)] * spec.n_ions
    if kind == "sigma_plus":
        spin_factors[k] = sigma_plus
    elif kind == "sigma_minus":
        spin_factors[k] = sigma_plus.T
    elif kind == "sigma_z":
        spin_factors[k] = np.diag([-1.0, 1.0])
    elif kind == "annihilate":
        phonon_factors[k] = lower
    else:
        phonon_factors[k] = lower.T
    return _kron_chain(spin_factors + phonon_factors).astype(complex)


# Change in total excitation number produced by each local kind.
_KIND_SHIFT = {
    "sigma_plus": +1,
    "sigma_minus": -1,
    "sigma_z": 0,
    "annihilate": -1,
    "create": +1,
}


def local_operator(kind: str, site: int, spec: BasisSpec) -> np.ndarray:
    """Single-site operator, restricted to the sector structure of spec.

    Without a sector this is simply the full-space embedding. With a
    sector n, a number-conserving kind (sigma_z) returns the square n-to-n
    block, while a raising or lowering kind returns the rectangular map
    from sector n into sector n +/- 1 (rows index the target sector).
    """
    full = full_local_operator(kind, site, spec)
    if spec.sector is None:
        return full
    source = build_basis(spec)
    shift = _KIND_SHIFT[kind]
    if shift == 0:
        return source.project(full)
    target_sector = spec.sector + shift
    try:
        target = build_basis(
            BasisSpec(spec.n_ions, spec.phonon_cutoff, sector=target_sector)
        )
    except BasisError:
        return np.zeros((0, source.dim), dtype=complex)
    return source.project_between(full, target)


def number_operator(spec: BasisSpec, basis: Basis | None = None) -> np.ndarray:
    """Total excitation count, sum over sites of a_k^dag a_k + sigma_k^+ sigma_k^-."""
    if basis is None:
        basis = build_basis(spec)
    n = np.zeros((spec.full_dim, spec.full_dim), dtype=complex)
    for site in range(1, spec.n_ions + 1):
        a = full_local_operator("annihilate", site, spec)
        sm = full_local_operator("sigma_minus", site, spec)
        n += a.conj().T @ a + sm.conj().T @ sm
    return basis.project(n)


def expectation(op: np.ndarray, rho: np.ndarray) -> complex:
    if op.shape != rho.shape:
        raise ValueError(f"dimension mismatch: op {op.shape} vs rho {rho.shape}")
    return complex(np.trace(op @ rho))
