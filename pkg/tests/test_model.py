"""Chain geometry, phonon network, and the rotating-frame Hamiltonian."""

import numpy as np
import pytest

from polariton2d.hilbert import BasisSpec, build_basis, number_operator
from polariton2d.model import (
    ModelParams,
    build_motional_hamiltonian,
    build_polariton_hamiltonian,
    eigensweep,
    equilibrium_positions,
    phonon_network,
)

TWO_PI = 2.0 * np.pi

# sector-2 eigenvalues at Delta = +50 kHz, g = 5 kHz (rad/ms)
FIG3_EIGS = [-37.321, -21.729, -6.192, 300.840, 300.972, 317.659, 317.791, 634.395]
FIG4_EIGS = [-634.701, -333.708, -333.564, -316.781, -316.636, -24.908, -9.390, 6.192]
POLARITON_GAP = 671.7156695111289


def test_two_ion_positions():
    geom = equilibrium_positions(2)
    u = 2.0 ** (-2.0 / 3.0)
    assert np.allclose(geom.positions, (-u, u), atol=1e-12)


def test_positions_balance_coulomb_forces():
    geom = equilibrium_positions(5)
    pos = np.asarray(geom.positions)
    for k, u in enumerate(pos):
        force = -u + sum(
            np.sign(u - v) / (u - v) ** 2 for j, v in enumerate(pos) if j != k
        )
        assert abs(force) < 1e-9
    assert np.allclose(pos, -pos[::-1], atol=1e-12)


def test_two_ion_network_numbers(fig3_params):
    net = phonon_network(equilibrium_positions(2), fig3_params)
    assert net.hoppings[0, 1] == pytest.approx(TWO_PI * 1.25, abs=1e-12)
    assert np.allclose(net.local_freqs, (-TWO_PI * 1.25, -TWO_PI * 1.25), atol=1e-12)
    assert np.allclose(net.mode_freqs, (-TWO_PI * 2.5, 0.0), atol=1e-12)


def test_mode_vectors_orthonormal(fig3_params):
    for n in (2, 3, 4):
        net = phonon_network(equilibrium_positions(n), fig3_params)
        v = net.mode_vectors
        assert np.allclose(v.T @ v, np.eye(n), atol=1e-12)


def test_breathing_mode_comes_first(fig3_params):
    # ascending mode frequencies put the strongly shifted breathing mode
    # at column 0 with a fixed sign convention
    net = phonon_network(equilibrium_positions(2), fig3_params)
    assert np.allclose(net.mode_vectors[:, 0], [1 / np.sqrt(2), -1 / np.sqrt(2)])
    assert net.mode_freqs[0] < net.mode_freqs[1]


def test_hopping_follows_inverse_cube(fig3_params):
    net = phonon_network(equilibrium_positions(3), fig3_params)
    pos = np.asarray(equilibrium_positions(3).positions)
    for k in range(3):
        for l in range(3):
            if k == l:
                continue
            want = TWO_PI * fig3_params.hopping_scale / (2.0 * abs(pos[k] - pos[l]) ** 3)
            assert net.hoppings[k, l] == pytest.approx(want, rel=1e-12)


def test_local_freqs_cancel_total_hopping(fig3_params):
    net = phonon_network(equilibrium_positions(4), fig3_params)
    for k in range(4):
        want = -sum(net.hoppings[k, j] for j in range(4) if j != k)
        assert net.local_freqs[k] == pytest.approx(want, rel=1e-12)


def test_hamiltonian_is_hermitian(ctx_fig3):
    h = ctx_fig3.hamiltonian
    assert np.max(np.abs(h - h.conj().T)) < 1e-13


def test_excitation_number_is_conserved(ctx_fig3, ctx_fig4):
    for ctx in (ctx_fig3, ctx_fig4):
        n = number_operator(ctx.spec, ctx.basis)
        h = ctx.hamiltonian
        assert np.max(np.abs(h @ n - n @ h)) < 1e-12


def test_sector_two_eigenvalues_fig3(ctx_fig3):
    eigs = np.linalg.eigvalsh(ctx_fig3.hamiltonian)
    assert np.allclose(np.round(eigs, 3), FIG3_EIGS)


def test_sector_two_eigenvalues_fig4(ctx_fig4):
    eigs = np.linalg.eigvalsh(ctx_fig4.hamiltonian)
    assert np.allclose(np.round(eigs, 3), FIG4_EIGS)


def test_polariton_gap(ctx_fig3):
    eigs = np.linalg.eigvalsh(ctx_fig3.hamiltonian)
    assert eigs[-1] - eigs[0] == pytest.approx(POLARITON_GAP, abs=1e-9)


def test_motional_hamiltonian_leaves_spins_alone(fig3_params):
    spec = BasisSpec(n_ions=2, phonon_cutoff=1)
    basis = build_basis(spec)
    net = phonon_network(equilibrium_positions(2), fig3_params)
    h = build_motional_hamiltonian(net, fig3_params, spec)
    # no matrix element may connect different spin configurations
    for i, si in enumerate(basis.states):
        for j, sj in enumerate(basis.states):
            if si[:2] != sj[:2]:
                assert h[i, j] == 0


def test_eigensweep_labels_and_shape(fig3_params):
    spec = BasisSpec(n_ions=2, sector=2)
    rows = eigensweep(fig3_params, spec, np.linspace(-4, 4, 5))
    assert len(rows) == 5 * 8
    for ratio, idx, energy, label, conf in rows:
        assert 0 <= idx < 8
        assert label in (0, 1, 2)
        assert 0.0 <= conf <= 1.0 + 1e-12


def test_eigensweep_single_ion_doublet(fig3_params):
    # one ion, one excitation: the avoided crossing closes to 2g at zero
    # detuning, the textbook two-level splitting
    spec = BasisSpec(n_ions=1, sector=1)
    rows = eigensweep(fig3_params, spec, np.array([0.0]))
    energies = sorted(r[2] for r in rows)
    g_ang = TWO_PI * fig3_params.g
    assert energies[1] - energies[0] == pytest.approx(2.0 * g_ang, rel=1e-12)


def test_eigensweep_rejects_zero_coupling():
    with pytest.raises(ValueError):
        eigensweep(ModelParams(g=0.0), BasisSpec(n_ions=2, sector=2), np.array([1.0]))


def test_eigensweep_requires_a_sector(fig3_params):
    with pytest.raises(ValueError):
        eigensweep(fig3_params, BasisSpec(n_ions=2, phonon_cutoff=2), np.array([1.0]))


def test_negative_trap_frequency_rejected():
    with pytest.raises(ValueError):
        ModelParams(nu_x=-1.0)


def test_negative_dephasing_rejected():
    with pytest.raises(ValueError):
        ModelParams(gamma=-0.5)


def test_validity_warnings_flag_strong_coupling():
    assert ModelParams().validity_warnings() == []
    assert ModelParams(g=200.0).validity_warnings()
