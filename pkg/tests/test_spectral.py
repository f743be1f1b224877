import math

import numpy as np
import pytest

from qds.corpus import (amplitude_damping, dfs4, dfs_couplings, dfs_display_complement, entangle2_at,
                        example1, example2, nv_extended)
from qds.did import NotInvariant
from qds.model import QdsModel, Subspace
from qds.spectral import build_hat_lr, full_generator, gas_verdict, kron, steady_states, vec
import oracles


def test_vec_definition_and_identity():
    a, b, c, d = 1.0, 2.0, 3.0, 4.0
    assert np.allclose(vec(np.array([[a, c], [b, d]])), [a, b, c, d])
    eye = np.eye(2)
    assert np.allclose(kron(eye.T, eye) @ vec(eye), vec(eye))
    rng = np.random.default_rng(0)
    x, y, z = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(3))
    assert np.abs(vec(x @ y @ z) - kron(z.T, x) @ vec(y)).max() < 1e-12


def test_amplitude_damping_hat_lr():
    m = amplitude_damping(1.7)
    assert np.allclose(build_hat_lr(m, None, m.target).matrix, [[-1.7]])


def test_full_generator_matches_bruteforce():
    rng = np.random.default_rng(2)
    for m, u in [(example1(), None), (dfs4(), [0.3, 1.1]), (example2(), [0.5, 0.9])]:
        from qds.model import hamiltonian_at

        ref = oracles.superop_bruteforce(hamiltonian_at(m, u), m.lindblads)
        assert np.abs(full_generator(m, u) - ref).max() < 1e-12


def test_dfs_hat_lr_matches_display():
    for th, ph in [(math.pi / 4, 3 * math.pi / 4), (0.7, 2.0), (2.2, 0.4)]:
        m = dfs4(theta=th, phi=ph)
        got = build_hat_lr(m, [0.6, 1.3], m.target, dfs_display_complement(th, ph)).matrix
        ref = oracles.dfs_hat_lr_displayed([0.9] * 3, th, ph, 0.6, 1.3)
        assert np.abs(got - ref).max() < 1e-12


def test_dfs_determinant_value():
    m = dfs4()
    det = np.linalg.det(build_hat_lr(m, [0.0, 1.0], m.target).matrix)
    assert abs(det - 4.86) < 1e-8 * 4.86
    assert gas_verdict(m, [0.0, 1.0], m.target).gas


def test_dfs_determinant_symbolic():
    diff, _ = oracles.dfs_det_symbolic()
    assert diff == 0


def test_example2_tensor_structure():
    m = example2()
    for d, o in [(0.0, 1.0), (1.0, 0.3), (2.5, 2.0)]:
        hl = build_hat_lr(m, [d, o], m.target).matrix
        hr = np.array([[d, o], [o, 0.0]])
        pi0 = np.diag([1.0, 0.0])
        rp, rm = 1j * hr - pi0 / 2, -1j * hr - pi0 / 2
        # column stacking: vec(A X B) = (B^T kron A) vec X
        ref = kron(rp.T, np.eye(2)) + kron(np.eye(2), rm)
        assert np.abs(hl - ref).max() < 1e-12


def test_example2_speed_values():
    m = example2()
    assert abs(gas_verdict(m, [0.0, 1.0], m.target).lambda0 + 0.5) < 1e-9
    lam = gas_verdict(m, [3.0, 1.0], m.target).lambda0
    assert abs(lam - oracles.example2_lambda0_tensor(3.0, 1.0)) < 1e-10
    assert abs(lam - oracles.example2_lambda0_derived(3.0, 1.0)) < 1e-10
    # the printed closed form evaluates to -0.2852 here; it disagrees with the eigensolver
    assert abs(oracles.example2_lambda0_printed(3.0, 1.0) + 0.2852) < 1e-4
    assert abs(lam - oracles.example2_lambda0_printed(3.0, 1.0)) > 0.1


def test_entanglement_delta_zero_not_gas():
    m = entangle2_at(1e-9, 1.0)
    m0 = QdsModel(4, m.h0, (), m.lindblads, Subspace(np.array([0, -1, 1, 0]) / math.sqrt(2)))
    assert not gas_verdict(m0, None, m0.target).gas
    m1 = entangle2_at(0.5, 1.0)
    assert gas_verdict(m1, None, m1.target).gas


def test_not_invariant_raises():
    m = nv_extended()
    with pytest.raises(NotInvariant):
        gas_verdict(m, [500.0], m.target)


def test_steady_states():
    m = example1()
    ss = steady_states(m)
    assert ss.unique
    psi = m.target.basis
    assert np.abs(ss.states[0] - psi @ psi.conj().T).max() < 1e-8
    null = QdsModel(3, np.zeros((3, 3)))
    assert steady_states(null).kernel_dim == 9
    for st in steady_states(null).states:
        assert abs(np.trace(st) - 1) < 1e-12 and np.linalg.eigvalsh(st).min() > -1e-9


def test_steady_state_nv_extended():
    m = nv_extended()
    ss = steady_states(m, [507.0])
    assert ss.unique
    rho = ss.states[0]
    from qds.model import generator_apply

    assert np.abs(generator_apply(m, [507.0], rho)).max() < 1e-8 * m.scale
    fid = np.trace(m.target.projector @ rho).real
    assert abs(fid - 0.97) <= 0.02


def test_dfs_couplings_unit():
    assert abs(np.linalg.norm(dfs_couplings(0.3, 1.9)) - 1) < 1e-15
