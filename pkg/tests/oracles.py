"""Independent reference computations used by the tests.

Nothing here imports the qds numerics; each oracle is built from scratch so
agreement is a real cross-check.
"""

from __future__ import annotations

import cmath
import math

import numpy as np
import sympy as sp


def lindblad_rhs(h, ls, rho):
    out = -1j * (h @ rho - rho @ h)
    for l in ls:
        ld = l.conj().T
        out = out + l @ rho @ ld - 0.5 * (ld @ l @ rho + rho @ ld @ l)
    return out


def superop_bruteforce(h, ls):
    """Column-stacked superoperator, one matrix unit at a time."""
    n = h.shape[0]
    cols = []
    for j in range(n):
        for i in range(n):
            e = np.zeros((n, n), complex)
            e[i, j] = 1.0
            cols.append(lindblad_rhs(h, ls, e).reshape(-1, order="F"))
    return np.array(cols).T


def example2_lambda0_tensor(delta, omega, ell=1.0):
    """lambda0 from the tensor-sum structure: eigenvalues of R+ and R- added pairwise."""
    hr = np.array([[delta, omega], [omega, 0.0]])
    pi0 = np.diag([abs(ell) ** 2, 0.0])
    lp = np.linalg.eigvals(1j * hr - pi0 / 2)
    lm = np.linalg.eigvals(-1j * hr - pi0 / 2)
    return max((a + b).real for a in lp for b in lm)


def example2_lambda0_derived(delta, omega):
    """Closed form from the 2x2 characteristic polynomial."""
    return -0.5 + cmath.sqrt(0.25 - delta**2 + 1j * delta - 4 * omega**2).real


def example2_lambda0_printed(delta, omega):
    """The printed closed form (kept to report its residual)."""
    return -0.5 + 0.5 * cmath.sqrt(1 - delta**2 + 1j * delta - 4 * omega**2).real


def dfs_hat_lr_displayed(gammas, theta, phi, delta, omega):
    """The displayed 4x4 R-block generator of the DFS example."""
    g = float(sum(gammas))
    w = [math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)]
    op = omega * math.copysign(1.0, math.sin(theta) * math.cos(phi))
    feed = sum(gi * wi**2 for gi, wi in zip(gammas, w))
    return np.array([
        [-g, -1j * op, 1j * op, 0],
        [-1j * op, -g / 2 + 1j * delta, 0, 1j * op],
        [1j * op, 0, -g / 2 - 1j * delta, -1j * op],
        [feed, 1j * op, -1j * op, 0],
    ], dtype=complex)


def dfs_det_symbolic():
    """det of the displayed matrix, symbolically, with sum n_i^2 = 1 imposed."""
    g1, g2, g3, d, om = sp.symbols("g1 g2 g3 Delta Omega", real=True)
    n1, n2, n3 = sp.symbols("n1 n2 n3", real=True)
    g = g1 + g2 + g3
    feed = g1 * n1**2 + g2 * n2**2 + g3 * n3**2
    m = sp.Matrix([
        [-g, -sp.I * om, sp.I * om, 0],
        [-sp.I * om, -g / 2 + sp.I * d, 0, sp.I * om],
        [sp.I * om, 0, -g / 2 - sp.I * d, -sp.I * om],
        [feed, sp.I * om, -sp.I * om, 0],
    ])
    det = sp.expand(m.det())
    target = g * (g1 * (om**2 - om**2 * n1**2) + g2 * (om**2 - om**2 * n2**2)
                  + g3 * (om**2 - om**2 * n3**2))
    return sp.simplify(det - sp.expand(target)), det


def amplitude_damping_excited(gamma, t):
    return math.exp(-gamma * t)


ARCCOS_INV_E = math.acos(math.exp(-1))


def dominant_overlapping_mode(h, ls, s_basis, rho0, rel=1e-8):
    """Slowest Re(lambda) of the R-block generator among modes that the initial R-block
    actually excites (amplitude c_k * tr(unvec v_k) not negligible)."""
    n = h.shape[0]
    m = s_basis.shape[1]
    # orthonormal completion: project out S, keep the top n-m directions
    pr = np.eye(n) - s_basis @ s_basis.conj().T
    w, v = np.linalg.eigh(pr)
    r = v[:, w > 0.5]
    u = np.hstack([s_basis, r])
    ud = u.conj().T
    full = superop_bruteforce(ud @ h @ u, [ud @ l @ u for l in ls])
    idx = [i + n * j for j in range(m, n) for i in range(m, n)]
    lr = full[np.ix_(idx, idx)]
    lam, vec_r = np.linalg.eig(lr)
    x0 = (ud @ rho0 @ u)[m:, m:].reshape(-1, order="F")
    c = np.linalg.solve(vec_r, x0)
    k = n - m
    traces = np.array([np.trace(vec_r[:, i].reshape(k, k, order="F")) for i in range(len(lam))])
    amp = np.abs(c * traces)
    live = amp > rel * amp.max()
    return float(lam.real[live].max())
