"""Builders for the bundled example models.

The JSON files under ``qds/data`` are generated from these functions
(``python -m qds.corpus``) and a test keeps them in sync.
"""

from __future__ import annotations

import math
from functools import reduce
from importlib import resources
from pathlib import Path

import numpy as np

from .model import Control, QdsModel, Subspace, load_model, serialize_model

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
SPLUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|
I2 = np.eye(2, dtype=complex)

# NV-center constants (MHz, MHz/G)
NV = dict(D_e=1420.0, D_g=2870.0, Q=4.945, A_e=40.0, A_g=2.2, g_el=2.8, g_n=3.08e-4,
          gamma_d=77.0, gamma_m=33.0, gamma_0=3.3, gamma_p=70.0)


def _ket(n: int, i: int) -> np.ndarray:
    v = np.zeros(n, dtype=complex)
    v[i] = 1.0
    return v


def _kron(*ops) -> np.ndarray:
    return reduce(np.kron, ops)


def amplitude_damping(gamma: float = 1.0) -> QdsModel:
    l = math.sqrt(gamma) * np.outer(_ket(2, 0), _ket(2, 1))
    return QdsModel(2, np.zeros((2, 2)), (), (l,), Subspace.coordinates(2, [0]),
                    name="amplitude_damping", meta={"gamma": gamma})


def entanglement_target(delta: float, alpha: float) -> np.ndarray:
    """psi_0 = (Delta|00> - alpha(|01> - |10>)) / sqrt(Delta^2 + 2 alpha^2)."""
    om = math.sqrt(delta**2 + 2 * alpha**2)
    return np.array([delta, -alpha, alpha, 0.0], dtype=complex) / om


def entangle2(gamma: float = 1.0, delta: float = 1.0, alpha: float = 1.0,
              name: str = "entangle2") -> QdsModel:
    """Two atoms in a damped cavity; Delta and alpha are Hamiltonian controls.

    The target is psi_0 at the given (delta, alpha); the decay rate gamma is a
    property of the noise operator and stays fixed.
    """
    h_delta = 0.5 * (np.kron(SZ, I2) - np.kron(I2, SZ))
    h_alpha = np.kron(SX, I2) + np.kron(I2, SX)
    l = math.sqrt(gamma) * (np.kron(SPLUS, I2) + np.kron(I2, SPLUS))
    h0 = delta * h_delta + alpha * h_alpha
    ctrls = (Control("Delta", h_delta, ((0.0, math.inf),)),
             Control("alpha", h_alpha, ((0.0, math.inf),)))
    # controls are offsets around the nominal (delta, alpha) baked into h0
    return QdsModel(4, h0, ctrls, (l,), Subspace(entanglement_target(delta, alpha)),
                    name=name, meta={"gamma": gamma, "Delta": delta, "alpha": alpha})


def entangle2_at(delta: float, alpha: float, gamma: float = 1.0) -> QdsModel:
    """Uncontrolled instance with (Delta, alpha) baked into the Hamiltonian."""
    m = entangle2(gamma, delta, alpha)
    return QdsModel(4, m.h0, (), m.lindblads, m.target, name="entangle2", meta=m.meta)


def example1() -> QdsModel:
    """Two qubits, H = (Z/2 + X) (x) I + I (x) (-Z/2 + X), L = s+ (x) I + I (x) s+."""
    h = np.kron(0.5 * SZ + SX, I2) + np.kron(I2, -0.5 * SZ + SX)
    l = np.kron(SPLUS, I2) + np.kron(I2, SPLUS)
    psi0 = np.array([1, -1, 1, 0], dtype=complex) / math.sqrt(3)
    return QdsModel(4, h, (), (l,), Subspace(psi0), name="example1")


def example1_display_complement() -> np.ndarray:
    """The completion {psi_1, psi_2, psi_3} used in the worked example."""
    psi1 = np.array([0, 0, 0, 1], dtype=complex)
    psi2 = np.array([0, 1, 1, 0], dtype=complex) / math.sqrt(2)
    psi3 = -math.sqrt(2 / 3) * np.array([1, 0.5, -0.5, 0], dtype=complex)
    return np.column_stack([psi1, psi2, psi3])


def example2(upsilon: float = 1.0, ell: float = 1.0, upsilon_control: bool = False,
             bounds: tuple[float, float] | None = (0.0, 3.0)) -> QdsModel:
    """Three-level model in the basis {s, r1, r2}; controls Delta and Omega."""
    e = lambda i, j: np.outer(_ket(3, i), _ket(3, j))  # noqa: E731
    rng = ((-math.inf, math.inf),) if bounds is None else (bounds,)
    ctrls = [Control("Delta", e(1, 1), rng), Control("Omega", e(1, 2) + e(2, 1), rng)]
    h0 = upsilon * e(0, 0)
    if upsilon_control:
        ctrls.insert(0, Control("Upsilon", e(0, 0)))
        h0 = np.zeros((3, 3))
    return QdsModel(3, h0, tuple(ctrls), (ell * e(0, 1),), Subspace.coordinates(3, [0]),
                    name="example2", meta={"Upsilon": upsilon, "ell": ell})


def dfs_couplings(theta: float, phi: float) -> np.ndarray:
    return np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi),
                     math.cos(theta)])


def dfs_basis(theta: float, phi: float) -> np.ndarray:
    d1 = np.array([-math.sin(phi), math.cos(phi), 0.0, 0.0], dtype=complex)
    d2 = np.array([math.cos(theta) * math.cos(phi), math.cos(theta) * math.sin(phi),
                   -math.sin(theta), 0.0], dtype=complex)
    return np.column_stack([d1, d2])


def dfs4(gammas=(0.9, 0.9, 0.9), theta: float = math.pi / 4, phi: float = 3 * math.pi / 4,
         name: str = "dfs4") -> QdsModel:
    """Three ground states |1>,|2>,|3> coupled to |e> (index 3); controls Delta, Omega."""
    n = 4
    e = lambda i, j: np.outer(_ket(n, i), _ket(n, j))  # noqa: E731
    w = dfs_couplings(theta, phi)
    h_omega = sum(w[i] * (e(3, i) + e(i, 3)) for i in range(3))
    ctrls = (Control("Delta", e(3, 3)), Control("Omega", h_omega, ((0.0, math.inf),)))
    ls = tuple(math.sqrt(g) * e(i, 3) for i, g in enumerate(gammas))
    return QdsModel(n, np.zeros((n, n)), ctrls, ls, Subspace(dfs_basis(theta, phi)), name=name,
                    meta={"gammas": list(gammas), "theta": theta, "phi": phi})


def dfs_display_complement(theta: float, phi: float) -> np.ndarray:
    """{|e>, bright state} with the sign that makes <e|H|bright> = Omega'."""
    w = dfs_couplings(theta, phi)
    sgn = math.copysign(1.0, math.sin(theta) * math.cos(phi))
    bright = np.concatenate([sgn * w, [0.0]]).astype(complex)
    return np.column_stack([_ket(4, 3), bright])


# ------------------------------------------------------------------ NV center

def _nv_reduced_blocks(p: dict):
    """Spin-1/2 reduction: S_x,y Pauli, S_z = (1 - sigma_z)/2 (levels 0 -> 0, -1 -> 1).

    With that mapping the physical Zeeman term enters with a minus sign, so that
    the level diagonals read h_e = D_e - g_el B and h_n = Q - g_n B.
    """
    sz = np.diag([0.0, 1.0]).astype(complex)

    def electronic(d, a):
        static = (d * np.kron(sz @ sz, I2) + p["Q"] * np.kron(I2, sz @ sz)
                  + 0.5 * a * (np.kron(SX, SX) + np.kron(SY, SY) + 2 * np.kron(sz, sz)))
        zeeman = -(p["g_el"] * np.kron(sz, I2) + p["g_n"] * np.kron(I2, sz))
        return static, zeeman

    ms_static = p["Q"] * sz @ sz
    ms_zeeman = -p["g_n"] * sz
    return electronic, ms_static, ms_zeeman


def _nv_model(p: dict, el_dim: int, electronic, ms_static, ms_zeeman, jumps, target_idx,
              name: str, with_ms: bool = True) -> QdsModel:
    nn = el_dim  # nuclear dimension equals electron-spin dimension in both models
    blk = el_dim * nn
    n = 2 * blk + (nn if with_ms else 0)
    h0 = np.zeros((n, n), dtype=complex)
    hb = np.zeros((n, n), dtype=complex)
    for lvl, (d, a) in enumerate([(p["D_e"], p["A_e"]), (p["D_g"], p["A_g"])]):
        static, zeeman = electronic(d, a)
        sl = slice(lvl * blk, (lvl + 1) * blk)
        h0[sl, sl] = static
        hb[sl, sl] = zeeman
    if with_ms:
        sl = slice(2 * blk, 2 * blk + nn)
        h0[sl, sl] = ms_static
        hb[sl, sl] = ms_zeeman
    ls = []
    for rate, dst, src in jumps:
        l = np.zeros((n, n), dtype=complex)
        for s_n in range(nn):
            l[dst(s_n), src(s_n)] = math.sqrt(p[rate])
        ls.append(l)
    target = Subspace.coordinates(n, target_idx)
    ctrl = Control("B", hb, ((0.0, 2000.0),))
    return QdsModel(n, h0, (ctrl,), tuple(ls), target, unit="MHz", name=name,
                    meta={k: v for k, v in p.items()})


def _reduced_index(level: str, s_el: int, s_n: int) -> int:
    return {"e": 0, "g": 1}[level] * 4 + s_el * 2 + s_n


def nv_reduced(params: dict | None = None, merged: bool = False) -> QdsModel:
    """10-level reduced NV model (8 for the merged variant, which drops the
    metastable level and replaces L4 L3 by one decay at rate gamma_0).

    Basis order: |e,s_el,s_N> (4), |g,s_el,s_N> (4), |ms,s_N> (2).
    """
    p = dict(NV, **(params or {}))
    electronic, ms_static, ms_zeeman = _nv_reduced_blocks(p)
    ix = _reduced_index
    ms = lambda s_n: 8 + s_n  # noqa: E731
    jumps = [
        ("gamma_d", lambda s: ix("g", 0, s), lambda s: ix("e", 0, s)),
        ("gamma_d", lambda s: ix("g", 1, s), lambda s: ix("e", 1, s)),
    ]
    if merged:
        jumps.append(("gamma_0", lambda s: ix("g", 0, s), lambda s: ix("e", 1, s)))
    else:
        jumps += [
            ("gamma_m", ms, lambda s: ix("e", 1, s)),
            ("gamma_0", lambda s: ix("g", 0, s), ms),
        ]
    jumps += [
        ("gamma_p", lambda s: ix("e", 0, s), lambda s: ix("g", 0, s)),
        ("gamma_p", lambda s: ix("e", 1, s), lambda s: ix("g", 1, s)),
    ]
    return _nv_model(p, 2, electronic, ms_static, ms_zeeman, jumps,
                     [ix("e", 0, 0), ix("g", 0, 0)],
                     "nv_merged" if merged else "nv_reduced", with_ms=not merged)


def spin1() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spin-1 operators in the basis m = +1, 0, -1."""
    s = 1 / math.sqrt(2)
    sx = s * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)
    sy = s * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex)
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return sx, sy, sz


_M = {1: 0, 0: 1, -1: 2}


def extended_index(level: str, m_el: int, m_n: int) -> int:
    if level == "ms":
        return 18 + _M[m_n]
    return {"e": 0, "g": 1}[level] * 9 + _M[m_el] * 3 + _M[m_n]


def nv_extended(params: dict | None = None, target_mn: int = 1) -> QdsModel:
    """21-level NV model with spin-1 electron and nucleus.

    Basis order: |e,m_el,m_N> (9), |g,m_el,m_N> (9), |ms,m_N> (3), with
    m ordered +1, 0, -1.  The target is span{|e,0,m>, |g,0,m>} for m = target_mn,
    by default the polarized nucleus m = +1.
    """
    p = dict(NV, **(params or {}))
    sx, sy, sz = spin1()
    i3 = np.eye(3, dtype=complex)

    def electronic(d, a):
        static = (d * np.kron(sz @ sz, i3) + p["Q"] * np.kron(i3, sz @ sz)
                  + a * (np.kron(sx, sx) + np.kron(sy, sy) + np.kron(sz, sz)))
        zeeman = p["g_el"] * np.kron(sz, i3) + p["g_n"] * np.kron(i3, sz)
        return static, zeeman

    ms_static = p["Q"] * sz @ sz
    ms_zeeman = p["g_n"] * sz
    ix = extended_index
    m_of = [1, 0, -1]
    ms = lambda s: ix("ms", 0, m_of[s])  # noqa: E731

    def at(level, m_el):
        return lambda s: ix(level, m_el, m_of[s])

    jumps = [
        ("gamma_d", at("g", 0), at("e", 0)),
        ("gamma_d", at("g", 1), at("e", 1)),
        ("gamma_m", ms, at("e", 1)),
        ("gamma_0", at("g", 0), ms),
        ("gamma_p", at("e", 0), at("g", 0)),
        ("gamma_p", at("e", 1), at("g", 1)),
        ("gamma_d", at("g", -1), at("e", -1)),
        ("gamma_m", ms, at("e", -1)),
        ("gamma_p", at("e", -1), at("g", -1)),
    ]
    return _nv_model(p, 3, electronic, ms_static, ms_zeeman, jumps,
                     [ix("e", 0, target_mn), ix("g", 0, target_mn)], "nv_extended")


def nv_merged(params: dict | None = None) -> QdsModel:
    return nv_reduced(params, merged=True)


BUILDERS = {
    "amplitude_damping": amplitude_damping,
    "example1": example1,
    "example2": example2,
    "dfs4": dfs4,
    "entangle2": entangle2,
    "nv_reduced": nv_reduced,
    "nv_merged": nv_merged,
    "nv_extended": nv_extended,
}


def bundled_names() -> list[str]:
    return sorted(BUILDERS)


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("qds") / "data" / f"{name}.json"))


def load_bundled(name: str) -> QdsModel:
    if name not in BUILDERS:
        raise KeyError(f"no bundled model named {name!r}; choose from {bundled_names()}")
    return load_model(bundled_path(name).read_text(encoding="utf-8"))


def write_corpus(directory: Path | None = None) -> list[Path]:
    out_dir = Path(directory) if directory else bundled_path("x").parent
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, build in BUILDERS.items():
        path = out_dir / f"{name}.json"
        path.write_text(serialize_model(build()), encoding="utf-8")
        written.append(path)
    return written


if __name__ == "__main__":
    for p in write_corpus():
        print(p)
