"""Controlled Lindblad models: data types, model files and generator evaluation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import get_tolerances

MAX_DIM = 64


class ModelError(ValueError):
    """Malformed or inconsistent model data."""


class ParseError(ModelError):
    pass


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=complex, copy=True)
    arr.setflags(write=False)
    return arr


def _check_hermitian(name: str, h: np.ndarray, rtol: float) -> None:
    scale = max(1.0, float(np.linalg.norm(h)))
    if np.linalg.norm(h - h.conj().T) > rtol * scale:
        raise ModelError(f"{name} is not Hermitian")


@dataclass(frozen=True)
class Control:
    name: str
    matrix: np.ndarray
    # union of closed intervals; endpoints may be +-inf
    ranges: tuple[tuple[float, float], ...] = ((-math.inf, math.inf),)

    def contains(self, value: float, atol: float = 0.0) -> bool:
        return any(lo - atol <= value <= hi + atol for lo, hi in self.ranges)

    @property
    def bounded(self) -> bool:
        return all(math.isfinite(lo) and math.isfinite(hi) for lo, hi in self.ranges)

    @property
    def finite(self) -> bool:
        """True when every interval is degenerate (a quantized control)."""
        return all(lo == hi for lo, hi in self.ranges)


@dataclass(frozen=True)
class Subspace:
    """A subspace given by an orthonormal basis (columns of ``basis``)."""

    basis: np.ndarray

    def __post_init__(self):
        b = np.array(self.basis, dtype=complex)
        if b.ndim == 1:
            b = b[:, None]
        if b.ndim != 2 or b.shape[1] < 1 or b.shape[1] > b.shape[0]:
            raise ModelError(f"subspace basis must be n x m with 1 <= m <= n, got {b.shape}")
        gram = b.conj().T @ b
        if np.linalg.norm(gram - np.eye(b.shape[1])) > 1e-8:
            raise ModelError("subspace basis columns are not orthonormal")
        object.__setattr__(self, "basis", _frozen(b))

    @classmethod
    def span(cls, vectors) -> "Subspace":
        """Subspace spanned by the given column vectors (orthonormalized)."""
        from .linalg import orthonormalize

        return cls(orthonormalize(np.asarray(vectors, dtype=complex)))

    @classmethod
    def coordinates(cls, n: int, indices: Sequence[int]) -> "Subspace":
        return cls(np.eye(n, dtype=complex)[:, list(indices)])

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def ambient(self) -> int:
        return self.basis.shape[0]

    @property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T


ControlVector = Sequence[float]


@dataclass(frozen=True)
class QdsModel:
    dim: int
    h0: np.ndarray
    controls: tuple[Control, ...] = ()
    lindblads: tuple[np.ndarray, ...] = ()
    target: Subspace | None = None
    unit: str | None = None
    name: str | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n = int(self.dim)
        if n < 1:
            raise ModelError("dim must be positive")
        if n > MAX_DIM:
            raise ModelError(f"dim {n} exceeds the dense cap {MAX_DIM}")
        rtol = get_tolerances().hermitian
        h0 = _frozen(self.h0)
        if h0.shape != (n, n):
            raise ModelError(f"h0 has shape {h0.shape}, expected {(n, n)}")
        _check_hermitian("h0", h0, rtol)
        controls = []
        for c in self.controls:
            m = _frozen(c.matrix)
            if m.shape != (n, n):
                raise ModelError(f"control {c.name!r} has shape {m.shape}, expected {(n, n)}")
            _check_hermitian(f"control {c.name!r}", m, rtol)
            ranges = tuple((float(lo), float(hi)) for lo, hi in c.ranges)
            if not ranges:
                raise ModelError(f"control {c.name!r} has an empty range")
            for lo, hi in ranges:
                if math.isnan(lo) or math.isnan(hi) or lo > hi:
                    raise ModelError(f"control {c.name!r} has an empty interval [{lo}, {hi}]")
            controls.append(Control(c.name, m, ranges))
        names = [c.name for c in controls]
        if len(set(names)) != len(names):
            raise ModelError("control names must be unique")
        lindblads = []
        for k, l in enumerate(self.lindblads):
            arr = _frozen(l)
            if arr.shape != (n, n):
                raise ModelError(f"lindblad {k} has shape {arr.shape}, expected {(n, n)}")
            lindblads.append(arr)
        for arr in [h0, *[c.matrix for c in controls], *lindblads]:
            if not np.all(np.isfinite(arr)):
                raise ModelError("model matrices must have finite entries")
        if self.target is not None and self.target.ambient != n:
            raise ModelError("target basis dimension does not match the model")
        object.__setattr__(self, "dim", n)
        object.__setattr__(self, "h0", h0)
        object.__setattr__(self, "controls", tuple(controls))
        object.__setattr__(self, "lindblads", tuple(lindblads))

    @property
    def n_controls(self) -> int:
        return len(self.controls)

    @property
    def control_names(self) -> list[str]:
        return [c.name for c in self.controls]

    @property
    def scale(self) -> float:
        """Largest Frobenius norm among the model's operators (at least 1)."""
        mats = [self.h0, *[c.matrix for c in self.controls], *self.lindblads]
        return max([1.0, *[float(np.linalg.norm(m)) for m in mats]])

    def zeros(self) -> np.ndarray:
        return np.zeros(self.n_controls)

    def with_target(self, target: Subspace | None) -> "QdsModel":
        return QdsModel(self.dim, self.h0, self.controls, self.lindblads, target,
                        self.unit, self.name, dict(self.meta))

    def contains(self, u: ControlVector, atol: float = 0.0) -> bool:
        """Membership of ``u`` in the admissible control set."""
        u = _as_controls(self, u)
        return all(c.contains(x, atol) for c, x in zip(self.controls, u))


def _as_controls(model: QdsModel, u: ControlVector | None) -> np.ndarray:
    if u is None:
        return model.zeros()
    arr = np.asarray(u, dtype=float).reshape(-1)
    if arr.size != model.n_controls:
        raise ModelError(f"expected {model.n_controls} control values, got {arr.size}")
    return arr


def hamiltonian_at(model: QdsModel, u: ControlVector | None = None) -> np.ndarray:
    """H(u) = H0 + sum_j u_j H_j."""
    u = _as_controls(model, u)
    h = np.array(model.h0)
    for c, x in zip(model.controls, u):
        h = h + x * c.matrix
    return h


def generator_apply(model: QdsModel, u: ControlVector | None, rho) -> np.ndarray:
    """Evaluate the Lindblad generator on ``rho``."""
    r = np.asarray(rho, dtype=complex)
    if r.shape != (model.dim, model.dim):
        raise ModelError(f"rho has shape {r.shape}, expected {(model.dim, model.dim)}")
    h = hamiltonian_at(model, u)
    out = -1j * (h @ r - r @ h)
    for l in model.lindblads:
        ld = l.conj().T
        ldl = ld @ l
        out += l @ r @ ld - 0.5 * (ldl @ r + r @ ldl)
    return out


# ---------------------------------------------------------------- file format

def _decode_scalar(x) -> complex:
    if isinstance(x, bool):
        raise ParseError("booleans are not valid matrix entries")
    if isinstance(x, (int, float)):
        return complex(float(x), 0.0)
    if isinstance(x, list) and len(x) == 2 and all(
        isinstance(p, (int, float)) and not isinstance(p, bool) for p in x
    ):
        return complex(float(x[0]), float(x[1]))
    raise ParseError(f"invalid scalar {x!r}; expected a number or [re, im]")


def _decode_matrix(obj, what: str) -> np.ndarray:
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise ParseError(f"{what}: expected a non-empty list of rows")
    width = len(obj[0])
    if any(len(r) != width for r in obj):
        raise ParseError(f"{what}: ragged rows")
    return np.array([[_decode_scalar(x) for x in row] for row in obj], dtype=complex)


def _decode_bound(x) -> float:
    if x is None:
        raise ParseError("null bound")
    if isinstance(x, str):
        low = x.strip().lower()
        if low in ("inf", "+inf", "infinity"):
            return math.inf
        if low in ("-inf", "-infinity"):
            return -math.inf
        raise ParseError(f"invalid range bound {x!r}")
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ParseError(f"invalid range bound {x!r}")
    return float(x)


def _decode_ranges(obj, name: str) -> tuple[tuple[float, float], ...]:
    if obj is None:
        return ((-math.inf, math.inf),)
    if not isinstance(obj, list):
        raise ParseError(f"control {name!r}: range must be a list of [lo, hi] pairs")
    if not obj:
        raise ModelError(f"control {name!r} has an empty range")
    out = []
    for pair in obj:
        if not isinstance(pair, list) or len(pair) != 2:
            raise ParseError(f"control {name!r}: range entries must be [lo, hi]")
        out.append((_decode_bound(pair[0]), _decode_bound(pair[1])))
    return tuple(out)


def model_from_dict(doc: dict) -> QdsModel:
    if not isinstance(doc, dict):
        raise ParseError("model document must be a JSON object")
    for key in ("dim", "h0"):
        if key not in doc:
            raise ParseError(f"missing required key {key!r}")
    dim = doc["dim"]
    if isinstance(dim, bool) or not isinstance(dim, int):
        raise ParseError("dim must be an integer")
    h0 = _decode_matrix(doc["h0"], "h0")
    controls = []
    for i, c in enumerate(doc.get("controls", [])):
        if not isinstance(c, dict) or "matrix" not in c:
            raise ParseError(f"control {i}: expected an object with a matrix")
        name = str(c.get("name", f"u{i + 1}"))
        controls.append(Control(name, _decode_matrix(c["matrix"], f"control {name!r}"),
                                _decode_ranges(c.get("range"), name)))
    lindblads = doc.get("lindblads", [])
    if not isinstance(lindblads, list):
        raise ParseError("lindblads must be a list of matrices")
    ls = [_decode_matrix(l, f"lindblad {k}") for k, l in enumerate(lindblads)]
    target = None
    if doc.get("target") is not None:
        t = doc["target"]
        if not isinstance(t, dict) or "basis" not in t:
            raise ParseError("target must be an object with a basis")
        target = Subspace(_decode_matrix(t["basis"], "target basis"))
    unit = doc.get("unit")
    return QdsModel(dim, h0, tuple(controls), tuple(ls), target,
                    None if unit is None else str(unit), doc.get("name"),
                    dict(doc.get("meta", {})))


def load_model(text: str) -> QdsModel:
    """Parse and validate a JSON model document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from exc
    return model_from_dict(doc)


def load_model_file(path) -> QdsModel:
    with open(path, encoding="utf-8") as fh:
        return load_model(fh.read())


def _encode_scalar(z: complex):
    z = complex(z)
    if z.imag == 0.0 and not math.copysign(1.0, z.imag) < 0:
        return z.real
    return [z.real, z.imag]


def _encode_matrix(m: np.ndarray) -> list:
    return [[_encode_scalar(x) for x in row] for row in np.asarray(m)]


def _encode_bound(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def model_to_dict(model: QdsModel) -> dict:
    doc: dict = {}
    if model.name is not None:
        doc["name"] = model.name
    doc["dim"] = model.dim
    if model.unit is not None:
        doc["unit"] = model.unit
    doc["h0"] = _encode_matrix(model.h0)
    controls = []
    for c in model.controls:
        entry = {"name": c.name, "matrix": _encode_matrix(c.matrix)}
        if c.ranges != ((-math.inf, math.inf),):
            entry["range"] = [[_encode_bound(lo), _encode_bound(hi)] for lo, hi in c.ranges]
        controls.append(entry)
    doc["controls"] = controls
    doc["lindblads"] = [_encode_matrix(l) for l in model.lindblads]
    if model.target is not None:
        doc["target"] = {"basis": _encode_matrix(model.target.basis)}
    if model.meta:
        doc["meta"] = model.meta
    return doc


def serialize_model(model: QdsModel) -> str:
    return json.dumps(model_to_dict(model), indent=1) + "\n"
