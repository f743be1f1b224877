"""Numerical tolerance configuration.

Every rank or zero decision in the package goes through one of these knobs.
Defaults can be overridden process-wide with ``set_tolerances``, through the
``QDS_TOL`` environment variable (scales the rank thresholds), or from a
TOML file of ``key = value`` pairs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

try:
    import tomllib as tomli
except ModuleNotFoundError:  # python < 3.11
    import tomli


@dataclass(frozen=True)
class Tolerances:
    # relative Hermiticity check: ||H - H^dag||_F <= hermitian * max(1, ||H||_F)
    hermitian: float = 1e-10
    # a block is zero when ||X||_F <= zero_block * max(1, model scale)
    zero_block: float = 1e-9
    # kernel threshold: sigma <= kernel_eps * sigma_max
    kernel_eps: float = 1e-9
    # zero-eigenvalue disc radius relative to the spectral scale
    zero_disc: float = 1e-8
    # verdicts with |lambda0|/scale inside [band_lo, band_hi] are indeterminate
    band_lo: float = 1e-10
    band_hi: float = 1e-7


_current = Tolerances()


def _from_env(base: Tolerances) -> Tolerances:
    raw = os.environ.get("QDS_TOL")
    if not raw:
        return base
    tol = float(raw)
    return replace(base, zero_block=tol, kernel_eps=tol)


def get_tolerances() -> Tolerances:
    return _from_env(_current)


def set_tolerances(tol: Tolerances | None = None, **overrides: float) -> Tolerances:
    """Replace the process-wide tolerances; returns the previous value."""
    global _current
    previous = _current
    base = tol if tol is not None else _current
    _current = replace(base, **overrides)
    return previous


def load_config(path: str | Path) -> Tolerances:
    """Read tolerance overrides from a TOML key/value file.

    Keys may sit at the top level or under a ``[tolerances]`` table.
    Unknown keys raise ``KeyError``.
    """
    with open(path, "rb") as fh:
        data = tomli.load(fh)
    data = data.get("tolerances", data)
    known = {f.name for f in fields(Tolerances)}
    unknown = set(data) - known
    if unknown:
        raise KeyError(f"unknown tolerance keys: {sorted(unknown)}")
    return replace(Tolerances(), **{k: float(v) for k, v in data.items()})
