"""Loading closed-loop reset systems from YAML description files.

A description file looks like::

    name: cg1
    plant: {num: [8695], den: [1, 4.36, 7627]}
    C_L1: {num: [1], den: [1]}
    reset: {template: fore, omega_r: 111*pi, gamma: 0.3}
    C_L2:
      gain: 25.5
      factors:
        - {lead: [105.2*pi, 1640*pi]}
        - {integral: 20*pi}
    parallel: {num: [1], den: [1]}      # optional

Linear blocks are either ``{num, den}`` or ``{gain, factors}`` where each
factor is ``{num, den}``, ``{lead: [w_zero, w_pole]}`` meaning
``(s/w_zero + 1)/(s/w_pole + 1)``, ``{integral: w_i}`` meaning
``1 + w_i/s``, or ``{lowpass: w}`` meaning ``1/(s/w + 1)``.  The reset element
is ``{A_r, B_r, C_r, D_r, A_rho}`` or a template ``clegg`` (keys ``gain``,
``feedthrough``) or ``fore`` (keys ``omega_r``, ``gamma``).  Any number may be
written as a product such as ``14.35*20*pi``.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .model import (ClosedLoopResetSystem, ResetElement, build_closed_loop,
                    clegg, fore, realize_transfer_function, series, unity)

__all__ = ["SystemSpec", "load_system", "parse_system", "parse_number", "bundled_systems", "bundled_path",
           "with_reset_matrix"]



@dataclass(frozen=True)
class SystemSpec:
    name: str
    system: ClosedLoopResetSystem
    source: str


def parse_number(v):
    if isinstance(v, (int, float, np.number)):
        return float(v)
    if isinstance(v, str):
        out = 1.0
        for tok in v.split("*"):
            tok = tok.strip()
            out *= np.pi if tok == "pi" else float(tok)
        return out
    raise ValueError(f"expected a number, got {v!r}")


def _numbers(seq):
    return [parse_number(v) for v in (seq if isinstance(seq, list) else [seq])]


def _factor(f):
    if "num" in f:
        return _numbers(f["num"]), _numbers(f["den"])
    if "lead" in f:
        wz, wp = (parse_number(v) for v in f["lead"])
        return [1.0 / wz, 1.0], [1.0 / wp, 1.0]
    if "integral" in f:
        wi = parse_number(f["integral"])
        return [1.0, wi], [1.0, 0.0]
    if "lowpass" in f:
        return [1.0], [1.0 / parse_number(f["lowpass"]), 1.0]
    raise ValueError(f"unknown factor {f!r}")


def _linear(block, name):
    if block is None:
        raise ValueError(f"missing block {name!r}")
    if "num" in block:
        num, den = _numbers(block["num"]), _numbers(block["den"])
    elif "gain" in block or "factors" in block:
        # one realization per factor keeps the state scaling moderate; a
        # single companion form of the product spans many decades
        try:
            parts = [realize_transfer_function(*_factor(f)) for f in block.get("factors", [])]
        except ValueError as exc:
            raise ValueError(f"block {name!r}: {exc}") from None
        return series(*parts, unity(parse_number(block.get("gain", 1.0))))
    else:
        raise ValueError(f"block {name!r} needs either num/den or gain/factors")
    try:
        return realize_transfer_function(num, den)
    except ValueError as exc:
        raise ValueError(f"block {name!r}: {exc}") from None


def _reset(block):
    if block is None:
        raise ValueError("missing block 'reset'")
    template = block.get("template")
    if template == "clegg":
        return clegg(parse_number(block.get("gain", 1.0)), parse_number(block.get("feedthrough", 0.0)))
    if template == "fore":
        return fore(parse_number(block["omega_r"]), parse_number(block["gamma"]))
    if template is not None:
        raise ValueError(f"unknown reset template {template!r}")

    def mat(key):
        rows = block[key] if isinstance(block[key], list) else [block[key]]
        return np.array([_numbers(row) for row in rows])

    return ResetElement(mat("A_r"), mat("B_r"), mat("C_r"), parse_number(block.get("D_r", 0.0)),
                        mat("A_rho"))


def parse_system(data, source="<memory>"):
    """Build a :class:`SystemSpec` from an already parsed mapping."""
    if not isinstance(data, dict):
        raise ValueError("system description must be a mapping")
    unit = {"num": [1.0], "den": [1.0]}
    C_L1 = _linear(data.get("C_L1", unit), "C_L1")
    C_L2 = _linear(data.get("C_L2", unit), "C_L2")
    plant = _linear(data.get("plant"), "plant")
    parallel = _linear(data["parallel"], "parallel") if data.get("parallel") else None
    sys = build_closed_loop(C_L1, _reset(data.get("reset")), C_L2, plant, parallel)
    return SystemSpec(str(data.get("name", Path(source).stem)), sys, str(source))


def load_system(path):
    """Load a system description file, or a bundled system by name (e.g. ``"ppcid"``)."""
    p = Path(path)
    if not p.exists() and not p.suffix:
        p = bundled_path(str(path))
    with open(p, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    return parse_system(data, str(p))


def bundled_path(name):
    ref = resources.files("resetfreq") / "data" / f"{name}.yaml"
    if not ref.is_file():
        raise FileNotFoundError(f"no bundled system named {name!r}; have {bundled_systems()}")
    return Path(str(ref))


def bundled_systems():
    d = resources.files("resetfreq") / "data"
    return sorted(p.name[:-5] for p in d.iterdir() if p.name.endswith(".yaml"))


def with_reset_matrix(spec_sys, A_rho):
    """Copy of a closed loop with a different jump matrix (e.g. identity for linear checks)."""
    r = spec_sys.reset
    reset = ResetElement(r.A_r, r.B_r, r.C_r, r.D_r, A_rho)
    return build_closed_loop(spec_sys.C_L1, reset, spec_sys.C_L2, spec_sys.plant,
                             spec_sys.parallel)
