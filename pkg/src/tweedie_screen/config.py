"""Run configuration: defaults, config-file parsing, and column ranges.

Config files are flat ``key = value`` text; keys mirror ScreenConfig
field names and command-line flags override file values.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .tweedie import RegimeShift

DEFAULT_TARGETS = (20.0, 40.0, 60.0, 80.0)
DEFAULT_PI0_GRID = (0.001, 0.999, 0.001)


@dataclass
class ScreenConfig:
    control_cols: tuple[int, ...] = ()
    test_cols: tuple[int, ...] = ()
    row_fraction: float = 1.0
    control_fraction: float = 1.0
    test_fraction: float = 1.0
    seed: int = 0
    inits: tuple[float, float] = (1.5, 2.0)
    shift: RegimeShift = field(default_factory=lambda: RegimeShift(2.0, 2.0, 1.0))
    targets: tuple[float, ...] = DEFAULT_TARGETS
    pi0_grid: tuple[float, float, float] = DEFAULT_PI0_GRID
    ngridpts: int = 10
    prune: float = 0.2
    zeta: float = 5.0
    digits: int = 3
    alt_cov: str = "empirical"
    metrics_mode: str = "plugin"

    def __post_init__(self):
        if set(self.control_cols) & set(self.test_cols):
            raise ValueError("control and test column sets overlap")
        for name in ("row_fraction", "control_fraction", "test_fraction"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if self.ngridpts < 2:
            raise ValueError("ngridpts must be >= 2")
        if self.alt_cov not in ("empirical", "control"):
            raise ValueError(f"alt_cov must be 'empirical' or 'control', got {self.alt_cov!r}")
        if self.metrics_mode not in ("plugin", "predictive"):
            raise ValueError(f"metrics_mode must be 'plugin' or 'predictive', got {self.metrics_mode!r}")

    def pi0_points(self) -> np.ndarray:
        start, stop, step = self.pi0_grid
        count = int(round((stop - start) / step)) + 1
        return start + step * np.arange(count)

    def to_dict(self) -> dict:
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, RegimeShift):
                v = [v.psi, v.delta, v.rho]
            elif isinstance(v, tuple):
                v = list(v)
            d[f.name] = v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScreenConfig":
        kw = dict(d)
        if "shift" in kw and not isinstance(kw["shift"], RegimeShift):
            kw["shift"] = RegimeShift(*kw["shift"])
        for name in ("control_cols", "test_cols", "inits", "targets", "pi0_grid"):
            if name in kw and isinstance(kw[name], list):
                kw[name] = tuple(kw[name])
        return cls(**kw)


def parse_columns(text: str) -> tuple[int, ...]:
    """Parse 1-based column selections like ``1-44`` or ``1,3,7-9``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise ValueError(f"descending column range {part!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(part))
    if any(c < 1 for c in out):
        raise ValueError("column indices are 1-based")
    return tuple(out)


_TUPLE_KEYS = {
    "control_cols": int,
    "test_cols": int,
    "inits": float,
    "targets": float,
    "pi0_grid": float,
    "shift": float,
}
_SCALAR_KEYS = {
    "row_fraction": float,
    "control_fraction": float,
    "test_fraction": float,
    "seed": int,
    "ngridpts": int,
    "prune": float,
    "zeta": float,
    "digits": int,
    "alt_cov": str,
    "metrics_mode": str,
}


def read_config_file(path) -> dict:
    """Read a ``key = value`` config file into a ScreenConfig kwargs dict."""
    out: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in _TUPLE_KEYS:
            conv = _TUPLE_KEYS[key]
            if key in ("control_cols", "test_cols"):
                out[key] = parse_columns(value)
            else:
                out[key] = tuple(conv(v) for v in value.replace(",", " ").split())
        elif key in _SCALAR_KEYS:
            out[key] = _SCALAR_KEYS[key](value)
        else:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
    return out
