"""Missingness simulators.

Every mechanism splits the rows of a target column into strata and masks a
fixed fraction of each stratum, sampled without replacement. Stratum sizes
are counts, so ``round(rate * size)`` cells are masked exactly (halves round
up). Strata are computed on the complete data and all masks are applied at
once, so a driver that is itself a target is read before it is masked.

Default wiring follows the V1..V4 naming of the simulated datasets:

========== ============== ===========================================
mechanism  targets        stratified by
========== ============== ===========================================
MCAR       V1 V2 V3 V4    nothing (rate 0.30)
MAR_2      V1 V3          V2, V4 below / above mean (0.10 / 0.50)
MAR_2_out  V1 V3          V2, V4 and outcome (0.10, 0.36, 0.20, 0.30)
MAR_circ   V1 V2 V3 V4    V2, V3, V4, V1 (0.10 / 0.50)
MAR_circ_out              as MAR_circ, with outcome strata
MNAR       V1 V2 V3 V4    own value (0.10 / 0.50)
========== ============== ===========================================

Noise columns (default: columns named N<digits>) always get MCAR at 0.30.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np

from .errors import DataError, SchemaError
from .tabular import Dataset

MECHANISMS = ("MCAR", "MAR_2", "MAR_2_out", "MAR_circ", "MAR_circ_out", "MNAR")
MAR_MECHANISMS = ("MAR_2", "MAR_2_out", "MAR_circ", "MAR_circ_out")
OUTCOME_MECHANISMS = ("MAR_2_out", "MAR_circ_out")

_DEFAULT_TARGETS = {
    "MCAR": ["V1", "V2", "V3", "V4"],
    "MAR_2": ["V1", "V3"],
    "MAR_2_out": ["V1", "V3"],
    "MAR_circ": ["V1", "V2", "V3", "V4"],
    "MAR_circ_out": ["V1", "V2", "V3", "V4"],
    "MNAR": ["V1", "V2", "V3", "V4"],
}
_DEFAULT_DRIVERS = {
    "MAR_2": ["V2", "V4"],
    "MAR_2_out": ["V2", "V4"],
    "MAR_circ": ["V2", "V3", "V4", "V1"],
    "MAR_circ_out": ["V2", "V3", "V4", "V1"],
}
_NOISE_NAME = re.compile(r"N\d+")


@dataclass
class AmputationSpec:
    """Missingness mechanism and its parameters.

    ``out_rates`` are the rates of the four outcome strata in the order
    (low driver, positive), (low, negative), (high, positive), (high, negative).
    ``noise`` None selects the columns named N1, N2, ...; an empty list
    disables noise amputation.
    """

    mechanism: str
    targets: list | None = None
    drivers: list | None = None
    outcome: str | None = None
    noise: list | None = None
    rate: float = 0.30
    low_rate: float = 0.10
    high_rate: float = 0.50
    out_rates: tuple = (0.10, 0.36, 0.20, 0.30)
    noise_rate: float = 0.30
    seed: int = 0

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}; choose from {MECHANISMS}")
        self.out_rates = tuple(float(r) for r in self.out_rates)
        if len(self.out_rates) != 4:
            raise ValueError("out_rates needs four values")
        for r in (self.rate, self.low_rate, self.high_rate, self.noise_rate, *self.out_rates):
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"rate {r} outside [0, 1]")
        if self.targets is None:
            self.targets = list(_DEFAULT_TARGETS[self.mechanism])
        else:
            self.targets = list(self.targets)
        if self.mechanism in MAR_MECHANISMS:
            if self.drivers is None:
                self.drivers = list(_DEFAULT_DRIVERS[self.mechanism])
            self.drivers = list(self.drivers)
            if len(self.drivers) != len(self.targets):
                raise ValueError("need exactly one driver per target")
            for t, dr in zip(self.targets, self.drivers):
                if t == dr:
                    raise ValueError(f"driver of {t!r} must differ from the target")
        elif self.drivers:
            raise ValueError(f"{self.mechanism} takes no drivers")
        if self.mechanism in OUTCOME_MECHANISMS:
            if self.outcome is None:
                raise ValueError(f"{self.mechanism} needs an outcome column")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("duplicate target columns")
        if self.outcome is not None and self.outcome in self.targets:
            raise ValueError("the outcome is never amputed")
        if self.noise is not None:
            self.noise = list(self.noise)

    # -- key=value form --------------------------------------------------
    def to_config(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, (list, tuple)):
                v = ",".join(str(x) for x in v)
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_config(cls, text: str) -> "AmputationSpec":
        kw = {}
        types = {f.name: f for f in fields(cls)}
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if not sep or key not in types:
                raise ValueError(f"bad amputation config line: {raw!r}")
            if key in ("targets", "drivers", "noise"):
                kw[key] = [v for v in val.split(",") if v]
            elif key == "out_rates":
                kw[key] = tuple(float(v) for v in val.split(","))
            elif key in ("mechanism", "outcome"):
                kw[key] = val
            elif key == "seed":
                kw[key] = int(val)
            else:
                kw[key] = float(val)
        return cls(**kw)


class Stratum(NamedTuple):
    column: str
    label: str
    rows: np.ndarray
    rate: float


def _column(d: Dataset, name: str) -> int:
    try:
        return d.index(name)
    except SchemaError:
        raise SchemaError(f"amputation column {name!r} not in dataset") from None


def _complete_values(d: Dataset, name: str, role: str) -> np.ndarray:
    j = _column(d, name)
    if d.mask[:, j].any():
        raise DataError(f"{role} column {name!r} already has missing values")
    return d.values[:, j]


def _positive(d: Dataset, name: str) -> np.ndarray:
    y = _complete_values(d, name, "outcome")
    values = np.unique(y)
    if len(values) != 2:
        raise DataError(f"outcome {name!r} must be binary, found {len(values)} distinct values")
    # second level / larger value is the positive class
    return y == values[1]


def noise_columns(d: Dataset, spec: AmputationSpec) -> list[str]:
    if spec.noise is not None:
        return list(spec.noise)
    skip = set(spec.targets) | {spec.outcome}
    return [n for n in d.names if _NOISE_NAME.fullmatch(n) and n not in skip]


def plan(d: Dataset, spec: AmputationSpec) -> list[Stratum]:
    """Strata and their rates, in sampling order."""
    n = d.n_rows
    all_rows = np.arange(n)
    out = []
    pos = _positive(d, spec.outcome) if spec.mechanism in OUTCOME_MECHANISMS else None
    for k, target in enumerate(spec.targets):
        _complete_values(d, target, "target")
        m = spec.mechanism
        if m == "MCAR":
            out.append(Stratum(target, "all", all_rows, spec.rate))
            continue
        source = target if m == "MNAR" else spec.drivers[k]
        x = _complete_values(d, source, "driver")
        low = x <= x.mean()
        if pos is None:
            out.append(Stratum(target, f"{source}<=mean", all_rows[low], spec.low_rate))
            out.append(Stratum(target, f"{source}>mean", all_rows[~low], spec.high_rate))
        else:
            r = spec.out_rates
            out.append(Stratum(target, f"{source}<=mean,positive", all_rows[low & pos], r[0]))
            out.append(Stratum(target, f"{source}<=mean,negative", all_rows[low & ~pos], r[1]))
            out.append(Stratum(target, f"{source}>mean,positive", all_rows[~low & pos], r[2]))
            out.append(Stratum(target, f"{source}>mean,negative", all_rows[~low & ~pos], r[3]))
    for name in noise_columns(d, spec):
        _complete_values(d, name, "noise")
        out.append(Stratum(name, "noise", all_rows, spec.noise_rate))
    return out


def sample_size(rate: float, size: int) -> int:
    """round(rate * size) with halves rounded up."""
    return int(np.floor(rate * size + 0.5))


def ampute(d: Dataset, spec: AmputationSpec) -> Dataset:
    """Return a copy of ``d`` with cells masked under ``spec``."""
    strata = plan(d, spec)
    if spec.outcome is not None:
        _column(d, spec.outcome)
    rng = np.random.default_rng(spec.seed)
    mask = d.mask.copy()
    for s in strata:
        k = sample_size(s.rate, len(s.rows))
        if k:
            rows = rng.choice(s.rows, size=k, replace=False)
            mask[rows, d.index(s.column)] = True
    return d.replace(mask=mask)


__all__ = [
    "AmputationSpec",
    "MECHANISMS",
    "Stratum",
    "ampute",
    "plan",
    "noise_columns",
    "sample_size",
]
