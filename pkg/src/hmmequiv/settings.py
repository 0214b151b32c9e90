"""Numerical tolerances shared by all modules."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass


@dataclass(frozen=True)
class NumericSettings:
    """Tolerances and caps.

    All rank decisions use ``rank_tol`` relative to the largest singular
    value of the matrix being tested.
    """

    stoch_tol: float = 1e-12
    support_tol: float = 1e-12
    rank_tol: float = 1e-9
    perron_tol: float = 1e-12
    perron_max_iter: int = 100_000
    perron_power_iter: int = 5_000
    equiv_tol: float = 1e-9
    intertwiner_tol: float = 1e-8
    enum_cap: int = 1_000_000
    vanish_tol: float = 1e-8
    nonvanish_tol: float = 1e-6
    gap_tol: float = 1e-7
    gap_floor: float = 1e-9
    eig_imag_tol: float = 1e-9
    eig_neg_tol: float = 1e-9
    leak_tol: float = 1e-8
    exp_guard: float = 700.0
    mean_tol: float = 1e-8
    kernel_check_tol: float = 1e-10
    max_subset_dim: int = 10

    def replace(self, **changes) -> "NumericSettings":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "NumericSettings":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown settings: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "NumericSettings":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


DEFAULT = NumericSettings()


def resolve(settings: NumericSettings | None) -> NumericSettings:
    return DEFAULT if settings is None else settings
