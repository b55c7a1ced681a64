"""Machine and excitation parameters (per unit, speed deviation in rad/s)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class MachineParams:
    """One-axis synchronous machine.

    ``M`` is the inertia constant with the speed state in rad/s, i.e.
    ``M = 2H / (2 pi f_nom)``.  ``D_m`` is the direct damping acting as
    ``-D_m * omega`` on the swing equation.
    """

    M: float
    D_m: float
    T_do: float
    x_d: float
    x_d_prime: float

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError(f"inertia M must be positive, got {self.M}")
        if self.D_m < 0:
            raise ValueError(f"damping D_m must be non-negative, got {self.D_m}")
        if not self.T_do > 0:
            raise ValueError(f"T'do must be positive, got {self.T_do}")
        if not self.x_d > self.x_d_prime > 0:
            raise ValueError(
                f"need x_d > x'_d > 0, got x_d={self.x_d}, x'_d={self.x_d_prime}"
            )

    @classmethod
    def from_inertia(cls, H: float, f_nom: float, D_m: float, T_do: float,
                     x_d: float, x_d_prime: float) -> "MachineParams":
        return cls(M=2.0 * H / (2.0 * math.pi * f_nom), D_m=D_m, T_do=T_do,
                   x_d=x_d, x_d_prime=x_d_prime)

    @property
    def x_delta(self) -> float:
        return self.x_d - self.x_d_prime

    @property
    def b_delta(self) -> float:
        return 1.0 / self.x_delta

    @property
    def b_d_prime(self) -> float:
        return 1.0 / self.x_d_prime


@dataclass(frozen=True)
class AvrParams:
    """Terminal-voltage regulator.

    The linear analysis uses the proportional law ``E_f = K_A (V_ref - V)``;
    ``T_e`` is only used by the time-domain simulation (``T_e = 0`` makes
    the simulated regulator proportional as well).
    """

    K_A: float = 0.0
    T_e: float = 0.02
    node: str = "1"
    v_ref: Optional[float] = None

    def __post_init__(self):
        if self.K_A < 0:
            raise ValueError(f"K_A must be non-negative, got {self.K_A}")
        if self.T_e < 0:
            raise ValueError(f"T_e must be non-negative, got {self.T_e}")
