"""Coupling parametrization shared by the lattice and continuum sides.

Everything is parametrized by ``x > 0``: ``gamma = pi/(x+1)``, loop weight
``m = +-2 cos(gamma)`` depending on the sign convention, central charge
``c = 1 - 6/(x(x+1))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import InvalidArgument

PLAIN = "plain"
NEGATED = "negated"
CONVENTIONS = (PLAIN, NEGATED)


def central_charge(x: float) -> float:
    if x <= 0:
        raise InvalidArgument("x must be positive")
    return 1.0 - 6.0 / (x * (x + 1.0))


def param_from_c(c: float) -> float:
    """Positive root ``x`` of ``c = 1 - 6/(x(x+1))``."""
    if c >= 1:
        raise InvalidArgument(f"c must be < 1, got {c}")
    return 0.5 * (-1.0 + math.sqrt(1.0 + 24.0 / (1.0 - c)))


def loop_weight(x: float, convention: str = PLAIN) -> float:
    if x <= 0:
        raise InvalidArgument("x must be positive")
    if convention not in CONVENTIONS:
        raise InvalidArgument(f"unknown convention {convention!r}")
    m = 2.0 * math.cos(math.pi / (x + 1.0))
    return m if convention == PLAIN else -m


def _e_inf_integrand(t: float, gamma: float) -> float:
    # sinh((pi-g)t) / (sinh(pi t) cosh(g t)) rewritten with decaying exponentials
    if t == 0.0:
        return (math.pi - gamma) / math.pi
    num = -math.expm1(-2.0 * (math.pi - gamma) * t)
    den = -math.expm1(-2.0 * math.pi * t) * (1.0 + math.exp(-2.0 * gamma * t))
    return 2.0 * math.exp(-2.0 * gamma * t) * num / den


def e_infinity(gamma: float) -> float:
    """Average ground-state value of a generator, ``sin(g) * int_R f(t) dt``."""
    if not 0.0 < gamma < math.pi:
        raise InvalidArgument(f"gamma must lie in (0, pi), got {gamma}")
    # integrand ~ 2 exp(-2 gamma t); stop where the tail is below 1e-16
    upper = 40.0 / gamma
    val, err = integrate.quad(
        _e_inf_integrand, 0.0, upper, args=(gamma,), epsabs=1e-14, epsrel=1e-13, limit=400
    )
    return 2.0 * math.sin(gamma) * val


def fermi_velocity(gamma: float) -> float:
    if gamma == 0.0:
        return math.pi
    return math.pi * math.sin(gamma) / gamma


@dataclass(frozen=True)
class LatticeParams:
    """Couplings for operator assembly.

    ``m`` is the weight given to every closed loop in diagram stacking and in
    the loop scalar product.  Under the negated convention each generator is
    additionally multiplied by -1, so ``e_j^2 = -m e_j``.
    """

    m: float
    e_inf: float
    v_F: float
    c: float
    x: float | None = None
    gamma: float | None = None
    convention: str = PLAIN
    y: float = 1.0

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise InvalidArgument(f"unknown convention {self.convention!r}")
        if self.m == 0.0:
            raise InvalidArgument("loop weight m = 0 is not supported")

    @property
    def sign(self) -> float:
        return 1.0 if self.convention == PLAIN else -1.0

    @classmethod
    def from_x(cls, x: float, convention: str = NEGATED, y: float = 1.0) -> LatticeParams:
        gamma = math.pi / (x + 1.0)
        return cls(
            m=loop_weight(x, convention),
            e_inf=e_infinity(gamma),
            v_F=fermi_velocity(gamma),
            c=central_charge(x),
            x=x,
            gamma=gamma,
            convention=convention,
            y=y,
        )

    @classmethod
    def from_c(cls, c: float, convention: str = NEGATED, y: float = 1.0) -> LatticeParams:
        return cls.from_x(param_from_c(c), convention, y)

    @classmethod
    def from_loop_weight(
        cls, m: float, convention: str = NEGATED, y: float = 1.0, e_inf: float | None = None
    ) -> LatticeParams:
        """Parameters for a given loop weight; ``gamma`` solves ``m = +-2cos(gamma)``."""
        base = m if convention == PLAIN else -m
        if not -2.0 < base < 2.0:
            raise InvalidArgument(f"loop weight {m} outside (-2, 2)")
        gamma = math.acos(base / 2.0)
        x = math.pi / gamma - 1.0
        return cls(
            m=m,
            e_inf=e_infinity(gamma) if e_inf is None else e_inf,
            v_F=fermi_velocity(gamma),
            c=central_charge(x) if x > 0 else -np.inf,
            x=x if x > 0 else None,
            gamma=gamma,
            convention=convention,
            y=y,
        )

    @classmethod
    def symbolic(cls, m: float, e_inf: float, convention: str = PLAIN, y: float = 1.0) -> LatticeParams:
        """Free ``(m, e_inf)`` for matrix-structure checks; ``v_F`` and ``c`` are placeholders."""
        return cls(m=m, e_inf=e_inf, v_F=1.0, c=0.0, convention=convention, y=y)
