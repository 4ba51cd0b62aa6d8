"""Closed-form radial profiles of the three extremal families.

Every family has the shape u = B (shift + rho^2)^(-k) with k = (N-2)/2, where
rho is the distance to a pole sitting at (0, ..., 0, -offset):

    interior  B = [N(N-2)]^((N-2)/4) eps^k, shift = eps^2, offset = 0
    trace     B = (N-2)^((N-2)/2) eps^k,    shift = 0,     offset = eps
    corner    B = [N(N-2)]^((N-2)/4) eps^k, shift = eps^2, offset = eps sqrt(N/(N-2))
"""
import numpy as np

from common.enum import BubbleKind, QuantityTag
from schemas import BubbleSpec, QuantityId, critical_exponent


class BubbleProfile:
    def __init__(self, spec: BubbleSpec):
        dim, eps = spec.dim, spec.eps
        self.spec = spec
        self.dim = dim
        self.eps = eps
        self.k = (dim - 2) / 2
        if spec.kind == BubbleKind.TRACE:
            amplitude = (dim - 2) ** self.k
            self.shift = 0.0
        else:
            amplitude = (dim * (dim - 2)) ** (self.k / 2)
            self.shift = eps**2
        self.amplitude = amplitude
        self.scale = amplitude * eps**self.k
        self.offset = spec.pole_offset

    @property
    def pole(self) -> np.ndarray:
        pole = np.zeros(self.dim)
        pole[-1] = -self.offset
        return pole

    def radius(self, points) -> np.ndarray:
        """Distance of each point (last axis = coordinates) to the pole."""
        points = np.asarray(points, dtype=float)
        return np.linalg.norm(points - self.pole, axis=-1)

    def value(self, rho):
        rho = np.asarray(rho, dtype=float)
        return self.scale * (self.shift + rho**2) ** (-self.k)

    def slope_over_rho(self, rho):
        """u'(rho) / rho, finite at the pole."""
        rho = np.asarray(rho, dtype=float)
        return -2 * self.k * self.scale * (self.shift + rho**2) ** (-self.k - 1)

    def slope(self, rho):
        return np.asarray(rho, dtype=float) * self.slope_over_rho(rho)

    def second(self, rho):
        rho = np.asarray(rho, dtype=float)
        base = self.shift + rho**2
        return (
            -2 * self.k * self.scale * base ** (-self.k - 1)
            + 4 * self.k * (self.k + 1) * self.scale * rho**2 * base ** (-self.k - 2)
        )

    def grad_sq(self, rho):
        return self.slope(rho) ** 2

    def power(self, rho, exponent: float):
        return self.value(rho) ** exponent

    def integrand(self, quantity: QuantityId):
        """Radial density of a tagged quantity as a vectorised callable."""
        if quantity.tag == QuantityTag.GRAD_SQ:
            return self.grad_sq
        if quantity.tag == QuantityTag.MASS_SQ:
            return lambda rho: self.power(rho, 2.0)
        if quantity.tag == QuantityTag.VOLUME_CRIT:
            exponent = critical_exponent(self.dim)
        else:
            exponent = quantity.exponent_q
        return lambda rho: self.power(rho, exponent)
