"""Closed-form potentials with analytic first and third derivatives.

The propagators evaluate V at points off the x-lattice (the shifted
arguments x +/- s/2 of the momentum kernel), so potentials are kept in
closed form and never sampled on a grid.  The time argument is threaded
through every evaluation even though the built-ins are static; driven
potentials can then be added without touching the propagator interfaces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class Potential:
    """One-dimensional scalar potential, evaluable at arbitrary points.

    Subclasses provide value/grad/d3 as vectorized functions of x.
    """

    def value(self, x, t: float = 0.0):
        raise NotImplementedError

    def grad(self, x, t: float = 0.0):
        raise NotImplementedError

    def d3(self, x, t: float = 0.0):
        """Third spatial derivative (drives the hbar^2 correction)."""
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(Potential):
    c: float = 0.0

    def value(self, x, t: float = 0.0):
        return np.full_like(np.asarray(x, dtype=float), self.c)

    def grad(self, x, t: float = 0.0):
        return np.zeros_like(np.asarray(x, dtype=float))

    def d3(self, x, t: float = 0.0):
        return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Linear(Potential):
    g: float = 1.0

    def value(self, x, t: float = 0.0):
        return self.g * np.asarray(x, dtype=float)

    def grad(self, x, t: float = 0.0):
        return np.full_like(np.asarray(x, dtype=float), self.g)

    def d3(self, x, t: float = 0.0):
        return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Harmonic(Potential):
    """V(x) = k x^2 / 2."""

    k: float = 1.0

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("spring constant k must be >= 0")

    def value(self, x, t: float = 0.0):
        return 0.5 * self.k * np.asarray(x, dtype=float) ** 2

    def grad(self, x, t: float = 0.0):
        return self.k * np.asarray(x, dtype=float)

    def d3(self, x, t: float = 0.0):
        return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class GaussianWell(Potential):
    """Attractive well V(x) = -depth * exp(-x^2 / (2 sigma^2))."""

    depth: float = 1.0
    sigma: float = 3.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    def value(self, x, t: float = 0.0):
        x = np.asarray(x, dtype=float)
        return -self.depth * np.exp(-x**2 / (2.0 * self.sigma**2))

    def grad(self, x, t: float = 0.0):
        x = np.asarray(x, dtype=float)
        s2 = self.sigma**2
        return self.depth * (x / s2) * np.exp(-x**2 / (2.0 * s2))

    def d3(self, x, t: float = 0.0):
        x = np.asarray(x, dtype=float)
        s2 = self.sigma**2
        return self.depth * (x**3 / s2**3 - 3.0 * x / s2**2) * np.exp(-x**2 / (2.0 * s2))


# ---------------------------------------------------------------------------
# multi-dimensional potentials for the separable propagator; these expose
# value_nd(coords, t) where coords is one broadcastable array per axis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeparableSum:
    """V(r) = sum_j V_j(x_j) built from one-dimensional potentials."""

    terms: tuple[Potential, ...]

    def value_nd(self, coords, t: float = 0.0):
        out = self.terms[0].value(coords[0], t)
        for pot, c in zip(self.terms[1:], coords[1:]):
            out = out + pot.value(c, t)
        return out


@dataclass(frozen=True)
class RadialGaussianWell:
    """V(r) = -depth * exp(-|r|^2 / (2 sigma^2)), not additively separable."""

    depth: float = 1.0
    sigma: float = 3.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    def value_nd(self, coords, t: float = 0.0):
        r2 = sum(np.asarray(c, dtype=float) ** 2 for c in coords)
        return -self.depth * np.exp(-r2 / (2.0 * self.sigma**2))


# ---------------------------------------------------------------------------
# config syntax: 'gaussian_well depth=1.0 sigma=3.0', 'harmonic k=1.0', ...
# ---------------------------------------------------------------------------

_VARIANTS = {
    "constant": (Constant, {"c": 0.0}),
    "linear": (Linear, {"g": 1.0}),
    "harmonic": (Harmonic, {"k": 1.0}),
    "gaussian_well": (GaussianWell, {"depth": 1.0, "sigma": 3.0}),
}


def parse_potential(text: str) -> Potential:
    """Parse the CLI potential syntax, e.g. 'gaussian_well depth=1.0 sigma=3.0'."""
    parts = text.split()
    if not parts:
        raise ValueError("empty potential specification")
    name = parts[0]
    if name not in _VARIANTS:
        known = ", ".join(sorted(_VARIANTS))
        raise ValueError(f"unknown potential {name!r} (known: {known})")
    cls, defaults = _VARIANTS[name]
    kwargs = dict(defaults)
    for item in parts[1:]:
        if "=" not in item:
            raise ValueError(f"malformed potential parameter {item!r} (expected key=value)")
        key, _, raw = item.partition("=")
        if key not in kwargs:
            raise ValueError(f"unknown parameter {key!r} for potential {name!r}")
        try:
            kwargs[key] = float(raw)
        except ValueError:
            raise ValueError(f"parameter {key!r} must be a number, got {raw!r}") from None
    return cls(**kwargs)
