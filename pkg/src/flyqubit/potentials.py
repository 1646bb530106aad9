"""Position-dependent internal potentials ``V(x) = sum_i f_i(x) V_i``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from flyqubit.core import check_hermitian

# f(x) <= 1e-12 * max(f) outside the reported support window
SUPPORT_LEVEL = 1e-12


class Profile:
    """Scalar shape function with a derivative and an effective support."""

    def __call__(self, x):
        raise NotImplementedError

    def derivative(self, x):
        raise NotImplementedError

    @property
    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    @property
    def feature_scale(self) -> float:
        """Shortest length over which the profile changes appreciably."""
        lo, hi = self.support
        return (hi - lo) / 100.0


@dataclass(frozen=True)
class GaussianProfile(Profile):
    """``exp(-pi (x - center)^2 / width^2)``; unit area times ``width``."""

    center: float = 0.0
    width: float = 1.0

    def __call__(self, x):
        u = (np.asarray(x, dtype=float) - self.center) / self.width
        return np.exp(-np.pi * u * u)

    def derivative(self, x):
        u = (np.asarray(x, dtype=float) - self.center) / self.width
        return -2.0 * np.pi * u / self.width * np.exp(-np.pi * u * u)

    @property
    def support(self):
        half = self.width * np.sqrt(np.log(1.0 / SUPPORT_LEVEL) / np.pi)
        return (self.center - half, self.center + half)

    @property
    def feature_scale(self):
        return self.width


@dataclass(frozen=True)
class SmoothRectProfile(Profile):
    """Rectangle of the given length with tanh edges of width ``edge``.

    ``f(x) = [tanh((x - a)/edge) - tanh((x - b)/edge)] / 2`` with
    ``a, b = center -+ length/2``.
    """

    center: float = 0.0
    length: float = 1.0
    edge: float = 0.1

    def _edges(self):
        return self.center - 0.5 * self.length, self.center + 0.5 * self.length

    def __call__(self, x):
        a, b = self._edges()
        x = np.asarray(x, dtype=float)
        return 0.5 * (np.tanh((x - a) / self.edge) - np.tanh((x - b) / self.edge))

    def derivative(self, x):
        a, b = self._edges()
        x = np.asarray(x, dtype=float)
        sa = 1.0 / np.cosh((x - a) / self.edge) ** 2
        sb = 1.0 / np.cosh((x - b) / self.edge) ** 2
        return 0.5 * (sa - sb) / self.edge

    @property
    def support(self):
        a, b = self._edges()
        pad = 0.5 * self.edge * np.log(1.0 / SUPPORT_LEVEL)
        return (a - pad, b + pad)

    @property
    def feature_scale(self):
        return min(self.edge, self.length)

    @property
    def area(self) -> float:
        return self.length


@dataclass(frozen=True)
class CallableProfile(Profile):
    """Arbitrary user profile; derivative by central difference if not given."""

    func: Callable
    window: tuple[float, float]
    dfunc: Callable | None = None

    def __call__(self, x):
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def derivative(self, x):
        if self.dfunc is not None:
            return np.asarray(self.dfunc(np.asarray(x, dtype=float)), dtype=float)
        h = 1e-5 * (self.window[1] - self.window[0])
        x = np.asarray(x, dtype=float)
        return (self(x + h) - self(x - h)) / (2.0 * h)

    @property
    def support(self):
        return tuple(self.window)


@dataclass(frozen=True)
class PotentialTerm:
    profile: Profile
    amplitude: float
    operator: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "operator", check_hermitian(self.operator, "potential operator"))


@dataclass(frozen=True)
class PotentialProfile:
    """Sum of ``amplitude * profile(x) * operator`` terms.

    Calling the profile with an array of positions returns a stack of
    ``(n, n)`` matrices with the position axes in front.
    """

    terms: tuple = field(default_factory=tuple)
    dim: int | None = None

    def __post_init__(self):
        terms = tuple(self.terms)
        object.__setattr__(self, "terms", terms)
        dims = {t.operator.shape[0] for t in terms}
        if self.dim is not None:
            dims.add(self.dim)
        if len(dims) > 1:
            raise ValueError(f"potential terms have mixed dimensions {sorted(dims)}")
        if not dims:
            raise ValueError("empty potential needs an explicit dim")
        object.__setattr__(self, "dim", dims.pop())

    @classmethod
    def zero(cls, dim: int):
        return cls((), dim=dim)

    def _combine(self, x, attr):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (self.dim, self.dim), dtype=complex)
        for term in self.terms:
            f = getattr(term.profile, attr)(x) if attr else term.profile(x)
            out += (term.amplitude * f)[..., None, None] * term.operator
        return out

    def __call__(self, x):
        return self._combine(x, None)

    def derivative(self, x):
        return self._combine(x, "derivative")

    @property
    def support(self) -> tuple[float, float]:
        if not self.terms:
            return (0.0, 0.0)
        lo = min(t.profile.support[0] for t in self.terms)
        hi = max(t.profile.support[1] for t in self.terms)
        return (lo, hi)

    @property
    def feature_scale(self) -> float:
        if not self.terms:
            return np.inf
        return min(t.profile.feature_scale for t in self.terms)

    def scaled(self, factor: float) -> "PotentialProfile":
        return PotentialProfile(
            tuple(PotentialTerm(t.profile, t.amplitude * factor, t.operator) for t in self.terms),
            dim=self.dim,
        )

    def commutes_with(self, h0, tol: float = 1e-12) -> bool:
        scale = max(np.max(np.abs(h0)), 1.0)
        return all(np.max(np.abs(t.operator @ h0 - h0 @ t.operator)) <= tol * scale * max(np.max(np.abs(t.operator)), 1.0) for t in self.terms)


@dataclass(frozen=True)
class ReflectedProfile(Profile):
    """``base(-x)``; used when a relative coordinate is flipped."""

    base: Profile

    def __call__(self, x):
        return self.base(-np.asarray(x, dtype=float))

    def derivative(self, x):
        return -self.base.derivative(-np.asarray(x, dtype=float))

    @property
    def support(self):
        lo, hi = self.base.support
        return (-hi, -lo)

    @property
    def feature_scale(self):
        return self.base.feature_scale


def reflect(potential: PotentialProfile) -> PotentialProfile:
    """Mirror a potential about ``x = 0``."""
    return PotentialProfile(
        tuple(PotentialTerm(ReflectedProfile(t.profile), t.amplitude, t.operator) for t in potential.terms),
        dim=potential.dim,
    )


@dataclass(frozen=True)
class ModulatedProfile(Profile):
    """``envelope(x) * cos(k (x - envelope_center) + phase)``.

    A spatially periodic field seen by a moving particle as a drive at
    angular frequency ``k v0``.
    """

    envelope: Profile
    k: float
    phase: float = 0.0

    def _arg(self, x):
        c = 0.5 * sum(self.envelope.support)
        return self.k * (np.asarray(x, dtype=float) - c) + self.phase

    def __call__(self, x):
        return self.envelope(x) * np.cos(self._arg(x))

    def derivative(self, x):
        a = self._arg(x)
        return self.envelope.derivative(x) * np.cos(a) - self.k * self.envelope(x) * np.sin(a)

    @property
    def support(self):
        return self.envelope.support

    @property
    def feature_scale(self):
        return min(self.envelope.feature_scale, 1.0 / abs(self.k)) if self.k else self.envelope.feature_scale
