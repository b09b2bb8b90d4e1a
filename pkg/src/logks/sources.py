"""Declarative non-negative functions of (x, t).

Used for the initial data and for the forcing terms of both equations.  Each
kind evaluates on arrays of coordinates and provides an analytic spatial
gradient, which the certificates need for ``|grad sqrt(psi)|^2`` and
``|grad log v0|^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

Coords = Sequence[np.ndarray]


@dataclass(frozen=True)
class Constant:
    value: float

    kind = "constant"

    def __call__(self, x: Coords, t: float = 0.0) -> np.ndarray:
        return np.full(np.shape(x[0]), float(self.value))

    def gradient(self, x: Coords, t: float = 0.0) -> Tuple[np.ndarray, ...]:
        return tuple(np.zeros(np.shape(x[0])) for _ in x)

    def infimum(self) -> Optional[float]:
        return float(self.value)

    def supremum(self) -> Optional[float]:
        return float(self.value)

    @property
    def time_dependent(self) -> bool:
        return False

    @property
    def spatially_constant(self) -> bool:
        return True

    def limit(self) -> "Constant":
        return self


@dataclass(frozen=True)
class GaussianBump:
    """``background + amplitude * exp(-|x - center|^2 / (2 width^2))``."""

    background: float
    amplitude: float
    center: Tuple[float, ...]
    width: float

    kind = "gaussian_bump"

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.width <= 0:
            raise ValueError("gaussian width must be positive")

    def _profile(self, x):
        r2 = sum((xi - ci) ** 2 for xi, ci in zip(x, self.center))
        return np.exp(-r2 / (2.0 * self.width ** 2))

    def __call__(self, x: Coords, t: float = 0.0) -> np.ndarray:
        return self.background + self.amplitude * self._profile(x)

    def gradient(self, x: Coords, t: float = 0.0):
        g = self.amplitude * self._profile(x) / self.width ** 2
        return tuple(-(xi - ci) * g for xi, ci in zip(x, self.center))

    def infimum(self) -> Optional[float]:
        # the minimum over a bounded box is attained at a grid-independent corner
        # only for special centers; grid sampling handles the general case
        return None

    def supremum(self) -> Optional[float]:
        return None

    @property
    def time_dependent(self) -> bool:
        return False

    @property
    def spatially_constant(self) -> bool:
        return self.amplitude == 0

    def limit(self) -> "GaussianBump":
        return self


@dataclass(frozen=True)
class CosineMode:
    """``mean + amplitude * prod_k cos(m_k pi x_k / L_k)``; satisfies zero Neumann data."""

    mean: float
    amplitude: float
    modes: Tuple[int, ...]
    lengths: Tuple[float, ...]

    kind = "cosine_mode"

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(int(m) for m in self.modes))
        object.__setattr__(self, "lengths", tuple(float(L) for L in self.lengths))

    def _factors(self, x):
        return [np.cos(m * math.pi * xi / L) for xi, m, L in zip(x, self.modes, self.lengths)]

    def __call__(self, x: Coords, t: float = 0.0) -> np.ndarray:
        return self.mean + self.amplitude * np.prod(self._factors(x), axis=0)

    def gradient(self, x: Coords, t: float = 0.0):
        fac = self._factors(x)
        out = []
        for k, (xi, m, L) in enumerate(zip(x, self.modes, self.lengths)):
            d = -(m * math.pi / L) * np.sin(m * math.pi * xi / L)
            others = [f for j, f in enumerate(fac) if j != k]
            out.append(self.amplitude * d * (np.prod(others, axis=0) if others else 1.0))
        return tuple(out)

    def infimum(self) -> Optional[float]:
        if all(m == 0 for m in self.modes):
            return self.mean + self.amplitude
        return self.mean - abs(self.amplitude)

    def supremum(self) -> Optional[float]:
        if all(m == 0 for m in self.modes):
            return self.mean + self.amplitude
        return self.mean + abs(self.amplitude)

    @property
    def time_dependent(self) -> bool:
        return False

    @property
    def spatially_constant(self) -> bool:
        return self.amplitude == 0 or all(m == 0 for m in self.modes)

    def limit(self) -> "CosineMode":
        return self


@dataclass(frozen=True)
class SeparableTimeDecay:
    """``target + (base(x) - target) * exp(-rate t)``.

    Relaxes a time-independent profile towards the constant ``target``; for
    each x the value is monotone in t, so extrema over ``t >= 0`` are attained
    at ``t = 0`` or in the limit ``t -> infinity``.
    """

    base: "SourceSpec"
    target: float
    rate: float

    kind = "separable_time_decay"

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("decay rate must be non-negative")
        if self.base.time_dependent:
            raise ValueError("separable_time_decay needs a time-independent base")

    def _weight(self, t):
        return math.exp(-self.rate * t)

    def __call__(self, x: Coords, t: float = 0.0) -> np.ndarray:
        w = self._weight(t)
        return self.target + (self.base(x) - self.target) * w

    def gradient(self, x: Coords, t: float = 0.0):
        w = self._weight(t)
        return tuple(w * g for g in self.base.gradient(x))

    def infimum(self) -> Optional[float]:
        b = self.base.infimum()
        return None if b is None else min(b, self.target)

    def supremum(self) -> Optional[float]:
        b = self.base.supremum()
        return None if b is None else max(b, self.target)

    @property
    def time_dependent(self) -> bool:
        return self.rate > 0

    @property
    def spatially_constant(self) -> bool:
        return self.base.spatially_constant

    def limit(self) -> Constant:
        if self.rate == 0:
            return self.base
        return Constant(self.target)


SourceSpec = Union[Constant, GaussianBump, CosineMode, SeparableTimeDecay]


def sample(spec: SourceSpec, grid, t: float = 0.0) -> np.ndarray:
    """Point values at cell centers."""
    return np.asarray(spec(grid.centers(), t), dtype=float) * np.ones(grid.shape)


def sample_gradient(spec: SourceSpec, grid, t: float = 0.0) -> Tuple[np.ndarray, ...]:
    return tuple(np.asarray(g, dtype=float) * np.ones(grid.shape)
                 for g in spec.gradient(grid.centers(), t))


def time_samples(spec: SourceSpec, horizon: float, step: float) -> list:
    """Times at which sup/inf over ``t >= 0`` is evaluated.

    ``inf`` stands for the ``t -> infinity`` limit, which is exact for the
    provided kinds because each is monotone or constant in t.
    """
    if not spec.time_dependent:
        return [0.0]
    n = max(1, int(math.ceil(horizon / step))) if horizon > 0 else 0
    ts = [min(i * step, horizon) for i in range(n + 1)]
    return ts + [math.inf]


def evaluate_at(spec: SourceSpec, x: Coords, t: float) -> np.ndarray:
    if math.isinf(t):
        return np.asarray(spec.limit()(x, 0.0), dtype=float) * np.ones(np.shape(x[0]))
    return np.asarray(spec(x, t), dtype=float) * np.ones(np.shape(x[0]))


def gradient_at(spec: SourceSpec, x: Coords, t: float):
    if math.isinf(t):
        return spec.limit().gradient(x, 0.0)
    return spec.gradient(x, t)


def from_dict(d: dict, lengths: Sequence[float]) -> SourceSpec:
    """Build a source from a plain mapping (already schema-checked)."""
    kind = d["kind"]
    if kind == "constant":
        return Constant(float(d["value"]))
    if kind == "gaussian_bump":
        return GaussianBump(float(d.get("background", 0.0)), float(d["amplitude"]),
                            tuple(d["center"]), float(d["width"]))
    if kind == "cosine_mode":
        return CosineMode(float(d["mean"]), float(d["amplitude"]),
                          tuple(d["modes"]), tuple(lengths))
    if kind == "separable_time_decay":
        return SeparableTimeDecay(from_dict(d["base"], lengths),
                                  float(d["target"]), float(d["rate"]))
    raise ValueError(f"unknown source kind {kind!r}")


def to_dict(spec: SourceSpec) -> dict:
    if isinstance(spec, Constant):
        return {"kind": "constant", "value": spec.value}
    if isinstance(spec, GaussianBump):
        return {"kind": "gaussian_bump", "background": spec.background,
                "amplitude": spec.amplitude, "center": list(spec.center),
                "width": spec.width}
    if isinstance(spec, CosineMode):
        return {"kind": "cosine_mode", "mean": spec.mean,
                "amplitude": spec.amplitude, "modes": list(spec.modes)}
    if isinstance(spec, SeparableTimeDecay):
        return {"kind": "separable_time_decay", "base": to_dict(spec.base),
                "target": spec.target, "rate": spec.rate}
    raise TypeError(type(spec))
