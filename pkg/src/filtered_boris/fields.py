"""Field models in the maximal-ordering scaling, presets, and the resonance guard.

The magnetic field is always assembled as ``B(x, t) = B0(eps * x) / eps + B1(x, t)``
so the strong and perturbation parts stay separately inspectable.
"""
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateField, ZeroField
from .filters import sinc, theta
from .geom3 import cross, dot, norm, vec3

_ZERO = np.zeros(3)

# r**2 below which the benchmark potential is treated as singular
PRESET_DEG_TOL = 1e-12


def _zero_b1(x, t):
    return _ZERO


def _zero_e(x, t):
    return _ZERO


@dataclass(frozen=True)
class FieldModel:
    """Electromagnetic field with strong part ``B0`` and perturbation ``B1``.

    ``B0`` takes the slow variable ``eps * x``; ``B1`` and ``E`` take ``(x, t)``.
    Pass ``strict=False`` to build test fields that violate ``|B0(0)| >= 1``.
    """

    epsilon: float
    B0: Callable
    B1: Callable = _zero_b1
    E: Callable = _zero_e
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)
    strict: bool = True

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        if self.strict and norm(self.B0(_ZERO)) < 1.0:
            raise ValueError("strong field must satisfy |B0(0)| >= 1")

    def with_epsilon(self, epsilon):
        return replace(self, epsilon=epsilon)


def eval_B(model, x, t):
    eps = model.epsilon
    return model.B0(eps * x) / eps + model.B1(x, t)


def eval_E(model, x, t):
    return model.E(x, t)


# ---------------------------------------------------------------------------
# presets

_E3 = vec3(0.0, 0.0, 1.0)


def _paper_b0(y):
    return _E3


def _paper_b1(x, t):
    return np.array((-x[0], 0.0, x[2]))


def _paper_e(x, t):
    x1, x2 = x[0], x[1]
    r2 = x1 * x1 + x2 * x2
    if r2 <= PRESET_DEG_TOL:
        raise DegenerateField(f"potential 1/r is singular at x = {x}")
    s = r2 ** -1.5
    return np.array((x1 * s, x2 * s, 0.0))


def paper_sec8(epsilon, electric=True):
    """``B = (0, 0, 1)/eps + (-x1, 0, x3)``, ``E = -grad(1/sqrt(x1**2 + x2**2))``."""
    return FieldModel(
        epsilon=epsilon,
        B0=_paper_b0,
        B1=_paper_b1,
        E=_paper_e if electric else _zero_e,
        name="paper-sec8" if electric else "paper-sec8-noE",
    )


def constant_b(epsilon, direction=(0.0, 0.0, 1.0)):
    """Uniform field ``direction / eps`` with no electric field."""
    d = vec3(direction)
    return FieldModel(
        epsilon=epsilon,
        B0=lambda y: d,
        name="constant-B",
        params={"direction": d.tolist()},
    )


def constant_be(epsilon, direction=(0.0, 0.0, 1.0), e_field=(0.3, -0.2, 0.1)):
    """Uniform magnetic and electric fields."""
    d = vec3(direction)
    e = vec3(e_field)
    return FieldModel(
        epsilon=epsilon,
        B0=lambda y: d,
        E=lambda x, t: e,
        name="constant-BE",
        params={"direction": d.tolist(), "e_field": e.tolist()},
    )


PRESETS = {
    "paper-sec8": paper_sec8,
    "constant-B": constant_b,
    "constant-BE": constant_be,
}


def make_preset(name, epsilon):
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown field preset {name!r}; choose from {sorted(PRESETS)}")
    return factory(epsilon)


# ---------------------------------------------------------------------------
# geometry relative to the local field


def guiding_center(x, v, B):
    """Guiding-center approximation ``x + (v x B) / |B|**2``."""
    b2 = dot(B, B)
    if b2 == 0.0:
        raise ZeroField("guiding center undefined for vanishing field")
    return x + cross(v, B) / b2


def eval_point(x, x_gc, hb, variant="optimal"):
    """Point ``theta * x + (1 - theta) * x_gc`` on the line through ``x`` and ``x_gc``.

    ``variant="one"`` uses ``theta = 1`` and returns ``x`` itself.
    """
    if variant == "one":
        return x
    if variant != "optimal":
        raise ValueError(f"unknown theta variant {variant!r}")
    th = theta(hb)
    return th * x + (1.0 - th) * x_gc


def split_velocity(v, B):
    """Split ``v`` into components parallel and perpendicular to ``B``."""
    b2 = dot(B, B)
    if b2 == 0.0:
        raise ZeroField("velocity split undefined for vanishing field")
    v_par = (dot(B, v) / b2) * B
    return v_par, v - v_par


# ---------------------------------------------------------------------------
# non-resonance guard


@dataclass(frozen=True)
class ResonanceGuard:
    c_min: float = 0.05
    k_max: int = 3

    def __post_init__(self):
        if not 0.0 < self.c_min < 1.0:
            raise ValueError("c_min must lie in (0, 1)")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")


@dataclass(frozen=True)
class ResonanceStatus:
    ok: bool
    k: Optional[int] = None
    value: float = 1.0

    def __bool__(self):
        return self.ok


OK = ResonanceStatus(True)


def check_resonance(guard, h, b):
    """Check ``|sinc(k h b / 2)| >= c_min`` for ``k = 1 .. k_max``.

    Returns the first offending harmonic (status, not exception).
    """
    hb = abs(h) * b
    for k in range(1, guard.k_max + 1):
        s = abs(sinc(0.5 * k * hb))
        if s < guard.c_min:
            return ResonanceStatus(False, k, s)
    return OK

