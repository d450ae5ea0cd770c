"""Standard Boris, filtered Boris (explicit/implicit) and two-point filtered Boris.

All steps use the staggered form ``(x^n, v^{n-1/2}) -> (x^{n+1}, v^{n+1/2})`` and
reconstruct the node velocity ``v^n`` on the way. :func:`one_step_map` is the
equivalent map on ``(x^n, v^n)``.
"""
import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import filters
from .errors import BorisError, NearResonance, NoConvergence, StepError, ZeroField
from .fields import (
    OK,
    ResonanceGuard,
    check_resonance,
    eval_B,
    eval_E,
    eval_point,
    guiding_center,
)
from .geom3 import cross, dot, hat_matrix, norm, solve3


class Variant(str, enum.Enum):
    BORIS = "boris"
    EXP_A = "exp-a"
    IMP_A = "imp-a"
    TWO_POINT = "twop-a"

    @property
    def implicit(self):
        return self in (Variant.IMP_A, Variant.TWO_POINT)


@dataclass(frozen=True)
class MethodConfig:
    """Integrator choice and fixed-point controls.

    ``fp_max_iters`` counts updates of the field evaluation point; 0 degrades the
    implicit variants to their explicit start (evaluation at ``x^n``).
    """

    variant: Variant = Variant.IMP_A
    fp_max_iters: int = 2
    fp_tol: float = 1e-13
    guard: ResonanceGuard = field(default_factory=ResonanceGuard)
    guard_policy: str = "flag"

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.fp_max_iters < 0:
            raise ValueError("fp_max_iters must be >= 0")
        if self.guard_policy not in ("flag", "reject"):
            raise ValueError(f"unknown guard policy {self.guard_policy!r}")

    @property
    def fp_mode(self):
        if not self.variant.implicit:
            return "explicit"
        return f"iters={self.fp_max_iters},tol={self.fp_tol:g}"


@dataclass(frozen=True)
class ParticleState:
    n: int
    t: float
    x: np.ndarray
    v_half: np.ndarray  # v^{n-1/2}
    v_node: Optional[np.ndarray] = None

    @classmethod
    def at(cls, n, h, x, v_half, v_node=None):
        return cls(n, n * h, x, v_half, v_node)


@dataclass(frozen=True)
class StepResult:
    state: ParticleState  # step n+1, node velocity not yet known
    v_node: np.ndarray  # reconstructed v^n
    resonance: object = OK
    fp_iters: int = 0
    fp_residual: float = 0.0
    fp_increments: tuple = ()


# ---------------------------------------------------------------------------
# helpers


class _Frame:
    """Field quantities at ``(x^n, t^n)`` shared by every variant."""

    __slots__ = ("x", "t", "B", "E", "b", "psiE", "upsE", "resonance")

    def __init__(self, model, config, x, t, h):
        self.x = x
        self.t = t
        self.B = eval_B(model, x, t)
        self.E = eval_E(model, x, t)
        self.b = norm(self.B)
        self.resonance = check_resonance(config.guard, h, self.b) if self.b > 0 else OK
        if not self.resonance and config.guard_policy == "reject":
            raise NearResonance(self.resonance)
        if config.variant is Variant.BORIS:
            self.psiE = self.upsE = None
        elif self.b == 0.0:
            raise ZeroField(f"filtered step needs a nonzero field at x = {x}")
        else:
            self.psiE = filters.apply_psi(h, self.B, self.E)
            self.upsE = h * filters.apply_upsilon(h, self.B, self.E)


def _iterate(update, x, config):
    """Fixed-point iteration for the field evaluation point, started at ``x``."""
    point = x
    scale = max(1.0, norm(x))
    increments = []
    for _ in range(config.fp_max_iters):
        new = update(point)
        d = norm(new - point) / scale
        increments.append(d)
        point = new
        if d <= config.fp_tol:
            break
    if (
        len(increments) >= 2
        and increments[-1] > 1e3 * config.fp_tol
        and increments[-1] >= increments[-2]
    ):
        raise NoConvergence(f"fixed-point increments not contracting: {increments}")
    residual = increments[-1] if increments else 0.0
    return point, len(increments), residual, tuple(increments)


def _phi2_matrix(h, Bgc):
    return filters.rodriguez_coeffs("phi2", h, norm(Bgc)).matrix(Bgc)


def _two_point_kernel(h, B, b):
    """Dense ``h/2 * Phi1(h hat(B)) hat(B)``."""
    return 0.5 * h * filters.rodriguez_coeffs("phi1", h, b).matrix(B) @ hat_matrix(B)


def _field_at(model, point, fr):
    if point is fr.x:
        return fr.B
    return eval_B(model, point, fr.t)


def _check_variant(config, allowed):
    if config.variant not in allowed:
        raise ValueError(f"variant {config.variant.value} not handled here")


# ---------------------------------------------------------------------------
# staggered steps


def boris_rotate(h, B, w):
    """Closed-form solution ``v`` of ``v - w = h/2 (v + w) x B``."""
    tv = 0.5 * h * B
    vp = w + cross(w, tv)
    s = (2.0 / (1.0 + dot(tv, tv))) * tv
    return w + cross(vp, s)


def standard_boris_step(state, model, h, config=None):
    """Classical Boris push: half kick, rotation, half kick, drift."""
    config = config or MethodConfig(Variant.BORIS)
    fr = _Frame(model, config, state.x, state.t, h)
    w = state.v_half + 0.5 * h * fr.E
    v_minus = boris_rotate(h, fr.B, w)
    v_half = v_minus + 0.5 * h * fr.E
    nxt = ParticleState.at(state.n + 1, h, state.x + h * v_half, v_half)
    return StepResult(nxt, 0.5 * (v_minus + w), fr.resonance)


def node_velocity(x_prev, x_next, B_bar, B_n, E_n, h):
    """``Phi1(h hat(B_bar)) (x_next - x_prev) / 2h - h Upsilon(h hat(B_n)) E_n``."""
    d = (x_next - x_prev) / (2.0 * h)
    return filters.apply_phi1(h, B_bar, d) - h * filters.apply_upsilon(h, B_n, E_n)


def filtered_step(state, model, config, h):
    """One step of the filtered Boris algorithm with ``theta = 1`` or optimal ``theta``."""
    _check_variant(config, (Variant.EXP_A, Variant.IMP_A))
    fr = _Frame(model, config, state.x, state.t, h)
    w = state.v_half + 0.5 * h * fr.psiE

    def advance(point):
        Bbar = _field_at(model, point, fr)
        v_minus = filters.apply_exp_neg(h, Bbar, w)
        # central difference via (x^{n+1} - x^{n-1}) / 2h = (v_- + v_+) / 2
        v_node = filters.apply_phi1(h, Bbar, 0.5 * (v_minus + w)) - fr.upsE
        return v_minus, v_node

    iters, residual, incs = 0, 0.0, ()
    point = fr.x
    if config.variant is Variant.IMP_A:
        hb = h * fr.b

        def update(p):
            _, v_node = advance(p)
            return eval_point(fr.x, guiding_center(fr.x, v_node, fr.B), hb)

        point, iters, residual, incs = _iterate(update, fr.x, config)
    v_minus, v_node = advance(point)
    v_half = v_minus + 0.5 * h * fr.psiE
    nxt = ParticleState.at(state.n + 1, h, fr.x + h * v_half, v_half)
    return StepResult(nxt, v_node, fr.resonance, iters, residual, incs)


def two_point_step(state, model, config, h):
    """One step of the two-point filtered Boris algorithm.

    The rotation line is solved as the 3x3 system
    ``(Phi2(h hat(B_gc)) + h/2 Phi1(h hat(B)) hat(B)) v_- = (Phi2 - h/2 Phi1 hat(B)) v_+``.
    """
    _check_variant(config, (Variant.TWO_POINT,))
    fr = _Frame(model, config, state.x, state.t, h)
    w = state.v_half + 0.5 * h * fr.psiE
    K = _two_point_kernel(h, fr.B, fr.b)

    def advance(point):
        P2 = _phi2_matrix(h, _field_at(model, point, fr))
        v_minus = solve3(P2 + K, (P2 - K) @ w)
        v_node = filters.apply_phi1(h, fr.B, 0.5 * (v_minus + w)) - fr.upsE
        return v_minus, v_node

    def update(p):
        _, v_node = advance(p)
        return guiding_center(fr.x, v_node, fr.B)

    point, iters, residual, incs = _iterate(update, fr.x, config)
    v_minus, v_node = advance(point)
    v_half = v_minus + 0.5 * h * fr.psiE
    nxt = ParticleState.at(state.n + 1, h, fr.x + h * v_half, v_half)
    return StepResult(nxt, v_node, fr.resonance, iters, residual, incs)


def step(state, model, config, h):
    """Dispatch to the step of ``config.variant``."""
    v = config.variant
    if v is Variant.BORIS:
        return standard_boris_step(state, model, h, config)
    if v is Variant.TWO_POINT:
        return two_point_step(state, model, config, h)
    return filtered_step(state, model, config, h)


# ---------------------------------------------------------------------------
# node-velocity relations


def _half_velocity(fr, model, config, v, h, sign):
    """``v^{n +- 1/2}`` from the node state ``(x^n, v^n)``; ``sign=+1`` gives ``n+1/2``."""
    variant = config.variant
    if variant is Variant.TWO_POINT:
        u = v + fr.upsE
        s = filters.apply_sinch(h, fr.B, u)
        x_gc = guiding_center(fr.x, v, fr.B)
        Bgc = eval_B(model, x_gc, fr.t)
        lam = solve3(_phi2_matrix(h, Bgc), filters.apply_phi1(h, fr.B, h * cross(fr.B, s)))
        return s - sign * 0.5 * lam + sign * 0.5 * h * fr.psiE
    if variant is Variant.IMP_A:
        x_gc = guiding_center(fr.x, v, fr.B)
        Bbar = eval_B(model, eval_point(fr.x, x_gc, h * fr.b), fr.t)
    else:
        # explicit filtered start is also used for the standard Boris method
        Bbar = fr.B
    u = v + fr.upsE
    return filters.apply_varphi1(sign, h, Bbar, u) + sign * 0.5 * h * fr.psiE


def starting_velocity(x0, v0, model, config, h, sign=1, t0=0.0):
    """Staggered starting value ``v^{1/2}`` (or ``v^{-1/2}`` with ``sign=-1``)."""
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if config.variant is Variant.BORIS:
        if norm(eval_B(model, x0, t0)) == 0.0:
            # zero-field limit of the filtered start
            return v0 + sign * 0.5 * h * eval_E(model, x0, t0)
        config = MethodConfig(Variant.EXP_A, guard=config.guard)
    fr = _Frame(model, config, x0, t0, h)
    return _half_velocity(fr, model, config, v0, h, sign)


def _boris_node_from_half(fr, v_half, h):
    """Solve ``(I + h/2 hat(B)) v = v^{n-1/2} + h/2 E`` in closed form."""
    a = 0.5 * h
    r = v_half + a * fr.E
    B = fr.B
    return (r - a * cross(B, r) + a * a * dot(B, r) * B) / (1.0 + a * a * dot(B, B))


def one_step_map(x, v, model, config, h, t=0.0):
    """Map ``(x^n, v^n) -> (x^{n+1}, v^{n+1})``; ``h`` may be negative."""
    variant = config.variant
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    fr = _Frame(model, config, x, t, h)
    if variant is Variant.BORIS:
        v_ph = v - 0.5 * h * cross(fr.B, v) + 0.5 * h * fr.E
    else:
        v_ph = _half_velocity(fr, model, config, v, h, +1)
    x1 = x + h * v_ph
    fr1 = _Frame(model, config, x1, t + h, h)
    if variant is Variant.BORIS:
        return x1, _boris_node_from_half(fr1, v_ph, h)

    r = v_ph + 0.5 * h * fr1.psiE

    if variant is Variant.TWO_POINT:
        K = _two_point_kernel(h, fr1.B, fr1.b)

        def solve_v(point):
            P2 = _phi2_matrix(h, _field_at(model, point, fr1))
            z = solve3(P2 + K, P2 @ r)
            return filters.apply_phi1(h, fr1.B, z) - fr1.upsE

        def update(p):
            return guiding_center(x1, solve_v(p), fr1.B)

    else:
        hb = h * fr1.b

        def solve_v(point):
            Bbar = _field_at(model, point, fr1)
            return filters.apply_inv_varphi1(-1, h, Bbar, r) - fr1.upsE

        def update(p):
            return eval_point(x1, guiding_center(x1, solve_v(p), fr1.B), hb)

    point = x1
    if variant.implicit:
        point, *_ = _iterate(update, x1, config)
    return x1, solve_v(point)


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    """States ``n = 0 .. n_steps`` on the uniform grid ``t^n = n h``.

    ``v_half[n]`` is ``v^{n-1/2}``; ``v_node[n]`` the reconstructed ``v^n``.
    Per-step flags: ``res_k`` (offending harmonic, 0 if none), ``res_value``,
    ``fp_iters``, ``fp_residual``.
    """

    h: float
    x: np.ndarray
    v_half: np.ndarray
    v_node: np.ndarray
    res_k: np.ndarray
    res_value: np.ndarray
    fp_iters: np.ndarray
    fp_residual: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_steps(self):
        return len(self.x) - 1

    @property
    def t(self):
        return np.arange(len(self.x)) * self.h

    @property
    def flagged(self):
        return bool(np.any(self.res_k > 0))

    def __len__(self):
        return len(self.x)

    def state(self, n):
        return ParticleState.at(n, self.h, self.x[n], self.v_half[n], self.v_node[n])

    def __iter__(self):
        return (self.state(n) for n in range(len(self)))

    def to_dict(self):
        return {
            "metadata": dict(self.meta, h=self.h, n_steps=self.n_steps),
            "t": self.t.tolist(),
            "x": self.x.tolist(),
            "v": self.v_node.tolist(),
            "v_half": self.v_half.tolist(),
            "res_k": self.res_k.tolist(),
            "res_value": self.res_value.tolist(),
            "fp_iters": self.fp_iters.tolist(),
            "fp_residual": self.fp_residual.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        meta = dict(d["metadata"])
        h = meta.pop("h")
        meta.pop("n_steps", None)
        return cls(
            h=h,
            x=np.array(d["x"], dtype=float),
            v_half=np.array(d["v_half"], dtype=float),
            v_node=np.array(d["v"], dtype=float),
            res_k=np.array(d["res_k"], dtype=int),
            res_value=np.array(d["res_value"], dtype=float),
            fp_iters=np.array(d["fp_iters"], dtype=int),
            fp_residual=np.array(d["fp_residual"], dtype=float),
            meta=meta,
        )


def n_steps_for(h, t_end):
    if not (h > 0 and t_end > 0):
        raise ValueError("h and t_end must be positive")
    n = int(round(t_end / h))
    if n < 1 or abs(n * h - t_end) > 1e-9 * t_end:
        raise ValueError(f"t_end = {t_end!r} is not an integer multiple of h = {h!r}")
    return n


def run_trajectory(x0, v0, model, config, h, t_end):
    """Integrate from ``(x0, v0)`` at ``t = 0`` for ``round(t_end / h)`` steps.

    Errors raised inside a step are re-raised as :class:`StepError` carrying the
    step index.
    """
    N = n_steps_for(h, t_end)
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    xs = np.empty((N + 1, 3))
    vh = np.empty((N + 1, 3))
    vn = np.empty((N + 1, 3))
    res_k = np.zeros(N + 1, dtype=int)
    res_value = np.ones(N + 1)
    fp_iters = np.zeros(N + 1, dtype=int)
    fp_res = np.zeros(N + 1)

    try:
        v_plus = starting_velocity(x0, v0, model, config, h, +1)
        v_minus = starting_velocity(x0, v0, model, config, h, -1)
    except BorisError as exc:
        raise StepError(0, exc) from exc
    status = check_resonance(config.guard, h, norm(eval_B(model, x0, 0.0)))
    xs[0], vh[0], vn[0] = x0, v_minus, v0
    res_k[0], res_value[0] = status.k or 0, status.value

    state = ParticleState.at(1, h, x0 + h * v_plus, v_plus)
    for n in range(1, N + 1):
        try:
            out = step(state, model, config, h)
        except BorisError as exc:
            raise StepError(n, exc) from exc
        xs[n], vh[n], vn[n] = state.x, state.v_half, out.v_node
        res_k[n] = out.resonance.k or 0
        res_value[n] = out.resonance.value
        fp_iters[n] = out.fp_iters
        fp_res[n] = out.fp_residual
        state = out.state

    meta = {
        "method": config.variant.value,
        "fp_mode": config.fp_mode,
        "guard": {"c_min": config.guard.c_min, "k_max": config.guard.k_max},
        "guard_policy": config.guard_policy,
        "start": "filtered-start(theta=1)" if config.variant is Variant.BORIS else "filtered-start",
        "field": model.name,
        "epsilon": model.epsilon,
        "x0": x0.tolist(),
        "v0": v0.tolist(),
    }
    return Trajectory(h, xs, vh, vn, res_k, res_value, fp_iters, fp_res, meta)


__all__ = [
    "Variant",
    "MethodConfig",
    "ParticleState",
    "StepResult",
    "Trajectory",
    "standard_boris_step",
    "filtered_step",
    "two_point_step",
    "step",
    "node_velocity",
    "starting_velocity",
    "one_step_map",
    "run_trajectory",
    "boris_rotate",
]
