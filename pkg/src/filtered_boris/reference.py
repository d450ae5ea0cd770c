"""High-accuracy reference solutions and the error metrics used for convergence studies.

The oracle is Gragg's modified midpoint rule with Aitken-Neville extrapolation
(step-number sequence 2, 4, ..., 16, order 16) on a fixed macro step chosen so
that ``H |B(x0)| <= target_hb``. Every solve is repeated with half the macro
step and rejected unless the two agree to ``ref_tol`` at all samples.
"""
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GridMismatch, OracleNotConverged
from .fields import eval_B, eval_E, split_velocity
from .geom3 import cross, dot, norm

ORACLE_NAME = "gbs-midpoint-2..16"
ORACLE_VERSION = 1
GBS_SEQUENCE = (2, 4, 6, 8, 10, 12, 14, 16)


def rhs(model, x, v, t):
    """Right-hand side of ``x' = v``, ``v' = v x B(x, t) + E(x, t)``."""
    return v, cross(v, eval_B(model, x, t)) + eval_E(model, x, t)


def _deriv(model, t, y):
    x = y[:3]
    v = y[3:]
    a = cross(v, eval_B(model, x, t)) + eval_E(model, x, t)
    return np.concatenate((v, a))


def gbs_step(f, t, y, H, seq=GBS_SEQUENCE):
    """One extrapolated modified-midpoint step of size ``H``."""
    f0 = f(t, y)
    prev = None
    for j, n in enumerate(seq):
        hs = H / n
        z0 = y
        z1 = y + hs * f0
        for m in range(1, n):
            z0, z1 = z1, z0 + (2.0 * hs) * f(t + m * hs, z1)
        row = [z1]
        for k in range(1, j + 1):
            r = (n / seq[j - k]) ** 2
            row.append(row[k - 1] + (row[k - 1] - prev[k - 1]) / (r - 1.0))
        prev = row
    return prev[-1]


def _integrate(model, y0, dt, n_samples, m):
    f = lambda t, y: _deriv(model, t, y)  # noqa: E731
    H = dt / m
    out = np.empty((n_samples + 1, 6))
    out[0] = y0
    y = y0
    for i in range(n_samples):
        t0 = i * dt
        for j in range(m):
            y = gbs_step(f, t0 + j * H, y, H)
        out[i + 1] = y
    return out


@dataclass
class ReferenceSolution:
    """Samples ``(t_i, x(t_i), v(t_i))`` on ``t_i = i * dt``."""

    dt: float
    x: np.ndarray
    v: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def t(self):
        return np.arange(len(self.x)) * self.dt

    def __len__(self):
        return len(self.x)

    def subsample(self, h):
        """Restrict to the coarser grid ``n * h``; ``h`` must be a multiple of ``dt``."""
        k = int(round(h / self.dt))
        if k < 1 or abs(k * self.dt - h) > 1e-12 * h:
            raise GridMismatch(f"step {h!r} is not a multiple of reference spacing {self.dt!r}")
        if (len(self.x) - 1) % k:
            raise GridMismatch("reference end point is not on the coarse grid")
        return ReferenceSolution(h, self.x[::k], self.v[::k], dict(self.meta))

    def to_dict(self):
        return {
            "metadata": dict(self.meta, h=self.dt, n_steps=len(self.x) - 1),
            "t": self.t.tolist(),
            "x": self.x.tolist(),
            "v": self.v.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        meta = dict(d["metadata"])
        dt = meta.pop("h")
        meta.pop("n_steps", None)
        return cls(dt, np.array(d["x"], dtype=float), np.array(d["v"], dtype=float), meta)


def reference_solve(model, x0, v0, dt, n_samples, ref_tol=1e-10, target_hb=1.1, check=True):
    """Solve on ``t_i = i * dt`` for ``i = 0 .. n_samples``.

    Raises
    ------
    OracleNotConverged
        If halving the macro step changes some sample by more than ``ref_tol``
        (max-norm over positions and velocities).
    """
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    b0 = norm(eval_B(model, x0, 0.0))
    m = max(1, math.ceil(dt * b0 / target_hb))
    y0 = np.concatenate((x0, v0))
    fine = _integrate(model, y0, dt, n_samples, 2 * m)
    residual = None
    if check:
        coarse = _integrate(model, y0, dt, n_samples, m)
        residual = float(np.max(np.abs(fine - coarse)))
        if not residual <= ref_tol:
            raise OracleNotConverged(
                f"halving check failed: max change {residual:.3g} > ref_tol {ref_tol:.3g}"
            )
    meta = {
        "oracle": ORACLE_NAME,
        "oracle_version": ORACLE_VERSION,
        "substeps_per_sample": 2 * m,
        "h_ref": dt / (2 * m),
        "hb_ref": dt / (2 * m) * b0,
        "ref_tol": ref_tol,
        "halving_residual": residual,
    }
    return ReferenceSolution(dt, fine[:, :3].copy(), fine[:, 3:].copy(), meta)


# ---------------------------------------------------------------------------
# closed-form flow for uniform fields


def constant_field_solution(B, E, x0, v0, t):
    """Exact ``(x(t), v(t))`` for uniform ``B`` and ``E``.

    Decomposes the motion into free flight along ``B``, the ``E x B`` drift and
    a rigid gyration about ``B``; independent of the filter formulas.
    """
    B = np.asarray(B, dtype=float)
    E = np.asarray(E, dtype=float)
    b = norm(B)
    e3 = B / b
    e1 = np.cross(e3, (1.0, 0.0, 0.0) if abs(e3[0]) < 0.9 else (0.0, 1.0, 0.0))
    e1 /= norm(e1)
    e2 = np.cross(e3, e1)

    E_par = dot(E, e3)
    v_par = dot(v0, e3)
    drift = np.cross(E, B) / (b * b)
    w = v0 - v_par * e3 - drift
    w1, w2 = dot(w, e1), dot(w, e2)
    # v' = v x B rotates the perpendicular plane clockwise about e3 at rate b
    c, s = math.cos(b * t), math.sin(b * t)
    wt = (c * w1 + s * w2) * e1 + (-s * w1 + c * w2) * e2
    # integral of the rotation: (sin(bt) w + (1 - cos(bt)) (w x e3)) / b
    w_cross = w1 * (-e2) + w2 * e1
    xw = (s * w + (1.0 - c) * w_cross) / b
    x = x0 + (v_par * t + 0.5 * E_par * t * t) * e3 + drift * t + xw
    v = (v_par + E_par * t) * e3 + drift + wt
    return x, v


# ---------------------------------------------------------------------------
# error metrics


@dataclass(frozen=True)
class ErrorMetrics:
    err_x: float
    err_vpar: float
    err_vperp: float
    mode: str = "sup"

    def as_tuple(self):
        return (self.err_x, self.err_vpar, self.err_vperp)


ERR_MODES = ("sup", "endpoint")


def compute_errors(traj, ref, model, mode="sup"):
    """Position and parallel/perpendicular velocity errors against ``ref``.

    ``mode="sup"`` takes the maximum over the grid, which must match the
    reference grid; ``mode="endpoint"`` compares final states only and needs
    matching end times. Numerical velocities are split along ``B(x^n, t^n)``, exact ones
    along ``B(x(t^n), t^n)``.
    """
    if mode not in ERR_MODES:
        raise ValueError(f"unknown error mode {mode!r}")
    if mode == "sup":
        if len(traj) != len(ref) or abs(traj.h - ref.dt) > 1e-12 * traj.h:
            raise GridMismatch(
                f"trajectory grid ({len(traj)} x {traj.h!r}) != reference grid ({len(ref)} x {ref.dt!r})"
            )
        pairs = [(n, n) for n in range(len(traj))]
    else:
        t_traj = (len(traj) - 1) * traj.h
        t_ref = (len(ref) - 1) * ref.dt
        if abs(t_traj - t_ref) > 1e-12 * max(t_ref, 1.0):
            raise GridMismatch(f"end times differ: trajectory {t_traj!r}, reference {t_ref!r}")
        pairs = [(len(traj) - 1, len(ref) - 1)]
    ex = epar = eperp = 0.0
    for n, i in pairs:
        t = n * traj.h
        xn, vn = traj.x[n], traj.v_node[n]
        xr, vr = ref.x[i], ref.v[i]
        pn, qn = split_velocity(vn, eval_B(model, xn, t))
        pr, qr = split_velocity(vr, eval_B(model, xr, t))
        ex = max(ex, norm(xn - xr))
        epar = max(epar, norm(pn - pr))
        eperp = max(eperp, norm(qn - qr))
    return ErrorMetrics(ex, epar, eperp, mode)


# ---------------------------------------------------------------------------
# cache


class ReferenceCache:
    """Memoizes reference solutions in memory and, optionally, as JSON files.

    The directory defaults to ``$BORIS_CACHE_DIR``; without it only the
    in-memory layer is used. Models named ``custom`` are never cached on disk.
    """

    def __init__(self, directory=None):
        if directory is None:
            directory = os.environ.get("BORIS_CACHE_DIR") or None
        self.directory = Path(directory) if directory else None
        self._mem = {}

    @staticmethod
    def key(model, x0, v0, dt, n_samples, ref_tol):
        payload = {
            "field": model.name,
            "params": model.params,
            "epsilon": repr(float(model.epsilon)),
            "x0": [repr(float(a)) for a in x0],
            "v0": [repr(float(a)) for a in v0],
            "dt": repr(float(dt)),
            "n": int(n_samples),
            "ref_tol": repr(float(ref_tol)),
            "oracle": [ORACLE_NAME, ORACLE_VERSION],
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:24]

    def get(self, model, x0, v0, dt, n_samples, ref_tol=1e-10):
        key = self.key(model, x0, v0, dt, n_samples, ref_tol)
        if key in self._mem:
            return self._mem[key]
        path = None
        if self.directory is not None and model.name != "custom":
            path = self.directory / f"ref-{model.name}-{key}.json"
            if path.exists():
                ref = ReferenceSolution.from_dict(json.loads(path.read_text()))
                self._mem[key] = ref
                return ref
        ref = reference_solve(model, x0, v0, dt, n_samples, ref_tol=ref_tol)
        self._mem[key] = ref
        if path is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(ref.to_dict()))
            tmp.replace(path)
        return ref
