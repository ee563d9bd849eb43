"""Backward matrix ODE systems for the lifted LQ game and the feedback gain.

The terminal-value systems are integrated with classical fixed-step RK4
marching from T down to 0 in the original time variable, so terminal
conditions are imposed exactly; storage is then time-ordered for forward
consumers.  Stage values of previously solved paths are recovered by cubic
Hermite interpolation with exact derivatives from their own equations, which
keeps every solve at 4th order without re-solving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson

from .game_model import LiftedMatrices, LqGameSpec, build_lifted_matrices

__all__ = [
    "TimeGrid",
    "RiccatiBlowupError",
    "RiccatiSolution",
    "integrate_backward",
    "assemble_gain",
    "solve_m0",
    "solve_m1",
    "solve_m2",
    "solve_m3",
    "solve_riccati",
    "default_grid",
    "interp_path",
]

BLOWUP_LIMIT = 1e12


class RiccatiBlowupError(RuntimeError):
    """Non-finite or runaway value during backward integration."""

    def __init__(self, message: str, t: float, knot: int):
        super().__init__(message)
        self.t = t
        self.knot = knot


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing knots with exact endpoints 0 and T."""

    t: np.ndarray
    uniform: bool = True

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 1 or t.size < 3:
            raise ValueError("grid needs at least 3 knots (n_steps >= 2)")
        if np.any(np.diff(t) <= 0):
            raise ValueError("grid knots must be strictly increasing")
        if t[0] != 0.0:
            raise ValueError("grid must start at t = 0")
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "uniform", bool(np.allclose(np.diff(t), t[1] - t[0], rtol=1e-12)))

    @property
    def n_steps(self) -> int:
        return self.t.size - 1

    @property
    def horizon(self) -> float:
        return float(self.t[-1])

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.t)

    @staticmethod
    def make_uniform(horizon: float, n_steps: int) -> "TimeGrid":
        if n_steps < 2:
            raise ValueError("n_steps must be >= 2")
        t = np.linspace(0.0, float(horizon), n_steps + 1)
        t[-1] = float(horizon)
        return TimeGrid(t=t)


def default_grid(horizon: float) -> TimeGrid:
    return TimeGrid.make_uniform(horizon, max(200, math.ceil(400 * horizon)))


def integrate_backward(rhs, terminal, grid: TimeGrid, project=None) -> np.ndarray:
    """Classical RK4 from t = T down to t = 0 on a flat state vector.

    One step per grid interval (no substeps).  ``project`` (optional) is
    applied to the state after each step, e.g. a symmetry projection.
    Returns values at every knot in forward time order.  Raises
    RiccatiBlowupError when any entry leaves [-1e12, 1e12] or turns
    non-finite, reporting the knot where integration failed.
    """
    t = grid.t
    y = np.array(terminal, dtype=float).ravel()
    out = np.empty((t.size, y.size))
    out[-1] = y
    for k in range(t.size - 2, -1, -1):
        h = t[k + 1] - t[k]
        t1 = t[k + 1]
        k1 = rhs(t1, y)
        k2 = rhs(t1 - 0.5 * h, y - 0.5 * h * k1)
        k3 = rhs(t1 - 0.5 * h, y - 0.5 * h * k2)
        k4 = rhs(t1 - h, y - h * k3)
        y = y - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if project is not None:
            y = project(y)
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > BLOWUP_LIMIT:
            raise RiccatiBlowupError(
                f"backward integration blew up at t = {t[k]:.6g} (knot {k})", float(t[k]), k
            )
        out[k] = y
    return out


class HermitePath:
    """Cubic Hermite evaluator for a stored path with known derivatives.

    Knot values are reproduced exactly; interior evaluations are O(h^4)
    accurate, which preserves the 4th order of RK4 stages that interrogate a
    previously solved path at half-step times.
    """

    def __init__(self, t: np.ndarray, values: np.ndarray, derivs: np.ndarray):
        self.t = np.asarray(t, dtype=float)
        self.values = values
        self.derivs = derivs

    def __call__(self, s: float) -> np.ndarray:
        t = self.t
        k = int(np.searchsorted(t, s, side="right") - 1)
        k = min(max(k, 0), t.size - 2)
        h = t[k + 1] - t[k]
        tau = (s - t[k]) / h
        if tau == 0.0:
            return self.values[k]
        if tau == 1.0:
            return self.values[k + 1]
        h00 = (1 + 2 * tau) * (1 - tau) ** 2
        h10 = tau * (1 - tau) ** 2
        h01 = tau**2 * (3 - 2 * tau)
        h11 = tau**2 * (tau - 1)
        return (
            h00 * self.values[k]
            + h10 * h * self.derivs[k]
            + h01 * self.values[k + 1]
            + h11 * h * self.derivs[k + 1]
        )


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def assemble_gain(m0: np.ndarray, m1: np.ndarray, i_tilde: np.ndarray) -> np.ndarray:
    """Feedback gain: [bottom-rows(M0) | top-rows(M0)] + i_tilde @ M1."""
    two_n = m0.shape[0]
    n = two_n // 2
    if m0.shape != (two_n, two_n) or m1.shape != (2 * two_n, 2 * two_n):
        raise ValueError(f"inconsistent shapes: m0 {m0.shape}, m1 {m1.shape}")
    if i_tilde.shape != (n, 2 * two_n):
        raise ValueError(f"i_tilde must be {n}x{2 * two_n}, got {i_tilde.shape}")
    return np.hstack([m0[n:, :], m0[:n, :]]) + i_tilde @ m1


def _m0_rhs(lifted: LiftedMatrices):
    q = lifted.q
    n = lifted.n_players

    def rhs(t, flat):
        m = flat.reshape(2 * n, 2 * n)
        a2 = np.concatenate([lifted.a_diag(t)] * 2)
        return -(a2[:, None] * m + m * a2[None, :] + q).ravel()

    return rhs


def solve_m0(lifted: LiftedMatrices, grid: TimeGrid) -> np.ndarray:
    """Backward linear ODE for the interaction value matrix M0.

    dM0/dt + A^T M0 + M0 A + Q = 0 with M0(T) = Q_bar; the path is
    re-symmetrized after every step (a projection against floating-point
    drift, not a correction of the dynamics).
    """
    n = lifted.n_players

    def project(flat):
        return _symmetrize(flat.reshape(2 * n, 2 * n)).ravel()

    flat = integrate_backward(_m0_rhs(lifted), lifted.q_bar, grid, project=project)
    return flat.reshape(grid.t.size, 2 * n, 2 * n)


def _hermite_from(grid, path, rhs):
    derivs = np.stack([rhs(t, path[k].ravel()).reshape(path[k].shape) for k, t in enumerate(grid.t)])
    return HermitePath(grid.t, path, derivs)


def solve_m1(lifted: LiftedMatrices, m0: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Backward Riccati equation for the quadratic sensitivity matrix M1.

    dM1/dt + diag(A,A) M1 + M1 diag(A,A) - K^T K = 0 with M1(T) = 0, where
    K couples M0 and M1 through the gain assembly.  M0 at RK4 stage times is
    obtained from the stored path by cubic Hermite interpolation with exact
    derivatives from its own equation.
    """
    n = lifted.n_players
    rhs0 = _m0_rhs(lifted)
    m0_interp = _hermite_from(grid, m0, rhs0)
    i_tilde = lifted.i_tilde

    def rhs(t, flat):
        m1 = flat.reshape(4 * n, 4 * n)
        a4 = np.concatenate([lifted.a_diag(t)] * 4)
        k_gain = assemble_gain(m0_interp(t), m1, i_tilde)
        return (-(a4[:, None] * m1 + m1 * a4[None, :]) + k_gain.T @ k_gain).ravel()

    def project(flat):
        return _symmetrize(flat.reshape(4 * n, 4 * n)).ravel()

    try:
        flat = integrate_backward(rhs, np.zeros((4 * n, 4 * n)), grid, project=project)
    except RiccatiBlowupError as exc:
        raise RiccatiBlowupError(
            f"Riccati solution does not exist on [0, T] at this horizon: {exc}", exc.t, exc.knot
        ) from exc
    return flat.reshape(grid.t.size, 4 * n, 4 * n)


def solve_m2(lifted: LiftedMatrices, m0: np.ndarray, m1: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Backward linear ODE for the affine term M2.

    dM2/dt + diag(A,A) M2 - K^T i_tilde M2 = 0 with terminal value
    vcat(p_vec, 0).
    """
    n = lifted.n_players
    m0_interp = _hermite_from(grid, m0, _m0_rhs(lifted))
    i_tilde = lifted.i_tilde

    def rhs1(t, flat):
        m1_t = flat.reshape(4 * n, 4 * n)
        a4 = np.concatenate([lifted.a_diag(t)] * 4)
        k_gain = assemble_gain(m0_interp(t), m1_t, i_tilde)
        return (-(a4[:, None] * m1_t + m1_t * a4[None, :]) + k_gain.T @ k_gain).ravel()

    m1_interp = _hermite_from(grid, m1, rhs1)

    def rhs(t, m2):
        a4 = np.concatenate([lifted.a_diag(t)] * 4)
        k_gain = assemble_gain(m0_interp(t), m1_interp(t), i_tilde)
        return -a4 * m2 + k_gain.T @ (i_tilde @ m2)

    terminal = np.concatenate([lifted.p_vec, np.zeros(2 * n)])
    return integrate_backward(rhs, terminal, grid)


def solve_m3(
    lifted: LiftedMatrices,
    m0: np.ndarray,
    m1: np.ndarray,
    m2: np.ndarray,
    grid: TimeGrid,
) -> np.ndarray:
    """Scalar constant term M3 by backward quadrature.

    The equation has no M3 on its right side, so
    M3(t) = int_t^T [ tr(Sigma Sigma^T (M0 + J^T M1 J)) - |i_tilde M2|^2 ] ds
    with J = vcat(I, I/2); the integral is composite Simpson on the grid.
    """
    n = lifted.n_players
    j_mat = np.vstack([np.eye(2 * n), 0.5 * np.eye(2 * n)])
    integrand = np.empty(grid.t.size)
    for k, t in enumerate(grid.t):
        sig2 = lifted.sigma_diag(t) ** 2
        inner = m0[k] + j_mat.T @ m1[k] @ j_mat
        im2 = lifted.i_tilde @ m2[k]
        integrand[k] = float(sig2 @ np.diag(inner)[:n]) - float(im2 @ im2)
    cum = cumulative_simpson(integrand, x=grid.t, initial=0.0)
    return cum[-1] - cum


def interp_path(t_src: np.ndarray, values: np.ndarray, t_dst: np.ndarray) -> np.ndarray:
    """Linear interpolation of a knot-indexed array path onto new times."""
    t_src = np.asarray(t_src, dtype=float)
    t_dst = np.asarray(t_dst, dtype=float)
    idx = np.clip(np.searchsorted(t_src, t_dst, side="right") - 1, 0, t_src.size - 2)
    w = (t_dst - t_src[idx]) / (t_src[idx + 1] - t_src[idx])
    w = np.clip(w, 0.0, 1.0).reshape((-1,) + (1,) * (values.ndim - 1))
    return (1.0 - w) * values[idx] + w * values[idx + 1]


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    """Time-gridded M0, M1, M2, M3 paths with the assembled feedback gain."""

    grid: TimeGrid
    m0: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    m3: np.ndarray
    k_gain: np.ndarray
    i_tilde: np.ndarray
    residual_report: dict

    @property
    def n_players(self) -> int:
        return self.m0.shape[1] // 2

    def validate(self, lifted: LiftedMatrices) -> None:
        """Check terminal conditions, symmetry drift, and the gain identity."""
        n = self.n_players
        if not np.array_equal(self.m0[-1], lifted.q_bar):
            raise AssertionError("terminal condition M0(T) = Q_bar violated")
        if not np.array_equal(self.m1[-1], np.zeros((4 * n, 4 * n))):
            raise AssertionError("terminal condition M1(T) = 0 violated")
        if not np.array_equal(self.m2[-1], np.concatenate([lifted.p_vec, np.zeros(2 * n)])):
            raise AssertionError("terminal condition M2(T) = p violated")
        if self.m3[-1] != 0.0:
            raise AssertionError("terminal condition M3(T) = 0 violated")
        for name, path in (("m0", self.m0), ("m1", self.m1)):
            for k in range(path.shape[0]):
                scale = max(np.linalg.norm(path[k]), 1e-30)
                if np.linalg.norm(path[k] - path[k].T) / scale > 1e-10:
                    raise AssertionError(f"{name} symmetry drift beyond 1e-10 at knot {k}")
        for k in range(self.grid.t.size):
            if not np.array_equal(self.k_gain[k], assemble_gain(self.m0[k], self.m1[k], self.i_tilde)):
                raise AssertionError(f"gain identity violated at knot {k}")

    def gain_on(self, t_dst: np.ndarray) -> np.ndarray:
        return interp_path(self.grid.t, self.k_gain, t_dst)

    def m2_on(self, t_dst: np.ndarray) -> np.ndarray:
        return interp_path(self.grid.t, self.m2, t_dst)


def _residual_report(lifted: LiftedMatrices, grid, m0, m1, m2) -> dict:
    """Mid-knot centered-difference residuals of the three backward equations.

    The difference quotient (M_{k+1} - M_k)/h against the analytic right side
    evaluated at the interval midpoint (with averaged path values) is an
    O(h^2)-consistent defect; refinement tests look at its decay rate, not an
    absolute constant.
    """
    n = lifted.n_players
    t = grid.t
    res = {"m0": 0.0, "m1": 0.0, "m2": 0.0}
    for k in range(t.size - 1):
        h = t[k + 1] - t[k]
        tm = 0.5 * (t[k] + t[k + 1])
        a2 = np.concatenate([lifted.a_diag(tm)] * 2)
        a4 = np.concatenate([a2] * 2)
        m0m = 0.5 * (m0[k] + m0[k + 1])
        m1m = 0.5 * (m1[k] + m1[k + 1])
        m2m = 0.5 * (m2[k] + m2[k + 1])
        k_gain = assemble_gain(m0m, m1m, lifted.i_tilde)
        r0 = (m0[k + 1] - m0[k]) / h + a2[:, None] * m0m + m0m * a2[None, :] + lifted.q
        r1 = (m1[k + 1] - m1[k]) / h + a4[:, None] * m1m + m1m * a4[None, :] - k_gain.T @ k_gain
        r2 = (m2[k + 1] - m2[k]) / h + a4 * m2m - k_gain.T @ (lifted.i_tilde @ m2m)
        res["m0"] = max(res["m0"], float(np.abs(r0).max()))
        res["m1"] = max(res["m1"], float(np.abs(r1).max()))
        res["m2"] = max(res["m2"], float(np.abs(r2).max()))
    return res


def solve_riccati(spec: LqGameSpec, grid: TimeGrid | None = None) -> RiccatiSolution:
    """Solve all four backward systems and assemble the gain path."""
    lifted = build_lifted_matrices(spec)
    if grid is None:
        grid = default_grid(spec.horizon)
    if abs(grid.horizon - spec.horizon) > 1e-12:
        raise ValueError("grid horizon does not match spec horizon")
    m0 = solve_m0(lifted, grid)
    m1 = solve_m1(lifted, m0, grid)
    m2 = solve_m2(lifted, m0, m1, grid)
    m3 = solve_m3(lifted, m0, m1, m2, grid)
    k_gain = np.stack([assemble_gain(m0[k], m1[k], lifted.i_tilde) for k in range(grid.t.size)])
    solution = RiccatiSolution(
        grid=grid,
        m0=m0,
        m1=m1,
        m2=m2,
        m3=m3,
        k_gain=k_gain,
        i_tilde=np.array(lifted.i_tilde),
        residual_report=_residual_report(lifted, grid, m0, m1, m2),
    )
    solution.validate(lifted)
    return solution
