"""Game specifications for N-player stochastic differential games on graphs.

Two families are supported: the linear-quadratic flocking game on a directed
interaction graph (scalar state per player, decoupled linear drift, quadratic
pairwise costs) and a general scalar-per-player game with user-registered
drift/cost evaluators and their derivatives.  Specs are immutable after
construction and safe to share across workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import yaml

__all__ = [
    "GameSpecError",
    "Coefficient",
    "LqGameSpec",
    "DriftBounds",
    "PlayerDrift",
    "PlayerCost",
    "GeneralGameSpec",
    "LiftedMatrices",
    "make_regime_weights",
    "expand_regime_weights",
    "build_lifted_matrices",
    "parse_game_spec",
    "spec_to_json",
    "spec_to_dict",
    "general_from_lq",
]

_COEFF_GRID = 401  # sample count used to check evaluability/boundedness


class GameSpecError(ValueError):
    """Schema or invariant violation in a game specification."""


@dataclass(frozen=True)
class Coefficient:
    """Scalar function of time, stored as a serializable tagged descriptor.

    Supported kinds: ``constant`` (value), ``affine`` (intercept + slope*t),
    ``sinusoid`` (offset + amplitude*sin(omega*t + phase)), and ``tabulated``
    (knots/values with linear interpolation) as an escape hatch.
    """

    kind: str
    params: tuple

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            (value,) = self.params
            return np.broadcast_to(np.float64(value), t.shape).copy() if t.ndim else np.float64(value)
        if self.kind == "affine":
            intercept, slope = self.params
            return intercept + slope * t
        if self.kind == "sinusoid":
            offset, amplitude, omega, phase = self.params
            return offset + amplitude * np.sin(omega * t + phase)
        if self.kind == "tabulated":
            knots, values = self.params
            return np.interp(t, knots, values)
        raise GameSpecError(f"unknown coefficient kind {self.kind!r}")

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": float(self.params[0])}
        if self.kind == "affine":
            return {"kind": "affine", "intercept": float(self.params[0]), "slope": float(self.params[1])}
        if self.kind == "sinusoid":
            offset, amplitude, omega, phase = self.params
            return {
                "kind": "sinusoid",
                "offset": float(offset),
                "amplitude": float(amplitude),
                "omega": float(omega),
                "phase": float(phase),
            }
        if self.kind == "tabulated":
            knots, values = self.params
            return {"kind": "tabulated", "t": [float(v) for v in knots], "values": [float(v) for v in values]}
        raise GameSpecError(f"unknown coefficient kind {self.kind!r}")

    @staticmethod
    def from_dict(cfg, where: str = "coefficient") -> "Coefficient":
        if isinstance(cfg, (int, float)):
            return Coefficient("constant", (float(cfg),))
        if not isinstance(cfg, dict) or "kind" not in cfg:
            raise GameSpecError(f"schema violation: {where} must be a number or a dict with a 'kind' field")
        kind = cfg["kind"]
        try:
            if kind == "constant":
                return Coefficient("constant", (float(cfg["value"]),))
            if kind == "affine":
                return Coefficient("affine", (float(cfg.get("intercept", 0.0)), float(cfg["slope"])))
            if kind == "sinusoid":
                return Coefficient(
                    "sinusoid",
                    (
                        float(cfg.get("offset", 0.0)),
                        float(cfg["amplitude"]),
                        float(cfg["omega"]),
                        float(cfg.get("phase", 0.0)),
                    ),
                )
            if kind == "tabulated":
                knots = tuple(float(v) for v in cfg["t"])
                values = tuple(float(v) for v in cfg["values"])
                if len(knots) != len(values) or len(knots) < 2:
                    raise GameSpecError(f"invariant violation: {where} tabulated needs >= 2 matching knots/values")
                if any(b <= a for a, b in zip(knots, knots[1:])):
                    raise GameSpecError(f"invariant violation: {where} tabulated knots must increase")
                return Coefficient("tabulated", (knots, values))
        except KeyError as exc:
            raise GameSpecError(f"schema violation: {where} missing field {exc.args[0]!r}") from exc
        raise GameSpecError(f"schema violation: {where} has unknown kind {kind!r}")

    @staticmethod
    def constant(value: float) -> "Coefficient":
        return Coefficient("constant", (float(value),))


def _check_coefficients(fns: Sequence[Coefficient], horizon: float, where: str) -> None:
    ts = np.linspace(0.0, horizon, _COEFF_GRID)
    for i, fn in enumerate(fns):
        vals = np.asarray(fn(ts), dtype=float)
        if vals.shape != ts.shape or not np.all(np.isfinite(vals)):
            raise GameSpecError(f"invariant violation: {where}[{i}] not finite on [0, T]")


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LqGameSpec:
    """Linear-quadratic game on a directed graph.

    Player i pays the running cost u_i^2 + (1/N) sum_j q_ij (X_i - X_j)^2 and
    the terminal cost gamma_i (X_i(T) - d_i)^2, with scalar state
    dX_i = (a_i(t) X_i + u_i) dt + sigma_i(t) dW^i and admissible controls in
    the L^2 ball of radius ``control_bound`` (checked post hoc, not enforced).
    """

    n_players: int
    horizon: float
    q: np.ndarray
    gamma: np.ndarray
    d: np.ndarray
    a_fn: tuple
    sigma_fn: tuple
    x0: np.ndarray
    control_bound: float = 100.0

    def __post_init__(self):
        n = self.n_players
        if not isinstance(n, int) or n < 1:
            raise GameSpecError("invariant violation: n_players must be a positive integer")
        if not (self.horizon > 0):
            raise GameSpecError("invariant violation: horizon <= 0")
        if not (self.control_bound > 0):
            raise GameSpecError("invariant violation: control_bound <= 0")
        q = np.array(self.q, dtype=float)
        if q.shape != (n, n):
            raise GameSpecError(f"schema violation: q must be {n}x{n}, got {q.shape}")
        np.fill_diagonal(q, 0.0)  # self-interaction term vanishes identically
        for i in range(n):
            for j in range(n):
                if i != j and q[i, j] < 0:
                    raise GameSpecError(f"invariant violation: q[{i}][{j}] < 0")
        object.__setattr__(self, "q", _frozen_array(q))
        for name in ("gamma", "d", "x0"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise GameSpecError(f"schema violation: {name} must have length {n}, got shape {arr.shape}")
            object.__setattr__(self, name, _frozen_array(arr))
        for i, g in enumerate(self.gamma):
            if g < 0:
                raise GameSpecError(f"invariant violation: gamma[{i}] < 0")
        for name in ("a_fn", "sigma_fn"):
            fns = getattr(self, name)
            if isinstance(fns, Coefficient):
                fns = (fns,) * n
            fns = tuple(fns)
            if len(fns) != n:
                raise GameSpecError(f"schema violation: {name} must have one entry per player")
            object.__setattr__(self, name, fns)
        _check_coefficients(self.a_fn, self.horizon, "a_fn")
        _check_coefficients(self.sigma_fn, self.horizon, "sigma_fn")

    def a_values(self, t) -> np.ndarray:
        """Drift coefficients a_i(t), shape (len(t), N) for array t."""
        t = np.asarray(t, dtype=float)
        return np.stack([np.broadcast_to(fn(t), t.shape) for fn in self.a_fn], axis=-1)

    def sigma_values(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.stack([np.broadcast_to(fn(t), t.shape) for fn in self.sigma_fn], axis=-1)

    def to_dict(self) -> dict:
        return {
            "game": {
                "n_players": self.n_players,
                "horizon": float(self.horizon),
                "weights": {"mode": "matrix", "matrix": [[float(v) for v in row] for row in self.q]},
                "gamma": [float(v) for v in self.gamma],
                "d": [float(v) for v in self.d],
                "x0": [float(v) for v in self.x0],
                "drift": [fn.to_dict() for fn in self.a_fn],
                "vol": [fn.to_dict() for fn in self.sigma_fn],
                "control_bound": float(self.control_bound),
            }
        }

    def __eq__(self, other):
        if not isinstance(other, LqGameSpec):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(json.dumps(self.to_dict(), sort_keys=True))


@dataclass(frozen=True)
class DriftBounds:
    """Derivative bounds for drifts in the mean-field scaling class.

    ``l_b`` bounds |b_i(t,0,0)|, |d_x b_i| and |d2_xx b_i|; ``l_b_y`` is the
    coupling strength: |d_{y_i} b_i| <= l_b_y/N, |d2_{x y_i} b_i| <= l_b_y/N,
    and |d2_{y_i y_j} b_i| <= l_b_y/N (i=j) or l_b_y/N^2 (i != j).
    """

    l_b: float
    l_b_y: float

    def __post_init__(self):
        if self.l_b < 0 or self.l_b_y < 0:
            raise GameSpecError("invariant violation: drift bounds must be nonnegative")


@dataclass(frozen=True, eq=False)
class PlayerDrift:
    """Drift b_i(t, x_i, x) with registered derivative evaluators.

    All callables are vectorized: ``xi`` has shape (paths,), ``x`` has shape
    (paths, N).  ``dy`` returns (paths, N), ``dxy`` (paths, N), ``dyy``
    (paths, N, N); scalar-output evaluators return (paths,).
    """

    b: Callable
    dx: Callable
    dy: Callable
    dxx: Callable
    dxy: Callable
    dyy: Callable


@dataclass(frozen=True, eq=False)
class PlayerCost:
    """Running cost f_i(t, x, u), terminal cost g_i(x), and their derivatives.

    ``x`` and ``u`` have shape (paths, N).  Gradients return (paths, N) and
    Hessian blocks (paths, N, N); ``fxu[..., h, l]`` is d2 f / dx_h du_l.
    """

    f: Callable
    fx: Callable
    fu: Callable
    fxx: Callable
    fxu: Callable
    fuu: Callable
    g: Callable
    gx: Callable
    gxx: Callable


@dataclass(frozen=True, eq=False)
class GeneralGameSpec:
    """Scalar-per-player game with drift coupling through all states.

    State: dX_i = (b_i(t, X_i, X) + u_i) dt + sigma_i(t) dW^i.  Costs follow
    the same running-plus-terminal form as the LQ game but are arbitrary
    twice-differentiable evaluators.
    """

    n_players: int
    horizon: float
    drift: tuple
    sigma_fn: tuple
    cost: tuple
    x0: np.ndarray
    drift_bounds: DriftBounds

    def __post_init__(self):
        n = self.n_players
        if not isinstance(n, int) or n < 1:
            raise GameSpecError("invariant violation: n_players must be a positive integer")
        if not (self.horizon > 0):
            raise GameSpecError("invariant violation: horizon <= 0")
        if len(self.drift) != n or len(self.cost) != n:
            raise GameSpecError("schema violation: drift/cost must have one entry per player")
        sig = self.sigma_fn
        if isinstance(sig, Coefficient):
            sig = (sig,) * n
        object.__setattr__(self, "sigma_fn", tuple(sig))
        if len(self.sigma_fn) != n:
            raise GameSpecError("schema violation: sigma_fn must have one entry per player")
        x0 = np.array(self.x0, dtype=float)
        if x0.shape != (n,):
            raise GameSpecError(f"schema violation: x0 must have length {n}")
        object.__setattr__(self, "x0", _frozen_array(x0))
        _check_coefficients(self.sigma_fn, self.horizon, "sigma_fn")

    def sigma_values(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.stack([np.broadcast_to(fn(t), t.shape) for fn in self.sigma_fn], axis=-1)

    def check_derivatives(self, seed: int = 0, n_points: int = 20, rtol: float = 1e-5, scale: float = 2.0):
        """Validate registered derivatives against central finite differences.

        Samples random (t, x, u) points and compares each registered first and
        second derivative of b_i, f_i, g_i with a second-order central
        difference of the evaluator one level below.  Raises GameSpecError on
        disagreement beyond ``rtol`` (relative to the local derivative scale).
        """
        rng = np.random.default_rng(seed)
        n = self.n_players
        eps = 1e-5 * scale
        t_pts = rng.uniform(0.0, self.horizon, n_points)
        x_pts = rng.uniform(-scale, scale, (n_points, n))
        u_pts = rng.uniform(-scale, scale, (n_points, n))

        def _assert_close(got, want, what):
            got = np.asarray(got, dtype=float)
            want = np.asarray(want, dtype=float)
            denom = max(1.0, float(np.max(np.abs(want))))
            err = float(np.max(np.abs(got - want))) / denom
            if not np.isfinite(err) or err > rtol:
                raise GameSpecError(f"invariant violation: {what} disagrees with finite differences (rel err {err:.2e})")

        for i, dr in enumerate(self.drift):
            for k in range(n_points):
                t, xi, x = float(t_pts[k]), x_pts[k, i % n : i % n + 1], x_pts[k : k + 1]
                fd_dx = (dr.b(t, xi + eps, x) - dr.b(t, xi - eps, x)) / (2 * eps)
                _assert_close(dr.dx(t, xi, x), fd_dx, f"drift[{i}].dx")
                fd_dxx = (dr.dx(t, xi + eps, x) - dr.dx(t, xi - eps, x)) / (2 * eps)
                _assert_close(dr.dxx(t, xi, x), fd_dxx, f"drift[{i}].dxx")
                for j in range(n):
                    bump = np.zeros((1, n))
                    bump[0, j] = eps
                    fd_dyj = (dr.b(t, xi, x + bump) - dr.b(t, xi, x - bump)) / (2 * eps)
                    _assert_close(np.asarray(dr.dy(t, xi, x))[..., j], fd_dyj, f"drift[{i}].dy[{j}]")
                    fd_dxyj = (dr.dx(t, xi, x + bump) - dr.dx(t, xi, x - bump)) / (2 * eps)
                    _assert_close(np.asarray(dr.dxy(t, xi, x))[..., j], fd_dxyj, f"drift[{i}].dxy[{j}]")
                    fd_dyy = (np.asarray(dr.dy(t, xi, x + bump)) - np.asarray(dr.dy(t, xi, x - bump))) / (2 * eps)
                    _assert_close(np.asarray(dr.dyy(t, xi, x))[..., :, j], fd_dyy[..., :], f"drift[{i}].dyy[:, {j}]")
        for i, c in enumerate(self.cost):
            for k in range(n_points):
                t, x, u = float(t_pts[k]), x_pts[k : k + 1], u_pts[k : k + 1]
                for j in range(n):
                    bump = np.zeros((1, n))
                    bump[0, j] = eps
                    _assert_close(
                        np.asarray(c.fx(t, x, u))[..., j],
                        (c.f(t, x + bump, u) - c.f(t, x - bump, u)) / (2 * eps),
                        f"cost[{i}].fx[{j}]",
                    )
                    _assert_close(
                        np.asarray(c.fu(t, x, u))[..., j],
                        (c.f(t, x, u + bump) - c.f(t, x, u - bump)) / (2 * eps),
                        f"cost[{i}].fu[{j}]",
                    )
                    _assert_close(
                        np.asarray(c.fxx(t, x, u))[..., :, j],
                        (np.asarray(c.fx(t, x + bump, u)) - np.asarray(c.fx(t, x - bump, u))) / (2 * eps),
                        f"cost[{i}].fxx[:, {j}]",
                    )
                    _assert_close(
                        np.asarray(c.fxu(t, x, u))[..., :, j],
                        (np.asarray(c.fx(t, x, u + bump)) - np.asarray(c.fx(t, x, u - bump))) / (2 * eps),
                        f"cost[{i}].fxu[:, {j}]",
                    )
                    _assert_close(
                        np.asarray(c.fuu(t, x, u))[..., :, j],
                        (np.asarray(c.fu(t, x, u + bump)) - np.asarray(c.fu(t, x, u - bump))) / (2 * eps),
                        f"cost[{i}].fuu[:, {j}]",
                    )
                    _assert_close(
                        np.asarray(c.gx(x))[..., j],
                        (c.g(x + bump) - c.g(x - bump)) / (2 * eps),
                        f"cost[{i}].gx[{j}]",
                    )
                    _assert_close(
                        np.asarray(c.gxx(x))[..., :, j],
                        (np.asarray(c.gx(x + bump)) - np.asarray(c.gx(x - bump))) / (2 * eps),
                        f"cost[{i}].gxx[:, {j}]",
                    )

    def check_drift_scalings(self, seed: int = 0, n_points: int = 200, slack: float = 1.05, scale: float = 3.0):
        """Sample derivative magnitudes and verify the stated l_b/l_b_y scalings."""
        rng = np.random.default_rng(seed)
        n, lb, lby = self.n_players, self.drift_bounds.l_b, self.drift_bounds.l_b_y
        t = rng.uniform(0.0, self.horizon, n_points)
        xi = rng.uniform(-scale, scale, n_points)
        x = rng.uniform(-scale, scale, (n_points, n))
        for i, dr in enumerate(self.drift):
            zeros1, zeros2 = np.zeros(n_points), np.zeros((n_points, n))
            checks = [
                (np.abs([dr.b(float(tk), 0.0 * xi[:1], zeros2[:1]) for tk in t]).max(), lb, "b(t,0,0)"),
                (np.abs(np.asarray([dr.dx(float(tk), xi, x) for tk in t])).max(), lb, "dx"),
                (np.abs(np.asarray([dr.dxx(float(tk), xi, x) for tk in t])).max(), lb, "dxx"),
                (np.abs(np.asarray([dr.dy(float(tk), xi, x) for tk in t])).max(), lby / n, "dy"),
                (np.abs(np.asarray([dr.dxy(float(tk), xi, x) for tk in t])).max(), lby / n, "dxy"),
            ]
            dyy = np.abs(np.asarray([dr.dyy(float(tk), xi, x) for tk in t]))
            diag = np.einsum("tpjj->tpj", dyy).max() if dyy.size else 0.0
            off = (dyy - np.einsum("tpj,jk->tpjk", np.einsum("tpjj->tpj", dyy), np.eye(n))).max() if dyy.size else 0.0
            checks += [(diag, lby / n, "dyy diag"), (off, lby / n**2, "dyy offdiag")]
            for got, bound, what in checks:
                if got > slack * bound + 1e-12:
                    raise GameSpecError(
                        f"invariant violation: drift[{i}] {what} magnitude {got:.3g} exceeds bound {bound:.3g}"
                    )


@dataclass(frozen=True, eq=False)
class LiftedMatrices:
    """Constant matrices and time evaluators of the lifted LQ dynamics.

    The lifted state stacks the N physical states on top of the N own-control
    sensitivities.  Q carries the running interaction, Q_bar the terminal
    weights, p_vec the terminal targets, and i_tilde the (1/2, 1, 1/3, 1/2)
    block row encoding the first two moments of the auxiliary uniform draw.
    """

    n_players: int
    q_tilde: np.ndarray
    q: np.ndarray
    q_bar: np.ndarray
    p_vec: np.ndarray
    i_tilde: np.ndarray
    spec: LqGameSpec = field(repr=False)

    def a_diag(self, t) -> np.ndarray:
        """Diagonal entries a_i(t) of the per-player drift matrix."""
        return np.array([float(fn(t)) for fn in self.spec.a_fn])

    def A(self, t) -> np.ndarray:
        """2N x 2N lifted drift matrix diag(a(t), a(t))."""
        a = self.a_diag(t)
        return np.diag(np.concatenate([a, a]))

    def sigma_diag(self, t) -> np.ndarray:
        return np.array([float(fn(t)) for fn in self.spec.sigma_fn])

    def Sigma(self, t) -> np.ndarray:
        """2N x N diffusion matrix: diag(sigma(t)) stacked over a zero block."""
        n = self.n_players
        out = np.zeros((2 * n, n))
        out[:n, :] = np.diag(self.sigma_diag(t))
        return out


def make_regime_weights(regime: str, n: int, *, w=None, beta=None, c=None) -> np.ndarray:
    """Build an N x N interaction weight matrix from a named decay regime.

    ``exponential``: q_ij = w_i * exp(-|i-j|); ``power_law``: q_ij =
    w_i / |i-j|^beta for i != j with beta in (0,1); ``symmetric``: constant
    generator q_ij = c off the diagonal.  Diagonals are zero.
    """
    if n < 1:
        raise GameSpecError("invariant violation: n must be >= 1")
    idx = np.arange(n)
    dist = np.abs(idx[:, None] - idx[None, :]).astype(float)
    if regime == "symmetric":
        if c is None:
            raise GameSpecError("schema violation: symmetric regime needs parameter c")
        q = float(c) * np.ones((n, n))
        np.fill_diagonal(q, 0.0)
        if np.any(q < 0):
            raise GameSpecError("invariant violation: symmetric generator c < 0")
        return q
    if w is None:
        raise GameSpecError(f"schema violation: {regime} regime needs weights w")
    w = np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise GameSpecError(f"schema violation: w must have length {n}")
    if np.any(w <= 0):
        raise GameSpecError("invariant violation: w entries must be positive")
    if len(np.unique(w)) != n:
        raise GameSpecError("invariant violation: w entries must be distinct")
    if regime == "exponential":
        q = w[:, None] * np.exp(-dist)
    elif regime == "power_law":
        if beta is None or not (0.0 < float(beta) < 1.0):
            raise GameSpecError("invariant violation: power_law needs beta in (0, 1)")
        with np.errstate(divide="ignore"):
            q = w[:, None] * np.where(dist > 0, dist, np.inf) ** (-float(beta))
    else:
        raise GameSpecError(f"schema violation: unknown regime {regime!r}")
    np.fill_diagonal(q, 0.0)
    return q


def expand_regime_weights(regime_cfg: dict, n: int) -> np.ndarray:
    """Expand a regime descriptor (possibly with a w-pattern) at size n.

    A ``w_pattern`` of the form {"values": [...], "jitter": j} is cycled to
    length n with w_i = values[i mod len] + j*i, which keeps the weights
    distinct and uniformly bounded across sweep sizes.
    """
    kind = regime_cfg.get("kind")
    if kind is None:
        raise GameSpecError("schema violation: game.weights.regime.kind missing")
    params = {}
    if kind == "symmetric":
        params["c"] = regime_cfg.get("c", 1.0)
    else:
        if "w" in regime_cfg:
            params["w"] = regime_cfg["w"]
        elif "w_pattern" in regime_cfg:
            pat = regime_cfg["w_pattern"]
            values = np.asarray(pat["values"], dtype=float)
            jitter = float(pat.get("jitter", 1e-3))
            params["w"] = values[np.arange(n) % len(values)] + jitter * np.arange(n)
        else:
            raise GameSpecError("schema violation: regime needs 'w' or 'w_pattern'")
        if kind == "power_law":
            params["beta"] = regime_cfg.get("beta")
    return make_regime_weights(kind, n, **params)


def build_lifted_matrices(spec: LqGameSpec) -> LiftedMatrices:
    """Assemble the constant matrices of the lifted 2N-dimensional dynamics."""
    n = spec.n_players
    q_tilde = -spec.q / n
    np.fill_diagonal(q_tilde, spec.q.sum(axis=1) / n)
    q = np.zeros((2 * n, 2 * n))
    q[:n, n:] = q_tilde.T
    q[n:, :n] = q_tilde
    gamma_diag = np.diag(spec.gamma)
    q_bar = np.zeros((2 * n, 2 * n))
    q_bar[:n, n:] = gamma_diag
    q_bar[n:, :n] = gamma_diag
    p_vec = np.concatenate([np.zeros(n), -spec.gamma * spec.d])
    eye = np.eye(n)
    i_tilde = np.hstack([0.5 * eye, eye, eye / 3.0, 0.5 * eye])
    return LiftedMatrices(
        n_players=n,
        q_tilde=_frozen_array(q_tilde),
        q=_frozen_array(q),
        q_bar=_frozen_array(q_bar),
        p_vec=_frozen_array(p_vec),
        i_tilde=_frozen_array(i_tilde),
        spec=spec,
    )


def _as_vector(value, n: int, where: str) -> list:
    if isinstance(value, (int, float)):
        return [float(value)] * n
    value = list(value)
    if len(value) != n:
        raise GameSpecError(f"schema violation: {where} must be a scalar or length-{n} list")
    return [float(v) for v in value]


def _coeff_list(cfg, n: int, where: str) -> tuple:
    if isinstance(cfg, list) and cfg and isinstance(cfg[0], (dict, int, float)) and not isinstance(cfg[0], bool):
        if all(isinstance(v, (int, float)) for v in cfg):
            # bare list of numbers means per-player constants
            return tuple(Coefficient.constant(v) for v in _as_vector(cfg, n, where))
        if len(cfg) != n:
            raise GameSpecError(f"schema violation: {where} list must have one descriptor per player")
        return tuple(Coefficient.from_dict(c, f"{where}[{i}]") for i, c in enumerate(cfg))
    return (Coefficient.from_dict(cfg, where),) * n


def parse_game_spec(config_text: str) -> LqGameSpec:
    """Parse a structured config (YAML or JSON text) into a validated LqGameSpec."""
    try:
        cfg = yaml.safe_load(config_text)
    except yaml.YAMLError as exc:
        raise GameSpecError(f"schema violation: unparseable config ({exc})") from exc
    if not isinstance(cfg, dict) or "game" not in cfg:
        raise GameSpecError("schema violation: top-level 'game' section missing")
    game = cfg["game"]
    for key in ("n_players", "horizon", "weights", "gamma", "d", "x0"):
        if key not in game:
            raise GameSpecError(f"schema violation: game.{key} missing")
    n = game["n_players"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise GameSpecError("schema violation: game.n_players must be a positive integer")
    weights = game["weights"]
    mode = weights.get("mode")
    if mode == "matrix":
        if "matrix" not in weights:
            raise GameSpecError("schema violation: game.weights.matrix missing")
        q = np.asarray(weights["matrix"], dtype=float)
    elif mode == "regime":
        if "regime" not in weights:
            raise GameSpecError("schema violation: game.weights.regime missing")
        q = expand_regime_weights(weights["regime"], n)
    else:
        raise GameSpecError("schema violation: game.weights.mode must be 'matrix' or 'regime'")
    return LqGameSpec(
        n_players=n,
        horizon=float(game["horizon"]),
        q=q,
        gamma=_as_vector(game["gamma"], n, "game.gamma"),
        d=_as_vector(game["d"], n, "game.d"),
        x0=_as_vector(game["x0"], n, "game.x0"),
        a_fn=_coeff_list(game.get("drift", 0.0), n, "game.drift"),
        sigma_fn=_coeff_list(game.get("vol", 1.0), n, "game.vol"),
        control_bound=float(game.get("control_bound", 100.0)),
    )


def spec_to_dict(spec: LqGameSpec) -> dict:
    return spec.to_dict()


def spec_to_json(spec: LqGameSpec) -> str:
    """Canonical JSON serialization (stable key order) for programmatic use."""
    return json.dumps(spec.to_dict(), sort_keys=True)


def general_from_lq(spec: LqGameSpec) -> GeneralGameSpec:
    """View an LQ spec through the general-game evaluator interface.

    Drift and cost evaluators (with all registered derivatives) are generated
    in closed form, so the general sensitivity and potential machinery can be
    cross-checked against the dedicated LQ implementations.
    """
    n = spec.n_players
    q = np.array(spec.q)

    def make_drift(i: int) -> PlayerDrift:
        a_i = spec.a_fn[i]

        def b(t, xi, x):
            return float(a_i(t)) * np.asarray(xi, dtype=float)

        def dx(t, xi, x):
            return np.full(np.shape(xi), float(a_i(t)))

        def zeros_like_xi(t, xi, x):
            return np.zeros(np.shape(xi))

        def dy(t, xi, x):
            return np.zeros(np.shape(xi) + (n,))

        def dyy(t, xi, x):
            return np.zeros(np.shape(xi) + (n, n))

        return PlayerDrift(b=b, dx=dx, dy=dy, dxx=zeros_like_xi, dxy=dy, dyy=dyy)

    def make_cost(i: int) -> PlayerCost:
        qi = q[i]
        gam, di = float(spec.gamma[i]), float(spec.d[i])

        def f(t, x, u):
            x = np.asarray(x, dtype=float)
            diff = x[..., i : i + 1] - x
            return np.asarray(u)[..., i] ** 2 + (qi * diff**2).sum(axis=-1) / n

        def fx(t, x, u):
            x = np.asarray(x, dtype=float)
            diff = x[..., i : i + 1] - x
            out = -2.0 * qi * diff / n
            out[..., i] = 2.0 * (qi * diff).sum(axis=-1) / n
            return out

        def fu(t, x, u):
            out = np.zeros(np.shape(u))
            out[..., i] = 2.0 * np.asarray(u)[..., i]
            return out

        def fxx(t, x, u):
            batch = np.shape(x)[:-1]
            h = np.zeros((n, n))
            h[i, i] = 2.0 * qi.sum() / n
            h[i, :] -= 2.0 * qi / n
            h[:, i] -= 2.0 * qi / n
            h[np.arange(n), np.arange(n)] += 2.0 * qi / n
            return np.broadcast_to(h, batch + (n, n)).copy()

        def fxu(t, x, u):
            return np.zeros(np.shape(x)[:-1] + (n, n))

        def fuu(t, x, u):
            batch = np.shape(u)[:-1]
            h = np.zeros((n, n))
            h[i, i] = 2.0
            return np.broadcast_to(h, batch + (n, n)).copy()

        def g(x):
            return gam * (np.asarray(x)[..., i] - di) ** 2

        def gx(x):
            out = np.zeros(np.shape(x))
            out[..., i] = 2.0 * gam * (np.asarray(x)[..., i] - di)
            return out

        def gxx(x):
            batch = np.shape(x)[:-1]
            h = np.zeros((n, n))
            h[i, i] = 2.0 * gam
            return np.broadcast_to(h, batch + (n, n)).copy()

        return PlayerCost(f=f, fx=fx, fu=fu, fxx=fxx, fxu=fxu, fuu=fuu, g=g, gx=gx, gxx=gxx)

    max_a = max(float(np.max(np.abs(fn(np.linspace(0, spec.horizon, _COEFF_GRID))))) for fn in spec.a_fn)
    return GeneralGameSpec(
        n_players=n,
        horizon=spec.horizon,
        drift=tuple(make_drift(i) for i in range(n)),
        sigma_fn=spec.sigma_fn,
        cost=tuple(make_cost(i) for i in range(n)),
        x0=np.array(spec.x0),
        drift_bounds=DriftBounds(l_b=max_a, l_b_y=0.0),
    )
