"""Closed-form near-potential bounds and moment-bound constants.

Everything here is a pure function of game-structure data: the interaction
asymmetry index driving the LQ bound, the pairwise cost-derivative constants
assembled into the general second-derivative-gap bound, and the Gronwall
moment constants for the state and sensitivity processes.  Bounds separate a
fully determined *structural factor* from a caller-supplied *envelope
constant* (default 1): the theory fixes the structure but not the envelope,
and we never invent the latter silently.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .game_model import DriftBounds, GeneralGameSpec, LqGameSpec, general_from_lq

__all__ = [
    "CostDerivBounds",
    "AlphaBoundBreakdown",
    "DecayFit",
    "asymmetry_index",
    "lq_alpha_bound",
    "cv_constants",
    "theorem_alpha_bound",
    "moment_bound_x",
    "moment_bound_y",
    "moment_bound_z_shape",
    "gronwall_exponent",
    "regime_decay_fit",
    "lq_cost_deriv_bounds",
    "estimate_cost_deriv_bounds",
    "estimate_all_pair_bounds",
]


@dataclass(frozen=True, eq=False)
class CostDerivBounds:
    """Sup-norm bounds on derivatives of the pair difference of costs.

    For an ordered player pair (i, j), with Df = f_i - f_j and Dg = g_i - g_j:
    ``d2f_xx[h, l]`` bounds |d2 Df / dx_h dx_l|, ``d2f_xu[h, l]`` bounds
    |d2 Df / dx_h du_l|, ``d2f_uu_ij`` bounds |d2 Df / du_i du_j|,
    ``d1f_x0[h]`` is the time-L2 norm of (d Df / dx_h)(., 0, 0), ``d2g_xx``
    and ``d1g_x0`` are the terminal-cost analogues.  ``source`` records
    whether the entries are exact ("analytic") or sampled ("estimated
    sup-norm").
    """

    i: int
    j: int
    d2f_xx: np.ndarray
    d2f_xu: np.ndarray
    d2f_uu_ij: float
    d1f_x0: np.ndarray
    d2g_xx: np.ndarray
    d1g_x0: np.ndarray
    source: str = "analytic"

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("CostDerivBounds requires an ordered pair with i != j")
        n = self.d2f_xx.shape[0]
        for name in ("d2f_xx", "d2f_xu", "d2g_xx"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n, n) or np.any(arr < 0):
                raise ValueError(f"{name} must be a nonnegative {n}x{n} matrix")
            object.__setattr__(self, name, arr)
        for name in ("d1f_x0", "d1g_x0"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,) or np.any(arr < 0):
                raise ValueError(f"{name} must be a nonnegative length-{n} vector")
            object.__setattr__(self, name, arr)
        if self.d2f_uu_ij < 0:
            raise ValueError("d2f_uu_ij must be nonnegative")


@dataclass(frozen=True)
class AlphaBoundBreakdown:
    """Structural pieces of the near-potential bound for the worst player.

    ``bound = envelope_constant * structural_prefactor`` where the prefactor
    sums c_v1 + l_b_y * (c_v2 / N + c_v3 / N^2) over opponents of the
    maximizing player.  The envelope is caller input and is always echoed.
    """

    c_v1: float
    c_v2: float
    c_v3: float
    n_players: int
    l_b_y: float
    structural_prefactor: float
    envelope_constant: float
    bound: float
    argmax_player: int
    per_player: tuple = field(default=(), repr=False)

    def to_json(self) -> str:
        return json.dumps(
            {
                "c_v1": self.c_v1,
                "c_v2": self.c_v2,
                "c_v3": self.c_v3,
                "n_players": self.n_players,
                "l_b_y": self.l_b_y,
                "structural_prefactor": self.structural_prefactor,
                "envelope_c": self.envelope_constant,
                "bound": self.bound,
                "argmax_player": self.argmax_player + 1,
            },
            sort_keys=True,
        )


def asymmetry_index(q) -> float:
    """max over i of sum_{j != i} |q_ji - q_ij|, the interaction asymmetry."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ValueError(f"q must be square, got shape {q.shape}")
    diff = np.abs(q.T - q)
    return float(diff.sum(axis=1).max()) if q.shape[0] else 0.0


def lq_alpha_bound(spec: LqGameSpec, envelope_c: float = 1.0) -> float:
    """Near-potential bound envelope_c * asymmetry_index(q) / N for the LQ game."""
    if envelope_c < 0:
        raise ValueError("envelope_c must be nonnegative")
    return envelope_c * asymmetry_index(spec.q) / spec.n_players


def cv_constants(bounds: CostDerivBounds, i: int, j: int, n: int) -> tuple:
    """Assemble the three pairwise constants of the second-derivative-gap bound.

    c_v1 collects the direct (i, j) cross terms; c_v2 the single-sum terms
    entering at order 1/N; c_v3 the double-sum terms entering at order 1/N^2.
    """
    if i == j:
        raise ValueError("cv_constants requires i != j")
    fxx, fxu, gxx = bounds.d2f_xx, bounds.d2f_xu, bounds.d2g_xx
    c_v1 = fxx[i, j] + fxu[i, j] + fxu[j, i] + bounds.d2f_uu_ij + gxx[i, j]
    others_j = [l for l in range(n) if l != j]
    others_i = [h for h in range(n) if h != i]
    c_v2 = (
        sum(fxu[l, i] for l in others_j)
        + sum(fxu[h, j] for h in others_i)
        + sum(bounds.d1f_x0[h] + bounds.d1g_x0[h] for h in (i, j))
        + sum(fxx[h, l] + fxu[h, l] + gxx[h, l] for h in (i, j) for l in range(n))
    )
    rest = [h for h in range(n) if h not in (i, j)]
    c_v3 = sum(bounds.d1f_x0[h] + bounds.d1g_x0[h] for h in rest) + sum(
        fxx[h, l] + fxu[h, l] + gxx[h, l] for h in rest for l in rest
    )
    return float(c_v1), float(c_v2), float(c_v3)


def theorem_alpha_bound(
    all_pair_bounds: dict,
    drift: DriftBounds,
    n: int,
    envelope_c: float = 1.0,
) -> AlphaBoundBreakdown:
    """Assemble the game-level near-potential bound from per-pair constants.

    bound = envelope_c * max_i sum_{j != i} [c_v1(i,j)
            + l_b_y * (c_v2(i,j)/N + c_v3(i,j)/N^2)].
    """
    if envelope_c < 0:
        raise ValueError("envelope_c must be nonnegative")
    lby = drift.l_b_y
    per_player = []
    per_player_cv = []
    for i in range(n):
        total = 0.0
        sums = [0.0, 0.0, 0.0]
        for j in range(n):
            if j == i:
                continue
            if (i, j) not in all_pair_bounds:
                raise ValueError(f"missing CostDerivBounds for ordered pair ({i}, {j})")
            c1, c2, c3 = cv_constants(all_pair_bounds[(i, j)], i, j, n)
            total += c1 + lby * (c2 / n + c3 / n**2)
            sums[0] += c1
            sums[1] += c2
            sums[2] += c3
        per_player.append(total)
        per_player_cv.append(sums)
    i_star = int(np.argmax(per_player)) if n > 1 else 0
    prefactor = per_player[i_star] if n > 1 else 0.0
    cv = per_player_cv[i_star] if n > 1 else [0.0, 0.0, 0.0]
    return AlphaBoundBreakdown(
        c_v1=cv[0],
        c_v2=cv[1],
        c_v3=cv[2],
        n_players=n,
        l_b_y=lby,
        structural_prefactor=prefactor,
        envelope_constant=envelope_c,
        bound=envelope_c * prefactor,
        argmax_player=i_star,
        per_player=tuple(per_player),
    )


def gronwall_exponent(p: float) -> float:
    """Explicit admissible Gronwall constant c_p for the p-th moment bound.

    The linear-growth estimate of the p-th moment accumulates Young-inequality
    coefficients 2p-1 (drift), p (coupling) and p(p-1)/2 (diffusion); their sum
    dominates each one, so c_p = max(2p-1 + p + p(p-1)/2, p) is admissible.
    Only the inequality matters downstream, so any valid c_p is acceptable.
    """
    return max(2 * p - 1 + p + p * (p - 1) / 2.0, p)


def moment_bound_x(
    drift: DriftBounds,
    x0,
    sigma_lp,
    u_hp,
    horizon: float,
    i: int,
    p: float,
) -> float:
    """Upper bound on sup_t E|X_{t,i}|^p for the coupled scalar state system.

    ``sigma_lp[k]`` is the time-L^p norm of sigma_k and ``u_hp[k]`` the H^p
    norm of control k.  The bound is the per-player growth budget plus the
    (l_b_y/N)-weighted population budget, inflated by the Gronwall factor
    exp(c_p (l_b + l_b_y + 1) T).
    """
    if p < 2:
        raise ValueError("moment order p must be >= 2")
    x0 = np.asarray(x0, dtype=float)
    sigma_lp = np.asarray(sigma_lp, dtype=float)
    u_hp = np.asarray(u_hp, dtype=float)
    n = x0.shape[0]
    summands = np.abs(x0) ** p + (p - 1) * sigma_lp**p + drift.l_b * horizon + u_hp**p
    growth = math.exp(gronwall_exponent(p) * (drift.l_b + drift.l_b_y + 1.0) * horizon)
    return float((summands[i] + drift.l_b_y / n * summands.sum()) * growth)


def moment_bound_y(
    drift: DriftBounds,
    horizon: float,
    p: float,
    n: int,
    is_own: bool,
    u_norm: float,
) -> float:
    """Upper bound on sup_t E|Y_{t,i}|^p for the first-order sensitivity.

    ``is_own`` indicates i == h (the perturbed player's own coordinate); the
    cross-player part enters only through the coupling strength (l_b_y/N)^p.
    """
    if p < 2:
        raise ValueError("moment order p must be >= 2")
    lb, lby = drift.l_b, drift.l_b_y
    c_y = (2.0 * horizon) ** (p - 1) * math.exp(p * lb * horizon)
    c_y_bar = (
        (2.0 * horizon) ** (2 * p - 1)
        * math.exp(p * (lb + lby) * horizon)
        * math.exp(p * lb * horizon)
    )
    own = c_y if is_own else 0.0
    return float((own + (lby / n) ** p * c_y_bar) * u_norm**p)


def moment_bound_z_shape(
    drift: DriftBounds,
    n: int,
    delta_h_i: bool,
    delta_l_i: bool,
    u_norm_h: float,
    u_norm_l: float,
) -> float:
    """Structural factor of the second-order sensitivity moment bound.

    Returns (l_b_y)^2 ((delta_h + delta_l)/N^2 + 1/N^4) ||u'_h||^2 ||u''_l||^2
    with H^4 control norms; the unquantified envelope constant is supplied by
    the caller.
    """
    if delta_h_i and delta_l_i:
        raise ValueError("h = l is not allowed: the two perturbed players must differ")
    deltas = float(delta_h_i) + float(delta_l_i)
    return float(drift.l_b_y**2 * (deltas / n**2 + 1.0 / n**4) * u_norm_h**2 * u_norm_l**2)


@dataclass(frozen=True)
class DecayFit:
    """Log-log least-squares fit of bound or gap values against N."""

    slope: float
    intercept: float
    r_squared: float
    n_used: int
    dropped: tuple = ()

    @property
    def flagged(self) -> bool:
        return len(self.dropped) > 0


def regime_decay_fit(n_values, alpha_values) -> DecayFit:
    """Fit log(alpha) ~ slope * log(N) + intercept by ordinary least squares.

    Nonpositive alpha values cannot enter the log fit; they are dropped,
    reported in ``dropped``, and flag the fit.
    """
    n_values = np.asarray(n_values, dtype=float)
    alpha_values = np.asarray(alpha_values, dtype=float)
    if n_values.shape != alpha_values.shape or n_values.ndim != 1:
        raise ValueError("n_values and alpha_values must be 1-d arrays of equal length")
    if n_values.size < 3:
        raise ValueError("need at least 3 points for a decay fit")
    keep = alpha_values > 0
    dropped = tuple(int(v) for v in n_values[~keep])
    x, y = np.log(n_values[keep]), np.log(alpha_values[keep])
    if x.size < 2:
        raise ValueError("fewer than 2 positive alpha values; decay fit undefined")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r_squared = 1.0 if ss_tot == 0 else 1.0 - float((resid**2).sum()) / ss_tot
    return DecayFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r_squared,
        n_used=int(x.size),
        dropped=dropped,
    )


def lq_cost_deriv_bounds(spec: LqGameSpec, i: int, j: int) -> CostDerivBounds:
    """Exact pairwise derivative bounds for the LQ game (all Hessians constant).

    The quadratic costs make every second derivative a constant and every
    first derivative vanish at the origin except the terminal target terms.
    """
    if i == j:
        raise ValueError("ordered pair requires i != j")
    n = spec.n_players
    q = np.asarray(spec.q)

    def own_hessian(k: int) -> np.ndarray:
        h = np.zeros((n, n))
        h[k, k] = 2.0 * q[k].sum() / n
        h[k, :] -= 2.0 * q[k] / n
        h[:, k] -= 2.0 * q[k] / n
        h[np.arange(n), np.arange(n)] += 2.0 * q[k] / n
        return h

    d2f_xx = np.abs(own_hessian(i) - own_hessian(j))
    d2g_xx = np.zeros((n, n))
    d2g_xx[i, i] = 2.0 * spec.gamma[i]
    d2g_xx[j, j] = 2.0 * spec.gamma[j]
    d1g_x0 = np.zeros(n)
    d1g_x0[i] = abs(2.0 * spec.gamma[i] * spec.d[i])
    d1g_x0[j] = abs(2.0 * spec.gamma[j] * spec.d[j])
    return CostDerivBounds(
        i=i,
        j=j,
        d2f_xx=d2f_xx,
        d2f_xu=np.zeros((n, n)),
        d2f_uu_ij=0.0,
        d1f_x0=np.zeros(n),
        d2g_xx=d2g_xx,
        d1g_x0=d1g_x0,
        source="analytic",
    )


def estimate_all_pair_bounds(
    spec: GeneralGameSpec | LqGameSpec,
    n_samples: int = 10_000,
    box: float = 5.0,
    seed: int = 0,
    time_grid: int = 0,
) -> dict:
    """Estimate CostDerivBounds for every ordered pair by Sobol sampling.

    Derivative evaluators are sampled over [-box, box]^{2N} x [0, T] and the
    entrywise maxima of |D_i - D_j| are taken; results are labeled
    "estimated sup-norm".  The time-L2 norms of the first derivatives at the
    origin use a composite-trapezoid grid (default matches the ODE solvers).
    """
    if isinstance(spec, LqGameSpec):
        spec = general_from_lq(spec)
    n, horizon = spec.n_players, spec.horizon
    sampler = qmc.Sobol(d=2 * n + 1, scramble=True, seed=seed)
    pts = sampler.random(n_samples)
    ts = pts[:, 0] * horizon
    xs = (2.0 * pts[:, 1 : n + 1] - 1.0) * box
    us = (2.0 * pts[:, n + 1 :] - 1.0) * box

    fxx = np.zeros((n_samples, n, n, n))
    fxu = np.zeros((n_samples, n, n, n))
    fuu = np.zeros((n_samples, n, n, n))
    for k in range(n_samples):
        t, x, u = float(ts[k]), xs[k : k + 1], us[k : k + 1]
        for a, c in enumerate(spec.cost):
            fxx[k, a] = np.asarray(c.fxx(t, x, u))[0]
            fxu[k, a] = np.asarray(c.fxu(t, x, u))[0]
            fuu[k, a] = np.asarray(c.fuu(t, x, u))[0]
    gxx = np.stack([np.asarray(c.gxx(xs))for c in spec.cost])  # (N, S, n, n)

    if time_grid <= 0:
        time_grid = max(200, math.ceil(400 * horizon)) + 1
    tq = np.linspace(0.0, horizon, time_grid)
    zeros = np.zeros((1, n))
    fx0 = np.stack(
        [np.stack([np.asarray(c.fx(float(t), zeros, zeros))[0] for t in tq]) for c in spec.cost]
    )  # (N, n_t, n)
    gx0 = np.stack([np.asarray(c.gx(zeros))[0] for c in spec.cost])  # (N, n)

    out = {}
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            dxx = np.abs(fxx[:, i] - fxx[:, j]).max(axis=0)
            dxu = np.abs(fxu[:, i] - fxu[:, j]).max(axis=0)
            duu = float(np.abs(fuu[:, i, i, j] - fuu[:, j, i, j]).max())
            dgxx = np.abs(gxx[i] - gxx[j]).max(axis=0)
            diff_fx0 = fx0[i] - fx0[j]  # (n_t, n)
            d1f = np.sqrt(np.trapezoid(diff_fx0**2, tq, axis=0))
            d1g = np.abs(gx0[i] - gx0[j])
            out[(i, j)] = CostDerivBounds(
                i=i,
                j=j,
                d2f_xx=dxx,
                d2f_xu=dxu,
                d2f_uu_ij=duu,
                d1f_x0=d1f,
                d2g_xx=dgxx,
                d1g_x0=d1g,
                source="estimated sup-norm",
            )
    return out


def estimate_cost_deriv_bounds(
    spec: GeneralGameSpec | LqGameSpec,
    i: int,
    j: int,
    n_samples: int = 10_000,
    box: float = 5.0,
    seed: int = 0,
) -> CostDerivBounds:
    """Single-pair convenience wrapper around estimate_all_pair_bounds."""
    return estimate_all_pair_bounds(spec, n_samples=n_samples, box=box, seed=seed)[(i, j)]
