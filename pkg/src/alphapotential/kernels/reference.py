"""Pure-numpy reference implementations of the hot time-stepping kernels.

Semantics match the compiled extension exactly (same update expressions in
the same order); this module is the import-time fallback and the ground
truth for backend parity tests.  All arrays are float64 and C-contiguous.
"""

from __future__ import annotations

import numpy as np

__all__ = ["sim_linear_state", "sim_lifted", "sim_f", "sim_sensitivity_decoupled"]


def sim_linear_state(x0, a_grid, u, sig_grid, dw, dt):
    """Euler-Maruyama for N decoupled scalar linear SDEs.

    X_{k+1,i} = X_k,i + (a_i(t_k) X_k,i + u_k,i) dt_k + sigma_i(t_k) dW_k,i

    Shapes: x0 (N,), a_grid/sig_grid (n_steps, N), u/dw (n_paths, n_steps, N),
    dt (n_steps,).  Returns (n_paths, n_steps+1, N).
    """
    n_paths, n_steps, n = u.shape
    out = np.empty((n_paths, n_steps + 1, n))
    out[:, 0, :] = x0
    x = out[:, 0, :].copy()
    for k in range(n_steps):
        x = x + (a_grid[k] * x + u[:, k, :]) * dt[k] + sig_grid[k] * dw[:, k, :]
        out[:, k + 1, :] = x
    return out


def sim_lifted(x0, a_grid, u, r, sig_grid, dw, dt):
    """Euler-Maruyama for the 2N lifted pair (state block, sensitivity block).

    Upper block: dX = (a X + r u) dt + sigma dW with a path-specific scalar r;
    lower block: dY = (a Y + u) dt (no noise).  x0 has length 2N; returns
    (n_paths, n_steps+1, 2N).
    """
    n_paths, n_steps, n = u.shape
    out = np.empty((n_paths, n_steps + 1, 2 * n))
    out[:, 0, :] = x0
    x = out[:, 0, :n].copy()
    y = out[:, 0, n:].copy()
    r_col = np.asarray(r, dtype=float).reshape(n_paths, 1)
    for k in range(n_steps):
        x = x + (a_grid[k] * x + r_col * u[:, k, :]) * dt[k] + sig_grid[k] * dw[:, k, :]
        y = y + (a_grid[k] * y + u[:, k, :]) * dt[k]
        out[:, k + 1, :n] = x
        out[:, k + 1, n:] = y
    return out


def sim_f(f0, a_grid, k_grid, im2_grid, sig_grid, dw, dt):
    """Euler-Maruyama for the 4N conditional-moment process under feedback.

    Per step: u_k = -(K_k F_k + im2_k) and
    F_{k+1} = F_k + (a4 * F_k + I_tilde^T u_k) dt_k + vcat(sigma, 0, sigma/2, 0) dW_k,
    where a4 repeats the per-player drift over the four blocks and
    I_tilde^T u = vcat(u/2, u, u/3, u/2).

    Shapes: f0 (4N,), k_grid (n_steps, N, 4N), im2_grid (n_steps, N).
    Returns (f (n_paths, n_steps+1, 4N), u (n_paths, n_steps, N)).
    """
    n_paths, n_steps, n = dw.shape
    f = np.empty((n_paths, n_steps + 1, 4 * n))
    u_out = np.empty((n_paths, n_steps, n))
    f[:, 0, :] = f0
    cur = f[:, 0, :].copy()
    for k in range(n_steps):
        u = -(cur @ k_grid[k].T + im2_grid[k])
        u_out[:, k, :] = u
        a4 = np.concatenate([a_grid[k]] * 4)
        drift = a4 * cur
        drift[:, :n] += 0.5 * u
        drift[:, n : 2 * n] += u
        drift[:, 2 * n : 3 * n] += u / 3.0
        drift[:, 3 * n :] += 0.5 * u
        cur = cur + drift * dt[k]
        cur[:, :n] += sig_grid[k] * dw[:, k, :]
        cur[:, 2 * n : 3 * n] += 0.5 * sig_grid[k] * dw[:, k, :]
        f[:, k + 1, :] = cur
    return f, u_out


def sim_sensitivity_decoupled(a_grid_h, direction, dt):
    """Explicit Euler for the scalar own-coordinate sensitivity recursion.

    y_{k+1} = y_k + (a_h(t_k) y_k + dir_k) dt_k with y_0 = 0; ``direction``
    has shape (n_paths, n_steps) and the result (n_paths, n_steps+1).
    """
    n_paths, n_steps = direction.shape
    out = np.zeros((n_paths, n_steps + 1))
    y = np.zeros(n_paths)
    for k in range(n_steps):
        y = y + (a_grid_h[k] * y + direction[:, k]) * dt[k]
        out[:, k + 1] = y
    return out
