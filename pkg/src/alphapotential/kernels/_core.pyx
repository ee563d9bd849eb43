# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled time-stepping kernels (see reference.py for the semantics).

Plain C loops over paths/steps/components; update expressions mirror the
reference implementation term by term so both backends agree to machine
precision on the elementwise kernels.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def sim_linear_state(double[::1] x0, double[:, ::1] a_grid, double[:, :, ::1] u,
                     double[:, ::1] sig_grid, double[:, :, ::1] dw, double[::1] dt):
    cdef Py_ssize_t n_paths = u.shape[0]
    cdef Py_ssize_t n_steps = u.shape[1]
    cdef Py_ssize_t n = u.shape[2]
    out_arr = np.empty((n_paths, n_steps + 1, n))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t p, k, i
    cdef double x
    for p in range(n_paths):
        for i in range(n):
            out[p, 0, i] = x0[i]
        for k in range(n_steps):
            for i in range(n):
                x = out[p, k, i]
                out[p, k + 1, i] = x + (a_grid[k, i] * x + u[p, k, i]) * dt[k] + sig_grid[k, i] * dw[p, k, i]
    return out_arr


def sim_lifted(double[::1] x0, double[:, ::1] a_grid, double[:, :, ::1] u,
               double[::1] r, double[:, ::1] sig_grid, double[:, :, ::1] dw,
               double[::1] dt):
    cdef Py_ssize_t n_paths = u.shape[0]
    cdef Py_ssize_t n_steps = u.shape[1]
    cdef Py_ssize_t n = u.shape[2]
    out_arr = np.empty((n_paths, n_steps + 1, 2 * n))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t p, k, i
    cdef double x, y, rp
    for p in range(n_paths):
        rp = r[p]
        for i in range(2 * n):
            out[p, 0, i] = x0[i]
        for k in range(n_steps):
            for i in range(n):
                x = out[p, k, i]
                y = out[p, k, n + i]
                out[p, k + 1, i] = x + (a_grid[k, i] * x + rp * u[p, k, i]) * dt[k] + sig_grid[k, i] * dw[p, k, i]
                out[p, k + 1, n + i] = y + (a_grid[k, i] * y + u[p, k, i]) * dt[k]
    return out_arr


def sim_f(double[::1] f0, double[:, ::1] a_grid, double[:, :, ::1] k_grid,
          double[:, ::1] im2_grid, double[:, ::1] sig_grid,
          double[:, :, ::1] dw, double[::1] dt):
    cdef Py_ssize_t n_paths = dw.shape[0]
    cdef Py_ssize_t n_steps = dw.shape[1]
    cdef Py_ssize_t n = dw.shape[2]
    f_arr = np.empty((n_paths, n_steps + 1, 4 * n))
    u_arr = np.empty((n_paths, n_steps, n))
    cdef double[:, :, ::1] f = f_arr
    cdef double[:, :, ::1] u_out = u_arr
    cdef double[::1] u = np.empty(n)
    cdef Py_ssize_t p, k, i, j
    cdef double acc, a_i, ui, cur
    for p in range(n_paths):
        for i in range(4 * n):
            f[p, 0, i] = f0[i]
        for k in range(n_steps):
            for i in range(n):
                acc = 0.0
                for j in range(4 * n):
                    acc += k_grid[k, i, j] * f[p, k, j]
                u[i] = -(acc + im2_grid[k, i])
                u_out[p, k, i] = u[i]
            for i in range(n):
                a_i = a_grid[k, i]
                ui = u[i]
                cur = f[p, k, i]
                f[p, k + 1, i] = cur + (a_i * cur + 0.5 * ui) * dt[k] + sig_grid[k, i] * dw[p, k, i]
                cur = f[p, k, n + i]
                f[p, k + 1, n + i] = cur + (a_i * cur + ui) * dt[k]
                cur = f[p, k, 2 * n + i]
                f[p, k + 1, 2 * n + i] = cur + (a_i * cur + ui / 3.0) * dt[k] + 0.5 * sig_grid[k, i] * dw[p, k, i]
                cur = f[p, k, 3 * n + i]
                f[p, k + 1, 3 * n + i] = cur + (a_i * cur + 0.5 * ui) * dt[k]
    return f_arr, u_arr


def sim_sensitivity_decoupled(double[::1] a_grid_h, double[:, ::1] direction, double[::1] dt):
    cdef Py_ssize_t n_paths = direction.shape[0]
    cdef Py_ssize_t n_steps = direction.shape[1]
    out_arr = np.zeros((n_paths, n_steps + 1))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t p, k
    cdef double y
    for p in range(n_paths):
        y = 0.0
        for k in range(n_steps):
            y = y + (a_grid_h[k] * y + direction[p, k]) * dt[k]
            out[p, k + 1] = y
    return out_arr
