# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled restart-and-rollout kernel.

Must stay bit-identical to ``_rollout_py``: same uniform layout, same
inverse-CDF rule, same accumulation order.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t _draw(const double[::1] cdf, double u) noexcept nogil:
    # cdf entries past the last positive mass are +inf, so this always returns
    cdef Py_ssize_t i = 0
    while not (u < cdf[i]):
        i += 1
    return i


cdef inline Py_ssize_t _draw2(const double[:, ::1] cdf, Py_ssize_t row, double u) noexcept nogil:
    cdef Py_ssize_t i = 0
    while not (u < cdf[row, i]):
        i += 1
    return i


cdef inline Py_ssize_t _draw3(const double[:, :, ::1] cdf, Py_ssize_t s, Py_ssize_t a,
                              double u) noexcept nogil:
    cdef Py_ssize_t i = 0
    while not (u < cdf[s, a, i]):
        i += 1
    return i


def simulate_trajectories(const double[:, ::1] u, const double[::1] nu_cdf,
                          const double[:, ::1] pi_cdf, const double[:, :, ::1] p_cdf,
                          const double[:, ::1] cost, const double[::1] reg_cost,
                          double gamma, Py_ssize_t horizon,
                          Py_ssize_t start_s=-1, Py_ssize_t start_a=-1):
    cdef Py_ssize_t n = u.shape[0]
    cdef Py_ssize_t n_actions = cost.shape[1]
    cdef Py_ssize_t r = 1 + 3 * horizon
    cdef double stop = 1.0 - gamma
    cdef Py_ssize_t m, i, t, s, a, s_m, a_m, idx
    cdef double disc, est

    if u.shape[1] < 1 + 5 * horizon:
        raise ValueError("uniform block too narrow for the horizon")
    states_arr = np.empty(n, dtype=np.int64)
    actions_arr = np.empty(n, dtype=np.int64)
    est_arr = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] states = states_arr
    cdef cnp.int64_t[::1] actions = actions_arr
    cdef double[::1] estimates = est_arr

    with nogil:
        for m in range(n):
            if start_s >= 0:
                s = start_s
            else:
                s = _draw(nu_cdf, u[m, 0])
                for i in range(horizon):
                    if u[m, 1 + 3 * i] < stop:
                        break
                    a = _draw2(pi_cdf, s, u[m, 2 + 3 * i])
                    s = _draw3(p_cdf, s, a, u[m, 3 + 3 * i])
            s_m = s
            if start_a >= 0:
                a = start_a
            else:
                idx = <Py_ssize_t>(u[m, r] * n_actions)
                a = idx if idx < n_actions else n_actions - 1
            a_m = a

            est = 0.0
            disc = 1.0
            for t in range(horizon):
                est = est + disc * (cost[s, a] + reg_cost[s])
                disc = disc * gamma
                if t + 1 < horizon:
                    s = _draw3(p_cdf, s, a, u[m, r + 2 * t + 1])
                    a = _draw2(pi_cdf, s, u[m, r + 2 * t + 2])
            states[m] = s_m
            actions[m] = a_m
            estimates[m] = est
    return states_arr, actions_arr, est_arr
