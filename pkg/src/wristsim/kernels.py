"""Hot numeric kernels.

Everything here is scalar/array code that numba can compile; see ``_accel``
for the switch back to interpreted execution. Angles are degrees and
torques millinewton-meters at every boundary; radians only appear inside
the force laws.

Parameter vectors passed to :func:`simulate` are laid out by the index
constants below so the kernel signature stays fixed. Two derivative filters
run side by side: row 0 of the filter arrays is the logged velocity signal,
row 1 the faster estimate the wall and PD damping terms act on.
"""
from __future__ import annotations

import math

import numpy as np

from ._accel import jit

D2R = math.pi / 180.0
R2D = 180.0 / math.pi

# plant vector
P_INERTIA = 0
P_DAMPING = 1
P_LIMIT_DEG = 2
P_LIMIT_K = 3
P_LIMIT_C = 4
P_COUNTS = 5
P_DT = 6
P_SIZE = 7

# motor controller vector
M_REF_MODE = 0  # 0: smoothstep reference, 1: constant-velocity gap
M_REF_FROM = 1
M_REF_TO = 2
M_REF_PARAM = 3  # smoothstep duration (s) or gap velocity (deg/s)
M_GAP_HALF = 4
M_WALL_K = 5  # N*m/rad, walls disabled when 0
M_WALL_C = 6
M_PD_KP = 7  # N*m/rad, PD disabled when 0
M_PD_KD = 8
M_RAMP_TARGET = 9  # mNm
M_RAMP_S = 10
M_RAMP_RELEASE = 11  # local time the ramp torque stops; < 0 never
M_GRAVITY = 12  # mNm, additive
M_SIZE = 13

# human controller vector
H_ACTIVE = 0
H_FROM = 1
H_TO = 2
H_DURATION = 3
H_KP = 4
H_KD = 5
H_FEEDFORWARD = 6  # fraction of the motor ramp torque the human cancels
# limb's internal model of the rotor, used for inverse-dynamics feedforward
H_MODEL_INERTIA = 7
H_MODEL_DAMPING = 8
H_SIZE = 9

# filter state vector
F_X1 = 0
F_X2 = 1
F_Y1 = 2
F_Y2 = 3
F_PREV = 4
F_READY = 5
F_SIZE = 6

# log columns
L_T = 0
L_ANGLE = 1  # encoder angle
L_VEL_EST = 2
L_ANGLE_TRUE = 3
L_VEL_TRUE = 4
L_MOTOR = 5
L_HUMAN = 6
L_SIZE = 7


@jit
def smoothstep01(u):
    if u <= 0.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    return u * u * (3.0 - 2.0 * u)


@jit
def smoothstep_slope01(u):
    if u <= 0.0 or u >= 1.0:
        return 0.0
    return 6.0 * u * (1.0 - u)


@jit
def smoothstep_curvature01(u):
    if u <= 0.0 or u >= 1.0:
        return 0.0
    return 6.0 - 12.0 * u


@jit
def spring_wall(angle, velocity, lower, upper, stiffness, damping):
    """Unilateral spring-damper torque (mNm) for a wall pair.

    Zero inside ``[lower, upper]``. Outside, the torque pushes toward the gap
    and is clipped so damping can never make the wall pull.
    """
    if angle > upper:
        tau = -(stiffness * (angle - upper) * D2R + damping * velocity * D2R)
        if tau > 0.0:
            tau = 0.0
        return 1000.0 * tau
    if angle < lower:
        tau = stiffness * (lower - angle) * D2R - damping * velocity * D2R
        if tau < 0.0:
            tau = 0.0
        return 1000.0 * tau
    return 0.0


@jit
def torque_ramp01(t, ramp_s):
    if t <= 0.0:
        return 0.0
    if t >= ramp_s:
        return 1.0
    return t / ramp_s


@jit
def quantize(angle, counts_per_rev):
    # the 1e-9 count guard keeps exact grid points on their own count
    counts = math.floor(angle * (counts_per_rev / 360.0) + 1e-9)
    return counts * (360.0 / counts_per_rev)


@jit
def biquad(coef, state, x):
    """Direct form I second-order section; ``state`` is updated in place."""
    y = (coef[0] * x + coef[1] * state[F_X1] + coef[2] * state[F_X2]
         - coef[3] * state[F_Y1] - coef[4] * state[F_Y2])
    state[F_X2] = state[F_X1]
    state[F_X1] = x
    state[F_Y2] = state[F_Y1]
    state[F_Y1] = y
    return y


@jit
def derivative_step(coef, state, angle, inv_dt):
    if state[F_READY] == 0.0:
        state[F_PREV] = angle
        state[F_READY] = 1.0
    raw = (angle - state[F_PREV]) * inv_dt
    state[F_PREV] = angle
    return biquad(coef, state, raw)


@jit
def plant_step(angle, velocity, t, motor, human, inv_inertia, damping,
               limit_deg, limit_k, limit_c, dt):
    """One semi-implicit Euler step. Torques in mNm; returns the new state."""
    w = velocity * D2R
    limiter = spring_wall(angle, velocity, -limit_deg, limit_deg, limit_k, limit_c)
    acc = ((motor + human + limiter) * 1e-3 - damping * w) * inv_inertia
    w = w + dt * acc
    return angle + dt * w * R2D, w * R2D, t + dt


@jit
def simulate(state, filt, plant, coef, motor, human, n_steps, log):
    """Advance the closed loop ``n_steps`` times.

    ``state`` ([angle, velocity, t]) and ``filt`` (2 x F_SIZE) are updated
    in place; row ``i`` of ``log`` receives the pre-step sample at step
    ``i``. The robot only sees the encoder angle and filtered velocities;
    the human controller acts on the true state.
    """
    inv_inertia = 1.0 / plant[P_INERTIA]
    damping = plant[P_DAMPING]
    limit_deg = plant[P_LIMIT_DEG]
    limit_k = plant[P_LIMIT_K]
    limit_c = plant[P_LIMIT_C]
    counts = plant[P_COUNTS]
    dt = plant[P_DT]
    inv_dt = 1.0 / dt

    mode = motor[M_REF_MODE]
    r_from = motor[M_REF_FROM]
    r_to = motor[M_REF_TO]
    r_param = motor[M_REF_PARAM]
    gap = motor[M_GAP_HALF]
    wall_k = motor[M_WALL_K]
    wall_c = motor[M_WALL_C]
    kp = motor[M_PD_KP]
    kd = motor[M_PD_KD]
    ramp_target = motor[M_RAMP_TARGET]
    ramp_s = motor[M_RAMP_S]
    release = motor[M_RAMP_RELEASE]
    gravity = motor[M_GRAVITY]

    h_active = human[H_ACTIVE] != 0.0
    h_from = human[H_FROM]
    h_to = human[H_TO]
    h_dur = human[H_DURATION]
    h_kp = human[H_KP]
    h_kd = human[H_KD]
    h_ff = human[H_FEEDFORWARD]
    h_j = human[H_MODEL_INERTIA]
    h_b = human[H_MODEL_DAMPING]
    inv_r = 1.0 / r_param if r_param > 0.0 else 0.0
    inv_h = 1.0 / h_dur if h_dur > 0.0 else 0.0
    inv_ramp = 1.0 / ramp_s if ramp_s > 0.0 else 0.0
    kp_m = 1000.0 * kp * D2R
    kd_m = 1000.0 * kd * D2R
    h_kp_m = 1000.0 * h_kp * D2R
    h_kd_m = 1000.0 * h_kd * D2R

    t0 = state[2]
    for i in range(n_steps):
        angle = state[0]
        velocity = state[1]
        t = state[2]
        # local time from the step count; summing dt drifts
        local = i * dt

        q = quantize(angle, counts)
        v_est = derivative_step(coef[0], filt[0], q, inv_dt)
        v_ctl = derivative_step(coef[1], filt[1], q, inv_dt)

        if mode == 0.0:
            if r_param > 0.0:
                u = local * inv_r
                ref = r_from + (r_to - r_from) * smoothstep01(u)
                ref_rate = (r_to - r_from) * smoothstep_slope01(u) * inv_r
            else:
                ref = r_to
                ref_rate = 0.0
        else:
            ref = r_from + r_param * local
            ref_rate = r_param
            if (r_param >= 0.0 and ref >= r_to) or (r_param < 0.0 and ref <= r_to):
                ref = r_to
                ref_rate = 0.0

        tau_m = gravity
        if wall_k > 0.0:
            tau_m += spring_wall(q, v_ctl - ref_rate, ref - gap, ref + gap, wall_k, wall_c)
        if kp > 0.0 or kd > 0.0:
            tau_m += kp_m * (ref - q) + kd_m * (ref_rate - v_ctl)
        tau_ramp = 0.0
        if ramp_target != 0.0:
            if release < 0.0 or local < release:
                if local >= ramp_s:
                    tau_ramp = ramp_target
                else:
                    tau_ramp = ramp_target * local * inv_ramp
            tau_m += tau_ramp

        tau_h = 0.0
        if h_active:
            if h_dur > 0.0:
                hu = local * inv_h
                h_ref = h_from + (h_to - h_from) * smoothstep01(hu)
                h_rate = (h_to - h_from) * smoothstep_slope01(hu) * inv_h
                h_acc = (h_to - h_from) * smoothstep_curvature01(hu) * inv_h * inv_h
            else:
                h_ref = h_to
                h_rate = 0.0
                h_acc = 0.0
            tau_h = h_kp_m * (h_ref - angle) + h_kd_m * (h_rate - velocity) - h_ff * tau_ramp
            tau_h += 1000.0 * D2R * (h_j * h_acc + h_b * h_rate)

        log[i, L_T] = t0 + local
        log[i, L_ANGLE] = q
        log[i, L_VEL_EST] = v_est
        log[i, L_ANGLE_TRUE] = angle
        log[i, L_VEL_TRUE] = velocity
        log[i, L_MOTOR] = tau_m
        log[i, L_HUMAN] = tau_h

        a, v, _ = plant_step(angle, velocity, t, tau_m, tau_h, inv_inertia, damping,
                             limit_deg, limit_k, limit_c, dt)
        state[0] = a
        state[1] = v
        state[2] = t0 + (i + 1) * dt


@jit
def run_program(state, filt, plant, coef, motors, humans, steps, log):
    """Run consecutive segments; row ``k`` of ``motors``/``humans`` drives
    ``steps[k]`` steps and the segments are logged back to back."""
    start = 0
    for k in range(steps.shape[0]):
        n = steps[k]
        simulate(state, filt, plant, coef, motors[k], humans[k], n, log[start:start + n])
        start += n


@jit
def signed_rank_counts(doubled_ranks):
    """Number of sign patterns giving each doubled positive-rank sum.

    ``doubled_ranks`` holds 2x the (average) ranks, so tied magnitudes stay
    integral. Entry ``s`` of the result counts the subsets whose doubled
    rank sum equals ``s``.
    """
    total = 0
    for r in doubled_ranks:
        total += r
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    reach = 0
    for r in doubled_ranks:
        for s in range(reach, -1, -1):
            if counts[s] != 0.0:
                counts[s + r] += counts[s]
        reach += r
    return counts
