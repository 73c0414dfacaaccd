"""Fixed-step integration of the formation dynamics and run diagnostics.

Runs are deterministic: identical inputs (including the perturbation
seed) produce bit-identical trajectories on the same platform.  The
body-frame view subtracts the centroid and removes the best-fit
rotation against the reference shape, which makes steady translation,
spin, and scaling rates directly measurable by line fits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .control import ControllerConfig, ScalingSchedule, scheduled_distances
from .errors import DegenerateAlignment, EdgeCollapse, InsufficientDecay, NonPositiveDistance
from .motion import ReferenceShape
from .rigidity import Framework, _graph_arrays, edge_vectors

# Agents closer than this along an edge count as collided.
COLLAPSE_TOL = 1e-9
# Error norms below this are treated as already converged.
DECAY_FLOOR = 1e-8


@dataclass(frozen=True)
class Perturbation:
    """Seeded uniform-in-a-ball position noise applied per agent."""

    seed: int
    magnitude: float


@dataclass(frozen=True)
class SimConfig:
    dt: float
    duration: float
    integrator: str = "rk4"
    record_stride: int = 1
    perturbation: Perturbation | None = None

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.duration < self.dt:
            raise ValueError("duration must cover at least one step")
        if self.integrator not in ("rk4", "euler"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.record_stride < 1:
            raise ValueError("record_stride must be at least 1")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled record of one run.

    positions holds stacked agent coordinates per sample; errors and
    distances hold per-edge values; potential is half the squared error
    norm at each sample.
    """

    times: np.ndarray
    positions: np.ndarray
    errors: np.ndarray
    potential: np.ndarray
    distances: np.ndarray

    @property
    def sample_count(self) -> int:
        return self.times.size

    def error_norms(self) -> np.ndarray:
        return np.linalg.norm(self.errors, axis=1)


@dataclass(frozen=True, eq=False)
class BodyFrameTrajectory:
    """Centroid-anchored, rotation-aligned view of a trajectory.

    rotations[j] maps centered global coordinates at sample j onto the
    reference orientation; positions are already mapped.
    """

    times: np.ndarray
    positions: np.ndarray
    rotations: np.ndarray


@dataclass(frozen=True, eq=False)
class SteadyStateReport:
    """Fitted steady-state motion of a converged run.

    v_body is the centroid velocity seen from the body frame, omega the
    spin rate (scalar in the plane, vector in space), scale_rate the
    slope of the measured scale factor, lambda_fit the exponential decay
    rate of the error norm (None when the run started converged).  Every
    fit's residual lands in the residuals dict.
    """

    v_body: np.ndarray
    omega: float | np.ndarray
    scale_rate: float
    lambda_fit: float | None
    decay_decades: float | None
    residuals: dict


def apply_perturbation(fw: Framework, seed: int, magnitude: float) -> Framework:
    """Displace every agent uniformly inside a ball of the given radius."""
    rng = np.random.default_rng(seed)
    n, m = fw.graph.vertex_count, fw.dim
    directions = rng.standard_normal((n, m))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    radii = magnitude * rng.random(n) ** (1.0 / m)
    return Framework(fw.graph, m, (fw.points + radii[:, None] * directions).reshape(-1))


def perturb_to_error_norm(fw: Framework, distances: np.ndarray, seed: int,
                          target_norm: float) -> Framework:
    """Perturb positions until the distance-error norm matches target_norm.

    The displacement direction is seeded; its length is bisected by
    rescaling, accurate to about 0.1 percent.
    """
    distances = np.asarray(distances, dtype=float).reshape(-1)
    candidate = apply_perturbation(fw, seed, 1.0)
    delta = candidate.positions - fw.positions

    def err_at(scale: float) -> float:
        pts = fw.positions + scale * delta
        moved = Framework(fw.graph, fw.dim, pts)
        lengths = np.linalg.norm(edge_vectors(moved), axis=1)
        return float(np.linalg.norm(lengths - distances))

    scale = 1.0
    for _ in range(60):
        current = err_at(scale)
        if abs(current - target_norm) <= 1e-3 * target_norm:
            break
        scale *= target_norm / current
    return Framework(fw.graph, fw.dim, fw.positions + scale * delta)


def make_rhs(ref: ReferenceShape, cfg: ControllerConfig):
    """Velocity field of the controlled dynamics as a plain function of (t, p).

    Hoists every per-run constant; the arithmetic mirrors control_law
    applied to time_varying_params and scheduled_distances exactly, so
    both paths produce identical floating-point values.
    """
    graph, m = ref.graph, ref.dim
    incidence, tail_sel, head_sel, tails, heads = _graph_arrays(graph)
    base_tail = cfg.translation_part.tail + cfg.rotation_part.tail
    base_head = cfg.translation_part.head + cfg.rotation_part.head
    scale_tail = cfg.scaling_part.tail
    scale_head = cfg.scaling_part.head
    schedule, gain, distances = cfg.schedule, cfg.gain, ref.distances

    def rhs(t: float, p: np.ndarray) -> np.ndarray:
        pts = p.reshape(-1, m)
        vecs = pts[tails] - pts[heads]
        lengths = np.linalg.norm(vecs, axis=1)
        if np.any(lengths < COLLAPSE_TOL):
            raise EdgeCollapse(f"edge collapsed at t={t:.6g}")
        d_t = (1.0 + schedule.value(t)) * distances
        if np.any(d_t <= 0.0):
            raise NonPositiveDistance(f"scheduled distance is not positive at t={t:.6g}")
        units = vecs / lengths[:, None]
        e = lengths - d_t
        grad = incidence @ (e[:, None] * units)
        rate = schedule.value_rate(t)
        coef_tail = base_tail + rate * scale_tail
        coef_head = base_head + rate * scale_head
        motion = tail_sel @ (coef_tail[:, None] * units) + head_sel @ (coef_head[:, None] * units)
        return -gain * grad.reshape(-1) + motion.reshape(-1)

    return rhs


def integrate(fw0: Framework, ref: ReferenceShape, cfg: ControllerConfig,
              sim: SimConfig) -> Trajectory:
    """Integrate the controlled single-integrator dynamics.

    Time-varying offsets and scheduled distances are evaluated at every
    integrator stage time.  Halts with EdgeCollapse as soon as any edge
    drops below the collapse tolerance.
    """
    _check_schedule(cfg.schedule, sim.duration)
    graph, m = fw0.graph, fw0.dim
    start = fw0
    if sim.perturbation is not None:
        start = apply_perturbation(fw0, sim.perturbation.seed, sim.perturbation.magnitude)

    rhs = make_rhs(ref, cfg)

    n_steps = int(round(sim.duration / sim.dt))
    dt = sim.dt
    p = start.positions.copy()
    times, positions = [], []

    def record(k: int, p: np.ndarray):
        times.append(k * dt)
        positions.append(p.copy())

    record(0, p)
    for k in range(n_steps):
        t = k * dt
        if sim.integrator == "rk4":
            k1 = rhs(t, p)
            k2 = rhs(t + dt / 2.0, p + (dt / 2.0) * k1)
            k3 = rhs(t + dt / 2.0, p + (dt / 2.0) * k2)
            k4 = rhs(t + dt, p + dt * k3)
            p = p + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        else:
            p = p + dt * rhs(t, p)
        if (k + 1) % sim.record_stride == 0:
            record(k + 1, p)

    times_arr = np.array(times)
    pos_arr = np.array(positions)
    errors = np.empty((times_arr.size, graph.edge_count))
    dists = np.empty_like(errors)
    for j, (t, row) in enumerate(zip(times_arr, pos_arr)):
        fw = Framework(graph, m, row)
        d_t, _ = scheduled_distances(ref, cfg.schedule, t)
        dists[j] = d_t
        errors[j] = np.linalg.norm(edge_vectors(fw), axis=1) - d_t
    potential = 0.5 * (errors * errors).sum(axis=1)
    return Trajectory(times_arr, pos_arr, errors, potential, dists)


def _check_schedule(schedule: ScalingSchedule, duration: float):
    if schedule.min_scale_factor(duration) <= 0.0:
        raise NonPositiveDistance(
            "schedule drives the scale factor to zero within the horizon"
        )


def centroid(positions: np.ndarray, dim: int) -> np.ndarray:
    """Arithmetic mean of the stacked agent positions."""
    return np.asarray(positions, dtype=float).reshape(-1, dim).mean(axis=0)


def _align_rotation(current_pts: np.ndarray, reference_pts: np.ndarray) -> np.ndarray:
    """Proper rotation best mapping centered current onto centered reference."""
    m = current_pts.shape[1]
    cov = current_pts.T @ reference_pts
    u, sigma, vt = np.linalg.svd(cov)
    if sigma[-1] <= 1e-12 * max(sigma[0], 1e-300):
        raise DegenerateAlignment("alignment covariance is rank deficient")
    flip = np.eye(m)
    flip[-1, -1] = np.sign(np.linalg.det(vt.T @ u.T))
    return vt.T @ flip @ u.T


def body_frame_transform(traj: Trajectory, ref: ReferenceShape) -> BodyFrameTrajectory:
    """Express every sample in the rotating centroid frame of the shape."""
    m = ref.dim
    ref_centered = ref.centered_points()
    samples = traj.sample_count
    body_positions = np.empty_like(traj.positions)
    rotations = np.empty((samples, m, m))
    for j in range(samples):
        pts = traj.positions[j].reshape(-1, m)
        centered = pts - pts.mean(axis=0)
        rot = _align_rotation(centered, ref_centered)
        rotations[j] = rot
        body_positions[j] = (centered @ rot.T).reshape(-1)
    return BodyFrameTrajectory(traj.times.copy(), body_positions, rotations)


def _line_fit(x: np.ndarray, y: np.ndarray):
    """Least-squares line, returning (slope, intercept, rms residual)."""
    slope, intercept = np.polyfit(x, y, 1)
    rms = float(np.sqrt(np.mean((np.polyval([slope, intercept], x) - y) ** 2)))
    return float(slope), float(intercept), rms


def _frame_angles(rotations: np.ndarray) -> np.ndarray:
    """Unwrapped planar orientation of the shape per sample."""
    # rotations map current onto reference; the shape orientation is the inverse.
    return np.unwrap(np.arctan2(rotations[:, 0, 1], rotations[:, 0, 0]))


def decay_rate_fit(times: np.ndarray, error_norms: np.ndarray):
    """Exponential decay rate of the error norm.

    Fits log error on the contiguous segment from the first sample at or
    below half the initial norm down to the decay floor.  Returns
    (rate, r_squared, decades); the rate is positive for decay.  Raises
    InsufficientDecay when no such segment exists.
    """
    e0 = error_norms[0]
    eligible = np.nonzero((error_norms <= 0.5 * e0) & (error_norms >= DECAY_FLOOR))[0]
    if eligible.size < 3:
        raise InsufficientDecay("error norm never decays below half its initial value")
    start = int(eligible[0])
    stop = start
    while (stop + 1 < error_norms.size
           and DECAY_FLOOR <= error_norms[stop + 1] <= 0.5 * e0):
        stop += 1
    if stop - start < 2:
        raise InsufficientDecay("decaying segment has too few samples")
    seg_t = times[start:stop + 1]
    seg_log = np.log(error_norms[start:stop + 1])
    slope, intercept, _ = _line_fit(seg_t, seg_log)
    predicted = slope * seg_t + intercept
    ss_res = float(np.sum((seg_log - predicted) ** 2))
    ss_tot = float(np.sum((seg_log - seg_log.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 0.0
    decades = float((seg_log[0] - seg_log[-1]) / np.log(10.0))
    return -slope, r_squared, decades


def steady_state_report(traj: Trajectory, ref: ReferenceShape, window) -> SteadyStateReport:
    """Fit steady-state motion over a time window of a converged run.

    The window should start after the error norm settles; the decay rate
    is fitted on the whole trajectory regardless of the window.
    """
    t0, t1 = float(window[0]), float(window[1])
    mask = (traj.times >= t0) & (traj.times <= t1)
    if int(mask.sum()) < 3:
        raise ValueError("window must contain at least three samples")
    idx = np.nonzero(mask)[0]
    sub = Trajectory(traj.times[idx], traj.positions[idx], traj.errors[idx],
                     traj.potential[idx], traj.distances[idx])
    body = body_frame_transform(sub, ref)
    m = ref.dim
    residuals: dict = {}

    centroids = sub.positions.reshape(sub.sample_count, -1, m).mean(axis=1)
    increments = np.diff(centroids, axis=0)
    if m == 2:
        # Global-to-body mapping is the rotation by minus the shape angle.
        angles = _frame_angles(body.rotations)
        mid = 0.5 * (angles[1:] + angles[:-1])
        cos_a, sin_a = np.cos(mid), np.sin(mid)
        rotated = np.stack(
            [cos_a * increments[:, 0] + sin_a * increments[:, 1],
             -sin_a * increments[:, 0] + cos_a * increments[:, 1]], axis=1,
        )
    else:
        rotated = np.empty_like(increments)
        for j in range(increments.shape[0]):
            first = Rotation.from_matrix(body.rotations[j])
            second = Rotation.from_matrix(body.rotations[j + 1])
            midrot = first * (first.inv() * second) ** 0.5
            rotated[j] = midrot.apply(increments[j])
    displacement = np.vstack([np.zeros(m), np.cumsum(rotated, axis=0)])
    v_body = np.empty(m)
    v_rms = 0.0
    for axis in range(m):
        slope, _, rms = _line_fit(sub.times, displacement[:, axis])
        v_body[axis] = slope
        v_rms = max(v_rms, rms)
    residuals["v_fit_rms"] = v_rms

    if m == 2:
        angles = _frame_angles(body.rotations)
        omega, _, omega_rms = _line_fit(sub.times, angles)
        omega_out: float | np.ndarray = omega
    else:
        rates = np.empty((sub.sample_count - 1, 3))
        dt_samples = np.diff(sub.times)
        for j in range(rates.shape[0]):
            # Orientation increment of the shape between consecutive samples.
            step = Rotation.from_matrix(body.rotations[j + 1].T @ body.rotations[j])
            rates[j] = step.as_rotvec() / dt_samples[j]
        omega_out = rates.mean(axis=0)
        omega_rms = float(np.linalg.norm(rates - omega_out, axis=1).mean())
    residuals["omega_fit_rms"] = float(omega_rms)

    _, _, _, tails, heads = _graph_arrays(ref.graph)
    sample_pts = sub.positions.reshape(sub.sample_count, -1, m)
    lengths = np.linalg.norm(sample_pts[:, tails] - sample_pts[:, heads], axis=2)
    scale = (lengths / ref.distances[None, :]).mean(axis=1)
    scale_rate, _, scale_rms = _line_fit(sub.times, scale)
    residuals["scale_fit_rms"] = scale_rms

    norms = traj.error_norms()
    if norms[0] < DECAY_FLOOR:
        lambda_fit = None
        decades = None
    else:
        lambda_fit, r_squared, decades = decay_rate_fit(traj.times, norms)
        residuals["decay_r_squared"] = r_squared
    return SteadyStateReport(v_body, omega_out, scale_rate, lambda_fit, decades, residuals)
