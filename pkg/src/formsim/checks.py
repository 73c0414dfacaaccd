"""Property checks behind the verify command.

Each check returns a result row instead of raising, so one failing
property never hides the others.  Thresholds live here as constants;
they are fixed, not calibrated per run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import control_law, elastic_potential, scheduled_distances, time_varying_params
from .errors import FormsimError
from .motion import (
    MotionParameters,
    induced_velocities,
    induced_velocity_matrix,
    membership_residuals,
    rotation_field,
)
from .rigidity import Framework, rigidity_report
from .scenario import Scenario
from .simulate import (
    body_frame_transform,
    decay_rate_fit,
    integrate,
    perturb_to_error_norm,
)

MEMBERSHIP_TOL = 1e-10
IDENTITY_TOL = 1e-12
GRADIENT_TOL = 1e-6
INVARIANCE_TOL = 1e-6
CONVERGENCE_R2 = 0.99
TRACKING_REL_TOL = 0.01
VELOCITY_REL_TOL = 0.01
CONVERGED_NORM = 1e-6


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _result(name, passed, detail) -> CheckResult:
    return CheckResult(name, bool(passed), detail)


def _guard(name, fn) -> CheckResult:
    try:
        return fn()
    except FormsimError as exc:
        return _result(name, False, f"{type(exc).__name__}: {exc}")


def check_reference_rigidity(scenario: Scenario) -> CheckResult:
    name = "reference-rigidity"

    def run():
        ref = scenario.reference_shape()
        report = rigidity_report(ref.framework)
        ok = report.is_minimally_rigid and report.is_bearing_rigid
        return _result(name, ok, (
            f"rank={report.rank_rigidity} minimally_rigid={report.is_minimally_rigid} "
            f"bearing_kernel={report.bearing_kernel_dim}"
        ))

    return _guard(name, run)


def check_motion_spaces(scenario: Scenario) -> CheckResult:
    name = "motion-spaces"

    def run():
        ref = scenario.reference_shape()
        spaces = ref.spaces
        m = ref.dim
        expected = (m, 1 if m == 2 else 3, 1)
        dims = (
            spaces.translation_basis.shape[1],
            spaces.rotation_basis.shape[1],
            spaces.scaling_basis.shape[1],
        )
        residual = max(membership_residuals(ref, spaces).values())
        ok = dims == expected and residual <= MEMBERSHIP_TOL
        return _result(name, ok, f"dims={dims} expected={expected} residual={residual:.2e}")

    return _guard(name, run)


def check_velocity_map_identity(scenario: Scenario, trials: int = 200) -> CheckResult:
    name = "velocity-map-identity"

    def run():
        graph = scenario.graph()
        m, ecount = scenario.dimension, graph.edge_count
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(trials):
            units = rng.standard_normal((ecount, m))
            units /= np.linalg.norm(units, axis=1)[:, None]
            stacked = rng.standard_normal(2 * ecount)
            pv = MotionParameters.from_stacked(stacked)
            direct = induced_velocities(pv, graph, units.reshape(-1))
            via_matrix = induced_velocity_matrix(units.reshape(-1), graph) @ stacked
            denom = max(np.linalg.norm(direct), 1e-300)
            worst = max(worst, float(np.linalg.norm(direct - via_matrix) / denom))
        return _result(name, worst <= IDENTITY_TOL, f"max relative mismatch {worst:.2e}")

    return _guard(name, run)


def check_gradient_consistency(scenario: Scenario, trials: int = 100) -> CheckResult:
    name = "gradient-consistency"

    def run():
        ref = scenario.reference_shape()
        graph, m = ref.graph, ref.dim
        rng = np.random.default_rng(99)
        zero = MotionParameters.zero(graph.edge_count)
        step = 1e-6
        worst = 0.0
        scale = float(np.abs(ref.framework.positions).max())
        for _ in range(trials):
            p = ref.framework.positions + rng.uniform(-0.2, 0.2, ref.framework.positions.size) * scale
            fw = Framework(graph, m, p)
            analytic = -control_law(fw, ref.distances, zero, 1.0)
            fd = np.empty_like(analytic)
            h = step * max(1.0, scale)
            for i in range(p.size):
                plus = p.copy()
                plus[i] += h
                minus = p.copy()
                minus[i] -= h
                fd[i] = (
                    elastic_potential(Framework(graph, m, plus), ref.distances)
                    - elastic_potential(Framework(graph, m, minus), ref.distances)
                ) / (2.0 * h)
            worst = max(worst, float(
                np.linalg.norm(analytic - fd) / max(np.linalg.norm(fd), 1e-300)
            ))
        return _result(name, worst <= GRADIENT_TOL, f"max relative gradient error {worst:.2e}")

    return _guard(name, run)


def check_shape_invariance(scenario: Scenario) -> CheckResult:
    name = "shape-invariance"

    def run():
        ref = scenario.reference_shape()
        cfg = scenario.controller_config(ref)
        sim = scenario.sim
        from .simulate import SimConfig

        horizon = min(sim.duration, 20.0)
        quiet = SimConfig(dt=sim.dt, duration=horizon, integrator=sim.integrator,
                          record_stride=sim.record_stride, perturbation=None)
        traj = integrate(ref.framework, ref, cfg, quiet)
        worst = float(np.abs(traj.errors).max())
        return _result(name, worst <= INVARIANCE_TOL,
                       f"max distance error {worst:.2e} over {horizon:g} time units")

    return _guard(name, run)


def check_exponential_convergence(scenario: Scenario) -> CheckResult:
    name = "exponential-convergence"

    def run():
        ref = scenario.reference_shape()
        cfg = scenario.controller_config(ref)
        seed = scenario.sim.perturbation.seed if scenario.sim.perturbation else 7
        start = perturb_to_error_norm(ref.framework, ref.distances, seed,
                                      0.1 * float(ref.distances.min()))
        from .simulate import SimConfig

        quiet = SimConfig(dt=scenario.sim.dt, duration=scenario.sim.duration,
                          integrator=scenario.sim.integrator,
                          record_stride=scenario.sim.record_stride, perturbation=None)
        traj = integrate(start, ref, cfg, quiet)
        rate, r_squared, decades = decay_rate_fit(traj.times, traj.error_norms())
        ok = rate > 0.0 and r_squared >= CONVERGENCE_R2 and decades >= 1.0
        return _result(name, ok, (
            f"rate={rate:.3f} r_squared={r_squared:.4f} decades={decades:.2f}"
        ))

    return _guard(name, run)


def check_motion_tracking(scenario: Scenario) -> CheckResult:
    """Distance tracking for scaling runs, velocity match for steady runs."""
    if scenario.schedule.kind == "none":
        return _check_steady_velocities(scenario)
    return _check_distance_tracking(scenario)


def _check_distance_tracking(scenario: Scenario, transient: float = 3.0) -> CheckResult:
    name = "distance-tracking"

    def run():
        ref = scenario.reference_shape()
        cfg = scenario.controller_config(ref)
        traj = integrate(scenario.initial_framework(), ref, cfg, scenario.sim)
        mask = traj.times >= transient
        if not mask.any():
            return _result(name, False, "horizon shorter than the transient window")
        rel = np.abs(traj.errors[mask]) / ref.distances[None, :]
        worst = float(rel.max())
        return _result(name, worst <= TRACKING_REL_TOL,
                       f"max |length - scheduled| = {worst * 100:.3f}% of reference")

    return _guard(name, run)


def _check_steady_velocities(scenario: Scenario) -> CheckResult:
    name = "steady-velocity"

    def run():
        ref = scenario.reference_shape()
        cfg = scenario.controller_config(ref)
        designed = (
            np.tile(scenario.v_body, ref.graph.vertex_count)
            + rotation_field(ref.centered_points(), scenario.omega)
        ).reshape(-1, ref.dim)
        speed_floor = float(np.linalg.norm(designed, axis=1).max())
        if speed_floor < 1e-9:
            return _result(name, True, "no motion designed, nothing to track")
        traj = integrate(scenario.initial_framework(), ref, cfg, scenario.sim)
        norms = traj.error_norms()
        converged = np.nonzero(norms < CONVERGED_NORM)[0]
        if converged.size == 0:
            return _result(name, False,
                           f"error norm never fell below {CONVERGED_NORM:g}")
        idx = converged[:50]
        body = body_frame_transform(_subsample(traj, idx), ref)
        worst = 0.0
        for row, t, rot in zip(traj.positions[idx], traj.times[idx], body.rotations):
            fw = Framework(ref.graph, ref.dim, row)
            d_t, _ = scheduled_distances(ref, cfg.schedule, t)
            u = control_law(fw, d_t, time_varying_params(cfg, t), cfg.gain)
            measured = (u.reshape(-1, ref.dim) @ rot.T)
            for i in range(designed.shape[0]):
                denom = max(np.linalg.norm(designed[i]), 1e-300)
                worst = max(worst, float(
                    np.linalg.norm(measured[i] - designed[i]) / denom
                ))
        return _result(name, worst <= VELOCITY_REL_TOL,
                       f"max per-agent velocity mismatch {worst * 100:.3f}%")

    return _guard(name, run)


def _subsample(traj, idx):
    from .simulate import Trajectory

    return Trajectory(traj.times[idx], traj.positions[idx], traj.errors[idx],
                      traj.potential[idx], traj.distances[idx])


def run_verification(scenario: Scenario) -> list[CheckResult]:
    """Run every check that applies to the scenario."""
    return [
        check_reference_rigidity(scenario),
        check_motion_spaces(scenario),
        check_velocity_map_identity(scenario),
        check_gradient_consistency(scenario),
        check_shape_invariance(scenario),
        check_exponential_convergence(scenario),
        check_motion_tracking(scenario),
    ]
