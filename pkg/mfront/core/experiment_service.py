"""
Experiment Service Module.

This module contains the business logic behind every CLI subcommand. Each
experiment kind has a service that runs one epsilon-point and writes its
task-private files; ExperimentService fans the points of an epsilon list out
to a worker pool, prints one summary line per point and writes the metadata.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy import stats

from mfront.core.pde_solver import initial_state, run_experiment
from mfront.core.problem import build_problem, validate_hypotheses
from mfront.core.reduced_dynamics import (
    decay_rate,
    default_xi_grid,
    envelope_ratio,
    halving_time,
    integrate_interface,
    speed_map,
)
from mfront.core.spectral import (
    check_potential_properties,
    check_spectral_hypotheses,
    derivative_coupling_series,
    first_eigenvalue_bound,
    spectrum_at,
)
from mfront.core.steady_family import build_approx_member, build_exact_steady, omega_residual, steady_interface
from mfront.core.store import RunStore, epsilon_tag
from mfront.middleware.context import RunContext, run_id_context
from mfront.models.config import (
    ExperimentConfig,
    SimulateExperiment,
    SlowMotionExperiment,
    SpectrumExperiment,
    SpeedmapExperiment,
    SteadyExperiment,
    SweepExperiment,
)
from mfront.models.problem import ProblemSpec
from mfront.models.results import InterfaceTrajectory, PointSummary, RunResult, ScalingFit
from mfront.utils.logger import get_logger

logger = get_logger()

RESIDUAL_MAP_POINTS = 41


def _ln_abs(value: Optional[float]) -> Optional[float]:
    if value is None or not math.isfinite(value) or value == 0.0:
        return None
    return math.log(abs(value))


class SteadyService:
    """Exact steady state and, optionally, one family member."""

    @staticmethod
    def run(spec: ProblemSpec, experiment: SteadyExperiment, store: RunStore) -> PointSummary:
        tag = epsilon_tag(spec.epsilon)
        exact = build_exact_steady(spec)
        files = [store.write_profile(f"profile_exact_{tag}.csv", exact.nodes, exact.profile, exact.profile_deriv)]
        metrics = {
            "kappa": exact.kappa,
            "xi_star": exact.xi_star,
            "x_star": exact.x_star,
            "boundary_residual": exact.boundary_residual,
        }
        line = f"eps={spec.epsilon:.6g} kappa={exact.kappa:.10g} xi_star={exact.xi_star:.6g}"
        if experiment.xi is not None:
            member = build_approx_member(spec, experiment.xi)
            files.append(
                store.write_profile(f"profile_member_{tag}.csv", spec.nodes, member.profile, member.profile_deriv)
            )
            omega = omega_residual(member)
            metrics["log10_omega"] = omega.log10_abs if omega.sign else None
            line += f" log10_omega({experiment.xi:g})={omega.log10_abs:.4f}"
        return PointSummary(
            epsilon=spec.epsilon,
            line=line,
            metrics=metrics,
            reports={"hypotheses": validate_hypotheses(spec), "extension": exact.extension},
            files=[p.name for p in files],
        )


class SpectrumService:
    """Leading spectrum at one interface position with its hypothesis reports."""

    @staticmethod
    def run(spec: ProblemSpec, experiment: SpectrumExperiment, store: RunStore) -> PointSummary:
        tag = epsilon_tag(spec.epsilon)
        member = build_approx_member(spec, experiment.xi)
        spectrum = spectrum_at(spec, experiment.xi, experiment.K)
        report = check_spectral_hypotheses(
            spectrum, omega_residual(member), experiment.gap_min, experiment.h3_ratio_max
        )
        potential = check_potential_properties(member, float(spectrum.eigenvalues[1]))
        bound = first_eigenvalue_bound(member)
        coupling = derivative_coupling_series(spec, experiment.xi, experiment.K)
        files = [
            store.write_spectrum(f"spectrum_{tag}.csv", spectrum),
            store.write_eigenfunctions(f"eigenfunctions_{tag}.csv", spectrum),
        ]
        if not report.passed:
            logger.warning(
                "Spectral hypotheses not satisfied",
                extra={"epsilon": spec.epsilon, "failed": [c.name for c in report.checks if not c.passed]},
            )
        lam = spectrum.eigenvalues
        return PointSummary(
            epsilon=spec.epsilon,
            line=(
                f"eps={spec.epsilon:.6g} lambda1={lam[0]:.6e} lambda2={lam[1]:.6e} "
                f"gap={spectrum.gap:.6g} hypotheses={'pass' if report.passed else 'fail'}"
            ),
            metrics={
                "lambda1": float(lam[0]),
                "lambda2": float(lam[1]),
                "gap": spectrum.gap,
                "eps_lambda2": spec.epsilon * float(lam[1]),
                "mu1_bound": bound,
                "max_residual": float(np.max(spectrum.residuals)),
            },
            reports={"spectral": report, "potential": potential, "coupling_series": coupling},
            files=[p.name for p in files],
        )


class SpeedmapService:
    """Interface speed over the admissible band."""

    @staticmethod
    def run(spec: ProblemSpec, experiment: SpeedmapExperiment, store: RunStore) -> PointSummary:
        tag = epsilon_tag(spec.epsilon)
        result = speed_map(spec, default_xi_grid(spec, experiment.n_xi), experiment.theta_mode)
        path = store.write_speedmap(f"speedmap_{tag}.csv", result)
        violations = result.violations()
        return PointSummary(
            epsilon=spec.epsilon,
            line=(
                f"eps={spec.epsilon:.6g} theta'(xi*)={result.theta_prime_at_star:.6e} "
                f"dissipative={'yes' if not violations else 'no'}"
            ),
            metrics={
                "theta_prime_at_star": result.theta_prime_at_star,
                "xi_star": result.xi_star,
                "violations": float(len(violations)),
            },
            reports={"violations": violations},
            files=[path.name],
        )


class SlowMotionService:
    """Reduced interface motion, halving time and exponential envelope."""

    @staticmethod
    def trajectory(
        spec: ProblemSpec,
        xi0: float,
        mode: str,
        t_end: Optional[float] = None,
        target_xi: Optional[float] = None,
        n_times: int = 200,
    ) -> Tuple[InterfaceTrajectory, PointSummary]:
        trajectory = integrate_interface(spec, xi0, t_end=t_end, target_xi=target_xi, n_times=n_times, mode=mode)
        beta = decay_rate(spec, mode) if trajectory.distance[0] > 0.0 else None
        t_half = halving_time(trajectory)
        envelope = envelope_ratio(trajectory, beta) if beta is not None else None
        line = f"eps={spec.epsilon:.6g} beta={beta if beta is None else format(beta, '.6e')}"
        line += f" t_half={t_half if t_half is None else format(t_half, '.6g')}"
        return trajectory, PointSummary(
            epsilon=spec.epsilon,
            line=line,
            metrics={
                "beta": beta,
                "beta_fit": trajectory.beta_fit,
                "t_half": t_half,
                "envelope_ratio": envelope,
                "xi_star": trajectory.xi_star,
            },
        )

    @staticmethod
    def run(spec: ProblemSpec, experiment: SlowMotionExperiment, store: RunStore) -> PointSummary:
        trajectory, summary = SlowMotionService.trajectory(
            spec, experiment.xi0, experiment.theta_mode, experiment.t_end, experiment.target_xi, experiment.n_times
        )
        path = store.write_trajectory(f"trajectory_{epsilon_tag(spec.epsilon)}.csv", trajectory)
        return summary.model_copy(update={"files": [path.name]})


def compare_trajectories(
    run: RunResult,
    reduced: InterfaceTrajectory,
    transient: float,
    h: float,
) -> Dict[str, Optional[float]]:
    """
    Largest |xi_hat_PDE - xi_reduced| after the transient.

    Samples stop counting once the reduced interface is within 5h of xi*.
    The tolerance is max(5h, 0.05 |xi0 - xi*|).
    """
    times = run.trajectory.times
    pde_xi = run.trajectory.xi
    with np.errstate(divide="ignore"):
        log_distance = np.log(reduced.distance)
    side = 1.0 if reduced.xi0 >= reduced.xi_star else -1.0
    reduced_xi = reduced.xi_star + side * np.exp(np.interp(times, reduced.times, log_distance))
    window = (times >= transient) & (np.abs(reduced_xi - reduced.xi_star) > 5.0 * h)
    tolerance = max(5.0 * h, 0.05 * abs(reduced.xi0 - reduced.xi_star))
    if not np.any(window):
        return {"max_discrepancy": None, "tolerance": tolerance, "agrees": None}
    discrepancy = float(np.max(np.abs(pde_xi[window] - reduced_xi[window])))
    return {"max_discrepancy": discrepancy, "tolerance": tolerance, "agrees": float(discrepancy <= tolerance)}


def decay_after_transient(run: RunResult, transient: float) -> Dict[str, Optional[float]]:
    """Monotonicity of ||v||_L2 after the transient and its final fraction of the post-transient maximum."""
    times = run.trajectory.times
    norms = np.array([s.v_norms.l2 for s in run.snapshots])
    late = norms[times >= transient]
    if late.size < 2:
        return {"v_l2_nonincreasing": None, "v_l2_final_fraction": None}
    peak = float(np.max(late))
    return {
        "v_l2_nonincreasing": float(bool(np.all(np.diff(late) <= 1e-12 * max(1.0, peak)))),
        "v_l2_final_fraction": float(late[-1] / peak) if peak > 0.0 else 0.0,
    }


class SimulateService:
    """Full PDE run, optionally compared with the reduced motion."""

    @staticmethod
    def run(spec: ProblemSpec, experiment: SimulateExperiment, store: RunStore) -> PointSummary:
        tag = epsilon_tag(spec.epsilon)
        u0 = initial_state(spec, experiment)
        run = run_experiment(spec, u0, experiment.integrator)
        files = store.write_pde_run(f"pde_{tag}", run, spec.nodes)
        metrics: Dict[str, Optional[float]] = {
            "xi_hat_final": float(run.trajectory.xi[-1]),
            "xi_star": run.trajectory.xi_star,
            "mass_defect_max": run.metadata["mass_defect_max"],
        }
        metrics.update(decay_after_transient(run, experiment.transient))
        line = f"eps={spec.epsilon:.6g} xi_hat(t_end)={metrics['xi_hat_final']:.8g} steps={run.final.steps}"
        if experiment.reduced:
            reduced = integrate_interface(spec, experiment.xi0, t_end=experiment.integrator.t_end, n_times=400)
            files.append(store.write_trajectory(f"reduced_{tag}.csv", reduced))
            comparison = compare_trajectories(run, reduced, experiment.transient, spec.grid.h_min)
            metrics.update(comparison)
            if comparison["max_discrepancy"] is not None:
                line += f" max|xi_pde-xi_reduced|={comparison['max_discrepancy']:.3e}"
        return PointSummary(
            epsilon=spec.epsilon,
            line=line,
            metrics=metrics,
            reports={"pde": run.metadata, "integrator": experiment.integrator},
            files=[p.name for p in files],
        )


class SweepService:
    """Per-epsilon quantities of a sweep and the fits over epsilon."""

    @staticmethod
    def run(spec: ProblemSpec, experiment: SweepExperiment, store: RunStore) -> PointSummary:
        if experiment.of == "spectrum":
            summary = SpectrumService.run(
                spec, SpectrumExperiment(xi=experiment.xi, K=experiment.K), store
            )
            summary.metrics["ln_abs_lambda1"] = _ln_abs(summary.metrics["lambda1"])
            return summary
        if experiment.of == "residual":
            return SweepService._residual(spec, experiment, store)
        trajectory, summary = SlowMotionService.trajectory(spec, experiment.xi0, experiment.theta_mode)
        path = store.write_trajectory(f"trajectory_{epsilon_tag(spec.epsilon)}.csv", trajectory)
        summary.metrics["ln_t_half"] = _ln_abs(summary.metrics["t_half"])
        return summary.model_copy(update={"files": [path.name]})

    @staticmethod
    def _residual(spec: ProblemSpec, experiment: SweepExperiment, store: RunStore) -> PointSummary:
        grid = default_xi_grid(spec, RESIDUAL_MAP_POINTS)
        omegas = [omega_residual(build_approx_member(spec, float(xi))) for xi in grid]
        path = store.write_csv(
            f"residual_{epsilon_tag(spec.epsilon)}.csv",
            ("xi", "log10_omega"),
            (grid, [o.log10_abs for o in omegas]),
        )
        at_xi = omega_residual(build_approx_member(spec, experiment.xi))
        metrics: Dict[str, Optional[float]] = {
            "ln_omega": at_xi.log_abs if at_xi.sign else None,
            "log10_omega": at_xi.log10_abs if at_xi.sign else None,
        }
        xi_star = steady_interface(spec)
        at_star = omega_residual(build_approx_member(spec, xi_star))
        lo, hi = spec.band
        away = [xi_star + s * 0.3 * spec.ell for s in (-1.0, 1.0) if lo < xi_star + s * 0.3 * spec.ell < hi]
        if away:
            floor = min(omega_residual(build_approx_member(spec, x)).log10_abs for x in away)
            metrics["log10_omega_star_ratio"] = at_star.log10_abs - floor
        return PointSummary(
            epsilon=spec.epsilon,
            line=f"eps={spec.epsilon:.6g} log10_omega({experiment.xi:g})={at_xi.log10_abs:.6f}",
            metrics=metrics,
            files=[path.name],
        )

    @staticmethod
    def summarize(experiment: SweepExperiment, summaries: Sequence[PointSummary], store: RunStore) -> Dict:
        """
        Write the sweep table and fit the log quantity against 1/epsilon.

        Returns:
            Dict: Fits and the cross-epsilon property checks
        """
        summaries = sorted(summaries, key=lambda s: s.epsilon)
        eps = np.array([s.epsilon for s in summaries])

        def column(name: str) -> List[Optional[float]]:
            return [s.metrics.get(name) for s in summaries]

        checks: Dict[str, Optional[float]] = {}
        if experiment.of == "spectrum":
            lam1, lam2 = column("lambda1"), column("lambda2")
            store.write_csv("sweep_spectrum.csv", ("epsilon", "lambda1", "lambda2", "gap"), (eps, lam1, lam2, column("gap")))
            fit = fit_inverse_epsilon("ln|lambda1|", eps, column("ln_abs_lambda1"))
            scaled1 = eps * np.array(lam1, dtype=float)
            scaled2 = eps * np.array(lam2, dtype=float)
            checks["lambda1_all_negative"] = float(bool(np.all(np.array(lam1, dtype=float) < 0.0)))
            checks["eps_lambda2_band_ratio"] = float(np.max(np.abs(scaled2)) / np.min(np.abs(scaled2)))
            # eps * lambda_1 approaches 0 as eps decreases
            checks["eps_lambda1_monotone"] = float(bool(np.all(np.diff(np.abs(scaled1)) > 0.0)))
        elif experiment.of == "residual":
            store.write_csv("sweep_residual.csv", ("epsilon", "xi", "log10_omega"), (eps, [experiment.xi] * len(eps), column("log10_omega")))
            fit = fit_inverse_epsilon("ln Omega", eps, column("ln_omega"))
        else:
            t_half = column("t_half")
            store.write_csv(
                "sweep_slow_motion.csv",
                ("epsilon", "beta", "t_half", "envelope_ratio"),
                (eps, column("beta"), t_half, column("envelope_ratio")),
            )
            fit = fit_inverse_epsilon("ln t_half", eps, column("ln_t_half"))
            values = np.array([np.nan if t is None else t for t in t_half])
            checks["t_half_decreasing_in_eps"] = float(bool(np.all(np.diff(values) < 0.0)))
        payload = {"of": experiment.of, "fit": fit, "checks": checks}
        store.write_json("fit_summary.json", payload)
        if fit is not None:
            logger.info(
                "Sweep fit",
                extra={"quantity": fit.quantity, "slope": fit.slope, "r2": fit.r2, "n": fit.n},
            )
        return payload


def fit_inverse_epsilon(quantity: str, epsilons: Sequence[float], values: Sequence[Optional[float]]) -> Optional[ScalingFit]:
    """
    Fit values = intercept + slope / epsilon by least squares.

    Points with a missing value are skipped; fewer than three remaining points give None.

    Returns:
        Optional[ScalingFit]: Slope, intercept, R^2 and the 95% t-interval of the slope
    """
    pairs = [(1.0 / e, v) for e, v in zip(epsilons, values) if v is not None and math.isfinite(v)]
    if len(pairs) < 3:
        return None
    x, y = np.array(pairs).T
    result = stats.linregress(x, y)
    half = float(stats.t.ppf(0.975, len(pairs) - 2) * result.stderr)
    return ScalingFit(
        quantity=quantity,
        slope=float(result.slope),
        intercept=float(result.intercept),
        r2=float(result.rvalue**2),
        slope_ci=(float(result.slope) - half, float(result.slope) + half),
        n=len(pairs),
    )


SERVICES: Dict[str, Callable[[ProblemSpec, BaseModel, RunStore], PointSummary]] = {
    "steady": SteadyService.run,
    "spectrum": SpectrumService.run,
    "speedmap": SpeedmapService.run,
    "slow-motion": SlowMotionService.run,
    "simulate": SimulateService.run,
    "sweep": SweepService.run,
}


class PointTask(BaseModel):
    """One epsilon-point of an experiment, as shipped to a worker process."""
    config: ExperimentConfig
    epsilon: float
    out_dir: str
    run_id: str


def run_point(task: PointTask) -> PointSummary:
    """
    Run one epsilon-point inside the caller's run ID.

    Raises:
        MfrontError: Propagated from the numerical modules
    """
    token = run_id_context.set(task.run_id)
    try:
        spec = build_problem(task.config.problem, task.epsilon)
        store = RunStore(Path(task.out_dir))
        service = SERVICES[task.config.experiment.kind]
        summary = service(spec, task.config.experiment, store)
        logger.info("Point finished", extra={"epsilon": task.epsilon, "kind": task.config.experiment.kind})
        return summary
    except Exception as e:
        logger.error(
            f"Error running point: {str(e)}",
            extra={"epsilon": task.epsilon, "kind": task.config.experiment.kind, "error": str(e)},
        )
        raise
    finally:
        run_id_context.reset(token)


class ExperimentService:
    """Orchestrates the epsilon-points of one command and joins their summaries."""

    @staticmethod
    def run(
        config: ExperimentConfig,
        store: RunStore,
        context: RunContext,
        jobs: int = 1,
        echo: Callable[[str], None] = print,
    ) -> List[PointSummary]:
        """
        Run every epsilon-point of a config and write the metadata.

        Args:
            config: Validated experiment config
            store: Output directory of the command
            context: Active run context
            jobs: Worker processes for epsilon lists
            echo: Sink of the one-line summaries

        Returns:
            List[PointSummary]: Summaries in epsilon order of the config

        Raises:
            MfrontError: The first failing point's error
        """
        epsilons = config.problem.epsilons
        tasks = [
            PointTask(config=config, epsilon=eps, out_dir=str(store.root), run_id=context.run_id) for eps in epsilons
        ]
        logger.info(
            "Running experiment",
            extra={"kind": config.experiment.kind, "points": len(tasks), "jobs": jobs},
        )
        summaries: List[PointSummary] = []
        if jobs <= 1 or len(tasks) == 1:
            for task in tasks:
                summaries.append(run_point(task))
                echo(summaries[-1].line)
        else:
            with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
                for summary in pool.map(run_point, tasks):
                    summaries.append(summary)
                    echo(summary.line)

        sweep = None
        if isinstance(config.experiment, SweepExperiment):
            sweep = SweepService.summarize(config.experiment, summaries, store)
            fit = sweep["fit"]
            if fit is not None:
                echo(
                    f"fit {fit.quantity} ~ slope/eps: slope={fit.slope:.6g} "
                    f"ci=[{fit.slope_ci[0]:.6g}, {fit.slope_ci[1]:.6g}] r2={fit.r2:.6f}"
                )
        ExperimentService.write_metadata(config, store, context, summaries, sweep)
        return summaries

    @staticmethod
    def write_metadata(
        config: ExperimentConfig,
        store: RunStore,
        context: RunContext,
        summaries: Sequence[PointSummary],
        sweep: Optional[Dict] = None,
    ) -> Path:
        """Config echo, per-point results and wall time; the only file carrying timing."""
        payload = {
            "run_id": context.run_id,
            "command": context.command,
            "config": config.model_dump(mode="json"),
            "points": list(summaries),
            "sweep": sweep,
            "wall_time": context.elapsed,
        }
        return store.write_json("metadata.json", payload)

