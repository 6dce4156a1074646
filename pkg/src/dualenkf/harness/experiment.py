"""Twin experiments, gamma sweeps, convergence studies and the identity suite."""

import logging
import warnings
from typing import NamedTuple

import numpy as np

from ..dual import (
    backward_dual,
    build_transitions,
    dual_cost,
    optimal_controls,
    propagate_dual,
    second_moment_identity,
    verify_batch_recursive,
)
from ..ensemble import VariantSpec, run_filter
from ..exceptions import FlooredError, IndefiniteGamma, NumericalError, ValidationError
from ..kalman import run_kf
from ..model import NoiseStreams, simulate_truth
from ..solvers import (
    GammaPair,
    gamma_rhs,
    rhs_consistency,
    solve_denkf,
    solve_ensrf_serial,
    solve_sqrt_general,
    solve_stochastic,
)
from .records import RunRecord

log = logging.getLogger(__name__)


class RunFailure(NamedTuple):
    run_id: str
    step: object
    error: str
    kind: str


class ExperimentResult(NamedTuple):
    records: list
    failures: list

    @property
    def ok(self):
        return not self.failures


def _run_id(variant, N, replicate):
    return f"{variant.tag}|N={N}|r={replicate}"


def _records_for(run_id, variant, N, seed, beliefs, truth, result):
    out = []
    for t, belief in enumerate(beliefs):
        cov_norm = np.linalg.norm(belief.cov)
        cov_diff = np.linalg.norm(result.covs[t] - belief.cov)
        out.append(
            RunRecord(
                run_id=run_id,
                t=t,
                variant=variant.tag,
                gamma1=variant.gammas.gamma1,
                gamma2=variant.gammas.gamma2,
                N=N,
                seed=seed,
                mean_err=float(np.linalg.norm(result.means[t] - belief.mean)),
                cov_err=float(cov_diff / cov_norm if cov_norm > 0 else cov_diff),
                ct_residual=float(result.ct_residuals[t - 1]) if t else 0.0,
                rhs_residual=float(result.rhs_residuals[t - 1]) if t else 0.0,
                rmse_truth=float(np.linalg.norm(result.means[t] - truth.states[t])),
            )
        )
    return out


def run_experiment(scenario, variants=None, ensemble_sizes=None):
    """Run every (variant, N, replicate) combination of a scenario.

    Truth, observations and noise copies for replicate ``r`` are keyed by
    ``(seed, r)`` and shared by all variants and ensemble sizes. A numerical
    failure aborts only the affected run and is reported in ``failures``.
    """
    variants = scenario.variants if variants is None else variants
    sizes = scenario.ensemble_sizes if ensemble_sizes is None else ensemble_sizes
    model = scenario.model
    twins = {}
    records, failures = [], []
    for variant in variants:
        for N in sizes:
            for r in range(scenario.replicates):
                run_id = _run_id(variant, N, r)
                streams = NoiseStreams(scenario.seed, r)
                try:
                    if r not in twins:
                        truth = simulate_truth(model, scenario.horizon, streams)
                        beliefs, schedule = run_kf(model, truth.observations)
                        twins[r] = (truth, beliefs, schedule)
                    truth, beliefs, schedule = twins[r]
                    result = run_filter(
                        model, truth.observations, variant, N, streams,
                        init=scenario.init, schedule=schedule, keep_ensembles=False,
                    )
                except NumericalError as exc:
                    log.warning("run %s failed: %s", run_id, exc)
                    failures.append(RunFailure(run_id, exc.step, str(exc), type(exc).__name__))
                    continue
                records.extend(_records_for(run_id, variant, N, scenario.seed, beliefs, truth, result))
    return ExperimentResult(records, failures)


class SweepResult(NamedTuple):
    records: list
    failures: list
    infeasible: list  # GammaPairs where no C_t exists


def sweep_gamma(scenario, grid=None):
    """Run a gamma grid with the general square-root solver.

    Grid points where the right-hand side is indefinite are recorded in
    ``infeasible`` rather than aborting the sweep.
    """
    base = scenario.variants[0]
    if base.solver != "sqrt_general":
        raise ValidationError("variant.solver", "gamma sweeps need sqrt_general")
    if grid is None:
        grid = [v.gammas for v in scenario.variants]
    variants = [VariantSpec("sqrt_general", gammas=g, gain_source=base.gain_source) for g in grid]
    res = run_experiment(scenario, variants=variants)
    bad = []
    for v in variants:
        tag = v.tag
        if any(f.run_id.startswith(tag + "|") and f.kind == IndefiniteGamma.__name__ for f in res.failures):
            bad.append(v.gammas)
    return SweepResult(res.records, res.failures, bad)


class ConvergenceResult(NamedTuple):
    records: list
    sizes: np.ndarray
    rms_error: np.ndarray
    slope: float
    intercept: float


FLOOR = 1e-12


def convergence_study(scenario, N_list, replicates=None):
    """Fit log(rms final mean error) against log(N) by least squares."""
    N_list = [int(N) for N in N_list]
    if len(N_list) < 3 or any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValidationError("ensemble_size", "need at least 3 strictly increasing sizes")
    if replicates is not None:
        scenario = scenario.with_overrides(replicates=replicates)
    if scenario.replicates == 1:
        warnings.warn("one replicate: the RMS error is a single draw", RuntimeWarning, stacklevel=2)
    res = run_experiment(scenario, variants=scenario.variants[:1], ensemble_sizes=N_list)
    if res.failures:
        f = res.failures[0]
        raise NumericalError(f"{f.run_id}: {f.error}")
    T = scenario.horizon
    final = {}
    for rec in res.records:
        if rec.t == T:
            final.setdefault(rec.N, []).append(rec.mean_err)
    rms = np.array([np.sqrt(np.mean(np.square(final[N]))) for N in N_list])
    if np.all(rms <= FLOOR):
        raise FlooredError(f"final mean errors at floor (max {rms.max():.2e}); nothing to fit")
    slope, intercept = np.polyfit(np.log(N_list), np.log(np.maximum(rms, FLOOR)), 1)
    return ConvergenceResult(res.records, np.array(N_list), rms, float(slope), float(intercept))


class Check(NamedTuple):
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"[{status}] {self.name}: {self.value:.3e} <= {self.tolerance:.1e}{extra}"


class VerifyReport(NamedTuple):
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def lines(self):
        return [c.line() for c in self.checks]


GAMMA_GRID = [GammaPair(g1, g2) for g1 in np.linspace(0, 1, 5) for g2 in np.linspace(0, 1, 5)]


def _guard(name, tol, fn):
    try:
        value, detail = fn()
    except NumericalError as exc:
        return Check(name, float("inf"), tol, False, f"{type(exc).__name__}: {exc}")
    return Check(name, value, tol, bool(value <= tol), detail)


def verify_suite(scenario, max_horizon=20, seed=None):
    """Numerically certify the duality identities on a scenario's model.

    Returns a :class:`VerifyReport`; numerical breakdowns become failed checks.
    """
    model = scenario.model
    T = min(scenario.horizon, max_horizon)
    seed = scenario.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    n = model.n
    basis = np.eye(n)
    checks = []
    state = {}

    def schedule():
        if "schedule" not in state:
            truth = simulate_truth(model, T, NoiseStreams(seed, 0))
            state["schedule"] = run_kf(model, truth.observations)[1]
        return state["schedule"]

    def lq_value():
        sch = schedule()
        worst = 0.0
        for a in basis:
            y, u, _ = backward_dual(model, sch, a, T)
            target = float(a @ sch.covs[T] @ a)
            worst = max(worst, abs(dual_cost(model, y, u) - target) / max(target, 1e-300))
        return worst, f"n={n}, T={T}"

    def lq_perturb():
        sch = schedule()
        a = basis[0]
        y, u, _ = backward_dual(model, sch, a, T)
        best = dual_cost(model, y, u)
        gaps = []
        for _ in range(10):
            pert = u + 0.1 * rng.standard_normal(u.shape)
            gaps.append(dual_cost(model, propagate_dual(model, a, pert), pert) - best)
        failures = sum(g <= 0 for g in gaps)
        return float(failures), f"smallest increase {min(gaps):.3e}"

    def second_moment():
        sch = schedule()
        worst = 0.0
        for g in (GammaPair(1, 1), GammaPair(0, 0), GammaPair(0.5, 0.5), GammaPair(1, 0)):
            Cs = [solve_sqrt_general(sch.covs[t], gamma_rhs(sch.covs[t], sch.gains[t], model, g, t)).C for t in range(T)]
            tr = build_transitions(model, sch, Cs, T)
            for a in basis:
                ctrl = optimal_controls(a, model, sch, tr, g)
                target = float(a @ sch.covs[T] @ a)
                worst = max(worst, second_moment_identity(ctrl, model, sch) / max(target, 1e-300))
        return worst, "relative to a^T Sigma_T a"

    def rhs_grid():
        sch = schedule()
        worst = 0.0
        for t in range(T):
            ref = np.linalg.norm(sch.covs[t + 1])
            for g in GAMMA_GRID:
                worst = max(worst, rhs_consistency(sch.covs[t], sch.gains[t], model, g, t) / max(ref, 1e-300))
        return worst, "5x5 gamma grid"

    def solver_residuals():
        sch = schedule()
        worst = 0.0
        for t in range(T):
            S, K = sch.covs[t], sch.gains[t]
            g11 = np.linalg.norm(gamma_rhs(S, K, model, GammaPair(1, 1), t))
            g10 = np.linalg.norm(gamma_rhs(S, K, model, GammaPair(1, 0), t))
            worst = max(worst, solve_stochastic(S, K, model, t).residual / max(g11, 1e-300))
            A, H, _, _ = model.at(t)
            G = A @ K @ H
            dropped = np.linalg.norm(0.25 * G @ S @ G.T)
            worst = max(worst, abs(solve_denkf(S, K, model, t).residual - dropped) / max(g10, 1e-300))
            R = model.at(t).R
            if model.m == 1 or not np.any(R - np.diag(np.diag(R))):
                worst = max(worst, solve_ensrf_serial(S, K, model, t).residual / max(g10, 1e-300))
        return worst, "stochastic / denkf / ensrf"

    checks.append(_guard("lq_value_identity", 1e-10, lq_value))
    checks.append(_guard("lq_perturbations_not_increasing", 0.0, lq_perturb))
    checks.append(_guard("second_moment_matching", 1e-10, second_moment))
    checks.append(_guard("rhs_decomposition", 1e-12, rhs_grid))
    checks.append(_guard("solver_residuals", 1e-12, solver_residuals))

    solvers = ["stochastic", "denkf", "sqrt_general", "eakf_svd"]
    R0 = model.at(0).R
    if model.m == 1 or not np.any(R0 - np.diag(np.diag(R0))):
        solvers.insert(2, "ensrf_scalar")
    for solver in solvers:
        grid = [None] if solver in ("stochastic", "denkf", "ensrf_scalar") else [GammaPair(0, 0), GammaPair(0.5, 0.5)]
        for g in grid:
            spec = VariantSpec(solver, gammas=g)

            def equivalence(spec=spec):
                run = verify_batch_recursive(model, spec, T, seed)
                return run.deviation / run.scale, f"scale {run.scale:.2e}"

            checks.append(_guard(f"batch_recursive[{spec.tag}]", 1e-10, equivalence))
    return VerifyReport(checks)
