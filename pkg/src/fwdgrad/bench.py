"""Benchmark grid: trials, fixed-target metrics and performance profiles."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .autodiff import ADDomainError
from .estimators import GradientOracle
from .optimizers import KINDS as OPTIMIZER_KINDS
from .optimizers import OptimizerConfig, OptimizerState, step
from .problems import Problem, ProblemSet, sample_start
from .rng import SeededRng, stream_index
from .tangents import haar_orthogonal

DEFAULT_BUDGET = 10_000
DEFAULT_EPSILON = 0.1
TRACE_DENSE = 100
TRACE_RATIO = 1.1

CSV_FIELDS = (
    "problem", "name", "dimension", "optimizer", "oracle",
    "seed", "start_index", "converged", "t_evals", "final_f",
)


@dataclass(frozen=True)
class Solver:
    optimizer: OptimizerConfig
    oracle: GradientOracle

    @property
    def label(self) -> str:
        return f"{self.optimizer.label}/{self.oracle.label}"


def default_solvers(lr: float = 0.01, forward_law: str = "rademacher", **opt_kwargs) -> list[Solver]:
    """Every optimizer with true gradients and with forward gradients."""
    return [
        Solver(OptimizerConfig(kind, lr=lr, **opt_kwargs), oracle)
        for kind in OPTIMIZER_KINDS
        for oracle in (GradientOracle.true(), GradientOracle.forward(forward_law))
    ]


@dataclass(frozen=True, eq=False)
class TrialSpec:
    problem: Problem
    optimizer: OptimizerConfig
    oracle: GradientOracle
    seed: int
    start: np.ndarray
    budget: int = DEFAULT_BUDGET
    target_epsilon: float = DEFAULT_EPSILON
    start_index: int = 0
    stop_at_target: bool = True

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if not self.target_epsilon > 0:
            raise ValueError("target_epsilon must be positive")
        if not math.isfinite(self.problem.f_star):
            raise ValueError(f"{self.problem.name} has no finite minimum; it cannot be benchmarked")
        start = np.asarray(self.start, dtype=float)
        if start.shape != (self.problem.dimension,):
            raise ValueError("start point has the wrong dimension")
        object.__setattr__(self, "start", start)

    @property
    def solver_label(self) -> str:
        return f"{self.optimizer.label}/{self.oracle.label}"

    @property
    def fingerprint(self) -> str:
        return (
            f"{self.problem.name}|{self.solver_label}|lr={self.optimizer.lr!r}|seed={self.seed}"
            f"|start={self.start_index}"
        )


@dataclass
class TrialRecord:
    fingerprint: str
    problem: str
    name: str
    dimension: int
    optimizer: str
    oracle: str
    seed: int
    start_index: int
    trace: list[tuple[int, float]]
    converged: bool
    t_evals: Optional[int]
    final_f: float
    evals: int
    steps: int
    diverged: bool = False

    @property
    def solver(self) -> str:
        return f"{self.optimizer}/{self.oracle}"

    def row(self) -> dict:
        return {
            "problem": self.problem,
            "name": self.name,
            "dimension": self.dimension,
            "optimizer": self.optimizer,
            "oracle": self.oracle,
            "seed": self.seed,
            "start_index": self.start_index,
            "converged": int(self.converged),
            "t_evals": "" if self.t_evals is None else self.t_evals,
            "final_f": repr(float(self.final_f)),
        }


def _tangent_rng(spec: TrialSpec) -> SeededRng:
    return SeededRng(spec.seed, stream_index("tangents", spec.fingerprint))


def trial_oracle(oracle: GradientOracle, n: int, rng: SeededRng) -> GradientOracle:
    """Pin a rotated law without a rotation to one Haar matrix for the trial."""
    s = oracle.sampler
    if s is not None and s.kind == "rotated" and s.rotation is None:
        return GradientOracle.forward("rotated", haar_orthogonal(n, rng))
    return oracle


def run_trial(spec: TrialSpec) -> TrialRecord:
    """Optimize until the budget is spent or f <= f_star + epsilon.

    Every oracle call is one charged evaluation of f at the current iterate.
    ``t_evals`` is the evaluation count at the first crossing of the target.
    A non-finite objective or gradient ends the trial as diverged.
    """
    f = spec.problem.program
    target = spec.problem.f_star + spec.target_epsilon
    rng = _tangent_rng(spec)
    oracle = trial_oracle(spec.oracle, f.dimension, rng)
    state = OptimizerState.initial(spec.start)
    evals = steps = 0
    best = math.inf
    trace: list[tuple[int, float]] = []
    next_mark = TRACE_DENSE + 1
    t_evals = None
    value = math.inf
    diverged = False
    with np.errstate(over="ignore", invalid="ignore", divide="ignore", under="ignore"):
        for _ in range(spec.budget):
            try:
                sample = oracle.estimate(f, state.theta, rng)
            except (ADDomainError, FloatingPointError):
                diverged = True
                break
            steps += 1
            evals += sample.evals_charged
            value = sample.value
            if not math.isfinite(value):
                diverged = True
                break
            if value < best:
                best = value
            if evals <= TRACE_DENSE or evals >= next_mark:
                trace.append((evals, best))
                if evals >= next_mark:
                    next_mark = max(next_mark + 1, math.ceil(next_mark * TRACE_RATIO))
            if t_evals is None and value <= target:
                t_evals = evals
                if spec.stop_at_target:
                    break
            try:
                state = step(state, spec.optimizer, sample.estimate)
            except FloatingPointError:
                diverged = True
                break
    if trace and trace[-1][0] != evals and not diverged:
        trace.append((evals, best))
    if diverged:
        t_evals = None
        value = math.inf
    p = spec.problem
    return TrialRecord(
        fingerprint=spec.fingerprint,
        problem=p.family,
        name=p.name,
        dimension=p.dimension,
        optimizer=spec.optimizer.label,
        oracle=spec.oracle.label,
        seed=spec.seed,
        start_index=spec.start_index,
        trace=trace,
        converged=t_evals is not None,
        t_evals=t_evals,
        final_f=value,
        evals=evals,
        steps=steps,
        diverged=diverged,
    )


def run_path(problem: Problem, optimizer: OptimizerConfig, oracle: GradientOracle, start, steps: int, rng: SeededRng):
    """Iterates and objective values for a fixed number of steps (no target).

    Works for unbounded objectives too. Returns ``(values, thetas)`` with
    ``steps + 1`` rows each; row k is the iterate after k updates.
    """
    oracle = trial_oracle(oracle, problem.dimension, rng)
    state = OptimizerState.initial(start)
    thetas = [state.theta]
    values = [problem(state.theta)]
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(steps):
            sample = oracle.estimate(problem.program, state.theta, rng)
            state = step(state, optimizer, sample.estimate)
            thetas.append(state.theta)
            values.append(problem(state.theta))
    return np.array(values), np.array(thetas)


# ---------------------------------------------------------------------------
# performance ratios and profiles
# ---------------------------------------------------------------------------


def median_with_inf(values: Sequence[float]) -> float:
    """Median where non-converged runs are +inf; a majority of inf gives inf."""
    if len(values) == 0:
        return math.inf
    return float(np.median(np.asarray(values, dtype=float)))


def performance_ratio(t) -> np.ndarray:
    """r[p, s] = t[p, s] / min_s t[p, s]; inf for failures and all-failed rows."""
    t = np.asarray(t, dtype=float)
    if t.ndim != 2:
        raise ValueError("t must be a (problems, solvers) matrix")
    t = np.where(np.isnan(t), np.inf, t)
    best = t.min(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = t / best
    return np.where(np.isfinite(t) & np.isfinite(best), r, np.inf)


def default_tau_grid() -> np.ndarray:
    # 10**(k/20): exact at 1, 10, 100, 1000
    return 10.0 ** (np.arange(61) / 20.0)


@dataclass
class PerformanceProfile:
    solvers: list[str]
    tau: np.ndarray
    rho: np.ndarray  # (solvers, tau)
    solve_fraction: np.ndarray
    dimension: Optional[int] = None
    ratios: Optional[np.ndarray] = field(default=None, repr=False)
    problems: list[str] = field(default_factory=list)

    def rho_at(self, solver: str, tau: float) -> float:
        """Exact rho_s(tau) from the ratio matrix (any tau, not only grid points)."""
        if self.ratios is None:
            raise ValueError("profile was loaded without its ratio matrix")
        col = self.ratios[:, self.solvers.index(solver)]
        return float(np.mean(col <= tau))

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "tau": [float(x) for x in self.tau],
            "solvers": [
                {
                    "label": label,
                    "rho": [float(x) for x in self.rho[i]],
                    "solve_fraction": float(self.solve_fraction[i]),
                }
                for i, label in enumerate(self.solvers)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "PerformanceProfile":
        d = json.loads(text)
        return cls(
            solvers=[s["label"] for s in d["solvers"]],
            tau=np.array(d["tau"], dtype=float),
            rho=np.array([s["rho"] for s in d["solvers"]], dtype=float).reshape(len(d["solvers"]), -1),
            solve_fraction=np.array([s["solve_fraction"] for s in d["solvers"]], dtype=float),
            dimension=d["dimension"],
        )


def performance_profile(ratios, solvers: Sequence[str], tau_grid=None, dimension=None) -> PerformanceProfile:
    """rho_s(tau) = fraction of problems with r[p, s] <= tau."""
    r = np.asarray(ratios, dtype=float)
    if r.ndim != 2 or r.shape[0] == 0:
        raise ValueError("need a non-empty (problems, solvers) ratio matrix")
    if r.shape[1] != len(solvers):
        raise ValueError("one label per solver column is required")
    tau = default_tau_grid() if tau_grid is None else np.asarray(tau_grid, dtype=float)
    rho = (r.T[:, :, None] <= tau[None, None, :]).mean(axis=1)
    solved = np.isfinite(r).mean(axis=0)
    return PerformanceProfile(list(solvers), tau, rho, solved, dimension, r)


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------


def start_points(problem: Problem, seed: int, count: int) -> list[np.ndarray]:
    """Start points shared by every solver, so solvers race from the same places."""
    return [
        sample_start(problem, SeededRng(seed, stream_index("start", problem.name, k)))
        for k in range(count)
    ]


def build_trials(
    problems: ProblemSet | Sequence[Problem],
    solvers: Sequence[Solver],
    seeds: Sequence[int],
    starts_per_problem: int = 5,
    budget: int = DEFAULT_BUDGET,
    epsilon: float = DEFAULT_EPSILON,
    stop_at_target: bool = True,
) -> list[TrialSpec]:
    if not solvers:
        raise ValueError("at least one solver is required")
    if not seeds:
        raise ValueError("at least one seed is required")
    if starts_per_problem < 1:
        raise ValueError("starts_per_problem must be >= 1")
    specs = []
    for problem in problems:
        for seed in seeds:
            for k, x0 in enumerate(start_points(problem, seed, starts_per_problem)):
                for s in solvers:
                    specs.append(
                        TrialSpec(problem, s.optimizer, s.oracle, seed, x0, budget, epsilon, k, stop_at_target)
                    )
    return specs


def run_trials(specs: Sequence[TrialSpec], jobs: int = 1) -> list[TrialRecord]:
    """Run independent trials, merged by a stable sort on fingerprint.

    The result does not depend on ``jobs`` or on completion order.
    """
    if jobs <= 1:
        records = [run_trial(s) for s in specs]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(run_trial, specs, chunksize=max(1, len(specs) // (4 * jobs))))
    return sorted(records, key=lambda r: r.fingerprint)


def t_matrix(rows: Sequence, solvers: Sequence[str]) -> tuple[list[str], np.ndarray]:
    """Aggregate per-(problem, solver) evaluations-to-target over seeds and starts.

    ``rows`` are :class:`TrialRecord` or CSV row dicts. Returns the problem
    names (first-seen order) and the median-with-inf matrix.
    """
    cells: dict[tuple[str, str], list[float]] = {}
    names: list[str] = []
    for r in rows:
        name, solver, t = _row_fields(r)
        if name not in names:
            names.append(name)
        cells.setdefault((name, solver), []).append(t)
    T = np.full((len(names), len(solvers)), np.inf)
    for i, name in enumerate(names):
        for j, s in enumerate(solvers):
            T[i, j] = median_with_inf(cells.get((name, s), []))
    return names, T


def _row_fields(r):
    if isinstance(r, TrialRecord):
        t = math.inf if r.t_evals is None else float(r.t_evals)
        return r.name, r.solver, t
    t = math.inf if r["t_evals"] in ("", None) else float(r["t_evals"])
    return r["name"], f"{r['optimizer']}/{r['oracle']}", t


def _dimension_of(r) -> int:
    return r.dimension if isinstance(r, TrialRecord) else int(r["dimension"])


def profiles_by_dimension(
    rows: Sequence, solvers: Sequence[str], tau_grid=None, drop_unsolved: bool = True
) -> dict[int, PerformanceProfile]:
    """One profile per problem dimension.

    With ``drop_unsolved`` the problems no solver brought to target are left
    out, since their all-inf ratio rows carry no comparison. A dimension where
    nothing was solved keeps every row.
    """
    out = {}
    for dim in sorted({_dimension_of(r) for r in rows}):
        names, T = t_matrix([r for r in rows if _dimension_of(r) == dim], solvers)
        keep = np.isfinite(T).any(axis=1) if drop_unsolved else np.ones(len(names), dtype=bool)
        if not keep.any():
            keep[:] = True
        prof = performance_profile(performance_ratio(T[keep]), solvers, tau_grid, dim)
        prof.problems = [n for n, k in zip(names, keep) if k]
        out[dim] = prof
    return out


@dataclass
class GridResult:
    records: list[TrialRecord]
    profiles: dict[int, PerformanceProfile]
    solvers: list[str]


def run_grid(
    problems: ProblemSet | Sequence[Problem],
    solvers: Sequence[Solver],
    seeds: Sequence[int] = (42,),
    starts_per_problem: int = 5,
    budget: int = DEFAULT_BUDGET,
    epsilon: float = DEFAULT_EPSILON,
    jobs: int = 1,
) -> GridResult:
    """Full (problem x seed x start x solver) grid with one profile per dimension."""
    specs = build_trials(problems, solvers, seeds, starts_per_problem, budget, epsilon)
    records = run_trials(specs, jobs)
    labels = [s.label for s in solvers]
    return GridResult(records, profiles_by_dimension(records, labels), labels)


# ---------------------------------------------------------------------------
# files
# ---------------------------------------------------------------------------


def records_to_csv(records: Sequence[TrialRecord]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def records_from_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    if rows and tuple(rows[0].keys()) != CSV_FIELDS:
        raise ValueError(f"unexpected CSV columns {tuple(rows[0].keys())}")
    return rows


def trace_to_csv(record: TrialRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("evals", "best_f"))
    for e, b in record.trace:
        w.writerow((e, repr(float(b))))
    return buf.getvalue()


def trace_from_csv(text: str) -> list[tuple[int, float]]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["evals", "best_f"]:
        raise ValueError("not a trace CSV")
    return [(int(e), float(b)) for e, b in rows[1:]]
