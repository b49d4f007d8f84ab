"""Experiment runner: realizations, relative L2-errors, cost and timing tables."""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .estimator import mlp_estimate
from .model import MlpQuery
from .problems import (
    Provenance,
    ReferenceSolution,
    builtin_problem,
    canonical_name,
    default_query,
    load_fixtures,
    reference_value,
    with_euler_maruyama,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReferenceMode:
    provenance: Provenance
    n_ref: int = 0
    runs_ref: int = 5

    @classmethod
    def parse(cls, text: str) -> ReferenceMode:
        text = text.strip().lower().replace("-", "_")
        if text.startswith("self"):
            _, _, arg = text.partition(":")
            n_ref = int(arg) if arg else 8
            if n_ref < 1:
                raise ValueError("self reference needs n_ref >= 1")
            return cls(Provenance.SELF_COMPUTED, n_ref)
        return cls(Provenance(text))

    def __str__(self):
        if self.provenance is Provenance.SELF_COMPUTED:
            return f"self:{self.n_ref}"
        return self.provenance.value.replace("_", "-")


@dataclass
class ExperimentSpec:
    example: str
    dims: Sequence[int]
    ns: Sequence[int]
    runs: int = 5
    reference: ReferenceMode = field(default_factory=lambda: ReferenceMode(Provenance.PAPER_MLP))
    seed: int = 0
    workers: int = 1
    fixtures: Optional[str] = None
    t: Optional[float] = None
    r: Optional[float] = None
    em_steps: Optional[float] = None
    record_timing: bool = True

    def __post_init__(self):
        self.example = canonical_name(self.example)
        self.dims = tuple(int(d) for d in self.dims)
        self.ns = tuple(sorted(set(int(n) for n in self.ns)))
        self.dims = tuple(sorted(set(self.dims)))
        if isinstance(self.reference, str):
            self.reference = ReferenceMode.parse(self.reference)
        if self.runs < 1:
            raise ValueError("runs per cell must be >= 1")
        if not self.ns or min(self.ns) < 1:
            raise ValueError("n list must be nonempty with all n >= 1")
        if not self.dims or min(self.dims) < 1:
            raise ValueError("d list must be nonempty with all d >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        ref = self.reference
        if ref.provenance is Provenance.SELF_COMPUTED and ref.n_ref < max(self.ns):
            raise ValueError(f"self reference n_ref={ref.n_ref} is below the largest n={max(self.ns)}")


@dataclass
class ResultRow:
    d: int
    n: int
    value: tuple[float, ...]
    reference: tuple[float, ...]
    provenance: str
    rel_l2_error: float
    gaussian_scalars: int
    uniforms: int
    runtime_seconds: Optional[float]
    realizations: tuple[tuple[float, ...], ...] = field(default=(), compare=False, repr=False)


class ExperimentError(RuntimeError):
    """Some cells failed; ``rows`` holds the cells that completed."""

    def __init__(self, failures, rows):
        super().__init__("; ".join(failures))
        self.failures = failures
        self.rows = rows


def relative_l2_error(samples, ref) -> float:
    """``sqrt(mean ||v - ref||^2) / ||ref||`` with Euclidean norms."""
    samples = np.asarray(samples, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64).reshape(-1)
    if samples.ndim == 1:
        samples = samples.reshape(-1, ref.size) if ref.size > 1 else samples[:, None]
    if len(samples) == 0:
        raise ValueError("need at least one sample")
    denom = math.sqrt(float((ref * ref).sum()))
    if denom == 0:
        raise ValueError("reference has zero norm")
    sq = ((samples - ref) ** 2).sum(axis=1)
    return math.sqrt(float(sq.mean())) / denom


# ---------------------------------------------------------------------------
# realizations (module level so worker processes can pickle them)


@dataclass(frozen=True)
class _Task:
    example: str
    d: int
    n: int
    root: int
    seed: int
    t: Optional[float]
    r: Optional[float]
    em_steps: Optional[float]


def _problem_and_query(task: _Task):
    problem = builtin_problem(task.example, task.d)
    if task.em_steps is not None:
        problem = with_euler_maruyama(problem, task.em_steps)
    tmpl = default_query(task.example, task.d)
    t = tmpl.t if task.t is None else task.t
    r = tmpl.r if task.r is None else task.r
    return problem, MlpQuery(t, tmpl.x, task.n, task.n, r)


def _realize(task: _Task):
    problem, query = _problem_and_query(task)
    start = time.perf_counter()
    try:
        est = mlp_estimate(problem, query, task.root, task.seed)
    except (ArithmeticError, ValueError) as exc:
        return None, f"d={task.d} n={task.n} run={task.root}: {exc}", 0.0
    elapsed = time.perf_counter() - start
    return (tuple(float(v) for v in est.value), est.counters.as_dict()), None, elapsed


def _run_tasks(tasks, workers):
    if workers == 1 or len(tasks) <= 1:
        return [_realize(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_realize, tasks, chunksize=1))


def _tasks_for(spec, d, n, roots):
    return [_Task(spec.example, d, n, root, spec.seed, spec.t, spec.r, spec.em_steps) for root in roots]


def self_reference(spec: ExperimentSpec, d: int) -> ReferenceSolution:
    """Mean of ``runs_ref`` realizations at ``n = M = n_ref``.

    Reference runs use roots ``-1, -2, ...`` so they never share randomness
    with the evaluation runs, which use roots ``0, 1, ...``.
    """
    ref = spec.reference
    roots = [-(j + 1) for j in range(ref.runs_ref)]
    results = _run_tasks(_tasks_for(spec, d, ref.n_ref, roots), spec.workers)
    errors = [err for _, err, _ in results if err]
    if errors:
        raise ArithmeticError("self reference failed: " + "; ".join(errors))
    values = np.array([res[0] for res, _, _ in results])
    return ReferenceSolution(spec.example, d, Provenance.SELF_COMPUTED, tuple(float(v) for v in values.mean(axis=0)))


def run_experiment(spec: ExperimentSpec) -> list[ResultRow]:
    """Run every ``(d, n)`` cell with ``M = n``; rows ordered by ``(d, n)``.

    Raises :class:`ExperimentError` after all cells ran if any failed.
    """
    fixtures = load_fixtures(spec.fixtures) if spec.reference.provenance is not Provenance.SELF_COMPUTED else None
    rows, failures = [], []
    for d in spec.dims:
        if fixtures is not None:
            ref = reference_value(spec.example, d, spec.reference.provenance, fixtures)
        else:
            ref = self_reference(spec, d)

        tasks = [t for n in spec.ns for t in _tasks_for(spec, d, n, range(spec.runs))]
        results = _run_tasks(tasks, spec.workers)
        for i, n in enumerate(spec.ns):
            cell = results[i * spec.runs : (i + 1) * spec.runs]
            errs = [err for _, err, _ in cell if err]
            if errs:
                failures.extend(errs)
                log.error("cell d=%d n=%d failed: %s", d, n, errs[0])
                continue
            values = tuple(res[0] for res, _, _ in cell)
            counters = cell[0][0][1]
            rows.append(
                ResultRow(
                    d=d,
                    n=n,
                    value=values[0],
                    reference=ref.value,
                    provenance=ref.provenance.value,
                    rel_l2_error=relative_l2_error(values, ref.value),
                    gaussian_scalars=counters["gaussian_scalars"],
                    uniforms=counters["uniforms"],
                    runtime_seconds=cell[0][2] if spec.record_timing else None,
                    realizations=values,
                )
            )
        _warn_on_timing(rows, d)
    if failures:
        raise ExperimentError(failures, rows)
    return rows


def _warn_on_timing(rows, d):
    times = [(r.n, r.runtime_seconds) for r in rows if r.d == d and r.n >= 4 and r.runtime_seconds is not None]
    for (n0, t0), (n1, t1) in zip(times, times[1:]):
        if t1 <= t0:
            log.warning("runtime did not grow from n=%d (%.4fs) to n=%d (%.4fs) at d=%d", n0, t0, n1, t1, d)


# ---------------------------------------------------------------------------
# output


def _columns(name, k):
    return [name] if k == 1 else [f"{name}_{i + 1}" for i in range(k)]


def csv_header(k: int) -> list[str]:
    return (
        ["d", "n"]
        + _columns("value", k)
        + _columns("reference", k)
        + ["provenance", "rel_l2_error", "gaussian_scalars", "uniforms", "runtime_seconds"]
    )


def emit_csv(rows: Sequence[ResultRow], path) -> None:
    if not rows:
        raise ValueError("no rows to write")
    k = len(rows[0].value)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(k))
        for r in rows:
            w.writerow(
                [r.d, r.n, *map(repr, r.value), *map(repr, r.reference), r.provenance, repr(r.rel_l2_error),
                 r.gaussian_scalars, r.uniforms, "" if r.runtime_seconds is None else repr(r.runtime_seconds)]
            )


def parse_csv(path) -> list[ResultRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        k = sum(1 for h in header if h.startswith("value"))
        rows = []
        for rec in reader:
            rt = rec[6 + 2 * k]
            rows.append(
                ResultRow(
                    d=int(rec[0]),
                    n=int(rec[1]),
                    value=tuple(float(v) for v in rec[2 : 2 + k]),
                    reference=tuple(float(v) for v in rec[2 + k : 2 + 2 * k]),
                    provenance=rec[2 + 2 * k],
                    rel_l2_error=float(rec[3 + 2 * k]),
                    gaussian_scalars=int(rec[4 + 2 * k]),
                    uniforms=int(rec[5 + 2 * k]),
                    runtime_seconds=float(rt) if rt else None,
                )
            )
    return rows


def format_value(v: Sequence[float]) -> str:
    if len(v) == 1:
        return f"{v[0]:.5f}"
    return "(" + ", ".join(f"{x:.5f}" for x in v) + ")"


def render_table(rows: Sequence[ResultRow]) -> str:
    """Fixed-width text table in the layout of the published tables."""
    head = ["d", "n", "Result", "Reference", "Rel. L2-error", "Gaussian draws", "Uniform draws", "Runtime [s]"]
    body = [
        [
            str(r.d),
            str(r.n),
            format_value(r.value),
            format_value(r.reference),
            f"{r.rel_l2_error:.6f}",
            str(r.gaussian_scalars),
            str(r.uniforms),
            "-" if r.runtime_seconds is None else f"{r.runtime_seconds:.5f}",
        ]
        for r in rows
    ]
    widths = [max(len(c) for c in col) for col in zip(head, *body)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(line, widths)) for line in [head] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def plot_series(rows: Sequence[ResultRow]) -> dict[int, list[tuple[int, float]]]:
    series: dict[int, list[tuple[int, float]]] = {}
    for r in sorted(rows, key=lambda r: (r.d, r.n)):
        series.setdefault(r.d, []).append((r.gaussian_scalars, r.rel_l2_error))
    return series


def emit_plot(rows: Sequence[ResultRow], path, title: str = "") -> tuple[Path, Path]:
    """Write a log-log SVG of error against cost and its data file (``.dat``).

    The data file holds one blank-line separated block per ``d`` with columns
    ``gaussian_scalars rel_l2_error``.
    """
    if not rows:
        raise ValueError("no rows to plot")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    svg = path if path.suffix == ".svg" else path.with_suffix(".svg")
    dat = svg.with_suffix(".dat")
    series = plot_series(rows)

    with open(dat, "w") as fh:
        blocks = []
        for d, pts in series.items():
            blocks.append(f"# d = {d}\n# gaussian_scalars rel_l2_error\n" + "".join(f"{c} {e!r}\n" for c, e in pts))
        fh.write("\n\n".join(blocks))

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for d, pts in series.items():
        cost, err = zip(*pts)
        ax.loglog(cost, err, marker="o", label=f"d = {d}")
    ax.set_xlabel("evaluations of one-dimensional Gaussian variables")
    ax.set_ylabel("relative $L^2$-error")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(svg, format="svg", metadata={"Date": None})
    plt.close(fig)
    return svg, dat
