import math

import numpy as np
import pytest

from mlpicard.harness import (
    ExperimentError,
    ExperimentSpec,
    ReferenceMode,
    ResultRow,
    emit_csv,
    emit_plot,
    format_value,
    parse_csv,
    plot_series,
    relative_l2_error,
    render_table,
    run_experiment,
    self_reference,
)
from mlpicard.problems import Provenance, builtin_problem
import mlpicard.harness as harness_mod


def test_relative_error_examples():
    assert relative_l2_error([4.0, 4.0], [4.0]) == 0.0
    assert relative_l2_error([3.0, 4.0, 5.0], [4.0]) == pytest.approx(math.sqrt(2 / 3) / 4, rel=1e-15)
    assert relative_l2_error([[0.0, 0.0]], [3.0, 4.0]) == 1.0


def test_relative_error_rejects_zero_reference():
    with pytest.raises(ValueError):
        relative_l2_error([1.0], [0.0])


def test_reference_mode_parse():
    assert ReferenceMode.parse("paper-ds").provenance is Provenance.PAPER_DS
    mode = ReferenceMode.parse("self:6")
    assert (mode.provenance, mode.n_ref, mode.runs_ref) == (Provenance.SELF_COMPUTED, 6, 5)
    assert str(mode) == "self:6"
    with pytest.raises(ValueError):
        ReferenceMode.parse("bogus")


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec("allen_cahn", [10], [], runs=5)
    with pytest.raises(ValueError):
        ExperimentSpec("allen_cahn", [10], [0])
    with pytest.raises(ValueError):
        ExperimentSpec("allen_cahn", [10], [1], runs=0)
    with pytest.raises(ValueError):
        ExperimentSpec("allen_cahn", [10], [1, 4], reference="self:3")


def _spec(**kw):
    base = dict(example="sine_gordon", dims=[10], ns=[1, 2, 3], runs=3, seed=4)
    base.update(kw)
    return ExperimentSpec(**base)


def test_run_experiment_rows():
    rows = run_experiment(_spec(ns=[3, 1, 2]))
    assert [(r.d, r.n) for r in rows] == [(10, 1), (10, 2), (10, 3)]
    for r in rows:
        assert r.reference == (0.30623,)
        assert r.provenance == "paper_mlp"
        assert r.value == r.realizations[0]
        assert r.rel_l2_error == relative_l2_error(r.realizations, r.reference)
        assert r.gaussian_scalars > 0 and r.uniforms > 0
        assert r.runtime_seconds is not None and r.runtime_seconds >= 0


def test_terminal_time_cell_error_is_exact():
    rows = run_experiment(_spec(example="allen_cahn", t=1.0, ns=[2], reference="paper_ds"))
    g0 = builtin_problem("allen_cahn", 10).g(np.zeros((1, 10)))[0, 0]
    assert all(v == (g0,) for v in rows[0].realizations)
    assert rows[0].rel_l2_error == abs(g0 - 0.29614) / 0.29614


def test_self_reference():
    spec = _spec(ns=[1], reference=ReferenceMode(Provenance.SELF_COMPUTED, 1, 1))
    ref = self_reference(spec, 10)
    single = harness_mod._realize(harness_mod._Task("sine_gordon", 10, 1, -1, 4, None, None, None))[0][0]
    assert ref.value == single
    assert ref.provenance is Provenance.SELF_COMPUTED
    assert self_reference(spec, 10) == ref


def test_self_reference_experiment():
    rows = run_experiment(_spec(ns=[1, 2], reference="self:3"))
    assert rows[0].provenance == "self_computed"
    assert rows[0].reference == rows[1].reference


def test_missing_fixture_raises():
    with pytest.raises(KeyError):
        run_experiment(_spec(dims=[7]))


def test_failed_cell_reported(monkeypatch):
    real = harness_mod._realize

    def flaky(task):
        if task.n == 2:
            return None, "boom", 0.0
        return real(task)

    monkeypatch.setattr(harness_mod, "_realize", flaky)
    with pytest.raises(ExperimentError) as info:
        run_experiment(_spec())
    assert [r.n for r in info.value.rows] == [1, 3]


def test_workers_do_not_change_output(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(run_experiment(_spec(workers=1, record_timing=False)), a)
    emit_csv(run_experiment(_spec(workers=3, record_timing=False)), b)
    assert a.read_bytes() == b.read_bytes()


def _row(**kw):
    base = dict(d=10, n=2, value=(0.1, 0.2), reference=(0.3, 0.4), provenance="paper_mlp",
                rel_l2_error=0.123456789012345, gaussian_scalars=180, uniforms=10, runtime_seconds=0.25)
    base.update(kw)
    return ResultRow(**base)


@pytest.mark.parametrize("row", [_row(), _row(value=(1 / 3,), reference=(0.29555,), runtime_seconds=None)])
def test_csv_round_trip(tmp_path, row):
    path = tmp_path / "rows.csv"
    emit_csv([row], path)
    assert parse_csv(path) == [row]


def test_csv_header(tmp_path):
    path = tmp_path / "rows.csv"
    emit_csv([_row()], path)
    assert path.read_text().splitlines()[0] == (
        "d,n,value_1,value_2,reference_1,reference_2,provenance,rel_l2_error,gaussian_scalars,uniforms,runtime_seconds"
    )


def test_table_rendering():
    assert format_value((0.167142, 1.700851)) == "(0.16714, 1.70085)"
    assert format_value((0.295551,)) == "0.29555"
    text = render_table([_row()])
    assert "(0.10000, 0.20000)" in text and "0.123457" in text


def test_plot_outputs(tmp_path):
    rows = [_row(d=d, n=n, gaussian_scalars=g, rel_l2_error=e) for d in (10, 100)
            for n, g, e in [(1, 20 * d // 10, 0.6), (2, 180 * d // 10, 0.2), (3, 2550 * d // 10, 0.1)]]
    svg, dat = emit_plot(rows, tmp_path / "fig.svg")
    assert svg.read_text().lstrip().startswith("<?xml")
    blocks = dat.read_text().split("\n\n\n")
    assert len(blocks) == 2 and blocks[0].startswith("# d = 10")
    for pts in plot_series(rows).values():
        costs = [c for c, _ in pts]
        assert costs == sorted(costs) and len(set(costs)) == len(costs)
