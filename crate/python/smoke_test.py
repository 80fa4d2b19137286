"""Smoke test for the credit_ri extension module.

Build and install first, e.g. `maturin build --release -m crates/python/Cargo.toml`
followed by `pip install` of the produced wheel.
"""

import tempfile
from pathlib import Path

import credit_ri


def main():
    population = credit_ri.Dataset.synthetic(2000, 10, good_rate=0.85, seed=3)
    assert len(population) == 2000 and population.oracle_mode

    ds = population.simulate_rejection(rate=0.05, seed=3)
    assert ds.n_rejected == 100
    reject = ds.rejected_ids()[0]
    assert ds.visible_outcome(reject) is None
    try:
        ds.outcome(reject)
    except ValueError:
        pass
    else:
        raise AssertionError("masked outcome was readable")
    assert ds.audit()["illegal_reads"] == 1

    model = credit_ri.fit_logistic(ds)
    assert model.converged
    scores = model.score(ds, ds.accepted_ids())
    outcomes = [ds.outcome(i) for i in ds.accepted_ids()]
    auc = credit_ri.roc_auc(scores, outcomes)
    ind = credit_ri.global_indicators(scores, outcomes)
    assert abs(ind["ki"] - (2 * auc - 1)) < 1e-12
    assert ind["gini"] <= ind["ki"] + 1e-9
    assert credit_ri.ScoreModel.from_text(model.to_text()).to_text() == model.to_text()

    fits = {t: credit_ri.fit_technique(ds, t, seed=1) for t in ["extrapolation", "augmentation", "parcelling", "gc2"]}
    assert len(fits["gc2"].control_sample) == 30
    assert ds.audit()["unmask_events"] == 30

    report = credit_ri.run_synthetic(2000, 10, good_rate=0.85, seed=5)
    assert report.selected in report.techniques and len(report.techniques) == 5
    assert report.illegal_reads == 0
    again = credit_ri.run_synthetic(2000, 10, good_rate=0.85, seed=5)
    assert report.report_csv() == again.report_csv()
    with tempfile.TemporaryDirectory() as out:
        written = report.write(out)
        assert (Path(out) / "selection.txt").read_text() == report.selection_text()
        assert len(written) == 8

    print(f"ok: selected {report.selected}, validation default rate {report.selection_value:.4f}")


if __name__ == "__main__":
    main()
