import json

import numpy as np
import pytest

import distress


def test_published_confusion_metrics():
    m = distress.metrics(tp=67, fn=0, fp=420, tn=7215)
    assert m["positive"]["precision"] == pytest.approx(67 / 487)
    assert m["positive"]["recall"] == 1.0


def test_confusion_and_curves():
    y = [0, 0, 1, 1]
    cm = distress.confusion(y, [0, 1, 1, 1])
    assert (cm["tp"], cm["fn"], cm["fp"], cm["tn"]) == (2, 0, 1, 1)
    assert distress.roc_curve(y, [0.1, 0.4, 0.35, 0.8])["auc"] == pytest.approx(0.75)
    assert distress.pr_curve(y, [0.1, 0.2, 0.3, 0.4])["auc"] == pytest.approx(1.0)


def test_class_weights_and_splits():
    labels = [1] * 10 + [0] * 90
    neg, pos = distress.class_weights(labels)
    assert pos == pytest.approx(5.0)
    assert 10 * pos + 90 * neg == pytest.approx(100.0)
    train, test = distress.stratified_split(labels, 0.8, 3)
    assert sorted(train + test) == list(range(100))
    assert sum(labels[i] for i in train) == 8
    folds = distress.stratified_kfold(labels, 5, 3)
    assert [sum(labels[i] for i in f) for f in folds] == [2] * 5


def test_grid_sizes():
    sizes = {f: distress.grid_size(f) for f in ("logistic", "svm", "forest", "gbt")}
    assert sizes == {"logistic": 10, "svm": 20, "forest": 36, "gbt": 36}
    with pytest.raises(distress.InvalidInput):
        distress.grid_size("neural")


def test_generate_fit_and_round_trip():
    out = distress.generate(n_municipalities=300, seed=7, target_prevalence=0.05)
    X = out.features
    assert X.values.shape == (1500, len(X.column_names))
    assert len(X.labels) == len(X) == len(out.log_odds)
    assert isinstance(json.loads(out.ground_truth_json())["planted_coefficients"], dict)

    p = distress.fit_pipeline(X, "logistic", {"penalty": "l2", "C": 5}, seed=1)
    scores = p.scores(X)
    assert np.all((scores >= 0) & (scores <= 1))
    again = distress.Pipeline.from_json(p.to_json())
    assert np.array_equal(again.scores(X), scores)


def test_cli_entry_point(tmp_path):
    code, _, err = distress.run_cli(["synth", "--out", str(tmp_path), "--municipalities", "50", "--seed", "1"])
    assert code == 0, err
    assert (tmp_path / "panel.csv").exists()
    code, _, err = distress.run_cli(["frobnicate"])
    assert code == 1
