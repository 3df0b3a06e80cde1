"""Smoke tests for the Python bindings."""

import json

import pytest

madst_py = pytest.importorskip("madst_py")


def test_tokenize():
    assert madst_py.tokenize("Leave at 17:45.") == ["leave", "at", "17:45", "."]
    assert madst_py.tokenize("") == []


def test_normalize_value():
    assert madst_py.normalize_value("  Centre  of Town ") == "centre of town"
    assert madst_py.normalize_value("Center", {"center": "centre"}) == "centre"


def _results():
    return [
        {
            "dialog_id": "d0",
            "turn": 0,
            "slots": {
                "hotel-area": ("north", "north"),
                "restaurant-food": ("thai", "thai"),
            },
        },
        {
            "dialog_id": "d0",
            "turn": 1,
            "slots": {
                "hotel-area": ("north", "south"),
                "restaurant-food": ("none", "none"),
            },
        },
    ]


def test_metrics():
    results = _results()
    assert madst_py.joint_goal(results) == pytest.approx(0.5)
    assert madst_py.avg_slot(results) == pytest.approx(0.75)
    report = madst_py.evaluate(results)
    assert report["joint_goal"] == pytest.approx(0.5)
    assert report["per_slot_acc"]["hotel-area"] == pytest.approx(0.5)
    assert set(report["domain_f1"]) == {"hotel", "restaurant"}


def _write_corpus(path):
    dialogs = []
    for i, area in enumerate(["north", "south", "centre", "north"]):
        dialogs.append(
            {
                "dialogue_id": f"d{i}",
                "domains": ["hotel"],
                "turns": [
                    {
                        "user": f"i want a hotel in the {area}",
                        "state": {"hotel-area": area},
                    }
                ],
            }
        )
    path.write_text(json.dumps(dialogs))


def _write_catalog(path):
    path.write_text(json.dumps({"version": 1, "slots": ["hotel-area", "hotel-name"]}))


def test_train_predict_evaluate(tmp_path):
    corpus = tmp_path / "corpus.json"
    catalog = tmp_path / "catalog.json"
    ckpt = tmp_path / "model.ckpt.json"
    _write_corpus(corpus)
    _write_catalog(catalog)

    summary = madst_py.train(
        data=str(corpus),
        slot_catalog=str(catalog),
        out=str(ckpt),
        epochs=30,
        lr=0.01,
        seed=3,
        hidden=12,
        ctx_dim=4,
        static_dim=10,
        dropout=0.0,
    )
    assert ckpt.exists()
    assert len(summary["epoch_losses"]) == 30
    assert summary["epoch_losses"][-1] < summary["epoch_losses"][0]

    results = madst_py.predict(str(ckpt), str(corpus))
    assert len(results) == 4
    assert all(set(r["slots"]) == {"hotel-area", "hotel-name"} for r in results)

    report = madst_py.evaluate_checkpoint(str(ckpt), str(corpus))
    assert 0.0 <= report["joint_goal"] <= 1.0
    assert report["avg_slot"] >= report["joint_goal"]
