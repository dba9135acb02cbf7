import json

import pytest

from flowscape.metrics import ConfusionCounts, format_percent, format_table, score, score_run

# published evaluation columns: (tp, tn, fp, fn) -> expected percentages
TABLE = {
    (31, 31, 7, 0): {
        "recall": 100.0, "precision": 81.58, "f_measure": 89.86, "accuracy": 89.86,
        "tnr": 81.58, "fpr": 18.42, "fnr": 0.0,
    },
    (33, 33, 4, 0): {
        "recall": 100.0, "precision": 89.19, "f_measure": 94.29, "accuracy": 94.29,
        "tnr": 89.19, "fpr": 10.81, "fnr": 0.0,
    },
    (30, 38, 2, 0): {
        "recall": 100.0, "precision": 93.75, "f_measure": 96.77, "accuracy": 97.14,
        "tnr": 95.0, "fpr": 5.0, "fnr": 0.0,
    },
}


@pytest.mark.parametrize("counts,expected", TABLE.items())
def test_published_columns_reproduced(counts, expected):
    metrics = score(ConfusionCounts(*counts))
    for name, want in expected.items():
        assert metrics[name] is not None
        assert abs(metrics[name] * 100 - want) < 0.01


def test_degenerate_all_zero():
    metrics = score(ConfusionCounts(0, 0, 0, 0))
    assert all(v is None for v in metrics.values())
    assert format_percent(None) == "undefined"


def test_partial_undefined():
    metrics = score(ConfusionCounts(tp=0, tn=5, fp=0, fn=0))
    assert metrics["precision"] is None
    assert metrics["tnr"] == 1.0


def test_identities():
    m = score(ConfusionCounts(12, 7, 3, 2))
    assert abs(m["fpr"] - (1 - m["tnr"])) < 1e-12
    assert abs(m["fnr"] - (1 - m["recall"])) < 1e-12
    for v in m.values():
        assert 0.0 <= v <= 1.0


def test_negative_counts_rejected():
    with pytest.raises(ValueError):
        ConfusionCounts(-1, 0, 0, 0)


def test_format_table_two_decimals():
    out = format_table(score(ConfusionCounts(31, 31, 7, 0)))
    assert "81.58%" in out and "18.42%" in out


def test_score_run(tmp_path):
    events = tmp_path / "events.log"
    events.write_text(
        '{"window": 0, "category": "SYN_WEATHER", "rule": "rule4"}\n'
        '{"window": 1, "category": "NORMAL_BIRD", "rule": "rule14"}\n'
        '{"window": 3, "category": "RST_WIND", "rule": "rule23"}\n'
    )
    labels = tmp_path / "labels.json"
    labels.write_text(json.dumps({
        "scenario": "SYN_SCAN",
        "windows": [
            {"index": 0, "attack": True},
            {"index": 1, "attack": False},
            {"index": 2, "attack": False},
            {"index": 3, "attack": False},
        ],
    }))
    counts = score_run(str(events), str(labels))
    assert (counts.tp, counts.tn, counts.fp, counts.fn) == (1, 2, 1, 0)
