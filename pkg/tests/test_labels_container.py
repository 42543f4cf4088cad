import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from emofuse.container import (atomic_write_text, load_container, read_feature_dir, read_matrix,
                               save_container, write_feature_matrix, write_matrix)
from emofuse.labels import (EMOTIONS, N_CLASSES, ClassDistribution, InvalidDistributionError,
                            MissingGoldError, PredictionFormatError, PredictionSet, accuracy,
                            argmax_label, confusion, label_index, read_labels, read_predictions,
                            softmax, write_labels, write_predictions)


def test_emotion_order_and_index():
    assert EMOTIONS == ("angry", "disgust", "fear", "happy", "neutral", "sad", "surprise")
    assert label_index("sad") == 5 and label_index(3) == 3
    with pytest.raises(ValueError):
        label_index("bored")


def test_distribution_validation():
    with pytest.raises(InvalidDistributionError):
        ClassDistribution(np.full(7, 0.2))
    with pytest.raises(InvalidDistributionError):
        ClassDistribution(np.array([1.1, -0.1, 0, 0, 0, 0, 0]))
    raw = ClassDistribution(np.full(7, 0.5), normalized=False)
    assert raw.label == "angry"


def test_argmax_tie_goes_to_first():
    assert argmax_label(ClassDistribution.uniform()) == "angry"
    assert argmax_label(ClassDistribution.one_hot("fear")) == "fear"


probs_strategy = arrays(np.float64, st.tuples(st.integers(1, 12), st.just(N_CLASSES)),
                        elements=st.floats(0.01, 10.0))


@given(probs_strategy, st.integers(0, 2 ** 31 - 1))
def test_prediction_csv_round_trip(tmp_path_factory, raw, seed):
    rng = np.random.default_rng(seed)
    P = raw / raw.sum(axis=1, keepdims=True)
    n = len(P)
    gold = rng.integers(-1, N_CLASSES, n)
    splits = tuple(rng.choice(["train", "valid", "test", "other"], n))
    ps = PredictionSet(tuple(f"c{i}" for i in range(n)), P, gold, splits)
    path = tmp_path_factory.mktemp("rt") / "p.csv"
    write_predictions(ps, path)
    back = read_predictions(path)
    assert back.clip_ids == ps.clip_ids and back.splits == ps.splits
    assert np.array_equal(back.gold, ps.gold)
    np.testing.assert_allclose(back.probs, P, atol=1e-8)
    # writing the parsed set reproduces the file byte for byte
    path2 = path.with_name("q.csv")
    write_predictions(back, path2)
    assert path.read_bytes() == path2.read_bytes()


@pytest.mark.parametrize("body, fragment", [
    ("clip_id,split,gold\n", "bad header"),
    ("", "empty file"),
])
def test_prediction_header_errors(tmp_path, body, fragment):
    p = tmp_path / "p.csv"
    p.write_text(body)
    with pytest.raises(PredictionFormatError, match=fragment):
        read_predictions(p)


def _csv(rows):
    head = "clip_id,split,gold," + ",".join(f"p_{e}" for e in EMOTIONS)
    return "\n".join([head] + rows) + "\n"


@pytest.mark.parametrize("row, fragment", [
    ("a,train,happy,0.5,0.5,0,0,0,0", "columns"),
    ("a,train,happy,0.5,0.5,0,0,0,0,0.2", "sum"),
    ("a,train,happy,x,0.5,0,0,0,0,0.5", "non-numeric"),
    ("a,train,happy,-0.1,0.6,0,0,0,0,0.5", ">= 0"),
    ("a,holdout,happy,0.5,0.5,0,0,0,0,0", "split"),
    ("a,train,bored,0.5,0.5,0,0,0,0,0", "bored"),
])
def test_prediction_row_errors_report_line(tmp_path, row, fragment):
    p = tmp_path / "p.csv"
    p.write_text(_csv([row]))
    with pytest.raises(PredictionFormatError, match=fragment) as err:
        read_predictions(p)
    assert err.value.line == 2


def test_duplicate_clip_rejected(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text(_csv(["a,train,,1,0,0,0,0,0,0", "a,test,,1,0,0,0,0,0,0"]))
    with pytest.raises(PredictionFormatError, match="duplicate"):
        read_predictions(p)


def test_near_normalized_rows_are_renormalized(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text(_csv(["a,test,,0.5004,0.5,0,0,0,0,0"]))
    ps = read_predictions(p)
    assert ps.probs[0].sum() == pytest.approx(1.0, abs=1e-12)


def test_accuracy_and_confusion():
    P = np.eye(N_CLASSES)
    ps = PredictionSet(tuple(EMOTIONS), P, np.arange(N_CLASSES))
    assert accuracy(ps) == 1.0
    cm = confusion(ps)
    assert np.array_equal(cm.counts, np.eye(N_CLASSES, dtype=np.int64))
    assert np.allclose(cm.row_normalized, np.eye(N_CLASSES))
    with pytest.raises(MissingGoldError):
        accuracy(PredictionSet(("x",), P[:1]))


def test_labels_round_trip(tmp_path):
    labels = {"a": ("train", 3), "b": ("test", -1)}
    write_labels(labels, tmp_path / "l.csv")
    assert read_labels(tmp_path / "l.csv") == labels


@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 6)),
              elements=st.floats(-1e3, 1e3, width=32)))
def test_matrix_round_trip_is_float32_exact(tmp_path_factory, a):
    stem = tmp_path_factory.mktemp("m") / "x"
    write_matrix(stem, a)
    assert np.array_equal(read_matrix(stem), a.astype(np.float32).astype(np.float64))


def test_container_and_feature_dir(tmp_path):
    save_container(tmp_path / "c", {"kind": "demo"}, {"A": np.ones((2, 3, 4)), "b": np.arange(3.0)})
    header, arrays_ = load_container(tmp_path / "c")
    assert header["kind"] == "demo" and arrays_["A"].shape == (2, 3, 4)
    assert np.array_equal(arrays_["b"], np.arange(3.0))
    write_feature_matrix(tmp_path / "f", "clip1", np.eye(3))
    assert list(read_feature_dir(tmp_path / "f")) == ["clip1"]
    with pytest.raises(ValueError):
        write_matrix(tmp_path / "bad", np.array([np.nan]))


def test_atomic_write_leaves_no_temp_files(tmp_path):
    atomic_write_text(tmp_path / "x.txt", "hello")
    assert [p.name for p in tmp_path.iterdir()] == ["x.txt"]


@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.just(N_CLASSES)),
              elements=st.floats(-50, 50)))
def test_softmax_rows_sum_to_one(z):
    s = softmax(z, axis=1)
    assert np.all(s >= 0)
    np.testing.assert_allclose(s.sum(axis=1), 1.0, atol=1e-12)
