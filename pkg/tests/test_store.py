import tempfile
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vidagg import store
from vidagg.errors import FormatError, IntegrityError

# -- feature matrix files --------------------------------------------------


def test_feature_matrix_round_trip(tmp_path, rng):
    m = rng.random((3, 2)).astype(np.float32)
    store.write_feature_matrix(m, tmp_path / "a.dovf")
    back = store.load_feature_matrix(tmp_path / "a.dovf")
    assert back.dtype == np.float32
    assert np.array_equal(back, m)


def test_feature_matrix_degenerate_size(tmp_path):
    m = np.zeros((1, 1), dtype=np.float32)
    store.write_feature_matrix(m, tmp_path / "one.dovf")
    assert np.array_equal(store.load_feature_matrix(tmp_path / "one.dovf"), m)


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=200),
    d=st.integers(min_value=1, max_value=512),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_feature_matrix_round_trip_random_shapes(n, d, seed):
    m = np.random.default_rng(seed).standard_normal((n, d)).astype(np.float32)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "r.dovf"
        store.write_feature_matrix(m, path)
        assert store.load_feature_matrix(path).tobytes() == m.tobytes()


def test_feature_matrix_truncated(tmp_path):
    m = np.ones((3, 2), dtype=np.float32)
    path = tmp_path / "t.dovf"
    store.write_feature_matrix(m, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-4])  # drop one value
    with pytest.raises(FormatError, match="payload"):
        store.load_feature_matrix(path)


def test_feature_matrix_nan_payload(tmp_path):
    path = tmp_path / "n.dovf"
    store.write_feature_matrix(np.ones((2, 2), dtype=np.float32), path)
    raw = bytearray(path.read_bytes())
    raw[13:17] = np.array([np.nan], dtype="<f4").tobytes()
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="non-finite"):
        store.load_feature_matrix(path)


def test_feature_matrix_zero_dims_rejected(tmp_path):
    path = tmp_path / "z.dovf"
    path.write_bytes(store.FEATURE_MAGIC + bytes([1]) + (0).to_bytes(4, "little") * 2)
    with pytest.raises(FormatError, match="empty"):
        store.load_feature_matrix(path)
    with pytest.raises(ValueError):
        store.write_feature_matrix(np.empty((0, 3), dtype=np.float32), tmp_path / "w.dovf")


def test_feature_matrix_bad_magic(tmp_path):
    path = tmp_path / "b.dovf"
    path.write_bytes(b"XXXX" + bytes(16))
    with pytest.raises(FormatError, match="magic"):
        store.load_feature_matrix(path)


def test_write_feature_matrix_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        store.write_feature_matrix(
            np.ones((1, 1), dtype=np.float32), tmp_path / "missing" / "x.dovf"
        )


def test_write_feature_matrix_rejects_nan(tmp_path):
    with pytest.raises(ValueError):
        store.write_feature_matrix(np.array([[np.nan]]), tmp_path / "x.dovf")


# -- manifests -------------------------------------------------------------


def _write_manifest(tmp_path, body):
    path = tmp_path / "manifest.txt"
    path.write_text(body, encoding="utf-8")
    return path


VALID = """\
#classes: walk,jump
#split split1
v1,0,split1,train,spatial,gp,f/v1_s.dovf
v1,0,split1,train,temporal,gp,f/v1_t.dovf
v2,1,split1,test,spatial,gp,f/v2_s.dovf
v2,1,split1,test,temporal,gp,f/v2_t.dovf
"""


def test_manifest_round_trip(tmp_path):
    manifest = store.load_manifest(_write_manifest(tmp_path, VALID))
    assert manifest.classes == ("walk", "jump")
    assert manifest.splits == ("split1",)
    assert len(manifest.records) == 4
    assert manifest.streams() == ["spatial", "temporal"]
    assert manifest.video_ids("split1", "test") == ["v2"]
    out = tmp_path / "copy.txt"
    store.write_manifest(manifest, out)
    again = store.load_manifest(out)
    assert again.records == manifest.records


def test_manifest_label_out_of_range(tmp_path):
    body = VALID + "v3,5,split1,train,spatial,gp,f/v3.dovf\n"
    with pytest.raises(IntegrityError, match="label 5"):
        store.load_manifest(_write_manifest(tmp_path, body))


def test_manifest_duplicate_key(tmp_path):
    body = VALID + "v1,0,split1,train,spatial,gp,f/other.dovf\n"
    with pytest.raises(IntegrityError, match="duplicate"):
        store.load_manifest(_write_manifest(tmp_path, body))


def test_manifest_train_test_overlap(tmp_path):
    body = VALID + "v2,1,split1,train,spatial,other,f/v2b.dovf\n"
    with pytest.raises(IntegrityError, match="both train and test"):
        store.load_manifest(_write_manifest(tmp_path, body))


def test_manifest_undeclared_split(tmp_path):
    body = VALID + "v3,0,split9,train,spatial,gp,f/v3.dovf\n"
    with pytest.raises(IntegrityError, match="undeclared split"):
        store.load_manifest(_write_manifest(tmp_path, body))


def test_manifest_conflicting_labels(tmp_path):
    body = VALID + "v1,1,split1,train,spatial,other,f/v1o.dovf\n"
    with pytest.raises(IntegrityError, match="conflicting labels"):
        store.load_manifest(_write_manifest(tmp_path, body))


def test_manifest_parse_errors_carry_line_numbers(tmp_path):
    with pytest.raises(FormatError, match=":3:"):
        store.load_manifest(
            _write_manifest(tmp_path, "#classes: a\n#split s\nv1,0,s,train\n")
        )
    with pytest.raises(FormatError, match=":1:"):
        store.load_manifest(_write_manifest(tmp_path, "#bogus directive\n"))
    with pytest.raises(FormatError, match="not an integer"):
        store.load_manifest(
            _write_manifest(tmp_path, "#classes: a\n#split s\nv1,x,s,train,spatial,g,p\n")
        )


def test_manifest_missing_classes(tmp_path):
    with pytest.raises(FormatError, match="#classes"):
        store.load_manifest(_write_manifest(tmp_path, "#split s\n"))


# -- score CSVs ------------------------------------------------------------


def test_scores_round_trip(tmp_path, rng):
    s = store.ScoreMatrix(("a", "b"), rng.random((2, 3)))
    store.write_scores(s, tmp_path / "s.csv")
    back = store.load_scores(tmp_path / "s.csv")
    assert back.video_ids == ("a", "b")
    assert back.class_count == 3
    assert np.max(np.abs(back.scores - s.scores)) < 1e-12


def test_scores_ragged_row(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("video_id,score_0,score_1\na,0.5,0.5\nb,0.25\n")
    with pytest.raises(FormatError, match="ragged"):
        store.load_scores(path)


def test_scores_bad_header(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("id,s0\na,1\n")
    with pytest.raises(FormatError, match="header"):
        store.load_scores(path)


def test_scores_non_numeric(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("video_id,score_0\na,oops\n")
    with pytest.raises(FormatError, match="non-numeric"):
        store.load_scores(path)


def test_score_matrix_validates_shape():
    with pytest.raises(ValueError):
        store.ScoreMatrix(("a",), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        store.ScoreMatrix(("a",), np.array([[np.inf, 0.0]]))
