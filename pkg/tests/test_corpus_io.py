import json

import numpy as np
import pytest

from tsrkit.errors import IoFailure, SchemaViolation
from tsrkit.pointer.layout import PointerFeatures, ProjectionMatrix
from tsrkit.synth.corpus import CorpusConfig, generate_corpus
from tsrkit.synth.corpus_io import (
    IDENTITY,
    corpus_digest,
    features_from_json_obj,
    features_to_json_obj,
    read_corpus,
    sample_to_json_obj,
    write_corpus,
)
from tsrkit.synth.oracle import with_oracle_features
from tsrkit.synth.watermarks import WatermarkConfig


@pytest.fixture
def samples():
    config = CorpusConfig(seed=9, n_samples=12, max_rows=5, max_cols=5,
                          watermark=WatermarkConfig(enabled=True, probability=0.3, min_iou=0.8))
    return generate_corpus(config)


def _lines(path):
    return path.read_text(encoding="utf-8").splitlines()


def test_round_trip_without_features(tmp_path, samples):
    path = tmp_path / "corpus.jsonl"
    assert write_corpus(path, samples) == len(samples)
    again = read_corpus(path)
    assert again == samples
    assert all(s.features is None for s in again)
    assert all(json.loads(line)["format_version"] == 1 for line in _lines(path))


def test_round_trip_with_features(tmp_path, samples):
    featured = [with_oracle_features(s, max(16, len(s.data_tags) + 2)) for s in samples]
    path = tmp_path / "corpus.jsonl"
    write_corpus(path, featured)
    again = read_corpus(path)
    assert again == featured
    for a, b in zip(again, featured):
        np.testing.assert_array_equal(a.features.h, b.features.h)
    assert json.loads(_lines(path)[0])["features"]["proj_b"] == IDENTITY


def test_projection_serialisation():
    rng = np.random.default_rng(0)
    features = PointerFeatures(rng.normal(size=(5, 3)), ProjectionMatrix.random(rng, 3), ProjectionMatrix.identity(3))
    obj = features_to_json_obj(features)
    assert obj["proj_t"] == IDENTITY and isinstance(obj["proj_b"], dict)
    again = features_from_json_obj(json.loads(json.dumps(obj)))
    np.testing.assert_array_equal(again.proj_b.weights, features.proj_b.weights)
    np.testing.assert_array_equal(again.proj_b.bias, features.proj_b.bias)


def test_blank_lines_are_skipped(tmp_path, samples):
    path = tmp_path / "corpus.jsonl"
    body = "\n\n".join(json.dumps(sample_to_json_obj(s)) for s in samples[:2])
    path.write_text(body + "\n\n", encoding="utf-8")
    assert read_corpus(path) == samples[:2]


def _write_lines(path, objs):
    path.write_text("\n".join(o if isinstance(o, str) else json.dumps(o) for o in objs) + "\n", encoding="utf-8")


def test_truncated_line_reports_line_number(tmp_path, samples):
    path = tmp_path / "corpus.jsonl"
    good = json.dumps(sample_to_json_obj(samples[0]))
    _write_lines(path, [good, good[: len(good) // 2]])
    with pytest.raises(SchemaViolation) as info:
        read_corpus(path)
    assert info.value.line_no == 2
    assert str(info.value).startswith("line 2:")


def test_version_mismatch(tmp_path, samples):
    obj = sample_to_json_obj(samples[0])
    obj["format_version"] = 2
    path = tmp_path / "corpus.jsonl"
    _write_lines(path, [obj])
    with pytest.raises(SchemaViolation, match="format_version") as info:
        read_corpus(path)
    assert info.value.line_no == 1


@pytest.mark.parametrize("mutate", [
    lambda o: o.update(otsl="C C C C C C C C NL"),
    lambda o: o.pop("grid"),
    lambda o: o.update(box_slots=0),
    lambda o: o["annotations"]["boxes"].append({"bbox": [0.1, 0.1, 0.2, 0.2], "text": "x", "target": 10_000}),
])
def test_bad_samples_are_schema_violations(tmp_path, samples, mutate):
    obj = sample_to_json_obj(samples[0])
    mutate(obj)
    path = tmp_path / "corpus.jsonl"
    _write_lines(path, [sample_to_json_obj(samples[1]), obj])
    with pytest.raises(SchemaViolation) as info:
        read_corpus(path)
    assert info.value.line_no == 2


def test_feature_rows_must_match_layout(tmp_path, samples):
    sample = with_oracle_features(samples[0], 64)
    obj = sample_to_json_obj(sample)
    obj["features"]["h"] = obj["features"]["h"][:-1]
    path = tmp_path / "corpus.jsonl"
    _write_lines(path, [obj])
    with pytest.raises(SchemaViolation, match="B\\+T"):
        read_corpus(path)


def test_digest_is_deterministic(tmp_path):
    config = CorpusConfig(seed=5, n_samples=20)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_corpus(a, generate_corpus(config))
    write_corpus(b, generate_corpus(config, n_jobs=2))
    assert corpus_digest(a) == corpus_digest(b)
    assert len(corpus_digest(a)) == 64


def test_missing_file(tmp_path):
    with pytest.raises(IoFailure):
        read_corpus(tmp_path / "nope.jsonl")
    with pytest.raises(IoFailure):
        corpus_digest(tmp_path / "nope.jsonl")
    with pytest.raises(IoFailure):
        write_corpus(tmp_path / "no" / "dir" / "c.jsonl", [])
