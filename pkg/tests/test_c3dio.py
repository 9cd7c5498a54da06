"""C3D parser/writer against hand-assembled fixtures and round trips."""
import struct

import numpy as np
import pytest

from mocaptk import c3dio
from mocaptk.c3dio import (C3dFile, CatalogEntry, DEFAULT_MARKERS, MarkerSet,
                           build_partition, build_random_partition, parse_c3d,
                           select_markers, write_c3d)
from mocaptk.errors import (MalformedHeader, MissingMarker, TruncatedData,
                            UnknownActor, UnsupportedEncoding)


def _minimal_file_bytes(frame_rate=120.0, point=(1.0, 2.0, 3.0)):
    """Hand-assembled 1-marker, 1-frame, float-coded stream (no writer
    involved), following the public block layout."""
    header = bytearray(512)
    header[0] = 2              # first parameter block
    header[1] = 0x50
    struct.pack_into("<4H", header, 2, 1, 0, 1, 1)   # points, analog, first, last
    struct.pack_into("<f", header, 12, -1.0)         # negative scale -> float data
    struct.pack_into("<H", header, 16, 3)            # data starts at block 3
    struct.pack_into("<f", header, 20, frame_rate)
    params = bytearray(512)
    struct.pack_into("<BBBB", params, 0, 1, 0x50, 1, 84)
    data = bytearray(512)
    struct.pack_into("<4f", data, 0, *point, 0.0)
    return bytes(header + params + data)


def test_parse_minimal_hand_assembled_file():
    f = parse_c3d(_minimal_file_bytes())
    assert f.point_count == 1
    assert f.frame_count == 1
    assert f.data_format == "float"
    np.testing.assert_allclose(f.points[0, 0], [1.0, 2.0, 3.0], atol=1e-6)


def test_frame_rate_field():
    f = parse_c3d(_minimal_file_bytes(frame_rate=120.0))
    assert f.frame_rate == 120.0


def test_malformed_header():
    blob = bytearray(_minimal_file_bytes())
    blob[1] = 0x51
    with pytest.raises(MalformedHeader):
        parse_c3d(bytes(blob))


def test_unsupported_processor_type():
    blob = bytearray(_minimal_file_bytes())
    blob[512 + 3] = 85  # DEC
    with pytest.raises(UnsupportedEncoding):
        parse_c3d(bytes(blob))


def test_truncated_data():
    blob = _minimal_file_bytes()
    with pytest.raises(TruncatedData):
        parse_c3d(blob[:600])


def _random_c3d(rng, n_points=2, n_frames=10, data_format="float"):
    labels = [f"MK{i}" for i in range(n_points)]
    scale = 0.01
    if data_format == "int":
        pts = rng.integers(-30000, 30000, size=(n_frames, n_points, 3)).astype(float) * scale
    else:
        pts = rng.standard_normal((n_frames, n_points, 3)).astype("<f4").astype(float)
    return C3dFile(point_count=n_points, frame_count=n_frames, frame_rate=120.0,
                   labels=labels, points=pts, scale_factor=scale, data_format=data_format)


def test_round_trip_minimal():
    rng = np.random.default_rng(0)
    f = _random_c3d(rng, n_points=1, n_frames=1)
    g = parse_c3d(write_c3d(f))
    assert g.point_count == 1 and g.frame_count == 1
    np.testing.assert_allclose(g.points, f.points, atol=1e-6)


def test_round_trip_preserves_frame_count():
    rng = np.random.default_rng(1)
    f = _random_c3d(rng, n_points=2, n_frames=10)
    assert parse_c3d(write_c3d(f)).frame_count == 10


@pytest.mark.parametrize("data_format", ["float", "int"])
def test_round_trip_field_by_field(data_format):
    rng = np.random.default_rng(2)
    f = _random_c3d(rng, n_points=5, n_frames=17, data_format=data_format)
    g = parse_c3d(write_c3d(f))
    assert g.point_count == f.point_count
    assert g.frame_count == f.frame_count
    assert g.frame_rate == f.frame_rate
    assert g.labels == f.labels
    assert g.data_format == f.data_format
    np.testing.assert_allclose(g.scale_factor, f.scale_factor, rtol=1e-6)
    np.testing.assert_allclose(g.points, f.points, atol=1e-6)


def test_double_round_trip_stable():
    rng = np.random.default_rng(3)
    f = _random_c3d(rng, n_points=3, n_frames=15)
    once = parse_c3d(write_c3d(f))
    twice = parse_c3d(write_c3d(once))
    np.testing.assert_allclose(once.points, twice.points, atol=1e-6)


def _c3d_with_markers(rng, names, n_frames=4):
    pts = rng.standard_normal((n_frames, len(names), 3)).astype("<f4").astype(float)
    return C3dFile(point_count=len(names), frame_count=n_frames, frame_rate=30.0,
                   labels=list(names), points=pts, data_format="float"), pts


def test_select_markers_identity_order(rng):
    f, pts = _c3d_with_markers(rng, DEFAULT_MARKERS.names)
    seq = select_markers(f)
    assert seq.frames.shape == (4, 69)
    np.testing.assert_array_equal(seq.frames, pts.reshape(4, 69))
    assert seq.fps == 30.0


def test_select_markers_permuted_order(rng):
    perm = list(np.random.default_rng(5).permutation(23))
    names = [DEFAULT_MARKERS.names[i] for i in perm]
    f, pts = _c3d_with_markers(rng, names)
    seq = select_markers(f)
    # oracle: direct indexing of the permuted layout back into canonical order
    want = np.stack([pts[:, names.index(n), :] for n in DEFAULT_MARKERS.names], axis=1)
    np.testing.assert_array_equal(seq.frames, want.reshape(4, 69))


def test_select_markers_resolves_aliases_and_prefixes(rng):
    names = list(DEFAULT_MARKERS.names)
    names[names.index("LFWT")] = "Subject1:LASI"
    names[names.index("SACR")] = "root"
    f, _ = _c3d_with_markers(rng, names)
    seq = select_markers(f)
    assert seq.frames.shape[1] == 69


def test_select_markers_missing_marker(rng):
    names = list(DEFAULT_MARKERS.names)
    names[names.index("C7")] = "NOTAMARKER"
    f, _ = _c3d_with_markers(rng, names)
    with pytest.raises(MissingMarker) as err:
        select_markers(f)
    assert "C7" in str(err.value)


def test_select_markers_dimension_with_extra_points(rng):
    names = DEFAULT_MARKERS.names + [f"EXTRA{i}" for i in range(8)]
    f, _ = _c3d_with_markers(rng, names)
    assert select_markers(f).frames.shape[1] == 69


def _catalog(spec):
    # spec: {actor: count}
    entries = []
    i = 0
    for actor, count in spec.items():
        for _ in range(count):
            entries.append(CatalogEntry(id=f"s{i:04d}", path=f"{i}.c3d", actor=actor,
                                        label=i % 3, frame_count=10, fps=30.0))
            i += 1
    return entries


def test_build_partition_routes_actors():
    cat = _catalog({"a": 2, "b": 2, "c": 2, "d": 2, "e": 2})
    part = build_partition(cat, test_actors=["d", "e"], valid_actor="b")
    train_actors = {e.actor for e in cat if e.id in set(part.train)}
    assert train_actors == {"a", "c"}
    assert len(part.train) + len(part.valid) + len(part.test) == len(cat)


def test_build_partition_hdm05_style_proportions():
    # five equally productive actors, two for test, one for validation
    cat = _catalog({a: 20 for a in "abcde"})
    part = build_partition(cat, test_actors=["d", "e"], valid_actor="b")
    n = len(cat)
    assert abs(len(part.train) / n - 0.4) < 1e-9
    assert abs(len(part.valid) / n - 0.2) < 1e-9
    assert abs(len(part.test) / n - 0.4) < 1e-9


def test_build_partition_unknown_actor():
    cat = _catalog({"a": 1})
    with pytest.raises(UnknownActor):
        build_partition(cat, test_actors=["x"], valid_actor="a")


def test_partition_disjoint_and_actor_exclusive_property():
    rng = np.random.default_rng(7)
    for _ in range(25):
        n_actors = int(rng.integers(3, 8))
        actors = [f"ac{j}" for j in range(n_actors)]
        cat = _catalog({a: int(rng.integers(1, 6)) for a in actors})
        test_actors = list(rng.choice(actors, size=rng.integers(1, n_actors - 1), replace=False))
        remaining = [a for a in actors if a not in test_actors]
        valid_actor = str(rng.choice(remaining))
        part = build_partition(cat, test_actors, valid_actor)
        sets = [set(part.train), set(part.valid), set(part.test)]
        assert not (sets[0] & sets[1]) and not (sets[0] & sets[2]) and not (sets[1] & sets[2])
        assert sets[0] | sets[1] | sets[2] == {e.id for e in cat}
        by_id = {e.id: e.actor for e in cat}
        for a in actors:
            hit = [i for i, s in enumerate(sets) if any(by_id[x] == a for x in s)]
            assert len(hit) <= 1


def test_random_balanced_partition_proportions():
    cat = _catalog({"a": 30, "b": 30})
    part = build_random_partition(cat, (0.4, 0.2, 0.4), np.random.default_rng(0))
    assert part.policy == "random-balanced"
    assert len(part.train) + len(part.valid) + len(part.test) == 60
    assert abs(len(part.train) - 24) <= 2


def test_catalog_manifest_round_trip(tmp_path):
    cat = _catalog({"a": 3})
    path = tmp_path / "catalog.jsonl"
    c3dio.write_catalog(path, cat, meta={"config_hash": "h", "seed": 1})
    entries, meta = c3dio.read_catalog(path)
    assert meta == {"config_hash": "h", "seed": 1}
    assert [e.id for e in entries] == [e.id for e in cat]
    assert entries[0].label == cat[0].label


def test_partition_manifest_round_trip(tmp_path):
    cat = _catalog({"a": 2, "b": 2, "c": 2})
    part = build_partition(cat, ["c"], "b")
    path = tmp_path / "partition.json"
    c3dio.write_partition(path, part, meta={"config_hash": "h", "seed": 0})
    loaded = c3dio.read_partition(path)
    assert loaded.train == part.train
    assert loaded.valid == part.valid
    assert loaded.test == part.test


def test_markerset_rejects_duplicates():
    with pytest.raises(ValueError):
        MarkerSet(names=["A", "A", "B"])


def test_entry_from_filename():
    actor, label = c3dio.entry_from_filename("/data/bk_12_0042.c3d")
    assert actor == "bk" and label == 12
    actor, label = c3dio.entry_from_filename("/data/strange-file.c3d")
    assert actor == "strange-file" and label is None
