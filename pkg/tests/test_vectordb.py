"""Vector index: search semantics and the checksummed binary format."""

from __future__ import annotations

import struct
import zlib

import numpy as np
import numpy.testing as npt
import pytest

from automathkg.embedding import (
    EMBED_DIM,
    STRATEGY_1,
    STRATEGY_2,
    HashEmbedder,
    SentenceMask,
    embed_strategy1,
    embed_strategy2,
)
from automathkg.errors import (
    ChecksumMismatchError,
    DegenerateVectorError,
    DimensionMismatchError,
    DuplicateIdError,
    EmptyIndexError,
    MalformedFileError,
)
from automathkg.vectordb import (
    FILE_MAGIC,
    VectorDb,
    build_vd,
    cosine,
    embed_for_db,
    load_vd,
    save_vd,
)

from oracles import top_k_by_full_sort
from util import kg_from_edges, unit_vectors


def small_db(dim=4):
    db = VectorDb(dim=dim)
    db.insert(0, [1.0, 0.0, 0.0, 0.0])
    db.insert(1, [0.0, 1.0, 0.0, 0.0])
    db.insert(2, [1.0, 1.0, 0.0, 0.0])
    return db


def test_cosine_basics():
    assert cosine([1, 0], [2, 0]) == pytest.approx(1.0)
    assert cosine([1, 0], [0, 3]) == pytest.approx(0.0)
    assert cosine([1, 0], [-1, 0]) == pytest.approx(-1.0)
    with pytest.raises(DimensionMismatchError):
        cosine([1, 0], [1, 0, 0])
    with pytest.raises(DegenerateVectorError):
        cosine([0, 0], [1, 0])


def test_insert_validates_and_normalizes():
    db = VectorDb(dim=3)
    db.insert(5, [3.0, 0.0, 4.0])
    npt.assert_allclose(db.vector(5), [0.6, 0.0, 0.8])
    assert 5 in db and len(db) == 1
    with pytest.raises(DuplicateIdError):
        db.insert(5, [1.0, 0.0, 0.0])
    with pytest.raises(DimensionMismatchError):
        db.insert(6, [1.0, 0.0])
    with pytest.raises(DegenerateVectorError):
        db.insert(6, [0.0, 0.0, 0.0])


def test_remove_is_idempotent():
    db = small_db()
    db.remove(0)
    db.remove(0)
    assert 0 not in db and len(db) == 2


def test_top_k_orders_by_score_then_id():
    db = small_db()
    hits = db.top_k([1.0, 0.0, 0.0, 0.0], k=3)
    assert [h.entity_id for h in hits] == [0, 2, 1]
    assert hits[0].score == pytest.approx(1.0)
    assert hits[1].score == pytest.approx(np.sqrt(0.5))
    assert hits[2].score == pytest.approx(0.0)


def test_top_k_breaks_exact_ties_by_ascending_id():
    db = VectorDb(dim=2)
    for entity_id in (9, 3, 7):
        db.insert(entity_id, [1.0, 0.0])
    hits = db.top_k([1.0, 0.0], k=3)
    assert [h.entity_id for h in hits] == [3, 7, 9]
    assert len({h.score for h in hits}) == 1


def test_top_k_exclusion_and_bounds():
    db = small_db()
    hits = db.top_k([1.0, 0.0, 0.0, 0.0], k=5, exclude={0})
    assert [h.entity_id for h in hits] == [2, 1]
    with pytest.raises(ValueError):
        db.top_k([1.0, 0.0, 0.0, 0.0], k=0)
    with pytest.raises(DimensionMismatchError):
        db.top_k([1.0, 0.0], k=1)
    with pytest.raises(EmptyIndexError):
        db.top_k([1.0, 0.0, 0.0, 0.0], k=1, exclude={0, 1, 2})
    with pytest.raises(EmptyIndexError):
        VectorDb(dim=4).top_k([1.0, 0.0, 0.0, 0.0], k=1)


def test_top_k_matches_full_sort_oracle():
    rng = np.random.default_rng(424242)
    records = unit_vectors(rng, count=80, dim=16)
    db = VectorDb(dim=16)
    for entity_id, vec in records.items():
        db.insert(entity_id, vec)
    for trial in range(10):
        query = rng.normal(size=16)
        for k in (1, 3, 12):
            hits = db.top_k(query, k)
            expected = top_k_by_full_sort(records, query, k)
            assert [h.entity_id for h in hits] == [eid for _, eid in expected]
            npt.assert_allclose(
                [h.score for h in hits], [s for s, _ in expected], atol=1e-9
            )


def augmented_mini():
    kg = kg_from_edges(4, [(0, 1), (1, 2), (2, 3)])
    from automathkg.kg import MathField

    for entity in kg.iter_entities():
        entity.field = MathField.ALGEBRA
        entity.contents = [f"Statement number {entity.id}."]
    return kg


def test_build_vd_strategy1_covers_every_entity():
    kg = augmented_mini()
    db, failed = build_vd(kg, HashEmbedder(), STRATEGY_1)
    assert failed == []
    assert len(db) == 4
    assert db.strategy_tag == STRATEGY_1
    assert db.weights is None
    for entity in kg.iter_entities():
        npt.assert_allclose(
            db.vector(entity.id), embed_strategy1(entity, HashEmbedder())
        )


def test_build_vd_strategy2_stores_weights():
    kg = augmented_mini()
    weights = (0.4, 0.3, 0.1, 0.1, 0.1)
    db, failed = build_vd(kg, HashEmbedder(), STRATEGY_2, weights=weights)
    assert failed == []
    assert db.weights == weights
    for entity in kg.iter_entities():
        npt.assert_allclose(
            db.vector(entity.id),
            embed_strategy2(entity, HashEmbedder(), weights),
        )


def test_build_vd_rejects_bad_strategy_configs():
    kg = augmented_mini()
    with pytest.raises(ValueError, match="strategy1 takes no weights"):
        build_vd(kg, HashEmbedder(), STRATEGY_1, weights=(1, 0, 0, 0, 0))
    with pytest.raises(ValueError, match="unknown strategy"):
        build_vd(kg, HashEmbedder(), "strategy9")


def test_build_vd_skips_degenerate_entities(caplog):
    kg = augmented_mini()

    class Picky(HashEmbedder):
        def embed_text(self, text):
            if "number 2" in text:
                raise DegenerateVectorError("scripted failure")
            return super().embed_text(text)

    with caplog.at_level("WARNING"):
        db, failed = build_vd(kg, Picky(), STRATEGY_1)
    assert failed == [2]
    assert len(db) == 3 and 2 not in db
    assert any("could not be embedded" in r.message for r in caplog.records)


def test_embed_for_db_follows_stored_recipe():
    kg = augmented_mini()
    entity = kg.entity(0)
    mask = SentenceMask.of("title", "content")

    db1, _ = build_vd(kg, HashEmbedder(), STRATEGY_1, mask=mask)
    npt.assert_allclose(
        embed_for_db(db1, HashEmbedder(), entity),
        embed_strategy1(entity, HashEmbedder(), mask),
    )

    db2, _ = build_vd(kg, HashEmbedder(), STRATEGY_2)
    npt.assert_allclose(
        embed_for_db(db2, HashEmbedder(), entity),
        embed_strategy2(entity, HashEmbedder()),
    )

    db1.strategy_tag = "external"
    with pytest.raises(ValueError, match="not entity-embeddable"):
        embed_for_db(db1, HashEmbedder(), entity)


def test_save_load_round_trip(tmp_path):
    kg = augmented_mini()
    db, _ = build_vd(kg, HashEmbedder(), STRATEGY_2, mask=SentenceMask.of("title", "field"))
    path = tmp_path / "index.vd"
    save_vd(db, path)
    loaded = load_vd(path)
    assert loaded.dim == db.dim
    assert loaded.strategy_tag == db.strategy_tag
    assert loaded.weights == db.weights
    assert loaded.mask == db.mask
    assert sorted(loaded.records) == sorted(db.records)
    for entity_id, vec in db.records.items():
        # storage quantizes to float32
        npt.assert_allclose(loaded.vector(entity_id), vec, atol=1e-6)


def test_save_is_byte_stable_across_round_trips(tmp_path):
    kg = augmented_mini()
    db, _ = build_vd(kg, HashEmbedder(), STRATEGY_1)
    first, second = tmp_path / "a.vd", tmp_path / "b.vd"
    save_vd(db, first)
    save_vd(load_vd(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_file_header_layout(tmp_path):
    db = VectorDb(dim=4, strategy_tag=STRATEGY_1)
    db.insert(7, [1.0, 0.0, 0.0, 0.0])
    path = tmp_path / "index.vd"
    save_vd(db, path)
    raw = path.read_bytes()
    assert raw[:4] == FILE_MAGIC == b"AMVD"
    version, dim, count = struct.unpack_from("<HHI", raw, 4)
    assert (version, dim, count) == (1, 4, 1)
    (tag_len,) = struct.unpack_from("<H", raw, 12)
    assert raw[14 : 14 + tag_len] == b"strategy1"
    offset = 14 + tag_len
    assert raw[offset] == 0  # no weights
    assert raw[offset + 1] == 0b11111  # full mask
    (entity_id,) = struct.unpack_from("<Q", raw, offset + 2)
    assert entity_id == 7
    (stored_crc,) = struct.unpack_from("<I", raw, len(raw) - 4)
    assert stored_crc == zlib.crc32(raw[:-4])


def test_records_are_written_in_ascending_id_order(tmp_path):
    db = VectorDb(dim=2)
    for entity_id in (9, 1, 5):
        db.insert(entity_id, [1.0, 0.0])
    path = tmp_path / "index.vd"
    save_vd(db, path)
    raw = path.read_bytes()
    offset = 14 + len(b"strategy1") + 2
    ids = []
    for _ in range(3):
        ids.append(struct.unpack_from("<Q", raw, offset)[0])
        offset += 8 + 2 * 4
    assert ids == [1, 5, 9]


def recrc(body: bytes) -> bytes:
    return body + struct.pack("<I", zlib.crc32(body))


def saved_bytes(tmp_path):
    db = small_db()
    path = tmp_path / "index.vd"
    save_vd(db, path)
    return path, path.read_bytes()


def test_load_rejects_flipped_bytes(tmp_path):
    path, raw = saved_bytes(tmp_path)
    corrupted = bytearray(raw)
    corrupted[20] ^= 0xFF
    path.write_bytes(bytes(corrupted))
    with pytest.raises(ChecksumMismatchError):
        load_vd(path)


def test_load_rejects_truncation_and_bad_magic(tmp_path):
    path, raw = saved_bytes(tmp_path)
    path.write_bytes(raw[:2])
    with pytest.raises(MalformedFileError, match="shorter"):
        load_vd(path)
    path.write_bytes(recrc(b"XXXX" + raw[4:-4]))
    with pytest.raises(MalformedFileError, match="bad magic"):
        load_vd(path)
    # truncated body with a matching checksum still fails structurally
    path.write_bytes(recrc(raw[:-20]))
    with pytest.raises(MalformedFileError, match="truncated"):
        load_vd(path)


def test_load_rejects_bad_header_fields(tmp_path):
    path, raw = saved_bytes(tmp_path)
    body = bytearray(raw[:-4])

    wrong_version = bytearray(body)
    struct.pack_into("<H", wrong_version, 4, 9)
    path.write_bytes(recrc(bytes(wrong_version)))
    with pytest.raises(MalformedFileError, match="version"):
        load_vd(path)

    offset = 14 + len(b"strategy1")
    bad_flag = bytearray(body)
    bad_flag[offset] = 7
    path.write_bytes(recrc(bytes(bad_flag)))
    with pytest.raises(MalformedFileError, match="weight flag"):
        load_vd(path)

    bad_mask = bytearray(body)
    bad_mask[offset + 1] = 0
    path.write_bytes(recrc(bytes(bad_mask)))
    with pytest.raises(MalformedFileError, match="mask bits"):
        load_vd(path)


def test_load_rejects_duplicate_ids_and_trailing_bytes(tmp_path):
    db = VectorDb(dim=2)
    db.insert(3, [1.0, 0.0])
    path = tmp_path / "index.vd"
    save_vd(db, path)
    raw = path.read_bytes()
    body = bytearray(raw[:-4])

    record = struct.pack("<Q", 3) + np.array([1.0, 0.0], "<f4").tobytes()
    duplicated = bytearray(body)
    struct.pack_into("<I", duplicated, 8, 2)  # claim two records
    duplicated += record
    path.write_bytes(recrc(bytes(duplicated)))
    with pytest.raises(MalformedFileError, match="duplicate entity id"):
        load_vd(path)

    padded = bytearray(body) + b"\x00\x00"
    path.write_bytes(recrc(bytes(padded)))
    with pytest.raises(MalformedFileError, match="trailing bytes"):
        load_vd(path)
