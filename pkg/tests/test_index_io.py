import numpy as np
import pytest

from gbkmv.errors import CorruptIndexError, IndexFormatError
from gbkmv.gbkmv import build_gbkmv_index
from gbkmv.hashing import HashSource
from gbkmv.index_io import MAGIC, dumps_index, load_index, loads_index, save_index
from gbkmv.search import SizePartitionIndex, query


def worked_index(worked):
    return build_gbkmv_index(worked.dataset, b=100, r=2, h=worked.hasher, tau=0.5)


def test_double_round_trip_byte_identical(worked, tmp_path):
    blob = dumps_index(worked_index(worked))
    assert blob[:4] == MAGIC
    save_index(loads_index(blob), tmp_path / "a.idx")
    assert (tmp_path / "a.idx").read_bytes() == blob


def test_empty_tail_round_trip(worked):
    idx = build_gbkmv_index(worked.dataset, b=0, r=0, h=worked.hasher)
    blob = dumps_index(idx)
    back = loads_index(blob)
    assert back.tail_elements.size == 0 and dumps_index(back) == blob


def test_queries_identical_after_load(small_zipf, tmp_path):
    idx = build_gbkmv_index(small_zipf, 0.1 * small_zipf.stats.N, r=24, h=HashSource(9))
    save_index(idx, tmp_path / "z.idx")
    back = load_index(tmp_path / "z.idx")
    a, b = SizePartitionIndex.build(idx), SizePartitionIndex.build(back)
    for qi in range(0, 60, 3):
        Q = small_zipf.records[qi]
        assert query(idx, a, Q, 0.5) == query(back, b, Q, 0.5)
    assert back.tau == idx.tau and back.r == idx.r and back.seed == 9


def test_bad_magic_and_version(worked):
    blob = bytearray(dumps_index(worked_index(worked)))
    with pytest.raises(IndexFormatError):
        loads_index(b"NOPE" + bytes(blob[4:]))
    blob[4] += 1
    with pytest.raises(IndexFormatError) as exc:
        loads_index(bytes(blob))
    assert not isinstance(exc.value, CorruptIndexError)


@pytest.mark.parametrize("cut", [5, 20, 60, -9, -1])
def test_truncation_detected(worked, cut):
    blob = dumps_index(worked_index(worked))
    with pytest.raises(CorruptIndexError):
        loads_index(blob[:cut])


def test_trailing_garbage_detected(worked):
    with pytest.raises(CorruptIndexError):
        loads_index(dumps_index(worked_index(worked)) + b"\0")


def test_little_endian_header(worked):
    blob = dumps_index(worked_index(worked))
    assert int.from_bytes(blob[4:6], "little") == 1
    m = int.from_bytes(blob[15:23], "little")
    assert m == 4
    assert np.frombuffer(blob[39:47], dtype="<f8")[0] == 0.5
