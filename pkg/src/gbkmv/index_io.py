"""Binary on-disk format for GB-KMV indexes.

Layout (little-endian throughout)::

    b"GBKM"  u16 version  u8 hash mode (0 computed, 1 fixture)
    u64 seed  u64 m  u64 n  u64 r  f64 tau  f64 budget
    dictionary    u64 count, then per token: u32 byte length + UTF-8 bytes
    fixture table u64 count, then count x (i64 id) and count x (f64 hash), ids ascending
    buffer ids    u64 count + i64[count]
    sizes         u64 count + i64[count]
    buffer words  u64 words per record + u32[m * words]
    tail ptr      u64 count + i64[count]
    tail elements u64 count + i64[count]
    tail hashes   u64 count + f64[count]

Every variable-length section carries its own length prefix, so a reader can
detect truncation before touching the payload.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import CorruptIndexError, IndexFormatError
from .gbkmv import GbkmvIndex
from .hashing import HashSource

MAGIC = b"GBKM"
VERSION = 1
_HEADER = struct.Struct("<4sHBQQQQdd")


class _Writer:
    def __init__(self) -> None:
        self.parts: list[bytes] = []

    def raw(self, b: bytes) -> None:
        self.parts.append(b)

    def u64(self, v: int) -> None:
        self.parts.append(struct.pack("<Q", v))

    def array(self, a: np.ndarray, dtype: str) -> None:
        a = np.ascontiguousarray(a, dtype=dtype)
        self.u64(a.size)
        self.parts.append(a.tobytes())


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise CorruptIndexError(f"truncated index at byte {self.pos} (need {n} more)")
        b = self.data[self.pos: self.pos + n]
        self.pos += n
        return b

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def array(self, dtype: str, count: int | None = None) -> np.ndarray:
        if count is None:
            count = self.u64()
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(count * dt.itemsize), dtype=dt).astype(dt.newbyteorder("="))


def dumps_index(index: GbkmvIndex) -> bytes:
    w = _Writer()
    table = index.hasher.table
    w.raw(_HEADER.pack(MAGIC, VERSION, 1 if table is not None else 0, index.seed & 0xFFFFFFFFFFFFFFFF,
                       index.m, index.n, index.r, index.tau, index.budget))
    w.u64(len(index.tokens))
    for t in index.tokens:
        b = t.encode("utf-8")
        w.raw(struct.pack("<I", len(b)))
        w.raw(b)
    items = sorted(table.items()) if table is not None else []
    w.u64(len(items))
    w.raw(np.array([k for k, _ in items], dtype="<i8").tobytes())
    w.raw(np.array([v for _, v in items], dtype="<f8").tobytes())
    w.array(index.buffer_elements, "<i8")
    w.array(index.sizes, "<i8")
    words = index.buffer_words
    w.u64(words.shape[1])
    w.raw(np.ascontiguousarray(words, dtype="<u4").tobytes())
    w.array(index.tail_ptr, "<i8")
    w.array(index.tail_elements, "<i8")
    w.array(index.tail_hashes, "<f8")
    return b"".join(w.parts)


def loads_index(data: bytes) -> GbkmvIndex:
    if len(data) < 4 or data[:4] != MAGIC:
        raise IndexFormatError("not a GB-KMV index (bad magic)")
    rd = _Reader(data)
    magic, version, mode, seed, m, n, r, tau, budget = _HEADER.unpack(rd.take(_HEADER.size))
    if version != VERSION:
        raise IndexFormatError(f"unsupported index version {version}")
    if mode not in (0, 1):
        raise IndexFormatError(f"unknown hash mode {mode}")
    tokens = []
    for _ in range(rd.u64()):
        (ln,) = struct.unpack("<I", rd.take(4))
        tokens.append(rd.take(ln).decode("utf-8"))
    n_fix = rd.u64()
    fix_ids = rd.array("<i8", n_fix)
    fix_vals = rd.array("<f8", n_fix)
    buffer_elements = rd.array("<i8")
    sizes = rd.array("<i8")
    n_words = rd.u64()
    words = rd.array("<u4", m * n_words).reshape(m, n_words)
    tail_ptr = rd.array("<i8")
    tail_elements = rd.array("<i8")
    tail_hashes = rd.array("<f8")
    if rd.pos != len(data):
        raise CorruptIndexError(f"{len(data) - rd.pos} trailing bytes after index")
    if sizes.size != m or tail_ptr.size != m + 1 or tail_elements.size != tail_hashes.size:
        raise CorruptIndexError("section lengths disagree with header")
    if tail_ptr[-1] != tail_elements.size or buffer_elements.size != min(r, n):
        raise CorruptIndexError("section lengths disagree with header")
    hasher = (HashSource.fixture(dict(zip(fix_ids.tolist(), fix_vals.tolist())), seed=seed)
              if mode == 1 else HashSource(seed))
    return GbkmvIndex(
        r=r, buffer_elements=buffer_elements, tau=tau, hasher=hasher, budget=budget, n=n,
        sizes=sizes, buffer_words=words, tail_ptr=tail_ptr, tail_elements=tail_elements,
        tail_hashes=tail_hashes, tokens=tokens,
    )


def save_index(index: GbkmvIndex, path: str | Path) -> None:
    Path(path).write_bytes(dumps_index(index))


def load_index(path: str | Path) -> GbkmvIndex:
    return loads_index(Path(path).read_bytes())
