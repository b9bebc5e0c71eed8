"""Versioned binary archives for trained models and embedding matrices.

Both formats are little-endian, end with a CRC32 of everything before it,
and store values as float64 so a round trip is bit-exact.  Byte layouts
are documented in ``docs/formats.md``.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from . import kvconfig
from .model import ConeConfig, ConeModel, EmbeddingMatrix, init_model

MODEL_MAGIC = b"CONE"
EMBEDDING_MAGIC = b"CEMB"
VERSION = 1
DTYPE_F64 = 1


class ArchiveError(ValueError):
    pass


class ChecksumError(ArchiveError):
    pass


class VersionError(ArchiveError):
    pass


class ShapeMismatchError(ArchiveError):
    pass


class _Reader:
    def __init__(self, buf: bytes, what: str):
        self.buf, self.pos, self.what = buf, 0, what

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ArchiveError(f"{self.what}: unexpected end of data")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))

    def string(self, width: str = "H") -> str:
        (n,) = self.unpack(width)
        return self.take(n).decode("utf-8")


def _string(s: str, width: str = "H") -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<" + width, len(raw)) + raw


def _seal(payload: bytes) -> bytes:
    return payload + struct.pack("<I", zlib.crc32(payload))


def _open(path, magic: bytes, what: str) -> _Reader:
    buf = Path(path).read_bytes()
    if len(buf) < 12 or buf[:4] != magic:
        if len(buf) >= 4 and buf[:4] == magic:
            raise ChecksumError(f"{what}: file truncated")
        raise ArchiveError(f"{what}: not a {magic.decode()} archive")
    payload, (crc,) = buf[:-4], struct.unpack("<I", buf[-4:])
    if zlib.crc32(payload) != crc:
        raise ChecksumError(f"{what}: checksum mismatch (corrupt or truncated file)")
    r = _Reader(payload, what)
    r.take(4)
    (version,) = r.unpack("I")
    if version != VERSION:
        raise VersionError(f"{what}: format version {version}, expected {VERSION}")
    return r


def _block(name: str, a: np.ndarray) -> bytes:
    a = np.ascontiguousarray(a, dtype="<f8")
    head = _string(name) + struct.pack("<BB", DTYPE_F64, a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape)
    return head + a.tobytes()


def _read_block(r: _Reader):
    name = r.string()
    dtype, ndim = r.unpack("BB")
    if dtype != DTYPE_F64:
        raise ArchiveError(f"block {name!r}: unknown dtype code {dtype}")
    shape = r.unpack(f"{ndim}I")
    count = int(np.prod(shape)) if ndim else 1
    data = np.frombuffer(r.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)
    return name, data


def model_bytes(model: ConeModel) -> bytes:
    header = dict(model.config.to_dict(), vocab_size=model.vocab_size, n_communities=model.n_communities)
    params = model.parameters()
    out = [MODEL_MAGIC, struct.pack("<I", VERSION), _string(kvconfig.dumps(header), "I")]
    out.append(struct.pack("<I", len(params)))
    out += [_block(p.name, p.value) for p in params]
    return _seal(b"".join(out))


def save_model(model: ConeModel, path) -> Path:
    path = Path(path)
    path.write_bytes(model_bytes(model))
    return path


def load_model(path, config: ConeConfig | None = None) -> ConeModel:
    """Rebuild a model from an archive.

    ``config`` (optional) is the configuration the caller expects; blocks
    whose stored shape disagrees with it raise :class:`ShapeMismatchError`.
    """
    what = str(path)
    r = _open(path, MODEL_MAGIC, what)
    header = kvconfig.loads(r.string("I"), what)
    try:
        vocab = int(header.pop("vocab_size"))
        K = int(header.pop("n_communities"))
    except KeyError as exc:
        raise ArchiveError(f"{what}: header lacks {exc.args[0]}") from None
    stored = ConeConfig(**kvconfig.coerce(ConeConfig, header, strict=False))
    model = init_model(config or stored, vocab, K)
    params = model.named_parameters()
    (count,) = r.unpack("I")
    seen = set()
    for _ in range(count):
        name, data = _read_block(r)
        if name not in params:
            raise ShapeMismatchError(f"{what}: block {name!r} has no counterpart in the model")
        if params[name].value.shape != data.shape:
            raise ShapeMismatchError(
                f"{what}: block {name!r} has shape {data.shape}, model expects {params[name].value.shape}"
            )
        params[name].value[...] = data
        seen.add(name)
    missing = sorted(set(params) - seen)
    if missing:
        raise ShapeMismatchError(f"{what}: missing blocks {missing}")
    if r.pos != len(r.buf):
        raise ArchiveError(f"{what}: trailing bytes after last block")
    return model


def embedding_bytes(e: EmbeddingMatrix) -> bytes:
    if e.n == 0:
        raise ArchiveError("cannot store an embedding with n = 0")
    ids = e.ids or tuple(str(i) for i in range(e.n))
    out = [EMBEDDING_MAGIC, struct.pack("<III", VERSION, e.p, e.n), _string(e.role, "B")]
    out += [_string(str(v), "I") for v in ids]
    out.append(np.ascontiguousarray(e.values, dtype="<f8").tobytes())
    return _seal(b"".join(out))


def save_embeddings(e: EmbeddingMatrix, path) -> Path:
    path = Path(path)
    path.write_bytes(embedding_bytes(e))
    return path


def load_embeddings(path) -> EmbeddingMatrix:
    what = str(path)
    r = _open(path, EMBEDDING_MAGIC, what)
    p, n = r.unpack("II")
    if n == 0:
        raise ArchiveError(f"{what}: n = 0")
    role = r.string("B")
    ids = tuple(r.string("I") for _ in range(n))
    values = np.frombuffer(r.take(8 * p * n), dtype="<f8").astype(np.float64).reshape(p, n)
    if r.pos != len(r.buf):
        raise ArchiveError(f"{what}: trailing bytes")
    return EmbeddingMatrix(values, role=role, ids=ids)
