"""Corpus and paragraph-embedding interchange files shared with the kalm binary.

Embedding index layout, little-endian:
    b"KALMEMBX" | u32 version (1) | u32 d_embed | u32 count
    count x { u32 key_bytes | key (UTF-8) | u64 absolute offset }
    one tensor per key at its offset:
        b"KALMTNSR" | u32 rank | rank x u32 dims | float32 payload

Key `doc_id` holds the augmented paragraph rows; `doc_id#raw` holds the rows
of the unaugmented paragraphs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import re
import struct
import sys
from pathlib import Path

import numpy as np

INDEX_MAGIC = b"KALMEMBX"
TENSOR_MAGIC = b"KALMTNSR"
SEPARATOR = "[ENT]"
_WHITESPACE = re.compile(r"[ \t\n\v\f\r]+")


def raw_key(doc_id: str) -> str:
    return doc_id + "#raw"


def read_corpus(path: Path) -> list[dict]:
    docs = []
    with open(path, encoding="utf-8") as f:
        for number, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                doc["doc_id"], doc["label"], doc["paragraphs"]
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise ValueError(f"{path}: line {number}: {e}") from e
            docs.append(doc)
    return docs


def read_entity_texts(path: Path) -> dict[int, str]:
    """Entity id -> description, or the name when the description is empty."""
    texts = {}
    with open(path, encoding="utf-8") as f:
        for number, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t", 3)
            if len(fields) != 4 or fields[0] not in ("E", "R"):
                raise ValueError(f"{path}: line {number}: expected KIND<TAB>id<TAB>name<TAB>description")
            if fields[0] == "E":
                texts[int(fields[1])] = fields[3] or fields[2]
    return texts


def augment(tokens: list[str], mentions: list[int], entity_texts: dict[int, str]) -> list[str]:
    out = list(tokens)
    seen = set()
    for e in mentions:
        if e in seen:
            continue
        seen.add(e)
        out.append(SEPARATOR)
        out.extend(t for t in _WHITESPACE.split(entity_texts[e]) if t)
    return out


def _tensor_bytes(block: np.ndarray) -> bytes:
    block = np.ascontiguousarray(block, dtype="<f4")
    head = TENSOR_MAGIC + struct.pack("<I", block.ndim) + struct.pack(f"<{block.ndim}I", *block.shape)
    return head + block.tobytes()


def write_index(path: Path, dim: int, blocks: dict[str, np.ndarray]) -> None:
    keys = sorted(blocks)
    for k in keys:
        b = blocks[k]
        if b.ndim != 2 or b.shape[1] != dim or b.shape[0] == 0:
            raise ValueError(f"block {k!r} has shape {b.shape}, expected (n, {dim})")
    payloads = [_tensor_bytes(blocks[k]) for k in keys]
    encoded = [k.encode("utf-8") for k in keys]
    offset = 8 + 12 + sum(4 + len(k) + 8 for k in encoded)
    out = bytearray(INDEX_MAGIC + struct.pack("<III", 1, dim, len(keys)))
    for k, p in zip(encoded, payloads):
        out += struct.pack("<I", len(k)) + k + struct.pack("<Q", offset)
        offset += len(p)
    for p in payloads:
        out += p
    tmp = Path(str(path) + ".tmp")
    tmp.write_bytes(bytes(out))
    tmp.replace(path)


def read_index(path: Path) -> tuple[int, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if data[:8] != INDEX_MAGIC:
        raise ValueError(f"{path}: not an embedding index file")
    version, dim, count = struct.unpack_from("<III", data, 8)
    if version != 1:
        raise ValueError(f"{path}: unsupported version {version}")
    pos, index = 20, []
    for _ in range(count):
        (n,) = struct.unpack_from("<I", data, pos)
        key = data[pos + 4 : pos + 4 + n].decode("utf-8")
        (offset,) = struct.unpack_from("<Q", data, pos + 4 + n)
        index.append((key, offset))
        pos += 4 + n + 8
    blocks = {}
    for key, offset in index:
        if data[offset : offset + 8] != TENSOR_MAGIC:
            raise ValueError(f"{path}: bad tensor magic for {key!r}")
        (rank,) = struct.unpack_from("<I", data, offset + 8)
        shape = struct.unpack_from(f"<{rank}I", data, offset + 12)
        start = offset + 12 + 4 * rank
        blocks[key] = np.frombuffer(data, dtype="<f4", count=int(np.prod(shape)), offset=start).reshape(shape)
    return dim, blocks


def seeded_rows(texts: list[list[str]], dim: int) -> np.ndarray:
    """One deterministic unit-scale row per token list, keyed by its content.

    Placeholder for an encoder; lets the file format be exercised end to end.
    """
    rows = []
    for tokens in texts:
        digest = hashlib.sha256(" ".join(tokens).encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        rows.append(rng.standard_normal(dim))
    return np.stack(rows)


def _cmd_augment(args: argparse.Namespace) -> int:
    texts = read_entity_texts(args.descriptions)
    for doc in read_corpus(args.corpus):
        for i, p in enumerate(doc["paragraphs"]):
            sys.stdout.write(f"{doc['doc_id']}\t{i}\t{' '.join(augment(p['tokens'], p['mentions'], texts))}\n")
    return 0


def _cmd_seeded(args: argparse.Namespace) -> int:
    texts = read_entity_texts(args.descriptions)
    blocks = {}
    for doc in read_corpus(args.corpus):
        ps = doc["paragraphs"]
        blocks[doc["doc_id"]] = seeded_rows([augment(p["tokens"], p["mentions"], texts) for p in ps], args.dim)
        blocks[raw_key(doc["doc_id"])] = seeded_rows([p["tokens"] for p in ps], args.dim)
    write_index(args.out, args.dim, blocks)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    a = sub.add_parser("augment", help="print doc_id, paragraph index and augmented tokens")
    a.add_argument("--corpus", type=Path, required=True)
    a.add_argument("--descriptions", type=Path, required=True)
    a.set_defaults(run=_cmd_augment)
    s = sub.add_parser("seeded", help="write an index of content-seeded rows")
    s.add_argument("--corpus", type=Path, required=True)
    s.add_argument("--descriptions", type=Path, required=True)
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(run=_cmd_seeded)
    args = parser.parse_args(argv)
    try:
        return args.run(args)
    except (OSError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
