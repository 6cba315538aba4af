"""Public-channel transcript of a session and its binary encoding.

Each record is little-endian::

    u32 record length (bytes that follow) | u32 sequence | u8 sender | u8 tag | payload
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .decoder import GroupId

ALL_GROUPS = 0xFFFFFFFF
_POOLED = -(2 ** 31)
_HEADER = struct.Struct("<IIBB")


class Sender(IntEnum):
    ALICE = 0
    BOB = 1


class Tag(IntEnum):
    BASIS = 1
    PAIR = 2
    GROUP = 3
    SYNDROME = 4
    PA_SEED = 5


@dataclass(eq=False)
class BasisAnnounce:
    bases: np.ndarray  # 0 = x, 1 = p

    tag = Tag.BASIS

    def encode(self) -> bytes:
        bits = np.packbits(np.asarray(self.bases, dtype=np.uint8), bitorder="little")
        return struct.pack("<I", len(self.bases)) + bits.tobytes()

    @classmethod
    def decode(cls, buf: bytes):
        (n,) = struct.unpack_from("<I", buf)
        bits = np.unpackbits(np.frombuffer(buf, np.uint8, offset=4), count=n, bitorder="little")
        return cls(bits)

    def describe(self) -> str:
        return f"{len(self.bases)} bases, {int(np.sum(self.bases))} p"


@dataclass(eq=False)
class PairAnnounce:
    lefts: np.ndarray
    separation: int

    tag = Tag.PAIR

    def labels(self) -> list[str]:
        return [f"{l}:{l + self.separation}" for l in self.lefts]

    def encode(self) -> bytes:
        arr = np.empty((len(self.lefts), 2), dtype="<i4")
        arr[:, 0] = self.lefts
        arr[:, 1] = np.asarray(self.lefts) + self.separation
        return struct.pack("<I", len(self.lefts)) + arr.tobytes()

    @classmethod
    def decode(cls, buf: bytes):
        (n,) = struct.unpack_from("<I", buf)
        arr = np.frombuffer(buf, "<i4", count=2 * n, offset=4).reshape(n, 2)
        sep = int(arr[0, 1] - arr[0, 0]) if n else 0
        return cls(arr[:, 0].astype(np.int64), sep)

    def describe(self) -> str:
        head = ", ".join(self.labels()[:4])
        return f"{len(self.lefts)} pair labels [{head}{', ...' if len(self.lefts) > 4 else ''}]"


_GROUP_REC = np.dtype([("pair", "<i4"), ("bin", "<u2"), ("bucket", "<u2")])
_KEPT_REC = np.dtype([("index", "<u4"), ("group", "<u4")])


@dataclass(eq=False)
class GroupAnnounce:
    groups: list[GroupId]
    kept_index: np.ndarray   # pulse index (within key pulses) of each kept bit
    group_index: np.ndarray  # position in ``groups`` of each kept bit

    tag = Tag.GROUP

    def encode(self) -> bytes:
        table = np.empty(len(self.groups), dtype=_GROUP_REC)
        table["pair"] = [_POOLED if g.pair is None else g.pair for g in self.groups]
        table["bin"] = [g.ber_bin for g in self.groups]
        table["bucket"] = [g.bucket for g in self.groups]
        kept = np.empty(len(self.kept_index), dtype=_KEPT_REC)
        kept["index"] = self.kept_index
        kept["group"] = self.group_index
        return (struct.pack("<I", len(table)) + table.tobytes()
                + struct.pack("<I", len(kept)) + kept.tobytes())

    @classmethod
    def decode(cls, buf: bytes):
        (ng,) = struct.unpack_from("<I", buf)
        table = np.frombuffer(buf, _GROUP_REC, count=ng, offset=4)
        off = 4 + ng * _GROUP_REC.itemsize
        (nk,) = struct.unpack_from("<I", buf, off)
        kept = np.frombuffer(buf, _KEPT_REC, count=nk, offset=off + 4)
        groups = [GroupId(None if int(r["pair"]) == _POOLED else int(r["pair"]),
                          int(r["bin"]), int(r["bucket"])) for r in table]
        return cls(groups, kept["index"].astype(np.int64), kept["group"].astype(np.int64))

    def describe(self) -> str:
        return f"{len(self.groups)} groups, {len(self.kept_index)} kept bits"


@dataclass
class SyndromeInfo:
    group: int           # index into the announced group table, or ALL_GROUPS
    leaked_bits: float
    digest: int | None = None

    tag = Tag.SYNDROME
    _fmt = struct.Struct("<IdBQ")

    def encode(self) -> bytes:
        has = self.digest is not None
        return self._fmt.pack(self.group, self.leaked_bits, int(has), self.digest if has else 0)

    @classmethod
    def decode(cls, buf: bytes):
        group, leaked, has, digest = cls._fmt.unpack(buf)
        return cls(group, leaked, digest if has else None)

    def describe(self) -> str:
        target = "all" if self.group == ALL_GROUPS else f"group {self.group}"
        dig = "" if self.digest is None else f" digest={self.digest:016x}"
        return f"{target} leaked={self.leaked_bits:.3f}{dig}"


@dataclass
class PASeed:
    seed: int
    length: int

    tag = Tag.PA_SEED
    _fmt = struct.Struct("<QI")

    def encode(self) -> bytes:
        return self._fmt.pack(self.seed, self.length)

    @classmethod
    def decode(cls, buf: bytes):
        return cls(*cls._fmt.unpack(buf))

    def describe(self) -> str:
        return f"seed={self.seed} length={self.length}"


_BODIES = {cls.tag: cls for cls in (BasisAnnounce, PairAnnounce, GroupAnnounce, SyndromeInfo, PASeed)}


@dataclass
class Message:
    seq: int
    sender: Sender
    body: object


@dataclass
class Transcript:
    messages: list[Message] = field(default_factory=list)

    def append(self, sender: Sender, body) -> Message:
        msg = Message(len(self.messages), Sender(sender), body)
        self.messages.append(msg)
        return msg

    def __iter__(self):
        return iter(self.messages)

    def __len__(self):
        return len(self.messages)

    def of_type(self, cls):
        return [m.body for m in self.messages if isinstance(m.body, cls)]

    def leaked_bits(self) -> float:
        return sum(b.leaked_bits for b in self.of_type(SyndromeInfo))

    def to_bytes(self) -> bytes:
        out = bytearray()
        for m in self.messages:
            payload = m.body.encode()
            out += _HEADER.pack(_HEADER.size - 4 + len(payload), m.seq, int(m.sender),
                                int(m.body.tag))
            out += payload
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Transcript":
        t = cls()
        off = 0
        while off < len(data):
            length, seq, sender, tag = _HEADER.unpack_from(data, off)
            start = off + _HEADER.size
            end = off + 4 + length
            if end > len(data):
                raise ValueError("truncated transcript record")
            if seq != len(t.messages):
                raise ValueError(f"out-of-order record {seq}")
            body = _BODIES[Tag(tag)].decode(data[start:end])
            t.messages.append(Message(seq, Sender(sender), body))
            off = end
        return t

    def dump(self) -> str:
        lines = []
        for m in self.messages:
            lines.append(f"{m.seq:6d} {m.sender.name:<5} {type(m.body).__name__:<14} "
                         f"{m.body.describe()}")
        return "\n".join(lines)
