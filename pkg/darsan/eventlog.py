"""
Append-only, hash-chained log of protocol events.

Digest: SHA-256 over the canonical bytes of ``[seq, round, kind, payload]``
followed by the ASCII hex digest of the previous event (``"0" * 64`` for the
first event). Canonical bytes use one tag byte per value: ``N`` null,
``T``/``F`` booleans, ``I`` 8-byte big-endian signed integers, ``J``
length-prefixed big-endian integers that do not fit in 8 bytes, ``D``
8-byte big-endian IEEE-754 doubles, ``S`` length-prefixed UTF-8 strings,
``L`` count-prefixed lists and ``M`` count-prefixed maps with keys sorted.

Exported logs are JSON Lines with keys ``seq, round, kind, payload,
prev_hash, hash`` serialized with sorted keys and compact separators.
"""

import hashlib
import json
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from .exceptions import ArgumentError, LogIntegrityError, StateError
from .logger import get_logger

logger = get_logger(__name__)

GENESIS_HASH = "0" * 64
NO_ROUND = -1

_INT64_MIN = -(2**63)
_INT64_MAX = 2**63 - 1


class EventKind(str, Enum):
    """Kinds of state transitions recorded by the engine"""

    REVIEWER_REGISTERED = "ReviewerRegistered"
    ASSET_SUBMITTED = "AssetSubmitted"
    RATING_RECORDED = "RatingRecorded"
    ADMISSION_DECIDED = "AdmissionDecided"
    REVIEW_RECORDED = "ReviewRecorded"
    PREDICTION_RECORDED = "PredictionRecorded"
    ENDORSEMENT_RECORDED = "EndorsementRecorded"
    SALE_OBSERVED = "SaleObserved"
    EXPERTISE_DISTRIBUTED = "ExpertiseDistributed"
    EXPERTS_ROTATED = "ExpertsRotated"
    EXPERTISE_BURNED = "ExpertiseBurned"
    FEE_FORFEITED = "FeeForfeited"
    INCENTIVE_PAID = "IncentivePaid"


def _pair_dtype(value_format: str) -> np.dtype:
    """One [int, value] pair as the tags and big-endian fields _encode writes for it"""
    return np.dtype(
        [
            ("list", "S1"),
            ("size", ">u4"),
            ("key_tag", "S1"),
            ("key", ">i8"),
            ("value_tag", "S1"),
            ("value", value_format),
        ]
    )


# value type -> (tag, packed layout, array dtype)
_PAIR_LAYOUTS = {
    int: (b"I", _pair_dtype(">i8"), np.int64),
    float: (b"D", _pair_dtype(">f8"), np.float64),
}


def _pack_pairs(items: List[Any]) -> Optional[bytes]:
    """
    Canonical bytes of a list made only of [int, int] or only of [int, float]
    pairs; None for any other list.
    """
    if set(map(type, items)) != {list} or set(map(len, items)) != {2}:
        return None
    keys, values = zip(*items)
    value_types = set(map(type, values))
    if set(map(type, keys)) != {int} or len(value_types) != 1:
        return None
    layout = _PAIR_LAYOUTS.get(value_types.pop())
    if layout is None:
        return None
    value_tag, dtype, value_dtype = layout
    try:
        key_array = np.array(keys, dtype=np.int64)
        value_array = np.array(values, dtype=value_dtype)
    except OverflowError:
        return None
    packed = np.empty(len(items), dtype=dtype)
    packed["list"] = b"L"
    packed["size"] = 2
    packed["key_tag"] = b"I"
    packed["key"] = key_array
    packed["value_tag"] = value_tag
    packed["value"] = value_array
    return packed.tobytes()


def _encode(value: Any, out: List[bytes]) -> None:
    if value is None:
        out.append(b"N")
    elif value is True:
        out.append(b"T")
    elif value is False:
        out.append(b"F")
    elif isinstance(value, int):
        if _INT64_MIN <= value <= _INT64_MAX:
            out.append(b"I" + struct.pack(">q", value))
        else:
            size = (value.bit_length() + 8) // 8
            out.append(b"J" + struct.pack(">I", size) + value.to_bytes(size, "big", signed=True))
    elif isinstance(value, float):
        out.append(b"D" + struct.pack(">d", value))
    elif isinstance(value, str):
        raw = value.encode("utf-8")
        out.append(b"S" + struct.pack(">I", len(raw)) + raw)
    elif isinstance(value, (list, tuple)):
        out.append(b"L" + struct.pack(">I", len(value)))
        packed = _pack_pairs(value) if value else None
        if packed is not None:
            out.append(packed)
        else:
            for item in value:
                _encode(item, out)
    elif isinstance(value, dict):
        out.append(b"M" + struct.pack(">I", len(value)))
        for key in sorted(value):
            if not isinstance(key, str):
                raise ArgumentError(f"Payload map keys must be strings, got {key!r}")
            _encode(key, out)
            _encode(value[key], out)
    else:
        raise ArgumentError(f"Unsupported payload value of type {type(value).__name__}")


def canonical_bytes(value: Any) -> bytes:
    """Canonical byte form of a payload value"""
    out: List[bytes] = []
    _encode(value, out)
    return b"".join(out)


def event_digest(
    seq: int, round_id: int, kind: str, payload: Dict[str, Any], prev_hash: str
) -> str:
    """Hash of one event given its predecessor's hash"""
    body = canonical_bytes([seq, round_id, kind, payload])
    return hashlib.sha256(body + prev_hash.encode("ascii")).hexdigest()


class ProtocolEvent(BaseModel):
    """One entry of the hash chain"""

    model_config = ConfigDict(frozen=True)

    seq: int
    round: int
    kind: EventKind
    payload: Dict[str, Any]
    prev_hash: str
    hash: str

    def expected_hash(self) -> str:
        return event_digest(self.seq, self.round, self.kind.value, self.payload, self.prev_hash)

    def to_line(self) -> str:
        """Serialize as one canonical JSON line (no trailing newline)"""
        return json.dumps(
            {
                "seq": self.seq,
                "round": self.round,
                "kind": self.kind.value,
                "payload": self.payload,
                "prev_hash": self.prev_hash,
                "hash": self.hash,
            },
            sort_keys=True,
            separators=(",", ":"),
            allow_nan=False,
            ensure_ascii=True,
        )

    @classmethod
    def from_line(cls, line: str) -> "ProtocolEvent":
        data = json.loads(line)
        if not isinstance(data, dict):
            raise ValueError("event line is not a JSON object")
        if set(data) != {"seq", "round", "kind", "payload", "prev_hash", "hash"}:
            raise ValueError(f"unexpected event fields {sorted(data)}")
        return cls(**data)


@dataclass(frozen=True)
class LogVerification:
    """Outcome of a chain check; truthy when the whole chain verifies"""

    ok: bool
    index: Optional[int] = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok

    def raise_for_failure(self) -> None:
        if not self.ok:
            raise LogIntegrityError(self.index if self.index is not None else -1, self.reason)


class EventLog:
    """
    Hash chain with JSON Lines export.

    Events are held as their canonical lines. With ``keep_events=False``
    only the running head hash and the event count are kept, which is all
    a sweep repetition needs.
    """

    def __init__(self, events: Optional[Iterable[ProtocolEvent]] = None, keep_events: bool = True):
        self.keep_events = keep_events
        self._lines: List[str] = []
        self._count = 0
        self._head = GENESIS_HASH
        for event in events or []:
            self._store(event)

    def _store(self, event: ProtocolEvent) -> None:
        if self.keep_events:
            self._lines.append(event.to_line())
        self._count += 1
        self._head = event.hash

    def _require_events(self) -> None:
        if not self.keep_events:
            raise StateError("This log keeps only its head hash; events were not retained")

    def __len__(self) -> int:
        return self._count

    def __iter__(self) -> Iterator[ProtocolEvent]:
        self._require_events()
        return (ProtocolEvent.from_line(line) for line in self._lines)

    def __getitem__(self, index: int) -> ProtocolEvent:
        self._require_events()
        return ProtocolEvent.from_line(self._lines[index])

    @property
    def head_hash(self) -> str:
        return self._head

    def append(
        self, kind: EventKind, payload: Dict[str, Any], round_id: int = NO_ROUND
    ) -> ProtocolEvent:
        """Extend the chain with a new event"""
        seq = self._count
        prev_hash = self._head
        kind = EventKind(kind)
        digest = event_digest(seq, round_id, kind.value, payload, prev_hash)
        event = ProtocolEvent.model_construct(
            seq=seq, round=round_id, kind=kind, payload=payload, prev_hash=prev_hash, hash=digest
        )
        self._store(event)
        logger.debug(f"Event {seq} {kind.value} (round {round_id})")
        return event

    def verify(self) -> LogVerification:
        self._require_events()
        return verify_log(self)

    def export(self, path: Union[str, Path]) -> Path:
        """Write the log as JSON Lines"""
        self._require_events()
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        with target.open("w", encoding="utf-8", newline="\n") as handle:
            for line in self._lines:
                handle.write(line)
                handle.write("\n")
        logger.info(f"Event log written: {target} ({self._count} events)")
        return target

    @classmethod
    def load(cls, path: Union[str, Path]) -> "EventLog":
        """Read an exported log, failing on the first malformed line"""
        events = []
        with Path(path).open("r", encoding="utf-8", newline="") as handle:
            for index, line in enumerate(handle.read().split("\n")[:-1]):
                try:
                    events.append(ProtocolEvent.from_line(line))
                except (ValueError, TypeError) as e:
                    raise LogIntegrityError(index, f"unparseable line: {e}")
        return cls(events)


def verify_log(events: Iterable[ProtocolEvent]) -> LogVerification:
    """Recompute every hash and check sequence numbers and linkage"""
    prev_hash = GENESIS_HASH
    for index, event in enumerate(events):
        if event.seq != index:
            return LogVerification(False, index, f"sequence {event.seq} where {index} expected")
        if event.prev_hash != prev_hash:
            return LogVerification(False, index, "previous-hash link broken")
        try:
            expected = event.expected_hash()
        except ArgumentError as e:
            return LogVerification(False, index, str(e))
        if event.hash != expected:
            return LogVerification(False, index, "hash mismatch")
        prev_hash = event.hash
    return LogVerification(True)


def verify_log_file(path: Union[str, Path]) -> LogVerification:
    """
    Verify an exported log byte for byte.

    Besides the chain check, each line must be the canonical serialization of
    its own parsed content, so any altered byte is reported at its own line.
    """
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        bad_line = raw[: e.start].count(b"\n")
        return LogVerification(False, bad_line, "invalid UTF-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    else:
        # A log always ends with a newline; a missing one means the last line was altered
        if lines:
            tail = len(lines) - 1
            return LogVerification(False, tail, "missing trailing newline")
    prev_hash = GENESIS_HASH
    for index, line in enumerate(lines):
        try:
            event = ProtocolEvent.from_line(line)
        except (ValueError, TypeError) as e:
            return LogVerification(False, index, f"unparseable line: {e}")
        if event.to_line() != line:
            return LogVerification(False, index, "line is not in canonical form")
        if event.seq != index:
            return LogVerification(False, index, f"sequence {event.seq} where {index} expected")
        if event.prev_hash != prev_hash:
            return LogVerification(False, index, "previous-hash link broken")
        try:
            expected = event.expected_hash()
        except ArgumentError as e:
            return LogVerification(False, index, str(e))
        if event.hash != expected:
            return LogVerification(False, index, "hash mismatch")
        prev_hash = event.hash
    return LogVerification(True)
