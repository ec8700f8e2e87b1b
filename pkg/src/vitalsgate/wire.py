"""Framed byte protocol for the node-to-gateway telemetry link.

Frame layout (20 bytes, big-endian):

    0-1   sync 0xA5 0x5A
    2     protocol version, currently 0x01
    3-4   node_id, u16
    5-6   seq, u16, wraps at 65536
    7     flags bitfield (bit0 buzzer, bit1 led, bit2 sensor fault; 3-7 zero)
    8-9   body temperature, s16, centi-degC
    10-11 ambient temperature, s16, centi-degC
    12-13 humidity, u16, deci-%RH
    14-15 air quality, u16, deci-ppm
    16    heart rate, u8, bpm
    17    reserved, 0x00
    18-19 CRC-16/CCITT-FALSE over bytes 2-17

The decoder is incremental: chunks may split frames anywhere, and any
corruption is reported as a fault, never an exception. After a failed
check the scanner advances one byte past the sync and rescans, so a
sync pattern inside a damaged region costs at most that region.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP

from .model import DeviceFlag

FRAME_LEN = 20
SYNC = b"\xa5\x5a"
PROTOCOL_VERSION = 0x01

_BODY_FMT = ">BHHBhhHHBB"  # bytes 2..17

# -- CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xor-out --


def _build_crc_table() -> tuple[int, ...]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) & 0xFFFF if crc & 0x8000 else (crc << 1) & 0xFFFF
        table.append(crc)
    return tuple(table)


_CRC_TABLE = _build_crc_table()


def crc16(data: bytes, crc: int = 0xFFFF) -> int:
    """CRC-16/CCITT-FALSE ('123456789' -> 0x29B1; empty input -> init)."""
    for b in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[((crc >> 8) ^ b) & 0xFF]
    return crc


# -- Encoding -----------------------------------------------------------------


@dataclass(frozen=True)
class FrameFields:
    """Physical field values carried by one frame (wire precision)."""

    node_id: int
    seq: int
    flags: DeviceFlag
    body_temp: float
    ambient_temp: float
    humidity: float
    air_quality: float
    heart_rate: int


class FrameEncodeError(ValueError):
    """A field value is not representable on the wire; names the field."""

    def __init__(self, field: str, value, detail: str):
        super().__init__(f"{field}={value}: {detail}")
        self.field = field


def _scaled(field: str, value, factor: int, lo: int, hi: int) -> int:
    # Round-half-up on the scaled value; str() keeps float inputs at
    # their shortest decimal, so 73.51 * 10 scales to 735.1, not 735.09...
    raw = (Decimal(str(value)) * factor).quantize(Decimal("1"), rounding=ROUND_HALF_UP)
    scaled = int(raw)
    if not lo <= scaled <= hi:
        raise FrameEncodeError(field, value, f"scaled value {scaled} outside [{lo}, {hi}]")
    return scaled


def encode_frame(
    node_id: int,
    seq: int,
    body_temp,
    ambient_temp,
    humidity,
    air_quality,
    heart_rate: int,
    flags: DeviceFlag = DeviceFlag(0),
) -> bytes:
    """Encode one sample as a complete 20-byte frame.

    Temperatures accept |t| <= 327.67 degC, humidity 0-100 %RH, air
    quality 0-6553.5 ppm, heart rate 0-255 bpm. Fixed-point conversion
    rounds half-up on the scaled value.

    Raises:
        FrameEncodeError: naming the unrepresentable field.
    """
    if not 0 <= node_id < 65536:
        raise FrameEncodeError("node_id", node_id, "must fit u16")
    if not 0 <= seq < 65536:
        raise FrameEncodeError("seq", seq, "must fit u16 (wrap before encoding)")
    if not 0 <= int(heart_rate) <= 255:
        raise FrameEncodeError("heart_rate", heart_rate, "must fit u8")
    body = _scaled("body_temp", body_temp, 100, -32768, 32767)
    ambient = _scaled("ambient_temp", ambient_temp, 100, -32768, 32767)
    hum = _scaled("humidity", humidity, 10, 0, 1000)
    air = _scaled("air_quality", air_quality, 10, 0, 65535)
    flags = DeviceFlag(flags)
    body_bytes = struct.pack(
        _BODY_FMT,
        PROTOCOL_VERSION,
        node_id,
        seq,
        int(flags),
        body,
        ambient,
        hum,
        air,
        int(heart_rate),
        0x00,
    )
    return SYNC + body_bytes + crc16(body_bytes).to_bytes(2, "big")


def _decode_body(body: bytes) -> FrameFields:
    (_, node_id, seq, flags, body_t, amb_t, hum, air, bpm, _) = struct.unpack(_BODY_FMT, body)
    return FrameFields(
        node_id=node_id,
        seq=seq,
        flags=DeviceFlag(flags),
        body_temp=body_t / 100,
        ambient_temp=amb_t / 100,
        humidity=hum / 10,
        air_quality=air / 10,
        heart_rate=bpm,
    )


# -- Incremental decoding ------------------------------------------------------


class FaultKind(enum.Enum):
    BAD_CRC = "bad_crc"
    BAD_VERSION = "bad_version"
    NONZERO_RESERVED = "nonzero_reserved"


@dataclass(frozen=True)
class FrameFault:
    kind: FaultKind
    detail: str


class StreamDecoder:
    """Incremental frame scanner with resynchronization.

    Single-owner: one instance per connection. The retained buffer never
    exceeds two frame lengths; ``discarded_bytes`` and ``crc_failures``
    are monotone counters.
    """

    def __init__(self) -> None:
        self._buf = bytearray()
        self.discarded_bytes = 0
        self.crc_failures = 0
        self.frames_decoded = 0

    def feed(self, chunk: bytes) -> tuple[list[FrameFields], list[FrameFault]]:
        """Consume a chunk; return frames completed and faults found.

        Every well-formed frame in the stream is emitted exactly once,
        in order, regardless of how the stream is chunked.
        """
        self._buf.extend(chunk)
        buf = self._buf
        frames: list[FrameFields] = []
        faults: list[FrameFault] = []
        pos = 0
        n = len(buf)
        while True:
            sync = self._find_sync(pos)
            if sync is None:
                # No full sync pair; a trailing 0xA5 may complete later.
                keep = n - 1 if n > pos and buf[n - 1] == SYNC[0] else n
                self.discarded_bytes += keep - pos
                pos = keep
                break
            self.discarded_bytes += sync - pos
            pos = sync
            if n - pos < FRAME_LEN:
                break  # partial frame: wait for more bytes
            frame = bytes(buf[pos : pos + FRAME_LEN])
            if frame[2] != PROTOCOL_VERSION:
                faults.append(
                    FrameFault(FaultKind.BAD_VERSION, f"version byte 0x{frame[2]:02x}")
                )
                self.discarded_bytes += 1
                pos += 1
                continue
            received = int.from_bytes(frame[18:20], "big")
            computed = crc16(frame[2:18])
            if received != computed:
                faults.append(
                    FrameFault(
                        FaultKind.BAD_CRC,
                        f"received 0x{received:04x}, computed 0x{computed:04x}",
                    )
                )
                self.crc_failures += 1
                self.discarded_bytes += 1
                pos += 1
                continue
            if frame[7] & 0xF8 or frame[17] != 0x00:
                # CRC-valid but nonconforming sender: the boundary is
                # trustworthy, so skip the whole frame.
                faults.append(
                    FrameFault(
                        FaultKind.NONZERO_RESERVED,
                        f"flags 0x{frame[7]:02x}, reserved 0x{frame[17]:02x}",
                    )
                )
                self.discarded_bytes += FRAME_LEN
                pos += FRAME_LEN
                continue
            frames.append(_decode_body(frame[2:18]))
            self.frames_decoded += 1
            pos += FRAME_LEN
        del buf[:pos]
        return frames, faults

    def _find_sync(self, start: int) -> int | None:
        buf = self._buf
        j = buf.find(SYNC[0], start)
        while j != -1 and j + 1 < len(buf):
            if buf[j + 1] == SYNC[1]:
                return j
            j = buf.find(SYNC[0], j + 1)
        return None

    @property
    def buffered(self) -> int:
        return len(self._buf)
