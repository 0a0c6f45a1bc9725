"""Versioned byte container: header, hyper-latent stream, per-slice latent streams.

Layout (big-endian):
    magic "ICSP" | version u8 | model_id 8B | width u32 | height u32
    | z_len u32 | z bytes | slice_count u8 | per slice: len u32 + bytes
Width/height are the true image dims; the padded coding grid is derived.
"""

import struct
from dataclasses import dataclass

MAGIC = b"ICSP"
VERSION = 1

__all__ = ["MAGIC", "VERSION", "ContainerError", "BitstreamContainer"]


class ContainerError(ValueError):
    pass


@dataclass
class BitstreamContainer:
    model_id: bytes
    width: int
    height: int
    z_stream: bytes
    y_streams: list
    version: int = VERSION

    def __post_init__(self):
        if len(self.model_id) != 8:
            raise ContainerError("model_id must be 8 bytes")
        if len(self.y_streams) > 255:
            raise ContainerError("too many slices")

    def to_bytes(self) -> bytes:
        parts = [
            MAGIC,
            struct.pack(">B", self.version),
            self.model_id,
            struct.pack(">II", self.width, self.height),
            struct.pack(">I", len(self.z_stream)),
            self.z_stream,
            struct.pack(">B", len(self.y_streams)),
        ]
        for stream in self.y_streams:
            parts.append(struct.pack(">I", len(stream)))
            parts.append(stream)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "BitstreamContainer":
        view = memoryview(blob)

        def take(n):
            nonlocal view
            if len(view) < n:
                raise ContainerError("container truncated")
            chunk, view = view[:n], view[n:]
            return bytes(chunk)

        if take(4) != MAGIC:
            raise ContainerError("bad magic")
        (version,) = struct.unpack(">B", take(1))
        if version != VERSION:
            raise ContainerError(f"unknown container version {version}")
        model_id = take(8)
        width, height = struct.unpack(">II", take(8))
        (z_len,) = struct.unpack(">I", take(4))
        z_stream = take(z_len)
        (slice_count,) = struct.unpack(">B", take(1))
        y_streams = []
        for _ in range(slice_count):
            (n,) = struct.unpack(">I", take(4))
            y_streams.append(take(n))
        if len(view):
            raise ContainerError(f"{len(view)} trailing bytes after declared segments")
        return cls(model_id=model_id, width=width, height=height, z_stream=z_stream, y_streams=y_streams, version=version)

    @property
    def num_bytes(self):
        return len(self.to_bytes())

    @property
    def num_bits(self):
        return 8 * self.num_bytes
