"""Counter-based, splittable random number streams.

A :class:`RngStream` is a value: it is identified entirely by a 64-bit
``seed`` and a 64-bit ``stream`` id, and every call to :meth:`generator`
returns a generator positioned at the start of that stream.  Identical
``(seed, stream)`` therefore reproduce identical draw sequences on any
platform, and distinct stream ids give statistically independent streams
(they key independent Philox counters).  Streams are cheap to copy and
safe to move between threads; parallel replicate loops should give each
replicate its own substream so that results do not depend on scheduling.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def _mix(*parts: int | str) -> int:
    """Collapse a tag path into a 64-bit stream id (blake2s, platform-free)."""
    h = hashlib.blake2s(digest_size=8)
    for part in parts:
        if isinstance(part, str):
            h.update(b"s" + part.encode("utf-8"))
        else:
            h.update(b"i" + int(part).to_bytes(16, "little", signed=True))
        h.update(b"\x00")
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class RngStream:
    """Handle to one reproducible random stream.

    ``seed`` selects the experiment, ``stream`` the substream within it.
    The underlying bit generator is Philox (counter-based), keyed by the
    pair, so the mapping is stateless and order-independent.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        """Fresh generator at the start of this stream."""
        key = np.array([self.seed & _MASK64, self.stream & _MASK64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, *tags: int | str) -> "RngStream":
        """Derive a child stream; same tags always give the same child."""
        return RngStream(self.seed, _mix(self.stream, *tags))

    def substreams(self, n: int, tag: int | str = "sub") -> list["RngStream"]:
        """``n`` distinct children, indexed 0..n-1 under a common tag."""
        return [self.substream(tag, i) for i in range(n)]
