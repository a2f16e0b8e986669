"""Counter-based random streams.

Every stream is a Philox generator keyed by ``(seed, stream_id)``.  Child
streams derive their id by hashing the parent id with a tag, so the random
numbers used by a block of work depend only on the seed and on the block's
position in the computation, never on scheduling or worker count.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream.

    Parameters
    ----------
    seed : int
        64-bit user seed.
    stream_id : int
        64-bit stream identifier.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not (0 <= int(v) <= _MASK64):
                raise ValidationError(f"{name} must be an integer in [0, 2^64)")

    def generator(self):
        """Fresh ``numpy.random.Generator`` positioned at the stream start."""
        key = (int(self.seed) << 64) | int(self.stream_id)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, *tags):
        """Independent sub-stream labelled by ``tags`` (str or int)."""
        h = hashlib.blake2b(digest_size=8)
        h.update(int(self.stream_id).to_bytes(8, "little"))
        for t in tags:
            h.update(b"\x1f")
            h.update(repr(t).encode())
        return RngStream(self.seed, int.from_bytes(h.digest(), "little"))


def as_stream(rng):
    """Coerce an int seed or an ``RngStream`` to an ``RngStream``."""
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng))
    raise ValidationError("rng must be an RngStream or an integer seed")
