"""Counter-based normal streams addressed by (seed, channel, pulse index).

Every noise source gets its own Philox key ``(seed, channel)``. Pulse indices
are grouped into fixed blocks of ``BLOCK`` pulses and the block number is
written into the high word of the Philox counter, so any block can be
regenerated in isolation. Drawing pulses ``[start, stop)`` therefore gives the
same numbers no matter how the full index range is partitioned.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np

BLOCK = 1 << 16
_MASK64 = (1 << 64) - 1


class Channel(IntEnum):
    ALICE = 0
    VACUUM = 1
    EVE_HETERODYNE = 2
    EVE_PREPARE = 3
    TECH = 4
    BOB_LOSS = 5
    EXT_SHOT = 6
    EXT_JITTER = 7
    ELECTRONIC = 8
    HONEST_XI = 9
    LO_VACUUM = 10
    LO_JITTER = 11
    LO_ELECTRONIC = 12


def block_generator(seed: int, channel: int, block: int) -> np.random.Generator:
    bitgen = np.random.Philox(
        key=np.array([seed & _MASK64, int(channel)], dtype=np.uint64),
        counter=np.array([0, 0, 0, block], dtype=np.uint64),
    )
    return np.random.Generator(bitgen)


def normals(seed: int, channel: int, start: int, stop: int) -> np.ndarray:
    """Standard normal draws for pulse indices ``start .. stop-1``."""
    if stop < start or start < 0:
        raise ValueError(f"bad pulse range [{start}, {stop})")
    out = np.empty(stop - start)
    first, last = start // BLOCK, (stop - 1) // BLOCK
    pos = 0
    for b in range(first, last + 1):
        lo = max(start, b * BLOCK) - b * BLOCK
        hi = min(stop, (b + 1) * BLOCK) - b * BLOCK
        draw = block_generator(seed, channel, b).standard_normal(hi)
        out[pos : pos + hi - lo] = draw[lo:hi]
        pos += hi - lo
    return out
