"""Counter-based random streams.

Every random quantity in the package is a row of an unbounded uniform
matrix keyed by ``(stream, seed)``.  Row ``r`` occupies a fixed block of
Philox counters, so any row can be regenerated on its own and chunked or
parallel generation reproduces the serial result bit for bit.
"""

import numpy as np

DESIGN_STREAM = 1
POSITIVE_STREAM = 2
RANDOM_DESIGN_STREAM = 3
DESIGN_POSITIVE_STREAM = 4


def uniform_rows(stream, seed, width, start, stop):
    """Rows ``start:stop`` of the ``(stream, seed)`` matrix, ``width`` columns."""
    blocks = -(-width // 4)  # Philox4x64 yields four doubles per counter step
    bitgen = np.random.Philox(key=(stream << 64) | seed)
    if start:
        bitgen.advance(start * blocks)
    out = np.random.Generator(bitgen).random((stop - start, 4 * blocks))
    return out[:, :width]


def chunk_bounds(total, chunk):
    return [(a, min(a + chunk, total)) for a in range(0, total, chunk)]
