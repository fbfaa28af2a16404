"""Counter-based random streams.

Every trajectory owns a :class:`Stream` keyed by ``(seed, trajectory_index)``.
The underlying bit generator is Philox-4x64, whose output depends only on the
key and the counter, so a trajectory can be regenerated in isolation on any
platform and independently of how many other trajectories ran before it.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


class Stream:
    """Uniform draws in [0, 1) with a running draw counter.

    ``draw(n)`` and ``n`` successive ``draw()`` calls return identical values.
    """

    __slots__ = ("seed", "index", "count", "_gen")

    def __init__(self, seed: int, index: int = 0):
        self.seed = int(seed) & _MASK64
        self.index = int(index) & _MASK64
        self.count = 0
        self._gen = np.random.Generator(np.random.Philox(key=[self.seed, self.index]))

    def uniform(self) -> float:
        self.count += 1
        return float(self._gen.random())

    def draw(self, n: int) -> np.ndarray:
        self.count += n
        return self._gen.random(n)

    def skip(self, n: int) -> None:
        """Consume ``n`` draws without using them."""
        if n:
            self.draw(n)


def trajectory_stream(seed: int, trajectory_index: int) -> Stream:
    return Stream(seed, trajectory_index)
