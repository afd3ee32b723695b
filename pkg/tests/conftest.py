import math

import numpy as np
import pytest

from lglab import Direction, SlotBinding, SpacetimeEvent


@pytest.fixture
def magic_binding():
    """The maximal-violation configuration: angles pi/6 apart."""
    return SlotBinding(
        t1=1.0,
        t2=2.0,
        t3=3.0,
        a=Direction(0.0),
        b=Direction(math.pi / 6),
        c=Direction(math.pi / 3),
    )


@pytest.fixture
def spacelike_geometry():
    return (SpacetimeEvent(0.0, 0.0, 0.0, 0.0), SpacetimeEvent(0.0, 1.0, 0.0, 0.0))


@pytest.fixture
def timelike_geometry():
    return (SpacetimeEvent(0.0, 0.0, 0.0, 0.0), SpacetimeEvent(1.0, 0.0, 0.0, 0.0))


class ArraySource:
    """Unit-uniform source fed from a precomputed array (fast test driver)."""

    def __init__(self, values):
        self._values = np.asarray(values, dtype=np.float64)
        self.position = 0

    def next_uniform(self) -> float:
        u = self._values[self.position]
        self.position += 1
        return float(u)


class CountingSource:
    """Wraps another source and counts how many uniforms were consumed."""

    def __init__(self, inner):
        self.inner = inner
        self.draws = 0

    def next_uniform(self) -> float:
        self.draws += 1
        return self.inner.next_uniform()
