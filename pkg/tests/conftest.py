import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def brute_isomorphic(a, b, ra=(), rb=(), fa=None, fb=None):
    """Isomorphism over all m! maps, root i -> root i, equal feature rows."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    m = a.shape[0]
    if b.shape[0] != m or a.sum() != b.sum() or len(ra) != len(rb):
        return False
    for perm in itertools.permutations(range(m)):
        p = np.array(perm)
        if any(p[x] != y for x, y in zip(ra, rb)):
            continue
        if fa is not None and not np.array_equal(fa, fb[p]):
            continue
        if np.array_equal(a, b[np.ix_(p, p)]):
            return True
    return False


@pytest.fixture
def tmp_edges(tmp_path):
    def write(lines, name="g.el"):
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n")
        return path

    return write
