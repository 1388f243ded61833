import numpy as np
import pytest
from hypothesis import given, strategies as st

from sbn.nodes import NodeKind, SrdNode, distance, distance_matrix, propagation_matrix

coord = st.floats(-1e3, 1e3, allow_nan=False)


def test_satellite_links_use_orbit_delay():
    nodes = [SrdNode(0, NodeKind.BASE_STATION, (0.0, 0.0, 0.0)),
             SrdNode(1, NodeKind.BASE_STATION, (300.0, 0.0, 0.0)),
             SrdNode(2, NodeKind.SATELLITE, (10.0, 0.0, 0.0))]
    d = propagation_matrix(nodes, 3e8, satellite_delay=1.7e-3)
    assert d[0, 1] == pytest.approx(1e-6)
    assert d[0, 2] == d[2, 1] == 1.7e-3
    assert np.all(np.diag(d) == 0)


def test_node_validation():
    with pytest.raises(ValueError):
        SrdNode(0, NodeKind.UAV, (0, 0, 0), reputation=1.5)
    nd = SrdNode(0, NodeKind.UAV, (1.0, 2.0, 3.0))
    assert nd.home == (1.0, 2.0, 3.0)
    with pytest.raises(ValueError):
        nd.charge(-1.0)


@given(st.lists(st.tuples(coord, coord, coord), min_size=1, max_size=8))
def test_distance_matrix_matches_pairwise(points):
    nodes = [SrdNode(i, NodeKind.GROUND, p) for i, p in enumerate(points)]
    m = distance_matrix(nodes)
    assert np.allclose(m, m.T)
    for i, a in enumerate(nodes):
        for j, b in enumerate(nodes):
            assert m[i, j] == pytest.approx(distance(a, b), abs=1e-9)
