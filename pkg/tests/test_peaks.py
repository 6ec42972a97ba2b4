import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridstates import peaks as pk

SQPI = math.sqrt(math.pi)


def test_unit_converters_round_trip():
    for db in (1.0, 6.6, 11.5, 25.0):
        assert pk.delta_to_db(pk.db_to_delta(db)) == pytest.approx(db, abs=1e-12)
    # input r is defined so that the squeezed-vacuum width e^{-r} carries the dB value
    r = pk.input_r_for_db(14.0)
    assert pk.delta_to_db(math.exp(-r)) == pytest.approx(14.0, abs=1e-12)


def test_flat_distributions():
    one = pk.coefficients(1, [0.0])
    assert np.allclose(one.coeffs, [1.0, 1.0])
    two = pk.coefficients(2, [0.0, 0.0])
    assert np.allclose(two.coeffs, [1.0, 1.0, 1.0, 1.0] / np.sqrt(2))


@given(
    n=st.integers(1, 4),
    data=st.data(),
)
def test_coefficient_invariants(n, data):
    u = data.draw(
        st.lists(st.floats(-0.2, 0.2), min_size=n, max_size=n).map(np.array)
    )
    u[0] = 0.0  # first-round preparation strength is fixed by the scheme
    dist = pk.coefficients(n, u)
    c = dist.coeffs
    assert c.shape == (2**n,)
    assert float(np.sum(c * c)) == pytest.approx(2.0, abs=1e-9)
    assert np.max(np.abs(c - c[::-1])) < 1e-9


def test_single_round_analytics():
    dist = pk.coefficients(1, [0.0])
    assert pk.delta_to_db(pk.delta_p_from_coeffs(dist)) == pytest.approx(6.563244116489955)
    assert pk.perror_from_coeffs(dist) == pytest.approx(0.3910022189557707)


def test_stabilizer_overlap_consistent_with_delta():
    dist = pk.coefficients(3, pk.REFERENCE_U[("shift_error", 3)])
    s = pk.stabilizer_overlap(dist)
    delta = pk.delta_p_from_coeffs(dist)
    assert delta == pytest.approx(math.sqrt(math.log(1.0 / s**2) / (2 * math.pi)))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_optimal_distribution_matches_path_graph_eigenvector(n):
    # closed form: best mirror-symmetric c maximizing the nearest-neighbor
    # overlap is the top eigenvector of the 2^N path graph
    coeffs, value = pk.optimal_distribution(n, "delta_p")
    m = 2**n
    exact = np.sin(np.arange(1, m + 1) * math.pi / (m + 1))
    exact *= math.sqrt(2.0 / np.sum(exact**2))
    assert np.max(np.abs(coeffs - exact)) < 1e-4
    overlap_exact = math.cos(math.pi / (m + 1))
    dist = pk.PeakDistribution(n_rounds=n, coeffs=coeffs)
    assert pk.stabilizer_overlap(dist) == pytest.approx(overlap_exact, abs=1e-8)
    assert value == pytest.approx(pk.delta_to_db(pk.delta_p_from_coeffs(dist)), abs=1e-9)


def test_optimize_u_shift_error_reference_values():
    for n in (1, 2, 3):
        u, _ = pk.optimize_u(n, "shift_error")
        ref = np.asarray(pk.REFERENCE_U[("shift_error", n)])
        assert np.max(np.abs(u - ref)) < 0.002


def test_optimize_u_delta_p_n2_true_optimum():
    # the bundled (delta_p, 2) reference constant 0.093 is kept verbatim but
    # is not a maximizer; the optimizer must find the path-graph value
    u, value = pk.optimize_u(2, "delta_p")
    assert u[1] == pytest.approx(0.0654, abs=0.002)
    assert value == pytest.approx(-10 * math.log10(math.log(1 / math.cos(math.pi / 5) ** 2) / (2 * math.pi)), abs=1e-3)
    ref = pk.coefficients(2, [0.0, 0.093])
    assert value > pk.delta_to_db(pk.delta_p_from_coeffs(ref)) + 0.2


def test_reference_table_present():
    for obj in ("shift_error", "delta_p"):
        for n in (1, 2, 3, 4):
            assert len(pk.REFERENCE_U[(obj, n)]) == n


def test_perror_decreases_with_rounds():
    errs = [
        pk.perror_from_coeffs(pk.coefficients(n, pk.REFERENCE_U[("shift_error", n)]))
        for n in (1, 2, 3, 4)
    ]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_coefficients_rejects_bad_length():
    with pytest.raises(ValueError):
        pk.coefficients(2, [0.1])


def test_distribution_validation():
    with pytest.raises(ValueError):
        pk.PeakDistribution(n_rounds=2, coeffs=np.array([1.0, 1.0, 1.0, 1.0]))
    with pytest.raises(ValueError):
        pk.PeakDistribution(n_rounds=1, coeffs=np.array([math.sqrt(2), 0.0]))
