import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from probroute.density import (
    Density,
    InvalidDensityError,
    InvalidFunctionError,
    cell_average_from_function,
    g_alpha_integral,
    g_alpha_pointwise,
    g_f_fraction,
    level_decomposition,
    make_density,
    refine,
    uniform,
)

TWO_LEVEL = make_density([3, 1, 3, 1], 2)

# 10**6-point Monte Carlo of g_1 evaluated from its definition cell by cell
# (numpy default_rng(12345)); see tests for the recipe.
TWO_LEVEL_G1_MC = 0.5388015127417992
TWO_LEVEL_G1_MC_SE = 0.000450610714588667
# scipy.quad of int_0^h z (eta + t sqrt z) dt summed over both levels
TWO_LEVEL_G1_QUAD = 0.5389988801550375


@st.composite
def densities(draw, max_m=8, allow_zero=True):
    m = draw(st.integers(1, max_m))
    lo = 0 if allow_zero else 1
    raw = draw(st.lists(st.integers(lo, 6), min_size=m * m, max_size=m * m).filter(lambda r: sum(r) > 0))
    return make_density(raw, m)


def test_make_density_identity_and_normalization():
    np.testing.assert_array_equal(make_density([1], 1).values, [[1.0]])
    np.testing.assert_allclose(TWO_LEVEL.flat, [1.5, 0.5, 1.5, 0.5], rtol=0, atol=1e-15)


@pytest.mark.parametrize("raw", [[0, 0, 0, 0], [1, -1, 1, 1], [1, 2, 3]])
def test_make_density_rejects_bad_input(raw):
    with pytest.raises(InvalidDensityError):
        make_density(raw, 2)


@given(densities())
def test_density_invariants(d):
    assert abs(d.flat.sum() / d.m**2 - 1) < 1e-12
    assert np.all(d.flat >= 0)
    assert d.min_positive <= d.max_value


def test_json_roundtrip(tmp_path):
    path = tmp_path / "d.json"
    TWO_LEVEL.dump(path)
    assert Density.load(path) == TWO_LEVEL


def test_level_decomposition_examples():
    dec = level_decomposition(uniform())
    assert dec.levels.tolist() == [1.0] and dec.areas.tolist() == [1.0] and dec.below_mass.tolist() == [0.0]
    dec = level_decomposition(TWO_LEVEL)
    np.testing.assert_allclose(dec.levels, [0.5, 1.5])
    np.testing.assert_allclose(dec.areas, [0.5, 0.5])
    np.testing.assert_allclose(dec.below_mass, [0.0, math.sqrt(0.5) * 0.5], atol=1e-15)
    assert dec.below_mass[1] == pytest.approx(0.353553, abs=1e-6)


def test_level_decomposition_distinct_cells():
    d = make_density(np.arange(1, 10), 3)
    np.testing.assert_allclose(level_decomposition(d).areas, np.full(9, 1 / 9))


@given(densities())
def test_level_decomposition_invariants(d):
    dec = level_decomposition(d)
    assert math.isclose(dec.areas.sum(), d.support_area, rel_tol=1e-12)
    assert np.all(np.diff(dec.levels) > 0)
    assert np.all(np.diff(dec.below_mass) >= 0) and np.all(np.diff(dec.below_prob) >= 0)
    assert dec.below_mass[0] == 0.0


def test_g_alpha_uniform():
    assert g_alpha_integral(uniform(), 1) == 0.5
    assert g_alpha_integral(uniform(), 2) == pytest.approx(1 / 3, abs=1e-15)


def test_g_alpha_two_level_against_oracles():
    value = g_alpha_integral(TWO_LEVEL, 1)
    assert abs(value - TWO_LEVEL_G1_MC) < 3 * TWO_LEVEL_G1_MC_SE
    assert value == pytest.approx(TWO_LEVEL_G1_QUAD, abs=1e-14)


def test_g_alpha_rejects_small_alpha():
    with pytest.raises(ValueError):
        g_alpha_integral(uniform(), 0.5)


def _g_point_from_definition(cells, fx, alpha):
    area = 1 / cells.size
    below = np.sum(np.sqrt(cells) * (cells < fx)) * area
    upto = np.sum(np.sqrt(cells) * (cells <= fx)) * area
    h = np.sum(cells == fx) * area
    if h == 0:
        return fx * below**alpha
    return math.sqrt(fx) * (upto ** (alpha + 1) - below ** (alpha + 1)) / ((alpha + 1) * h)


@pytest.mark.parametrize("seed", range(10))
def test_g_alpha_matches_monte_carlo(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 9))
    alpha = [1, 1.5, 2, 3][seed % 4]
    d = make_density(rng.integers(0, 4, size=m * m) + (np.arange(m * m) == 0), m)
    cells = d.flat
    per_cell = np.array([_g_point_from_definition(cells, v, alpha) if v > 0 else 0.0 for v in cells])
    pts = rng.random((200_000, 2))
    k = np.minimum((pts[:, 0] * m).astype(int), m - 1) * m + np.minimum((pts[:, 1] * m).astype(int), m - 1)
    sample = per_cell[k]
    se = sample.std(ddof=1) / math.sqrt(len(sample))
    assert abs(g_alpha_integral(d, alpha) - sample.mean()) <= 3 * se + 1e-12
    # pointwise integrand agrees with the definition too
    np.testing.assert_allclose(g_alpha_pointwise(d, pts[:50, 0], pts[:50, 1], alpha), per_cell[k[:50]], rtol=1e-12)


@pytest.mark.parametrize("area_cells", [1, 2, 3])
def test_g1_constant_on_subregion(area_cells):
    m = 2
    raw = [1] * area_cells + [0] * (m * m - area_cells)
    d = make_density(raw, m)
    A = area_cells / 4
    # sqrt(z) (sqrt(z) A)^2 / 2 with z = 1/A
    assert g_alpha_integral(d, 1) == pytest.approx(math.sqrt(A) / 2, rel=1e-12)
    z = 1 / A
    assert g_alpha_integral(d, 1) == pytest.approx(quad(lambda t: z * t * math.sqrt(z), 0, A)[0], rel=1e-10)


def test_g_f_examples():
    assert g_f_fraction(uniform(), 0.5) == (1.0, 0.5)
    y0, gf = g_f_fraction(TWO_LEVEL, 0.25)
    assert y0 == 1.5 and gf == pytest.approx(0.25 / math.sqrt(1.5), abs=1e-15)
    assert gf == pytest.approx(0.204124, abs=1e-6)
    y0, gf = g_f_fraction(TWO_LEVEL, 0.8)
    assert y0 == 0.5
    assert gf == pytest.approx(math.sqrt(1.5) * 0.5 + 0.05 / math.sqrt(0.5), abs=1e-14)
    assert gf == pytest.approx(0.683083, abs=1e-6)


@pytest.mark.parametrize("kappa", [0, -0.1, 1.01])
def test_g_f_domain(kappa):
    with pytest.raises(ValueError):
        g_f_fraction(uniform(), kappa)


def _g_f_by_enumeration(d, kappa):
    cells = d.flat[d.flat > 0]
    area = 1 / d.m**2
    for y in sorted(set(cells.tolist())):
        tail = np.sum(cells * (cells > y)) * area
        if tail <= kappa + 1e-12:
            above = np.sum(np.sqrt(cells) * (cells > y)) * area
            return y, above + (kappa - tail) / math.sqrt(y)
    raise AssertionError


@given(densities(max_m=5), st.floats(0.01, 1.0))
def test_g_f_matches_enumeration(d, kappa):
    y0, gf = g_f_fraction(d, kappa)
    ey, egf = _g_f_by_enumeration(d, kappa)
    assert y0 == ey
    assert gf == pytest.approx(egf, rel=1e-9)
    assert gf > 0


@given(densities(max_m=5), st.floats(0.02, 0.98), st.floats(0.005, 0.02))
def test_g_f_strictly_increasing(d, kappa, step):
    assert g_f_fraction(d, kappa)[1] < g_f_fraction(d, min(1.0, kappa + step))[1]


def test_g_f_full_fraction_is_total_sqrt_mass():
    d = make_density([5, 1, 2, 0], 2)
    assert g_f_fraction(d, 1.0)[1] == pytest.approx(np.sum(np.sqrt(d.flat)) / 4, rel=1e-12)


def test_refine_examples():
    r = refine(uniform(), 4)
    assert r.m == 4 and np.all(r.values == 1)
    assert g_alpha_integral(r, 1) == 0.5
    assert refine(TWO_LEVEL, 1) is TWO_LEVEL
    assert abs(g_alpha_integral(refine(TWO_LEVEL, 2), 1) - g_alpha_integral(TWO_LEVEL, 1)) < 1e-12
    with pytest.raises(ValueError):
        refine(TWO_LEVEL, 0)


@settings(max_examples=40)
@given(densities(max_m=6), st.integers(2, 4), st.sampled_from([1, 1.5, 2, 3]), st.floats(0.05, 1.0))
def test_refine_invariance(d, beta, alpha, kappa):
    r = refine(d, beta)
    pts = np.random.default_rng(0).random((100, 2))
    np.testing.assert_array_equal(
        d.values[np.minimum((pts[:, 0] * d.m).astype(int), d.m - 1), np.minimum((pts[:, 1] * d.m).astype(int), d.m - 1)],
        r.values[np.minimum((pts[:, 0] * r.m).astype(int), r.m - 1), np.minimum((pts[:, 1] * r.m).astype(int), r.m - 1)],
    )
    assert abs(g_alpha_integral(r, alpha) - g_alpha_integral(d, alpha)) < 1e-12
    y0, gf = g_f_fraction(d, kappa)
    ry0, rgf = g_f_fraction(r, kappa)
    assert ry0 == y0 and abs(rgf - gf) < 1e-12


def test_cell_average_constant_and_indicator():
    for m in (1, 3, 5):
        assert np.allclose(cell_average_from_function(lambda x, y: 7.0 + 0 * x, m).values, 1.0)
    d = cell_average_from_function(lambda x, y: (x < 0.5).astype(float), 4)
    np.testing.assert_array_equal(d.values[:2], 2.0)
    np.testing.assert_array_equal(d.values[2:], 0.0)


@pytest.mark.parametrize("bad", [lambda x, y: x - 0.5, lambda x, y: np.where(x > 0.9, np.inf, 1.0)])
def test_cell_average_rejects_bad_function(bad):
    with pytest.raises(InvalidFunctionError):
        cell_average_from_function(bad, 4)


# sampler(x, y) = x at m = 256 (4x4 lattice); converges to 8*sqrt(2)/21 = 0.538748...
LINEAR_G1_M256 = 0.5387672482303109


def test_cell_average_converges():
    vals = [g_alpha_integral(cell_average_from_function(lambda x, y: x, m, 4), 1) for m in (4, 8, 16, 32)]
    gaps = np.abs(np.diff(vals))
    assert np.all(np.diff(gaps) < 0)
    errs = [abs(v - LINEAR_G1_M256) for v in vals]
    assert np.all(np.diff(errs) < 0)
    assert LINEAR_G1_M256 == pytest.approx(8 * math.sqrt(2) / 21, abs=5e-5)
