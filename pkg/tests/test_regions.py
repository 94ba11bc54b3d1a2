import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from topoimg.errors import DomainError, ParseError
from topoimg.regions import RegionMask, ShapeTruth, extract, read_mask, score, write_mask
from topoimg.topofield import InspectionGrid, ScalarGrid

G = InspectionGrid([(-0.1, 0.1), (-0.1, 0.1)], (40, 40))
G3 = InspectionGrid([(-0.1, 0.1)] * 3, (10, 10, 10))

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
field_vals = arrays(np.float64, (8, 8), elements=finite)


def td(values, grid=None):
    values = np.asarray(values, float)
    return ScalarGrid(grid or InspectionGrid([(0, 1)] * values.ndim, values.shape), values, "TD")


def te(values):
    values = np.asarray(values, float)
    return ScalarGrid(InspectionGrid([(0, 1)] * values.ndim, values.shape), values, "TE")


def test_lambda_one_is_argmin_with_ties():
    v = np.array([[-2.0, 1.0], [-2.0, -1.0]])
    m = extract(td(v), 1.0)
    assert m.membership.tolist() == [[True, False], [True, False]]
    assert m.extremum == -2.0 and m.mode == "min-side"


def test_constant_negative_field_selects_all():
    for lam in (0.0, 0.3, 1.0):
        assert extract(td(np.full((3, 3), -0.7)), lam).count == 9


def test_errors():
    with pytest.raises(DomainError, match="no negative values"):
        extract(td(np.zeros((2, 2))), 0.5)
    with pytest.raises(DomainError):
        extract(te(np.zeros((2, 2))), 0.5)
    with pytest.raises(DomainError):
        extract(td(-np.ones((2, 2))), 1.2)


@settings(max_examples=100)
@given(field_vals, st.floats(0, 1), st.floats(0, 1))
def test_nesting_td_and_te(v, l1, l2):
    lo, hi = sorted((l1, l2))
    if v.min() < 0:
        a, b = extract(td(v), lo), extract(td(v), hi)
        assert np.all(b.membership <= a.membership)
    w = np.abs(v)
    if w.max() > 0:
        a, b = extract(te(w), lo), extract(te(w), hi)
        assert np.all(b.membership <= a.membership)


@settings(max_examples=100)
@given(field_vals, st.floats(0, 1), st.integers(-30, 30))
def test_positive_scaling_invariance(v, lam, k):
    # power-of-two factors scale without rounding, so ties cannot flip
    c = 2.0**k
    if v.min() < 0:
        assert extract(td(v * c), lam) == extract(td(v), lam)
    w = np.abs(v)
    if w.max() > 0:
        assert extract(te(w * c), lam) == extract(te(w), lam)


def test_nested_masks_from_cli_levels():
    x, y = np.meshgrid(*G.axes(), indexing="ij")
    v = -np.exp(-((x - 0.03) ** 2 + (y + 0.02) ** 2) / 0.02**2) + 0.1 * np.cos(40 * x)
    m7, m9 = extract(td(v, G), 0.7), extract(td(v, G), 0.9)
    assert m9.count < m7.count and np.all(m9.membership <= m7.membership)


def test_score_identity_and_disjoint():
    truth = ShapeTruth([{"type": "disk", "center": [0.03, -0.02], "radius": 0.015}])
    r = truth.rasterize(G)
    m = RegionMask(G, r, 0.7, "min-side", -1.0)
    s = score(m, truth)
    assert s["jaccard"] == 1.0 and s["centroid_offset_m"] == pytest.approx(0.0, abs=1e-15)
    assert s["components"] == 1 and s["measure_unit"] == "m^2"
    assert s["measure"] == pytest.approx(r.sum() * 2.5e-5)
    far = ShapeTruth([{"type": "disk", "center": [-0.05, 0.05], "radius": 0.01}])
    assert score(m, far)["jaccard"] == 0.0


def test_single_cell_vs_point_truth():
    idx = G.nearest_index([0.03, -0.02])
    mem = np.zeros(G.shape, bool)
    mem[idx] = True
    s = score(RegionMask(G, mem, 1.0, "min-side", -1.0), ShapeTruth([{"type": "point", "location": [0.03, -0.02]}]))
    assert s["centroid_offset_m"] <= 0.5 * np.hypot(*G.spacing) + 1e-15


@settings(max_examples=50)
@given(arrays(bool, (6, 6)), arrays(bool, (6, 6)))
def test_jaccard_symmetric(a, b):
    g = InspectionGrid([(0, 1), (0, 1)], (6, 6))
    if not a.any() or not b.any():
        return
    pts = g.points()
    as_boxes = lambda m: ShapeTruth([  # noqa: E731
        {"type": "box", "corner": (p - 1e-9).tolist(), "extents": [2e-9, 2e-9]} for p in pts[m.reshape(-1)]
    ])
    ab = score(RegionMask(g, a, 0.5, "min-side", -1), as_boxes(b))["jaccard"]
    ba = score(RegionMask(g, b, 0.5, "min-side", -1), as_boxes(a))["jaccard"]
    assert ab == ba


def test_components_4_connectivity():
    g = InspectionGrid([(0, 1), (0, 1)], (4, 4))
    mem = np.zeros((4, 4), bool)
    mem[0, 0] = mem[1, 1] = True  # diagonal neighbours are separate
    s = score(RegionMask(g, mem, 0.5, "min-side", -1), ShapeTruth([{"type": "point", "location": [0.1, 0.1]}]))
    assert s["components"] == 2
    mem3 = np.zeros(G3.shape, bool)
    mem3[2, 2, 2] = mem3[2, 2, 3] = mem3[5, 5, 5] = True
    s3 = score(RegionMask(G3, mem3, 0.5, "min-side", -1), ShapeTruth([{"type": "ball", "center": [0, 0, 0], "radius": 0.03}]))
    assert s3["components"] == 2 and s3["measure_unit"] == "m^3"


def test_empty_mask_rejected():
    with pytest.raises(DomainError):
        score(RegionMask(G, np.zeros(G.shape, bool), 0.5, "min-side", -1), ShapeTruth([]))


def test_truth_bounds_check():
    with pytest.raises(DomainError):
        ShapeTruth([{"type": "disk", "center": [0.095, 0], "radius": 0.01}]).check_inside(G)
    ShapeTruth([{"type": "box", "corner": [-0.02, -0.02], "extents": [0.04, 0.01]}]).check_inside(G)
    with pytest.raises(DomainError):
        ShapeTruth([{"type": "blob"}])


def test_mask_file_round_trip(tmp_path):
    x, y = np.meshgrid(*G.axes(), indexing="ij")
    m = extract(td(x + y, G), 0.6)
    write_mask(m, tmp_path / "m.csv")
    back = read_mask(tmp_path / "m.csv")
    assert back == m and back.lam == 0.6 and back.extremum == m.extremum
    (tmp_path / "bad.csv").write_text("x,y\n0,0\n")
    with pytest.raises(ParseError):
        read_mask(tmp_path / "bad.csv")
