import numpy as np
import pytest

from lgcpfusion import io
from lgcpfusion.grid import CovariateRaster, GridDomain, ObserverRegistry, PointPattern, PolylineNetwork, SurveyUnit

from conftest import full_grid


def test_empty_pattern_round_trip(tmp_path):
    p = tmp_path / "p.csv"
    io.write_pattern(p, PointPattern.empty())
    assert p.read_text() == "x,y\n"
    assert len(io.read_pattern(p)) == 0


def test_marked_pattern_round_trip_is_exact(tmp_path):
    g = full_grid(5)
    pts = np.array([[0.1, 0.2], [1.0 / 3.0, 4.999999999999], [np.pi, np.e]])
    pat = PointPattern(pts, [3, 1, 2])
    io.write_pattern(tmp_path / "p.csv", pat)
    back = io.read_pattern(tmp_path / "p.csv", g, ObserverRegistry([1, 2, 3], np.zeros((3, 2)), [1, 1, 1]))
    assert np.array_equal(back.points, pts)
    assert back.marks.tolist() == [3, 1, 2]


def test_point_outside_mask_names_row(tmp_path):
    mask = np.ones((5, 5), dtype=bool)
    mask[4, 4] = False
    g = GridDomain(5, 5, (0, 0), 1.0, mask)
    (tmp_path / "p.csv").write_text("x,y\n0.5,0.5\n4.5,4.5\n")
    with pytest.raises(io.FormatError, match="row 3"):
        io.read_pattern(tmp_path / "p.csv", g)


def test_malformed_rows(tmp_path):
    f = tmp_path / "p.csv"
    f.write_text("x,y\n1,2\nfoo,3\n")
    with pytest.raises(io.FormatError, match="row 3"):
        io.read_pattern(f)
    f.write_text("x,y\n1,2,3\n")
    with pytest.raises(io.FormatError, match="row 2"):
        io.read_pattern(f)
    f.write_text("a,b\n")
    with pytest.raises(io.FormatError, match="header"):
        io.read_pattern(f)
    f.write_text("x,y,observer_id\n1,1,9\n")
    with pytest.raises(io.FormatError, match="unknown observer"):
        io.read_pattern(f, registry=ObserverRegistry([1], [[0, 0]], [1]))


def test_raster_ascii_round_trip(tmp_path):
    mask = np.ones((3, 4), dtype=bool)
    mask[0, 0] = False
    g = GridDomain(4, 3, (10.0, -2.5), 0.5, mask)
    vals = np.random.default_rng(0).normal(size=g.n_active)
    io.write_raster_ascii(tmp_path / "r.asc", g, vals)
    g2, r = io.read_raster_ascii(tmp_path / "r.asc")
    assert g2.same_as(g)
    assert np.array_equal(r.values, vals)


def test_raster_csv_round_trip_and_errors(tmp_path):
    g = full_grid(3)
    vals = np.arange(9) / 7.0
    io.write_raster_csv(tmp_path / "r.csv", g, vals)
    assert np.array_equal(io.read_raster_csv(tmp_path / "r.csv", g).values, vals)
    (tmp_path / "bad.csv").write_text("cell_ix,cell_iy,value\n0,0,1\n9,9,1\n")
    with pytest.raises(io.FormatError, match="row 3"):
        io.read_raster_csv(tmp_path / "bad.csv", g)
    (tmp_path / "short.csv").write_text("cell_ix,cell_iy,value\n0,0,1\n")
    with pytest.raises(io.FormatError, match="no value"):
        io.read_raster_csv(tmp_path / "short.csv", g)


def test_network_units_registry_round_trip(tmp_path):
    net = PolylineNetwork((np.array([[0.0, 1.0], [5.0, 1.5]]), np.array([[0.0, 4.0], [2.0, 4.0], [5.0, 3.0]])),
                          buffer_width=2.0)
    io.write_network_geojson(tmp_path / "n.geojson", net)
    back = io.read_network_geojson(tmp_path / "n.geojson", 2.0)
    assert all(np.array_equal(a, b) for a, b in zip(net.polylines, back.polylines))

    g = full_grid(4)
    units = [SurveyUnit("A", [0, 1, 5]), SurveyUnit("B", [15])]
    io.write_units_csv(tmp_path / "u.csv", g, units)
    ub = io.read_units_csv(tmp_path / "u.csv", g)
    assert [u.id for u in ub] == ["A", "B"]
    assert ub[0].cells.tolist() == [0, 1, 5]

    reg = ObserverRegistry([4, 7], [[1.25, 2.0], [3.0, 0.1]], [5, 1])
    io.write_registry_csv(tmp_path / "o.csv", reg)
    rb = io.read_registry_csv(tmp_path / "o.csv")
    assert rb.ids.tolist() == [4, 7]
    assert np.array_equal(rb.centroids, reg.centroids)
    assert rb.levels.tolist() == [5, 1]


def test_multilinestring_geojson(tmp_path):
    (tmp_path / "m.json").write_text(
        '{"type": "MultiLineString", "coordinates": [[[0, 0], [1, 1]], [[2, 2], [3, 3], [4, 2]]]}')
    net = io.read_network_geojson(tmp_path / "m.json", 1.0)
    assert len(net.polylines) == 2
    (tmp_path / "pt.json").write_text('{"type": "Point", "coordinates": [0, 0]}')
    with pytest.raises(io.FormatError):
        io.read_network_geojson(tmp_path / "pt.json", 1.0)


def test_resample_nearest():
    src = full_grid(2, cell_size=2.0)
    dst = full_grid(4)
    r = io.resample_nearest(src, CovariateRaster("v", [1.0, 2.0, 3.0, 4.0]), dst)
    assert dst.to_array(r.values)[0].tolist() == [1, 1, 2, 2]
    assert dst.to_array(r.values)[3].tolist() == [3, 3, 4, 4]
