import numpy as np
import pytest

from lgcpfusion.grid import unit_membership
from lgcpfusion.landscape import LANDUSE_CLASSES, load_landscape, save_landscape


def test_desk_landscape_structure(desk):
    g = desk.grid
    assert (g.nx, g.ny, g.cell_size) == (40, 40, 4.0)
    assert len(desk.units) == 8
    assert np.all(unit_membership(g, desk.units) >= 0)
    for name in ("CLOUDCOVER", "ELEVGRADIENT", "DISTANCE"):
        v = desk.cov(name)
        assert desk.covariates[name].standardized
        assert abs(v.mean()) < 1e-12 and v.std() == pytest.approx(1.0)
    ind = np.column_stack([desk.cov(n) for n in LANDUSE_CLASSES])
    assert set(np.unique(ind)) <= {0.0, 1.0}
    assert np.all(ind.sum(axis=1) <= 1)
    assert all(ind[:, k].any() for k in range(len(LANDUSE_CLASSES)))
    assert len(desk.registry) == 10
    lo, hi = g.bounds[:2], g.bounds[2:]
    assert np.all((desk.registry.centroids > lo) & (desk.registry.centroids < hi))


def test_design_matrices(desk):
    X = desk.design(("CLOUDCOVER",))
    assert X.shape == (desk.grid.n_active, 2) and np.all(X[:, 0] == 1)
    Z = desk.unit_design(("ELEVGRADIENT", "CLOUDCOVER"))
    u = desk.units[3]
    assert Z[3, 2] == pytest.approx(desk.cov("CLOUDCOVER")[u.cells].mean())
    with pytest.raises(KeyError, match="available"):
        desk.design(("RAINFALL",))


def test_landscape_file_round_trip(desk, tmp_path):
    spec = save_landscape(desk, tmp_path)
    back = load_landscape(spec, tmp_path)
    assert back.grid.same_as(desk.grid)
    for name, r in desk.covariates.items():
        assert np.array_equal(back.cov(name), r.values)
    assert [u.id for u in back.units] == [u.id for u in desk.units]
    assert all(np.array_equal(a.cells, b.cells) for a, b in zip(back.units, desk.units))
    assert np.array_equal(back.registry.centroids, desk.registry.centroids)


def test_network_landscape_from_files(tmp_path):
    from lgcpfusion import io
    from lgcpfusion.grid import ObserverRegistry, PolylineNetwork
    net = PolylineNetwork((np.array([[0.0, 5.0], [20.0, 5.0]]), np.array([[10.0, 0.0], [10.0, 20.0]])), 2.0)
    io.write_network_geojson(tmp_path / "net.geojson", net)
    io.write_registry_csv(tmp_path / "obs.csv", ObserverRegistry([1], [[5.0, 5.0]], [2]))
    # a coarse covariate raster resampled onto the fine grid by nearest cell
    from lgcpfusion.grid import GridDomain
    coarse = GridDomain(2, 2, (0.0, 0.0), 10.0, np.ones((2, 2), bool))
    io.write_raster_ascii(tmp_path / "c.asc", coarse, [1.0, 2.0, 3.0, 4.0])
    spec = {"kind": "files", "network": "net.geojson", "buffer_width": 2.0, "bounds": [0, 0, 20, 20],
            "cell_size": 1.0, "covariates": {"C": "c.asc"}, "standardize": ["C"], "observers": "obs.csv"}
    land = load_landscape(spec, tmp_path)
    assert len(land.units) == 2
    assert land.covariates["C"].standardized
    raw = load_landscape({**spec, "standardize": []}, tmp_path).cov("C")
    assert set(np.unique(raw)) == {1.0, 2.0, 3.0, 4.0}
    with pytest.raises(ValueError):
        load_landscape({"kind": "cloud"})
