import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import laplacian_2d, series_j
from topoimg.dataset import Record, validate
from topoimg.errors import ConvergenceError, DomainError
from topoimg.geometry import FrequencySweep, Layout2D, Layout3D, wavenumber
from topoimg.incident import IsotropicModel, PlaneWaveModel
from topoimg.oracle import (
    BornPointScatterer3D,
    DiskScatterer,
    boundary_traces,
    incident_coefficients,
    mie_solve,
    misfit,
    read_truth,
    scattered_field,
    shapes_from_truth,
    synth_dataset_2d,
    synth_dataset_3d,
    write_truth,
)
from topoimg.specfun import bessel_j
from topoimg.topofield import MaterialSpec

DIEL = MaterialSpec.dielectric(3.0)
COND = MaterialSpec.conducting()
PHI = np.linspace(0, 2 * np.pi, 360, endpoint=False)
LAY = Layout2D()
K4 = wavenumber(4e9)


def plane_x(kappa):
    return PlaneWaveModel(np.array([1.0, 0.0]), kappa, np.zeros(2), 1.0)


def _boundary_points(disk, scale=1.0):
    return np.array(disk.center) + scale * disk.radius * np.stack([np.cos(PHI), np.sin(PHI)], axis=1)


def test_no_contrast_no_scattering():
    disk = DiskScatterer((0.01, 0.02), 0.015, MaterialSpec.dielectric(1.0))
    sol = mie_solve(disk, plane_x(K4), K4)
    assert np.all(sol.b == 0)
    x = np.random.default_rng(0).uniform(0.04, 0.1, (20, 2))
    assert np.all(scattered_field(sol, x) == 0)


def test_dirichlet_first_j0_zero():
    from scipy.optimize import brentq

    root = brentq(lambda z: series_j(0, z), 2.3, 2.5, xtol=1e-14)
    assert root == pytest.approx(2.4048255577, abs=1e-9)
    disk = DiskScatterer((0.0, 0.0), root, COND)
    sol = mie_solve(disk, plane_x(1.0), 1.0)
    assert abs(sol.b[sol.orders == 0][0]) <= 1e-10


@pytest.mark.parametrize("incident", ["plane", "iso"])
@pytest.mark.parametrize("ka", [0.3, 2.0, 8.0])
def test_dirichlet_boundary_residual(incident, ka):
    disk = DiskScatterer((0.02, -0.01), 0.015, COND)
    kappa = ka / disk.radius
    model = plane_x(kappa) if incident == "plane" else IsotropicModel(LAY.emitter_point(3), kappa, 1.0)
    sol = mie_solve(disk, model, kappa)
    out_v, *_ = boundary_traces(sol, PHI)
    assert np.max(np.abs(out_v)) <= 1e-8
    # same check through the direct incident model just outside the boundary
    x = _boundary_points(disk, 1 + 1e-10)
    total = model(x) + scattered_field(sol, x)
    assert np.max(np.abs(total)) <= 1e-8 * max(1.0, np.abs(model(x)).max())


@pytest.mark.parametrize("eps", [1.5, 3.0, 12.0])
@pytest.mark.parametrize("freq", [2e9, 8e9])
def test_transmission_conditions(eps, freq):
    kappa = wavenumber(freq)
    disk = DiskScatterer((0.03, -0.02), 0.015, MaterialSpec.dielectric(eps))
    sol = mie_solve(disk, IsotropicModel(LAY.emitter_point(0), kappa, 1.0), kappa)
    out_v, out_d, in_v, in_d = boundary_traces(sol, PHI)
    assert np.max(np.abs(out_v - in_v)) <= 1e-8
    assert np.max(np.abs(out_d - in_d)) / kappa <= 1e-8
    # pointwise: exterior total vs interior total straddling the boundary
    outer = _boundary_points(disk, 1 + 1e-10)
    inner = _boundary_points(disk, 1 - 1e-10)
    u = IsotropicModel(LAY.emitter_point(0), kappa, 1.0)
    jump = u(outer) + scattered_field(sol, outer) - scattered_field(sol, inner)
    assert np.max(np.abs(jump)) <= 1e-8


def test_incident_expansion_matches_model():
    kappa = wavenumber(6e9)
    center = np.array([0.03, -0.02])
    n = np.arange(-40, 41)
    x = center + np.random.default_rng(1).uniform(-0.02, 0.02, (30, 2))
    d = x - center
    rho, phi = np.hypot(d[:, 0], d[:, 1]), np.arctan2(d[:, 1], d[:, 0])
    for model in (plane_x(kappa), PlaneWaveModel(np.array([0.6, -0.8]), kappa, np.array([0.1, 0.2]), 2 - 1j),
                  IsotropicModel(LAY.emitter_point(7), kappa, 0.5j)):
        A = incident_coefficients(model, center, kappa, n)
        ser = np.sum(A * bessel_j(np.abs(n), kappa * rho[:, None]) * np.where(n < 0, (-1.0) ** n, 1) * np.exp(1j * n * phi[:, None]), axis=1)
        np.testing.assert_allclose(ser, model(x), rtol=0, atol=1e-12 * np.abs(model(x)).max())


def test_scattered_field_satisfies_helmholtz():
    kappa = wavenumber(4e9)
    disk = DiskScatterer((0.0, 0.0), 0.015, DIEL)
    sol = mie_solve(disk, plane_x(kappa), kappa)
    h = 1e-4 * 2 * np.pi / kappa
    for pts, k in ((np.array([[0.05, 0.01], [-0.03, 0.06]]), kappa), (np.array([[0.005, 0.002], [-0.004, -0.006]]), sol.kappa_d)):
        f = lambda p: scattered_field(sol, p)  # noqa: E731
        res = laplacian_2d(f, pts, h) + k**2 * f(pts)
        assert np.max(np.abs(res) / (k**2 * np.abs(f(pts)))) <= 1e-4


def test_boundary_point_rejected():
    disk = DiskScatterer((0.0, 0.0), 0.01, COND)
    sol = mie_solve(disk, plane_x(K4), K4)
    with pytest.raises(DomainError):
        scattered_field(sol, np.array([0.01, 0.0]))


def test_far_field_decay():
    disk = DiskScatterer((0.0, 0.0), 0.015, DIEL)
    sol = mie_solve(disk, plane_x(K4), K4)
    d = np.array([np.cos(0.7), np.sin(0.7)])
    a = abs(scattered_field(sol, 100 / K4 * d))
    b = abs(scattered_field(sol, 400 / K4 * d))
    assert a / b == pytest.approx(2.0, rel=0.05)


@pytest.mark.parametrize("mat", [COND, DIEL, MaterialSpec.dielectric(9.0)])
@pytest.mark.parametrize("ka", [0.5, 3.0, 10.0])
def test_optical_theorem(mat, ka):
    # unit plane wave along +x: A_n = i^n; lossless, so sum |b_n|^2 = -Re sum b_n conj(A_n)
    disk = DiskScatterer((0.0, 0.0), 1.0, mat)
    sol = mie_solve(disk, plane_x(ka), ka)
    np.testing.assert_allclose(sol.incident_coefficients, 1j ** (sol.orders % 4), atol=1e-15)
    ext = -np.real(np.sum(sol.b * np.conj(sol.incident_coefficients)))
    sca = np.sum(np.abs(sol.b) ** 2)
    assert sca == pytest.approx(ext, rel=1e-6)


def test_truncation_criterion_and_monotonicity():
    kappa = wavenumber(8e9)
    disk = DiskScatterer((0.03, -0.02), 0.015, DIEL)
    model = IsotropicModel(LAY.emitter_point(0), kappa, 1.0)
    sol = mie_solve(disk, model, kappa)
    assert max(abs(sol.b[0]), abs(sol.b[-1])) <= 1e-14 * np.abs(sol.b).max()
    more = mie_solve(disk, model, kappa, n_max=sol.n_max + 5)
    x = np.vstack([LAY.receiver_points(0), np.array([[0.03, -0.02]]) + 0.005])
    a, b = scattered_field(sol, x), scattered_field(more, x)
    assert np.max(np.abs(a - b) / np.abs(b)) <= 1e-10


def test_truncation_cap():
    disk = DiskScatterer((0.0, 0.0), 1.0, COND)
    with pytest.raises(ConvergenceError):
        mie_solve(disk, plane_x(60.0), 60.0)


# synthesis


def test_zero_disks():
    d = synth_dataset_2d([], LAY, FrequencySweep.from_ghz([3]))
    assert all(np.array_equal(r.incident, r.total) for r in d)
    assert validate(d) == []


def test_synthesis_deterministic():
    disk = DiskScatterer((0.01, 0.0), 0.01, DIEL)
    sw = FrequencySweep.from_ghz([2])
    a = synth_dataset_2d([disk], LAY, sw)
    b = synth_dataset_2d([disk], LAY, sw)
    assert a == b and a.meta["id"] == b.meta["id"]
    n1 = synth_dataset_2d([disk], LAY, sw, noise=0.1, seed=5)
    n2 = synth_dataset_2d([disk], LAY, sw, noise=0.1, seed=5)
    n3 = synth_dataset_2d([disk], LAY, sw, noise=0.1, seed=6)
    assert n1 == n2 and not n1 == n3
    assert n1.meta["seed"] == 5 and n1.meta["noise"] == 0.1


def test_noise_level_relative_to_rms():
    disk = DiskScatterer((0.01, 0.0), 0.01, DIEL)
    sw = FrequencySweep.from_ghz([2])
    clean = synth_dataset_2d([disk], LAY, sw)
    noisy = synth_dataset_2d([disk], LAY, sw, noise=0.2, seed=1)
    res = np.concatenate([r.residuals for r in clean])
    diff = np.concatenate([a.total - b.total for a, b in zip(noisy, clean)])
    rms = np.sqrt(np.mean(np.abs(res) ** 2))
    assert np.sqrt(np.mean(np.abs(diff) ** 2)) == pytest.approx(0.2 * rms, rel=0.1)


def test_disk_intersecting_antenna():
    with pytest.raises(DomainError):
        synth_dataset_2d([DiskScatterer((0.72, 0.0), 0.05, COND)], LAY, FrequencySweep.from_ghz([2]))


def test_dirichlet_residuals_nonzero_everywhere():
    d = synth_dataset_2d([DiskScatterer((0.0, 0.0), 0.015, COND)], LAY, FrequencySweep.from_ghz([4]))
    assert np.all(np.abs(d.get(0, 0).residuals) > 0)
    assert d.get(0, 0).residuals.size == 49


def test_multi_disk_flagged():
    disks = [DiskScatterer((0.03, 0.0), 0.01, DIEL), DiskScatterer((-0.03, 0.0), 0.01, COND)]
    d = synth_dataset_2d(disks, Layout2D(emitter_azimuths=(0.0,)), FrequencySweep.from_ghz([2]))
    assert d.meta["approximate"] is True and len(d.meta["truth"]) == 2


LAY3 = Layout3D(emitter_azimuths=(40.0, 360.0), emitter_altitudes=(90.0, 54.0))


def test_3d_zero_scatterers_and_tp():
    d = synth_dataset_3d([], LAY3, FrequencySweep.from_ghz([3]))
    assert all(np.array_equal(r.incident, r.total) for r in d)
    with pytest.raises(DomainError):
        synth_dataset_3d([], LAY3, FrequencySweep.from_ghz([3]), polarization="TP")


def test_3d_born_linearity():
    sw = FrequencySweep.from_ghz([3])
    one = synth_dataset_3d([BornPointScatterer3D((0.02, 0.0, 0.01), 0.03)], LAY3, sw)
    two = synth_dataset_3d([BornPointScatterer3D((0.02, 0.0, 0.01), 0.06)], LAY3, sw)
    for a, b in zip(one, two):
        np.testing.assert_allclose(b.residuals, 2 * a.residuals, rtol=1e-14)
    with pytest.raises(DomainError):
        BornPointScatterer3D((0, 0, 0), 0.2)


def test_3d_origin_symmetry():
    d = synth_dataset_3d([BornPointScatterer3D((0.0, 0.0, 0.0), 0.05)], LAY3, FrequencySweep.from_ghz([3]))
    e = LAY3.emitter_index(40.0, 90.0)
    mag = np.abs(d.get(e, 0).residuals)
    assert mag.size == 27
    assert np.max(np.abs(mag - mag[0])) <= 1e-12 * mag[0]


def test_misfit_examples():
    rec = Record(0, 0, [0, 1], [0, 0], [1 + 1j, 2])
    assert misfit(rec, [1 + 1j, 2]) == 0
    assert misfit(Record(0, 0, [0], [0], [1j]), [1 + 1j]) == 0.5
    assert misfit(rec, [2 + 1j, 2 + 1j]) == 1.0
    with pytest.raises(DomainError):
        misfit(rec, [0])


@settings(max_examples=30)
@given(st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False), min_size=1, max_size=20))
def test_misfit_nonnegative_and_zero_on_match(vals):
    rec = Record(0, 0, np.arange(len(vals)), np.zeros(len(vals)), vals)
    assert misfit(rec, vals) == 0
    assert misfit(rec, np.zeros(len(vals))) >= 0


def test_truth_round_trip(tmp_path):
    shapes = [DiskScatterer((0.01, 0.02), 0.015, DIEL), DiskScatterer((0, 0), 0.01, COND),
              BornPointScatterer3D((0.01, 0, 0), 0.05 - 0.01j)]
    write_truth(tmp_path / "t.json", shapes)
    back = shapes_from_truth(read_truth(tmp_path / "t.json"))
    assert back == shapes
