import math

import numpy as np
import pytest

from bcopt.circulant import block_diagonalize
from bcopt.ct import (
    Annulus,
    Disc,
    Ellipse,
    PolarGrid,
    default_phantom,
    detector_offsets,
    make_phantom,
    make_problem,
    make_projector,
    make_smoothing_operator,
    polar_to_cartesian,
    write_pgm,
)
from bcopt.model import QuadraticModel, ReconModel
from bcopt.ops import ConfigurationError


def test_single_pixel_single_ray_chord():
    grid = PolarGrid(n_r=1, n_theta=1, r_max=1.0)
    a = make_projector(grid, n_det=1)
    val = a.apply(np.ones(1))[0]
    # one ray through the whole disc: chord length at the detector offset
    (u,) = detector_offsets(grid, 1)
    assert val == pytest.approx(2.0 * math.sqrt(1.0 - u**2), rel=1e-12)
    # a centered detector sees the diameter
    a0 = make_projector(grid, n_det=1, det_offset=0.0)
    assert a0.apply(np.ones(1))[0] == pytest.approx(2.0, rel=1e-12)


def test_all_ones_phantom_matches_ray_integration():
    grid = PolarGrid(n_r=16, n_theta=32, r_max=1.0)
    n_det = 24
    a = make_projector(grid, n_det)
    sino = a.apply(np.ones(grid.n_pixels)).reshape(grid.n_theta, n_det)
    for d, u in enumerate(detector_offsets(grid, n_det)):
        chord = 2.0 * math.sqrt(max(grid.r_max**2 - u**2, 0.0))
        # direct dense ray integration oracle: every marching sample lies in
        # some pixel, so the row sum telescopes to the in-disc length
        for v in range(grid.n_theta):
            assert sino[v, d] == pytest.approx(chord, abs=1e-10)


def test_projector_nonnegative_and_unhit_columns_zero():
    grid = PolarGrid(n_r=32, n_theta=64, r_max=1.0)
    a = make_projector(grid, n_det=48)
    for blk in a.blocks:
        assert blk.nnz == 0 or blk.data.min() >= 0.0
    col_mass = a.adjoint_apply(np.ones(a.nrows))
    assert col_mass.min() >= 0.0


def test_rotation_equivariance_exact():
    grid = PolarGrid(n_r=8, n_theta=12, r_max=1.0)
    a = make_projector(grid, n_det=10)
    rng = np.random.default_rng(60)
    x = rng.uniform(0.0, 1.0, grid.n_pixels)
    x_img = x.reshape(grid.n_theta, grid.n_r)
    x_rot = np.roll(x_img, 1, axis=0).ravel()
    sino = a.apply(x).reshape(grid.n_theta, -1)
    sino_rot = a.apply(x_rot).reshape(grid.n_theta, -1)
    assert np.abs(np.roll(sino, 1, axis=0) - sino_rot).max() <= 1e-12


def test_projector_spectral_consistency():
    grid = PolarGrid(n_r=6, n_theta=8, r_max=1.0)
    a = make_projector(grid, n_det=6)
    sb = block_diagonalize(a)
    rng = np.random.default_rng(61)
    x = rng.standard_normal(a.ncols)
    assert np.abs(a.apply(x) - sb.apply(x)).max() <= 1e-10


def test_projector_requires_matching_views():
    grid = PolarGrid(n_r=4, n_theta=8)
    with pytest.raises(ConfigurationError):
        make_projector(grid, n_det=4, n_views=4)


def test_jittered_projector_is_deterministic_under_seed():
    grid = PolarGrid(n_r=4, n_theta=8)
    a1 = make_projector(grid, n_det=6, seed=5)
    a2 = make_projector(grid, n_det=6, seed=5)
    assert np.allclose(a1.dense(), a2.dense(), atol=0.0)


def test_smoothing_operator_stencil():
    grid = PolarGrid(n_r=3, n_theta=4)
    k = make_smoothing_operator(grid)
    x = np.arange(12.0)
    out = k.apply(x).reshape(grid.n_theta, 2 * grid.n_r - 1)
    img = x.reshape(grid.n_theta, grid.n_r)
    for j in range(grid.n_theta):
        assert np.allclose(out[j, : grid.n_r - 1], np.diff(img[j]))
        assert np.allclose(
            out[j, grid.n_r - 1 :], img[(j + 1) % grid.n_theta] - img[j]
        )


def test_phantom_empty_and_full():
    grid = PolarGrid(n_r=6, n_theta=10)
    assert np.array_equal(make_phantom(grid, []), np.zeros(60))
    full = make_phantom(grid, [Disc(0.0, 0.0, grid.r_max, 1.0)])
    assert np.array_equal(full, np.ones(60))


def test_phantom_painter_order():
    grid = PolarGrid(n_r=8, n_theta=8)
    img = make_phantom(
        grid,
        [Disc(0.0, 0.0, 1.0, 0.5), Disc(0.0, 0.0, 0.3, 0.9)],
    )
    centers_r = (np.tile(np.arange(grid.n_r), grid.n_theta) + 0.5) * grid.dr
    inner = centers_r < 0.25
    assert np.all(img[inner] == 0.9)
    outer = centers_r > 0.4
    assert np.all(img[outer] == 0.5)


def test_phantom_shapes_cover_ellipse_and_annulus():
    grid = PolarGrid(n_r=16, n_theta=16)
    img = make_phantom(
        grid,
        [Annulus(0.0, 0.0, 0.5, 0.8, 0.4), Ellipse(0.1, 0.0, 0.2, 0.1, 0.3, 1.0)],
    )
    assert img.max() == 1.0
    assert set(np.unique(img)) <= {0.0, 0.4, 1.0}


def test_make_problem_zero_phantom():
    grid = PolarGrid(n_r=4, n_theta=8)
    prob = make_problem(grid, 6, np.zeros(grid.n_pixels), kind="recon")
    assert np.array_equal(prob.b, np.zeros(prob.A.nrows))
    assert np.allclose(prob.model.V.d, 1.0)
    assert np.array_equal(prob.x0, np.zeros(grid.n_pixels))
    assert prob.model.eval_grad(prob.x0) == pytest.approx(0.0, abs=1e-15)


def test_make_problem_kinds_and_defaults():
    grid = PolarGrid(n_r=4, n_theta=8)
    phantom = default_phantom(grid)
    quad = make_problem(grid, 6, phantom, kind="quadratic")
    recon = make_problem(grid, 6, phantom, kind="recon")
    assert isinstance(quad.model, QuadraticModel) and quad.model.lam == 1e-2
    assert isinstance(recon.model, ReconModel)
    assert recon.model.lam == 1e-4 and recon.model.delta == 0.1
    with pytest.raises(ConfigurationError):
        make_problem(grid, 6, phantom, kind="other")


def test_noise_is_seeded_and_weights_stay_noiseless():
    grid = PolarGrid(n_r=4, n_theta=8)
    phantom = default_phantom(grid)
    p1 = make_problem(grid, 6, phantom, kind="recon", noise_sigma=0.05, noise_seed=3)
    p2 = make_problem(grid, 6, phantom, kind="recon", noise_sigma=0.05, noise_seed=3)
    clean = make_problem(grid, 6, phantom, kind="recon")
    assert np.array_equal(p1.b, p2.b)
    assert not np.array_equal(p1.b, clean.b)
    assert np.array_equal(p1.model.V.d, clean.model.V.d)


def test_polar_to_cartesian_shape_and_fov():
    grid = PolarGrid(n_r=4, n_theta=8)
    img = polar_to_cartesian(grid, np.ones(grid.n_pixels), size=32)
    assert img.shape == (32, 32)
    assert img[0, 0] == 0.0  # corner outside the field of view
    assert img[16, 16] == 1.0


def test_write_pgm_roundtrip(tmp_path):
    img = np.linspace(0.0, 1.0, 12).reshape(3, 4)
    path = tmp_path / "img.pgm"
    write_pgm(path, img)
    raw = path.read_bytes()
    header, rest = raw.split(b"\n", 1)
    assert header == b"P5"
    dims, rest = rest.split(b"\n", 1)
    assert dims == b"4 3"
    maxval, pix = rest.split(b"\n", 1)
    assert maxval == b"65535"
    data = np.frombuffer(pix, dtype=">u2").reshape(3, 4)
    assert data[0, 0] == 0 and data[2, 3] == 65535


def test_full_scale_dimension_arithmetic():
    # full-scanner geometry: 226 radial x 1160 angular pixels, 672 detectors
    grid = PolarGrid(n_r=226, n_theta=1160, r_max=226.0)
    n_det = 672
    assert grid.n_pixels == 262_160
    assert n_det * grid.n_theta == 779_520


def test_vector_and_sinogram_csv(tmp_path):
    from bcopt.ct import write_sinogram_csv, write_vector_csv

    grid = PolarGrid(n_r=2, n_theta=4)
    prob = make_problem(grid, 3, np.ones(grid.n_pixels), kind="quadratic")
    spath = tmp_path / "sino.csv"
    write_sinogram_csv(spath, prob.sinogram())
    rows = spath.read_text().strip().splitlines()
    assert rows[0] == "view,detector,value"
    assert len(rows) == 1 + 3 * 4
    views = prob.sinogram().as_views()
    v, d, val = rows[5].split(",")
    assert views[int(v), int(d)] == float(val)

    vpath = tmp_path / "vec.csv"
    write_vector_csv(vpath, np.array([0.5, 1.25]), header="pixel_value")
    assert vpath.read_text() == "pixel_value\n0.5\n1.25\n"
