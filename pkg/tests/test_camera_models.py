import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from fisheyekit.camera_models import (
    DegeneratePointError,
    DomainError,
    Intrinsics,
    NoRootError,
    NonMonotoneError,
    CameraModelError,
    build_root_lut,
    project,
    radial_forward,
    radial_inverse,
    unproject,
    unproject_masked,
)
from fisheyekit.synthetic import FISHEYE_POLY, example_cameras, random_valid_pixels

CAMS = example_cameras()


def unit(**kw):
    base = dict(width=10, height=10, cx=5.0, cy=5.0)
    base.update(kw)
    return base


def bisect(fn, target, lo, hi, tol=1e-12):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if fn(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


class TestRadialForward:
    def test_rectilinear_45_degrees(self):
        m = Intrinsics("rectilinear", **unit(f=1.0))
        assert radial_forward(m, math.pi / 4) == pytest.approx(1.0, rel=1e-15)

    def test_stereographic_90_degrees(self):
        m = Intrinsics("stereographic", **unit(f=1.0))
        assert radial_forward(m, math.pi / 2) == pytest.approx(2.0, rel=1e-15)

    def test_polynomial_direct_evaluation(self):
        m = Intrinsics("polynomial", **unit(a=(1, 0.1, 0, 0)))
        assert radial_forward(m, 0.5) == pytest.approx(0.525, abs=1e-15)

    def test_ucm_xi_zero_is_rectilinear(self):
        t = np.linspace(0.01, 1.5, 50)
        ucm = Intrinsics("ucm", **unit(f=2.0, xi=0.0))
        rect = Intrinsics("rectilinear", **unit(f=2.0))
        np.testing.assert_allclose(radial_forward(ucm, t), radial_forward(rect, t), rtol=1e-14)

    # frozen from closed forms evaluated independently in plain floating point
    @pytest.mark.parametrize("name,theta,rho", [
        ("ucm", 1.2, 236.26622995884134),
        ("eucm", 1.2, 399.20613253944026),
        ("double_sphere", 1.2, 442.0125294802396),
    ])
    def test_frozen_values(self, name, theta, rho):
        assert radial_forward(CAMS[name], theta) == pytest.approx(rho, rel=1e-13)

    def test_outside_domain_raises(self):
        rect = Intrinsics("rectilinear", **unit(f=1.0))
        with pytest.raises(DomainError):
            radial_forward(rect, math.pi / 2)
        with pytest.raises(DomainError):
            radial_forward(rect, -0.1)
        with pytest.raises(DomainError):
            radial_forward(CAMS["polynomial"], math.radians(98))

    def test_default_polynomial_half_fov(self):
        assert CAMS["polynomial"].theta_max == pytest.approx(math.radians(97.5))
        narrow = Intrinsics("polynomial", **unit(a=FISHEYE_POLY, fov_deg=120))
        assert narrow.theta_max == pytest.approx(math.radians(60))


class TestRadialInverse:
    def test_identity_polynomial(self):
        m = Intrinsics("polynomial", **unit(a=(1, 0, 0, 0)))
        assert radial_inverse(m, 0.3) == pytest.approx(0.3, abs=1e-12)

    def test_polynomial_against_bisection(self):
        m = Intrinsics("polynomial", **unit(a=(1, 0.1, 0, 0)))
        oracle = bisect(lambda t: t + 0.1 * t * t, 0.525, 0.0, m.theta_max)
        assert radial_inverse(m, 0.525) == pytest.approx(oracle, abs=1e-10)
        assert oracle == pytest.approx(0.5, abs=1e-11)

    def test_rectilinear(self):
        m = Intrinsics("rectilinear", **unit(f=1.0))
        assert radial_inverse(m, 1.0) == pytest.approx(math.pi / 4, abs=1e-15)

    # roots of the realistic fisheye polynomial, frozen from scipy brentq
    @pytest.mark.parametrize("rho,theta", [
        (100.0, 0.29912598701830806),
        (400.0, 1.127599579241186),
        (600.0, 1.5748913789800607),
    ])
    def test_fisheye_polynomial_frozen_roots(self, rho, theta):
        assert radial_inverse(CAMS["polynomial"], rho) == pytest.approx(theta, abs=1e-10)

    @pytest.mark.parametrize("name,rho,theta", [
        ("ucm", 500.0, 1.8617923361002031),
        ("eucm", 500.0, 1.4979430809287713),
        ("double_sphere", 400.0, 1.0812064503796899),
    ])
    def test_closed_form_frozen(self, name, rho, theta):
        assert radial_inverse(CAMS[name], rho) == pytest.approx(theta, abs=1e-12)

    def test_scipy_root_oracle_on_grid(self):
        m = CAMS["polynomial"]
        a = FISHEYE_POLY
        rho = np.linspace(0, m.rho_max, 37)
        ours = radial_inverse(m, rho)
        for r, t in zip(rho, ours):
            ref = 0.0 if r == 0 else brentq(
                lambda x: a[0] * x + a[1] * x**2 + a[2] * x**3 + a[3] * x**4 - r,
                0, m.theta_max, xtol=1e-14)
            assert t == pytest.approx(ref, abs=1e-10)

    def test_out_of_range(self):
        m = CAMS["polynomial"]
        with pytest.raises(NoRootError):
            radial_inverse(m, m.rho_max + 1)
        with pytest.raises(NoRootError):
            radial_inverse(m, -1.0)

    @pytest.mark.parametrize("name", list(CAMS))
    def test_forward_inverse_round_trip(self, name):
        m = CAMS[name]
        hi = m.theta_max * (1 - 1e-6) if m.theta_max_open else m.theta_max
        t = np.linspace(0, hi, 2001)
        err = np.abs(radial_inverse(m, radial_forward(m, t)) - t).max()
        assert err < (1e-5 if name == "polynomial" else 1e-6)

    def test_forward_strictly_increasing(self):
        for name, m in CAMS.items():
            hi = m.theta_max * (1 - 1e-6) if m.theta_max_open else m.theta_max
            r = radial_forward(m, np.linspace(0, hi, 5000))
            assert np.all(np.diff(r) > 0), name


class TestConstruction:
    def test_non_monotone_polynomial_rejected(self):
        with pytest.raises(NonMonotoneError):
            Intrinsics("polynomial", **unit(a=(1, 0, -1, 0)))

    def test_unknown_kind(self):
        with pytest.raises(CameraModelError):
            Intrinsics("fisheye", **unit(f=1.0))

    def test_nonpositive_focal(self):
        with pytest.raises(CameraModelError):
            Intrinsics("ucm", **unit(f=0.0))

    def test_principal_point_outside(self):
        with pytest.raises(CameraModelError):
            Intrinsics("rectilinear", width=10, height=10, cx=11.0, cy=5.0, f=1.0)


class TestProjectUnproject:
    def test_principal_point_is_optical_axis(self):
        for m in CAMS.values():
            np.testing.assert_array_equal(unproject(m, [m.cx, m.cy]), [0.0, 0.0, 1.0])

    def test_rectilinear_unit_pixel(self):
        m = Intrinsics("rectilinear", width=4, height=4, cx=0.0, cy=0.0, f=1.0)
        h = math.sqrt(2) / 2
        np.testing.assert_allclose(unproject(m, [1.0, 0.0]), [h, 0.0, h], atol=1e-15)

    @pytest.mark.parametrize("name", list(CAMS))
    def test_round_trip_1000(self, name):
        m = CAMS[name]
        px = random_valid_pixels(m, 1000, np.random.default_rng(7))
        back, ok = project(m, unproject(m, px))
        assert ok.all()
        tol = 1e-5 if name == "polynomial" else 1e-6
        assert np.abs(back - px).max() < tol

    def test_lut_round_trip(self):
        m = CAMS["polynomial"]
        lut = build_root_lut(m)
        px = random_valid_pixels(m, 1000, np.random.default_rng(8))
        back, _ = project(m, unproject(m, px, lut=lut))
        assert np.abs(back - px).max() < 1e-5

    def test_unit_rays(self):
        m = CAMS["double_sphere"]
        px = random_valid_pixels(m, 200, np.random.default_rng(9))
        np.testing.assert_allclose(np.linalg.norm(unproject(m, px), axis=-1), 1.0, atol=1e-14)

    def test_zero_vector_raises(self):
        with pytest.raises(DegeneratePointError):
            project(CAMS["ucm"], [0.0, 0.0, 0.0])

    def test_behind_rectilinear_invalid(self):
        _, ok = project(CAMS["rectilinear"], [[0.1, 0.0, -1.0], [0.0, 0.0, 1.0]])
        assert ok.tolist() == [False, True]

    def test_unproject_out_of_range(self):
        m = Intrinsics("polynomial", width=2000, height=2000, cx=1000.0, cy=1000.0,
                       a=FISHEYE_POLY)
        with pytest.raises(NoRootError):
            unproject(m, [1999.0, 1999.0])
        _, ok = unproject_masked(m, [[1999.0, 1999.0], [1000.0, 1000.0]])
        assert ok.tolist() == [False, True]

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.2, 2))
    def test_project_preserves_azimuth(self, x, y, z):
        if x * x + y * y < 1e-12:
            return
        # principal point at the origin keeps u - cx free of cancellation
        m = Intrinsics("eucm", width=10, height=10, cx=0.0, cy=0.0, f=330.0,
                       alpha_m=0.6, beta_m=1.1)
        (u, v), _ = project(m, [x, y, z])
        assert math.atan2(v, u) == pytest.approx(math.atan2(y, x), abs=1e-15)

    @settings(max_examples=100, deadline=None)
    @given(st.sampled_from(sorted(CAMS)), st.floats(0, 1), st.floats(0, 1))
    def test_round_trip_property(self, name, fu, fv):
        m = CAMS[name]
        px = np.array([fu * m.width, fv * m.height])
        rays, ok = unproject_masked(m, px)
        if not ok:
            return
        back, vis = project(m, rays)
        assert vis
        assert np.abs(back - px).max() < (1e-5 if name == "polynomial" else 1e-6)


class TestRootLut:
    def test_identity_polynomial_entries(self):
        m = Intrinsics("polynomial", **unit(a=(1, 0, 0, 0)))
        lut = build_root_lut(m, step=0.25)
        np.testing.assert_allclose(lut.theta, lut.rho, atol=1e-12)

    def test_against_bisection(self):
        # 0.25 px spacing is far too coarse for a radius measured in radians;
        # a fine table reaches the stated 1e-5 rad agreement
        m = Intrinsics("polynomial", **unit(a=(1, 0.1, 0, 0)))
        lut = build_root_lut(m, step=1e-3)
        oracle = bisect(lambda t: t + 0.1 * t * t, 0.525, 0.0, m.theta_max)
        assert abs(lut.lookup(0.525) - oracle) < 1e-5

    def test_strictly_increasing(self):
        lut = build_root_lut(CAMS["polynomial"])
        assert np.all(np.diff(lut.rho) > 0)
        assert np.all(np.diff(lut.theta) > 0)

    def test_matches_newton(self):
        m = CAMS["polynomial"]
        lut = build_root_lut(m)
        r = np.linspace(0, m.rho_max, 999)
        assert np.abs(lut.lookup(r) - radial_inverse(m, r)).max() < 1e-7

    def test_only_polynomial(self):
        with pytest.raises(CameraModelError):
            build_root_lut(CAMS["ucm"])

    def test_lookup_out_of_range(self):
        lut = build_root_lut(CAMS["polynomial"])
        with pytest.raises(NoRootError):
            lut.lookup(lut.rho_max + 1)
