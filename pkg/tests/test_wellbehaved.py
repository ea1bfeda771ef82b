import math

import numpy as np
import pytest

from thorin.ggc import GgcModel, concatenate, model_coeffs
from thorin.laguerre import CoeffTensor
from thorin.wellbehaved import (
    HalfPlaneImage,
    _best_eps_general,
    _interval_eps_1d,
    best_eps,
    classify_dependence,
    decay_check,
    disc_image,
    is_eps_wb,
    mobius_h,
)


def random_univariate(rng, wb=False):
    n = int(rng.integers(1, 6))
    alpha = rng.uniform(0.1, 2.0, n)
    if wb:
        alpha *= (1.2 + rng.uniform(0, 2)) / alpha.sum()
    scales = rng.uniform(0.05, 6.0, (n, 1))
    return GgcModel(alpha, scales)


class TestMobius:
    def test_values(self):
        assert mobius_h(0.0) == pytest.approx(-1.0)
        assert mobius_h(3.0) == pytest.approx(2.0)
        assert mobius_h(1j) == pytest.approx(-1j)

    def test_pole(self):
        with pytest.raises(ValueError):
            mobius_h(1.0)

    def test_involution_and_reciprocal_identities(self):
        rng = np.random.default_rng(0)
        z = rng.normal(size=10_000) + 1j * rng.normal(size=10_000)
        z = z[np.abs(z - 1) > 1e-3]
        z = z[np.abs(z) > 1e-3]
        for t in z[:10_000]:
            h = mobius_h(t)
            if abs(h - 1) > 1e-6:
                assert mobius_h(h) == pytest.approx(t, rel=1e-12, abs=1e-12)
            assert mobius_h(1 / t) == pytest.approx(-h, rel=1e-12, abs=1e-12)

    def test_right_half_plane_exits_unit_disc(self):
        rng = np.random.default_rng(1)
        for _ in range(500):
            t = abs(rng.normal()) + 1e-6 + 1j * rng.normal()
            assert abs(mobius_h(t)) > 1.0


class TestDiscImage:
    def test_contracting_disc(self):
        c, r = disc_image(0.5)
        assert c == pytest.approx(-5.0 / 3.0, rel=1e-14)
        assert r == pytest.approx(4.0 / 3.0, rel=1e-14)
        assert c + r < 0  # image inside the left half-plane

    def test_expanding_disc(self):
        c, r = disc_image(2.0)
        assert c == pytest.approx(5.0 / 3.0, rel=1e-14)
        assert r == pytest.approx(4.0 / 3.0, rel=1e-14)
        assert c - r > 0  # complement image inside the right half-plane

    def test_unit_disc_signals_half_plane(self):
        with pytest.raises(HalfPlaneImage):
            disc_image(1.0)

    def test_boundary_maps_to_boundary(self):
        # h sends the circle |t| = b onto the circle around (c, r)
        rng = np.random.default_rng(2)
        for b in (0.3, 0.8, 1.7, 4.0):
            c, r = disc_image(b)
            for ang in rng.uniform(0, 2 * math.pi, 50):
                w = mobius_h(b * np.exp(1j * ang))
                assert abs(w - c) == pytest.approx(r, rel=1e-10)


class TestIsEpsWb:
    def test_unit_scale_always_passes(self):
        m = GgcModel([2.0], [[1.0]])
        for eps in (0.1, 1.0, 17.0, 1e6):
            assert is_eps_wb(m, eps).is_wb

    def test_threshold_at_scale_two(self):
        m = GgcModel([2.0], [[2.0]])
        assert is_eps_wb(m, 1.9).is_wb
        assert not is_eps_wb(m, 2.1).is_wb

    def test_mass_condition(self):
        m = GgcModel([0.5], [[1.0]])
        for eps in (0.01, 1.0, 10.0):
            assert not is_eps_wb(m, eps).is_wb

    def test_monotone_in_eps(self):
        rng = np.random.default_rng(3)
        grid = [0.05, 0.2, 0.5, 1.0, 2.0, 5.0]
        for _ in range(30):
            m = random_univariate(rng)
            flags = [is_eps_wb(m, e).is_wb for e in grid]
            # once it fails at some margin it keeps failing at larger ones
            assert all(a or not b for a, b in zip(flags, flags[1:]))

    def test_rejects_nonpositive_eps(self):
        with pytest.raises(ValueError):
            is_eps_wb(GgcModel([2.0], [[1.0]]), 0.0)


class TestBestEps:
    def test_univariate_value(self):
        rep = best_eps(GgcModel([2.0], [[2.0]]))
        assert rep.is_wb
        assert rep.best_eps == pytest.approx(2.0, rel=1e-14)

    def test_independent_bivariate(self):
        rep = best_eps(GgcModel([1.0, 1.0], [[1.0, 0.0], [0.0, 1.0]]))
        assert rep.is_wb
        assert rep.best_eps == math.inf

    def test_comonotonic_not_wb(self):
        rep = best_eps(GgcModel([2.0], [[1.0, 1.0]]))
        assert not rep.is_wb
        assert rep.best_eps == 0.0
        assert "rank-deficient" in rep.witness

    def test_mass_below_one(self):
        rep = best_eps(GgcModel([0.4, 0.5], [[1.0, 0.0], [0.0, 1.0]]))
        assert not rep.is_wb and rep.best_eps == 0.0

    def test_general_bivariate_finite_margin(self):
        # three spread atoms: the full-set system is consistent only for
        # subsets with solutions; the dominant pair pins a finite margin
        m = GgcModel([1.0, 1.0, 0.4], [[2.0, 0.0], [0.0, 2.0], [1.0, 1.0]])
        rep = best_eps(m)
        assert rep.is_wb
        assert 0 < rep.best_eps < math.inf
        # the {1,2} majority subset solves at t = (1/2, 1/2), whose image
        # stays 3 away from the unit circle
        assert rep.best_eps == pytest.approx(2.0, rel=1e-10)

    def test_univariate_machinery_matches_interval(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            m = random_univariate(rng)
            interval = _interval_eps_1d(m.scales)
            general, _ = _best_eps_general(m, include_atoms=True)
            if math.isinf(interval):
                assert math.isinf(general)
            else:
                assert general == pytest.approx(interval, rel=1e-12)

    def test_undecided_above_cap(self):
        n = 23
        m = GgcModel(np.ones(n), np.ones((n, 2)) + np.arange(n)[:, None] * 0.1)
        rep = best_eps(m)
        assert rep.undecided and not rep.is_wb

    def test_near_collinear_gray_zone(self):
        m = GgcModel([1.0, 1.0], [[1.0, 2.0], [2.0, 4.0 + 1e-25]])
        rep = best_eps(m)
        assert not rep.is_wb  # numerically indistinguishable from one ray

    def test_raw_scale_inconsistent_subsets_ignored(self):
        # on raw monetary scales the per-equation residual must still
        # separate consistent from inconsistent majority subsets: each
        # triple solves its first two rows at t ~ 1e-6 but leaves the
        # third equation far from 1, so no triple constrains the margin
        m = GgcModel(
            np.ones(4),
            [[1e6, 0.0], [0.0, 1e6], [7e5, 7e5], [3e5, 9e5]],
        )
        rep = best_eps(m)
        assert rep.is_wb
        assert rep.best_eps == math.inf

    def test_raw_scale_consistent_pair_constrains(self):
        # unequal masses make pairs the minimal majority subsets; their
        # unique solutions sit at t ~ 1e-6, whose Moebius image has
        # modulus 1 + O(1e-6): a tiny but positive margin
        m = GgcModel(
            [2.0, 2.0, 1.5, 0.5],
            [[1e6, 0.0], [0.0, 1e6], [7e5, 7e5], [3e5, 9e5]],
        )
        rep = best_eps(m)
        assert rep.is_wb
        assert 0 < rep.best_eps < 1e-4

    def test_scaling_invariance_of_status(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            n = int(rng.integers(2, 5))
            model = GgcModel(rng.uniform(0.4, 1.5, n), rng.uniform(0.1, 3.0, (n, 2)))
            big = GgcModel(model.alpha, model.scales * np.array([1e5, 3e4]))
            assert best_eps(model).is_wb == best_eps(big).is_wb

    def test_convolution_closure(self):
        rng = np.random.default_rng(5)
        done = 0
        while done < 50:
            d = int(rng.integers(1, 4))
            a = GgcModel(
                rng.uniform(0.4, 1.5, 3), rng.uniform(0.1, 3.0, (3, d))
            )
            b = GgcModel(
                rng.uniform(0.4, 1.5, 3), rng.uniform(0.1, 3.0, (3, d))
            )
            if not (best_eps(a).is_wb and best_eps(b).is_wb):
                continue
            assert best_eps(concatenate(a, b)).is_wb
            done += 1

    def test_invertible_map_closure(self):
        rng = np.random.default_rng(6)
        done = 0
        while done < 30:
            d = int(rng.integers(2, 4))
            m = GgcModel(rng.uniform(0.4, 1.5, d + 1), rng.uniform(0.1, 2.0, (d + 1, d)))
            if not best_eps(m).is_wb:
                continue
            # monomial matrices (permutation x positive diagonal) preserve
            # the orthant and invertibility
            perm = rng.permutation(d)
            A = np.zeros((d, d))
            A[np.arange(d), perm] = rng.uniform(0.3, 3.0, d)
            image = GgcModel(m.alpha, m.scales @ A)
            assert best_eps(image).is_wb
            done += 1


class TestClassifyDependence:
    def test_independent(self):
        rep = classify_dependence(GgcModel([1.0, 1.0], [[1.0, 0.0], [0.0, 2.0]]))
        assert rep.kind == "independent"
        assert rep.ray_count == 2
        assert not rep.singular

    def test_comonotonic_singular(self):
        rep = classify_dependence(GgcModel([1.0, 1.0], [[1.0, 2.0], [2.0, 4.0]]))
        assert rep.kind == "comonotonic"
        assert rep.ray_count == 1
        assert rep.singular

    def test_general_continuous(self):
        rep = classify_dependence(
            GgcModel([1.0, 1.0, 1.0], [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        )
        assert rep.kind == "general"
        assert rep.ray_count == 3
        assert not rep.singular

    def test_ray_tolerance(self):
        rep = classify_dependence(
            GgcModel([1.0, 1.0], [[1.0, 2.0], [2.0 * (1 + 1e-12), 4.0]])
        )
        assert rep.ray_count == 1


class TestDecayCheck:
    def test_single_mode_tensor(self):
        ct = model_coeffs(GgcModel([1.0], [[1.0]]), (10,)).coeffs
        B, ok = decay_check(ct, 0.7)
        assert ok
        assert B == pytest.approx(1 / math.sqrt(2), rel=1e-10)

    def test_true_margin_passes(self):
        ct = model_coeffs(GgcModel([2.0], [[2.0]]), (40,)).coeffs
        B, ok = decay_check(ct, 1.0)  # strictly below the margin of 2
        assert ok

    def test_geometric_growth_fails(self):
        fake = CoeffTensor((10,), 2.0 ** np.arange(11.0))
        B, ok = decay_check(fake, 1.0)
        assert not ok

    def test_fitted_shape_passes_at_half_margin(self):
        model = GgcModel([0.5458, 2.4539], [[1.6283], [0.1999]])
        rep = best_eps(model)
        assert rep.is_wb
        ct = model_coeffs(model, (40,)).coeffs
        for frac in (0.5, 0.25, 0.125):
            _, ok = decay_check(ct, rep.best_eps * frac)
            assert ok

    def test_rejects_nonpositive_margin(self):
        ct = CoeffTensor((2,), np.zeros(3))
        with pytest.raises(ValueError):
            decay_check(ct, 0.0)
