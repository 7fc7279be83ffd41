import math
from collections import Counter

import numpy as np
import pytest
from scipy import integrate

from cltbounds.bounds import (
    BoundInputs,
    DensePairMoments,
    FLAG_RADICAND_CLAMPED,
    KOLMOGOROV,
    SimplexPairMoments,
    TOTAL_VARIATION,
    VARIANT_ABS_DEVIATION,
    VARIANT_CONDITIONAL_L1,
    VARIANT_STD_DEV,
    bound_frame_bounded,
    bound_frame_general,
    bound_lp,
    bound_poincare,
    bound_simplex,
    bound_sncp_bounded,
    bound_sph_symm,
    bound_unconditional,
    bound_unconditional_bounded,
    exact_projection_density,
    exact_tv_vs_normal,
    simplex_Y_moment,
    simplex_pair_moment,
)
from cltbounds.frames import frame_coeffs, simplex_geometry

CUBE_FOURTH = 1.8
CUBE_THIRD_ABS = 1.29903810567665797  # 9/(4 sqrt 3)


def iid_pair_table(n, fourth, cross=1.0):
    table = np.full((n, n), cross)
    np.fill_diagonal(table, fourth)
    return table


def e1(n):
    out = np.zeros(n)
    out[0] = 1.0
    return out


class TestFrameGeneral:
    def test_cube_e1(self):
        n = 10
        inputs = BoundInputs(
            n=n,
            m=n,
            theta_coeffs=e1(n),
            pair_moments=iid_pair_table(n, CUBE_FOURTH),
            third_abs_max=CUBE_THIRD_ABS,
        )
        # 2 sqrt(0.8) + (8/pi)^(1/4) sqrt(9/(4 sqrt 3)), 30-digit arithmetic
        assert bound_frame_general(inputs).value == pytest.approx(
            3.22863384317713751, rel=1e-12
        )

    def test_cube_diagonal_n100(self):
        n = 100
        inputs = BoundInputs(
            n=n,
            m=n,
            theta_coeffs=np.full(n, n**-0.5),
            pair_moments=iid_pair_table(n, CUBE_FOURTH),
            third_abs_max=CUBE_THIRD_ABS,
        )
        assert bound_frame_general(inputs).value == pytest.approx(
            0.634183680765009213, rel=1e-12
        )

    def test_unit_pair_moments_kill_first_term(self):
        # E[X_(i)^2 X_(j)^2] = 1 for all pairs: Parseval cancels the prefactor
        n = 7
        rng = np.random.default_rng(0)
        theta = rng.standard_normal(n)
        theta /= np.linalg.norm(theta)
        inputs = BoundInputs(
            n=n, m=n, theta_coeffs=theta,
            pair_moments=np.ones((n, n)), third_abs_max=0.0,
        )
        assert bound_frame_general(inputs).value == pytest.approx(0.0, abs=1e-7)

    def test_negative_radicand_clamps_with_flag(self):
        n = 4
        inputs = BoundInputs(
            n=n, m=n, theta_coeffs=e1(n),
            pair_moments=iid_pair_table(n, 0.9),  # sub-Gaussian noise artifact
            third_abs_max=1.0,
        )
        bv = bound_frame_general(inputs)
        assert FLAG_RADICAND_CLAMPED in bv.flags
        assert bv.value == pytest.approx((8 / math.pi) ** 0.25, rel=1e-12)

    def test_parseval_precondition_enforced(self):
        with pytest.raises(ValueError):
            BoundInputs(n=4, m=4, theta_coeffs=np.full(4, 0.9),
                        pair_moments=np.ones((4, 4)))

    def test_requires_third_moment(self):
        inputs = BoundInputs(n=2, m=2, theta_coeffs=e1(2), pair_moments=np.ones((2, 2)))
        with pytest.raises(ValueError):
            bound_frame_general(inputs)


class TestFrameBounded:
    def test_cube_diagonal_second_term(self):
        # n = 64 keeps n^(-1/2) exact in binary, so the radicand is exactly 0
        # and only 172 n a^3 max|theta|^3 remains: 21.5 * 3 sqrt(3)
        n = 64
        inputs = BoundInputs(
            n=n, m=n, theta_coeffs=np.full(n, n**-0.5),
            pair_moments=np.ones((n, n)), sup_bound=math.sqrt(3),
        )
        assert bound_frame_bounded(inputs).value == pytest.approx(
            111.717277088192585, rel=1e-12
        )

    def test_second_term_magnitude_n100(self):
        n = 100
        inputs = BoundInputs(
            n=n, m=n, theta_coeffs=np.full(n, n**-0.5),
            pair_moments=np.ones((n, n)), sup_bound=math.sqrt(3),
        )
        # roundoff in sum theta^2 leaks ~1e-7 through the radicand square root
        assert bound_frame_bounded(inputs).value == pytest.approx(
            89.3738216705540683, abs=1e-5
        )

    def test_monotone_in_sup_bound(self):
        n = 5
        values = []
        for a in (1.0, 1.5, 2.0):
            inputs = BoundInputs(
                n=n, m=n, theta_coeffs=e1(n),
                pair_moments=iid_pair_table(n, 2.0), sup_bound=a,
            )
            values.append(bound_frame_bounded(inputs).value)
        assert values[0] < values[1] < values[2]


class TestUnconditional:
    def test_cube_e1(self):
        theta = e1(6)
        bv = bound_unconditional(theta, CUBE_FOURTH, 0.0, CUBE_THIRD_ABS)
        assert bv.value == pytest.approx(4.12306103417705339, rel=1e-12)
        assert bv.kind == KOLMOGOROV

    def test_diagonal_norms(self):
        # ||theta||_4^4 = 1/n and ||theta||_3^(3/2) = n^(-1/4)
        n = 100
        theta = np.full(n, n**-0.5)
        bv = bound_unconditional(theta, CUBE_FOURTH, 0.0, CUBE_THIRD_ABS)
        assert bv.value == pytest.approx(0.723626399865000801, rel=1e-12)

    def test_negative_cov_clamps(self):
        theta = np.full(4, 0.5)
        bv = bound_unconditional(theta, 0.5 / theta.size * 16, -1.0, 1.0)
        # maxEX4 * ||theta||_4^4 = 0.5, cov = -1 -> clamp to 0; only second term
        assert FLAG_RADICAND_CLAMPED in bv.flags
        assert bv.value == pytest.approx(
            (8 / math.pi) ** 0.25 * (4 * 0.5**3) ** 0.5, rel=1e-12
        )

    def test_vanishes_for_diagonal_large_n(self):
        values = [
            bound_unconditional(np.full(n, n**-0.5), CUBE_FOURTH, 0.0, CUBE_THIRD_ABS).value
            for n in (10, 100, 1000, 10000)
        ]
        assert values == sorted(values, reverse=True)
        assert values[-1] < 0.25

    def test_rejects_non_unit_theta(self):
        with pytest.raises(ValueError):
            bound_unconditional(np.array([1.0, 1.0]), 1.0, 0.0, 1.0)

    def test_bounded_variant(self):
        n = 100
        theta = np.full(n, n**-0.5)
        bv = bound_unconditional_bounded(theta, CUBE_FOURTH, 0.0, math.sqrt(3))
        expected = 24 * math.sqrt(1.8 / 100) + 89.3738216705540683
        assert bv.value == pytest.approx(expected, rel=1e-12)

    def test_dominates_frame_general_with_exact_moments(self):
        # the coordinatewise form upper-bounds the frame form on the same moments
        rng = np.random.default_rng(4)
        n = 12
        table = iid_pair_table(n, CUBE_FOURTH)
        for _ in range(25):
            theta = rng.standard_normal(n)
            theta /= np.linalg.norm(theta)
            frame_value = bound_frame_general(
                BoundInputs(n=n, m=n, theta_coeffs=theta, pair_moments=table,
                            third_abs_max=CUBE_THIRD_ABS)
            ).value
            uncon_value = bound_unconditional(theta, CUBE_FOURTH, 0.0, CUBE_THIRD_ABS).value
            assert uncon_value >= frame_value - 1e-12


class TestSncpBounded:
    def test_diagonal_n100(self):
        theta = np.full(100, 0.1)
        assert bound_sncp_bounded(theta, math.sqrt(3)).value == pytest.approx(
            101.844587485049985, rel=1e-12
        )

    def test_e1_vacuous(self):
        n = 8
        assert bound_sncp_bounded(e1(n), 1.0).value == pytest.approx(196.0 * n)

    def test_best_case_scaling(self):
        # minimum of ||theta||_inf over the sphere is n^(-1/2)
        for n in (16, 64, 256):
            theta = np.full(n, n**-0.5)
            assert bound_sncp_bounded(theta, 1.0).value == pytest.approx(
                196.0 / math.sqrt(n), rel=1e-12
            )

    def test_rejects_a_below_one(self):
        with pytest.raises(ValueError):
            bound_sncp_bounded(e1(4), 0.9)

    def test_cubic_scale_covariance(self):
        theta = np.full(16, 0.25)
        base = bound_sncp_bounded(theta, 1.0).value
        for a in (1.5, 2.0, 3.0):
            assert bound_sncp_bounded(theta, a).value == pytest.approx(
                a**3 * base, rel=1e-12
            )


class TestLpBound:
    def test_e1_picks_first_branch_for_large_n(self):
        bv = bound_lp(e1(1000), 1000, 2.0, c1=1.0, d1p=1.0)
        assert bv.value == pytest.approx(1.0)
        assert bv.constants_used["branch"] == "theta-3-norm"

    def test_diagonal_large_p_prefers_sup_branch(self):
        n = 4096
        theta = np.full(n, n**-0.5)
        bv = bound_lp(theta, n, math.inf, c1=1.0, d1p=1.0)
        # second branch: n * n^(-3/2) = n^(-1/2) < n^(-1/4)
        assert bv.constants_used["branch"] == "sup-norm"
        assert bv.value == pytest.approx(n**-0.5, rel=1e-12)

    def test_p1_prefers_first_branch_for_diagonal(self):
        n = 64
        theta = np.full(n, n**-0.5)
        bv = bound_lp(theta, n, 1.0, c1=1.0, d1p=1.0)
        assert bv.constants_used["branch"] == "theta-3-norm"
        assert bv.value == pytest.approx(n**-0.25, rel=1e-12)

    def test_default_constants_flagged(self):
        assert bound_lp(e1(4), 4, 2.0).flags
        assert not bound_lp(e1(4), 4, 2.0, c1=0.8, d1p=2.5).flags


class TestSimplexMoments:
    def test_second_moment_n2(self):
        assert simplex_Y_moment(2, [2]) == pytest.approx(2.0, rel=1e-13)

    def test_first_moment_n2(self):
        assert simplex_Y_moment(2, [1]) == pytest.approx(1.15470053837925153, rel=1e-13)

    def test_zeroth_moment(self):
        assert simplex_Y_moment(5, []) == 1.0
        assert simplex_Y_moment(5, [0, 0, 0]) == 1.0

    def test_large_n_log_gamma(self):
        # 30-digit reference for n=500, r=(4,2,1,1)
        assert simplex_Y_moment(500, [4, 2, 1, 1]) == pytest.approx(
            45.7671088310159084, rel=1e-12
        )

    def test_rejects_bad_exponents(self):
        with pytest.raises(ValueError):
            simplex_Y_moment(2, [1, 1, 1, 1])
        with pytest.raises(ValueError):
            simplex_Y_moment(2, [-1, 0])

    def test_pair_moment_values(self):
        assert simplex_pair_moment(2, (0, 1), (1, 0)) == pytest.approx(2.4, rel=1e-13)
        assert simplex_pair_moment(10, (0, 1), (2, 3)) == pytest.approx(
            0.725274725274725275, rel=1e-13
        )

    def test_overlap_one_is_three_times_overlap_zero(self):
        for n in (3, 10, 57):
            ov0 = simplex_pair_moment(n, (0, 1), (2, 3))
            ov1 = simplex_pair_moment(n, (0, 1), (1, 2))
            assert ov1 == pytest.approx(3.0 * ov0, rel=1e-13)

    def test_overlap_two_normalized_increases_to_one(self):
        values = [simplex_pair_moment(n, (0, 1), (0, 1)) / 6.0 for n in range(2, 200)]
        assert all(b > a for a, b in zip(values, values[1:]))
        assert values[-1] < 1.0

    def test_rejects_degenerate_pairs(self):
        with pytest.raises(ValueError):
            simplex_pair_moment(4, (1, 1), (0, 2))
        with pytest.raises(ValueError):
            simplex_pair_moment(4, (0, 1), (0, 9))

    @pytest.mark.parametrize("n,pair_b", [(5, (2, 3)), (5, (1, 2)), (5, (0, 1)), (5, (1, 0)), (2, (1, 2)), (2, (0, 1))])
    def test_pair_moment_consistent_with_joint_moments(self, n, pair_b):
        # expand E[(Y_i - Y_j)^2 (Y_k - Y_l)^2] / 4 through the joint-moment formula
        i, j = 0, 1
        k, l = pair_b
        total = 0.0
        for a, sa in (((i,), 1.0), ((j,), -1.0)):
            for b, sb in (((i,), 1.0), ((j,), -1.0)):
                for c, sc in (((k,), 1.0), ((l,), -1.0)):
                    for d, sd in (((k,), 1.0), ((l,), -1.0)):
                        exponents = Counter(a + b + c + d)
                        r = [0] * (n + 1)
                        for idx, count in exponents.items():
                            r[idx] = count
                        total += sa * sb * sc * sd * simplex_Y_moment(n, r)
        expected = total / 4.0
        assert simplex_pair_moment(n, (i, j), (k, l)) == pytest.approx(expected, rel=1e-12)


class TestSimplexPairMomentsReduction:
    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_matches_dense_table(self, n):
        geom = simplex_geometry(n)
        pairs = geom.edge_pairs
        m = len(pairs)
        table = np.array(
            [
                [simplex_pair_moment(n, tuple(pairs[a]), tuple(pairs[b])) for b in range(m)]
                for a in range(m)
            ]
        )
        rng = np.random.default_rng(n)
        for _ in range(5):
            theta = rng.standard_normal(n)
            theta /= np.linalg.norm(theta)
            q = frame_coeffs(geom.edge_frame, theta) ** 2
            fast = SimplexPairMoments(n, pairs).quadratic_form(q)
            dense = DensePairMoments(table).quadratic_form(q)
            assert fast == pytest.approx(dense, rel=1e-12)


class TestBoundSimplex:
    def test_configured_constant(self):
        geom = simplex_geometry(2)
        theta = geom.vertices[0]
        # sum |<v1, v_i>|^3 = 1 + 2 (1/2)^3 = 1.25
        bv = bound_simplex(theta, geom, c1=1.0)
        assert bv.value == pytest.approx(math.sqrt(1.25), rel=1e-12)
        assert bv.flags  # unspecified constant is flagged

    def test_vertex_parseval_self_check(self):
        for n in (2, 7, 31):
            geom = simplex_geometry(n)
            rng = np.random.default_rng(n)
            theta = rng.standard_normal(n)
            theta /= np.linalg.norm(theta)
            t = geom.vertices @ theta
            assert float(t @ t) == pytest.approx((n + 1) / n, rel=1e-12)

    @pytest.mark.parametrize("n", [2, 3, 5, 10, 50])
    def test_assembled_dominates_exact_frame_evaluation(self, n):
        # the assembled corollary-form constant must upper-bound the exact
        # frame-bound evaluation it was folded from
        geom = simplex_geometry(n)
        third_bound = 3 * math.sqrt(2) * math.sqrt((n + 1) * (n + 2)) / (n + 3)
        rng = np.random.default_rng(n + 1)
        for _ in range(10):
            theta = rng.standard_normal(n)
            theta /= np.linalg.norm(theta)
            coeffs = frame_coeffs(geom.edge_frame, theta)
            exact = bound_frame_general(
                BoundInputs(
                    n=n,
                    m=geom.m,
                    theta_coeffs=coeffs,
                    pair_moments=SimplexPairMoments(n, geom.edge_pairs),
                    third_abs_max=third_bound,
                )
            ).value
            assembled = bound_simplex(theta, geom).value
            assert assembled >= exact - 1e-12

    def test_random_theta_quarter_power_decay(self):
        # median assembled value over random directions decays like n^(-1/4)
        rng = np.random.default_rng(123)
        ns = [16, 64, 256]
        medians = []
        for n in ns:
            geom = simplex_geometry(n)
            vals = []
            for _ in range(40):
                theta = rng.standard_normal(n)
                theta /= np.linalg.norm(theta)
                vals.append(bound_simplex(theta, geom).value)
            medians.append(np.median(vals))
        slope = np.polyfit(np.log(ns), np.log(medians), 1)[0]
        assert slope == pytest.approx(-0.25, abs=0.08)


class TestSphSymm:
    def test_sphere_zero_variance(self):
        bv = bound_sph_symm(100, VARIANT_STD_DEV, 0.0)
        assert bv.value == pytest.approx(8.0 / 99.0, rel=1e-14)
        assert bv.kind == TOTAL_VARIATION

    def test_ball_exact_variance(self):
        stat = math.sqrt(4 * 100 / 104)
        assert bound_sph_symm(100, VARIANT_STD_DEV, stat).value == pytest.approx(
            0.160046923288155164, rel=1e-12
        )

    def test_exponential_exact_variance(self):
        stat = math.sqrt(100 * 406 / 101)
        assert stat == pytest.approx(20.0494438331790635, rel=1e-12)
        assert bound_sph_symm(100, VARIANT_STD_DEV, stat).value == pytest.approx(
            0.890886619522386405, rel=1e-12
        )

    def test_conditional_variant(self):
        assert bound_sph_symm(10, VARIANT_CONDITIONAL_L1, 0.05).value == pytest.approx(0.2)

    def test_abs_deviation_variant(self):
        assert bound_sph_symm(11, VARIANT_ABS_DEVIATION, 2.5).value == pytest.approx(
            (4 * 2.5 + 8) / 10
        )

    def test_rejects_negative_statistic(self):
        with pytest.raises(ValueError):
            bound_sph_symm(10, VARIANT_STD_DEV, -0.1)

    def test_rejects_unknown_variant(self):
        with pytest.raises(ValueError):
            bound_sph_symm(10, "nope", 0.1)


class TestPoincare:
    def test_unit_gap_n100(self):
        assert bound_poincare(100, 1.0).value == pytest.approx(1.0, rel=1e-14)

    def test_gap_one_thirteenth(self):
        assert bound_poincare(2600, 1.0 / 13.0).value == pytest.approx(
            0.707106781186547524, rel=1e-12
        )
        # same formula as 10 sqrt(13)/sqrt(n)
        for n in (26, 100, 400):
            assert bound_poincare(n, 1.0 / 13.0).value == pytest.approx(
                10 * math.sqrt(13) / math.sqrt(n), rel=1e-12
            )

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            bound_poincare(25, 1.0)
        with pytest.raises(ValueError):
            bound_poincare(100, 1.3)
        with pytest.raises(ValueError):
            bound_poincare(100, 0.0)


class TestExactDensity:
    @pytest.mark.parametrize("kind", ["sphere_shell", "ball_uniform"])
    @pytest.mark.parametrize("n", [3, 10, 100])
    def test_normalization(self, kind, n):
        radius = math.sqrt(n if kind == "sphere_shell" else n + 2)
        val, _ = integrate.quad(
            lambda t: exact_projection_density(kind, n, t),
            -radius, radius, points=[0.0], limit=400, epsabs=1e-13,
        )
        assert val == pytest.approx(1.0, abs=1e-10)

    def test_sphere_n3_uniform(self):
        # exponent (n-3)/2 vanishes: flat density 1/(2 sqrt 3) on |t| <= sqrt 3
        for t in (0.0, 0.5, -1.2, 1.7):
            assert exact_projection_density("sphere_shell", 3, t) == pytest.approx(
                0.288675134594812882, rel=1e-12
            )

    def test_outside_support_is_zero(self):
        assert exact_projection_density("sphere_shell", 9, 4.0) == 0.0
        assert exact_projection_density("ball_uniform", 9, -4.0) == 0.0

    def test_sphere_requires_n3(self):
        with pytest.raises(ValueError):
            exact_projection_density("sphere_shell", 2, 0.0)


class TestExactTv:
    def test_riemann_oracle(self):
        # independent oracle: trapezoidal integration of |f - phi| on a dense grid
        n = 100
        radius = math.sqrt(n)
        ts = np.linspace(-radius, radius, 2**21 + 1)
        f = exact_projection_density("sphere_shell", n, ts)
        phi = np.exp(-0.5 * ts**2) / math.sqrt(2 * math.pi)
        tail = math.erfc(radius / math.sqrt(2))  # normal mass outside the support
        riemann = np.trapezoid(np.abs(f - phi), ts) + tail
        assert exact_tv_vs_normal("sphere_shell", n) == pytest.approx(riemann, abs=1e-8)

    def test_dominated_by_theoretical_bound(self):
        for n in (10, 50, 100, 500):
            assert exact_tv_vs_normal("sphere_shell", n) <= 8.0 / (n - 1)

    def test_one_over_n_decay(self):
        for n in (50, 100, 200):
            ratio = exact_tv_vs_normal("sphere_shell", n) / exact_tv_vs_normal(
                "sphere_shell", 2 * n
            )
            assert 1.8 <= ratio <= 2.2
