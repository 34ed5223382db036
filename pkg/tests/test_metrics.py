import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from geopriv.errors import BothZero, SupportMismatch, ZeroEvidence
from geopriv.geo import PlanarPoint
from geopriv.mechanisms import Laplace, density
from geopriv.metrics import (
    DecisionScenario,
    DiscreteMechanism,
    Pmf,
    epsilon_star,
    multiplicative_distance,
    perr,
    perr_min,
    posterior,
    posterior_bound_holds,
    prior_diameter,
    satisfies_error_bound,
    satisfies_geo_ind,
    tightest_epsilon,
)

P = PlanarPoint


def random_mechanism(rng, n_in=None, n_out=None, zero_column=False, span=2000.0):
    """Random row-stochastic mechanism over random distinct planar inputs."""
    n_in = n_in or int(rng.integers(2, 6))
    n_out = n_out or int(rng.integers(2, 6))
    while True:
        pts = rng.uniform(0, span, size=(n_in, 2))
        if all(
            np.hypot(*(pts[i] - pts[j])) > 1.0
            for i in range(n_in)
            for j in range(i + 1, n_in)
        ):
            break
    m = rng.uniform(0.05, 1.0, size=(n_in, n_out))
    if zero_column and n_out >= 2:
        m[:, int(rng.integers(0, n_out))] = 0.0
    m /= m.sum(axis=1, keepdims=True)
    inputs = tuple(P(float(x), float(y)) for x, y in pts)
    outputs = tuple(P(float(i) * 10.0, 0.0) for i in range(n_out))
    return DiscreteMechanism(inputs, outputs, m)


def discretized_laplace(eps, inputs, outputs):
    """Rows proportional to exp(-eps * |z - x|), normalized per row."""
    m = np.array(
        [[math.exp(-eps * math.hypot(z.x - x.x, z.y - x.y)) for z in outputs] for x in inputs]
    )
    m /= m.sum(axis=1, keepdims=True)
    return DiscreteMechanism(tuple(inputs), tuple(outputs), m)


class TestMultiplicativeDistance:
    def test_identical(self):
        assert multiplicative_distance([0.3, 0.7], [0.3, 0.7]) == 0.0

    def test_ln4(self):
        assert multiplicative_distance([0.8, 0.2], [0.2, 0.8]) == pytest.approx(math.log(4))

    def test_one_sided_zero_is_infinite(self):
        assert multiplicative_distance([1.0, 0.0], [0.5, 0.5]) == math.inf

    def test_zero_zero_pairs_ignored(self):
        assert multiplicative_distance([0.5, 0.5, 0.0], [0.25, 0.75, 0.0]) == pytest.approx(
            math.log(2)
        )

    def test_support_mismatch(self):
        with pytest.raises(SupportMismatch):
            multiplicative_distance([0.5, 0.5], [0.2, 0.3, 0.5])
        a = Pmf((P(0, 0), P(1, 1)), np.array([0.5, 0.5]))
        b = Pmf((P(0, 0), P(2, 2)), np.array([0.5, 0.5]))
        with pytest.raises(SupportMismatch):
            multiplicative_distance(a, b)

    def test_underflow_treated_as_zero(self):
        assert multiplicative_distance([1.0, 1e-310], [0.5, 0.5]) == math.inf


class TestPerr:
    def test_bound_examples(self):
        assert perr_min(0.002, 500.0) == pytest.approx(0.2689, abs=1e-4)
        assert perr_min(0.002, 0.0) == 0.5
        assert perr_min(0.004, 100.0) == pytest.approx(0.4013, abs=1e-4)

    def test_epsilon_star(self):
        assert epsilon_star(0.002, 500.0) == 1.0
        assert epsilon_star(0.002, 0.0) == 0.0
        assert epsilon_star(0.01 / 200.0, 200.0) == pytest.approx(0.01)

    def test_perr_examples(self):
        assert perr(0.3, 0.3) == 0.5
        assert perr(1.0, 0.0) == 0.0

    def test_perr_laplace_at_z_equals_x(self):
        # with z = x the optimal-adversary error equals the analytic floor
        eps, d = 0.002, 700.0
        lap = Laplace(eps)
        f1 = density(lap, P(0, 0), P(0, 0))
        f2 = density(lap, P(0, 0), P(d, 0))
        assert perr(f1, f2) == pytest.approx(perr_min(eps, d), rel=1e-12)

    def test_both_zero(self):
        with pytest.raises(BothZero):
            perr(0.0, 0.0)

    @given(
        st.floats(min_value=1e-12, max_value=1e12),
        st.floats(min_value=1e-12, max_value=1e12),
        st.floats(min_value=1e-6, max_value=1e6),
    )
    def test_symmetric_and_scale_invariant(self, a, b, lam):
        assert perr(a, b) == perr(b, a)
        assert perr(lam * a, lam * b) == pytest.approx(perr(a, b), rel=1e-12)

    @given(st.floats(min_value=1e-6, max_value=5e-3), st.floats(min_value=0.0, max_value=1e5))
    def test_floor_identity_at_ulp_level(self, eps, d):
        # perr_min * (1 + exp(eps*d)) = 1, algebraically; floats get ~ulps
        t = eps * d
        if t > 700:
            return
        assert perr_min(eps, d) * (1.0 + math.exp(t)) == pytest.approx(1.0, rel=5e-15)

    def test_perr_equals_logistic_of_log_ratio(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            a, b = rng.uniform(1e-9, 1.0, 2)
            dm = abs(math.log(a / b))
            assert perr(a, b) == pytest.approx(1.0 / (1.0 + math.exp(dm)), rel=1e-12)


class TestPosterior:
    mech = DiscreteMechanism(
        (P(0, 0), P(1000, 0)),
        (P(0, 0), P(1000, 0)),
        np.array([[0.8, 0.2], [0.2, 0.8]]),
    )

    def test_uniform_prior_equal_likelihood(self):
        mech = DiscreteMechanism(
            (P(0, 0), P(1000, 0)),
            (P(0, 0), P(1000, 0)),
            np.array([[0.5, 0.5], [0.5, 0.5]]),
        )
        post = posterior(Pmf.uniform(mech.inputs), mech, 0)
        assert np.allclose(post.masses, [0.5, 0.5])

    def test_hand_evaluated_update(self):
        post = posterior(Pmf.uniform(self.mech.inputs), self.mech, 0)
        assert np.allclose(post.masses, [0.8, 0.2])

    def test_uninformative_observation(self):
        mech = DiscreteMechanism(
            (P(0, 0), P(1000, 0)),
            (P(0, 0), P(1000, 0)),
            np.array([[0.5, 0.5], [0.5, 0.5]]),
        )
        prior = Pmf(mech.inputs, np.array([0.9, 0.1]))
        post = posterior(prior, mech, 1)
        assert np.allclose(post.masses, [0.9, 0.1])

    def test_zero_evidence(self):
        mech = DiscreteMechanism(
            (P(0, 0), P(1000, 0)),
            (P(0, 0), P(1000, 0)),
            np.array([[1.0, 0.0], [1.0, 0.0]]),
        )
        with pytest.raises(ZeroEvidence):
            posterior(Pmf.uniform(mech.inputs), mech, 1)

    def test_likelihood_scale_invariance(self):
        # posterior with a uniform prior is the normalized likelihood column
        post = posterior(Pmf.uniform(self.mech.inputs), self.mech, 1)
        col = self.mech.matrix[:, 1]
        assert np.allclose(post.masses, col / col.sum())

    def test_rescaled_likelihood_column_same_posterior(self):
        # two mechanisms whose z=0 columns differ by a constant factor give
        # the same posterior for z=0
        inputs = (P(0, 0), P(1000, 0))
        outputs = (P(0, 0), P(500, 0), P(1000, 0))
        a = DiscreteMechanism(inputs, outputs, np.array([[0.6, 0.3, 0.1], [0.2, 0.3, 0.5]]))
        b = DiscreteMechanism(inputs, outputs, np.array([[0.3, 0.6, 0.1], [0.1, 0.4, 0.5]]))
        prior = Pmf(inputs, np.array([0.7, 0.3]))
        pa = posterior(prior, a, 0)
        pb = posterior(prior, b, 0)
        assert np.allclose(pa.masses, pb.masses)


class TestPriorDiameter:
    def test_single_point(self):
        assert prior_diameter(Pmf((P(3, 4),), np.array([1.0]))) == 0.0

    def test_two_points(self):
        prior = Pmf((P(0, 0), P(300, 400)), np.array([0.5, 0.5]))
        assert prior_diameter(prior) == 500.0

    def test_collinear_endpoints_dominate(self):
        prior = Pmf((P(0, 0), P(400, 0), P(900, 0)), np.array([0.2, 0.3, 0.5]))
        assert prior_diameter(prior) == 900.0

    def test_zero_mass_ignored(self):
        prior = Pmf((P(0, 0), P(10, 0), P(900, 0)), np.array([0.5, 0.5, 0.0]))
        assert prior_diameter(prior) == 10.0


class TestTightestEpsilon:
    def test_single_pair(self):
        mech = DiscreteMechanism(
            (P(0, 0), P(1000, 0)),
            (P(0, 0), P(1000, 0)),
            np.array([[0.8, 0.2], [0.2, 0.8]]),
        )
        assert tightest_epsilon(mech) == pytest.approx(math.log(4) / 1000.0)

    def test_identical_rows(self):
        mech = DiscreteMechanism(
            (P(0, 0), P(1000, 0)),
            (P(0, 0), P(1000, 0)),
            np.array([[0.6, 0.4], [0.6, 0.4]]),
        )
        assert tightest_epsilon(mech) == 0.0

    def test_one_sided_zero(self):
        mech = DiscreteMechanism(
            (P(0, 0), P(1000, 0)),
            (P(0, 0), P(1000, 0)),
            np.array([[1.0, 0.0], [0.5, 0.5]]),
        )
        assert tightest_epsilon(mech) == math.inf

    def test_relabeling_and_scaling_invariance(self):
        rng = np.random.default_rng(9)
        mech = random_mechanism(rng, n_in=4, n_out=5)
        t = tightest_epsilon(mech)
        # relabel inputs/outputs
        perm_in = rng.permutation(4)
        perm_out = rng.permutation(5)
        relabeled = DiscreteMechanism(
            tuple(mech.inputs[i] for i in perm_in),
            tuple(mech.outputs[j] for j in perm_out),
            mech.matrix[np.ix_(perm_in, perm_out)],
        )
        assert tightest_epsilon(relabeled) == pytest.approx(t, rel=1e-12)
        # scale the plane by lambda: epsilon scales by 1/lambda
        lam = 3.5
        scaled = DiscreteMechanism(
            tuple(P(p.x * lam, p.y * lam) for p in mech.inputs),
            mech.outputs,
            mech.matrix,
        )
        assert tightest_epsilon(scaled) == pytest.approx(t / lam, rel=1e-12)


class TestLemmaEquivalence:
    """The pairwise sup-log-ratio bound holds iff every triple clears the
    decision-error floor (checked with two independent implementations)."""

    def test_exhaustive_small_mechanisms(self):
        rng = np.random.default_rng(123)
        checked = 0
        for case in range(1000):
            mech = random_mechanism(rng, zero_column=(case % 5 == 0))
            t = tightest_epsilon(mech)
            if math.isinf(t):
                # any finite budget must fail both readings
                for eps in (1e-4, 1e-2):
                    assert not satisfies_geo_ind(mech, eps)
                    assert not satisfies_error_bound(mech, eps)
                checked += 1
                continue
            if t == 0.0:
                candidates = [1e-12, 1e-6, 1e-3]
            else:
                candidates = [t * 1.000001, t * 2.0, t * 0.999999, t * 0.5]
            for eps in candidates:
                assert satisfies_geo_ind(mech, eps) == satisfies_error_bound(mech, eps)
            assert satisfies_geo_ind(mech, t * 1.000001 if t > 0 else 1e-12)
            assert satisfies_error_bound(mech, t * 1.000001 if t > 0 else 1e-12)
            if t > 0:
                assert not satisfies_geo_ind(mech, t * 0.999999)
                assert not satisfies_error_bound(mech, t * 0.999999)
            checked += 1
        assert checked == 1000

    def test_perr_floor_from_tightest_epsilon(self):
        # realized perr never falls below the floor computed from the
        # tightest epsilon, over > 1e4 (density pair, distance) cases
        rng = np.random.default_rng(7)
        cases = 0
        while cases < 10_000:
            mech = random_mechanism(rng)
            t = tightest_epsilon(mech)
            if math.isinf(t):
                continue
            for i in range(len(mech.inputs)):
                for j in range(i + 1, len(mech.inputs)):
                    d = math.hypot(
                        mech.inputs[i].x - mech.inputs[j].x,
                        mech.inputs[i].y - mech.inputs[j].y,
                    )
                    floor = perr_min(t, d)
                    for k in range(len(mech.outputs)):
                        a, b = mech.matrix[i, k], mech.matrix[j, k]
                        if a <= 0 and b <= 0:
                            continue
                        assert perr(a, b) >= floor - 1e-12
                        cases += 1


class TestPosteriorBound:
    def test_single_point_prior_always_holds(self):
        rng = np.random.default_rng(11)
        mech = random_mechanism(rng, n_in=3, n_out=4)
        prior = Pmf((mech.inputs[1],), np.array([1.0]))
        report = posterior_bound_holds(prior, mech, tightest_epsilon(mech) * 1.01)
        assert report.holds
        assert report.prior_diameter == 0.0

    def test_discretized_laplace_two_point_prior(self):
        # symmetric 5-output alphabet: the normalizers cancel, the mechanism
        # is exactly eps-geo-ind, and the bound holds with strict margin
        eps = 0.002
        inputs = [P(0, 0), P(1000, 0)]
        outputs = [P(-2000, 0), P(-500, 0), P(500, 0), P(1500, 0), P(3000, 0)]
        mech = discretized_laplace(eps, inputs, outputs)
        assert tightest_epsilon(mech) <= eps * (1 + 1e-12)
        prior = Pmf(tuple(inputs), np.array([0.5, 0.5]))
        report = posterior_bound_holds(prior, mech, eps)
        assert report.holds
        assert report.worst_margin > 0.0

    def test_thousand_random_geo_ind_mechanisms(self):
        rng = np.random.default_rng(2023)
        for _ in range(1000):
            mech = random_mechanism(rng)
            t = tightest_epsilon(mech)
            eps = t * (1 + 1e-9) if t > 0 else 1e-6
            n = len(mech.inputs)
            masses = rng.dirichlet(np.ones(n))
            if rng.random() < 0.3 and n > 2:
                masses[int(rng.integers(0, n))] = 0.0
                masses /= masses.sum()
            prior = Pmf(mech.inputs, masses)
            report = posterior_bound_holds(prior, mech, eps)
            assert report.holds, (mech.matrix, masses, report)


class TestDecisionScenario:
    def test_requires_distinct_locations(self):
        with pytest.raises(ValueError):
            DecisionScenario(P(1, 2), P(1, 2))

    def test_distance(self):
        assert DecisionScenario(P(0, 0), P(3, 4)).d == 5.0

    def test_prior_is_fixed(self):
        with pytest.raises(ValueError):
            DecisionScenario(P(0, 0), P(1, 1), prior=(0.7, 0.3))


class TestPmfValidation:
    def test_mass_sum_enforced(self):
        with pytest.raises(ValueError):
            Pmf((0, 1), np.array([0.5, 0.6]))

    def test_negative_mass_rejected(self):
        with pytest.raises(ValueError):
            Pmf((0, 1), np.array([-0.1, 1.1]))

    def test_duplicate_support_rejected(self):
        with pytest.raises(ValueError):
            Pmf((0, 0), np.array([0.5, 0.5]))

    def test_csv_round_trip(self, tmp_path):
        mech = random_mechanism(np.random.default_rng(4), n_in=3, n_out=4)
        path = tmp_path / "mech.csv"
        mech.to_csv(path)
        back = DiscreteMechanism.from_csv(path)
        assert back.inputs == mech.inputs
        assert back.outputs == mech.outputs
        assert np.array_equal(back.matrix, mech.matrix)
