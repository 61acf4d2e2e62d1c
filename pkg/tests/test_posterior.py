import math

import numpy as np
import pytest
from scipy import integrate, stats

import drrs


def test_normal_kg_factor():
    assert drrs.normal_kg_factor(0.0) == pytest.approx(1 / math.sqrt(2 * math.pi))
    values = drrs.normal_kg_factor(np.array([-3.0, -1.0, 0.0]))
    assert values.shape == (3,)
    assert np.all(np.diff(values) > 0)


@pytest.mark.parametrize("z,dof", [(-1.2, 5.0), (-0.3, 2.5), (0.0, 10.0)])
def test_student_kg_factor_is_expected_positive_part(z, dof):
    expected, _ = integrate.quad(lambda t: (z + t) * stats.t.pdf(t, dof), -z, np.inf)
    assert drrs.student_kg_factor(z, dof) == pytest.approx(expected, rel=1e-6)


def test_student_kg_factor_limits():
    assert drrs.student_kg_factor(-0.5, 1.0) == math.inf
    assert drrs.student_kg_factor(-0.5, 0.5) == math.inf
    assert drrs.student_kg_factor(-0.5, 1e7) == pytest.approx(drrs.normal_kg_factor(-0.5), rel=1e-5)
    values = drrs.student_kg_factor(np.array([-1.0, -1.0]), np.array([1.0, 4.0]))
    assert values[0] == math.inf and math.isfinite(values[1])


def test_belief_from_stats(stats_of):
    belief = drrs.belief_from_stats(stats_of(1.0, 2.0, 3.0))
    assert belief == drrs.ConjugateBelief(loc=2.0, strength=3.0, shape=1.0, rate=1.0)
    assert belief.dof == 2.0
    assert belief.scale == pytest.approx(math.sqrt(1.0 / 3.0))
    with pytest.raises(drrs.InsufficientSamples):
        drrs.belief_from_stats(stats_of(1.0))


def test_degenerate_belief(stats_of, rng):
    belief = drrs.belief_from_stats(stats_of(4.0, 4.0, 4.0))
    assert belief.degenerate
    assert belief.scale == 0.0
    assert drrs.draw_mean(belief, rng) == 4.0
    assert drrs.kg_score(belief, 0.0) == 0.0


def test_draw_means_order_of_draws(make_stats):
    beliefs = [drrs.belief_from_stats(make_stats(n, mean=n, variance=2.0)) for n in (3, 5, 8)]
    first = np.random.Generator(np.random.Philox(5))
    second = np.random.Generator(np.random.Philox(5))
    draws = drrs.draw_means(beliefs, first)
    z = second.standard_normal(3)
    chi2 = second.chisquare(np.array([2.0, 4.0, 7.0]))
    expected = [b.loc + b.scale * z[n] / math.sqrt(chi2[n] / b.dof) for n, b in enumerate(beliefs)]
    np.testing.assert_allclose(draws, expected, rtol=1e-12)


def test_draw_mean_marginal(make_stats, rng):
    belief = drrs.belief_from_stats(make_stats(11, mean=1.0, variance=4.0))
    draws = np.array([drrs.draw_mean(belief, rng) for _ in range(20_000)])
    marginal = stats.t(df=belief.dof, loc=belief.loc, scale=belief.scale)
    assert stats.kstest(draws, marginal.cdf).pvalue > 1e-4


def test_kg_score_direction_symmetry(make_stats):
    belief = drrs.belief_from_stats(make_stats(6, mean=1.0, variance=3.0))
    assert drrs.kg_score(belief, 2.5, "min") == pytest.approx(drrs.kg_score(belief.negated(), -2.5, "max"))
    assert drrs.kg_score(belief, 2.5, "max") == pytest.approx(drrs.kg_score(belief, -0.5, "max"))
    with pytest.raises(ValueError):
        drrs.kg_score(belief, 0.0, "up")


def test_kg_score_decreases_with_distance(make_stats):
    belief = drrs.belief_from_stats(make_stats(6, mean=0.0, variance=1.0))
    scores = [drrs.kg_score(belief, d) for d in (0.0, 0.5, 1.0, 2.0)]
    assert all(a > b for a, b in zip(scores, scores[1:]))
    known = [drrs.kg_score(belief, d, known_variance=True) for d in (0.0, 0.5)]
    assert known[0] > known[1] > 0
