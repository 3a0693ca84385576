import json

import numpy as np
import pytest

from lipsafe.environments import (ENVIRONMENTS, EnvironmentSpec, LipschitzSpecError,
                                  environment, verify_lipschitz)


def test_grid_sizes(muddy, hilly):
    assert len(muddy.state_samples()) == 101
    assert len(muddy.action_samples()) == 121
    assert len(hilly.state_samples()) == 139
    assert len(hilly.action_samples()) == 7


def test_muddy_step_examples(muddy):
    assert muddy.step(0.0, 1.0) == 1.0
    assert muddy.dampening(6.0) == pytest.approx(0.5)
    assert muddy.step(6.0, 2.0) == 7.0
    assert muddy.step(9.5, 5.0) == 9.5
    assert muddy.step(-10.0, -12.0) == -10.0


def test_hilly_step_examples(hilly):
    assert hilly.step(2.2, 0.0) == pytest.approx(2.2 - 0.05859375)
    assert hilly.slope(2.2) == pytest.approx(0.05859375)
    assert hilly.step(0.5, 0.1) == pytest.approx(0.6)
    assert hilly.elevation(0.0) == 0.0
    assert hilly.elevation(5.2) == pytest.approx(0.25)


def test_hilly_elevation_is_even(hilly):
    s = hilly.state_samples()
    assert np.allclose(hilly.elevation(s), hilly.elevation(-s))
    assert np.allclose(hilly.slope(s), -hilly.slope(-s))


def test_slope_matches_finite_difference(hilly):
    s = np.linspace(-6.5, 6.5, 301)
    h = 1e-6
    fd = (hilly.elevation(s + h) - hilly.elevation(s - h)) / (2 * h)
    assert np.allclose(hilly.slope(s), fd, atol=1e-5)


@pytest.mark.parametrize("name,step", [("muddy", 0.2), ("hilly", 0.1)])
def test_flat_region_outcomes_are_grid_aligned(name, step):
    env = ENVIRONMENTS[name]
    s = env.state_samples()
    s = s[np.abs(s) <= env.A + 1e-9]
    out = env.step(s[:, None], env.action_samples()[None, :])
    assert np.allclose(out / step, np.rint(out / step), atol=1e-9)


def test_step_is_vectorized_and_pure(muddy):
    s = np.array([0.0, 6.0])
    a = np.array([1.0, 2.0])
    before = s.copy()
    assert np.allclose(muddy.step(s, a), [1.0, 7.0])
    assert np.array_equal(s, before)
    assert np.array_equal(muddy.step(s, a), muddy.step(s, a))


def test_initial_set(muddy, hilly):
    assert muddy.in_initial_set(3.0) and not muddy.in_initial_set(3.2)
    assert hilly.in_initial_set(-1.2) and not hilly.in_initial_set(1.3)


def test_lookup_and_roundtrip(muddy):
    assert environment("muddy") is ENVIRONMENTS["muddy"]
    with pytest.raises(KeyError):
        environment("swampy")
    d = json.loads(json.dumps(muddy.to_dict()))
    assert EnvironmentSpec.from_dict(d) == muddy
    custom = EnvironmentSpec.from_dict({"lipschitz": {"l_s": 4.0}}, muddy)
    assert custom.lipschitz.l_s == 4.0 and custom.lipschitz.l_a == 1.0
    with pytest.raises(ValueError):
        EnvironmentSpec.from_dict({"colour": "blue"}, muddy)


def test_with_lipschitz(hilly):
    e = hilly.with_lipschitz(l_s=2.0)
    assert e.lipschitz.l_s == 2.0 and e.lipschitz.l_a == hilly.lipschitz.l_a
    assert hilly.lipschitz.l_s == 1.4


def test_verify_lipschitz_passes(muddy, hilly):
    for env in (muddy, hilly):
        rep = verify_lipschitz(env, 20_000)
        assert rep.ok, rep
        assert rep.max_state_ratio <= env.lipschitz.l_s
        assert rep.max_action_ratio <= env.lipschitz.l_a + 1e-9
        rep.raise_for_violation()


def test_verify_lipschitz_restricts_hilly_to_safe_region(hilly):
    rep = verify_lipschitz(hilly, 1000)
    assert rep.state_region == pytest.approx((-6.6, 6.6), abs=0.1)


def test_verify_lipschitz_reports_small_constant(hilly):
    rep = verify_lipschitz(hilly.with_lipschitz(l_s=1.0), 20_000)
    assert not rep.ok and rep.state_violations > 0 and rep.action_violations == 0
    with pytest.raises(LipschitzSpecError):
        rep.raise_for_violation()
