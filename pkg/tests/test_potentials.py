import numpy as np
import pytest
from numpy.testing import assert_allclose

from torus_action import (
    Convexity,
    TorusGrid,
    TrigPath,
    TrigTerm,
    check_gradient,
    check_midpoint_convexity,
    check_path_resolvable,
    make_linear_drift,
    make_log_sum_exp,
    make_manufactured,
    make_quadratic_form,
    make_quadratic_shift,
    potential_from_dict,
)

TWO_PI = 2.0 * np.pi


def cos_path(n=1, freq=(1,), coeff=None, periods=(TWO_PI,)):
    coeff = (1.0,) * n if coeff is None else tuple(coeff)
    return TrigPath(periods, n, (TrigTerm("cos", freq, coeff),))


# ---------------------------------------------------------------------------
# trig paths
# ---------------------------------------------------------------------------

def test_trig_path_evaluates_terms():
    path = TrigPath(
        (TWO_PI, TWO_PI),
        2,
        (
            TrigTerm("cos", (1, 0), (1.0, 0.0)),
            TrigTerm("sin", (0, 2), (0.0, 3.0)),
        ),
    )
    t = np.array([0.3, 1.1])
    assert_allclose(path(t), [np.cos(0.3), 3.0 * np.sin(2.2)], rtol=1e-14)


def test_trig_path_vectorizes_over_leading_axes():
    path = cos_path()
    t = np.linspace(0.0, TWO_PI, 12).reshape(3, 4, 1)
    out = path(t)
    assert out.shape == (3, 4, 1)
    assert_allclose(out[..., 0], np.cos(t[..., 0]), rtol=1e-14)


def test_trig_path_normalizes_container_types():
    # list periods and tuple periods must compare equal after construction
    a = TrigPath([TWO_PI], 1, [TrigTerm("cos", [1], [1.0])])
    b = TrigPath((TWO_PI,), 1, (TrigTerm("cos", (1,), (1.0,)),))
    assert a.periods == b.periods
    assert a.terms == b.terms


def test_trig_term_rejects_unknown_kind():
    with pytest.raises(ValueError, match="trig"):
        TrigTerm("tan", (1,), (1.0,))


def test_trig_path_laplacian_multiplies_by_symbol():
    # d^2/dt^2 cos(k t) = -k^2 cos(k t) on period 2*pi
    path = cos_path(freq=(3,))
    lap = path.laplacian()
    t = np.array([0.7])
    assert_allclose(lap(t), -9.0 * path(t), rtol=1e-14)
    # mixed frequencies on an anisotropic box
    path2 = TrigPath((TWO_PI, 4.0), 1, (TrigTerm("sin", (1, 2), (1.0,)),))
    lap2 = path2.laplacian()
    sym = (2 * np.pi * 1 / TWO_PI) ** 2 + (2 * np.pi * 2 / 4.0) ** 2
    t2 = np.array([0.3, 0.9])
    assert_allclose(lap2(t2), -sym * path2(t2), rtol=1e-13)


def test_trig_path_algebra_and_mean():
    a = cos_path()
    b = a.scaled(-2.0)
    t = np.array([1.2])
    assert_allclose(a.plus(b)(t), -a(t), rtol=1e-14)
    assert_allclose(a.box_mean(), [0.0], atol=1e-15)
    const = TrigPath.constant((TWO_PI,), [4.0])
    assert_allclose(const.box_mean(), [4.0], rtol=1e-15)
    assert_allclose(TrigPath.zero((TWO_PI,), 2).box_mean(), [0.0, 0.0])


def test_trig_path_dict_round_trip():
    path = TrigPath(
        (TWO_PI, 4.0),
        2,
        (
            TrigTerm("cos", (1, 0), (1.0, 0.5)),
            TrigTerm("sin", (2, 1), (0.0, -3.0)),
        ),
    )
    again = TrigPath.from_dict(path.to_dict(), periods=(TWO_PI, 4.0), n=2)
    t = np.array([0.4, 2.2])
    assert_allclose(again(t), path(t), rtol=1e-15)


def test_check_path_resolvable_nyquist():
    g = TorusGrid((TWO_PI,), (8,))
    check_path_resolvable(cos_path(freq=(3,)), g)  # 2*3 < 8, fine
    with pytest.raises(ValueError, match="resolvabl"):
        check_path_resolvable(cos_path(freq=(4,)), g)
    with pytest.raises(ValueError, match="period"):
        check_path_resolvable(cos_path(periods=(4.0,)), g)


# ---------------------------------------------------------------------------
# potential factories
# ---------------------------------------------------------------------------

def test_quadratic_shift_value_and_gradient():
    pot = make_quadratic_shift(2, TrigPath.constant((TWO_PI,), [1.0, -1.0]))
    t = np.array([0.5])
    x = np.array([3.0, 1.0])
    assert_allclose(pot.value(t, x), 0.5 * (2.0 ** 2 + 2.0 ** 2))
    assert_allclose(pot.gradient(t, x), [2.0, 2.0])
    assert_allclose(pot.hessian(t, x), np.eye(2))
    assert pot.convexity is Convexity.STRICTLY_CONVEX


def test_linear_drift_gradient_is_the_path():
    drift = cos_path(n=2, freq=(1,), coeff=(1.0, 0.5))
    pot = make_linear_drift(2, drift)
    t = np.array([0.9])
    x = np.array([2.0, -1.0])
    assert_allclose(pot.value(t, x), np.dot(drift(t), x), rtol=1e-14)
    assert_allclose(pot.gradient(t, x), drift(t), rtol=1e-14)
    assert_allclose(pot.hessian(t, x), np.zeros((2, 2)))
    assert pot.convexity is Convexity.CONVEX


def test_quadratic_form_requires_spd():
    with pytest.raises(ValueError, match="symmetric"):
        make_quadratic_form(np.array([[1.0, 2.0], [0.0, 1.0]]),
                            TrigPath.zero((TWO_PI,), 2))
    with pytest.raises(ValueError, match="positive definite"):
        make_quadratic_form(np.array([[1.0, 0.0], [0.0, -1.0]]),
                            TrigPath.zero((TWO_PI,), 2))


def test_quadratic_form_matches_formula():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    drift = cos_path(n=2, freq=(1,), coeff=(1.0, -1.0))
    pot = make_quadratic_form(A, drift)
    rng = np.random.default_rng(11)
    t = rng.uniform(0.0, TWO_PI, size=1)
    x = rng.standard_normal(2)
    expected = 0.5 * x @ A @ x + drift(t) @ x
    assert_allclose(pot.value(t, x), expected, rtol=1e-13)
    assert_allclose(pot.gradient(t, x), A @ x + drift(t), rtol=1e-13)
    assert_allclose(pot.hessian(t, x), A)


def test_log_sum_exp_matches_naive_formula():
    S = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])
    offs = [TrigPath.constant((TWO_PI,), [c]) for c in (0.0, 0.3, -0.2)]
    pot = make_log_sum_exp(S, offs)
    rng = np.random.default_rng(5)
    t = rng.uniform(0.0, TWO_PI, size=1)
    x = rng.standard_normal(2)
    raw = np.log(sum(np.exp(S[j] @ x + offs[j](t)[0]) for j in range(3)))
    assert_allclose(pot.value(t, x), raw, rtol=1e-12)
    assert pot.convexity is Convexity.STRICTLY_CONVEX


def test_log_sum_exp_is_overflow_safe():
    S = np.array([[1.0], [-1.0]])
    offs = [TrigPath.zero((TWO_PI,), 1)] * 2
    pot = make_log_sum_exp(S, offs)
    t = np.zeros(1)
    big = np.array([800.0])
    v = pot.value(t, big)
    assert np.isfinite(v)
    assert_allclose(v, 800.0, rtol=1e-12)
    g = pot.gradient(t, big)
    assert np.all(np.isfinite(g))


def test_log_sum_exp_rank_deficient_is_only_convex():
    # directions all share the same x-component, so growth is flat along e_2
    S = np.array([[1.0, 0.0], [1.0, 0.0]])
    offs = [TrigPath.zero((TWO_PI,), 1)] * 2
    pot = make_log_sum_exp(S, offs)
    assert pot.convexity is Convexity.CONVEX


def test_manufactured_gradient_hits_target():
    # with F(t,x) = |x|^2/2 + <g(t),x> and g = lap(u*) - u*, the target
    # path solves the stationarity equation exactly at every t
    g = TorusGrid((TWO_PI, TWO_PI), (8, 8))
    target = TrigPath(
        (TWO_PI, TWO_PI),
        2,
        (
            TrigTerm("sin", (1, 0), (1.0, 0.0)),
            TrigTerm("cos", (1, 2), (0.0, 0.5)),
        ),
    )
    pot, exact = make_manufactured(g, 2, target)
    assert pot.convexity is Convexity.STRICTLY_CONVEX
    assert_allclose(exact.values, target(g.coords()), atol=1e-15)
    rng = np.random.default_rng(2)
    for _ in range(10):
        t = rng.uniform(0.0, TWO_PI, size=2)
        lap_t = target.laplacian()(t)
        assert_allclose(pot.gradient(t, target(t)), lap_t, atol=1e-12)


def test_manufactured_rejects_unresolvable_target():
    g = TorusGrid((TWO_PI,), (8,))
    with pytest.raises(ValueError, match="resolvabl"):
        make_manufactured(g, 1, cos_path(freq=(4,)))


# ---------------------------------------------------------------------------
# self checks
# ---------------------------------------------------------------------------

def test_check_gradient_accepts_correct_potentials():
    shift = make_quadratic_shift(2, cos_path(n=2, coeff=(1.0, 0.3)))
    assert check_gradient(shift, samples=100, seed=0) < 1e-9
    drift = make_linear_drift(1, cos_path())
    assert check_gradient(drift, samples=100, seed=0) < 1e-9


def test_check_gradient_flags_corrupted_gradient():
    base = make_quadratic_shift(1, TrigPath.zero((TWO_PI,), 1))
    from dataclasses import replace
    bad = replace(base, gradient=lambda t, x: 0.9 * base.gradient(t, x))
    assert check_gradient(bad, samples=100, seed=0) > 0.05


def test_check_midpoint_convexity_no_violation_for_convex():
    shift = make_quadratic_shift(2, cos_path(n=2, coeff=(1.0, 0.3)))
    assert check_midpoint_convexity(shift, triples=500, seed=1) <= 1e-10
    S = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])
    offs = [TrigPath.zero((TWO_PI,), 1)] * 3
    lse = make_log_sum_exp(S, offs)
    assert check_midpoint_convexity(lse, triples=500, seed=1) <= 1e-10


def test_check_midpoint_convexity_flags_concave():
    base = make_quadratic_shift(1, TrigPath.zero((TWO_PI,), 1))
    from dataclasses import replace
    bad = replace(base, value=lambda t, x: -base.value(t, x))
    assert check_midpoint_convexity(bad, triples=500, seed=1) > 0.1


# ---------------------------------------------------------------------------
# dict loader
# ---------------------------------------------------------------------------

def test_potential_from_dict_dispatch():
    g = TorusGrid((TWO_PI,), (16,))
    spec = {
        "kind": "quadratic_shift",
        "n": 1,
        "shift": {"terms": [{"trig": "cos", "freq": [1], "coeff": [0.8]}]},
    }
    bundle = potential_from_dict(spec, g)
    assert bundle.potential.kind == "quadratic_shift"
    assert bundle.quad_matrix is not None
    assert_allclose(bundle.quad_matrix, np.eye(1))

    spec = {
        "kind": "linear_drift",
        "n": 1,
        "drift": {"terms": [{"trig": "cos", "freq": [0], "coeff": [1.0]}]},
    }
    bundle = potential_from_dict(spec, g)
    assert bundle.potential.convexity is Convexity.CONVEX

    spec = {
        "kind": "manufactured",
        "n": 1,
        "target": {"terms": [{"trig": "sin", "freq": [1], "coeff": [1.0]}]},
    }
    bundle = potential_from_dict(spec, g)
    assert bundle.exact is not None
    assert bundle.exact.n == 1


def test_potential_from_dict_rejects_unknown_kind():
    g = TorusGrid((TWO_PI,), (16,))
    with pytest.raises(ValueError, match="kind"):
        potential_from_dict({"kind": "mystery", "n": 1}, g)
