import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hdblind import guard, keyrate, model
from hdblind.estimate import MomentAccumulator
from hdblind.guard import GuardPolicy
from hdblind.model import AttackModel, ChannelModel, DetectorModel, ProtocolModel
from hdblind.rng import normals

finite = st.floats(-1e3, 1e3, allow_nan=False)
limits = st.tuples(st.floats(-50, -0.1), st.floats(0.1, 50))


@given(arrays(float, st.integers(1, 200), elements=finite), limits)
def test_clip_idempotent_monotone(x, lim):
    det = DetectorModel(alpha_lo=lim[0], alpha_hi=lim[1])
    y = model.clip(x, det)
    assert np.array_equal(model.clip(y, det), y)
    order = np.argsort(x, kind="stable")
    assert np.all(np.diff(y[order]) >= 0)
    inside = (x > lim[0]) & (x < lim[1])
    assert np.array_equal(y[inside], x[inside])


@given(
    arrays(float, st.integers(4, 300), elements=st.floats(-1e6, 1e6)),
    st.integers(1, 299),
    st.integers(1, 299),
)
def test_merge_associative(x, c1, c2):
    n = len(x)
    a, b = sorted((c1 % n, c2 % n))
    y = x[::-1] * 0.5 + 3.0
    parts = [MomentAccumulator.from_arrays(x[i:j], y[i:j]) for i, j in ((0, a), (a, b), (b, n))]
    left = (parts[0] + parts[1]) + parts[2]
    right = parts[0] + (parts[1] + parts[2])
    whole = MomentAccumulator.from_arrays(x, y)
    scale = max(1.0, whole.m2_a, whole.m2_b)
    for acc in (left, right):
        assert acc.n == n
        assert abs(acc.m2_a - whole.m2_a) <= 1e-9 * scale
        assert abs(acc.m2_b - whole.m2_b) <= 1e-9 * scale
        assert abs(acc.co_ab - whole.co_ab) <= 1e-9 * scale


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**63), st.integers(0, 12), st.lists(st.integers(0, 200_000), min_size=1, max_size=5))
def test_rng_partition_invariance(seed, channel, cuts):
    stop = max(cuts) + 1
    edges = sorted({0, stop, *cuts})
    parts = np.concatenate([normals(seed, channel, a, b) for a, b in zip(edges, edges[1:])])
    assert np.array_equal(parts, normals(seed, channel, 0, stop))


@given(st.floats(0.001, 0.3), st.floats(0.001, 0.3), st.floats(0.0, 100.0), st.floats(0.01, 0.49))
def test_external_excess_noise_monotone_in_r(r1, r2, length, t_ext):
    assume(r1 < r2)
    det, ch = DetectorModel(), ChannelModel(length)
    lo = model.external_excess_noise(AttackModel(r=r1, t_ext=t_ext), det, ch)
    hi = model.external_excess_noise(AttackModel(r=r2, t_ext=t_ext), det, ch)
    assert lo < hi


@given(st.just(0.0) | st.floats(1e-12, 0.5), st.floats(0.01, 0.99))
def test_offset_and_shot_zero_iff_r_zero(r, t_ext):
    att = AttackModel(r=r, t_ext=t_ext)
    det = DetectorModel()
    assert (model.external_shot_noise(att, det) == 0) == (r == 0)
    if t_ext != 0.5:
        assert (model.external_offset(att, det) == 0) == (r == 0)


@settings(deadline=None)
@given(
    st.floats(1.0, 100.0),
    st.floats(0.01, 1.0),
    st.floats(0.0, 0.5),
    st.floats(0.3, 1.0),
    st.floats(0.0, 0.1),
)
def test_keyrate_bounds(v_a, t, xi, eta, v_ele):
    det = DetectorModel(eta=eta, v_ele=v_ele)
    rep = keyrate.key_rate(ProtocolModel(v_a=v_a), t, xi, det)
    assert rep.chi_be >= -1e-12
    assert rep.k <= 0.95 * rep.i_ab
    lams = keyrate.symplectic_eigenvalues(v_a, t, xi, det)
    assert all(l >= 1 - 1e-9 for l in lams)


@given(arrays(float, st.integers(1, 200), elements=st.floats(-25, 25)), st.floats(0.5, 10), st.floats(0.5, 10))
def test_guard_nested_sets(x, s1, s2):
    inner, outer = sorted((s1, s2))
    f_in = guard.fraction_outside(x, GuardPolicy(inner, -inner))
    f_out = guard.fraction_outside(x, GuardPolicy(outer, -outer))
    assert f_out <= f_in
