import math

import numpy as np
import pytest

from hdblind import keyrate
from hdblind.errors import DomainError, NumericalDomainError
from hdblind.estimate import Estimate
from hdblind.keyrate import KeyRateReport
from hdblind.model import ChannelModel, DetectorModel, ProtocolModel

DET = DetectorModel(eta=0.6, v_ele=0.01)
T25 = ChannelModel(25.0).transmission()


# --- independent oracle: entangling-cloner covariance matrices ---

I2, Z2 = np.eye(2), np.diag([1.0, -1.0])


def _omega(modes):
    w = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return np.kron(np.eye(modes), w)


def symplectic_spectrum(gamma):
    ev = np.linalg.eigvals(1j * _omega(len(gamma) // 2) @ gamma)
    return np.sort(np.abs(ev.real))[::2]


def g_oracle(nu):
    if nu <= 1 + 1e-12:
        return 0.0
    a, b = (nu + 1) / 2, (nu - 1) / 2
    return a * math.log2(a) - b * math.log2(b)


def holevo_oracle(v_a, t, xi, eta, v_ele):
    """Trusted-detector Holevo bound from the full 8-mode state (A, B', F, G)."""
    v = v_a + 1.0
    c = math.sqrt(t * (v * v - 1.0))
    vb = t * (v + 1.0 / t - 1.0 + xi)
    gamma_ab = np.block([[v * I2, c * Z2], [c * Z2, vb * I2]])

    # detector noise as one arm of an EPR pair (F0, G) with variance w
    w = 1.0 + v_ele / (1.0 - eta) if eta < 1 else 1.0
    ce = math.sqrt(w * w - 1.0)
    gamma_fg = np.block([[w * I2, ce * Z2], [ce * Z2, w * I2]])
    full = np.zeros((8, 8))
    full[:4, :4] = gamma_ab
    full[4:, 4:] = gamma_fg
    # beam splitter between B (modes index 1) and F0 (index 2)
    s, k = math.sqrt(eta), math.sqrt(1.0 - eta)
    bs = np.eye(8)
    bs[2:6, 2:6] = np.block([[s * I2, k * I2], [-k * I2, s * I2]])
    full = bs @ full @ bs.T

    # homodyne X on B' (rows 2, 3): condition A, F, G
    keep = [0, 1, 4, 5, 6, 7]
    ga = full[np.ix_(keep, keep)]
    sig = full[np.ix_(keep, [2, 3])]
    gb = full[2:4, 2:4]
    proj = np.diag([1.0 / gb[0, 0], 0.0])
    cond = ga - sig @ proj @ sig.T

    s_ab = sum(g_oracle(nu) for nu in symplectic_spectrum(gamma_ab))
    s_cond = sum(g_oracle(nu) for nu in symplectic_spectrum(cond))
    return s_ab - s_cond


def mutual_info_oracle(v_a, t, xi, eta, v_ele):
    snr = eta * t * v_a / (1.0 + eta * t * xi + v_ele)
    return 0.5 * math.log2(1.0 + snr)


POINTS = [
    (4.0, T25, 0.05, 0.6, 0.01),
    (8.0, 0.5, 0.0, 0.55, 0.01),
    (20.0, 0.9, 0.1, 0.7, 0.05),
    (2.0, 0.1, 0.02, 0.6, 0.0),
    (50.0, 0.3, 0.2, 0.9, 0.1),
]


@pytest.mark.parametrize("v_a, t, xi, eta, v_ele", POINTS)
def test_holevo_matches_covariance_matrix_oracle(v_a, t, xi, eta, v_ele):
    det = DetectorModel(eta=eta, v_ele=v_ele)
    assert keyrate.holevo_bound(v_a, t, xi, det) == pytest.approx(holevo_oracle(v_a, t, xi, eta, v_ele), abs=1e-7)


@pytest.mark.parametrize("v_a, t, xi, eta, v_ele", POINTS)
def test_mutual_information_matches_snr_form(v_a, t, xi, eta, v_ele):
    det = DetectorModel(eta=eta, v_ele=v_ele)
    assert keyrate.mutual_information(v_a, t, xi, det) == pytest.approx(
        mutual_info_oracle(v_a, t, xi, eta, v_ele), rel=1e-12
    )


def test_lossless_noiseless_channel():
    det = DetectorModel(eta=1.0, v_ele=0.0)
    rep = keyrate.key_rate(ProtocolModel(v_a=4.0, beta=1.0), 1.0, 0.0, det)
    assert rep.chi_be == pytest.approx(0.0, abs=1e-9)
    assert rep.k == pytest.approx(0.5 * math.log2(5.0), rel=1e-9)
    assert rep.k > 0


def test_huge_noise_gives_no_key():
    for L in (1.0, 25.0, 80.0):
        t = ChannelModel(L).transmission()
        assert keyrate.key_rate(ProtocolModel(v_a=4.0), t, 10.0, DET).k < 0


def test_g_entropy():
    assert keyrate.g_entropy(0.0) == 0.0
    xs = np.linspace(0, 10, 101)
    gs = [keyrate.g_entropy(x) for x in xs]
    assert all(g >= 0 for g in gs)
    assert all(a < b for a, b in zip(gs, gs[1:]))
    assert keyrate.g_entropy(1.0) == pytest.approx(2.0)


def test_domain_errors():
    proto = ProtocolModel(v_a=4.0)
    for t in (0.0, 1.1, -0.5):
        with pytest.raises(DomainError):
            keyrate.key_rate(proto, t, 0.0, DET)
    with pytest.raises(DomainError):
        keyrate.key_rate(proto, 0.5, -0.1, DET)


def test_unphysical_eigenvalues_rejected():
    with pytest.raises(NumericalDomainError):
        keyrate._pair(0.5, 0.0)


def test_report_invariants():
    rep = keyrate.key_rate(ProtocolModel(v_a=5.0), T25, 0.02, DET)
    assert rep.k <= 0.95 * rep.i_ab
    assert rep.chi_be >= 0
    assert set(rep.to_dict()) == {"i_ab", "chi_be", "k", "v_a_used", "xi_null"}


def test_xi_null_self_consistency():
    proto = ProtocolModel(v_a=8.0)
    thr = keyrate.xi_null(proto, T25, DET)
    assert thr.has_key
    assert abs(keyrate.key_rate(proto, T25, thr.xi_null, DET).k) < 1e-8
    assert keyrate.key_rate(proto, T25, thr.xi_null - 1e-6, DET).k > 0
    assert keyrate.key_rate(proto, T25, thr.xi_null + 1e-6, DET).k < 0


def test_xi_null_no_key():
    thr = keyrate.xi_null(ProtocolModel(v_a=4.0, beta=0.5), 0.01, DET)
    assert thr == (0.0, False)


def test_xi_null_decreases_with_length():
    vals = []
    for L in range(10, 51, 5):
        t = ChannelModel(float(L)).transmission()
        va = keyrate.optimize_va(t, DET, 0.01).v_a
        vals.append(keyrate.xi_null(ProtocolModel(v_a=va), t, DET).xi_null)
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    t20, t40 = ChannelModel(20.0).transmission(), ChannelModel(40.0).transmission()
    p = ProtocolModel(v_a=8.0)
    assert keyrate.xi_null(p, t40, DET).xi_null < keyrate.xi_null(p, t20, DET).xi_null


def test_optimize_va_at_zero_length_sits_on_upper_bound():
    # on a lossless link the rate keeps growing past V_A = 100, so the
    # constrained optimum is the upper end of the search range
    grid = np.linspace(1, 100, 100)
    ks = [keyrate.key_rate(ProtocolModel(v_a=v), 1.0, 0.01, DET).k for v in grid]
    assert np.all(np.diff(ks) > 0)
    opt = keyrate.optimize_va(1.0, DET, 0.01)
    assert opt.has_key and opt.k > 0 and opt.v_a == 100.0


def test_optimize_va_interior_at_25km():
    opt = keyrate.optimize_va(T25, DET, 0.01)
    assert 1.0 < opt.v_a < 100.0


@pytest.mark.parametrize("L", [0.0, 25.0, 60.0])
def test_optimize_va_dominates_grid(L):
    t = ChannelModel(L).transmission()
    opt = keyrate.optimize_va(t, DET, 0.01)
    assert 1.0 <= opt.v_a <= 100.0
    for va in np.linspace(1, 100, 100):
        assert opt.k >= keyrate.key_rate(ProtocolModel(v_a=va), t, 0.01, DET).k - 1e-9


def test_optimize_va_no_key_flag():
    opt = keyrate.optimize_va(1e-4, DetectorModel(eta=0.1, v_ele=0.5), 0.5)
    assert not opt.has_key
    assert 1.0 <= opt.v_a <= 100.0


def test_report_clamps_estimated_inputs():
    rep = keyrate.report(ProtocolModel(v_a=8.0), 1.003, -0.02, DET)
    ref = keyrate.key_rate(ProtocolModel(v_a=8.0), 1.0, 0.0, DET)
    assert rep.k == ref.k and rep.xi_null > 0


def test_breach_predicate():
    est = Estimate(8.0, 3.0, 2.0, 0.2, 0.05, 0.4, 1000)
    assert keyrate.is_breach(est, KeyRateReport(1, 0.5, 0.4, 8.0, 0.1))
    assert not keyrate.is_breach(est, KeyRateReport(1, 0.5, 0.4, 8.0, 0.04))
    assert not keyrate.is_breach(est, KeyRateReport(1, 0.5, 0.4, 8.0, 0.0))
    assert not keyrate.is_breach(est, KeyRateReport(1, 0.5, 0.4, 8.0, None))


def test_derivative_signs_at_random_points():
    rng = np.random.default_rng(2024)
    h = 1e-4
    checked = 0
    while checked < 10:
        det = DetectorModel(eta=rng.uniform(0.4, 0.9), v_ele=rng.uniform(0.0, 0.05))
        t = rng.uniform(0.05, 0.9)
        xi = rng.uniform(0.0, 0.1)
        proto = ProtocolModel(v_a=rng.uniform(2.0, 30.0))
        k = keyrate.key_rate(proto, t, xi, det).k
        if k <= 0:
            continue
        checked += 1
        assert keyrate.key_rate(proto, t, xi + h, det).k < k
        assert keyrate.key_rate(proto, t + h, xi, det).k > k
