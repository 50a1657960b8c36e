"""Physical parameter types and closed-form homodyne-detector formulas.

Protocol-level quantities are in shot-noise units (SNU): variances are divided
by N0 = eta * I_lo and quadrature amplitudes by sqrt(N0). The two ``*_lo_only``
functions are the exception; they work in raw photon-count units and are used
for detector characterization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError

IR_GAIN = math.sqrt(2.0)
XI_IR = 2.0


@dataclass(frozen=True)
class DetectorModel:
    """Bob's homodyne detector.

    Attributes:
        eta: overall detection efficiency.
        v_ele: electronic noise variance in SNU.
        t_lo: overall transmission seen by light entering the LO port.
        i_lo: photons per LO pulse.
        f_lo: relative LO intensity fluctuation.
        alpha_hi, alpha_lo: linear detection limits in units of sqrt(N0).
    """

    eta: float = 0.6
    v_ele: float = 0.01
    t_lo: float = 0.5
    i_lo: float = 1e8
    f_lo: float = 0.001
    alpha_hi: float = 20.0
    alpha_lo: float = -20.0

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ConfigError(f"eta must lie in (0, 1], got {self.eta}")
        if self.v_ele < 0.0:
            raise ConfigError(f"v_ele must be >= 0, got {self.v_ele}")
        if not 0.0 < self.t_lo < 1.0:
            raise ConfigError(f"t_lo must lie in (0, 1), got {self.t_lo}")
        if self.i_lo < 1.0:
            raise ConfigError(f"i_lo must be >= 1, got {self.i_lo}")
        if self.f_lo < 0.0:
            raise ConfigError(f"f_lo must be >= 0, got {self.f_lo}")
        if not self.alpha_lo < self.alpha_hi:
            raise ConfigError("alpha_lo must be below alpha_hi")

    def shot_noise(self) -> float:
        """N0 = eta * I_lo, in photon-count units."""
        return self.eta * self.i_lo


@dataclass(frozen=True)
class ChannelModel:
    """Fiber link. ``xi`` is intrinsic excess noise for honest-channel runs."""

    length_km: float = 25.0
    loss_db_per_km: float = 0.21
    xi: float = 0.0

    def __post_init__(self):
        if self.length_km < 0.0:
            raise ConfigError(f"length_km must be >= 0, got {self.length_km}")
        if self.loss_db_per_km <= 0.0:
            raise ConfigError("loss_db_per_km must be > 0")
        if self.xi < 0.0:
            raise ConfigError("channel xi must be >= 0")

    def transmission(self) -> float:
        return 10.0 ** (-self.loss_db_per_km * self.length_km / 10.0)


@dataclass(frozen=True)
class AttackModel:
    """Eve's intercept-resend plus blinding-light configuration.

    ``r`` is the photon-number ratio I_ext / I_lo of the blinding pulses.
    When ``active`` is false every attack noise term is zero regardless of
    the other fields.
    """

    active: bool = True
    r: float = 0.1274
    t_ext: float = 0.49
    f_ext: float = 0.001
    xi_tech: float = 0.1
    gain: float = IR_GAIN

    def __post_init__(self):
        if self.r < 0.0:
            raise ConfigError(f"r must be >= 0, got {self.r}")
        if not 0.0 < self.t_ext < 1.0:
            raise ConfigError(f"t_ext must lie in (0, 1), got {self.t_ext}")
        if self.f_ext < 0.0 or self.xi_tech < 0.0:
            raise ConfigError("f_ext and xi_tech must be >= 0")
        if not math.isclose(self.gain, IR_GAIN, rel_tol=0.0, abs_tol=1e-12):
            raise ConfigError("intercept-resend gain is fixed at sqrt(2)")

    def xi_ir(self) -> float:
        return XI_IR if self.active else 0.0


@dataclass(frozen=True)
class ProtocolModel:
    v_a: float = 4.0
    beta: float = 0.95

    def __post_init__(self):
        if self.v_a < 0.0:
            raise ConfigError(f"v_a must be >= 0, got {self.v_a}")
        if not 0.0 < self.beta <= 1.0:
            raise ConfigError(f"beta must lie in (0, 1], got {self.beta}")


def hd_mean_lo_only(det: DetectorModel, t_port: float) -> float:
    """Mean homodyne output with only the LO present (photon-count units)."""
    _check_port(t_port)
    return det.eta * (1.0 - 2.0 * t_port) * det.i_lo


def hd_variance_lo_only(det: DetectorModel, t_port: float) -> float:
    """Output variance with only the LO present: fluctuation + shot + electronic.

    ``det.v_ele`` is taken in the same photon-count units as the other terms.
    """
    _check_port(t_port)
    eps = 1.0 - 2.0 * t_port
    fluct = (det.eta * eps * det.f_lo * det.i_lo) ** 2
    shot = 4.0 * (1.0 - t_port) * t_port * det.eta * det.i_lo
    return fluct + shot + det.v_ele


def _check_port(t_port):
    if not 0.0 < t_port < 1.0:
        raise DomainError(f"port transmission must lie in (0, 1), got {t_port}")


def cmrr(epsilon: float) -> float:
    """Common-mode rejection ratio in dB for an imbalance factor ``epsilon``.

    Quoted as a negative number for any useful detector (epsilon = 0.12 %
    gives about -52.4 dB); perfect imbalance, epsilon = 0.5, gives 0 dB.
    """
    if not epsilon > 0.0:
        raise DomainError(f"imbalance factor must be > 0, got {epsilon}")
    return 20.0 * math.log10(2.0 * epsilon)


def clip(x, det: DetectorModel):
    """Saturate ``x`` (scalar or array) to the detector's linear range."""
    out = np.clip(x, det.alpha_lo, det.alpha_hi)
    return float(out) if np.ndim(out) == 0 else out


def external_shot_noise(att: AttackModel, det: DetectorModel) -> float:
    """Shot noise of the blinding light at Bob, in SNU."""
    if not att.active:
        return 0.0
    return 4.0 * att.t_ext * (1.0 - att.t_ext) * att.r


def external_fluctuation_noise(att: AttackModel, det: DetectorModel) -> float:
    """Intensity-fluctuation noise of the blinding light at Bob, in SNU."""
    if not att.active:
        return 0.0
    eps = 1.0 - 2.0 * att.t_ext
    return att.r**2 * det.eta * att.f_ext**2 * eps**2 * det.i_lo


def external_bob_noise(att: AttackModel, det: DetectorModel) -> float:
    """Total blinding-light noise seen at Bob's output (SNU)."""
    return external_shot_noise(att, det) + external_fluctuation_noise(att, det)


def external_excess_noise(att: AttackModel, det: DetectorModel, ch: ChannelModel) -> float:
    """Blinding-light noise referred back through the fiber: V_B2 / T."""
    t = ch.transmission()
    if t <= 0.0:
        raise DomainError("channel transmission is zero")
    return external_bob_noise(att, det) / t


def external_excess_noise_input_referred(
    att: AttackModel, det: DetectorModel, ch: ChannelModel
) -> float:
    """Blinding-light noise referred to the channel input: V_B2 / (eta T).

    This is the contribution that ``estimate_channel`` actually reports,
    because the estimator normalizes every excess-noise term by eta*T.
    It differs from :func:`external_excess_noise` by a factor 1/eta.
    """
    return external_excess_noise(att, det, ch) / det.eta


def external_offset(att: AttackModel, det: DetectorModel) -> float:
    """Deterministic output offset from the blinding light, in sqrt(N0)."""
    if not att.active:
        return 0.0
    return att.r * math.sqrt(det.eta * det.i_lo) * (1.0 - 2.0 * att.t_ext)


def linear_bob_variance(
    proto: ProtocolModel, det: DetectorModel, ch: ChannelModel, att: AttackModel
) -> float:
    """Expected Var(X_B) (SNU) for an unclipped detector."""
    et = det.eta * ch.transmission()
    if att.active:
        noise = att.xi_ir() + att.xi_tech
        return et * (proto.v_a + noise) + 1.0 + det.v_ele + external_bob_noise(att, det)
    return et * (proto.v_a + ch.xi) + 1.0 + det.v_ele
