"""Monte Carlo generation of (X_A, X_B) records for honest and attacked links.

All quadratures are in SNU. Only the X quadrature is generated; P behaves
identically. With a single quadrature there is nothing to sift.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import model
from .errors import ConfigError
from .model import AttackModel, ChannelModel, DetectorModel, ProtocolModel
from .rng import Channel, normals

BATCH_CSV_HEADER = ("pulse_index", "x_a", "x_b", "clipped_hi", "clipped_lo")


@dataclass(frozen=True)
class SimScenario:
    protocol: ProtocolModel = field(default_factory=ProtocolModel)
    detector: DetectorModel = field(default_factory=DetectorModel)
    channel: ChannelModel = field(default_factory=ChannelModel)
    attack: AttackModel = field(default_factory=AttackModel)
    clipping: bool = True
    seed: int = 0
    n: int = 1_000_000

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")


@dataclass(frozen=True)
class TrialBatch:
    """Paired per-pulse records for pulses ``start .. start+n-1``."""

    x_a: np.ndarray
    x_b: np.ndarray
    clipped_hi: np.ndarray
    clipped_lo: np.ndarray
    start: int = 0

    def __post_init__(self):
        n = len(self.x_a)
        if not (len(self.x_b) == len(self.clipped_hi) == len(self.clipped_lo) == n):
            raise ValueError("batch columns differ in length")
        for arr in (self.x_a, self.x_b, self.clipped_hi, self.clipped_lo):
            arr.flags.writeable = False

    @property
    def n(self) -> int:
        return len(self.x_a)

    @property
    def clipped_fraction(self) -> float:
        return float(np.count_nonzero(self.clipped_hi | self.clipped_lo)) / self.n

    @classmethod
    def concatenate(cls, parts: Sequence["TrialBatch"]) -> "TrialBatch":
        return cls(
            np.concatenate([p.x_a for p in parts]),
            np.concatenate([p.x_b for p in parts]),
            np.concatenate([p.clipped_hi for p in parts]),
            np.concatenate([p.clipped_lo for p in parts]),
            start=parts[0].start,
        )


class _Draws:
    """Normal draws for one pulse range, looked up by noise channel."""

    def __init__(self, seed: int, start: int, stop: int):
        self.seed, self.start, self.stop = seed, start, stop

    def __call__(self, channel: Channel) -> np.ndarray:
        return normals(self.seed, channel, self.start, self.stop)


def sample_alice(v_a: float, draws: _Draws) -> tuple[np.ndarray, np.ndarray]:
    """Alice's Gaussian symbols X_A and the emitted quadrature X = X_A + X_0."""
    if v_a < 0:
        raise ConfigError("v_a must be >= 0")
    x_a = math.sqrt(v_a) * draws(Channel.ALICE)
    return x_a, x_a + draws(Channel.VACUUM)


def eve_intercept_resend(x: np.ndarray, draws: _Draws, gain: float = model.IR_GAIN) -> np.ndarray:
    """Heterodyne X with a 50/50 split, then re-prepare a coherent state with gain ``gain``."""
    if not math.isclose(gain, model.IR_GAIN, rel_tol=0.0, abs_tol=1e-12):
        raise ConfigError("intercept-resend gain is fixed at sqrt(2)")
    x_m = (x + draws(Channel.EVE_HETERODYNE)) / math.sqrt(2.0)
    return gain * x_m + draws(Channel.EVE_PREPARE)


def bob_measure(scn: SimScenario, x_signal: np.ndarray, draws: _Draws) -> np.ndarray:
    """Linear (unclipped) homodyne output X_Bi for the signal reaching Bob.

    ``x_signal`` is Alice's emitted quadrature on an honest link or Eve's
    re-prepared quadrature under attack.
    """
    det, att = scn.detector, scn.attack
    et = det.eta * scn.channel.transmission()
    loss = math.sqrt(1.0 - et) * draws(Channel.BOB_LOSS)
    ele = math.sqrt(det.v_ele) * draws(Channel.ELECTRONIC)
    if not att.active:
        x_b = math.sqrt(et) * x_signal + loss + ele
        if scn.channel.xi > 0:
            x_b += math.sqrt(et * scn.channel.xi) * draws(Channel.HONEST_XI)
        return x_b

    tech = math.sqrt(att.xi_tech) * draws(Channel.TECH)
    x_b = math.sqrt(et) * (x_signal + tech) + loss + ele
    offset = model.external_offset(att, det)
    if att.r > 0:
        x_b += offset
        x_b += math.sqrt(model.external_shot_noise(att, det)) * draws(Channel.EXT_SHOT)
        # intensity jitter of the blinding pulse moves the offset pulse by pulse
        x_b += offset * att.f_ext * draws(Channel.EXT_JITTER)
    return x_b


def generate(scn: SimScenario, start: int, stop: int) -> TrialBatch:
    """Records for pulses ``start .. stop-1`` of the scenario."""
    draws = _Draws(scn.seed, start, stop)
    x_a, x = sample_alice(scn.protocol.v_a, draws)
    if scn.attack.active:
        x = eve_intercept_resend(x, draws, scn.attack.gain)
    x_b = bob_measure(scn, x, draws)
    if scn.clipping:
        hi = x_b >= scn.detector.alpha_hi
        lo = x_b <= scn.detector.alpha_lo
        x_b = model.clip(x_b, scn.detector)
    else:
        hi = np.zeros(len(x_b), dtype=bool)
        lo = hi.copy()
    return TrialBatch(x_a, x_b, hi, lo, start=start)


def partition_bounds(n: int, partitions: int) -> list[tuple[int, int]]:
    if partitions < 1:
        raise ConfigError("partitions must be >= 1")
    edges = [n * k // partitions for k in range(partitions + 1)]
    return [(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def run(scn: SimScenario, partitions: int = 1, workers: int = 1) -> TrialBatch:
    """Generate the whole batch. The result does not depend on ``partitions``."""
    bounds = partition_bounds(scn.n, partitions)
    try:
        if workers > 1 and len(bounds) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(lambda ab: generate(scn, *ab), bounds))
        else:
            parts = [generate(scn, a, b) for a, b in bounds]
    except MemoryError as exc:
        raise MemoryError(f"cannot allocate a batch of {scn.n} pulses") from exc
    return parts[0] if len(parts) == 1 else TrialBatch.concatenate(parts)


def stream(scn: SimScenario, chunk: int = 1 << 20) -> Iterator[TrialBatch]:
    """Yield the scenario's batch in consecutive chunks of at most ``chunk`` pulses."""
    for a in range(0, scn.n, chunk):
        yield generate(scn, a, min(scn.n, a + chunk))


def write_batch_csv(batch: TrialBatch, fh, header: Sequence[str] = ()) -> None:
    """Write the batch as CSV to the open text file ``fh`` (LF line endings)."""
    for line in header:
        fh.write(f"# {line}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(BATCH_CSV_HEADER)
    idx = range(batch.start, batch.start + batch.n)
    for i, a, b, hi, lo in zip(
        idx, batch.x_a.tolist(), batch.x_b.tolist(), batch.clipped_hi.tolist(), batch.clipped_lo.tolist()
    ):
        w.writerow((i, repr(a), repr(b), int(hi), int(lo)))


def write_batch_npz(batch: TrialBatch, path) -> None:
    np.savez(
        path,
        pulse_index=np.arange(batch.start, batch.start + batch.n),
        x_a=batch.x_a,
        x_b=batch.x_b,
        clipped_hi=batch.clipped_hi,
        clipped_lo=batch.clipped_lo,
    )


# --- detector characterization (raw units, LO only) ---

PLANCK = 6.62607015e-34
LIGHT_SPEED = 299_792_458.0


@dataclass(frozen=True)
class LoCharacterization:
    """Electronics and source settings for the LO-only detector sweep.

    ``gain_v`` maps one photon-count unit of the subtracted photocurrent to
    volts. The default puts the onset of saturation near 45 uW for a 0.12 %
    imbalance.
    """

    gain_v: float = 2.0e-6
    rate_hz: float = 1e6
    wavelength_nm: float = 1550.0
    daq_limit_v: float = 0.5
    v_ele_v2: float = 1e-5

    def photons_per_pulse(self, power_uw):
        photon_energy = PLANCK * LIGHT_SPEED / (self.wavelength_nm * 1e-9)
        return np.asarray(power_uw, dtype=float) * 1e-6 / (self.rate_hz * photon_energy)


def simulate_lo_characterization(
    det: DetectorModel,
    lo_power_grid: Sequence[float],
    balance: float,
    n_per_point: int,
    seed: int,
    setup: LoCharacterization = LoCharacterization(),
) -> list[tuple[float, float, float]]:
    """Empirical (power_uW, mean_V, variance_V2) of the DAQ-clamped output."""
    if len(lo_power_grid) == 0:
        raise ConfigError("power grid is empty")
    if not 0.0 < balance < 1.0:
        raise ConfigError("balance must lie in (0, 1)")
    eps = 1.0 - 2.0 * balance
    rows = []
    for k, power in enumerate(lo_power_grid):
        if power < 0:
            raise ConfigError("LO power must be >= 0")
        photons = float(setup.photons_per_pulse(power))
        draws = _Draws(seed, k * n_per_point, (k + 1) * n_per_point)
        jitter = 1.0 + det.f_lo * draws(Channel.LO_JITTER)
        x = det.eta * eps * photons * jitter
        x += 2.0 * math.sqrt(det.eta * balance * (1.0 - balance) * photons) * draws(Channel.LO_VACUUM)
        volts = setup.gain_v * x + math.sqrt(setup.v_ele_v2) * draws(Channel.LO_ELECTRONIC)
        volts = np.clip(volts, -setup.daq_limit_v, setup.daq_limit_v)
        rows.append((float(power), float(volts.mean()), float(volts.var(ddof=1))))
    return rows
