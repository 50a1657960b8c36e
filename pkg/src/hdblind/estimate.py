"""Alice/Bob parameter estimation from paired quadrature records.

Moments are accumulated per chunk with a two-pass centered sum and combined
with the pairwise update of Chan, Golub and LeVeque, so the result does not
depend on how the data was split.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import EstimationError, InsufficientDataError
from .mc import SimScenario, TrialBatch, generate, stream
from .model import DetectorModel, ProtocolModel

log = logging.getLogger(__name__)

VA_MISMATCH_WARN = 0.03
ESTIMATE_FIELDS = ("v_a_hat", "v_b_hat", "cov_ab_hat", "t_hat", "xi_hat", "clipped_fraction", "n")


@dataclass(frozen=True)
class MomentAccumulator:
    n: int = 0
    mean_a: float = 0.0
    mean_b: float = 0.0
    m2_a: float = 0.0
    m2_b: float = 0.0
    co_ab: float = 0.0
    n_clipped: int = 0

    @classmethod
    def from_arrays(cls, x_a, x_b, n_clipped: int = 0) -> "MomentAccumulator":
        x_a = np.asarray(x_a, dtype=float)
        x_b = np.asarray(x_b, dtype=float)
        n = len(x_a)
        if n == 0:
            return cls()
        ma, mb = x_a.mean(), x_b.mean()
        da, db = x_a - ma, x_b - mb
        return cls(n, float(ma), float(mb), float(da @ da), float(db @ db), float(da @ db), int(n_clipped))

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if other.n == 0:
            return self
        if self.n == 0:
            return other
        n = self.n + other.n
        da = other.mean_a - self.mean_a
        db = other.mean_b - self.mean_b
        w = self.n * other.n / n
        return MomentAccumulator(
            n=n,
            mean_a=self.mean_a + da * other.n / n,
            mean_b=self.mean_b + db * other.n / n,
            m2_a=self.m2_a + other.m2_a + da * da * w,
            m2_b=self.m2_b + other.m2_b + db * db * w,
            co_ab=self.co_ab + other.co_ab + da * db * w,
            n_clipped=self.n_clipped + other.n_clipped,
        )

    __add__ = merge

    def variance_a(self) -> float:
        return self.m2_a / (self.n - 1)

    def variance_b(self) -> float:
        return self.m2_b / (self.n - 1)

    def covariance(self) -> float:
        return self.co_ab / (self.n - 1)


def _from_batch(batch: TrialBatch) -> MomentAccumulator:
    n_clipped = int(np.count_nonzero(batch.clipped_hi | batch.clipped_lo))
    return MomentAccumulator.from_arrays(batch.x_a, batch.x_b, n_clipped)


def accumulate(batch: TrialBatch) -> MomentAccumulator:
    if batch.n < 2:
        raise InsufficientDataError(f"need at least 2 pulses, got {batch.n}")
    return _from_batch(batch)


def accumulate_all(batches: Iterable[TrialBatch]) -> MomentAccumulator:
    acc = MomentAccumulator()
    for b in batches:
        acc = acc.merge(_from_batch(b))
    if acc.n < 2:
        raise InsufficientDataError(f"need at least 2 pulses, got {acc.n}")
    return acc


def accumulate_scenario(scn: SimScenario, chunk: int = 1 << 20, workers: int = 1) -> MomentAccumulator:
    """Moments of a scenario's batch without holding the whole batch in memory.

    Chunks are reduced in index order, so the result is the same for any
    number of workers.
    """
    if workers <= 1:
        return accumulate_all(stream(scn, chunk))
    starts = range(0, scn.n, chunk)
    part = lambda a: _from_batch(generate(scn, a, min(scn.n, a + chunk)))  # noqa: E731
    with ThreadPoolExecutor(max_workers=workers) as pool:
        accs = list(pool.map(part, starts))
    total = MomentAccumulator()
    for acc in accs:
        total = total.merge(acc)
    if total.n < 2:
        raise InsufficientDataError(f"need at least 2 pulses, got {total.n}")
    return total


@dataclass(frozen=True)
class Estimate:
    v_a_hat: float
    v_b_hat: float
    cov_ab_hat: float
    t_hat: float
    xi_hat: float
    clipped_fraction: float
    n: int
    n0_hat: float = 1.0

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ESTIMATE_FIELDS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def estimate_channel(acc: MomentAccumulator, det: DetectorModel, proto: ProtocolModel) -> Estimate:
    """Transmission and excess noise (SNU, N0 = 1) from the accumulated moments.

    T is taken from the regression slope Cov_AB / V_A with V_A the sample
    variance of Alice's symbols; the configured V_A is only cross-checked.
    """
    if acc.n < 2:
        raise InsufficientDataError(f"need at least 2 pulses, got {acc.n}")
    v_a = acc.variance_a()
    v_b = acc.variance_b()
    cov = acc.covariance()
    if v_a <= 0:
        raise EstimationError("Alice's sample variance is zero")
    if proto.v_a > 0 and abs(v_a - proto.v_a) / proto.v_a > VA_MISMATCH_WARN:
        log.warning("sample V_A %.4g differs from configured %.4g by more than 3%%", v_a, proto.v_a)
    if cov <= 0:
        raise EstimationError(f"Alice-Bob covariance is not positive ({cov:.3g})")
    t_hat = (cov / v_a) ** 2 / det.eta
    et = det.eta * t_hat
    if et == 0.0:
        raise EstimationError("estimated transmission is zero")
    xi_hat = (v_b - et * v_a - 1.0 - det.v_ele) / et
    return Estimate(
        v_a_hat=v_a,
        v_b_hat=v_b,
        cov_ab_hat=cov,
        t_hat=t_hat,
        xi_hat=xi_hat,
        clipped_fraction=acc.n_clipped / acc.n,
        n=acc.n,
    )


def estimate_scenario(scn: SimScenario, workers: int = 1) -> Estimate:
    return estimate_channel(accumulate_scenario(scn, workers=workers), scn.detector, scn.protocol)


def standard_errors(est: Estimate) -> dict:
    """Descriptive Gaussian-theory standard errors of the sample moments."""
    n = est.n
    return {
        "v_a_hat": est.v_a_hat * math.sqrt(2.0 / (n - 1)),
        "v_b_hat": est.v_b_hat * math.sqrt(2.0 / (n - 1)),
        "cov_ab_hat": math.sqrt((est.v_a_hat * est.v_b_hat + est.cov_ab_hat**2) / (n - 1)),
    }
