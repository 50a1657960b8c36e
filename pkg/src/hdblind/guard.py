"""Threshold countermeasure: discard blocks with too many samples near the detector limits."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError
from .mc import SimScenario, TrialBatch, generate
from .model import DetectorModel

ROC_HEADER = ("s_hi", "s_lo", "max_fraction", "false_alarm", "detection", "n_blocks", "block_size")


@dataclass(frozen=True)
class GuardPolicy:
    s_hi: float = 19.0
    s_lo: float = -19.0
    max_fraction: float = 1e-3

    def validate(self, det: DetectorModel) -> None:
        if not det.alpha_lo < self.s_lo < self.s_hi < det.alpha_hi:
            raise ConfigError(
                f"thresholds [{self.s_lo}, {self.s_hi}] must lie strictly inside "
                f"[{det.alpha_lo}, {det.alpha_hi}] in increasing order"
            )
        # max_fraction = 1 is allowed as the never-discard reference policy
        if not 0.0 <= self.max_fraction <= 1.0:
            raise ConfigError(f"max_fraction must lie in [0, 1], got {self.max_fraction}")

    @classmethod
    def default_for(cls, det: DetectorModel, max_fraction: float = 1e-3) -> "GuardPolicy":
        return cls(0.95 * det.alpha_hi, 0.95 * det.alpha_lo, max_fraction)


@dataclass(frozen=True)
class GuardVerdict:
    fraction_outside: float
    accept: bool
    n: int


def fraction_outside(x_b: np.ndarray, policy: GuardPolicy) -> float:
    outside = np.count_nonzero((x_b >= policy.s_hi) | (x_b <= policy.s_lo))
    return outside / len(x_b)


def evaluate(batch: TrialBatch, policy: GuardPolicy, det: DetectorModel | None = None) -> GuardVerdict:
    """Verdict on one block of what Bob recorded (clipped data)."""
    if det is not None:
        policy.validate(det)
    elif not policy.s_lo < policy.s_hi:
        raise ConfigError("s_lo must be below s_hi")
    if batch.n < 1:
        raise ConfigError("empty block")
    frac = fraction_outside(batch.x_b, policy)
    return GuardVerdict(frac, frac <= policy.max_fraction, batch.n)


def default_policy_grid(det: DetectorModel) -> list[GuardPolicy]:
    grid = []
    for scale in (0.95, 0.9, 0.85, 0.8):
        for mf in (1e-4, 1e-3, 1e-2):
            grid.append(GuardPolicy(scale * det.alpha_hi, scale * det.alpha_lo, mf))
    return grid


def block_fractions(scn: SimScenario, policies: Sequence[GuardPolicy], n_blocks: int, block_size: int) -> np.ndarray:
    """Fraction outside per (block, policy), over consecutive pulse blocks of ``scn``."""
    scn = replace(scn, n=n_blocks * block_size, clipping=True)
    out = np.empty((n_blocks, len(policies)))
    for b in range(n_blocks):
        x_b = generate(scn, b * block_size, (b + 1) * block_size).x_b
        for j, p in enumerate(policies):
            out[b, j] = fraction_outside(x_b, p)
    return out


def roc_sweep(
    honest_scn: SimScenario,
    attack_scn: SimScenario,
    policy_grid: Iterable[GuardPolicy],
    n_blocks: int = 100,
    block_size: int = 100_000,
) -> list[dict]:
    """Empirical false-alarm and detection rates for every policy in the grid."""
    if honest_scn.detector != attack_scn.detector:
        raise ConfigError("honest and attack scenarios must share the detector")
    policies = list(policy_grid)
    for p in policies:
        p.validate(honest_scn.detector)
    honest = block_fractions(honest_scn, policies, n_blocks, block_size)
    attack = block_fractions(attack_scn, policies, n_blocks, block_size)
    return roc_rows(policies, honest, attack, block_size)


def roc_rows(policies: Sequence[GuardPolicy], honest: np.ndarray, attack: np.ndarray, block_size: int) -> list[dict]:
    """ROC table from per-block fractions as returned by :func:`block_fractions`."""
    rows = []
    for j, p in enumerate(policies):
        rows.append(
            {
                "s_hi": p.s_hi,
                "s_lo": p.s_lo,
                "max_fraction": p.max_fraction,
                "false_alarm": float(np.mean(honest[:, j] > p.max_fraction)),
                "detection": float(np.mean(attack[:, j] > p.max_fraction)),
                "n_blocks": len(honest),
                "block_size": block_size,
            }
        )
    return rows


def write_roc_csv(rows: Sequence[dict], fh, header: Sequence[str] = ()) -> None:
    for line in header:
        fh.write(f"# {line}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(ROC_HEADER)
    for row in rows:
        w.writerow([repr(row[k]) if isinstance(row[k], float) else row[k] for k in ROC_HEADER])
