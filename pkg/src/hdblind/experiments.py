"""Figure and sweep drivers. Each returns plain rows or dicts; writing is left to the CLI."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import config, guard, keyrate, model
from .estimate import Estimate, MomentAccumulator, estimate_channel
from .mc import SimScenario, generate, simulate_lo_characterization

FIG2_HEADER = ("power_uW", "mean_V", "var_V2", "setting")
FIG3_HEADER = ("r", "n0_ext", "vf_ext_f1", "vf_ext_f2", "xi_ir", "xi_tech")
FIG4_SCATTER_HEADER = ("x_a", "x_b", "x_bi")
FIG5_HEADER = ("L_km", "r", "t_hat")
FIG5_LINEAR_HEADER = ("L_km", "t_hat_i", "t_nominal")
FIG6_HEADER = ("r", "L_km", "xi_hat_r", "xi_null")
VERDICT_HEADER = ("scenario", "block", "fraction_outside", "accept")


def grid(start: float, stop: float, step: float) -> list[float]:
    """Inclusive arithmetic grid, rounded to kill accumulated float error."""
    if step <= 0:
        raise ValueError("step must be positive")
    k = int(math.floor((stop - start) / step + 1e-9))
    return [round(start + i * step, 12) for i in range(k + 1)]


def ordered_map(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """``map`` that may run in a thread pool but always returns results in input order."""
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --- paired linear / clipped estimation ---


@dataclass(frozen=True)
class PairedEstimate:
    linear: Estimate
    clipped: Estimate


def paired_moments(scn: SimScenario, chunk: int = 1 << 20) -> tuple[MomentAccumulator, MomentAccumulator]:
    """Moments of the linear and the clipped record from one set of draws."""
    lin_scn = replace(scn, clipping=False)
    det = scn.detector
    lin, clp = MomentAccumulator(), MomentAccumulator()
    for a in range(0, scn.n, chunk):
        b = generate(lin_scn, a, min(scn.n, a + chunk))
        x_b = model.clip(b.x_b, det)
        n_clip = int(np.count_nonzero((b.x_b >= det.alpha_hi) | (b.x_b <= det.alpha_lo)))
        lin = lin.merge(MomentAccumulator.from_arrays(b.x_a, b.x_b))
        clp = clp.merge(MomentAccumulator.from_arrays(b.x_a, x_b, n_clip))
    return lin, clp


def paired_estimate(scn: SimScenario) -> PairedEstimate:
    lin, clp = paired_moments(scn)
    return PairedEstimate(
        estimate_channel(lin, scn.detector, scn.protocol),
        estimate_channel(clp, scn.detector, scn.protocol),
    )


def clipped_estimate(scn: SimScenario) -> Estimate:
    return paired_estimate(scn).clipped


def assess(est: Estimate, scn: SimScenario) -> dict:
    """Estimate plus key-rate report at the estimated transmission and the breach verdict."""
    rep = keyrate.report(scn.protocol, est.t_hat, est.xi_hat, scn.detector)
    return {
        "estimate": est.to_dict(),
        "keyrate": rep.to_dict(),
        "breach": keyrate.is_breach(est, rep),
    }


# --- Fig. 2: LO-only detector statistics ---


def fig2_rows(cfg) -> list[tuple]:
    det = config.detector(cfg)
    setup = config.lo_setup(cfg)
    powers = grid(0.0, cfg["fig2.power_max_uw"], cfg["fig2.power_step_uw"])
    rows = []
    for setting, key in ((1, "fig2.epsilon_1"), (2, "fig2.epsilon_2")):
        balance = (1.0 - cfg[key]) / 2.0
        # each setting gets its own stream family so the two curves are independent
        seed = (cfg["sim.seed"] << 1) | (setting - 1)
        stats = simulate_lo_characterization(det, powers, balance, cfg["fig2.n_per_point"], seed, setup)
        rows.extend((p, m, v, setting) for p, m, v in stats)
    return rows


# --- Fig. 3: analytic noise budget ---


def fig3_rows(cfg) -> list[tuple]:
    det = config.detector(cfg)
    att = config.attack(cfg)
    rows = []
    for r in grid(0.0, cfg["fig3.r_max"], cfg["fig3.r_step"]):
        a1 = replace(att, active=True, r=r, f_ext=cfg["fig3.f_ext_1"])
        a2 = replace(a1, f_ext=cfg["fig3.f_ext_2"])
        rows.append(
            (
                r,
                model.external_shot_noise(a1, det),
                model.external_fluctuation_noise(a1, det),
                model.external_fluctuation_noise(a2, det),
                a1.xi_ir(),
                a1.xi_tech,
            )
        )
    return rows


# --- Fig. 4: one attacked link, linear vs clipped ---


def fig4(cfg) -> tuple[dict, list[tuple]]:
    scn = config.scenario(cfg)
    pe = paired_estimate(scn)
    t_nom = scn.channel.transmission()
    summary = {
        "v_a": scn.protocol.v_a,
        "t_nominal": t_nom,
        "d_ext": model.external_offset(scn.attack, scn.detector) if scn.attack.active else 0.0,
        "xi_ext_input_referred": model.external_excess_noise_input_referred(
            scn.attack, scn.detector, scn.channel
        ),
        "linear": assess(pe.linear, scn),
        "clipped": assess(pe.clipped, scn),
    }
    summary["xi_hat_i_expected"] = (
        model.XI_IR + scn.attack.xi_tech + summary["xi_ext_input_referred"] if scn.attack.active else scn.channel.xi
    )
    m = min(scn.n, cfg["fig4.scatter_points"])
    lin = generate(replace(scn, clipping=False), 0, m)
    clipped = model.clip(lin.x_b, scn.detector)
    scatter = list(zip(lin.x_a.tolist(), clipped.tolist(), lin.x_b.tolist()))
    return summary, scatter


# --- Fig. 5: transmission bias versus distance ---


def fig5(cfg, workers: int = 1) -> tuple[list[tuple], list[tuple]]:
    lengths = list(cfg["fig5.l_grid"])
    rs = list(cfg["fig5.r_list"])
    points = [(L, r) for L in lengths for r in rs]

    def clipped_t(point):
        L, r = point
        return clipped_estimate(config.scenario(cfg, length_km=L, r=r)).t_hat

    def linear_t(L):
        scn = config.scenario(cfg, length_km=L, r=rs[0], clipping=False)
        lin, _ = paired_moments(scn)
        return estimate_channel(lin, scn.detector, scn.protocol).t_hat

    t_r = ordered_map(clipped_t, points, workers)
    t_i = ordered_map(linear_t, lengths, workers)
    rows = [(L, r, t) for (L, r), t in zip(points, t_r)]
    linear = [(L, t, config.channel(cfg, L).transmission()) for L, t in zip(lengths, t_i)]
    return rows, linear


# --- Fig. 6: excess noise versus attacker intensity ---


def fig6_r_grid(cfg) -> list[float]:
    coarse = grid(0.0, cfg["fig6.r_coarse_max"], cfg["fig6.r_coarse_step"])
    fine = grid(cfg["fig6.r_fine_min"], cfg["fig6.r_fine_max"], cfg["fig6.r_fine_step"])
    return sorted(set(coarse) | set(fine))


def fig6_point(cfg, length_km: float, r: float, v_a: float) -> tuple[float, float, bool]:
    scn = config.scenario(config.apply(cfg, {"protocol.v_a": v_a}, "fig6"), length_km=length_km, r=r)
    est = clipped_estimate(scn)
    rep = keyrate.report(scn.protocol, est.t_hat, est.xi_hat, scn.detector)
    return est.xi_hat, rep.xi_null, keyrate.is_breach(est, rep)


def fig6(cfg, workers: int = 1, r_values: Sequence[float] | None = None) -> tuple[list[tuple], dict]:
    lengths = list(cfg["fig6.l_list"])
    rs = list(r_values) if r_values is not None else fig6_r_grid(cfg)
    v_a = {L: config.resolve_v_a(cfg, L) for L in lengths}
    points = [(L, r) for L in lengths for r in rs]
    results = ordered_map(lambda p: fig6_point(cfg, p[0], p[1], v_a[p[0]]), points, workers)
    rows = [(r, L, xi, xn) for (L, r), (xi, xn, _) in zip(points, results)]
    per_l = {}
    for L in lengths:
        hits = [r for (L2, r), (_, _, br) in zip(points, results) if L2 == L and br]
        per_l[repr(L)] = {"v_a": v_a[L], "r_star": min(hits) if hits else None}
    return rows, per_l


# --- countermeasure ---


def guard_run(cfg, workers: int = 1) -> tuple[list[tuple], list[dict], guard.GuardPolicy]:
    attack_scn = config.scenario(cfg)
    honest_cfg = config.apply(cfg, {"attack.active": False}, "guard")
    honest_scn = config.scenario(honest_cfg, clipping=True)
    attack_scn = replace(attack_scn, clipping=True)
    policy = guard.GuardPolicy(cfg["guard.s_hi"], cfg["guard.s_lo"], cfg["guard.max_fraction"])
    policy.validate(attack_scn.detector)
    n_blocks, size = cfg["guard.n_blocks"], cfg["guard.block_size"]

    policies = [policy] + [p for p in guard.default_policy_grid(attack_scn.detector) if p != policy]
    fracs = ordered_map(
        lambda s: guard.block_fractions(s, policies, n_blocks, size), [honest_scn, attack_scn], workers
    )
    verdicts = []
    for name, f in zip(("honest", "attack"), fracs):
        for b in range(n_blocks):
            frac = float(f[b, 0])
            verdicts.append((name, b, frac, int(frac <= policy.max_fraction)))
    roc = guard.roc_rows(policies, fracs[0], fracs[1], size)
    return verdicts, roc, policy
