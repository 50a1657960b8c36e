"""Command-line front end.

Exit codes: 0 success, 1 invalid configuration, 2 I/O failure, 3 numerical
domain or estimation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import __version__, config, experiments, keyrate, svg
from .errors import ConfigError, DomainError, EstimationError, NumericalDomainError
from .estimate import estimate_scenario
from .guard import ROC_HEADER
from .mc import run as run_batch
from .mc import write_batch_csv, write_batch_npz

log = logging.getLogger("hdblind")

FORMATS = ("csv", "json", "svg", "npz")
DEFAULT_FORMATS = ("csv", "json")
SVG_SCATTER_MAX = 5000

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


class Output:
    """Writes result files that all carry the same reproducibility header."""

    def __init__(self, out_dir: Path, cfg: dict, formats: Sequence[str]):
        self.dir = Path(out_dir)
        self.cfg = cfg
        self.formats = set(formats)
        self.written: list[Path] = []
        self.dir.mkdir(parents=True, exist_ok=True)

    def wants(self, fmt: str) -> bool:
        return fmt in self.formats

    def header(self) -> dict:
        return {
            "tool": "hdblind",
            "version": __version__,
            "config_sha256": config.config_hash(self.cfg),
            "seed": self.cfg["sim.seed"],
        }

    def header_lines(self) -> list[str]:
        h = self.header()
        return [
            f"{h['tool']} {h['version']}",
            f"config_sha256 {h['config_sha256']}",
            f"seed {h['seed']}",
            f"config {config.canonical_json(self.cfg)}",
        ]

    def _open(self, name: str):
        path = self.dir / name
        self.written.append(path)
        return open(path, "w", encoding="utf-8", newline="")

    def csv(self, name: str, columns: Sequence[str], rows) -> None:
        with self._open(name) as fh:
            for line in self.header_lines():
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])

    def json(self, name: str, payload: dict) -> None:
        doc = {"header": {**self.header(), "config": self.cfg}, **payload}
        with self._open(name) as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, ensure_ascii=False)
            fh.write("\n")

    def svg(self, name: str, plot: svg.Plot) -> None:
        with self._open(name) as fh:
            fh.write(svg.render(plot, comment=" | ".join(self.header_lines())))


# --- subcommands ---


def cmd_fig2(cfg, out: Output, workers: int) -> None:
    rows = experiments.fig2_rows(cfg)
    if out.wants("csv"):
        out.csv("fig2.csv", experiments.FIG2_HEADER, rows)
    if out.wants("json"):
        out.json("fig2.json", {"rows": [dict(zip(experiments.FIG2_HEADER, r)) for r in rows]})
    if out.wants("svg"):
        for col, unit, name in ((1, "mean (V)", "fig2_mean.svg"), (2, "variance (V^2)", "fig2_var.svg")):
            plot = svg.Plot("LO-only homodyne output", "LO power (uW)", unit)
            for s in (1, 2):
                sel = [r for r in rows if r[3] == s]
                plot.add(f"setting {s}", [r[0] for r in sel], [r[col] for r in sel])
            out.svg(name, plot)


def cmd_fig3(cfg, out: Output, workers: int) -> None:
    rows = experiments.fig3_rows(cfg)
    if out.wants("csv"):
        out.csv("fig3.csv", experiments.FIG3_HEADER, rows)
    if out.wants("json"):
        out.json("fig3.json", {"rows": [dict(zip(experiments.FIG3_HEADER, r)) for r in rows]})
    if out.wants("svg"):
        plot = svg.Plot("Excess noise contributions", "R", "noise (SNU)")
        for j, label in enumerate(experiments.FIG3_HEADER[1:], start=1):
            plot.add(label, [r[0] for r in rows], [r[j] for r in rows])
        out.svg("fig3.svg", plot)


def cmd_fig4(cfg, out: Output, workers: int) -> None:
    summary, scatter = experiments.fig4(cfg)
    if out.wants("csv"):
        out.csv("fig4_scatter.csv", experiments.FIG4_SCATTER_HEADER, scatter)
    if out.wants("json"):
        out.json("fig4.json", summary)
    if out.wants("svg"):
        pts = scatter[:SVG_SCATTER_MAX]
        plot = svg.Plot("Alice vs Bob quadratures", "X_A (SNU)", "X_B (SNU)")
        plot.add("linear", [p[0] for p in pts], [p[2] for p in pts], "points")
        plot.add("clipped", [p[0] for p in pts], [p[1] for p in pts], "points")
        out.svg("fig4.svg", plot)
    c = summary["clipped"]
    log.info("xi_hat_r=%.6g xi_null=%.6g breach=%s", c["estimate"]["xi_hat"], c["keyrate"]["xi_null"], c["breach"])


def cmd_fig5(cfg, out: Output, workers: int) -> None:
    rows, linear = experiments.fig5(cfg, workers)
    if out.wants("csv"):
        out.csv("fig5.csv", experiments.FIG5_HEADER, rows)
        out.csv("fig5_linear.csv", experiments.FIG5_LINEAR_HEADER, linear)
    if out.wants("json"):
        out.json(
            "fig5.json",
            {
                "rows": [dict(zip(experiments.FIG5_HEADER, r)) for r in rows],
                "linear": [dict(zip(experiments.FIG5_LINEAR_HEADER, r)) for r in linear],
            },
        )
    if out.wants("svg"):
        plot = svg.Plot("Transmission estimate vs distance", "L (km)", "T estimate")
        plot.add("linear", [r[0] for r in linear], [r[1] for r in linear])
        for rv in cfg["fig5.r_list"]:
            sel = [r for r in rows if r[1] == rv]
            plot.add(f"R={rv:g}", [r[0] for r in sel], [r[2] for r in sel])
        out.svg("fig5.svg", plot)


def cmd_fig6(cfg, out: Output, workers: int) -> None:
    rows, per_l = experiments.fig6(cfg, workers)
    if out.wants("csv"):
        out.csv("fig6.csv", experiments.FIG6_HEADER, rows)
    if out.wants("json"):
        out.json("fig6.json", {"per_length": per_l, "rows": [dict(zip(experiments.FIG6_HEADER, r)) for r in rows]})
    if out.wants("svg"):
        plot = svg.Plot("Estimated excess noise vs R", "R", "excess noise (SNU)")
        for L in cfg["fig6.l_list"]:
            sel = [r for r in rows if r[1] == L]
            plot.add(f"xi_hat L={L:g}", [r[0] for r in sel], [r[2] for r in sel])
        for L in (min(cfg["fig6.l_list"]), max(cfg["fig6.l_list"])):
            sel = [r for r in rows if r[1] == L]
            plot.add(f"xi_null L={L:g}", [r[0] for r in sel], [r[3] for r in sel])
        out.svg("fig6.svg", plot)
    for L, info in per_l.items():
        log.info("L=%s km V_A=%.4g r*=%s", L, info["v_a"], info["r_star"])


def cmd_guard(cfg, out: Output, workers: int) -> None:
    verdicts, roc, policy = experiments.guard_run(cfg, workers)
    if out.wants("csv"):
        out.csv("guard_verdicts.csv", experiments.VERDICT_HEADER, verdicts)
        out.csv("guard_roc.csv", ROC_HEADER, [[row[k] for k in ROC_HEADER] for row in roc])
    if out.wants("json"):
        out.json(
            "guard.json",
            {
                "policy": {"s_hi": policy.s_hi, "s_lo": policy.s_lo, "max_fraction": policy.max_fraction},
                "configured": roc[0],
                "roc": roc,
            },
        )
    if out.wants("svg"):
        plot = svg.Plot("Guard ROC", "false-alarm rate", "detection rate")
        plot.add("policies", [r["false_alarm"] for r in roc], [r["detection"] for r in roc], "points")
        out.svg("guard_roc.svg", plot)
    log.info("detection=%.3f false_alarm=%.3f", roc[0]["detection"], roc[0]["false_alarm"])


def cmd_run(cfg, out: Output, workers: int) -> None:
    scn = config.scenario(cfg)
    est = estimate_scenario(scn, workers=workers)
    rep = keyrate.report(scn.protocol, est.t_hat, est.xi_hat, scn.detector)
    if out.wants("json"):
        out.json(
            "run.json",
            {
                "v_a": scn.protocol.v_a,
                "t_nominal": scn.channel.transmission(),
                "estimate": est.to_dict(),
                "keyrate": rep.to_dict(),
                "breach": keyrate.is_breach(est, rep),
            },
        )
    if out.wants("csv") or out.wants("npz"):
        batch = run_batch(scn, cfg["sim.partitions"], workers)
        if out.wants("csv"):
            with out._open("run_batch.csv") as fh:
                write_batch_csv(batch, fh, out.header_lines())
        if out.wants("npz"):
            path = out.dir / "run_batch.npz"
            out.written.append(path)
            write_batch_npz(batch, path)
    log.info("t_hat=%.6g xi_hat=%.6g xi_null=%s", est.t_hat, est.xi_hat, rep.xi_null)


COMMANDS = {
    "fig2": cmd_fig2,
    "fig3": cmd_fig3,
    "fig4": cmd_fig4,
    "fig5": cmd_fig5,
    "fig6": cmd_fig6,
    "guard": cmd_guard,
    "run": cmd_run,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--preset", default="default", help=f"one of: {', '.join(config.PRESETS)}")
    common.add_argument("--config", type=Path, help="TOML file with flat or nested keys")
    common.add_argument("--seed", type=int)
    common.add_argument("--n", type=int, help="pulses per scenario")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument(
        "--format", default=",".join(DEFAULT_FORMATS), help=f"comma list from {', '.join(FORMATS)}"
    )
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="hdblind", description="Homodyne-detector blinding attack simulator for GMCS CV-QKD.")
    p.add_argument("--version", action="version", version=f"hdblind {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=COMMANDS[name].__name__[4:])
    return p


def parse_formats(text: str) -> list[str]:
    fmts = [f.strip().lower() for f in text.split(",") if f.strip()]
    bad = [f for f in fmts if f not in FORMATS]
    if bad or not fmts:
        raise ConfigError(f"unknown output format(s) {bad or text!r}; choose from {', '.join(FORMATS)}")
    return fmts


def resolve_config(args) -> dict:
    overrides = config.parse_set(args.set)
    if args.seed is not None:
        overrides["sim.seed"] = args.seed
    if args.n is not None:
        overrides["sim.n"] = args.n
    return config.resolve(args.preset, args.config, overrides)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
        )
        cfg = resolve_config(args)
        formats = parse_formats(args.format)
        if cfg["sim.n"] < 2:
            raise ConfigError("sim.n must be at least 2")
        config.scenario(cfg)  # validate the model parameters before any output is written
        out = Output(args.out, cfg, formats)
        COMMANDS[args.command](cfg, out, cfg["sim.workers"])
    except ConfigError as exc:
        print(f"hdblind: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, NumericalDomainError, EstimationError) as exc:
        print(f"hdblind: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"hdblind: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in out.written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
