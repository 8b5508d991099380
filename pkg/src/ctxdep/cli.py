"""Config-driven scenario runner.

Usage:

    ctxdep run --config run.cfg [--scenario fig2a] [--shots N|exact]
               [--seed S] [--out DIR]
    ctxdep validate --config run.cfg

The config is flat ``key = value`` text; see the README for the grammar and
the full key list.  Outputs per coupling angle: raw tables (CSV), one JSON
report per test, and a plot-ready CSV per test.  Exit status is 0 when every
test is consistent with context-independence, 2 when any test returns a
ContextDependent verdict, and 1 on errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import re
import sys
from dataclasses import dataclass

import numpy as np

from . import analysis, experiment
from .noise import (
    GATE_IDLE,
    GATE_X_HALF,
    GATE_X_MINUS_HALF,
    GATE_X_PI,
    GATE_Y_PI,
    GateSpec,
    NoiseParams,
    build_model,
)

__all__ = ["RunConfig", "parse_config", "load_config", "run_scenario", "main"]

logger = logging.getLogger(__name__)

SCENARIOS = ("fig2a", "fig2b", "fig3a", "fig3b", "custom")

# Display grids for the repetition scenarios (composite blocks double the
# per-member gate count, hence the shorter grid).
FIG3A_M_VALUES = tuple(range(0, 501, 50))
FIG3B_M_VALUES = tuple(range(0, 251, 25))

DEFAULT_PHI = {
    "fig2a": (0.0, 0.001, 0.005),
    "fig2b": (0.0, 0.001, 0.005),
    "fig3a": (0.0, 0.005, 0.01, 0.02),
    "fig3b": (0.0, 0.005),
    "custom": (0.0,),
}


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass
class RunConfig:
    """Validated run settings; rates in 1/s, durations in s."""

    scenario: str = "fig2a"
    gamma1: float = 1.0 / 60e-6
    gamma3: float | None = None  # default: gamma1 * (1 - p) / p
    gamma_phi: float | None = None  # default: gamma1 / 2
    p_ground: float = 0.92
    eta: float = 0.95
    t_gate: float = 20e-9
    phi_values: tuple[float, ...] | None = None
    shots: int | None = None  # None = exact
    seed: int = 12345
    bootstrap_resamples: int = 500
    reference: tuple[GateSpec, ...] = ()
    output_dir: str = "ctxdep-out"
    family: str | None = None  # custom scenario: permutation|cyclic|repetition
    gates: tuple[GateSpec, ...] = ()
    n: int | None = None
    m_values: tuple[int, ...] | None = None
    cyclic_order: int = 2

    def resolved_gamma3(self) -> float:
        if self.gamma3 is not None:
            return self.gamma3
        if self.p_ground <= 0:
            raise ConfigError("p = 0 needs an explicit gamma3")
        return self.gamma1 * (1.0 - self.p_ground) / self.p_ground

    def resolved_gamma_phi(self) -> float:
        return self.gamma1 / 2.0 if self.gamma_phi is None else self.gamma_phi

    def resolved_phi_values(self) -> tuple[float, ...]:
        return self.phi_values if self.phi_values is not None else DEFAULT_PHI[self.scenario]

    def noise_params(self, phi: float) -> NoiseParams:
        return NoiseParams(
            gamma1=self.gamma1,
            gamma3=self.resolved_gamma3(),
            gamma_phi=self.resolved_gamma_phi(),
            coupling=phi / self.t_gate,
            t_gate=self.t_gate,
            p_ground=self.p_ground,
            eta=self.eta,
        )


_GATE_TOKEN = re.compile(
    r"^(?P<axis>[IXY])"
    r"(?P<angle>_(?P<sign>-?)(?:(?P<num>\d*)pi(?:/(?P<den>\d+))?|(?P<rad>[0-9.eE+-]+)rad))?"
    r"(?:@(?P<dur>\d+))?$"
)


def parse_gate_token(token: str) -> GateSpec:
    """Parse one gate token: ``I``, ``X_pi``, ``Y_-pi/2``, ``X_0.7854rad``...

    An optional ``@k`` suffix sets the duration multiplier.
    """
    match = _GATE_TOKEN.match(token)
    if not match:
        raise ConfigError(f"cannot parse gate token {token!r}")
    parts = match.groupdict()
    duration = int(parts["dur"]) if parts["dur"] else 1
    if parts["axis"] == "I":
        if parts["angle"] is not None:
            raise ConfigError(f"idle gate takes no angle: {token!r}")
        return GateSpec("I", 0.0, duration)
    if parts["angle"] is None:
        raise ConfigError(f"rotation gate needs an angle: {token!r}")
    if parts["rad"] is not None:
        angle = float(parts["rad"])
    else:
        if parts["den"] == "0":
            raise ConfigError(f"zero denominator in gate token {token!r}")
        angle = math.pi * float(parts["num"] or 1) / float(parts["den"] or 1)
    if parts["sign"] == "-":
        angle = -angle
    return GateSpec(parts["axis"], angle, duration)


def parse_gate_string(text: str) -> tuple[GateSpec, ...]:
    """Whitespace-separated gate tokens with ``token*count`` repetition."""
    gates: list[GateSpec] = []
    for token in text.split():
        if "*" in token:
            token, _, count = token.partition("*")
            reps = int(count)
        else:
            reps = 1
        gates.extend([parse_gate_token(token)] * reps)
    return tuple(gates)


def _parse_value(raw: str):
    raw = raw.strip()
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        if not inner:
            return []
        return [_parse_value(part) for part in inner.split(",")]
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1]
    lowered = raw.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def parse_config(text: str) -> RunConfig:
    """Parse and validate the flat ``key = value`` config format.

    Unknown keys, malformed lines, and out-of-range values raise
    :class:`ConfigError` naming the offending key.
    """
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(raw)

    cfg = RunConfig()

    def take_float(key, minimum=None, maximum=None, allow_none=False):
        if key not in values:
            return None
        v = values.pop(key)
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ConfigError(f"{key}: expected a number, got {v!r}")
        v = float(v)
        if minimum is not None and v < minimum:
            raise ConfigError(f"{key}: must be >= {minimum}")
        if maximum is not None and v > maximum:
            raise ConfigError(f"{key}: must be <= {maximum}")
        return v

    if "scenario" in values:
        scenario = values.pop("scenario")
        if scenario not in SCENARIOS:
            raise ConfigError(f"scenario: expected one of {SCENARIOS}, got {scenario!r}")
        cfg.scenario = scenario
    for key, attr, lo in (
        ("gamma1", "gamma1", 0.0),
        ("gamma3", "gamma3", 0.0),
        ("gamma_phi", "gamma_phi", 0.0),
    ):
        v = take_float(key, minimum=lo)
        if v is not None:
            setattr(cfg, attr, v)
    if "t1_us" in values:  # convenience alias: gamma1 = 1 / (t1_us microseconds)
        t1 = take_float("t1_us", minimum=1e-12)
        cfg.gamma1 = 1.0 / (t1 * 1e-6)
    v = take_float("p", minimum=0.0, maximum=1.0)
    if v is not None:
        cfg.p_ground = v
    v = take_float("eta", minimum=1e-12, maximum=1.0)
    if v is not None:
        cfg.eta = v
    v = take_float("t_gate", minimum=1e-15)
    if v is not None:
        cfg.t_gate = v
    if "phi_values" in values:
        raw = values.pop("phi_values")
        if not isinstance(raw, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in raw
        ):
            raise ConfigError("phi_values: expected a list of numbers")
        if not all(math.isfinite(float(x)) for x in raw):
            raise ConfigError("phi_values: values must be finite")
        cfg.phi_values = tuple(float(x) for x in raw)
    if "shots" in values:
        raw = values.pop("shots")
        if raw == "exact":
            cfg.shots = None
        elif isinstance(raw, int) and not isinstance(raw, bool) and raw >= 1:
            cfg.shots = raw
        else:
            raise ConfigError(f"shots: expected 'exact' or a positive integer, got {raw!r}")
    if "seed" in values:
        raw = values.pop("seed")
        if not isinstance(raw, int) or isinstance(raw, bool):
            raise ConfigError("seed: expected an integer")
        cfg.seed = raw
    if "bootstrap_resamples" in values:
        raw = values.pop("bootstrap_resamples")
        if not isinstance(raw, int) or raw < 100:
            raise ConfigError("bootstrap_resamples: expected an integer >= 100")
        cfg.bootstrap_resamples = raw
    if "reference" in values:
        raw = values.pop("reference")
        cfg.reference = parse_gate_string(str(raw)) if raw else ()
    if "output_dir" in values:
        cfg.output_dir = str(values.pop("output_dir"))
    if "family" in values:
        raw = values.pop("family")
        if raw not in ("permutation", "cyclic", "repetition"):
            raise ConfigError(f"family: expected permutation|cyclic|repetition, got {raw!r}")
        cfg.family = raw
    if "gates" in values:
        cfg.gates = parse_gate_string(str(values.pop("gates")))
    if "n" in values:
        raw = values.pop("n")
        if not isinstance(raw, int) or raw < 1:
            raise ConfigError("n: expected a positive integer")
        cfg.n = raw
    if "m_values" in values:
        raw = values.pop("m_values")
        if not isinstance(raw, list) or not all(isinstance(x, int) for x in raw):
            raise ConfigError("m_values: expected a list of integers")
        cfg.m_values = tuple(raw)
    if "cyclic_order" in values:
        raw = values.pop("cyclic_order")
        if not isinstance(raw, int) or not 1 <= raw <= 4:
            raise ConfigError("cyclic_order: expected an integer in 1..4")
        cfg.cyclic_order = raw
    if values:
        raise ConfigError(f"unknown keys: {', '.join(sorted(values))}")

    if cfg.scenario == "custom":
        if cfg.family is None:
            raise ConfigError("custom scenario needs 'family'")
        if not cfg.gates:
            raise ConfigError("custom scenario needs a non-empty 'gates' list")
        if cfg.family == "permutation":
            if len(cfg.gates) != 2:
                raise ConfigError("permutation family needs exactly 2 gates")
            if cfg.n is None:
                raise ConfigError("permutation family needs 'n'")
        if cfg.family == "repetition" and not cfg.m_values:
            raise ConfigError("repetition family needs 'm_values'")
    return cfg


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return parse_config("")
    with open(path) as fh:
        return parse_config(fh.read())


def _build_family(cfg: RunConfig) -> experiment.SequenceFamily:
    if cfg.scenario == "fig2a":
        return experiment.permutation_family(GATE_IDLE, GATE_X_PI, 250)
    if cfg.scenario == "fig2b":
        base = experiment.Sequence(
            gates=(GATE_X_PI,) + (GATE_IDLE,) * 500, label="X_pi_I500"
        )
        return experiment.cyclic_family(base)
    if cfg.scenario == "fig3a":
        return experiment.repetition_family([GATE_IDLE], FIG3A_M_VALUES)
    if cfg.scenario == "custom":
        if cfg.family == "permutation":
            return experiment.permutation_family(cfg.gates[0], cfg.gates[1], cfg.n)
        if cfg.family == "cyclic":
            label = "".join(g.label for g in cfg.gates)
            return experiment.cyclic_family(experiment.Sequence(cfg.gates, label))
        return experiment.repetition_family(list(cfg.gates), cfg.m_values)
    raise ConfigError(f"no single family for scenario {cfg.scenario}")


FIG3B_BLOCKS = (
    ("X_pi", (GATE_X_PI,)),
    ("X_piY_pi", (GATE_X_PI, GATE_Y_PI)),
    ("X_-pi/2X_pi/2", (GATE_X_MINUS_HALF, GATE_X_HALF)),
)


def _sanitize(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", label)


def _write_atomic(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _emit_tables(tables, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for t in tables:
        path = os.path.join(out_dir, _sanitize(t.label) + ".csv")
        _write_atomic(path, experiment._table_csv_text(t))


def _emit_report(report: analysis.TestReport, path: str) -> None:
    _write_atomic(path, json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


def _emit_plot_csv(report: analysis.TestReport, phi: float, path: str, x_values=None) -> None:
    lines = ["index,statistic,ci_low,ci_high,phi"]
    xs = x_values if x_values is not None else range(len(report.member_labels))
    for j, x in enumerate(xs):
        lo = report.ci_low[j] if report.ci_low is not None else report.statistics[j]
        hi = report.ci_high[j] if report.ci_high is not None else report.statistics[j]
        lines.append(
            f"{x},{report.statistics[j]!r},{float(lo)!r},{float(hi)!r},{phi!r}"
        )
    _write_atomic(path, "\n".join(lines) + "\n")


def _reference_table(cfg: RunConfig, model) -> experiment.ProbabilityTable:
    ref_seq = experiment.Sequence(gates=cfg.reference, label="reference")
    table = experiment.prob_table(ref_seq, model)
    if cfg.shots is not None:
        table = experiment.sample_table(table, cfg.shots, cfg.seed)
    return table


def _run_family_tests(cfg: RunConfig, family, model, cal, phi, out_dir):
    """Evaluate one family under one model; emit artifacts; return reports."""
    tables = experiment.family_tables(family, model, shots=cfg.shots, seed=cfg.seed)
    _emit_tables(tables, os.path.join(out_dir, "tables"))
    reports = []
    if family.kind == "permutation":
        report = analysis.det_permutation_test(
            tables, cal, resamples=cfg.bootstrap_resamples, seed=cfg.seed
        )
        reports.append(report)
        _emit_report(report, os.path.join(out_dir, "report_permdet.json"))
        _emit_plot_csv(report, phi, os.path.join(out_dir, "plot_permdet.csv"))
    elif family.kind == "cyclic":
        p0 = _reference_table(cfg, model)
        experiment.write_table_csv(p0, os.path.join(out_dir, "tables", "reference.csv"))
        report = analysis.cyclic_fidelity_test(
            tables,
            p0,
            r=cfg.cyclic_order,
            resamples=cfg.bootstrap_resamples,
            seed=cfg.seed,
        )
        reports.append(report)
        _emit_report(report, os.path.join(out_dir, "report_cyclicfid.json"))
        _emit_plot_csv(report, phi, os.path.join(out_dir, "plot_cyclicfid.csv"))
    else:
        suffix = _sanitize(family.description.strip("()^m"))
        report = analysis.repetition_test(
            tables,
            family.m_values,
            cal,
            resamples=cfg.bootstrap_resamples,
            seed=cfg.seed,
        )
        reports.append(report)
        _emit_report(report, os.path.join(out_dir, f"report_replinearity_{suffix}.json"))
        _emit_plot_csv(
            report,
            phi,
            os.path.join(out_dir, f"plot_replinearity_{suffix}.csv"),
            x_values=family.m_values,
        )
        witness = analysis.cp_witness(
            family.m_values, report.statistics, report.ci_low, report.ci_high
        )
        reports.append(witness)
        _emit_report(witness, os.path.join(out_dir, f"report_cpwitness_{suffix}.json"))
        # Accessible-volume series relative to the first member; descriptive
        # output, not a hypothesis test, so the verdict slot stays neutral.
        l0 = report.statistics[0]
        volume = analysis.TestReport(
            kind="Volume",
            member_labels=report.member_labels,
            statistics=np.exp(report.statistics - l0),
            verdict=analysis.Verdict.CONTEXT_INDEPENDENT,
            threshold=0.0,
            summary={"normalized_to": report.member_labels[0]},
        )
        _emit_report(volume, os.path.join(out_dir, f"report_volume_{suffix}.json"))
        _emit_plot_csv(
            volume,
            phi,
            os.path.join(out_dir, f"plot_volume_{suffix}.csv"),
            x_values=family.m_values,
        )
    return reports


def run_scenario(cfg: RunConfig) -> int:
    """Execute every (phi, family) job of the configured scenario.

    Returns the process exit status: 0 all clear, 2 if any test flags
    context dependence.
    """
    cal = analysis.ideal_calibration()
    os.makedirs(cfg.output_dir, exist_ok=True)
    any_dependent = False
    for phi in cfg.resolved_phi_values():
        model = build_model(cfg.noise_params(phi))
        phi_dir = os.path.join(cfg.output_dir, f"phi_{phi:g}")
        os.makedirs(phi_dir, exist_ok=True)
        if cfg.scenario == "fig3b":
            families = [
                experiment.repetition_family(list(block), FIG3B_M_VALUES)
                for _, block in FIG3B_BLOCKS
            ]
        else:
            families = [_build_family(cfg)]
        for family in families:
            reports = _run_family_tests(cfg, family, model, cal, phi, phi_dir)
            for report in reports:
                tag = f"phi={phi:g} {report.kind} [{family.description}]"
                print(f"{tag}: {report.verdict.value}")
                if report.verdict is analysis.Verdict.CONTEXT_DEPENDENT:
                    any_dependent = True
    return 2 if any_dependent else 0


def _build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctxdep", description="context-dependence tests for gate sequences"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run a scenario and write artifacts")
    run_p.add_argument("--config", help="path to a flat key = value config file")
    run_p.add_argument("--scenario", choices=SCENARIOS)
    run_p.add_argument("--shots", help="'exact' or a positive integer")
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--out", help="output directory")
    val_p = sub.add_parser("validate", help="parse and validate a config file")
    val_p.add_argument("--config", help="path to a flat key = value config file")
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.scenario:
        cfg.scenario = args.scenario
        if cfg.scenario == "custom" and cfg.family is None:
            raise ConfigError("custom scenario needs 'family' in the config file")
    if args.shots is not None:
        if args.shots == "exact":
            cfg.shots = None
        else:
            shots = int(args.shots)
            if shots < 1:
                raise ConfigError("--shots must be 'exact' or a positive integer")
            cfg.shots = shots
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out
    return cfg


def main(argv=None) -> int:
    logging.basicConfig(
        level=getattr(logging, os.environ.get("CTXDEP_LOG", "WARNING").upper(), logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = _build_arg_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            print(f"ok: scenario={cfg.scenario} shots="
                  f"{'exact' if cfg.shots is None else cfg.shots} "
                  f"phi_values={list(cfg.resolved_phi_values())} seed={cfg.seed}")
            return 0
        cfg = _apply_overrides(cfg, args)
        return run_scenario(cfg)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
