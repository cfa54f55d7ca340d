"""Command-line interface: analyze, simulate, oracle-bench.

Exit codes: 0 success, 2 input/validation error, 3 numerical degeneracy,
4 I/O error. Failures emit one machine-readable JSON line on stderr.
"""

import argparse
import json
import math
import sys
from dataclasses import dataclass

from . import estimators, simulation
from .errors import ConfigError, MagicmrError, ValidationError
from .gwas_io import harmonize, read_gwas
from .normal import std_normal_quantile
from .selection import SelectionConfig, build_bc_panel, hard_threshold_sets, select_instruments

METHOD_ORDER = ("magic", "plugin", "mvmr", "dmvmr", "twostep")


@dataclass(frozen=True)
class AnalysisConfig:
    """Settings for one analyze run; exactly one of lam / p_threshold."""

    lam: float | None = None
    p_threshold: float | None = None
    eta: float = 0.5
    seed: int = 0
    methods: tuple = ("magic",)
    align_alleles: bool = True
    out_format: str = "tsv"

    def __post_init__(self):
        if (self.lam is None) == (self.p_threshold is None):
            raise ValidationError("provide exactly one of lambda / p-threshold")
        if self.p_threshold is not None and not 0.0 < self.p_threshold < 1.0:
            raise ValidationError("p-threshold must lie in (0, 1)")
        if self.lam is not None and not self.lam > 0.0:
            raise ValidationError("lambda must be positive")
        if not self.methods:
            raise ValidationError("method set must be nonempty")
        unknown = set(self.methods) - set(METHOD_ORDER)
        if unknown:
            raise ValidationError(
                f"unknown methods {sorted(unknown)}; valid: {', '.join(METHOD_ORDER)}")
        if self.out_format not in ("tsv", "json"):
            raise ValidationError("format must be tsv or json")

    def resolved_lambda(self):
        """Cutoff on the z scale; two-sided mapping from p-threshold."""
        if self.lam is not None:
            return float(self.lam)
        return float(std_normal_quantile(1.0 - self.p_threshold / 2.0))


def analyze_files(exposure_path, mediator_path, outcome_path, cfg: AnalysisConfig):
    """Full analysis pipeline; returns (report rows, harmonization log)."""
    exposure = read_gwas(exposure_path)
    mediator = read_gwas(mediator_path)
    outcome = read_gwas(outcome_path)
    panel, log = harmonize(exposure, mediator, outcome,
                           align_alleles=cfg.align_alleles)
    lam = cfg.resolved_lambda()
    rows = []
    requested = [m for m in METHOD_ORDER if m in cfg.methods]
    sel = bc = None
    if "magic" in requested or "plugin" in requested:
        sel = select_instruments(panel, SelectionConfig(lam=lam, eta=cfg.eta, seed=cfg.seed))
        bc = build_bc_panel(panel, sel)
    hard = None
    if any(m in requested for m in ("mvmr", "dmvmr", "twostep")):
        hard = hard_threshold_sets(panel, lam)
    for method in requested:
        if method == "magic":
            result = estimators.magic_estimate(panel, bc, sel)
        elif method == "plugin":
            result = estimators.plug_in_estimate(panel, bc, sel)
        elif method == "mvmr":
            result = estimators.mvmr_estimate(panel, *hard)
        elif method == "dmvmr":
            result = estimators.dmvmr_estimate(panel, *hard)
        else:
            result = estimators.two_step_estimate(panel, *hard)
        rows.extend(estimators.report_rows(method, result))
    estimators.apply_bh(rows)
    return rows, log


# ---------------------------------------------------------------------------
# serialization

_ROW_COLUMNS = ("method", "parameter", "estimate", "std_error", "z", "p",
                "p_bh", "ci_low", "ci_high")


def _cell(value):
    if value is None:
        return "NA"
    if isinstance(value, float):
        if math.isnan(value):
            return "NA"
        return repr(value)
    return str(value)


def rows_to_tsv(rows):
    lines = ["\t".join(_ROW_COLUMNS)]
    for row in rows:
        lines.append("\t".join(_cell(getattr(row, col)) for col in _ROW_COLUMNS))
    return "\n".join(lines) + "\n"


def rows_to_json(rows):
    payload = [{col: _json_value(getattr(row, col)) for col in _ROW_COLUMNS}
               for row in rows]
    return json.dumps({"rows": payload}, indent=2, sort_keys=True,
                      allow_nan=False) + "\n"


def _json_value(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


_METRIC_COLUMNS = ("method", "parameter", "power", "coverage", "bias", "mcsd",
                   "n_effective")


def report_to_tsv(report):
    lines = ["\t".join(_METRIC_COLUMNS)]
    for row in report.to_dicts():
        lines.append("\t".join(_cell(row[col]) for col in _METRIC_COLUMNS))
    return "\n".join(lines) + "\n"


def report_to_json(report):
    payload = [{col: _json_value(row[col]) for col in _METRIC_COLUMNS}
               for row in report.to_dicts()]
    return json.dumps({"metrics": payload}, indent=2, sort_keys=True,
                      allow_nan=False) + "\n"


def _emit(text, out_path):
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# config files

def parse_config_file(path):
    """key = value lines; '#' starts a comment; blank lines ignored."""
    mapping = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: line {lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            key = key.strip()
            if key in mapping:
                raise ConfigError(f"{path}: line {lineno}: duplicate key {key!r}")
            mapping[key] = value.strip()
    return mapping


def _load_sim_config(path):
    mapping = parse_config_file(path)
    out_format = str(mapping.pop("output_format", "tsv")).strip().lower()
    if out_format not in ("tsv", "json"):
        raise ConfigError(f"output_format must be tsv or json, got {out_format!r}")
    return simulation.config_from_mapping(mapping), out_format


# ---------------------------------------------------------------------------
# commands

def _cmd_analyze(args):
    methods = tuple(m.strip().lower() for m in args.methods.split(",") if m.strip())
    cfg = AnalysisConfig(
        lam=args.lam, p_threshold=args.p_threshold, eta=args.eta, seed=args.seed,
        methods=methods, align_alleles=not args.no_harmonize,
        out_format=args.format,
    )
    print("note: inputs are assumed pre-clumped (independent SNPs); "
          "no LD clumping is performed", file=sys.stderr)
    rows, log = analyze_files(args.exposure, args.mediator, args.outcome, cfg)
    print(log.summary(), file=sys.stderr)
    if cfg.align_alleles and args.out is not None:
        log.write_tsv(args.out + ".harmonization.tsv")
    text = rows_to_json(rows) if cfg.out_format == "json" else rows_to_tsv(rows)
    _emit(text, args.out)
    return 0


def _cmd_simulate(args):
    cfg, out_format = _load_sim_config(args.config)
    if cfg.dgp == "oracle":
        raise ConfigError("oracle configs belong to the oracle-bench command")
    report = simulation.run_monte_carlo(cfg)
    text = report_to_json(report) if out_format == "json" else report_to_tsv(report)
    _emit(text, args.out)
    return 0


def _cmd_oracle_bench(args):
    cfg, out_format = _load_sim_config(args.config)
    report = simulation.oracle_efficiency_bench(cfg)
    text = report_to_json(report) if out_format == "json" else report_to_tsv(report)
    _emit(text, args.out)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="magicmr",
        description="Mediation analysis from three GWAS summary datasets")
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="estimate effects from three GWAS files")
    pa.add_argument("--exposure", required=True)
    pa.add_argument("--mediator", required=True)
    pa.add_argument("--outcome", required=True)
    cut = pa.add_mutually_exclusive_group(required=True)
    cut.add_argument("--lambda", dest="lam", type=float,
                     help="z-scale selection cutoff")
    cut.add_argument("--p-threshold", dest="p_threshold", type=float,
                     help="two-sided p-value threshold mapped to a cutoff")
    pa.add_argument("--eta", type=float, default=0.5,
                    help="pseudo-noise sd for rerandomized selection")
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--methods", default="magic",
                    help="comma-separated subset of " + ",".join(METHOD_ORDER))
    pa.add_argument("--no-harmonize", action="store_true",
                    help="join on snp id without allele alignment")
    pa.add_argument("--format", choices=("tsv", "json"), default="tsv")
    pa.add_argument("--out", default=None, help="output path (default stdout)")
    pa.set_defaults(func=_cmd_analyze)

    ps = sub.add_parser("simulate", help="run a Monte Carlo study from a config file")
    ps.add_argument("--config", required=True)
    ps.add_argument("--out", default=None)
    ps.set_defaults(func=_cmd_simulate)

    po = sub.add_parser("oracle-bench", help="oracle-set efficiency benchmark")
    po.add_argument("--config", required=True)
    po.add_argument("--out", default=None)
    po.set_defaults(func=_cmd_oracle_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MagicmrError as exc:
        print(json.dumps({"error": exc.code, "message": str(exc)}), file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        message = str(exc)
        if getattr(exc, "filename", None):
            message = f"{exc.filename}: {exc.strerror}"
        print(json.dumps({"error": "io", "message": message}), file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
