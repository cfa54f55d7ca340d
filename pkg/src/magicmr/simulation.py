"""Data-generating processes, Monte Carlo engine, and metric aggregation.

Three DGP families differ in how the exposure and mediator instrument
supports overlap: complete (dgp1), partial including fully disjoint
(dgp2i/dgp2ii, tau_x = 0), and nested (dgp3i/dgp3ii, tau_x != 0). The
oracle split materializes disjoint x-only / shared / m-only blocks with
known memberships for the efficiency benchmark.

Every replicate derives its random streams from (seed, replicate, stream),
so reports are reproducible bit for bit and replicates are independent.
"""

from dataclasses import dataclass, field, fields, replace
from functools import lru_cache

import numpy as np

from . import estimators
from .errors import ConfigError, MagicmrError
from .panel import build_panel
from .rng import derive_seed
from .selection import (SelectionConfig, SelectionOutcome, build_bc_panel,
                        hard_threshold_sets, select_instruments)

DGP_NAMES = ("dgp1", "dgp2i", "dgp2ii", "dgp3i", "dgp3ii", "oracle")
ALL_METHODS = ("magic", "plugin", "mvmr", "dmvmr", "twostep")

_TRUTH_STREAM = 101
_NOISE_STREAM = 202
_SELECT_STREAM = 303

#: parameters recorded per estimator; None SE column means point-only
_METHOD_PARAMS = {
    "magic": ("theta", "tau_y", "tau_x", "tau"),
    "plugin": ("theta", "tau_y", "tau_x", "tau"),
    "mvmr": ("theta", "tau_y", "tau"),
    "dmvmr": ("theta", "tau_y"),
    "twostep": ("tau_x", "tau_y", "tau"),
}


@dataclass(frozen=True)
class SimConfig:
    """One simulation design; defaults follow the benchmark settings."""

    dgp: str
    p: int = 100_000
    pi_x: float = 0.01
    pi_delta: float = 0.01
    eps_x_sq: float = 1e-4
    eps_delta_sq: float = 5e-5
    theta: float = 0.2
    tau_x: float = 0.6
    tau_y: float = 0.2
    sigma_sq: float = 1e-5
    lambda_magic: float = 4.06
    lambda_hard: float = 5.45
    eta: float = 0.5
    reps: int = 1000
    seed: int = 0
    # oracle-split block proportions: x-only, m-only, shared
    pi_x_only: float | None = None
    pi_m_only: float | None = None
    pi_both: float | None = None

    def __post_init__(self):
        if self.dgp not in DGP_NAMES:
            raise ConfigError(
                f"unknown dgp {self.dgp!r}; valid variants: {', '.join(DGP_NAMES)}")
        if self.p < 1:
            raise ConfigError("p must be at least 1")
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        for name in ("eps_x_sq", "eps_delta_sq"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"{name} must be positive")
        if self.sigma_sq < 0.0:
            raise ConfigError("sigma_sq must be nonnegative")
        for name in ("lambda_magic", "lambda_hard", "eta"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"{name} must be positive")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        if self.dgp == "oracle":
            for name in ("pi_x_only", "pi_m_only", "pi_both"):
                value = getattr(self, name)
                if value is None or not 0.0 < value < 1.0:
                    raise ConfigError(
                        f"oracle split requires {name} in (0, 1), got {value}")
            if self.pi_x_only + self.pi_m_only + self.pi_both >= 1.0:
                raise ConfigError("oracle split proportions must sum below 1")
            return
        for name in ("pi_x", "pi_delta"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1)")
        if self.dgp in ("dgp1", "dgp3i", "dgp3ii") and self.tau_x == 0.0:
            raise ConfigError(f"{self.dgp} requires tau_x != 0")
        if self.dgp in ("dgp2i", "dgp2ii") and self.tau_x != 0.0:
            raise ConfigError(f"{self.dgp} requires tau_x == 0")
        n_x = round(self.pi_x * self.p)
        n_d = round(self.pi_delta * self.p)
        if min(n_x, n_d) < 1:
            raise ConfigError("pi_x and pi_delta are too small for this p")
        if self.dgp == "dgp1" and n_x != n_d:
            raise ConfigError(
                "dgp1 requires identical exposure and pleiotropy supports "
                f"(round(pi_x*p)={n_x} vs round(pi_delta*p)={n_d})")
        overlap = n_x // 2 if self.dgp in ("dgp2ii", "dgp3ii") else 0
        if self.dgp in ("dgp2ii", "dgp3ii") and n_d < overlap:
            raise ConfigError("pi_delta support smaller than the required overlap")
        if n_x + n_d - overlap > self.p:
            raise ConfigError("supports exceed the total number of SNPs")

    @property
    def tau(self):
        return self.tau_x * self.tau_y


@dataclass(frozen=True)
class TruthPanel:
    """True per-SNP effects and oracle memberships for one replicate."""

    beta_x: np.ndarray
    beta_m: np.ndarray
    beta_y: np.ndarray
    delta: np.ndarray
    alpha: np.ndarray       # identically zero in all designs
    in_sx_star: np.ndarray
    in_sm_star: np.ndarray
    in_sdelta_star: np.ndarray

    def __len__(self):
        return self.beta_x.shape[0]


@dataclass(frozen=True)
class MetricRow:
    method: str
    parameter: str
    power: float | None
    coverage: float | None
    bias: float
    mcsd: float            # NaN when fewer than 2 effective replicates
    n_effective: int


@dataclass(frozen=True)
class SimReport:
    config: SimConfig
    rows: tuple

    def row(self, method, parameter):
        for r in self.rows:
            if r.method == method and r.parameter == parameter:
                return r
        raise KeyError((method, parameter))

    def to_dicts(self):
        out = []
        for r in self.rows:
            out.append({
                "method": r.method, "parameter": r.parameter,
                "power": r.power, "coverage": r.coverage,
                "bias": r.bias, "mcsd": r.mcsd, "n_effective": r.n_effective,
            })
        return out


@dataclass
class ReplicateTable:
    """Raw per-replicate estimates/standard errors, one matrix pair per
    (method, parameter); NaN marks failed replicates or undefined SEs."""

    config: SimConfig
    estimates: dict = field(default_factory=dict)
    std_errors: dict = field(default_factory=dict)
    ok: dict = field(default_factory=dict)


def _generation_rng(cfg, rep_index, stream):
    return np.random.default_rng((int(cfg.seed), int(rep_index), stream))


@lru_cache(maxsize=4)
def _snp_ids(p):
    return np.char.add("snp", np.arange(p).astype("U12"))


def generate_truth(cfg: SimConfig, rep_index: int) -> TruthPanel:
    """Draw instrument supports and true effects for one replicate."""
    if cfg.dgp == "oracle":
        return _generate_oracle_truth(cfg, rep_index)
    rng = _generation_rng(cfg, rep_index, _TRUTH_STREAM)
    p = cfg.p
    n_x = round(cfg.pi_x * p)
    n_d = round(cfg.pi_delta * p)
    if cfg.dgp == "dgp1":
        sx = rng.choice(p, size=n_x, replace=False)
        sd = sx
    elif cfg.dgp in ("dgp2i", "dgp3i"):
        both = rng.choice(p, size=n_x + n_d, replace=False)
        sx, sd = both[:n_x], both[n_x:]
    else:  # dgp2ii / dgp3ii: half of the exposure support is shared
        k = n_x // 2
        perm = rng.permutation(p)
        sx = perm[:n_x]
        sd = np.concatenate([perm[:k], perm[n_x:n_x + (n_d - k)]])
    beta_x = np.zeros(p)
    beta_x[sx] = rng.normal(0.0, np.sqrt(cfg.eps_x_sq), size=n_x)
    delta = np.zeros(p)
    delta[sd] = rng.normal(0.0, np.sqrt(cfg.eps_delta_sq), size=n_d)
    beta_m = cfg.tau_x * beta_x + delta
    beta_y = cfg.theta * beta_x + cfg.tau_y * beta_m
    return TruthPanel(
        beta_x=beta_x, beta_m=beta_m, beta_y=beta_y, delta=delta,
        alpha=np.zeros(p),
        in_sx_star=beta_x != 0.0, in_sm_star=beta_m != 0.0,
        in_sdelta_star=delta != 0.0,
    )


def _oracle_block_sizes(cfg):
    a = round(cfg.pi_x_only * cfg.p)
    b = round(cfg.pi_m_only * cfg.p)
    c = round(cfg.pi_both * cfg.p)
    if a + c < 1 or b + c < 1 or a + b + c < 2:
        raise ConfigError(
            f"oracle split is infeasible: x-only={a}, m-only={b}, shared={c} "
            "(each instrument set needs at least one SNP, two in total)")
    if a + b + c > cfg.p:
        raise ConfigError("oracle split blocks exceed the total number of SNPs")
    return a, b, c


def _generate_oracle_truth(cfg, rep_index):
    # Only the relevant blocks are materialized: SNPs outside both oracle
    # sets never enter either oracle estimator. x-only SNPs carry
    # beta_m = 0 via delta = -tau_x * beta_x, keeping the structural
    # identity intact.
    rng = _generation_rng(cfg, rep_index, _TRUTH_STREAM)
    a, b, c = _oracle_block_sizes(cfg)
    bx_a = rng.normal(0.0, np.sqrt(cfg.eps_x_sq), size=a)
    bx_c = rng.normal(0.0, np.sqrt(cfg.eps_x_sq), size=c)
    d_c = rng.normal(0.0, np.sqrt(cfg.eps_delta_sq), size=c)
    bm_b = rng.normal(0.0, np.sqrt(cfg.eps_delta_sq), size=b)
    beta_x = np.concatenate([bx_a, bx_c, np.zeros(b)])
    delta = np.concatenate([-cfg.tau_x * bx_a, d_c, bm_b])
    beta_m = cfg.tau_x * beta_x + delta
    beta_y = cfg.theta * beta_x + cfg.tau_y * beta_m
    in_sx = np.concatenate([np.ones(a + c, bool), np.zeros(b, bool)])
    in_sm = np.concatenate([np.zeros(a, bool), np.ones(c + b, bool)])
    return TruthPanel(
        beta_x=beta_x, beta_m=beta_m, beta_y=beta_y, delta=delta,
        alpha=np.zeros(a + b + c),
        in_sx_star=in_sx, in_sm_star=in_sm, in_sdelta_star=delta != 0.0,
    )


def generate_observed(truth: TruthPanel, cfg: SimConfig, rep_index: int):
    """Add independent N(0, sigma_sq) noise per trait and SNP."""
    rng = _generation_rng(cfg, rep_index, _NOISE_STREAM)
    n = len(truth)
    sd = np.sqrt(cfg.sigma_sq)
    beta_x_hat = truth.beta_x + sd * rng.standard_normal(n)
    beta_m_hat = truth.beta_m + sd * rng.standard_normal(n)
    beta_y_hat = truth.beta_y + sd * rng.standard_normal(n)
    sigma = np.full(n, np.sqrt(cfg.sigma_sq)) if cfg.sigma_sq > 0 else np.full(n, 1.0)
    # sigma_sq = 0 is the noise-free identity case; unit sigmas keep the
    # estimating equations well-defined while observed == truth
    return build_panel(_snp_ids(n), beta_x_hat, sigma, beta_m_hat, sigma,
                       beta_y_hat, sigma, validate=False)


def _record(table, method, rep, values, ses):
    for param, value in values.items():
        table.estimates[(method, param)][rep] = value
    for param, value in ses.items():
        if value is not None:
            table.std_errors[(method, param)][rep] = value
    table.ok[method][rep] = True


def _run_one(panel_full, cfg, rep, table, methods):
    sel_seed = derive_seed((int(cfg.seed), int(rep), _SELECT_STREAM))
    scfg = SelectionConfig(lam=cfg.lambda_magic, eta=cfg.eta, seed=sel_seed)
    sel_full = select_instruments(panel_full, scfg)
    hard_x_full, hard_m_full = hard_threshold_sets(panel_full, cfg.lambda_hard)
    needed = sel_full.in_sx | sel_full.in_sm | hard_x_full | hard_m_full
    idx = np.flatnonzero(needed)
    panel = panel_full.subset(idx)
    sel = sel_full.subset(idx)
    hard_x, hard_m = hard_x_full[idx], hard_m_full[idx]

    if "magic" in methods or "plugin" in methods:
        bc = build_bc_panel(panel, sel)
        if "magic" in methods:
            try:
                est = estimators.magic_estimate(panel, bc, sel)
                _record(table, "magic", rep,
                        {"theta": est.theta_hat, "tau_y": est.tau_y_hat,
                         "tau_x": est.tau_x_hat, "tau": est.tau_hat},
                        {"theta": est.se_theta, "tau_y": est.se_tau_y,
                         "tau_x": est.se_tau_x, "tau": est.se_tau})
            except MagicmrError:
                pass
        if "plugin" in methods:
            try:
                est = estimators.plug_in_estimate(panel, bc, sel)
                _record(table, "plugin", rep,
                        {"theta": est.theta_hat, "tau_y": est.tau_y_hat,
                         "tau_x": est.tau_x_hat, "tau": est.tau_hat},
                        {})
            except MagicmrError:
                pass
    if "mvmr" in methods:
        try:
            est = estimators.mvmr_estimate(panel, hard_x, hard_m)
            _record(table, "mvmr", rep,
                    {"theta": est.theta_hat, "tau_y": est.tau_y_hat, "tau": est.tau_hat},
                    {"theta": est.se_theta, "tau_y": est.se_tau_y})
        except MagicmrError:
            pass
    if "dmvmr" in methods:
        try:
            est = estimators.dmvmr_estimate(panel, hard_x, hard_m)
            _record(table, "dmvmr", rep,
                    {"theta": est.theta_hat, "tau_y": est.tau_y_hat}, {})
        except MagicmrError:
            pass
    if "twostep" in methods:
        try:
            est = estimators.two_step_estimate(panel, hard_x, hard_m)
            _record(table, "twostep", rep,
                    {"tau_x": est.tau_x_hat, "tau_y": est.tau_y_hat, "tau": est.tau_hat},
                    {"tau_x": est.se_tau_x, "tau_y": est.se_tau_y, "tau": est.se_tau})
        except MagicmrError:
            pass


def run_replicates(cfg: SimConfig, methods=None) -> ReplicateTable:
    """Run the Monte Carlo replicates, returning raw per-replicate results."""
    if cfg.dgp == "oracle":
        raise ConfigError("oracle configs run through oracle_efficiency_bench")
    methods = tuple(methods) if methods is not None else ALL_METHODS
    unknown = set(methods) - set(ALL_METHODS)
    if unknown:
        raise ConfigError(f"unknown methods {sorted(unknown)}; valid: {ALL_METHODS}")
    table = ReplicateTable(config=cfg)
    for method in methods:
        table.ok[method] = np.zeros(cfg.reps, dtype=bool)
        for param in _METHOD_PARAMS[method]:
            table.estimates[(method, param)] = np.full(cfg.reps, np.nan)
            table.std_errors[(method, param)] = np.full(cfg.reps, np.nan)
    for rep in range(cfg.reps):
        truth = generate_truth(cfg, rep)
        panel_full = generate_observed(truth, cfg, rep)
        _run_one(panel_full, cfg, rep, table, methods)
    return table


def _truth_value(cfg, param):
    return {"theta": cfg.theta, "tau_y": cfg.tau_y,
            "tau_x": cfg.tau_x, "tau": cfg.tau}[param]


def summarize(table: ReplicateTable) -> SimReport:
    """Aggregate a replicate table into power/coverage/bias/MCSD rows."""
    cfg = table.config
    rows = []
    for (method, param), est in table.estimates.items():
        ok = table.ok[method] & np.isfinite(est)
        n_eff = int(np.count_nonzero(ok))
        truth = _truth_value(cfg, param)
        if n_eff == 0:
            rows.append(MetricRow(method, param, None, None, np.nan, np.nan, 0))
            continue
        values = est[ok]
        bias = float(np.mean(values) - truth)
        mcsd = float(np.std(values, ddof=1)) if n_eff >= 2 else float("nan")
        ses = table.std_errors[(method, param)][ok]
        if np.all(np.isfinite(ses)):
            power = float(np.mean(np.abs(values) / ses > estimators.Z95))
            coverage = float(np.mean(np.abs(values - truth) <= estimators.Z95 * ses))
        else:
            power = coverage = None
        rows.append(MetricRow(method, param, power, coverage, bias, mcsd, n_eff))
    return SimReport(config=cfg, rows=tuple(rows))


def run_monte_carlo(cfg: SimConfig, methods=None) -> SimReport:
    """Replicates plus aggregation; the CLI `simulate` entry point."""
    return summarize(run_replicates(cfg, methods=methods))


def oracle_efficiency_bench(cfg: SimConfig) -> SimReport:
    """Oracle-set benchmark: MCSD of the 2x2 estimators on known sets."""
    if cfg.dgp != "oracle":
        raise ConfigError("oracle_efficiency_bench requires dgp = 'oracle'")
    _oracle_block_sizes(cfg)
    table = ReplicateTable(config=cfg)
    for method in ("oracle_magic", "oracle_dmvmr"):
        table.ok[method] = np.zeros(cfg.reps, dtype=bool)
        for param in ("theta", "tau_y"):
            table.estimates[(method, param)] = np.full(cfg.reps, np.nan)
            table.std_errors[(method, param)] = np.full(cfg.reps, np.nan)
    for rep in range(cfg.reps):
        truth = generate_truth(cfg, rep)
        panel = generate_observed(truth, cfg, rep)
        union = truth.in_sx_star | truth.in_sm_star
        try:
            est = estimators.oracle_magic(panel, truth.in_sx_star, truth.in_sm_star)
            _record(table, "oracle_magic", rep,
                    {"theta": est.theta_hat, "tau_y": est.tau_y_hat}, {})
        except MagicmrError:
            pass
        try:
            est = estimators.oracle_dmvmr(panel, union)
            _record(table, "oracle_dmvmr", rep,
                    {"theta": est.theta_hat, "tau_y": est.tau_y_hat}, {})
        except MagicmrError:
            pass
    return summarize(table)


def config_for_ratio(cfg: SimConfig, ratio: float) -> SimConfig:
    """Oracle config with the m-only block resized so that
    |x-only| / |m-only| equals `ratio`, holding the other blocks fixed."""
    if cfg.dgp != "oracle":
        raise ConfigError("config_for_ratio applies to oracle configs")
    if not ratio > 0.0:
        raise ConfigError("ratio must be positive")
    return replace(cfg, pi_m_only=cfg.pi_x_only / ratio)


def config_from_mapping(mapping) -> SimConfig:
    """Build a SimConfig from a {field: string-or-value} mapping.

    Used by the CLI config-file parser; raises ConfigError naming the
    offending field.
    """
    known = {f.name: f for f in fields(SimConfig)}
    kwargs = {}
    for key, raw in mapping.items():
        name = key.strip().lower()
        if name not in known:
            raise ConfigError(
                f"unknown config key {key!r}; valid keys: {', '.join(sorted(known))}")
        if name == "dgp":
            kwargs[name] = str(raw).strip().lower()
            continue
        try:
            if name in ("p", "reps", "seed"):
                kwargs[name] = int(str(raw).strip())
            else:
                kwargs[name] = float(str(raw).strip())
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: cannot parse value {raw!r}") from exc
    if "dgp" not in kwargs:
        raise ConfigError("config is missing required key 'dgp'")
    return SimConfig(**kwargs)
