"""GWAS summary-statistics files: parsing, writing, and harmonization.

Input files are UTF-8 TSV with a header naming at least snp/beta/se
(case-insensitive); effect_allele/other_allele are optional but must come
as a pair. Inputs are expected pre-clumped (independent SNPs): this module
never attempts clumping and the analyze pipeline warns instead.

Harmonization aligns mediator and outcome effect alleles to the exposure's
orientation, flipping beta signs for swapped alleles, matching across
strand complements, dropping palindromic (A/T, C/G) SNPs unconditionally,
and dropping SNPs whose allele pairs cannot be reconciled. Every decision
is recorded in a log that can be written as a side-channel TSV.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import GwasParseError, NoCommonSnpsError, ValidationError
from .panel import build_panel

_REQUIRED = ("snp", "beta", "se")
_ALLELES = ("effect_allele", "other_allele")
_VALID_BASES = frozenset("ACGT")
_COMPLEMENT = {"A": "T", "T": "A", "C": "G", "G": "C"}


@dataclass(frozen=True)
class GwasFile:
    """Parsed rows of one GWAS summary file, in file order."""

    ids: np.ndarray
    beta: np.ndarray
    se: np.ndarray
    effect_allele: np.ndarray | None
    other_allele: np.ndarray | None
    path: str | None = None

    def __len__(self):
        return self.ids.shape[0]

    @property
    def has_alleles(self):
        return self.effect_allele is not None


def read_gwas(path) -> GwasFile:
    """Parse a TSV summary file, validating values row by row."""
    path = str(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter="\t")
        try:
            header = next(reader)
        except StopIteration:
            raise GwasParseError("file is empty (no header)", path=path)
        columns = {}
        for pos, name in enumerate(header):
            key = name.strip().lower()
            if key in columns:
                raise GwasParseError(f"duplicate column {name!r}", path=path, line=1)
            columns[key] = pos
        for name in _REQUIRED:
            if name not in columns:
                raise GwasParseError(f"missing required column {name!r}", path=path, line=1)
        allele_cols = [name for name in _ALLELES if name in columns]
        if len(allele_cols) == 1:
            raise GwasParseError(
                "effect_allele and other_allele must be provided together",
                path=path, line=1)
        has_alleles = len(allele_cols) == 2

        ids, betas, ses = [], [], []
        eas, oas = [], []
        seen = set()
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < len(header):
                raise GwasParseError(
                    f"expected {len(header)} fields, found {len(row)}",
                    path=path, line=lineno)
            snp = row[columns["snp"]].strip()
            if not snp:
                raise GwasParseError("empty snp id", path=path, line=lineno)
            if snp in seen:
                raise GwasParseError(f"duplicate snp id {snp!r}", path=path, line=lineno)
            seen.add(snp)
            try:
                beta = float(row[columns["beta"]])
                se = float(row[columns["se"]])
            except ValueError:
                raise GwasParseError("malformed numeric field", path=path, line=lineno)
            if not (np.isfinite(beta) and np.isfinite(se)):
                raise GwasParseError("non-finite beta or se", path=path, line=lineno)
            if se <= 0.0:
                raise GwasParseError(f"se must be positive, got {se}", path=path, line=lineno)
            if has_alleles:
                ea = row[columns["effect_allele"]].strip().upper()
                oa = row[columns["other_allele"]].strip().upper()
                for value in (ea, oa):
                    if value not in _VALID_BASES:
                        raise GwasParseError(
                            f"allele must be one of A/C/G/T, got {value!r}",
                            path=path, line=lineno)
                eas.append(ea)
                oas.append(oa)
            ids.append(snp)
            betas.append(beta)
            ses.append(se)

    return GwasFile(
        ids=np.array(ids, dtype=object),
        beta=np.array(betas, dtype=np.float64),
        se=np.array(ses, dtype=np.float64),
        effect_allele=np.array(eas, dtype=object) if has_alleles else None,
        other_allele=np.array(oas, dtype=object) if has_alleles else None,
        path=path,
    )


def write_gwas(path, ids, beta, se, effect_allele=None, other_allele=None):
    """Write a summary TSV with round-trip float precision."""
    has_alleles = effect_allele is not None
    if has_alleles != (other_allele is not None):
        raise ValidationError("effect_allele and other_allele must be written together")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        header = ["snp", "beta", "se"]
        if has_alleles:
            header += ["effect_allele", "other_allele"]
        writer.writerow(header)
        for i, snp in enumerate(ids):
            row = [str(snp), repr(float(beta[i])), repr(float(se[i]))]
            if has_alleles:
                row += [str(effect_allele[i]), str(other_allele[i])]
            writer.writerow(row)


@dataclass
class HarmonizationLog:
    """Per-SNP harmonization decisions plus aggregate counts."""

    records: list = field(default_factory=list)  # (id, status, flip_m, flip_y)
    n_common: int = 0
    n_kept: int = 0
    n_flipped_mediator: int = 0
    n_flipped_outcome: int = 0
    n_dropped_palindromic: int = 0
    n_dropped_incompatible: int = 0

    def add(self, snp, status, flip_m=False, flip_y=False):
        self.records.append((snp, status, flip_m, flip_y))
        self.n_common += 1
        if status == "kept":
            self.n_kept += 1
            self.n_flipped_mediator += bool(flip_m)
            self.n_flipped_outcome += bool(flip_y)
        elif status == "dropped_palindromic":
            self.n_dropped_palindromic += 1
        elif status == "dropped_incompatible":
            self.n_dropped_incompatible += 1

    def write_tsv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
            writer.writerow(["snp", "status", "flipped_mediator", "flipped_outcome"])
            for snp, status, flip_m, flip_y in self.records:
                writer.writerow([snp, status, int(flip_m), int(flip_y)])

    def summary(self):
        return (f"harmonization: {self.n_common} common SNPs, {self.n_kept} kept "
                f"({self.n_flipped_mediator} mediator flips, "
                f"{self.n_flipped_outcome} outcome flips), "
                f"{self.n_dropped_palindromic} palindromic dropped, "
                f"{self.n_dropped_incompatible} incompatible dropped")


def _orientation(ea_ref, oa_ref, ea, oa):
    """+1 same orientation, -1 swapped, None incompatible; strand-aware."""
    if (ea, oa) == (ea_ref, oa_ref):
        return 1
    if (ea, oa) == (oa_ref, ea_ref):
        return -1
    flipped = (_COMPLEMENT[ea], _COMPLEMENT[oa])
    if flipped == (ea_ref, oa_ref):
        return 1
    if flipped == (oa_ref, ea_ref):
        return -1
    return None


def harmonize(exposure: GwasFile, mediator: GwasFile, outcome: GwasFile,
              align_alleles=True):
    """Inner-join the three files and align effect alleles to the exposure.

    Returns (HarmonizedPanel, HarmonizationLog). With align_alleles=False
    the join is positional on snp id only and no allele logic runs.
    """
    if align_alleles:
        for name, gwas in (("exposure", exposure), ("mediator", mediator),
                           ("outcome", outcome)):
            if not gwas.has_alleles:
                raise ValidationError(
                    f"{name} file lacks allele columns required for harmonization "
                    "(pass align_alleles=False to join without them)")
    med_index = {snp: i for i, snp in enumerate(mediator.ids)}
    out_index = {snp: i for i, snp in enumerate(outcome.ids)}

    log = HarmonizationLog()
    kept_rows = []
    for i, snp in enumerate(exposure.ids):
        j = med_index.get(snp)
        k = out_index.get(snp)
        if j is None or k is None:
            continue
        if not align_alleles:
            log.add(snp, "kept")
            kept_rows.append((snp, exposure.beta[i], exposure.se[i],
                              mediator.beta[j], mediator.se[j],
                              outcome.beta[k], outcome.se[k]))
            continue
        ea, oa = exposure.effect_allele[i], exposure.other_allele[i]
        if _COMPLEMENT[ea] == oa:
            log.add(snp, "dropped_palindromic")
            continue
        sign_m = _orientation(ea, oa, mediator.effect_allele[j], mediator.other_allele[j])
        sign_y = _orientation(ea, oa, outcome.effect_allele[k], outcome.other_allele[k])
        if sign_m is None or sign_y is None:
            log.add(snp, "dropped_incompatible")
            continue
        log.add(snp, "kept", flip_m=sign_m < 0, flip_y=sign_y < 0)
        kept_rows.append((snp, exposure.beta[i], exposure.se[i],
                          sign_m * mediator.beta[j], mediator.se[j],
                          sign_y * outcome.beta[k], outcome.se[k]))

    if log.n_common == 0:
        raise NoCommonSnpsError(
            "no common SNPs across the exposure, mediator, and outcome files")
    if not kept_rows:
        raise NoCommonSnpsError(
            "all common SNPs were dropped during harmonization "
            f"({log.n_dropped_palindromic} palindromic, "
            f"{log.n_dropped_incompatible} incompatible)")
    ids, bx, sx, bm, sm, by, sy = zip(*kept_rows)
    panel = build_panel(np.array(ids, dtype=object), bx, sx, bm, sm, by, sy)
    return panel, log
