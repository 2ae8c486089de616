"""Longitudinal cohort records and their mapping onto graph nodes.

Three CSV inputs describe a cohort:

    diagnoses.csv   person_id,code,date
    exposures.csv   person_id,drug_code,start_date,end_date   (end may be empty)
    baseline.csv    person_id,name,value                      (long format)

The population of a disease node is every person diagnosed with the node's
code or the code of any is_a descendant; drug nodes map to anyone with an
exposure to that drug code. ``select_sample`` turns a cohort plus one
(indication, drug, outcome) hypothesis into the binary T/M/Y variables and
covariate matrix used by the mediation models.
"""

from __future__ import annotations

import csv
import datetime
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from . import kg
from .errors import (
    DateError,
    DegenerateSample,
    EmptyCohort,
    EmptySample,
    NoRecords,
    OverlapError,
    ParseError,
)
from .kg import CausalKnowledgeGraph, NodeId, NodeKind

if TYPE_CHECKING:  # pragma: no cover
    from .adjustment import AdjustmentSet
    from .hypotheses import Hypothesis


class Diagnosis(NamedTuple):
    code: str
    date: datetime.date


class Exposure(NamedTuple):
    drug_code: str
    start: datetime.date
    end: datetime.date | None


@dataclass
class PersonRecord:
    person_id: str
    diagnoses: list[Diagnosis] = field(default_factory=list)
    exposures: list[Exposure] = field(default_factory=list)
    baseline: dict[str, float] = field(default_factory=dict)

    def record_dates(self) -> list[datetime.date]:
        """Dates of all dated records: diagnosis dates and exposure starts."""
        return [d.date for d in self.diagnoses] + [e.start for e in self.exposures]


class Cohort:
    def __init__(self, persons: list[PersonRecord]):
        self.persons = sorted(persons, key=lambda p: p.person_id)
        self._by_id = {p.person_id: p for p in self.persons}
        if len(self._by_id) != len(self.persons):
            raise OverlapError("duplicate person_id in cohort")
        self._disease_index: dict[str, frozenset[str]] = {}
        self._drug_index: dict[str, frozenset[str]] = {}
        dis: dict[str, set[str]] = {}
        drg: dict[str, set[str]] = {}
        names: set[str] = set()
        for p in self.persons:
            for d in p.diagnoses:
                dis.setdefault(d.code, set()).add(p.person_id)
            for e in p.exposures:
                drg.setdefault(e.drug_code, set()).add(p.person_id)
            names.update(p.baseline)
        self._disease_index = {c: frozenset(s) for c, s in dis.items()}
        self._drug_index = {c: frozenset(s) for c, s in drg.items()}
        self.baseline_names: list[str] = sorted(names)

    @property
    def n(self) -> int:
        return len(self.persons)

    def person(self, person_id: str) -> PersonRecord:
        return self._by_id[person_id]

    def persons_with_disease_code(self, code: str) -> frozenset[str]:
        return self._disease_index.get(code, frozenset())

    def persons_with_drug_code(self, code: str) -> frozenset[str]:
        return self._drug_index.get(code, frozenset())


def _parse_date(text: str, path, line_no) -> datetime.date:
    try:
        return datetime.date.fromisoformat(text)
    except ValueError:
        raise DateError(f"{path}:{line_no}: bad date {text!r}") from None


def _open_csv(path, expected_header: list[str]):
    fh = open(path, newline="", encoding="utf-8")
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        fh.close()
        raise ParseError("empty file", path=path) from None
    if [h.strip() for h in header] != expected_header:
        fh.close()
        raise ParseError(f"expected header {','.join(expected_header)}, got {','.join(header)}",
                         path=path)
    return fh, reader


def load_cohort(diagnoses_path, exposures_path, baseline_path) -> Cohort:
    """Read the three cohort CSVs; persons are the union of ids across files."""
    people: dict[str, PersonRecord] = {}

    def rec(pid: str) -> PersonRecord:
        if pid not in people:
            people[pid] = PersonRecord(person_id=pid)
        return people[pid]

    fh, reader = _open_csv(diagnoses_path, ["person_id", "code", "date"])
    with fh:
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 fields, got {len(row)}", path=diagnoses_path, line_no=i)
            pid, code, ds = (f.strip() for f in row)
            if not pid or not code:
                raise ParseError("empty person_id or code", path=diagnoses_path, line_no=i)
            rec(pid).diagnoses.append(Diagnosis(code, _parse_date(ds, diagnoses_path, i)))

    fh, reader = _open_csv(exposures_path, ["person_id", "drug_code", "start_date", "end_date"])
    with fh:
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ParseError(f"expected 4 fields, got {len(row)}", path=exposures_path, line_no=i)
            pid, code, start_s, end_s = (f.strip() for f in row)
            if not pid or not code:
                raise ParseError("empty person_id or drug_code", path=exposures_path, line_no=i)
            start = _parse_date(start_s, exposures_path, i)
            end = _parse_date(end_s, exposures_path, i) if end_s else None
            if end is not None and end < start:
                raise DateError(f"{exposures_path}:{i}: exposure ends {end} before start {start}")
            rec(pid).exposures.append(Exposure(code, start, end))

    fh, reader = _open_csv(baseline_path, ["person_id", "name", "value"])
    with fh:
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 fields, got {len(row)}", path=baseline_path, line_no=i)
            pid, name, value_s = (f.strip() for f in row)
            if not pid or not name:
                raise ParseError("empty person_id or name", path=baseline_path, line_no=i)
            if not value_s:
                rec(pid).baseline.setdefault(name, float("nan"))
                continue
            try:
                value = float(value_s)
            except ValueError:
                raise ParseError(f"bad numeric value {value_s!r}", path=baseline_path, line_no=i) from None
            prev = rec(pid).baseline.get(name)
            if prev is not None and not np.isnan(prev) and prev != value:
                raise OverlapError(
                    f"{baseline_path}:{i}: conflicting values for {name!r} of person {pid!r}")
            rec(pid).baseline[name] = value

    for p in people.values():
        p.diagnoses.sort(key=lambda d: (d.date, d.code))
        p.exposures.sort(key=lambda e: (e.start, e.drug_code))
    return Cohort(list(people.values()))


def extension(c: Cohort, g: CausalKnowledgeGraph, node: NodeId) -> frozenset[str]:
    """Person ids mapped to ``node``; diseases include is_a descendants."""
    g.require(node)
    if node.kind is NodeKind.DRUG:
        return c.persons_with_drug_code(node.code)
    out: set[str] = set()
    for code in kg.closure_codes(g, node):
        out |= c.persons_with_disease_code(code)
    return frozenset(out)


def probability(c: Cohort, g: CausalKnowledgeGraph, node: NodeId) -> float:
    """Share of the cohort in the node's extension."""
    if c.n == 0:
        raise EmptyCohort("cohort has no persons")
    return len(extension(c, g, node)) / c.n


def cooccurrence_counts(c: Cohort, g: CausalKnowledgeGraph, d1: NodeId, d2: NodeId):
    """(c12, p1, p2, n): joint and marginal extension sizes plus cohort size."""
    e1 = extension(c, g, d1)
    e2 = extension(c, g, d2)
    return len(e1 & e2), len(e1), len(e2), c.n


def _first_date_in(p: PersonRecord, codes: frozenset[str]) -> datetime.date | None:
    dates = [d.date for d in p.diagnoses if d.code in codes]
    return min(dates) if dates else None


def _first_exposure_start(p: PersonRecord, drug_code: str) -> datetime.date | None:
    starts = [e.start for e in p.exposures if e.drug_code == drug_code]
    return min(starts) if starts else None


def index_date(p: PersonRecord, h: "Hypothesis", g: CausalKnowledgeGraph) -> datetime.date:
    """Anchor date for covariates and follow-up.

    First diagnosis of the indication (hierarchy closed), else first exposure
    to the hypothesis drug, else the earliest dated record of any kind.
    """
    d = _first_date_in(p, kg.closure_codes(g, h.indication))
    if d is not None:
        return d
    d = _first_exposure_start(p, h.drug.code)
    if d is not None:
        return d
    dates = p.record_dates()
    if not dates:
        raise NoRecords(f"person {p.person_id!r} has no dated records")
    return min(dates)


@dataclass
class AnalysisSample:
    """Per-person T/M/Y codes and covariates for one hypothesis."""

    hypothesis: "Hypothesis"
    person_ids: list[str]
    t: np.ndarray
    m: np.ndarray
    y: np.ndarray
    covariates: np.ndarray
    covariate_names: list[str]
    adjustment: "AdjustmentSet | None" = None

    @property
    def n(self) -> int:
        return len(self.person_ids)

    def covariate_matrix(self, names: list[str]) -> np.ndarray:
        """Columns of ``covariates`` selected by name, in the given order."""
        idx = [self.covariate_names.index(nm) for nm in names]
        return self.covariates[:, idx] if idx else np.empty((self.n, 0))


def select_sample(
    c: Cohort,
    g: CausalKnowledgeGraph,
    h: "Hypothesis",
    adj: "AdjustmentSet | None" = None,
) -> AnalysisSample:
    """Build the analysis rows for one hypothesis.

    Exclusions, in order, per person:

    1. no dated record strictly after the index date (no follow-up),
    2. first outcome diagnosis earlier than every anchor the person has
       (first drug exposure, first indication diagnosis); persons with
       neither anchor are kept,
    3. with both indication and drug present, every exposure interval ends
       before the first indication date.

    Coding: T = 1 if the indication is present at any time. M = 1 if some
    exposure to the drug starts on or after the index date (any exposure at
    all counts when T = 0). Y = 1 if the first outcome diagnosis falls
    strictly after the later of index date and first qualifying exposure
    start. Covariates are baseline values (mean imputed, with a missingness
    indicator per variable that has gaps), distinct disease and drug counts
    before the index date, and one binary onset indicator per adjustment
    node, again anchored strictly before the index date.
    """
    ind_codes = kg.closure_codes(g, h.indication)
    out_codes = kg.closure_codes(g, h.outcome)
    drug_code = h.drug.code
    adj_nodes = sorted(adj.nodes, key=lambda nd: (nd.code, nd.kind)) if adj is not None else []
    adj_closures = [
        kg.closure_codes(g, nd) if nd.kind is NodeKind.DISEASE else None for nd in adj_nodes
    ]

    ids: list[str] = []
    t_col: list[int] = []
    m_col: list[int] = []
    y_col: list[int] = []
    base_rows: list[list[float]] = []
    extra_rows: list[list[float]] = []
    names = list(c.baseline_names)

    for p in c.persons:
        try:
            idx = index_date(p, h, g)
        except NoRecords:
            continue
        if not any(d > idx for d in p.record_dates()):
            continue

        first_ind = _first_date_in(p, ind_codes)
        first_drug = _first_exposure_start(p, drug_code)
        first_y = _first_date_in(p, out_codes)
        if first_y is not None and (first_ind is not None or first_drug is not None):
            before_ind = first_ind is None or first_y < first_ind
            before_drug = first_drug is None or first_y < first_drug
            if before_ind and before_drug:
                continue
        drug_exposures = [e for e in p.exposures if e.drug_code == drug_code]
        if first_ind is not None and drug_exposures:
            if all((e.end or e.start) < first_ind for e in drug_exposures):
                continue

        t = int(first_ind is not None)
        if t:
            qual = [e.start for e in drug_exposures if e.start >= idx]
        else:
            qual = [e.start for e in drug_exposures]
        m = int(bool(qual))
        anchor = max(idx, min(qual)) if m else idx
        y = int(first_y is not None and first_y > anchor)

        row = [p.baseline.get(nm, float("nan")) for nm in names]
        comorbidity = len({d.code for d in p.diagnoses if d.date < idx})
        drugs_before = len({e.drug_code for e in p.exposures if e.start < idx})
        extras = [float(comorbidity), float(drugs_before)]
        for nd, codes in zip(adj_nodes, adj_closures):
            if codes is None:
                onset = _first_exposure_start(p, nd.code)
            else:
                onset = _first_date_in(p, codes)
            extras.append(1.0 if onset is not None and onset < idx else 0.0)

        ids.append(p.person_id)
        t_col.append(t)
        m_col.append(m)
        y_col.append(y)
        base_rows.append(row)
        extra_rows.append(extras)

    if not ids:
        raise EmptySample(f"no persons survive selection for {h}")

    base = np.asarray(base_rows, dtype=np.float64).reshape(len(ids), len(names))
    cols: list[np.ndarray] = []
    out_names: list[str] = []
    for j, nm in enumerate(names):
        col = base[:, j]
        missing = np.isnan(col)
        if missing.any():
            present = col[~missing]
            fill = present.mean() if present.size else 0.0
            col = np.where(missing, fill, col)
            cols.extend([col, missing.astype(np.float64)])
            out_names.extend([nm, f"{nm}_missing"])
        else:
            cols.append(col)
            out_names.append(nm)
    extra = np.asarray(extra_rows, dtype=np.float64)
    cols.extend(extra.T)
    out_names.append("comorbidity_count")
    out_names.append("drug_count")
    out_names.extend(f"adj_{nd.kind.value}_{nd.code}" for nd in adj_nodes)

    X = np.column_stack(cols) if cols else np.empty((len(ids), 0))
    sample = AnalysisSample(
        hypothesis=h,
        person_ids=ids,
        t=np.asarray(t_col, dtype=np.int8),
        m=np.asarray(m_col, dtype=np.int8),
        y=np.asarray(y_col, dtype=np.int8),
        covariates=X,
        covariate_names=out_names,
        adjustment=adj,
    )
    for var, arr in (("T", sample.t), ("M", sample.m), ("Y", sample.y)):
        if arr.min() == arr.max():
            exc = DegenerateSample(var)
            exc.sample = sample  # kept so callers can still report the size
            raise exc
    return sample
