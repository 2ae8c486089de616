"""Synthetic cohorts from a known structural causal model, plus the oracle.

A flat key=value spec declares binary disease/drug variables and numeric
baseline variables, each with a link, parents, and coefficients, and marks
the treatment/mediator/outcome roles. ``generate_cohort`` samples persons
i.i.d., invents event dates that respect the indication -> exposure ->
outcome ordering, and writes the four input files the rest of the package
consumes. ``true_acme`` evaluates the ground-truth indirect effect at the
untreated arm straight from the structural equations by Monte Carlo; it
never touches the estimation code, so the two can check each other.

Date construction, in person-relative days: entry is uniform over the
configured window; a treated person's indication is diagnosed at entry;
mediator exposure starts a Geometric(0.1) lag after its anchor (indication
when treated, else entry) and the outcome a Geometric(0.05) lag after its
own anchor. History diseases and drugs land strictly before entry. Persons
with neither indication nor mediator exposure get a sentinel enrollment
diagnosis at entry so they still carry an index date, and everyone gets a
far-future placebo exposure so the follow-up exclusion never bites.
"""

from __future__ import annotations

import csv
import datetime
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import kg
from .cohort import AnalysisSample
from .errors import SpecError
from .hypotheses import Hypothesis

VAR_KINDS = ("disease", "drug", "baseline")
LINKS = ("linear", "logistic")
RESERVED_CODES = ("ENROLL", "FU")

ENTRY_LAG_P = 0.01      # history events: days before entry
EXPOSURE_LAG_P = 0.1    # anchor -> exposure start
OUTCOME_LAG_P = 0.05    # anchor -> outcome diagnosis
FOLLOWUP_OFFSET = 5000  # placebo exposure this many days after entry


@dataclass(frozen=True)
class VarSpec:
    name: str
    kind: str
    link: str
    parents: tuple
    coefs: tuple
    noise_sd: float | None = None


@dataclass
class ScmSpec:
    variables: dict[str, VarSpec]
    treatment: str
    mediator: str
    outcome: str
    confounders: tuple = ()
    date_start: datetime.date = datetime.date(2000, 1, 1)
    window_days: int = 3652
    _order: list[str] = field(default_factory=list, repr=False)

    def topo_order(self) -> list[str]:
        if not self._order:
            remaining = dict(self.variables)
            done: set[str] = set()
            order: list[str] = []
            while remaining:
                ready = [n for n, v in remaining.items() if set(v.parents) <= done]
                if not ready:
                    raise SpecError("variable dependencies contain a cycle")
                for n in ready:
                    order.append(n)
                    done.add(n)
                    del remaining[n]
            self._order.extend(order)
        return list(self._order)

    def hypothesis(self) -> Hypothesis:
        return Hypothesis(
            indication=kg.disease(self.treatment),
            drug=kg.drug(self.mediator),
            outcome=kg.disease(self.outcome),
            source="causal",
        )


def _parse_kv(lines) -> dict[str, str]:
    out: dict[str, str] = {}
    for i, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SpecError(f"line {i}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in out:
            raise SpecError(f"line {i}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def _split_list(value: str) -> list[str]:
    return [part.strip() for part in value.split(",") if part.strip()]


def parse_scm(text: str) -> ScmSpec:
    """Parse and validate a flat key=value structural model description."""
    kv = _parse_kv(text.splitlines())
    var_fields: dict[str, dict[str, str]] = {}
    roles: dict[str, str] = {}
    dates: dict[str, str] = {}
    for key, value in kv.items():
        parts = key.split(".")
        if parts[0] == "var" and len(parts) == 3:
            var_fields.setdefault(parts[1], {})[parts[2]] = value
        elif parts[0] == "role" and len(parts) == 2:
            roles[parts[1]] = value
        elif parts[0] == "dates" and len(parts) == 2:
            dates[parts[1]] = value
        else:
            raise SpecError(f"unrecognized key {key!r}")

    variables: dict[str, VarSpec] = {}
    for name, fields in var_fields.items():
        if "." in name or not name:
            raise SpecError(f"bad variable name {name!r}")
        if name in RESERVED_CODES:
            raise SpecError(f"variable name {name!r} is reserved")
        unknown = set(fields) - {"kind", "link", "parents", "coefs", "noise_sd"}
        if unknown:
            raise SpecError(f"variable {name}: unknown fields {sorted(unknown)}")
        kind = fields.get("kind", "")
        if kind not in VAR_KINDS:
            raise SpecError(f"variable {name}: kind must be one of {VAR_KINDS}")
        link = fields.get("link", "logistic")
        if link not in LINKS:
            raise SpecError(f"variable {name}: link must be one of {LINKS}")
        if kind in ("disease", "drug") and link != "logistic":
            raise SpecError(f"variable {name}: {kind} variables are binary, need logistic link")
        parents = tuple(_split_list(fields.get("parents", "")))
        try:
            coefs = tuple(float(c) for c in _split_list(fields.get("coefs", "")))
        except ValueError as exc:
            raise SpecError(f"variable {name}: bad coefficient: {exc}") from None
        if len(coefs) != len(parents) + 1:
            raise SpecError(
                f"variable {name}: need {len(parents) + 1} coefficients "
                f"(intercept plus one per parent), got {len(coefs)}")
        noise_sd = None
        if "noise_sd" in fields:
            if link != "linear":
                raise SpecError(f"variable {name}: noise_sd applies to linear links only")
            noise_sd = float(fields["noise_sd"])
            if noise_sd < 0:
                raise SpecError(f"variable {name}: noise_sd must be non-negative")
        elif link == "linear":
            noise_sd = 1.0
        variables[name] = VarSpec(name, kind, link, parents, coefs, noise_sd)

    for name, var in variables.items():
        for p in var.parents:
            if p not in variables:
                raise SpecError(f"variable {name}: unknown parent {p!r}")

    for role in ("treatment", "mediator", "outcome"):
        if role not in roles:
            raise SpecError(f"missing role.{role}")
    unknown_roles = set(roles) - {"treatment", "mediator", "outcome", "confounders"}
    if unknown_roles:
        raise SpecError(f"unknown roles {sorted(unknown_roles)}")
    t, m, y = roles["treatment"], roles["mediator"], roles["outcome"]
    confounders = tuple(_split_list(roles.get("confounders", "")))
    for nm in (t, m, y, *confounders):
        if nm not in variables:
            raise SpecError(f"role names undeclared variable {nm!r}")
    if len({t, m, y}) != 3 or set(confounders) & {t, m, y}:
        raise SpecError("treatment, mediator, outcome, confounders must be distinct")

    unknown_dates = set(dates) - {"start", "window_days"}
    if unknown_dates:
        raise SpecError(f"unknown date settings {sorted(unknown_dates)}")
    try:
        start = datetime.date.fromisoformat(dates.get("start", "2000-01-01"))
    except ValueError as exc:
        raise SpecError(f"dates.start: {exc}") from None
    window = int(dates.get("window_days", "3652"))
    if window < 1:
        raise SpecError("dates.window_days must be positive")

    spec = ScmSpec(
        variables=variables, treatment=t, mediator=m, outcome=y,
        confounders=confounders, date_start=start, window_days=window)
    spec.topo_order()  # cycle check up front
    return spec


def load_scm(path) -> ScmSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_scm(fh.read())


def _draw_noise(spec: ScmSpec, n: int, rng) -> dict[str, np.ndarray]:
    """One exogenous noise array per variable, drawn in topological order."""
    noise = {}
    for name in spec.topo_order():
        var = spec.variables[name]
        if var.link == "logistic":
            noise[name] = rng.random(n)
        else:
            noise[name] = rng.standard_normal(n) * var.noise_sd
    return noise


def _evaluate(spec: ScmSpec, noise: dict, do: dict | None = None) -> dict[str, np.ndarray]:
    """Evaluate every structural equation under optional interventions."""
    do = do or {}
    n = len(next(iter(noise.values())))
    values: dict[str, np.ndarray] = {}
    for name in spec.topo_order():
        if name in do:
            forced = np.asarray(do[name], dtype=np.float64)
            values[name] = np.broadcast_to(forced, (n,)).copy()
            continue
        var = spec.variables[name]
        lin = np.full(n, var.coefs[0])
        for coef, parent in zip(var.coefs[1:], var.parents):
            lin += coef * values[parent]
        if var.link == "logistic":
            values[name] = (noise[name] < expit(lin)).astype(np.float64)
        else:
            values[name] = lin + noise[name]
    return values


def sample_scm(spec: ScmSpec, n: int, seed: int) -> dict[str, np.ndarray]:
    if n < 1:
        raise SpecError("n must be positive")
    rng = np.random.default_rng(seed)
    return _evaluate(spec, _draw_noise(spec, n, rng))


def _require_cohort_roles(spec: ScmSpec) -> None:
    """Cohort emission needs binary disease/drug/disease role variables."""
    t, m, y = spec.treatment, spec.mediator, spec.outcome
    if spec.variables[t].kind != "disease" or spec.variables[y].kind != "disease":
        raise SpecError("treatment and outcome must be disease variables")
    if spec.variables[m].kind != "drug":
        raise SpecError("mediator must be a drug variable")


def build_sample(spec: ScmSpec, n: int, seed: int) -> AnalysisSample:
    """In-memory analysis sample straight from the structural model.

    Covariates are the baseline variables plus 0/1 columns for the declared
    confounders, bypassing the date machinery; useful for calibration runs
    where only the estimator is under test.
    """
    _require_cohort_roles(spec)
    values = sample_scm(spec, n, seed)
    cov_names = sorted(
        nm for nm, v in spec.variables.items()
        if v.kind == "baseline" or nm in spec.confounders)
    if cov_names:
        covariates = np.column_stack([values[nm] for nm in cov_names])
    else:
        covariates = np.empty((n, 0))
    return AnalysisSample(
        hypothesis=spec.hypothesis(),
        person_ids=tuple(f"p{i + 1:06d}" for i in range(n)),
        t=values[spec.treatment].astype(np.int8),
        m=values[spec.mediator].astype(np.int8),
        y=values[spec.outcome].astype(np.int8),
        covariates=covariates,
        covariate_names=list(cov_names),
    )


def scm_graph_edges(spec: ScmSpec) -> list[kg.Edge]:
    """Knowledge-graph edges implied by the structural parents.

    Disease -> disease parents become onset edges and a drug's disease
    parents become its indications. Drug -> disease effects are the very
    thing the pipeline is supposed to discover, so they are left out.
    """
    edges = []
    for name, var in spec.variables.items():
        for parent in var.parents:
            pk = spec.variables[parent].kind
            if pk == "disease" and var.kind == "disease":
                edges.append(kg.Edge(
                    kg.disease(parent), kg.RelationKind.CAUSES_ONSET, kg.disease(name)))
            elif pk == "disease" and var.kind == "drug":
                edges.append(kg.Edge(
                    kg.drug(name), kg.RelationKind.INDICATED_FOR, kg.disease(parent)))
    return edges


def generate_cohort(spec: ScmSpec, n: int, seed: int, out_dir) -> dict[str, str]:
    """Sample n persons and write graph.tsv plus the three cohort CSVs.

    Returns the written paths keyed by role. Byte-identical for a fixed
    (spec, n, seed).
    """
    import os

    _require_cohort_roles(spec)
    values = sample_scm(spec, n, seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    entry = rng.integers(0, spec.window_days, size=n)
    exposure_lag = rng.geometric(EXPOSURE_LAG_P, size=n)
    outcome_lag = rng.geometric(OUTCOME_LAG_P, size=n)
    history_lag = {
        name: rng.geometric(ENTRY_LAG_P, size=n)
        for name in spec.topo_order()
        if name not in (spec.treatment, spec.mediator, spec.outcome)
        and spec.variables[name].kind in ("disease", "drug")
    }

    t = values[spec.treatment].astype(bool)
    m = values[spec.mediator].astype(bool)
    y = values[spec.outcome].astype(bool)

    def day(offset: np.ndarray | int, i: int) -> str:
        extra = int(offset[i]) if isinstance(offset, np.ndarray) else int(offset)
        return (spec.date_start + datetime.timedelta(days=int(entry[i]) + extra)).isoformat()

    exposure_anchor = np.zeros(n, dtype=np.int64)  # days after entry
    exposure_start = exposure_anchor + exposure_lag
    outcome_anchor = np.where(m, exposure_start, 0)
    outcome_day = outcome_anchor + outcome_lag

    diagnoses: list[tuple[str, str, str]] = []
    exposures: list[tuple[str, str, str, str]] = []
    baselines: list[tuple[str, str, str]] = []
    baseline_names = [nm for nm in spec.topo_order() if spec.variables[nm].kind == "baseline"]

    from .tablefile import format_value

    for i in range(n):
        pid = f"p{i + 1:06d}"
        for name, lag in history_lag.items():
            if values[name][i] >= 0.5:
                if spec.variables[name].kind == "disease":
                    diagnoses.append((pid, name, day(-lag, i)))
                else:
                    exposures.append((pid, name, day(-lag, i), ""))
        if t[i]:
            diagnoses.append((pid, spec.treatment, day(0, i)))
        elif not m[i]:
            diagnoses.append((pid, "ENROLL", day(0, i)))
        if m[i]:
            exposures.append((pid, spec.mediator, day(exposure_start, i), ""))
        if y[i]:
            diagnoses.append((pid, spec.outcome, day(outcome_day, i)))
        exposures.append((pid, "FU", day(FOLLOWUP_OFFSET, i), ""))
        for name in baseline_names:
            baselines.append((pid, name, format_value(float(values[name][i]))))

    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "graph": os.path.join(out_dir, "graph.tsv"),
        "diagnoses": os.path.join(out_dir, "diagnoses.csv"),
        "exposures": os.path.join(out_dir, "exposures.csv"),
        "baseline": os.path.join(out_dir, "baseline.csv"),
    }
    g = kg.CausalKnowledgeGraph(scm_graph_edges(spec))
    kg.write_graph(paths["graph"], g)
    _write_csv(paths["diagnoses"], ("person_id", "code", "date"), diagnoses)
    _write_csv(paths["exposures"], ("person_id", "drug_code", "start_date", "end_date"), exposures)
    _write_csv(paths["baseline"], ("person_id", "name", "value"), baselines)
    return paths


def _write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


@dataclass(frozen=True)
class OracleValue:
    value: float
    se: float
    closed_form: float | None = None

    def __float__(self) -> float:
        return self.value

    def band(self, width: float = 4.0) -> tuple[float, float]:
        return self.value - width * self.se, self.value + width * self.se


def _closed_form_acme(spec: ScmSpec) -> float | None:
    """Product of coefficients when the T->M->Y chain is linear and direct.

    Only applies when the treatment reaches the mediator directly (no
    intermediate variables) and likewise mediator to outcome; anything
    fancier falls back to Monte Carlo alone.
    """
    med = spec.variables[spec.mediator]
    out = spec.variables[spec.outcome]
    if med.link != "linear" or out.link != "linear":
        return None
    t_desc = _descendants_of(spec, spec.treatment)
    m_desc = _descendants_of(spec, spec.mediator)
    if (t_desc & set(med.parents)) - {spec.treatment}:
        return None
    if (m_desc & set(out.parents)) - {spec.mediator}:
        return None
    if spec.treatment not in med.parents or spec.mediator not in out.parents:
        return 0.0
    a = med.coefs[1 + med.parents.index(spec.treatment)]
    b = out.coefs[1 + out.parents.index(spec.mediator)]
    return a * b


def _descendants_of(spec: ScmSpec, name: str) -> set[str]:
    desc = {name}
    for nm in spec.topo_order():
        if nm != name and set(spec.variables[nm].parents) & desc:
            desc.add(nm)
    desc.discard(name)
    return desc


def true_acme(spec: ScmSpec, mc_draws: int = 10**7, seed: int = 0,
              chunk: int = 10**6) -> OracleValue:
    """Ground-truth indirect effect at the untreated arm, by Monte Carlo.

    Per draw: hold treatment at 0, move only the mediator between its
    do(T=1) and do(T=0) laws, and difference the outcome probability,
    integrating the outcome's own noise out analytically. When nothing
    between mediator and outcome depends on the mediator, its Bernoulli is
    integrated out too. Shared noise couples the two arms. For an
    all-linear mediator/outcome pair the product-of-coefficients value is
    attached and must agree within four standard errors.
    """
    if mc_draws < 1:
        raise SpecError("mc_draws must be positive")
    med = spec.variables[spec.mediator]
    out = spec.variables[spec.outcome]
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    # other parents of Y untouched by M: safe to average over M analytically
    can_collapse = (
        med.link == "logistic"
        and not (_descendants_of(spec, spec.mediator) & set(out.parents))
    )

    def outcome_mean(world: dict, m_values) -> np.ndarray:
        lin = np.full(len(m_values), out.coefs[0], dtype=np.float64)
        for coef, parent in zip(out.coefs[1:], out.parents):
            lin += coef * (m_values if parent == spec.mediator else world[parent])
        return expit(lin) if out.link == "logistic" else lin

    total = 0.0
    total_sq = 0.0
    done = 0
    while done < mc_draws:
        size = min(chunk, mc_draws - done)
        noise = _draw_noise(spec, size, rng)
        arm1 = _evaluate(spec, noise, do={spec.treatment: 1.0})
        arm0 = _evaluate(spec, noise, do={spec.treatment: 0.0})

        if can_collapse:
            def mediator_prob(arm: dict) -> np.ndarray:
                lin = np.full(size, med.coefs[0])
                for coef, parent in zip(med.coefs[1:], med.parents):
                    lin += coef * arm[parent]
                return expit(lin)

            gap = outcome_mean(arm0, np.ones(size)) - outcome_mean(arm0, np.zeros(size))
            delta = (mediator_prob(arm1) - mediator_prob(arm0)) * gap
        else:
            cross = _evaluate(
                spec, noise,
                do={spec.treatment: 0.0, spec.mediator: arm1[spec.mediator]})
            delta = (outcome_mean(cross, cross[spec.mediator])
                     - outcome_mean(arm0, arm0[spec.mediator]))

        total += float(delta.sum())
        total_sq += float((delta * delta).sum())
        done += size

    mean = total / mc_draws
    var = max(total_sq / mc_draws - mean * mean, 0.0)
    se = math.sqrt(var / mc_draws)
    cf = _closed_form_acme(spec)
    if cf is not None and abs(mean - cf) > 4.0 * max(se, 1e-15):
        raise SpecError(
            f"Monte Carlo value {mean:.6g} disagrees with closed form {cf:.6g} "
            f"beyond 4 standard errors ({se:.3g})")
    return OracleValue(value=mean, se=se, closed_form=cf)
