"""Command-line pipeline driver.

Every subcommand reads an optional flat key=value config file; flags given
on the command line win over config values. Outputs are tab-separated with
a comment header recording the tool version, a hash of the effective
configuration, and the seed, so a result file always names the run that
made it. Exit codes: 0 success (even when individual hypotheses fail and
land in the status column), 2 for bad usage or unreadable inputs, 3 for
internal errors.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys

from . import __version__
from . import adjustment as adj_mod
from . import cohort as cohort_mod
from . import evaluation as eval_mod
from . import hypotheses as hyp_mod
from . import kg
from . import mediation as med_mod
from . import synth as synth_mod
from .errors import CkgError, CycleError, DomainError, NoValidSet, OneClass, UnknownNode
from .tablefile import format_value, write_table

_CONFIG_KEYS = {
    "graph", "diagnoses", "exposures", "baseline", "reference", "hypotheses",
    "mediation", "out", "source", "criterion", "lasso", "alpha", "nsim",
    "backdoor_limit", "seed", "threads", "spec", "n", "sets",
}


def _read_config(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for i, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise DomainError(f"{path}:{i}: expected key=value")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_KEYS:
                raise DomainError(f"{path}:{i}: unknown config key {key!r}")
            out[key] = value.strip()
    return out


class Settings:
    """Effective configuration: config file values overridden by flags."""

    def __init__(self, args: argparse.Namespace):
        self._values: dict[str, str] = {}
        if getattr(args, "config", None):
            self._values.update(_read_config(args.config))
        for key in _CONFIG_KEYS:
            flag = getattr(args, key, None)
            if flag is not None:
                self._values[key] = str(flag)

    def get(self, key: str, default: str | None = None) -> str | None:
        return self._values.get(key, default)

    def require(self, key: str) -> str:
        value = self._values.get(key)
        if value is None:
            raise DomainError(f"missing required setting {key!r}")
        return value

    def get_int(self, key: str, default: int) -> int:
        raw = self._values.get(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise DomainError(f"setting {key!r} must be an integer, got {raw!r}") from None

    def get_float(self, key: str, default: float) -> float:
        raw = self._values.get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise DomainError(f"setting {key!r} must be a number, got {raw!r}") from None

    def get_bool(self, key: str, default: bool) -> bool:
        raw = self._values.get(key)
        if raw is None:
            return default
        low = raw.lower()
        if low in ("1", "true", "yes"):
            return True
        if low in ("0", "false", "no"):
            return False
        raise DomainError(f"setting {key!r} must be a boolean, got {raw!r}")

    def fingerprint(self) -> str:
        """Hash of the semantic settings; execution details excluded.

        threads and out change how or where a run executes, never what it
        computes, so identical analyses hash identically.
        """
        skip = {"threads", "out"}
        lines = [f"{k}={v}" for k, v in sorted(self._values.items()) if k not in skip]
        return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


def _header(settings: Settings, seed: int) -> list[str]:
    return [
        f"ckgmed {__version__}",
        f"config_sha256={settings.fingerprint()}",
        f"seed={seed}",
    ]


def _out_path(settings: Settings, filename: str) -> str:
    out_dir = settings.get("out", ".")
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, filename)


def _load_graph(settings: Settings) -> kg.CausalKnowledgeGraph:
    return kg.load_graph(settings.require("graph"))


def _load_cohort(settings: Settings) -> cohort_mod.Cohort:
    return cohort_mod.load_cohort(
        settings.require("diagnoses"),
        settings.require("exposures"),
        settings.require("baseline"),
    )


def _validated_common(settings: Settings) -> tuple[float, int, int, int, int]:
    alpha = settings.get_float("alpha", 0.05)
    if not 0 < alpha < 1:
        raise DomainError("alpha must be in (0, 1)")
    nsim = settings.get_int("nsim", 1000)
    if nsim < 100:
        raise DomainError("nsim must be at least 100")
    limit = settings.get_int("backdoor_limit", 1000)
    if limit < 1:
        raise DomainError("backdoor_limit must be positive")
    seed = settings.get_int("seed", 0)
    threads = settings.get_int("threads", 1)
    if threads < 1:
        raise DomainError("threads must be positive")
    return alpha, nsim, limit, seed, threads


def cmd_check_graph(args) -> int:
    settings = Settings(args)
    g = _load_graph(settings)
    s = g.summary
    print(f"nodes={s.n_nodes}")
    print(f"edges={s.n_edges}")
    print(f"duplicates_dropped={s.n_duplicates}")
    for rel, count in sorted(s.relation_counts.items()):
        print(f"relation.{rel}={count}")
    return 0


def cmd_gen_hypotheses(args) -> int:
    settings = Settings(args)
    alpha, _, _, seed, _ = _validated_common(settings)
    g = _load_graph(settings)
    source = settings.get("source", hyp_mod.SOURCE_CAUSAL)
    if source not in (hyp_mod.SOURCE_CAUSAL, hyp_mod.SOURCE_COMORBIDITY):
        raise DomainError(f"source must be causal or comorbidity, got {source!r}")

    cohort = None
    if settings.get("diagnoses"):
        cohort = _load_cohort(settings)

    comments = _header(settings, seed)
    if source == hyp_mod.SOURCE_CAUSAL:
        pairs = hyp_mod.causal_pairs(g)
    else:
        if cohort is None:
            raise DomainError("source=comorbidity needs diagnoses/exposures/baseline paths")
        mined = hyp_mod.mine_comorbidity_pairs(cohort, g, alpha=alpha)
        hyp_mod.write_comorbidity(_out_path(settings, "comorbidity.tsv"), mined, comments)
        pairs = [(cp.d1, cp.d2) for cp in mined]

    hyps = hyp_mod.generate_hypotheses(g, pairs, source)
    n_generated = len(hyps)
    if cohort is not None:
        hyps = hyp_mod.availability_filter(cohort, g, hyps)
    hyp_mod.write_hypotheses(_out_path(settings, "hypotheses.tsv"), hyps, comments)
    print(f"pairs={len(pairs)}")
    print(f"hypotheses={n_generated}")
    print(f"available={len(hyps)}")
    return 0


def cmd_adjust(args) -> int:
    settings = Settings(args)
    _, _, limit, seed, _ = _validated_common(settings)
    g = _load_graph(settings)
    hyps = hyp_mod.read_hypotheses(settings.require("hypotheses"))
    criterion = settings.get("criterion", "backdoor")
    rows = []
    for h in sorted(hyps, key=lambda h: h.key):
        try:
            nodes = adj_mod.hypothesis_adjustment(g, h, criterion, limit=limit)
        except (NoValidSet, UnknownNode, CycleError):
            nodes = None
        rows.append((h, criterion, nodes))
    adj_mod.write_adjustments(
        _out_path(settings, "adjustments.tsv"), rows, _header(settings, seed))
    print(f"hypotheses={len(rows)}")
    print(f"ok={sum(1 for _, _, nodes in rows if nodes is not None)}")
    return 0


MEDIATE_SUMMARY_COLUMNS = [
    "source", "criterion", "n_hypotheses", "n_na", "n_insig", "n_pos", "n_neg",
    "precision", "recall", "f1",
]


def _summary_rows(rows, reference) -> list[tuple]:
    out = []
    for source, criterion, total, n_na, n_insig, n_pos, n_neg in med_mod.summarize(rows):
        cell = [r for r in rows
                if r.hypothesis.source == source and r.criterion == criterion]
        if reference is not None:
            sig = eval_mod.significant_positive_pairs(cell)
            precision, recall, f1 = eval_mod.prf(
                sig, [r.hypothesis for r in cell], reference)
        else:
            precision = recall = f1 = float("nan")
        out.append((source, criterion, total, n_na, n_insig, n_pos, n_neg,
                    precision, recall, f1))
    return out


def cmd_mediate(args) -> int:
    settings = Settings(args)
    alpha, nsim, limit, seed, threads = _validated_common(settings)
    criterion = settings.get("criterion", "backdoor")
    g = _load_graph(settings)
    cohort = _load_cohort(settings)
    hyps = hyp_mod.read_hypotheses(settings.require("hypotheses"))
    config = med_mod.MediationConfig(
        criterion=criterion,
        lasso=settings.get_bool("lasso", False),
        nsim=nsim,
        alpha=alpha,
        backdoor_limit=limit,
        seed=seed,
        threads=threads,
    )
    rows = med_mod.run_mediation_batch(hyps, cohort, g, config)

    reference = None
    if settings.get("reference"):
        reference = eval_mod.read_reference(settings.require("reference"))

    comments = _header(settings, seed)
    med_mod.write_mediation(_out_path(settings, "mediation.tsv"), rows, comments)
    write_table(
        _out_path(settings, "summary.tsv"),
        MEDIATE_SUMMARY_COLUMNS, _summary_rows(rows, reference), comments)
    counts = {}
    for r in rows:
        counts[r.outcome_class] = counts.get(r.outcome_class, 0) + 1
    print(f"hypotheses={len(rows)}")
    for cls in (med_mod.CLASS_NA, med_mod.CLASS_INSIG, med_mod.CLASS_POS, med_mod.CLASS_NEG):
        print(f"{cls}={counts.get(cls, 0)}")
    return 0


def _effect_sets(g, mediation_rows):
    """Known (graph), discovered (significant-positive), and union sets."""
    known: dict[kg.NodeId, set] = {}
    for d in g.drugs():
        known[d] = kg.side_effects_of(g, d)
    discovered: dict[kg.NodeId, set] = {}
    for row in mediation_rows:
        if row["class"] == "pos":
            discovered.setdefault(kg.drug(row["drug"]), set()).add(
                kg.disease(row["outcome"]))
    union: dict[kg.NodeId, set] = {}
    for d in set(known) | set(discovered):
        union[d] = set(known.get(d, set())) | set(discovered.get(d, set()))
    return known, discovered, union


def _similarity_auc(drug_sets, g) -> tuple[float, float]:
    """(AUC, Mann-Whitney p) for shared-indication prediction; nan when undefined."""
    populated = {d: s for d, s in drug_sets.items() if s}
    if len(populated) < 2:
        return float("nan"), float("nan")
    sim = eval_mod.similarity_matrix(populated, normalize=True)
    try:
        scores, labels = eval_mod.shared_indication_labels(sim, g)
        auc = eval_mod.roc_auc(scores, labels)
        sharing = [s for s, l in zip(scores, labels) if l == 1]
        other = [s for s, l in zip(scores, labels) if l == 0]
        _, p = eval_mod.mann_whitney_u(sharing, other)
        return auc, p
    except (OneClass, UnknownNode):
        return float("nan"), float("nan")


def cmd_evaluate(args) -> int:
    settings = Settings(args)
    _, _, _, seed, _ = _validated_common(settings)
    g = _load_graph(settings)
    rows = med_mod.read_mediation(settings.require("mediation"))
    reference = eval_mod.read_reference(settings.require("reference"))

    tested = [
        hyp_mod.Hypothesis(
            indication=kg.disease(r["indication"]), drug=kg.drug(r["drug"]),
            outcome=kg.disease(r["outcome"]), source=r["source"])
        for r in rows
    ]
    significant = {
        (kg.drug(r["drug"]), kg.disease(r["outcome"]))
        for r in rows if r["class"] == "pos"
    }
    precision, recall, f1 = eval_mod.prf(significant, tested, reference)

    known, discovered, union = _effect_sets(g, rows)
    auc_known, _ = _similarity_auc(known, g)
    auc_discovered, _ = _similarity_auc(discovered, g)
    auc_union, mwu_p = _similarity_auc(union, g)

    metrics = {
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "auc_known": auc_known,
        "auc_discovered": auc_discovered,
        "auc_union": auc_union,
        "mwu_p": mwu_p,
    }
    eval_mod.write_metrics(
        _out_path(settings, "metrics.txt"), metrics, _header(settings, seed))
    for key, value in metrics.items():
        print(f"{key}={format_value(value)}")
    return 0


def cmd_similarity(args) -> int:
    settings = Settings(args)
    _, _, _, seed, _ = _validated_common(settings)
    g = _load_graph(settings)
    which = settings.get("sets", "known")
    if which not in ("known", "discovered", "union"):
        raise DomainError(f"sets must be known, discovered, or union, got {which!r}")
    rows = []
    if settings.get("mediation"):
        rows = med_mod.read_mediation(settings.require("mediation"))
    elif which != "known":
        raise DomainError(f"sets={which} needs a mediation file")
    known, discovered, union = _effect_sets(g, rows)
    drug_sets = {"known": known, "discovered": discovered, "union": union}[which]
    populated = {d: s for d, s in drug_sets.items() if s}
    if len(populated) < 2:
        raise DomainError("similarity needs at least two drugs with effect sets")
    sim = eval_mod.similarity_matrix(populated, normalize=True)
    table = []
    for i in range(len(sim.drugs)):
        for j in range(i + 1, len(sim.drugs)):
            table.append((sim.drugs[i].code, sim.drugs[j].code, sim.pair_score(i, j)))
    write_table(
        _out_path(settings, "similarity.tsv"),
        ["drug_a", "drug_b", "score"], table, _header(settings, seed))
    print(f"drugs={len(sim.drugs)}")
    print(f"pairs={len(table)}")
    return 0


def cmd_simulate(args) -> int:
    settings = Settings(args)
    seed = settings.get_int("seed", 0)
    n = settings.get_int("n", 1000)
    if n < 1:
        raise DomainError("n must be positive")
    spec = synth_mod.load_scm(settings.require("spec"))
    out_dir = settings.get("out", ".")
    paths = synth_mod.generate_cohort(spec, n, seed, out_dir)
    for name, path in sorted(paths.items()):
        print(f"{name}={path}")
    if getattr(args, "oracle_draws", None):
        oracle = synth_mod.true_acme(spec, mc_draws=int(args.oracle_draws), seed=seed)
        eval_mod.write_metrics(
            os.path.join(out_dir, "oracle.txt"),
            {
                "true_acme": oracle.value,
                "mc_se": oracle.se,
                "closed_form": float("nan") if oracle.closed_form is None else oracle.closed_form,
            },
            _header(settings, seed))
        print(f"true_acme={format_value(oracle.value)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ckgmed",
        description="Drug side-effect discovery via causal mediation on a knowledge graph",
    )
    parser.add_argument("--version", action="version", version=f"ckgmed {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, helptext, flags):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="flat key=value config file")
        for flag in flags:
            if flag in ("lasso",):
                p.add_argument(f"--{flag}", action="store_const", const="true", default=None)
            else:
                p.add_argument(f"--{flag.replace('_', '-')}", dest=flag, default=None)
        p.set_defaults(func=func)
        return p

    add("check-graph", cmd_check_graph, "validate a graph file and print a summary",
        ["graph"])
    add("gen-hypotheses", cmd_gen_hypotheses, "generate indication/drug/outcome hypotheses",
        ["graph", "diagnoses", "exposures", "baseline", "source", "alpha", "seed", "out"])
    add("adjust", cmd_adjust, "compute adjustment sets per hypothesis",
        ["graph", "hypotheses", "criterion", "backdoor_limit", "seed", "out"])
    add("mediate", cmd_mediate, "run the mediation batch",
        ["graph", "diagnoses", "exposures", "baseline", "hypotheses", "reference",
         "criterion", "lasso", "alpha", "nsim", "backdoor_limit", "seed", "threads", "out"])
    add("evaluate", cmd_evaluate, "score mediation results against a reference set",
        ["graph", "mediation", "reference", "seed", "out"])
    add("similarity", cmd_similarity, "pairwise drug similarity from side-effect sets",
        ["graph", "mediation", "sets", "seed", "out"])
    sim = add("simulate", cmd_simulate, "generate a synthetic cohort from a model spec",
              ["spec", "n", "seed", "out"])
    sim.add_argument("--oracle-draws", dest="oracle_draws", default=None,
                     help="also Monte-Carlo the true indirect effect with this many draws")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CkgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - internal invariant violations
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
