"""Dry run of the recovery suite before its seeds are frozen.

Not part of the test suite; measures per-spec CI coverage on seed ranges
disjoint from the acceptance seeds so the spec files can be tuned while
they are still cheap to change. Protocol mirrors the acceptance test:
every (spec, replicate) cell gets its own cohort seed and draw stream.
"""

import hashlib
import pathlib
import sys
import tempfile
import time
import warnings

ROOT = pathlib.Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from ckgmed import adjustment, cohort, kg, mediation, synth  # noqa: E402


def cell_seed(spec_name: str, rep: int, stage: str) -> int:
    digest = hashlib.sha256(f"{spec_name}|{rep}|{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2**63)


def run_cell(spec, spec_name, rep):
    with tempfile.TemporaryDirectory() as tmp:
        paths = synth.generate_cohort(spec, 5000, cell_seed(spec_name, rep, "cohort"), tmp)
        g = kg.load_graph(paths["graph"])
        c = cohort.load_cohort(paths["diagnoses"], paths["exposures"], paths["baseline"])
        h = spec.hypothesis()
        nodes = adjustment.hypothesis_adjustment(g, h, "backdoor")
        adj = adjustment.AdjustmentSet(nodes=nodes, criterion="backdoor", pruned=True)
        sample = cohort.select_sample(c, g, h, adj)
        return mediation.estimate_acme(
            sample, sample.covariate_names, nsim=1000,
            seed=cell_seed(spec_name, rep, "draws"))


def main():
    lo = int(sys.argv[1]) if len(sys.argv) > 1 else 100
    hi = int(sys.argv[2]) if len(sys.argv) > 2 else 200
    warnings.filterwarnings("ignore")
    fixture = {}
    for line in (ROOT / "tests" / "fixtures" / "oracle_acme.tsv").read_text().splitlines():
        if line.startswith("#") or line.startswith("spec\t"):
            continue
        name, value, se, _ = line.split("\t")
        fixture[name] = (float(value), float(se))

    t0 = time.time()
    for name in ("s1", "s2", "s3", "s4", "s5"):
        spec = synth.load_scm(ROOT / "tests" / "specs" / f"{name}.txt")
        truth, ose = fixture[name]
        n_cover = n_int = 0
        for rep in range(lo, hi):
            est = run_cell(spec, name, rep)
            n_cover += (est.ci_low - 4 * ose) <= truth <= (est.ci_high + 4 * ose)
            n_int += est.interaction
        n = hi - lo
        print(f"{name}: coverage {n_cover}/{n} = {n_cover / n:.3f} "
              f"interaction rate {n_int / n:.3f}", flush=True)
    print(f"total {time.time() - t0:.0f}s")


if __name__ == "__main__":
    main()
