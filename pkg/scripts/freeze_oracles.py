"""Recompute the frozen ground-truth effects under tests/specs/.

Writes tests/fixtures/oracle_acme.tsv. The committed fixture is the
contract; rerun this only when a spec file changes, and expect the
values to reproduce exactly (fixed seed, fixed draw count).
"""

import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent
SPECS = ("s1", "s2", "s3", "s4", "s5", "null", "confounded")
DRAWS = 10**7
SEED = 0


def main() -> int:
    sys.path.insert(0, str(ROOT / "src"))
    from ckgmed import synth

    out_path = ROOT / "tests" / "fixtures" / "oracle_acme.tsv"
    lines = [
        f"# true indirect effect per spec, {DRAWS} draws, seed {SEED}",
        "# generated by scripts/freeze_oracles.py",
        "spec\tvalue\tse\tclosed_form",
    ]
    for name in SPECS:
        spec = synth.load_scm(ROOT / "tests" / "specs" / f"{name}.txt")
        oracle = synth.true_acme(spec, mc_draws=DRAWS, seed=SEED)
        cf = "nan" if oracle.closed_form is None else f"{oracle.closed_form:.12g}"
        lines.append(f"{name}\t{oracle.value:.12g}\t{oracle.se:.12g}\t{cf}")
        print(lines[-1])
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {out_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
