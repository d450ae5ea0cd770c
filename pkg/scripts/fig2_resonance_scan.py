"""Endpoint error against h = 1/k, k = 60..600, at eps = 2^-10.

Writes ``fig2.csv``, ``fig2.json`` and ``fig2.gp`` into the output directory
and prints the flagged k clusters with the Imp-A and TwoP-A errors.
"""
import argparse
from pathlib import Path

from filtered_boris.harness import report as rep
from filtered_boris.harness.checks import check_resonance_scan
from filtered_boris.harness.experiments import PAPER_SCAN_KS, paper_scan_spec, run_resonance_scan


def clusters(ks):
    """Group sorted integers into runs of consecutive values."""
    runs = []
    for k in ks:
        if runs and k == runs[-1][-1] + 1:
            runs[-1].append(k)
        else:
            runs.append([k])
    return runs


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out-dir", default="results")
    p.add_argument("--workers", type=int, default=4)
    args = p.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scan = run_resonance_scan(paper_scan_spec(), PAPER_SCAN_KS, workers=args.workers)
    (out / "fig2.csv").write_text(rep.report_csv(scan))
    (out / "fig2.json").write_text(rep.report_json(scan))
    (out / "fig2.gp").write_text(rep.gnuplot_script("fig2.csv", scan))

    two = {round(1 / c.h): c for c in scan.cells if c.method == "twop-a"}
    for run in clusters(sorted(k for k, c in two.items() if c.flagged)):
        print(f"flagged k = {run[0]}..{run[-1]} (harmonic {two[run[0]].res_k})")
    print(check_resonance_scan(scan).line())
    print(f"{len(scan.cells)} cells in {scan.elapsed:.0f}s, output in {out}/")


if __name__ == "__main__":
    main()
