"""CSV, JSON and gnuplot output for reports and single trajectories.

Everything written here is a pure function of the report, so identical inputs
give byte-identical files.
"""
import csv
import io
import json
import math

CELL_COLUMNS = (
    "method", "epsilon", "h", "n_steps", "err_x", "err_vpar", "err_vperp",
    "resonance_flag", "fp_iters", "fp_residual",
)
EXTRA_COLUMNS = ("rule", "res_k", "res_min", "fp_mode", "status")

TRAJ_COLUMNS = (
    "n", "t", "x1", "x2", "x3", "v1", "v2", "v3", "vh1", "vh2", "vh3",
    "res_k", "fp_iters", "fp_residual",
)


def _num(x):
    if x is None:
        return "nan"
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else "nan"
    return str(x)


def cell_row(cell):
    e = cell.errors
    errs = e.as_tuple() if e is not None else (None, None, None)
    return [
        cell.method, _num(cell.epsilon), _num(cell.h), str(cell.n_steps),
        *(_num(v) for v in errs),
        "1" if cell.flagged else "0",
        str(cell.fp_iters), _num(cell.fp_residual),
        cell.rule, str(cell.res_k), _num(cell.res_min), cell.fp_mode, cell.status,
    ]


def report_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CELL_COLUMNS + EXTRA_COLUMNS)
    for c in report.cells:
        w.writerow(cell_row(c))
    return buf.getvalue()


def _slope_key(key):
    method, rule, metric = key
    return f"{method}|{rule}|{metric}"


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def report_dict(report):
    cells = []
    for c in report.cells:
        e = c.errors
        cells.append({
            "method": c.method, "epsilon": c.epsilon, "h": c.h, "rule": c.rule,
            "n_steps": c.n_steps,
            "err_x": e.err_x if e else None,
            "err_vpar": e.err_vpar if e else None,
            "err_vperp": e.err_vperp if e else None,
            "err_mode": e.mode if e else None,
            "resonance_flag": c.flagged, "res_k": c.res_k, "res_min": c.res_min,
            "fp_mode": c.fp_mode, "fp_iters": c.fp_iters, "fp_residual": c.fp_residual,
            "oracle_residual": c.oracle_residual,
            "status": c.status, "message": c.message,
        })
    slopes = {_slope_key(k): v for k, v in sorted(report.slopes.items())}
    return _json_safe({"metadata": report.metadata, "slopes": slopes, "cells": cells})


def report_json(report):
    return json.dumps(report_dict(report), indent=1, sort_keys=True) + "\n"


def gnuplot_script(csv_name, report):
    """Log-log plot of ``err_x`` against epsilon (sweeps) or ``h/eps`` (scans)."""
    methods = sorted({c.method for c in report.cells})
    scan = report.metadata.get("kind") == "resonance-scan"
    xexpr = "($3/$2)" if scan else "2"
    xlabel = "h / epsilon" if scan else "epsilon"
    lines = [
        "set datafile separator ','",
        "set logscale xy",
        f"set xlabel '{xlabel}'",
        "set ylabel 'err_x'",
        "set key top left",
        "set terminal pngcairo size 900,600",
        f"set output '{csv_name.rsplit('.', 1)[0]}.png'",
    ]
    plots = []
    for m in methods:
        sel = f'(strcol(1) eq "{m}" && strcol(15) eq "ok" ? $5 : 1/0)'
        style = "lines" if scan else "linespoints"
        plots.append(f"'{csv_name}' skip 1 using {xexpr}:{sel} with {style} title '{m}'")
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def trajectory_csv(traj):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJ_COLUMNS)
    for n in range(len(traj)):
        w.writerow([
            str(n), _num(float(n * traj.h)),
            *(_num(float(a)) for a in traj.x[n]),
            *(_num(float(a)) for a in traj.v_node[n]),
            *(_num(float(a)) for a in traj.v_half[n]),
            str(int(traj.res_k[n])), str(int(traj.fp_iters[n])), _num(float(traj.fp_residual[n])),
        ])
    return buf.getvalue()


def trajectory_json(traj):
    return json.dumps(_json_safe(traj.to_dict()), indent=1, sort_keys=True) + "\n"
