"""Deterministic result emission.

A run produces a plain-text result document (resolved config, scalars,
spectra, dense matrices at 17 significant digits) whose bytes depend only on
the config and seed, plus a separate metadata JSON that absorbs everything
volatile (timestamps, versions).  Curves go to CSV with shortest round-trip
floats and a mandatory header.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np


def fmt(value) -> str:
    """17-significant-digit decimal for result documents."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (complex, np.complexfloating)):
        return f"{value.real:.16e} {value.imag:+.16e}j"
    return f"{float(value):.16e}"


def fmt_csv(value) -> str:
    """Shortest round-trip representation for CSV cells."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (complex, np.complexfloating)):
        return repr(complex(value))
    return str(value)


def canonical_config(config: dict) -> str:
    return json.dumps(config, sort_keys=True, separators=(", ", ": "), default=str)


def _matrix_lines(arr: np.ndarray):
    arr = np.asarray(arr)
    for row in np.atleast_2d(arr):
        yield " ".join(fmt(complex(x)) for x in row)


def render_result_document(config: dict, sections: dict) -> str:
    """Assemble the result text: a [config] block followed by one block per
    section; scalar mappings become `key = value` lines, vectors become
    indexed lines, matrices dense rows."""
    out = ["# scmfkit result document", "", "[config]", canonical_config(config), ""]
    for name, payload in sections.items():
        out.append(f"[{name}]")
        if isinstance(payload, dict):
            for key, value in payload.items():
                out.append(f"{key} = {fmt(value)}")
        elif isinstance(payload, (list, tuple)) and all(isinstance(x, str) for x in payload):
            if payload:
                out.extend(f"- {line}" for line in payload)
            else:
                out.append("- none")
        else:
            arr = np.asarray(payload)
            if arr.ndim <= 1:
                for i, x in enumerate(np.atleast_1d(arr)):
                    out.append(f"{i} {fmt(complex(x) if np.iscomplexobj(arr) else x)}")
            else:
                out.extend(_matrix_lines(arr))
        out.append("")
    return "\n".join(out)


def solver_sections(report) -> dict:
    """Standard section layout for a SolverReport."""
    result = {
        "task": report.task,
        "converged": report.converged,
        "energy": report.energy,
        "iterations": report.iterations,
    }
    if report.mu is not None:
        result["mu"] = report.mu
    if report.kappa is not None:
        result["kappa_is_auxiliary"] = report.kappa_is_auxiliary
    sections = {"result": result}
    if report.q_values:
        sections["q_values"] = {k: v for k, v in report.q_values.items()}
        sections["multipliers"] = {k: v for k, v in (report.multipliers or {}).items()}
    sections["spectrum"] = report.spectrum
    sections["density"] = report.density
    if report.kappa is not None:
        sections["kappa"] = report.kappa
    sections["residuals"] = dict(report.residuals)
    sections["warnings"] = list(report.warnings)
    return sections


def write_result(out_dir, name: str, config: dict, sections: dict) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.txt"
    path.write_text(render_result_document(config, sections))
    meta = {
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "numpy": np.__version__,
    }
    (out_dir / f"{name}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path


def write_csv(out_dir, name: str, header, rows) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.csv"
    lines = [",".join(header)]
    lines.extend(",".join(fmt_csv(cell) for cell in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    return path


def curve_csv_rows(curve):
    return list(curve.rows())


CURVE_HEADER = ("param", "value", "argmin", "branch", "residual", "flag")
