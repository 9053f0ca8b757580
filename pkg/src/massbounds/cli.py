"""Batch driver: ``massbounds run <config>`` and ``massbounds report <dir>``.

Config grammar (YAML; ``#`` starts a comment)::

    output: runs/corpus            # artifact directory (required)
    scenarios: [all]               # names from the registry, or "all"
    resolutions:                   # cells per box side / per diameter
      asymptotic: [32]             # a plain list applies to every kind
      compact: [20, 28, 36]
    truncations: [4.0, 8.0]        # exterior-solve box half-widths
    tolerances: {mass_rel: 0.01}   # per-scenario tolerance overrides, > 0
    constants:                     # constant slots of the bound formulas
      C_sobolev: 1.0
      C_excision: 1.0
      c_excision: 1.0
    extrapolate: true              # Richardson column; needs two resolutions
    workers: 1                     # scenario-level process parallelism
    acceptance: false              # true, or a list of criterion ids
    formats: [json, csv]

Artifact layout (``ARTIFACT_VERSION``)::

    manifest.json                  # header, config, per-scenario status, acceptance
    registry.json                  # scenario parameters, oracles, tolerances
    summary.csv                    # scenario x item x resolution with margins
    scenarios/<name>.json          # verdict bundle per scenario
    scenarios/<name>.csv           # hypothesis rows per scenario
    plots/<name>/<series>_n<k>.dat # two-column plot data

Exit codes: 0 every asserted check passed, 1 some assertion failed or a
scenario raised, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from massbounds import bounds, scenarios
from massbounds.errors import ConfigError

log = logging.getLogger("massbounds")

ARTIFACT_FORMAT = "massbounds-artifacts"
ARTIFACT_VERSION = 1
KINDS = ("asymptotic", "compact", "surface")
DEFAULT_RESOLUTIONS = {"asymptotic": [32], "compact": [20, 28, 36], "surface": [0]}
SUMMARY_FIELDS = ("scenario", "kind", "item", "resolution", "h", "reference", "value",
                  "margin", "tolerance", "status", "flags", "richardson")
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def default_config() -> dict:
    """Full corpus at the default resolutions, without the acceptance suite."""
    return {"output": "runs/corpus", "scenarios": ["all"],
            "resolutions": dict(DEFAULT_RESOLUTIONS), "truncations": [4.0, 8.0],
            "tolerances": {}, "constants": {}, "extrapolate": False, "workers": 1,
            "acceptance": False, "formats": ["json", "csv"]}


# --------------------------------------------------------------------------- config


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return validate_config(raw or {})


def validate_config(raw: dict) -> dict:
    """Fill defaults and check types; raises :class:`ConfigError`."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    known = set(default_config())
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = default_config()
    cfg.update(raw)
    if "output" not in raw:
        raise ConfigError("config needs an 'output' directory")

    sel = cfg["scenarios"] or []
    if isinstance(sel, str):
        sel = [sel]
    names = []
    for s in sel:
        if s == "all":
            names.extend(scenarios.REGISTRY)
        elif s in scenarios.REGISTRY or s in scenarios.DIAGNOSTICS:
            names.append(s)
        else:
            raise ConfigError(f"unknown scenario {s!r}; available: "
                              + ", ".join(sorted(scenarios.REGISTRY)
                                          + sorted(scenarios.DIAGNOSTICS)))
    cfg["scenarios"] = sorted(set(names))

    res = cfg["resolutions"]
    if isinstance(res, list):
        res = {k: list(res) for k in KINDS}
    if not isinstance(res, dict) or set(res) - set(KINDS):
        raise ConfigError(f"resolutions must be a list or a mapping over {KINDS}")
    full = dict(DEFAULT_RESOLUTIONS)
    for k, v in res.items():
        if not isinstance(v, list) or not v or not all(isinstance(x, int) and x >= 0 for x in v):
            raise ConfigError(f"resolutions.{k} must be a nonempty list of cell counts")
        full[k] = sorted(set(v))
    cfg["resolutions"] = full
    if cfg["extrapolate"]:
        for k in ("asymptotic", "compact"):
            if len(full[k]) < 2:
                raise ConfigError(f"extrapolation needs at least two {k} resolutions")

    tr = cfg["truncations"]
    if (not isinstance(tr, list) or len(tr) < 2
            or any(not isinstance(x, (int, float)) for x in tr)
            or any(b <= a for a, b in zip(tr, tr[1:]))):
        raise ConfigError("truncations must be at least two increasing numbers")
    for key in ("tolerances", "constants"):
        if not isinstance(cfg[key], dict):
            raise ConfigError(f"{key} must be a mapping")
        for k, v in cfg[key].items():
            if not isinstance(v, (int, float)) or not v > 0:
                raise ConfigError(f"{key}.{k} must be a positive number")
    if not isinstance(cfg["workers"], int) or cfg["workers"] < 1:
        raise ConfigError("workers must be a positive integer")
    acc = cfg["acceptance"]
    if acc is True:
        from massbounds.acceptance import CRITERIA
        acc = sorted(CRITERIA)
    elif acc in (False, None):
        acc = []
    elif not isinstance(acc, list) or not all(isinstance(x, int) and 1 <= x <= 12 for x in acc):
        raise ConfigError("acceptance must be true, false or a list of ids 1..12")
    cfg["acceptance"] = sorted(set(acc))
    fm = cfg["formats"]
    if not isinstance(fm, list) or set(fm) - {"json", "csv"}:
        raise ConfigError("formats must be a subset of [json, csv]")
    return cfg


# --------------------------------------------------------------------------- evaluation


def richardson(h1: float, x1: float, h2: float, x2: float) -> float:
    """Second-order extrapolation to ``h = 0`` from ``(h1, x1)`` and finer ``(h2, x2)``."""
    return (h1 * h1 * x2 - h2 * h2 * x1) / (h1 * h1 - h2 * h2)


def evaluate_scenario(name: str, cfg: dict) -> dict:
    """Evaluate one scenario at every configured resolution; never raises."""
    try:
        sc = scenarios.get(name)
        sc.tolerances.update(cfg["tolerances"])
        consts = dict(cfg["constants"], truncations=cfg["truncations"])
        evals = [scenarios.evaluate(sc, n, consts) for n in cfg["resolutions"][sc.kind]]
        return {"name": name, "ok": True, "scenario": sc.manifest(), "kind": sc.kind,
                "evaluations": [_eval_dict(e) for e in evals]}
    except Exception as exc:                 # isolation: report, never block other scenarios
        return {"name": name, "ok": False, "error": f"{type(exc).__name__}: {exc}",
                "traceback": traceback.format_exc()}


def _eval_dict(e) -> dict:
    return {"resolution": e.resolution, "h": e.h,
            "verdicts": [v.to_dict() for v in e.verdicts],
            "csv": bounds.verdicts_csv(e.verdicts), "rows": bounds._plain(e.rows),
            "shells": e.shells,
            "plots": {k: [bounds._plain(np.asarray(x)), bounds._plain(np.asarray(y))]
                      for k, (x, y) in e.plots.items()}}


def _status(v: dict) -> str:
    return {True: "pass", False: "FAIL", None: "n/a"}[v["holds"]]


def summary_rows(result: dict, extrapolate: bool) -> list[dict]:
    rows = []
    if not result["ok"]:
        return [{"scenario": result["name"], "kind": "", "item": "error", "status": "ERROR",
                 "value": "", "flags": result["error"].splitlines()[0]}]
    evs = result["evaluations"]
    for e in evs:
        for v in e["verdicts"]:
            rows.append({"scenario": result["name"], "kind": result["kind"],
                         "item": v["theorem"], "resolution": e["resolution"],
                         "h": _f(e["h"]), "reference": _f(v["bound"]), "value": _f(v["mass"]),
                         "margin": _f(v["margin"]), "tolerance": _f(v["tolerance"]),
                         "status": _status(v), "flags": ";".join(v["flags"])})
    quantities = {}
    for e in evs:
        for r in e["rows"]:
            quantities.setdefault(r["quantity"], []).append((e["resolution"], e["h"], r))
    for q, seq in quantities.items():
        for k, (n, h, r) in enumerate(seq):
            rich = ""
            if extrapolate and k == len(seq) - 1 and k >= 1 and h:
                n0, h0, r0 = seq[k - 1]
                rich = _f(richardson(h0, r0["value"], h, r["value"]))
            rows.append({"scenario": result["name"], "kind": result["kind"], "item": q,
                         "resolution": n, "h": _f(h), "reference": _f(r.get("oracle")),
                         "value": _f(r["value"]), "status": "data", "richardson": rich})
    return rows


def _f(x):
    return "" if x is None else repr(float(x))


# --------------------------------------------------------------------------- run


def run_config(cfg: dict) -> int:
    """Evaluate the selected scenarios and write artifacts; returns the exit status."""
    out = Path(cfg["output"])
    (out / "scenarios").mkdir(parents=True, exist_ok=True)
    names = cfg["scenarios"]
    if cfg["workers"] > 1 and len(names) > 1:
        with ProcessPoolExecutor(max_workers=cfg["workers"]) as pool:
            results = list(pool.map(evaluate_scenario, names, [cfg] * len(names)))
    else:
        results = [evaluate_scenario(n, cfg) for n in names]

    failed = False
    manifest_sc = {}
    registry = {}
    summary = []
    for r in results:
        summary += summary_rows(r, cfg["extrapolate"])
        if not r["ok"]:
            failed = True
            manifest_sc[r["name"]] = {"status": "error", "error": r["error"]}
            _write(out / "scenarios" / f"{r['name']}.json", _dumps(
                {"scenario": r["name"], "error": r["error"], "traceback": r["traceback"]}))
            log.error("%s: %s", r["name"], r["error"])
            continue
        registry[r["name"]] = r["scenario"]
        n_fail = sum(1 for e in r["evaluations"] for v in e["verdicts"] if v["holds"] is False)
        failed |= n_fail > 0
        manifest_sc[r["name"]] = {"status": "fail" if n_fail else "pass", "failed": n_fail,
                                  "asserted": sum(1 for e in r["evaluations"]
                                                  for v in e["verdicts"] if v["asserted"])}
        if "json" in cfg["formats"]:
            bundle = {"scenario": r["scenario"],
                      "evaluations": [{k: e[k] for k in ("resolution", "h", "verdicts", "rows")}
                                      for e in r["evaluations"]]}
            _write(out / "scenarios" / f"{r['name']}.json", _dumps(bundle))
        if "csv" in cfg["formats"]:
            text = "".join(e["csv"] if k == 0 else e["csv"].split("\n", 1)[1]
                           for k, e in enumerate(r["evaluations"]))
            _write(out / "scenarios" / f"{r['name']}.csv", text)
        for e in r["evaluations"]:
            pdir = out / "plots" / r["name"]
            for series, (x, y) in e["plots"].items():
                _write(pdir / f"{series}_n{e['resolution']}.dat",
                       "".join(f"{a!r} {b!r}\n" for a, b in zip(x, y)))
            if e["shells"]:
                _write_shells(pdir, e["resolution"], e["shells"])

    buf = io.StringIO()
    w = csv.DictWriter(buf, SUMMARY_FIELDS, lineterminator="\n", restval="")
    w.writeheader()
    w.writerows(summary)
    _write(out / "summary.csv", buf.getvalue())
    _write(out / "registry.json", _dumps(registry))

    acceptance = []
    if cfg["acceptance"]:
        from massbounds.acceptance import CRITERIA
        for k in cfg["acceptance"]:
            if k == 12:
                # determinism compares two complete runs; it is checked from outside a run
                acceptance.append({"id": 12, "status": "external"})
                continue
            res = CRITERIA[k]()
            print(res.line())
            failed |= not res.passed
            acceptance.append({"id": k, "title": res.title,
                               "status": "pass" if res.passed else "fail"})
    manifest = {"format": ARTIFACT_FORMAT, "version": ARTIFACT_VERSION,
                "config": {k: v for k, v in cfg.items() if k != "output"},
                "scenarios": manifest_sc, "acceptance": acceptance,
                "status": "fail" if failed else "pass"}
    _write(out / "manifest.json", _dumps(manifest))
    return EXIT_FAIL if failed else EXIT_OK


def _write_shells(pdir: Path, n: int, shells_csv: str) -> None:
    rows = list(csv.DictReader(io.StringIO(shells_csv)))
    if not rows:
        return
    for col in rows[0]:
        if col == "r":
            continue
        _write(pdir / f"shell_{col}_n{n}.dat", "".join(f"{r['r']} {r[col]}\n" for r in rows))


def _dumps(obj) -> str:
    return json.dumps(bounds._plain(obj), sort_keys=True, indent=1, allow_nan=True) + "\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# --------------------------------------------------------------------------- report


def report(directory) -> int:
    """Print the theorem-by-scenario margin matrix of an artifact directory."""
    d = Path(directory)
    problems = []
    try:
        manifest = json.loads((d / "manifest.json").read_text())
    except (OSError, ValueError) as exc:
        print(f"missing or corrupt manifest.json: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if manifest.get("format") != ARTIFACT_FORMAT:
        print(f"manifest.json is not a {ARTIFACT_FORMAT} manifest", file=sys.stderr)
        return EXIT_CONFIG
    cells, theorems, flagged = {}, set(), {}
    failed = False
    for name, info in sorted(manifest.get("scenarios", {}).items()):
        if info.get("status") == "error":
            failed = True
            cells[name] = None
            continue
        path = d / "scenarios" / f"{name}.json"
        try:
            bundle = json.loads(path.read_text())
            evs = bundle["evaluations"]
        except (OSError, ValueError, KeyError) as exc:
            problems.append(f"{path}: {exc}")
            continue
        row = {}
        for e in evs:                                   # finest resolution wins
            for v in e["verdicts"]:
                row[v["theorem"]] = v
                theorems.add(v["theorem"])
                if bounds.UNRESOLVED in v["flags"] or bounds.GAMMA_ESTIMATE in v["flags"]:
                    flagged.setdefault(v["theorem"], set()).update(
                        f for f in v["flags"] if f in (bounds.UNRESOLVED, bounds.GAMMA_ESTIMATE))
        cells[name] = row
    if problems:
        for p in problems:
            print(f"corrupt artifact: {p}", file=sys.stderr)
        return EXIT_CONFIG
    cols = sorted(theorems)
    width = max([len(n) for n in cells] + [8]) + 3
    cw = 11
    print(f"{'scenario':<{width}}" + "".join(f"{f'T{k + 1}':>{cw}}" for k in range(len(cols))))
    passes = total = 0
    for name, row in cells.items():
        if row is None:
            print(f"{'!! ' + name:<{width}}ERROR")
            continue
        bad = any(v["holds"] is False for v in row.values())
        failed |= bad
        txt = []
        for c in cols:
            v = row.get(c)
            if v is not None and v["holds"] is not None:
                total += 1
                passes += v["holds"]
            txt.append(f"{_cell(v):>{cw}}")
        print(f"{('!! ' if bad else '   ') + name:<{width}}" + "".join(txt))
    print()
    for k, c in enumerate(cols):
        fl = ",".join(sorted(flagged.get(c, ())))
        print(f"T{k + 1:<3}{c}" + (f"  [{fl}]" if fl else ""))
    print(f"\n{passes}/{total} asserted checks pass.  Cells show the margin mass - bound;"
          " '~' not asserted, '!' failed, 'ok' requirement-only verdict passed, '-' inapplicable.")
    for a in manifest.get("acceptance", []):
        print(f"acceptance {a['id']:2d}: {a['status']}")
        failed |= a["status"] == "fail"
    return EXIT_FAIL if failed else EXIT_OK


def _cell(v) -> str:
    if v is None:
        return ""
    if v["margin"] is not None and v["applicable"]:
        mark = {True: " ", False: "!", None: "~"}[v["holds"]]
        return f"{v['margin']:.3g}{mark}"
    if v["holds"] is None:
        return "- "
    return "ok " if v["holds"] else "FAIL!"


# --------------------------------------------------------------------------- entry point


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="massbounds",
                                     description="Mass lower-bound verification runs.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="evaluate scenarios from a YAML config")
    p_run.add_argument("config")
    p_rep = sub.add_parser("report", help="print the margin matrix of an artifact directory")
    p_rep.add_argument("directory")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    if args.command == "report":
        return report(args.directory)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run_config(cfg)


if __name__ == "__main__":
    sys.exit(main())
