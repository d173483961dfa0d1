"""Command-line front end: ``rydqed <command> [options]``.

Commands
    polarizability  closed form next to the discrete bound-state sum
    abraham         kappa channels for one n
    ac              time series of the Aharonov-Casher-type momentum
    integrals       self-checks of the k-integrals (``--check quarter|renorm``)
    sweep           figure data for one kappa channel over an n range
    cache           ``info`` or ``clear`` for the radial-integral cache

A config file (``--config``) uses INI sections with key = value lines::

    [fields]
    E0 = 100        ; V/m
    B0 = 3e-5       ; T
    [atom]
    m1 = 1.67262192369e-27
    m2 = 9.1093837015e-31
    [run]
    n = 10:30
    cutoff_margin = 12
    workers = 4
    format = csv
    output = out/k2.csv
    [tolerances]
    kappa_rel = 1e-3

Command-line flags override file values.  Inputs are SI, outputs SI with
atomic-unit mirror columns where a unit exists.  Exit status: 0 success,
2 convergence flag raised, 1 hard error, 64 usage error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import abraham, ac_vacuum
from .basis import CONSTANTS, AtomSpec
from .matelem import get_cache
from .perturb import FieldConfiguration

log = logging.getLogger("rydqed")

EXIT_OK, EXIT_ERROR, EXIT_FLAGGED, EXIT_USAGE = 0, 1, 2, 64
N_LIMITS = (1, 60)
LONG_N = 40
CHANNELS = {"kappa2": "k2", "k2": "k2", "kappa1b": "k1b", "k1b": "k1b", "kappa1a": "k1a", "k1a": "k1a"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_range(text: str) -> list[int]:
    """``a:b`` (inclusive), ``a:b:step`` or a single integer."""
    parts = [p.strip() for p in str(text).split(":")]
    try:
        nums = [int(p) for p in parts]
    except ValueError:
        raise UsageError(f"bad n range {text!r}") from None
    if len(nums) == 1:
        lo = hi = nums[0]
        step = 1
    elif len(nums) in (2, 3):
        lo, hi = nums[:2]
        step = nums[2] if len(nums) == 3 else 1
    else:
        raise UsageError(f"bad n range {text!r}")
    if step < 1:
        raise UsageError("range step must be positive")
    out = list(range(lo, hi + 1, step))
    for n in out:
        if not N_LIMITS[0] <= n <= N_LIMITS[1]:
            raise UsageError(f"n={n} outside [{N_LIMITS[0]}, {N_LIMITS[1]}]")
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI-style config file")
    common.add_argument("--output", "-o", type=Path, help="output file (stdout when omitted)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--E0", type=float, help="electric field in V/m")
    common.add_argument("--B0", type=float, help="magnetic field in T")
    common.add_argument("--m1", type=float, help="core mass in kg")
    common.add_argument("--m2", type=float, help="electron mass in kg")
    common.add_argument("--cutoff-margin", type=int, help="basis cutoff above n")
    common.add_argument("--workers", type=int, help="process pool size for sweeps")
    common.add_argument("--manifest", type=Path, help="manifest path (default: <output>.manifest.json)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="rydqed", description="Vacuum corrections to Abraham and Aharonov-Casher momenta.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("polarizability", parents=[common])
    sp.add_argument("--n", default=None)

    sp = sub.add_parser("abraham", parents=[common])
    sp.add_argument("--n", default=None)
    sp.add_argument("--include-inverse-E", action="store_true")
    sp.add_argument("--long", action="store_true")

    sp = sub.add_parser("ac", parents=[common])
    sp.add_argument("--n", default=None)
    sp.add_argument("--samples", type=int, default=16, help="time points per Stark period")
    sp.add_argument("--no-quarter", action="store_true", help="drop the relativistic factor 1/4")

    sp = sub.add_parser("integrals", parents=[common])
    sp.add_argument("--check", choices=("quarter", "renorm"), required=True)

    sp = sub.add_parser("sweep", parents=[common])
    sp.add_argument("--channel", required=True, choices=sorted(CHANNELS))
    sp.add_argument("--n", default=None)
    sp.add_argument("--long", action="store_true", help=f"allow kappa1a beyond n={LONG_N}")

    sp = sub.add_parser("cache", parents=[common])
    sp.add_argument("action", choices=("info", "clear"))
    return p


def load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    flat = {}
    for section in cp.sections():
        for key, value in cp.items(section):
            flat[key] = value
    return flat


def resolve(args: argparse.Namespace) -> dict:
    """Merge config file and flags (flags win) into one settings record."""
    cfg = load_config(args.config)
    known = {"E0", "B0", "m1", "m2", "n", "cutoff_margin", "workers", "format", "output", "kappa_rel"}
    unknown = set(cfg) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")

    def pick(name, conv, default):
        v = getattr(args, name, None)
        if v is None:
            v = cfg.get(name)
        if v is None:
            return default
        try:
            return conv(v)
        except (TypeError, ValueError):
            raise UsageError(f"bad value for {name}: {v!r}") from None

    s = {
        "E0": pick("E0", float, abraham.DEFAULT_E0),
        "B0": pick("B0", float, abraham.DEFAULT_B0),
        "m1": pick("m1", float, CONSTANTS.m_p),
        "m2": pick("m2", float, CONSTANTS.m_e),
        "n": pick("n", str, None),
        "cutoff_margin": pick("cutoff_margin", int, 12),
        "workers": pick("workers", int, 1),
        "format": pick("format", str, "csv"),
        "output": pick("output", Path, None),
        "kappa_rel": float(cfg.get("kappa_rel", abraham.CONVERGENCE_TOL)),
    }
    if s["format"] not in ("csv", "json"):
        raise UsageError("format must be csv or json")
    if s["E0"] < 0 or s["B0"] < 0:
        raise UsageError("field magnitudes must be non-negative")
    if s["cutoff_margin"] < 10:
        raise UsageError("cutoff margin must be at least 10")
    try:
        s["atom"] = AtomSpec(s["m1"], s["m2"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return s


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def rows_to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(v) for k, v in r.items()})
    return buf.getvalue()


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, complex):
        return {"re": o.real, "im": o.imag}
    if isinstance(o, Path):
        return str(o)
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    return o


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_output(text: str, path: Path | None):
    if path is None:
        sys.stdout.write(text)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _render(rows: list[dict], fmt: str, summary: dict | None = None) -> str:
    if fmt == "json":
        return dumps({"rows": rows, "summary": summary or {}})
    return rows_to_csv(rows)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_polarizability(s: dict, args) -> tuple[list[dict], dict, bool]:
    ns = parse_range(s["n"] or "15")
    rows, flagged = [], False
    for n in ns:
        closed = abraham.polarizability_closed(n, n - 1)
        total, diag = abraham.polarizability_sum(n)
        flagged |= not diag["converged"]
        rows.append({"n": n, "closed_a0^3": closed, "sum_a0^3": total,
                     "deviation_pct": 100 * (total - closed) / closed,
                     "closed_SI": closed * CONSTANTS.polarizability_au,
                     "sum_SI": total * CONSTANTS.polarizability_au,
                     "basis_cutoff": diag["basis_cutoff"], "converged": diag["converged"]})
    return rows, {"tolerance": 1e-6}, flagged


def _kappa_point(task) -> dict:
    channel, n, s = task
    cut = n + s["cutoff_margin"]
    kw = dict(E0=s["E0"], basis_cutoff=cut)
    if channel == "k2":
        r = abraham.kappa2(n, **kw)
    elif channel == "k1b":
        r = abraham.kappa1b(n, B0=s["B0"], **kw)
    else:
        r = abraham.kappa1a(n, B0=s["B0"], include_inverse_E_term=s.get("include_inverse_E", False), **kw)
    conv = r.convergence
    return {"n": n, "value": r.value, "sign": r.sign_vs_PA.value,
            "converged": bool(conv.get("converged", True)) and conv.get("rel_change", 0.0) < s["kappa_rel"],
            "rel_change": conv.get("rel_change"), "basis_cutoff": conv.get("basis_cutoff"),
            "pieces": conv.get("pieces")}


def _run_pool(tasks, workers: int) -> list[dict]:
    out = []
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            for task, res in zip(tasks, ex.map(_kappa_point, tasks)):
                log.info("done n=%d", task[1])
                out.append(res)
    else:
        for task in tasks:
            out.append(_kappa_point(task))
            log.info("done n=%d", task[1])
    return out


def slope_fit(ns, values) -> dict:
    x, y = np.log(np.asarray(ns, float)), np.log(np.abs(np.asarray(values, float)))
    if len(x) < 2:
        return {"slope": None, "intercept": None}
    slope, intercept = np.polyfit(x, y, 1)
    return {"slope": float(slope), "intercept": float(intercept)}


def emit_figure_data(channel: str, ns: list[int], s: dict) -> tuple[list[dict], dict, bool]:
    """Rows {n, kappa_abs, kappa_signed, fit_residual[, f_n]} for one channel."""
    ch = CHANNELS[channel]
    if not ns:
        log.warning("empty n range: nothing to do")
        return [], {"channel": ch}, False
    results = _run_pool([(ch, n, s) for n in ns], s["workers"])
    values = [r["value"] for r in results]
    fit = slope_fit(ns, values)
    rows = []
    for n, r in zip(ns, results):
        row = {"n": n, "kappa_abs": abs(r["value"]), "kappa_signed": r["value"]}
        if ch == "k1a":
            f = abraham.kappa1a_fit_curve(n)
            row["fit_residual"] = (abs(r["value"]) - f) / f
            row["f_n"] = f
        elif fit["slope"] is not None:
            row["fit_residual"] = math.log(abs(r["value"])) - (fit["intercept"] + fit["slope"] * math.log(n))
        else:
            row["fit_residual"] = 0.0
        row["sign_vs_PA"] = r["sign"]
        row["basis_cutoff"] = r["basis_cutoff"]
        row["converged"] = r["converged"]
        rows.append(row)
    flagged = not all(r["converged"] for r in results)
    summary = {"channel": ch, "slope_fit": fit, "n": ns,
               "rel_changes": [r["rel_change"] for r in results],
               "pieces": {n: r["pieces"] for n, r in zip(ns, results) if r["pieces"]}}
    return rows, summary, flagged


def cmd_sweep(s: dict, args) -> tuple[list[dict], dict, bool]:
    ch = CHANNELS[args.channel]
    ns = parse_range(s["n"]) if s["n"] else list(range(10, 31))
    if ch == "k1a" and max(ns, default=0) > LONG_N and not args.long:
        raise UsageError(f"kappa1a beyond n={LONG_N} needs --long")
    if args.long:
        log.setLevel(logging.INFO)   # progress report per finished n
    rows, summary, flagged = emit_figure_data(args.channel, ns, s)
    if summary.get("slope_fit", {}).get("slope") is not None:
        print(f"# slope of log|{ch}| vs log n: {summary['slope_fit']['slope']:.4f}", file=sys.stderr)
    return rows, summary, flagged


def cmd_abraham(s: dict, args) -> tuple[list[dict], dict, bool]:
    ns = parse_range(s["n"] or "10")
    if max(ns) > LONG_N and not args.long:
        raise UsageError(f"kappa1a beyond n={LONG_N} needs --long")
    s = dict(s, include_inverse_E=args.include_inverse_E)
    rows, flagged = [], False
    fields = FieldConfiguration(s["E0"], s["B0"])
    for n in ns:
        res = {ch: _kappa_point((ch, n, s)) for ch in ("k1a", "k1b", "k2")}
        pa = abraham.abraham_momentum(n, fields)
        total = sum(r["value"] for r in res.values())
        flagged |= not all(r["converged"] for r in res.values())
        rows.append({"n": n, "kappa1a": res["k1a"]["value"], "kappa1b": res["k1b"]["value"],
                     "kappa2": res["k2"]["value"], "kappa_total": total,
                     "P_A_SI": pa.vector.y.real, "P_A_au": pa.vector_au.y.real,
                     "P_long_SI": CONSTANTS.alpha ** 2 * total * pa.vector.y.real,
                     "zeeman_ratio": fields.zeeman_ratio(n),
                     "converged": all(r["converged"] for r in res.values())})
    summary = {"relative_order_reported": "0.028 alpha^2 (quoted, not reconciled)"}
    return rows, summary, flagged


def cmd_ac(s: dict, args) -> tuple[list[dict], dict, bool]:
    n = parse_range(s["n"] or "50")[0]
    E0 = s["E0"]
    if E0 <= 0:
        raise UsageError("ac needs E0 > 0")
    quarter = not args.no_quarter
    res = ac_vacuum.ac_amplitude(n, E0, quarter, s["atom"])
    w = res.stark_omega
    rows = []
    for k in range(args.samples):
        t = 2 * math.pi * k / (args.samples * w)
        p = ac_vacuum.ac_momentum(n, E0, t, quarter, s["atom"]).to_array().real
        rows.append({"t": t, "Px": p[0], "Py": p[1], "Pz": p[2],
                     "Px_au": p[0] / CONSTANTS.momentum_au, "Py_au": p[1] / CONSTANTS.momentum_au})
    numeric = max(math.hypot(r["Px"], r["Py"]) for r in rows)
    summary = {"n": n, "E0": E0, "omega_n": w, "amplitude": res.p_long_amplitude,
               "amplitude_numeric": numeric, "displacement": res.displacement,
               "force": res.force, "quarter_applied": quarter, "diagnostics": res.diagnostics}
    if not res.diagnostics["force_within_band"]:
        log.warning("force %.3e N outside the band around %.1e N", res.force, ac_vacuum.REFERENCE_FORCE)
    return rows, summary, False


def cmd_integrals(s: dict, args) -> tuple[list[dict], dict, bool]:
    m1, m2 = s["m1"], s["m2"]
    if args.check == "quarter":
        rows = []
        ok = True
        for r in (2.0, 10.0, 1e3, m1 / m2):
            ratio, flags = ac_vacuum.relativistic_ratio(r, 1.0)
            good = abs(ratio - 0.25) < 1e-5
            ok &= good
            rows.append({"mass_ratio": r, "ratio": ratio, "pass": good})
        print(f"{rows[-1]['ratio']:.4f} {'PASS' if ok else 'FAIL'}", file=sys.stderr)
        return rows, {"tolerance": 1e-5}, not ok
    res = ac_vacuum.renorm_combination(m1, m2)
    closed = ac_vacuum.renorm_closed_form(m1, m2)
    ext = ac_vacuum.renorm_extrapolated(m1, m2)
    good = abs(res.value / closed - 1) < 1e-6 and abs(ext.value / closed - 1) < 1e-6
    print(f"{res.value:.5f} {'PASS' if good else 'FAIL'}", file=sys.stderr)
    rows = [{"quadrature": res.value, "abs_error": res.abs_error, "closed_form": closed,
             "cutoff_extrapolated": ext.value, "pass": good}]
    return rows, {"tolerance": 1e-6}, not good


def cmd_cache(s: dict, args) -> tuple[list[dict], dict, bool]:
    cache = get_cache()
    if args.action == "clear":
        cache.clear()
    return [cache.stats()], {}, False


COMMANDS = {"polarizability": cmd_polarizability, "abraham": cmd_abraham, "ac": cmd_ac,
            "integrals": cmd_integrals, "sweep": cmd_sweep, "cache": cmd_cache}


def manifest(args, s: dict, summary: dict, wall: float, status: int, argv: list[str]) -> dict:
    from . import __version__
    return {
        "command": args.command,
        "argv": list(argv),
        "version": __version__,
        "settings": {k: v for k, v in s.items() if k != "atom"},
        "atom": asdict(s["atom"]),
        "constants": asdict(CONSTANTS),
        "tolerances": {"kappa_rel": s["kappa_rel"], "degeneracy": 1e-12,
                       "radial_cancellation_limit": 1e3},
        "cutoffs": {"margin": s["cutoff_margin"]},
        "cache": get_cache().stats(),
        "summary": summary,
        "exit_status": status,
        "wall_time_s": wall,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    t0 = time.perf_counter()
    try:
        s = resolve(args)
        rows, summary, flagged = COMMANDS[args.command](s, args)
    except UsageError as exc:
        print(f"rydqed: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # hard errors surface as exit 1
        log.debug("hard error", exc_info=True)
        print(f"rydqed: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    status = EXIT_FLAGGED if flagged else EXIT_OK
    try:
        write_output(_render(rows, s["format"], summary), s["output"])
        mpath = args.manifest or (s["output"].with_suffix(s["output"].suffix + ".manifest.json")
                                  if s["output"] else None)
        if mpath is not None:
            write_output(dumps(manifest(args, s, summary, time.perf_counter() - t0, status, argv)), mpath)
    except OSError as exc:
        print(f"rydqed: I/O error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return status


if __name__ == "__main__":
    sys.exit(main())
