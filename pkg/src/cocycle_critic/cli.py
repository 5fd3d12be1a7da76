"""Command-line driver.

Exit codes: 0 clean, 2 usage or data error, 3 a detection came back positive
(critical points found, or a domination certificate failed).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import warnings
from pathlib import Path

from . import cocycle as cc
from . import critical as cr
from . import henon as hn
from . import pliss
from .cocycle import Beta, WindowError
from .formats import dump_orbits, load_orbits, load_sequence
from .serial import SCHEMA_VERSION, config_hash, dumps, enc_complex, enc_direction

EXIT_OK, EXIT_DATA, EXIT_POSITIVE = 0, 2, 3

DEFAULTS = {
    "map": None, "orbit": None, "seq": None, "config": None,
    "K": 30, "N": 30, "slack": None, "lam": 1.5, "C": 1.0,
    "beta_grid": "0.9:0.7,0.95:0.65,0.8:0.7",
    "grid_n": 200, "iters": 60, "R": None,
    "gamma0": None, "gamma1": None,
    "out": ".", "threads": None, "seed": 0, "export_orbits": False,
}
# not part of the result, so not part of the hash
_UNHASHED = {"threads", "out", "config"}


class UsageError(Exception):
    pass


def parse_beta_grid(text: str) -> list[Beta]:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            bm, bp = (float(x) for x in item.split(":"))
        except ValueError:
            raise UsageError(f"bad beta pair {item!r}; expected b-:b+") from None
        try:
            out.append(Beta(bm, bp))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if not out:
        raise UsageError("empty beta grid")
    return out


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    a = common.add_argument
    a("--map", help="Hénon map spec (JSON)")
    a("--orbit", help="orbit file (JSON Lines)")
    a("--seq", help="real sequence (CSV n,value or JSON)")
    a("--config", help="JSON file with defaults for any flag")
    a("--K", type=int, help="critical horizon (default 30)")
    a("--N", type=int, help="domination horizon (default 30)")
    a("--slack", type=float, help="finite-horizon slack in log units")
    a("--lam", type=float, help="certificate rate (default 1.5)")
    a("--C", type=float, help="certificate constant (default 1)")
    a("--beta-grid", dest="beta_grid", help='comma-separated "b-:b+" pairs')
    a("--grid-n", dest="grid_n", type=int, help="Julia seed grid size (default 200)")
    a("--iters", type=int, help="two-sided boundedness steps (default 60)")
    a("--R", type=float, help="escape radius override")
    a("--gamma0", type=float)
    a("--gamma1", type=float)
    a("--out", help="output directory (default .)")
    a("--threads", type=int, help="worker threads (env COCYCLE_CRITIC_THREADS)")
    a("--seed", type=int, help="RNG seed for radius validation")
    a("--export-orbits", dest="export_orbits", action="store_const", const=True,
      help="also write the sampled orbits")
    p = argparse.ArgumentParser(prog="cocycle-critic", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, hlp in [("sample-julia", "sample bounded orbits of a Hénon map"),
                      ("detect-critical", "search for beta-critical points"),
                      ("check-domination", "finite-horizon domination certificate"),
                      ("pliss-times", "hyperbolic times of a sequence"),
                      ("report", "orbit summary and plot-ready g-series")]:
        sub.add_parser(name, parents=[common], help=hlp)
    return p


def resolve_config(ns: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if ns.config:
        try:
            filecfg = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        if not isinstance(filecfg, dict):
            raise UsageError("config must be a JSON object")
        for k, v in filecfg.items():
            k = k.replace("-", "_")
            if k not in DEFAULTS:
                raise UsageError(f"unknown config key {k!r}")
            cfg[k] = v
    for k in DEFAULTS:
        v = getattr(ns, k, None)
        if v is not None:
            cfg[k] = v
    cfg["command"] = ns.command
    if cfg["threads"] is None:
        env = os.environ.get("COCYCLE_CRITIC_THREADS")
        try:
            cfg["threads"] = int(env) if env else 1
        except ValueError:
            raise UsageError("COCYCLE_CRITIC_THREADS must be an integer") from None
    for k in ("K", "N", "grid_n", "threads"):
        if int(cfg[k]) < 1:
            raise UsageError(f"{k} must be >= 1")
    if int(cfg["iters"]) < 0:
        raise UsageError("iters must be >= 0")
    cfg["betas"] = parse_beta_grid(cfg["beta_grid"])
    return cfg


def _hash(cfg: dict) -> str:
    pub = {k: v for k, v in cfg.items() if k not in _UNHASHED and k != "betas"}
    # inputs enter by content, so moving a file does not change the hash
    for k in ("map", "orbit", "seq"):
        path = pub.pop(k, None)
        if path:
            try:
                pub[k + "_sha256"] = hashlib.sha256(Path(path).read_bytes()).hexdigest()
            except OSError:
                pub[k + "_sha256"] = None
    return config_hash(pub)


def _header(cfg: dict) -> dict:
    return {"v": SCHEMA_VERSION, "config_hash": _hash(cfg), "command": cfg["command"]}


def _write(cfg: dict, name: str, text: str) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    return path


def _load_map(cfg: dict) -> hn.HenonMap:
    try:
        return hn.HenonMap.from_json(json.loads(Path(cfg["map"]).read_text()))
    except (OSError, json.JSONDecodeError, ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"invalid map spec: {exc}") from None


def _radius(hmap: hn.HenonMap, cfg: dict) -> float:
    if cfg["R"] is not None:
        return float(cfg["R"])
    R = hn.escape_radius(hmap, validate=False)
    if not hn.validate_escape_radius(hmap, R, seed=int(cfg["seed"])):
        raise UsageError("escape radius failed validation; pass --R")
    return R


def _sample(hmap: hn.HenonMap, cfg: dict) -> tuple[float, list]:
    R = _radius(hmap, cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        pts = hn.sample_julia(hmap, R, int(cfg["grid_n"]), int(cfg["iters"]),
                              threads=int(cfg["threads"]))
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return R, pts


def _map_orbits(hmap: hn.HenonMap, cfg: dict, window: int) -> tuple[list, list]:
    """Orbit segments over [-window, window] for every sampled point, plus warnings."""
    if window > int(cfg["iters"]):
        raise UsageError("horizon exceeds the sampled orbit length (iters)")
    R, pts = _sample(hmap, cfg)
    orbits = []
    for k, z in enumerate(pts):
        orbits.append(hn.orbit_segment(hmap, z, window, window, R, id=f"p{k}"))
    notes = []
    for pp in hn.newton_periodic(hmap, 1):
        if pp.is_sink:
            notes.append("attracting fixed point found: the no-sink hypothesis fails")
    return orbits, notes


def _load_orbit_file(cfg: dict) -> list:
    try:
        return load_orbits(Path(cfg["orbit"]).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read orbit file: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"invalid orbit file: {exc}") from None


def _inputs(cfg: dict, window: int) -> tuple[list, list, float | None]:
    if cfg["orbit"]:
        return _load_orbit_file(cfg), [], None
    if cfg["map"]:
        hmap = _load_map(cfg)
        orbits, notes = _map_orbits(hmap, cfg, window)
        return orbits, notes, abs(hmap.b)
    raise UsageError("need --orbit or --map")


# ---------------------------------------------------------------- commands

def cmd_sample_julia(cfg: dict) -> int:
    if not cfg["map"]:
        raise UsageError("sample-julia needs --map")
    hmap = _load_map(cfg)
    R, pts = _sample(hmap, cfg)
    head = _header(cfg) | {"map": hmap.to_json(), "R": R, "count": len(pts)}
    lines = [dumps(head)] + [dumps({"point": [enc_complex(z[0]), enc_complex(z[1])]}) for z in pts]
    _write(cfg, "julia.jsonl", "\n".join(lines) + "\n")
    if cfg["export_orbits"]:
        w = max(int(cfg["K"]), int(cfg["N"]))
        if w > int(cfg["iters"]):
            raise UsageError("horizon exceeds the sampled orbit length (iters)")
        orbits = [hn.orbit_segment(hmap, z, w, w, R, id=f"p{k}") for k, z in enumerate(pts)]
        _write(cfg, "orbits.jsonl", dump_orbits(orbits))
    return EXIT_OK


def cmd_check_domination(cfg: dict) -> int:
    N = int(cfg["N"])
    orbits, notes, _ = _inputs(cfg, max(N, int(cfg["K"])))
    if not any(o.n_max - o.n_min >= N for o in orbits):
        raise UsageError("horizon N exceeds every orbit in the input")
    cert = cc.domination_certificate(orbits, N, float(cfg["lam"]), float(cfg["C"]),
                                     cfg["slack"], threads=int(cfg["threads"]))
    doc = _header(cfg) | {"certificate": cert.to_json(), "warnings": notes}
    _write(cfg, "certificate.json", dumps(doc) + "\n")
    return EXIT_OK if cert.passed else EXIT_POSITIVE


def _scan_jobs(orbits: list, K: int, base_only: bool) -> list:
    jobs = []
    for orb in orbits:
        if base_only:
            idx = [0] if orb.has_window(0, -K) and orb.has_window(0, K) else []
        else:
            idx = [i for i in range(orb.n_min + K, orb.n_max - K + 1)]
        jobs.extend((orb, i) for i in idx)
    return jobs


def cmd_detect_critical(cfg: dict) -> int:
    K = int(cfg["K"])
    betas = cfg["betas"]
    orbits, notes, b = _inputs(cfg, K)
    if b is not None:
        for beta in betas:
            if not beta.beta_plus > b:
                notes.append(f"beta_+ = {beta.beta_plus} does not exceed |b| = {b:.6g}")
    # sampled orbits are judged at their base point; orbit files at every index
    jobs = _scan_jobs(orbits, K, base_only=bool(cfg["map"] and not cfg["orbit"]))
    if not jobs:
        raise UsageError("horizon K exceeds the orbit data")
    slack = cfg["slack"]

    def run(job):
        orb, i = job
        return orb.id, i, cr.scan_point(orb, i, betas, K, slack)

    results = cc._pmap(run, jobs, int(cfg["threads"]))
    points, critical, csv_rows = [], [], ["orbit,index,beta_minus,beta_plus,pass,margin_back,margin_fwd"]
    counts = {f"{bt.beta_minus}:{bt.beta_plus}": 0 for bt in betas}
    for oid, i, rows in results:
        per = []
        for beta, rep, (mb, mf) in rows:
            entry = {"beta": [beta.beta_minus, beta.beta_plus], "critical": rep is not None,
                     "margin_back": mb, "margin_fwd": mf}
            if rep is not None:
                entry["direction"] = enc_direction(rep.direction)
                counts[f"{beta.beta_minus}:{beta.beta_plus}"] += 1
            per.append(entry)
            csv_rows.append(f"{oid},{i},{beta.beta_minus!r},{beta.beta_plus!r},"
                            f"{int(rep is not None)},{mb!r},{mf!r}")
        rec = {"orbit": oid, "index": i, "results": per}
        points.append(rec)
        if any(e["critical"] for e in per):
            critical.append(rec)
    doc = _header(cfg) | {
        "K": K, "slack": cc.default_slack(K) if slack is None else slack,
        "summary": {"points": len(points), "critical_points": len(critical), "by_beta": counts},
        "critical": critical, "points": points, "warnings": notes,
    }
    _write(cfg, "critical.json", dumps(_finite(doc)) + "\n")
    _write(cfg, "critical_summary.csv", "\n".join(csv_rows) + "\n")
    return EXIT_POSITIVE if critical else EXIT_OK


def _finite(obj):
    # margins are +inf only for K = 0, which the config forbids; keep JSON strict anyway
    if isinstance(obj, float) and obj in (float("inf"), float("-inf")):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    return obj


def cmd_pliss(cfg: dict) -> int:
    if not cfg["seq"]:
        raise UsageError("pliss-times needs --seq")
    if cfg["gamma1"] is None:
        raise UsageError("pliss-times needs --gamma1")
    try:
        seq = load_sequence(Path(cfg["seq"]).read_text())
        times = pliss.hyperbolic_times(seq, float(cfg["gamma1"]))
    except OSError as exc:
        raise UsageError(f"cannot read sequence: {exc}") from None
    except (ValueError, KeyError, IndexError) as exc:
        raise UsageError(f"invalid sequence: {exc}") from None
    h = _header(cfg)
    lines = [f"# v={h['v']} config_hash={h['config_hash']}", "k"]
    lines += [str(k + seq.offset) for k in times]
    _write(cfg, "hyperbolic_times.csv", "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_report(cfg: dict) -> int:
    K, N = int(cfg["K"]), int(cfg["N"])
    orbits, notes, _ = _inputs(cfg, max(K, N))
    summaries = []
    for k, orb in enumerate(orbits):
        s = {"orbit": orb.id, "n_min": orb.n_min, "n_max": orb.n_max,
             "dissipation_b": cc.fit_dissipation(orb)}
        if orb.has_window(0, N):
            s["lyapunov"] = list(cc.lyapunov_estimate(orb, 0, N))
        back = min(K, -orb.n_min)
        fwd = min(K, orb.n_max)
        if back >= 1:
            w = cc.extremal_witness(orb, 0, -back)
            ser = cc.g_series(orb, 0, w.direction, back, fwd)
            name = f"series_{k}.csv"
            _write(cfg, name, ser.to_csv())
            s["series"] = name
            s["series_direction"] = enc_direction(w.direction)
        summaries.append(s)
    doc = _header(cfg) | {"orbits": summaries, "warnings": notes}
    _write(cfg, "report.json", dumps(doc) + "\n")
    return EXIT_OK


COMMANDS = {
    "sample-julia": cmd_sample_julia,
    "detect-critical": cmd_detect_critical,
    "check-domination": cmd_check_domination,
    "pliss-times": cmd_pliss,
    "report": cmd_report,
}


def main(argv=None) -> int:
    ns = _parser().parse_args(argv)
    try:
        cfg = resolve_config(ns)
        return COMMANDS[ns.command](cfg)
    except (UsageError, WindowError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
