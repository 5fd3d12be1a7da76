"""Reading and writing orbit files and real sequences."""
from __future__ import annotations

import csv
import io
import json

from .cocycle import OrbitSegment
from .pliss import RealSeq
from .serial import dec_complex, dumps, enc_complex


def orbit_records(orbit: OrbitSegment) -> list[dict]:
    recs = []
    for k, n in enumerate(range(orbit.n_min, orbit.n_max + 1)):
        pt = orbit.points[k] if k < len(orbit.points) else None
        rec = {"orbit": orbit.id, "n": n,
               "point": [enc_complex(c) for c in pt] if pt is not None else None,
               "matrix": [enc_complex(c) for c in orbit.matrix(n)] if n < orbit.n_max else None}
        recs.append(rec)
    return recs


def dump_orbits(orbits) -> str:
    return "".join(dumps(r) + "\n" for orb in orbits for r in orbit_records(orb))


def load_orbits(text: str) -> list[OrbitSegment]:
    """Parse JSON Lines orbit records; orbits keep their first-seen order."""
    groups: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {lineno}: {exc.msg}") from None
        if not isinstance(rec, dict) or "orbit" not in rec or "n" not in rec:
            raise ValueError(f"line {lineno}: record needs 'orbit' and 'n'")
        groups.setdefault(str(rec["orbit"]), []).append(rec)
    out = []
    for oid, recs in groups.items():
        recs.sort(key=lambda r: int(r["n"]))
        ns = [int(r["n"]) for r in recs]
        if ns != list(range(ns[0], ns[0] + len(ns))):
            raise ValueError(f"orbit {oid}: indices are not consecutive")
        mats = []
        for r in recs[:-1]:
            m = r.get("matrix")
            if m is None or len(m) != 4:
                raise ValueError(f"orbit {oid}, n={r['n']}: missing matrix")
            mats.append(tuple(dec_complex(c) for c in m))
        pts = []
        if all(r.get("point") is not None for r in recs):
            pts = [tuple(dec_complex(c) for c in r["point"]) for r in recs]
        out.append(OrbitSegment(oid, ns[0], tuple(mats), tuple(pts)))
    if not out:
        raise ValueError("no orbit records")
    return out


def load_sequence(text: str) -> RealSeq:
    """CSV with header ``n,value`` or JSON (a list, or {"values": [...], "offset": k})."""
    s = text.strip()
    if not s:
        raise ValueError("empty sequence")
    if s[0] in "[{":
        obj = json.loads(s)
        if isinstance(obj, list):
            return RealSeq(obj, 0)
        return RealSeq(obj["values"], int(obj.get("offset", 0)))
    rows = list(csv.reader(io.StringIO(s)))
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    pairs = sorted((int(r[0]), float(r[1])) for r in rows if r)
    ns = [n for n, _ in pairs]
    if ns != list(range(ns[0], ns[0] + len(ns))):
        raise ValueError("sequence indices are not consecutive")
    return RealSeq([v for _, v in pairs], ns[0])


def _is_number(x: str) -> bool:
    try:
        float(x)
        return True
    except ValueError:
        return False
