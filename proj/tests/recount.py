#!/usr/bin/env python3
"""Recounts every report.json field from the exported CSVs of a run directory.

Usage: recount.py RUN_DIR [RUN_DIR ...]
Exits 1 and lists the differing fields if any value differs from report.json.
"""
import csv
import json
import math
import sys
from pathlib import Path


def rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def pct(lost, generated):
    return 0.0 if generated == 0 else 100.0 * lost / generated


def percentile(values, p):
    if not values:
        return 0.0
    pos = p * (len(values) - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, len(values) - 1)
    return values[lo] + (values[hi] - values[lo]) * (pos - lo)


def recount(run_dir):
    d = Path(run_dir)
    meta = json.loads((d / "run.json").read_text())
    fares = meta["fares"]
    alloc = rows(d / "allocation.csv")
    ids = [int(r["station_id"]) for r in alloc]
    x = [int(r["x"]) for r in alloc]
    pos = {s: i for i, s in enumerate(ids)}
    n = len(ids)
    requests = rows(d / "requests.csv")
    legs = rows(d / "vehicle_legs.csv")
    parking = rows(d / "parking.csv")
    trips = rows(d / "trips.csv")

    gen = [[0] * 24 for _ in range(n)]
    lost = [[0] * 24 for _ in range(n)]
    totals = {"generated": 0, "served": 0, "lost": 0, "lost_fm": 0, "lost_lm": 0}
    served_at = [0] * n
    for r in requests:
        s = pos[int(r["station"])]
        h = min(max(math.floor(float(r["t_request"]) / 60.0), 0), 23)
        gen[s][h] += 1
        totals["generated"] += 1
        if r["outcome"] == "served":
            totals["served"] += 1
            served_at[s] += 1
        if r["outcome"] == "lost":
            lost[s][h] += 1
            totals["lost"] += 1
            totals["lost_fm" if r["kind"] == "FM" else "lost_lm"] += 1
    totals["lost_pct"] = pct(totals["lost"], totals["generated"])
    st_gen = [sum(row) for row in gen]
    st_lost = [sum(row) for row in lost]
    hr_gen = [sum(gen[s][h] for s in range(n)) for h in range(24)]
    hr_lost = [sum(lost[s][h] for s in range(n)) for h in range(24)]

    vehicles = {}
    last = meta["horizon_end"]
    for l in legs:
        v = int(l["vehicle"])
        entry = vehicles.setdefault(v, [pos[int(l["station"])], 0.0, 0.0])
        entry[1] += float(l["km"])
        if l["state"] != "AtMetroStation":
            entry[2] += float(l["t1"]) - float(l["t0"])
        last = max(last, float(l["t1"]))
    horizon = last - meta["horizon_start"]
    by_station = [[] for _ in range(n)]
    for v in sorted(vehicles):
        by_station[vehicles[v][0]].append(vehicles[v])
    util = []
    for vs in by_station:
        total = 0.0
        for e in vs:
            total += e[2] / horizon
        util.append(total / len(vs) if vs else 0.0)

    series = [[] for _ in range(n)]
    for p in parking:
        series[pos[int(p["station"])]].append(int(p["idle_count"]))
    park = []
    for s in series:
        s.sort()
        park.append({
            "samples": len(s),
            "min": float(s[0]) if s else 0.0,
            "q1": percentile(s, 0.25),
            "median": percentile(s, 0.5),
            "q3": percentile(s, 0.75),
            "max": float(s[-1]) if s else 0.0,
        })

    hist = [{} for _ in range(n)]
    share_total = {}
    for t in trips:
        k = t["passengers"]
        h = hist[pos[int(t["station"])]]
        h[k] = h.get(k, 0) + 1
        share_total[k] = share_total.get(k, 0) + 1

    actual, cf = 0.0, 0.0
    st_actual, st_cf = [0.0] * n, [0.0] * n
    for l in legs:
        actual += float(l["km"])
        st_actual[pos[int(l["station"])]] += float(l["km"])
    revenue = [0.0] * n
    for r in requests:
        if r["outcome"] != "served":
            continue
        km = float(r["direct_km"])
        s = pos[int(r["station"])]
        cf += 2.0 * km
        st_cf[s] += 2.0 * km
        revenue[s] += fares["base_fare"] + fares["per_km_rate"] * max(km - fares["base_distance"], 0.0)

    cost = [0.0] * n
    for s, vs in enumerate(by_station):
        for e in vs:
            cost[s] += e[1] * (fares["fuel_price"] / fares["mileage"]) + fares["fixed_cost"]

    def profit_block(rev):
        profit = [rev[s] - cost[s] for s in range(n)]
        total = 0.0
        for p in profit:
            total += p
        return {
            "revenue": rev,
            "cost": cost,
            "profit": profit,
            "per_vehicle": [profit[s] / x[s] if x[s] > 0 else None for s in range(n)],
            "total_profit": total,
        }

    dist = profit_block(revenue)
    trip = profit_block([fares["flat_fare"] * served_at[s] for s in range(n)])

    fare = None
    if totals["served"] > 0:
        target = dist["total_profit"]

        def total_at(f):
            acc = 0.0
            for s in range(n):
                acc += f * served_at[s] - cost[s]
            return acc

        lo, hi = 0.0, 1.0
        for _ in range(64):
            if not total_at(hi) < target:
                break
            hi *= 2.0
        for _ in range(100):
            mid = (lo + hi) / 2.0
            if total_at(mid) < target:
                lo = mid
            else:
                hi = mid
        fare = math.floor(hi * 1e4 + 0.5) / 1e4

    return {
        "mode": meta["mode"],
        "seed": meta["seed"],
        "stations": ids,
        "allocation": x,
        "totals": totals,
        "lost_matrix": {
            "lost": lost,
            "generated": gen,
            "pct": [[pct(lost[s][h], gen[s][h]) for h in range(24)] for s in range(n)],
            "station_lost": st_lost,
            "station_generated": st_gen,
            "station_pct": [pct(st_lost[s], st_gen[s]) for s in range(n)],
            "hour_lost": hr_lost,
            "hour_generated": hr_gen,
            "hour_pct": [pct(hr_lost[h], hr_gen[h]) for h in range(24)],
        },
        "utilization": util,
        "parking": park,
        "sharing": {"trips": len(trips), "total": share_total, "per_station": hist},
        "vehicle_km": {
            "actual": actual,
            "counterfactual": cf,
            "ratio": actual / cf if cf > 0 else None,
            "station_actual": st_actual,
            "station_counterfactual": st_cf,
        },
        "profit": {"distance": dist, "trip": trip, "break_even_flat_fare": fare},
    }


def diff(a, b, path, out):
    if isinstance(a, dict) and isinstance(b, dict):
        for k in sorted(set(a) | set(b)):
            if k not in a or k not in b:
                out.append(f"{path}.{k}: missing on one side")
            else:
                diff(a[k], b[k], f"{path}.{k}", out)
    elif isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            out.append(f"{path}: length {len(a)} != {len(b)}")
        for i, (u, v) in enumerate(zip(a, b)):
            diff(u, v, f"{path}[{i}]", out)
    elif type(a) is bool or type(b) is bool or a is None or b is None:
        if a is not b:
            out.append(f"{path}: {a!r} != {b!r}")
    elif a != b:
        out.append(f"{path}: {a!r} != {b!r}")


def main(argv):
    if len(argv) < 2:
        print(__doc__)
        return 2
    bad = 0
    for run_dir in argv[1:]:
        report = json.loads((Path(run_dir) / "report.json").read_text())
        mismatches = []
        diff(report, recount(run_dir), "report", mismatches)
        for m in mismatches[:20]:
            print(f"{run_dir}: {m}")
        if mismatches:
            bad += 1
        else:
            print(f"{run_dir}: all fields match")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
