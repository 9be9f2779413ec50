#!/usr/bin/env python3
"""Export the IEEE 118-bus test case to the lmpcast CSV case format.

Requires the `pypower` package (pip install pypower). Parallel circuits are
merged into one edge with summed susceptance because the case format allows
a single edge per node pair. Line ratings in the source case are placeholders
(9900 MVA), so every edge is written as unlimited.
"""
import argparse
import csv
import os

from pypower.case118 import case118


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("out", help="output case directory")
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)

    case = case118()
    bus, branch, gen, gencost = case["bus"], case["branch"], case["gen"], case["gencost"]
    base_mva = case["baseMVA"]

    with open(os.path.join(args.out, "nodes.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["node_id"])
        for row in bus:
            w.writerow([int(row[0])])

    merged = {}
    order = []
    for row in branch:
        if row[10] == 0:  # out of service
            continue
        a, b = int(row[0]), int(row[1])
        key = (min(a, b), max(a, b))
        if key not in merged:
            merged[key] = 0.0
            order.append(key)
        merged[key] += 1.0 / row[3]
    with open(os.path.join(args.out, "edges.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["from", "to", "susceptance_pu", "flow_limit_mw"])
        for key in order:
            w.writerow([key[0], key[1], repr(float(round(merged[key], 10))), ""])

    with open(os.path.join(args.out, "generators.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["node", "g_min_mw", "g_max_mw", "c20", "c10"])
        for g, c in zip(gen, gencost):
            assert int(c[0]) == 2 and int(c[3]) == 3, "expected quadratic polynomial costs"
            w.writerow([int(g[0]), repr(float(g[9])), repr(float(g[8])), repr(float(c[4])), repr(float(c[5]))])

    slack = [int(row[0]) for row in bus if int(row[1]) == 3]
    with open(os.path.join(args.out, "meta.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["slack_node"])
        w.writerow([slack[0]])
    print(f"wrote {len(bus)} nodes, {len(order)} edges, {len(gen)} generators (base {base_mva} MVA)")


if __name__ == "__main__":
    main()
