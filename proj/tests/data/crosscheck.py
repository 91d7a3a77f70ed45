#!/usr/bin/env python3
"""Checks the C++ wire encoding and hash vectors against Python's json and an independent hash."""
import csv
import json
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
from gen_hash_vectors import is_green, pair_hash  # noqa: E402


def check_golden(path):
    bad = 0
    with open(path, encoding="utf-8") as f:
        lines = f.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for n, line in enumerate(lines, 1):
        msg = json.loads(line)
        again = json.dumps(msg, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        if again != line:
            print(f"judge_requests line {n}: python re-encodes differently\n  c++: {line}\n  py:  {again}")
            bad += 1
        if set(msg) != {"id", "type", "task", "context", "a", "b"} or msg["type"] != "judge":
            print(f"judge_requests line {n}: unexpected fields {sorted(msg)}")
            bad += 1
    return len(lines), bad


def check_hashes(path):
    bad = 0
    n = 0
    with open(path) as f:
        for row in csv.DictReader(f):
            n += 1
            seed, prev, cand = int(row["seed"]), int(row["prev"]), int(row["cand"])
            g = float(row["g"])
            if pair_hash(seed, prev, cand) != int(row["hash"]) or int(is_green(seed, prev, cand, g)) != int(row["green"]):
                print(f"hash_vectors row {n}: mismatch")
                bad += 1
    return n, bad


def main(datadir):
    n_json, bad_json = check_golden(os.path.join(datadir, "judge_requests.golden.jsonl"))
    n_hash, bad_hash = check_hashes(os.path.join(datadir, "hash_vectors.csv"))
    print(f"{n_json} wire lines, {bad_json} mismatches; {n_hash} hash rows, {bad_hash} mismatches")
    if n_json == 0 or n_hash != 10000:
        print("missing data")
        return 1
    return 1 if bad_json or bad_hash else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))))
