#!/usr/bin/env python3
"""Brute-force oracle for the K=4, l=2 worked system and the golden byte fixtures.

Runs without numpy. Writes micro_case.json next to this script and the binary
fixtures into ../fixtures and ../../../cli/tests/fixtures.
"""
import json
import os
import struct
import zlib
from fractions import Fraction

HERE = os.path.dirname(os.path.abspath(__file__))


def sylvester(k):
    h = [[1]]
    while len(h) < k:
        h = [r + r for r in h] + [r + [-v for v in r] for r in h]
    return h


def sign_changes(row):
    return sum(1 for a, b in zip(row, row[1:]) if a != b)


def binarize(row):
    return [1 if v == 1 else 0 for v in row]


def main():
    k, l = 4, 2
    h = sylvester(k)
    tiles = [binarize(r) for r in h]  # row-major l x l tiles, natural order
    trace = [Fraction(v) for v in (1, 2, 3, 4)]

    # forward model: S(p) = sum_k X_k(p) * I_k
    s = [sum(tiles[kk][p] * trace[kk] for kk in range(k)) for p in range(l * l)]

    # intensity correlation with spatial means over the window
    s_mean = sum(s) / len(s)
    recovered = []
    dc_index = None
    for kk in range(k):
        x = tiles[kk]
        x_mean = Fraction(sum(x), len(x))
        den = sum((v - x_mean) ** 2 for v in x)
        if den == 0:
            dc_index = kk
            recovered.append(None)
            continue
        num = sum((sp - s_mean) * (v - x_mean) for sp, v in zip(s, x))
        recovered.append(num / den)
    others = sum(r for r in recovered if r is not None)
    dc = s_mean - Fraction(1, 2) * others
    recovered[dc_index] = dc

    seq = sorted(h, key=sign_changes)
    h8 = sylvester(8)
    seq8 = sorted(h8, key=sign_changes)

    out = {
        "k": k,
        "l": l,
        "natural_tiles": tiles,
        "sequency_rows_k4": seq,
        "sequency_rows_k8": seq8,
        "trace": [float(v) for v in trace],
        "exposure": [float(v) for v in s],
        "exposure_mean": float(s_mean),
        "dc_index": dc_index,
        "dc_value": float(dc),
        "recovered": [float(v) for v in recovered],
        "non_dc_sum": float(others),
    }
    with open(os.path.join(HERE, "micro_case.json"), "w") as f:
        json.dump(out, f, indent=2)
        f.write("\n")

    # CTGB: natural-order K=4, l=2, n=1 Hadamard basis
    header = b"CTGB" + struct.pack("<HBBIIIQ", 1, 0, 0, k, l, 1, 0)
    payload = b""
    for t in tiles:
        byte = 0
        for p, v in enumerate(t):
            if v:
                byte |= 0x80 >> p
        payload += bytes([byte])
    body = header + payload
    blob = body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    with open(os.path.join(HERE, "..", "fixtures", "hadamard_natural_k4_l2_n1.ctgb"), "wb") as f:
        f.write(blob)

    # CTGE: the 2x2 exposure above
    body = b"CTGE" + struct.pack("<HI", 1, l) + b"".join(struct.pack("<f", float(v)) for v in s)
    blob = body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    cli_fixtures = os.path.join(HERE, "..", "..", "..", "cli", "tests", "fixtures")
    os.makedirs(cli_fixtures, exist_ok=True)
    with open(os.path.join(cli_fixtures, "micro_exposure.ctge"), "wb") as f:
        f.write(blob)


if __name__ == "__main__":
    main()
