#!/usr/bin/env python3
"""Writes hash_vectors.csv: reference values of hash_uniform(salt, unit)."""
import hashlib

CASES = [
    ("netexp", "0"), ("netexp", "1"), ("netexp", "42"), ("exp1", "alice"),
    ("exp1", "bob"), ("exp1#1", "c0"), ("exp1#2", "c0"), ("exp1#1000000", "c17"),
    ("", ""), ("salt", "3-7"), ("smoking.smoking_program", "101"),
    ("a:b", "c:d"), ("unicode", "été"), ("exp1.u#1", "5"), ("ri:1:0#3", "499"),
]
CASES += [("grid", str(i)) for i in range(25)]

with open("hash_vectors.csv", "w", encoding="utf-8", newline="\n") as f:
    f.write("# hash_uniform(salt, unit) = first 8 bytes of SHA-256(salt \":\" unit), big-endian, / 2^64\n")
    f.write("salt,unit,digest_prefix,value\n")
    for salt, unit in CASES:
        d = hashlib.sha256((salt + ":" + unit).encode("utf-8")).digest()
        u = int.from_bytes(d[:8], "big")
        f.write(f"{salt},{unit},{d[:8].hex()},{repr(u / 2**64)}\n")
