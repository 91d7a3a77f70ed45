#!/usr/bin/env python3
"""Writes hash_vectors.csv: seed,prev,cand,g,hash,green for 10,000 random triples."""
import math
import random
import sys

M64 = (1 << 64) - 1


def mix64(z):
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & M64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & M64
    z ^= z >> 31
    return z


def pair_hash(seed, prev, cand):
    key = seed ^ ((prev * 0x9E3779B97F4A7C15) & M64)
    return mix64(key ^ ((cand * 0xBF58476D1CE4E5B9) & M64))


def is_green(seed, prev, cand, g):
    return (pair_hash(seed, prev, cand) >> 11) < math.ceil(g * 2.0**53)


def main(path):
    rng = random.Random(20240611)
    with open(path, "w") as out:
        out.write("seed,prev,cand,g,hash,green\n")
        for i in range(10000):
            seed = rng.getrandbits(64) if i % 4 else rng.randrange(1 << 20)
            vocab = rng.choice([2, 128, 256, 32000, 65536])
            prev, cand = rng.randrange(vocab), rng.randrange(vocab)
            g = rng.choice([0.0, 0.001, 0.1, 0.25, 0.5, 0.9, 1.0, rng.random()])
            h = pair_hash(seed, prev, cand)
            out.write(f"{seed},{prev},{cand},{g!r},{h},{int(is_green(seed, prev, cand, g))}\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "hash_vectors.csv")
