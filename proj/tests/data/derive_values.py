"""Independent reference values for the unit tests.

Finite systems: the master equation on a truncated box, propagated with
scipy's expm_multiply (the box is wide enough that leakage is below 1e-15).
Single particle: the Bessel closed form in mpmath at 30 digits.
Writes tests/frozen_values.hpp.
"""
import itertools
import pathlib

import mpmath as mp
import numpy as np
from scipy.sparse import lil_matrix
from scipy.sparse.linalg import expm_multiply

mp.mp.dps = 30


def evolve(y, t, p, lo, hi):
    n = len(y)
    states = list(itertools.combinations(range(lo, hi + 1), n))
    index = {s: i for i, s in enumerate(states)}
    q = 1.0 - p
    a = lil_matrix((len(states), len(states)))
    for s, i in index.items():
        for k in range(n):
            for step, rate in ((1, p), (-1, q)):
                if rate == 0.0:
                    continue
                x = list(s)
                x[k] += step
                x = tuple(x)
                if x[k] < lo or x[k] > hi:
                    continue
                if (k + 1 < n and x[k] == s[k + 1]) or (k > 0 and x[k] == s[k - 1]):
                    continue
                a[index[x], i] += rate
                a[i, i] -= rate
    v = np.zeros(len(states))
    v[index[tuple(y)]] = 1.0
    w = expm_multiply(a.tocsr() * t, v)
    return dict(zip(states, w))


def marginal(dist, m):
    out = {}
    for s, v in dist.items():
        out[s[m - 1]] = out.get(s[m - 1], 0.0) + v
    return out


def free_walk(n, t, p):
    q = 1 - mp.mpf(p)
    return mp.e ** (-t) * (p / q) ** (mp.mpf(n) / 2) * mp.besseli(n, 2 * mp.sqrt(p * q) * t)


lines = ["#pragma once", "", "// Generated by tests/data/derive_values.py; do not edit.", "", "namespace frozen {", ""]


def emit_rows(name, rows, fields):
    lines.append(f"struct {name}Row {{ {' '.join(f'{ty} {f};' for ty, f in fields)} }};")
    lines.append(f"inline constexpr {name}Row k{name}[] = {{")
    for r in rows:
        lines.append("    {" + ", ".join(v if isinstance(v, str) else repr(v) for v in r) + "},")
    lines.append("};")
    lines.append("")


rows = []
for p, t, n in [(0.7, 1.0, -3), (0.7, 1.0, 0), (0.7, 1.0, 2), (0.7, 1.0, 5), (0.5, 2.0, 1), (0.5, 2.0, -4)]:
    rows.append([repr(p), repr(t), str(n), mp.nstr(free_walk(n, t, mp.mpf(p)), 20)])
emit_rows("FreeWalk", rows, [("double", "p"), ("double", "t"), ("int", "n"), ("double", "value")])

rows = []
d2 = evolve((0, 1), 1.0, 0.6, -30, 31)
for x in [(0, 1), (1, 3), (-2, 4), (-3, -1)]:
    rows.append(["0.6", "1.0", "{0, 1}", "{%d, %d}" % x, "%.17g" % d2[x]])
d3 = evolve((0, 1, 3), 0.5, 0.3, -16, 19)
for x in [(0, 1, 3), (-1, 1, 2), (-2, 0, 4), (0, 2, 5)]:
    rows.append(["0.3", "0.5", "{0, 1, 3}", "{%d, %d, %d}" % x, "%.17g" % d3[x]])
d1 = evolve((0, 2), 1.0, 1.0, -5, 30)
for x in [(0, 2), (1, 3), (2, 5)]:
    rows.append(["1.0", "1.0", "{0, 2}", "{%d, %d}" % x, "%.17g" % d1[x]])
lines.append("#include <initializer_list>")
lines.append("struct TransitionRow { double p; double t; std::initializer_list<long long> y; std::initializer_list<long long> x; double value; };")
lines.append("inline const TransitionRow kTransition[] = {")
for r in rows:
    lines.append("    {" + ", ".join(r) + "},")
lines.append("};")
lines.append("")

rows = []
for m in (1, 2, 3):
    mg = marginal(d3, m)
    for x in (-2, 0, 1, 3, 5):
        rows.append(["0.3", "0.5", str(m), str(x), "%.17g" % mg.get(x, 0.0)])
emit_rows("Marginal013", rows, [("double", "p"), ("double", "t"), ("int", "m"), ("long long", "x"), ("double", "value")])

rows = []
for y, t, p, lo, hi in [((0, 1), 1.0, 0.6, -30, 31), ((0, 1, 3), 0.5, 0.3, -16, 19), ((0, 2, 3), 1.0, 0.5, -18, 22)]:
    d = evolve(y, t, p, lo, hi)
    mean = sum(s[0] * v for s, v in d.items())
    rows.append([repr(p), repr(t), "{" + ", ".join(map(str, y)) + "}", "%.17g" % mean])
lines.append("struct MeanRow { double p; double t; std::initializer_list<long long> y; double value; };")
lines.append("inline const MeanRow kMeanFirst[] = {")
for r in rows:
    lines.append("    {" + ", ".join(r) + "},")
lines.append("};")
lines.append("")

# p = 0 with step data: particle m only feels particles 1..m-1, so the law of
# x_m equals that of the m-particle system started from {1, ..., m}.
rows = []
for m in (1, 2, 3):
    d = evolve(tuple(range(1, m + 1)), 1.0, 0.0, -25, m)
    mg = marginal(d, m)
    for x in (-3, -1, 0, m):
        rows.append([str(m), str(x), "%.17g" % mg.get(x, 0.0)])
emit_rows("StepLeft", rows, [("int", "m"), ("long long", "x"), ("double", "value")])

lines.append("}  // namespace frozen")
pathlib.Path(__file__).resolve().parent.parent.joinpath("frozen_values.hpp").write_text("\n".join(lines) + "\n")
