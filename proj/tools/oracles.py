#!/usr/bin/env python3
# Copyright (c) 2026 The moe3d Authors
# SPDX-License-Identifier: Apache-2.0
#
# High-precision reference values frozen into tests/oracle_values.hpp.
# Regenerate with: python3 tools/oracles.py > tests/oracle_values.hpp

import mpmath as mp

mp.mp.dps = 50


def cxx(v):
    return mp.nstr(v, 17, min_fixed=-30, max_fixed=30)


def arr(name, values):
    body = ",\n    ".join(cxx(v) for v in values)
    return f"inline constexpr double {name}[] = {{\n    {body}}};\n"


def softmax(xs):
    m = max(xs)
    e = [mp.e ** (x - m) for x in xs]
    s = mp.fsum(e)
    return [v / s for v in e]


def positional(coord, channels):
    pairs = channels // 6
    out = []
    for c in coord:
        for k in range(pairs):
            a = mp.mpf(c) * mp.power(10000, -mp.mpf(k) / pairs)
            out += [mp.sin(a), mp.cos(a)]
    return out


def bce(logits, targets):
    terms = []
    for x, t in zip(logits, targets):
        p = 1 / (1 + mp.e ** (-mp.mpf(x)))
        terms.append(-(t * mp.log(p) + (1 - t) * mp.log(1 - p)))
    return mp.fsum(terms) / len(terms)


def lse_ce(logits, target):
    return mp.log(mp.fsum(mp.e ** mp.mpf(x) for x in logits)) - logits[target]


SOFTMAX_IN = [1, 2, 3]
PE_COORD = (5, 7, 9)
BCE_LOGITS = [-2.3, 0.4, 1.7, -0.6, 3.1, -4.2]
BCE_TARGETS = [0, 1, 1, 0, 0, 1]
CE_LOGITS = [0.3, -1.2, 2.5, 0.7]
CE_TARGET = 1

print("// Copyright (c) 2026 The moe3d Authors")
print("// SPDX-License-Identifier: Apache-2.0")
print("//")
print("// Generated by tools/oracles.py (mpmath, 50 digits). Do not edit.")
print()
print("#pragma once")
print()
print("namespace oracle {")
print()
print(arr("kSoftmax123", softmax(SOFTMAX_IN)))
print(arr("kPositional579", positional(PE_COORD, 48)))
print(arr("kPositional000", positional((0, 0, 0), 48)))
print(arr("kPositional313131", positional((31, 31, 31), 48)))
print(arr("kBceLogits", [mp.mpf(str(x)) for x in BCE_LOGITS]))
print(arr("kBceTargets", BCE_TARGETS))
print(f"inline constexpr double kBceMean = {cxx(bce([mp.mpf(str(x)) for x in BCE_LOGITS], BCE_TARGETS))};\n")
print(arr("kCeLogits", [mp.mpf(str(x)) for x in CE_LOGITS]))
print(f"inline constexpr unsigned kCeTarget = {CE_TARGET};")
print(f"inline constexpr double kCe = {cxx(lse_ce([mp.mpf(str(x)) for x in CE_LOGITS], CE_TARGET))};")
print(f"inline constexpr double kLn2 = {cxx(mp.log(2))};")
print(f"inline constexpr double kLn3 = {cxx(mp.log(3))};")
print()
print("}  // namespace oracle")
