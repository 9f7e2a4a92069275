#!/usr/bin/env python3
"""Scalar reference for regression/classification metrics on a fixed dump.

Values are float32-representable so the C++ side sees the same inputs.
"""
import math
import struct


def f32(x):
    return struct.unpack("<f", struct.pack("<f", x))[0]


y = [f32(v) for v in [120.5, 98.0, 0.0, 143.25, 87.75, 0.0, 160.0, 110.0]]
yhat = [f32(v) for v in [118.0, 101.5, 0.0, 139.0, 92.25, 3.5, 151.0, 112.75]]

msle = sum((math.log(1 + a) - math.log(1 + b)) ** 2 for a, b in zip(y, yhat)) / len(y)
smape = 100 / len(y) * sum(0 if a == 0 and b == 0 else abs(a - b) / (abs(a) + abs(b)) for a, b in zip(y, yhat))
print(f"msle  {msle:.17g}")
print(f"rmsle {math.sqrt(msle):.17g}")
print(f"smape {smape:.17g}")

p = [0.9, 0.2, 0.51, 0.5, 0.49, 0.05, 0.7, 0.3, 0.99, 0.6]
t = [1, 0, 0, 1, 1, 0, 1, 1, 1, 0]
hits = sum((1 if pi >= 0.5 else 0) == ti for pi, ti in zip(p, t))
print(f"accuracy {100 * hits / len(t):.17g}")
