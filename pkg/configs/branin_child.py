"""Example external objective: Branin served over the line protocol.

Reads ``{"x": [x1, x2]}`` lines on stdin and answers each with one float.
"""

import json
import math
import sys


def branin(x1, x2):
    b, c = 5.1 / (4 * math.pi ** 2), 5 / math.pi
    return (x2 - b * x1 ** 2 + c * x1 - 6) ** 2 + 10 * (1 - 1 / (8 * math.pi)) * math.cos(x1) + 10


for line in sys.stdin:
    x = json.loads(line)["x"]
    print(repr(branin(*x)), flush=True)
