"""Reference solutions for the fixture corpus, written independently of the
engine (they are the oracles the sandbox tests are checked against)."""

MIN_COST = """\
def min_cost(cost, m, n):
    rows, cols = len(cost), len(cost[0])
    acc = [[0] * cols for _ in range(rows)]
    acc[0][0] = cost[0][0]
    for i in range(1, m + 1):
        acc[i][0] = acc[i - 1][0] + cost[i][0]
    for j in range(1, n + 1):
        acc[0][j] = acc[0][j - 1] + cost[0][j]
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            acc[i][j] = min(acc[i - 1][j - 1], acc[i - 1][j], acc[i][j - 1]) + cost[i][j]
    return acc[m][n]
"""

# Passes the public assert (== 8) by construction, fails the private suite.
MIN_COST_HARDCODED = """\
def min_cost(cost, m, n):
    return 8
"""

HAS_CLOSE_ELEMENTS = """\
from typing import List


def has_close_elements(numbers: List[float], threshold: float) -> bool:
    for i, a in enumerate(numbers):
        for j, b in enumerate(numbers):
            if i != j and abs(a - b) < threshold:
                return True
    return False
"""

PRETTINESS = """\
import sys
from math import gcd


def main():
    data = sys.stdin.read().split()
    n = int(data[0])
    values = [int(v) for v in data[1:1 + n]]
    mod = 10 ** 9 + 7
    total = 0
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            total += gcd(values[i - 1], values[j - 1]) * gcd(i, j)
    print(total % mod)


main()
"""

ECHO = """\
line = input()
print(line)
"""

TOY_SOLUTIONS = {
    "increment": "def increment(n):\n    return n + 1\n",
    "double": "def double(n):\n    return 2 * n\n",
    "square": "def square(n):\n    return n * n\n",
    "negate": "def negate(n):\n    return -n\n",
    "halve": "def halve(n):\n    return n // 2\n",
    "last_digit": "def last_digit(n):\n    return n % 10\n",
    "list_sum": "def list_sum(xs):\n    return sum(xs)\n",
    "biggest": "def biggest(xs):\n    return max(xs)\n",
}

FIXTURE_SOLUTIONS = {
    "0": MIN_COST,
    "1": HAS_CLOSE_ELEMENTS,
    "2": PRETTINESS,
    "3": ECHO,
    "4": TOY_SOLUTIONS["increment"],
    "5": TOY_SOLUTIONS["double"],
    "6": TOY_SOLUTIONS["square"],
    "7": TOY_SOLUTIONS["negate"],
    "8": TOY_SOLUTIONS["halve"],
    "9": TOY_SOLUTIONS["last_digit"],
    "10": TOY_SOLUTIONS["list_sum"],
    "11": TOY_SOLUTIONS["biggest"],
}
