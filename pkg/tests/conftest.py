"""Brute-force oracles shared by the test modules.

These deliberately avoid the package's own distance and latency code so they
stay independent of what they check.
"""

import itertools
import math

import numpy as np
import pytest


def brute_path_length(pts, order):
    return math.fsum(math.dist(pts[a], pts[b]) for a, b in zip(order, order[1:]))


def brute_psi(pts, order, alpha):
    total, clock = 0.0, 0.0
    for i, v in enumerate(order):
        if i:
            clock += math.dist(pts[order[i - 1]], pts[v])
        total += clock**alpha
    return total


def brute_tsp_path(pts):
    n = len(pts)
    return min(brute_path_length(pts, p) for p in itertools.permutations(range(n)))


def brute_k_tsp(pts, k):
    n = len(pts)
    best = math.inf
    for subset in itertools.combinations(range(n), k):
        for p in itertools.permutations(subset):
            if p[0] < p[-1]:  # each path once per direction
                best = min(best, brute_path_length(pts, p))
    return best


def brute_psi_trp(pts, alpha):
    return min(brute_psi(pts, p, alpha) for p in itertools.permutations(range(len(pts))))


def closest_pair(pts):
    return min(math.dist(a, b) for a, b in itertools.combinations(pts, 2))


def random_points(n, seed):
    return np.random.default_rng(seed).random((n, 2))


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


# Filled by test_acceptance; one (label, passed, detail) tuple per criterion.
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} {label}: {detail}")
