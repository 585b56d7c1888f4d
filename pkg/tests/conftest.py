"""Shared instance builders for the test suite."""

from pathlib import Path

import pytest

from qipsolve import build_instance

DATA = Path(__file__).parent / "data"


def example1_instance(with_uncertainty=True, objective=True):
    """Five-variable alternating instance with one uncertainty row; optimum -1
    reached only by the first move x1=1."""
    return build_instance(
        [("x1", "E", 0, 2), ("x2", "A", 0, 1), ("x3", "E", 0, 1),
         ("x4", "A", 0, 1), ("x5", "E", 0, 1)],
        [([(2, "x1"), (1, "x3"), (-1, "x5")], "<=", 4),
         ([(1, "x1"), (-1, "x2"), (1, "x3"), (-1, "x5")], "=", 1),
         ([(1, "x2"), (1, "x3"), (-1, "x4"), (-1, "x5")], "<=", 2),
         ([(1, "x1"), (1, "x2"), (1, "x3"), (1, "x4")], "<=", 3)],
        [([(1, "x2"), (1, "x4")], "<=", 1)] if with_uncertainty else [],
        ("min", [(-1, "x1"), (2, "x2"), (-3, "x3"), (1, "x4"), (2, "x5")]) if objective else None,
    )


def two_refinement_instance():
    """The small two-stage instance whose solve takes exactly two refinements:
    parity row x1+x2+t = 2d against adversarial bits z1, z2."""
    return build_instance(
        [("x1", "E", 0, 1), ("x2", "E", 0, 1), ("z1", "A", 0, 1),
         ("z2", "A", 0, 1), ("t", "E", 0, 1), ("d", "E", 0, 1)],
        [([(1, "x1"), (1, "x2"), (1, "t"), (-2, "d")], "=", 0),
         ([(1, "z1"), (1, "z2"), (1, "t")], ">=", 1),
         ([(-1, "z1"), (-1, "z2"), (-1, "t")], ">=", -2)],
    )


@pytest.fixture
def example1():
    return example1_instance()


@pytest.fixture
def worked_example():
    return two_refinement_instance()
