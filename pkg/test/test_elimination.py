import random

import pytest
import sympy

from multisym.elimination import (
    ConstraintIdeal,
    LinearSolver,
    random_point,
    rational_rank,
)

a, b, c = sympy.symbols("a b c")
x, y = sympy.symbols("x y")
u, v = sympy.symbols("u v")


def test_solve_numeric():
    """Test a square system with numeric pivots"""
    solution = LinearSolver().solve([a + b - 3, a - b - 1], [a, b])
    assert solution.bindings == {a: 2, b: 1}
    assert solution.free == ()
    assert solution.consistent
    assert not solution.pivots


def test_solve_symbolic_pivot():
    """Test non-numeric pivots are recorded as nonzero assumptions"""
    solution = LinearSolver().solve([x * a - y], [a])
    assert sympy.simplify(solution.bindings[a] - y / x) == 0
    assert solution.pivots == [(a, x)]


def test_solve_underdetermined():
    solution = LinearSolver().solve([a + b + c], [a, b, c])
    assert len(solution.free) == 2
    assert len(solution.bindings) == 1


def test_solve_residuals_and_deferred():
    """Test rows free of unknowns and nonlinear rows are set apart"""
    solution = LinearSolver().solve([a - 1, x - y, a * b], [a, b])
    assert solution.residuals == [(1, x - y)]
    assert [origin for origin, _ in solution.deferred] == [2]
    assert not solution.consistent


def test_solve_hidden_zero_pivot():
    """Test a coefficient vanishing only through sqrt(x)^2 = x is never a pivot"""
    root = sympy.sqrt(x)
    solution = LinearSolver().solve([a + root * b, root * a + x * b], [a, b])
    assert solution.dependent == [1]
    assert solution.free == (b,)
    assert sympy.simplify(solution.bindings[a] + root * b) == 0


def test_solve_inconsistent():
    solution = LinearSolver().solve([a - 1, a - 2], [a])
    assert [value for _, value in solution.residuals] in ([1], [-1])


def test_certificate():
    """Test large systems with symbolic pivots get a rank certificate"""
    solver = LinearSolver(symbolic_row_limit=2)
    unknowns = sympy.symbols("k0:4")
    rows = [x * unknowns[i] + y * unknowns[i + 1] for i in range(3)] + [x * unknowns[3]]
    solution = solver.solve(rows, unknowns)
    assert solution.certified
    assert solution.rank == 4
    eliminated = solver.solve(rows, unknowns, certify=False)
    assert not eliminated.certified


def test_certificate_bindings():
    """Test a certified system above the row limit still gets its bindings"""
    unknowns = sympy.symbols("k0:18")
    rows = [x * unknowns[i] + y * unknowns[i + 1] - i for i in range(17)]
    rows += [x * unknowns[17] - y, 2 * rows[0], rows[1] + rows[2]]
    solver = LinearSolver()
    assert len(rows) > solver.symbolic_row_limit
    solution = solver.solve(rows, unknowns)
    assert solution.certified
    assert set(solution.bindings) == set(unknowns)
    assert solution.dependent == [18, 19]
    assert sorted(solution.pivot_rows) == list(range(18))
    assert not solution.residuals
    for row in rows:
        assert sympy.cancel(row.xreplace(solution.bindings)) == 0


def test_rows_partitioned():
    """Test every row is a pivot, dependent, a residual or deferred"""
    rows = [a + b - 1, 2 * a + 2 * b - 2, a - b, x - y, a * b, 0]
    solution = LinearSolver().solve(rows, [a, b])
    origins = (
        solution.pivot_rows
        + solution.dependent
        + [i for i, _ in solution.residuals]
        + [i for i, _ in solution.deferred]
    )
    assert sorted(origins) == list(range(len(rows)))
    assert solution.dependent == [1, 5]


def test_symbolic_row_limit_validation():
    with pytest.raises(Exception):
        LinearSolver(symbolic_row_limit=0)


def test_rational_rank():
    assert rational_rank([[1, 2], [2, 4]], 2) == 1
    assert rational_rank([[1, 0], [0, 1]], 2) == 2
    assert rational_rank([], 2) == 0


def test_random_point_seeded():
    """Test random points are reproducible"""
    assert random_point([x, y], random.Random(3)) == random_point([y, x], random.Random(3))


def test_ideal_reduce():
    """Test reduction of polynomial constraints modulo an echelon basis"""
    ideal = ConstraintIdeal([u, v])
    assert ideal.add(u - x * v)
    assert not ideal.add(2 * u - 2 * x * v)
    assert len(ideal) == 1
    assert ideal.reduce(u) == x * v
    assert ideal.contains(3 * (u - x * v))
    assert not ideal.contains(v)


def test_ideal_eliminates_solvable():
    """Test configuration constraints eliminate a solvable coordinate"""
    ideal = ConstraintIdeal([u], solvable=[x])
    assert ideal.add(x - y)
    assert ideal.eliminations == {x: y}
    assert ideal.contains(u * x - u * y)
    assert not ideal.add(2 * x - 2 * y)
    assert ideal.reduce(x**2) == y**2


def test_sample_point():
    """Test sample points satisfy affine constraints"""
    ideal = ConstraintIdeal([u, v], solvable=[x])
    ideal.add(x - 2 * y)
    ideal.add(u - y)
    point = ideal.sample_point([x, y, u, v], random.Random(0))
    assert point is not None
    assert point[x] == 2 * point[y]
    assert point[u] == point[y]
