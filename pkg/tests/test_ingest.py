import math

import numpy as np
import pytest

from restartlp import (
    DiagonalBilinear,
    MpsParseError,
    RandomLpKnownOptimum,
    SaddlePoint,
    TwoDimToy,
    generate,
    gradient_field,
    parse_mps,
    residuals,
    to_standard_form,
)

from conftest import brute_force_lp

TWO_VAR_FIXTURE = """\
NAME          TWOVAR
ROWS
 N  COST
 E  BAL
COLUMNS
    X1        COST      1.0        BAL       1.0
    X2        COST      1.0        BAL       1.0
RHS
    RHS1      BAL       1.0
ENDATA
"""

FREE_VAR_FIXTURE = """\
NAME          FREEVAR
ROWS
 N  COST
 E  BAL
COLUMNS
    X1        COST      2.0        BAL       1.0
    X2        COST      1.0        BAL       1.0
BOUNDS
 FR BND       X2
RHS
    RHS1      BAL       3.0
ENDATA
"""

G_ROW_FIXTURE = """\
NAME          GROW
ROWS
 N  COST
 G  LIM
COLUMNS
    X1        COST      1.0        LIM       1.0
RHS
    RHS1      LIM       2.0
ENDATA
"""

BOUNDED_FIXTURE = """\
NAME          BOUNDED
ROWS
 N  COST
 E  BAL
COLUMNS
    X1        COST      1.0        BAL       1.0
    X2        BAL       1.0
RHS
    RHS1      BAL       4.0
BOUNDS
 LO BND       X1        1.0
 UP BND       X1        2.0
ENDATA
"""

RANGED_FIXTURE = """\
NAME          RANGED
ROWS
 N  COST
 L  CAP
COLUMNS
    X1        COST      -1.0       CAP       1.0
RHS
    RHS1      CAP       5.0
RANGES
    RNG       CAP       2.0
ENDATA
"""

REFLECTED_FIXTURE = """\
NAME          REFLECT
ROWS
 N  COST
 E  BAL
COLUMNS
    X1        COST      -1.0       BAL       1.0
    X2        BAL       1.0
RHS
    RHS1      BAL       10.0
BOUNDS
 MI BND       X1
 UP BND       X1        3.0
ENDATA
"""

FIXED_FIXTURE = """\
NAME          FIXED
ROWS
 N  COST
 E  BAL
COLUMNS
    X1        COST      1.0        BAL       1.0
    X2        COST      1.0        BAL       1.0
RHS
    RHS1      BAL       4.0
BOUNDS
 FX BND       X2        1.0
ENDATA
"""

MAXIMIZE_FIXTURE = """\
NAME          MAXI
OBJSENSE
    MAX
ROWS
 N  PROFIT
 L  CAP
COLUMNS
    X1        PROFIT    1.0        CAP       1.0
RHS
    RHS1      CAP       2.0
ENDATA
"""

EMPTY_COLUMNS_FIXTURE = """\
NAME          EMPTY
ROWS
 N  COST
COLUMNS
RHS
ENDATA
"""


class TestParse:
    def test_two_var_fixture(self):
        model = parse_mps(TWO_VAR_FIXTURE)
        assert model.objective_row == "COST"
        assert model.row_names == ["BAL"]
        assert model.row_sense["BAL"] == "E"
        assert model.column_names == ["X1", "X2"]
        assert model.rhs["BAL"] == 1.0
        assert model.entries[("BAL", "X1")] == 1.0

    def test_free_bound_recorded(self):
        model = parse_mps(FREE_VAR_FIXTURE)
        assert ("FR", "X2", None) in model.bound_records
        lo, up = model.resolved_bounds()
        assert lo["X2"] == -math.inf and up["X2"] == math.inf

    def test_empty_columns(self):
        model = parse_mps(EMPTY_COLUMNS_FIXTURE)
        assert model.column_names == []
        assert model.row_names == []

    def test_duplicate_entries_summed(self):
        text = TWO_VAR_FIXTURE.replace(
            "    X2        COST      1.0        BAL       1.0",
            "    X2        COST      1.0        BAL       0.25\n"
            "    X2        BAL       0.75")
        model = parse_mps(text)
        assert model.entries[("BAL", "X2")] == 1.0

    def test_section_order_enforced(self):
        bad = "NAME T\nCOLUMNS\n    X1 COST 1.0\nROWS\n N COST\nENDATA\n"
        with pytest.raises(MpsParseError, match="out of order|undeclared"):
            parse_mps(bad)

    def test_unknown_bound_code(self):
        bad = TWO_VAR_FIXTURE.replace("ENDATA", "BOUNDS\n BV BND X1 1\nENDATA")
        with pytest.raises(MpsParseError, match="unknown bound code"):
            parse_mps(bad)

    def test_second_objective_row_rejected(self):
        bad = TWO_VAR_FIXTURE.replace(" E  BAL", " E  BAL\n N  COST2")
        with pytest.raises(MpsParseError, match="one objective"):
            parse_mps(bad)

    def test_undeclared_row_rejected(self):
        bad = TWO_VAR_FIXTURE.replace("BAL       1.0\nRHS", "BAD       1.0\nRHS")
        with pytest.raises(MpsParseError, match="undeclared"):
            parse_mps(bad)

    def test_unsupported_section(self):
        bad = TWO_VAR_FIXTURE.replace("ENDATA", "SOS\n S1 s1 X1 1\nENDATA")
        with pytest.raises(MpsParseError, match="unsupported"):
            parse_mps(bad)

    def test_integer_marker_rejected(self):
        bad = TWO_VAR_FIXTURE.replace(
            "COLUMNS\n", "COLUMNS\n    M1        'MARKER'   'INTORG'\n")
        with pytest.raises(MpsParseError, match="integer"):
            parse_mps(bad)

    def test_ranges_on_objective_rejected(self):
        bad = TWO_VAR_FIXTURE.replace(
            "RHS\n", "RANGES\n    RNG       COST      1.0\nRHS\n")
        with pytest.raises(MpsParseError, match="RANGES"):
            parse_mps(bad)


class TestStandardForm:
    def test_two_var_conversion(self):
        problem, vmap = to_standard_form(parse_mps(TWO_VAR_FIXTURE))
        assert problem.n == 2 and problem.m == 1
        assert np.array_equal(problem.c, [1.0, 1.0])
        assert np.array_equal(problem.b, [1.0])
        assert np.array_equal(problem.A.to_dense(), [[1.0, 1.0]])

    def test_g_row_gets_slack(self):
        problem, _ = to_standard_form(parse_mps(G_ROW_FIXTURE))
        assert problem.n == 2  # x1 plus surplus
        dense = problem.A.to_dense()
        assert np.array_equal(dense, [[1.0, -1.0]])
        assert np.array_equal(problem.b, [2.0])

    def test_free_split_adds_column(self):
        problem, vmap = to_standard_form(parse_mps(FREE_VAR_FIXTURE))
        assert problem.n == 3  # x1 plus split pair
        assert np.array_equal(problem.c, [2.0, 1.0, -1.0])

    def test_roundtrip_feasibility(self, rng):
        fixtures = [TWO_VAR_FIXTURE, FREE_VAR_FIXTURE, G_ROW_FIXTURE,
                    BOUNDED_FIXTURE, RANGED_FIXTURE, REFLECTED_FIXTURE,
                    FIXED_FIXTURE, MAXIMIZE_FIXTURE]
        for text in fixtures:
            model = parse_mps(text)
            problem, vmap = to_standard_form(model)
            lo, up = model.resolved_bounds()
            # random standard-form-feasible points map to original-feasible
            dense = problem.A.to_dense()
            for _ in range(20):
                x = np.abs(rng.standard_normal(problem.n))
                # project onto Ax = b (dense pseudo-inverse; fine at this size)
                if problem.m:
                    x = x - np.linalg.pinv(dense) @ (dense @ x - problem.b)
                if problem.n and np.min(x) < 0:
                    continue  # projection left the cone; skip this draw
                orig = vmap.to_original(x)
                for j, name in enumerate(model.column_names):
                    assert orig[j] >= lo[name] - 1e-12
                    assert orig[j] <= up[name] + 1e-12
                for row in model.row_names:
                    act = sum(model.entries.get((row, cname), 0.0) * orig[j]
                              for j, cname in enumerate(model.column_names))
                    sense = model.row_sense[row]
                    r = model.rhs.get(row, 0.0)
                    if sense == "E":
                        assert abs(act - r) <= 1e-9

    @pytest.mark.parametrize("text,expected", [
        (TWO_VAR_FIXTURE, 1.0),
        (FREE_VAR_FIXTURE, 3.0),
        (G_ROW_FIXTURE, 2.0),
        (BOUNDED_FIXTURE, 1.0),
        (RANGED_FIXTURE, -5.0),
        (REFLECTED_FIXTURE, -3.0),
        (FIXED_FIXTURE, 4.0),
        (MAXIMIZE_FIXTURE, 2.0),
    ])
    def test_optimum_matches_reference(self, text, expected):
        model = parse_mps(text)
        problem, vmap = to_standard_form(model)
        val, x = brute_force_lp(problem)
        assert vmap.original_objective(problem, x) == pytest.approx(expected, abs=1e-8)

    def test_contradictory_fx(self):
        bad = BOUNDED_FIXTURE.replace(
            " UP BND       X1        2.0",
            " UP BND       X1        0.5")
        with pytest.raises(ValueError, match="contradictory"):
            to_standard_form(parse_mps(bad))

    def test_range_on_e_row_rejected(self):
        bad = TWO_VAR_FIXTURE.replace(
            "RHS\n", "RANGES\n    RNG       BAL       1.0\nRHS\n")
        with pytest.raises(ValueError, match="E row"):
            to_standard_form(parse_mps(bad))


class TestGenerators:
    def test_diagonal_bilinear(self):
        problem, opt = generate(DiagonalBilinear((1.0,)))
        assert not problem.nonneg
        assert np.array_equal(opt.as_vector(), [0.0, 0.0])
        # interaction realizes L(x, y) = +y' diag(sigma) x: F = (y, -x) here
        z = SaddlePoint(np.array([2.0]), np.array([3.0]))
        assert np.allclose(gradient_field(problem, z), [3.0, -2.0])

    def test_diagonal_requires_positive(self):
        with pytest.raises(ValueError):
            DiagonalBilinear((1.0, 0.0))

    def test_two_dim_toy(self):
        problem, opt = generate(TwoDimToy())
        assert problem.n == 1 and problem.m == 1
        assert np.array_equal(opt.as_vector(), [0.0, 0.0])

    def test_random_known_optimum_seed7(self):
        problem, opt = generate(RandomLpKnownOptimum(5, 10, 0.5, 7))
        assert residuals(problem, opt).kkt_error <= 1e-12

    def test_random_known_optimum_many_seeds(self):
        for seed in range(100):
            problem, opt = generate(RandomLpKnownOptimum(6, 11, 0.4, seed))
            assert residuals(problem, opt).kkt_error <= 1e-12

    def test_bad_specs(self):
        with pytest.raises(ValueError):
            RandomLpKnownOptimum(0, 5, 0.5, 1)
        with pytest.raises(ValueError):
            RandomLpKnownOptimum(5, 5, 0.0, 1)
        with pytest.raises(ValueError):
            generate(object())
