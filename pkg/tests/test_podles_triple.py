import numpy as np
import pytest

from PodlesTriple import PodlesSubalgebraError, generator_A, generator_B, in_podles, podles_chain, podles_chern2, \
    build_podles, podles_chern_report, podles_generators, podles_summability, podles_triple
from QAlgebra import Monomial, NCPoly, star
from QScalar import ConfigurationError


def test_generators_live_in_the_subalgebra():
    for x in podles_generators().values():
        assert in_podles(x)
    assert not in_podles(NCPoly.gen("a"))
    assert in_podles(generator_A() * generator_B())


def test_relations(ctx):
    residuals = podles_triple(ctx, 20).relation_residuals()
    assert set(residuals) == {"AB_symbolic", "AB_represented", "BsB_symbolic", "BsB_represented",
                              "ABs_symbolic", "ABs_represented", "BBs_symbolic", "BBs_represented"}
    assert max(residuals.values()) <= 1e-10


def test_grading(ctx):
    residuals = podles_triple(ctx, 20).grading_residuals()
    assert residuals["anticommutator"] == 0.0
    assert residuals["representation_commutator"] == 0.0


def test_E_and_F_swap_the_sectors(ctx):
    maps = podles_triple(ctx, 20).sector_maps()
    assert maps["E_leak"] == 0.0
    assert maps["F_leak"] == 0.0
    assert maps["F_minus_Estar"] <= 1e-12


@pytest.mark.parametrize("name", ["A", "B", "B*"])
def test_delta_implements_the_circle_flow(ctx, name):
    triple = podles_triple(ctx, 20)
    assert triple.flow_consistency(podles_generators()[name], 0.4) <= 1e-10


def test_outside_monomials_are_refused(ctx):
    triple = podles_triple(ctx, 10)
    with pytest.raises(PodlesSubalgebraError):
        triple.represent(Monomial.from_word("a"))
    with pytest.raises(PodlesSubalgebraError):
        podles_chain(NCPoly.gen("a"), generator_A(), generator_B())


def test_phase_is_a_graded_symmetry(ctx):
    triple = podles_triple(ctx, 20)
    F = triple.F.matrix.toarray()
    assert np.allclose(F @ F, np.eye(F.shape[0]))
    g = np.diag(triple.gamma)
    assert np.allclose(g @ F + F @ g, 0.0)


def test_summability_above_two(ctx):
    report = podles_summability(3, ctx, [60])
    assert report.tail_estimate <= 1e-6
    assert report.verdict == "convergent"


def test_no_summability_at_two(ctx):
    report = podles_summability(2, ctx, [30])
    assert all(v > 1e-3 for v in report.levels.values())


def test_summability_rejects_small_exponents(ctx):
    with pytest.raises(ConfigurationError):
        podles_summability(0.5, ctx, [10])


def test_even_chern_cocycle_is_finite(ctx):
    gens = podles_generators()
    value = podles_chern2(gens["A"], gens["B"], gens["B*"], ctx, L2=20)
    assert np.isfinite(value.extrapolated.real)
    assert set(value.series.contributions) == set(range(15))


def test_chern_cocycle_vanishes_on_scalars(ctx):
    one = NCPoly.one()
    assert podles_chern2(one, one, one, ctx, L2=10).value == 0


def test_partial_sums_decrease_with_p(ctx):
    three = podles_summability(3, ctx, [20])
    four = podles_summability(4, ctx, [20])
    assert three.partial_sums[20] > four.partial_sums[20]
    assert all(v > 0 for v in four.levels.values())


def test_algebra_relations_fix_the_scalings(ctx):
    q = ctx.q
    A, B = generator_A(), generator_B()
    Bs = star(B)
    wrong = B * Bs - A * (NCPoly.one() - A) * q ** 2
    assert wrong.max_abs(ctx) > 1e-3
    assert (A * Bs - Bs * A * q ** -2).max_abs(ctx) <= 1e-12


def test_chern_report_residuals_shrink_with_the_cutoff(ctx):
    low = podles_chern_report(["A", "B", "B*"], ctx, 16)
    high = podles_chern_report(["A", "B", "B*"], ctx, 24)
    assert high.cyclic_residual <= low.cyclic_residual + 1e-9
    assert high.boundary_residual <= low.boundary_residual + 1e-9
    assert high.as_dict()["entries"] == ("A", "B", "B*")


def test_chern_report_needs_known_generators(ctx):
    with pytest.raises(ConfigurationError):
        podles_chern_report(["A", "B", "C"], ctx, 10)


def test_build_podles_shares_the_cached_triple(ctx):
    assert build_podles(ctx, 12) is podles_triple(ctx, 12)
