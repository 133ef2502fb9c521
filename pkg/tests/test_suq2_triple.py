import numpy as np
import pytest

from ChernIndex import LevelSeries, ParityError, cocycle_residuals, modular_check, toeplitz_index, unitarity_residual
from CorepModels import build_basis
from QAlgebra import NCMatrix, NCPoly, normal_form, random_word
from QScalar import ConfigurationError, QContext
from SUq2Triple import build_dq, closed_index, constant_C, corep_unitary, dq_asymmetry, local_cocycle, \
    modular_index_formula, run_experiment, summability_scan, summability_verdict, suq2_triple, trace_r, \
    transgression
from TwistedCyclic import Chain


def test_constant_and_closed_index(ctx):
    assert float(constant_C(ctx)) == pytest.approx(9.0886, abs=1e-4)
    assert float(closed_index(0, ctx)) == pytest.approx(0.0, abs=1e-15)
    assert float(closed_index(1, ctx)) == pytest.approx(-0.55133, abs=1e-5)
    with pytest.raises(ConfigurationError):
        closed_index(-1, ctx)


@pytest.mark.parametrize("l2", [1, 2])
def test_general_formula_agrees_with_the_closed_index(ctx, l2):
    group = modular_check(corep_unitary(l2, ctx), ctx)
    assert modular_index_formula(group.weight_vector(-1j), ctx) == pytest.approx(float(closed_index(l2, ctx)))


def test_trace_of_R_matches_its_closed_form(ctx):
    report = trace_r(ctx, 80)
    assert report.abs_err <= 1e-8
    assert report.tail_estimate <= 1e-8


def test_dq_is_selfadjoint(ctx):
    basis = build_basis(30)
    assert dq_asymmetry(ctx, basis) <= 1e-12
    D = build_dq(ctx, basis)
    assert D.is_selfadjoint(1e-12)
    assert D.copies == 2


def test_triple_invariants(ctx):
    triple = suq2_triple(ctx, 20)
    assert triple.phase_residual() <= 1e-8
    assert triple.delta_commutator() <= 1e-12


@pytest.mark.parametrize("letter", ["a", "b", "c", "d"])
def test_twisted_commutators_stay_bounded(ctx, letter):
    g = NCPoly.gen(letter)
    low = suq2_triple(ctx, 20).theta_commutator_norm(g)
    high = suq2_triple(ctx, 30).theta_commutator_norm(g)
    assert 0.0 < high <= 1.2
    assert abs(high - low) <= 0.05 * high


def test_spin_one_unitary(ctx):
    u = corep_unitary(2, ctx)
    assert u.size == 3
    assert u.degree == 2
    assert unitarity_residual(u, ctx) <= 1e-10
    assert modular_check(u, ctx).weights2 == (-2, 0, 2)


def test_low_spin_unitaries(ctx):
    assert corep_unitary(0, ctx) == NCMatrix.identity(1)
    assert corep_unitary(1, ctx) == NCMatrix.from_words([["a", "b"], ["c", "d"]])
    with pytest.raises(ConfigurationError):
        corep_unitary(ctx.max_spin2 + 1, ctx)


def test_gamma_has_a_small_tail(ctx):
    value = suq2_triple(ctx, 40).gamma(NCPoly.gen("a"))
    assert np.isfinite(value.extrapolated)
    assert value.tail_estimate <= 1e-8


@pytest.mark.parametrize("x, y", [("a", "d"), ("b", "c"), ("c", "b"), ("ab", "cd")])
def test_alpha_forms_agree(ctx, x, y):
    alpha = suq2_triple(ctx, 40).alpha(normal_form(x), normal_form(y))
    assert alpha.difference <= 1e-8
    for l2, value in alpha.local_form.series.contributions.items():
        assert value == pytest.approx(alpha.trace_form.series.contributions[l2], abs=1e-9)


def test_cone_defect_vanishes_for_the_trivial_unitary(ctx):
    defect = suq2_triple(ctx, 20).cone_defect(corep_unitary(0, ctx))
    assert all(v == 0.0 for v in defect.series.contributions.values())


def test_cone_defect_of_the_fundamental_unitary(ctx):
    defect = suq2_triple(ctx, 20).cone_defect(corep_unitary(1, ctx))
    assert defect.tail_estimate <= 1e-6
    correction = defect.series.accelerated()
    assert correction == pytest.approx(-0.4487, abs=1e-3)
    assert float(closed_index(1, ctx)) + correction == pytest.approx(-1.0, abs=1e-3)


def test_local_cocycle_ignores_scalars(ctx):
    a, d = NCPoly.gen("a"), NCPoly.gen("d")
    shifted = local_cocycle(a + NCPoly.one(), d, ctx)
    assert shifted == pytest.approx(local_cocycle(a, d, ctx))


@pytest.mark.slow
def test_index_reproduces_the_closed_form(ctx):
    reports = run_experiment([0, 1, 2], ctx, L2=40)
    assert len(reports) == 3
    for report in reports:
        assert report.index_expected == pytest.approx(report.index_closed + report.cone_correction)
        assert report.abs_err <= 1e-4
        assert report.stable
        assert report.pairing_err <= 1e-4
    assert reports[0].cone_correction == pytest.approx(0.0, abs=1e-12)
    assert reports[1].index_numeric == pytest.approx(-1.0, abs=1e-3)


def test_index_far_from_the_expected_value_is_unstable(ctx):
    module = suq2_triple(ctx, 20).module()
    u = corep_unitary(1, ctx)
    report = toeplitz_index(module, u, ctx, closed=float(closed_index(1, ctx)), correction=0.0)
    assert report.abs_err > 0.4
    assert not report.stable


@pytest.mark.slow
def test_transgression_on_random_words(ctx):
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = normal_form(random_word(rng, 3))
        y = normal_form(random_word(rng, 3))
        assert transgression(x, y, ctx, 40).residual <= 1e-6


@pytest.mark.slow
def test_summability_ratio_approaches_q(ctx):
    report = summability_scan(1, ctx, [40])
    late = [r for l2, r in report.ratios.items() if l2 >= 30 and r is not None]
    assert late
    assert all(abs(r - ctx.q) <= 0.05 for r in late)
    assert report.verdict == "convergent"


def test_summability_needs_p_at_least_one(ctx):
    with pytest.raises(ConfigurationError):
        summability_scan(0.5, ctx, [10])
    with pytest.raises(ConfigurationError):
        summability_scan(1, ctx, [])


def test_summability_verdict():
    assert summability_verdict(LevelSeries({0: 1.0, 2: 0.5, 4: 0.25})) == "convergent"
    assert summability_verdict(LevelSeries({0: 1.0, 2: 1.0})) == "divergent-trend"
    assert summability_verdict(LevelSeries({0: 1.0})) == "undetermined"


def test_triple_rejects_empty_cutoff():
    with pytest.raises(ConfigurationError):
        suq2_triple(QContext(0.5), 0)


def test_odd_cocycle_residuals_shrink_with_the_cutoff(ctx):
    a, b, d = (NCPoly.gen(s) for s in "abd")
    chain = Chain.from_tensor([a, d])
    higher = Chain.from_tensor([a, b, d])
    low = cocycle_residuals(suq2_triple(ctx, 16).module(), chain, higher)
    high = cocycle_residuals(suq2_triple(ctx, 24).module(), chain, higher)
    assert high["cyclic"] <= low["cyclic"] + 1e-9
    assert high["boundary"] <= low["boundary"] + 1e-9
    with pytest.raises(ParityError):
        cocycle_residuals(suq2_triple(ctx, 16).module(), chain, chain)


def test_precision_reaches_scalars_but_not_operators():
    low, high = QContext(0.5, precision=53), QContext(0.5, precision=200)
    assert trace_r(low, 20).partial_sum == trace_r(high, 20).partial_sum
    with high.workprec():
        gap = abs(constant_C(high) - constant_C(low))
    assert 0 < gap < 1e-14
