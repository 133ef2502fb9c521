import math

import numpy as np
import pytest
import scipy.sparse as sp

from ChernIndex import FredholmModule, LevelSeries, ModularGroup, NotModularError, NotUnitaryError, ParityError, \
    chern_eval, kernel_projection_drift, modular_check, phase_flow_residual, polar_identity_residuals, \
    resolvent_phase_residual, spectral_phase, unitarity_residual, unitary_chern
from CorepModels import TruncBasis, TruncOp
from QAlgebra import NCMatrix, NCPoly
from SUq2Triple import suq2_triple
from TwistedCyclic import Chain, gen_trace


def geometric(r, top=20):
    return LevelSeries({l2: r ** l2 for l2 in range(top + 1)})


def small_operator(seed=0):
    basis = TruncBasis(2)
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((basis.dim, basis.dim))
    return TruncOp(basis, sp.csr_matrix(m + m.T))


def test_geometric_series_is_extrapolated_exactly():
    series = geometric(0.5)
    assert series.extrapolated() == pytest.approx(2.0, abs=1e-12)
    assert series.tail_estimate() == pytest.approx(0.5 ** 21 / 0.5, rel=1e-9)
    assert series.decaying()


def test_ratios_compare_one_unit_of_spin():
    series = LevelSeries({0: 1.0, 1: 1.0, 2: 8.0, 3: 2.0}, {0: 1, 1: 4, 2: 16, 3: 4})
    assert series.ratio(2, normalized=False) == pytest.approx(8.0)
    assert series.ratio(2) == pytest.approx(0.5)
    assert series.ratio(1) is None
    assert set(series.ratios()) == {2, 3}


def test_non_decaying_series_has_an_infinite_tail():
    series = LevelSeries({l2: 1.0 for l2 in range(10)})
    assert math.isinf(series.tail_estimate())
    assert not series.decaying()


def test_single_parity_series():
    series = LevelSeries({1: 1.0, 3: 0.25, 5: 0.0625})
    assert series.tail_estimate() == pytest.approx(0.0625 * 0.25 / 0.75)


def test_spectral_phase_is_a_symmetry():
    D = small_operator()
    data = spectral_phase(D, _ctx())
    F = data.F.matrix.toarray()
    assert np.allclose(F @ F, np.eye(F.shape[0]))
    assert np.allclose(F, F.T)
    assert np.allclose(F @ D.matrix.toarray(), D.matrix.toarray() @ F)
    P = data.P.matrix.toarray()
    assert np.allclose(P @ P, P)
    assert resolvent_phase_residual(D, data.F) < 1e-10


def test_zero_modes_go_to_the_positive_part():
    basis = TruncBasis(1)
    D = TruncOp(basis, sp.diags([0.0, 1.0, -1.0, 2.0, 0.0]).tocsr())
    data = spectral_phase(D, _ctx())
    assert data.zero_modes == 2
    assert np.allclose(data.F.matrix.diagonal(), [1.0, 1.0, -1.0, 1.0, 1.0])
    assert len(data.columns(-1)) == 1


def test_phase_needs_selfadjoint_input():
    basis = TruncBasis(1)
    D = TruncOp(basis, sp.csr_matrix(np.triu(np.ones((basis.dim, basis.dim)))))
    with pytest.raises(ValueError):
        spectral_phase(D, _ctx())


def test_module_rejects_a_non_unitary_phase():
    basis = TruncBasis(1)
    F = TruncOp(basis, sp.identity(basis.dim, format="csr") * 2.0)
    with pytest.raises(ValueError):
        FredholmModule(basis, 1, F, np.ones(basis.dim), lambda m: None, _ctx())


def test_chern_parity_is_checked():
    basis = TruncBasis(1)
    F = TruncOp(basis, sp.identity(basis.dim, format="csr"))
    module = FredholmModule(basis, 1, F, np.ones(basis.dim), lambda m: None, _ctx())
    chain = Chain.from_tensor([NCPoly.gen("a"), NCPoly.gen("b"), NCPoly.gen("c")])
    with pytest.raises(ParityError):
        chern_eval(module, 2, chain)
    with pytest.raises(ParityError):
        chern_eval(module, 1, chain)


def test_fundamental_unitary_chern_chain(ctx):
    u = NCMatrix.from_words([["a", "b"], ["c", "d"]])
    assert unitarity_residual(u, ctx) <= 1e-14
    chain = unitary_chern(u, 1, ctx)
    assert chain.degree == 1
    assert not chain.is_zero()


def test_non_unitary_matrices_are_refused(ctx):
    a = NCPoly.gen("a")
    u = NCMatrix([[a, NCPoly.zero()], [NCPoly.zero(), a]])
    with pytest.raises(NotUnitaryError):
        unitary_chern(u, 1, ctx)


def test_fundamental_unitary_is_modular(ctx):
    u = NCMatrix.from_words([["a", "b"], ["c", "d"]])
    group = modular_check(u, ctx)
    assert group.weights2 == (-1, 1)
    q = ctx.q
    assert np.allclose(group.weight_vector(-1j), [q ** 0.5, q ** -0.5])
    assert group.group_residual(0.3, 1j) < 1e-12
    assert group.is_positive(0.7)


def test_inhomogeneous_columns_are_not_modular(ctx):
    x = NCPoly.gen("a") + NCPoly.gen("b")
    u = NCMatrix([[x, NCPoly.zero()], [NCPoly.zero(), NCPoly.one()]])
    with pytest.raises(NotModularError):
        modular_check(u, ctx)


def test_modular_group_composition(ctx):
    group = ModularGroup((-2, 0, 2), ctx)
    assert np.allclose(group(0.2) @ group(-0.2), np.eye(3))


def test_polar_identities():
    rng = np.random.default_rng(9)
    x = rng.standard_normal((5, 5))
    x[:, 0] = 0.0
    x /= 2 * np.linalg.norm(x, 2)
    for m in (1, 2, 3):
        r1, r2 = polar_identity_residuals(x, m)
        assert r1 < 1e-10 and r2 < 1e-10


def test_phase_of_a_weight_shift():
    x = np.zeros((2, 2))
    x[1, 0] = 0.3
    delta = np.array([1.0, 2.0])
    assert phase_flow_residual(x, delta, np.array([1.0, 2.0]), 0.7) < 1e-12
    assert phase_flow_residual(x, delta, np.array([1.0, 1.0]), 0.7) > 1e-3


def test_kernel_projection_commutes_with_the_flow_for_centralizer_elements():
    x = np.diag([1.0, 0.0, 2.0])
    delta = np.array([0.5, 1.0, 3.0])
    assert kernel_projection_drift(x, delta, 1.3) < 1e-12


def _ctx():
    from QScalar import QContext
    return QContext(0.5)


def test_modular_check_compares_the_group_with_the_flow(ctx, monkeypatch):
    u = NCMatrix.from_words([["a", "b"], ["c", "d"]])
    monkeypatch.setattr(ModularGroup, "__call__", lambda self, z: np.eye(len(self.weights2), dtype=complex))
    with pytest.raises(NotModularError):
        modular_check(u, ctx)


def test_modular_check_needs_positive_g(ctx, monkeypatch):
    u = NCMatrix.from_words([["a", "b"], ["c", "d"]])
    monkeypatch.setattr(ModularGroup, "is_positive", lambda self, t: False)
    with pytest.raises(NotModularError):
        modular_check(u, ctx)


def test_modular_check_needs_the_group_law(ctx, monkeypatch):
    u = NCMatrix.from_words([["a", "b"], ["c", "d"]])
    monkeypatch.setattr(ModularGroup, "group_residual", lambda self, z, w: 1.0)
    with pytest.raises(NotModularError):
        modular_check(u, ctx)


def test_levin_sums_a_polynomial_times_geometric_series():
    series = LevelSeries({l2: (l2 + 1) * 0.5 ** l2 for l2 in range(21)})
    assert len(series.unit_steps()) == 11
    assert series.unit_steps()[0] == pytest.approx(1.0)
    assert abs(series.accelerated() - 4.0) <= 1e-7
    assert abs(series.accelerated() - 4.0) < abs(series.total - 4.0)


def test_levin_falls_back_on_short_series():
    series = geometric(0.5, top=4)
    assert series.accelerated() == series.extrapolated()


def test_matrix_chains_are_evaluated_on_the_amplified_module(ctx):
    module = suq2_triple(ctx, 12).module()
    u = NCMatrix.from_words([["a", "b"], ["c", "d"]])
    matrix_chain = Chain.from_tensor([u, u.star()])
    direct = chern_eval(module, 1, matrix_chain)
    traced = chern_eval(module, 1, gen_trace(matrix_chain, reduced=True))
    assert direct.series.contributions == pytest.approx(traced.series.contributions, abs=1e-12)
    assert module.lifted(2) is module.lifted(2)


def test_degenerate_tensors_pair_to_zero(ctx):
    module = suq2_triple(ctx, 12).module()
    a, d = NCPoly.gen("a"), NCPoly.gen("d")
    chain = Chain.from_tensor([a, d])
    padded = chain + Chain.from_tensor([a, NCPoly.one()]) + Chain.from_tensor([NCPoly.one(), d])
    assert abs(chern_eval(module, 1, padded).value - chern_eval(module, 1, chain).value) <= 1e-12
