"""Visual bank EMA updates, attention alignment and scatteredness."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from protoalign import autodiff as ad
from protoalign import rng as rng_mod
from protoalign.errors import DegenerateInputError, DiagnosticError, ParameterError, ValidationError
from protoalign.visual import GAParams, VisualBank, bank_update, global_align, scatteredness, visual_probs


def test_bank_starts_at_zero():
    bank = VisualBank(4, 3)
    assert not bank.updated.any()
    np.testing.assert_array_equal(bank.rows, 0.0)


def test_first_update_is_normalized_embedding():
    bank = VisualBank(4, 2, alpha=0.9)
    bank_update(bank, 1, np.array([3.0, 4.0]))
    np.testing.assert_allclose(bank.rows[1], [0.6, 0.8], atol=1e-12)


def test_update_fixed_point():
    bank = VisualBank(2, 3, alpha=0.7)
    u = np.array([1.0, 0.0, 0.0])
    bank_update(bank, 0, u)
    bank_update(bank, 0, 5.0 * u)  # same direction, any scale
    np.testing.assert_allclose(bank.rows[0], u, atol=1e-12)


def test_alpha_one_overwrites_history():
    bank = VisualBank(2, 2, alpha=1.0)
    bank_update(bank, 0, np.array([1.0, 0.0]))
    bank_update(bank, 0, np.array([0.0, 2.0]))
    np.testing.assert_allclose(bank.rows[0], [0.0, 1.0], atol=1e-12)


def test_update_touches_exactly_one_row():
    bank = VisualBank(5, 4, alpha=0.5)
    gen = rng_mod.stream(0, "bank")
    for c in range(5):
        bank_update(bank, c, gen.standard_normal(4))
    before = bank.rows.copy()
    bank_update(bank, 2, gen.standard_normal(4))
    changed = np.any(bank.rows != before, axis=1)
    assert changed[2]
    assert not changed[[0, 1, 3, 4]].any()


def test_update_degenerate_embedding():
    bank = VisualBank(2, 2)
    with pytest.raises(DegenerateInputError):
        bank_update(bank, 0, np.zeros(2))


def test_update_invalid_class():
    bank = VisualBank(2, 2)
    with pytest.raises(ValidationError):
        bank_update(bank, 5, np.ones(2))


def test_bad_alpha_rejected():
    with pytest.raises(ParameterError):
        VisualBank(2, 2, alpha=0.0)
    with pytest.raises(ParameterError):
        VisualBank(2, 2, alpha=1.5)


@given(st.integers(0, 2**31), st.integers(1, 200))
@settings(max_examples=25, deadline=None)
def test_updated_rows_unit_norm_property(seed, n_updates):
    gen = np.random.default_rng(seed)
    bank = VisualBank(6, 5, alpha=float(gen.uniform(0.05, 1.0)))
    for _ in range(n_updates):
        bank_update(bank, int(gen.integers(6)), gen.standard_normal(5))
    norms = np.linalg.norm(bank.rows, axis=1)
    for c in range(6):
        if bank.updated[c]:
            assert abs(norms[c] - 1) < 1e-5
        else:
            assert norms[c] == 0.0


def warmed_bank(n_classes=4, dim=6, seed=0):
    bank = VisualBank(n_classes, dim)
    gen = rng_mod.stream(seed, "warm")
    for c in range(n_classes):
        bank_update(bank, c, gen.standard_normal(dim))
    return bank


def test_global_align_identity_at_init():
    bank = warmed_bank()
    params = GAParams.create(6, rng_mod.stream(1, "ga"))
    z = ad.Tensor(np.array([1.0, -2.0, 0.5, 0.0, 3.0, 1.0]))
    z_star = global_align(z, bank, params)
    np.testing.assert_array_equal(z_star.data, z.data)  # w_o is zero at init


def test_global_align_single_row_attention_is_one():
    bank = warmed_bank(n_classes=1)
    params = GAParams.create(6, rng_mod.stream(2, "ga"))
    params.w_o.data = rng_mod.stream(3, "wo").standard_normal(params.w_o.data.shape)
    z = ad.Tensor(np.ones(6))
    # with one bank row, attention weighs it fully: z* = z + (V W_v) W_o
    expected = z.data + (bank.rows @ params.w_v.data @ params.w_o.data)[0]
    np.testing.assert_allclose(global_align(z, bank, params).data, expected, atol=1e-12)


def test_global_align_gradients_match_finite_difference():
    bank = warmed_bank()
    gen = rng_mod.stream(4, "ga")
    params = GAParams.create(6, gen, reduced_dim=3)
    params.w_o.data = gen.standard_normal(params.w_o.data.shape) * 0.3
    z0 = gen.standard_normal(6)

    def loss_fn():
        z_star = global_align(ad.Tensor(z0), bank, params)
        return ad.nll_from_probs(visual_probs(z_star, bank, 0.5), 2)

    assert ad.grad_check(loss_fn, params.parameters()) < 1e-4


def test_visual_probs_argmax_at_matching_row():
    bank = VisualBank(3, 3)
    for c, v in enumerate(np.eye(3)):
        bank_update(bank, c, v)
    p = visual_probs(ad.Tensor(bank.rows[1].copy()), bank, 0.1)
    assert np.argmax(p.data) == 1


def test_visual_probs_uniform_for_identical_rows():
    bank = VisualBank(4, 3)
    for c in range(4):
        bank_update(bank, c, np.array([1.0, 1.0, 0.0]))
    p = visual_probs(ad.Tensor(np.array([0.3, -0.2, 0.9])), bank, 1.0)
    np.testing.assert_allclose(p.data, 0.25, atol=1e-9)


def test_visual_probs_derived_distances():
    # rows engineered so distances from the query are exactly [0, 1, 2]
    bank = VisualBank(3, 2)
    bank.load_rows(np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]]))
    z = ad.Tensor(np.array([1.0, 0.0]))
    d = ad.row_distances(z, bank.rows + np.array([[0.0, 0.0], [0.0, 1.0], [0.0, 2.0]]))
    p = ad.distance_softmax(d, 1.0)
    np.testing.assert_allclose(p.data, [0.66524, 0.24473, 0.09003], atol=5e-6)


def test_probs_sum_and_rank_invariance():
    bank = warmed_bank(5, 4, seed=9)
    z = ad.Tensor(rng_mod.stream(10, "z").standard_normal(4))
    dists = np.linalg.norm(bank.rows - z.data, axis=1)
    for tau in (0.01, 0.1, 1.0, 10.0):
        p = visual_probs(z, bank, tau).data
        assert abs(p.sum() - 1) < 1e-6
        assert np.argmax(p) == np.argmin(dists)


def test_scatteredness_orthogonal_rows():
    bank = VisualBank(2, 2)
    bank_update(bank, 0, np.array([1.0, 0.0]))
    bank_update(bank, 1, np.array([0.0, 1.0]))
    assert scatteredness(bank, [0, 1]) == pytest.approx(np.sqrt(2), abs=1e-9)


def test_scatteredness_identical_rows_zero():
    bank = VisualBank(3, 2)
    for c in range(3):
        bank_update(bank, c, np.array([1.0, 1.0]))
    assert scatteredness(bank, [0, 1, 2]) == pytest.approx(0.0, abs=1e-12)


def test_scatteredness_requires_updated_rows():
    bank = VisualBank(3, 2)
    bank_update(bank, 0, np.ones(2))
    with pytest.raises(DiagnosticError):
        scatteredness(bank, [0, 1])


def test_scatteredness_bounded_for_unit_rows():
    bank = warmed_bank(8, 5, seed=11)
    value = scatteredness(bank, range(8))
    assert 0.0 <= value <= 2.0
