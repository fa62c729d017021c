import numpy as np
import pytest
from hypothesis import given, strategies as st

from quditgates.juggling import (Rotation, SwapSequence, apply_swaps, cyclic_shift_swaps,
                                 expected_length, normalize_shift, to_native_rotations)


def test_worked_example_d6_m2():
    seq = cyclic_shift_swaps(6, 2)
    assert len(seq) == 6
    assert apply_swaps(seq).tolist() == [2, 3, 4, 5, 0, 1]


def test_coprime_shift_uses_d_minus_one_swaps():
    seq = cyclic_shift_swaps(5, 1)
    assert len(seq) == 4
    assert apply_swaps(seq).tolist() == [1, 2, 3, 4, 0]


def test_identity_shift_is_empty():
    for d in (2, 5, 8):
        assert cyclic_shift_swaps(d, 0).swaps == ()
        assert cyclic_shift_swaps(d, 3 * d).swaps == ()


def test_normalize_shift_window():
    assert normalize_shift(6, 4) == -2
    assert normalize_shift(6, 3) == 3
    assert normalize_shift(5, -7) == -2
    with pytest.raises(ValueError):
        normalize_shift(1, 0)


@pytest.mark.parametrize("d", range(2, 17))
def test_exhaustive_small_dimensions(d):
    for m in range(-2 * d, 2 * d + 1):
        seq = cyclic_shift_swaps(d, m)
        assert apply_swaps(seq).tolist() == [(j + m) % d for j in range(d)]
        assert len(seq) == expected_length(d, m)
        assert all(1 <= s < d for s in seq.swaps)


@given(st.integers(2, 40), st.integers(-200, 200))
def test_reverse_sequence_inverts(d, m):
    seq = cyclic_shift_swaps(d, m)
    fwd = apply_swaps(seq)
    back = apply_swaps(seq.reversed())
    assert back[fwd].tolist() == list(range(d))


def test_apply_rejects_level_zero():
    with pytest.raises(ValueError):
        apply_swaps(SwapSequence(3, 1, (0,)))


def test_rotations_realise_shift_up_to_phases():
    d, m = 6, 2
    u = np.eye(d, dtype=complex)
    for r in to_native_rotations(cyclic_shift_swaps(d, m)):
        u = r.matrix(d) @ u
    perm = np.zeros((d, d))
    perm[(np.arange(d) + m) % d, np.arange(d)] = 1
    assert np.allclose(np.abs(u), perm)
    assert np.allclose(u.conj().T @ u, np.eye(d))


def test_rotation_pair_cancels():
    r_plus, r_minus = Rotation(3, "+x"), Rotation(3, "-x")
    assert np.allclose(r_minus.matrix(5) @ r_plus.matrix(5), np.eye(5))
    assert r_plus.text() == "ROT 0 3 +x pi"
