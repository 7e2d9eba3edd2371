import itertools
import json
import math
import warnings

import numpy as np
import pytest

from cosparse import make_dif, make_family, make_mix, make_rand
from cosparse.dictionary import (
    AnalysisDictionary,
    Family,
    difference_operator,
    from_matrix,
    load_dictionary,
    save_dictionary,
    sidecar_path,
)
from cosparse.errors import InvalidArgument, InvalidInput
from cosparse.linalg import rank_of


def _oracle_dif(n):
    d = n * n
    rows = []
    for step in ((0, 1), (1, 0)):
        for i in range(n):
            for j in range(n):
                w = np.zeros(d)
                w[i * n + j] += 1
                w[((i + step[0]) % n) * n + (j + step[1]) % n] -= 1
                rows.append(w / math.sqrt(2))
    return np.array(rows)


def test_dif_matches_hand_built_operator(dif):
    assert dif.shape == (18, 9)
    np.testing.assert_array_equal(dif.omega, _oracle_dif(3))
    np.testing.assert_allclose(np.linalg.norm(dif.omega, axis=1), 1, atol=1e-12)


def test_dif_rows_are_cyclic_differences():
    m = difference_operator(3)
    assert np.all(m.sum(axis=1) == 0)
    assert np.all(np.count_nonzero(m, axis=1) == 2)


def test_dif_grid2_has_negation_pairs():
    dic = make_dif(2)
    pairs = [
        (a, b) for a, b in itertools.combinations(range(dic.p), 2)
        if np.linalg.matrix_rank(dic.omega[[a, b]]) < 2
    ]
    assert pairs
    for a, b in pairs:
        np.testing.assert_allclose(dic.omega[a], -dic.omega[b])


def test_rand_is_deterministic_and_seed_sensitive():
    a, b, c = make_rand(18, 9, 5), make_rand(18, 9, 5), make_rand(18, 9, 6)
    np.testing.assert_array_equal(a.omega, b.omega)
    assert not np.array_equal(a.omega, c.omega)


def test_rand_square_is_full_rank():
    assert rank_of(make_rand(7, 7, 1).omega) == 7


def test_mix_preserves_dif_dependencies(dif, mix):
    scale = mix.row_scale
    g = np.random.default_rng(0)
    for _ in range(50):
        lam = np.sort(g.choice(18, 7, replace=False))
        ns = np.linalg.svd(dif.omega[lam].T)[2]
        for gamma in ns[np.linalg.matrix_rank(dif.omega[lam]):]:
            np.testing.assert_allclose((gamma * scale[lam]) @ mix.omega[lam], 0, atol=1e-10)


def test_mix_is_deterministic():
    np.testing.assert_array_equal(make_mix(3, 4).omega, make_mix(3, 4).omega)


def test_invariants_enforced():
    with pytest.raises(InvalidArgument):
        AnalysisDictionary(np.eye(3) * 2)
    with pytest.raises(InvalidArgument):
        AnalysisDictionary(np.eye(3)[:2])
    with pytest.raises(InvalidArgument):
        AnalysisDictionary(np.eye(4), Family.DIF, grid_side=2)


def test_make_family_errors():
    with pytest.raises(InvalidArgument):
        make_family("dif", 10)
    with pytest.raises(InvalidArgument):
        make_family("mix", 9, 20)
    with pytest.raises(ValueError):
        make_family("nope", 9)
    assert make_family("rand", 9).shape == (18, 9)


def test_from_matrix_renormalizes_with_warning():
    with pytest.warns(UserWarning):
        dic = from_matrix(np.eye(3) * 3)
    np.testing.assert_allclose(dic.omega, np.eye(3))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        from_matrix(np.eye(3))


@pytest.mark.parametrize("m", [np.zeros((3, 3)), np.ones((2, 3)), np.array([[1.0, np.inf]] * 2), np.ones(3)])
def test_from_matrix_rejects(m):
    with pytest.raises(InvalidInput):
        from_matrix(m)


@pytest.mark.parametrize("ext", [".csv", ".json"])
def test_save_load_roundtrip(tmp_path, mix, ext):
    path = tmp_path / f"mix{ext}"
    side = save_dictionary(mix, path)
    assert side == sidecar_path(path)
    meta = json.loads(side.read_text())
    assert meta == {"family": "MIX", "d": 9, "p": 18, "seed": 0, "grid_side": 3}
    back = load_dictionary(path)
    np.testing.assert_array_equal(back.omega, mix.omega)
    assert back.family is Family.MIX and back.seed == 0


def test_load_without_sidecar_is_custom(tmp_path):
    from cosparse.linalg import save_matrix
    save_matrix(tmp_path / "c.csv", np.eye(3))
    assert load_dictionary(tmp_path / "c.csv").family is Family.CUSTOM


def test_sidecar_shape_mismatch(tmp_path, dif):
    path = tmp_path / "d.csv"
    save_dictionary(dif, path)
    sidecar_path(path).write_text(json.dumps({"family": "DIF", "d": 4, "p": 8, "grid_side": 2}))
    with pytest.raises(InvalidInput):
        load_dictionary(path)
