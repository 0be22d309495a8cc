import numpy as np
import pytest

from capred import (
    AlgebraShape,
    CertificateError,
    DomainError,
    Element,
    HermitianBasis,
    PtpuMap,
    State,
    adjoint_map,
    compose_maps,
    coords_to_element,
    diagonal_projection,
    direct_sum,
    element_to_coords,
    haar_unitary,
    hs_inner,
    identity_map,
    make_classical_stochastic,
    make_convex_combination,
    make_depolarize_corner,
    make_pinching,
    make_unitary_conjugation,
    random_cp_map,
    random_hermitian,
    random_state,
    tensor_elements,
    tensor_product,
)
from conftest import diag_pinching, full_depolarize

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
SQ2 = np.sqrt(2)


def test_basis_ordering_m2():
    els = HermitianBasis.for_shape([2]).elements
    np.testing.assert_allclose(els[0].blocks[0], np.diag([1.0, 0.0]), atol=1e-15)
    np.testing.assert_allclose(els[1].blocks[0], np.diag([0.0, 1.0]), atol=1e-15)
    np.testing.assert_allclose(els[2].blocks[0], PAULI_X / SQ2, atol=1e-15)
    np.testing.assert_allclose(els[3].blocks[0],
                               np.array([[0, -1j], [1j, 0]]) / SQ2, atol=1e-15)


def test_basis_orthonormal():
    basis = HermitianBasis.for_shape([2, 3]).elements
    for i, x in enumerate(basis):
        for j, y in enumerate(basis):
            assert hs_inner(x, y) == pytest.approx(1.0 if i == j else 0.0, abs=1e-12)


def test_coords_roundtrip():
    rng = np.random.default_rng(4)
    shape = AlgebraShape([3, 2])
    for _ in range(20):
        a = random_hermitian(shape, rng)
        assert coords_to_element(shape, element_to_coords(a)).allclose(a, 1e-12)
    v = element_to_coords(random_hermitian(shape, rng))
    np.testing.assert_allclose(element_to_coords(coords_to_element(shape, v)), v, atol=1e-12)


def test_apply_identity_and_pinching():
    x = random_hermitian([2], 0)
    assert identity_map([2]).apply(x).allclose(x, 1e-12)
    pinch = diag_pinching(2)
    m = Element([2], [np.array([[0.3, 0.5 - 0.2j], [0.5 + 0.2j, 0.7]])])
    assert pinch.apply(m).allclose(Element([2], [np.diag([0.3, 0.7])]), 1e-12)
    # non-hermitian inputs go through the hermitian/antihermitian split
    nh = Element([2], [np.array([[0.0, 1.0], [0.0, 0.0]])])
    assert pinch.apply(nh).allclose(Element.zeros([2]), 1e-12)


def test_depolarize_sends_states_to_mixed():
    dep = full_depolarize(2)
    rng = np.random.default_rng(5)
    for _ in range(10):
        out = dep.apply(random_state([2], rng).element)
        assert out.allclose(0.5 * Element.identity([2]), 1e-10)


def test_pinching_validation_and_trace_preservation():
    with pytest.raises(DomainError):
        make_pinching([2], [0.5 * Element.identity([2]), 0.5 * Element.identity([2])])
    with pytest.raises(DomainError):
        make_pinching([2], [diagonal_projection([2], [0])])
    pinch = make_pinching([3], [diagonal_projection([3], [0, 1]),
                                diagonal_projection([3], [2])])
    rng = np.random.default_rng(6)
    for _ in range(100):
        s = random_state([3], rng)
        out = pinch.apply(s.element)
        assert out.trace().real == pytest.approx(1.0, abs=1e-12)
        State(out)  # positivity + trace within state tolerances


def test_pinching_kills_off_diagonal():
    pinch = diag_pinching(2)
    assert pinch.apply(Element([2], [PAULI_X])).allclose(Element.zeros([2]), 1e-12)


def test_classical_stochastic():
    ident = make_classical_stochastic(np.eye(2))
    assert ident.source == AlgebraShape([1, 1])
    np.testing.assert_allclose(ident.matrix, np.eye(2), atol=1e-12)
    ch = make_classical_stochastic([[0.9, 0.1], [0.1, 0.9]])
    point = Element([1, 1], [np.array([[1.0]]), np.array([[0.0]])])
    out = ch.apply(point)
    assert out.blocks[0][0, 0] == pytest.approx(0.9)
    assert out.blocks[1][0, 0] == pytest.approx(0.1)
    with pytest.raises(DomainError):
        make_classical_stochastic([[0.9, 0.2], [0.1, 0.8]])


def test_depolarize_corner_definition():
    e = diagonal_projection([3], [0, 1])
    dep = make_depolarize_corner([3], e)
    x = random_hermitian([3], 8)
    blk = x.blocks[0]
    expected = np.zeros((3, 3), dtype=complex)
    expected[2, 2] = blk[2, 2]
    expected[0, 0] = expected[1, 1] = (blk[0, 0] + blk[1, 1]) / 2
    assert dep.apply(x).allclose(Element([3], [expected]), 1e-10)
    with pytest.raises(DomainError):
        make_depolarize_corner([3], 0.3 * Element.identity([3]))


def test_convex_combination():
    pinch = diag_pinching(2)
    ident = identity_map([2])
    mix = make_convex_combination([(0.25, pinch), (0.75, ident)])
    np.testing.assert_allclose(mix.matrix, 0.25 * pinch.matrix + 0.75 * ident.matrix,
                               atol=1e-14)
    with pytest.raises(DomainError):
        make_convex_combination([(0.9, pinch), (0.2, ident)])


def test_compose_and_associativity():
    dep = full_depolarize(2)
    pinch = diag_pinching(2)
    both = compose_maps(dep, pinch)
    np.testing.assert_allclose(both.matrix, dep.matrix, atol=1e-12)
    u = make_unitary_conjugation([2], haar_unitary([2], 3))
    left = compose_maps(compose_maps(dep, pinch), u)
    right = compose_maps(dep, compose_maps(pinch, u))
    np.testing.assert_allclose(left.matrix, right.matrix, atol=1e-12)


def test_direct_sum_action():
    pinch = diag_pinching(2)
    ident = identity_map([1])
    both = direct_sum(pinch, ident)
    assert both.source == AlgebraShape([2, 1])
    x = Element([2, 1], [PAULI_X, np.array([[2.0]])])
    out = both.apply(x)
    assert out.allclose(Element([2, 1], [np.zeros((2, 2)), np.array([[2.0]])]), 1e-12)


def test_tensor_identity_maps():
    t = tensor_product(identity_map([2]), identity_map([2]))
    assert t.source == AlgebraShape([4])
    np.testing.assert_allclose(t.matrix, np.eye(16), atol=1e-12)


def test_tensor_acts_on_product_elements():
    pinch = diag_pinching(2)
    t = tensor_product(pinch, identity_map([2]))
    rng = np.random.default_rng(11)
    for _ in range(10):
        x = random_hermitian([2], rng)
        y = random_hermitian([2], rng)
        lhs = t.apply(tensor_elements(x, y))
        rhs = tensor_elements(pinch.apply(x), y)
        assert lhs.allclose(rhs, 1e-10)


def test_tensor_shape_ordering():
    t = tensor_product(identity_map([2, 1]), identity_map([3]))
    assert t.source == AlgebraShape([6, 3])


def test_tensor_rejects_unverified_positivity():
    # the transpose map is positive but not completely positive; its
    # superoperator flips the antisymmetric coordinate
    transpose = PtpuMap([2], [2], np.diag([1.0, 1.0, 1.0, -1.0]), "UserAsserted", "transpose")
    x = random_hermitian([2], 12)
    assert transpose.apply(x).allclose(Element([2], [x.blocks[0].T]), 1e-12)
    with pytest.raises(CertificateError):
        tensor_product(transpose, transpose)
    with pytest.raises(CertificateError):
        tensor_product(transpose, identity_map([2]))


def test_ptpu_validation_rejects_bad_maps():
    with pytest.raises(DomainError):
        PtpuMap([2], [2], np.zeros((4, 4)), "UserAsserted")  # not unital
    trace_swap = np.eye(4)
    trace_swap[0, 0] = 0.5
    with pytest.raises(DomainError):
        PtpuMap([2], [2], trace_swap, "UserAsserted")
    with pytest.raises(DomainError):
        PtpuMap([2], [2], np.eye(4), "NoSuchCertificate")
    # rank mismatch between source and target
    with pytest.raises(DomainError):
        PtpuMap([2], [3], np.zeros((9, 4)), "UserAsserted")


def test_ptpu_positivity_spot_check():
    # a unital trace-preserving matrix that is not positive: reflect all
    # off-diagonal coordinates too strongly
    bad = np.diag([1.0, 1.0, -1.2, 1.0])
    with pytest.raises(DomainError):
        PtpuMap([2], [2], bad, "UserAsserted")


def test_random_states_stay_states():
    rng = np.random.default_rng(13)
    for seed in range(5):
        phi = random_cp_map([2, 1], seed)
        for _ in range(20):
            out = phi.apply(random_state([2, 1], rng).element)
            State(out)


def test_trace_contraction_on_hermitians():
    # Schwarz-type inequality under the trace: ||phi(a)|| <= ||a||
    maps = [diag_pinching(3), full_depolarize(3), random_cp_map([3], 21)]
    rng = np.random.default_rng(14)
    for phi in maps:
        for _ in range(500):
            a = random_hermitian([3], rng)
            assert phi.apply(a).hs_norm() ** 2 <= a.hs_norm() ** 2 + 1e-9


def test_adjoint_properties():
    ident = identity_map([2])
    np.testing.assert_allclose(adjoint_map(ident).matrix, np.eye(4), atol=1e-14)
    pinch = diag_pinching(3)
    np.testing.assert_allclose(adjoint_map(pinch).matrix, pinch.matrix, atol=1e-12)
    u = haar_unitary([2], 17)
    conj = make_unitary_conjugation([2], u)
    adj = adjoint_map(conj)
    rng = np.random.default_rng(15)
    for _ in range(20):
        x = random_hermitian([2], rng)
        y = random_hermitian([2], rng)
        lhs = hs_inner(adj.apply(y), x)
        rhs = hs_inner(y, conj.apply(x))
        assert lhs == pytest.approx(rhs, abs=1e-10)
    # adjoint of conjugation by u is conjugation by u*
    conj_back = make_unitary_conjugation([2], u.adjoint())
    np.testing.assert_allclose(adj.matrix, conj_back.matrix, atol=1e-12)


def test_map_json_roundtrip():
    pinch = diag_pinching(2)
    back = PtpuMap.from_json(pinch.to_json())
    np.testing.assert_allclose(back.matrix, pinch.matrix, atol=1e-15)
    assert back.certificate == "Pinching"
    assert back.source == pinch.source
