import math

import numpy as np
import pytest

from smibzeros.lineariser import (
    StateSpaceModel,
    apply_avr,
    assemble_multimachine,
    finite_difference_jacobian,
    linearize_smib,
    smib_closed_form,
)
from smibzeros.netmodel import operating_point_at
from smibzeros.params import AvrParams, MachineParams
from smibzeros.validate import nonlinear_functions
from smibzeros.workflow import linear_model

from conftest import chain_net, random_point

STATES = ["delta:G", "omega:G", "Eq:G"]


def rows(model, out):
    return model.C[model.output_index(out)]


def rel(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)


def test_decoupled_case_eigenvalues():
    mp = MachineParams(M=0.02, D_m=0.01, T_do=7.0, x_d=1.8, x_d_prime=0.3)
    net = chain_net()
    op = operating_point_at(net, mp, 0.0, 1.1)
    s = smib_closed_form(net, mp, None, op, "2", "3")
    assert s.a23 == 0.0 and s.a31 == 0.0
    eig = np.sort_complex(np.linalg.eigvals(linearize_smib(net, mp, op).A))
    w = math.sqrt(s.a21 - s.a22**2 / 4)
    expected = np.sort_complex([-s.a33, -s.a22 / 2 + 1j * w, -s.a22 / 2 - 1j * w])
    np.testing.assert_allclose(eig, expected, rtol=1e-10)


def test_closed_form_matches_assembled_model(rng):
    worst = 0.0
    for _ in range(200):
        p = random_point(rng)
        m, s = p.model, p.smib()
        worst = max(worst, rel(m.A, s.A))
        b = m.B[:, m.input_index(f"P:{p.ctrl}")]
        worst = max(worst, rel(b, s.b_p))
        worst = max(worst, rel(rows(m, f"theta:{p.meas}"), s.c_theta))
        worst = max(worst, rel(rows(m, f"V:{p.meas}"), s.c_volt))
        D = m.D[:, m.input_index(f"P:{p.ctrl}")]
        worst = max(worst, abs(D[m.output_index(f"theta:{p.meas}")] - s.d) / abs(s.d))
        dv = D[m.output_index(f"V:{p.meas}")]
        worst = max(worst, abs(dv - s.dv) / max(abs(s.dv), abs(s.d)))
    assert worst <= 1e-9


def test_transfer_functions_agree(rng):
    for _ in range(20):
        p = random_point(rng)
        m, s = p.model, p.smib()
        for z in (0.3 + 2j, -0.2 + 9j, 4.0 - 1j):
            G_cf = s.c_theta @ np.linalg.solve(z * np.eye(3) - s.A, s.b_p) + s.d
            G = m.transfer(z, f"P:{p.ctrl}", f"theta:{p.meas}")
            assert abs(G - G_cf) <= 1e-10 * abs(G)


def test_zero_angle_collapses_injection_column():
    mp = MachineParams(M=0.02, D_m=0.0, T_do=7.0, x_d=1.8, x_d_prime=0.3)
    net = chain_net()
    op = operating_point_at(net, mp, 0.0, 1.1, K_A=50.0)
    s = smib_closed_form(net, mp, AvrParams(K_A=50.0), op, "2", "3")
    assert s.a23 == 0.0
    assert s.b3_avr == 0.0
    assert s.b3 == 0.0


def test_terminal_measurement_is_the_regulator_row(rng):
    p = random_point(rng, K_A=50.0)
    s = p.smib(meas="1")
    m0 = linearize_smib(p.net, p.machine, p.op)
    np.testing.assert_allclose(rows(m0, "V:1"), s.c_volt, rtol=1e-12, atol=1e-14)
    # a31/a33 carry exactly the regulator terms built from that row
    s0 = smib_closed_form(p.net, p.machine, None, p.op, "1", "1")
    k = 50.0 / p.machine.T_do
    assert s.a31 - s0.a31 == pytest.approx(k * s.c1v, rel=1e-12)
    assert s.a33 - s0.a33 == pytest.approx(k * s.c3v, rel=1e-12)


def test_avr_terms_enter_a31_a33(rng):
    p = random_point(rng, K_A=200.0)
    s = p.smib()
    s0 = smib_closed_form(p.net, p.machine, None, p.op, p.meas, p.ctrl)
    e1, b1, T = p.op.eps["1"], s.beta["1"], p.machine.T_do
    assert s.a31 - s0.a31 == pytest.approx(-200 / T * b1 * p.op.eq_prime * math.sin(e1), rel=1e-12)
    assert s.a33 - s0.a33 == pytest.approx(200 / T * b1 * math.cos(e1), rel=1e-12)


def test_zero_gain_regulator_is_identity(rng):
    p = random_point(rng)
    m = assemble_multimachine(p.net, {"G": p.machine}, p.op)
    m2 = apply_avr(m, AvrParams(K_A=0.0))
    assert np.array_equal(m.A, m2.A) and np.array_equal(m.B, m2.B)
    assert np.array_equal(m.C, m2.C) and np.array_equal(m.D, m2.D)


def test_state_matrix_affine_in_gain(rng):
    p = random_point(rng)
    m = assemble_multimachine(p.net, {"G": p.machine}, p.op)
    A = {k: apply_avr(m, AvrParams(K_A=k)).A for k in (0.0, 40.0, 80.0)}
    np.testing.assert_allclose(A[80.0] - A[40.0], A[40.0] - A[0.0], atol=1e-12 * np.max(np.abs(A[80.0])))


def test_beta_decreases_along_the_corridor(rng):
    p = random_point(rng)
    b = p.smib().beta
    assert 1 >= b["1"] > b["2"] > b["3"] >= 0


def test_labels_and_shapes(ref):
    m = linear_model(ref)
    assert list(m.states) == STATES
    assert m.inputs[:6] == ("P:1", "P:2", "P:3", "Q:1", "Q:2", "Q:3")
    assert {"Pm:G", "Ef:G", "upss:G"} <= set(m.inputs)
    assert m.outputs == ("theta:1", "theta:2", "theta:3", "V:1", "V:2", "V:3")
    with pytest.raises(ValueError):
        StateSpaceModel(m.A[:2], m.B, m.C, m.D, m.states, m.inputs, m.outputs)
    with pytest.raises(ValueError):
        StateSpaceModel(m.A * np.nan, m.B, m.C, m.D, m.states, m.inputs, m.outputs)


def test_json_round_trip_is_lossless(ref):
    m = linear_model(ref)
    m2 = StateSpaceModel.from_json(m.to_json())
    for a, b in ((m.A, m2.A), (m.B, m2.B), (m.C, m2.C), (m.D, m2.D)):
        assert np.array_equal(a, b)
    assert m2.states == m.states and m2.inputs == m.inputs and m2.outputs == m.outputs


def test_fd_jacobian_of_linear_map():
    M = np.array([[1.0, -2.0, 0.5], [3.0, 0.25, -1.0], [0.0, 4.0, 2.0]])
    J = finite_difference_jacobian(lambda x: M @ x, [0.1, -0.3, 2.0])
    np.testing.assert_allclose(J, M, rtol=1e-9, atol=1e-9)


def test_fd_jacobian_guards():
    with pytest.raises(ValueError):
        finite_difference_jacobian(lambda x: x, [0.0], h=1e-2)
    with pytest.raises(FloatingPointError), np.errstate(invalid="ignore"):
        finite_difference_jacobian(lambda x: np.sqrt(x - 1.0), [0.0])


@pytest.mark.parametrize("K_A", [0.0, 200.0])
def test_fd_jacobian_matches_state_matrix(ref, K_A):
    sf = ref.with_ka(K_A)
    f, _, x0, op = nonlinear_functions(sf, sf.ctrl, sf.meas)
    A_fd = finite_difference_jacobian(lambda x: f(x, np.zeros(2)), x0)
    A = linear_model(sf, op).A
    assert np.max(np.abs(f(x0, np.zeros(2)))) <= 1e-10
    assert np.max(np.abs(A - A_fd)) / np.max(np.abs(A)) <= 1e-5
