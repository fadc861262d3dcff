import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qtask.circuit import (
    Circuit,
    Gate,
    GateKind,
    Pauli,
    PrepLabel,
    basis_change,
    compose,
    new_circuit,
    prep_circuit,
)
from qtask.simulator import simulate

# Independent 2x2 matrices for oracle checks (not imported from the package).
SQ2 = 1 / np.sqrt(2)
H = np.array([[1, 1], [1, -1]]) * SQ2
X = np.array([[0, 1], [1, 0]], dtype=complex)
S = np.diag([1, 1j])
SDG = np.diag([1, -1j])


def test_new_circuit_empty():
    c = new_circuit(2)
    assert c.num_qubits == 2 and c.ops == [] and c.result_count == 0
    assert new_circuit(4).num_qubits == 4


@pytest.mark.parametrize("n", [0, -1])
def test_new_circuit_rejects_nonpositive(n):
    with pytest.raises(ValueError):
        new_circuit(n)


def test_append_basic():
    c = Circuit(2).append(Gate.h(0))
    assert c.ops == [Gate.h(0)]


def test_append_duplicate_qubit_two_qubit_gate():
    with pytest.raises(ValueError, match="duplicate qubit"):
        Gate.cnot(0, 0)


def test_append_duplicate_result_slot():
    c = Circuit(2).append(Gate.mz(1, 0))
    with pytest.raises(ValueError, match="slot 0 already written"):
        c.append(Gate.mz(0, 0))


def test_append_out_of_range_qubit():
    with pytest.raises(ValueError, match="out of range"):
        Circuit(2).append(Gate.h(2))


def test_gate_angle_and_slot_constraints():
    with pytest.raises(ValueError):
        Gate(GateKind.H, (0,), angle=0.5)
    with pytest.raises(ValueError):
        Gate(GateKind.RX, (0,))
    with pytest.raises(ValueError):
        Gate(GateKind.MZ, (0,))
    with pytest.raises(ValueError):
        Gate(GateKind.X, (0,), result_slot=0)


def test_compose_bell_prep_with_measure_both():
    prep = Circuit(2).append(Gate.h(0), Gate.cnot(0, 1))
    meas = Circuit(2).append(Gate.mz(0, 0), Gate.mz(1, 1))
    out = compose(prep, meas, [0, 1])
    assert out.ops == [Gate.h(0), Gate.cnot(0, 1), Gate.mz(0, 0), Gate.mz(1, 1)]


def test_compose_identity_case():
    c = Circuit(2).append(Gate.h(0), Gate.mz(0, 5), Gate.mz(1, 2))
    out = compose(Circuit(2), c, [0, 1])
    assert out == c


def test_compose_remaps_front_qubits():
    front = Circuit(1).append(Gate.x(0))
    out = compose(front, Circuit(2), [1])
    assert out.num_qubits == 2 and out.ops == [Gate.x(1)]


def test_compose_length_mismatch():
    with pytest.raises(ValueError, match="length"):
        compose(Circuit(2), Circuit(2), [0])


def test_compose_colliding_map_rejected():
    front = Circuit(2).append(Gate.cnot(0, 1))
    with pytest.raises(ValueError, match="duplicate qubit"):
        compose(front, Circuit(2), [1, 1])


def test_compose_renumbers_colliding_slots():
    front = Circuit(1).append(Gate.mz(0, 0))
    back = Circuit(2).append(Gate.mz(0, 0), Gate.mz(1, 3))
    out = compose(front, back, [0])
    slots = [g.result_slot for g in out.ops]
    assert slots == [0, 1, 4]  # back shifted past front's max slot
    assert len(set(slots)) == 3


PREP_VECTORS = {
    PrepLabel.ZERO: np.array([1, 0], dtype=complex),
    PrepLabel.ONE: X @ [1, 0],
    PrepLabel.PLUS: H @ [1, 0],
    PrepLabel.MINUS: H @ (X @ [1, 0]),
    PrepLabel.PLUS_I: S @ (H @ [1, 0]),
    PrepLabel.MINUS_I: SDG @ (H @ [1, 0]),
}


@pytest.mark.parametrize("label", list(PrepLabel))
def test_prep_circuit_states(label):
    state, _ = simulate(prep_circuit(label))
    np.testing.assert_allclose(state.amplitudes, PREP_VECTORS[label], atol=1e-12)


def test_prep_zero_is_empty():
    assert prep_circuit(PrepLabel.ZERO).ops == []


def test_basis_change_table():
    assert basis_change(Pauli.Z).gates == ()
    assert basis_change(Pauli.Z).needs_measurement
    assert [g.kind for g in basis_change(Pauli.X).gates] == [GateKind.H]
    assert [g.kind for g in basis_change(Pauli.Y).gates] == [GateKind.SDG, GateKind.H]
    ident = basis_change(Pauli.I)
    assert ident.gates == () and not ident.needs_measurement


# The +1 eigenstate of each measurable Pauli, as a prep label.
EIGENSTATE = {Pauli.X: PrepLabel.PLUS, Pauli.Y: PrepLabel.PLUS_I, Pauli.Z: PrepLabel.ZERO}


@pytest.mark.parametrize("obs", [Pauli.X, Pauli.Y, Pauli.Z])
def test_basis_change_roundtrip(obs):
    # preparing the +1 eigenstate then rotating to the Z basis must give 0
    circ = prep_circuit(EIGENSTATE[obs]).copy()
    for g in basis_change(obs).gates:
        circ.append(g)
    circ.append(Gate.mz(0, 0))
    _, dist = simulate(circ)
    assert dist.probabilities.get("0", 0.0) == pytest.approx(1.0, abs=1e-12)


# -- property tests -----------------------------------------------------------


@st.composite
def valid_gates(draw, num_qubits, start_slot=0):
    n_gates = draw(st.integers(0, 12))
    gates = []
    slot = start_slot
    for _ in range(n_gates):
        kind = draw(st.sampled_from(list(GateKind)))
        if kind in (GateKind.CNOT, GateKind.CZ):
            if num_qubits < 2:
                continue
            pair = draw(st.permutations(range(num_qubits)))[:2]
            gates.append(Gate(kind, tuple(pair)))
        elif kind is GateKind.MZ:
            q = draw(st.integers(0, num_qubits - 1))
            gates.append(Gate.mz(q, slot))
            slot += 1
        elif kind in (GateKind.RX, GateKind.RY, GateKind.RZ):
            q = draw(st.integers(0, num_qubits - 1))
            angle = draw(st.floats(-6.3, 6.3, allow_nan=False))
            gates.append(Gate(kind, (q,), angle=angle))
        else:
            q = draw(st.integers(0, num_qubits - 1))
            gates.append(Gate(kind, (q,)))
    return gates


@settings(max_examples=100, derandomize=True)
@given(st.data())
def test_append_preserves_invariants(data):
    n = data.draw(st.integers(1, 4))
    gates = data.draw(valid_gates(n))
    c = Circuit(n)
    for g in gates:
        c.append(g)
    slots = [g.result_slot for g in c.ops if g.kind is GateKind.MZ]
    assert len(slots) == len(set(slots)) == c.result_count
    assert all(q < c.num_qubits for g in c.ops for q in g.qubits)
    assert len(c.ops) == len(gates)


def _canonical_slots(circ):
    """Ops with result slots renumbered in first-appearance order."""
    seen = {}
    out = []
    for g in circ.ops:
        if g.kind is GateKind.MZ:
            idx = seen.setdefault(g.result_slot, len(seen))
            out.append((g.kind, g.qubits, None, idx))
        else:
            out.append((g.kind, g.qubits, g.angle, None))
    return out


def test_compose_associative_up_to_slot_renumbering():
    rng = np.random.default_rng(42)

    def random_circuit(n, slot_base):
        c = Circuit(n)
        slot = slot_base
        for _ in range(rng.integers(0, 8)):
            roll = rng.integers(0, 4)
            if roll == 0 and n >= 2:
                a, b = rng.permutation(n)[:2]
                c.append(Gate.cnot(int(a), int(b)))
            elif roll == 1:
                c.append(Gate.mz(int(rng.integers(0, n)), slot))
                slot += 1
            elif roll == 2:
                c.append(Gate.rz(int(rng.integers(0, n)), float(rng.uniform(-3, 3))))
            else:
                c.append(Gate.h(int(rng.integers(0, n))))
        return c

    for _ in range(50):
        na = int(rng.integers(1, 3))
        nb = int(rng.integers(na, 4))
        nc = int(rng.integers(nb, 4))
        a = random_circuit(na, slot_base=int(rng.integers(0, 3)))
        b = random_circuit(nb, slot_base=int(rng.integers(0, 3)))
        c = random_circuit(nc, slot_base=int(rng.integers(0, 3)))
        map_ab = [int(x) for x in rng.permutation(nb)[:na]]
        map_bc = [int(x) for x in rng.permutation(nc)[:nb]]
        left = compose(compose(a, b, map_ab), c, map_bc)
        right = compose(a, compose(b, c, map_bc), [map_bc[q] for q in map_ab])
        assert _canonical_slots(left) == _canonical_slots(right)
