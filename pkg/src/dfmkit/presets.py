"""Built-in models."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .lindblad import LindbladModel, pauli_label_matrix

TWO_QUBIT_DEPHASING = "two-qubit-dephasing"
SINGLE_QUBIT_DEPHASING = "single-qubit-dephasing"


def two_qubit_dephasing(rates=(1.0, 1.0)) -> LindbladModel:
    """Two independently dephasing qubits, no drift, full local control.

    Controls are X_a/2, Y_a/2, Z_a/2 on each qubit a (six knobs, labels
    ``x1, y1, z1, x2, y2, z2``); jumps are Z_1 = Z (x) I and Z_2 = I (x) Z.
    """
    controls = []
    for q in (1, 2):
        for axis in "XYZ":
            label = axis + "I" if q == 1 else "I" + axis
            controls.append((f"{axis.lower()}{q}", 0.5 * pauli_label_matrix(label)))
    jumps = [("Z1", pauli_label_matrix("ZI")), ("Z2", pauli_label_matrix("IZ"))]
    return LindbladModel(np.zeros((4, 4), dtype=complex), tuple(controls), tuple(jumps), tuple(rates))


def single_qubit_dephasing(rate: float = 1.0) -> LindbladModel:
    return LindbladModel(np.zeros((2, 2), dtype=complex), (), (("Z", pauli_label_matrix("Z")),), (rate,))


PRESETS = {
    TWO_QUBIT_DEPHASING: two_qubit_dephasing,
    SINGLE_QUBIT_DEPHASING: single_qubit_dephasing,
}

# Default initial states used by the CLI when a preset is simulated.
PRESET_INITIAL_STATES = {
    TWO_QUBIT_DEPHASING: np.diag([0.4, 0.3, 0.2, 0.1]).astype(complex),
    SINGLE_QUBIT_DEPHASING: np.full((2, 2), 0.5, dtype=complex),
}


def get_preset(name: str) -> LindbladModel:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValidationError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}") from None
