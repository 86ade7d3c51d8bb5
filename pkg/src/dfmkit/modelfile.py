"""JSON model files with Pauli-product operator expressions.

Example::

    {
      "n": 4,
      "H0": "0",
      "controls": [{"label": "x1", "op": "0.5*XI"}, {"label": "z2", "op": "0.5*IZ"}],
      "jumps": [{"label": "Z1", "op": "ZI", "rate": 1.0},
                {"label": "Z2", "op": "IZ", "rate": "stochastic"}],
      "initial_state": {"diag": [0.4, 0.3, 0.2, 0.1]},
      "mode": "paper_16"
    }

Operator expressions are sums of terms; a term is a product of scalars
(``0.5``, ``2j``, ``(1+2j)``) and Pauli words whose length equals the number
of qubits (``XI``, ``ZZ``).  ``0`` denotes the zero operator.  Rates are a
number, ``"stochastic"``, or ``{"times": [...], "values": [...]}``.
Initial states are ``{"diag": [...]}``, ``{"pure": "01"}`` (computational
basis label), ``{"vector": [[re, im], ...]}`` or ``{"matrix": [[[re, im], ...], ...]}``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .bloch import MODES, PAPER_16
from .errors import ParseError, ValidationError
from .lindblad import (
    LindbladModel,
    PiecewiseConstant,
    check_density,
    pauli_label_matrix,
    pauli_labels,
    pauli_product_basis,
    pure_state,
)

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?j?)"
    r"|(?P<paren>\([^()]*\))"
    r"|(?P<word>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*]))"
)

STOCHASTIC = "stochastic"


@dataclass
class ModelFile:
    model: LindbladModel
    stochastic: tuple[bool, ...] = ()
    initial_state: np.ndarray | None = None
    mode: str = PAPER_16
    expressions: dict[str, Any] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.model.n


def _num_qubits(n: int) -> int:
    q = n.bit_length() - 1
    if n < 2 or 2 ** q != n:
        raise ValidationError(f"operator expressions need n to be a power of two, got {n}")
    return q


def _tokenize(expr: str):
    pos = 0
    expr = expr.rstrip()
    while pos < len(expr):
        m = _TOKEN.match(expr, pos)
        if not m or m.end() == pos:
            bad = expr[pos:].strip().split()[0] if expr[pos:].strip() else expr[pos:]
            yield "bad", bad, pos + (len(expr[pos:]) - len(expr[pos:].lstrip()))
            return
        kind = m.lastgroup
        start = m.start(kind)
        yield kind, m.group(kind), start
        pos = m.end()


def parse_operator(expr: str, n: int, where: tuple[int, int] | None = None) -> np.ndarray:
    """Evaluate an operator expression to an n x n complex matrix.

    ``where`` is the (line, column) of the expression's first character in
    the enclosing file; error positions are reported relative to it.
    """
    q = _num_qubits(n)

    def fail(msg, col):
        if where is None:
            raise ParseError(msg, 1, col + 1)
        raise ParseError(msg, where[0], where[1] + col)

    if not isinstance(expr, str):
        raise ParseError(f"operator expression must be a string, got {type(expr).__name__}")
    tokens = list(_tokenize(expr))
    if not tokens:
        fail("empty operator expression", 0)
    total = np.zeros((n, n), dtype=complex)
    i = 0
    expect_term = True
    sign = 1.0
    while i < len(tokens):
        kind, text, col = tokens[i]
        if kind == "bad":
            fail(f"unknown token {text!r}", col)
        if expect_term:
            if kind == "op" and text in "+-":
                sign = -sign if text == "-" else sign
                i += 1
                continue
            coef: complex = sign
            mat = None
            while True:
                kind, text, col = tokens[i]
                if kind in ("num", "paren"):
                    try:
                        coef *= complex(text.replace(" ", ""))
                    except ValueError:
                        fail(f"invalid scalar {text!r}", col)
                elif kind == "word":
                    if len(text) != q or set(text) - set("IXYZ"):
                        fail(f"unknown operator token {text!r} (expected a {q}-letter Pauli word)", col)
                    w = pauli_label_matrix(text)
                    mat = w if mat is None else mat @ w
                elif kind == "bad":
                    fail(f"unknown token {text!r}", col)
                else:
                    fail(f"unexpected {text!r}", col)
                i += 1
                if i < len(tokens) and tokens[i][0] == "op" and tokens[i][1] == "*":
                    i += 1
                    if i >= len(tokens):
                        fail("expression ends after '*'", len(expr))
                    continue
                break
            total += coef * (np.eye(n) if mat is None else mat)
            expect_term = False
            sign = 1.0
        else:
            if kind != "op" or text not in "+-":
                fail(f"expected '+' or '-' before {text!r}", col)
            expect_term = True
            sign = -1.0 if text == "-" else 1.0
            i += 1
            if i >= len(tokens):
                fail("expression ends after an operator", len(expr))
    if expect_term:
        fail("incomplete expression", len(expr))
    return total


def _format_coef(c: complex) -> str:
    if c.imag == 0:
        return repr(float(c.real))
    if c.real == 0:
        return repr(float(c.imag)) + "j"
    return "(" + repr(complex(c))[1:-1] + ")"


def format_operator(op: np.ndarray) -> str:
    """Pauli expansion of ``op`` as a parseable expression (coefficients as exact reprs)."""
    n = op.shape[0]
    q = _num_qubits(n)
    terms = []
    for label, s in zip(pauli_labels(q), pauli_product_basis(q)):
        c = complex(np.trace(s @ op) / n)
        if c != 0:
            terms.append(f"{_format_coef(c)}*{label}")
    return " + ".join(terms) if terms else "0"


def _position_of(source: str, value: str) -> tuple[int, int] | None:
    """(line, column) of the first character of a JSON string literal's content."""
    needle = json.dumps(value)
    idx = source.find(needle)
    if idx < 0:
        return None
    line = source.count("\n", 0, idx) + 1
    col = idx - (source.rfind("\n", 0, idx) + 1) + 2
    return line, col


def _parse_rate(raw, label: str):
    if raw == STOCHASTIC:
        return 1.0, True
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return float(raw), False
    if isinstance(raw, dict) and set(raw) == {"times", "values"}:
        return PiecewiseConstant(np.array(raw["times"], float), np.array(raw["values"], float)), False
    raise ParseError(f"rate of jump {label!r} must be a number, 'stochastic' or {{times, values}}")


def _complex_array(raw) -> np.ndarray:
    arr = np.asarray(raw, dtype=float)
    if arr.shape[-1] != 2:
        raise ParseError("complex entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def _parse_state(raw, n: int) -> np.ndarray:
    if not isinstance(raw, dict) or len(raw) != 1:
        raise ParseError("initial_state must have exactly one of: diag, pure, vector, matrix")
    (kind, val), = raw.items()
    if kind == "diag":
        rho = np.diag(np.asarray(val, dtype=float)).astype(complex)
    elif kind == "pure":
        if not isinstance(val, str) or len(val) != _num_qubits(n) or set(val) - set("01"):
            raise ParseError(f"pure state label {val!r} must be a bit string of length log2(n)")
        rho = np.zeros((n, n), dtype=complex)
        k = int(val, 2)
        rho[k, k] = 1.0
    elif kind == "vector":
        rho = pure_state(_complex_array(val))
    elif kind == "matrix":
        rho = _complex_array(val)
    else:
        raise ParseError(f"unknown initial_state kind {kind!r}")
    if rho.shape != (n, n):
        raise ParseError(f"initial state has shape {rho.shape}, expected {(n, n)}")
    return check_density(rho)


_ALLOWED_KEYS = {"n", "H0", "controls", "jumps", "initial_state", "mode"}


def parse_model(text: str) -> ModelFile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise ParseError("model file must be a JSON object")
    unknown = set(doc) - _ALLOWED_KEYS
    if unknown:
        raise ParseError(f"unknown keys {sorted(unknown)}")
    if "n" not in doc:
        raise ParseError("missing required key 'n'")
    n = doc["n"]
    if not isinstance(n, int) or n < 2:
        raise ParseError("'n' must be an integer >= 2")

    def op(expr):
        return parse_operator(expr, n, _position_of(text, expr) if isinstance(expr, str) else None)

    h0_expr = doc.get("H0", "0")
    h0 = op(h0_expr)
    controls, jumps, rates, stoch = [], [], [], []
    for entry in doc.get("controls", []):
        if not isinstance(entry, dict) or set(entry) != {"label", "op"}:
            raise ParseError("each control needs exactly 'label' and 'op'")
        controls.append((entry["label"], op(entry["op"])))
    for entry in doc.get("jumps", []):
        if not isinstance(entry, dict) or not {"label", "op"} <= set(entry) <= {"label", "op", "rate"}:
            raise ParseError("each jump needs 'label', 'op' and optionally 'rate'")
        jumps.append((entry["label"], op(entry["op"])))
        r, s = _parse_rate(entry.get("rate", 1.0), entry["label"])
        rates.append(r)
        stoch.append(s)
    mode = doc.get("mode", PAPER_16)
    if mode not in MODES:
        raise ParseError(f"unknown coordinate mode {mode!r}")
    try:
        model = LindbladModel(h0, tuple(controls), tuple(jumps), tuple(rates))
        state = _parse_state(doc["initial_state"], n) if "initial_state" in doc else None
    except ValidationError as exc:
        raise ParseError(str(exc)) from None
    return ModelFile(model, tuple(stoch), state, mode, doc)


def load_model(path: str | Path) -> ModelFile:
    return parse_model(Path(path).read_text())


def dump_model(mf: ModelFile) -> dict:
    m = mf.model
    jumps = []
    for (label, f), rate, st in zip(m.jumps, m.rates, mf.stochastic or (False,) * len(m.jumps)):
        if st:
            r = STOCHASTIC
        elif isinstance(rate, PiecewiseConstant):
            r = {"times": rate.times.tolist(), "values": rate.values.tolist()}
        else:
            r = float(rate)
        jumps.append({"label": label, "op": format_operator(f), "rate": r})
    doc = {
        "n": m.n,
        "H0": format_operator(m.H0),
        "controls": [{"label": lab, "op": format_operator(h)} for lab, h in m.controls],
        "jumps": jumps,
        "mode": mf.mode,
    }
    if mf.initial_state is not None:
        rho = mf.initial_state
        doc["initial_state"] = {"matrix": [[[float(z.real), float(z.imag)] for z in row] for row in rho]}
    return doc


def models_equal(a: ModelFile, b: ModelFile, atol: float = 1e-14) -> bool:
    ma, mb = a.model, b.model
    if ma.n != mb.n or ma.control_labels != mb.control_labels or ma.jump_labels != mb.jump_labels:
        return False
    ops_a = [ma.H0, *[h for _, h in ma.controls], *[f for _, f in ma.jumps]]
    ops_b = [mb.H0, *[h for _, h in mb.controls], *[f for _, f in mb.jumps]]
    if any(not np.allclose(x, y, rtol=0, atol=atol) for x, y in zip(ops_a, ops_b)):
        return False
    if tuple(a.stochastic) != tuple(b.stochastic) or a.mode != b.mode:
        return False
    for ra, rb in zip(ma.rates, mb.rates):
        if isinstance(ra, PiecewiseConstant) != isinstance(rb, PiecewiseConstant):
            return False
        if isinstance(ra, PiecewiseConstant):
            if not (np.array_equal(ra.times, rb.times) and np.array_equal(ra.values, rb.values)):
                return False
        elif ra != rb:
            return False
    if (a.initial_state is None) != (b.initial_state is None):
        return False
    return a.initial_state is None or np.allclose(a.initial_state, b.initial_state, rtol=0, atol=atol)
