"""Experiment configuration: schema validation and conversion to library objects."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np

from ._validation import ConfigurationError
from .adapted import BoundaryOperator1D, conormal_data, mode_split, shift_to_invertible
from .bconds import PseudoLocalBC, aps, direct_sum, graph_bc, local_bc, matching
from .indexlab import DEFAULT_GAP_THRESHOLD, DEFAULT_SVD_TOL, doubled_split
from .symbolalg import (
    DEFAULT_SPHERE_SAMPLES,
    LinearSymbol,
    Metric,
    dirac_symbol,
    forms_symbol,
    pauli_symbol,
)

__all__ = [
    "DEFAULT_TOLERANCES",
    "ExperimentConfig",
    "load_schema",
    "parse_config",
    "load_config",
    "complex_matrix",
]

DEFAULT_TOLERANCES = {
    "sphere_samples": DEFAULT_SPHERE_SAMPLES,
    "symbol_tol": 1e-9,
    "clifford_tol": 1e-10,
    "identity_tol": 1e-12,
    "eigen_tol": 1e-9,
    "realpart_tol": 1e-10,
    "svd_tol": DEFAULT_SVD_TOL,
    "gap_threshold": DEFAULT_GAP_THRESHOLD,
    "min_order": 1.9,
    "square_function_rtol": 0.05,
}

DEFAULT_MODEL = {"L": 1.0, "K": 4, "N": 40}


def load_schema(name="config.schema.json"):
    return json.loads(resources.files("ellbvp").joinpath("schema", name).read_text())


def complex_matrix(data, name="matrix"):
    """``[[[re, im], ...], ...]`` to a complex array; ragged rows are rejected."""
    widths = {len(row) for row in data}
    if len(widths) != 1:
        raise ConfigurationError(f"{name}: rows have different lengths {sorted(widths)}")
    arr = np.asarray(data, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def complex_vector(data):
    arr = np.asarray(data, dtype=float)
    return arr[:, 0] + 1j * arr[:, 1]


def _real_matrix(data, name):
    widths = {len(row) for row in data}
    if len(widths) != 1:
        raise ConfigurationError(f"{name}: rows have different lengths {sorted(widths)}")
    return np.asarray(data, dtype=float)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    raw: dict
    sha256: str
    tolerances: dict

    def section(self, name):
        return self.raw.get(name, {})

    @property
    def model_params(self):
        out = dict(DEFAULT_MODEL)
        out.update(self.section("model"))
        return out

    # operator, metric, conormal ------------------------------------------------------

    def symbol(self):
        entry = self.raw.get("operator")
        if entry is None:
            raise ConfigurationError("this experiment needs an 'operator' section")
        if "coeffs" in entry:
            sym = LinearSymbol(tuple(complex_matrix(c, f"operator.coeffs[{i}]") for i, c in enumerate(entry["coeffs"])))
            if "n" in entry and entry["n"] != sym.n:
                raise ConfigurationError(f"operator.n = {entry['n']} but {sym.n} coefficient matrices were given")
            return sym
        builders = {"pauli": pauli_symbol, "clifford": dirac_symbol, "forms": forms_symbol}
        return builders[entry["builtin"]](entry["n"])

    def metric(self, n):
        if "metric" not in self.raw:
            return Metric.identity(n)
        g = _real_matrix(self.raw["metric"], "metric")
        if g.shape != (n, n):
            raise ConfigurationError(f"metric must be {n}x{n}, got {g.shape}")
        return Metric(g)

    def conormal(self, symbol):
        idx = self.raw.get("conormal_index", 0)
        if idx >= symbol.n:
            raise ConfigurationError(f"conormal_index {idx} out of range for n = {symbol.n}")
        tau = np.zeros(symbol.n)
        tau[idx] = 1.0
        return conormal_data(symbol, tau)

    # boundary operator -----------------------------------------------------------------

    def boundary_operator(self):
        """``(A, sigma0)``; from explicit coefficients or from a 2-dimensional operator."""
        entry = self.section("boundary_operator")
        shift = float(entry.get("shift", 0.0))
        if "a" in entry:
            a = complex_matrix(entry["a"], "boundary_operator.a")
            b = complex_matrix(entry["b"], "boundary_operator.b") if "b" in entry else np.zeros_like(a)
            s0 = complex_matrix(entry["sigma0"], "boundary_operator.sigma0") if "sigma0" in entry else np.eye(a.shape[0])
            A = BoundaryOperator1D(a, b, shift)
        elif "operator" in self.raw:
            sym = self.symbol()
            if sym.n != 2:
                raise ConfigurationError("deriving a circle boundary operator needs a 2-dimensional operator")
            con = self.conormal(sym)
            tangent = np.array([con.tau[1], -con.tau[0]])
            b = complex_matrix(entry["b"], "boundary_operator.b") if "b" in entry else None
            A = BoundaryOperator1D.from_symbol(sym, con, tangent, b=b, shift=shift)
            s0 = np.asarray(con.sigma0)
            if "sigma0" in entry:
                raise ConfigurationError("sigma0 is derived from the operator; do not give both")
        else:
            raise ConfigurationError("give boundary_operator.a/b or a 2-dimensional operator")
        if s0.shape != A.a.shape:
            raise ConfigurationError(f"sigma0 has shape {s0.shape}, expected {A.a.shape}")
        if entry.get("auto_shift", False):
            A = shift_to_invertible(A, self.model_params["K"], self.tolerances["realpart_tol"])
        return A, s0

    # boundary conditions ---------------------------------------------------------------

    def _end(self, entry, A, K, tol):
        splits = mode_split(A, K, tol)
        kind = entry["type"]
        if kind == "aps":
            return aps(splits)
        if kind == "local":
            if "projector" not in entry:
                raise ConfigurationError("local end condition needs 'projector'")
            return local_bc(complex_matrix(entry["projector"], "projector")).to_graph(splits)
        plus = entry.get("projector_plus")
        minus = entry.get("projector_minus")
        if plus is None or minus is None:
            raise ConfigurationError("pseudolocal end condition needs projector_plus and projector_minus")
        Pp = complex_matrix(plus, "projector_plus")
        Pm = complex_matrix(minus, "projector_minus")
        zero = complex_matrix(entry["zero_mode"], "zero_mode") if "zero_mode" in entry else None
        pl = PseudoLocalBC(lambda xi: Pp if xi[0] > 0 else Pm, zero_mode=zero)
        return pl.to_graph(splits)

    def boundary_condition(self, A):
        """Condition on the doubled boundary of the cylinder."""
        entry = self.raw.get("boundary_condition", {"type": "aps"})
        K = self.model_params["K"]
        tol = self.tolerances["realpart_tol"]
        kind = entry["type"]
        extra = {key for key in entry if key != "type"}
        allowed = {"aps": set(), "matching": set(), "graph": {"w_plus", "w_minus", "g"}, "ends": {"left", "right"}}
        if extra - allowed[kind]:
            raise ConfigurationError(f"boundary_condition of type {kind!r} does not take {sorted(extra - allowed[kind])}")
        if kind == "aps":
            return aps(doubled_split(A, K, tol))
        if kind == "matching":
            return matching(A, K, tol)
        if kind == "ends":
            left = self._end(entry.get("left", {"type": "aps"}), A, K, tol)
            right = self._end(entry.get("right", {"type": "aps"}), A.negated(), K, tol)
            return direct_sum(left, right)
        r = A.rank
        splits = doubled_split(A, K, tol)
        w_plus = self._corrections(entry.get("w_plus", []), r, K)
        w_minus = self._corrections(entry.get("w_minus", []), r, K)
        g_ops = {}
        if "g" in entry:
            G = complex_matrix(entry["g"], "boundary_condition.g")
            if G.shape != (2 * r, 2 * r):
                raise ConfigurationError(f"boundary_condition.g must be {2 * r}x{2 * r} on the doubled fiber")
            g_ops = {k: G for k in splits}
        return graph_bc(splits, w_plus, w_minus, g_ops).validate()

    @staticmethod
    def _corrections(items, r, K):
        out = {}
        for i, item in enumerate(items):
            k = item["mode"]
            if abs(k) > K:
                raise ConfigurationError(f"correction {i} uses mode {k} outside the cutoff K = {K}")
            vec = complex_vector(item["vector"])
            if vec.shape[0] != r:
                raise ConfigurationError(f"correction {i} must have length {r}")
            full = np.zeros(2 * r, dtype=complex)
            if item.get("end", "left") == "left":
                full[:r] = vec
            else:
                full[r:] = vec
            out.setdefault(k, []).append(full)
        return {k: np.array(v).T for k, v in out.items()}


def parse_config(raw):
    """Validate a decoded JSON object against the schema and wrap it."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigurationError(f"config invalid at {path}: {err.message}")
    tolerances = dict(DEFAULT_TOLERANCES)
    tolerances.update(raw.get("tolerances", {}))
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return ExperimentConfig(raw["kind"], raw, hashlib.sha256(canonical).hexdigest(), tolerances)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    return parse_config(raw)
