"""Command line entry point: ``ellbvp CONFIG [--json-out PATH] [--threads N] [--seed S]``.

Exit codes: 0 when every verdict passes, 1 on any FAIL or UNRELIABLE verdict,
2 on a configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from ._validation import ConfigurationError, NotEllipticError, NotInvertibleError
from .adapted import adapted_symbol, mode_split
from .bconds import aps, graph_bc, local_interchange_check, ls_check
from .config import complex_matrix, load_config
from .indexlab import (
    CylinderModel,
    check_deformation,
    check_matching,
    doubled_split,
    extension_semigroup_check,
    greens_convergence,
    numerical_index,
    observed_order,
    square_function_check,
)
from .raritaschwinger import build_rs, expected_gram_spectrum, rs_linear_symbol, rs_symbol
from .report import RunReport, Verdict, emit_report
from .symbolalg import (
    Metric,
    check_ellipticity,
    clifford_failures,
    cosphere_samples,
    forms_tangential_projector,
)

__all__ = ["main", "run", "run_config", "emit_report", "EXPERIMENTS"]


# experiments -----------------------------------------------------------------------------


def _check_symbol(cfg, workers):
    tol = cfg.tolerances
    expect = cfg.section("expect")
    sym = cfg.symbol()
    metric = cfg.metric(sym.n)
    rep = check_ellipticity(sym, metric, tol["sphere_samples"], tol["symbol_tol"])
    verdicts = {
        "elliptic": Verdict.of(
            rep.elliptic == expect.get("elliptic", True),
            min_sv=rep.min_sv, tolerance=rep.tolerance, witness_xi=rep.witness_xi,
        ),
        "completeness_bound": Verdict.of(
            "norm_bound_C" not in expect or abs(rep.norm_bound_C - expect["norm_bound_C"]) <= 1e-6,
            C=rep.norm_bound_C, samples=rep.samples,
        ),
    }
    if "dirac_type" in expect:
        fails = clifford_failures(sym, metric, tol["clifford_tol"]) if sym.is_square else []
        verdicts["dirac_type"] = Verdict.of(
            rep.dirac_type == expect["dirac_type"],
            dirac_type=rep.dirac_type, failing_pairs=[[i, j, d] for i, j, d in fails],
        )
    evidence = {
        "elliptic": rep.elliptic,
        "dirac_type": rep.dirac_type,
        "norm_bound_C": rep.norm_bound_C,
        "min_sv": rep.min_sv,
        "witness_xi": rep.witness_xi,
        "note": rep.note,
    }
    return verdicts, evidence


def _rs_verify(cfg, workers):
    tol = cfg.tolerances
    if "operator" in cfg.raw:
        seed = cfg.symbol()
        metric = cfg.metric(seed.n)
    else:
        raise ConfigurationError("rs-verify needs an operator (for example builtin clifford with n >= 3)")
    data = build_rs(seed, metric)
    devs = data.identity_deviations()
    count = cfg.section("rs").get("samples", 64)
    xis = cosphere_samples(Metric.identity(data.n), count)
    expected = expected_gram_spectrum(data.n, data.m, 1.0)
    worst = 0.0
    for xi in xis:
        worst = max(worst, float(np.abs(np.sort(rs_symbol(data, xi).gram_eigs) - expected).max()))
    values, counts = np.unique(np.round(expected, 12), return_counts=True)
    table = [{"value": float(v), "multiplicity": int(c)} for v, c in zip(values, counts)]
    lin = rs_linear_symbol(data)
    srep = check_ellipticity(lin, None, tol["sphere_samples"], tol["symbol_tol"])
    verdicts = {
        "identities": Verdict.of(max(devs.values()) <= tol["identity_tol"], max_deviation=max(devs.values())),
        "gram_spectrum": Verdict.of(worst <= tol["eigen_tol"], max_deviation=worst, samples=count),
        "elliptic_not_dirac": Verdict.of(
            srep.elliptic and not srep.dirac_type, min_sv=srep.min_sv, dirac_type=srep.dirac_type
        ),
        "completeness_bound": Verdict.of(abs(srep.norm_bound_C - 1.0) <= 1e-6, C=srep.norm_bound_C),
    }
    evidence = {"n": data.n, "m": data.m, "eigenvalues_unit_xi": table, "identity_deviations": devs}
    return verdicts, evidence


def _boundary_symbols(cfg):
    """``(A_symbol, samples, interchange_context)`` for ls-check."""
    entry = cfg.section("ls")
    if "adapted" in entry:
        a = complex_matrix(entry["adapted"], "ls.adapted")
        return (lambda xi: xi[0] * a), [np.array([1.0]), np.array([-1.0])], None
    sym = cfg.symbol()
    con = cfg.conormal(sym)
    idx = cfg.raw.get("conormal_index", 0)
    tangential = [i for i in range(sym.n) if i != idx]

    def embed(xi):
        full = np.zeros(sym.n)
        full[tangential] = xi
        return full

    d = len(tangential)
    if d == 1:
        samples = [np.array([1.0]), np.array([-1.0])]
    else:
        samples = list(cosphere_samples(Metric.identity(d), entry.get("samples", 256)))
    return (lambda xi: adapted_symbol(sym, con, embed(xi))), samples, (sym, idx)


def _ls_check(cfg, workers):
    entry = cfg.section("ls")
    expect = cfg.section("expect")
    A_symbol, samples, ctx = _boundary_symbols(cfg)
    verdicts, evidence = {}, {"samples": len(samples)}
    projector = None
    if "projector" in entry:
        P = complex_matrix(entry["projector"], "ls.projector")
        projector = lambda xi: P  # noqa: E731
    elif "projector_plus" in entry or "projector_minus" in entry:
        if len(samples[0]) != 1:
            raise ConfigurationError("projector_plus/minus apply to a one-dimensional boundary only")
        Pp = complex_matrix(entry["projector_plus"], "ls.projector_plus")
        Pm = complex_matrix(entry["projector_minus"], "ls.projector_minus")
        projector = lambda xi: Pp if xi[0] > 0 else Pm  # noqa: E731
    if projector is not None:
        rep = ls_check(projector, A_symbol, samples, realpart_tol=cfg.tolerances["realpart_tol"])
        verdicts["lopatinsky_schapiro"] = Verdict.of(
            rep.passed == expect.get("ls", True),
            passed=rep.passed, min_margin=rep.min_margin, failures=len(rep.failures),
        )
        evidence["ls_failures"] = rep.failures
    for i, item in enumerate(entry.get("interchange_projectors", [])):
        if isinstance(item, str):
            if ctx is None:
                raise ConfigurationError("named interchange projectors need an operator")
            sym, idx = ctx
            Q = forms_tangential_projector(sym.n, idx)
            if Q.shape[0] != sym.rank_e:
                raise ConfigurationError("named interchange projectors apply to the forms operator only")
            if item == "normal":
                Q = np.eye(Q.shape[0]) - Q
        else:
            Q = complex_matrix(item, f"ls.interchange_projectors[{i}]")
        ok = local_interchange_check(Q, A_symbol, samples)
        verdicts[f"interchange_{i}"] = Verdict.of(ok, interchanges=ok, rank=int(round(np.trace(Q).real)))
    if not verdicts:
        raise ConfigurationError("ls-check needs a projector or interchange_projectors")
    return verdicts, evidence


def _model(cfg, A, s0, bc):
    p = cfg.model_params
    return CylinderModel(float(p["L"]), int(p["K"]), int(p["N"]), A, bc, s0)


def _index_witness(rep):
    return {
        "index": rep.index,
        "dim_ker": rep.dim_ker,
        "dim_coker": rep.dim_coker,
        "dim_coker_transpose": rep.dim_coker_transpose,
        "rank_gap": rep.rank_gap,
    }


def _index(cfg, workers):
    tol = cfg.tolerances
    A, s0 = cfg.boundary_operator()
    model = _model(cfg, A, s0, cfg.boundary_condition(A))
    rep = numerical_index(model, tol["svd_tol"], tol["gap_threshold"], tol["realpart_tol"], workers)
    expect = cfg.section("expect")
    ok = rep.adjoint_consistent and ("index" not in expect or rep.index == expect["index"])
    verdicts = {"index": Verdict.of(ok, rep.reliable, **_index_witness(rep))}
    evidence = {
        "per_mode": rep.per_mode,
        "smallest_singular_values": rep.singular_values,
        "status": rep.status,
        "svd_tol": rep.svd_tol,
        "gap_threshold": rep.gap_threshold,
    }
    return verdicts, evidence


def _deform_sweep(cfg, workers):
    tol = cfg.tolerances
    A, s0 = cfg.boundary_operator()
    model = _model(cfg, A, s0, cfg.boundary_condition(A))
    steps = cfg.section("deform").get("steps", 10)
    rep = check_deformation(model, None, steps, tol["svd_tol"], tol["gap_threshold"], tol["realpart_tol"], workers)
    gap = min([r.rank_gap for r in rep.reports] + [rep.aps_report.rank_gap])
    verdicts = {
        "constant_index": Verdict.of(
            rep.constant, rep.reliable, indices=rep.indices, rank_gap=gap,
            first_jump=-1.0 if rep.first_jump is None else rep.first_jump,
        ),
        "deformation_formula": Verdict.of(
            rep.formula_holds, rep.reliable, index=rep.reports[-1].index, aps_index=rep.aps_report.index,
            dim_w_plus=rep.dim_w_plus, dim_w_minus=rep.dim_w_minus, rank_gap=gap,
        ),
    }
    evidence = {"s_values": rep.s_values, "indices": rep.indices, "g_bound": model.bc.g_bound()}
    return verdicts, evidence


def _match_verify(cfg, workers):
    tol = cfg.tolerances
    A, _ = cfg.boundary_operator()
    p = cfg.model_params
    cuts = tuple(cfg.section("match").get("cuts", [0.5]))
    rep = check_matching(A, float(p["L"]), int(p["K"]), int(p["N"]), cuts, svd_tol=tol["svd_tol"],
                         gap_threshold=tol["gap_threshold"], realpart_tol=tol["realpart_tol"], workers=workers)
    gap = min([rep.uncut.rank_gap, rep.matching.rank_gap, rep.aps.rank_gap, rep.whole.rank_gap]
              + [x.rank_gap for _, a, b in rep.cut_pieces for x in (a, b)])
    pieces = [{"cut": c, "left": a.index, "right": b.index} for c, a, b in rep.cut_pieces]
    verdicts = {
        "indices_agree": Verdict.of(
            rep.indices_agree, rep.reliable, uncut=rep.uncut.index, matching=rep.matching.index,
            aps=rep.aps.index, rank_gap=gap,
        ),
        "additivity": Verdict.of(rep.additive, rep.reliable, whole=rep.whole.index, pieces=pieces, rank_gap=gap),
        "cut_invariance": Verdict.of(
            rep.cut_invariant, rep.reliable, sums=[d["left"] + d["right"] for d in pieces], rank_gap=gap
        ),
    }
    evidence = {"shift": A.shift}
    return verdicts, evidence


def _band_limited(K, r):
    """Deterministic smooth sections ``(u, v)`` for the Green check."""
    ks = np.arange(-K, K + 1)[None, :, None]
    js = np.arange(r)[None, None, :]

    def u(t):
        t = t[:, None, None]
        return np.exp(1j * (ks + 1) * 0.5 * t) * (js + 1) + np.cos(2 * t + 0.3 * ks * (js + 1))

    def v(t):
        t = t[:, None, None]
        return np.sin(3 * t - 0.2 * ks) + t**2 * (1 + 1j * js) + 0 * ks

    return u, v


def _greens_check(cfg, workers):
    A, s0 = cfg.boundary_operator()
    p = cfg.model_params
    model = _model(cfg, A, s0, aps(doubled_split(A, int(p["K"]))))
    u, v = _band_limited(model.K, model.r)
    refinements = cfg.section("greens").get("refinements", 3)
    hs, res, order = greens_convergence(model, u, v, refinements)
    verdicts = {
        "green_order": Verdict.of(order >= cfg.tolerances["min_order"], order=order, finest_residual=res[-1]),
    }
    return verdicts, {"h": hs, "residuals": res}


def _semigroup_check(cfg, workers):
    tol = cfg.tolerances
    A, _ = cfg.boundary_operator()
    K = int(cfg.model_params["K"])
    entry = cfg.raw.get("boundary_condition", {"type": "aps"})
    if entry["type"] not in ("aps", "graph"):
        raise ConfigurationError("semigroup-check takes an aps or graph condition on one end")
    splits = mode_split(A, K, tol["realpart_tol"])
    r = A.rank
    g_ops = {}
    if "g" in entry:
        G = complex_matrix(entry["g"], "boundary_condition.g")
        if G.shape != (r, r):
            raise ConfigurationError(f"boundary_condition.g must be {r}x{r} for semigroup-check")
        g_ops = {k: G for k in splits}
    corr = {}
    for key in ("w_plus", "w_minus"):
        d = {}
        for item in entry.get(key, []):
            vec = np.asarray(item["vector"], dtype=float)
            d.setdefault(item["mode"], []).append(vec[:, 0] + 1j * vec[:, 1])
        corr[key] = {k: np.array(vs).T for k, vs in d.items()}
    bc = graph_bc(splits, corr["w_plus"], corr["w_minus"], g_ops).validate()
    sg = cfg.section("semigroup")
    grids = sg.get("grids", [33, 65, 129])
    T = float(sg.get("T", 1.0))
    res = [extension_semigroup_check(A, bc, t_grid=np.linspace(0.0, T, n)) for n in grids]
    hs = [T / (n - 1) for n in grids]
    exact = max(res) <= 1e-12
    order = np.inf if exact else observed_order(hs, res)
    x = np.ones(r, dtype=complex)
    sq = [square_function_check(A.mode_matrix(k), x) for k in range(-K, K + 1)]
    worst = max(s[2] for s in sq)
    verdicts = {
        "semigroup_order": Verdict.of(exact or order >= tol["min_order"], order=order, finest_residual=res[-1]),
        "square_function": Verdict.of(worst <= tol["square_function_rtol"], max_relative_error=worst),
    }
    evidence = {"h": hs, "residuals": res, "square_function": [[k, q, c] for k, (q, c, _) in zip(range(-K, K + 1), sq)]}
    return verdicts, evidence


EXPERIMENTS = {
    "check-symbol": _check_symbol,
    "rs-verify": _rs_verify,
    "ls-check": _ls_check,
    "index": _index,
    "deform-sweep": _deform_sweep,
    "match-verify": _match_verify,
    "greens-check": _greens_check,
    "semigroup-check": _semigroup_check,
}


# driver ----------------------------------------------------------------------------------


def run_config(cfg, workers=1):
    """Run a parsed configuration and return a :class:`RunReport`."""
    start = time.perf_counter()
    verdicts, evidence = EXPERIMENTS[cfg.kind](cfg, workers)
    provenance = {"config_sha256": cfg.sha256, "tolerances": cfg.tolerances}
    return RunReport(cfg.kind, verdicts, evidence, provenance, wall_time=time.perf_counter() - start)


def run(config_path, json_out=None, workers=1, stdout=None):
    """Load, run and report; returns the process exit code."""
    stdout = sys.stdout if stdout is None else stdout
    try:
        cfg = load_config(config_path)
        report = run_config(cfg, workers)
    except (ConfigurationError, NotEllipticError, NotInvertibleError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    stdout.write(emit_report(report, "text").decode())
    if json_out:
        with open(json_out, "wb") as fh:
            fh.write(emit_report(report, "json"))
    return report.exit_code


def _parser():
    p = argparse.ArgumentParser(prog="ellbvp", description="Checks and index experiments for elliptic boundary problems.")
    p.add_argument("config", help="experiment configuration (JSON)")
    p.add_argument("--json-out", metavar="PATH", help="write the machine-readable report here")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads for per-mode work")
    p.add_argument("--seed", type=int, default=None, help="reserved; all sampling uses deterministic grids")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.threads < 1:
        print("configuration error: --threads must be positive", file=sys.stderr)
        return 2
    return run(args.config, args.json_out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
