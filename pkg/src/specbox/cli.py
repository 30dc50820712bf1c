"""Command line entry point: ``specbox <task> --config FILE``.

Exit codes: 0 success, 1 usage or configuration error (including solver caps),
2 verification failure.
"""
from __future__ import annotations

import argparse
import math
import sys

import numpy as np
from threadpoolctl import threadpool_limits

from . import identities as ids
from .config import TASKS, ConfigError, RunConfig, load_config
from .heat import (ORDERS, FitError, compare_fit, fit_expansion, geometric_coefficients, predicted_coefficients,
                   reliable_window, trace_series)
from .invariants import bundle, compare, separability_diagnosis
from .model import (coordinate_series, directional_decomposition, irrationality_scan, mean_value,
                    reduce_potential, subtract_mean)
from .report import eigenvalues_csv, fit_csv, report_document, series_csv, write_outputs
from .spectra1d import spectrum_1d
from .spectrand import CapExceeded, interval_kind, spectrum_nd

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2
SPECTRUM_K = {1: 128, 2: 48, 3: 12}
FIT_K = {1: 512, 2: 64, 3: 16}


def _spectrum(cfg: RunConfig, which: str = "potential", K_default=SPECTRUM_K):
    box = cfg.box()
    P = cfg.trig(which)
    K = cfg.params.K or K_default[box.n]
    if box.n == 1:
        return spectrum_1d(P, interval_kind(box.bc[0]), box.sides[0], K, vectors=False)
    return spectrum_nd(P, box, K, cap=cfg.params.cap)


def task_spectrum(cfg: RunConfig, seed: int):
    spec = _spectrum(cfg)
    ev = spec.trusted
    return {"count": len(spec), "trusted": len(ev), "provenance": spec.provenance,
            "eigenvalues": ev}, {"eigenvalues": eigenvalues_csv(ev)}, True


def task_heat_trace(cfg: RunConfig, seed: int):
    spec = _spectrum(cfg)
    grid = cfg.params.t_grid or np.geomspace(1e-3, 1.0, 64).tolist()
    s = trace_series(spec, sorted(grid))
    return {"t": s.t, "value": s.value, "tail_bound": s.tail_bound, "flagged": s.flagged}, \
        {"series": series_csv(s)}, True


def task_fit(cfg: RunConfig, seed: int):
    box = cfg.box()
    q = cfg.cosine()
    spec = _spectrum(cfg, K_default=FIT_K)
    subtract = cfg.params.subtract_geometric
    if subtract is None:
        subtract = bool(q.terms)
    known = geometric_coefficients(box) if subtract else {}
    if cfg.params.exponents:
        ex = sorted(cfg.params.exponents)
    elif subtract:
        ex = [e for e in ORDERS[box.n] if e >= 0 and e <= 1.5]
    else:
        ex = list(ORDERS[box.n][: box.n + 1])
    series = reliable_window(lambda g: trace_series(spec, g), known)
    fit = fit_expansion(series, ex, known, guards=cfg.params.guards)
    pred = predicted_coefficients(box, q)
    fit = fit.with_predicted(pred)
    atol = cfg.params.atol
    if atol is None:
        # coefficients predicted as zero are judged against the scale of the expansion
        atol = cfg.params.rtol * max((abs(pred[e]) for e in fit.exponents), default=0.0)
    cmp = compare_fit(fit, pred, rtol=cfg.params.rtol, atol=atol)
    result = {
        "atol": atol, "rtol": cfg.params.rtol, "t_range": fit.t_range, "npoints": fit.npoints, "condition": fit.condition,
        "rows": [{"exponent": r.exponent, "fitted": r.fitted, "predicted": r.predicted,
                  "abs_dev": r.abs_dev, "rel_dev": r.rel_dev, "passed": r.passed} for r in cmp.rows],
    }
    e_int = 1.0 - box.n / 2
    if e_int in fit.fitted:
        # -int q (4 pi)^(-n/2) is the potential part at t^(1 - n/2)
        result["integral_q_from_fit"] = -fit.potential_part(e_int) * (4 * math.pi) ** (box.n / 2)
        result["integral_q"] = q.integral()
    return result, {"fit": fit_csv(fit), "series": series_csv(series)}, True


def task_decompose(cfg: RunConfig, seed: int):
    box = cfg.box()
    P = cfg.trig()
    comps = directional_decomposition(subtract_mean(P))
    result = {
        "mean": mean_value(P),
        "integral_q": box.volume * mean_value(P),
        "directional": [{"direction": c.direction, "dual_norm": c.dual_norm,
                         "series": [{"k": k, "b": b} for k, b in c.series]} for c in comps],
        "coordinate": [{"dim": i, "terms": coordinate_series(P, i).to_json()["terms"]} for i in range(box.n)],
    }
    if box.n >= 2:
        red = {}
        for i in range(box.n):
            k = tuple(1 if j == i else 0 for j in range(box.n))
            red[str(list(k))] = [{"m": m, "a": v} for m, v in reduce_potential(P, k).coeffs]
        result["reduced_coordinate"] = red
        scan = irrationality_scan(box, cfg.params.irrationality_bound)
        result["irrationality"] = {"bound": scan.bound, "relation": scan.relation, "summary": scan.summary()}
    return result, {}, True


def _bundle(cfg: RunConfig, which: str):
    p = cfg.params
    return bundle(cfg.trig(which), cfg.box(), J=p.J, radii=p.radii, heat=p.heat)


def task_invariants(cfg: RunConfig, seed: int):
    b = _bundle(cfg, "potential")
    result = b.to_json()
    if cfg.box().n >= 2:
        d = separability_diagnosis(b)
        result["separability"] = {"verdict": d.verdict, "tolerance": d.tolerance}
    return result, {}, True


def task_compare(cfg: RunConfig, seed: int):
    p = cfg.params
    rep = compare(_bundle(cfg, "potential"), _bundle(cfg, "second_potential"), p.spectra_tol, p.integral_tol,
                  p.heat_tol)
    return rep.to_json(), {}, True


def task_verify(cfg: RunConfig, seed: int):
    box = cfg.box()
    P = cfg.trig()
    p = cfg.params
    kw = {"t_set": p.t_set}
    if p.tolerance is not None:
        kw["tolerance"] = p.tolerance
    if p.K is not None:
        kw["K"] = p.K
    if p.K_cell is not None:
        kw["K_cell"] = p.K_cell
    reports = []
    if box.n == 1:
        a = box.sides[0]
        for bc in ("DD", "DN", "ND", "NN"):
            reports.append(ids.reflection_identity_1d(P, a, bc, seed=seed, **kw))
        reports.append(ids.trace_pairing_identity(P, a, **kw))
        reports.append(ids.telescoped_dirichlet_trace(P, a, **kw))
    elif box.n == 2:
        reports.append(ids.torus_image_identity_2d(P, box, seed=seed, **kw))
        if all(pair == ("D", "D") for pair in box.bc):
            reports.append(ids.trace_quadrupling_2d(P, box, **kw))
        fkw = {k: v for k, v in kw.items() if k != "K_cell"}
        for k in ((1, 0), (0, 1)):
            reports.append(ids.factorization_identity(P, box, k, seed=seed, **fkw))
    else:
        raise ConfigError("verify supports one- and two-dimensional problems")
    ok = all(r.passed for r in reports)
    return {"passed": ok, "reports": [r.to_json() for r in reports]}, {}, ok


HANDLERS = {
    "spectrum": task_spectrum, "heat-trace": task_heat_trace, "fit": task_fit, "decompose": task_decompose,
    "invariants": task_invariants, "compare": task_compare, "verify": task_verify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="specbox", description=__doc__.splitlines()[0])
    ap.add_argument("task", choices=TASKS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--threads", type=int, default=None, help="BLAS thread limit")
    ap.add_argument("--seed", type=int, default=0, help="seed for sample-point sequences")
    return ap


def run(cfg: RunConfig, out: str | None = None, threads: int | None = None, seed: int = 0) -> int:
    handler = HANDLERS[cfg.task]
    try:
        with threadpool_limits(limits=threads):
            result, csvs, ok = handler(cfg, seed)
    except (CapExceeded, FitError, ids.TailTooLarge, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    doc = report_document(cfg.task, cfg.echo(), result, "pass" if ok else "fail")
    write_outputs(out or cfg.output.dir, cfg.task, doc, csvs if cfg.output.csv else {})
    return EXIT_OK if ok else EXIT_FAIL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.task)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if cfg.task != args.task:
        print(f"error: config task {cfg.task!r} does not match command {args.task!r}", file=sys.stderr)
        return EXIT_USAGE
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_USAGE
    return run(cfg, args.out, args.threads, args.seed)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
