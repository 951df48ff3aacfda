"""Command line front end.

Two subcommands:

``wbary run --kind KIND --out DIR [options]``
    Runs one self-contained computation and writes deterministic artifacts
    (CSV tables, ``summary.json``, and a ``manifest.json`` with SHA-256
    digests) into the output directory.  Outputs carry no timestamps, so a
    rerun with identical options reproduces identical bytes.

``wbary selftest [--fast]``
    Executes the verification battery and prints one line per check.

Exit codes: 0 on success, 2 on invalid inputs, 3 when a verification
check fails.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .acceptance import run_all
from .affine import spectrum_optimality
from .bounds import compute_D, integrability_bound
from .core import pbary_solve, WeightedPointConfig
from .errors import WbaryError
from .grid import uniform_ball, uniform_box
from .mmot import (
    DiscreteMeasure,
    barycenter_measure,
    check_cp_monotone,
    solve_mmot,
    verify_c2m_equivalence,
)
from .semidiscrete import (
    DiracConfiguration,
    blowup_exponent,
    check_bounds_p_lt2,
    grad_b_inverse_eigs,
    lq_via_changevar,
    pushforward_density,
)

KINDS = (
    "point_bary",
    "semidiscrete",
    "mmot",
    "bounds",
    "affine",
    "counterexample",
)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(
                f"{v:.17g}" if isinstance(v, float) else str(v) for v in row
            ) + "\n")


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _finish(outdir: Path, kind: str, params: dict) -> None:
    files = sorted(
        f.name for f in outdir.iterdir()
        if f.is_file() and f.name != "manifest.json"
    )
    digests = {}
    for name in files:
        h = hashlib.sha256()
        h.update((outdir / name).read_bytes())
        digests[name] = h.hexdigest()
    _write_json(outdir / "manifest.json", {
        "version": __version__,
        "kind": kind,
        "params": params,
        "threads": os.environ.get("WBARY_THREADS"),
        "files": digests,
    })


def _run_point_bary(args, outdir: Path) -> int:
    rng = np.random.default_rng(args.seed)
    n, N, d = 64, 4, 2
    pts = rng.normal(size=(n, N, d))
    w = rng.uniform(0.2, 1.0, N)
    w = w / w.sum()
    rows = []
    worst = 0.0
    for k in range(n):
        sol = pbary_solve(WeightedPointConfig(pts[k], w, args.p),
                          tol=args.tol)
        rows.append((k, *map(float, sol.z), float(sol.residual_norm),
                     sol.iterations, len(sol.coincident_set)))
        worst = max(worst, sol.residual_norm)
    _write_csv(outdir / "solutions.csv",
               ["index"] + [f"z{a}" for a in range(d)]
               + ["residual", "iterations", "n_coincident"], rows)
    _write_json(outdir / "summary.json", {
        "ok": True,
        "p": args.p,
        "n_configs": n,
        "worst_residual": worst,
        "weights": [float(x) for x in w],
    })
    return 0


def _run_semidiscrete(args, outdir: Path) -> int:
    if args.p > 2.0:
        cfg = DiracConfiguration(
            np.array([[0.8, 0.1], [-0.7, -0.25]]), [0.4, 0.3, 0.3], args.p
        )
        f1 = uniform_ball(np.array([0.2, 0.1]), 1.0 / np.sqrt(np.pi),
                          resolution=args.grid)
        center = cfg.fixed_point
    else:
        cfg = DiracConfiguration(np.array([[0.1], [-0.3]]),
                                 [0.4, 0.3, 0.3], args.p)
        f1 = uniform_box(np.array([[-0.5, 0.5]]),
                         resolution=max(args.grid, 256))
        center = cfg.anchors[0]
    pf = pushforward_density(cfg, f1, resolution=args.grid)
    pf.density.write_csv(outdir / "pushforward.csv")
    payload = {
        "ok": bool(pf.mass_ok),
        "p": args.p,
        "grid": args.grid,
        "mass": pf.mass,
        "lam1": cfg.lam1,
        "fixed_point": [float(x) for x in cfg.fixed_point],
        "lq_norm_q": args.q,
        "lq_norm": lq_via_changevar(cfg, f1, args.q),
    }
    if args.p != 2.0:
        lo = 1e-6 if args.p > 2.0 else 1e-8
        rep = blowup_exponent(cfg, f1, center,
                              np.geomspace(lo, lo * 100, 10))
        payload["blowup_slope"] = rep.slope
        payload["blowup_q0"] = rep.q0
    _write_json(outdir / "summary.json", payload)
    return 0 if payload["ok"] else 3


def _run_mmot(args, outdir: Path) -> int:
    rng = np.random.default_rng(args.seed)
    measures = []
    for _ in range(3):
        K = int(rng.integers(2, 5))
        atoms = rng.normal(size=(K, 2))
        masses = rng.uniform(0.2, 1.0, K)
        measures.append(DiscreteMeasure(atoms, masses / masses.sum()))
    w = rng.uniform(0.2, 1.0, 3)
    w = w / w.sum()
    plan = solve_mmot(measures, w, args.p, cap=args.cap)
    nu = barycenter_measure(plan)
    eq = verify_c2m_equivalence(measures, w, args.p, cap=args.cap)
    mono = check_cp_monotone(plan)
    rows = [
        (k, *map(int, plan.indices[k]), float(plan.masses[k]),
         *map(float, plan.barycenters[k]))
        for k in range(len(plan.masses))
    ]
    _write_csv(outdir / "plan.csv",
               ["tuple"] + [f"i{j}" for j in range(3)] + ["mass", "by0", "by1"],
               rows)
    _write_csv(outdir / "barycenter_measure.csv",
               ["x0", "x1", "mass"],
               [(float(a[0]), float(a[1]), float(m))
                for a, m in zip(nu.atoms, nu.masses)])
    ok = bool(eq.ok and mono.ok and plan.support_within_basis)
    _write_json(outdir / "summary.json", {
        "ok": ok,
        "p": args.p,
        "seed": args.seed,
        "objective": plan.objective,
        "equivalence_gap": eq.gap,
        "monotone_margin": mono.min_margin,
        "support_size": len(plan.masses),
        "support_within_basis": bool(plan.support_within_basis),
        "n_barycenter_atoms": nu.n_atoms,
    })
    return 0 if ok else 3


def _run_bounds(args, outdir: Path) -> int:
    from .acceptance import FITTED_DISTANT_CONSTANT

    p, q = 3.0, args.q
    anchors = np.array([[6.0], [7.5]])
    f1 = uniform_box(np.array([[-0.5, 0.5]]), resolution=max(args.grid, 512))
    supp = np.linspace(-0.5, 0.5, 65)[:, None]
    support_measures = [
        DiscreteMeasure(supp, np.ones(65) / 65),
        DiscreteMeasure(anchors[:1], [1.0]),
        DiscreteMeasure(anchors[1:], [1.0]),
    ]
    rows = []
    ok = True
    for lam1 in np.arange(0.1, 0.91, 0.1):
        w = np.array([lam1, (1 - lam1) / 2, (1 - lam1) / 2])
        cfg = DiracConfiguration(anchors, w, p)
        norm = lq_via_changevar(cfg, f1, q)
        D = compute_D(support_measures, w, p)
        bound = integrability_bound(f1.lq_norm(q), q, p, lam1, 1, D=D,
                                    constant=FITTED_DISTANT_CONSTANT)
        ok &= norm <= bound
        rows.append((float(lam1), float(norm), float(bound), float(D)))
    _write_csv(outdir / "sweep.csv",
               ["lam1", "measured", "bound", "separation"], rows)
    _write_json(outdir / "summary.json", {
        "ok": bool(ok),
        "p": p,
        "q": q,
        "constant": FITTED_DISTANT_CONSTANT,
    })
    return 0 if ok else 3


def _run_affine(args, outdir: Path) -> int:
    from .acceptance import _spectrum_fixture

    optimal, not_optimal = _spectrum_fixture()
    rows = []
    ok = True
    for tag, group, expect in (("optimal", optimal, True),
                               ("other", not_optimal, False)):
        for k, A in enumerate(group):
            v = spectrum_optimality(A)
            ok &= v.optimal == expect
            rows.append((f"{tag}-{k}", A.shape[0], v.optimal,
                         float(v.zeta) if v.zeta is not None else float("nan"),
                         v.reason or ""))
    _write_csv(outdir / "spectrum_fixture.csv",
               ["matrix", "dim", "optimal", "zeta", "reason"], rows)
    _write_json(outdir / "summary.json", {
        "ok": bool(ok),
        "n_matrices": len(rows),
    })
    return 0 if ok else 3


def _run_counterexample(args, outdir: Path) -> int:
    """Exhibit: the r^(2-p) lower envelope fails near the fixed point.

    For p < 2 the gradient eigenvalue gap decays like |Gbar(z)|^beta, i.e.
    r^((2-p)/(p-1)), which is strictly faster than the claimed r^(2-p)
    envelope; the table tracks the measured gap against the claimed lower
    envelope and the valid local-factor one on a radius sweep into the
    fixed point.
    """
    p = args.p if args.p < 2.0 else 1.5
    cfg = DiracConfiguration(np.array([[1.0], [2.0]]),
                             [1 / 3, 1 / 3, 1 / 3], p)
    zfix = cfg.fixed_point[0]
    radii = np.geomspace(1e-10, 0.4, 40)
    rows = []
    violated = False
    for r in radii:
        z = np.array([[zfix - r]])
        rep = check_bounds_p_lt2(cfg, z)
        gap = float(grad_b_inverse_eigs(cfg, z).min() - 1.0)
        stated_low = gap - rep.stated_lower_margin
        local_low = gap - rep.local_lower_margin
        violated |= gap < stated_low - 1e-12
        rows.append((float(r), gap, float(stated_low), float(local_low),
                     bool(rep.local_ok)))
    _write_csv(outdir / "exhibit.csv",
               ["radius", "eig_gap", "claimed_lower",
                "local_factor_lower", "local_band_holds"], rows)
    _write_json(outdir / "summary.json", {
        "ok": True,
        "p": p,
        "fixed_point": float(zfix),
        "claimed_lower_bound_violated": bool(violated),
        "local_band_holds": all(bool(r[4]) for r in rows),
    })
    return 0


_RUNNERS = {
    "point_bary": _run_point_bary,
    "semidiscrete": _run_semidiscrete,
    "mmot": _run_mmot,
    "bounds": _run_bounds,
    "affine": _run_affine,
    "counterexample": _run_counterexample,
}


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="wbary",
        description="Weighted power-mean barycenters, semidiscrete "
                    "transport maps, and their verification battery.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one computation, write artifacts")
    run.add_argument("--kind", choices=KINDS, required=True)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--p", type=float, default=3.0,
                     help="power exponent (> 1)")
    run.add_argument("--q", type=float, default=2.0,
                     help="integrability exponent")
    run.add_argument("--grid", type=int, default=128,
                     help="grid resolution per axis")
    run.add_argument("--tol", type=float, default=1e-12,
                     help="solver residual tolerance")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--cap", type=int, default=10 ** 6,
                     help="largest admissible support product")
    run.add_argument("--threads", type=int, default=None,
                     help="record a thread budget (WBARY_THREADS)")

    st = sub.add_parser("selftest", help="run the verification battery")
    st.add_argument("--fast", action="store_true",
                    help="reduced sample sizes, same tolerances")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "selftest":
        results = run_all(fast=args.fast)
        for r in results:
            print(("PASS" if r.ok else "FAIL") + f"  {r.name}: {r.details}")
        n_ok = sum(r.ok for r in results)
        print(f"{n_ok}/{len(results)} checks passed")
        return 0 if n_ok == len(results) else 3

    if args.p <= 1.0:
        print("error: --p must exceed 1", file=sys.stderr)
        return 2
    if args.grid < 8 or args.grid > 4096:
        print("error: --grid out of range [8, 4096]", file=sys.stderr)
        return 2
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be positive", file=sys.stderr)
            return 2
        os.environ["WBARY_THREADS"] = str(args.threads)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    params = {
        "kind": args.kind, "p": args.p, "q": args.q, "grid": args.grid,
        "tol": args.tol, "seed": args.seed, "cap": args.cap,
    }
    try:
        code = _RUNNERS[args.kind](args, outdir)
    except WbaryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _finish(outdir, args.kind, params)
    return code


if __name__ == "__main__":
    sys.exit(main())
