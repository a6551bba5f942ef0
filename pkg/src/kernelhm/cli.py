"""Command-line pipeline driver.

Each subcommand reads and writes the package's plain-text formats so a full
history-matching study can be scripted: generate or ingest an ensemble, serve
it for labeling, fit a kernel, emulate, evaluate candidates, size the NROY
space, design the next wave, or run a whole wave in one step.

Exit codes: 0 success, 2 on bad arguments or missing/malformed inputs,
1 on internal failures.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .ensemble import (load_ensemble, load_ensemble_dir, save_design,
                       save_ensemble)
from .gp import (GpConfig, emulate_coefficients, emulators_from_text,
                 emulators_to_text)
from .implausibility import (build_context, candidate_table_text, derive_t2,
                             evaluate_candidates)
from .kernels import CenteredKernelSystem, kernel_spec_from_text
from .kpca import (basis_from_text, basis_to_text, coefficients_to_text,
                   fit_kpca, training_coefficients)
from .selection import (kernel_fit_to_text, load_classification,
                        optimize_kernel, save_classification, save_i0_table)
from .toysim import ToyConfig, auto_label, make_ensemble
from .waves import (WaveConfig, load_wave, next_wave_design, nroy_fraction,
                    run_wave, wave_report)


class CliError(ValueError):
    """Predictable input problem; reported as a validation failure."""


def _require_file(path, what) -> str:
    if not os.path.isfile(path):
        raise CliError(f"{what} not found: {path}")
    return path


def _require_dir(path, what) -> str:
    if not os.path.isdir(path):
        raise CliError(f"{what} not found: {path}")
    return path


def _load_matrix(path) -> np.ndarray:
    """Comma-delimited numeric table, tolerating one header row."""
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError:
        return np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1)


def _load_chain(dirs):
    record = None
    for d in dirs:
        record = load_wave(_require_dir(d, "wave directory"), prior=record)
    return record


def _classification_for(ensemble, path):
    _require_file(path, "classification file")
    return load_classification(path, n=ensemble.outputs.n)


def cmd_toy_generate(args) -> None:
    config = ToyConfig()
    ens = make_ensemble(config, n=args.n, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    paths = save_ensemble(ens, args.out)
    if args.auto_label:
        cls_ = auto_label(config, ens.design)
        save_classification(cls_, os.path.join(args.out, "classification.csv"))
    print(f"wrote toy ensemble with {ens.outputs.n} members to {args.out}")
    for name in sorted(paths):
        print(f"  {name}")


def cmd_ingest(args) -> None:
    for path, what in ((args.design, "design file"),
                       (args.outputs, "outputs file"),
                       (args.observation, "observation file")):
        _require_file(path, what)
    ens = load_ensemble(args.design, args.outputs, args.observation,
                        bounds_path=args.bounds, cov_path=args.obs_cov)
    os.makedirs(args.out, exist_ok=True)
    save_ensemble(ens, args.out)
    print(f"ingested {ens.outputs.n} members ({ens.outputs.l} cells each) "
          f"into {args.out}")


def cmd_classify_serve(args) -> None:
    import uvicorn

    from .service import SessionState, create_app

    ens = load_ensemble_dir(_require_dir(args.dir, "ensemble directory"))
    cls_path = args.classification or os.path.join(args.dir,
                                                   "classification.csv")
    state = SessionState(ens, cls_path, wave_id=args.wave_id)
    static = None
    if args.static is not None:
        static = _require_dir(args.static, "static UI directory")
    app = create_app(state, static_dir=static)
    print(f"serving {ens.outputs.n} members on http://{args.host}:{args.port} "
          f"(labels -> {cls_path})")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


def cmd_fit_kernel(args) -> None:
    ens = load_ensemble_dir(_require_dir(args.dir, "ensemble directory"))
    cls_path = args.classification or os.path.join(args.dir,
                                                   "classification.csv")
    cls_ = _classification_for(ens, cls_path)
    fit = optimize_kernel(ens.outputs, ens.observation, cls_,
                          alpha=args.alpha, seed=args.seed,
                          budget=args.budget)
    out = args.out or args.dir
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "kernel.txt"), "w") as fh:
        fh.write(kernel_fit_to_text(fit))
    save_i0_table(fit, os.path.join(out, "i0.csv"))
    print(f"selection score {fit.score:.4f} over {fit.n_evaluations} "
          f"candidate kernels")
    print(f"T** {fit.T_star_star:.6g}; retained {fit.N_A} acceptable, "
          f"{fit.N_U} unacceptable")
    print(f"wrote kernel.txt and i0.csv to {out}")


def cmd_emulate(args) -> None:
    ens = load_ensemble_dir(_require_dir(args.dir, "ensemble directory"))
    kernel_path = args.kernel or os.path.join(args.dir, "kernel.txt")
    with open(_require_file(kernel_path, "kernel file")) as fh:
        kernel_text = fh.read()
    spec = kernel_spec_from_text(kernel_text, ens.observation.obs_cov,
                                 ens.outputs.grid_shape, l=ens.outputs.l)
    system = CenteredKernelSystem.build(spec, ens.outputs.fields)
    basis = fit_kpca(system, q=args.q,
                     variance_fraction=args.variance_fraction)
    coeffs = training_coefficients(basis)
    config = GpConfig(nugget=args.nugget)
    emus = emulate_coefficients(ens.design.points, coeffs, config,
                                seed=args.seed)
    out = args.out or args.dir
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "basis.txt"), "w") as fh:
        fh.write(basis_to_text(basis))
    with open(os.path.join(out, "coefficients.csv"), "w") as fh:
        fh.write(coefficients_to_text(coeffs))
    with open(os.path.join(out, "emulators.txt"), "w") as fh:
        fh.write(emulators_to_text(emus))
    print(f"kept q={basis.q} components; fitted {basis.q} emulators "
          f"on {ens.outputs.n} runs")
    print(f"wrote basis.txt, coefficients.csv and emulators.txt to {out}")


def _context_from_dir(directory, t_multiplier, seed):
    """Rebuild basis/emulators/thresholds from a fitted directory."""
    ens = load_ensemble_dir(directory)
    with open(_require_file(os.path.join(directory, "kernel.txt"),
                            "kernel file")) as fh:
        kernel_text = fh.read()
    kv = dict(line.partition(" ")[::2]
              for line in kernel_text.strip().splitlines())
    spec = kernel_spec_from_text(kernel_text, ens.observation.obs_cov,
                                 ens.outputs.grid_shape, l=ens.outputs.l)
    system = CenteredKernelSystem.build(spec, ens.outputs.fields)
    with open(_require_file(os.path.join(directory, "basis.txt"),
                            "basis file")) as fh:
        basis = basis_from_text(fh.read(), system)
    with open(_require_file(os.path.join(directory, "emulators.txt"),
                            "emulator file")) as fh:
        emus = emulators_from_text(fh.read())
    ctx = build_context(basis, emus, ens.observation.z,
                        bound_a=float(kv["t_star_star"]),
                        t_multiplier=t_multiplier)
    cls_path = os.path.join(directory, "classification.csv")
    if os.path.isfile(cls_path):
        cls_ = load_classification(cls_path, n=ens.outputs.n)
        if len(cls_.unacceptable_indices):
            coeffs = training_coefficients(basis)
            T2, _ = derive_t2(ctx, ens.design.points, coeffs,
                              cls_.unacceptable_indices, seed=seed)
            ctx = ctx.with_bounds(T2=T2)
    return ens, ctx


def cmd_history_match(args) -> None:
    ens, ctx = _context_from_dir(
        _require_dir(args.dir, "fitted directory"), args.t_multiplier,
        args.seed)
    p = ens.design.points.shape[1]
    if args.candidates is not None:
        X = _load_matrix(_require_file(args.candidates, "candidate file"))
        if X.shape[1] != p:
            raise CliError(f"candidate file has {X.shape[1]} columns, "
                           f"design has {p}")
    else:
        rng = np.random.default_rng(args.seed)
        X = rng.uniform(-1.0, 1.0, size=(args.sample, p))
    result = evaluate_candidates(ctx, X)
    out = args.out or os.path.join(args.dir, "candidates.csv")
    with open(out, "w") as fh:
        fh.write(candidate_table_text(X, result))
    kept = int(result["nroy"].sum())
    print(f"evaluated {X.shape[0]} candidates; {kept} not ruled out yet")
    print(f"bound a {ctx.bound_a:.6g}; T2 "
          f"{'unset' if ctx.T2 is None else f'{ctx.T2:.6g}'}")
    print(f"wrote {out}")


def cmd_nroy_sample(args) -> None:
    record = _load_chain(args.wave_dirs)
    frac, se = nroy_fraction(record.predicate, N=args.mc, seed=args.seed)
    print(f"nroy_fraction {frac:.6f} (se {se:.6f}) over {args.mc} samples, "
          f"{len(args.wave_dirs)} wave(s)")


def cmd_next_design(args) -> None:
    record = _load_chain(args.wave_dirs)
    design = next_wave_design(record.predicate, args.n_new,
                              candidate_budget=args.budget, seed=args.seed)
    bounds = args.bounds or args.out + ".bounds"
    save_design(design, args.out, bounds)
    print(f"wrote {args.n_new} next-wave points to {args.out}")


def cmd_wave_run(args) -> None:
    ens = load_ensemble_dir(_require_dir(args.dir, "ensemble directory"))
    cls_path = args.classification or os.path.join(args.dir,
                                                   "classification.csv")
    cls_ = _classification_for(ens, cls_path)
    prior = _load_chain(args.prior) if args.prior else None
    config = WaveConfig(q=args.q, variance_fraction=args.variance_fraction,
                        alpha=args.alpha, selection_budget=args.budget,
                        gp=GpConfig(nugget=args.nugget),
                        t_multiplier=args.t_multiplier,
                        predicate_mode=args.predicate_mode,
                        mc_samples=args.mc)
    record = run_wave(prior, ens, cls_, config, seed=args.seed,
                      store_dir=args.store)
    print(f"wave {record.wave_id}: score {record.fit.score:.4f}, "
          f"q {record.basis.q}, nroy_fraction {record.nroy_fraction:.4f} "
          f"(se {record.nroy_se:.4f})")
    print(f"stored wave to {args.store}")


def cmd_report(args) -> None:
    dirs = list(args.wave_dirs)
    if len(dirs) == 1 and os.path.isdir(dirs[0]):
        subdirs = sorted(
            os.path.join(dirs[0], d) for d in os.listdir(dirs[0])
            if d.startswith("wave") and os.path.isdir(os.path.join(dirs[0], d)))
        if subdirs:
            dirs = subdirs
    records = []
    record = None
    for d in dirs:
        record = load_wave(_require_dir(d, "wave directory"), prior=record)
        records.append(record)
    if not records:
        raise CliError("no wave directories found")
    sys.stdout.write(wave_report(records))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kernelhm",
        description="Kernel history-matching pipeline over plain-text stores.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--seed", type=int, default=0,
                       help="seed for every stochastic step (default 0)")
        p.set_defaults(func=func)
        return p

    p = add("toy-generate", cmd_toy_generate,
            "write a synthetic band ensemble to a directory")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--auto-label", action="store_true",
                   help="also write classification.csv from the label rule")

    p = add("ingest", cmd_ingest,
            "normalize external design/outputs/observation files")
    p.add_argument("--design", required=True)
    p.add_argument("--bounds", default=None,
                   help="defaults to <design>.bounds")
    p.add_argument("--outputs", required=True)
    p.add_argument("--observation", required=True)
    p.add_argument("--obs-cov", default=None)
    p.add_argument("--out", required=True)

    p = add("classify-serve", cmd_classify_serve,
            "serve the labeling API (and optionally the built UI)")
    p.add_argument("--dir", required=True)
    p.add_argument("--classification", default=None)
    p.add_argument("--wave-id", type=int, default=1)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static", default=None)

    p = add("fit-kernel", cmd_fit_kernel,
            "select the kernel that best separates the labeled runs")
    p.add_argument("--dir", required=True)
    p.add_argument("--classification", default=None)
    p.add_argument("--alpha", type=float, default=0.8)
    p.add_argument("--budget", type=int, default=600)
    p.add_argument("--out", default=None)

    p = add("emulate", cmd_emulate,
            "fit the component basis and one emulator per coefficient")
    p.add_argument("--dir", required=True)
    p.add_argument("--kernel", default=None)
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--variance-fraction", type=float, default=None)
    p.add_argument("--nugget", type=float, default=GpConfig().nugget)
    p.add_argument("--out", default=None)

    p = add("history-match", cmd_history_match,
            "evaluate candidate inputs against the fitted wave")
    p.add_argument("--dir", required=True)
    p.add_argument("--candidates", default=None,
                   help="CSV of candidate points; omit to sample uniformly")
    p.add_argument("--sample", type=int, default=1000)
    p.add_argument("--t-multiplier", type=float, default=3.0)
    p.add_argument("--out", default=None)

    p = add("nroy-sample", cmd_nroy_sample,
            "Monte Carlo estimate of the surviving volume fraction")
    p.add_argument("wave_dirs", nargs="+")
    p.add_argument("--mc", type=int, default=10_000)

    p = add("next-design", cmd_next_design,
            "space-filling design inside the current NROY region")
    p.add_argument("wave_dirs", nargs="+")
    p.add_argument("--n-new", type=int, required=True)
    p.add_argument("--budget", type=int, default=4000)
    p.add_argument("--out", required=True)
    p.add_argument("--bounds", default=None)

    p = add("wave-run", cmd_wave_run,
            "run one full refocusing wave and store it")
    p.add_argument("--dir", required=True)
    p.add_argument("--classification", default=None)
    p.add_argument("--prior", nargs="*", default=[],
                   help="earlier wave directories, oldest first")
    p.add_argument("--store", required=True)
    p.add_argument("--q", type=int, default=None)
    p.add_argument("--variance-fraction", type=float, default=None)
    p.add_argument("--alpha", type=float, default=0.8)
    p.add_argument("--budget", type=int, default=600)
    p.add_argument("--nugget", type=float, default=GpConfig().nugget)
    p.add_argument("--t-multiplier", type=float, default=3.0)
    p.add_argument("--predicate-mode", choices=("if1", "if2"), default="if1")
    p.add_argument("--mc", type=int, default=10_000)

    p = add("report", cmd_report,
            "NROY summary across stored waves")
    p.add_argument("wave_dirs", nargs="+",
                   help="wave directories oldest first, or one store root")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 2
    try:
        args.func(args)
        return 0
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, NotADirectoryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
