"""Command-line front end.

Subcommands: ``counterexample`` (finite-sample problem protocol),
``nqm`` (noisy-quadratic learning-rate sweep), ``toyml`` (toy training
runs), ``verify`` (oracle suites). All experiment commands write CSV
files whose first line is a ``#`` comment holding the invoked command,
so identical invocations produce byte-identical output.

The master seed resolves as: ``--seed`` flag, else the MAXVA_LAB_SEED
environment variable, else 0. A ``--config FILE`` of ``key=value`` lines
(long option names, hyphens or underscores) supplies defaults; explicit
flags win. Exit status is 0 iff no run diverged and every requested
verification suite passed.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .harness import AggregateRecord, ExperimentSpec, RunRecord, aggregate, lr_sweep, run_experiment
from .maxva import BetaBounds
from .optimizers import ALGORITHMS, OptimizerConfig
from .problems import FiniteSampleProblem, NQMProblem
from .toyml import ToyProblem, batches_for_epochs, make_blobs
from .verify import SUITES, run_suites

AGG_HEADER = (
    "step,median_loss,stderr_loss,median_s1,median_s2,median_step_size,"
    "beta_mean,beta_min,beta_max,n_failed"
)

# per-optimizer protocol for the finite-sample counterexample
COUNTEREXAMPLE_PROTOCOL = {
    "adam": {"eta": 0.8},
    "amsgrad": {"eta": 0.8},
    "madam": {"eta": 1.2},
}
COUNTEREXAMPLE_CONVERGED = 0.1  # |theta| below this at the end counts as converged

NQM_ETAS = (0.003, 0.01, 0.03, 0.1, 0.3)
NQM_ADAM_BETAS = (0.5, 0.6, 0.7, 0.8, 0.9, 0.99)
NQM_MADAM_BOUNDS = BetaBounds(beta_lower=0.5, beta_upper=0.99)

TOYML_ETAS = {
    "madam": 0.05, "lamadam": 0.05, "adam": 0.05, "amsgrad": 0.05,
    "laprop": 0.05, "adabound": 0.05, "sgd": 0.05,
}


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_aggregate_csv(path: Path, agg: AggregateRecord, command_line: str) -> None:
    """Aggregate series in the shared schema, one row per recorded step."""
    with open(path, "w") as fh:
        fh.write(f"# {command_line}\n")
        fh.write(AGG_HEADER + "\n")
        for k in range(len(agg.steps)):
            row = [
                int(agg.steps[k]),
                agg.median["loss"][k], agg.stderr["loss"][k],
                agg.median["s1"][k], agg.median["s2"][k],
                agg.median["step_size"][k],
                agg.median["beta_mean"][k], agg.median["beta_min"][k],
                agg.median["beta_max"][k],
                int(agg.n_failed[k]),
            ]
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_runs_csv(path: Path, records: list[RunRecord], command_line: str) -> None:
    """Per-run rows in the aggregate schema with a run_id prefix column."""
    with open(path, "w") as fh:
        fh.write(f"# {command_line}\n")
        fh.write("run_id," + AGG_HEADER + "\n")
        for rec in records:
            single = aggregate([rec], 1)
            for k in range(len(single.steps)):
                row = [
                    rec.run_index,
                    int(single.steps[k]),
                    single.median["loss"][k], single.stderr["loss"][k],
                    single.median["s1"][k], single.median["s2"][k],
                    single.median["step_size"][k],
                    single.median["beta_mean"][k], single.median["beta_min"][k],
                    single.median["beta_max"][k],
                    int(rec.failed),
                ]
                fh.write(",".join(_fmt(v) for v in row) + "\n")


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("MAXVA_LAB_SEED")
    return int(env) if env else 0


def _parse_floats(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _bounds_from_args(args) -> BetaBounds:
    return BetaBounds(beta_lower=args.beta_lower, beta_upper=args.beta_upper, delta=args.delta)


def _base_config(args, algorithm: str, eta: float) -> OptimizerConfig:
    return OptimizerConfig(
        algorithm=algorithm,
        eta=eta,
        alpha=args.alpha,
        beta=args.beta if np.isscalar(args.beta) else args.beta[0],
        bounds=_bounds_from_args(args),
        epsilon=args.epsilon,
        lam=args.weight_decay,
        amsgrad=args.amsgrad,
    )


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_counterexample(args, command_line: str) -> int:
    """Adam / AMSGrad / MAdam on the finite-sample problem."""
    seed = _resolve_seed(args)
    out = _outdir(args)
    optimizers = list(COUNTEREXAMPLE_PROTOCOL) if args.optimizer == "all" else [args.optimizer]
    problem = FiniteSampleProblem()
    any_failed = False
    summary_rows = []
    for name in optimizers:
        eta = args.eta if args.eta is not None else COUNTEREXAMPLE_PROTOCOL[name]["eta"]
        cfg = _base_config(args, name, eta)
        spec = ExperimentSpec(
            problem=problem, config=cfg, horizon=args.steps,
            n_runs=args.runs, master_seed=seed, record_every=args.record_every,
        )
        agg, records = run_experiment(spec, jobs=args.jobs)
        write_aggregate_csv(out / f"counterexample_{name}.csv", agg, command_line)
        if args.per_run:
            write_runs_csv(out / f"counterexample_{name}_runs.csv", records, command_line)
        finals = np.array([abs(r.theta_final[0]) for r in records])
        ok = np.isfinite(finals) & (finals < COUNTEREXAMPLE_CONVERGED)
        fraction = ok.mean()
        n_failed = sum(r.failed for r in records)
        any_failed = any_failed or n_failed > 0
        summary_rows.append(
            (name, eta, args.runs, args.steps, fraction,
             agg.final("loss"), agg.final("s1"), agg.final("s2"), n_failed)
        )
        print(
            f"counterexample optimizer={name} eta={eta} runs={args.runs} "
            f"converged={fraction:.2f} final_median_loss={agg.final('loss'):.6g} "
            f"final_median_s1={agg.final('s1'):.6g} final_median_s2={agg.final('s2'):.6g} "
            f"failed={n_failed}"
        )
    with open(out / "counterexample_summary.csv", "w") as fh:
        fh.write(f"# {command_line}\n")
        fh.write("optimizer,eta,runs,steps,converged_fraction,final_median_loss,"
                 "final_median_s1,final_median_s2,n_failed\n")
        for row in summary_rows:
            fh.write(",".join(_fmt(v) if not isinstance(v, str) else v for v in row) + "\n")
    return 1 if any_failed else 0


def cmd_nqm(args, command_line: str) -> int:
    """Learning-rate sweep on the noisy quadratic, MAdam versus Adam."""
    seed = _resolve_seed(args)
    out = _outdir(args)
    problem = NQMProblem(h=np.array(args.h), sigma=args.sigma)
    etas = args.eta if args.eta is not None else list(NQM_ETAS)
    adam_betas = args.beta if args.beta is not None else list(NQM_ADAM_BETAS)
    optimizers = ["madam", "adam"] if args.optimizer == "all" else [args.optimizer]
    any_failed = False
    best = {}
    with open(out / "nqm_summary.csv", "w") as fh:
        fh.write(f"# {command_line}\n")
        fh.write("optimizer,eta,beta,final_median_excess,final_stderr,n_failed,best\n")
        for name in optimizers:
            if name == "madam":
                cfg = OptimizerConfig(
                    algorithm="madam", eta=etas[0], alpha=args.alpha,
                    bounds=BetaBounds(beta_lower=args.beta_lower, beta_upper=args.beta_upper,
                                      delta=args.delta),
                    epsilon=args.epsilon, lam=args.weight_decay, amsgrad=args.amsgrad,
                )
                betas = None
            else:
                cfg = _base_config(args, name, etas[0])
                betas = adam_betas
            spec = ExperimentSpec(
                problem=problem, config=cfg, horizon=args.steps,
                n_runs=args.runs, master_seed=seed, record_every=args.record_every,
            )
            sweep = lr_sweep(spec, etas, betas, jobs=args.jobs)
            best[name] = sweep.best
            for entry in sweep.entries:
                tag = f"eta{entry.eta:g}" + (f"_beta{entry.beta:g}" if entry.beta is not None else "")
                write_aggregate_csv(out / f"nqm_{name}_{tag}.csv", entry.aggregate, command_line)
                any_failed = any_failed or entry.n_failed > 0
                fh.write(
                    f"{name},{_fmt(entry.eta)},"
                    f"{_fmt(entry.beta) if entry.beta is not None else ''},"
                    f"{_fmt(entry.final_median_loss)},{_fmt(entry.final_stderr_loss)},"
                    f"{entry.n_failed},{int(entry is sweep.best)}\n"
                )
    for name, entry in best.items():
        beta_part = f" beta={entry.beta:g}" if entry.beta is not None else ""
        print(
            f"nqm optimizer={name} best_eta={entry.eta:g}{beta_part} "
            f"final_median_excess={entry.final_median_loss:.6g} "
            f"stderr={entry.final_stderr_loss:.3g} failed={entry.n_failed}"
        )
    if len(best) == 2:
        ratio = best["madam"].final_median_loss / best["adam"].final_median_loss
        print(f"nqm madam/adam best-excess ratio={ratio:.3f}")
    return 1 if any_failed else 0


def cmd_toyml(args, command_line: str) -> int:
    """Toy training runs through the experiment harness."""
    seed = _resolve_seed(args)
    out = _outdir(args)
    dataset = make_blobs(seed=args.data_seed)
    problem = ToyProblem(
        dataset=dataset, model=args.model, batch_size=args.batch_size,
        growing=args.batch_growth,
    )
    horizon = batches_for_epochs(dataset.n_samples, args.batch_size, args.epochs,
                                 args.batch_growth)
    optimizers = list(ALGORITHMS) if args.optimizer == "all" else [args.optimizer]
    any_failed = False
    for name in optimizers:
        eta = args.eta if args.eta is not None else TOYML_ETAS[name]
        cfg = _base_config(args, name, eta)
        spec = ExperimentSpec(
            problem=problem, config=cfg, horizon=horizon,
            n_runs=args.runs, master_seed=seed, record_every=args.record_every,
        )
        agg, records = run_experiment(spec, jobs=args.jobs)
        write_aggregate_csv(out / f"toyml_{args.model}_{name}.csv", agg, command_line)
        if args.per_run:
            write_runs_csv(out / f"toyml_{args.model}_{name}_runs.csv", records, command_line)
        n_failed = sum(r.failed for r in records)
        any_failed = any_failed or n_failed > 0
        print(
            f"toyml model={args.model} optimizer={name} eta={eta} steps={horizon} "
            f"final_median_loss={agg.final('loss'):.6g} failed={n_failed}"
        )
    return 1 if any_failed else 0


def cmd_verify(args, command_line: str) -> int:
    """Run the oracle suites and report pass/fail."""
    names = list(SUITES) if args.suite == "all" else [args.suite]
    results = run_suites(names, n=args.n)
    all_passed = True
    for res in results:
        print(res.summary())
        all_passed = all_passed and res.passed
    return 0 if all_passed else 1


def _add_shared(parser: argparse.ArgumentParser, *, beta_upper: float) -> None:
    parser.add_argument("--alpha", type=float, default=0.9,
                        help="first-moment coefficient")
    parser.add_argument("--beta-lower", type=float, default=0.5,
                        help="lower clip for the adaptive coefficient")
    parser.add_argument("--beta-upper", type=float, default=beta_upper,
                        help="upper clip for the adaptive coefficient")
    parser.add_argument("--epsilon", type=float, default=None,
                        help="denominator guard (default per optimizer family)")
    parser.add_argument("--delta", type=float, default=1e-16,
                        help="guard in the closed-form coefficient")
    parser.add_argument("--weight-decay", type=float, default=0.0,
                        help="decoupled weight decay")
    parser.add_argument("--amsgrad", action="store_true",
                        help="track the running max of the second moment")
    parser.add_argument("--runs", type=int, default=100, help="number of seeded runs")
    parser.add_argument("--steps", type=int, default=None, help="steps per run")
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed (default: MAXVA_LAB_SEED or 0)")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes")
    parser.add_argument("--out", default="maxva_out", help="output directory")
    parser.add_argument("--record-every", type=int, default=1,
                        help="record diagnostics every this many steps")
    parser.add_argument("--per-run", action="store_true",
                        help="also write per-run CSV files")
    parser.add_argument("--config", default=None,
                        help="key=value file of defaults; flags win")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maxva-lab",
        description="Adaptive step-size experiments: variance-maximizing "
                    "averaging against fixed-coefficient baselines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("counterexample",
                       help="finite-sample problem: convergence protocol")
    p.add_argument("--optimizer", choices=[*COUNTEREXAMPLE_PROTOCOL, "all"], default="all")
    p.add_argument("--eta", type=float, default=None,
                   help="learning rate (default: per-optimizer protocol value)")
    p.add_argument("--beta", type=float, default=0.9,
                   help="fixed second-moment coefficient for adam/amsgrad")
    _add_shared(p, beta_upper=1.0)
    p.set_defaults(func=cmd_counterexample, alpha=0.0, steps=10_000)

    p = sub.add_parser("nqm", help="noisy quadratic: learning-rate sweep")
    p.add_argument("--optimizer", choices=["madam", "adam", "all"], default="all")
    p.add_argument("--eta", type=_parse_floats, default=None,
                   help="comma-separated learning-rate grid")
    p.add_argument("--beta", type=_parse_floats, default=None,
                   help="comma-separated adam beta grid")
    p.add_argument("--h", type=_parse_floats, default=[1.0, 0.1],
                   help="comma-separated curvatures")
    p.add_argument("--sigma", type=float, default=1.0, help="gradient noise scale")
    _add_shared(p, beta_upper=0.99)
    p.set_defaults(func=cmd_nqm, steps=1_000)

    p = sub.add_parser("toyml", help="toy training tasks")
    p.add_argument("--optimizer", choices=[*ALGORITHMS, "all"], default="all")
    p.add_argument("--model", choices=["logistic", "mlp"], default="logistic")
    p.add_argument("--eta", type=float, default=None,
                   help="learning rate (default: per-optimizer tuned value)")
    p.add_argument("--beta", type=float, default=0.999)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--batch-growth", action="store_true",
                   help="batch t has size min(t, n)")
    p.add_argument("--data-seed", type=int, default=7, help="dataset generation seed")
    _add_shared(p, beta_upper=0.999)
    p.set_defaults(func=cmd_toyml, runs=100)

    p = sub.add_parser("verify", help="run oracle verification suites")
    p.add_argument("--suite", choices=[*SUITES, "all"], default="all")
    p.add_argument("--n", type=int, default=None,
                   help="cases per suite (default: suite-specific)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_verify)

    return parser


_FLAG_KEYS = {"amsgrad", "batch-growth", "per-run"}


def _apply_config_file(argv: list[str]) -> list[str]:
    """Expand --config FILE into injected tokens; explicit flags win."""
    path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
    if path is None or not argv:
        return argv
    injected: list[str] = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        key = key.strip().replace("_", "-")
        value = value.strip()
        if key in _FLAG_KEYS:
            if value.lower() in ("1", "true", "yes"):
                injected.append(f"--{key}")
        else:
            injected.extend([f"--{key}", value])
    # insert after the subcommand so user-supplied flags, which come
    # later, take precedence
    return argv[:1] + injected + argv[1:]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    command_line = " ".join(["maxva-lab", *argv])
    parser = build_parser()
    args = parser.parse_args(_apply_config_file(argv))
    return args.func(args, command_line)


if __name__ == "__main__":
    raise SystemExit(main())
