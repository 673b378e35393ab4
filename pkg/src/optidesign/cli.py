"""Batch command-line frontend.

Subcommands: design, certify, audit, oracle, synth, bench {fig-a,fig-e},
recsys. Machine-readable JSON/CSV goes to --output (or stdout); human
summaries go to stderr. Output files are written atomically. Exit codes:
0 success, 1 numeric/domain error (the failing invariant is named), 2 usage
error.

Parallel sweep cells are capped by the OPTIDESIGN_THREADS environment
variable; results are assembled by cell index, so any thread count produces
identical output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, certificates, criteria, datagen, greedy, model, oracle
from .errors import OptidesignError

SCHEMA_VERSION = 1

SWEEP_HEADER = [
    "snr_db",
    "seed",
    "criterion",
    "k",
    "greedy_cost",
    "random_cost",
    "equiv_alpha",
    "equiv_epsilon",
]


class PoolHashMismatch(OptidesignError):
    """An input artifact was produced from a different pool."""


def _thread_count() -> int:
    env = os.environ.get("OPTIDESIGN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"OPTIDESIGN_THREADS={env!r} is not an integer") from None
    return min(4, os.cpu_count() or 1)


def _atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=path.suffix)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _emit_json(payload: dict, output: str | None) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if output:
        _atomic_write_text(Path(output), text)
    else:
        sys.stdout.write(text)


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _run_result(subcommand: str, config: dict, payload: dict, t0: float,
                pool_digest: str | None = None) -> dict:
    result = {
        "tool": "optidesign",
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "subcommand": subcommand,
        "config": config,
        "wall_time_s": round(time.perf_counter() - t0, 6),
        "payload": payload,
    }
    if pool_digest is not None:
        result["pool_hash"] = pool_digest
    return result


# ---------------------------------------------------------------------------
# Pool sourcing (file or inline synthetic spec).


def _add_pool_source_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pool", help="path to a pool JSON file")
    g = p.add_argument_group("inline synthetic pool (alternative to --pool)")
    g.add_argument("--synth-p", type=int, help="parameter dimension")
    g.add_argument("--synth-ne", type=int, default=1, help="rows per experiment")
    g.add_argument("--synth-size", type=int, default=50, help="pool size")
    g.add_argument("--noise-var", type=float, default=1.0)
    g.add_argument("--prior-var", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)


def _pool_from_args(args, parser: argparse.ArgumentParser) -> model.Pool:
    if bool(args.pool) == bool(args.synth_p):
        parser.error("exactly one input source required: --pool PATH or --synth-p ...")
    if args.pool:
        if not Path(args.pool).exists():
            parser.error(f"pool file not found: {args.pool}")
        return model.load_pool(args.pool)
    spec = datagen.SynthSpec(
        p=args.synth_p,
        n_e=args.synth_ne,
        pool_size=args.synth_size,
        noise_var=args.noise_var,
        prior_var=args.prior_var,
        seed=args.seed,
    )
    return datagen.synth_pool(spec)


def _load_artifact(path: str, expected_hash: str, kind: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    found = data.get("pool_hash")
    if found != expected_hash:
        raise PoolHashMismatch(
            f"{kind} file {path} was produced from pool {found}, "
            f"but the supplied pool hashes to {expected_hash}"
        )
    return data


# ---------------------------------------------------------------------------
# Subcommand implementations.


def _cmd_design(args, parser) -> int:
    t0 = time.perf_counter()
    pool = _pool_from_args(args, parser)
    crit = criteria.Criterion.from_string(args.criterion)
    ell = args.ell if args.ell is not None else args.k
    trace = greedy.greedy_design(
        pool, crit, ell, with_replacement=not args.no_replacement
    )
    payload = {
        "criterion": crit.value,
        "k": args.k,
        "ell": ell,
        "with_replacement": not args.no_replacement,
        "design": {str(i): c for i, c in trace.final.items},
        "cost": trace.final_cost,
        "trace": [
            {"h": s.h, "chosen_id": s.chosen_id, "gain": s.gain, "cost_after": s.cost_after}
            for s in trace.steps
        ],
    }
    _emit_json(
        _run_result("design", _config_echo(args), payload, t0, model.pool_hash(pool)),
        args.output,
    )
    _note(
        f"design: criterion={crit.value} ell={ell} "
        f"final cost {trace.final_cost:.6g} over {pool.n_experiments} candidates"
    )
    return 0


def _cmd_certify(args, parser) -> int:
    t0 = time.perf_counter()
    pool = _pool_from_args(args, parser)
    crit = criteria.Criterion.from_string(args.criterion)
    ell = args.ell if args.ell is not None else args.k
    digest = model.pool_hash(pool)
    payload: dict = {"criterion": crit.value, "k": args.k, "ell": ell}

    greedy_value = None
    if args.design:
        design_doc = _load_artifact(args.design, digest, "design")
        greedy_value = design_doc["payload"]["cost"]
        payload["greedy_value"] = greedy_value
    f_star = None
    if args.oracle:
        oracle_doc = _load_artifact(args.oracle, digest, "oracle")
        f_star = oracle_doc["payload"]["optimal_value"]
        payload["f_star"] = f_star

    if crit is criteria.Criterion.A:
        cert = certificates.alpha_certificate_from_bounds(
            pool,
            args.k,
            ell,
            tightened=args.tightened,
            with_replacement=not args.no_replacement,
        )
        payload["alpha_certificate"] = cert.to_dict()
        if f_star is not None:
            rhs = cert.factor_product * f_star
            payload["certified_upper_bound"] = rhs
            if greedy_value is not None:
                payload["holds"] = bool(greedy_value <= rhs + 1e-9)
    elif crit is criteria.Criterion.E:
        cert = certificates.epsilon_certificate_from_bounds(
            pool, args.k, ell, f_star=f_star
        )
        payload["epsilon_certificate"] = cert.to_dict()
        if f_star is not None:
            rhs = cert.multiplicative_factor * f_star + cert.additive_product
            payload["certified_upper_bound"] = rhs
            if greedy_value is not None:
                payload["holds"] = bool(greedy_value <= rhs + 1e-9)
    else:
        g = certificates.d_guarantee(args.k)
        payload["d_guarantee"] = {"finite": g.finite, "exponential": g.exponential}

    _emit_json(_run_result("certify", _config_echo(args), payload, t0, digest), args.output)
    _note(f"certify: criterion={crit.value} k={args.k} ell={ell}")
    return 0


def _cmd_audit(args, parser) -> int:
    t0 = time.perf_counter()
    pool = _pool_from_args(args, parser)
    crit = criteria.Criterion.from_string(args.criterion)
    ell = args.ell if args.ell is not None else args.k
    alpha_table, epsilon_table, skipped = oracle.exhaustive_tables(
        pool, crit, ell, args.k
    )
    payload = {
        "criterion": crit.value,
        "k": args.k,
        "ell": ell,
        "alpha_table": {f"{a},{b}": v for (a, b), v in sorted(alpha_table.items())},
        "epsilon_table": {f"{a},{b}": v for (a, b), v in sorted(epsilon_table.items())},
        "skipped_pairs": {f"{a},{b}": v for (a, b), v in sorted(skipped.items())},
    }
    _emit_json(
        _run_result("audit", _config_echo(args), payload, t0, model.pool_hash(pool)),
        args.output,
    )
    _note(f"audit: {len(alpha_table)} (a,b) cells for criterion {crit.value}")
    return 0


def _cmd_oracle(args, parser) -> int:
    t0 = time.perf_counter()
    pool = _pool_from_args(args, parser)
    crit = criteria.Criterion.from_string(args.criterion)
    report = oracle.optimal_design_bruteforce(
        pool, crit, args.k, with_replacement=not args.no_replacement
    )
    payload = {
        "criterion": crit.value,
        "k": args.k,
        "with_replacement": not args.no_replacement,
        "optimal_design": {str(i): c for i, c in report.optimal_design.items},
        "optimal_value": report.optimal_value,
        "n_enumerated": report.n_enumerated,
    }
    _emit_json(
        _run_result("oracle", _config_echo(args), payload, t0, model.pool_hash(pool)),
        args.output,
    )
    _note(
        f"oracle: optimum over {report.n_enumerated} designs, "
        f"value {report.optimal_value:.6g}"
    )
    return 0


def _cmd_synth(args, parser) -> int:
    t0 = time.perf_counter()
    if (args.noise_var is None) == (args.snr_db is None):
        parser.error("give exactly one of --noise-var or --snr-db")
    noise_var = (
        args.noise_var
        if args.noise_var is not None
        else datagen.noise_var_for_snr_db(args.snr_db, args.p, args.prior_var)
    )
    spec = datagen.SynthSpec(
        p=args.p,
        n_e=args.n_e,
        pool_size=args.size,
        noise_var=noise_var,
        prior_var=args.prior_var,
        seed=args.seed,
    )
    pool = datagen.synth_pool(spec)
    text = json.dumps(model.pool_to_dict(pool), indent=2) + "\n"
    _atomic_write_text(Path(args.out), text)
    payload = {
        "path": str(args.out),
        "p": spec.p,
        "n_e": spec.n_e,
        "pool_size": spec.pool_size,
        "noise_var": noise_var,
        "prior_var": spec.prior_var,
        "seed": spec.seed,
        "mean_gamma": float(np.mean([e.gamma for e in pool.experiments])),
    }
    _emit_json(
        _run_result("synth", _config_echo(args), payload, t0, model.pool_hash(pool)),
        args.output,
    )
    _note(f"synth: wrote {args.out} (|E|={spec.pool_size}, p={spec.p})")
    return 0


def _sweep_cell(figure: str, p: int, n_e: int, size: int, k: int, ell: int,
                prior_var: float, snr_db: float, seed: int) -> dict:
    crit = criteria.Criterion.A if figure == "fig-a" else criteria.Criterion.E
    noise_var = datagen.noise_var_for_snr_db(snr_db, p, prior_var)
    spec = datagen.SynthSpec(
        p=p, n_e=n_e, pool_size=size, noise_var=noise_var, prior_var=prior_var, seed=seed
    )
    pool = datagen.synth_pool(spec)
    trace = greedy.greedy_design(pool, crit, ell)
    rand = datagen.random_design(pool, k, seed=seed)
    random_cost = criteria.cost(crit, pool, rand)
    alpha_cert = certificates.alpha_certificate_from_bounds(pool, k, ell)
    eps_cert = certificates.epsilon_certificate_from_bounds(pool, k, ell)
    return {
        "snr_db": snr_db,
        "seed": seed,
        "criterion": crit.value,
        "k": k,
        "greedy_cost": trace.cost_at(k),
        "random_cost": random_cost,
        "equiv_alpha": alpha_cert.equivalent_alpha,
        "equiv_epsilon": eps_cert.equivalent_epsilon,
    }


def _write_csv(rows: list[dict], header: list[str], output: str | None) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=header)
    writer.writeheader()
    writer.writerows(rows)
    if output:
        _atomic_write_text(Path(output), buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def _sidecar_meta(output: str | None, meta: dict) -> None:
    if output:
        stem = Path(output).with_suffix("")
        _atomic_write_text(Path(f"{stem}.meta.json"), json.dumps(meta, indent=2) + "\n")
    else:
        _note(json.dumps(meta))


def _cmd_bench(args, parser) -> int:
    t0 = time.perf_counter()
    ell = args.ell if args.ell is not None else args.k
    if ell < args.k:
        parser.error("--ell must be >= --k (greedy prefix is read at k)")
    snrs = list(np.arange(args.snr_start, args.snr_stop + 1e-9, args.snr_step))
    cells = [
        (args.figure, args.p, args.n_e, args.size, args.k, ell, args.prior_var, s, seed)
        for s in snrs
        for seed in range(args.seeds)
    ]
    workers = _thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool_exec:
            rows = list(pool_exec.map(lambda c: _sweep_cell(*c), cells))
    else:
        rows = [_sweep_cell(*c) for c in cells]
    _write_csv(rows, SWEEP_HEADER, args.output)
    meta = _run_result(
        f"bench {args.figure}",
        _config_echo(args),
        {"n_rows": len(rows), "snr_grid": snrs, "seeds": args.seeds},
        t0,
    )
    _sidecar_meta(args.output, meta)
    if args.output and not args.no_plot:
        figure_path = Path(args.output).with_suffix(".png")
        from . import plots

        plots.render_sweep_figure(
            rows, figure_path, "A" if args.figure == "fig-a" else "E"
        )
        _note(f"bench: figure written to {figure_path}")
    _note(f"bench {args.figure}: {len(rows)} rows in {time.perf_counter()-t0:.1f}s")
    return 0


def _cmd_recsys(args, parser) -> int:
    t0 = time.perf_counter()
    if not Path(args.ratings).exists():
        parser.error(f"ratings file not found: {args.ratings}")
    table = datagen.load_ratings(args.ratings)
    ks = sorted({int(x) for x in args.ks.split(",") if x.strip()})
    if not ks:
        parser.error("--ks must list at least one size")
    rng = np.random.default_rng(args.seed)
    order = list(rng.permutation(len(table.users)))
    if args.train_users + args.test_users > len(table.users):
        parser.error(
            f"train+test users ({args.train_users}+{args.test_users}) exceed "
            f"table users ({len(table.users)})"
        )
    train = [table.users[i] for i in order[: args.train_users]]
    test = [table.users[i] for i in order[args.train_users : args.train_users + args.test_users]]
    pool = datagen.build_recsys_pool(
        table, train, noise_var=args.noise_var, prior_var=args.prior_var,
        impute=args.impute,
    )
    crit = criteria.Criterion.from_string(args.criterion)
    kmax = max(ks)
    with_repl = args.replacement
    trace = greedy.greedy_design(pool, crit, kmax, with_replacement=with_repl)
    chosen_ids = [s.chosen_id for s in trace.steps]
    rows = []
    for k in ks:
        design = model.Design.from_ids(chosen_ids[:k])
        ev = datagen.evaluate_recsys(pool, table, test, design)
        rows.append(
            {
                "k": k,
                "method": "greedy",
                "mae": ev.mae,
                "genre_error_rate": "" if ev.genre_error_rate is None else ev.genre_error_rate,
                "n_eval_entries": ev.n_eval_entries,
            }
        )
        if args.baseline:
            rng_k = np.random.default_rng((args.seed, k))
            ids = rng_k.choice(pool.n_experiments, size=k, replace=False)
            rand_design = model.Design.from_ids(int(i) for i in ids)
            ev_r = datagen.evaluate_recsys(pool, table, test, rand_design)
            rows.append(
                {
                    "k": k,
                    "method": "random",
                    "mae": ev_r.mae,
                    "genre_error_rate": "" if ev_r.genre_error_rate is None else ev_r.genre_error_rate,
                    "n_eval_entries": ev_r.n_eval_entries,
                }
            )
    header = ["k", "method", "mae", "genre_error_rate", "n_eval_entries"]
    _write_csv(rows, header, args.output)
    meta = _run_result(
        "recsys",
        _config_echo(args),
        {
            "n_rows": len(rows),
            "train_users": len(train),
            "test_users": len(test),
            "movies": len(table.movies),
        },
        t0,
        model.pool_hash(pool),
    )
    _sidecar_meta(args.output, meta)
    if args.output and not args.no_plot:
        figure_path = Path(args.output).with_suffix(".png")
        from . import plots

        plot_rows = [
            {**r, "mae": float(r["mae"])} for r in rows
        ]
        plots.render_recsys_figure(plot_rows, figure_path)
        _note(f"recsys: figure written to {figure_path}")
    _note(f"recsys: scored k in {ks} on {len(test)} test users")
    return 0


def _config_echo(args) -> dict:
    skip = {"func"}
    return {
        k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None
    }


# ---------------------------------------------------------------------------
# Parser assembly.


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="optidesign",
        description="Greedy Bayesian experimental design with near-optimality certificates.",
    )
    parser.add_argument("--version", action="version", version=f"optidesign {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, k_required=True):
        _add_pool_source_args(p)
        p.add_argument("--criterion", required=True, help="A, E, or D")
        p.add_argument("--k", type=int, required=k_required, help="design budget")
        p.add_argument("--ell", type=int, help="greedy iterations (default: k)")
        p.add_argument("--output", help="write JSON here (default: stdout)")

    p_design = sub.add_parser("design", help="run the greedy design recursion")
    common(p_design)
    p_design.add_argument(
        "--no-replacement", action="store_true", help="select each experiment at most once"
    )
    p_design.set_defaults(func=_cmd_design)

    p_cert = sub.add_parser("certify", help="closed-form near-optimality certificates")
    common(p_cert)
    p_cert.add_argument("--tightened", action="store_true",
                        help="use the sharper spectral-sum alpha bound")
    p_cert.add_argument("--no-replacement", action="store_true",
                        help="tightened bound assumes distinct selections")
    p_cert.add_argument("--design", help="design JSON to certify (hash-checked)")
    p_cert.add_argument("--oracle", help="oracle JSON supplying f_star (hash-checked)")
    p_cert.set_defaults(func=_cmd_certify)

    p_audit = sub.add_parser("audit", help="exhaustive alpha/epsilon tables (small pools)")
    common(p_audit)
    p_audit.set_defaults(func=_cmd_audit)

    p_oracle = sub.add_parser("oracle", help="brute-force optimal design (small pools)")
    common(p_oracle)
    p_oracle.add_argument("--no-replacement", action="store_true")
    p_oracle.set_defaults(func=_cmd_oracle)

    p_synth = sub.add_parser("synth", help="generate a synthetic pool JSON")
    p_synth.add_argument("--p", type=int, required=True)
    p_synth.add_argument("--n-e", type=int, default=5, dest="n_e")
    p_synth.add_argument("--size", type=int, default=200)
    p_synth.add_argument("--noise-var", type=float)
    p_synth.add_argument("--snr-db", type=float,
                         help="alternative to --noise-var; see README for the mapping")
    p_synth.add_argument("--prior-var", type=float, default=1.0)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True, help="pool JSON destination")
    p_synth.add_argument("--output", help="write the run summary JSON here")
    p_synth.set_defaults(func=_cmd_synth)

    p_bench = sub.add_parser("bench", help="SNR sweeps reproducing the figure data")
    p_bench.add_argument("figure", choices=["fig-a", "fig-e"])
    p_bench.add_argument("--p", type=int, default=20)
    p_bench.add_argument("--n-e", type=int, default=5, dest="n_e")
    p_bench.add_argument("--size", type=int, default=200)
    p_bench.add_argument("--k", type=int, default=40)
    p_bench.add_argument("--ell", type=int)
    p_bench.add_argument("--seeds", type=int, default=10)
    p_bench.add_argument("--snr-start", type=float, default=-20.0)
    p_bench.add_argument("--snr-stop", type=float, default=10.0)
    p_bench.add_argument("--snr-step", type=float, default=2.0)
    p_bench.add_argument("--prior-var", type=float, default=1.0)
    p_bench.add_argument("--output", help="CSV destination (default: stdout)")
    p_bench.add_argument("--no-plot", action="store_true")
    p_bench.set_defaults(func=_cmd_bench)

    p_rec = sub.add_parser("recsys", help="cold-start survey pipeline on a ratings CSV")
    p_rec.add_argument("--ratings", required=True, help="CSV user,movie,rating[,genre]")
    p_rec.add_argument("--train-users", type=int, required=True)
    p_rec.add_argument("--test-users", type=int, required=True)
    p_rec.add_argument("--ks", default="10,20", help="comma-separated survey sizes")
    p_rec.add_argument("--criterion", default="A")
    p_rec.add_argument("--noise-var", type=float, default=1.0)
    p_rec.add_argument("--prior-var", type=float, default=100.0)
    p_rec.add_argument("--impute", choices=["zero", "mean"], default="zero")
    p_rec.add_argument("--seed", type=int, default=0)
    p_rec.add_argument("--replacement", action="store_true",
                       help="allow asking about the same movie twice")
    p_rec.add_argument("--no-baseline", dest="baseline", action="store_false",
                       help="skip the random-selection baseline")
    p_rec.add_argument("--output", help="CSV destination (default: stdout)")
    p_rec.add_argument("--no-plot", action="store_true")
    p_rec.set_defaults(func=_cmd_recsys)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (OptidesignError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
