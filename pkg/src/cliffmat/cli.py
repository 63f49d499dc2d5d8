"""Command line entry point: ``cliffmat <subcommand> [flags]``.

Data go to ``--out`` (default stdout) as CSV or JSON lines.  When ``--out``
names a file, a manifest with the flags, seed, version, wall-clock time and
the SHA-256 of the output is written next to it as ``<out>.manifest.json``.
Exit codes: 0 success, 2 a verification failed, 1 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from importlib.metadata import PackageNotFoundError, version

import numpy as np

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _num(x) -> str:
    return repr(float(x))


# ----------------------------------------------------------------------------
# subcommands; each returns (text, passed, hint)


def cmd_algebra(args):
    from .clifford import (build_signature, h_value, self_sign_sum, self_sign_sum_closed, verify_associativity)

    custom = _parse_table(args.table) if args.kind == "custom" else None
    sig = build_signature(args.p, args.kind, custom)
    mode = "exhaustive" if args.exhaustive else "sampled"
    rep = verify_associativity(sig, mode, count=args.count, seed=args.seed)
    doc = {"p": args.p, "kind": args.kind, "associativity": "pass" if rep.passed else "fail",
           "checked": rep.checked, "mode": mode}
    passed = rep.passed
    if rep.counterexample is not None:
        doc["counterexample"] = list(rep.counterexample)
    if args.kind == "standard":
        s = self_sign_sum(sig)
        doc["self_sign_sum"] = s
        doc["self_sign_sum_closed"] = self_sign_sum_closed(args.p)
        passed &= s == doc["self_sign_sum_closed"]
        rng = np.random.Generator(np.random.PCG64(args.seed))
        picks = sorted({0, sig.size - 1} | set(int(c) for c in rng.integers(0, sig.size, size=min(8, sig.size))))
        checks = []
        for C in picks:
            h = h_value(sig, C)
            checks.append({"C": C, "h": h, "vanishes": h == 0})
            if C not in (0, sig.size - 1):
                passed &= h == 0
        doc["h_spotchecks"] = checks
    return json.dumps(doc) + "\n", passed, None


def _parse_table(text):
    if not text:
        raise UsageError("--table is required for --kind custom (format 'i,j=+1;i,j=-1')")
    out = {}
    for item in text.split(";"):
        if not item.strip():
            continue
        pair, sign = item.split("=")
        i, j = (int(v) for v in pair.split(","))
        out[(i, j)] = int(sign)
    return out


def _chunks(total, threads):
    threads = max(1, min(threads, total)) if total else 1
    bounds = np.linspace(0, total, threads + 1).astype(int)
    return [(int(bounds[k]), int(bounds[k + 1])) for k in range(threads) if bounds[k + 1] > bounds[k]]


def _pmap(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def cmd_sample(args):
    from .clifford import SignatureKind, predicted_multiplicity
    from .matrices import EnsembleConfig
    from .polynomials import summarize_eigenvalues
    from .spectral import sample_eigenvalues

    cfg = EnsembleConfig(args.n, args.p, t=args.t, seed=args.seed)
    parts = _pmap(lambda c: sample_eigenvalues(cfg, c[1] - c[0], start=c[0]), _chunks(args.samples, args.threads),
                  args.threads)
    ev = np.concatenate(parts) if parts else np.zeros((0, cfg.n << args.p))
    expect = predicted_multiplicity(args.p).a if cfg.signature.kind is SignatureKind.STANDARD else None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["replica", "n_distinct", "multiplicity", "radius"] + [f"lambda{k}" for k in range(ev.shape[1])])
    passed = True
    for r, e in enumerate(ev):
        s = summarize_eigenvalues(e, args.tol)
        m = s.uniform_multiplicity()
        if args.verify and expect is not None:
            passed &= m == expect
        w.writerow([r, len(s.distinct), m if m is not None else -1, _num(np.abs(e).max())] + [_num(x) for x in e])
    hint = "set datafile separator ','; plot '<out>' skip 1 using 5:(0) with points title 'eigenvalues'"
    return buf.getvalue(), passed, hint


def cmd_identities(args):
    from .identities import Drift, check_identities, generator_case
    from .matrices import EnsembleConfig, sample_blocks

    case = generator_case(args.case)
    if args.drift != "none":
        case = case.with_drift(Drift(args.drift), args.sphere_dim)
    cfg = EnsembleConfig(args.n, case.p, seed=args.seed)

    def one(r):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(args.seed, spawn_key=(r, 7))))
        return r, check_identities(sample_blocks(cfg, r), case, grid_size=args.grid, tol=args.tol, rng=rng)

    results = _pmap(one, list(range(args.samples)), args.threads)
    lines, passed = [], True
    for r, reports in results:
        for rep in reports:
            doc = {"replica": r, **rep.as_dict()}
            if not args.full:
                for key in ("points", "closed", "numeric"):
                    doc.pop(key, None)
            lines.append(json.dumps(doc, default=float))
            passed &= rep.passed
    hint = "plot '<out>' using 0:'max_rel_residual' (after jq -r '.max_rel_residual') with points"
    return "\n".join(lines) + "\n", passed, hint


def cmd_simulate(args):
    from .identities import generator_case
    from .matrices import EnsembleConfig
    from .polynomials import MonicPolynomial
    from .simulation import CoefficientDynamics, SimConfig, simulate_coefficients, simulate_matrix

    cfg = SimConfig(args.dt, args.steps, args.process, seed=args.seed, stride=args.stride, paths=args.paths,
                    workers=args.threads)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if args.process == "coeff":
        roots = [float(x) for x in args.roots.split(",")]
        P0 = MonicPolynomial.from_roots(roots)
        if args.case == "diagonal":
            dyn = CoefficientDynamics.diagonal()
        else:
            case = generator_case(args.case)
            dyn = CoefficientDynamics.from_case(case, args.power)
        tr = simulate_coefficients(cfg, P0, dyn)
        data = tr.coefficients
        w.writerow(["path", "time"] + [f"a{k}" for k in range(data.shape[2])])
    else:
        tr = simulate_matrix(cfg, EnsembleConfig(args.n, args.p, seed=args.seed), initial=args.initial)
        data = tr.eigenvalues
        w.writerow(["path", "time"] + [f"lambda{k}" for k in range(data.shape[2])])
    for path in range(data.shape[0]):
        for k, t in enumerate(tr.times):
            w.writerow([path, _num(t)] + [_num(x) for x in data[path, k]])
    hint = "set datafile separator ','; plot '<out>' skip 1 using 2:3 with lines title 'first column'"
    return buf.getvalue(), True, hint


def cmd_spectra(args):
    from .clifford import predicted_multiplicity
    from .matrices import EnsembleConfig
    from .spectral import SpectralLaw, mcmc_oracle, normalized_distinct, sample_eigenvalues, two_sample_test

    pred = predicted_multiplicity(args.p)
    cfg = EnsembleConfig(args.n, args.p, seed=args.seed)
    factor = "+" if pred.splits else None
    parts = _pmap(lambda c: sample_eigenvalues(cfg, c[1] - c[0], start=c[0], factor=factor),
                  _chunks(args.samples, args.threads), args.threads)
    lam = normalized_distinct(np.concatenate(parts), pred.a, args.p)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["replica"] + [f"lambda{k}" for k in range(lam.shape[1])])
    for r, row in enumerate(lam):
        w.writerow([r] + [_num(x) for x in row])
    passed = True
    if args.compare:
        mc = mcmc_oracle(SpectralLaw(lam.shape[1], pred.repulsion), args.samples, seed=args.seed)
        test = two_sample_test(lam, mc.samples, seed=args.seed)
        passed = test.p_value > args.alpha
        print(json.dumps({"two_sample": test.as_dict(), "mcmc_ess": mc.ess, "passed": passed}), file=sys.stderr)
    hint = "set datafile separator ','; plot '<out>' skip 1 using 2:3 with dots title 'distinct eigenvalues'"
    return buf.getvalue(), passed, hint


def cmd_bott(args):
    from .spectral import bott_table

    rows = bott_table(args.pmax, verify=args.verify, n=args.n, samples=args.samples,
                      law_samples=args.law_samples, seed=args.seed)
    passed = all(r.confirmed for r in rows)
    if args.json:
        text = "".join(json.dumps(r.as_dict(), ensure_ascii=False, default=float) + "\n" for r in rows)
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["p", "structure", "d", "alpha", "a", "splits", "confirmed"])
        for r in rows:
            w.writerow([r.p, r.structure, r.d, r.alpha, r.a, int(r.splits),
                        "" if r.empirical is None else int(r.confirmed)])
        text = buf.getvalue()
    return text, passed, "set datafile separator ','; plot '<out>' skip 1 using 1:4 with linespoints title 'alpha'"


# ----------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--config", help="flat key=value file of flag defaults")
    common.add_argument("--gnuplot-hint", action="store_true", help="print a plot recipe to stderr")

    parser = _Parser(prog="cliffmat", description="Random Cl-symmetric matrices and their spectra.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("algebra", parents=[common], help="sign-structure verification report (JSON)")
    a.add_argument("--p", type=int, required=True)
    a.add_argument("--kind", choices=["standard", "custom"], default="standard")
    a.add_argument("--table", help="custom signs, e.g. '1,1=-1;1,2=+1'")
    a.add_argument("--exhaustive", action="store_true", help="check all triples (default: sampled)")
    a.add_argument("--count", type=int, default=10000, help="triples for the sampled check")
    a.set_defaults(func=cmd_algebra)

    s = sub.add_parser("sample", parents=[common], help="spectrum summaries of Gaussian matrices (CSV)")
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--t", type=float, default=1.0)
    s.add_argument("--tol", type=float, default=1e-7, help="clustering tolerance relative to the radius")
    s.add_argument("--verify", action="store_true", help="fail unless every sample has the predicted multiplicity")
    s.set_defaults(func=cmd_sample)

    i = sub.add_parser("identities", parents=[common], help="generator identity residuals (JSON lines)")
    i.add_argument("--case", default="0", help="p, or real|hermitian|quaternion")
    i.add_argument("--n", type=int, default=2)
    i.add_argument("--samples", type=int, default=20)
    i.add_argument("--grid", type=int, default=5)
    i.add_argument("--tol", type=float, default=1e-6)
    i.add_argument("--drift", choices=["none", "ou", "sphere"], default="none")
    i.add_argument("--sphere-dim", type=float, default=None)
    i.add_argument("--full", action="store_true", help="include every grid point")
    i.add_argument("--json", dest="out_json", metavar="PATH", help="alias for --out")
    i.set_defaults(func=cmd_identities)

    m = sub.add_parser("simulate", parents=[common], help="Euler-Maruyama trajectories (CSV)")
    m.add_argument("--process", choices=["bm", "ou", "sphere", "coeff"], default="ou")
    m.add_argument("--p", type=int, default=0)
    m.add_argument("--n", type=int, default=2)
    m.add_argument("--dt", type=float, default=0.01)
    m.add_argument("--steps", type=int, default=1000)
    m.add_argument("--paths", type=int, default=10)
    m.add_argument("--stride", type=int, default=100)
    m.add_argument("--initial", choices=["zero", "stationary"], default="zero")
    m.add_argument("--roots", default="-1,1", help="initial roots for the coefficient process; write --roots=-1,1 when the first is negative")
    m.add_argument("--case", default="diagonal", help="coefficient dynamics: diagonal or a case like --case of identities")
    m.add_argument("--power", type=int, default=1, help="a in P = Q^a for the coefficient process")
    m.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("spectra", parents=[common], help="rescaled distinct eigenvalues (CSV)")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--samples", type=int, default=10000)
    sp.add_argument("--compare", action="store_true", help="test against the MCMC oracle")
    sp.add_argument("--alpha", type=float, default=0.01, help="significance level for --compare")
    sp.set_defaults(func=cmd_spectra)

    b = sub.add_parser("bott", parents=[common], help="periodicity table (CSV, or JSON lines with --json)")
    b.add_argument("--pmax", type=int, default=8)
    b.add_argument("--verify", action="store_true")
    b.add_argument("--n", type=int, default=2)
    b.add_argument("--samples", type=int, default=200)
    b.add_argument("--law-samples", type=int, default=2000)
    b.add_argument("--json", action="store_true")
    b.set_defaults(func=cmd_bott)
    return parser


def _apply_config(parser, argv):
    """Re-parse with defaults from ``--config``; explicit flags still win."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        with open(args.config) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    defaults = {}
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"bad config line {raw!r}")
        key, value = (x.strip() for x in line.split("=", 1))
        defaults[key.lstrip("-").replace("-", "_")] = value
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in subparser._actions}
    for key, value in defaults.items():
        if key not in known or key in ("config", "help", "func"):
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        action = known[key]
        if action.nargs == 0:
            value = value.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            value = action.type(value)
        subparser.set_defaults(**{key: value})
    return parser.parse_args(argv)


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if getattr(args, "out_json", None):
        args.out = args.out_json
    start = time.time()
    try:
        text, passed, hint = args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError) as exc:
        print(f"cliffmat {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    elapsed = time.time() - start
    try:
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            _write_manifest(args, text, elapsed, passed)
        else:
            sys.stdout.write(text)
            sys.stdout.flush()
    except OSError as exc:
        print(f"cliffmat: cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.gnuplot_hint and hint:
        print(hint.replace("<out>", args.out or "-"), file=sys.stderr)
    if not passed:
        print(f"cliffmat {args.command}: verification failed", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _write_manifest(args, text, elapsed, passed):
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    doc = {
        "subcommand": args.command,
        "flags": flags,
        "seed": args.seed,
        "version": _version(),
        "wall_clock_seconds": elapsed,
        "output_sha256": hashlib.sha256(text.encode("utf-8")).hexdigest(),
        "passed": bool(passed),
    }
    with open(args.out + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, default=str)
        fh.write("\n")


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
