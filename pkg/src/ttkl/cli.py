"""Command-line front end.

Subcommands::

    ttkl run CONFIG            full pipeline, writes tables, report and expansion
    ttkl verify EXPANSION CONFIG   replay the final-expansion tests
    ttkl sample-modes EXPANSION --grid N
    ttkl oracle CONFIG         reference Nystrom eigen-solve of the covariance

Exit codes: 0 success, 1 other library error, 2 bad usage, 3 bad config,
4 failed pipeline stage.
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import nurbs
from .errors import ConfigError, StageFailed, TTKLError
from .kernels import make_kernel
from .pipeline import load_config, run
from .serialize import load_expansion, save_expansion
from .validate import final_cumulant_error, nystrom_oracle

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 3
EXIT_STAGE = 4

DIRECTIONS = ("f", "g", "h")
DEFAULT_ORACLE_ORDER = {1: 200, 2: 40, 3: 12}

log = logging.getLogger("ttkl")


def write_table(path, header, columns):
    """Comma-separated table with one header row; ``columns`` are equal-length sequences."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def read_table(path):
    """Inverse of :func:`write_table`: header list and float array (rows, cols)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float).reshape(len(rows) - 1, len(rows[0]))


def write_eigenvalues(out, modes, prefix="eigenvalues"):
    paths = []
    for name, eig in zip(DIRECTIONS, (modes.eig_f, modes.eig_g, modes.eig_h)):
        if eig is None:
            continue
        p = out / f"{prefix}_{name}.csv"
        write_table(p, ["index", "value"], [range(1, len(eig) + 1), eig])
        paths.append(p)
    return paths


def write_mode_samples(out, modes, grid):
    x = np.linspace(0.0, 1.0, grid)
    paths = []
    for name, M in zip(DIRECTIONS, modes.chain):
        V = M(x)  # (blocks, cols, grid)
        if M.rows == 1:
            header = [f"{name}_{j + 1}" for j in range(M.cols)]
        else:
            header = [f"{name}_{i + 1}_{j + 1}" for i in range(M.rows) for j in range(M.cols)]
        cols = [V[i, j] for i in range(M.rows) for j in range(M.cols)]
        p = out / f"modes_{name}.csv"
        write_table(p, ["coordinate"] + header, [x] + cols)
        paths.append(p)
    return paths


def write_errdm(out, report):
    for order in ("2", "3"):
        errdm = report.diagnostics.get(f"errdm_order{order}")
        if errdm is None:
            continue
        errdm = np.asarray(errdm)
        header = ["sweep"] + [f"interface_{k + 1}" for k in range(errdm.shape[0])]
        write_table(out / f"errdm_order{order}.csv", header, [range(1, errdm.shape[1] + 1)] + list(errdm))


def write_report(out, name, data, as_json):
    with open(out / f"{name}.yaml", "w") as fh:
        yaml.safe_dump(data, fh, sort_keys=False)
    if as_json:
        with open(out / f"{name}.json", "w") as fh:
            json.dump(data, fh, indent=2)


def _resolve_config(args):
    path = args.config or getattr(args, "config_path", None)
    if path is None:
        raise ConfigError("no config given (positional CONFIG or --config)")
    cfg = load_config(path)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "grid", None) is not None:
        cfg.grid = args.grid
    if getattr(args, "qr", None) is not None:
        cfg.qr_method = args.qr
    return cfg


def _out_dir(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args):
    cfg = _resolve_config(args)
    out = _out_dir(args)
    fe, report = run(cfg, order=args.order)
    save_expansion(fe, out / "expansion.ttkl")
    write_eigenvalues(out, fe.modes)
    write_mode_samples(out, fe.modes, cfg.grid)
    write_errdm(out, report)
    write_table(out / "latent_covariance.csv", [f"c_{j + 1}" for j in range(fe.n)], list(fe.cum2.T))
    write_report(out, "report", report.as_dict(), args.json_report)
    for e in report.errors:
        print(f"{e.metric} = {e.value:.4e} (N={e.N})")
    print(f"ranks: {report.as_dict()['ranks']}  modes: {report.counts['modes']}  "
          f"latent: {report.counts['latent']} -> {report.counts['retained']}")
    print(f"outputs in {out}")
    return EXIT_OK


def cmd_verify(args):
    cfg = _resolve_config(args)
    fe = load_expansion(args.expansion)
    geom = fe.geometry if fe.geometry is not None else cfg.build_geometry()
    cov = nurbs.pullback_kernel(geom, make_kernel(cfg.kernel2, 2))
    errors = [final_cumulant_error(fe, 2, cov, cfg.N, cfg.test_seed)]
    if fe.cum3 is not None and cfg.kernel3 is not None:
        cum3 = nurbs.pullback_kernel(geom, make_kernel(cfg.kernel3, 3))
        errors.append(final_cumulant_error(fe, 3, cum3, cfg.N, cfg.test_seed))
    stored = fe.metadata.get("errors", {})
    data = {"expansion": str(args.expansion), "errors": []}
    for e in errors:
        d = e.as_dict()
        d["stored"] = stored.get(e.metric)
        data["errors"].append(d)
        ref = "" if d["stored"] is None else f" (stored {d['stored']:.4e})"
        print(f"{e.metric} = {e.value:.4e}{ref}")
    if args.out_dir:
        write_report(_out_dir(args), "verify", data, args.json_report)
    return EXIT_OK


def cmd_sample_modes(args):
    fe = load_expansion(args.expansion)
    out = _out_dir(args)
    paths = write_mode_samples(out, fe.modes, args.grid)
    paths += write_eigenvalues(out, fe.modes)
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_oracle(args):
    cfg = _resolve_config(args)
    out = _out_dir(args)
    geom = cfg.build_geometry()
    m = geom.dim_param
    order = args.order_points or cfg.oracle_order or DEFAULT_ORACLE_ORDER[m]
    cov = nurbs.pullback_kernel(geom, make_kernel(cfg.kernel2, 2))
    res = nystrom_oracle(cov, m, order)
    keep = min(args.count, res.eigenvalues.size)
    write_table(out / "oracle_eigenvalues.csv", ["index", "value"],
                [range(1, keep + 1), res.eigenvalues[:keep]])
    coords = [f"coordinate_{a + 1}" for a in range(m)]
    vecs = [f"mode_{k + 1}" for k in range(keep)]
    write_table(out / "oracle_modes.csv", coords + ["weight"] + vecs,
                list(res.nodes.T) + [res.weights] + list(res.vectors[:, :keep].T))
    print(f"lambda_1 = {res.eigenvalues[0]:.10g} on a {order}^{m} Gauss grid; outputs in {out}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="ttkl", description="Tensor-train K-L expansions of non-Gaussian random fields")
    p.add_argument("-v", "--verbose", action="store_true", help="log stage progress")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_positional=True):
        if config_positional:
            sp.add_argument("config_path", nargs="?", metavar="CONFIG")
        sp.add_argument("--config", help="config file (TOML)")
        sp.add_argument("--out-dir", default="ttkl_out")
        sp.add_argument("--seed", type=int, help="override every seed in the config")
        sp.add_argument("--json-report", action="store_true", help="also write the report as JSON")

    r = sub.add_parser("run", help="run the full pipeline")
    common(r)
    r.add_argument("--grid", type=int, help="points per direction for mode samples")
    r.add_argument("--order", type=int, choices=(2, 3), default=3, help="highest cumulant order to match")
    r.add_argument("--qr", choices=("householder", "cholesky"))
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="re-test a saved expansion against the config kernels")
    v.add_argument("expansion")
    common(v)
    v.set_defaults(func=cmd_verify, out_dir=None)

    s = sub.add_parser("sample-modes", help="tabulate modes of a saved expansion")
    s.add_argument("expansion")
    s.add_argument("--grid", type=int, default=101)
    s.add_argument("--out-dir", default="ttkl_out")
    s.set_defaults(func=cmd_sample_modes)

    o = sub.add_parser("oracle", help="Nystrom reference eigenpairs of the covariance")
    common(o)
    o.add_argument("--grid", dest="order_points", type=int, help="Gauss points per direction")
    o.add_argument("--count", type=int, default=50, help="number of eigenpairs to write")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageFailed as exc:
        print(f"stage failed: {exc}", file=sys.stderr)
        if exc.diagnostics:
            print(json.dumps(exc.diagnostics, default=str)[:2000], file=sys.stderr)
        return EXIT_STAGE
    except (TTKLError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
