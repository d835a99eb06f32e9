"""Command-line front end: file ingestion, run configuration, traces.

Subcommands: maxcut, spca-dspca, spca-spectral, spca-homotopy, and
solve-generic (minimize a linear cost over a chosen geometry; on the
spectahedron that computes the smallest eigenvalue of the cost matrix).

Graph inputs are Gset-style text: a header line "n m_edges" followed by
m_edges lines "i j w" with 1-based vertices; '#' and 'c' lines are
comments.  Matrix inputs are plain CSV.  Traces can be written as CSV
(one row per outer iteration) or as a canonical JSON dump of the full
result; the JSON emitter is deterministic, so identical configurations
produce byte-identical files.

Exit codes: 0 when the run ends CertifiedOptimal or RankDeficientStop,
2 on ReachedPMax, 1 on any error.
"""

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from .applications import (
    DEFAULT_KAPPAS,
    Graph,
    SpcaInstance,
    maxcut_bound,
    maxcut_round,
    spca_dspca,
    spca_homotopy,
    spca_spectral,
)
from .costs import LinearCost
from .errors import (
    LowRankSdpError,
    NonFinite,
    ParseError,
    RaggedRows,
    SelfLoop,
    TraceIoError,
)
from .manifold import elliptope, spectahedron
from .meta_solver import MetaOptions, numerical_rank, solve


@dataclass
class RunConfig:
    """One fully parsed invocation; numeric fields carry module defaults."""

    subcommand: str
    input_path: str
    p0: int = 1
    epsilon: float = 1e-12
    rank_tol: float = 1e-6
    p_max: int = None
    rho: float = None
    rho_frac: float = None
    kappa_ladder: tuple = None
    mu_step: float = 0.05
    seed: int = 0
    trace_out: str = None
    fmt: str = "json"
    quiet: bool = False
    geometry: str = "spectahedron"

    def meta_options(self):
        return MetaOptions(
            p0=self.p0, epsilon=self.epsilon, rank_tol=self.rank_tol, p_max=self.p_max
        )


# ----------------------------------------------------------------- parsing


def _data_lines(path):
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            stripped = raw.strip()
            if not stripped or stripped.startswith("#") or stripped.startswith("c"):
                continue
            yield lineno, stripped


def parse_graph(path):
    """Read a Gset-style graph file into a Graph (0-based internally)."""
    lines = _data_lines(path)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise ParseError("empty graph file") from None
    fields = header.split()
    if len(fields) != 2:
        raise ParseError("header must be 'n_vertices m_edges'", line=lineno)
    try:
        n, m = int(fields[0]), int(fields[1])
    except ValueError:
        raise ParseError("header must hold two integers", line=lineno) from None
    if n < 1 or m < 0:
        raise ParseError("header counts out of range", line=lineno)

    edges = []
    for lineno, text in lines:
        if len(edges) == m:
            raise ParseError(f"more than the declared {m} edges", line=lineno)
        fields = text.split()
        if len(fields) != 3:
            raise ParseError("edge lines must be 'i j w'", line=lineno)
        try:
            i, j, w = int(fields[0]), int(fields[1]), float(fields[2])
        except ValueError:
            raise ParseError("malformed edge line", line=lineno) from None
        if i == j:
            raise SelfLoop(f"vertex {i} joined to itself", line=lineno)
        if not (1 <= i <= n and 1 <= j <= n):
            raise ParseError(f"vertex index outside 1..{n}", line=lineno)
        if not np.isfinite(w):
            raise ParseError("edge weight is not finite", line=lineno)
        edges.append((i - 1, j - 1, w))
    if len(edges) != m:
        raise ParseError(f"declared {m} edges, found {len(edges)}")
    return Graph(n, edges)


def parse_dense_matrix(path):
    """Read a CSV file of finite reals into an m-by-n array."""
    rows = []
    width = None
    for lineno, text in _data_lines(path):
        cells = [c.strip() for c in text.split(",")]
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise RaggedRows(
                f"row has {len(cells)} columns, expected {width}", line=lineno
            )
        row = []
        for col, cell in enumerate(cells):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"cell {col} is not a number", line=lineno) from None
            if not np.isfinite(v):
                raise NonFinite(
                    f"non-finite entry at row {len(rows)}, column {col}",
                    row=len(rows), col=col, line=lineno,
                )
            row.append(v)
        rows.append(row)
    if not rows:
        raise ParseError("empty matrix file")
    return np.array(rows)


# ------------------------------------------------------------------ traces


def _jsonable(obj):
    """Mirror an object as JSON-safe data; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def _result_document(result):
    return _jsonable(
        {
            "status": result.status,
            "objective": result.objective,
            "p": result.p,
            "Y_star": result.Y_star.Y,
            "certificate": {
                "lam": result.certificate.lam,
                "smin": result.certificate.smin,
                "vmin": result.certificate.vmin,
            },
            "rank_history": [[p, s] for p, s in result.rank_history],
            "traces": [
                {
                    "p": p,
                    "records": [
                        {
                            "iteration": r.iteration,
                            "cost": r.cost,
                            "grad_norm": r.grad_norm,
                            "radius": r.radius,
                            "ratio": r.ratio,
                            "accepted": r.accepted,
                            "inner_iterations": r.inner_iterations,
                            "stop_reason": r.stop_reason,
                        }
                        for r in records
                    ],
                }
                for p, records in result.traces
            ],
        }
    )


def canonical_json(document):
    """Serialize so that emit, parse, re-emit is byte-identical."""
    return json.dumps(document, sort_keys=True, indent=1, allow_nan=False) + "\n"


def emit_trace(result, fmt, path):
    """Write a solver trace as 'csv' (per-iteration rows) or 'json'."""
    if fmt not in ("json", "csv"):
        raise ValueError(f"unknown trace format {fmt!r}")
    if fmt == "json":
        text = canonical_json(_result_document(result))
    else:
        smin_by_stage = {p: s for p, s in result.rank_history}
        out = ["rank_p,outer_iter,cost,grad_norm,tr_radius,lambda_min"]
        for p, records in result.traces:
            for k, r in enumerate(records):
                # the certificate eigenvalue exists only at the rank
                # boundary, i.e. after the stage's last iteration
                last = k == len(records) - 1 and p in smin_by_stage
                lam = repr(smin_by_stage[p]) if last else ""
                out.append(
                    f"{p},{r.iteration},{r.cost!r},{r.grad_norm!r},{r.radius!r},{lam}"
                )
        text = "\n".join(out) + "\n"
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise TraceIoError(f"cannot write trace: {exc}") from None


# ------------------------------------------------------------ subcommands


def _spca_instance(cfg, data):
    if cfg.rho is not None and cfg.rho_frac is not None:
        raise ValueError("pass at most one of --rho and --rho-frac")
    kappa = cfg.kappa_ladder[-1] if cfg.kappa_ladder else DEFAULT_KAPPAS[-1]
    if cfg.rho is not None:
        return SpcaInstance(data, cfg.rho, kappa=kappa)
    frac = 0.05 if cfg.rho_frac is None else cfg.rho_frac
    return SpcaInstance.at_fraction(data, frac, kappa=kappa)


def _report(cfg, res, extra=()):
    if not cfg.quiet:
        rank = numerical_rank(res.Y_star, cfg.rank_tol)
        print(
            f"status {res.status}  objective {res.objective:.10g}  "
            f"rank {rank}  lambda_min {res.certificate.smin:.6e}"
        )
        for line in extra:
            print(line)
    if cfg.trace_out:
        emit_trace(res, cfg.fmt, cfg.trace_out)
    return {"CertifiedOptimal": 0, "RankDeficientStop": 0}.get(res.status, 2)


def _run_maxcut(cfg):
    g = parse_graph(cfg.input_path)
    res, bound = maxcut_bound(g, cfg.meta_options(), seed=cfg.seed)
    _, cut = maxcut_round(g, res.Y_star, seed=cfg.seed)
    return _report(cfg, res, [f"bound {bound:.10g}  rounded cut {cut:.10g}"])


def _run_dspca(cfg):
    inst = _spca_instance(cfg, parse_dense_matrix(cfg.input_path))
    ladder = list(cfg.kappa_ladder) if cfg.kappa_ladder else None
    res, comp = spca_dspca(inst, cfg.meta_options(), continuation=ladder, seed=cfg.seed)
    return _report(
        cfg,
        res,
        [
            f"value {comp.objective:.10g}  cardinality {comp.cardinality}  "
            f"lambda_max {comp.lambda_max:.6f}"
        ],
    )


def _run_spectral(cfg):
    inst = _spca_instance(cfg, parse_dense_matrix(cfg.input_path))
    res, comp = spca_spectral(inst, cfg.meta_options(), seed=cfg.seed)
    return _report(
        cfg,
        res,
        [
            f"value {comp.objective:.10g}  cardinality {comp.cardinality}  "
            f"lambda_max {comp.lambda_max:.6f}"
        ],
    )


def _run_homotopy(cfg):
    inst = _spca_instance(cfg, parse_dense_matrix(cfg.input_path))
    res, comp = spca_spectral(inst, cfg.meta_options(), seed=cfg.seed)
    steps = int(round(1.0 / cfg.mu_step))
    if abs(steps * cfg.mu_step - 1.0) > 1e-9 or steps < 1:
        raise ValueError("--mu-step must divide 1 evenly")
    mus = np.linspace(0.0, 1.0, steps + 1)
    point, trace = spca_homotopy(inst, res.Y_star, mus=mus)
    mu, fccv, fevd, lam = trace[-1]
    return _report(
        cfg,
        res,
        [f"homotopy endpoint  value {fevd:.10g}  lambda_max {lam:.6f}"],
    )


def _run_generic(cfg):
    A = parse_dense_matrix(cfg.input_path)
    cs = spectahedron(A.shape[0]) if cfg.geometry == "spectahedron" else elliptope(A.shape[0])
    res = solve(cs, LinearCost(0.5 * (A + A.T)), cfg.meta_options(), seed=cfg.seed)
    return _report(cfg, res)


_RUNNERS = {
    "maxcut": _run_maxcut,
    "spca-dspca": _run_dspca,
    "spca-spectral": _run_spectral,
    "spca-homotopy": _run_homotopy,
    "solve-generic": _run_generic,
}


# -------------------------------------------------------------- entry point


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse normally calls sys.exit(2); route through main for the
    # documented exit-code contract instead
    def error(self, message):
        raise _UsageError(f"{message}\n{self.format_usage()}")


def _kappa_ladder(text):
    try:
        values = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad kappa ladder {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("kappa ladder is empty")
    return values


def build_parser():
    parser = _Parser(prog="lowrank-sdp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("input", help="graph file (maxcut) or CSV matrix")
        p.add_argument("--p0", type=int, default=1)
        p.add_argument("--epsilon", type=float, default=1e-12)
        p.add_argument("--rank-tol", type=float, default=1e-6)
        p.add_argument("--p-max", type=int, default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--trace-out", default=None)
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--quiet", action="store_true")
        if name.startswith("spca-"):
            p.add_argument("--rho", type=float, default=None)
            p.add_argument("--rho-frac", type=float, default=None)
        if name == "spca-dspca":
            p.add_argument("--kappa-ladder", type=_kappa_ladder, default=None)
        if name == "spca-homotopy":
            p.add_argument("--mu-step", type=float, default=0.05)
        if name == "solve-generic":
            p.add_argument(
                "--geometry", choices=("spectahedron", "elliptope"),
                default="spectahedron",
            )
    return parser


def _config_from_args(args):
    cfg = RunConfig(
        subcommand=args.subcommand,
        input_path=args.input,
        p0=args.p0,
        epsilon=args.epsilon,
        rank_tol=args.rank_tol,
        p_max=args.p_max,
        rho=getattr(args, "rho", None),
        rho_frac=getattr(args, "rho_frac", None),
        kappa_ladder=getattr(args, "kappa_ladder", None),
        mu_step=getattr(args, "mu_step", 0.05),
        seed=args.seed,
        trace_out=args.trace_out,
        fmt=args.format,
        quiet=args.quiet,
        geometry=getattr(args, "geometry", "spectahedron"),
    )
    cfg.meta_options()   # trip the option invariants at parse time
    return cfg


def _thread_limit():
    raw = os.environ.get("LOWRANK_SDP_THREADS", "0")
    try:
        k = int(raw)
    except ValueError:
        return None
    return k if k > 0 else None


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _config_from_args(args)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (LowRankSdpError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    t0 = time.perf_counter()
    try:
        limit = _thread_limit()
        if limit is not None:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=limit):
                code = _RUNNERS[cfg.subcommand](cfg)
        else:
            code = _RUNNERS[cfg.subcommand](cfg)
    except (LowRankSdpError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not cfg.quiet:
        print(f"wall time {time.perf_counter() - t0:.2f}s")
    return code


def console_entry():
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
