"""Command-line interface: density tables, tilt diagnostics, conditional CDFs,
samplers and a validation suite.  Output is CSV or JSON for offline plotting.

Exit codes: 0 success, 1 validation checks failed, 2 usage or domain error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import csv
import io
import json
import math
import os
import re
import sys
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import __version__
from .conditional import ConditionalConfig, conditional_cdf_R1, normal_baseline_cdf
from .edgeworth import MAX_ORDER, density_Y, validity_flag
from .model import ModelError, make_params, mean_tail, sigma_tail
from .oracle import QuadratureSpec, invert_density, simulate_Sbar
from .quadrature import QuadratureError
from .sampler import OUTSIDE_MODES, gibbs_radii
from .special import RangeError
from .tilt import ConvergenceError, tilt

EXIT_OK = 0
EXIT_CHECKS = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3

GRID_HELP = "grid: 'start:stop:step' (start included, stop included unless overshot) or a comma list"


class UsageError(Exception):
    pass


def parse_grid(text: str) -> np.ndarray:
    """Parse 'start:stop:step' or 'a,b,c' into a float array."""
    text = text.strip()
    if not text:
        raise UsageError("empty grid")
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid {text!r} must be start:stop:step")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError as exc:
            raise UsageError(f"bad grid {text!r}: {exc}") from None
        if not step > 0:
            raise UsageError("grid step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        if count <= 0:
            raise UsageError(f"grid {text!r} is empty")
        return start + step * np.arange(count)
    try:
        vals = np.array([float(p) for p in text.split(",") if p.strip()])
    except ValueError as exc:
        raise UsageError(f"bad grid {text!r}: {exc}") from None
    if vals.size == 0:
        raise UsageError("empty grid")
    return vals


def parse_int_list(text: str) -> List[int]:
    try:
        out = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None
    if not out:
        raise UsageError("empty order list")
    return out


@dataclass
class RunConfig:
    """Parsed and validated invocation."""

    command: str
    d: int
    gamma: float
    grids: dict = field(default_factory=dict)
    orders: dict = field(default_factory=dict)
    output: Optional[str] = None
    fmt: str = "csv"
    seed: int = 0
    options: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "d": self.d,
            "gamma": self.gamma,
            "grids": {k: [float(x) for x in v] for k, v in self.grids.items()},
            "orders": self.orders,
            "format": self.fmt,
            "seed": self.seed,
            "options": self.options,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        return cls(
            command=data["command"], d=data["d"], gamma=data["gamma"],
            grids={k: np.asarray(v, dtype=float) for k, v in data["grids"].items()},
            orders=data["orders"], fmt=data["format"], seed=data["seed"], options=data["options"],
        )


# ----------------------------------------------------------------- output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    if v is None:
        return ""
    return format(float(v), ".17g")


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return int(bool(v))
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, str) or v is None:
        return v
    f = float(v)
    return f if math.isfinite(f) else None


def render(meta: dict, columns: Sequence[str], rows: Sequence[Sequence], fmt: str) -> str:
    if fmt == "json":
        payload = {"meta": meta, "columns": list(columns), "rows": [[_json_value(v) for v in row] for row in rows]}
        return json.dumps(payload, indent=1, sort_keys=False) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _emit(text: str, path: Optional[str]):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SHOTNOISE_THREADS", "1")))
    except ValueError:
        raise UsageError("SHOTNOISE_THREADS must be an integer") from None


def _pmap(fn: Callable, items: Sequence):
    """Order-preserving map over grid points, threaded when SHOTNOISE_THREADS > 1."""
    n = _threads()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with cf.ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _meta(cfg: RunConfig) -> dict:
    return {"version": __version__, **cfg.to_dict()}


# ----------------------------------------------------------------- commands


def cmd_density(cfg: RunConfig):
    params = make_params(cfg.d, cfg.gamma)
    r = cfg.options["r"]
    ks = cfg.orders["k"]
    if "sbar" in cfg.grids:
        sbar = cfg.grids["sbar"]
        if np.any(sbar <= 0):
            raise ModelError("sbar grid must be positive")
        ys = (sbar - float(mean_tail(params, r))) / float(sigma_tail(params, r))
    else:
        ys = cfg.grids["y"]
    oracle = cfg.options.get("oracle", False)
    spec = QuadratureSpec(abs_tol=cfg.options.get("tol", 1e-12), rel_tol=cfg.options.get("rel_tol", 1e-11))

    def row(y):
        try:
            approx = [density_Y(params, y, r, k) for k in ks]
            ref = invert_density(params, y, r, spec) if oracle else None
        except ModelError as exc:
            raise ModelError(f"at (y={y:g}, r={r:g}): {exc}") from None
        except (ConvergenceError, QuadratureError, RangeError) as exc:
            raise type(exc)(f"at (y={y:g}, r={r:g}): {exc}") from None
        out = [y] + approx
        if oracle:
            out.append(ref)
            out += [abs(a - ref) / ref if ref > 0 else math.nan for a in approx]
        out += [validity_flag(params, y, r, k) for k in ks]
        return out

    cols = ["y"] + [f"edgeworth_k{k}" for k in ks]
    if oracle:
        cols += ["oracle"] + [f"rel_error_k{k}" for k in ks]
    cols += [f"valid_k{k}" for k in ks]
    return cols, _pmap(row, list(ys))


def cmd_tilt(cfg: RunConfig):
    params = make_params(cfg.d, cfg.gamma)
    r = cfg.options["r"]
    nmax = cfg.options.get("n_max", 6)

    def row(y):
        try:
            st = tilt(params, y, r, n_max=nmax)
        except ModelError as exc:
            raise ModelError(f"at (y={y:g}, r={r:g}): {exc}") from None
        return [y, st.xi, st.x] + list(st.tkappa) + [st.log_prefactor]

    cols = ["y", "xi", "xi_over_rho"] + [f"kappa{n}" for n in range(2, nmax + 1)] + ["log_prefactor"]
    return cols, _pmap(row, list(cfg.grids["y"]))


def cmd_conditional(cfg: RunConfig):
    params = make_params(cfg.d, cfg.gamma)
    s = cfg.options["s"]
    if not s > 0:
        raise ModelError("s must be positive")
    rs = cfg.grids["r"]
    ccfg = ConditionalConfig(
        ell=cfg.orders["ell"], k=cfg.orders.get("k"), a0=cfg.orders.get("a0"),
        reduction=not cfg.options.get("no_reduction", False), seed=cfg.seed,
    ).resolve(params)
    f_S = cfg.options.get("fS", "closed")
    f_S = None if f_S == "closed" else f_S
    res = conditional_cdf_R1(params, rs, s, ccfg, f_S=f_S)
    cols = ["r", "cdf_scheme", "cdf_scheme_clamped", "cdf_scheme_error"]
    data = [list(rs), list(res.value), list(res.clamped), list(res.error)]
    if cfg.options.get("baseline"):
        base = normal_baseline_cdf(params, rs, s, f_S=f_S)
        cols.append("cdf_normal_baseline")
        data.append(list(base.value))
    draws = cfg.options.get("gibbs_draws", 0)
    if draws:
        radii = gibbs_radii(
            params, cfg.options.get("gibbs_n", 64), s, draws, cfg.seed,
            sweeps=cfg.options.get("gibbs_sweeps", 200), outside=cfg.options.get("gibbs_outside", "exact"),
        )
        r1 = radii[:, 0]
        Fg = np.mean(r1[:, None] <= rs[None, :], axis=0)
        cols += ["cdf_gibbs", "cdf_gibbs_se"]
        data += [list(Fg), list(np.sqrt(Fg * (1 - Fg) / r1.size))]
    return cols, [list(x) for x in zip(*data)]


def cmd_simulate(cfg: RunConfig):
    params = make_params(cfg.d, cfg.gamma)
    kind = cfg.options["kind"]
    n = cfg.options["draws"]
    if kind == "sbar":
        r = cfg.options["r"]
        vals = simulate_Sbar(params, r, cfg.options.get("tail_radius"), cfg.seed, size=n)
        return ["sbar"], [[v] for v in vals]
    radii = gibbs_radii(
        params, cfg.options["n"], cfg.options["s"], n, cfg.seed,
        sweeps=cfg.options.get("sweeps", 200), outside=cfg.options.get("outside", "none"),
    )
    keep = min(cfg.options.get("keep", 5), radii.shape[1])
    return [f"R{i + 1}" for i in range(keep)], [list(row[:keep]) for row in radii]


def cmd_validate(cfg: RunConfig):
    from .validation import run_checks

    results = run_checks(cfg.options.get("only"), seed=cfg.seed)
    rows = [[c.module, c.name, c.passed, c.value, c.threshold] for c in results]
    return ["module", "check", "passed", "value", "threshold"], rows


COMMANDS = {
    "density": cmd_density,
    "tilt": cmd_tilt,
    "conditional": cmd_conditional,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
}


# ----------------------------------------------------------------- parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shotnoise", description="Densities and conditional laws of power-law Poisson shot noise.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--d", type=int, default=2, help="spatial dimension")
        p.add_argument("--gamma", type=float, default=4.0, help="pathloss exponent (> d)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--output", "-o", default=None, help="output file (default stdout)")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("density", help="Edgeworth density table for Y^(r) or Sbar^(r)")
    common(p)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--k", default="2", help="comma-separated Edgeworth orders")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--y", help="standardised grid; " + GRID_HELP)
    g.add_argument("--sbar", help="unstandardised grid; " + GRID_HELP)
    p.add_argument("--oracle", action="store_true", help="add Fourier-inversion reference and relative errors")
    p.add_argument("--tol", type=float, default=1e-12, help="oracle absolute tolerance")

    p = sub.add_parser("tilt", help="tilt parameter, tilted cumulants and log prefactor")
    common(p)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--y", required=True, help=GRID_HELP)
    p.add_argument("--n-max", type=int, default=6)

    p = sub.add_parser("conditional", help="P(R1 <= r | S = s) from the scheme, optional baselines")
    common(p)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--r", required=True, help=GRID_HELP)
    p.add_argument("--ell", type=int, default=4)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--a0", type=float, default=None)
    p.add_argument("--fS", choices=("closed", "scheme"), default="closed", help="denominator")
    p.add_argument("--no-reduction", action="store_true")
    p.add_argument("--baseline", action="store_true", help="add the Gaussian-tail baseline")
    p.add_argument("--gibbs-draws", type=int, default=0)
    p.add_argument("--gibbs-n", type=int, default=64)
    p.add_argument("--gibbs-sweeps", type=int, default=200)
    p.add_argument(
        "--gibbs-outside", choices=OUTSIDE_MODES, default="exact",
        help="treatment of points beyond the Gibbs ball (see simulate --outside)",
    )

    p = sub.add_parser("simulate", help="Monte Carlo draws")
    common(p)
    p.add_argument("kind", choices=("sbar", "gibbs"))
    p.add_argument("--draws", type=int, default=1000)
    p.add_argument("--r", type=float, default=1.0, help="inner radius (sbar)")
    p.add_argument("--tail-radius", type=float, default=None)
    p.add_argument("--s", type=float, default=10.0, help="conditioning value (gibbs)")
    p.add_argument("--n", type=int, default=64, help="points in the ball (gibbs)")
    p.add_argument("--sweeps", type=int, default=200)
    p.add_argument("--keep", type=int, default=5, help="nearest radii to output (gibbs)")
    p.add_argument(
        "--outside", choices=OUTSIDE_MODES, default="none",
        help="gibbs: none = condition the n points on s; mean = on s minus the mean outside sum; "
        "exact = infinite process seen through the ball (NaN-padded rows)",
    )

    p = sub.add_parser("validate", help="run the invariant checks")
    common(p)
    p.add_argument("--only", default=None, help="comma-separated modules")
    return parser


def config_from_args(args) -> RunConfig:
    cfg = RunConfig(command=args.command, d=args.d, gamma=args.gamma, fmt=args.format, output=args.output, seed=args.seed)
    c = args.command
    if c == "density":
        ks = parse_int_list(args.k)
        if any(k < 0 or k > MAX_ORDER for k in ks):
            raise UsageError(f"orders must lie in [0, {MAX_ORDER}]")
        cfg.orders["k"] = ks
        if args.y is not None:
            cfg.grids["y"] = parse_grid(args.y)
        else:
            cfg.grids["sbar"] = parse_grid(args.sbar)
        cfg.options.update(r=args.r, oracle=args.oracle, tol=args.tol)
    elif c == "tilt":
        cfg.grids["y"] = parse_grid(args.y)
        cfg.options.update(r=args.r, n_max=args.n_max)
    elif c == "conditional":
        cfg.grids["r"] = parse_grid(args.r)
        cfg.orders.update(ell=args.ell, k=args.k, a0=args.a0)
        cfg.options.update(
            s=args.s, fS=args.fS, no_reduction=args.no_reduction, baseline=args.baseline,
            gibbs_draws=args.gibbs_draws, gibbs_n=args.gibbs_n, gibbs_sweeps=args.gibbs_sweeps,
            gibbs_outside=args.gibbs_outside,
        )
    elif c == "simulate":
        if args.draws < 1:
            raise UsageError("--draws must be positive")
        cfg.options.update(
            kind=args.kind, draws=args.draws, r=args.r, tail_radius=args.tail_radius, s=args.s, n=args.n,
            sweeps=args.sweeps, keep=args.keep, outside=args.outside,
        )
    elif c == "validate":
        cfg.options["only"] = [x.strip() for x in args.only.split(",")] if args.only else None
    if "r" in cfg.options and cfg.options["r"] is not None and not cfg.options["r"] > 0:
        raise UsageError("--r must be positive")
    make_params(cfg.d, cfg.gamma)
    return cfg


_NEGATIVE = re.compile(r"^-[0-9.]")


def _join_negative_values(argv: Sequence[str]) -> List[str]:
    # "--y -2:4:1" would otherwise be read as an unknown flag
    out: List[str] = []
    it = iter(argv)
    for tok in it:
        if tok.startswith("--") and "=" not in tok:
            nxt = next(it, None)
            if nxt is not None and _NEGATIVE.match(nxt):
                out.append(f"{tok}={nxt}")
                continue
            out.append(tok)
            if nxt is not None:
                out.append(nxt)
        else:
            out.append(tok)
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = _join_negative_values(sys.argv[1:] if argv is None else list(argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = config_from_args(args)
        cols, rows = COMMANDS[cfg.command](cfg)
    except (UsageError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, QuadratureError, RangeError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    _emit(render(_meta(cfg), cols, rows, cfg.fmt), cfg.output)
    if cfg.command == "validate" and not all(row[2] for row in rows):
        return EXIT_CHECKS
    return EXIT_OK


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
