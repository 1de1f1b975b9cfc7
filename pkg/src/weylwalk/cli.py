"""Command-line driver: ``weylwalk {constants,tails,transform,limit}``.

Every command is deterministic given its flags and ``--seed`` (default 0).
Flags can also come from a JSON ``--config`` file whose keys mirror the
long flag names (dashes or underscores); explicit flags win.  Output goes
to ``--out``, else to ``$WEYLWALK_OUTPUT_DIR/<command>.<ext>``, else to
stdout.  Exit codes: 0 success, 2 usage error, 3 numerical-contract
violation.

CSV columns
-----------
constants  chamber,k,alpha,kappa,K
tails      n,P_survive,std_error  (exact mode adds E_h_restricted,V_estimate,dropped_mass)
transform  --build-v: x1..xk,V
limit      statistic,conditioned,conditioned_error,limit,limit_error,z_score
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import asymptotics, chambers, exact, htransform
from .chambers import ChamberType
from .errors import InvalidInputError, NumericalContractError, UnsupportedError, WeylWalkError
from .montecarlo import simulate_exits, survival_curve
from .rng import RandomStream
from .walk import StepDistribution, load_step_distribution

SCHEMA = "weylwalk/1"
OUTPUT_ENV = "WEYLWALK_OUTPUT_DIR"


class UsageError(WeylWalkError):
    pass


# parsing helpers ----------------------------------------------------------------


def parse_k_range(text) -> list[int]:
    """``"2"``, ``"1..3"`` or ``"1,2,4"``."""
    if isinstance(text, int):
        return [text]
    if isinstance(text, list):
        return [int(v) for v in text]
    text = str(text).strip()
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            ks = list(range(int(a), int(b) + 1))
        else:
            ks = [int(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse k range {text!r}") from None
    if not ks:
        raise UsageError("empty k range")
    return ks


def parse_point(text) -> tuple:
    if isinstance(text, (list, tuple)):
        vals = list(text)
    else:
        vals = [v for v in str(text).replace(";", ",").split(",") if v.strip()]
    try:
        return tuple(Fraction(str(v).strip()) for v in vals)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"cannot parse point {text!r}") from None


def parse_grid(text) -> list[tuple]:
    if isinstance(text, list):
        return [parse_point(p) for p in text]
    return [parse_point(p) for p in str(text).split(";") if p.strip()]


def make_dist(spec, k: int) -> StepDistribution:
    if isinstance(spec, dict):
        d = load_step_distribution(spec)
    else:
        name = str(spec).strip().lower()
        if name == "rademacher":
            d = StepDistribution.rademacher(k)
        elif name == "lazy":
            d = StepDistribution.lazy(k)
        elif name == "gaussian":
            d = StepDistribution.gaussian(k)
        elif name == "uniform":
            d = StepDistribution.uniform(k)
        else:
            d = load_step_distribution(spec)
    if d.k != k:
        d = d.with_k(k)
    return d


def _chamber(text) -> ChamberType:
    try:
        return ChamberType.parse(text)
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from None


def _num(v: float) -> str:
    return repr(float(v))


# output ---------------------------------------------------------------------------


class Output:
    def __init__(self, args, command: str):
        self.fmt = args.format
        self.path = None
        if args.out:
            self.path = Path(args.out)
        elif os.environ.get(OUTPUT_ENV):
            ext = "csv" if self.fmt == "csv" else "jsonl"
            self.path = Path(os.environ[OUTPUT_ENV]) / f"{command}.{ext}"
        self.buf = io.StringIO(newline="")
        self.header = None
        self.side: dict | None = None

    def row(self, rec: dict) -> None:
        if self.fmt == "csv":
            w = csv.writer(self.buf, lineterminator="\r\n")
            if self.header is None:
                self.header = list(rec)
                w.writerow(self.header)
            w.writerow([_num(rec[c]) if isinstance(rec[c], float) else rec[c] for c in self.header])
        else:
            self.buf.write(json.dumps({"schema": SCHEMA, **rec}, sort_keys=True) + "\n")

    def summary(self, rec: dict) -> None:
        """Side information: appended as a record in jsonl, a sidecar file in csv."""
        if self.fmt == "jsonl":
            self.buf.write(json.dumps({"schema": SCHEMA, **rec}, sort_keys=True) + "\n")
        else:
            self.side = {"schema": SCHEMA, **rec}

    def close(self) -> None:
        text = self.buf.getvalue()
        if self.path is None:
            sys.stdout.write(text)
            if self.side is not None:
                sys.stderr.write(json.dumps(self.side, sort_keys=True) + "\n")
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(text, newline="")
        if self.side is not None:
            side = self.path.with_name(self.path.name + ".summary.json")
            side.write_text(json.dumps(self.side, sort_keys=True, indent=1) + "\n")


# commands ---------------------------------------------------------------------------


def cmd_constants(args) -> int:
    z = _chamber(args.chamber)
    out = Output(args, "constants")
    for k in parse_k_range(args.k):
        if not 1 <= k <= asymptotics.MAX_K:
            raise UsageError(f"k must be in 1..{asymptotics.MAX_K}")
        if k < z.min_dim():
            raise UsageError(f"chamber {z.value} needs k >= {z.min_dim()}")
        rec = {"chamber": z.value, "k": k, "alpha": asymptotics.alpha(z, k),
               "kappa": asymptotics.kappa(z, k), "K": asymptotics.K_constant(z, k)}
        out.row(rec)
    out.close()
    return 0


def _ns(args, n_max: int) -> np.ndarray:
    step = max(1, int(args.every))
    ns = np.arange(step, n_max + 1, step)
    return ns


def cmd_tails(args) -> int:
    z = _chamber(args.chamber)
    k = int(args.k)
    x = parse_point(args.x) if args.x else tuple(Fraction(i + 1) for i in range(k))
    if len(x) != k:
        raise UsageError("x has the wrong dimension")
    n_max = int(args.n_max)
    if n_max < 10:
        raise UsageError("--n-max must be >= 10")
    dist = make_dist(args.dist, k)
    out = Output(args, "tails")
    ns = _ns(args, n_max)
    if args.mode == "exact":
        spec = exact.LatticeWalkSpec.from_step_distribution(dist)
        ck = None
        if not args.no_checkpoint:
            ckdir = Path(args.checkpoint_dir) if args.checkpoint_dir else Path(tempfile.gettempdir())
            tag = exact._fingerprint(spec, z, spec.check_point(x), n_max, z, exact.DEFAULT_PRUNE)
            ck = ckdir / f"weylwalk-dp-{tag}.npz"
        res = exact.run_dp(spec, z, x, n_max, checkpoint=ck)
        ident = res.identity_values()
        drop = np.cumsum(res.dropped)
        P = res.surv[ns]
        se = np.full(ns.shape, res.error_bound())
        for i, n in enumerate(ns):
            out.row({"n": int(n), "P_survive": float(P[i]), "std_error": float(se[i]),
                     "E_h_restricted": float(res.surv_h[n]), "V_estimate": float(ident[n]),
                     "dropped_mass": float(drop[n])})
        if ck is not None and ck.exists():
            ck.unlink()
    else:
        samples = int(args.samples)
        sim = simulate_exits(dist, z, [float(c) for c in x], n_max, samples, seed=args.seed,
                             workers=args.workers)
        P, se = survival_curve(sim, ns)
        for i, n in enumerate(ns):
            out.row({"n": int(n), "P_survive": float(P[i]), "std_error": float(se[i])})
    pos = P > 0
    if not pos.all():
        last = int(np.nonzero(pos)[0][-1]) if pos.any() else -1
        sys.stderr.write(f"warning: zero survivors beyond n={ns[last] if last >= 0 else 0}; fit window truncated\n")
        ns, P = ns[: last + 1], P[: last + 1]
    if len(ns) >= 10:
        even = bool(args.even_only)
        fit = asymptotics.tail_fit(np.c_[ns, P], even_only=even)
        out.summary({"kind": "tail_fit", "slope": fit.slope, "prefactor": fit.prefactor,
                     "r_squared": fit.r_squared, "n_range": list(fit.n_range), "alpha": asymptotics.alpha(z, k)
                     if z is not ChamberType.A else None})
    out.close()
    return 0


def cmd_transform(args) -> int:
    z = _chamber(args.chamber)
    k = int(args.k)
    dist = make_dist(args.dist, k)
    out = Output(args, "transform")
    actions = [a for a in ("build_v", "tilde_c", "sample") if getattr(args, a)]
    if len(actions) != 1:
        raise UsageError("choose exactly one of --build-v, --tilde-c, --sample")
    if args.build_v:
        spec = exact.LatticeWalkSpec.from_step_distribution(dist)
        table = htransform.build_V_table(spec, z, radius=args.radius, switchover=args.switchover)
        for p, v in zip(table.points, table.values):
            rec = {f"x{i + 1}": int(c) for i, c in enumerate(p)}
            rec["V"] = float(v)
            out.row(rec)
        out.summary({"kind": "v_table", "chamber": z.value, "k": k, "radius": table.radius,
                     "points": len(table), "boundary_quality": table.boundary_quality,
                     "switchover": table.switchover})
    elif args.tilde_c:
        if z is not ChamberType.C:
            raise UsageError("--tilde-c is defined for chamber C only")
        grid = parse_grid(args.grid) if args.grid else [tuple(Fraction(i + 1) for i in range(k))]
        for x in grid:
            xf = tuple(float(c) for c in x)
            est = htransform.tilde_V_C(dist, xf, horizon=args.horizon, samples=args.samples, seed=args.seed)
            rec = htransform.estimate_record(xf, est, args.seed)
            rec.pop("schema")
            if args.residual:
                r = htransform.tilde_regularity_residual(dist, xf, horizon=args.horizon, samples=args.samples,
                                                         seed=args.seed)
                rec["residual"] = r.residual
                rec["residual_std_error"] = r.std_error
            if args.format == "csv":
                rec = {**{f"x{i + 1}": v for i, v in enumerate(rec.pop("x"))}, **rec}
            out.row(rec)
    else:
        spec = exact.LatticeWalkSpec.from_step_distribution(dist)
        x = parse_point(args.x) if args.x else tuple(Fraction(i + 1) for i in range(k))
        table = htransform.build_V_table(spec, z, radius=args.radius, switchover=args.switchover)
        V = table.as_hfunction()
        xi = tuple(int(c) for c in x)
        for i in range(int(args.paths)):
            path, resid = htransform.sample_conditioned_path(spec, z, V, xi, int(args.n),
                                                             RandomStream(args.seed, i, 0))
            P = path.positions
            if not np.all(chambers.contains(z, P)):
                raise NumericalContractError("a transformed path left the chamber")
            rec = {"path": i, "positions": P.astype(int).tolist(), "max_residual": float(np.max(np.abs(resid)))
                   if resid else 0.0}
            if args.format == "csv":
                rec = {"path": i, "final": ";".join(str(int(c)) for c in P[-1]), "max_residual": rec["max_residual"]}
            out.row(rec)
    out.close()
    return 0


def cmd_limit(args) -> int:
    z = _chamber(args.chamber)
    k = int(args.k)
    n = int(args.n)
    if n < 10:
        raise UsageError("limit needs n >= 10")
    x = parse_point(args.x) if args.x else tuple(Fraction(i + 1) for i in range(k))
    dist = make_dist(args.dist, k)
    out = Output(args, "limit")
    mu_mean = asymptotics.mu_moments(z, k, [tuple(int(i == j) for i in range(k)) for j in range(k)]) \
        if k <= 4 else None
    mu_abs2 = asymptotics.mu_moments(z, k, [tuple(2 * int(i == j) for i in range(k)) for j in range(k)]) \
        if k <= 4 else None
    if args.mode == "exact":
        spec = exact.LatticeWalkSpec.from_step_distribution(dist)
        m = exact.conditioned_scaled_moments(spec, z, x, n)
        means, mean_err = m.mean, m.mean_error
        abs2, abs2_err = m.abs2, m.abs2_error
    else:
        sim = simulate_exits(dist, z, [float(c) for c in x], n, int(args.samples), seed=args.seed,
                             workers=args.workers)
        y = sim.pos[sim.tau < 0] / math.sqrt(n)
        if y.shape[0] < 2:
            raise NumericalContractError("fewer than two surviving paths")
        means = y.mean(axis=0)
        mean_err = y.std(axis=0, ddof=1) / math.sqrt(y.shape[0])
        r2 = np.sum(y * y, axis=1)
        abs2, abs2_err = float(r2.mean()), float(r2.std(ddof=1) / math.sqrt(y.shape[0]))
    rows = []
    for j in range(k):
        lim = mu_mean[j] if mu_mean else None
        rows.append((f"mean_y{j + 1}", float(means[j]), float(mean_err[j]), lim))
    if mu_abs2:
        lim2 = asymptotics.NormalizerEstimate(sum(e.value for e in mu_abs2),
                                              math.sqrt(sum(e.std_error**2 for e in mu_abs2)), "quadrature")
    else:
        lim2 = None
    rows.append(("mean_abs2", float(abs2), float(abs2_err), lim2))
    for name, val, err, lim in rows:
        rec = {"statistic": name, "conditioned": val, "conditioned_error": err,
               "limit": lim.value if lim else float("nan"), "limit_error": lim.std_error if lim else float("nan")}
        comb = math.hypot(err, lim.std_error) if lim else float("nan")
        rec["z_score"] = abs(val - lim.value) / comb if lim and comb > 0 else (0.0 if lim and val == lim.value else float("nan"))
        out.row(rec)
    out.close()
    return 0


# parser ------------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file whose keys mirror these flags")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--workers", type=int, default=1, help="Monte Carlo worker processes")
    p.add_argument("--out", help=f"output file (default: ${OUTPUT_ENV}/<command>.<ext> or stdout)")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="weylwalk", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="alpha, kappa and K for a chamber")
    _common(p)
    p.add_argument("--chamber")
    p.add_argument("--k", default="1..3", help="k, a..b or a,b,c")
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("tails", help="survival curve P(tau > n) and its power-law fit")
    _common(p)
    p.add_argument("--mode", choices=("exact", "mc"), default="exact")
    p.add_argument("--chamber")
    p.add_argument("--k", type=int)
    p.add_argument("--x", help="start point, e.g. 1,2 (default 1..k)")
    p.add_argument("--dist", default="rademacher", help="rademacher, lazy, gaussian, uniform or a JSON file")
    p.add_argument("--n-max", type=int, default=1000)
    p.add_argument("--every", type=int, default=2, help="spacing of the reported n")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--even-only", action="store_true")
    p.add_argument("--checkpoint-dir")
    p.add_argument("--no-checkpoint", action="store_true")
    p.set_defaults(func=cmd_tails)

    p = sub.add_parser("transform", help="V tables, the alternate C transform, conditioned paths")
    _common(p)
    p.add_argument("--chamber")
    p.add_argument("--k", type=int)
    p.add_argument("--dist", default="rademacher")
    p.add_argument("--build-v", action="store_true")
    p.add_argument("--tilde-c", action="store_true")
    p.add_argument("--sample", action="store_true")
    p.add_argument("--radius", type=int)
    p.add_argument("--switchover", type=float, default=1.05)
    p.add_argument("--grid", help="points separated by ';', e.g. '1,2;2,4'")
    p.add_argument("--residual", action="store_true", help="also estimate the one-step regularity residual")
    p.add_argument("--horizon", type=int)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--x")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--paths", type=int, default=1)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("limit", help="moments of S(n)/sqrt(n) given survival against the limit law")
    _common(p)
    p.add_argument("--mode", choices=("exact", "mc"), default="exact")
    p.add_argument("--chamber")
    p.add_argument("--k", type=int)
    p.add_argument("--x")
    p.add_argument("--dist", default="rademacher")
    p.add_argument("--n", type=int)
    p.add_argument("--samples", type=int, default=100_000)
    p.set_defaults(func=cmd_limit)
    return ap


def _apply_config(ap: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = ap.parse_args(argv)
    if not args.config:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    cfg = {str(key).replace("-", "_"): v for key, v in cfg.items()}
    cfg.pop("command", None)
    sub = ap._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    unknown = set(cfg) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    sub.set_defaults(**cfg)
    return ap.parse_args(argv)


_REQUIRED = {"constants": ("chamber",), "tails": ("chamber", "k"), "transform": ("chamber", "k"),
             "limit": ("chamber", "k", "n")}


def _check_required(args) -> None:
    missing = [f"--{name}" for name in _REQUIRED[args.command] if getattr(args, name) is None]
    if missing:
        raise UsageError(f"missing required arguments: {', '.join(missing)}")


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(ap, argv)
        _check_required(args)
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UsageError, InvalidInputError, UnsupportedError) as exc:
        sys.stderr.write(f"weylwalk: error: {exc}\n")
        return 2
    except NumericalContractError as exc:
        sys.stderr.write(f"weylwalk: numerical contract violated: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
