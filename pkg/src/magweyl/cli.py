"""Command-line front end: config loading, verification suites, reports.

Reports are written twice: report.json carries the check outcomes with
values rounded to 12 significant digits so identical configurations give
identical bytes regardless of thread count or timing, and summary.csv adds
the per-check wall times for human consumption.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import lie_core, magnetic
from . import symbol_space as sp
from . import weyl_calculus as wl
from .errors import ConfigError, JacobiViolation, MagweylError

SUITES = ("fourier", "unitarity", "gauge", "abelian-baseline",
          "moyal-crosscheck", "derivative-check")


# ---------------------------------------------------------------- config

def load_config(path):
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(p) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _algebra_from_spec(spec):
    if isinstance(spec, str):
        try:
            return lie_core.algebra_preset(spec)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if isinstance(spec, dict):
        if "file" in spec:
            p = Path(spec["file"])
            if not p.is_file():
                raise ConfigError(f"algebra file not found: {p}")
            with open(p) as fh:
                return lie_core.algebra_from_dict(json.load(fh))
        return lie_core.algebra_from_dict(spec)
    raise ConfigError("algebra spec must be a preset name or an object")


def _potential_from_spec(spec, algebra):
    if spec is None or spec == "zero":
        return magnetic.potential_preset("zero", algebra)
    if isinstance(spec, str):
        try:
            return magnetic.potential_preset(spec, algebra)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if isinstance(spec, dict):
        if "file" in spec:
            p = Path(spec["file"])
            if not p.is_file():
                raise ConfigError(f"potential file not found: {p}")
            with open(p) as fh:
                return magnetic.potential_from_dict(algebra, json.load(fh))
        return magnetic.potential_from_dict(algebra, spec)
    raise ConfigError("potential spec must be a preset name or an object")


def _grid_from_spec(spec, algebra):
    if not isinstance(spec, dict) or "N" not in spec or "L" not in spec:
        raise ConfigError("grid spec must be an object with N and L")
    N, L = spec["N"], spec["L"]
    if int(N) != N or N < 2 or N % 2 != 0:
        raise ConfigError(f"grid N must be an even integer >= 2, got {N}")
    if not (isinstance(L, (int, float)) and L > 0):
        raise ConfigError(f"grid L must be positive, got {L}")
    return sp.make_grid(algebra.dim, int(N), float(L))


def _boxed_widths(grid):
    sx = grid.box_half_width * grid.h / np.pi
    return sx, 1.0 / sx


def _symbol_from_spec(spec, grid):
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("symbol spec must be an object with a 'kind'")
    kind = spec["kind"]
    d = grid.dim
    if kind == "zero":
        n = grid.points_per_axis
        return sp.SymbolField(grid, np.zeros((n,) * (2 * d)))
    if kind not in ("gaussian", "poly-gaussian"):
        raise ConfigError(f"unknown symbol kind {kind!r}")
    cx = np.asarray(spec.get("centers_x", [0.0] * d), dtype=float)
    cxi = np.asarray(spec.get("centers_xi", [0.0] * d), dtype=float)
    if cx.shape != (d,) or cxi.shape != (d,):
        raise ConfigError(f"symbol centers must have length {d}")
    amp = float(spec.get("amplitude", 1.0))
    sx, sxi = _boxed_widths(grid)
    lin_x = np.asarray(spec.get("linear_x", [0.0] * d), dtype=float)
    lin_xi = np.asarray(spec.get("linear_xi", [0.0] * d), dtype=float)
    if lin_x.shape != (d,) or lin_xi.shape != (d,):
        raise ConfigError(f"symbol linear coefficients must have length {d}")
    if kind == "gaussian" and (np.any(lin_x) or np.any(lin_xi)):
        raise ConfigError("linear coefficients need kind 'poly-gaussian'")

    def f(X, Xi):
        qx = sum((X[..., i] - cx[i]) ** 2 for i in range(d))
        qxi = sum((Xi[..., i] - cxi[i]) ** 2 for i in range(d))
        out = amp * np.exp(-qx / (2 * sx) - qxi / (2 * sxi))
        if kind == "poly-gaussian":
            out = out * (1.0 + sum(lin_x[i] * X[..., i] + lin_xi[i] * Xi[..., i]
                                   for i in range(d)))
        return out

    return sp.sample_symbol(f, grid)


def _context_from_config(cfg, threads=None):
    if "algebra" not in cfg or "grid" not in cfg:
        raise ConfigError("config needs 'algebra' and 'grid' entries")
    algebra = _algebra_from_spec(cfg["algebra"])
    potential = _potential_from_spec(cfg.get("potential"), algebra)
    grid = _grid_from_spec(cfg["grid"], algebra)
    return wl.make_context(algebra, potential, grid, threads=threads)


# ---------------------------------------------------------------- reports

def _check(name, value, tolerance, started):
    return {"check": name, "value": float(value), "tolerance": float(tolerance),
            "pass": bool(value <= tolerance),
            "wall_time_s": time.perf_counter() - started}


def _tolerance(cfg, name, default):
    return float(cfg.get("tolerances", {}).get(name, default))


def write_report(out_dir, checks):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    overall = all(c["pass"] for c in checks)
    rows = [{"check": c["check"], "value": float(f"{c['value']:.12g}"),
             "tolerance": c["tolerance"], "pass": c["pass"]} for c in checks]
    report = {"checks": rows, "overall_pass": overall}
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["check", "value", "tolerance", "pass", "wall_time_s"])
        for c in checks:
            writer.writerow([c["check"], f"{c['value']:.6e}", f"{c['tolerance']:.1e}",
                             "pass" if c["pass"] else "FAIL", f"{c['wall_time_s']:.3f}"])
    for c in checks:
        status = "PASS" if c["pass"] else "FAIL"
        print(f"{c['check']}: {status} value={c['value']:.6e} tol={c['tolerance']:.1e}")
    print(f"overall: {'PASS' if overall else 'FAIL'}")
    return overall


# ---------------------------------------------------------------- algebra suite

def _random_coords(alg, rng, n, scale=1.0):
    return rng.normal(scale=scale, size=(n, alg.dim))


def verify_algebra_checks(cfg, seed):
    algebra = _algebra_from_spec(cfg["algebra"])
    rng = np.random.default_rng([seed, 0])
    checks = []

    t0 = time.perf_counter()
    X, Y, Z = (_random_coords(algebra, rng, 100) for _ in range(3))
    assoc = np.abs(lie_core.bch(algebra, lie_core.bch(algebra, X, Y), Z)
                   - lie_core.bch(algebra, X, lie_core.bch(algebra, Y, Z))).max()
    checks.append(_check("bch-associativity", assoc,
                         _tolerance(cfg, "bch-associativity", 1e-10), t0))

    t0 = time.perf_counter()
    inv = np.abs(lie_core.bch(algebra, X, -X)).max()
    ident = np.abs(lie_core.bch(algebra, X, np.zeros(algebra.dim)) - X).max()
    checks.append(_check("bch-inverse-identity", max(inv, ident),
                         _tolerance(cfg, "bch-inverse-identity", 1e-10), t0))

    t0 = time.perf_counter()
    V, Y = _random_coords(algebra, rng, 100), _random_coords(algebra, rng, 100)
    back = lie_core.psi_inverse(algebra, V, lie_core.psi_map(algebra, V, Y))
    checks.append(_check("psi-round-trip", np.abs(back - Y).max(),
                         _tolerance(cfg, "psi-round-trip", 1e-10), t0))

    t0 = time.perf_counter()
    step = 1e-5
    d = algebra.dim
    eye = step * np.eye(d)
    worst = 0.0
    for _ in range(20):
        V = rng.normal(size=d)
        Y = rng.normal(size=d)
        jac = np.stack(
            [(lie_core.psi_map(algebra, V, Y + eye[i])
              - lie_core.psi_map(algebra, V, Y - eye[i])) / (2 * step)
             for i in range(d)], axis=1)
        worst = max(worst, abs(np.linalg.det(jac) - 1.0))
    checks.append(_check("psi-jacobian-unimodular", worst,
                         _tolerance(cfg, "psi-jacobian-unimodular", 1e-6), t0))
    return checks


# ---------------------------------------------------------------- run suites

def _random_symbol(grid, rng):
    d = grid.dim
    sx, sxi = _boxed_widths(grid)
    span = grid.box_half_width / 3.0
    span_xi = np.pi / (3.0 * grid.h)
    terms = []
    for _ in range(3):
        cx = rng.uniform(-span, span, size=d)
        cxi = rng.uniform(-span_xi, span_xi, size=d)
        amp = rng.normal() + 1j * rng.normal()
        terms.append((cx, cxi, amp))

    def f(X, Xi):
        out = 0.0
        for cx, cxi, amp in terms:
            qx = sum((X[..., i] - cx[i]) ** 2 for i in range(d))
            qxi = sum((Xi[..., i] - cxi[i]) ** 2 for i in range(d))
            out = out + amp * np.exp(-qx / (2 * sx) - qxi / (2 * sxi))
        return out

    return sp.sample_symbol(f, grid)


def _suite_fourier(cfg, ctx, rng):
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(5):
        a = _random_symbol(ctx.grid, rng)
        aa = sp.symplectic_fourier(sp.symplectic_fourier(a))
        worst = max(worst, np.abs(aa.values - a.values).max()
                    / np.abs(a.values).max())
    return [_check("fourier-involution", worst,
                   _tolerance(cfg, "fourier-involution", 1e-10), t0)]


def _suite_unitarity(cfg, ctx, rng):
    default = 1e-6 if ctx.algebra.nilpotency_class == 0 else 1e-3
    checks = []
    d = ctx.grid.dim
    specs = [("unitarity-gaussian", {"kind": "gaussian",
                                     "centers_x": [0.3] + [0.0] * (d - 1)}),
             ("unitarity-poly-gaussian", {"kind": "poly-gaussian",
                                          "linear_x": [0.4] + [0.0] * (d - 1),
                                          "linear_xi": [0.0] * (d - 1) + [0.3]})]
    for name, spec in specs:
        t0 = time.perf_counter()
        a = _symbol_from_spec(spec, ctx.grid)
        K = wl.kernel_from_symbol(ctx, a)
        gap = abs(sp.l2_norm(K) / sp.l2_norm(a) - 1.0)
        checks.append(_check(name, gap, _tolerance(cfg, name, default), t0))
    return checks


def _gauge_partner(ctx, rng):
    alg, A = ctx.algebra, ctx.potential
    if alg.dim == 2 and alg.nilpotency_class == 0:
        # constant-field potentials get the symmetric gauge as the partner
        b = float(magnetic.field_eval(A, np.zeros(2), np.eye(2)[0], np.eye(2)[1]))
        if abs(b) > 1e-12:
            tables = [np.zeros((2, 2)), np.zeros((2, 2))]
            tables[0][0, 1] = -b / 2.0
            tables[1][1, 0] = b / 2.0
            sym = magnetic.make_potential(alg, tables)
            gap = max(np.abs(magnetic.add_tables(t1, -np.asarray(t2))).max()
                      for t1, t2 in zip(sym.tables, A.tables))
            if gap > 1e-12:
                return sym
    d = alg.dim
    table = np.zeros((4,) * d)
    lead = (2, 1) + (0,) * (d - 2) if d >= 2 else (3,)
    table[lead] = 0.2
    for _ in range(5):
        exps = tuple(rng.integers(0, 4, size=d))
        if 0 < sum(exps) <= 3:
            table[exps] = rng.normal(scale=0.3)
    psi = magnetic.GaugeFunction(alg, table)
    return magnetic.add_potentials(A, magnetic.gradient_potential(psi))


def _suite_gauge(cfg, ctx, rng):
    t0 = time.perf_counter()
    partner = _gauge_partner(ctx, rng)
    a = _symbol_from_spec({"kind": "gaussian"}, ctx.grid)
    rep = wl.gauge_covariance_check(ctx, partner, a)
    return [_check("gauge-covariance", rep["value"],
                   _tolerance(cfg, "gauge-covariance", 1e-9), t0)]


def _suite_abelian_baseline(cfg, ctx, rng):
    t0 = time.perf_counter()
    alg = lie_core.algebra_preset("abelian:1")
    grid = sp.make_grid(1, 64, 8.0)
    base = wl.make_context(alg, magnetic.potential_preset("zero", alg), grid)
    a = sp.sample_symbol(
        lambda X, Xi: np.exp(-(X[..., 0] ** 2 + Xi[..., 0] ** 2) / 2), grid)
    K = wl.kernel_from_symbol(base, a)
    y = grid.axis_x
    truth = (np.exp(-(y[:, None] + y[None, :]) ** 2 / 8)
             * np.exp(-(y[:, None] - y[None, :]) ** 2 / 2) / np.sqrt(2 * np.pi))
    gap = np.sqrt(np.sum(np.abs(K.values - truth) ** 2) / np.sum(truth ** 2))
    return [_check("abelian-baseline-kernel", gap,
                   _tolerance(cfg, "abelian-baseline-kernel", 1e-6), t0)]


def _suite_moyal(cfg, ctx, rng):
    if ctx.algebra.nilpotency_class > 1:
        raise ConfigError("moyal-crosscheck needs an algebra of class <= 1")
    checks = []
    d = ctx.grid.dim
    t0 = time.perf_counter()
    a = _symbol_from_spec({"kind": "gaussian",
                           "centers_x": [0.3] + [0.0] * (d - 1),
                           "centers_xi": [0.0] * (d - 1) + [-0.2]}, ctx.grid)
    b = _symbol_from_spec({"kind": "gaussian",
                           "centers_x": [0.0] * (d - 1) + [-0.25],
                           "centers_xi": [0.15] + [0.0] * (d - 1)}, ctx.grid)
    ab = wl.moyal_product(ctx, a, b)
    sup = np.abs(ab.values).max()
    grid = ctx.grid
    N = grid.points_per_axis
    worst = 0.0
    E = np.exp(1j * np.outer(grid.axis_xi, grid.axis_x))
    for _ in range(5):
        jx = rng.integers(N // 4, 3 * N // 4, size=d)
        X = grid.axis_x[jx]
        xi = rng.uniform(-0.4, 0.4, size=d)
        direct = wl.moyal_2step_point(ctx, a, b, X, xi)
        route = ab.values[tuple(jx)].astype(complex)
        for ax in range(d):
            coeff = np.linalg.solve(E, route.reshape(N, -1))
            route = (np.exp(1j * xi[ax] * grid.axis_x) @ coeff).reshape(
                route.shape[1:])
        worst = max(worst, abs(direct - complex(route)) / sup)
    checks.append(_check("moyal-direct-vs-route", worst,
                         _tolerance(cfg, "moyal-direct-vs-route", 5e-2), t0))

    t0 = time.perf_counter()
    alg1 = lie_core.algebra_preset("abelian:1")
    grid1 = sp.make_grid(1, 64, 6.5)
    flat = wl.make_context(alg1, magnetic.potential_preset("zero", alg1), grid1)
    mu_a, mu_b = np.array([0.4, -0.3]), np.array([-0.2, 0.5])
    ga = sp.sample_symbol(lambda X, Xi: np.exp(-(X[..., 0] - mu_a[0]) ** 2
                                               - (Xi[..., 0] - mu_a[1]) ** 2), grid1)
    gb = sp.sample_symbol(lambda X, Xi: np.exp(-(X[..., 0] - mu_b[0]) ** 2
                                               - (Xi[..., 0] - mu_b[1]) ** 2), grid1)
    prod = wl.moyal_product(flat, ga, gb)
    W = np.stack(np.meshgrid(grid1.axis_x, grid1.axis_xi, indexing="ij"), axis=-1)
    P, Q = mu_a - W, mu_b - W
    sig = P[..., 1] * Q[..., 0] - P[..., 0] * Q[..., 1]
    truth = 0.5 * np.exp(-((P ** 2).sum(-1) + (Q ** 2).sum(-1)) / 2) * np.exp(-1j * sig)
    gap = np.abs(prod.values - truth).max() / np.abs(truth).max()
    checks.append(_check("moyal-abelian-closed-form", gap,
                         _tolerance(cfg, "moyal-abelian-closed-form", 2e-2), t0))
    return checks


def _suite_derivative(cfg, ctx, rng):
    t0 = time.perf_counter()
    P0 = rng.uniform(-0.5, 0.5, size=ctx.grid.dim)
    f = sp.sample_config(lambda Y: np.exp(-(Y ** 2).sum(-1) / 2), ctx.grid)
    rep = wl.magnetic_derivative_check(ctx, P0, f, tau=1e-3)
    out = [_check("derivative-relative-error", rep["relative_error"],
                  _tolerance(cfg, "derivative-relative-error", 1e-4), t0)]
    t0 = time.perf_counter()
    out.append(_check("derivative-ratio-gap", abs(rep["ratio"] - 4.0),
                      _tolerance(cfg, "derivative-ratio-gap", 0.8), t0))
    return out


_SUITE_FUNCS = {
    "fourier": _suite_fourier,
    "unitarity": _suite_unitarity,
    "gauge": _suite_gauge,
    "abelian-baseline": _suite_abelian_baseline,
    "moyal-crosscheck": _suite_moyal,
    "derivative-check": _suite_derivative,
}


def run_suites(cfg, suites, seed, threads):
    ctx = _context_from_config(cfg, threads=threads)
    checks = []
    for name in suites:
        if name not in _SUITE_FUNCS:
            raise ConfigError(f"unknown suite {name!r}; known: {', '.join(SUITES)}")
        rng = np.random.default_rng([seed, SUITES.index(name) + 1])
        checks.extend(_SUITE_FUNCS[name](cfg, ctx, rng))
    return checks


# ---------------------------------------------------------------- commands

def _resolve_out(cfg, args):
    return args.out or cfg.get("out") or "magweyl-out"


def cmd_verify_algebra(args):
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 42))
    if "algebra" not in cfg:
        raise ConfigError("config needs an 'algebra' entry")
    checks = verify_algebra_checks(cfg, seed)
    return 0 if write_report(_resolve_out(cfg, args), checks) else 1


def cmd_build_kernel(args):
    cfg = load_config(args.config)
    if "symbol" not in cfg:
        raise ConfigError("config needs a 'symbol' entry")
    ctx = _context_from_config(cfg, threads=args.threads)
    a = _symbol_from_spec(cfg["symbol"], ctx.grid)
    K = wl.kernel_from_symbol(ctx, a)
    out = Path(_resolve_out(cfg, args))
    out.mkdir(parents=True, exist_ok=True)
    kernel_path = out / "kernel.bin"
    sp.dump_field(K, kernel_path)
    digest = hashlib.sha256(kernel_path.read_bytes()).hexdigest()
    meta = {
        "algebra": cfg["algebra"],
        "potential": cfg.get("potential", "zero"),
        "grid": {"N": ctx.grid.points_per_axis, "L": ctx.grid.box_half_width},
        "symbol": cfg["symbol"],
        "sha256": digest,
    }
    with open(out / "metadata.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"kernel.bin sha256={digest}")
    return 0


def cmd_suite(args):
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 42))
    if args.suites:
        suites = [s.strip() for s in args.suites.split(",") if s.strip()]
    else:
        suites = cfg.get("suites", list(SUITES))
    if not suites:
        raise ConfigError("no suites selected")
    checks = run_suites(cfg, suites, seed, args.threads)
    return 0 if write_report(_resolve_out(cfg, args), checks) else 1


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="magweyl",
        description="Kernel quantization on nilpotent groups: builds and checks.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("verify-algebra", cmd_verify_algebra),
                     ("build-kernel", cmd_build_kernel),
                     ("suite", cmd_suite)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--suites", default=None)
        p.add_argument("--threads", type=int, default=None)
        p.set_defaults(func=fn)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return 2
    except MagweylError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
