"""Command-line interface.

Every randomized command needs ``--seed``. ``--config FILE`` reads flat
``key = value`` lines named like the flags; flags given on the command line
override the file. Exit codes: 0 success, 2 configuration error, 3 numerical
or I/O failure.
"""

from __future__ import annotations

import argparse
import math
import re
import sys
import time
from typing import Optional, Sequence

from . import __version__, electrostatics, ensembles, experiments, io
from .errors import ConfigError, CritPairError
from .formulas import QuadratureSpec
from .kernels.asymptotics import scaling_limit_error
from .kernels.special import G, G1, G2
from .poly_core import EUCLIDEAN, FS_NORMAL, ComplexPolynomial, critical_polynomial, roots
from .rng import trial_rng

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

_BARE_UNIT = re.compile(r"(^|[+-])i$")


def parse_complex(text: str) -> complex:
    """Parse ``a+bi`` style numbers: ``1+1i``, ``1+i``, ``-2.5i``, ``0``, ``3e-2-1i``."""
    s = text.strip().replace(" ", "").lower()
    if s.endswith("j"):
        s = s[:-1] + "i"
    if s.endswith("i"):
        s = _BARE_UNIT.sub(lambda m: m.group(1) + "1i", s)
        s = s[:-1] + "j"
    try:
        return complex(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None


def _complex_list(text: str) -> tuple:
    return tuple(parse_complex(x) for x in text.split(",") if x.strip())


def _float_list(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated number list: {text!r}") from None


def read_config(path: str) -> list:
    """Flat ``key = value`` file to argv tokens; ``true`` values become bare flags."""
    tokens = []
    with open(path, encoding="utf-8") as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected key = value")
            key, value = (x.strip() for x in line.split("=", 1))
            flag = "--" + key.replace("_", "-")
            if value.lower() == "true":
                tokens.append(flag)
            elif value.lower() != "false":
                tokens += [flag, value]
    return tokens


def _add_common(p: argparse.ArgumentParser, seed: bool = True):
    p.add_argument("--config", help="key = value file mirroring flag names")
    if seed:
        p.add_argument("--seed", type=int, required=True, help="master seed (required)")
    p.add_argument("--out", help="output path (stdout when omitted)")


def _add_experiment(p: argparse.ArgumentParser, default_N="64,128,256,512"):
    _add_common(p)
    p.add_argument("--N", type=_int_list, default=_int_list(default_N), help="comma-separated degrees")
    p.add_argument("--xi", type=parse_complex, default=1 + 1j, help="conditioning point, a+bi")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--sigma", type=_complex_list, default=None,
                   help="reference section coefficients, ascending, comma-separated (default 1)")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--ensemble", default="su2", help="su2 or a radial preset (fs, gaussian-planar)")
    p.add_argument("--coord-mode", choices=(FS_NORMAL, EUCLIDEAN), default=FS_NORMAL)
    p.add_argument("--workers", type=int, default=1, help="process count; does not change results")
    p.add_argument("--csv", help="also write the table as CSV")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="critpair", description="Critical points of conditioned random polynomials.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("sample", help="draw one (conditional) polynomial with its zeros and critical points")
    _add_common(p)
    p.add_argument("--N", type=int, default=50)
    p.add_argument("--xi", type=parse_complex, default=None, help="condition on vanishing here")
    p.add_argument("--ensemble", default="su2")
    p.add_argument("--index", type=int, default=0, help="trial index within the seed stream")

    p = sub.add_parser("pairing", help="pairing probability between a zero and a critical point")
    _add_experiment(p)

    for name, text in (("moments", "Monte Carlo moments of the critical count next to the formulas"),
                       ("expectation-check", "MC mean of the critical count against the contour formula"),
                       ("variance-check", "MC variance of the critical count against the double contour formula")):
        p = sub.add_parser(name, help=text)
        _add_experiment(p, "64,128,256" if name != "variance-check" else "128")
        p.add_argument("--radius", default="R_plus", help="R_plus, R_minus or an explicit chart radius")
        p.add_argument("--nodes", type=int, default=256, help="quadrature nodes per circle")

    p = sub.add_parser("displacement", help="geometry of the paired critical point")
    _add_experiment(p, "256")

    p = sub.add_parser("mean-field", help="Monte Carlo mean of the electric co-field next to its kernel oracle")
    _add_experiment(p, "64,256")
    p.add_argument("--point", type=parse_complex, default=None, help="evaluation point (default xi + 0.3)")

    p = sub.add_parser("loggauss", help="Monte Carlo log-Gaussian correlation against G")
    _add_common(p)
    p.add_argument("--t", type=_float_list, default=(0.0, 0.5, 1.0), help="overlaps |<u,v>| in [0, 1]")
    p.add_argument("--samples", type=int, default=1_000_000)

    p = sub.add_parser("kernel-limit", help="normalized kernel against its scaling limit")
    _add_common(p, seed=False)
    p.add_argument("--N", type=_int_list, default=(64, 256))
    p.add_argument("--xi", type=parse_complex, default=1 + 1j)
    p.add_argument("--radius", type=float, default=2.0)
    p.add_argument("--step", type=float, default=0.25)

    p = sub.add_parser("gfun", help="evaluate G and its first two derivatives")
    _add_common(p, seed=False)
    p.add_argument("--t", type=_float_list, default=(0.0,))

    p = sub.add_parser("flowlines", help="SVG of zeros, critical points and descent flow lines")
    _add_common(p)
    p.add_argument("--N", type=int, default=50)
    p.add_argument("--xi", type=parse_complex, default=None)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--ensemble", default="su2")
    p.add_argument("--window", type=_float_list, default=(-1.6, 1.6, -1.6, 1.6), help="xmin,xmax,ymin,ymax")
    p.add_argument("--seeds-per-side", type=int, default=10)
    p.add_argument("--eps-tilde", type=float, default=0.1)
    p.add_argument("--json", help="also write the figure data as JSON")
    return ap


def _config(a) -> experiments.PairingConfig:
    return experiments.PairingConfig(
        N_list=a.N, xi=a.xi, eps=a.eps, gamma=a.gamma, sigma=a.sigma, trials=a.trials,
        master_seed=a.seed, coord_mode=a.coord_mode, ensemble=a.ensemble, workers=a.workers,
    )


def _ensemble(name: str, N: int):
    return ensembles.make_su2(N) if name == "su2" else ensembles.make_radial(N, ensembles.preset(name))


def _emit(report, a, outputs: list):
    if a.out:
        io.write_report_json(report, a.out)
        outputs.append(a.out)
    else:
        sys.stdout.write(io.dumps(report))


def cmd_sample(a, outputs):
    e = _ensemble(a.ensemble, a.N)
    rng = trial_rng(a.seed, a.N, a.index)
    if a.xi is None:
        p = ensembles.sample(e, rng)
    else:
        p = ensembles.sample_conditional(ensembles.condition_at(e, a.xi), rng)
    zs = roots(p).expanded()
    cs = roots(critical_polynomial(p, ComplexPolynomial.constant(1.0))).expanded()
    rep = {"N": a.N, "ensemble": a.ensemble, "index": a.index, "xi": a.xi,
           "coefficients": p.coeffs, "zeros": zs, "critical_points": cs}
    if a.xi is not None:
        rep["residual_at_xi"] = ensembles.conditional_residual(p, a.xi)
    _emit(rep, a, outputs)
    return {"N": a.N, "ensemble": a.ensemble, "index": a.index, "xi": a.xi}


def _cell(x) -> str:
    if isinstance(x, complex):
        return f"{x.real:.6g}{x.imag:+.6g}i".rjust(12)
    return f"{x:>12.6g}" if isinstance(x, float) else f"{x:>12}"


def _print_table(header, rows):
    print("  ".join(f"{h:>12}" for h in header), file=sys.stderr)
    for r in rows:
        print("  ".join(_cell(x) for x in r), file=sys.stderr)


def cmd_pairing(a, outputs):
    cfg = _config(a)
    experiments.check_hypothesis(cfg)
    rep = experiments.run_pairing(cfg)
    _emit(rep, a, outputs)
    if a.csv:
        io.write_pairing_csv(rep, a.csv)
        outputs.append(a.csv)
    _print_table(io.PAIRING_CSV_COLUMNS, [[getattr(r, c) for c in io.PAIRING_CSV_COLUMNS] for r in rep.rows])
    print(f"log-log slope {rep.slope:.4g}  band [{rep.slope_band[0]:.4g}, {rep.slope_band[1]:.4g}]  "
          f"theory exponent {rep.theory_exponent:.4g}", file=sys.stderr)
    return experiments.config_echo(cfg)


def _moment_report(a, with_variance):
    cfg = _config(a)
    experiments.check_hypothesis(cfg)
    return cfg, experiments.count_moments(cfg, a.radius, q=QuadratureSpec(a.nodes), with_variance=with_variance)


def _check_rows(rep, which):
    out = []
    for r in rep.rows:
        mc, se, f = (r.mc_mean, r.se_mean, r.formula_mean) if which == "mean" else (r.mc_var, r.se_var, r.formula_var)
        z = (mc - f) / se if se > 0 else (0.0 if mc == f else math.inf)
        out.append({"N": r.N, "radius": r.radius, "valid": r.valid, "mc": mc, "se": se, "formula": f,
                    "z_score": z, "within_3se": bool(abs(z) <= 3)})
    return out


def cmd_moments(a, outputs):
    cfg, rep = _moment_report(a, True)
    _emit(rep, a, outputs)
    if a.csv:
        io.write_csv(rep.rows, a.csv)
        outputs.append(a.csv)
    _print_table(("N", "mc_mean", "formula_mean", "mc_var", "formula_var"),
                 [(r.N, r.mc_mean, r.formula_mean, r.mc_var, r.formula_var) for r in rep.rows])
    return experiments.config_echo(cfg) | {"radius": a.radius, "nodes": a.nodes}


def _cmd_check(a, outputs, which):
    cfg, rep = _moment_report(a, which == "var")
    rows = _check_rows(rep, which)
    _emit({"config": rep.config, "radius_rule": rep.radius_rule, "statistic": which, "rows": rows}, a, outputs)
    if a.csv:
        io.write_csv(rows, a.csv)
        outputs.append(a.csv)
    _print_table(("N", "mc", "se", "formula", "z_score"), [(r["N"], r["mc"], r["se"], r["formula"], r["z_score"])
                                                            for r in rows])
    return experiments.config_echo(cfg) | {"radius": a.radius, "nodes": a.nodes}


def cmd_expectation_check(a, outputs):
    return _cmd_check(a, outputs, "mean")


def cmd_variance_check(a, outputs):
    return _cmd_check(a, outputs, "var")


def cmd_displacement(a, outputs):
    cfg = _config(a)
    experiments.check_hypothesis(cfg)
    rep = experiments.displacement_stats(cfg)
    _emit(rep, a, outputs)
    if a.csv:
        io.write_csv(rep.rows, a.csv)
        outputs.append(a.csv)
    _print_table(("N", "median N|d|", "predicted", "mean angle", "predicted"),
                 [(r.N, r.median_scaled_distance, r.predicted_scaled_distance, r.circular_mean_angle,
                   r.predicted_angle) for r in rep.rows])
    return experiments.config_echo(cfg)


def cmd_mean_field(a, outputs):
    cfg = _config(a)
    point = cfg.xi + 0.3 if a.point is None else a.point
    res = experiments.mean_field(cfg, point)
    _emit({"config": experiments.config_echo(cfg), "rows": res}, a, outputs)
    if a.csv:
        io.write_csv(res, a.csv)
        outputs.append(a.csv)
    _print_table(("N", "MC mean", "oracle", "SE re", "SE im"),
                 [(r.N, r.mean, r.oracle, r.se_re, r.se_im) for r in res])
    return dict(experiments.config_echo(cfg), point=point)


def cmd_loggauss(a, outputs):
    if any(not 0 <= t <= 1 for t in a.t):
        raise ConfigError("--t values must lie in [0, 1]")
    if a.samples < 2:
        raise ConfigError("--samples must be at least 2")
    rows = []
    for k, t in enumerate(a.t):
        u = [1.0, 0.0]
        v = [t, math.sqrt(max(0.0, 1 - t * t))]
        est, se, closed = experiments.loggauss_corr(u, v, a.samples, trial_rng(a.seed, 0, k))
        rows.append({"t": t, "estimate": est, "se": se, "G": closed, "z": (est - closed) / se})
    _emit({"seed": a.seed, "samples": a.samples, "rows": rows}, a, outputs)
    if a.out:
        _print_table(("t", "estimate", "SE", "G"), [(r["t"], r["estimate"], r["se"], r["G"]) for r in rows])
    return {"t": a.t, "samples": a.samples}


def cmd_kernel_limit(a, outputs):
    rows = []
    for N in a.N:
        err, diag = scaling_limit_error(N, a.xi, a.radius, a.step)
        rows.append({"N": N, "sup_error": err, "diagonal_error": diag})
    ratios = [rows[i + 1]["sup_error"] / rows[i]["sup_error"] for i in range(len(rows) - 1)]
    _emit({"xi": a.xi, "radius": a.radius, "step": a.step, "rows": rows, "ratios": ratios}, a, outputs)
    return {"N": a.N, "xi": a.xi, "radius": a.radius, "step": a.step}


def cmd_gfun(a, outputs):
    rows = [{"t": t, "G": G(t), "G1": G1(t), "G2": G2(t)} for t in a.t]
    if a.out:
        io.write_report_json({"rows": rows}, a.out)
        outputs.append(a.out)
    for r in rows:
        print(f"G({r['t']:.17g}) = {r['G']:.17g}  G'={r['G1']:.17g}  G''={r['G2']:.17g}")
    return {"t": a.t}


def cmd_flowlines(a, outputs):
    if len(a.window) != 4:
        raise ConfigError("--window needs four numbers xmin,xmax,ymin,ymax")
    e = _ensemble(a.ensemble, a.N)
    rng = trial_rng(a.seed, a.N, a.index)
    p = ensembles.sample(e, rng) if a.xi is None else ensembles.sample_conditional(ensembles.condition_at(e, a.xi), rng)
    fig = electrostatics.flow_figure(p, a.window, a.seeds_per_side, a.xi, a.eps_tilde)
    out = a.out or "flowlines.svg"
    io.render_svg(fig, out)
    outputs.append(out)
    if a.json:
        terminals = {}
        for line in fig.flow_lines:
            terminals[line.terminal] = terminals.get(line.terminal, 0) + 1
        io.write_report_json({"zeros": fig.zeros, "critical_points": fig.critical_points, "xi": fig.xi,
                              "annulus": fig.annulus, "annulus_count": fig.annulus_count(),
                              "terminals": terminals}, a.json)
        outputs.append(a.json)
    print(f"{fig.zeros.size} zeros, {fig.critical_points.size} critical points, "
          f"{len(fig.flow_lines)} flow lines", file=sys.stderr)
    return {"N": a.N, "xi": a.xi, "index": a.index, "ensemble": a.ensemble, "window": a.window,
            "seeds_per_side": a.seeds_per_side, "eps_tilde": a.eps_tilde}


COMMANDS = {
    "sample": cmd_sample,
    "pairing": cmd_pairing,
    "moments": cmd_moments,
    "expectation-check": cmd_expectation_check,
    "variance-check": cmd_variance_check,
    "displacement": cmd_displacement,
    "mean-field": cmd_mean_field,
    "loggauss": cmd_loggauss,
    "kernel-limit": cmd_kernel_limit,
    "gfun": cmd_gfun,
    "flowlines": cmd_flowlines,
}


def _expand_config(argv: list) -> list:
    """Move ``--config FILE`` contents in front of the subcommand's own flags."""
    if "--config" not in argv and not any(x.startswith("--config=") for x in argv):
        return argv
    out, cfg_tokens, i = [], [], 0
    while i < len(argv):
        x = argv[i]
        if x == "--config" and i + 1 < len(argv):
            cfg_tokens = read_config(argv[i + 1])
            i += 2
            continue
        if x.startswith("--config="):
            cfg_tokens = read_config(x.split("=", 1)[1])
            i += 1
            continue
        out.append(x)
        i += 1
    cmd_pos = next((k for k, x in enumerate(out) if x in COMMANDS), None)
    if cmd_pos is None:
        return out
    return out[: cmd_pos + 1] + cfg_tokens + out[cmd_pos + 1:]


def run_command(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _expand_config(argv)
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    except ConfigError as exc:
        print(f"critpair: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"critpair: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outputs: list = []
    t0 = time.perf_counter()
    try:
        config = COMMANDS[a.command](a, outputs)
        if outputs:
            manifest = io.RunManifest(a.command, config, getattr(a, "seed", None),
                                      duration_s=time.perf_counter() - t0, outputs=list(outputs))
            path = outputs[0] + ".manifest.json"
            manifest.outputs.append(path)
            manifest.write(path)
    except ConfigError as exc:
        print(f"critpair: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CritPairError as exc:
        print(f"critpair: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"critpair: I/O failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
