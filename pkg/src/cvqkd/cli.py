"""Command-line front end.

Every subcommand writes a table (CSV, or JSON as a list of row objects) to
``--output`` or stdout. Options may also come from ``--config FILE``, a plain
``key = value`` file using the long option names; options given on the
command line win, and unknown keys are rejected.

Exit codes: 0 success, 2 invalid input or domain error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .entropy import ProtocolConfig
from .errors import CVQKDError
from .estimation import Dataset, channel_from_bounds, estimate, qpsk_estimate, qpsk_worst_case
from .finitesize import FiniteSizeParams, asymptotic_components, keyrate_finite
from .fock import Constellation
from .keyrate_dm import DmConfig, holevo_dm_direct, holevo_dm_extremality, mutual_info_dm
from .keyrate_gm import (
    DEFAULT_LOSS_DB_PER_KM,
    ChannelParams,
    keyrate,
    keyrate_mdi_symmetric,
    transmittance_from_distance,
)
from .simulator import SimSpec, simulate, summary_json

EXIT_OK = 0
EXIT_DOMAIN = 2
EXIT_IO = 3
DIGITS = 12

_NAMED_CONSTELLATIONS = {
    "bpsk": Constellation.bpsk,
    "qpsk": Constellation.qpsk,
    "qpsk-diagonal": lambda a: Constellation.qpsk(a, diagonal=True),
}


class UsageError(Exception):
    pass


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.{DIGITS}g}"
    return str(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return float(f"{v:.{DIGITS}g}") if math.isfinite(v) else None
    return v


def render(columns: Sequence[str], rows: Sequence[Sequence], fmt: str) -> str:
    if fmt == "json":
        return json.dumps([{c: _json_value(v) for c, v in zip(columns, row)} for row in rows], indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _emit(args, columns, rows) -> None:
    text = render(columns, rows, args.format)
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text)


def _linspace(lo: float, hi: float, points: int) -> np.ndarray:
    if points < 1:
        raise UsageError("--points must be >= 1")
    return np.linspace(lo, hi, points)


def _t_or_distance_grid(args) -> tuple[str, list, list]:
    """Returns ``(label, grid values, transmittances)``."""
    if args.T is not None:
        return "T", list(args.T), list(args.T)
    if args.distance is not None:
        d = list(args.distance)
    else:
        d = list(_linspace(args.d_min, args.d_max, args.points))
    return "distance_km", d, [transmittance_from_distance(x, args.loss) for x in d]


# subcommand handlers ---------------------------------------------------------

def _protocol(args) -> ProtocolConfig:
    return ProtocolConfig(args.detection, args.reconciliation, args.beta, args.v_mod)


def cmd_keyrate_gm(args) -> None:
    cfg = _protocol(args)
    label, grid, ts = _t_or_distance_grid(args)
    base = ChannelParams(t_ch=1.0, xi_ch=args.xi_ch, eta=args.eta, xi_el=args.xi_el, trusted=args.trusted)
    rows = []
    for point, t in zip(grid, ts):
        k = keyrate(cfg, replace(base, t_ch=t))
        rows.append([point, t, k.mutual_info, k.holevo, k.rate, k.abort])
    _emit(args, [label, "t_ch", "mutual_info", "holevo", "K", "abort"], rows)


def load_constellation(spec: str, alpha: Optional[float]) -> Constellation:
    """Named constellation with amplitude ``alpha``, or a JSON file scaled by ``alpha``."""
    key = spec.lower()
    if key in _NAMED_CONSTELLATIONS:
        if alpha is None:
            raise UsageError(f"--alpha is required with the named constellation {spec!r}")
        return _NAMED_CONSTELLATIONS[key](alpha)
    c = Constellation.from_json(Path(spec).read_text())
    return c if alpha is None else c.scaled(alpha)


def cmd_keyrate_dm(args) -> None:
    c = load_constellation(args.constellation, args.alpha)
    label, grid, ts = _t_or_distance_grid(args)
    want_direct = args.bound in ("direct", "both")
    want_ext = args.bound in ("extremality", "both")
    columns = ([label] if label == "T" else [label, "T"]) + ["mutual_info"]
    if want_direct:
        columns += ["chi_direct", "K_direct"]
    if want_ext:
        columns += ["chi_extremality", "K_extremality"]
    rows = []
    for point, t in zip(grid, ts):
        cfg = DmConfig(c, t, args.detection, args.reconciliation, args.beta)
        info = mutual_info_dm(cfg)
        row = ([t] if label == "T" else [point, t]) + [info]
        if want_direct:
            chi = holevo_dm_direct(cfg)
            row += [chi, args.beta * info - chi]
        if want_ext:
            chi = holevo_dm_extremality(cfg)
            row += [chi, args.beta * info - chi]
        rows.append(row)
    _emit(args, columns, rows)


def cmd_keyrate_mdi(args) -> None:
    grid = list(args.xi) if args.xi is not None else list(_linspace(args.xi_min, args.xi_max, args.points))
    _emit(args, ["xi", "K"], [[x, keyrate_mdi_symmetric(x)] for x in grid])


def cmd_estimate(args) -> None:
    d = Dataset.from_csv(Path(args.input).read_text())
    if args.mode == "qpsk":
        q = qpsk_estimate(d, args.alpha, args.mu)
        T_min, xi_max = qpsk_worst_case(d, args.alpha, args.epsilon_pe, args.mu, args.quantile)
        _emit(args, ["T_hat", "xi_hat", "T_min", "xi_max", "epsilon_pe"],
              [[q.T_hat, q.xi_hat, T_min, xi_max, args.epsilon_pe]])
        return
    r = estimate(d, args.v_a, args.epsilon_pe, args.quantile)
    T_w, xi_w = channel_from_bounds(r, args.mu)
    _emit(args, ["t_hat", "sigma2_hat", "t_min", "sigma2_max", "epsilon_pe", "z", "T_min", "xi_max"],
          [[r.t_hat, r.sigma2_hat, r.t_min, r.sigma2_max, r.epsilon_pe, r.z, T_w, xi_w]])


def cmd_finite_size(args) -> None:
    cfg = _protocol(args)
    if args.I is not None or args.chi is not None:
        if args.I is None or args.chi is None:
            raise UsageError("--I and --chi must be given together")
        comps = {"I": args.I, "chi_worst": args.chi}
    else:
        if args.T is None:
            raise UsageError("give either --T and --xi or --I and --chi")
        comps = asymptotic_components(cfg, args.T, args.xi)
    m = args.m if args.m is not None else args.N / 2
    fs = FiniteSizeParams(args.N, m, args.d, args.p_ec, args.eps_bar, args.eps_h, args.eps_cor, args.eps_pe)
    r = keyrate_finite(comps, fs, args.beta)
    _emit(args, ["N", "n", "I", "chi", "delta", "k_eps", "eps_total", "abort"],
          [[fs.N, fs.n, comps["I"], comps["chi_worst"], r.delta, r.k_eps, r.eps_total, r.abort]])


def cmd_simulate(args) -> None:
    if args.T is not None and args.distance is not None:
        raise UsageError("--T and --distance are mutually exclusive")
    T = args.T if args.T is not None else (
        transmittance_from_distance(args.distance, args.loss) if args.distance is not None else 1.0)
    spec = SimSpec(args.rounds, args.modulation, T, args.xi, args.detection, args.seed, args.v_mod, args.alpha)
    d = simulate(spec)
    if args.summary:
        Path(args.summary).write_text(summary_json(d) + "\n")
    _emit(args, list(d.header), d.rows().tolist())


# parser ----------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", "-o", help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--config", help="key = value file with defaults for the long options")


def _protocol_opts(p, detection="heterodyne") -> None:
    p.add_argument("--beta", type=float, default=0.95, help="reconciliation efficiency")
    p.add_argument("--v-mod", type=float, default=4.0, help="modulation variance (SNU)")
    p.add_argument("--detection", choices=("homodyne", "heterodyne"), default=detection)
    p.add_argument("--reconciliation", choices=("reverse", "direct"), default="reverse")


def _grid_opts(p, d_max=60.0, points=61) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--T", type=float, nargs="+", help="explicit transmittance values")
    g.add_argument("--distance", type=float, nargs="+", help="explicit distances (km)")
    p.add_argument("--d-min", type=float, default=0.0)
    p.add_argument("--d-max", type=float, default=d_max)
    p.add_argument("--points", type=int, default=points)
    p.add_argument("--loss", type=float, default=DEFAULT_LOSS_DB_PER_KM, help="fibre loss (dB/km)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvqkd", description="Continuous-variable QKD key-rate toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    kr = sub.add_parser("keyrate", help="asymptotic key rates")
    krs = kr.add_subparsers(dest="family", required=True)

    gm = krs.add_parser("gm", help="Gaussian modulation over a distance or T grid",
                        description="Columns: distance_km|T, t_ch, mutual_info, holevo, K, abort.")
    _protocol_opts(gm)
    _grid_opts(gm)
    gm.add_argument("--xi-ch", type=float, default=0.0, help="channel excess noise")
    gm.add_argument("--xi-el", type=float, default=0.0, help="electronic noise")
    gm.add_argument("--eta", type=float, default=1.0, help="detector efficiency")
    gm.add_argument("--trusted", action="store_true", help="use the trusted-noise model")
    _common(gm)
    gm.set_defaults(handler=cmd_keyrate_gm)

    dm = krs.add_parser("dm", help="discrete modulation over a pure-loss channel",
                        description="Columns: distance_km|T, T, mutual_info, then chi_direct, K_direct "
                                    "and/or chi_extremality, K_extremality.")
    dm.add_argument("--constellation", default="bpsk", help="bpsk, qpsk, qpsk-diagonal or a JSON file")
    dm.add_argument("--alpha", type=float, help="amplitude (named) or scale factor (file)")
    dm.add_argument("--bound", choices=("direct", "extremality", "both"), default="both")
    dm.add_argument("--beta", type=float, default=0.95)
    dm.add_argument("--detection", choices=("homodyne", "heterodyne"), default="homodyne")
    dm.add_argument("--reconciliation", choices=("reverse", "direct"), default="reverse")
    _grid_opts(dm, d_max=50.0, points=11)
    _common(dm)
    dm.set_defaults(handler=cmd_keyrate_dm)

    mdi = krs.add_parser("mdi", help="symmetric MDI large-variance rate", description="Columns: xi, K.")
    mdi.add_argument("--xi", type=float, nargs="+", help="explicit equivalent-noise values")
    mdi.add_argument("--xi-min", type=float, default=4.5)
    mdi.add_argument("--xi-max", type=float, default=10.0)
    mdi.add_argument("--points", type=int, default=12)
    _common(mdi)
    mdi.set_defaults(handler=cmd_keyrate_mdi)

    est = sub.add_parser("estimate", help="parameter estimation from a CSV dataset",
                         description="Columns (linear): t_hat, sigma2_hat, t_min, sigma2_max, epsilon_pe, z, "
                                     "T_min, xi_max. Columns (qpsk): T_hat, xi_hat, T_min, xi_max, epsilon_pe.")
    est.add_argument("--input", "-i", required=True, help="CSV with header x,y or x_q,x_p,y_q,y_p")
    est.add_argument("--mode", choices=("linear", "qpsk"), default="linear")
    est.add_argument("--v-a", type=float, default=4.0, help="modulation variance of the x values")
    est.add_argument("--alpha", type=float, default=0.5, help="QPSK amplitude")
    est.add_argument("--mu", type=float, default=1.0, help="vacuum units in Bob's noise (1 hom, 2 het)")
    est.add_argument("--epsilon-pe", type=float, default=0.05)
    est.add_argument("--quantile", choices=("paper", "gaussian"), default="paper")
    _common(est)
    est.set_defaults(handler=cmd_estimate)

    fs = sub.add_parser("finite-size", help="finite-size key rate",
                        description="Columns: N, n, I, chi, delta, k_eps, eps_total, abort.")
    _protocol_opts(fs)
    fs.add_argument("--T", type=float, help="transmittance used to evaluate I and chi")
    fs.add_argument("--xi", type=float, default=0.0)
    fs.add_argument("--I", type=float, help="mutual information (with --chi)")
    fs.add_argument("--chi", type=float, help="worst-case Holevo information (with --I)")
    fs.add_argument("--N", type=float, default=1e9)
    fs.add_argument("--m", type=float, help="estimation symbols (default N/2)")
    fs.add_argument("--d", type=int, default=5, help="discretisation bits")
    fs.add_argument("--p-ec", type=float, default=0.95)
    for name in ("eps-bar", "eps-h", "eps-cor", "eps-pe"):
        fs.add_argument(f"--{name}", type=float, default=1e-10)
    _common(fs)
    fs.set_defaults(handler=cmd_finite_size)

    sim = sub.add_parser("simulate", help="seeded Monte Carlo dataset",
                         description="Columns: x,y (Gaussian homodyne) or x_q,x_p,y_q,y_p.")
    sim.add_argument("--rounds", type=int, default=100000)
    sim.add_argument("--modulation", choices=("gaussian", "qpsk"), default="gaussian")
    sim.add_argument("--T", type=float)
    sim.add_argument("--distance", type=float)
    sim.add_argument("--loss", type=float, default=DEFAULT_LOSS_DB_PER_KM)
    sim.add_argument("--xi", type=float, default=0.0)
    sim.add_argument("--detection", choices=("homodyne", "heterodyne"), default="homodyne")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--v-mod", type=float, default=4.0)
    sim.add_argument("--alpha", type=float, default=0.5)
    sim.add_argument("--summary", help="also write summary statistics as JSON to this file")
    _common(sim)
    sim.set_defaults(handler=cmd_simulate)
    return parser


def _leaf_parser(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.ArgumentParser:
    """The subparser that handles ``argv``."""
    p = parser
    rest = list(argv)
    while True:
        subs = [a for a in p._actions if isinstance(a, argparse._SubParsersAction)]
        if not subs:
            return p
        choice = next(a for a in rest if not a.startswith("-"))
        rest = rest[rest.index(choice) + 1:]
        p = subs[0].choices[choice]


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def read_config(path: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _config_defaults(leaf: argparse.ArgumentParser, cfg: dict) -> dict:
    actions = {a.dest: a for a in leaf._actions if a.option_strings and a.dest not in ("help", "config")}
    typed = {}
    for key, value in cfg.items():
        if key not in actions:
            raise UsageError(f"unknown config key {key!r}")
        act = actions[key]
        try:
            if isinstance(act, argparse._StoreTrueAction):
                typed[key] = _parse_bool(value)
            elif act.nargs in ("+", "*"):
                typed[key] = [(act.type or str)(v) for v in value.replace(",", " ").split()]
            else:
                typed[key] = (act.type or str)(value)
        except ValueError as exc:
            raise UsageError(f"bad value for {key!r}: {exc}") from None
        if act.choices is not None and typed[key] not in act.choices:
            raise UsageError(f"{key!r} must be one of {sorted(act.choices)}")
    return typed


def parse(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        leaf = _leaf_parser(parser, argv)
        defaults = _config_defaults(leaf, read_config(args.config))
        leaf.set_defaults(**defaults)
        args = parser.parse_args(argv)
        if getattr(args, "T", None) is not None and getattr(args, "distance", None) is not None:
            raise UsageError("T and distance are mutually exclusive")
    return args


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse(argv)
        args.handler(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UsageError, CVQKDError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
