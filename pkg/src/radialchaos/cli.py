"""Batch command-line front end.

Exit codes: 0 success, 1 invalid input or domain, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import re
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import chaos
from .eigen import calibrate_inversion, radial_eigenfunction
from .errors import InputError, NumericalError, RadialChaosError
from .model import DEFAULT_GRID_SIZE, DEFAULT_SPECTRAL_NODES, fmt, model_from_config, read_radial_csv
from .multiplier import Multiplier, heat_kernel_profile, multiplier_from_json, symbol_eval
from .transform import inverse_transform, roundtrip_defect, spherical_transform

GRID_MIN = 16
GRID_MAX = 2**20


def parse_complex(text: str) -> complex:
    """Parse ``RE``, ``RE+IMi``, ``RE-IMi``, ``IMi`` (``j`` accepted for ``i``)."""
    t = str(text).strip().replace(" ", "")
    try:
        return complex(t.replace("i", "j"))
    except ValueError:
        raise InputError(f"cannot parse complex number {text!r}") from None


@dataclass
class RunConfig:
    model: dict = field(default_factory=lambda: {"kind": "hyperbolic", "n": 3})
    spectral: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    output_dir: str = "."
    seed: int = 0

    def validate(self) -> None:
        for name, tol in self.tolerances.items():
            if not isinstance(tol, (int, float)) or not tol > 0:
                raise InputError(f"tolerance {name!r} must be positive")
        grid = self.model.get("grid_size", DEFAULT_GRID_SIZE)
        nodes = self.spectral.get("nodes", DEFAULT_SPECTRAL_NODES)
        for name, val in (("grid_size", grid), ("spectral nodes", nodes)):
            if not isinstance(val, int) or not GRID_MIN <= val <= GRID_MAX:
                raise InputError(f"{name} must be an integer in [{GRID_MIN}, {GRID_MAX}]")

    def to_json(self) -> dict:
        return {"model": self.model, "spectral": self.spectral, "tolerances": self.tolerances,
                "output_dir": self.output_dir, "seed": self.seed}


def load_config(path) -> RunConfig:
    if path is None:
        cfg = RunConfig()
        cfg.validate()
        return cfg
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed config JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise InputError("config must be a JSON object")
    unknown = set(raw) - {"model", "spectral", "tolerances", "output_dir", "seed"}
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    model = dict(raw.get("model", {"kind": "hyperbolic", "n": 3}))
    # relative density paths are resolved against the config file
    if model.get("density_csv"):
        model["density_csv"] = str(Path(path).parent / model["density_csv"])
    try:
        cfg = RunConfig(model, dict(raw.get("spectral", {})), dict(raw.get("tolerances", {})),
                        str(raw.get("output_dir", ".")), int(raw.get("seed", 0)))
    except (TypeError, ValueError) as exc:
        raise InputError(f"malformed config: {exc}") from None
    cfg.validate()
    return cfg


def _model(cfg: RunConfig):
    try:
        return model_from_config(cfg.to_json())
    except (TypeError, ValueError, OSError) as exc:
        if isinstance(exc, RadialChaosError):
            raise
        raise InputError(f"invalid model description: {exc}") from None


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cplx(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


# --- commands ----------------------------------------------------------------


def cmd_model(args, cfg, out: Path) -> int:
    model = _model(cfg)
    kappa = calibrate_inversion(model)
    r = np.array([0.5, 1.0, 2.0, 5.0])
    report = dict(model.describe())
    report.update({
        "density_samples": {fmt(x): float(a) for x, a in zip(r, model.density(r))},
        "kappa": kappa,
        "calibration_defect": float(model._cache.get("calibration_defect", float("nan"))),
        "seed": cfg.seed,
    })
    _write_json(out / "model.json", report)
    print(f"n = {model.dimension}")
    print(f"rho = {model.rho!r}")
    for x, a in zip(r, model.density(r)):
        print(f"A({x:g}) = {fmt(a)}")
    print(f"kappa = {fmt(kappa)}")
    return 0


def cmd_eigen(args, cfg, out: Path) -> int:
    model = _model(cfg)
    lam = parse_complex(args.lam)
    if abs(lam.imag) > model.rho:
        raise InputError(f"|Im lambda| must be at most rho = {model.rho}")
    ef = radial_eigenfunction(model, lam)
    if not np.all(np.isfinite(ef.values)):
        raise NumericalError("eigenfunction solver produced non-finite values")
    ef.to_csv(out / "eigen.csv")
    summary = {"lambda": _cplx(lam), "ode_residual_max": ef.ode_residual,
               "phi_max_abs": float(np.max(np.abs(ef.values))), "seed": cfg.seed}
    _write_json(out / "eigen.json", summary)
    tol = cfg.tolerances.get("ode_residual", 1e-4 * max(1.0, abs(lam) ** 2))
    print(f"lambda = {lam}  max ODE residual = {ef.ode_residual:.3e}")
    if not ef.ode_residual < tol:
        print(f"ODE residual exceeds tolerance {tol:.3e}", file=sys.stderr)
        return 2
    return 0


def cmd_transform(args, cfg, out: Path) -> int:
    model = _model(cfg)
    f = read_radial_csv(args.input, model)
    spec = spherical_transform(model, f)
    spec.to_csv(out / "transform.csv")
    if args.roundtrip:
        calibrate_inversion(model)
        g = inverse_transform(model, spec)
        g.to_csv(out / "roundtrip.csv")
        defect = roundtrip_defect(model, f)
        _write_json(out / "roundtrip.json", {"relative_l2_defect": defect, "seed": cfg.seed})
        print(f"round-trip relative L2 defect = {defect:.3e}")
    return 0


def cmd_heat(args, cfg, out: Path) -> int:
    model = _model(cfg)
    calibrate_inversion(model)
    h = heat_kernel_profile(model, args.t)
    mass = float(np.sum(model.volume_weights * h.profile))
    if args.kernel_out:
        h.to_csv(args.kernel_out)
    nodes = model.spectral.nodes
    with open(out / "heat_symbol.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "symbol"])
        for lam, v in zip(nodes, np.exp(-args.t * (nodes**2 + model.rho**2))):
            w.writerow([fmt(lam), fmt(v)])
    _write_json(out / "heat.json", {"t": args.t, "mass": mass, "min_value": float(h.profile.min()), "seed": cfg.seed})
    print(f"t = {args.t:g}  mass = {fmt(mass)}")
    return 0


def _multiplier(model, path):
    return multiplier_from_json(model, path)


def _nu(model, T, lam0, text):
    if text is None:
        return complex(symbol_eval(model, T, lam0))
    return parse_complex(text)


def _prepare(model, T):
    # only the heat kernel is built by inversion; other symbols need no calibration
    if T.kind == "heat":
        calibrate_inversion(model)


def cmd_certify(args, cfg, out: Path) -> int:
    model = _model(cfg)
    T = _multiplier(model, args.multiplier)
    lam0 = parse_complex(args.lambda0)
    nu = _nu(model, T, lam0, args.nu)
    cert = chaos.certify_mixing(model, T, nu, lam0, args.p)
    cert.write(out / "certificate.json")
    print(f"verdict: {cert.verdict}")
    return 0 if cert.verdict != chaos.INCONCLUSIVE else 2


def cmd_periodic(args, cfg, out: Path) -> int:
    model = _model(cfg)
    T = _multiplier(model, args.multiplier)
    lam0 = parse_complex(args.lambda0)
    nu = _nu(model, T, lam0, args.nu)
    try:
        rot = Fraction(args.rotation)
    except (ValueError, ZeroDivisionError):
        raise InputError(f"rotation must be a fraction P/Q, got {args.rotation!r}") from None
    chaos._check_pair(model, T, nu, lam0, args.p)
    roots, _ = chaos.find_unimodular_roots(model, T, nu, lam0, [rot], args.p)
    report = {"rotation": f"{rot.numerator}/{rot.denominator}", "nu": _cplx(nu), "found": bool(roots), "seed": cfg.seed}
    code = 0
    if roots:
        pp = chaos.build_periodic_point(roots, [args.center], [1.0])
        report.update({
            "lambda": _cplx(roots[0].lam),
            "residual": roots[0].residual,
            "period": pp.period,
            "diagonal_defect": chaos.diagonal_defect(model, T, pp, nu),
        })
        if args.verify:
            _prepare(model, T)
            defect = chaos.verify_periodic(model, T, pp, nu)
            report["kernel_defect"] = defect
            report["kernel_passed"] = defect < chaos.PERIODIC_PASS
            print(f"kernel-side defect after {pp.period} steps = {defect:.3e}")
            code = 0 if defect < chaos.PERIODIC_PASS else 2
        print(f"root lambda = {roots[0].lam}  period = {pp.period}")
    else:
        print(f"no root for rotation {rot} in S_p at sampling resolution")
        code = 2
    _write_json(out / "periodic.json", report)
    return code


def cmd_orbit(args, cfg, out: Path) -> int:
    model = _model(cfg)
    T = _multiplier(model, args.multiplier)
    nu = parse_complex(args.nu)
    if nu == 0:
        raise InputError("nu must be nonzero")
    lams = [parse_complex(x) for x in (args.lam or ["0.5"])]
    rec = chaos.simulate_orbit(model, T, nu, [(lam, 1.0) for lam in lams], args.steps, args.p)
    rec.to_csv(out / "orbit.csv")
    _write_json(out / "orbit.json", {
        "components": [_cplx(x) for x in lams],
        "moduli": rec.moduli.tolist(),
        "stopped_early": rec.stopped_early,
        "seed": cfg.seed,
    })
    print(f"{len(rec.norms) - 1} steps, final norm {fmt(rec.norms[-1])}")
    return 0


def _read_c_list(path) -> list[complex]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read c-list: {exc}") from None
    out = []
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if not line or line.lower().startswith("c"):
            continue
        parts = [p for p in re.split(r"[,\s]+", line) if p]
        if len(parts) == 2:
            try:
                out.append(complex(float(parts[0]), float(parts[1])))
                continue
            except ValueError:
                raise InputError(f"bad c-list line {line!r}") from None
        out.append(parse_complex(line))
    return out


def cmd_heat_sweep(args, cfg, out: Path) -> int:
    model = _model(cfg)
    cp = chaos.chaos_threshold(model, args.p)
    T = Multiplier.heat(args.t0)
    rows = []
    for c in _read_c_list(args.c_list):
        above = c.real > cp
        s = t = verdict = ""
        if above:
            lam = chaos.solve_strip_parameter(model, args.p, c)
            nu = np.exp(-c * args.t0)
            cert = chaos.certify_mixing(model, T, nu, lam, args.p)
            s, t, verdict = fmt(lam.real), fmt(lam.imag), cert.verdict
        rows.append([fmt(c.real), fmt(c.imag), fmt(cp), "true" if above else "false", s, t, verdict])
    with open(out / "heat_sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["c_re", "c_im", "c_p", "above_threshold", "s", "t", "verdict"])
        w.writerows(rows)
    print(f"c_p = {fmt(cp)}; {len(rows)} rows written")
    return 0


# --- entry point -------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    # global options are accepted before or after the command name
    common = _Parser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="run configuration JSON")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory (overrides the config)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed recorded in outputs")

    parser = _Parser(prog="radialchaos", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("model", parents=[common], help="describe and calibrate the model")

    p = sub.add_parser("eigen", parents=[common], help="radial eigenfunction")
    p.add_argument("--lambda", dest="lam", required=True, help="spectral parameter RE[+IMi]")

    p = sub.add_parser("transform", parents=[common], help="spherical transform of a radial CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--roundtrip", action="store_true")

    p = sub.add_parser("heat", parents=[common], help="heat kernel")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--kernel-out")

    for name in ("certify", "periodic"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--multiplier", required=True)
        p.add_argument("--p", type=float, required=True)
        p.add_argument("--lambda0", required=True)
        p.add_argument("--nu", help="defaults to m_T(lambda0)")
        if name == "periodic":
            p.add_argument("--rotation", required=True, help="P/Q")
            p.add_argument("--center", type=float, default=0.0)
            p.add_argument("--verify", action="store_true")

    p = sub.add_parser("orbit", parents=[common])
    p.add_argument("--multiplier", required=True)
    p.add_argument("--nu", required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--lambda", dest="lam", action="append", help="component (repeatable, default 0.5)")
    p.add_argument("--p", type=float, default=4.0)

    p = sub.add_parser("heat-sweep", parents=[common])
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--t0", type=float, required=True)
    p.add_argument("--c-list", required=True)
    return parser


COMMANDS = {
    "model": cmd_model,
    "eigen": cmd_eigen,
    "transform": cmd_transform,
    "heat": cmd_heat,
    "certify": cmd_certify,
    "periodic": cmd_periodic,
    "orbit": cmd_orbit,
    "heat-sweep": cmd_heat_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(getattr(args, "config", None))
        if getattr(args, "seed", None) is not None:
            cfg.seed = args.seed
        out = Path(getattr(args, "out", None) or cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, cfg, out)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
