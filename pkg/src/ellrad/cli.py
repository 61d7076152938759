"""Command line front end.

One binary with subcommands: ``phantom``, ``forward``, ``adjoint``,
``recon`` (modes ``normal`` and ``lambda``), and ``verify``.  Option
precedence is flags > config file (``--config``, JSON) > built-in
defaults.  Exit codes: 0 success, 1 configuration or input errors,
2 compute errors; every error is printed to stderr as
``ERROR <code>: <message>``.
"""

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import (ConfigurationError, DomainError, EllradError,
                     SinogramParseError)
from .geometry import make_geometry
from .kernels import available_backends, get_backend
from .microlocal import bolker_certificate
from .phantom import load_phantom, rasterize, write_grid_csv, write_grid_pgm
from .transform import (QuadratureSpec, SinogramSpec, adjoint, forward,
                        lambda_reconstruct, read_sinogram, write_sinogram)

DEFAULTS = {
    "alpha": math.pi / 4.0,
    "n": 256,
    "ns": 180,
    "nl": 200,
    "eps_l": None,
    "panels": 16,
    "nodes": 8,
    "scan": 192,
    "grid": 512,
    "workers": 1,
    "backend": "auto",
    "supersample": False,
    "binary": False,
    "name": "run",
    "mode": "lambda",
}

_CONFIG_ERRORS = (ConfigurationError, SinogramParseError, DomainError,
                  FileNotFoundError, NotADirectoryError, IsADirectoryError,
                  PermissionError)


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage problems as config errors."""

    def error(self, message):
        raise ConfigurationError(message)


def _add_common(sp):
    sp.add_argument("-o", "--output", required=True,
                    help="output directory (created if missing)")
    sp.add_argument("--config", default=None,
                    help="JSON config file; flags override its entries")
    sp.add_argument("--workers", type=int, default=None,
                    help=f"thread count (default: {DEFAULTS['workers']}); "
                         "results are identical for any value")
    sp.add_argument("--backend", default=None,
                    choices=("auto",) + tuple(available_backends()),
                    help=f"kernel backend (default: {DEFAULTS['backend']})")


def build_parser():
    parser = _Parser(prog="ellrad",
                     description="Elliptical Radon transform toolkit")
    sub = parser.add_subparsers(dest="command", required=True,
                               parser_class=_Parser)

    p = sub.add_parser("phantom",
                       help="rasterize a phantom description onto the disc grid")
    p.add_argument("--phantom", required=True, help="phantom JSON file")
    p.add_argument("--alpha", type=float, default=None,
                   help=f"scan half-separation in radians "
                        f"(default: {DEFAULTS['alpha']:.6g}); sets the grid extent")
    p.add_argument("--n", type=int, default=None,
                   help=f"image pixels per side (default: {DEFAULTS['n']})")
    p.add_argument("--supersample", action=argparse.BooleanOptionalAction,
                   default=None,
                   help="resolve boundary pixels by 4x4 subsampling "
                        f"(default: {DEFAULTS['supersample']})")
    _add_common(p)
    p.set_defaults(func=_cmd_phantom)

    p = sub.add_parser("forward",
                       help="forward transform of a phantom to a sinogram file")
    p.add_argument("--phantom", required=True, help="phantom JSON file")
    p.add_argument("--alpha", type=float, default=None,
                   help=f"scan half-separation (default: {DEFAULTS['alpha']:.6g})")
    p.add_argument("--ns", type=int, default=None,
                   help=f"scan-angle samples (default: {DEFAULTS['ns']})")
    p.add_argument("--nl", type=int, default=None,
                   help=f"diameter samples (default: {DEFAULTS['nl']})")
    p.add_argument("--eps-l", type=float, default=None, dest="eps_l",
                   help="diameter end margin (default: 2%% of the "
                        "admissible span)")
    p.add_argument("--panels", type=int, default=None,
                   help=f"quadrature panels per full-width window "
                        f"(default: {DEFAULTS['panels']})")
    p.add_argument("--nodes", type=int, default=None,
                   help=f"Gauss-Legendre nodes per panel "
                        f"(default: {DEFAULTS['nodes']})")
    p.add_argument("--scan", type=int, default=None,
                   help=f"boundary-crossing scan resolution "
                        f"(default: {DEFAULTS['scan']})")
    p.add_argument("--binary", action=argparse.BooleanOptionalAction,
                   default=None,
                   help=f"write the binary sinogram variant "
                        f"(default: {DEFAULTS['binary']})")
    p.add_argument("--name", default=None,
                   help=f"output stem (default: {DEFAULTS['name']!r})")
    _add_common(p)
    p.set_defaults(func=_cmd_forward)

    p = sub.add_parser("adjoint",
                       help="backproject a sinogram file onto the disc grid")
    p.add_argument("--sino", required=True, help="sinogram file (.txt or .bin)")
    p.add_argument("--n", type=int, default=None,
                   help=f"image pixels per side (default: {DEFAULTS['n']})")
    _add_common(p)
    p.set_defaults(func=_cmd_adjoint)

    p = sub.add_parser("recon",
                       help="reconstruct an image from a sinogram or phantom")
    p.add_argument("--mode", choices=("normal", "lambda"), default=None,
                   help=f"normal: plain backprojection of the data; lambda: "
                        f"second-derivative filter then backprojection "
                        f"(default: {DEFAULTS['mode']})")
    p.add_argument("--sino", default=None, help="sinogram file input")
    p.add_argument("--phantom", default=None,
                   help="phantom JSON input (runs the forward transform first)")
    p.add_argument("--alpha", type=float, default=None,
                   help=f"scan half-separation for --phantom runs "
                        f"(default: {DEFAULTS['alpha']:.6g})")
    p.add_argument("--ns", type=int, default=None,
                   help=f"scan-angle samples for --phantom runs "
                        f"(default: {DEFAULTS['ns']})")
    p.add_argument("--nl", type=int, default=None,
                   help=f"diameter samples for --phantom runs "
                        f"(default: {DEFAULTS['nl']})")
    p.add_argument("--eps-l", type=float, default=None, dest="eps_l",
                   help="diameter end margin for --phantom runs")
    p.add_argument("--panels", type=int, default=None,
                   help=f"quadrature panels (default: {DEFAULTS['panels']})")
    p.add_argument("--nodes", type=int, default=None,
                   help=f"nodes per panel (default: {DEFAULTS['nodes']})")
    p.add_argument("--scan", type=int, default=None,
                   help=f"boundary scan resolution (default: {DEFAULTS['scan']})")
    p.add_argument("--n", type=int, default=None,
                   help=f"image pixels per side (default: {DEFAULTS['n']})")
    _add_common(p)
    p.set_defaults(func=_cmd_recon)

    p = sub.add_parser("verify",
                       help="run the geometry certification sweeps")
    p.add_argument("--alpha", type=float, default=None,
                   help=f"scan half-separation (default: {DEFAULTS['alpha']:.6g})")
    p.add_argument("--grid", type=int, default=None,
                   help=f"sweep grid points per axis (default: {DEFAULTS['grid']})")
    _add_common(p)
    p.set_defaults(func=_cmd_verify)

    return parser


@dataclass(frozen=True)
class RunConfig:
    """Resolved options for one command run.

    Only the fields a command consumes are populated; grid counts are
    validated to be at least 4 and paths are checked before any compute
    starts.
    """

    alpha: float = None
    n: int = None
    ns: int = None
    nl: int = None
    grid: int = None
    eps_l: float = None
    panels: int = None
    nodes: int = None
    scan: int = None
    workers: int = None
    backend: str = None
    supersample: bool = None
    binary: bool = None
    name: str = None
    mode: str = None

    def check_counts(self, *names):
        for attr in names:
            value = getattr(self, attr)
            if value is not None and int(value) < 4:
                raise ConfigurationError(
                    f"{attr} must be at least 4; got {value}")
        return self


_CONFIG_KEYS = tuple(f.name for f in fields(RunConfig))


def _merged(args, keys):
    """Resolve a RunConfig: flags > config file > defaults."""
    cfg = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise ConfigurationError(f"config file not found: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            try:
                cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"invalid config JSON: {exc}")
        if not isinstance(cfg, dict):
            raise ConfigurationError("config file must hold a JSON object")
        unknown = set(cfg) - set(_CONFIG_KEYS)
        if unknown:
            raise ConfigurationError(
                f"unknown config keys: {sorted(unknown)}")
    out = {}
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in cfg:
            out[key] = cfg[key]
        else:
            out[key] = DEFAULTS[key]
    return RunConfig(**out)


def _outdir(args):
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _input_file(path, what):
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"{what} file not found: {p}")
    return p


def _write_meta(outdir, stem, payload):
    path = outdir / f"{stem}_meta.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_image(grid, outdir, stem):
    csv_path = outdir / f"{stem}.csv"
    pgm_path = outdir / f"{stem}.pgm"
    write_grid_csv(grid, csv_path)
    write_grid_pgm(grid, pgm_path)
    return [str(csv_path), str(pgm_path), f"{pgm_path}.range.txt"]


def _cmd_phantom(args):
    cfg = _merged(args, ["alpha", "n", "supersample", "workers",
                         "backend"]).check_counts("n")
    phantom_path = _input_file(args.phantom, "phantom")
    outdir = _outdir(args)
    g = make_geometry(cfg.alpha)
    p = load_phantom(phantom_path)
    t0 = time.perf_counter()
    grid = rasterize(p, cfg.n, g.b, supersample=bool(cfg.supersample))
    outputs = _write_image(grid, outdir, "phantom")
    _write_meta(outdir, "phantom", {
        "command": "phantom", "alpha": cfg.alpha, "n": cfg.n,
        "supersample": bool(cfg.supersample),
        "phantom": str(phantom_path), "outputs": outputs,
        "elapsed_s": time.perf_counter() - t0})
    return 0


def _forward_pieces(cfg):
    spec = SinogramSpec(int(cfg.ns), int(cfg.nl), cfg.eps_l)
    quad = QuadratureSpec(int(cfg.panels), int(cfg.nodes), int(cfg.scan))
    return spec, quad


def _cmd_forward(args):
    cfg = _merged(args, ["alpha", "ns", "nl", "eps_l", "panels", "nodes",
                         "scan", "binary", "name", "workers",
                         "backend"]).check_counts("ns", "nl")
    phantom_path = _input_file(args.phantom, "phantom")
    outdir = _outdir(args)
    g = make_geometry(cfg.alpha)
    p = load_phantom(phantom_path)
    spec, quad = _forward_pieces(cfg)
    backend = get_backend(cfg.backend)
    t0 = time.perf_counter()
    sino = forward(p, g, spec, quad=quad, workers=int(cfg.workers),
                   backend=backend.NAME)
    suffix = "sino.bin" if cfg.binary else "sino.txt"
    sino_path = outdir / f"{cfg.name}.{suffix}"
    write_sinogram(sino, sino_path)
    _write_meta(outdir, cfg.name, {
        "command": "forward", "alpha": cfg.alpha, "n_s": int(cfg.ns),
        "n_L": int(cfg.nl), "eps_l": cfg.eps_l,
        "panels": int(cfg.panels), "nodes": int(cfg.nodes),
        "scan": int(cfg.scan), "phantom": str(phantom_path),
        "backend": backend.NAME, "workers": int(cfg.workers),
        "outputs": [str(sino_path)],
        "elapsed_s": time.perf_counter() - t0})
    return 0


def _cmd_adjoint(args):
    cfg = _merged(args, ["n", "workers", "backend"]).check_counts("n")
    sino_path = _input_file(args.sino, "sinogram")
    outdir = _outdir(args)
    backend = get_backend(cfg.backend)
    sino = read_sinogram(sino_path)
    t0 = time.perf_counter()
    img = adjoint(sino, n=int(cfg.n), workers=int(cfg.workers),
                  backend=backend.NAME)
    outputs = _write_image(img, outdir, "adjoint")
    _write_meta(outdir, "adjoint", {
        "command": "adjoint", "n": int(cfg.n), "sino": str(sino_path),
        "backend": backend.NAME, "workers": int(cfg.workers),
        "outputs": outputs, "elapsed_s": time.perf_counter() - t0})
    return 0


def _cmd_recon(args):
    cfg = _merged(args, ["mode", "alpha", "ns", "nl", "eps_l", "panels",
                         "nodes", "scan", "n", "workers",
                         "backend"]).check_counts("n")
    if bool(args.sino) == bool(args.phantom):
        raise ConfigurationError(
            "recon needs exactly one input: --sino or --phantom")
    outdir = _outdir(args)
    backend = get_backend(cfg.backend)
    workers = int(cfg.workers)

    t0 = time.perf_counter()
    if args.sino:
        sino = read_sinogram(_input_file(args.sino, "sinogram"))
        source = str(args.sino)
    else:
        cfg.check_counts("ns", "nl")
        g = make_geometry(cfg.alpha)
        p = load_phantom(_input_file(args.phantom, "phantom"))
        spec, quad = _forward_pieces(cfg)
        sino = forward(p, g, spec, quad=quad, workers=workers,
                       backend=backend.NAME)
        source = str(args.phantom)

    if cfg.mode == "normal":
        img = adjoint(sino, n=int(cfg.n), workers=workers,
                      backend=backend.NAME)
    else:
        img = lambda_reconstruct(sino, n=int(cfg.n), workers=workers,
                                 backend=backend.NAME)
    stem = f"recon_{cfg.mode}"
    outputs = _write_image(img, outdir, stem)
    _write_meta(outdir, stem, {
        "command": "recon", "mode": cfg.mode, "n": int(cfg.n),
        "input": source, "backend": backend.NAME, "workers": workers,
        "outputs": outputs, "elapsed_s": time.perf_counter() - t0})
    return 0


def _cmd_verify(args):
    cfg = _merged(args, ["alpha", "grid", "workers",
                         "backend"]).check_counts("grid")
    outdir = _outdir(args)
    t0 = time.perf_counter()
    cert = bolker_certificate(cfg.alpha, grid=int(cfg.grid))
    json_path = outdir / "certificate.json"
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(cert.to_dict(), fh, indent=2)
        fh.write("\n")
    txt_path = outdir / "certificate.txt"
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write(cert.to_text())
    _write_meta(outdir, "verify", {
        "command": "verify", "alpha": cfg.alpha, "grid": int(cfg.grid),
        "all_passed": bool(cert.all_passed),
        "outputs": [str(json_path), str(txt_path)],
        "elapsed_s": time.perf_counter() - t0})
    if not cert.all_passed:
        failing = [c.name for c in cert.checks if not c.passed]
        raise EllradError(f"certification failed: {', '.join(failing)}")
    return 0


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigurationError as exc:
        print(f"ERROR 1: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        print(f"ERROR 1: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"ERROR 2: {exc}", file=sys.stderr)
        return 2


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
