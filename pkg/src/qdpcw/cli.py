"""Command-line entry point: ``qdpcw <command> [options]``.

Exit status is 0 on success, 1 for invalid input (bad flags, malformed
files, failed preconditions) and 2 when a numerical procedure fails.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, io, plots, schema
from .analysis import compute_budget, extract_beta, extract_g2, extract_group_index
from .analysis.group_index import GroupIndexCurve
from .core import beta_from_measured, solve_level_dynamics
from .fitting import DecayFitter, FitError, PeakFinder, PeakFit
from .fitting.result import FitResult
from .manifest import RunManifest, config_digest
from .sim import (build_coincidence_histogram, build_decay_histogram, simulate_pulse_train,
                  synthesize_fp_spectrum)
from .sim.config import ExperimentConfig, FabryPerotSceneConfig
from .types import CoincidenceHistogram, DecayHistogram

log = logging.getLogger("qdpcw")

OUT_ENV = "QDPCW_OUT_DIR"
EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; 2 is reserved for numerical failures here
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


class Run:
    """Output directory, manifest and schema-checked writers of one invocation."""

    def __init__(self, args, config=None):
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.name = args.name or args.command.replace("-", "_")
        resolved = {k: v for k, v in sorted(vars(args).items())
                    if k not in ("out", "out_given", "threads", "func", "name", "verbose")}
        if config is not None:
            resolved["config"] = config
        self.manifest = RunManifest(args.command, config_digest(io._jsonable(resolved)),
                                    getattr(args, "seed", None))
        self.inputs = set()

    def path(self, suffix):
        path = self.out / f"{self.name}{suffix}"
        if path.resolve() in self.inputs:
            raise ValueError(f"output {path} would overwrite an input; choose another --name "
                             f"or --out")
        return path

    def read(self, path):
        self.manifest.add_input(path)
        self.inputs.add(Path(path).resolve())
        return path

    def write_json(self, doc, suffix=".json"):
        schema.validate(io._jsonable(doc))
        path = self.path(suffix)
        io.write_json(doc, path)
        self.manifest.add_output(path)
        return path

    def wrote(self, path):
        self.manifest.add_output(path)
        return path

    def close(self):
        self.manifest.finish()
        return self.manifest.write(self.path(".manifest.json"))


def _load_config(path):
    doc = io.read_json(path)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: configuration must be a JSON object")
    return doc


# ---------------------------------------------------------------------------
# simulate


def _truth(cfg: ExperimentConfig) -> dict:
    out = {"excitation_probability": cfg.excitation_probability,
           "duty_cycle": cfg.blink.duty_cycle, "rep_period": cfg.rep_period}
    for axis, split in (("x", cfg.split_x), ("y", cfg.split_y)):
        dyn = solve_level_dynamics(cfg.rates, cfg.initial_bright, cfg.initial_dark, axis.upper())
        out[f"eigenrates_{axis}"] = list(dyn.eigenrates)
        out[f"beta_{axis}"] = split.gamma_wg / dyn.gamma_f if dyn.gamma_f > 0 else 0.0
    return out


def cmd_simulate(args):
    doc = _load_config(args.config)
    kind = doc.get("kind", "experiment")
    run = Run(args, doc)
    run.read(args.config)
    if kind == "fabry_perot":
        scene = FabryPerotSceneConfig.from_dict(doc)
        if args.seed is not None:
            scene = dataclasses.replace(scene, noise_seed=args.seed)
        spectrum, truth = synthesize_fp_spectrum(scene, args.excite_section, return_truth=True)
        io.write_spectrum_csv(spectrum, run.path("_spectrum.csv"))
        run.wrote(run.path("_spectrum.csv"))
        run.write_json({"kind": "fp_simulation", "config": scene.to_dict(),
                        "excite_section": args.excite_section,
                        "truth": {"center": truth.center, "fwhm": truth.fwhm,
                                  "optical_path": truth.optical_path}})
        return run
    if kind != "experiment":
        raise ValueError(f"{args.config}: unknown configuration kind {kind!r}")
    cfg = ExperimentConfig.from_dict(doc)
    if args.seed is not None:
        cfg = cfg.replace(rng_seed=args.seed)
    photons = simulate_pulse_train(cfg, threads=args.threads)
    hist = build_decay_histogram(photons, cfg)
    outputs = {"decay": run.path("_decay.csv").name}
    io.write_histogram_csv(hist, run.path("_decay.csv"))
    run.wrote(run.path("_decay.csv"))
    if args.coincidence_window:
        coinc = build_coincidence_histogram(photons, cfg, args.coincidence_window,
                                            args.coincidence_bin)
        io.write_histogram_csv(coinc, run.path("_coincidence.csv"))
        run.wrote(run.path("_coincidence.csv"))
        outputs["coincidence"] = run.path("_coincidence.csv").name
    run.write_json({"kind": "simulation", "config": cfg.to_dict(),
                    "n_photons": int(photons.time.size),
                    "n_waveguide_photons": int(photons.waveguide.time.size),
                    "truth": _truth(cfg), "outputs": outputs})
    if args.plot:
        run.wrote(plots.plot_decay(hist, None, run.path("_decay.svg")))
    return run


# ---------------------------------------------------------------------------
# fitting


FIT_OPTIONS = ("n_components", "fit_range", "background", "irf_fwhm", "n_starts",
               "parameterization", "estimator", "gamma_b", "select_components", "alpha")


def cmd_fit_decay(args):
    options = _load_config(args.config) if args.config else {}
    options.pop("kind", None)
    unknown = set(options) - set(FIT_OPTIONS)
    if unknown:
        raise ValueError(f"{args.config}: unknown fit options {sorted(unknown)}")
    for key in FIT_OPTIONS:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            options[key] = value
    run = Run(args, options)
    hist = io.read_histogram_csv(run.read(args.data), args.rep_period)
    if not isinstance(hist, DecayHistogram):
        raise ValueError(f"{args.data}: fit-decay needs a decay histogram")
    fitter = DecayFitter(**options).fit(hist)
    run.write_json({"kind": "decay_fit", "source": str(args.data), "options": options,
                    "rep_period": hist.rep_period, "model": fitter.model_.to_dict(),
                    "fit": fitter.result_.to_dict()})
    if args.plot:
        run.wrote(plots.plot_decay(hist, fitter.expected_counts(hist), run.path(".svg")))
    return run


def cmd_fit_spectrum(args):
    run = Run(args)
    spectrum = io.read_spectrum_csv(run.read(args.data))
    finder = PeakFinder(args.prominence, args.window, args.filter).fit(spectrum)
    if not finder.peaks_:
        log.warning("no peaks found in %s", args.data)
    run.write_json({"kind": "peaks", "source": str(args.data),
                    "peaks": [p.to_dict() for p in finder.peaks_]})
    if args.plot:
        run.wrote(plots.plot_spectrum(spectrum, finder.peaks_, run.path(".svg")))
    return run


# ---------------------------------------------------------------------------
# analysis


def _expect_kind(doc, kind, path):
    if doc.get("kind") != kind:
        raise ValueError(f"{path}: expected a {kind!r} document, got {doc.get('kind')!r}")
    schema.validate(doc)
    return doc


def cmd_extract_ng(args):
    run = Run(args)
    peaks_doc = _expect_kind(io.read_json(run.read(args.peaks)), "peaks", args.peaks)
    peaks = [PeakFit.from_dict(p) for p in peaks_doc["peaks"]]
    reference = None
    if args.reference:
        ref_doc = _expect_kind(io.read_json(run.read(args.reference)), "group_index",
                               args.reference)
        reference = GroupIndexCurve.from_dict(ref_doc)
    curve = extract_group_index(peaks, args.l_b, args.l_r, args.section, reference)
    run.write_json({"kind": "group_index", **curve.to_dict(),
                    "geometry": {"l_b": args.l_b, "l_r": args.l_r}})
    if args.plot:
        run.wrote(plots.plot_group_index([curve], run.path(".svg")))
    return run


def _fit_from(path, run):
    doc = _expect_kind(io.read_json(run.read(path)), "decay_fit", path)
    result = FitResult.from_dict(doc["fit"])
    return result


def cmd_extract_beta(args):
    run = Run(args)
    direct = (args.gamma_c, args.gamma_uc)
    if args.coupled and args.uncoupled:
        result = extract_beta(_fit_from(args.coupled, run), _fit_from(args.uncoupled, run))
    elif all(v is not None for v in direct):
        if args.gamma_uc >= args.gamma_c:
            raise ValueError(f"uncoupled rate {args.gamma_uc} ns^-1 is not below coupled "
                             f"rate {args.gamma_c} ns^-1")
        result = beta_from_measured(args.gamma_c, args.gamma_uc, args.sigma_c, args.sigma_uc)
    else:
        raise ValueError("give --coupled and --uncoupled fits, or --gamma-c and --gamma-uc")
    doc = {"kind": "beta", **result.to_dict()}
    if args.wavelength is not None:
        doc["wavelength"] = args.wavelength
    run.write_json(doc)
    return run


def cmd_g2(args):
    run = Run(args)
    coinc = io.read_histogram_csv(run.read(args.data), args.rep_period)
    if not isinstance(coinc, CoincidenceHistogram):
        raise ValueError(f"{args.data}: g2 needs a coincidence histogram")
    result = extract_g2(coinc, coinc.rep_period)
    run.write_json({"kind": "g2", "rep_period": coinc.rep_period, **result.to_dict()})
    if args.plot:
        run.wrote(plots.plot_g2(coinc, result, run.path(".svg")))
    return run


def cmd_budget(args):
    run = Run(args)
    budget = compute_budget(args.rep_mhz, args.beta, args.exc_eff, args.outcoupler, args.na,
                            args.setup_factor, args.propagation_length, args.unmodeled)
    run.write_json(budget.to_dict())
    if args.plot:
        run.wrote(plots.plot_budget(budget, run.path(".svg")))
    return run


def cmd_report(args):
    from .report import write_report

    args.out = args.out if args.out_given else args.run_dir
    run = Run(args)
    for path in write_report(args.run_dir, Path(args.out) / f"{run.name}.md"):
        run.wrote(path)
    return run


# ---------------------------------------------------------------------------
# argument parsing


def _pair(text):
    parts = text.replace(",", " ").split()
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two numbers, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", default=None,
                        help=f"output directory (default: ${OUT_ENV} or the current directory)")
    common.add_argument("--name", default=None, help="stem of the output file names")
    common.add_argument("--config", type=Path, default=None, help="JSON configuration file")
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads")
    common.add_argument("--plot", action="store_true", help="also write an SVG figure")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="qdpcw", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qdpcw {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="simulate a dot or an FP spectrum")
    p.add_argument("--coincidence-window", type=float, default=None,
                   help="half-width (ns) of an HBT coincidence histogram to build")
    p.add_argument("--coincidence-bin", type=float, default=0.1, help="coincidence bin (ns)")
    p.add_argument("--excite-section", type=int, default=0,
                   help="section index excited in a Fabry-Perot scene")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit-decay", parents=[common], help="fit a TCSPC decay histogram")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--rep-period", type=float, default=None, help="override (ns)")
    p.add_argument("--components", dest="n_components", type=int, default=None)
    p.add_argument("--fit-range", type=_pair, default=None, metavar="LO,HI")
    p.add_argument("--background", choices=("none", "constant", "exponential"), default=None)
    p.add_argument("--irf-fwhm", type=float, default=None, help="Gaussian IRF FWHM (ns)")
    p.add_argument("--n-starts", type=int, default=None)
    p.add_argument("--estimator", choices=("poisson", "wls"), default=None)
    p.add_argument("--gamma-b", type=float, default=None)
    p.add_argument("--select", dest="select_components", action="store_true",
                   help="choose the number of components by likelihood ratio")
    p.set_defaults(func=cmd_fit_decay)

    p = sub.add_parser("fit-spectrum", parents=[common], help="find and fit spectral peaks")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--prominence", type=float, default=3.0)
    p.add_argument("--window", type=float, default=0.2)
    p.add_argument("--filter", type=_pair, default=None, metavar="LO,HI")
    p.set_defaults(func=cmd_fit_spectrum)

    p = sub.add_parser("extract-ng", parents=[common], help="group index from FP peaks")
    p.add_argument("--peaks", type=Path, required=True)
    p.add_argument("--l-b", type=float, required=True, help="blue section length (um)")
    p.add_argument("--l-r", type=float, default=None, help="red section length (um)")
    p.add_argument("--section", choices=("blue", "red"), default="blue")
    p.add_argument("--reference", type=Path, default=None, help="blue-section group index JSON")
    p.set_defaults(func=cmd_extract_ng)

    p = sub.add_parser("extract-beta", parents=[common], help="beta factor from two decay fits")
    p.add_argument("--coupled", type=Path, default=None)
    p.add_argument("--uncoupled", type=Path, default=None)
    p.add_argument("--gamma-c", type=float, default=None)
    p.add_argument("--sigma-c", type=float, default=0.0)
    p.add_argument("--gamma-uc", type=float, default=None)
    p.add_argument("--sigma-uc", type=float, default=0.0)
    p.add_argument("--wavelength", type=float, default=None, help="emission wavelength (nm)")
    p.set_defaults(func=cmd_extract_beta)

    p = sub.add_parser("g2", parents=[common], help="g2(0) from a coincidence histogram")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--rep-period", type=float, default=None, help="override (ns)")
    p.set_defaults(func=cmd_g2)

    p = sub.add_parser("budget", parents=[common], help="photon budget to the detector")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--rep-mhz", type=float, default=76.0)
    p.add_argument("--exc-eff", type=float, default=1.0)
    p.add_argument("--outcoupler", choices=("grating", "taper"), default="grating")
    p.add_argument("--na", type=float, default=0.65)
    p.add_argument("--setup-factor", type=float, action="append", default=None,
                   help="setup transmission factor (repeatable; replaces the defaults)")
    p.add_argument("--propagation-length", type=float, default=None, help="um")
    p.add_argument("--unmodeled", type=float, default=1.0,
                   help="residual coupling factor not covered by the model")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("report", parents=[common], help="Markdown report of a result directory")
    p.add_argument("--run-dir", type=Path, required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    args.out_given = args.out is not None
    if args.out is None:
        args.out = os.environ.get(OUT_ENV, ".")
    try:
        with np.errstate(all="ignore"):
            run = args.func(args)
        path = run.close()
        print(path)
        return EXIT_OK
    except (FitError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"qdpcw {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except jsonschema.ValidationError as exc:
        print(f"qdpcw {args.command}: invalid document: {exc.message}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, TypeError, KeyError, OSError) as exc:
        msg = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
        print(f"qdpcw {args.command}: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
