"""Command-line interface: segment | calibrate | changepoint | impact | report | synth."""

from __future__ import annotations

import argparse
import glob
import json
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bsts import VariancePrior
from .changepoint import STATISTICS, CptConfig, detect_single
from .config import Settings, load_settings
from .errors import (
    CoverImpactError,
    DuplicateEpochError,
    EpochError,
    FormatError,
    NoMatchError,
    ParameterError,
)
from .imagery import HsvRange, calibration_grid, encode_png, gaussian_blur, read_image, segment
from .impact import ImpactConfig, ImpactReport, run_impact
from .report import render_report
from .series import CoverageSeries, format_series_csv, read_series_csv
from .synth import SynthImageSpec, SynthSeriesSpec, gen_image, gen_series


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(f"error: usage: {message}\n")
        sys.exit(2)


def _write(path: Path, data, binary: bool = False) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if binary:
        path.write_bytes(data)
    else:
        path.write_text(data)


def _out_dir(args, settings: Settings) -> Path:
    if args.out is not None:
        return Path(args.out)
    return Path(settings.get_str("output.dir") or ".")


def _hsv_range(args, settings: Settings) -> HsvRange:
    if getattr(args, "range", None):
        return HsvRange.parse(args.range)
    return HsvRange.parse(f"{settings.get_str('hsv.lower')}:{settings.get_str('hsv.upper')}")


def _epoch_of(path: str, regex: re.Pattern) -> int:
    name = os.path.basename(path)
    m = regex.search(name)
    if m is None or m.lastindex != 1:
        raise EpochError(f"{path}: epoch regex {regex.pattern!r} does not yield one integer group")
    try:
        return int(m.group(1))
    except ValueError:
        raise EpochError(f"{path}: captured epoch {m.group(1)!r} is not an integer") from None


def collect_images(paths, pattern: str, epoch_regex: str):
    """(epoch, path) pairs sorted by epoch."""
    try:
        regex = re.compile(epoch_regex)
    except re.error as exc:
        raise ParameterError(f"invalid epoch regex {epoch_regex!r}: {exc}") from None
    if regex.groups != 1:
        raise ParameterError(f"epoch regex {epoch_regex!r} must have exactly one capture group")
    files = list(paths) if paths else sorted(glob.glob(pattern))
    if not files:
        raise NoMatchError(f"no images match {pattern!r}")
    seen = {}
    for f in files:
        epoch = _epoch_of(f, regex)
        if epoch in seen:
            raise DuplicateEpochError(f"epoch {epoch} appears in both {seen[epoch]} and {f}")
        seen[epoch] = f
    return sorted(seen.items())


def cmd_segment(args, settings: Settings) -> int:
    items = collect_images(args.images, settings.get_str("images.pattern"), settings.get_str("images.epoch_regex"))
    rng = _hsv_range(args, settings)
    sigma = settings.get_optional_float("blur.sigma")
    out = _out_dir(args, settings)

    def work(item):
        epoch, path = item
        img = read_image(path, epoch)
        mask, fraction = segment(img, rng, sigma)
        return epoch, mask, fraction

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(work, items))

    for epoch, mask, _ in results:
        _write(out / f"{epoch}.mask.png", encode_png(mask.bits), binary=True)
    series = CoverageSeries(
        np.array([r[0] for r in results], dtype=np.int64),
        np.array([round(r[2], 6) for r in results]),
    )
    _write(out / "series.csv", format_series_csv(series))
    print(f"segmented {len(results)} images -> {out / 'series.csv'}")
    return 0


def cmd_calibrate(args, settings: Settings) -> int:
    texts = list(args.candidates or [])
    if not texts:
        texts = [t for t in settings.get_str("calibrate.ranges").split(";") if t.strip()]
    if not texts:
        texts = [f"{settings.get_str('hsv.lower')}:{settings.get_str('hsv.upper')}"]
    candidates = [HsvRange.parse(t.strip()) for t in texts]
    img = read_image(args.image)
    sigma = settings.get_optional_float("blur.sigma")
    if sigma is not None:
        img = gaussian_blur(img, sigma)
    entries = calibration_grid(img, candidates)
    out = _out_dir(args, settings)
    stem = Path(args.image).stem
    lines = ["index\trange\tfraction\tfile"]
    for i, entry in enumerate(entries):
        name = f"{stem}.mask.{i}.png"
        _write(out / name, encode_png(entry.mask.bits), binary=True)
        lines.append(f"{i}\t{entry.range}\t{entry.fraction:.6f}\t{name}")
    table = "\n".join(lines) + "\n"
    _write(out / f"{stem}.calibration.txt", table)
    sys.stdout.write(table)
    return 0


def _cpt_config(args, settings: Settings) -> CptConfig:
    settings.set("changepoint.statistic", args.statistic)
    settings.set("changepoint.threshold", args.threshold)
    settings.set("changepoint.min_seg_len", args.min_seg_len)
    return CptConfig(
        statistic=settings.get_str("changepoint.statistic"),
        threshold_c=settings.get_str("changepoint.threshold"),
        min_seg_len=settings.get_int("changepoint.min_seg_len"),
    )


def cmd_changepoint(args, settings: Settings) -> int:
    series = read_series_csv(args.series)
    out = _out_dir(args, settings)
    if args.tau is not None:
        n = len(series)
        if not 1 <= args.tau <= n - 1:
            raise ParameterError(f"--tau {args.tau} outside [1, {n - 1}]")
        doc = {"tau_hat": args.tau, "lambda": None, "threshold": None, "rejected": True, "per_tau_ml": []}
        decision = f"changepoint set manually: tau_hat={args.tau} (epoch {series.epochs[args.tau - 1]})"
    else:
        cfg = _cpt_config(args, settings)
        result = detect_single(series, cfg)
        doc = result.to_dict()
        if result.rejected:
            decision = (
                f"changepoint detected: tau_hat={result.tau_hat} (epoch {series.epochs[result.tau_hat - 1]}), "
                f"lambda={result.lambda_:.4f} > threshold={result.threshold:.4f}"
            )
        else:
            decision = f"no changepoint: lambda={result.lambda_:.4f} <= threshold={result.threshold:.4f}"
    _write(out / "changepoint.json", json.dumps(doc, indent=2) + "\n")
    print(decision)
    return 0


def _intervention_index(args) -> int:
    if args.intervention is not None:
        return args.intervention
    try:
        with open(args.changepoint) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise FormatError(f"cannot read ({exc.strerror})", args.changepoint) from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON ({exc.msg})", args.changepoint, exc.lineno) from None
    tau = doc.get("tau_hat") if isinstance(doc, dict) else None
    if tau is None:
        raise ParameterError(f"{args.changepoint}: no changepoint was detected; pass --intervention to choose one")
    return int(tau)


def cmd_impact(args, settings: Settings) -> int:
    series = read_series_csv(args.series)
    settings.set("impact.component", args.component)
    settings.set("impact.n_iter", args.n_iter)
    settings.set("impact.burn_in", args.burn_in)
    settings.set("impact.credible_level", args.level)
    settings.set("impact.seed", args.seed)
    tau = _intervention_index(args)
    pre = series.values[:tau]
    shape = settings.get_float("impact.prior_shape")
    factor = settings.get_float("impact.prior_scale_factor")
    var = float(np.var(pre, ddof=1)) if len(pre) > 1 else 0.0
    component = settings.get_str("impact.component")
    n_priors = 2 if component == "local_level" else 3
    priors = [VariancePrior(shape, factor * var)] * n_priors if var > 0 else None
    cfg = ImpactConfig(
        intervention_index=tau,
        component=component,
        priors=priors,
        n_iter=settings.get_int("impact.n_iter"),
        burn_in=settings.get_int("impact.burn_in"),
        seed=settings.get_int("impact.seed"),
        credible_level=settings.get_float("impact.credible_level"),
    )
    report = run_impact(series, cfg)
    out = _out_dir(args, settings)
    _write(out / "impact.json", report.to_json())
    _write(out / "impact.csv", report.to_csv())
    avg = report.average_effect
    print(
        f"average effect {avg.mean[0]:+.6f} [{avg.lower[0]:+.6f}, {avg.upper[0]:+.6f}] "
        f"({int(round(report.credible_level * 100))}% interval), tail probability {report.tail_probability:.4f}"
    )
    return 0


def cmd_report(args, settings: Settings) -> int:
    try:
        with open(args.impact) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise FormatError(f"cannot read ({exc.strerror})", args.impact) from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON ({exc.msg})", args.impact, exc.lineno) from None
    report = ImpactReport.from_dict(doc)
    series = read_series_csv(args.series)
    svg = render_report(series, report)
    out = _out_dir(args, settings)
    _write(out / "report.svg", svg)
    print(f"wrote {out / 'report.svg'}")
    return 0


def _parse_size(text: str):
    m = re.fullmatch(r"(\d+)x(\d+)", text)
    if not m:
        raise ParameterError(f"--size expects WIDTHxHEIGHT, got {text!r}")
    return int(m.group(1)), int(m.group(2))


def cmd_synth(args, settings: Settings) -> int:
    out = _out_dir(args, settings)
    seed = args.seed if args.seed is not None else 0
    width, height = _parse_size(args.size)
    if args.series or args.images:
        spec = SynthSeriesSpec(
            n=args.n, pre_slope=args.pre_slope, post_slope=args.post_slope, level0=args.level0,
            change_at=args.change_at, noise_sd=args.noise, seed=seed, start_epoch=args.start_epoch,
        )
        series = gen_series(spec)
        if args.images:
            realized = []
            for i, (epoch, value) in enumerate(zip(series.epochs, series.values)):
                img_spec = SynthImageSpec(width, height, float(value), seed=seed * 100003 + i)
                img, fraction = gen_image(img_spec, int(epoch))
                _write(out / f"{epoch}.png", encode_png(img.pixels), binary=True)
                realized.append(round(fraction, 6))
            series = CoverageSeries(series.epochs, np.array(realized))
            _write(out / "truth.csv", format_series_csv(series))
            print(f"wrote {len(series)} images and truth.csv to {out}")
        else:
            _write(out / "series.csv", format_series_csv(series))
            print(f"wrote {out / 'series.csv'}")
        return 0
    if args.fraction is None:
        raise ParameterError("synth needs --fraction, --series or --images")
    img, fraction = gen_image(SynthImageSpec(width, height, args.fraction, seed=seed))
    name = args.name or "synth.png"
    _write(out / name, encode_png(img.pixels), binary=True)
    print(f"wrote {out / name} with true fraction {fraction:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file (section.key addressing)")
    common.add_argument("--out", help="output directory (default: output.dir or .)")
    common.add_argument("--seed", type=int, help="random seed (MCMC for impact, fixtures for synth)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key, e.g. --set hsv.lower=50,60,30")

    parser = _Parser(prog="coverimpact", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("segment", parents=[common], help="mask images and build series.csv")
    p.add_argument("images", nargs="*", help="image files (default: glob images.pattern)")
    p.add_argument("--pattern", help="glob for input images")
    p.add_argument("--epoch-regex", help="regex with one integer group applied to file names")
    p.add_argument("--range", help="HSV range 'h,s,v:h,s,v' (inclusive)")
    p.add_argument("--blur", type=float, help="Gaussian blur sigma before masking")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("calibrate", parents=[common], help="preview masks for candidate HSV ranges")
    p.add_argument("image")
    p.add_argument("--range", dest="candidates", action="append", help="candidate range, repeatable")
    p.add_argument("--blur", type=float)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("changepoint", parents=[common], help="single-changepoint likelihood-ratio test")
    p.add_argument("series")
    p.add_argument("--statistic", choices=STATISTICS)
    p.add_argument("--threshold", help="positive number or 'sic'")
    p.add_argument("--min-seg-len", type=int)
    p.add_argument("--tau", type=int, help="skip the test and use this changepoint")
    p.set_defaults(func=cmd_changepoint)

    p = sub.add_parser("impact", parents=[common], help="counterfactual forecast and effect summary")
    p.add_argument("series")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--intervention", type=int, help="number of pre-period points")
    src.add_argument("--changepoint", help="changepoint.json from the changepoint command")
    p.add_argument("--component", choices=("local_level", "local_linear_trend"))
    p.add_argument("--n-iter", type=int)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--level", type=float, help="credible level in (0, 1)")
    p.set_defaults(func=cmd_impact)

    p = sub.add_parser("report", parents=[common], help="three-panel SVG report")
    p.add_argument("impact", help="impact.json")
    p.add_argument("series", help="series.csv")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", parents=[common], help="write synthetic fixtures")
    p.add_argument("--fraction", type=float, help="forest fraction of a single image")
    p.add_argument("--size", default="64x64", help="image size WIDTHxHEIGHT")
    p.add_argument("--name", help="file name for the single image")
    p.add_argument("--series", action="store_true", help="write series.csv")
    p.add_argument("--images", action="store_true", help="write one image per epoch of the series")
    p.add_argument("--n", type=int, default=35)
    p.add_argument("--change-at", type=int)
    p.add_argument("--pre-slope", type=float, default=0.0)
    p.add_argument("--post-slope", type=float, default=-0.02)
    p.add_argument("--level0", type=float, default=0.8)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--start-epoch", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = load_settings(args.config, args.set)
        for flag, key in (("pattern", "images.pattern"), ("epoch_regex", "images.epoch_regex"),
                          ("blur", "blur.sigma")):
            settings.set(key, getattr(args, flag, None))
        return args.func(args, settings)
    except CoverImpactError as exc:
        detail = " ".join(str(exc).split())
        sys.stderr.write(f"error: {exc.code}: {detail}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
