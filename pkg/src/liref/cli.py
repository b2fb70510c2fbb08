"""Command-line surface: refocus, eval, verify, and train subcommands.

Exit codes are a stable contract: 0 success, 1 I/O or data failure,
2 usage error, 3 verification failure. Every train run writes a manifest
sufficient to reproduce it bit for bit.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import imageio.v3 as iio
import numpy as np

from . import __version__
from .lightfield import LightField, load_lightfield
from .losses import (
    LossSpec,
    RieParams,
    combined_loss,
    loss_gradient,
    parse_config_token,
    serialize_loss_spec,
    ucrie,
    crie,
    vwe,
)
from .metrics import QualityReport, ReportRow, quality_report, report_to_csv, reports_to_csv
from .refocus import Refocuser, ShiftEngine
from .spectral import crie2_spectral, ucrie2_spectral, vwe2_spectral
from .synth import AdamParams, run_experiment
from .synthdata import occlusion_scenes, verification_pair

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2
EXIT_VERIFY = 3

CANONICAL_CONFIGS = "vwe1,vwe1+rie1,vwe2,vwe2+rie2"


def _engine_from_flags(name: str, boundary: str) -> ShiftEngine:
    if name == "spectral":
        return ShiftEngine.spectral()
    return ShiftEngine.bilinear(boundary)


def _add_rie_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--rie-D", type=float, default=2.5, dest="rie_d",
                        help="max refocus magnitude of the loss grid (default 2.5)")
    parser.add_argument("--rie-step", type=float, default=0.25,
                        help="refocus grid spacing (default 0.25)")
    parser.add_argument("--lambda", type=float, default=1.0, dest="rie_weight",
                        help="weight of the refocus-domain term in combined losses (default 1)")
    parser.add_argument("--convention", choices=["physical", "index"], default="physical",
                        help="Gaussian weight argument: physical refocus value or bare index")
    parser.add_argument("--engine", choices=["spectral", "spatial"], default="spectral",
                        help="shift engine for loss evaluation (default spectral)")
    parser.add_argument("--boundary", choices=["clamp", "circular"], default="clamp",
                        help="boundary policy of the spatial engine (default clamp)")


def _add_sweep_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--r-min", type=float, default=-2.5)
    parser.add_argument("--r-max", type=float, default=2.5)
    parser.add_argument("--r-step", type=float, default=0.25)


def _sweep_values(args) -> np.ndarray:
    if args.r_step <= 0 or args.r_min > args.r_max:
        raise ValueError("need r-step > 0 and r-min <= r-max")
    count = int(np.floor((args.r_max - args.r_min) / args.r_step + 1e-9)) + 1
    return args.r_min + args.r_step * np.arange(count)


def _rie_params(args) -> RieParams:
    return RieParams(d_max=args.rie_d, step=args.rie_step,
                     weight_convention=args.convention,
                     engine=_engine_from_flags(args.engine, args.boundary))


def cmd_refocus(args) -> int:
    try:
        lf = load_lightfield(args.input)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    engine = _engine_from_flags(args.engine, args.boundary)
    img = Refocuser(lf, engine).refocus(args.r)
    below = int(np.sum(img < 0.0))
    above = int(np.sum(img > 1.0))
    clamped = np.clip(img, 0.0, 1.0)
    out = np.rint(clamped * 255).astype(np.uint8)
    if out.shape[2] == 1:
        out = out[:, :, 0]
    try:
        iio.imwrite(Path(args.out), out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"r={args.r:g} engine={engine} clamped_below={below} clamped_above={above}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    rie = _rie_params(args)  # flag validation happens before any I/O
    sweep = list(_sweep_values(args))
    try:
        pred = load_lightfield(args.pred)
        gt = load_lightfield(args.gt)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    if not pred.same_shape_as(gt):
        print(f"error: shape mismatch {pred.samples.shape} vs {gt.samples.shape}", file=sys.stderr)
        return EXIT_IO
    n = pred.angular_radius
    all_indices = [(s, t) for s in range(-n, n + 1) for t in range(-n, n + 1)]
    report = quality_report(pred, gt, all_indices, sweep, engine=rie.engine, config="eval")
    csv = report_to_csv(report)
    if args.out:
        Path(args.out).write_text(csv)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(csv)
    return EXIT_OK


def _parse_size(text: str) -> tuple[int, int, int, int]:
    parts = text.lower().split("x")
    if len(parts) != 4:
        raise ValueError(f"size must look like 3x3x8x8, got {text!r}")
    a, b, h, w = (int(p) for p in parts)
    if a != b or a % 2 == 0:
        raise ValueError("angular grid must be square with odd side")
    return a, b, h, w


def _directional_fd_error(spec: LossSpec, pred: LightField, gt: LightField,
                          rng: np.random.Generator, trials: int = 3,
                          h: float = 1e-5) -> float:
    """Worst relative gap between analytic and central-difference directional derivatives."""
    x = pred.samples
    grad = loss_gradient(x, gt.samples, spec)
    worst = 0.0
    for _ in range(trials):
        direction = rng.normal(size=x.shape)
        direction /= np.linalg.norm(direction)
        analytic = float(np.sum(grad * direction))
        f_plus = combined_loss(x + h * direction, gt.samples, spec)
        f_minus = combined_loss(x - h * direction, gt.samples, spec)
        fd = (f_plus - f_minus) / (2.0 * h)
        worst = max(worst, abs(analytic - fd) / max(abs(fd), 1e-300))
    return worst


def cmd_verify(args) -> int:
    grid, _, h, w = _parse_size(args.size)
    n = (grid - 1) // 2
    rng = np.random.default_rng(args.seed)
    pred, gt = verification_pair(rng, n, h, w, channels=1)
    checks: list[tuple[str, str, float]] = []

    def rel(a: float, b: float) -> float:
        return abs(a - b) / max(abs(a), abs(b), 1e-300)

    closed = ucrie2_spectral(pred, gt, args.rie_d)
    quad = ucrie(pred, gt, p=2, d_max=args.rie_d, q=2e-4)
    checks.append(("ucrie2 closed form vs quadrature",
                   f"canonical={closed.canonical:.9e} literal={closed.literal:.9e} "
                   f"quadrature={quad:.9e}", rel(closed.canonical, quad)))

    closed = crie2_spectral(pred, gt, args.rie_d)
    quad = crie(pred, gt, p=2, d_max=args.rie_d, r_max=6.0, q=1e-3)
    checks.append(("crie2 closed form vs quadrature",
                   f"canonical={closed.canonical:.9e} literal={closed.literal:.9e} "
                   f"quadrature={quad:.9e}", rel(closed.canonical, quad)))

    direct = vwe(pred, gt, p=2)
    spectral_value = vwe2_spectral(pred, gt)
    checks.append(("vwe2 spectral vs direct",
                   f"spectral={spectral_value:.9e} direct={direct:.9e}",
                   rel(spectral_value, direct)))

    diag = ucrie2_spectral(pred, gt, args.rie_d, diagonal_only=True).canonical
    expected = direct / (grid ** 4)
    checks.append(("diagonal closed form vs vwe2 / views^2",
                   f"diagonal={diag:.9e} expected={expected:.9e}", rel(diag, expected)))

    for engine_name in ("spectral", "spatial"):
        engine = _engine_from_flags(engine_name, "clamp")
        rie = RieParams(d_max=args.rie_d, step=args.rie_step, engine=engine)
        spec = LossSpec(p=2, kind="vwe+rie", rie=rie, rie_weight=args.rie_weight)
        err = _directional_fd_error(spec, pred, gt, rng)
        checks.append((f"gradient vs finite differences ({engine_name}, p=2)", "", err))

    failed = False
    for label, values, err in checks:
        ok = err <= args.tol
        failed = failed or not ok
        prefix = f"{label}: {values} " if values else f"{label}: "
        print(f"{prefix}rel_error={err:.3e} tol={args.tol:g} {'ok' if ok else 'FAIL'}")
    return EXIT_VERIFY if failed else EXIT_OK


def _mean_rows(reports: list[QualityReport], config: str) -> QualityReport:
    """Average matching rows across per-scene reports (row-wise arithmetic mean)."""
    template = reports[0].rows
    rows = []
    for i, row in enumerate(template):
        def col(get):
            vals = [get(rep.rows[i]) for rep in reports]
            return float(np.mean(vals))
        rows.append(ReportRow(
            config=config, domain=row.domain, r=row.r,
            mae=col(lambda r: r.mae), mse=col(lambda r: r.mse), psnr=col(lambda r: r.psnr),
            ssim=None if row.ssim is None else col(lambda r: r.ssim),
            gmsd=None if row.gmsd is None else col(lambda r: r.gmsd)))
    return QualityReport(rows=tuple(rows))


def _pooled_view_row(reports: list[QualityReport], config: str) -> QualityReport:
    """Pool the view-domain means over all scenes (view-count weighted)."""
    rows = [rep.view_row() for rep in reports]
    pooled = ReportRow(config=config, domain="view", r=None,
                       mae=float(np.mean([r.mae for r in rows])),
                       mse=float(np.mean([r.mse for r in rows])),
                       psnr=float(np.mean([r.psnr for r in rows])))
    return QualityReport(rows=(pooled,))


def cmd_train(args) -> int:
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tokens = [t.strip() for t in args.configs.split(",") if t.strip()]
    try:
        rie = _rie_params(args)
        configs = [parse_config_token(t, rie=rie, rie_weight=args.rie_weight) for t in tokens]
        sweep = _sweep_values(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.synthetic:
        scenes = occlusion_scenes(args.seed, args.scenes)
        sources = ["synthetic"] * len(scenes)
    else:
        scenes, sources = [], []
        for path in args.input:
            try:
                scenes.append(load_lightfield(path))
                sources.append(str(path))
            except (OSError, ValueError) as exc:
                print(f"error loading {path}: {exc}", file=sys.stderr)
        if not scenes:
            print("error: no loadable scenes", file=sys.stderr)
            return EXIT_IO
    adam = AdamParams(learning_rate=args.lr, epochs=args.epochs)
    result = run_experiment(scenes, configs, adam=adam, r_sweep=sweep, kfold=args.kfold)
    for index, message in result.failures:
        print(f"scene {index} failed: {message}", file=sys.stderr)
    if not result.scene_results:
        print("error: every scene failed", file=sys.stderr)
        return EXIT_IO

    manifest = [
        f"liref={__version__}",
        f"numpy={np.__version__}",
        f"seed={args.seed}",
        f"synthetic={int(args.synthetic)}",
        f"scenes={','.join(sources)}",
        f"configs={','.join(tokens)}",
        f"engine={rie.engine}",
        f"convention={rie.weight_convention}",
        f"rie_D={args.rie_d:g}",
        f"rie_step={args.rie_step:g}",
        f"lambda={args.rie_weight:g}",
        f"lr={args.lr:g}",
        f"epochs={args.epochs}",
        f"kfold={args.kfold if args.kfold else 'none'}",
        f"r_sweep={args.r_min:g}:{args.r_max:g}:{args.r_step:g}",
    ]
    (out_dir / "manifest.txt").write_text("\n".join(manifest) + "\n")
    for spec in configs:
        (out_dir / f"lossspec_{spec.token.replace('+', '_')}.txt").write_text(serialize_loss_spec(spec))

    for run_index, (scene_index, pipeline) in enumerate(result.scene_results):
        for token, run in pipeline.runs.items():
            name = f"loss_scene{scene_index}_run{run_index}_{token.replace('+', '_')}.csv"
            lines = ["epoch,loss,vwe_term,rie_term"]
            for epoch, (total, view_term, refocus_term) in enumerate(run.history):
                lines.append(f"{epoch},{total!r},{view_term!r},{refocus_term!r}")
            (out_dir / name).write_text("\n".join(lines) + "\n")

    per_scene = [rep for _, pipeline in result.scene_results for rep in pipeline.reports.values()]
    (out_dir / "report_scenes.csv").write_text(reports_to_csv(per_scene))
    means = [_mean_rows(result.reports_for(tok), tok) for tok in result.configs]
    (out_dir / "report_mean.csv").write_text(reports_to_csv(means))
    pooled = [_pooled_view_row(result.reports_for(tok), tok) for tok in result.configs]
    (out_dir / "report_pooled_views.csv").write_text(reports_to_csv(pooled))
    if result.folds is not None:
        for fold_index, members in enumerate(result.folds):
            fold_reports = []
            for tok in result.configs:
                scoped = [pipeline.reports[tok] for scene_index, pipeline in result.scene_results
                          if scene_index in members]
                if scoped:
                    fold_reports.append(_mean_rows(scoped, tok))
            (out_dir / f"report_fold{fold_index}.csv").write_text(reports_to_csv(fold_reports))
    print(f"wrote results for {len(result.scene_results)} runs to {out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liref",
        description="Light-field refocusing, refocus-domain losses, and verification runs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ref = sub.add_parser("refocus", help="write one refocused slice as PNG")
    p_ref.add_argument("--in", dest="input", required=True, help="light-field directory")
    p_ref.add_argument("--r", type=float, required=True, help="refocus parameter")
    p_ref.add_argument("--engine", choices=["spectral", "spatial"], default="spatial")
    p_ref.add_argument("--boundary", choices=["clamp", "circular"], default="clamp")
    p_ref.add_argument("--out", required=True, help="output PNG path")
    p_ref.set_defaults(func=cmd_refocus)

    p_eval = sub.add_parser("eval", help="quality report of a predicted vs reference light field")
    p_eval.add_argument("--pred", required=True, help="predicted light-field directory")
    p_eval.add_argument("--gt", required=True, help="reference light-field directory")
    p_eval.add_argument("--out", default=None, help="CSV output path (default stdout)")
    _add_rie_flags(p_eval)
    _add_sweep_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_verify = sub.add_parser("verify", help="numerical self-test of the closed-form identities")
    p_verify.add_argument("--size", default="3x3x8x8", help="angular x angular x height x width")
    p_verify.add_argument("--seed", type=int, default=7)
    p_verify.add_argument("--tol", type=float, default=1e-6)
    _add_rie_flags(p_verify)
    p_verify.set_defaults(func=cmd_verify)

    p_train = sub.add_parser("train", help="run the synthesis experiment over scenes and configs")
    src = p_train.add_mutually_exclusive_group(required=True)
    src.add_argument("--in", dest="input", nargs="+", help="scene directories")
    src.add_argument("--synthetic", action="store_true", help="use generated occlusion scenes")
    p_train.add_argument("--scenes", type=int, default=5, help="synthetic scene count (default 5)")
    p_train.add_argument("--configs", default=CANONICAL_CONFIGS,
                         help=f"comma-separated loss configs (default {CANONICAL_CONFIGS})")
    p_train.add_argument("--seed", type=int, default=None,
                         help="master seed (default: LIREF_SEED env var or 0)")
    p_train.add_argument("--epochs", type=int, default=300)
    p_train.add_argument("--lr", type=float, default=0.001)
    p_train.add_argument("--kfold", type=int, default=None)
    p_train.add_argument("--jobs", type=int, default=1,
                         help="upper bound on worker count; results never depend on it")
    p_train.add_argument("--out-dir", default="liref_run")
    _add_rie_flags(p_train)
    _add_sweep_flags(p_train)
    p_train.set_defaults(func=cmd_train)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is None and args.command == "train":
        args.seed = int(os.environ.get("LIREF_SEED", "0"))
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
