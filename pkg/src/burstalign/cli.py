"""Command-line driver: synth, align, fuse, eval, bench, grad-check.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 verification
failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import cost_model, gradcheck
from . import io as bio
from .dpbm import ConfigError, SearchConfig
from .fusion import reconstruct, robust_merge
from .image_core import NoiseParams, ParameterError
from .metrics import psnr_gamma, ssim_gamma
from .pipeline import refine_only_align, two_stage_align
from .synth import linear_shifts, make_scene, synthesize_burst

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_VERIFY = 0, 2, 3, 4


class VerificationFailure(Exception):
    pass


def _pair(text: str) -> tuple[int, int]:
    try:
        a, b = (int(v) for v in text.replace("x", ",").split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two integers 'a,b', got {text!r}") from None
    return a, b


def _pair_list(text: str) -> list[tuple[int, int]]:
    return [_pair(t) for t in text.split(";") if t.strip()]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="file of 'key = value' lines; command-line flags take precedence")
    p.add_argument("--threads", type=int, default=1, help="cap on worker threads (results do not depend on it)")


def _add_search(p: argparse.ArgumentParser) -> None:
    d = SearchConfig()
    p.add_argument("--patch-k", type=int, default=d.patch_k, help="patch side at quarter scale")
    p.add_argument("--dp-cmax", type=int, default=d.dp_cmax, help="search range at quarter scale")
    p.add_argument("--stride-s", type=int, default=d.stride_s, help="coarse lattice stride")
    p.add_argument("--temp", type=float, default=d.temperature, help="softmax temperature in soft mode")
    p.add_argument("--mode", choices=("hard", "soft"), default=d.mode)
    p.add_argument("--ds", type=int, default=2, help="refinement radius (full-resolution pixels)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="burstalign", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a noisy raw burst")
    _add_common(p)
    p.add_argument("--out", required=True, help="output burst directory")
    p.add_argument("--input", help="linear RGB PNG; a procedural scene is used when omitted")
    p.add_argument("--size", type=_pair, default=(256, 256), help="frame size H,W for procedural scenes")
    p.add_argument("--scene-seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--ref", type=int, help="reference index (default: centre frame)")
    p.add_argument("--preset", choices=("low", "high"))
    p.add_argument("--sigma-s", type=float)
    p.add_argument("--sigma-r", type=float)
    p.add_argument("--random-noise", action="store_true", help="sample sigma_s, sigma_r from the training ranges")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pattern", default="RGGB", choices=("RGGB", "BGGR", "GRBG", "GBRG"))
    p.add_argument("--shift", type=_pair, help="per-frame velocity dy,dx in full-resolution pixels")
    p.add_argument("--shifts", type=_pair_list, help="explicit per-frame shifts 'dy,dx;dy,dx;...'")

    p = sub.add_parser("align", help="two-stage alignment of a burst directory")
    _add_common(p)
    _add_search(p)
    p.add_argument("burst_dir")
    p.add_argument("--out", help="output directory (default: <burst_dir>/aligned)")
    p.add_argument("--dump-offsets", action="store_true", help="print full-resolution patch offsets as CSV")
    p.add_argument("--refine-only", action="store_true", help="skip the coarse stage (baseline)")

    p = sub.add_parser("fuse", help="merge an aligned burst into an RGB image")
    _add_common(p)
    p.add_argument("aligned_dir")
    p.add_argument("--out", help="output PNG (default: <aligned_dir>/restored.png)")

    p = sub.add_parser("eval", help="gamma-corrected PSNR/SSIM against ground truth")
    _add_common(p)
    p.add_argument("images", nargs="+")
    p.add_argument("--gt", required=True, help="ground-truth RGB PNG")
    p.add_argument("--min-psnr", type=float, help="fail (exit 4) if any image scores below this")

    p = sub.add_parser("bench", help="timings and the multiply-add cost model")
    _add_common(p)
    _add_search(p)
    p.add_argument("--cost", action="store_true", help="print the cost model and candidate audit")
    p.add_argument("--sizes", default="256", help="comma-separated square frame sizes to time")
    p.add_argument("--frames", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--D", type=int, default=28, help="one-stage receptive field")
    p.add_argument("--F", type=int, default=1, help="multiply-adds per candidate")

    p = sub.add_parser("grad-check", help="compare analytic derivatives with finite differences")
    _add_common(p)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    return parser


def read_config(path) -> dict[str, str]:
    values = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.lstrip("-").replace("-", "_")] = value
    return values


def _apply_config(sub: argparse.ArgumentParser, values: dict[str, str]) -> None:
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    defaults = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None or not action.option_strings:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            value = raw.lower() in ("1", "true", "yes", "on")
        else:
            value = action.type(raw) if action.type else raw
            if action.choices is not None and value not in action.choices:
                raise ConfigError(f"config key {key!r}: {value!r} not in {list(action.choices)}")
        defaults[key] = value
    sub.set_defaults(**defaults)


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        _apply_config(sub, read_config(args.config))
        args = parser.parse_args(argv)
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return args


def search_config(args) -> SearchConfig:
    return SearchConfig(args.patch_k, args.dp_cmax, args.stride_s, args.temp, args.mode).validate()


def noise_params(args) -> NoiseParams:
    if args.random_noise:
        return NoiseParams.sample(np.random.default_rng(args.seed))
    if args.sigma_s is not None or args.sigma_r is not None:
        return NoiseParams(args.sigma_s or 0.0, args.sigma_r or 0.0)
    return NoiseParams.preset(args.preset or "low")


# -- commands ---------------------------------------------------------------


def cmd_synth(args) -> int:
    n = args.frames
    ref = n // 2 if args.ref is None else args.ref
    if args.shifts is not None:
        if len(args.shifts) != n:
            raise ConfigError(f"--shifts lists {len(args.shifts)} frames, expected {n}")
        shifts = np.array(args.shifts, dtype=np.int64)
    elif args.shift is not None:
        shifts = linear_shifts(n, ref, args.shift)
    else:
        shifts = np.zeros((n, 2), dtype=np.int64)
    margin = int(np.abs(shifts - shifts[ref]).max())

    if args.input:
        scene = bio.read_image(args.input)
        if scene.ndim != 3:
            raise ConfigError(f"{args.input} is not an RGB image")
        h, w = scene.shape[:2]
        size = ((h - 2 * margin) // 4 * 4, (w - 2 * margin) // 4 * 4)
        if min(size) < 16:
            raise ConfigError("input image too small for the requested shifts")
    else:
        size = tuple(args.size)
        if size[0] % 4 or size[1] % 4:
            raise ConfigError("--size must be a multiple of 4")
        scene = make_scene((size[0] + 2 * margin, size[1] + 2 * margin), args.scene_seed)

    noise = noise_params(args)
    burst, gt = synthesize_burst(
        scene, n, noise, args.seed, size, shifts - shifts[ref], ref, args.pattern
    )
    out = Path(args.out)
    bio.save_burst(out, burst)
    bio.write_rgb16(out / "gt.png", gt)
    print(f"wrote {n} frames ({size[0]}x{size[1]}, sigma_s={noise.sigma_s:g}, sigma_r={noise.sigma_r:g}) to {out}")
    return EXIT_OK


def cmd_align(args) -> int:
    cfg = search_config(args)
    burst = bio.load_burst(args.burst_dir)
    if args.refine_only:
        result = refine_only_align(burst, args.ds, cfg.patch_k, args.threads)
    else:
        result = two_stage_align(burst, cfg, args.ds, args.threads)
    out = Path(args.out) if args.out else Path(args.burst_dir) / "aligned"
    patch = result.full[0].patch
    bio.save_burst(out, result.aligned, {"aligned": {"patch_full_res": patch, "ds": args.ds, "refine_only": args.refine_only}})
    dump = ["frame,patch_row,patch_col,dy,dx"]
    for t, (grid, flow) in enumerate(zip(result.full, result.flows)):
        name = bio.frame_name(t)
        text = bio.offsets_csv(grid)
        (out / f"offsets_{name[6:]}.csv").write_text(text)
        bio.write_ogrd(out / f"offsets_{name[6:]}.ogrd", grid)
        bio.write_flow(out / f"flow_{name[6:]}.flow", flow)
        bio.write_rgb16(out / f"flow_{name[6:]}.png", bio.flow_to_rgb(flow, max_mag=args.ds))
        dump += [f"{t},{line}" for line in text.splitlines()[1:]]
    if args.dump_offsets:
        print("\n".join(dump))
    return EXIT_OK


def cmd_fuse(args) -> int:
    d = Path(args.aligned_dir)
    burst = bio.load_burst(d)
    flows = []
    for t in range(len(burst)):
        path = d / f"flow_{t:03d}.flow"
        flows.append(bio.read_flow(path) if path.exists() else None)
    rgb = reconstruct(robust_merge(burst, flows))
    out = Path(args.out) if args.out else d / "restored.png"
    bio.write_rgb16(out, rgb)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    gt = bio.read_image(args.gt)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["image", "psnr_gamma", "ssim_gamma"])
    scores = []
    for path in args.images:
        img = bio.read_image(path)
        p, s = psnr_gamma(img, gt), ssim_gamma(img, gt)
        scores.append((p, s))
        writer.writerow([path, f"{p:.4f}", f"{s:.6f}"])
    mean_p = float(np.mean([p for p, _ in scores]))
    mean_s = float(np.mean([s for _, s in scores]))
    writer.writerow(["average", f"{mean_p:.4f}", f"{mean_s:.6f}"])
    if args.min_psnr is not None and min(p for p, _ in scores) < args.min_psnr:
        raise VerificationFailure(f"PSNR below threshold {args.min_psnr}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = search_config(args)
    sizes = [int(s) for s in str(args.sizes).split(",") if s.strip()]
    if args.cost:
        print("size,D,k,D_s,F,one_stage,two_stage,speedup")
        for size in sizes:
            cp = cost_model.CostParams(D=args.D, D_s=args.ds, k=cfg.patch_k, H=size, W=size, F=args.F)
            sp = cost_model.speedup(cp)
            print(f"{size},{cp.D},{cp.k},{cp.D_s},{cp.F},{cost_model.one_stage_cost(cp)},"
                  f"{cost_model.two_stage_cost(cp)},{float(sp):.4f}")
        print("size_lr,patch_k,dp_cmax,stride_s,model_candidates,audited_candidates,match")
        for size in sizes:
            lr = (size // 4, size // 4)
            model = cost_model.closed_form_candidates(cfg, lr)
            audited = cost_model.audit_candidates(cfg, lr, args.seed)
            print(f"{lr[0]},{cfg.patch_k},{cfg.dp_cmax},{cfg.stride_s},{model},{audited},{model == audited}")
            if model != audited:
                raise VerificationFailure("candidate audit does not match the closed form")
        return EXIT_OK

    print("size,frames,coarse_s,refine_fuse_s,total_s")
    for size in sizes:
        scene = make_scene((size, size), args.seed)
        burst, _ = synthesize_burst(scene, args.frames, NoiseParams.preset("high"), args.seed)
        t0 = time.perf_counter()
        result = two_stage_align(burst, cfg, args.ds, args.threads)
        t1 = time.perf_counter()
        reconstruct(robust_merge(result.aligned, result.flows))
        t2 = time.perf_counter()
        print(f"{size},{args.frames},{t1 - t0:.3f},{t2 - t1:.3f},{t2 - t0:.3f}")
    return EXIT_OK


def cmd_grad_check(args) -> int:
    results = gradcheck.run_all(args.samples, args.seed)
    width = max(len(r.name) for r in results)
    print(f"{'check':<{width}}  {'max_rel_err':>12}  {'tol':>8}  result")
    for r in results:
        print(f"{r.name:<{width}}  {r.max_rel_err:12.3e}  {r.tol:8.0e}  {'PASS' if r.passed else 'FAIL'}")
    if not all(r.passed for r in results):
        raise VerificationFailure("finite-difference check failed")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "align": cmd_align,
    "fuse": cmd_fuse,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "grad-check": cmd_grad_check,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except VerificationFailure as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
