"""Command line interface: ``cosparse <subcommand> ...``.

Exit codes: 0 success, 2 bad arguments/configuration/input, 3 budget exceeded
or infeasible target.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import _rng, harness
from .bounds import Variant, bound_at_ratio, bound_curve, parse_snr_grid
from .dictionary import load_dictionary, make_family, save_dictionary
from .errors import CosparseError, InvalidInput
from .linalg import nullspace_projector
from .metrics import DictionaryProfile, Mode, build_profile
from .pursuit import isnr, threshold_pursuit
from .signal import CoSupport, CosparseSignal, NoisyInstance, add_noise, generate_signal, snr_of_ratio, zmin_of


def _common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=d(0), help="master seed (default 0)")
    parser.add_argument("--workers", type=int, default=d(1), help="worker processes (default 1)")
    parser.add_argument("--quick", action="store_true", default=d(False), help="CI-scale trial counts")
    parser.add_argument("--out", default=d(None), help="output file or directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cosparse", description=__doc__.splitlines()[0])
    _common(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _common(common, suppress=True)

    p = sub.add_parser("gen-dict", parents=[common], help="build a DIF, RAND or MIX dictionary")
    p.add_argument("--family", required=True, choices=["dif", "rand", "mix"])
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--p", type=int)

    p = sub.add_parser("gen-signals", parents=[common], help="draw noisy co-sparse signals as JSON lines")
    p.add_argument("--dict", required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sigma-ratio", type=float, default=0.0, help="noise sigma / sigma_u")

    p = sub.add_parser("profile", parents=[common], help="signature, co-sparsity and ROPP statistics")
    p.add_argument("--dict", required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--mode", choices=["exact", "empirical"], default="exact")
    p.add_argument("--n", type=int, default=10_000, help="signals for empirical mode")
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--uniform-closures", action="store_true",
                   help="weight closures equally instead of by generating-subset count")

    p = sub.add_parser("denoise", parents=[common], help="run thresholding on a signal batch")
    p.add_argument("--dict", required=True)
    p.add_argument("--signals", required=True)
    p.add_argument("--r", type=int, required=True)

    p = sub.add_parser("bounds", parents=[common], help="averaged success lower bounds")
    p.add_argument("--profile", required=True)
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--ratio", type=float, help="single noise ratio sigma / sigma_u")
    grp.add_argument("--snr-grid", help="a:b:n in dB")
    p.add_argument("--variant", choices=[v.value for v in Variant], default="joint")

    p = sub.add_parser("reproduce", parents=[common], help="write the data behind a figure")
    p.add_argument("figure", choices=list(harness.FIGURES) + ["all"])
    p.add_argument("--config", help="ExperimentConfig JSON overriding the figure defaults")
    p.add_argument("--gnuplot-script", action="store_true", help="also emit a gnuplot script")
    return ap


def _need_out(args) -> Path:
    if not args.out:
        raise InvalidInput("--out is required")
    return Path(args.out)


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_gen_dict(args) -> int:
    dic = make_family(args.family, args.d, args.p, args.seed)
    out = _need_out(args)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_dictionary(dic, out)
    print(f"wrote {dic.label} to {out}")
    return 0


def cmd_gen_signals(args) -> int:
    dic = load_dictionary(args.dict)
    if args.n < 1:
        raise InvalidInput("--n must be >= 1")
    sigma = args.sigma_ratio
    lines = []
    for t in range(args.n):
        s_seed = _rng.subseed(args.seed, "signal", dic.label, args.r, t)
        n_seed = _rng.subseed(args.seed, "noise", dic.label, args.r, t)
        sig = generate_signal(dic, args.r, s_seed)
        inst = add_noise(sig, sigma, n_seed)
        lines.append(json.dumps({
            "trial": t,
            "x": sig.x.tolist(),
            "y": inst.y.tolist(),
            "cosupport": list(sig.effective_cosupport.indices),
            "generating_subset": list(sig.generating_subset.indices),
            "ell": sig.ell,
            "r": sig.r,
            "sigma": sigma,
            "seeds": {"signal": s_seed, "noise": n_seed},
        }))
    _write_text(_need_out(args), "\n".join(lines) + "\n")
    return 0


def _read_instances(path, dic, r):
    out = []
    try:
        with open(path) as fh:
            for n, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                rec = json.loads(line)
                x = np.asarray(rec["x"], dtype=float)
                y = np.asarray(rec["y"], dtype=float)
                if x.shape != (dic.d,) or y.shape != (dic.d,):
                    raise InvalidInput(f"{path}:{n}: vectors must have length {dic.d}")
                corank = dic.d - int(rec.get("r", r))
                gen = CoSupport(tuple(rec.get("generating_subset", ())), 0)
                eff = CoSupport(tuple(rec["cosupport"]), min(corank, len(rec["cosupport"])))
                sig = CosparseSignal(x, gen, eff, len(eff), int(rec.get("r", r)))
                out.append((int(rec.get("trial", len(out))), NoisyInstance(y, sig, float(rec.get("sigma", 0.0)))))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InvalidInput(f"cannot read signals from {path}: {exc}") from exc
    return out


def cmd_denoise(args) -> int:
    dic = load_dictionary(args.dict)
    rows = []
    for t, inst in _read_instances(args.signals, dic, args.r):
        res = threshold_pursuit(dic, inst, args.r)
        sig = inst.x_true
        oracle = ""
        isnr_db = ""
        if inst.sigma > 0:
            x_or = nullspace_projector(dic.rows(sig.effective_cosupport.indices), dic.d) @ inst.y
            oracle = repr(isnr(sig.x, x_or, dic.d, inst.sigma))
            isnr_db = repr(res.isnr_db)
        rows.append([t, sig.ell, int(res.success), isnr_db, oracle, repr(zmin_of(dic, sig))])
    header = "trial,ell,success,isnr_db,oracle_isnr_db,zmin\n"
    body = "".join(",".join(str(v) for v in row) + "\n" for row in rows)
    _write_text(_need_out(args), header + body)
    rate = np.mean([row[2] for row in rows]) if rows else math.nan
    print(f"success rate {rate:.4f} over {len(rows)} signals")
    return 0


def cmd_profile(args) -> int:
    dic = load_dictionary(args.dict)
    prof = build_profile(
        dic, args.r, Mode(args.mode), n=args.n, seed=args.seed, bins=args.bins,
        uniform_closures=args.uniform_closures, workers=args.workers,
    )
    _write_text(_need_out(args), json.dumps(prof.to_json()) + "\n")
    print(f"{dic.label} r={args.r}: spark {prof.spark}, alpha_r {prof.alpha_r:.6g}")
    return 0


def cmd_bounds(args) -> int:
    try:
        prof = DictionaryProfile.from_json(json.loads(Path(args.profile).read_text()))
    except (OSError, ValueError) as exc:
        raise InvalidInput(f"cannot read profile {args.profile}: {exc}") from exc
    if args.ratio is not None:
        if not args.ratio > 0:
            raise InvalidInput("--ratio must be > 0")
        rows = [{
            "snr_db": snr_of_ratio(args.ratio, prof.d, prof.r),
            "ratio": args.ratio,
            "bound": bound_at_ratio(prof, args.ratio, args.variant),
            "variant": args.variant,
        }]
    else:
        rows = list(bound_curve(prof, args.variant, parse_snr_grid(args.snr_grid)).rows())
    text = "snr_db,ratio,bound,variant\n" + "".join(
        f"{r['snr_db']!r},{r['ratio']!r},{r['bound']!r},{r['variant']}\n" for r in rows
    )
    if args.out:
        _write_text(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_reproduce(args) -> int:
    outdir = Path(args.out or "results")
    figures = harness.FIGURES if args.figure == "all" else (args.figure,)
    for fig in figures:
        cfg = None
        if args.config:
            cfg = harness.ExperimentConfig.load(args.config)
        target = outdir / fig if args.figure == "all" else outdir
        files = harness.reproduce(
            fig, target, quick=args.quick, seed=args.seed, workers=args.workers,
            config=cfg, gnuplot=args.gnuplot_script,
        )
        for f in files:
            print(f)
    return 0


_COMMANDS = {
    "gen-dict": cmd_gen_dict,
    "gen-signals": cmd_gen_signals,
    "profile": cmd_profile,
    "denoise": cmd_denoise,
    "bounds": cmd_bounds,
    "reproduce": cmd_reproduce,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        print("cosparse: error: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](args)
    except CosparseError as exc:
        print(f"cosparse: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
