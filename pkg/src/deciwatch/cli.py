"""Command-line front end.

    deciwatch synth   --synth sinusoid --out data/
    deciwatch train   --synth sinusoid --N 10 --Q 10 --epochs 50 --seed 1 --out run/
    deciwatch eval    --ckpt run/model.ckpt --data noisy.pose --gt clean.pose
    deciwatch label   --ckpt run/model.ckpt --gt clean.pose --out lab/
    deciwatch compare --ckpt a.ckpt --ckpt b.ckpt --synth sinusoid --out cmp/
    deciwatch sweep   --grid N=1..20 --baseline linear --synth sinusoid
    deciwatch flops   --fE 11.96 --ratio 0.1

Every flag can also come from a ``--config`` file of ``key=value`` lines
(keys are flag names without dashes); flags on the command line win.
Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ModelConfig
from .denoise import denoise_flops
from .errors import DeciWatchError, DivergenceError
from .interpolation import METHODS
from .metrics import evaluate, flops_model, format_table, reports_to_csv
from .pipeline import baseline_sequence, compare_methods, raw_report, recover_sequence
from .posedata import PoseSequence, SyntheticSpec, generate_synthetic, read_pose_file, write_pose_file
from .recover import recover_flops
from .sampling import STRATEGIES
from .training import (TrainConfig, WindowBatch, build_windows, load_checkpoint, save_checkpoint,
                       train, write_loss_log)

log = logging.getLogger("deciwatch")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
COMMANDS = ("train", "eval", "label", "compare", "flops", "sweep", "synth")


class CliError(DeciWatchError):
    """Bad command-line or config-file input (exit code 2)."""


# ---------------------------------------------------------------------------
# argument handling


def _ratio_list(text):
    try:
        return [float(v) for v in str(text).split(",") if v]
    except ValueError:
        raise CliError(f"--ratio takes comma-separated fractions, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="deciwatch", description="Sample-denoise-recover "
                                "pose smoothing with classical interpolation baselines.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="key=value file; command-line flags override it")
    p.add_argument("--seed", type=int, help="single source of all randomness (default 0)")
    p.add_argument("--out", help="output directory (default: current directory)")
    io = p.add_argument_group("data")
    io.add_argument("--data", action="append", help="estimator pose file (repeatable)")
    io.add_argument("--gt", action="append", help="ground-truth pose file (repeatable)")
    io.add_argument("--synth", help="synthetic motion kind instead of files: "
                    "constant, linear, quadratic, sinusoid, mixed")
    io.add_argument("--frames", type=int, help="synthetic frames per subject (default 1010)")
    io.add_argument("--joints", type=int, help="joints K (default 15)")
    io.add_argument("--dims", type=int, help="coordinates per joint D (default 2)")
    io.add_argument("--amplitude", type=float, help="synthetic motion amplitude (default 100)")
    io.add_argument("--sigma", type=float, help="Gaussian noise, fraction of amplitude "
                    "(default 0.05)")
    io.add_argument("--outliers", type=float, help="outlier rate (default 0.05)")
    io.add_argument("--subjects", type=int, help="synthetic training subjects (default 8)")
    io.add_argument("--data-seed", type=int, help="seed of the evaluation subject "
                    "(default: --seed)")
    m = p.add_argument_group("model and training")
    m.add_argument("--N", type=int, help="sampling interval (default 10)")
    m.add_argument("--Q", type=int, help="visible frames per window minus one (default 10)")
    m.add_argument("--ratio", help="sampling ratio, e.g. 0.1 (sets N = round(1/ratio))")
    m.add_argument("--strategy", choices=STRATEGIES)
    m.add_argument("--baseline", help="comma list of " + ",".join(METHODS))
    m.add_argument("--lambda", dest="lam", type=float, help="recovery loss weight (default 5)")
    m.add_argument("--C", type=int, help="embedding width (default 64)")
    m.add_argument("--M", type=int, help="transformer blocks per subnet (default 5)")
    m.add_argument("--heads", type=int, help="attention heads (default 4)")
    m.add_argument("--kernel", type=int, help="temporal kernel size (default 5)")
    m.add_argument("--epochs", type=int)
    m.add_argument("--lr", type=float)
    m.add_argument("--batch", type=int, help="windows per step, 0 = all (default 16)")
    m.add_argument("--stride", type=int, help="training window stride (default: N*Q+1)")
    m.add_argument("--dropout", type=float)
    m.add_argument("--label-mode", dest="label_mode", action="store_const", const=True,
                   help="train or evaluate on ground-truth visible frames")
    m.add_argument("--ckpt", action="append", help="checkpoint file (repeatable for compare)")
    m.add_argument("--fE", type=float, help="estimator cost in giga-MACs per frame")
    m.add_argument("--grid", help="sweep grid: N=1..20, window=11..201, lambda=1,2,5,10, "
                   "C=..., M=...")
    m.add_argument("-v", "--verbose", action="store_true")
    return p


DEFAULTS = dict(seed=0, out=".", frames=1010, joints=15, dims=2, amplitude=100.0, sigma=0.05,
                outliers=0.05, subjects=8, N=10, Q=10, strategy="uniform", lam=5.0, C=64,
                M=5, heads=4, kernel=5, epochs=10, lr=1e-3, batch=16, dropout=0.0,
                label_mode=False, fE=0.0)
_CONFIG_ALIASES = {"lambda": "lam", "label-mode": "label_mode", "data-seed": "data_seed"}
_LIST_KEYS = ("data", "gt", "ckpt")


def read_config_file(path: str, parser: argparse.ArgumentParser) -> dict:
    known = {a.dest: a for a in parser._actions}
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read config file {path}: {exc.strerror}") from None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = _CONFIG_ALIASES.get(key.strip(), key.strip().replace("-", "_"))
        if not sep or key not in known or key in ("command", "config", "help"):
            raise CliError(f"{path}:{no}: unknown or malformed setting {raw.strip()!r}")
        action = known[key]
        val = val.strip()
        if key in _LIST_KEYS:
            values.setdefault(key, []).append(val)
        elif action.const is True:
            values[key] = val.lower() in ("1", "true", "yes")
        elif action.type is not None:
            try:
                values[key] = action.type(val)
            except ValueError:
                raise CliError(f"{path}:{no}: bad value for {key}: {val!r}") from None
        else:
            values[key] = val
    return values


def resolve(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    merged = dict(DEFAULTS)
    merged_from_file = read_config_file(args.config, parser) if args.config else {}
    merged.update(merged_from_file)
    for k, v in vars(args).items():
        if v is not None:
            merged[k] = v
    ns = argparse.Namespace(**{a.dest: None for a in parser._actions if a.dest != "help"})
    for k, v in merged.items():
        setattr(ns, k, v)
    if ns.ratio is not None:
        ratios = _ratio_list(ns.ratio)
        if not ratios or min(ratios) <= 0 or max(ratios) > 1:
            raise CliError(f"ratio must be in (0, 1], got {ns.ratio}")
        ns.ratios = ratios
        if args.N is None and "N" not in merged_from_file:
            ns.N = max(1, round(1.0 / ratios[0]))
    else:
        ns.ratios = None
    ns.N_given = args.N is not None or "N" in merged_from_file or ns.ratios is not None
    if ns.data_seed is None:
        ns.data_seed = ns.seed
    return ns


# ---------------------------------------------------------------------------
# data


def _synth_spec(ns, seed: int, noisy: bool = True) -> SyntheticSpec:
    amp = ns.amplitude
    return SyntheticSpec(kind=ns.synth, amplitude=amp, sigma=ns.sigma * amp if noisy else 0.0,
                         outlier_rate=ns.outliers if noisy else 0.0,
                         outlier_magnitude=0.5 * amp, seed=seed,
                         units="px" if ns.dims == 2 else "mm")


def synth_subject(ns, seed: int) -> tuple[PoseSequence, PoseSequence]:
    """``(clean, noisy)`` synthetic subject."""
    return generate_synthetic(_synth_spec(ns, seed), ns.frames, ns.joints, ns.dims)


def training_subject_seeds(ns) -> list[int]:
    # the evaluation subject is data_seed itself; training subjects follow it
    return [ns.data_seed + 1 + i for i in range(ns.subjects)]


def _read(path) -> PoseSequence:
    if not Path(path).is_file():
        raise CliError(f"no such file: {path}")
    return read_pose_file(path)


def load_pairs(ns, for_training: bool) -> list[tuple[PoseSequence, PoseSequence]]:
    """``(noisy, gt)`` pairs from files or synthetic subjects."""
    if ns.synth:
        seeds = training_subject_seeds(ns) if for_training else [ns.data_seed]
        return [(n, c) for c, n in (synth_subject(ns, s) for s in seeds)]
    if not ns.gt:
        raise CliError("give --synth KIND or --gt FILE (with --data FILE for estimator output)")
    gts = [_read(p) for p in ns.gt]
    if ns.data:
        if len(ns.data) != len(gts):
            raise CliError(f"{len(ns.data)} --data files but {len(gts)} --gt files")
        noisy = [_read(p) for p in ns.data]
    elif ns.label_mode or ns.command == "label":
        noisy = gts
    else:
        raise CliError("--data FILE is required with --gt outside label mode")
    for n, g in zip(noisy, gts):
        if n.coords.shape != g.coords.shape:
            raise CliError(f"estimator {n.coords.shape} and ground truth {g.coords.shape} "
                           "sequences differ in shape")
    return list(zip(noisy, gts))


def train_config(ns, **over) -> TrainConfig:
    pairs_dims = over.pop("pose_shape", (ns.joints, ns.dims))
    cfg = TrainConfig(lam=ns.lam, lr=ns.lr, epochs=ns.epochs, batch=ns.batch, seed=ns.seed,
                      N=ns.N, Q=ns.Q, C=ns.C, M=ns.M, H=ns.heads, kernel_size=ns.kernel,
                      strategy=ns.strategy, dropout=ns.dropout,
                      label_mode=bool(ns.label_mode), joints=pairs_dims[0],
                      dims=pairs_dims[1])
    return replace(cfg, **over)


# ---------------------------------------------------------------------------
# commands


def _out_dir(ns) -> Path:
    out = Path(ns.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)


def fit(ns, pairs, cfg: TrainConfig):
    data = WindowBatch.concat([build_windows(n, g, cfg.N, cfg.Q, cfg.strategy, ns.seed,
                                             stride=ns.stride) for n, g in pairs])
    log.info("training on %d windows", len(data))
    return train(data, cfg)


def cmd_train(ns) -> int:
    pairs = load_pairs(ns, for_training=True)
    K, D = pairs[0][1].K, pairs[0][1].D
    cfg = train_config(ns, pose_shape=(K, D))
    out = _out_dir(ns)
    try:
        result = fit(ns, pairs, cfg)
    except DivergenceError as exc:
        if exc.checkpoint is not None:
            save_checkpoint(exc.checkpoint, out / "last_good.ckpt")
        raise
    save_checkpoint(result.checkpoint, out / "model.ckpt")
    write_loss_log(result.log, out / "loss.csv")
    print(f"wrote {out / 'model.ckpt'} and {out / 'loss.csv'} "
          f"({len(result.log)} steps, final loss {result.log[-1][2]:.6g})"
          if result.log else f"wrote {out / 'model.ckpt'} (no training steps)")
    return EXIT_OK


def _load_ckpts(ns):
    if not ns.ckpt:
        raise CliError("--ckpt FILE is required")
    out = []
    for path in ns.ckpt:
        if not Path(path).is_file():
            raise CliError(f"no such file: {path}")
        out.append(load_checkpoint(path))
    return out


def _check_interval(ns, ckpt):
    if ns.N_given and ns.N != ckpt.config.N:
        raise CliError(f"--N {ns.N} does not match the checkpoint (N={ckpt.config.N})")


def cmd_eval(ns) -> int:
    (ckpt,) = _load_ckpts(ns)[:1]
    _check_interval(ns, ckpt)
    ns.joints, ns.dims = ckpt.config.joints, ckpt.config.dims
    reports = []
    for noisy, gt in load_pairs(ns, for_training=False):
        reports.append(raw_report(noisy, gt, ns.fE))
        reports += compare_methods(noisy, gt, ckpt.config.N, ckpt.config.Q, ["deciwatch"],
                                   ckpt=ckpt, f_E=ns.fE, strategy=ckpt.config.strategy,
                                   seed=ns.seed, label_mode=bool(ns.label_mode))
    out = _out_dir(ns)
    _write(out / "eval.csv", reports_to_csv(reports))
    print(format_table(reports))
    return EXIT_OK


def cmd_label(ns) -> int:
    (ckpt,) = _load_ckpts(ns)[:1]
    _check_interval(ns, ckpt)
    ns.joints, ns.dims = ckpt.config.joints, ckpt.config.dims
    out = _out_dir(ns)
    reports = []
    for i, (_, gt) in enumerate(load_pairs(ns, for_training=False)):
        dense = recover_sequence(ckpt, gt, ckpt.config.strategy, ns.seed, label_mode=True)
        write_pose_file(dense, out / f"labels_{i}.pose")
        reports.append(evaluate("deciwatch-label", dense, gt, ckpt.config.N))
        for method in ("linear", "cubic"):
            pred = baseline_sequence(gt, method, ckpt.config.N, ckpt.config.Q,
                                     ckpt.config.strategy, ns.seed)
            reports.append(evaluate(method, pred, gt, ckpt.config.N))
    _write(out / "label.csv", reports_to_csv(reports))
    print(format_table(reports))
    return EXIT_OK


def _baselines(ns) -> list[str]:
    if not ns.baseline:
        return list(METHODS)
    names = [b for b in ns.baseline.split(",") if b]
    bad = [b for b in names if b not in METHODS]
    if bad:
        raise CliError(f"unknown baseline {bad[0]!r}; choose from {', '.join(METHODS)}")
    return names


def cmd_compare(ns) -> int:
    ckpts = _load_ckpts(ns) if ns.ckpt else []
    if ckpts:
        ns.joints, ns.dims = ckpts[0].config.joints, ckpts[0].config.dims
    if ckpts:
        intervals = [c.config.N for c in ckpts]
        if ns.ratios:
            wanted = [max(1, round(1.0 / r)) for r in ns.ratios]
            missing = sorted(set(wanted) - set(intervals))
            if missing:
                raise CliError(f"no checkpoint for N={missing[0]}; checkpoints have "
                               f"N={sorted(set(intervals))}")
            ckpts = [c for c in ckpts if c.config.N in wanted]
    else:
        intervals = ([max(1, round(1.0 / r)) for r in ns.ratios] if ns.ratios else [ns.N])
    methods = _baselines(ns)
    rows = []
    for noisy, gt in load_pairs(ns, for_training=False):
        if ckpts:
            for c in ckpts:
                rows += compare_methods(noisy, gt, c.config.N, c.config.Q,
                                        methods + ["deciwatch"], ckpt=c, f_E=ns.fE,
                                        strategy=c.config.strategy, seed=ns.seed,
                                        label_mode=bool(ns.label_mode))
        else:
            for N in intervals:
                rows += compare_methods(noisy, gt, N, ns.Q, methods, f_E=ns.fE,
                                        strategy=ns.strategy, seed=ns.seed)
    out = _out_dir(ns)
    _write(out / "compare.csv", reports_to_csv(rows))
    print(format_table(rows))
    return EXIT_OK


def flops_breakdown(ns) -> dict[str, float]:
    if ns.ckpt:
        (ckpt,) = _load_ckpts(ns)[:1]
        mcfg = ckpt.config.model_config()
    else:
        mcfg = ModelConfig(joints=ns.joints, dims=ns.dims, N=ns.N, Q=ns.Q, channels=ns.C,
                           blocks=ns.M, heads=ns.heads, kernel_size=ns.kernel)
    L = mcfg.window_length
    f_D = denoise_flops(mcfg) / L / 1e9
    f_R = recover_flops(mcfg) / L / 1e9
    return flops_model(ns.fE, f_D, f_R, mcfg.N)


def cmd_flops(ns) -> int:
    b = flops_breakdown(ns)
    print(f"estimator f_E/N  {b['estimator']:.6g} G")
    print(f"denoise   f_D    {b['denoise']:.6g} G")
    print(f"recover   f_R    {b['recover']:.6g} G")
    print(f"total            {b['total']:.6g} G per frame")
    return EXIT_OK


def parse_grid(text: str) -> tuple[str, list]:
    if not text or "=" not in text:
        raise CliError("--grid must look like N=1..20, window=11..201 or lambda=1,2,5,10")
    key, _, spec = text.partition("=")
    key = key.strip()
    if key not in ("N", "window", "lambda", "C", "M"):
        raise CliError(f"cannot sweep {key!r}; choose N, window, lambda, C or M")
    values = []
    for part in spec.split(","):
        part = part.strip()
        if ".." in part:
            lo, _, hi = part.partition("..")
            step = 10 if key == "window" else 1
            values += list(range(int(lo), int(hi) + 1, step))
        elif part:
            values.append(float(part) if key == "lambda" else int(part))
    if not values:
        raise CliError("sweep grid is empty")
    return key, values


def _grid_point(ns, key, value):
    """``(N, Q, overrides, skip_reason)`` for one grid value."""
    N, Q, over = ns.N, ns.Q, {}
    if key == "N":
        N = value
    elif key == "window":
        N = ns.N
        if (value - 1) % N:
            return N, Q, over, f"window {value} is not a multiple of N={N} plus one"
        Q = (value - 1) // N
    elif key == "lambda":
        over["lam"] = value
    elif key == "C":
        over["C"] = value
    else:
        over["M"] = value
    if N < 1 or Q < 1:
        return N, Q, over, "N and Q must be >= 1"
    if key == "C" and value % ns.heads:
        return N, Q, over, f"C={value} not divisible by heads={ns.heads}"
    return N, Q, over, None


def cmd_sweep(ns) -> int:
    key, values = parse_grid(ns.grid)
    methods = _baselines(ns) if ns.baseline else ["deciwatch"]
    eval_pairs = load_pairs(ns, for_training=False)
    train_pairs = load_pairs(ns, for_training=True) if "deciwatch" in methods else []
    column = "lambda" if key == "lambda" else key
    reports, extras = [], []
    for value in values:
        N, Q, over, reason = _grid_point(ns, key, value)
        shortest = min(g.T for _, g in eval_pairs + train_pairs)
        if reason is None and shortest < N * Q + 1:
            reason = f"sequence of {shortest} frames is shorter than the window N*Q+1={N * Q + 1}"
        if reason is not None:
            for m in methods:
                reports.append(None)
                extras.append({column: value, "status": "skipped: " + reason, "method": m})
            log.warning("skipping %s=%s: %s", column, value, reason)
            continue
        ckpt = None
        if "deciwatch" in methods:
            K, D = train_pairs[0][1].K, train_pairs[0][1].D
            cfg = train_config(ns, pose_shape=(K, D), N=N, Q=Q, **over)
            try:
                ckpt = fit(ns, train_pairs, cfg).checkpoint
            except DivergenceError as exc:
                for m in methods:
                    reports.append(None)
                    extras.append({column: value, "status": f"diverged: {exc}", "method": m})
                continue
        for noisy, gt in eval_pairs:
            for rep in compare_methods(noisy, gt, N, Q, methods, ckpt=ckpt, f_E=ns.fE,
                                       strategy=ns.strategy, seed=ns.seed,
                                       label_mode=bool(ns.label_mode)):
                reports.append(rep)
                extras.append({column: value, "status": "ok"})
    out = _out_dir(ns)
    name = f"sweep_{column}.csv"
    _write(out / name, reports_to_csv(reports, (column, "status"), extras))
    done = sum(r is not None for r in reports)
    print(f"wrote {out / name}: {done} rows evaluated, {len(reports) - done} skipped")
    return EXIT_OK


def cmd_synth(ns) -> int:
    if not ns.synth:
        raise CliError("synth needs --synth KIND")
    clean, noisy = synth_subject(ns, ns.data_seed)
    out = _out_dir(ns)
    write_pose_file(clean, out / "clean.pose")
    write_pose_file(noisy, out / "noisy.pose")
    print(f"wrote {out / 'clean.pose'} and {out / 'noisy.pose'} "
          f"(T={clean.T}, K={clean.K}, D={clean.D})")
    return EXIT_OK


HANDLERS = {"train": cmd_train, "eval": cmd_eval, "label": cmd_label, "compare": cmd_compare,
            "flops": cmd_flops, "sweep": cmd_sweep, "synth": cmd_synth}


def main(argv=None) -> int:
    try:
        ns = resolve(argv)
    except SystemExit as exc:  # argparse usage errors already printed
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    except DeciWatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return HANDLERS[ns.command](ns)
    except (DivergenceError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DeciWatchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
