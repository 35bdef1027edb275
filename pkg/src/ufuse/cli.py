"""``ufuse`` command-line interface."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .baseline import BaselineConfig, calibrate_threshold, fuse_baseline
from .config import MODE_NAMES, Config, Setup, load_config
from .das import DasOperator, Interp, dot_product_check
from .dataset import Dataset, mode_images
from .geometry import View
from .metrics import evaluate
from .net import Model, grad_check, load_checkpoint, predict_proba, save_checkpoint, train
from .net.train import Sample
from .simulate import generate_dataset, make_phantom, simulate_view
from .tensorio import export_pgm, read_tensor, write_tensor

log = logging.getLogger("ufuse")

ADJOINT_TOL = 1e-10
GRAD_TOL = 1e-3
ADJOINT_PAIRS = 20


def _config(path) -> Config:
    return load_config(path) if path else Config()


def cmd_simulate(args) -> int:
    cfg = _config(args.config)
    manifest = generate_dataset(cfg, args.num, (args.train, args.test), args.seed, args.out,
                                workers=args.workers)
    print(f"wrote {len(manifest.entries)} scenarios to {args.out}")
    return 0


def cmd_beamform(args) -> int:
    cfg = _config(args.config)
    setup = Setup(cfg.sim)
    name = f"{args.view}{args.mode}"
    f = read_tensor(args.data)
    op = DasOperator(setup.tables[name], cfg.sim.n_t, cfg.sim.fs, cfg.sim.t0, args.interp)
    write_tensor(args.out, op.forward(f.astype(np.float64)), "f64")
    return 0


def cmd_baseline(args) -> int:
    ds = Dataset(args.dataset)
    ops = ds.das_operators(Interp.NEAREST)
    modes = tuple(args.modes.split(",")) if args.modes else BaselineConfig().modes_used
    if args.theta == "auto":
        train_set = [(mode_images(s, ops), s.seg) for s in ds.samples("train")]
        theta = calibrate_threshold(train_set, BaselineConfig(modes_used=modes))
    else:
        theta = float(args.theta)
    cfg = BaselineConfig(modes_used=modes, theta=theta)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for sid in ds.ids("test"):
        seg = fuse_baseline(mode_images(ds.load(sid), ops), cfg)
        write_tensor(out / f"{sid}.tns", seg, "u8")
    (out / "theta.txt").write_text(f"{theta!r}\n")
    print(f"theta={theta}")
    return 0


def cmd_train(args) -> int:
    ds = Dataset(args.dataset)
    model = Model.create(ds.setup, ds.config.arch, seed=args.seed)
    start = time.time()
    model, loss_log = train(model, ds.samples("train"), args.epochs, args.lr, args.seed,
                            max_steps=args.max_steps)
    save_checkpoint(model, args.ckpt)
    Path(args.ckpt, "loss_log.txt").write_text(
        "".join(f"{r.epoch} {r.scenario_id} {r.loss!r}\n" for r in loss_log))
    log.info("trained %d steps in %.1f s", len(loss_log), time.time() - start)
    if loss_log:
        print(f"final loss {loss_log[-1].loss:.6f} after {len(loss_log)} steps")
    return 0


def cmd_eval(args) -> int:
    ds = Dataset(args.dataset)
    ids = ds.ids("test")
    truths = [ds.load(sid).seg for sid in ids]
    if args.ckpt:
        model = load_checkpoint(args.ckpt)
        preds = []
        for sid in ids:
            s = ds.load(sid)
            preds.append(predict_proba(model, s.f_top, s.f_right))
        method = "learned"
    else:
        preds = [read_tensor(Path(args.pred) / f"{sid}.tns") for sid in ids]
        method = "baseline"
    report = evaluate(preds, truths, method, ids)
    Path(args.report).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    print(f"{method}: mean CE {report.mean_cross_entropy:.4f}, IoU {report.mean_iou:.4f}, "
          f"accuracy {report.mean_accuracy:.4f}")
    return 0


def adjoint_test(cfg: Config, seed: int, pairs: int = ADJOINT_PAIRS) -> float:
    """Worst dot-product residual over seeded pairs, all modes, both interpolations."""
    setup, sim = Setup(cfg.sim), cfg.sim
    worst = 0.0
    for name in MODE_NAMES:
        for interp in Interp:
            for k in range(pairs):
                r = dot_product_check(setup.tables[name], sim.n_t, sim.fs, seed + k, interp, sim.t0)
                worst = max(worst, r)
    return worst


def cmd_adjoint_test(args) -> int:
    worst = adjoint_test(_config(args.config), args.seed)
    ok = worst < ADJOINT_TOL
    print(f"max relative residual {worst:.3e} ({'ok' if ok else 'FAIL'})")
    return 0 if ok else 1


def grad_check_setup(cfg: Config, seed: int) -> float:
    """Gradient check on one simulated scenario of the configured geometry."""
    setup = Setup(cfg.sim)
    rng = np.random.default_rng(seed)
    phantom = make_phantom(cfg.sim, float(rng.uniform(0, 2 * np.pi)))
    top = simulate_view(phantom, setup.arrays[View.TOP], cfg.sim, seed, setup)
    right = simulate_view(phantom, setup.arrays[View.RIGHT], cfg.sim, seed + 1, setup)
    model = Model.create(setup, dataclasses.replace(cfg.arch, zero_init_residual=False), seed)
    sample = Sample("check", top.values, right.values, phantom.seg)
    return grad_check(model, sample, n_params_sampled=30, h=1e-4, seed=seed)


def cmd_grad_check(args) -> int:
    err = grad_check_setup(_config(args.config), args.seed)
    ok = err < GRAD_TOL
    print(f"max relative gradient error {err:.3e} ({'ok' if ok else 'FAIL'})")
    return 0 if ok else 1


def cmd_export(args) -> int:
    export_pgm(read_tensor(args.inp).astype(np.float64), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ufuse", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a scenario dataset")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--num", type=int, required=True)
    s.add_argument("--train", type=int, required=True)
    s.add_argument("--test", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("beamform", help="DAS image of one data volume")
    s.add_argument("--data", required=True)
    s.add_argument("--view", choices=["top", "right"], required=True)
    s.add_argument("--mode", type=int, choices=[0, 1], required=True)
    s.add_argument("--config")
    s.add_argument("--interp", choices=[i.value for i in Interp], default="linear")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_beamform)

    s = sub.add_parser("baseline", help="traditional fusion on the test split")
    s.add_argument("--dataset", required=True)
    s.add_argument("--theta", default="auto")
    s.add_argument("--modes", help="comma-separated modes (default: top0,right0)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_baseline)

    s = sub.add_parser("train", help="train the end-to-end network")
    s.add_argument("--dataset", required=True)
    s.add_argument("--epochs", type=int, required=True)
    s.add_argument("--lr", type=float, default=1e-3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-steps", type=int)
    s.add_argument("--ckpt", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="metrics on the test split")
    s.add_argument("--dataset", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--pred")
    g.add_argument("--ckpt")
    s.add_argument("--report", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("adjoint-test", help="dot-product test of every DAS operator")
    s.add_argument("--config")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_adjoint_test)

    s = sub.add_parser("grad-check", help="finite-difference check of the full network")
    s.add_argument("--config")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_grad_check)

    s = sub.add_parser("export", help="tensor to PGM")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"ufuse {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
