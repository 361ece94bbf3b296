"""Command-line entry point: data generation, training, evaluation, benchmarks.

Exit codes: 0 success, 1 unexpected internal error, 2 usage error (argparse),
3 missing file, 4 configuration conflict or invalid value, 5 corrupt data or
checkpoint, 6 selftest failure.  `SPHAE_DATA_DIR` supplies the default for
--data/--out directories.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_CONFLICT = 4
EXIT_CORRUPT = 5
EXIT_SELFTEST = 6

_REGIME_FILES = {
    "nrnr": ("nr_train.ds", "nr_test.ds"),
    "rr": ("r_train.ds", "r_test.ds"),
    "nrr": ("nr_train.ds", "r_test.ds"),
}
_REGIME_VARIANTS = {
    "nrnr": ("nr", "nr"),
    "rr": ("r", "r"),
    "nrr": ("nr", "r"),
}


def _default_dir(path):
    return path if path is not None else os.environ.get("SPHAE_DATA_DIR", ".")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sphae", description=__doc__)
    sub = p.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen-data", help="build spherical digit datasets (both splits)")
    g.add_argument("--mnist-dir", help="directory with the four MNIST IDX files")
    g.add_argument("--source", choices=("mnist", "digits", "synth"), default=None,
                   help="image source; defaults to mnist when --mnist-dir is given, else digits")
    g.add_argument("--out", help="output directory (default $SPHAE_DATA_DIR or .)")
    g.add_argument("--variant", choices=("nr", "r"), required=True)
    g.add_argument("--bandwidth", type=int, default=30)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, default=2000, help="training samples (test gets count//4)")

    t = sub.add_parser("train", help="train an autoencoder")
    t.add_argument("--data", help="dataset directory with {nr,r}_{train,test}.ds")
    t.add_argument("--loss", choices=("l2", "rotinv"), default="rotinv")
    t.add_argument("--regime", choices=tuple(_REGIME_FILES), default="nrr")
    t.add_argument("--config", help="JSON file of ModelConfig overrides")
    t.add_argument("--epochs", type=int, default=20)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--batch", type=int, default=32)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--b-corr", type=int, default=None, help="correlation bandwidth for the invariant loss")
    t.add_argument("--out-ckpt", required=True)
    t.add_argument("--log", help="metrics CSV path")
    t.add_argument("--threads", type=int, default=0)
    t.add_argument("--deterministic", action="store_true",
                   help="single-threaded kernels for bit-stable reductions")

    r = sub.add_parser("reconstruct", help="autoencode a dataset and report PSNR")
    r.add_argument("--ckpt", required=True)
    r.add_argument("--data", required=True, help="a .ds dataset file")
    r.add_argument("--align", action="store_true", help="align reconstructions before PSNR")
    r.add_argument("--report-psnr", help="per-sample PSNR CSV path")
    r.add_argument("--dump-grids", help="directory for orig/recon .npy stacks")
    r.add_argument("--limit", type=int, default=0, help="evaluate only the first N samples")

    e = sub.add_parser("embed", help="write latent embeddings as CSV")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out-csv", required=True)

    c = sub.add_parser("cluster", help="k-means on an embeddings CSV")
    c.add_argument("--embeddings", required=True)
    c.add_argument("--k", type=int, default=10)
    c.add_argument("--labels", help="optional CSV with a label column overriding the embeddings file")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out-metrics", help="metrics CSV path (default stdout)")

    k = sub.add_parser("classify", help="linear probe on embeddings")
    k.add_argument("--train-emb", required=True)
    k.add_argument("--test-emb", required=True)
    k.add_argument("--few-shot", action="store_true", help="evaluate at 1,2,5,10,100%% label fractions")
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--out-metrics", help="metrics CSV path (default stdout)")

    s = sub.add_parser("selftest", help="run the module invariant suites")
    s.add_argument("--level", choices=("fast", "full"), default="fast")

    b = sub.add_parser("bench", help="kernel wall-time table across backends")
    b.add_argument("--op", default="s2fft,so3fft,s2corr,so3corr",
                   help="comma list from s2fft,so3fft,s2corr,so3corr")
    b.add_argument("--bandwidths", default="8,16", help="comma list of bandwidths")
    b.add_argument("--reps", type=int, default=5)
    b.add_argument("--backend", choices=("active", "both"), default="both")
    b.add_argument("--out-csv", help="CSV path (default stdout)")
    b.add_argument("--threads", type=int, default=0)
    return p


# ---------------------------------------------------------------------------
# subcommand bodies
# ---------------------------------------------------------------------------


def _load_images(args):
    from . import data as data_mod

    source = args.source or ("mnist" if args.mnist_dir else "digits")
    if source == "mnist":
        if not args.mnist_dir:
            raise FileNotFoundError("--mnist-dir is required for --source mnist")
        tr_x, tr_y, te_x, te_y = data_mod.load_mnist_dir(args.mnist_dir)
    elif source == "digits":
        imgs, labels = data_mod.load_digits_data()
        n_test = min(len(imgs) // 4, max(1, args.count // 4))
        tr_x, tr_y = imgs[:-n_test], labels[:-n_test]
        te_x, te_y = imgs[-n_test:], labels[-n_test:]
    else:
        return None
    return tr_x, tr_y, te_x, te_y


def _cmd_gen_data(args) -> int:
    from . import data as data_mod

    out_dir = _default_dir(args.out)
    os.makedirs(out_dir, exist_ok=True)
    n_train = args.count
    n_test = max(1, args.count // 4)
    if (args.source or ("mnist" if args.mnist_dir else "digits")) == "synth":
        train_nr = data_mod.synth_dataset(n_train, args.bandwidth, seed=args.seed)
        test_nr = data_mod.synth_dataset(n_test, args.bandwidth, seed=args.seed + 10_000)
    else:
        tr_x, tr_y, te_x, te_y = _load_images(args)
        sel_tr = slice(0, min(n_train, len(tr_x)))
        sel_te = slice(0, min(n_test, len(te_x)))
        train_nr = data_mod.build_dataset(tr_x[sel_tr], tr_y[sel_tr], args.bandwidth, seed=args.seed)
        test_nr = data_mod.build_dataset(te_x[sel_te], te_y[sel_te], args.bandwidth, seed=args.seed)
    if args.variant == "r":
        train_ds = data_mod.randomly_rotate(train_nr, seed=args.seed + 1)
        test_ds = data_mod.randomly_rotate(test_nr, seed=args.seed + 2)
    else:
        train_ds, test_ds = train_nr, test_nr
    for split, ds in (("train", train_ds), ("test", test_ds)):
        path = os.path.join(out_dir, f"{args.variant}_{split}.ds")
        data_mod.save_dataset(path, ds)
        print(f"wrote {path}: {len(ds)} samples, b={ds.b}, variant={ds.variant}")
    return EXIT_OK


def _load_regime_data(data_dir: str, regime: str):
    from . import data as data_mod
    from .exceptions import ConfigConflictError

    train_name, test_name = _REGIME_FILES[regime]
    want_tr, want_te = _REGIME_VARIANTS[regime]
    paths = (os.path.join(data_dir, train_name), os.path.join(data_dir, test_name))
    for p in paths:
        if not os.path.exists(p):
            raise FileNotFoundError(p)
    train_ds = data_mod.load_dataset(paths[0])
    test_ds = data_mod.load_dataset(paths[1])
    if train_ds.variant != want_tr or test_ds.variant != want_te:
        raise ConfigConflictError(
            f"regime {regime} expects variants ({want_tr}, {want_te}), "
            f"files hold ({train_ds.variant}, {test_ds.variant})"
        )
    if train_ds.b != test_ds.b:
        raise ConfigConflictError(f"train/test bandwidth mismatch: {train_ds.b} vs {test_ds.b}")
    return train_ds, test_ds


def _cmd_train(args) -> int:
    from . import backend
    from .model import ModelConfig, scaled_config
    from .train import TrainConfig, train

    if args.threads:
        backend.set_num_threads(args.threads)
    if args.deterministic:
        backend.set_num_threads(1)
    train_ds, test_ds = _load_regime_data(_default_dir(args.data), args.regime)
    overrides = {}
    if args.config:
        with open(args.config) as fh:
            overrides = json.load(fh)
    if overrides:
        base = scaled_config(train_ds.b).to_dict()
        base.update(overrides)
        config = ModelConfig.from_dict(base)
    else:
        config = scaled_config(train_ds.b)
    if config.b_in != train_ds.b:
        from .exceptions import ConfigConflictError

        raise ConfigConflictError(f"model b_in={config.b_in} but dataset bandwidth is {train_ds.b}")
    from .model import Model

    model = Model(config, seed=args.seed)
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch, lr=args.lr, seed=args.seed,
                      loss=args.loss, regime=args.regime, b_corr=args.b_corr)
    train(model, train_ds.images, cfg, val_images=test_ds.images,
          log_path=args.log, ckpt_path=args.out_ckpt)
    print(f"wrote checkpoint {args.out_ckpt}")
    return EXIT_OK


def _cmd_reconstruct(args) -> int:
    from . import data as data_mod
    from . import eval as eval_mod
    from . import loss as loss_mod
    from .model import load_checkpoint

    model = load_checkpoint(args.ckpt).restore_model()
    ds = data_mod.load_dataset(args.data)
    n = len(ds) if not args.limit else min(args.limit, len(ds))
    images = ds.images[:n]
    rows = []
    recons = np.empty_like(images)
    for start in range(0, n, 64):
        batch = images[start : start + 64]
        recon = model.decode_arr(model.encode_arr(batch))
        recons[start : start + 64] = recon
        rots = (
            loss_mod.align_rotations(batch, recon) if args.align else [None] * batch.shape[0]
        )
        for i in range(batch.shape[0]):
            rows.append(
                (start + i, int(ds.labels[start + i]),
                 eval_mod.psnr_arr(batch[i], recon[i], rot=rots[i]))
            )
    mean_psnr = float(np.mean([r[2] for r in rows]))
    if args.report_psnr:
        with open(args.report_psnr, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "label", "psnr"])
            w.writerows(rows)
    if args.dump_grids:
        os.makedirs(args.dump_grids, exist_ok=True)
        np.save(os.path.join(args.dump_grids, "original.npy"), images)
        np.save(os.path.join(args.dump_grids, "reconstruction.npy"), recons)
    print(f"mean PSNR over {n} samples: {mean_psnr:.2f} dB (align={args.align})")
    return EXIT_OK


def _embed_dataset(model, images: np.ndarray) -> np.ndarray:
    outs = [model.encode_arr(images[s : s + 64]) for s in range(0, images.shape[0], 64)]
    return np.concatenate(outs, axis=0)


def _cmd_embed(args) -> int:
    from . import data as data_mod
    from .model import load_checkpoint

    model = load_checkpoint(args.ckpt).restore_model()
    ds = data_mod.load_dataset(args.data)
    z = _embed_dataset(model, ds.images)
    with open(args.out_csv, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "label"] + [f"z_{i}" for i in range(z.shape[1])])
        for i in range(z.shape[0]):
            w.writerow([i, int(ds.labels[i])] + [repr(v) for v in z[i]])
    print(f"wrote {args.out_csv}: {z.shape[0]} embeddings of dim {z.shape[1]}")
    return EXIT_OK


def _read_embeddings(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[:2] != ["index", "label"]:
            from .exceptions import DataFormatError

            raise DataFormatError(f"{path}: expected header index,label,z_0..., got {header[:3]}")
        rows = list(r)
    labels = np.array([int(row[1]) for row in rows])
    feats = np.array([[float(v) for v in row[2:]] for row in rows])
    return feats, labels


def _write_metrics(path, header, rows) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    else:
        print(",".join(header))
        for row in rows:
            print(",".join(str(v) for v in row))


def _cmd_cluster(args) -> int:
    from . import eval as eval_mod

    feats, labels = _read_embeddings(args.embeddings)
    if args.labels:
        _, labels = _read_embeddings(args.labels)
    assign = eval_mod.kmeans(feats, args.k, seed=args.seed)
    m = eval_mod.clustering_metrics(assign, labels)
    _write_metrics(
        args.out_metrics,
        ["k", "seed", "purity", "homogeneity", "completeness"],
        [(args.k, args.seed, f"{m['purity']:.6f}", f"{m['homogeneity']:.6f}", f"{m['completeness']:.6f}")],
    )
    return EXIT_OK


def _cmd_classify(args) -> int:
    from . import eval as eval_mod

    tr_f, tr_y = _read_embeddings(args.train_emb)
    te_f, te_y = _read_embeddings(args.test_emb)
    if args.few_shot:
        accs = eval_mod.few_shot_eval(tr_f, tr_y, te_f, te_y, seed=args.seed)
        rows = [(frac, f"{acc:.6f}") for frac, acc in accs.items()]
    else:
        rows = [(100, f"{eval_mod.linear_probe(tr_f, tr_y, te_f, te_y):.6f}")]
    _write_metrics(args.out_metrics, ["fraction_percent", "accuracy"], rows)
    return EXIT_OK


def _cmd_selftest(args) -> int:
    from . import selftest

    results = selftest.run(args.level)
    ok_all = True
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        ok_all &= ok
    print(f"{sum(ok for _, ok, _ in results)}/{len(results)} checks passed")
    return EXIT_OK if ok_all else EXIT_SELFTEST


def _cmd_bench(args) -> int:
    from . import backend, bench

    if args.threads:
        backend.set_num_threads(args.threads)
    ops = [o.strip() for o in args.op.split(",") if o.strip()]
    bws = [int(b) for b in args.bandwidths.split(",")]
    for op in ops:
        if op not in bench.OPS:
            from .exceptions import ConfigConflictError

            raise ConfigConflictError(f"unknown op {op!r}; choose from {bench.OPS}")
    backends = None if args.backend == "both" else (backend.active_backend(),)
    rows = bench.run(ops, bws, reps=args.reps, backends=backends)
    _write_metrics(
        args.out_csv,
        ["op", "bandwidth", "backend", "reps", "mean_ms", "min_ms"],
        [(op, b, be, n, f"{mean:.3f}", f"{mn:.3f}") for op, b, be, n, mean, mn in rows],
    )
    return EXIT_OK


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "reconstruct": _cmd_reconstruct,
    "embed": _cmd_embed,
    "cluster": _cmd_cluster,
    "classify": _cmd_classify,
    "selftest": _cmd_selftest,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    from .exceptions import (
        CheckpointError,
        ConfigConflictError,
        DataFormatError,
        DimensionMismatchError,
        InvalidBandwidthError,
    )

    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.cmd](args)
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ConfigConflictError, DimensionMismatchError, InvalidBandwidthError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFLICT
    except (DataFormatError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except Exception as exc:  # pragma: no cover - unexpected
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def entry() -> None:  # console_scripts hook
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
