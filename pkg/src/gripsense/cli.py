"""Command-line pipeline: generate, train, episode, active, eval.

Every run echoes its effective configuration to the output directory as
run_config.json so results are reproducible from the file plus the seed.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import dsp, inference
from .controller import (ControllerConfig, run_baseline_episode,
                         run_reactive_loop, write_episode_csv)
from .materials import MATERIAL_CLASSES, material_table
from .models.classifier import TrainConfig, train_classifier
from .models.predictor import PredictorConfig, PredictorTrainConfig, predict_batch, train_predictor
from .models import metrics as mx
from .models.registry import ModelRegistry
from .models.serialize import (load_classifier, load_predictor,
                               save_classifier, save_predictor)

CLASSIFIER_FILE = "classifier.gsm"


class UsageError(Exception):
    pass


def _derived_seed(seed: int, index: int, role: str) -> int:
    digest = hashlib.sha256(f"{seed}|{index}|{role}".encode()).digest()
    return int.from_bytes(digest[:8], "little") & (2 ** 63 - 1)


def _echo_config(args: argparse.Namespace, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {k: (str(v) if isinstance(v, Path) else v)
           for k, v in vars(args).items() if k != "func"}
    (out_dir / "run_config.json").write_text(
        json.dumps(doc, sort_keys=True, indent=1) + "\n")


def _require_dir(path: Path, what: str) -> Path:
    if not path.is_dir():
        raise UsageError(f"{what} directory does not exist: {path}")
    return path


def predictor_filename(scope: str, motion: str, material: str | None) -> str:
    if scope == "material":
        return f"predictor_material_{motion}_{material}.gsm"
    return f"predictor_default_{motion}.gsm"


def confusion_filename(motion: str) -> str:
    return f"confusion_{motion}.csv"


def write_confusion_csv(path, matrix: np.ndarray,
                        classes: tuple[str, ...] = MATERIAL_CLASSES) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["true\\predicted"] + list(classes))
        for i, name in enumerate(classes):
            w.writerow([name] + [repr(float(v)) for v in matrix[i]])


def read_confusion_csv(path) -> np.ndarray:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return np.array([[float(v) for v in row[1:]] for row in rows[1:]])


def load_models(models_dir):
    """Classifier + registry + per-motion likelihood model from a models dir."""
    models_dir = Path(models_dir)
    classifier = load_classifier(models_dir / CLASSIFIER_FILE)
    registry = ModelRegistry()
    for path in sorted(models_dir.glob("predictor_default_*.gsm")):
        model = load_predictor(path)
        registry.register_default(model.motion, model)
    for path in sorted(models_dir.glob("predictor_material_*.gsm")):
        model = load_predictor(path)
        registry.register_material(model.motion, model.material, model)
    confusions = {}
    for path in sorted(models_dir.glob("confusion_*.csv")):
        confusions[path.stem.removeprefix("confusion_")] = read_confusion_csv(path)
    likelihoods = (inference.MotionLikelihoodModel(confusions)
                   if confusions else None)
    return classifier, registry, likelihoods


def cmd_generate(args) -> int:
    out = Path(args.out)
    manifest = ds.generate_dataset(out, trials_per_cell=args.trials,
                                   base_seed=args.seed, overwrite=args.overwrite)
    try:
        manifest = ds.build_splits(manifest, seed=args.seed)
    except ds.DatasetError as e:
        print(f"note: no split assignment ({e})")
    ds.save_manifest(manifest, out)
    _echo_config(args, out)
    print(f"generated {len(manifest.trials)} trials in {out} "
          f"(base seed {args.seed})")
    return 0


def cmd_train(args) -> int:
    dataset_dir = _require_dir(Path(args.dataset), "dataset")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = ds.load_manifest(dataset_dir)
    if not manifest.splits:
        raise ds.DatasetError("dataset manifest has no splits; regenerate it")
    _echo_config(args, out)

    if args.task == "classifier":
        train_items, _ = ds.classifier_segments(dataset_dir, manifest, "train",
                                                augment=True)
        val_items, val_sources = ds.classifier_segments(dataset_dir, manifest, "val")
        cfg = TrainConfig(epochs=args.epochs, lr=args.lr, seed=args.seed)
        model, metrics = train_classifier(train_items, val_items, cfg)
        save_classifier(out / CLASSIFIER_FILE, model)
        _write_classifier_metrics(out / "metrics_classifier.csv", metrics)
        _write_confusions_from_val(out, model, manifest, val_items, val_sources)
        print(f"classifier: val accuracy {metrics.accuracy:.3f} "
              f"({len(train_items)} train / {len(val_items)} val segments)")
        return 0

    # predictor
    if args.scope == "material" and not args.material:
        raise UsageError("--scope material requires --material")
    material = args.material if args.scope == "material" else None
    X, slip, force, cell, _ = ds.predictor_windows(
        dataset_dir, manifest, "train", args.motion, material,
        window=args.window, horizon=args.horizon, stride=args.stride)
    cfg = PredictorTrainConfig(epochs=args.epochs, lr=args.lr, seed=args.seed)
    model_cfg = PredictorConfig(input_dim=X.shape[2], window=args.window,
                                horizon=args.horizon, seed=args.seed)
    model = train_predictor(X, slip, force, cell, scope=args.scope,
                            motion=args.motion, material=material,
                            cfg=cfg, model_cfg=model_cfg)
    name = predictor_filename(args.scope, args.motion, material)
    save_predictor(out / name, model)

    Xt, slip_t, force_t, cell_t, _ = ds.predictor_windows(
        dataset_dir, manifest, "test", args.motion, material,
        window=args.window, horizon=args.horizon, stride=args.stride)
    probs, force_hat, cell_hat = predict_batch(model, Xt)
    metrics = mx.Metrics(
        auc=mx.auc(probs, slip_t) if 0 < slip_t.sum() < len(slip_t) else None,
        force_mae=mx.mae(force_hat, force_t),
        cell_distance=mx.mean_cell_distance(cell_hat, cell_t))
    with open(out / f"metrics_{name.removesuffix('.gsm')}.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["auc", "force_mae", "cell_distance"])
        w.writerow([metrics.auc, metrics.force_mae, metrics.cell_distance])
    auc_txt = f"{metrics.auc:.3f}" if metrics.auc is not None else "n/a"
    print(f"predictor {name}: test AUC {auc_txt}, force MAE "
          f"{metrics.force_mae:.4f} N, cell distance {metrics.cell_distance:.2f}")
    return 0


def _write_classifier_metrics(path, metrics) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["accuracy", repr(float(metrics.accuracy))])
        w.writerow(["class", "precision", "recall"]
                   + [f"confusion_{c}" for c in MATERIAL_CLASSES])
        for i, c in enumerate(MATERIAL_CLASSES):
            w.writerow([c, repr(float(metrics.precision[i])),
                        repr(float(metrics.recall[i]))]
                       + [int(v) for v in metrics.confusion[i]])


def _write_confusions_from_val(out: Path, model, manifest, val_items,
                               val_sources) -> None:
    """Estimate per-motion confusion matrices on the validation segments."""
    from .models.classifier import classify
    index = {c: i for i, c in enumerate(model.cfg.classes)}
    obs = []
    for (frames, label), source in zip(val_items, val_sources):
        motion = manifest.entry(source).motion["kind"]
        pred = int(np.argmax(classify(model, frames)))
        obs.append((motion, index[label], pred))
    L = inference.estimate_confusions(obs, len(model.cfg.classes))
    for motion, C in L.confusions.items():
        write_confusion_csv(out / confusion_filename(motion), C,
                            model.cfg.classes)


def cmd_episode(args) -> int:
    models_dir = _require_dir(Path(args.models), "models")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _echo_config(args, out)
    table = material_table()
    if args.material not in table:
        raise UsageError(f"unknown material {args.material!r}")
    material = table[args.material]
    cfg = ControllerConfig()

    fixed_torque = None
    if args.policy != "reactive":
        if not args.policy.startswith("fixed:"):
            raise UsageError(f"policy must be reactive or fixed:<torque>, "
                             f"got {args.policy!r}")
        fixed_torque = float(args.policy.split(":", 1)[1])
        if not 0.0 <= fixed_torque <= cfg.max_torque:
            raise UsageError(f"fixed torque {fixed_torque} outside "
                             f"[0, {cfg.max_torque}] Nm")
    else:
        classifier, registry, _ = load_models(models_dir)
        if args.motion not in registry.default_models:
            raise UsageError(f"no default predictor for motion {args.motion!r} "
                             f"in {models_dir}")

    rows = []
    for i in range(args.episodes):
        profile_rng = np.random.default_rng(_derived_seed(args.seed, i, "profile"))
        profile = ds.sample_trial_profile(args.motion, profile_rng)
        sim_seed = _derived_seed(args.seed, i, "sim")
        if fixed_torque is None:
            log = run_reactive_loop(material, profile, classifier, registry,
                                    cfg, sim_seed)
        else:
            log = run_baseline_episode(material, profile, fixed_torque, sim_seed)
        tag = args.policy.replace(":", "_")
        write_episode_csv(log, out / f"episode_{tag}_{i:03d}.csv")
        rows.append([i, args.policy, repr(log.mean_torque),
                     repr(float(log.torque_cmd.min())),
                     repr(float(log.torque_cmd.max())),
                     int(log.dropped_any),
                     "" if log.switch_time_s is None else repr(log.switch_time_s),
                     log.active_material[-1] if log.active_material else ""])
    with open(out / "summary.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["episode", "policy", "mean_torque", "min_torque",
                    "max_torque", "dropped", "switch_time_s", "final_material"])
        w.writerows(rows)
    mean_all = float(np.mean([float(r[2]) for r in rows]))
    drops = sum(int(r[5]) for r in rows)
    print(f"{args.episodes} episodes ({args.policy}): mean torque "
          f"{mean_all:.3f} Nm, drops {drops}")
    if args.summary:
        for r in rows:
            print(f"  episode {r[0]:>3}: mean {float(r[2]):.3f} Nm "
                  f"dropped={r[5]} material={r[7] or '-'}")
    return 0


def cmd_active(args) -> int:
    models_dir = _require_dir(Path(args.models), "models")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _echo_config(args, out)
    table = material_table()
    if args.material not in table:
        raise UsageError(f"unknown material {args.material!r}")
    classifier, _, likelihoods = load_models(models_dir)
    if likelihoods is None:
        raise UsageError(f"no confusion_<motion>.csv files in {models_dir}; "
                         "train the classifier first")

    rows = []
    for i in range(args.seeds):
        seed = _derived_seed(args.seed, i, "active")
        logs = {}
        for selector in ("eig", "random"):
            log = inference.run_active_loop(
                table[args.material], classifier, likelihoods,
                args.confidence, args.max_segments, seed, selector)
            inference.write_active_csv(log, out / f"active_{selector}_{i:03d}.csv")
            logs[selector] = log
        rows.append([i, seed,
                     logs["eig"].segments_used, int(logs["eig"].reached_confidence),
                     logs["random"].segments_used,
                     int(logs["random"].reached_confidence)])
    with open(out / "summary.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["run", "seed", "eig_segments", "eig_reached",
                    "random_segments", "random_reached"])
        w.writerows(rows)
    med_eig = float(np.median([r[2] for r in rows]))
    med_rand = float(np.median([r[4] for r in rows]))
    print(f"active inference over {args.seeds} seeds: median segments "
          f"eig {med_eig:.1f} vs random {med_rand:.1f}")
    if args.summary:
        for r in rows:
            print(f"  run {r[0]:>3}: eig {r[2]} (reached={r[3]}) "
                  f"random {r[4]} (reached={r[5]})")
    return 0


def cmd_eval(args) -> int:
    dataset_dir = _require_dir(Path(args.dataset), "dataset")
    models_dir = _require_dir(Path(args.models), "models")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _echo_config(args, out)
    manifest = ds.load_manifest(dataset_dir)
    classifier, registry, _ = load_models(models_dir)

    from .models.classifier import classify
    test_items, _ = ds.classifier_segments(dataset_dir, manifest, "test")
    index = {c: i for i, c in enumerate(classifier.cfg.classes)}
    pred = np.array([int(np.argmax(classify(classifier, frames)))
                     for frames, _ in test_items])
    truth = np.array([index[label] for _, label in test_items])
    acc = mx.accuracy(pred, truth)
    lines = [["classifier_accuracy", repr(float(acc))]]
    print(f"classifier test accuracy: {acc:.3f} over {len(test_items)} segments")

    for motion, model in sorted(registry.default_models.items()):
        Xt, slip_t, force_t, cell_t, _ = ds.predictor_windows(
            dataset_dir, manifest, "test", motion,
            window=model.cfg.window, horizon=model.cfg.horizon)
        probs, force_hat, cell_hat = predict_batch(model, Xt)
        auc = mx.auc(probs, slip_t) if 0 < slip_t.sum() < len(slip_t) else float("nan")
        fmae = mx.mae(force_hat, force_t)
        cdist = mx.mean_cell_distance(cell_hat, cell_t)
        lines += [[f"{motion}_auc", repr(float(auc))],
                  [f"{motion}_force_mae", repr(float(fmae))],
                  [f"{motion}_cell_distance", repr(float(cdist))]]
        print(f"default predictor [{motion}]: AUC {auc:.3f}, "
              f"force MAE {fmae:.4f} N, cell distance {cdist:.2f}")
    with open(out / "eval.csv", "w", newline="") as f:
        csv.writer(f).writerows(lines)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gripsense",
        description="audio + tactile object-property estimation and "
                    "reactive grip control on a deterministic simulator")
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON file with default argument values")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="run the data-collection protocol")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=30,
                   help="trials per (motion, material) cell")
    p.add_argument("--overwrite", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a model on a generated dataset")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="models directory")
    p.add_argument("--task", choices=("classifier", "predictor"), required=True)
    p.add_argument("--scope", choices=("default", "material"), default="default")
    p.add_argument("--motion", choices=ds.MOTIONS, default="shaking")
    p.add_argument("--material", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--window", type=int, default=20)
    p.add_argument("--horizon", type=int, default=10)
    p.add_argument("--stride", type=int, default=5)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("episode", help="run closed-loop grip episodes")
    p.add_argument("--models", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--material", required=True)
    p.add_argument("--motion", choices=ds.MOTIONS, default="shaking")
    p.add_argument("--policy", default="reactive",
                   help="reactive or fixed:<torque Nm>")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--episodes", type=int, default=1)
    p.add_argument("--summary", action="store_true")
    p.set_defaults(func=cmd_episode)

    p = sub.add_parser("active", help="active-inference material identification")
    p.add_argument("--models", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--material", required=True, help="true material in the sim")
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--max-segments", type=int, default=12)
    p.add_argument("--seeds", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--summary", action="store_true")
    p.set_defaults(func=cmd_active)

    p = sub.add_parser("eval", help="evaluate saved models on the test split")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--models", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--summary", action="store_true")
    p.set_defaults(func=cmd_eval)
    parser.command_parsers = dict(sub.choices)
    return parser


def _apply_train_defaults(args) -> None:
    if args.command == "train":
        if args.epochs is None:
            if args.task == "classifier":
                args.epochs = 30
            else:
                # material scope sees a fifth of the windows; more passes
                # keep the gradient-step count comparable to the default's
                args.epochs = 24 if args.scope == "material" else 8
        if args.lr is None:
            args.lr = 0.01 if args.task == "classifier" else 0.05


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        try:
            overrides = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            print(f"error: cannot read config {args.config}: {e}", file=sys.stderr)
            return 2
        unknown = sorted(set(overrides) - set(vars(args)))
        if unknown:
            print(f"error: config keys not recognized for "
                  f"'{args.command}': {', '.join(unknown)}", file=sys.stderr)
            return 2
        # defaults must land on the subcommand's own parser: subparsers
        # parse into a fresh namespace, so top-level set_defaults is ignored
        parser.command_parsers[args.command].set_defaults(**overrides)
        args = parser.parse_args(argv)
    _apply_train_defaults(args)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except (ds.DatasetError, OSError, ValueError, KeyError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
