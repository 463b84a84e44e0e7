"""Command-line entry point: ``spectral-gate <command> [options]``.

Exit codes: 0 success, 2 usage, 3 I/O, 4 verification failure.  Failures
print one line ``spectral-gate: error[<kind>]: <reason>`` to stderr.
"""
from __future__ import annotations

import argparse
import configparser
import datetime
import io
import json
import math
import sys
from pathlib import Path
from typing import Optional

import numpy as np

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_VERIFY = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, kind: str, message: str, code: int):
        super().__init__(message)
        self.kind, self.code = kind, code


def usage_error(msg: str) -> CliError:
    return CliError("usage", msg, EXIT_USAGE)


def io_error(msg: str) -> CliError:
    return CliError("io", msg, EXIT_IO)


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

DEFAULTS = {
    "run": {"out": "", "seed": "0"},
    "data": {"source": "auto", "root": "", "n_train": "2000", "n_test": "500", "classes": "4", "size": "32"},
    "model": {"family": "gmnet", "scale": "s1", "c1": "", "depths": "", "ratios": "", "activation": "relu6",
              "glu": "simple", "mixer": "dw", "mlp": "gate", "variant": "baseline", "gate": "relu6",
              "width": "64", "width_mult": "1.0", "cifar": "true", "dtype": "float32"},
    "recipe": {"optimizer": "sgd", "base_lr": "0.1", "momentum": "0.9", "weight_decay": "5e-4",
               "batch_size": "128", "epochs": "100", "warmup_epochs": "0", "label_smoothing": "0.0",
               "crop_pad": "4", "flip": "true", "radii": "0,6,12,18,inf", "eval_cut": "10",
               "checkpoint_every": "1", "train_subset": "", "test_subset": ""},
    "ablation": {"seeds": "0,1,2", "tolerance": "0.03"},
}


def parse_list(text: str, cast=float) -> list:
    items = [t.strip() for t in str(text).replace(";", ",").split(",") if t.strip()]
    try:
        return [cast(t) for t in items]
    except ValueError:
        raise usage_error(f"cannot parse list {text!r}") from None


def parse_radii(text: str) -> list[float]:
    from .spectral import normalize_radii
    vals = parse_list(text)
    if not vals:
        raise usage_error("radii list is empty")
    try:
        return normalize_radii(vals)
    except ValueError as exc:
        raise usage_error(str(exc)) from None


def load_config(path: Optional[str], overrides: list[str]) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser(interpolation=None)
    cfg.read_dict(DEFAULTS)
    if path:
        if not Path(path).exists():
            raise io_error(f"{path}: config file not found")
        try:
            cfg.read(path)
        except configparser.Error as exc:
            raise usage_error(f"{path}: {exc}".replace("\n", " ")) from None
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise usage_error(f"override {item!r} must look like section.key=value")
        key, value = item.split("=", 1)
        section, name = key.split(".", 1)
        if not cfg.has_section(section):
            cfg.add_section(section)
        cfg.set(section, name.strip(), value.strip())
    return cfg


def echo_config(cfg: configparser.ConfigParser, out: Path, command: str) -> None:
    buf = io.StringIO()
    buf.write(f"# resolved configuration for: spectral-gate {command}\n")
    cfg.write(buf)
    (out / "resolved_config.ini").write_text(buf.getvalue())


def _opt_int(text: str) -> Optional[int]:
    return int(text) if str(text).strip() else None


def _bool(text: str) -> bool:
    return str(text).strip().lower() in ("1", "true", "yes", "on")


def out_dir(cfg: configparser.ConfigParser, flag: Optional[str]) -> Path:
    path = flag or cfg.get("run", "out") or str(Path("runs") / datetime.datetime.now().strftime("%Y%m%d-%H%M%S"))
    cfg.set("run", "out", path)
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise io_error(f"{p}: {exc.strerror}") from None
    return p


def model_config(cfg, num_classes: int):
    from .models import GmNetConfig, ModelConfig, gmnet_config
    m = cfg["model"]
    try:
        family = m.get("family")
        cifar = _bool(m.get("cifar"))
        if family == "gmnet":
            over = dict(num_classes=num_classes, stem_stride=1 if cifar else 2, activation=m.get("activation"),
                        glu=m.get("glu"), mixer=m.get("mixer"), mlp=m.get("mlp"),
                        input_resolution=32 if cifar else 224)
            g = gmnet_config(m.get("scale"), **over)
            if m.get("c1"):
                g.c1 = int(m.get("c1"))
            if m.get("depths"):
                g.depths = parse_list(m.get("depths"), int)
            if m.get("ratios"):
                g.ratios = parse_list(m.get("ratios"))
            g = GmNetConfig(**{k: getattr(g, k) for k in g.__dataclass_fields__})
            return ModelConfig(family="gmnet", gmnet=g, num_classes=num_classes, cifar=cifar, dtype=m.get("dtype"))
        gate = m.get("gate")
        return ModelConfig(family=family, num_classes=num_classes, variant=m.get("variant"),
                           activation=m.get("activation") if family == "resnet18" else "relu",
                           gate=None if gate.lower() in ("", "none", "stock") else gate,
                           width=int(m.get("width")), width_mult=float(m.get("width_mult")),
                           cifar=cifar, dtype=m.get("dtype"))
    except (ValueError, TypeError) as exc:
        raise usage_error(f"model config: {exc}") from None


def recipe_from(cfg):
    from .harness.train import TrainRecipe
    r = cfg["recipe"]
    try:
        return TrainRecipe(
            optimizer=r.get("optimizer"), base_lr=float(r.get("base_lr")), momentum=float(r.get("momentum")),
            weight_decay=float(r.get("weight_decay")), batch_size=int(r.get("batch_size")),
            epochs=int(r.get("epochs")), warmup_epochs=int(r.get("warmup_epochs")),
            label_smoothing=float(r.get("label_smoothing")), crop_pad=int(r.get("crop_pad")),
            flip=_bool(r.get("flip")), seed=int(cfg.get("run", "seed")), radii=parse_radii(r.get("radii")),
            eval_cut=float(r.get("eval_cut")) if r.get("eval_cut").strip() else None,
            checkpoint_every=int(r.get("checkpoint_every")), train_subset=_opt_int(r.get("train_subset")),
            test_subset=_opt_int(r.get("test_subset")))
    except (ValueError, TypeError) as exc:
        raise usage_error(f"recipe: {exc}") from None


def load_data(cfg, log=print):
    """CIFAR-10 when requested or found (source=auto), else the synthetic band task."""
    from .harness.data import find_cifar_dir, load_cifar10, synth_splits
    d = cfg["data"]
    source = d.get("source").lower()
    if source not in ("auto", "cifar", "synthetic"):
        raise usage_error(f"data.source must be auto, cifar or synthetic, got {source!r}")
    root = d.get("root") or None
    if source == "cifar" or (source == "auto" and find_cifar_dir(root) is not None):
        try:
            splits = load_cifar10(root)
        except (FileNotFoundError, ValueError) as exc:
            raise io_error(str(exc)) from None
        d["source"] = "cifar"
        log("data: CIFAR-10")
        return splits
    d["source"] = "synthetic"
    seed = int(cfg.get("run", "seed"))
    log(f"data: synthetic frequency bands (seed {seed})")
    return synth_splits(seed, int(d.get("n_train")), int(d.get("n_test")), int(d.get("classes")),
                        int(d.get("size")))


def load_checkpoint_model(path: str):
    from .checkpoint import CheckpointError, checkpoint_load
    if not Path(path).exists():
        raise io_error(f"{path}: checkpoint not found")
    try:
        return checkpoint_load(path)
    except (CheckpointError, FileNotFoundError, OSError) as exc:
        raise io_error(f"{path}: {exc}") from None


# --------------------------------------------------------------------------
# image I/O
# --------------------------------------------------------------------------


def read_image(path: str) -> np.ndarray:
    """RGB image as float32 ``(3, H, W)`` in [0, 1]."""
    from PIL import Image, UnidentifiedImageError
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    except FileNotFoundError:
        raise usage_error(f"{path}: no such image") from None
    except (UnidentifiedImageError, OSError) as exc:
        raise usage_error(f"{path}: unreadable image ({exc})") from None
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def write_image(path: Path, chw: np.ndarray, offset: float = 0.0) -> None:
    from PIL import Image
    arr = np.clip(chw.transpose(1, 2, 0) + offset, 0.0, 1.0)
    Image.fromarray(np.round(arr * 255).astype(np.uint8), "RGB").save(path)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_decompose(args, cfg) -> int:
    from .spectral import band_split
    radii = parse_radii(args.radii)
    img = read_image(args.input)
    out = out_dir(cfg, args.out)
    split = band_split(img, radii)
    for i, comp in enumerate(split.components):
        np.save(out / f"band_{i}.npy", comp)
        write_image(out / f"band_{i}.png", comp, 0.0 if i == 0 else 0.5)
    residual = float(np.max(np.abs(split.reconstruct() - img)))
    edges = ", ".join(f"[{lo:g}, {hi:g})" for lo, hi in split.edges)
    (out / "residual.txt").write_text(f"max_abs_residual {residual:.6e}\nbands {edges}\n")
    cfg.set("run", "input", args.input)
    cfg.set("recipe", "radii", ",".join(f"{r:g}" for r in radii))
    echo_config(cfg, out, "decompose")
    print(f"wrote {len(split.components)} bands to {out}; max_abs_residual {residual:.3e}")
    return EXIT_OK


def cmd_train(args, cfg) -> int:
    from .harness.train import TrainingDiverged, train
    from .models import build_model
    if args.epochs is not None:
        cfg.set("recipe", "epochs", str(args.epochs))
    if args.seed is not None:
        cfg.set("run", "seed", str(args.seed))
    out = out_dir(cfg, args.out)
    data = load_data(cfg)
    recipe = recipe_from(cfg)
    mcfg = model_config(cfg, data.train.num_classes)
    echo_config(cfg, out, "train")
    model = build_model(mcfg, seed=recipe.seed)

    def show(rec):
        bands = " ".join(f"{a:.3f}" for a in rec.band_accuracy)
        print(f"epoch {rec.epoch} loss {rec.loss:.4f} acc {rec.accuracy:.4f} bands {bands} lr {rec.lr:.3g}")

    try:
        train(model, recipe, data, out, mcfg, on_epoch=show)
    except TrainingDiverged as exc:
        raise CliError("diverged", str(exc), EXIT_VERIFY) from None
    print(f"metrics: {out / 'metrics.jsonl'}\ncheckpoint: {out / 'checkpoint.gmck'}")
    return EXIT_OK


def cmd_eval_freq(args, cfg) -> int:
    from .harness.evaluate import FrequencyEvalSet, eval_frequency
    if args.radii:
        cfg.set("recipe", "radii", args.radii)
    radii = parse_radii(cfg.get("recipe", "radii"))
    model = load_checkpoint_model(args.checkpoint)
    out = out_dir(cfg, args.out)
    data = load_data(cfg)
    test = data.test.subset(_opt_int(cfg.get("recipe", "test_subset")), int(cfg.get("run", "seed")))
    res = eval_frequency(model, FrequencyEvalSet.build(test, radii))
    record = {"accuracy": res.accuracy, "loss": res.loss, "band_accuracy": res.band_accuracy,
              "band_r_low": [lo for lo, _ in res.edges],
              "band_r_high": [None if math.isinf(hi) else hi for _, hi in res.edges]}
    (out / "eval_freq.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    cfg.set("run", "checkpoint", args.checkpoint)
    echo_config(cfg, out, "eval-freq")
    print(f"raw {res.accuracy:.4f}")
    for (lo, hi), acc in zip(res.edges, res.band_accuracy):
        print(f"band [{lo:g}, {hi:g}) {acc:.4f}")
    return EXIT_OK


def cmd_ablate(args, cfg) -> int:
    from .harness.ablation import SUITES, AblationConfig, BudgetMismatch, run_ablation
    if args.suite not in SUITES:
        raise usage_error(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
    out = out_dir(cfg, args.out)
    data = load_data(cfg)
    mcfg = model_config(cfg, data.train.num_classes)
    if mcfg.family != "gmnet":
        raise usage_error("ablation suites operate on the gmnet family")
    acfg = AblationConfig(args.suite, mcfg.gmnet, recipe_from(cfg),
                          seeds=parse_list(cfg.get("ablation", "seeds"), int),
                          tolerance=float(cfg.get("ablation", "tolerance")))
    cfg.set("run", "suite", args.suite)
    echo_config(cfg, out, "ablate")
    try:
        run_ablation(acfg, data, out / "ablation.csv", log=print)
    except BudgetMismatch as exc:
        raise CliError("budget", str(exc), EXIT_VERIFY) from None
    print(f"wrote {out / 'ablation.csv'}")
    return EXIT_OK


def cmd_analyze_kernels(args, cfg) -> int:
    from .autodiff.nn import Conv2d
    from .spectral import bandwidth_histograms, write_metric_csv
    model = load_checkpoint_model(args.checkpoint)
    out = out_dir(cfg, args.out)
    named = []
    for name, mod in model.named_modules():
        if isinstance(mod, Conv2d) and mod.kernel_size > 1:
            parts = name.split(".")
            stage = parts[1] if parts[0] in ("stages", "layers") and len(parts) > 1 else parts[0]
            named.append((name, stage, mod.weight.data))
    rows = bandwidth_histograms(named, bins=args.bins)
    write_metric_csv(rows, out / "kernel_bandwidth.csv")
    cfg.set("run", "checkpoint", args.checkpoint)
    echo_config(cfg, out, "analyze-kernels")
    print(f"{len(named)} layers -> {out / 'kernel_bandwidth.csv'}")
    return EXIT_OK


def cmd_spectra(args, cfg) -> int:
    from .harness.probe import MissingTapError, spectral_probe
    model = load_checkpoint_model(args.checkpoint)
    out = out_dir(cfg, args.out)
    data = load_data(cfg)
    test = data.test
    probe = test.normalize(test.images[:args.probe_size])
    try:
        report = spectral_probe(model, probe)
    except MissingTapError as exc:
        raise usage_error(str(exc).strip("'\"")) from None
    report.write_csv(out / "spectra.csv")
    cfg.set("run", "checkpoint", args.checkpoint)
    echo_config(cfg, out, "spectra")
    f, g = report.stage_means("ratio_f"), report.stage_means("ratio_g")
    for s in f:
        print(f"stage {s}: f {f[s]:.4f} -> g {g[s]:.4f}")
    return EXIT_OK


def cmd_verify(args, cfg) -> int:
    from . import verify
    runner = verify.SUITES.get(args.suite)
    if runner is None:
        raise usage_error(f"unknown suite {args.suite!r}; choose from {', '.join(verify.SUITES)}")
    rows = runner()
    for row in rows:
        print(row.line())
    failed = [r for r in rows if not r.passed]
    print(f"{args.suite}: {'PASS' if not failed else 'FAIL'} ({len(rows) - len(failed)}/{len(rows)})")
    if failed:
        raise CliError("verify", f"{len(failed)} check(s) failed in suite {args.suite}", EXIT_VERIFY)
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spectral-gate", description="Frequency-domain analysis of gated networks.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", help="key=value config file with [sections]")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value (repeatable)")
        if out:
            sp.add_argument("--out", help="output directory (default runs/<timestamp>)")

    sp = sub.add_parser("decompose", help="split an image into radial frequency bands")
    sp.add_argument("--input", required=True)
    sp.add_argument("--radii", required=True, help='comma list, e.g. "0,6,12,18" or "10"')
    common(sp)

    sp = sub.add_parser("train", help="train a model and log per-band accuracy")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--seed", type=int)
    common(sp)

    sp = sub.add_parser("eval-freq", help="per-band accuracy of a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--radii")
    common(sp)

    sp = sub.add_parser("ablate", help="run an ablation suite")
    sp.add_argument("--suite", required=True)
    common(sp)

    sp = sub.add_parser("analyze-kernels", help="bandwidth histograms of spatial conv kernels")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--bins", type=int, default=20)
    common(sp)

    sp = sub.add_parser("spectra", help="high/low energy ratios before and after each gate")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--probe-size", type=int, default=64)
    common(sp)

    sp = sub.add_parser("verify", help="numerical self-checks")
    sp.add_argument("--suite", required=True, help="conv_theorem, decay, gradcheck or counts")
    common(sp, out=False)
    return p


COMMANDS = {"decompose": cmd_decompose, "train": cmd_train, "eval-freq": cmd_eval_freq, "ablate": cmd_ablate,
            "analyze-kernels": cmd_analyze_kernels, "spectra": cmd_spectra, "verify": cmd_verify}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config, args.set)
        return COMMANDS[args.command](args, cfg)
    except CliError as exc:
        print(f"spectral-gate: error[{exc.kind}]: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"spectral-gate: error[io]: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
