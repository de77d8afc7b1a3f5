"""Command-line interface: convert, train, predict, evaluate, grid, benchmark.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error. A JSON
config file may supply any long-option value; explicit flags win on conflict.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import harness, svm
from .data import (
    Dataset,
    load_dataset,
    msr_meta_from_name,
    parse_msr_skeleton,
    root_relativize,
    save_dataset,
)
from .errors import (
    DomainError,
    GestrecError,
    NumericError,
    ParamError,
)
from .kernels import FAMILIES, KernelSpec

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

#: Default root joint per input format (center-of-mass-adjacent hip joint).
DEFAULT_ROOT_JOINT = {"msr": 6, "generic": 0}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise UsageError(message)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def build_parser() -> _Parser:
    parser = _Parser(prog="gestrec", description=__doc__)
    parser.add_argument("--config", help="JSON file of default option values")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("convert", help="convert raw skeleton files to the generic JSON-lines format")
    p.add_argument("--format", choices=["msr", "generic"], default="msr")
    p.add_argument("--input", required=True, help="file or directory of skeleton files")
    p.add_argument("--out", required=True)
    p.add_argument("--n-joints", type=int, default=20)
    p.add_argument("--root-joint", type=int, default=None, help="root joint index (default per format)")
    p.add_argument("--has-header", action="store_true", help="skip one leading count token per frame")
    p.add_argument("--keep-root", action="store_true", help="skip root-relativization")
    p.add_argument("--rate-hz", type=float, default=None)

    p = sub.add_parser("train", help="train a model on a full dataset")
    _add_data_opts(p)
    _add_kernel_opts(p, require_sigma=True)
    p.add_argument("--out", required=True, help="model file to write")

    p = sub.add_parser("predict", help="label sequences with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="sequences to label (labels may be null)")
    p.add_argument("--train-data", required=True, help="dataset the model was trained on")
    p.add_argument("--out", default=None, help="write one label per line (default stdout)")
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("evaluate", help="run a split protocol and report accuracies")
    _add_data_opts(p, poses_list=True)
    _add_kernel_opts(p, require_sigma=True)
    _add_protocol_opts(p)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-json", default=None)
    p.add_argument("--curve-csv", default=None, help="mean-accuracy-per-pose-count curve")

    p = sub.add_parser("grid", help="grid-search nu/sigma/C/poses by inner CV")
    _add_data_opts(p, poses_list=True)
    _add_kernel_opts(p, require_sigma=False)
    _add_protocol_opts(p)
    p.add_argument("--grid-file", default=None, help="JSON {nu:[],sigma:[],C:[],poses:[]}")
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-json", default=None, help="best configuration")

    p = sub.add_parser("benchmark", help="single-action latency per kernel family and pose count")
    _add_data_opts(p, poses_list=True)
    p.add_argument("--kernel", dest="kernels", default="euclid,rdtw", help="comma-separated families")
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--C", dest="C", type=float, default=10.0)
    p.add_argument("--corridor", type=int, default=None)
    p.add_argument("--repeats", type=int, default=30)
    p.add_argument("--out", required=True, help="latency CSV")
    return parser


def _add_data_opts(p, poses_list: bool = False):
    p.add_argument("--data", required=True, help="generic JSON-lines dataset")
    if poses_list:
        p.add_argument("--poses", type=_int_list, required=True, help="pose count(s), comma-separated")
    else:
        p.add_argument("--poses", type=int, required=True, help="pose count L")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--seed", type=int, default=0)


def _add_kernel_opts(p, require_sigma: bool):
    p.add_argument("--kernel", choices=list(FAMILIES), required=True)
    p.add_argument("--nu", type=float, default=None, help="stiffness (rdtw)")
    p.add_argument("--sigma", type=float, required=require_sigma, default=None)
    p.add_argument("--C", dest="C", type=float, default=10.0)
    p.add_argument("--corridor", type=int, default=None)


def _add_protocol_opts(p):
    p.add_argument("--protocol", choices=["subjects", "kfold", "fixed"], default="subjects")
    p.add_argument("--n-train", type=int, default=None, help="training subjects (protocol=subjects)")
    p.add_argument("--folds", type=int, default=10, help="fold count (protocol=kfold)")
    p.add_argument("--train-subjects", type=_str_list, default=None)
    p.add_argument("--test-subjects", type=_str_list, default=None)
    p.add_argument("--max-splits", type=int, default=None, help="evaluate only the first N plans")


def _apply_config_file(argv: list[str], parser: _Parser) -> list[str]:
    """Inject values from --config as defaults; explicit flags still win."""
    if "--config" not in argv:
        return argv
    at = argv.index("--config")
    if at + 1 >= len(argv):
        raise UsageError("--config needs a file path")
    path = argv[at + 1]
    try:
        with open(path, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(config, dict):
        raise UsageError("config file must hold a JSON object")
    rest = argv[:at] + argv[at + 2 :]
    injected = []
    explicit = {a.split("=", 1)[0] for a in rest if a.startswith("--")}
    for key, value in config.items():
        flag = "--" + key.replace("_", "-")
        if flag in explicit:
            continue
        if isinstance(value, bool):
            if value:
                injected.append(flag)
        elif isinstance(value, list):
            injected.extend([flag, ",".join(str(v) for v in value)])
        else:
            injected.extend([flag, str(value)])
    return rest + injected


def _build_spec(args) -> KernelSpec:
    if args.kernel == "rdtw" and args.nu is None:
        raise UsageError("--nu is required for the rdtw kernel")
    return KernelSpec(
        family=args.kernel,
        nu=args.nu if args.nu is not None else 1.0,
        sigma=args.sigma,
        corridor=args.corridor,
    )


def _make_plans(dataset: Dataset, args) -> list[harness.SplitPlan]:
    if args.protocol == "subjects":
        n_train = args.n_train
        if n_train is None:
            n_train = len(dataset.subject_set) // 2
        plans = harness.subject_splits(dataset, n_train)
    elif args.protocol == "kfold":
        plans = harness.kfold(dataset, args.folds, seed=args.seed)
    else:
        if not args.train_subjects or not args.test_subjects:
            raise UsageError("--protocol fixed needs --train-subjects and --test-subjects")
        plans = harness.fixed_split(dataset, args.train_subjects, args.test_subjects)
    if args.max_splits is not None:
        if args.max_splits < 1:
            raise UsageError("--max-splits must be >= 1")
        plans = plans[: args.max_splits]
    return plans


def cmd_convert(args) -> int:
    root = args.root_joint
    if root is None:
        root = DEFAULT_ROOT_JOINT[args.format]
    src = Path(args.input)
    if args.format == "generic":
        dataset = load_dataset(src)
        if not args.keep_root:
            dataset = Dataset.from_sequences(
                [root_relativize(s, root) for s in dataset.sequences]
            )
        save_dataset(args.out, dataset)
        print(f"wrote {dataset.n} sequences, {len(dataset.class_set)} classes, "
              f"{len(dataset.subject_set)} subjects -> {args.out}")
        return EXIT_OK
    files = sorted(src.glob("*.txt")) if src.is_dir() else [src]
    if not files:
        raise GestrecError("no sequences found")
    sequences = []
    for path in files:
        label, subject, seq_id = msr_meta_from_name(path.name)
        try:
            seq = parse_msr_skeleton(
                path.read_text(),
                n_joints=args.n_joints,
                has_header=args.has_header,
                seq_id=seq_id,
                label=label,
                subject=subject,
                rate_hz=args.rate_hz,
            )
            if not args.keep_root:
                seq = root_relativize(seq, root)
        except GestrecError as exc:
            raise type(exc)(f"{path.name}: {exc}") from None
        sequences.append(seq)
    dataset = Dataset.from_sequences(sequences)
    save_dataset(args.out, dataset)
    print(f"wrote {dataset.n} sequences, {len(dataset.class_set)} classes, "
          f"{len(dataset.subject_set)} subjects -> {args.out}")
    return EXIT_OK


def _load_nonempty(path) -> Dataset:
    dataset = load_dataset(path)
    if dataset.n == 0:
        raise GestrecError(f"no sequences found in {path}")
    return dataset


def cmd_train(args) -> int:
    dataset = _load_nonempty(args.data)
    spec = _build_spec(args)
    model, _, train_acc = harness.train_full(
        dataset, spec, args.poses, args.C, workers=args.workers, cache_dir=args.cache_dir
    )
    try:
        svm.save_model(args.out, model)
    except BaseException:
        if os.path.exists(args.out):
            os.unlink(args.out)  # never leave a partial model behind
        raise
    print(f"trained on {dataset.n} sequences; training accuracy {train_acc:.2f}%")
    print(f"model -> {args.out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = svm.load_model(args.model)
    if model.poses is None:
        raise GestrecError("model file lacks its pose count; retrain with this tool")
    train_ds = load_dataset(args.train_data)
    by_id = {s.seq_id: s for s in train_ds.sequences}
    missing = [i for i in model.train_ids if i not in by_id]
    if missing:
        raise GestrecError(f"training dataset lacks {len(missing)} model sequences "
                           f"(first: {missing[0]!r})")
    from .resample import resample_dataset

    train_fixed = resample_dataset([by_id[i] for i in model.train_ids], model.poses)
    test_ds = _load_nonempty(args.data)
    from .gram import gram_cross

    test_fixed = resample_dataset(test_ds.sequences, model.poses)
    g = gram_cross(test_fixed, train_fixed, model.spec, workers=args.workers)
    labels = svm.predict(model, g)
    text = "\n".join(labels) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    dataset = _load_nonempty(args.data)
    spec = _build_spec(args)
    plans = _make_plans(dataset, args)
    reports = []
    for poses in args.poses:
        reports.append(
            harness.run_experiment(
                dataset, plans, poses, spec, C=args.C,
                workers=args.workers, cache_dir=args.cache_dir,
            )
        )
    harness.write_split_csv(args.out_csv, reports, seed=args.seed)
    if args.out_json:
        harness.write_summary_json(args.out_json, reports, seed=args.seed)
    if args.curve_csv:
        harness.write_curve_csv(
            args.curve_csv,
            [
                {
                    "poses": r.config["poses"],
                    "family": r.config["family"],
                    "mean_train_accuracy": r.mean_train,
                    "mean_test_accuracy": r.mean_test,
                    "std_test_accuracy": r.std_test,
                }
                for r in reports
            ],
        )
    for r in reports:
        print(
            f"poses={r.config['poses']} family={r.config['family']} "
            f"train={r.mean_train:.2f}% test={r.mean_test:.2f}% "
            f"(std {r.std_test:.2f}, {len(r.splits)} splits)"
        )
    return EXIT_OK


def cmd_grid(args) -> int:
    dataset = _load_nonempty(args.data)
    plans = _make_plans(dataset, args)
    if args.grid_file:
        with open(args.grid_file, "r", encoding="utf-8") as fh:
            grids = json.load(fh)
        for key in ("nu", "sigma", "C", "poses"):
            if key not in grids:
                raise UsageError(f"grid file lacks {key!r}")
    else:
        grids = harness.default_grids(dataset, args.kernel, args.poses[0], workers=args.workers)
        grids["poses"] = args.poses
        if args.nu is not None:
            grids["nu"] = [args.nu]
        if args.sigma is not None:
            grids["sigma"] = [args.sigma]
    best, rows = harness.grid_search(
        dataset, plans, args.kernel, grids,
        corridor=args.corridor, workers=args.workers, cache_dir=args.cache_dir,
    )
    harness.write_curve_csv(args.out_csv, rows)
    if args.out_json:
        with open(args.out_json, "w", encoding="utf-8") as fh:
            json.dump(best, fh, indent=1)
    print(
        f"best: poses={best['poses']} nu={best['nu']} sigma={best['sigma']} "
        f"C={best['C']} mean_test={best['mean_test_accuracy']:.2f}%"
    )
    return EXIT_OK


def cmd_benchmark(args) -> int:
    dataset = _load_nonempty(args.data)
    families = _str_list(args.kernels)
    for family in families:
        if family not in FAMILIES:
            raise UsageError(f"unknown kernel family {family!r}")
    mid = dataset.n // 2
    samples = dataset.sequences[mid : mid + 5]
    entries = []
    for family in families:
        for poses in args.poses:
            spec = KernelSpec(family=family, nu=args.nu, sigma=args.sigma, corridor=args.corridor)
            model, fixed, _ = harness.train_full(
                dataset, spec, poses, args.C, workers=args.workers, cache_dir=args.cache_dir
            )
            entries.append((model, fixed))
    rows = harness.benchmark_latency(entries, samples, repeats=args.repeats, workers=args.workers)
    harness.write_curve_csv(args.out, rows)
    for row in rows:
        print(
            f"family={row['family']} poses={row['poses']} "
            f"median={row['median_ms']:.2f}ms p95={row['p95_ms']:.2f}ms"
        )
    return EXIT_OK


_COMMANDS = {
    "convert": cmd_convert,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "grid": cmd_grid,
    "benchmark": cmd_benchmark,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(argv, parser)
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (UsageError, ParamError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, DomainError, OverflowError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (GestrecError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
