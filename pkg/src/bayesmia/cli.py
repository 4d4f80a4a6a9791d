"""Command line interface: generate, train, infer, experiment."""

from __future__ import annotations

import argparse
import json
import platform
import sys
from dataclasses import replace

from . import __version__, _jsonio
from .bayes import Prior, load_likelihood, posterior_from_model
from .harness import TEST_SETS, ExperimentConfig, run_replicates, write_outputs
from .mlp import TrainConfig, load_params, save_params, train
from .synthgen import DatasetSpec, concat, generate_dataset, generate_subsets, read_csv, write_csv


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _load_experiment_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_dict(_jsonio.load(path)) if path else ExperimentConfig()


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "id", None) is not None:
        updates["experiment_id"] = args.id
    if getattr(args, "prior", None) is not None:
        updates["prior_member"] = args.prior
    train_updates = {
        k: v
        for k, v in (
            ("epochs", getattr(args, "epochs", None)),
            ("learning_rate", getattr(args, "lr", None)),
            ("fine_tune_epochs", getattr(args, "fine_tune_epochs", None)),
        )
        if v is not None
    }
    if train_updates:
        updates["train"] = replace(cfg.train, **train_updates)
    return replace(cfg, **updates) if updates else cfg


def cmd_generate(args) -> int:
    data = _jsonio.load(args.spec)
    if args.seed is not None:
        data["seed"] = args.seed
    spec = DatasetSpec.from_dict(data)
    if args.subsets is not None:
        dataset = concat(generate_subsets(spec, args.subsets))
    else:
        dataset = generate_dataset(spec)
    write_csv(dataset, args.out)
    return 0


def cmd_train(args) -> int:
    cfg = _apply_overrides(_load_experiment_config(args.config), args)
    tcfg = cfg.train_config()
    if args.data:
        pool = read_csv(args.data)
    else:
        pool = concat(generate_subsets(cfg.spec_for("member"), cfg.n_subsets))
    save_params(train(pool, tcfg), args.out)
    return 0


def cmd_infer(args) -> int:
    model = load_params(args.model)
    lik = load_likelihood(args.likelihood)
    dataset = read_csv(args.data)
    tcfg = TrainConfig(
        learning_rate=args.lr if args.lr is not None else TrainConfig.learning_rate,
        fine_tune_epochs=(
            args.fine_tune_epochs if args.fine_tune_epochs is not None
            else TrainConfig.fine_tune_epochs
        ),
    )
    result = posterior_from_model(model, dataset, lik, Prior(args.prior), tcfg)
    sys.stdout.write(_jsonio.dumps(result.to_dict()))
    return 0


def cmd_experiment(args) -> int:
    cfg = _apply_overrides(_load_experiment_config(args.config), args)
    reports, medians = run_replicates(cfg, args.seeds)
    paths = write_outputs(reports, medians if args.seeds > 1 else None, args.out)
    runtime = sum(r.runtime_seconds for r in reports)
    _jsonio.dump(
        {
            "version": __version__,
            "python": platform.python_version(),
            "runtime_seconds": runtime,
            "seeds": [r.config.seed for r in reports],
        },
        paths["report"].with_name("run_info.json"),
    )
    summary = {name: medians[name] for name in TEST_SETS}
    print(json.dumps({"experiment": cfg.experiment_id, "median_posteriors": summary,
                      "out": str(args.out)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bayesmia", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic dataset to CSV")
    g.add_argument("--spec", required=True, help="DatasetSpec JSON file")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--subsets", type=int, help="concatenate this many derived-seed subsets")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train the classifier on the member pool")
    t.add_argument("--config", help="ExperimentConfig JSON (partial allowed)")
    t.add_argument("--out", required=True)
    t.add_argument("--data", help="train on this CSV instead of the generated member pool")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.set_defaults(func=cmd_train)

    i = sub.add_parser("infer", help="posterior membership probability of a CSV dataset")
    i.add_argument("--model", required=True)
    i.add_argument("--likelihood", required=True)
    i.add_argument("--data", required=True)
    i.add_argument("--prior", type=float, default=0.5)
    i.add_argument("--lr", type=float)
    i.add_argument("--fine-tune-epochs", type=int)
    i.set_defaults(func=cmd_infer)

    e = sub.add_parser("experiment", help="run experiment 1 or 2 end to end")
    e.add_argument("--config", help="ExperimentConfig JSON (partial allowed)")
    e.add_argument("--id", type=int, choices=(1, 2))
    e.add_argument("--seed", type=int)
    e.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds")
    e.add_argument("--out", required=True)
    e.add_argument("--prior", type=float)
    e.add_argument("--epochs", type=int)
    e.add_argument("--lr", type=float)
    e.add_argument("--fine-tune-epochs", type=int)
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except Exception as exc:  # every failure becomes a JSON error object
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
