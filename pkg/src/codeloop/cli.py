"""Command-line entry points wiring the engine into reproducible runs.

Subcommands: collect, train-verifier, relabel, run, eval, lab, make-toy.
Every command validates its config up front, writes versioned artifacts plus
a manifest (config hash, seed, artifact checksums) into the output directory,
and refuses to rerun over a completed manifest with the same config hash
unless --force is given.

Exit codes: 0 success, 1 run failure (including manifest refusal), 2 config
error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys

from . import config as cfgmod
from .config import ConfigError
from .orchestrate import run_expert_iteration, evaluate
from .problems import load_problems
from .recoverability import build_toy_mdp, exact_advantage, regret_sweep
from .rollouts import (
    AggDataset,
    RelabelWeights,
    aggregate,
    collect_rollouts,
    emit_ft_dataset,
    load_rollouts,
    relabel,
    save_rollouts,
)
from .toycorpus import write_toy_setup
from .verifier import VerifierParams, train_verifier

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUN_FAILURE = 1
EXIT_CONFIG_ERROR = 2

MANIFEST_NAME = "manifest.json"


class ManifestRefusal(RuntimeError):
    pass


def _file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def _check_manifest(output_dir: str, command: str, conf_hash: str, force: bool) -> None:
    path = os.path.join(output_dir, MANIFEST_NAME)
    if not os.path.exists(path):
        return
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if (
        manifest.get("completed")
        and manifest.get("config_hash") == conf_hash
        and manifest.get("command") == command
        and not force
    ):
        raise ManifestRefusal(
            f"{output_dir}: a completed {command} run with config hash {conf_hash} "
            "already exists; pass --force to rerun"
        )


def _write_manifest(
    output_dir: str, command: str, conf_hash: str, seed: int, artifacts: list[str]
) -> None:
    manifest = {
        "command": command,
        "config_hash": conf_hash,
        "seed": seed,
        "artifacts": [
            {"path": os.path.relpath(a, output_dir), "sha256": _file_sha256(a)}
            for a in artifacts
        ],
        "completed": True,
    }
    path = os.path.join(output_dir, MANIFEST_NAME)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)  # the manifest appears only once the run completed


def stamp_artifact(path: str, conf_hash: str) -> None:
    """Record the config hash inside an artifact file.

    Line-delimited artifacts get the hash added to their header line; plain
    JSON artifacts get a top-level key. Loaders ignore the extra field.
    """
    with open(path, "r", encoding="utf-8") as fh:
        content = fh.read()
    if path.endswith(".jsonl"):
        head, _, rest = content.partition("\n")
        header = json.loads(head)
        header["config_hash"] = conf_hash
        content = json.dumps(header) + "\n" + rest
    else:
        doc = json.loads(content)
        doc["config_hash"] = conf_hash
        content = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(content)


def _load_corpora(doc: dict):
    train = load_problems(doc["corpus"])
    validation = (
        load_problems(doc["validation_corpus"])
        if doc.get("validation_corpus")
        else train
    )
    return train, validation


def _maybe_verifier(doc: dict) -> VerifierParams | None:
    path = doc.get("verifier", {}).get("params_path")
    return VerifierParams.load(path) if path else None


# ---------------------------------------------------------------------------
# subcommands (each returns the list of artifact paths it wrote)


def cmd_collect(doc: dict, output_dir: str, workers: int) -> list[str]:
    problems, _ = _load_corpora(doc)
    coll = doc.get("collection", {})
    strategy = cfgmod.collection_strategy(doc)
    verifier = _maybe_verifier(doc)
    records = collect_rollouts(
        problems,
        cfgmod.generator_config(doc),
        cfgmod.env_config(doc),
        strategy,
        coll.get("candidates_per_turn", 5),
        verifier=verifier,
        workers=workers,
    )
    path = os.path.join(output_dir, "rollouts.jsonl")
    save_rollouts(records, path)
    print(f"collected {len(records)} rollout records over {len(problems)} problems -> {path}")
    return [path]


def _dataset_from_rollouts(doc: dict) -> AggDataset:
    coll = doc.get("collection", {})
    rollouts_path = coll.get("rollouts_path")
    if not rollouts_path:
        raise ConfigError("config field $.collection.rollouts_path: required by this command")
    problems, _ = _load_corpora(doc)
    records = load_rollouts(rollouts_path)
    return aggregate(AggDataset(), records, problems)


def cmd_train_verifier(doc: dict, output_dir: str, workers: int) -> list[str]:
    dataset = _dataset_from_rollouts(doc)
    params = train_verifier(dataset, cfgmod.train_config(doc))
    path = os.path.join(output_dir, "verifier.json")
    params.save(path)
    print(
        f"trained {params.loss_kind} verifier on {len(dataset.records)} records; "
        f"final loss {params.loss_trace[-1]:.4f} -> {path}"
    )
    return [path]


def cmd_relabel(doc: dict, output_dir: str, workers: int) -> list[str]:
    dataset = _dataset_from_rollouts(doc)
    it = doc.get("iteration", {})
    weights = RelabelWeights(
        oracle_weight=it.get("oracle_weight", 1.0),
        learned_weight=it.get("learned_weight", 0.1),
    )
    verifier = _maybe_verifier(doc)
    if weights.learned_weight > 0 and verifier is None:
        raise ConfigError(
            "config field $.verifier.params_path: required when learned_weight > 0"
        )
    records = relabel(dataset, weights, verifier)
    path = os.path.join(output_dir, "ft_dataset.jsonl")
    emit_ft_dataset(records, dataset.problems, path)
    print(f"relabeled {len(records)} (state, target) pairs -> {path}")
    return [path]


def cmd_run(doc: dict, output_dir: str, workers: int) -> list[str]:
    train, validation = _load_corpora(doc)
    artifacts, best = run_expert_iteration(
        train,
        validation,
        cfgmod.generator_config(doc),
        cfgmod.env_config(doc),
        cfgmod.iteration_config(doc),
        output_dir,
        workers=workers,
    )
    paths = []
    for art in artifacts:
        paths.extend(
            [
                art.rollouts_path,
                art.ft_dataset_path,
                os.path.join(output_dir, f"iteration-{art.iteration:02d}", "verifier.json"),
                os.path.join(
                    output_dir, f"iteration-{art.iteration:02d}", "validation_report.json"
                ),
            ]
        )
        print(
            f"iteration {art.iteration}: validation accuracy "
            f"{art.validation_accuracy:.3f} ({art.expert_record_count} expert records)"
        )
    print(f"best iteration: {artifacts[best].iteration}")
    return paths


def cmd_eval(doc: dict, output_dir: str, workers: int) -> list[str]:
    problems, _ = _load_corpora(doc)
    grid = cfgmod.eval_grid(doc)
    verifier = _maybe_verifier(doc)
    if verifier is None and any(s.needs_verifier for s in grid.strategies):
        raise ConfigError(
            "config field $.verifier.params_path: required by verifier-based strategies"
        )
    report = evaluate(
        problems,
        cfgmod.generator_config(doc),
        verifier,
        grid,
        cfgmod.env_config(doc),
        workers=workers,
    )
    path = os.path.join(output_dir, "eval_report.json")
    report.save(path)
    print(f"{'strategy':<28} {'N':>3} {'accuracy':>9}  per-turn")
    for cell in report.cells:
        curve = " ".join(f"{a:.3f}" for a in cell["per_turn_accuracy"])
        print(f"{cell['strategy']:<28} {cell['n']:>3} {cell['accuracy']:>9.3f}  [{curve}]")
    return [path]


def cmd_lab(doc: dict, output_dir: str, workers: int) -> list[str]:
    lab = doc.get("lab", {})
    horizons = lab.get("horizons", [2, 4, 8])
    num_seeds = lab.get("num_seeds", 10)
    base_seed = doc["seed"]
    from .seeding import derive_seed

    seeds = [derive_seed(base_seed, f"lab:{i}") for i in range(num_seeds)]

    violations = 0
    checked = 0
    for i in range(lab.get("def_check_mdps", 50)):
        mdp = build_toy_mdp(
            derive_seed(base_seed, f"lab-def:{i}"),
            horizon=min(4, max(horizons)),
            num_actions=lab.get("num_actions", 4),
            recoverable=True,
        )
        for adv in exact_advantage(mdp).values():
            checked += len(adv)
            violations += int(((adv < -1.0 - 1e-12) | (adv > 1e-12)).sum())
    print(f"advantage band check: {checked} state-action pairs, {violations} violations")

    paths = []
    for recoverable in (True, False):
        report = regret_sweep(
            recoverable,
            horizons=horizons,
            seeds=seeds,
            num_actions=lab.get("num_actions", 4),
            num_prompts=lab.get("num_prompts", 12),
            min_prob=lab.get("min_prob", 1.0 / 150.0),
            iterations=lab.get("iterations", 8),
        )
        name = "regret_recoverable.json" if recoverable else "regret_control.json"
        path = os.path.join(output_dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        paths.append(path)
        label = "recoverable" if recoverable else "control"
        print(f"{label} ({report.mode}): exponent {report.growth_exponent:.3f}")
        print(f"{'T':>4} {'gap':>10}")
        for horizon, gap in zip(report.horizons, report.mean_gaps):
            print(f"{horizon:>4} {gap:>10.5f}")
    return paths


def cmd_make_toy(doc: dict, output_dir: str, workers: int) -> list[str]:
    corpus_path, script_path = write_toy_setup(
        output_dir, num_problems=doc.get("toy_problems", 50), seed=doc["seed"]
    )
    print(f"wrote {corpus_path} and {script_path}")
    return [corpus_path, script_path]


COMMANDS = {
    "collect": cmd_collect,
    "train-verifier": cmd_train_verifier,
    "relabel": cmd_relabel,
    "run": cmd_run,
    "eval": cmd_eval,
    "lab": cmd_lab,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codeloop",
        description="Multi-turn code generation engine: collection, training, inference, evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in [*COMMANDS, "make-toy"]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=name != "make-toy", help="run config JSON")
        p.add_argument("--output", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="global seed (overrides config)")
        p.add_argument("--force", action="store_true", help="rerun over a completed manifest")
        p.add_argument("--workers", type=int, default=None, help="parallel problem workers")
        if name == "make-toy":
            p.add_argument("--problems", type=int, default=50)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)

    try:
        if args.command == "make-toy":
            doc = {"seed": args.seed or 0, "toy_problems": args.problems}
            output_dir = args.output or "toy-setup"
            os.makedirs(output_dir, exist_ok=True)
            cmd_make_toy(doc, output_dir, 1)
            return EXIT_OK
        doc = cfgmod.load_config(args.config)
        if args.seed is not None:
            doc["seed"] = args.seed
        if args.output is not None:
            doc["output_dir"] = args.output
        if args.workers is not None:
            doc["workers"] = args.workers
        conf_hash = cfgmod.config_hash(doc)
        output_dir = doc["output_dir"]
        workers = doc.get("workers", 1)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    try:
        os.makedirs(output_dir, exist_ok=True)
        _check_manifest(output_dir, args.command, conf_hash, args.force)
        artifacts = COMMANDS[args.command](doc, output_dir, workers)
        for artifact in artifacts:
            stamp_artifact(artifact, conf_hash)
        _write_manifest(output_dir, args.command, conf_hash, doc["seed"], artifacts)
        return EXIT_OK
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except ManifestRefusal as e:
        print(f"refusing: {e}", file=sys.stderr)
        return EXIT_RUN_FAILURE
    except Exception as e:
        logger.exception("run failed")
        print(f"run failed: {e}", file=sys.stderr)
        return EXIT_RUN_FAILURE


if __name__ == "__main__":
    sys.exit(main())
