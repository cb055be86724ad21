"""Bridge command line: convert, fine-tune, train, and serve."""

from __future__ import annotations

import argparse
import logging
import sys

from .dataset import convert_ft_dataset, load_labeled_candidates, load_trainer_ft
from .finetune import finetune_generator
from .jobs import JOB_FINETUNE_GENERATOR, JOB_TRAIN_REWARD_MODEL, BridgeJob
from .reward_model import TinyRewardModel, train_reward_model
from .tinylm import TinyLM

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="codeloop-bridge")
    sub = parser.add_subparsers(dest="command", required=True)

    convert = sub.add_parser("convert", help="engine ftdata -> trainer-native file")
    convert.add_argument("--input", required=True)
    convert.add_argument("--output", required=True)

    finetune = sub.add_parser("finetune-generator")
    finetune.add_argument("--dataset", required=True, help="trainer-native file")
    finetune.add_argument("--output", required=True, help="model checkpoint path")
    finetune.add_argument("--base-model", default="", help="checkpoint to start from")
    finetune.add_argument("--learning-rate", type=float, default=None)
    finetune.add_argument("--batch-size", type=int, default=None)
    finetune.add_argument("--epochs", type=int, default=None)
    finetune.add_argument("--seed", type=int, default=0)

    train_rm = sub.add_parser("train-reward-model")
    train_rm.add_argument("--rollouts", required=True, help="engine rollout store")
    train_rm.add_argument("--corpus", required=True, help="engine corpus file")
    train_rm.add_argument("--output", required=True)
    train_rm.add_argument("--loss", choices=["BT", "BCE"], default="BT")
    train_rm.add_argument("--learning-rate", type=float, default=None)
    train_rm.add_argument("--batch-size", type=int, default=None)
    train_rm.add_argument("--epochs", type=int, default=None)
    train_rm.add_argument("--seed", type=int, default=0)

    serve_gen = sub.add_parser("serve-generator")
    serve_gen.add_argument("--model", default="", help="checkpoint (default: fresh random init)")
    serve_gen.add_argument("--port", type=int, default=8800)

    serve_scorer = sub.add_parser("serve-scorer")
    serve_scorer.add_argument("--model", required=True)
    serve_scorer.add_argument("--port", type=int, default=8801)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)

    try:
        if args.command == "convert":
            count = convert_ft_dataset(args.input, args.output)
            print(f"converted {count} records -> {args.output}")
            return 0

        if args.command == "finetune-generator":
            model = TinyLM.load(args.base_model) if args.base_model else TinyLM(seed=args.seed)
            job = BridgeJob(
                kind=JOB_FINETUNE_GENERATOR,
                dataset_path=args.dataset,
                learning_rate=args.learning_rate,
                batch_size=args.batch_size,
                epochs=args.epochs,
                seed=args.seed,
            )
            model, trace = finetune_generator(model, load_trainer_ft(args.dataset), job)
            model.save(args.output)
            print(f"fine-tuned generator; loss {trace[0]:.4f} -> {trace[-1]:.4f} -> {args.output}")
            return 0

        if args.command == "train-reward-model":
            labeled = load_labeled_candidates(args.rollouts, args.corpus)
            job = BridgeJob(
                kind=JOB_TRAIN_REWARD_MODEL,
                dataset_path=args.rollouts,
                loss_kind=args.loss,
                learning_rate=args.learning_rate,
                batch_size=args.batch_size,
                epochs=args.epochs,
                seed=args.seed,
            )
            model, trace = train_reward_model(labeled, job)
            model.save(args.output)
            print(
                f"trained {args.loss} reward model on {len(labeled)} candidates; "
                f"loss {trace[0]:.4f} -> {trace[-1]:.4f} -> {args.output}"
            )
            return 0

        from .server import ServerHandle, make_app

        if args.command == "serve-generator":
            generator = TinyLM.load(args.model) if args.model else TinyLM()
            app = make_app(generator=generator)
        else:
            app = make_app(scorer=TinyRewardModel.load(args.model))
        import uvicorn

        uvicorn.run(app, host="127.0.0.1", port=args.port)
        return 0
    except Exception as e:
        logger.exception("bridge job failed")
        print(f"bridge job failed: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
