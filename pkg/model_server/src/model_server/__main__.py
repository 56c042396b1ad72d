"""Entry point: serve the HTTP API or run the staged reader finetuning.

Serving reads checkpoint paths from flags or environment variables
(MODEL_SERVER_QA_CHECKPOINT, MODEL_SERVER_GEN_CHECKPOINT,
MODEL_SERVER_EMBED_CHECKPOINT) and answers 503 until models are loaded.
"""

from __future__ import annotations

import argparse
import os
import sys
import threading


def _cmd_serve(args) -> int:
    import uvicorn

    from .app import create_app
    from .backends import DummyBackend, HFBackend

    qa = args.qa_checkpoint or os.environ.get("MODEL_SERVER_QA_CHECKPOINT")
    gen = args.gen_checkpoint or os.environ.get("MODEL_SERVER_GEN_CHECKPOINT")
    embed = args.embed_checkpoint or os.environ.get("MODEL_SERVER_EMBED_CHECKPOINT")

    if args.backend == "dummy":
        factory = DummyBackend
    else:
        def factory():
            return HFBackend(
                qa_checkpoint=qa,
                generator_checkpoint=gen,
                embedder_checkpoint=embed,
            )

    app = create_app(factory, eager=False)
    threading.Thread(target=app.state.load, daemon=True).start()
    port = args.port or int(os.environ.get("MODEL_SERVER_PORT", "8500"))
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


def _cmd_train(args) -> int:
    from .training import TrainSettings, train_reader

    datasets = {}
    if args.squad:
        datasets["squad"] = args.squad
    if args.xmrc:
        datasets["xmrc"] = args.xmrc
    if args.xkbqa:
        datasets["xkbqa"] = args.xkbqa
    requested = [s.strip() for s in args.stages.split(",") if s.strip()]
    datasets = {k: v for k, v in datasets.items() if k in requested}

    settings = TrainSettings(
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        max_steps_per_stage=args.max_steps_per_stage,
        seed=args.seed,
    )
    checkpoint = train_reader(
        datasets,
        args.out,
        base_model=args.base_model,
        fraction=args.fraction,
        skip_squad=args.skip_squad,
        skip_xmrc=args.skip_xmrc,
        settings=settings,
    )
    print(checkpoint)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="model_server")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int)
    p.add_argument("--backend", choices=("dummy", "hf"), default="hf")
    p.add_argument("--qa-checkpoint")
    p.add_argument("--gen-checkpoint")
    p.add_argument("--embed-checkpoint")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("train", help="staged finetuning of the reader")
    p.add_argument("--out", required=True)
    p.add_argument("--base-model", help="starting checkpoint; a tiny random model is built if omitted")
    p.add_argument("--stages", default="squad,xmrc,xkbqa", help="comma list, in order")
    p.add_argument("--squad", action="append", help="reading-comprehension JSON file")
    p.add_argument("--xmrc", action="append", help="cross-lingual data, same layout")
    p.add_argument("--xkbqa", action="append", help="passage JSONL exported by the pipeline")
    p.add_argument("--fraction", type=float, default=1.0)
    p.add_argument("--skip-squad", action="store_true")
    p.add_argument("--skip-xmrc", action="store_true")
    p.add_argument("--batch-size", type=int, default=12)
    p.add_argument("--learning-rate", type=float, default=3e-5)
    p.add_argument("--epochs", type=int, default=2)
    p.add_argument("--max-steps-per-stage", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
