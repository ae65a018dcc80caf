import argparse
import asyncio
import functools
import json
import logging
import sys

import numpy as np

from ai.checkpoint import load_checkpoint, save_checkpoint
from ai.grad_engine import grad_check
from ai.sae_variant import SaeVariant
from config.app_config import AppConfig
from config.backend_config import BackendConfig
from config.config import Config
from config.train_config import TrainConfig
from data.activation_dataset import ActivationDataset
from data.activation_file import load_activations, save_activations
from data.atomic_file import file_digest, write_json_atomic, write_jsonl_atomic
from data.manifest import Manifest
from data.synthetic import SyntheticSpec, generate_synthetic, load_truth, planted_reports, save_truth
from errors import ConfigError, NumericsError, SaeError, UsageError
from intervention.intervene import InterventionSpec, counterfactual_token, cyclic_consistency, displacement
from metrics.evaluation import evaluate
from services.feature_description_service import describe_features, top_k, top_k_all
from services.feature_store import FeatureStore
from services.http_backend import HttpBackend
from services.mock_backend import MockBackend
from services.regex_backend import RegexBackend
from services.report_service import generate_report, nn_baseline
from services.text_backend import TextBackend
from training.sweep import SweepGrid, sweep
from training.trainer import train

logger = logging.getLogger("sae")


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def emit(payload, path: str | None):
    if path:
        write_json_atomic(path, payload)
    else:
        print(json.dumps(payload, indent=2, sort_keys=True))


def make_backend(kind: str, config_path: str | None) -> TextBackend:
    if kind == "mock":
        return MockBackend()
    if kind == "regex":
        return RegexBackend()
    return HttpBackend(BackendConfig.from_file(config_path))


def select_rows(dataset: ActivationDataset, example_id: int | None) -> ActivationDataset:
    if example_id is None:
        return dataset
    try:
        return dataset.take([dataset.index_of(example_id)])
    except KeyError as e:
        raise UsageError(str(e)) from e


def gen_data(args) -> int:
    spec = SyntheticSpec(n=args.n, M_true=args.m_true, rows=args.rows, p_active=args.p_active,
                         magnitude_range=(args.magnitude_lo, args.magnitude_hi), noise_sigma=args.noise_sigma,
                         seed=args.seed or 0)
    dataset, truth = generate_synthetic(spec)
    if not args.raw:
        dataset = dataset.normalized()
    save_activations(dataset, args.out)
    if args.manifest:
        write_jsonl_atomic(args.manifest, planted_reports(truth, dataset.ids))
    if args.truth:
        save_truth(truth, args.truth)
    return 0


def train_config(args) -> TrainConfig:
    overrides = dict(variant=args.variant, steps=args.steps, batch_size=args.batch_size, lambda_max=args.lambda_max,
                     expansion_factor=args.expansion_factor, seed=args.seed)
    if args.config:
        return TrainConfig.from_file(args.config, **overrides)
    return TrainConfig.parse({key: value for key, value in overrides.items() if value is not None})


def train_sae(args) -> int:
    config = train_config(args)
    logger.info(f"Training config: {config.model_dump_json()}")
    data = load_activations(args.data)
    params, report = train(config, data, metrics_path=args.log, checkpoint_path=args.out)
    save_checkpoint(params, args.out)
    if args.report:
        write_json_atomic(args.report, report.to_dict())
    return 0


def eval_sae(args) -> int:
    params = load_checkpoint(args.checkpoint)
    data = load_activations(args.data)
    truth = load_truth(args.truth) if args.truth else None
    emit(evaluate(params, data, truth).to_dict(), args.out)
    return 0


def run_grad_check(args) -> int:
    variants = [SaeVariant(args.variant)] if args.variant else list(SaeVariant)
    reports = []
    for variant in variants:
        reports.append(grad_check(variant, args.n, args.m, args.batch, seed=args.seed or 0, step=args.step,
                                  tolerance=args.tolerance, instances=args.instances,
                                  untied_magnitude=args.untied and variant.is_gated))
    emit([report.to_dict() for report in reports], args.out)
    failed = [report.variant.value for report in reports if not report.passed]
    if failed:
        raise NumericsError(f"Gradient check failed for {', '.join(failed)}")
    return 0


def run_top_k(args) -> int:
    params = load_checkpoint(args.checkpoint)
    data = load_activations(args.data)
    if args.feature is not None:
        records = [top_k(params, data, args.feature, args.k)]
    else:
        records = list(top_k_all(params, data, args.k).values())
    emit([record.to_dict() for record in records], args.out)
    return 0


async def describe_async(args) -> int:
    params = load_checkpoint(args.checkpoint)
    data = load_activations(args.data)
    manifest = Manifest.load(args.manifest)
    if args.features:
        records = [top_k(params, data, feature, args.k) for feature in args.features]
    else:
        records = list(top_k_all(params, data, args.k).values())
    backend_config = BackendConfig.from_file(args.backend_config)
    async with make_backend(args.backend, args.backend_config) as describer:
        described = await describe_features(records, describer, manifest, retries=args.retries,
                                            max_in_flight=backend_config.max_in_flight)
    FeatureStore(args.out).save(described, file_digest(args.checkpoint))
    return 0


async def report_async(args) -> int:
    params = load_checkpoint(args.checkpoint)
    descriptions = FeatureStore(args.store).descriptions(file_digest(args.checkpoint))
    tokens = select_rows(load_activations(args.tokens), args.id)
    if args.scale_like:
        tokens = tokens.rescaled_like(load_activations(args.scale_like))
    indication = None if args.no_indication else args.indication
    priors = [] if args.no_priors or not args.priors else Manifest.load(args.priors).entries()
    backend_config = BackendConfig.from_file(args.backend_config)
    semaphore = asyncio.Semaphore(backend_config.max_in_flight)

    async with make_backend(args.backend, args.backend_config) as generator:
        async def one(row: int) -> str:
            async with semaphore:
                return await generate_report(tokens.data[row], params, descriptions, generator, indication, priors,
                                             args.tau, int(tokens.ids[row]))
        reports = await asyncio.gather(*(one(row) for row in range(tokens.rows)))
    emit([{"id": int(example_id), "report": report} for example_id, report in zip(tokens.ids, reports)], args.out)
    return 0


def run_baseline(args) -> int:
    train_data = load_activations(args.train_data)
    manifest = Manifest.load(args.manifest)
    tokens = select_rows(load_activations(args.tokens), args.id).rescaled_like(train_data)
    reports = [{"id": int(tokens.ids[row]), "report": nn_baseline(tokens.data[row], train_data, manifest)}
               for row in range(tokens.rows)]
    emit(reports, args.out)
    return 0


def run_intervene(args) -> int:
    params = load_checkpoint(args.checkpoint)
    tokens = load_activations(args.token_file)
    spec = InterventionSpec(args.feature, args.beta, apply_delta_correction=args.correct_delta)
    emitted, norms, errors, residuals = [], [], [], []
    for row in range(tokens.rows):
        z = tokens.data[row]
        emitted.append(counterfactual_token(params, z, spec).emitted)
        norm, error = displacement(params, z, spec)
        norms.append(norm)
        errors.append(error)
        residuals.append(cyclic_consistency(params, z, args.feature, args.beta, args.reencode_corrected).residual)
    save_activations(ActivationDataset(np.vstack(emitted), scale=tokens.scale, ids=tokens.ids), args.out)
    print(json.dumps({
        "feature": args.feature,
        "beta": args.beta,
        "mean_displacement_norm": float(np.mean(norms)),
        "max_linearity_error": float(np.max(errors)),
        "mean_cyclic_residual": float(np.mean(residuals)),
    }, sort_keys=True))
    return 0


def run_sweep(args) -> int:
    base = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    grid = SweepGrid(lambdas=args.lambdas, expansion_factors=args.expansions or [base.expansion_factor],
                     seeds=args.seeds or [base.seed])
    data = load_activations(args.data)
    truth = load_truth(args.truth) if args.truth else None
    emit([row.to_dict() for row in sweep(base, grid, data, truth)], args.out)
    return 0


def add_global_flags(parser: argparse.ArgumentParser, suppress: bool):
    defaults = dict.fromkeys(("seed", "log_level", "threads"), argparse.SUPPRESS) if suppress else \
        dict(seed=None, log_level=AppConfig.log_level, threads=AppConfig.threads)
    parser.add_argument("--seed", type=int, default=defaults["seed"],
                        help="Seed for data generation, initialization and batching")
    parser.add_argument("--log-level", default=defaults["log_level"],
                        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"])
    parser.add_argument("--threads", type=int, default=defaults["threads"], help="Intra-op worker threads")


def build_parser() -> CliParser:
    parser = CliParser(prog="sae", description="Sparse-autoencoder training, evaluation and feature reports")
    add_global_flags(parser, suppress=False)
    # Subcommands accept the global flags too; suppressed defaults keep values given before the subcommand.
    shared = argparse.ArgumentParser(add_help=False)
    add_global_flags(shared, suppress=True)
    commands = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)
    add_parser = functools.partial(commands.add_parser, parents=[shared])

    command = add_parser("gen-data", help="Generate a synthetic superposition corpus")
    command.add_argument("--n", type=int, required=True)
    command.add_argument("--m-true", type=int, required=True)
    command.add_argument("--rows", type=int, required=True)
    command.add_argument("--p-active", type=float, default=0.02)
    command.add_argument("--magnitude-lo", type=float, default=0.0)
    command.add_argument("--magnitude-hi", type=float, default=1.0)
    command.add_argument("--noise-sigma", type=float, default=0.0)
    command.add_argument("--raw", action="store_true", help="Skip normalization to mean row norm sqrt(n)")
    command.add_argument("--out", required=True, help="Activation file to write")
    command.add_argument("--manifest", help="Also write planted reports as a JSONL manifest")
    command.add_argument("--truth", help="Also write the ground-truth dictionary (.npz)")
    command.set_defaults(handler=gen_data)

    command = add_parser("train", help="Train an SAE")
    command.add_argument("--config", help="JSON or YAML file with TrainConfig fields")
    command.add_argument("--data", required=True)
    command.add_argument("--out", required=True, help="Checkpoint file to write")
    command.add_argument("--log", help="JSONL metrics stream")
    command.add_argument("--report", help="Write the training report as JSON")
    command.add_argument("--variant", choices=[variant.value for variant in SaeVariant])
    command.add_argument("--steps", type=int)
    command.add_argument("--batch-size", type=int)
    command.add_argument("--lambda-max", type=float)
    command.add_argument("--expansion-factor", type=int)
    command.set_defaults(handler=train_sae)

    command = add_parser("eval", help="Evaluate a checkpoint on a dataset")
    command.add_argument("--checkpoint", required=True)
    command.add_argument("--data", required=True)
    command.add_argument("--truth", help="Ground-truth dictionary for MMCS and shrinkage")
    command.add_argument("--out")
    command.set_defaults(handler=eval_sae)

    command = add_parser("grad-check", help="Compare analytic and finite-difference gradients")
    command.add_argument("--variant", choices=[variant.value for variant in SaeVariant])
    command.add_argument("--n", type=int, default=6)
    command.add_argument("--m", type=int, default=12)
    command.add_argument("--batch", type=int, default=3)
    command.add_argument("--instances", type=int, default=20)
    command.add_argument("--tolerance", type=float, default=Config.GRAD_CHECK_TOLERANCE)
    command.add_argument("--step", type=float, default=Config.GRAD_CHECK_STEP, help="Central-difference step")
    command.add_argument("--untied", action="store_true", help="Check untied magnitude weights for gated variants")
    command.add_argument("--out")
    command.set_defaults(handler=run_grad_check)

    command = add_parser("top-k", help="Highest-activating examples per feature")
    command.add_argument("--checkpoint", required=True)
    command.add_argument("--data", required=True)
    command.add_argument("--feature", type=int)
    command.add_argument("--k", type=int, default=Config.TOP_K)
    command.add_argument("--out")
    command.set_defaults(handler=run_top_k)

    command = add_parser("describe", help="Describe features from their top-k reports")
    command.add_argument("--checkpoint", required=True)
    command.add_argument("--data", required=True)
    command.add_argument("--manifest", required=True)
    command.add_argument("--features", type=int, nargs="+")
    command.add_argument("--k", type=int, default=Config.TOP_K)
    command.add_argument("--backend", choices=["mock", "http"], default="mock")
    command.add_argument("--backend-config")
    command.add_argument("--retries", type=int, default=Config.DESCRIBE_RETRIES)
    command.add_argument("--out", required=True, help="Feature description store (JSONL)")
    command.set_defaults(handler=lambda args: asyncio.run(describe_async(args)))

    command = add_parser("report", help="Compose findings from active feature descriptions")
    command.add_argument("--checkpoint", required=True)
    command.add_argument("--store", required=True)
    command.add_argument("--tokens", required=True, help="Activation file with the query tokens")
    command.add_argument("--id", type=int, help="Only the token with this example id")
    command.add_argument("--scale-like", help="Rescale tokens into the scaling of this activation file")
    command.add_argument("--tau", type=float, default=Config.ACTIVE_TAU)
    command.add_argument("--indication")
    command.add_argument("--priors", help="JSONL manifest of prior reports, most recent first")
    command.add_argument("--no-indication", action="store_true")
    command.add_argument("--no-priors", action="store_true")
    command.add_argument("--backend", choices=["mock", "http", "regex"], default="mock")
    command.add_argument("--backend-config")
    command.add_argument("--out")
    command.set_defaults(handler=lambda args: asyncio.run(report_async(args)))

    command = add_parser("baseline", help="Nearest-neighbour report baseline")
    command.add_argument("--train-data", required=True)
    command.add_argument("--manifest", required=True)
    command.add_argument("--tokens", required=True)
    command.add_argument("--id", type=int)
    command.add_argument("--out")
    command.set_defaults(handler=run_baseline)

    command = add_parser("intervene", help="Counterfactual tokens by feature reassignment")
    command.add_argument("--checkpoint", required=True)
    command.add_argument("--token-file", required=True)
    command.add_argument("--feature", type=int, required=True)
    command.add_argument("--beta", type=float, default=Config.INTERVENTION_BETA)
    command.add_argument("--correct-delta", action="store_true")
    command.add_argument("--reencode-corrected", action="store_true",
                         help="Re-encode the delta-corrected token in the cyclic-consistency check")
    command.add_argument("--out", required=True)
    command.set_defaults(handler=run_intervene)

    command = add_parser("sweep", help="Train and evaluate over a hyper-parameter grid")
    command.add_argument("--config")
    command.add_argument("--data", required=True)
    command.add_argument("--lambdas", type=float, nargs="+", required=True)
    command.add_argument("--expansions", type=int, nargs="+")
    command.add_argument("--seeds", type=int, nargs="+")
    command.add_argument("--truth")
    command.add_argument("--out")
    command.set_defaults(handler=run_sweep)
    return parser


def resolved_config(args) -> str:
    return json.dumps({key: value for key, value in vars(args).items() if key != "handler"}, sort_keys=True,
                      default=str)


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return e.exit_code

    AppConfig.log_level = args.log_level
    AppConfig.threads = max(1, args.threads)
    logging.basicConfig(format=AppConfig.log_format, level=args.log_level, datefmt=AppConfig.log_datefmt)
    logger.info(f"Resolved config: {resolved_config(args)}")

    try:
        return args.handler(args)
    except NumericsError as e:
        logger.error(f"{e}" + (f" (last good parameters: {e.checkpoint_path})" if e.checkpoint_path else ""))
        return e.exit_code
    except SaeError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except (OSError, ValueError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return ConfigError.exit_code if isinstance(e, ValueError) else SaeError.exit_code


if __name__ == "__main__":
    sys.exit(main())
