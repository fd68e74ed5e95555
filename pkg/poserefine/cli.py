"""Command-line entry point: ``python -m poserefine <command> ...``.

Every command writes its outputs and one ``manifest.json`` into ``--out``.
Exit codes: 0 success, 2 input error, 3 numerical failure, 4 failed
gradient check.
"""

import argparse
import json
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Type, TypeVar

import numpy as np
import pandas as pd
import yaml
from pydantic import BaseModel, ValidationError

from pose_pipeline import __version__
from pose_pipeline.constants import DEFAULT_PCK_FRACTIONS, RecoveryMode
from pose_pipeline.data import SynthConfig, generate_synthetic, read_dataset, write_dataset
from pose_pipeline.errors import InputError, NumericalError, SchemaError
from pose_pipeline.lifting import (
    LiftConfig,
    PriorConfig,
    fit_limb_prior,
    load_limb_prior,
    save_limb_prior,
)
from pose_pipeline.metrics import EvalPair, evaluate_pairs, pck_curve, write_report
from pose_pipeline.nn import Linear, grad_check
from pose_pipeline.pipeline import PosePipeline, training_pairs, unprocessable_fraction
from pose_pipeline.regressor import (
    RegressorConfig,
    ResidualPoseNetwork,
    fit,
    load_model,
    save_model,
)
from pose_pipeline.skeleton import SkeletonModel, load_skeleton
from poserefine.config.constants import (
    CONFIG_SECTIONS,
    GRADCHECK_MAX_ENTRIES,
    GRADCHECK_TOLERANCE,
    MANIFEST_NAME,
    ExitCode,
)
from poserefine.config.logger import logger
from poserefine.config.settings import settings
from poserefine.models.schemas import PoseStatus, PredictionRecord, RunManifest

ConfigT = TypeVar("ConfigT", bound=BaseModel)


class RunContext:
    """Parsed arguments, merged configuration and the manifest being built."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.out = Path(args.out)
        self.file_config = _load_config_file(args.config)
        self.skeleton: SkeletonModel = load_skeleton(args.skeleton)
        self.manifest = RunManifest(
            command=args.command,
            tool_version=__version__,
            seed=self.seed,
            started_at=datetime.now(timezone.utc),
            inputs={"skeleton": args.skeleton, "config": args.config},
        )

    @property
    def seed(self) -> int:
        if self.args.seed is not None:
            return self.args.seed
        for section in ("regressor", "synth"):
            if "seed" in self.file_config.get(section, {}):
                return int(self.file_config[section]["seed"])
        return settings.default_seed

    def section(self, cls: Type[ConfigT], name: str, **overrides: Any) -> ConfigT:
        """File section, then non-None flag overrides; recorded in the manifest."""
        values = dict(self.file_config.get(name, {}))
        values.update({k: v for k, v in overrides.items() if v is not None})
        try:
            config = cls.model_validate(values)
        except ValidationError as e:
            raise SchemaError(f"Invalid '{name}' configuration: {e}") from e
        self.manifest.config[name] = config.model_dump(mode="json")
        return config

    def timed(self, stage: str, fn: Callable[[], Any]) -> Any:
        started = time.perf_counter()
        result = fn()
        self.manifest.timings[stage] = time.perf_counter() - started
        return result

    def record_throughput(self, pipeline: PosePipeline) -> None:
        if not settings.throughput_log:
            return
        for t in pipeline.last_throughput:
            self.manifest.throughput[f"{t.stage}_poses_per_second"] = t.per_second


def _load_config_file(path: Optional[str]) -> Dict[str, Dict[str, Any]]:
    if not path:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except OSError as e:
        raise InputError(f"Cannot read config file {path}: {e}") from e
    except yaml.YAMLError as e:
        raise SchemaError(f"Config file {path} is not valid YAML: {e}") from e
    if not isinstance(data, dict):
        raise SchemaError(f"Config file {path} must contain a mapping")
    unknown = set(data) - set(CONFIG_SECTIONS)
    if unknown:
        raise SchemaError(f"Unknown config sections: {', '.join(sorted(unknown))}")
    return data


def _lift_config(ctx: RunContext) -> LiftConfig:
    args = ctx.args
    return ctx.section(
        LiftConfig,
        "lifting",
        fill_radius=getattr(args, "fill_radius", None),
        recovery_mode=getattr(args, "recovery_mode", None),
    )


def _read(ctx: RunContext, key: str, path: Optional[str]):
    if path is None:
        raise InputError(f"--{key.replace('_', '-')} is required")
    ctx.manifest.inputs[key] = path
    records = read_dataset(path, ctx.skeleton)
    return records, Path(path).parent


def _pipeline(ctx: RunContext, with_model: bool = False) -> PosePipeline:
    args = ctx.args
    prior = None
    if args.prior:
        ctx.manifest.inputs["prior"] = args.prior
        prior = load_limb_prior(args.prior, ctx.skeleton)
    regressor = None
    if with_model:
        if not args.model:
            raise InputError("--model is required")
        ctx.manifest.inputs["model"] = args.model
        regressor = load_model(args.model, ctx.skeleton)
    return PosePipeline(ctx.skeleton, prior, regressor, _lift_config(ctx))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_synth(ctx: RunContext) -> ExitCode:
    args = ctx.args
    config = ctx.section(
        SynthConfig,
        "synth",
        samples=args.samples,
        seed=ctx.seed,
        offset_magnitude=args.offset,
        depth_noise=args.noise,
        dropout=args.dropout,
        trunk_dropout=args.trunk_dropout,
    )
    records = ctx.timed("generate", lambda: generate_synthetic(config, ctx.skeleton))
    path = ctx.out / args.name
    write_dataset(records, path)
    ctx.manifest.outputs["dataset"] = str(path)
    ctx.manifest.results["samples"] = len(records)
    return ExitCode.SUCCESS


def cmd_fit_prior(ctx: RunContext) -> ExitCode:
    config = ctx.section(PriorConfig, "prior", epsilon=ctx.args.epsilon)
    records, _ = _read(ctx, "train", ctx.args.train)
    poses = [r.ground_truth_array() for r in records if r.has_ground_truth and r.gt_valid().all()]
    if len(poses) < len(records):
        logger.warning(f"{len(records) - len(poses)} records lack complete ground truth")
    if len(poses) < 2:
        raise InputError(f"Fitting the limb prior needs at least 2 complete poses, got {len(poses)}")
    prior = ctx.timed("fit", lambda: fit_limb_prior(ctx.skeleton, np.stack(poses), config))
    path = ctx.out / "prior.json"
    save_limb_prior(prior, path)
    ctx.manifest.outputs["prior"] = str(path)
    ctx.manifest.results["poses"] = len(poses)
    return ExitCode.SUCCESS


def cmd_lift(ctx: RunContext) -> ExitCode:
    pipeline = _pipeline(ctx)
    records, base_dir = _read(ctx, "data", ctx.args.data)
    outcomes = ctx.timed("lift", lambda: pipeline.lift_records(records, base_dir))
    path = ctx.out / "lifted.jsonl"
    _write_predictions(path, [PredictionRecord.from_outcome(o) for o in outcomes])
    ctx.record_throughput(pipeline)
    ctx.manifest.outputs["lifted"] = str(path)
    ctx.manifest.results["unprocessable"] = sum(not o.ok for o in outcomes)
    return ExitCode.SUCCESS


def cmd_train(ctx: RunContext) -> ExitCode:
    args = ctx.args
    config = ctx.section(
        RegressorConfig,
        "regressor",
        num_landmarks=ctx.skeleton.num_landmarks,
        features=args.features,
        blocks=args.blocks,
        dropout_rate=args.dropout_rate,
        use_confidence=args.use_confidence,
        residual=False if args.no_residual else None,
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr0=args.lr,
        seed=ctx.seed,
    )
    pipeline = _pipeline(ctx)
    records, base_dir = _read(ctx, "train", args.train)
    outcomes = ctx.timed("lift", lambda: pipeline.lift_records(records, base_dir))
    ctx.record_throughput(pipeline)
    fraction = unprocessable_fraction(outcomes)
    ctx.manifest.results["unprocessable_fraction"] = fraction
    if fraction > settings.max_unprocessable_fraction:
        raise InputError(
            f"{fraction:.1%} of training samples are unprocessable "
            f"(limit {settings.max_unprocessable_fraction:.1%})"
        )
    dataset = training_pairs(records, outcomes)

    validation = None
    if args.val:
        val_records, val_dir = _read(ctx, "val", args.val)
        validation = training_pairs(val_records, pipeline.lift_records(val_records, val_dir))

    regressor, report = ctx.timed("train", lambda: fit(config, ctx.skeleton, dataset, validation))
    model_path = ctx.out / "model.rpm"
    checksum = save_model(regressor, model_path)

    report_path = ctx.out / "training_report.json"
    report_path.write_text(json.dumps(report.to_dict(), indent=2))
    loss_path = ctx.out / "training_loss.csv"
    pd.DataFrame([vars(e) for e in report.epochs]).to_csv(loss_path, index=False)

    ctx.manifest.outputs.update(
        model=str(model_path), report=str(report_path), loss=str(loss_path)
    )
    ctx.manifest.results.update(
        model_sha256=checksum,
        parameter_count=report.parameter_count,
        final_loss=report.final_loss,
        train_samples=report.train_samples,
        val_samples=report.val_samples,
    )
    logger.info(f"Model written to {model_path} ({report.parameter_count} parameters)")
    return ExitCode.SUCCESS


def cmd_predict(ctx: RunContext) -> ExitCode:
    pipeline = _pipeline(ctx, with_model=True)
    records, base_dir = _read(ctx, "data", ctx.args.data)
    predictions = ctx.timed("predict", lambda: _predict(pipeline, records, base_dir))
    ctx.record_throughput(pipeline)
    path = ctx.out / "predictions.jsonl"
    _write_predictions(path, predictions)
    ctx.manifest.outputs["predictions"] = str(path)
    ctx.manifest.results["unprocessable"] = sum(p.predicted is None for p in predictions)
    return ExitCode.SUCCESS


def _predict(pipeline: PosePipeline, records, base_dir) -> List[PredictionRecord]:
    outcomes = pipeline.lift_records(records, base_dir)
    predictions = [PredictionRecord.from_outcome(o) for o in outcomes]
    ok = [i for i, o in enumerate(outcomes) if o.ok]
    if ok:
        refined = pipeline.refine([outcomes[i].lifted for i in ok])
        for i, pose in zip(ok, refined):
            predictions[i].predicted = pose.tolist()
    return predictions


def cmd_evaluate(ctx: RunContext) -> ExitCode:
    args = ctx.args
    records, base_dir = _read(ctx, "data", args.data)
    if not records:
        raise InputError("Test set is empty")
    if args.predictions:
        ctx.manifest.inputs["predictions"] = args.predictions
        predictions = _read_predictions(args.predictions)
    else:
        pipeline = _pipeline(ctx, with_model=True)
        predictions = ctx.timed("predict", lambda: _predict(pipeline, records, base_dir))
        ctx.record_throughput(pipeline)
    by_id = {p.sample_id: p for p in predictions}

    refined: List[EvalPair] = []
    baseline: List[EvalPair] = []
    unprocessable = 0
    for record in records:
        if not record.has_ground_truth:
            raise InputError(f"Record '{record.sample_id}' has no ground truth")
        prediction = by_id.get(record.sample_id)
        if prediction is None:
            raise InputError(f"No prediction for record '{record.sample_id}'")
        if prediction.status == PoseStatus.UNPROCESSABLE:
            unprocessable += 1
            continue
        # lift-only files are scored on their lifted poses
        pose = prediction.predicted if prediction.predicted is not None else prediction.lifted
        if pose is None:
            raise InputError(f"Prediction for '{record.sample_id}' carries no pose")
        refined.append(record.eval_pair(np.asarray(pose)))
        if prediction.predicted is not None and prediction.lifted is not None:
            baseline.append(record.eval_pair(np.asarray(prediction.lifted)))
    if not refined:
        raise InputError("No processable samples to evaluate")

    pck_pairs = [p for p in (r.pck_pair() for r in records) if p is not None]
    fractions = args.pck_fractions or DEFAULT_PCK_FRACTIONS
    report = evaluate_pairs(
        ctx.skeleton,
        refined,
        baseline if len(baseline) == len(refined) else None,
        threshold=args.threshold,
        unprocessable=unprocessable,
        pck=pck_curve(pck_pairs, fractions) if pck_pairs else None,
    )
    paths = write_report(report, ctx.skeleton, ctx.out)
    ctx.manifest.outputs.update({k: str(v) for k, v in paths.items()})
    ctx.manifest.config["evaluation"] = {"threshold": args.threshold, "pck_fractions": list(fractions)}
    summary = report.summary()
    ctx.manifest.results.update(
        mAP=summary["mAP"], mMPJPE_cm=summary["mMPJPE_cm"], unprocessable=unprocessable
    )
    if "baseline" in summary:
        ctx.manifest.results["baseline"] = {
            k: summary["baseline"][k] for k in ("mAP", "mMPJPE_cm")
        }
    logger.info(f"mAP@{args.threshold * 100:g}cm={report.refined.ap.mean:.4f} mMPJPE={report.refined.mpjpe.mean:.2f}cm")
    return ExitCode.SUCCESS


def cmd_gradcheck(ctx: RunContext) -> ExitCode:
    args = ctx.args
    config = ctx.section(
        RegressorConfig,
        "regressor",
        num_landmarks=ctx.skeleton.num_landmarks,
        features=args.features,
        blocks=args.blocks,
        use_confidence=args.use_confidence,
        seed=ctx.seed,
    ).model_copy(update={"dropout_rate": 0.0, "zero_init_output": False})
    ctx.manifest.config["regressor"] = config.model_dump(mode="json")
    rng = np.random.default_rng(config.seed)
    width = config.num_landmarks * config.channels
    out_width = config.num_landmarks * 3

    if args.linear_only:
        network = Linear(width, out_width, rng)
        inputs = rng.uniform(0.5, 1.5, size=(args.batch, width))
        # targets far from the outputs keep smooth-L1 in its linear regime;
        # positive inputs keep every weight gradient well away from zero
        target = 5.0 + rng.normal(size=(args.batch, out_width))
        tolerance = args.tolerance or 1e-7
    else:
        network = ResidualPoseNetwork(config, rng)
        inputs = rng.normal(size=(args.batch, width))
        # targets near the outputs keep smooth-L1 in its quadratic regime
        target = network.forward(inputs) + 0.1 * rng.normal(size=(args.batch, out_width))
        tolerance = args.tolerance or GRADCHECK_TOLERANCE

    report = ctx.timed(
        "gradcheck",
        lambda: grad_check(
            network,
            inputs,
            target,
            max_entries=args.max_entries,
            check_inputs=not args.linear_only,
            seed=config.seed,
            perturb_analytic=args.corrupt_gradient,
        ),
    )
    passed = report.passed(tolerance)
    result = {
        "passed": passed,
        "tolerance": tolerance,
        "max_relative_error": report.max_relative_error,
        "checked": report.checked,
        "skipped_kinks": report.skipped_kinks,
        "per_parameter": report.per_parameter,
    }
    path = ctx.out / "gradcheck.json"
    path.write_text(json.dumps(result, indent=2, sort_keys=True))
    ctx.manifest.outputs["gradcheck"] = str(path)
    ctx.manifest.results.update({k: v for k, v in result.items() if k != "per_parameter"})
    logger.info(
        f"gradcheck {'passed' if passed else 'FAILED'}: max relative error "
        f"{report.max_relative_error:.3e} (tolerance {tolerance:g}, {report.checked} entries)"
    )
    return ExitCode.SUCCESS if passed else ExitCode.GRADCHECK_FAILED


# ---------------------------------------------------------------------------
# Prediction files
# ---------------------------------------------------------------------------


def _write_predictions(path: Path, predictions: Sequence[PredictionRecord]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for prediction in predictions:
            f.write(prediction.model_dump_json())
            f.write("\n")


def _read_predictions(path: str) -> List[PredictionRecord]:
    predictions = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                predictions.append(PredictionRecord.model_validate_json(line))
            except ValidationError as e:
                raise SchemaError(f"{path}:{lineno}: invalid prediction: {e}") from e
    return predictions


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

COMMANDS: Dict[str, Callable[[RunContext], ExitCode]] = {
    "synth": cmd_synth,
    "fit-prior": cmd_fit_prior,
    "lift": cmd_lift,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "gradcheck": cmd_gradcheck,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--skeleton", default=settings.skeleton_path, help="skeleton YAML file")
    common.add_argument("--seed", type=int, default=None, help="RNG seed")
    common.add_argument("--config", default=None, help="YAML config with lifting/prior/regressor/synth sections")
    common.add_argument("--out", required=True, help="output directory")

    lifting = argparse.ArgumentParser(add_help=False)
    lifting.add_argument("--prior", default=None, help="limb prior file")
    lifting.add_argument("--fill-radius", type=int, default=None)
    lifting.add_argument(
        "--recovery-mode", choices=[m.value for m in RecoveryMode], default=None
    )

    parser = argparse.ArgumentParser(prog="poserefine", description="Residual 3D pose estimation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--offset", type=float, default=None, help="surface offset magnitude (m)")
    p.add_argument("--noise", type=float, default=None, help="depth noise std (m)")
    p.add_argument("--dropout", type=float, default=None, help="non-trunk detection dropout")
    p.add_argument("--trunk-dropout", type=float, default=None)
    p.add_argument("--name", default="samples.jsonl", help="dataset file name inside --out")

    p = sub.add_parser("fit-prior", parents=[common], help="fit the pairwise limb prior")
    p.add_argument("--train", required=True, help="training records")
    p.add_argument("--epsilon", type=float, default=None)

    p = sub.add_parser("lift", parents=[common, lifting], help="lift records without refinement")
    p.add_argument("--data", required=True)

    p = sub.add_parser("train", parents=[common, lifting], help="train the residual regressor")
    p.add_argument("--train", required=True)
    p.add_argument("--val", default=None)
    p.add_argument("--features", type=int, default=None)
    p.add_argument("--blocks", type=int, default=None)
    p.add_argument("--dropout-rate", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--use-confidence", action="store_const", const=True, default=None)
    p.add_argument("--no-residual", action="store_true", help="regress coordinates directly")

    p = sub.add_parser("predict", parents=[common, lifting], help="lift and refine records")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)

    p = sub.add_parser("evaluate", parents=[common, lifting], help="score predictions")
    p.add_argument("--data", required=True, help="test records with ground truth")
    p.add_argument("--model", default=None)
    p.add_argument("--predictions", default=None, help="score an existing predictions file")
    p.add_argument("--threshold", type=float, default=0.10, help="AP threshold (m)")
    p.add_argument("--pck-fractions", type=float, nargs="+", default=None)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient check")
    p.add_argument("--features", type=int, default=None)
    p.add_argument("--blocks", type=int, default=None)
    p.add_argument("--use-confidence", action="store_const", const=True, default=None)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--max-entries", type=int, default=GRADCHECK_MAX_ENTRIES)
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--linear-only", action="store_true")
    p.add_argument("--corrupt-gradient", type=float, default=0.0, help=argparse.SUPPRESS)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    ctx: Optional[RunContext] = None
    try:
        ctx = RunContext(args)
        code = COMMANDS[args.command](ctx)
    except InputError as e:
        logger.error(f"{args.command}: input error: {e}")
        code = ExitCode.INPUT_ERROR
    except NumericalError as e:
        logger.error(f"{args.command}: numerical failure: {e}")
        code = ExitCode.NUMERICAL_ERROR
    except OSError as e:
        logger.error(f"{args.command}: {e}")
        code = ExitCode.INPUT_ERROR

    manifest = (
        ctx.manifest
        if ctx is not None
        else RunManifest(
            command=args.command,
            tool_version=__version__,
            seed=args.seed if args.seed is not None else settings.default_seed,
            started_at=datetime.now(timezone.utc),
            inputs={"skeleton": args.skeleton, "config": args.config},
        )
    )
    manifest.timings["total"] = time.perf_counter() - started
    manifest.exit_code = int(code)
    (out / MANIFEST_NAME).write_text(manifest.model_dump_json(indent=2))
    return int(code)
