import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
import pandas as pd

from pose_pipeline.metrics.pck import PckCurve
from pose_pipeline.metrics.pose_metrics import (
    EvalPair,
    JointScores,
    ap_at_threshold,
    body_part_table,
    mpjpe,
    per_axis_error,
)
from pose_pipeline.skeleton import SkeletonModel


@dataclass
class PoseScores:
    ap: JointScores
    mpjpe: JointScores
    per_axis_cm: np.ndarray


@dataclass
class EvaluationReport:
    """Refined predictions scored next to the unrefined lifting baseline."""

    landmarks: Sequence[str]
    threshold: float
    samples: int
    refined: PoseScores
    baseline: Optional[PoseScores] = None
    unprocessable: int = 0
    pck: Optional[PckCurve] = None

    def table(self, model: SkeletonModel) -> pd.DataFrame:
        """Body-part rows with AP (percent) and MPJPE (cm) columns."""
        ap_label = f"AP@{self.threshold * 100:g}cm"
        columns = {
            ap_label: body_part_table(self.refined.ap.per_joint * 100.0, model),
            "MPJPE (cm)": body_part_table(self.refined.mpjpe.per_joint, model),
        }
        if self.baseline is not None:
            columns[f"{ap_label} lifted"] = body_part_table(self.baseline.ap.per_joint * 100.0, model)
            columns["MPJPE (cm) lifted"] = body_part_table(self.baseline.mpjpe.per_joint, model)
        frame = pd.DataFrame(columns)
        frame.index.name = "part"
        return frame

    def summary(self) -> Dict[str, Any]:
        summary: Dict[str, Any] = {
            "samples": self.samples,
            "unprocessable": self.unprocessable,
            "threshold_m": self.threshold,
            "mAP": self.refined.ap.mean,
            "mMPJPE_cm": self.refined.mpjpe.mean,
            "per_axis_cm": self.refined.per_axis_cm.tolist(),
            "per_joint": {
                "ap": self.refined.ap.to_dict(self.landmarks),
                "mpjpe_cm": self.refined.mpjpe.to_dict(self.landmarks),
            },
        }
        if self.baseline is not None:
            summary["baseline"] = {
                "mAP": self.baseline.ap.mean,
                "mMPJPE_cm": self.baseline.mpjpe.mean,
                "per_axis_cm": self.baseline.per_axis_cm.tolist(),
            }
        if self.pck is not None:
            summary["pck"] = {
                "fractions": self.pck.fractions.tolist(),
                "mean_precision": self.pck.mean_precision,
                "mean_recall": self.pck.mean_recall,
                "max_f_score": self.pck.max_f_score,
            }
        return summary


def score_pairs(pairs: Sequence[EvalPair], threshold: float = 0.10) -> PoseScores:
    return PoseScores(
        ap=ap_at_threshold(pairs, threshold),
        mpjpe=mpjpe(pairs),
        per_axis_cm=per_axis_error(pairs),
    )


def evaluate_pairs(
    model: SkeletonModel,
    refined: Sequence[EvalPair],
    baseline: Optional[Sequence[EvalPair]] = None,
    threshold: float = 0.10,
    unprocessable: int = 0,
    pck: Optional[PckCurve] = None,
) -> EvaluationReport:
    return EvaluationReport(
        landmarks=model.landmarks,
        threshold=threshold,
        samples=len(refined),
        refined=score_pairs(refined, threshold),
        baseline=score_pairs(baseline, threshold) if baseline else None,
        unprocessable=unprocessable,
        pck=pck,
    )


def write_report(
    report: EvaluationReport, model: SkeletonModel, out_dir: Union[str, Path]
) -> Dict[str, Path]:
    """Write ``metrics.csv`` (table rows), ``metrics.json``, ``report.txt`` and ``pck.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = report.table(model)
    paths = {
        "table": out / "metrics.csv",
        "summary": out / "metrics.json",
        "text": out / "report.txt",
    }
    table.to_csv(paths["table"], float_format="%.4f")
    paths["summary"].write_text(json.dumps(report.summary(), indent=2, sort_keys=True))

    lines = [
        f"samples: {report.samples} (unprocessable: {report.unprocessable})",
        f"mAP@{report.threshold * 100:g}cm: {report.refined.ap.mean * 100:.2f}",
        f"mMPJPE: {report.refined.mpjpe.mean:.2f} cm",
    ]
    if report.baseline is not None:
        lines += [
            f"lifted mAP@{report.threshold * 100:g}cm: {report.baseline.ap.mean * 100:.2f}",
            f"lifted mMPJPE: {report.baseline.mpjpe.mean:.2f} cm",
        ]
    lines += ["", table.to_string(float_format=lambda v: f"{v:.2f}")]
    if report.pck is not None:
        paths["pck"] = out / "pck.csv"
        report.pck.to_frame().to_csv(paths["pck"], index=False)
        lines += ["", "PCK", report.pck.to_frame().to_string(index=False)]
    paths["text"].write_text("\n".join(lines) + "\n")
    return paths
