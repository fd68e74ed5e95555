from pose_pipeline.metrics.pck import Pck2DPair, PckCurve, pck_curve
from pose_pipeline.metrics.pose_metrics import (
    EvalPair,
    JointScores,
    ap_at_threshold,
    body_part_name,
    body_part_table,
    mpjpe,
    per_axis_error,
)
from pose_pipeline.metrics.report import (
    EvaluationReport,
    PoseScores,
    evaluate_pairs,
    score_pairs,
    write_report,
)

__all__ = [
    "EvalPair",
    "EvaluationReport",
    "JointScores",
    "Pck2DPair",
    "PckCurve",
    "PoseScores",
    "ap_at_threshold",
    "body_part_name",
    "body_part_table",
    "evaluate_pairs",
    "mpjpe",
    "pck_curve",
    "per_axis_error",
    "score_pairs",
    "write_report",
]
