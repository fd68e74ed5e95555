import copy
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from pose_pipeline.errors import InputError
from pose_pipeline.nn.layers import Dropout, Module, ReLU
from pose_pipeline.nn.losses import smooth_l1

LossFn = Callable[[np.ndarray, np.ndarray], Tuple[float, np.ndarray]]


@dataclass
class GradCheckReport:
    max_relative_error: float
    per_parameter: Dict[str, float] = field(default_factory=dict)
    checked: int = 0
    skipped_kinks: int = 0

    def passed(self, tolerance: float) -> bool:
        return bool(self.max_relative_error < tolerance)


def _relu_masks(network: Module) -> List[np.ndarray]:
    return [m.mask.copy() for m in network.modules() if isinstance(m, ReLU)]


def _same_masks(a: List[np.ndarray], b: List[np.ndarray]) -> bool:
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def grad_check(
    network: Module,
    inputs: np.ndarray,
    target: np.ndarray,
    loss_fn: LossFn = smooth_l1,
    h: float = 1e-5,
    max_entries: Optional[int] = None,
    atol: float = 1e-6,
    check_inputs: bool = False,
    seed: int = 0,
    perturb_analytic: float = 0.0,
) -> GradCheckReport:
    """Compare reverse-mode gradients against central finite differences.

    The network runs in training mode (batch statistics) on a copy, so its
    running statistics are left untouched. Entries whose ``+-h`` perturbation
    flips any ReLU activation are skipped. ``perturb_analytic`` adds a fixed
    offset to every analytic gradient to exercise the failure path.
    """
    net = copy.deepcopy(network).train()
    if any(isinstance(m, Dropout) and m.active for m in net.modules()):
        raise InputError("Gradient checking requires dropout to be disabled")
    rng = np.random.default_rng(seed)
    x = np.array(inputs, dtype=np.float64)

    def loss_at(values: np.ndarray) -> float:
        loss, _ = loss_fn(net.forward(values), target)
        return loss

    net.zero_grad()
    _, grad_out = loss_fn(net.forward(x), target)
    grad_in = net.backward(grad_out)
    base_masks = _relu_masks(net)

    targets: List[Tuple[str, np.ndarray, np.ndarray]] = [
        (name, p.value, p.grad.copy()) for name, p in net.named_parameters()
    ]
    if check_inputs:
        targets.append(("input", x, grad_in.copy()))

    report = GradCheckReport(max_relative_error=0.0)
    for name, values, analytic in targets:
        flat = values.reshape(-1)
        if max_entries is None or flat.size <= max_entries:
            indices = np.arange(flat.size)
        else:
            indices = np.sort(rng.choice(flat.size, size=max_entries, replace=False))

        worst = 0.0
        for idx in indices:
            original = flat[idx]
            flat[idx] = original + h
            loss_plus = loss_at(x)
            masks_plus = _relu_masks(net)
            flat[idx] = original - h
            loss_minus = loss_at(x)
            masks_minus = _relu_masks(net)
            flat[idx] = original

            if not (_same_masks(base_masks, masks_plus) and _same_masks(base_masks, masks_minus)):
                report.skipped_kinks += 1
                continue

            numeric = (loss_plus - loss_minus) / (2 * h)
            a = analytic.reshape(-1)[idx] + perturb_analytic
            error = abs(a - numeric) / max(abs(a), abs(numeric), atol)
            worst = max(worst, error)
            report.checked += 1

        report.per_parameter[name] = worst
        report.max_relative_error = max(report.max_relative_error, worst)
    return report
