from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from pose_pipeline.errors import DimensionMismatchError, InputError, NumericalError


def check_finite(name: str, array: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(array)):
        raise NumericalError(f"Non-finite values in {name}")
    return array


class Parameter:
    """Trainable float64 tensor with an accumulated gradient."""

    def __init__(self, value: np.ndarray):
        self.value = np.array(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad.fill(0.0)


class Module:
    """Layer with explicit forward/backward passes.

    ``forward`` caches what ``backward`` needs; ``backward`` accumulates
    parameter gradients and returns the gradient with respect to the input.
    """

    def __init__(self):
        self.training = True
        self._parameters: Dict[str, Parameter] = {}
        self._buffers: Dict[str, np.ndarray] = {}
        self._modules: Dict[str, "Module"] = {}

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_output: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)

    def modules(self) -> Iterator["Module"]:
        yield self
        for child in self._modules.values():
            yield from child.modules()

    def named_parameters(self, prefix: str = "") -> List[Tuple[str, Parameter]]:
        named = [(prefix + name, p) for name, p in self._parameters.items()]
        for child_name, child in self._modules.items():
            named.extend(child.named_parameters(f"{prefix}{child_name}."))
        return named

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> List[Tuple[str, np.ndarray]]:
        named = [(prefix + name, b) for name, b in self._buffers.items()]
        for child_name, child in self._modules.items():
            named.extend(child.named_buffers(f"{prefix}{child_name}."))
        return named

    def set_buffer(self, name: str, value: np.ndarray) -> None:
        owner_path, _, leaf = name.rpartition(".")
        owner = self
        for part in filter(None, owner_path.split(".")):
            owner = owner._modules[part]
        owner._buffers[leaf][...] = value

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()


class Linear(Module):
    """``y = x W^T + b`` with ``W`` of shape (out_features, in_features)."""

    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: Optional[np.random.Generator] = None,
        zero_init: bool = False,
    ):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        if zero_init:
            weight = np.zeros((out_features, in_features))
            bias = np.zeros(out_features)
        else:
            rng = rng if rng is not None else np.random.default_rng()
            bound = 1.0 / np.sqrt(in_features)
            weight = rng.uniform(-bound, bound, size=(out_features, in_features))
            bias = rng.uniform(-bound, bound, size=out_features)
        self.weight = self._parameters["weight"] = Parameter(weight)
        self.bias = self._parameters["bias"] = Parameter(bias)
        self._input: Optional[np.ndarray] = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise DimensionMismatchError(
                f"Linear layer expects (batch, {self.in_features}) input, got {x.shape}"
            )
        self._input = x
        return x @ self.weight.value.T + self.bias.value

    def backward(self, grad_output: np.ndarray) -> np.ndarray:
        self.weight.grad += grad_output.T @ self._input
        self.bias.grad += grad_output.sum(axis=0)
        return grad_output @ self.weight.value


class BatchNorm1d(Module):
    """Per-feature batch normalization with biased variance."""

    def __init__(self, num_features: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        if eps <= 0:
            raise InputError("Batch-norm eps must be positive")
        self.num_features = num_features
        self.momentum = momentum
        self.eps = eps
        self.gamma = self._parameters["gamma"] = Parameter(np.ones(num_features))
        self.beta = self._parameters["beta"] = Parameter(np.zeros(num_features))
        self._buffers["running_mean"] = np.zeros(num_features)
        self._buffers["running_var"] = np.ones(num_features)
        self._cache: Optional[Tuple[np.ndarray, np.ndarray]] = None

    @property
    def running_mean(self) -> np.ndarray:
        return self._buffers["running_mean"]

    @property
    def running_var(self) -> np.ndarray:
        return self._buffers["running_var"]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if self.training:
            if x.shape[0] < 2:
                raise InputError("Batch normalization needs a batch of at least 2 in training mode")
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            self.running_mean[...] = (1 - self.momentum) * self.running_mean + self.momentum * mean
            self.running_var[...] = (1 - self.momentum) * self.running_var + self.momentum * var
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        x_hat = (x - mean) * inv_std
        self._cache = (x_hat, inv_std)
        return self.gamma.value * x_hat + self.beta.value

    def backward(self, grad_output: np.ndarray) -> np.ndarray:
        x_hat, inv_std = self._cache
        self.gamma.grad += (grad_output * x_hat).sum(axis=0)
        self.beta.grad += grad_output.sum(axis=0)
        grad_x_hat = grad_output * self.gamma.value
        if not self.training:
            return grad_x_hat * inv_std
        n = grad_output.shape[0]
        return (inv_std / n) * (
            n * grad_x_hat
            - grad_x_hat.sum(axis=0)
            - x_hat * (grad_x_hat * x_hat).sum(axis=0)
        )


class ReLU(Module):
    def __init__(self):
        super().__init__()
        self.mask: Optional[np.ndarray] = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self.mask = x > 0
        return np.where(self.mask, x, 0.0)

    def backward(self, grad_output: np.ndarray) -> np.ndarray:
        # subgradient at exactly 0 is 0
        return np.where(self.mask, grad_output, 0.0)


class Dropout(Module):
    """Inverted dropout: survivors are scaled by ``1 / (1 - rate)`` in training."""

    def __init__(self, rate: float, rng: Optional[np.random.Generator] = None):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise InputError(f"Dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate
        self.rng = rng if rng is not None else np.random.default_rng()
        self._scale: Optional[np.ndarray] = None

    @property
    def active(self) -> bool:
        return self.training and self.rate > 0.0

    def forward(self, x: np.ndarray) -> np.ndarray:
        if not self.active:
            self._scale = None
            return x
        keep = self.rng.random(x.shape) >= self.rate
        self._scale = keep / (1.0 - self.rate)
        return x * self._scale

    def backward(self, grad_output: np.ndarray) -> np.ndarray:
        if self._scale is None:
            return grad_output
        return grad_output * self._scale


class Sequential(Module):
    def __init__(self, *layers: Module):
        super().__init__()
        for i, layer in enumerate(layers):
            self._modules[str(i)] = layer
        self.layers = list(layers)

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, grad_output: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad_output = layer.backward(grad_output)
        return grad_output


class ResidualBlock(Module):
    """``x + Dropout(ReLU(BatchNorm(Linear(x))))``."""

    def __init__(
        self,
        features: int,
        dropout_rate: float,
        rng: np.random.Generator,
        momentum: float = 0.1,
    ):
        super().__init__()
        self.body = Sequential(
            Linear(features, features, rng),
            BatchNorm1d(features, momentum=momentum),
            ReLU(),
            Dropout(dropout_rate, rng),
        )
        self._modules["body"] = self.body

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x + self.body.forward(x)

    def backward(self, grad_output: np.ndarray) -> np.ndarray:
        return grad_output + self.body.backward(grad_output)
