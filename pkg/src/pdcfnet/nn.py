"""Parameter containers and the basic layers the network is assembled from."""

from __future__ import annotations

from collections import OrderedDict
from typing import Iterator

import numpy as np

from .autograd import Tensor, conv2d, instance_norm
from . import pdc


class Parameter(Tensor):
    def __init__(self, data, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)


class Module:
    """Walks attributes (and lists of modules) to find parameters in definition order."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, value in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(value, Parameter):
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(full + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((n, p.data) for n, p in self.named_parameters())

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        extra = sorted(set(state) - set(own))
        if missing or extra:
            raise KeyError(f"state mismatch: missing {missing}, unexpected {extra}")
        for name, p in own.items():
            arr = np.asarray(state[name])
            if arr.shape != p.shape:
                raise ValueError(f"{name}: shape {arr.shape} does not match parameter {p.shape}")
            p.data = arr.astype(p.dtype, copy=True)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def _uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv2d(Module):
    def __init__(self, cin: int, cout: int, k: int, rng: np.random.Generator, bias: bool = True,
                 dtype=np.float64):
        self.cin, self.cout, self.k = cin, cout, k
        self.weight = Parameter(_uniform(rng, (cout, cin, k, k), cin * k * k, dtype))
        self.bias = Parameter(np.zeros(cout, dtype=dtype)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias)

    def macs(self, h: int, w: int) -> int:
        return self.cout * self.cin * self.k * self.k * h * w


class PdcConv2d(Module):
    """Pixel difference convolution layer; executes through the transformed kernel."""

    def __init__(self, kind: pdc.PdcKind | str, cin: int, cout: int, rng: np.random.Generator,
                 bias: bool = False, padding_mode: str = "replicate", dtype=np.float64):
        self.kind = pdc.PdcKind(kind)
        self.cin, self.cout = cin, cout
        self.padding_mode = padding_mode
        shape = pdc.weight_shape(self.kind, cout, cin)
        fan_in = cin * int(np.prod(shape[2:]))
        self.weight = Parameter(_uniform(rng, shape, fan_in, dtype))
        self.bias = Parameter(np.zeros(cout, dtype=dtype)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return pdc.pdc_conv(x, self.kind, self.weight, self.bias, self.padding_mode)

    def kernel(self) -> np.ndarray:
        return pdc.kernel_transform(self.kind, self.weight.data)

    def macs(self, h: int, w: int) -> int:
        k = pdc.kernel_size(self.kind)
        return self.cout * self.cin * k * k * h * w


class InstanceNorm2d(Module):
    def __init__(self, channels: int, eps: float = 1e-5, dtype=np.float64):
        self.eps = eps
        self.gamma = Parameter(np.ones(channels, dtype=dtype))
        self.beta = Parameter(np.zeros(channels, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        return instance_norm(x, self.gamma, self.beta, self.eps)
