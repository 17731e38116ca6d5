"""Plain SGD and Adam over a list of parameter tensors."""

import numpy as np


class SGD:
    def __init__(self, tensors, lr):
        self.tensors = list(tensors)
        self.lr = lr

    def step(self):
        for t in self.tensors:
            if t.grad is not None:
                t.value = t.value - self.lr * t.grad


class Adam:
    def __init__(self, tensors, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.tensors = list(tensors)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros(t.shape) for t in self.tensors]
        self.v = [np.zeros(t.shape) for t in self.tensors]
        self.t = 0

    def step(self):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for t, m, v in zip(self.tensors, self.m, self.v):
            if t.grad is None:
                continue
            m *= self.beta1
            m += (1.0 - self.beta1) * t.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * t.grad ** 2
            t.value = t.value - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(name, tensors, lr):
    if name == "sgd":
        return SGD(tensors, lr)
    if name == "adam":
        return Adam(tensors, lr)
    raise ValueError(f"unknown optimizer {name!r}; expected 'sgd' or 'adam'")
