"""Adam optimizer and the cosine learning-rate schedule."""

import numpy as np


class Adam:
    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        b1, b2 = self.b1, self.b2
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def state_dict(self):
        return {
            "t": self.t,
            "m": [a.copy() for a in self.m],
            "v": [a.copy() for a in self.v],
        }

    def load_state_dict(self, state):
        if len(state["m"]) != len(self.params):
            raise ValueError("optimizer state does not match parameter count")
        self.t = int(state["t"])
        self.m = [a.copy() for a in state["m"]]
        self.v = [a.copy() for a in state["v"]]


def cosine_lr(base_lr, epoch, total_epochs):
    """Cosine decay from base_lr at epoch 0 to 0 at total_epochs."""
    frac = min(max(epoch / max(total_epochs, 1), 0.0), 1.0)
    return base_lr * 0.5 * (1.0 + np.cos(np.pi * frac))
