"""
Checking a numpy MLP against finite differences
===============================================

Every network in the package is a tanh MLP whose parameters live in one flat
float64 vector. Here we build a small one, backpropagate a random output
gradient and compare with central differences, then take one Adam step.
"""

import numpy as np

from gasil.nn_core import AdamState, MlpNetwork, adam_step

rng = np.random.default_rng(0)
net = MlpNetwork([3, 8, 8, 2], rng=rng)
x = rng.standard_normal((5, 3))
w = rng.standard_normal((5, 2))


def loss(params):
    net.unflatten(params)
    return float(np.sum(net(x) * w))


theta = net.flatten()
out, cache = net.forward(x)
analytic = net.backward(cache, w)

h = 1e-5
numeric = np.empty_like(theta)
for i in range(theta.size):
    step = np.zeros_like(theta)
    step[i] = h
    numeric[i] = (loss(theta + step) - loss(theta - step)) / (2 * h)
net.unflatten(theta)

rel = np.abs(analytic - numeric) / np.maximum(np.abs(analytic) + np.abs(numeric), 1e-6)
print(f"{theta.size} parameters, max relative error {rel.max():.2e}")

# Adam descends on the same loss
state = AdamState(theta.size, lr=1e-2)
before = loss(theta)
adam_step(net.params, analytic, state)
print(f"loss {before:.4f} -> {loss(net.flatten()):.4f} after one Adam step")
