"""
Reverse-mode gradients on a tape
================================

Record a small computation, run the reverse pass and compare against
central differences.
"""

import numpy as np

from dishts import ndcore as nd

v = nd.Tensor([0.5, -1.0, 2.0], requires_grad=True, name="v")
x = np.array([1.0, 2.0, 3.0])

# ops on tracked tensors are recorded while the tape is open
with nd.GradTape() as tape:
    level = nd.leaky_relu(nd.sum_(nd.mul(v, x)), 0.01)
    spread = nd.sqrt(nd.mean(nd.square(nd.sub(x, level))))

(grad,) = nd.backward(tape, spread, [v])
print("spread:", spread.item())
print("analytic gradient:", grad)

v.zero_grad()
numeric = nd.numerical_gradient(lambda: nd.sqrt(nd.mean(nd.square(
    nd.sub(x, nd.leaky_relu(nd.sum_(nd.mul(v.data, x)), 0.01))))).item(), v)
print("finite differences:", numeric)
print("relative error:", nd.relative_error(grad, numeric))
