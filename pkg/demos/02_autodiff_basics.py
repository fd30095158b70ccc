"""The reverse-mode engine underneath the classifier.

Run:  python demos/02_autodiff_basics.py
"""

import numpy as np

from ssnl import autodiff as ad
from ssnl.autodiff import Tensor

# Leaves opt into gradients; every op records its local rule; backward()
# replays the graph once in reverse topological order.
w = Tensor(np.array([[0.5, -1.0], [2.0, 0.25]]), requires_grad=True)
x = Tensor(np.array([[1.0], [3.0]]), requires_grad=True)
loss = ad.tanh(ad.matmul(w, x)).sum()
loss.backward()
print("loss       :", loss.item())
print("d loss / dw:\n", w.grad)
print("d loss / dx:\n", x.grad)

# Gradients accumulate additively across fan-out.
y = Tensor(np.ones(4), requires_grad=True)
(y.sum() + y.sum()).backward()
print("\nfan-out gradient (expect all 2):", y.grad)

# The building blocks of the model, in isolation.
seq = Tensor(np.array([[1.0, 2.0, 3.0]]))          # one channel, length 3
box = Tensor(np.array([[1.0, 1.0, 1.0]]))          # width-3 box kernel
print("\nconv1d box kernel on [1,2,3]:", ad.conv1d(seq, box).data)

v = Tensor(np.array([0.0, np.log(3.0)]))
print("softmax [0, ln3]          :", ad.softmax(v).data)     # [0.25, 0.75]

ln = ad.layer_norm(Tensor(np.array([0.0, 2.0])),
                   Tensor(np.ones(2)), Tensor(np.zeros(2)), eps=1e-14)
print("layer_norm [0, 2]         :", ln.data)                # [-1, 1]

# Checking machinery: worst relative error of tape gradients against
# central finite differences, per coordinate.
rng = np.random.default_rng(0)
a = Tensor(rng.standard_normal((3, 5)), requires_grad=True)
b = Tensor(rng.standard_normal((5, 2)), requires_grad=True)


def objective(a_, b_):
    return ad.silu(ad.matmul(a_, b_)).sum()


err = ad.grad_check(objective, [a, b], step=1e-6)
print(f"\ngrad_check worst relative error: {err:.2e}")
