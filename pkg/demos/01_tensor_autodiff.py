# %% [markdown]
# # Autodiff core
# Every op records its parents and a backward closure; `backward` walks the
# graph in reverse topological order.

# %%
import numpy as np

from kpforecast import tensor as tc
from kpforecast.tensor import Tensor

rng = np.random.default_rng(0)
x = Tensor(rng.standard_normal((4, 3)))
w = Tensor(rng.standard_normal((3, 2)), requires_grad=True)
b = Tensor(np.zeros(2), requires_grad=True)
target = rng.standard_normal((4, 2))

loss = tc.mse_loss(tc.linear(x, w, b), target)
tc.backward(loss)
print("loss", loss.item())
print("dL/dw\n", w.grad)

# %% [markdown]
# Central differences in float64 agree with the backward pass.

# %%
err = tc.grad_check(lambda w, b: tc.mse_loss(tc.linear(x, w, b), target), [w, b])
print(f"max relative error {err:.2e}")

# %% [markdown]
# The fused LSTM layer runs back-propagation through time in one node.

# %%
H = 4
params = [Tensor(rng.standard_normal(s) * 0.3, requires_grad=True) for s in [(4 * H, 3), (4 * H, H), (4 * H,), (4 * H,)]]
seq = Tensor(rng.standard_normal((2, 6, 3)))
out, last, _ = tc.lstm_layer(seq, *params)
print("outputs", out.shape, "last hidden", last.shape)
print("grad check", tc.grad_check(lambda *p: tc.sum_all(tc.square(tc.lstm_layer(seq, *p)[1])), params))
