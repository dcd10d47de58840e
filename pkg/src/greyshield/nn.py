"""Small numpy multilayer perceptron with manual backprop, plus Adam."""

from __future__ import annotations

import numpy as np


class Mlp:
    """Fully connected net: rectifier hidden layers, identity or tanh output.

    Weights are stored as ``(fan_in, fan_out)`` matrices so a batch ``X`` of
    shape ``(n, fan_in)`` maps as ``X @ W + b``.
    """

    def __init__(self, widths, output="identity", rng=None, zero_output=False):
        if len(widths) < 2:
            raise ValueError("need at least input and output widths")
        if output not in ("identity", "tanh"):
            raise ValueError(f"unknown output activation {output!r}")
        self.widths = [int(w) for w in widths]
        self.output = output
        rng = np.random.default_rng(0) if rng is None else rng
        self.weights = []
        self.biases = []
        for i, (n_in, n_out) in enumerate(zip(self.widths[:-1], self.widths[1:])):
            last = i == len(self.widths) - 2
            if last and zero_output:
                W = np.zeros((n_in, n_out))
            elif last:
                W = rng.uniform(-3e-3, 3e-3, size=(n_in, n_out)) if output == "tanh" \
                    else rng.standard_normal((n_in, n_out)) * np.sqrt(1.0 / n_in)
            else:
                W = rng.standard_normal((n_in, n_out)) * np.sqrt(2.0 / n_in)
            self.weights.append(W)
            self.biases.append(np.zeros(n_out))

    # parameters are exposed as a flat list [W0, b0, W1, b1, ...]
    @property
    def params(self) -> list:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def set_params(self, params) -> None:
        params = list(params)
        self.weights = [np.array(p, dtype=float) for p in params[0::2]]
        self.biases = [np.array(p, dtype=float) for p in params[1::2]]

    def copy(self) -> "Mlp":
        new = Mlp.__new__(Mlp)
        new.widths = list(self.widths)
        new.output = self.output
        new.weights = [W.copy() for W in self.weights]
        new.biases = [b.copy() for b in self.biases]
        return new

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, vec) -> None:
        vec = np.asarray(vec, dtype=float)
        out, i = [], 0
        for p in self.params:
            out.append(vec[i:i + p.size].reshape(p.shape))
            i += p.size
        self.set_params(out)

    def forward(self, X, cache: bool = False):
        h = np.atleast_2d(np.asarray(X, dtype=float))
        pre, acts = [], [h]
        n = len(self.weights)
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            pre.append(z)
            if i < n - 1:
                h = np.maximum(z, 0.0)
            else:
                h = np.tanh(z) if self.output == "tanh" else z
            acts.append(h)
        return (h, (pre, acts)) if cache else h

    def backward(self, cache, dout):
        """Gradients of ``sum(dout * output)`` w.r.t. params and inputs.

        Returns ``(grads, dX)`` with ``grads`` ordered like :attr:`params`.
        """
        pre, acts = cache
        g = np.asarray(dout, dtype=float)
        if self.output == "tanh":
            g = g * (1.0 - acts[-1] ** 2)
        grads = [None] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            grads[2 * i] = acts[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i].T
            if i > 0:
                g = g * (pre[i - 1] > 0.0)
        return grads, g

    def activation_pattern(self, x) -> list:
        _, (pre, _) = self.forward(x, cache=True)
        return [(z[0] > 0.0) for z in pre[:-1]]

    def input_jacobian(self, x) -> np.ndarray:
        """Exact Jacobian d(output)/d(input) on the activation region of ``x``
        (identity output only).  Shape ``(n_out, n_in)``."""
        if self.output != "identity":
            raise ValueError("input_jacobian needs an identity output layer")
        J = None
        mask = self.activation_pattern(x)
        for i, W in enumerate(self.weights):
            M = W.T if J is None else W.T @ J
            if i < len(self.weights) - 1:
                M = M * mask[i][:, None]
            J = M
        return J


    def line_knots(self, x0, direction, t_lo: float, t_hi: float) -> np.ndarray:
        """Breakpoints of ``t -> net(x0 + t * direction)`` on ``[t_lo, t_hi]``.

        The rectifier network is piecewise affine along any line; the knots
        are exactly where some hidden pre-activation changes sign.
        """
        x0 = np.asarray(x0, dtype=float)
        d = np.asarray(direction, dtype=float)
        t = np.array([float(t_lo), float(t_hi)])
        h = x0[None, :] + t[:, None] * d[None, :]
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            z = h @ W + b
            z0, z1 = z[:-1], z[1:]
            seg, unit = np.nonzero(z0 * z1 < 0.0)
            if seg.size:
                frac = z0[seg, unit] / (z0[seg, unit] - z1[seg, unit])
                new_t = t[seg] + (t[seg + 1] - t[seg]) * frac
                t_all = np.unique(np.concatenate([t, new_t]))
                # z is affine in t between old knots, so interpolate column-wise
                j = np.clip(np.searchsorted(t, t_all, side="right") - 1, 0, t.size - 2)
                f = ((t_all - t[j]) / (t[j + 1] - t[j]))[:, None]
                z = z[j] + f * (z[j + 1] - z[j])
                t = t_all
            h = np.maximum(z, 0.0)
        return t

def mse_loss_and_grads(net: Mlp, X, y):
    """Mean squared error over a batch and its exact parameter gradients."""
    out, cache = net.forward(X, cache=True)
    y = np.asarray(y, dtype=float).reshape(out.shape)
    err = out - y
    n = err.shape[0]
    loss = float(np.mean(np.sum(err ** 2, axis=1)))
    grads, _ = net.backward(cache, 2.0 * err / n)
    return loss, grads


class Adam:
    """Adam with bias correction (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads, lr=None) -> list:
        lr = self.lr if lr is None else lr
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        out = []
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / c1
            v_hat = self.v[i] / c2
            out.append(p - lr * m_hat / (np.sqrt(v_hat) + self.eps))
        return out


class PlateauSchedule:
    """Halve the learning rate after two consecutive epochs without a 1e-4 improvement."""

    def __init__(self, lr=1e-3, tol=1e-4, patience=2, floor=1e-5):
        self.lr = lr
        self.tol = tol
        self.patience = patience
        self.floor = floor
        self.best = np.inf
        self.bad = 0

    def update(self, loss: float) -> float:
        if loss < self.best - self.tol:
            self.best = loss
            self.bad = 0
        else:
            self.bad += 1
            if self.bad >= self.patience:
                self.lr = max(self.lr / 2.0, self.floor)
                self.bad = 0
        return self.lr


def save_mlp_text(net: Mlp, fh, extra: dict | None = None) -> None:
    """Write a net in the versioned text weight format (17 significant digits)."""
    fh.write(f"widths {' '.join(str(w) for w in net.widths)}\n")
    fh.write(f"output {net.output}\n")
    for key, arr in (extra or {}).items():
        fh.write(f"{key} " + " ".join(f"{v:.17g}" for v in np.ravel(arr)) + "\n")
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        fh.write(f"W{i} " + " ".join(f"{v:.17g}" for v in W.ravel()) + "\n")
        fh.write(f"b{i} " + " ".join(f"{v:.17g}" for v in b.ravel()) + "\n")


def load_mlp_text(lines) -> tuple[Mlp, dict]:
    fields = {}
    for line in lines:
        if line.strip():
            key, _, rest = line.strip().partition(" ")
            fields[key] = rest
    widths = [int(w) for w in fields.pop("widths").split()]
    net = Mlp(widths, output=fields.pop("output").strip())
    params = []
    for i in range(len(widths) - 1):
        W = np.array([float(v) for v in fields.pop(f"W{i}").split()]).reshape(widths[i], widths[i + 1])
        b = np.array([float(v) for v in fields.pop(f"b{i}").split()])
        params += [W, b]
    net.set_params(params)
    extra = {k: np.array([float(v) for v in val.split()]) for k, val in fields.items()}
    return net, extra
