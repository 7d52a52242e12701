"""Independent reference implementations used as oracles."""

import numpy as np


def naive_conv2d(x, w, b=None):
    """Direct zero-padded same-size correlation with explicit loops."""
    n, cin, h, wd = x.shape
    cout, _, k, _ = w.shape
    p = (k - 1) // 2
    out = np.zeros((n, cout, h, wd))
    for ni in range(n):
        for o in range(cout):
            for i in range(h):
                for j in range(wd):
                    acc = 0.0 if b is None else float(b[o])
                    for c in range(cin):
                        for di in range(k):
                            for dj in range(k):
                                yi, xj = i + di - p, j + dj - p
                                if 0 <= yi < h and 0 <= xj < wd:
                                    acc += x[ni, c, yi, xj] * w[o, c, di, dj]
                    out[ni, o, i, j] = acc
    return out


class ExtendedPrecisionOracle:
    """Central differences of the training loss on a long-double copy of a model.

    Some float64 parameter gradients of the full network are around 1e-10, which
    is below what float64 central differences can resolve against an O(1) loss.
    Evaluating the difference quotient in extended precision lowers the
    roundoff floor by about three orders of magnitude.
    """

    def __init__(self, model, x, y, h=1e-5):
        from pdcfnet.autograd import Tensor
        from pdcfnet.network import PDCFNet

        self.model = PDCFNet(model.config, dtype=np.longdouble)
        self.model.load_state_dict(model.state_dict())
        self.params = dict(self.model.named_parameters())
        self.x = Tensor(np.asarray(x, dtype=np.longdouble))
        self.y = Tensor(np.asarray(y, dtype=np.longdouble))
        self.h = h

    def _loss(self, x=None):
        from pdcfnet.autograd import no_grad
        from pdcfnet.losses import total_loss

        with no_grad():
            return total_loss(self.model(self.x if x is None else x), self.y)[0].data

    def param(self, name, idx):
        p = self.params[name]
        old = p.data[idx]
        p.data[idx] = old + self.h
        up = self._loss()
        p.data[idx] = old - self.h
        down = self._loss()
        p.data[idx] = old
        return float((up - down) / (2 * self.h))

    def input(self, idx):
        from pdcfnet.autograd import Tensor

        plus, minus = self.x.data.copy(), self.x.data.copy()
        plus[idx] += self.h
        minus[idx] -= self.h
        return float((self._loss(Tensor(plus)) - self._loss(Tensor(minus))) / (2 * self.h))


def rel_err(a, n):
    return abs(a - n) / max(abs(a), abs(n), 1e-12)
