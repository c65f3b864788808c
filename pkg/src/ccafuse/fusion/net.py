"""Two-stream fusion network with hand-written backpropagation.

Vector views::

    x_a -> [affine -> relu]* -> h_a -> projection (FC-A) -> p_a --+
                                                                   concat -> affine -> relu -> affine -> logits
    x_b -> [affine -> relu]* -> h_b -> projection (FC-B) -> p_b --+

Matrix views (2-D CCA layer)::

    X -> C channels relu(w_c X + c_c) -> channel mean M -> L^T M R + B -> flatten -> ...

In CCA-layer mode the projection is refit by CCA on each batch and treated as
a constant in the backward pass.
"""
from dataclasses import dataclass, field

import numpy as np

from ..cca import fit_cca, project
from ..errors import DimensionError, SingularityError
from ..linalg import DEFAULT_EPS


@dataclass(frozen=True)
class NetConfig:
    """Layer widths. Projection sizes (``k``, ``d1``, ``d2``) come from the schedule."""

    hidden: tuple = (32,)
    classifier_hidden: int = 32
    channels: int = 4

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "hidden" in d:
            d["hidden"] = tuple(d["hidden"])
        return cls(**d)

    def as_dict(self):
        return {"hidden": list(self.hidden), "classifier_hidden": self.classifier_hidden, "channels": self.channels}


def _glorot(rng, fan_in, fan_out):
    lim = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=(fan_in, fan_out))


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy and its gradient w.r.t. ``logits``."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e.sum(axis=1, keepdims=True)
    logp = z - np.log(s)
    n = logits.shape[0]
    loss = -float(logp[np.arange(n), labels].mean())
    d = e / s
    d[np.arange(n), labels] -= 1.0
    return loss, d / n


@dataclass
class FeatureNet:
    """Parameters live in ``params`` keyed by ``'<stream>.<name>'``."""

    config: NetConfig
    kind: str  # "vector" | "matrix"
    in_shape_a: tuple
    in_shape_b: tuple
    n_classes: int
    k: int = 4
    d1: int = 2
    d2: int = 2
    params: dict = field(default_factory=dict)

    @classmethod
    def init(cls, config, in_shape_a, in_shape_b, n_classes, rng, k=4, d1=2, d2=2):
        kind = "matrix" if len(in_shape_a) == 2 else "vector"
        net = cls(config, kind, tuple(in_shape_a), tuple(in_shape_b), n_classes, k, d1, d2)
        p = net.params
        if kind == "vector":
            for s, shape in (("a", in_shape_a), ("b", in_shape_b)):
                widths = [shape[0], *config.hidden]
                for i in range(len(config.hidden)):
                    p[f"{s}.W{i}"] = _glorot(rng, widths[i], widths[i + 1])
                    p[f"{s}.b{i}"] = np.zeros(widths[i + 1])
                p[f"{s}.Wp"] = _glorot(rng, widths[-1], k)
                p[f"{s}.bp"] = np.zeros(k)
            fused = 2 * k
        else:
            for s, shape in (("a", in_shape_a), ("b", in_shape_b)):
                p[f"{s}.w"] = rng.uniform(-1.0, 1.0, size=config.channels)
                p[f"{s}.c"] = rng.uniform(-0.1, 0.1, size=config.channels)
                p[f"{s}.L"] = _glorot(rng, shape[0], d1)
                p[f"{s}.R"] = _glorot(rng, shape[1], d2)
                p[f"{s}.B"] = np.zeros((d1, d2))
            fused = 2 * d1 * d2
        p["c.W1"] = _glorot(rng, fused, config.classifier_hidden)
        p["c.b1"] = np.zeros(config.classifier_hidden)
        p["c.W2"] = _glorot(rng, config.classifier_hidden, n_classes)
        p["c.b2"] = np.zeros(n_classes)
        return net

    def copy(self):
        return FeatureNet(
            self.config, self.kind, self.in_shape_a, self.in_shape_b, self.n_classes,
            self.k, self.d1, self.d2, {name: v.copy() for name, v in self.params.items()},
        )

    def _check(self, xa, xb):
        if xa.shape[1:] != self.in_shape_a or xb.shape[1:] != self.in_shape_b:
            raise DimensionError(
                f"batch shapes {xa.shape[1:]}, {xb.shape[1:]} do not match net inputs "
                f"{self.in_shape_a}, {self.in_shape_b}"
            )
        if xa.shape[0] != xb.shape[0]:
            raise DimensionError("views have different batch sizes")

    # stream-level pieces

    def _stream_vec(self, s, x):
        acts = [x]
        h = x
        for i in range(len(self.config.hidden)):
            h = np.maximum(h @ self.params[f"{s}.W{i}"] + self.params[f"{s}.b{i}"], 0.0)
            acts.append(h)
        return acts

    def _stream_mat(self, s, x):
        w, c = self.params[f"{s}.w"], self.params[f"{s}.c"]
        pre = x[:, None, :, :] * w[None, :, None, None] + c[None, :, None, None]
        return pre, np.maximum(pre, 0.0).mean(axis=1)

    def features(self, x, stream):
        """Input to the projection layer: last hidden layer, or channel-mean map."""
        if self.kind == "vector":
            return self._stream_vec(stream, x)[-1]
        return self._stream_mat(stream, x)[1]

    def project_features(self, h, stream):
        if self.kind == "vector":
            return h @ self.params[f"{stream}.Wp"] + self.params[f"{stream}.bp"]
        p = self.params
        return np.swapaxes(p[f"{stream}.L"], 0, 1) @ h @ p[f"{stream}.R"] + p[f"{stream}.B"]

    # full network

    def forward(self, xa, xb, cca_layer=False, reg_epsilon=DEFAULT_EPS):
        xa = np.asarray(xa, dtype=np.float64)
        xb = np.asarray(xb, dtype=np.float64)
        self._check(xa, xb)
        n = xa.shape[0]
        cache = {"n": n, "cca_layer": cca_layer}
        if self.kind == "vector":
            acts_a = self._stream_vec("a", xa)
            acts_b = self._stream_vec("b", xb)
            cache["acts_a"], cache["acts_b"] = acts_a, acts_b
            ha, hb = acts_a[-1], acts_b[-1]
            if cca_layer:
                k = self.k
                if n <= k + 1:
                    raise SingularityError(f"CCA layer needs a batch larger than k + 1 = {k + 1}, got {n}")
                model = fit_cca(ha, hb, k, reg_epsilon)
                pa, pb = project(model, ha, hb)
                cache["cca_model"] = model
            else:
                pa = self.project_features(ha, "a")
                pb = self.project_features(hb, "b")
        else:
            pre_a, ma = self._stream_mat("a", xa)
            pre_b, mb = self._stream_mat("b", xb)
            cache.update(x_a=xa, x_b=xb, pre_a=pre_a, pre_b=pre_b, ma=ma, mb=mb)
            pa = self.project_features(ma, "a")
            pb = self.project_features(mb, "b")
        cache["pa"], cache["pb"] = pa, pb
        z = np.concatenate([pa.reshape(n, -1), pb.reshape(n, -1)], axis=1)
        c1 = np.maximum(z @ self.params["c.W1"] + self.params["c.b1"], 0.0)
        logits = c1 @ self.params["c.W2"] + self.params["c.b2"]
        cache["z"], cache["c1"] = z, c1
        return logits, cache

    def backward(self, cache, dlogits, dpa=None, dpb=None):
        """Parameter gradients given ``dL/dlogits`` plus optional direct terms on the projections."""
        p = self.params
        g = {}
        z, c1 = cache["z"], cache["c1"]
        g["c.W2"] = c1.T @ dlogits
        g["c.b2"] = dlogits.sum(axis=0)
        dc1 = (dlogits @ p["c.W2"].T) * (c1 > 0)
        g["c.W1"] = z.T @ dc1
        g["c.b1"] = dc1.sum(axis=0)
        dz = dc1 @ p["c.W1"].T
        pa, pb = cache["pa"], cache["pb"]
        half = pa[0].size
        dpa_tot = dz[:, :half].reshape(pa.shape)
        dpb_tot = dz[:, half:].reshape(pb.shape)
        if dpa is not None:
            dpa_tot = dpa_tot + dpa
        if dpb is not None:
            dpb_tot = dpb_tot + dpb
        if self.kind == "vector":
            for s, acts, dp in (("a", cache["acts_a"], dpa_tot), ("b", cache["acts_b"], dpb_tot)):
                h = acts[-1]
                if cache["cca_layer"]:
                    w = cache["cca_model"].u if s == "a" else cache["cca_model"].v
                    g[f"{s}.Wp"] = np.zeros_like(p[f"{s}.Wp"])
                    g[f"{s}.bp"] = np.zeros_like(p[f"{s}.bp"])
                else:
                    w = p[f"{s}.Wp"]
                    g[f"{s}.Wp"] = h.T @ dp
                    g[f"{s}.bp"] = dp.sum(axis=0)
                dh = dp @ w.T
                for i in reversed(range(len(self.config.hidden))):
                    dh = dh * (acts[i + 1] > 0)
                    g[f"{s}.W{i}"] = acts[i].T @ dh
                    g[f"{s}.b{i}"] = dh.sum(axis=0)
                    dh = dh @ p[f"{s}.W{i}"].T
        else:
            for s, x, pre, m, dp in (
                ("a", cache["x_a"], cache["pre_a"], cache["ma"], dpa_tot),
                ("b", cache["x_b"], cache["pre_b"], cache["mb"], dpb_tot),
            ):
                lm, rm = p[f"{s}.L"], p[f"{s}.R"]
                g[f"{s}.B"] = dp.sum(axis=0)
                # P = L^T M R
                g[f"{s}.L"] = np.einsum("tij,jk,tlk->il", m, rm, dp)
                g[f"{s}.R"] = np.einsum("tij,il,tlk->jk", m, lm, dp)
                dm = lm @ dp @ rm.T
                dpre = dm[:, None, :, :] * (pre > 0) / pre.shape[1]
                g[f"{s}.c"] = dpre.sum(axis=(0, 2, 3))
                g[f"{s}.w"] = np.einsum("tcij,tij->c", dpre, x)
        return g

    def predict(self, xa, xb, cca_layer=False, reg_epsilon=DEFAULT_EPS):
        logits, _ = self.forward(xa, xb, cca_layer, reg_epsilon)
        return np.argmax(logits, axis=1)
