"""Training schedules: baseline, correlation-regularized, CCA replacement, per-batch CCA layer."""
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from ..cca import fit_cca
from ..cca2d import fit_2dcca
from ..corr import corr_loss, grad_from_workspace
from ..errors import ParameterError, TrainingError
from ..linalg import DEFAULT_EPS
from .net import FeatureNet, NetConfig, softmax_cross_entropy


class Mode(str, Enum):
    BASELINE = "BASELINE"
    CCAR = "CCAR"
    ACCAR = "ACCAR"
    CCA_LAYER = "CCA_LAYER"
    ACCAR_2D = "ACCAR_2D"


@dataclass(frozen=True)
class TrainSchedule:
    mode: Mode = Mode.BASELINE
    lambda_corr: float = 0.5
    epochs: int = 80
    cca_first_m: int = 60
    cca_freq_t: int = 10
    k: int = 4
    d1: int = 2
    d2: int = 2
    batch_size: int = 64
    learning_rate: float = 0.05
    seed: int = 0
    reg_epsilon: float = DEFAULT_EPS
    cca2d_max_iters: int = 30

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.epochs < 0:
            raise ParameterError("epochs must be >= 0")
        if not 0 <= self.cca_first_m <= self.epochs:
            raise ParameterError(f"cca_first_m={self.cca_first_m} must lie in [0, epochs={self.epochs}]")
        if self.cca_freq_t < 1:
            raise ParameterError("cca_freq_t must be >= 1")
        if self.lambda_corr < 0:
            raise ParameterError("lambda_corr must be >= 0")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ParameterError("learning_rate must be >= 0")
        if self.reg_epsilon < 0:
            raise ParameterError("reg_epsilon must be >= 0")
        if min(self.k, self.d1, self.d2) < 1:
            raise ParameterError("projection sizes k, d1, d2 must be >= 1")

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def as_dict(self):
        d = asdict(self)
        d["mode"] = self.mode.value
        return d

    def replaces_at(self, epoch):
        return (
            self.mode in (Mode.ACCAR, Mode.ACCAR_2D)
            and epoch < self.cca_first_m
            and epoch % self.cca_freq_t == 0
        )


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    train_loss: float
    train_corr: float
    val_accuracy: float
    cca_replaced: bool


def init_net(dataset, net_config, schedule, rng):
    return FeatureNet.init(
        net_config,
        dataset.view_a.shape[1:],
        dataset.view_b.shape[1:],
        dataset.n_classes,
        rng,
        k=schedule.k,
        d1=schedule.d1,
        d2=schedule.d2,
    )


def forward(net, schedule, xa, xb):
    """Logits and cached activations for one batch under ``schedule``'s mode."""
    return net.forward(xa, xb, cca_layer=schedule.mode is Mode.CCA_LAYER, reg_epsilon=schedule.reg_epsilon)


def batch_loss(net, schedule, xa, xb, labels, with_grads=True):
    """Total loss on a batch and, optionally, its parameter gradients.

    Returns ``(loss, grads)``; ``grads`` is ``None`` when not requested.
    """
    logits, cache = forward(net, schedule, xa, xb)
    loss, dlogits = softmax_cross_entropy(logits, labels)
    dpa = dpb = None
    if schedule.mode is Mode.CCAR:
        n = logits.shape[0]
        closs, ws = corr_loss(cache["pa"].reshape(n, -1), cache["pb"].reshape(n, -1), schedule.reg_epsilon)
        loss = loss + schedule.lambda_corr * closs
        if with_grads:
            gx, gy = grad_from_workspace(ws)
            dpa = schedule.lambda_corr * gx.reshape(cache["pa"].shape)
            dpb = schedule.lambda_corr * gy.reshape(cache["pb"].shape)
    if not with_grads:
        return loss, None
    return loss, net.backward(cache, dlogits, dpa, dpb)


def replace_projection(net, dataset, schedule):
    """Overwrite the projection layers with transforms fitted on full-dataset features.

    The bias is set to minus the projected mean, so the layer reproduces the
    fitted model's projection exactly. Returns the fitted model.
    """
    ha = net.features(dataset.view_a, "a")
    hb = net.features(dataset.view_b, "b")
    p = net.params
    if net.kind == "vector":
        model = fit_cca(ha, hb, net.k, schedule.reg_epsilon)
        p["a.Wp"] = model.u.copy()
        p["b.Wp"] = model.v.copy()
        p["a.bp"] = -(model.mean_x @ model.u)
        p["b.bp"] = -(model.mean_y @ model.v)
        return model
    model = fit_2dcca(ha, hb, net.d1, net.d2, max_iters=schedule.cca2d_max_iters, reg_epsilon=schedule.reg_epsilon)
    p["a.L"], p["a.R"] = model.lx.copy(), model.rx.copy()
    p["b.L"], p["b.R"] = model.ly.copy(), model.ry.copy()
    p["a.B"] = -(model.lx.T @ model.mean_x @ model.rx)
    p["b.B"] = -(model.ly.T @ model.mean_y @ model.ry)
    return model


def projection_correlation(net, schedule, dataset):
    """Sum of canonical correlations between the two projections on ``dataset``."""
    _, cache = forward(net, schedule, dataset.view_a, dataset.view_b)
    n = dataset.n
    loss, _ = corr_loss(cache["pa"].reshape(n, -1), cache["pb"].reshape(n, -1), schedule.reg_epsilon)
    return -loss


def mode_fits(mode, is_matrix):
    """BASELINE and CCAR run on either view type; the replacement and CCA-layer modes on one."""
    mode = Mode(mode)
    if mode in (Mode.BASELINE, Mode.CCAR):
        return True
    return (mode is Mode.ACCAR_2D) == is_matrix


def _check_compatible(dataset, schedule):
    if dataset.n == 0:
        raise ParameterError("empty dataset")
    if not mode_fits(schedule.mode, dataset.is_matrix):
        raise ParameterError(
            f"mode {schedule.mode.value} needs {'matrix' if schedule.mode is Mode.ACCAR_2D else 'vector'} views"
        )


def train(dataset, net_config=None, schedule=None, val=None, callback=None):
    """Mini-batch gradient descent under one of the fusion schedules.

    Each epoch reshuffles with the schedule's seeded generator and steps
    through full batches only (a remainder shorter than ``batch_size`` is
    skipped that epoch). In replacement modes the projection layer is
    overwritten *before* that epoch's gradient steps. ``callback(stage,
    epoch, net)`` is invoked with ``stage='start'`` after any replacement
    and ``'end'`` after the epoch's updates.

    Returns ``(net, logs)``.
    """
    net_config = net_config or NetConfig()
    schedule = schedule or TrainSchedule()
    _check_compatible(dataset, schedule)
    rng = np.random.default_rng(schedule.seed)
    net = init_net(dataset, net_config, schedule, rng)
    val = val if val is not None else dataset
    n = dataset.n
    bs = min(schedule.batch_size, n)
    logs = []
    for epoch in range(schedule.epochs):
        replaced = schedule.replaces_at(epoch)
        if replaced:
            replace_projection(net, dataset, schedule)
        if callback:
            callback("start", epoch, net)
        perm = rng.permutation(n)
        losses = []
        for start in range(0, n - bs + 1, bs):
            idx = perm[start : start + bs]
            loss, grads = batch_loss(net, schedule, dataset.view_a[idx], dataset.view_b[idx], dataset.labels[idx])
            if not np.isfinite(loss):
                raise TrainingError("loss is not finite", epoch)
            for name, gval in grads.items():
                net.params[name] -= schedule.learning_rate * gval
            losses.append(loss)
        if not all(np.all(np.isfinite(v)) for v in net.params.values()):
            raise TrainingError("parameters are not finite", epoch)
        logs.append(
            EpochLog(
                epoch=epoch,
                train_loss=float(np.mean(losses)),
                train_corr=projection_correlation(net, schedule, dataset),
                val_accuracy=evaluate(net, schedule, val),
                cca_replaced=replaced,
            )
        )
        if callback:
            callback("end", epoch, net)
    return net, logs


def evaluate(net, schedule, dataset):
    """Fraction of samples whose argmax logit (lowest index on ties) equals the label.

    In CCA-layer mode the projection is fitted on ``dataset`` as one batch.
    """
    if dataset.n == 0:
        raise ParameterError("cannot evaluate on an empty dataset")
    logits, _ = forward(net, schedule, dataset.view_a, dataset.view_b)
    return float(np.mean(np.argmax(logits, axis=1) == dataset.labels))


def relative_error(a, b, floor=1e-8):
    """Elementwise ``|a - b| / max(|a|, |b|, floor)``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def network_gradcheck(net, schedule, xa, xb, labels, step=1e-6, floor=1e-6):
    """Max relative error between backprop and central differences over all parameters."""
    _, grads = batch_loss(net, schedule, xa, xb, labels)
    worst = 0.0
    for name, value in net.params.items():
        fd = np.zeros_like(value)
        flat = value.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            lp, _ = batch_loss(net, schedule, xa, xb, labels, with_grads=False)
            flat[i] = orig - step
            lm, _ = batch_loss(net, schedule, xa, xb, labels, with_grads=False)
            flat[i] = orig
            fd.reshape(-1)[i] = (lp - lm) / (2 * step)
        worst = max(worst, float(relative_error(grads[name], fd, floor).max()))
    return worst
