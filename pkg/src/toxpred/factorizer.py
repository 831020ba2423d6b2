"""Matrix factorization with shared bias vectors and a sigmoid head.

The predicted toxicity of a (user, subreddit) pair is
``sigmoid(<U_u + b_users, V_s + b_subs>)``: one latent vector per user
and per subreddit, plus two bias vectors shared by all users and all
subreddits that help regularize without adding expressiveness.  Training
is mini-batch Adam on binary cross-entropy with an L2 penalty on all
parameters, plus loss-plateau early stopping.
"""

import itertools
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from .evaluation import gmean_score

logger = logging.getLogger(__name__)

PROB_CLIP = 1e-12
CHECKPOINT_FORMAT = "mf-checkpoint-v1"

# Hyperparameter search space; the reference configuration on real data
# is d=128, lr=1e-5, l2=1e-4, batch 1024.
DEFAULT_GRID = {
    "d": [32, 64, 128, 256, 512, 1024, 2048],
    "learning_rate": [1e-2, 1e-3, 1e-4, 1e-5],
    "l2_lambda": [1e-2, 1e-4, 1e-6, 0.0],
    "batch_size": [256, 1024, 4096, 16384],
}


@dataclass
class ModelParams:
    """U is n_users x d, V is n_subs x d, biases are length-d vectors."""

    U: np.ndarray
    V: np.ndarray
    b_users: np.ndarray
    b_subs: np.ndarray

    @property
    def d(self):
        return self.U.shape[1]

    def copy(self):
        return ModelParams(self.U.copy(), self.V.copy(),
                           self.b_users.copy(), self.b_subs.copy())

    def blocks(self):
        return (self.U, self.V, self.b_users, self.b_subs)


@dataclass
class TrainConfig:
    d: int
    learning_rate: float
    l2_lambda: float = 0.0
    batch_size: int = 256
    max_epochs: int = 1000
    es_tolerance: float = 0.005
    es_patience: int = 7
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.es_patience < 1:
            raise ValueError("es_patience must be >= 1")


@dataclass
class AdamState:
    first_moment: ModelParams
    second_moment: ModelParams
    step_count: int = 0


@dataclass
class TrainReport:
    train_losses: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    val_gmeans: list = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    @property
    def epochs_run(self):
        return len(self.train_losses)


def init_params(n_users, n_subs, d, seed):
    """Gaussian factors with std 0.1/sqrt(d) and zero biases.

    The scaling keeps initial logits around order 0.01 regardless of d.
    """
    if min(n_users, n_subs, d) < 1:
        raise ValueError("n_users, n_subs and d must all be >= 1")
    rng = np.random.default_rng(seed)
    scale = 0.1 / np.sqrt(d)
    return ModelParams(
        U=rng.normal(0.0, scale, size=(n_users, d)),
        V=rng.normal(0.0, scale, size=(n_subs, d)),
        b_users=np.zeros(d),
        b_subs=np.zeros(d),
    )


def zeros_like_params(params):
    return ModelParams(*(np.zeros_like(block) for block in params.blocks()))


def init_adam_state(params):
    return AdamState(zeros_like_params(params), zeros_like_params(params), 0)


def predict(params, u, s):
    """Predicted toxicity probability for one (user, subreddit) pair."""
    z = np.dot(params.U[u] + params.b_users, params.V[s] + params.b_subs)
    return float(expit(z))


def predict_batch(params, u_idx, s_idx):
    """Vectorized predicted probabilities for parallel index arrays."""
    left = params.U[u_idx] + params.b_users
    right = params.V[s_idx] + params.b_subs
    return expit(np.einsum("ij,ij->i", left, right))


def _as_arrays(batch):
    if isinstance(batch, tuple) and len(batch) == 3:
        u, s, y = batch
    else:
        rows = list(batch)
        if not rows:
            return np.array([], int), np.array([], int), np.array([])
        u, s, y = zip(*rows)
    return (np.asarray(u, dtype=int), np.asarray(s, dtype=int),
            np.asarray(y, dtype=float))


def _l2_penalty(params):
    return sum(float(np.sum(block * block)) for block in params.blocks())


def batch_loss(params, batch, l2_lambda):
    """Mean binary cross-entropy plus l2_lambda times the squared norm of all parameters.

    Probabilities are clamped away from 0 and 1 before the logarithms.
    """
    u_idx, s_idx, y = _as_arrays(batch)
    if len(y) == 0:
        raise ValueError("batch must be non-empty")
    p = np.clip(predict_batch(params, u_idx, s_idx), PROB_CLIP, 1.0 - PROB_CLIP)
    bce = -np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    return float(bce + l2_lambda * _l2_penalty(params))


def batch_gradients(params, batch, l2_lambda):
    """Analytic gradients of batch_loss, shaped like the parameters.

    Each item contributes its mean-reduced residual (p - y)/B times the
    opposite side's effective embedding; the L2 term adds 2*lambda*theta
    everywhere.
    """
    u_idx, s_idx, y = _as_arrays(batch)
    if len(y) == 0:
        raise ValueError("batch must be non-empty")
    left = params.U[u_idx] + params.b_users
    right = params.V[s_idx] + params.b_subs
    p = expit(np.einsum("ij,ij->i", left, right))
    residual = (p - y) / len(y)

    grads = ModelParams(
        U=2.0 * l2_lambda * params.U,
        V=2.0 * l2_lambda * params.V,
        b_users=2.0 * l2_lambda * params.b_users,
        b_subs=2.0 * l2_lambda * params.b_subs,
    )
    weighted_right = residual[:, None] * right
    weighted_left = residual[:, None] * left
    np.add.at(grads.U, u_idx, weighted_right)
    np.add.at(grads.V, s_idx, weighted_left)
    grads.b_users += weighted_right.sum(axis=0)
    grads.b_subs += weighted_left.sum(axis=0)
    return grads


def adam_step(params, grads, state, config):
    """In-place Adam update with bias correction; returns (params, state)."""
    state.step_count += 1
    t = state.step_count
    b1, b2 = config.beta1, config.beta2
    for theta, g, m, v in zip(params.blocks(), grads.blocks(),
                              state.first_moment.blocks(),
                              state.second_moment.blocks()):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        theta -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)
    return params, state


def _validation_metrics(params, val_arrays):
    u_idx, s_idx, y = val_arrays
    p = np.clip(predict_batch(params, u_idx, s_idx), PROB_CLIP, 1.0 - PROB_CLIP)
    loss = float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))
    gmean = gmean_score(y.astype(int), (p > 0.5).astype(int))
    return loss, gmean


def fit(train, validation, n_users, n_subs, config):
    """Train a model on (user, subreddit, label) triples.

    Shuffles the training triples every epoch under the config seed and
    applies one Adam step per mini-batch.  After each epoch the
    validation cross-entropy is computed (without the L2 term); when it
    fails to improve on the best value by more than es_tolerance for
    es_patience consecutive epochs, training stops and the best epoch's
    parameters are restored.  With an empty validation set the model
    simply runs to max_epochs.

    Returns (ModelParams, TrainReport).
    """
    train_u, train_s, train_y = _as_arrays(train)
    if len(train_y) == 0:
        raise ValueError("training set is empty")
    val_arrays = _as_arrays(validation)
    has_validation = len(val_arrays[2]) > 0

    params = init_params(n_users, n_subs, config.d, config.seed)
    state = init_adam_state(params)
    shuffle_rng = np.random.default_rng((config.seed, 1))
    report = TrainReport()

    best_loss = np.inf
    best_params = None
    plateau = 0
    n_train = len(train_y)

    for epoch in range(1, config.max_epochs + 1):
        perm = shuffle_rng.permutation(n_train)
        for start in range(0, n_train, config.batch_size):
            idx = perm[start:start + config.batch_size]
            grads = batch_gradients(
                params, (train_u[idx], train_s[idx], train_y[idx]), config.l2_lambda)
            adam_step(params, grads, state, config)

        report.train_losses.append(
            batch_loss(params, (train_u, train_s, train_y), config.l2_lambda))
        if not has_validation:
            continue

        val_loss, val_gmean = _validation_metrics(params, val_arrays)
        report.val_losses.append(val_loss)
        report.val_gmeans.append(val_gmean)

        if best_loss - val_loss > config.es_tolerance or best_params is None:
            best_loss = val_loss
            best_params = params.copy()
            report.best_epoch = epoch
            plateau = 0
        else:
            plateau += 1
            if plateau >= config.es_patience:
                report.stopped_early = True
                logger.info("early stop at epoch %d (best epoch %d, val loss %.6f)",
                            epoch, report.best_epoch, best_loss)
                params = best_params
                break

    return params, report


def grid_search(train, validation, n_users, n_subs, grid=None, base=None):
    """Train one model per grid cell and keep the best validation G-mean.

    ``grid`` maps the axes d / learning_rate / l2_lambda / batch_size to
    candidate lists (defaults to DEFAULT_GRID); the remaining TrainConfig
    fields come from ``base``.  Ties are broken toward lower d, then
    lower learning rate.  Returns (best config, best params, cell report
    list).
    """
    grid = dict(DEFAULT_GRID if grid is None else grid)
    for axis in ("d", "learning_rate", "l2_lambda", "batch_size"):
        if not grid.get(axis):
            raise ValueError(f"grid axis {axis!r} must be non-empty")
    if base is None:
        base = TrainConfig(d=grid["d"][0], learning_rate=grid["learning_rate"][0])

    best = None
    cells = []
    for d, lr, l2, batch in itertools.product(
            grid["d"], grid["learning_rate"], grid["l2_lambda"], grid["batch_size"]):
        config = TrainConfig(
            d=d, learning_rate=lr, l2_lambda=l2, batch_size=batch,
            max_epochs=base.max_epochs, es_tolerance=base.es_tolerance,
            es_patience=base.es_patience, beta1=base.beta1, beta2=base.beta2,
            epsilon=base.epsilon, seed=base.seed)
        params, report = fit(train, validation, n_users, n_subs, config)
        val_u, val_s, val_y = _as_arrays(validation)
        gmean = gmean_score(
            val_y.astype(int),
            (predict_batch(params, val_u, val_s) > 0.5).astype(int))
        cells.append({
            "d": d, "learning_rate": lr, "l2_lambda": l2, "batch_size": batch,
            "val_gmean": gmean, "best_epoch": report.best_epoch,
            "epochs_run": report.epochs_run, "stopped_early": report.stopped_early,
        })
        logger.info("grid cell d=%d lr=%g l2=%g batch=%d -> val gmean %.4f",
                    d, lr, l2, batch, gmean)
        candidate = (gmean, -d, -lr)
        if best is None or candidate > best[0]:
            best = ((gmean, -d, -lr), config, params)

    _, best_config, best_params = best
    return best_config, best_params, cells


def save_checkpoint(path, params, config):
    """Single-file model container: parameter blocks plus the training config."""
    meta = {"format": CHECKPOINT_FORMAT, "config": asdict(config),
            "n_users": params.U.shape[0], "n_subs": params.V.shape[0]}
    np.savez(path, U=params.U, V=params.V, b_users=params.b_users,
             b_subs=params.b_subs, meta=np.array(json.dumps(meta, sort_keys=True)))


def load_checkpoint(path):
    with np.load(path) as data:
        try:
            meta = json.loads(str(data["meta"]))
            if meta.get("format") != CHECKPOINT_FORMAT:
                raise ValueError(
                    f"unsupported checkpoint format: {meta.get('format')!r}")
            params = ModelParams(U=data["U"], V=data["V"],
                                 b_users=data["b_users"], b_subs=data["b_subs"])
        except KeyError as exc:
            raise ValueError(f"{path}: not a model checkpoint (missing {exc})") from exc
    config = TrainConfig(**meta["config"])
    return params, config
