"""Residual-attention GCN autoencoder for node anomaly detection.

Data flow for one forward pass::

    R  = FC_res(X)                          residual, ReLU stack, width d
    T1 = exp(-gamma * FC_att1(R))           attention for the hidden layer
    T2 = exp(-gamma * FC_att2(R))           attention for the embedding
    H1 = ReLU(S X W0)
    Z  = ReLU(S (H1 * T1) W1)
    Za = Z * T2                             fed to the decoders
    A_hat = sigmoid(Za Za^T)
    X_hat = MLP(Za)
    L  = (1 - alpha) ||A - A_hat||^2 + alpha ||X - X_hat - lambda R||^2

No layer has a bias term.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .errors import ConfigError, NumericalError, StateError, TrainingError
from .graph import AttributedGraph, NormalizedAdjacency, normalize_adjacency

logger = logging.getLogger(__name__)

STRATEGIES = ("residual", "attribute", "structure", "combined")
EMBED_ATTENTION = ("both", "structure", "attribute", "none")
CHECKPOINT_FORMAT = "resgcn-checkpoint"


@dataclass(frozen=True)
class Hyperparams:
    alpha: float = 0.8
    lam: float = 0.1
    gamma: float = 1.0
    lr: float = 0.01
    epochs: int = 100
    gcn_dims: tuple = (64, 32)
    res_layers: int = 3
    att_layers: int = 2
    decoder_layers: int = 2
    decoder_width: int = 64
    embed_attention: str = "both"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gcn_dims", tuple(int(w) for w in self.gcn_dims))
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be >= 0, got {self.lam}")
        if self.gamma < 0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be > 0, got {self.lr}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not self.gcn_dims or min(self.gcn_dims) < 1:
            raise ConfigError(f"gcn_dims must be a non-empty list of positive widths, got {self.gcn_dims}")
        for name in ("res_layers", "att_layers", "decoder_layers", "decoder_width"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.embed_attention not in EMBED_ATTENTION:
            raise ConfigError(f"embed_attention must be one of {EMBED_ATTENTION}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gcn_dims"] = list(self.gcn_dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        return cls(**d)


@dataclass
class ModelParams:
    """Weight matrices by role plus per-tensor Adam state.

    ``att[l]`` is the FC stack producing the attention map for GCN layer
    ``l``; the last map modulates the embedding.
    """

    res: list
    att: list
    gcn: list
    dec: list
    adam: dict = field(default_factory=dict)

    def named(self) -> dict[str, np.ndarray]:
        out = {f"res.{i}": w for i, w in enumerate(self.res)}
        for l, stack in enumerate(self.att):
            out.update({f"att{l}.{i}": w for i, w in enumerate(stack)})
        out.update({f"gcn.{i}": w for i, w in enumerate(self.gcn)})
        out.update({f"dec.{i}": w for i, w in enumerate(self.dec)})
        return out

    @classmethod
    def from_named(cls, tensors: dict[str, np.ndarray]) -> "ModelParams":
        def collect(prefix):
            keys = sorted((k for k in tensors if k.split(".")[0] == prefix), key=lambda k: int(k.split(".")[1]))
            return [np.array(tensors[k], dtype=np.float64) for k in keys]

        n_att = len({k.split(".")[0] for k in tensors if k.startswith("att")})
        return cls(
            res=collect("res"),
            att=[collect(f"att{l}") for l in range(n_att)],
            gcn=collect("gcn"),
            dec=collect("dec"),
        )

    def copy(self) -> "ModelParams":
        return ModelParams.from_named({k: w.copy() for k, w in self.named().items()})


def init_params(d: int, hp: Hyperparams, rng: np.random.Generator) -> ModelParams:
    """Glorot-uniform weights for all sub-networks, drawn in a fixed order."""
    res = [nn.glorot_init(d, d, rng) for _ in range(hp.res_layers)]
    att = []
    for width in hp.gcn_dims:
        dims = [d] + [width] * hp.att_layers
        att.append([nn.glorot_init(a, b, rng) for a, b in zip(dims, dims[1:])])
    gdims = [d, *hp.gcn_dims]
    gcn = [nn.glorot_init(a, b, rng) for a, b in zip(gdims, gdims[1:])]
    ddims = [hp.gcn_dims[-1]] + [hp.decoder_width] * (hp.decoder_layers - 1) + [d]
    dec = [nn.glorot_init(a, b, rng) for a, b in zip(ddims, ddims[1:])]
    return ModelParams(res, att, gcn, dec)


# ---------------------------------------------------------------------------
# building blocks (accept arrays or Tensors, return Tensors)


def _fc_relu_stack(x, weights):
    h = nn.as_tensor(x)
    for w in weights:
        h = nn.relu(nn.matmul(h, w))
    return h


def compute_residual(x, res_weights) -> nn.Tensor:
    """ReLU(... ReLU(X W0) W1 ...) over the residual stack, starting from X."""
    if not res_weights:
        raise ConfigError("the residual stack needs at least one layer")
    return _fc_relu_stack(x, res_weights)


def compute_attention(r, att_weights, gamma: float) -> list[nn.Tensor]:
    """One attention map ``exp(-gamma * FC(R))`` per GCN layer; entries lie in (0, 1]."""
    return [nn.exp_neg(_fc_relu_stack(r, stack), gamma) for stack in att_weights]


def encode(s: NormalizedAdjacency, x, thetas, gcn_weights) -> list[nn.Tensor]:
    """GCN layers; the input layer is plain, later inputs are scaled by attention.

    ``thetas[l]`` multiplies the output of layer ``l`` before it is fed to
    layer ``l + 1``. Returns the hidden outputs ``[H1, ..., Z]`` (unattended).
    """
    hidden = []
    h = nn.as_tensor(x)
    for l, w in enumerate(gcn_weights):
        inp = h if l == 0 else nn.mul(h, thetas[l - 1])
        h = nn.relu(nn.spmm(s, nn.matmul(inp, w)))
        hidden.append(h)
    return hidden


def decode_structure(z) -> nn.Tensor:
    return nn.sigmoid(nn.gram(z))


def decode_attributes(z, dec_weights) -> nn.Tensor:
    """MLP decoder: ReLU between layers, linear output so negative attributes are reachable."""
    h = nn.as_tensor(z)
    for i, w in enumerate(dec_weights):
        h = nn.matmul(h, w)
        if i < len(dec_weights) - 1:
            h = nn.relu(h)
    return h


def loss(a, x, a_hat, x_hat, r, alpha: float, lam: float):
    """Return ``(E_S, E_A, L)`` as 1x1 tensors."""
    e_s = nn.sq_frobenius(nn.sub(a, a_hat))
    e_a = nn.sq_frobenius(nn.sub(nn.sub(x, x_hat), nn.scale(r, lam)))
    total = nn.add(nn.scale(e_s, 1.0 - alpha), nn.scale(e_a, alpha))
    return e_s, e_a, total


# ---------------------------------------------------------------------------
# full model


@dataclass
class ForwardState:
    R: np.ndarray
    thetas: list
    hidden: list
    Z: np.ndarray
    Z_struct: np.ndarray
    Z_attr: np.ndarray
    X_hat: np.ndarray
    E_S: float
    E_A: float
    L: float

    @property
    def theta1(self) -> np.ndarray:
        return self.thetas[0]

    @property
    def theta2(self) -> np.ndarray:
        return self.thetas[-1]

    @property
    def H1(self) -> np.ndarray:
        return self.hidden[0]

    @property
    def A_hat(self) -> np.ndarray:
        """Dense reconstructed adjacency; O(n^2) memory, computed on request."""
        return nn._sigmoid(self.Z_struct @ self.Z_struct.T)


class ResGCN:
    """Model bound to one graph. Owns the parameters and optimiser state."""

    def __init__(self, graph: AttributedGraph, hp: Hyperparams, params: ModelParams | None = None,
                 block_rows: int = 2048):
        if not np.all(np.isfinite(graph.attributes)):
            raise NumericalError("graph attributes contain non-finite values")
        self.graph = graph
        self.hp = hp
        self.S = normalize_adjacency(graph)
        self.block_rows = block_rows
        if params is None:
            params = init_params(graph.d, hp, stage_rng(hp.seed, "init"))
        self.params = params
        self._loss = None
        self._leaves = None

    def _graph(self, leaves):
        """Record the forward computation on Tensors wrapping ``leaves``."""
        hp = self.hp
        x = nn.Tensor(self.graph.attributes)
        named = leaves
        res = [named[f"res.{i}"] for i in range(len(self.params.res))]
        att = [[named[f"att{l}.{i}"] for i in range(len(st))] for l, st in enumerate(self.params.att)]
        gcn = [named[f"gcn.{i}"] for i in range(len(self.params.gcn))]
        dec = [named[f"dec.{i}"] for i in range(len(self.params.dec))]

        r = compute_residual(x, res)
        thetas = compute_attention(r, att, hp.gamma)
        hidden = encode(self.S, x, thetas, gcn)
        z = hidden[-1]
        theta_z = thetas[len(gcn) - 1]
        z_att = nn.mul(z, theta_z)
        z_struct = z_att if hp.embed_attention in ("both", "structure") else z
        z_attr = z_att if hp.embed_attention in ("both", "attribute") else z
        x_hat = decode_attributes(z_attr, dec)
        e_s = nn.structure_error(self.graph.adjacency, z_struct, self.block_rows)
        e_a = nn.sq_frobenius(nn.sub(nn.sub(x, x_hat), nn.scale(r, hp.lam)))
        total = nn.add(nn.scale(e_s, 1.0 - hp.alpha), nn.scale(e_a, hp.alpha))
        state = ForwardState(
            R=r.data, thetas=[t.data for t in thetas], hidden=[h.data for h in hidden],
            Z=z.data, Z_struct=z_struct.data, Z_attr=z_attr.data, X_hat=x_hat.data,
            E_S=e_s.item(), E_A=e_a.item(), L=total.item(),
        )
        return state, total

    def forward(self, record: bool = True) -> ForwardState:
        leaves = {k: nn.Tensor(w, requires_grad=record, name=k) for k, w in self.params.named().items()}
        state, total = self._graph(leaves)
        if record:
            self._loss, self._leaves = total, leaves
        return state

    def backward(self) -> dict[str, np.ndarray]:
        if self._loss is None:
            raise StateError("backward() called before forward()")
        grads = nn.gradients(self._loss, self._leaves)
        self._loss = self._leaves = None
        return grads

    def step(self) -> ForwardState:
        """Forward, backward and one Adam update on every parameter."""
        state = self.forward()
        grads = self.backward()
        named = self.params.named()
        nn.adam_step(named, grads, self.params.adam, lr=self.hp.lr)
        return state

    def fit(self) -> list[tuple]:
        history = []
        for epoch in range(1, self.hp.epochs + 1):
            try:
                state = self.step()
            except NumericalError as exc:
                raise TrainingError(f"epoch {epoch}: {exc}") from exc
            history.append((epoch, state.E_S, state.E_A, state.L))
            logger.debug("epoch %d  E_S=%.6g  E_A=%.6g  L=%.6g", epoch, state.E_S, state.E_A, state.L)
        return history

    def score(self, strategy: str = "residual") -> "ScoreReport":
        return score_nodes(self.graph, self.params, self.hp, strategy, block_rows=self.block_rows)


def stage_rng(seed: int, stage: str) -> np.random.Generator:
    """Independent PCG64 stream for a named pipeline stage derived from one root seed."""
    stages = {"inject": 0, "init": 1, "train": 2, "synth": 3}
    return np.random.default_rng(np.random.SeedSequence([int(seed), stages[stage]]))


def train(g: AttributedGraph, hp: Hyperparams):
    """Full-batch training. Returns ``(params, history)`` with history rows ``(epoch, E_S, E_A, L)``.

    Each row holds the losses of the forward pass taken before that epoch's update.
    """
    model = ResGCN(g, hp)
    history = model.fit()
    return model.params, history


# ---------------------------------------------------------------------------
# scoring


@dataclass(frozen=True, eq=False)
class ScoreReport:
    strategy: str
    scores: np.ndarray
    ranking: np.ndarray


def rank_scores(scores) -> np.ndarray:
    """Indices by descending score; ties go to the smaller index."""
    scores = np.asarray(scores, dtype=np.float64)
    return np.lexsort((np.arange(scores.size), -scores))


def structure_row_errors(adjacency, z_struct, block_rows=2048) -> np.ndarray:
    n = z_struct.shape[0]
    out = np.empty(n)
    for lo in range(0, n, block_rows):
        hi = min(lo + block_rows, n)
        diff = adjacency[lo:hi].toarray() - nn._sigmoid(z_struct[lo:hi] @ z_struct.T)
        out[lo:hi] = np.sqrt(np.sum(diff * diff, axis=1))
    return out


def score_nodes(g: AttributedGraph, params: ModelParams, hp: Hyperparams, strategy: str,
                block_rows: int = 2048) -> ScoreReport:
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    model = ResGCN(g, hp, params=params, block_rows=block_rows)
    st = model.forward(record=False)
    if strategy == "residual":
        scores = np.linalg.norm(st.R, axis=1)
    else:
        attr = np.linalg.norm(g.attributes - st.X_hat, axis=1)
        struct = structure_row_errors(g.adjacency, st.Z_struct, block_rows)
        scores = {"attribute": attr, "structure": struct,
                  "combined": (1.0 - hp.alpha) * struct + hp.alpha * attr}[strategy]
    return ScoreReport(strategy, scores, rank_scores(scores))


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, params: ModelParams, hp: Hyperparams, extra: dict | None = None) -> None:
    """JSON checkpoint: hyperparameters, seed and every weight with its shape."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": 1,
        "seed": hp.seed,
        "hyperparams": hp.to_dict(),
        "tensors": {
            name: {"shape": list(w.shape), "data": [float(v) for v in w.ravel()]}
            for name, w in params.named().items()
        },
    }
    if extra:
        doc["extra"] = extra
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path):
    """Return ``(params, hp, extra)``."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ConfigError(f"{path} is not a resgcn checkpoint")
    tensors = {
        name: np.asarray(t["data"], dtype=np.float64).reshape(t["shape"])
        for name, t in doc["tensors"].items()
    }
    return ModelParams.from_named(tensors), Hyperparams.from_dict(doc["hyperparams"]), doc.get("extra", {})
