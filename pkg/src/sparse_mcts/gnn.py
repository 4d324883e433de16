"""Message-passing policy network with hand-written reverse mode.

Shapes use the row-vector convention: node states are ``(N, d)`` arrays and
a linear map is ``x @ W + b``. A layer computes::

    P = H @ t1 + A @ (H @ t2) + Eagg @ t3        # Eagg[u] = sum of e_uv over N(u)
    H' = MLP2(P)                                  # two ReLU hidden layers

and the policy is a softmax over per-node sums of the last layer, taken only
over nodes not yet selected. Several graph states can be packed into one
block-diagonal batch.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import AllNodesSelected, CorruptFile, ShapeMismatch, VersionMismatch
from .features import EDGE_DIM, NODE_DIM, SELECTED_COL, static_features
from .instances import Instance

MODEL_VERSION = 1
EMBED_HIDDEN = 3
MLP2_HIDDEN = 2
NOMINAL_DEGREE = 8  # neighbourhood size assumed when scaling message weights at init


def _mlp_names(prefix: str, depth: int) -> list[tuple[str, str]]:
    return [(f"{prefix}.W{i}", f"{prefix}.b{i}") for i in range(depth + 1)]


def param_shapes(d: int, n_layers: int) -> dict[str, tuple]:
    shapes: dict[str, tuple] = {}
    for i, (w, b) in enumerate(_mlp_names("embed", EMBED_HIDDEN)):
        shapes[w] = (NODE_DIM if i == 0 else d, d)
        shapes[b] = (d,)
    for layer in range(n_layers):
        p = f"layer{layer}"
        shapes[f"{p}.t1"] = (d, d)
        shapes[f"{p}.t2"] = (d, d)
        shapes[f"{p}.t3"] = (EDGE_DIM, d)
        for w, b in _mlp_names(f"{p}.mlp", MLP2_HIDDEN):
            shapes[w] = (d, d)
            shapes[b] = (d,)
    return shapes


def param_group(name: str) -> str:
    """Coarse group label used in gradient checks: embed, t1, t2, t3 or mlp2."""
    if name.startswith("embed"):
        return "embed"
    tail = name.split(".", 1)[1]
    return "mlp2" if tail.startswith("mlp") else tail


class PolicyModel:
    def __init__(self, d: int = 128, n_layers: int = 3, seed: int = 0, out_scale: float = 1e-3, params=None, meta=None):
        self.d = int(d)
        self.n_layers = int(n_layers)
        self.seed = int(seed)
        self.out_scale = float(out_scale)
        self.meta = dict(meta or {})
        shapes = param_shapes(self.d, self.n_layers)
        if params is None:
            params = self._init(shapes)
        self.params: dict[str, np.ndarray] = params

    def _init(self, shapes):
        # He-uniform MLP weights and zero biases. The message matrices see a
        # sum over ~NOMINAL_DEGREE neighbours, so their variance is divided by
        # that fan-in; the last projection is shrunk so an untrained policy is
        # close to uniform.
        rng = np.random.default_rng(self.seed)
        params = {}
        last = f"layer{self.n_layers - 1}.mlp.W{MLP2_HIDDEN}" if self.n_layers else f"embed.W{EMBED_HIDDEN}"
        for name, shape in shapes.items():
            if len(shape) == 1:
                params[name] = np.zeros(shape)
                continue
            if name.endswith((".t1", ".t2")):
                bound = np.sqrt(3.0 / (shape[0] * (1 + NOMINAL_DEGREE)))
            else:
                bound = np.sqrt(6.0 / shape[0])
            w = rng.uniform(-bound, bound, size=shape)
            if name == last:
                w *= self.out_scale
            params[name] = w
        return params

    def copy(self) -> "PolicyModel":
        return PolicyModel(
            self.d, self.n_layers, self.seed, self.out_scale,
            params={k: v.copy() for k, v in self.params.items()}, meta=dict(self.meta),
        )

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    # -- forward / backward ---------------------------------------------------

    def _mlp(self, x, prefix, depth, tape):
        for i, (w, b) in enumerate(_mlp_names(prefix, depth)):
            tape.append(x)
            z = x @ self.params[w] + self.params[b]
            if i < depth:
                z = np.maximum(z, 0.0)
            x = z
        return x

    def _mlp_back(self, g, prefix, depth, tape, grads):
        names = _mlp_names(prefix, depth)
        for i in range(depth, -1, -1):
            w, b = names[i]
            x_in = tape.pop()
            grads[w] += x_in.T @ g
            grads[b] += g.sum(axis=0)
            g = g @ self.params[w].T
            if i > 0:
                g = g * (x_in > 0)
        return g

    def logits(self, batch: "GraphBatch", keep_tape: bool = False):
        tape: list = []
        H = self._mlp(batch.X, "embed", EMBED_HIDDEN, tape)
        for layer in range(self.n_layers):
            p = f"layer{layer}"
            tape.append(H)
            P = H @ self.params[f"{p}.t1"] + batch.A @ (H @ self.params[f"{p}.t2"]) + batch.Eagg @ self.params[f"{p}.t3"]
            H = self._mlp(P, f"{p}.mlp", MLP2_HIDDEN, tape)
        s = H.sum(axis=1)
        return (s, tape) if keep_tape else s

    def backward(self, batch: "GraphBatch", ds: np.ndarray, tape: list) -> dict[str, np.ndarray]:
        grads = self.zeros_like()
        g = np.repeat(ds[:, None], self.d, axis=1)
        for layer in range(self.n_layers - 1, -1, -1):
            p = f"layer{layer}"
            gP = self._mlp_back(g, f"{p}.mlp", MLP2_HIDDEN, tape, grads)
            H = tape.pop()
            grads[f"{p}.t1"] += H.T @ gP
            AH = batch.A @ H
            grads[f"{p}.t2"] += AH.T @ gP
            grads[f"{p}.t3"] += batch.Eagg.T @ gP
            g = gP @ self.params[f"{p}.t1"].T + batch.A.T @ (gP @ self.params[f"{p}.t2"].T)
        self._mlp_back(g, "embed", EMBED_HIDDEN, tape, grads)
        return grads

    def probabilities(self, batch: "GraphBatch", s: np.ndarray | None = None) -> np.ndarray:
        if s is None:
            s = self.logits(batch)
        return batch.masked_softmax(s)

    def loss_and_grad(self, batch: "GraphBatch") -> tuple[float, dict[str, np.ndarray], np.ndarray]:
        """Mean cross-entropy over the batch, its gradient, and per-sample losses."""
        s, tape = self.logits(batch, keep_tape=True)
        probs = batch.masked_softmax(s)
        per = -np.log(np.maximum(probs[batch.targets], 1e-300))
        B = len(batch.targets)
        ds = probs.copy()
        ds[batch.targets] -= 1.0
        ds[batch.selected] = 0.0
        ds /= B
        grads = self.backward(batch, ds, tape)
        return float(per.mean()), grads, per

    def loss(self, batch: "GraphBatch") -> float:
        probs = self.probabilities(batch)
        return float(-np.log(np.maximum(probs[batch.targets], 1e-300)).mean())

    def forward(self, inst: Instance, S) -> np.ndarray:
        """Next-node distribution over all nodes of ``inst`` given selected set ``S``."""
        batch = GraphBatch.build([(inst, S, None)])
        return self.probabilities(batch)

    def __call__(self, inst: Instance, S) -> np.ndarray:
        return self.forward(inst, S)


@lru_cache(maxsize=2048)
def _graph_tensors(inst: Instance):
    g = inst.graph
    feats = static_features(inst)
    rows = [u for u, v, _ in g.edges] + [v for u, v, _ in g.edges]
    cols = [v for u, v, _ in g.edges] + [u for u, v, _ in g.edges]
    A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(g.n, g.n))
    Eagg = np.zeros((g.n, EDGE_DIM))
    for i, (u, v, _) in enumerate(g.edges):
        Eagg[u] += feats.edge_features[i]
        Eagg[v] += feats.edge_features[i]
    return feats.node_features, A, Eagg


@dataclass
class GraphBatch:
    X: np.ndarray
    A: sp.csr_matrix
    Eagg: np.ndarray
    selected: np.ndarray  # bool mask over all packed nodes
    offsets: np.ndarray  # segment starts, length B + 1
    targets: np.ndarray  # absolute row index of each sample's target (may be empty)

    @classmethod
    def build(cls, items: Sequence[tuple]) -> "GraphBatch":
        """Pack ``(instance, selected_set, target_or_None)`` triples."""
        Xs, As, Es, sel, targets = [], [], [], [], []
        offsets = [0]
        for inst, S, target in items:
            X, A, E = _graph_tensors(inst)
            n = inst.n
            mask = np.zeros(n, dtype=bool)
            mask[list(S)] = True
            if mask.all():
                raise AllNodesSelected("every node is already selected")
            X = X.copy()
            X[:, SELECTED_COL] = mask
            Xs.append(X)
            As.append(A)
            Es.append(E)
            sel.append(mask)
            if target is not None:
                if mask[target]:
                    raise ValueError("target is already selected")
                targets.append(offsets[-1] + int(target))
            offsets.append(offsets[-1] + n)
        A = As[0] if len(As) == 1 else sp.block_diag(As, format="csr")
        return cls(
            np.vstack(Xs), A, np.vstack(Es), np.concatenate(sel),
            np.asarray(offsets), np.asarray(targets, dtype=np.int64),
        )

    def masked_softmax(self, s: np.ndarray) -> np.ndarray:
        s = np.where(self.selected, -np.inf, s)
        starts = self.offsets[:-1]
        seg_max = np.maximum.reduceat(s, starts)
        sizes = np.diff(self.offsets)
        e = np.exp(s - np.repeat(seg_max, sizes))
        seg_sum = np.add.reduceat(e, starts)
        return e / np.repeat(seg_sum, sizes)


def uniform_policy(inst: Instance, S) -> np.ndarray:
    mask = np.ones(inst.n, dtype=bool)
    mask[list(S)] = False
    if not mask.any():
        raise AllNodesSelected("every node is already selected")
    return mask / mask.sum()


# -- persistence -------------------------------------------------------------------------


def save_model(model: PolicyModel, path) -> None:
    header = {
        "version": MODEL_VERSION,
        "n_layers": model.n_layers,
        "d": model.d,
        "node_dim": NODE_DIM,
        "edge_dim": EDGE_DIM,
        "seed": model.seed,
        "out_scale": model.out_scale,
        "meta": model.meta,
        "shapes": {k: list(v.shape) for k, v in model.params.items()},
    }
    buf = io.BytesIO()
    np.savez(buf, __header__=np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8), **model.params)
    Path(path).write_bytes(buf.getvalue())


def load_model(path, d: int | None = None, n_layers: int | None = None) -> PolicyModel:
    try:
        with np.load(Path(path), allow_pickle=False) as z:
            header = json.loads(bytes(z["__header__"]).decode())
            arrays = {k: z[k] for k in z.files if k != "__header__"}
    except (zipfile.BadZipFile, EOFError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise CorruptFile(f"{path}: {exc}") from exc
    if header.get("version") != MODEL_VERSION:
        raise VersionMismatch(f"{path}: model version {header.get('version')!r}, expected {MODEL_VERSION}")
    if header.get("node_dim") != NODE_DIM or header.get("edge_dim") != EDGE_DIM:
        raise ShapeMismatch(f"{path}: feature dims {header.get('node_dim')}/{header.get('edge_dim')}")
    if d is not None and header["d"] != d:
        raise ShapeMismatch(f"{path}: embedding width {header['d']}, expected {d}")
    if n_layers is not None and header["n_layers"] != n_layers:
        raise ShapeMismatch(f"{path}: {header['n_layers']} layers, expected {n_layers}")
    expected = param_shapes(header["d"], header["n_layers"])
    if set(arrays) != set(expected):
        raise ShapeMismatch(f"{path}: parameter names do not match the architecture")
    for name, shape in expected.items():
        if arrays[name].shape != shape:
            raise ShapeMismatch(f"{path}: {name} has shape {arrays[name].shape}, expected {shape}")
    return PolicyModel(
        header["d"], header["n_layers"], header["seed"], header.get("out_scale", 1e-3),
        params={k: np.array(arrays[k], dtype=np.float64) for k in expected}, meta=header.get("meta"),
    )
