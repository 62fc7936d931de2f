"""Gated relational graph-convolution encoder and the two stance heads.

The encoder maps per-node input features through a learned input transform,
then L rounds of relation-typed message passing. Each round aggregates the
mean of each relation's neighbor representations through a relation-specific
linear map plus a self-loop map, and blends the squashed aggregate with the
previous representation through a learned sigmoid gate:

    u_i = sum_r mean_{j in nbr_r(i)} f_r(x_j) + f_s(x_i)
    g_i = sigmoid(W_g [u_i, x_i] + b_g)
    x_i' = tanh(u_i) * g_i + x_i * (1 - g_i)

Relations with no neighbors for a node contribute nothing to that node's sum.
Two softmax heads map final representations to 5-class liberal and
conservative stance distributions.

Variants: "gated" (above), "plain" (x_i' = phi(u_i), no gate), and
"homogeneous" (single shared relation map over the union graph, no gate).
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from . import numkit as nk
from .hin import Hin, RelationKind

__all__ = [
    "ModelParams",
    "EncoderOutput",
    "init_params",
    "input_transform",
    "layer_forward",
    "encode",
    "stance_heads",
    "save_params",
    "load_params",
]

log = logging.getLogger(__name__)

VARIANTS = ("gated", "plain", "homogeneous")
PHI_CHOICES = ("leaky_relu", "relu")


class ModelParams:
    """Named parameter tensors plus the architecture switches they imply."""

    def __init__(self, d_in, d, layers, n_classes=5, variant="gated",
                 phi="leaky_relu", alpha=0.01):
        if variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}; got {variant!r}")
        if phi not in PHI_CHOICES:
            raise ValueError(f"phi must be one of {PHI_CHOICES}; got {phi!r}")
        self.d_in = d_in
        self.d = d
        self.layers = layers
        self.n_classes = n_classes
        self.variant = variant
        self.phi = phi
        self.alpha = alpha
        self._tensors: dict[str, nk.Tensor] = {}

    def _add(self, name: str, values: np.ndarray) -> None:
        self._tensors[name] = nk.parameter(values, name=name)

    def __getitem__(self, name: str) -> nk.Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def names(self) -> list[str]:
        return list(self._tensors)

    def tensors(self) -> list[nk.Tensor]:
        return list(self._tensors.values())

    @property
    def count(self) -> int:
        return sum(t.values.size for t in self._tensors.values())

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.zero_grad()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.values.copy() for name, t in self._tensors.items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for name, values in snap.items():
            self._tensors[name].values[...] = values

    def relation_codes(self) -> list[str]:
        if self.variant == "homogeneous":
            return ["shared"]
        return [r.code for r in RelationKind]

    @property
    def gated(self) -> bool:
        return self.variant == "gated"


def init_params(d_in, d, layers, seed, n_classes=5, variant="gated",
                phi="leaky_relu", alpha=0.01) -> ModelParams:
    """Glorot-uniform weights, zero biases, deterministic per seed."""
    if min(d_in, d, n_classes) < 1 or layers < 0:
        raise ValueError("dimensions must be >= 1 and layers >= 0")
    rng = np.random.default_rng(seed)

    def glorot(rows, cols):
        lim = np.sqrt(6.0 / (rows + cols))
        return rng.uniform(-lim, lim, size=(rows, cols))

    p = ModelParams(d_in, d, layers, n_classes, variant, phi, alpha)
    p._add("input.w", glorot(d_in, d))
    p._add("input.b", np.zeros((1, d)))
    for l in range(layers):
        p._add(f"layer{l}.self.w", glorot(d, d))
        p._add(f"layer{l}.self.b", np.zeros((1, d)))
        for code in p.relation_codes():
            p._add(f"layer{l}.rel.{code}.w", glorot(d, d))
            p._add(f"layer{l}.rel.{code}.b", np.zeros((1, d)))
        if p.gated:
            p._add(f"layer{l}.gate.w", glorot(2 * d, d))
            p._add(f"layer{l}.gate.b", np.zeros((1, d)))
    for head in ("lib", "con"):
        p._add(f"head.{head}.w", glorot(d, n_classes))
        p._add(f"head.{head}.b", np.zeros((1, n_classes)))
    log.info("initialized %s model: %d parameters", variant, p.count)
    return p


@dataclass
class EncoderOutput:
    """Final node representations plus per-layer gate activations."""

    x: nk.Tensor
    gates: list[nk.Tensor]
    actor_rows: np.ndarray


def _phi(t: nk.Tensor, params: ModelParams) -> nk.Tensor:
    if params.phi == "relu":
        return nk.relu(t)
    return nk.leaky_relu(t, params.alpha)


def input_transform(features, params: ModelParams) -> nk.Tensor:
    if not isinstance(features, nk.Tensor):
        features = nk.constant(features, name="features")
    if features.shape[1] != params.d_in:
        raise ValueError(
            f"features have {features.shape[1]} columns; model expects {params.d_in}"
        )
    return _phi(nk.add_bias(features @ params["input.w"], params["input.b"]), params)


def _masked_linear(agg, mask, w, b):
    # Bias lands only on rows that actually had neighbors: mask is (n, 1),
    # so mask @ b broadcasts b onto exactly those rows.
    return nk.add(agg @ w, mask @ b)


def layer_forward(x_prev, hin: Hin, params: ModelParams, layer: int):
    """One message-passing round; returns (x_next, gate or None)."""
    u = nk.add_bias(x_prev @ params[f"layer{layer}.self.w"],
                    params[f"layer{layer}.self.b"])
    if params.variant == "homogeneous":
        a, m = hin.union_mean_adjacency()
        if a.any():
            agg = nk.constant(a, name="adj.union") @ x_prev
            u = nk.add(u, _masked_linear(agg, nk.constant(m),
                                         params[f"layer{layer}.rel.shared.w"],
                                         params[f"layer{layer}.rel.shared.b"]))
    else:
        for rel in RelationKind:
            if not hin.edges[rel]:
                continue
            a, m = hin.mean_adjacency(rel)
            agg = nk.constant(a, name=f"adj.{rel.code}") @ x_prev
            u = nk.add(u, _masked_linear(agg, nk.constant(m),
                                         params[f"layer{layer}.rel.{rel.code}.w"],
                                         params[f"layer{layer}.rel.{rel.code}.b"]))
    if not params.gated:
        return _phi(u, params), None
    cat = nk.concat_cols(u, x_prev)
    gate = nk.sigmoid(nk.add_bias(cat @ params[f"layer{layer}.gate.w"],
                                  params[f"layer{layer}.gate.b"]))
    x_next = nk.add(nk.hadamard(nk.tanh(u), gate),
                    nk.hadamard(x_prev, nk.add_const(nk.scale(gate, -1.0), 1.0)))
    return x_next, gate


def encode(hin: Hin, params: ModelParams) -> EncoderOutput:
    """Input transform followed by `layers` message-passing rounds."""
    if hin.features is None:
        raise ValueError("graph has no feature matrix")
    x = input_transform(hin.features, params)
    gates = []
    for l in range(params.layers):
        x, gate = layer_forward(x, hin, params, l)
        if gate is not None:
            gates.append(gate)
    return EncoderOutput(x=x, gates=gates, actor_rows=hin.actor_indices())


def stance_heads(x: nk.Tensor, params: ModelParams):
    """Row-softmax stance distributions (liberal, conservative) for every node."""
    lib = nk.softmax_rows(nk.add_bias(x @ params["head.lib.w"], params["head.lib.b"]))
    con = nk.softmax_rows(nk.add_bias(x @ params["head.con.w"], params["head.con.b"]))
    return lib, con


# -- checkpointing ------------------------------------------------------------

_FORMAT = 1


def _fname(name: str) -> str:
    return name.replace(".", "__") + ".npy"


def save_params(params: ModelParams, dirpath) -> None:
    """Write a manifest plus one .npy per tensor; float64 round-trips exactly."""
    os.makedirs(dirpath, exist_ok=True)
    manifest = {
        "format": _FORMAT,
        "d_in": params.d_in,
        "d": params.d,
        "layers": params.layers,
        "n_classes": params.n_classes,
        "variant": params.variant,
        "phi": params.phi,
        "alpha": params.alpha,
        "tensors": {name: list(t.shape) for name, t in params._tensors.items()},
    }
    with open(os.path.join(dirpath, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    for name, t in params._tensors.items():
        np.save(os.path.join(dirpath, _fname(name)), t.values)


def load_params(dirpath) -> ModelParams:
    with open(os.path.join(dirpath, "manifest.json"), encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != _FORMAT:
        raise ValueError(f"unsupported checkpoint format {manifest.get('format')}")
    p = ModelParams(
        manifest["d_in"], manifest["d"], manifest["layers"],
        manifest["n_classes"], manifest["variant"], manifest["phi"],
        manifest["alpha"],
    )
    for name, shape in manifest["tensors"].items():
        values = np.load(os.path.join(dirpath, _fname(name)))
        if list(values.shape) != shape:
            raise ValueError(f"checkpoint tensor {name} has shape {values.shape}, "
                             f"manifest says {shape}")
        p._add(name, values)
    return p
