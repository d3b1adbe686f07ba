"""Skip-connected deep GRU network with hand-rolled backpropagation.

Three hidden layers of gated recurrent units.  The global input feeds
every hidden layer and the output layer; each hidden layer also feeds
all higher layers within the same step.  The only between-step paths
are the recurrent connections of each layer.  The output layer is a
softmax over the token vocabulary.

All math is 64-bit.  Gradients are computed by backpropagation through
time against a per-step activation tape and can be verified with the
central finite-difference checker below.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class NumericError(Exception):
    pass


def sigmoid(x: np.ndarray) -> np.ndarray:
    # standard increasing logistic
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    return shifted - np.log(np.exp(shifted).sum())


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


# --------------------------------------------------------------------------
# Parameters

@dataclass
class GruLayerParams:
    w_yh: np.ndarray   # [H, F] candidate input weights
    w_hh: np.ndarray   # [H, H] candidate recurrent weights
    w_yz: np.ndarray   # [H, F] update-gate input weights
    w_hz: np.ndarray   # [H, H] update-gate recurrent weights
    b_z: np.ndarray    # [H]
    w_yr: np.ndarray   # [H, F] reset-gate input weights
    w_hr: np.ndarray   # [H, H] reset-gate recurrent weights
    b_r: np.ndarray    # [H]
    h0: np.ndarray     # [H] trainable initial state

    @property
    def hidden_size(self) -> int:
        return self.w_hh.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_yh.shape[1]


@dataclass
class OutputLayerParams:
    w_yo: np.ndarray   # [O, F_o]
    b_o: np.ndarray    # [O]


@dataclass
class GruNetworkParams:
    layers: list[GruLayerParams]
    output: OutputLayerParams
    input_width: int

    @property
    def hidden_sizes(self) -> list[int]:
        return [layer.hidden_size for layer in self.layers]

    @property
    def output_width(self) -> int:
        return self.output.w_yo.shape[0]


PARAM_NAMES = ("w_yh", "w_hh", "w_yz", "w_hz", "b_z", "w_yr", "w_hr", "b_r",
               "h0")


def iter_params(params: GruNetworkParams):
    """Yield (block_name, array) pairs over every trainable parameter."""
    for i, layer in enumerate(params.layers):
        for name in PARAM_NAMES:
            yield f"layer{i}.{name}", getattr(layer, name)
    yield "output.w_yo", params.output.w_yo
    yield "output.b_o", params.output.b_o


def init_network(input_width: int, output_width: int,
                 hidden_sizes: Sequence[int] = (128, 128, 128),
                 rng: Optional[np.random.Generator] = None) -> GruNetworkParams:
    """Uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] weights, zero biases/h0."""
    rng = rng if rng is not None else np.random.default_rng()
    layers = []
    feed = input_width
    for h in hidden_sizes:
        def mat(rows: int, cols: int) -> np.ndarray:
            a = 1.0 / np.sqrt(cols)
            return rng.uniform(-a, a, size=(rows, cols))
        layers.append(GruLayerParams(
            w_yh=mat(h, feed), w_hh=mat(h, h),
            w_yz=mat(h, feed), w_hz=mat(h, h), b_z=np.zeros(h),
            w_yr=mat(h, feed), w_hr=mat(h, h), b_r=np.zeros(h),
            h0=np.zeros(h)))
        feed += h
    a = 1.0 / np.sqrt(feed)
    output = OutputLayerParams(
        w_yo=rng.uniform(-a, a, size=(output_width, feed)),
        b_o=np.zeros(output_width))
    return GruNetworkParams(layers, output, input_width)


def zeros_like_params(params: GruNetworkParams) -> GruNetworkParams:
    layers = [GruLayerParams(**{n: np.zeros_like(getattr(layer, n))
                                for n in PARAM_NAMES})
              for layer in params.layers]
    output = OutputLayerParams(np.zeros_like(params.output.w_yo),
                               np.zeros_like(params.output.b_o))
    return GruNetworkParams(layers, output, params.input_width)


def clone_params(params: GruNetworkParams) -> GruNetworkParams:
    layers = [GruLayerParams(**{n: getattr(layer, n).copy()
                                for n in PARAM_NAMES})
              for layer in params.layers]
    output = OutputLayerParams(params.output.w_yo.copy(),
                               params.output.b_o.copy())
    return GruNetworkParams(layers, output, params.input_width)


# --------------------------------------------------------------------------
# Forward pass

@dataclass
class NetworkState:
    h: list[np.ndarray]

    def clone(self) -> "NetworkState":
        return NetworkState([v.copy() for v in self.h])


def initial_state(params: GruNetworkParams) -> NetworkState:
    return NetworkState([layer.h0.copy() for layer in params.layers])


@dataclass
class StepRecord:
    x: np.ndarray
    h_prev: list[np.ndarray]
    y: list[np.ndarray]            # feed-forward input per layer
    z: list[np.ndarray]
    r: list[np.ndarray]
    s: list[np.ndarray]            # w_hh @ h_prev, pre reset gating
    h_cand: list[np.ndarray]
    h: list[np.ndarray]
    probs: np.ndarray


StepTape = list


def gru_step(params: GruNetworkParams, state: NetworkState,
             x: np.ndarray) -> tuple[NetworkState, np.ndarray, StepRecord]:
    """One step over all layers; returns new state, output distribution
    and the activation record needed for the backward pass."""
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite input vector")
    h_prev = state.h
    ys, zs, rs, ss, cands, hs = [], [], [], [], [], []
    feed = x
    for layer, hp in zip(params.layers, h_prev):
        y = feed
        z = sigmoid(layer.w_yz @ y + layer.w_hz @ hp + layer.b_z)
        r = sigmoid(layer.w_yr @ y + layer.w_hr @ hp + layer.b_r)
        s = layer.w_hh @ hp
        h_cand = np.tanh(layer.w_yh @ y + r * s)
        h = z * hp + (1.0 - z) * h_cand
        ys.append(y)
        zs.append(z)
        rs.append(r)
        ss.append(s)
        cands.append(h_cand)
        hs.append(h)
        feed = np.concatenate([feed, h])
    logits = params.output.w_yo @ feed + params.output.b_o
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite output logits")
    probs = softmax(logits)
    record = StepRecord(x, [hp.copy() for hp in h_prev], ys, zs, rs, ss,
                        cands, hs, probs)
    return NetworkState([h.copy() for h in hs]), probs, record


def forward_sequence(params: GruNetworkParams,
                     inputs: Sequence[np.ndarray]
                     ) -> tuple[list[np.ndarray], StepTape]:
    if len(inputs) == 0:
        raise ValueError("empty input sequence")
    state = initial_state(params)
    outputs: list[np.ndarray] = []
    tape: StepTape = []
    for n, x in enumerate(inputs):
        try:
            state, probs, record = gru_step(params, state, x)
        except NumericError as exc:
            raise NumericError(f"step {n}: {exc}") from exc
        outputs.append(probs)
        tape.append(record)
    return outputs, tape


def sequence_nll(params: GruNetworkParams, inputs: Sequence[np.ndarray],
                 targets: Sequence[int]) -> float:
    """Mean negative log probability of the true next tokens."""
    if len(inputs) != len(targets):
        raise ValueError("inputs and targets must have equal length")
    state = initial_state(params)
    total = 0.0
    for x, target in zip(inputs, targets):
        state, probs, _ = gru_step(params, state, x)
        total -= np.log(probs[target])
    return total / len(inputs)


def nll_from_outputs(outputs: Sequence[np.ndarray],
                     targets: Sequence[int]) -> float:
    total = -sum(np.log(p[t]) for p, t in zip(outputs, targets))
    return float(total / len(targets))


# --------------------------------------------------------------------------
# Backward pass (BPTT)

def backward_sequence(params: GruNetworkParams, tape: StepTape,
                      targets: Sequence[int]) -> GruNetworkParams:
    """Exact gradient of sequence_nll w.r.t. every parameter, h0 included."""
    if len(tape) != len(targets):
        raise ValueError("tape and targets must have equal length")
    grads = zeros_like_params(params)
    n_layers = len(params.layers)
    x_width = params.input_width
    scale = 1.0 / len(tape)
    # offsets of each hidden block inside the concatenated output feed
    offsets = [x_width]
    for layer in params.layers[:-1]:
        offsets.append(offsets[-1] + layer.hidden_size)

    # gradient flowing into h^i[n] from step n+1
    dh_next = [np.zeros(layer.hidden_size) for layer in params.layers]

    for n in range(len(tape) - 1, -1, -1):
        rec = tape[n]
        feed = np.concatenate([rec.x] + rec.h)
        d_logits = rec.probs.copy()
        d_logits[targets[n]] -= 1.0
        d_logits *= scale
        grads.output.w_yo += np.outer(d_logits, feed)
        grads.output.b_o += d_logits
        d_feed = params.output.w_yo.T @ d_logits

        # accumulate output-layer contribution plus carried recurrent grads
        dh = [d_feed[off:off + layer.hidden_size].copy() + dh_next[i]
              for i, (off, layer) in enumerate(zip(offsets, params.layers))]
        dh_next = [np.zeros(layer.hidden_size) for layer in params.layers]

        for i in range(n_layers - 1, -1, -1):
            layer = params.layers[i]
            glayer = grads.layers[i]
            hp = rec.h_prev[i]
            y, z, r, s, hc = rec.y[i], rec.z[i], rec.r[i], rec.s[i], rec.h_cand[i]
            d = dh[i]
            dz = d * (hp - hc)
            dhc = d * (1.0 - z)
            dhp = d * z

            da_c = dhc * (1.0 - hc * hc)
            glayer.w_yh += np.outer(da_c, y)
            dy = layer.w_yh.T @ da_c
            dr = da_c * s
            ds = da_c * r
            glayer.w_hh += np.outer(ds, hp)
            dhp += layer.w_hh.T @ ds

            da_z = dz * z * (1.0 - z)
            glayer.w_yz += np.outer(da_z, y)
            glayer.w_hz += np.outer(da_z, hp)
            glayer.b_z += da_z
            dy += layer.w_yz.T @ da_z
            dhp += layer.w_hz.T @ da_z

            da_r = dr * r * (1.0 - r)
            glayer.w_yr += np.outer(da_r, y)
            glayer.w_hr += np.outer(da_r, hp)
            glayer.b_r += da_r
            dy += layer.w_yr.T @ da_r
            dhp += layer.w_hr.T @ da_r

            # split dy into the global-input part (discarded) and the
            # current-step contributions to lower hidden layers
            off = x_width
            for j in range(i):
                hj = params.layers[j].hidden_size
                dh[j] += dy[off:off + hj]
                off += hj

            if n == 0:
                grads.layers[i].h0 += dhp
            else:
                dh_next[i] += dhp
    return grads


# --------------------------------------------------------------------------
# Finite-difference gradient check

@dataclass
class GradientCheckReport:
    worst: dict[str, float] = field(default_factory=dict)
    tolerance: float = 1e-6

    @property
    def max_relative_error(self) -> float:
        return max(self.worst.values()) if self.worst else 0.0

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tolerance


def gradient_check(params: GruNetworkParams, inputs: Sequence[np.ndarray],
                   targets: Sequence[int], num_coords: int = 200,
                   epsilon: float = 1e-5, tolerance: float = 1e-6,
                   rng: Optional[np.random.Generator] = None
                   ) -> GradientCheckReport:
    """Compare BPTT gradients against central finite differences on
    randomly sampled coordinates of every parameter block."""
    if max(params.hidden_sizes) > 32:
        raise ValueError("gradient check is limited to hidden sizes <= 32")
    rng = rng if rng is not None else np.random.default_rng(0)
    _, tape = forward_sequence(params, inputs)
    grads = backward_sequence(params, tape, targets)
    grad_map = dict(iter_params(grads))
    report = GradientCheckReport(tolerance=tolerance)
    for name, array in iter_params(params):
        flat = array.reshape(-1)
        count = min(num_coords, flat.size)
        coords = rng.choice(flat.size, size=count, replace=False)
        worst = 0.0
        analytic = grad_map[name].reshape(-1)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + epsilon
            plus = sequence_nll(params, inputs, targets)
            flat[c] = orig - epsilon
            minus = sequence_nll(params, inputs, targets)
            flat[c] = orig
            numeric = (plus - minus) / (2.0 * epsilon)
            # floor the denominator at the scale below which the central
            # difference itself is dominated by floating-point roundoff
            denom = max(abs(numeric), abs(analytic[c]), 1e-4)
            worst = max(worst, abs(numeric - analytic[c]) / denom)
        report.worst[name] = worst
    return report
