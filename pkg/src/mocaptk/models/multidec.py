"""Recurrent encoder with multiple decoders for semi-supervised sequence
classification.

One shared pipeline feeds up to four heads:

  frame encoder (dense tanh stack)
      -> tied-weight frame decoder        (denoising reconstruction)
      -> per-frame classifier             (activations summed over time)
      -> sequence encoder (LSTM stack, first layer bidirectional)
          -> summary vector (dense tanh on the final hidden state)
              -> conditional sequence decoder (feeds back its own
                 previous feature prediction, conditioned on the summary)
              -> sequence classifier (always present)

Variants enable subsets of the heads; the composite loss balances the
sequence-classification error against the mean of the enabled auxiliary
errors with a ratio r.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import NoEnabledLoss
from ..nn import layers as L
from ..nn import tensor as T
from ..nn.tensor import Tensor

VARIANT_FLAGS = {
    # name: (frame_recon, seq_recon, frame_class)
    "SC": (False, False, False),
    "FR-SC": (True, False, False),
    "SRC": (False, True, False),
    "FR-SRC": (True, True, False),
    "FRC-SRC": (True, True, True),
}


@dataclass(frozen=True)
class ModelVariant:
    name: str
    frame_recon: bool
    seq_recon: bool
    frame_class: bool
    ratio: float = 0.5

    @classmethod
    def from_name(cls, name: str, ratio: float = 0.5) -> "ModelVariant":
        if name not in VARIANT_FLAGS:
            raise ValueError(f"unknown variant {name!r}; expected one of {sorted(VARIANT_FLAGS)}")
        if not 0.0 <= ratio <= 1.0:
            raise ValueError(f"ratio {ratio} outside [0, 1]")
        fr, sr, fc = VARIANT_FLAGS[name]
        if name == "SC":
            ratio = 1.0  # no auxiliary losses to balance against
        return cls(name=name, frame_recon=fr, seq_recon=sr, frame_class=fc, ratio=ratio)

    @property
    def any_recon(self) -> bool:
        return self.frame_recon or self.seq_recon


@dataclass
class ModelSizes:
    input_dim: int = 69
    classes: int = 65
    frame_hidden: tuple = (1024, 512)
    seq_hidden: tuple = (512, 512, 256)   # first layer is bidirectional
    summary_dim: int = 1024
    classifier_hidden: int = 512
    recon_output_tanh: bool = False       # squash reconstructed frames
    classifier_hidden_tanh: bool = False  # the hidden classifier layer is linear as default
    decode_reversed: bool = False         # reconstruct in reversed time order

    @property
    def feature_dim(self) -> int:
        return self.frame_hidden[-1]

    @property
    def decoder_hidden(self) -> tuple:
        # mirror of the encoder's per-layer output widths
        outs = [2 * self.seq_hidden[0]] + list(self.seq_hidden[1:])
        return tuple(reversed(outs))

    def scaled(self, **overrides) -> "ModelSizes":
        return replace(self, **overrides)


@dataclass
class LossReport:
    frame_recon: Tensor | None = None
    frame_class: Tensor | None = None
    seq_recon: Tensor | None = None
    seq_class: Tensor | None = None
    total: Tensor | None = None

    def values(self) -> dict:
        out = {}
        for key in ("frame_recon", "frame_class", "seq_recon", "seq_class", "total"):
            t = getattr(self, key)
            if t is not None:
                out[key] = t.item()
        return out


def composite_loss(variant: ModelVariant, parts: LossReport) -> Tensor:
    """r * seq_class + (1 - r) * mean(enabled auxiliary losses)."""
    if parts.seq_class is None:
        raise ValueError("composite loss needs the sequence classification term")
    enabled = []
    if variant.frame_recon and parts.frame_recon is not None:
        enabled.append(parts.frame_recon)
    if variant.seq_recon and parts.seq_recon is not None:
        enabled.append(parts.seq_recon)
    if variant.frame_class and parts.frame_class is not None:
        enabled.append(parts.frame_class)
    r = variant.ratio
    if not enabled:
        if r < 1.0:
            raise NoEnabledLoss(f"ratio {r} < 1 with no auxiliary decoder enabled")
        return parts.seq_class
    aux = enabled[0]
    for term in enabled[1:]:
        aux = aux + term
    aux = aux / len(enabled)
    return T.scale(parts.seq_class, r) + T.scale(aux, 1.0 - r)


def half_mse(pred: Tensor, target: Tensor) -> Tensor:
    """Mean over rows of 1/2 * squared residual norm."""
    diff = pred - target
    return T.scale(T.tsum(T.square(diff)), 0.5 / diff.data.shape[0])


class SequenceEncoder:
    """Frame feature stack + LSTM stack (first layer bidirectional) +
    dense tanh summary layer.  Shared by the classifier model and the
    transition generator's past-context encoder."""

    def __init__(self, sizes: ModelSizes, rng: np.random.Generator):
        self.sizes = sizes
        dims = [sizes.input_dim] + list(sizes.frame_hidden)
        self.frame_layers = [L.init_dense(rng, dims[i + 1], dims[i])
                             for i in range(len(sizes.frame_hidden))]
        in_dim = sizes.feature_dim
        self.lstm_fwd = L.init_lstm(rng, in_dim, sizes.seq_hidden[0])
        self.lstm_bwd = L.init_lstm(rng, in_dim, sizes.seq_hidden[0])
        self.lstm_upper = []
        prev = 2 * sizes.seq_hidden[0]
        for hid in sizes.seq_hidden[1:]:
            self.lstm_upper.append(L.init_lstm(rng, prev, hid))
            prev = hid
        self.summary = L.init_dense(rng, sizes.summary_dim, prev)

    def frame_features(self, x: Tensor) -> Tensor:
        h = x
        for layer in self.frame_layers:
            h = T.tanh(layer(h))
        return h

    def final_hidden(self, steps) -> Tensor:
        outs = L.bdlstm_layer(self.lstm_fwd, self.lstm_bwd, steps)
        for cell in self.lstm_upper:
            outs = L.run_lstm(cell, outs)
        return outs[-1]

    def summarize(self, steps) -> Tensor:
        return T.tanh(self.summary(self.final_hidden(steps)))

    def params(self, prefix: str) -> dict:
        out = {}
        for i, layer in enumerate(self.frame_layers):
            out[f"{prefix}/frame/{i}/w"] = layer.w
            out[f"{prefix}/frame/{i}/b"] = layer.b
        for tag, cell in [("fwd", self.lstm_fwd), ("bwd", self.lstm_bwd)] + [
                (f"up{i}", c) for i, c in enumerate(self.lstm_upper)]:
            out[f"{prefix}/lstm/{tag}/w_input"] = cell.w_input
            out[f"{prefix}/lstm/{tag}/w_hidden"] = cell.w_hidden
            out[f"{prefix}/lstm/{tag}/bias"] = cell.bias
        out[f"{prefix}/summary/w"] = self.summary.w
        out[f"{prefix}/summary/b"] = self.summary.b
        return out


class MultiDecoderModel:
    def __init__(self, sizes: ModelSizes, variant: ModelVariant,
                 rng: np.random.Generator):
        self.sizes = sizes
        self.variant = variant
        self.encoder = SequenceEncoder(sizes, rng)

        # tied-weight frame decoder: reuses the encoder matrices
        # transposed, with its own (untied) biases
        dims = [sizes.input_dim] + list(sizes.frame_hidden)
        self.decoder_biases = [Tensor(np.zeros(dims[i]), requires_grad=True)
                               for i in reversed(range(len(sizes.frame_hidden)))]

        self.frame_classifier = L.init_dense(rng, sizes.classes, sizes.feature_dim)

        self.dec_cells = []
        self.dec_cond = []
        prev = sizes.feature_dim
        for hid in sizes.decoder_hidden:
            self.dec_cells.append(L.init_lstm(rng, prev, hid))
            self.dec_cond.append(Tensor(L.uniform_fanin(rng, 4 * hid, sizes.summary_dim),
                                        requires_grad=True))
            prev = hid
        self.dec_out = L.init_dense(rng, sizes.feature_dim, prev)

        self.cls_hidden = L.init_dense(rng, sizes.classifier_hidden, sizes.summary_dim)
        self.cls_out = L.init_dense(rng, sizes.classes, sizes.classifier_hidden)

    # --- parameter bookkeeping ---

    def params(self) -> dict:
        out = self.encoder.params("encoder")
        for i, b in enumerate(self.decoder_biases):
            out[f"frame_decoder/{i}/b"] = b
        out["frame_classifier/w"] = self.frame_classifier.w
        out["frame_classifier/b"] = self.frame_classifier.b
        for i, (cell, cond) in enumerate(zip(self.dec_cells, self.dec_cond)):
            out[f"seq_decoder/{i}/w_input"] = cell.w_input
            out[f"seq_decoder/{i}/w_hidden"] = cell.w_hidden
            out[f"seq_decoder/{i}/bias"] = cell.bias
            out[f"seq_decoder/{i}/w_cond"] = cond
        out["seq_decoder/out/w"] = self.dec_out.w
        out["seq_decoder/out/b"] = self.dec_out.b
        out["seq_classifier/hidden/w"] = self.cls_hidden.w
        out["seq_classifier/hidden/b"] = self.cls_hidden.b
        out["seq_classifier/out/w"] = self.cls_out.w
        out["seq_classifier/out/b"] = self.cls_out.b
        return out

    def head_param_names(self) -> dict:
        """Parameter paths exclusive to each optional head."""
        names = {"frame_recon": [], "seq_recon": [], "frame_class": []}
        for key in self.params():
            if key.startswith("frame_decoder/"):
                names["frame_recon"].append(key)
            elif key.startswith("seq_decoder/"):
                names["seq_recon"].append(key)
            elif key.startswith("frame_classifier/"):
                names["frame_class"].append(key)
        return names

    def zero_grads(self):
        for p in self.params().values():
            p.zero_grad()

    def load_state(self, arrays: dict):
        params = self.params()
        for name, value in arrays.items():
            if name in params:
                if params[name].data.shape != value.shape:
                    raise ValueError(f"shape mismatch for {name}")
                params[name].data = value.astype(np.float64)

    def state(self) -> dict:
        return {name: p.data.copy() for name, p in self.params().items()}

    # --- forward pieces ---

    def frame_decode(self, feats: Tensor) -> Tensor:
        h = feats
        layers = list(reversed(self.encoder.frame_layers))
        for i, (layer, bias) in enumerate(zip(layers, self.decoder_biases)):
            h = T.affine(h, layer.w, bias, tied=True)
            last = i == len(layers) - 1
            if not last or self.sizes.recon_output_tanh:
                h = T.tanh(h)
        return h

    def decode_features(self, summary: Tensor, n_steps: int) -> Tensor:
        """Conditional decoding: each step consumes the previous feature
        prediction (zero vector at step 0) and a per-layer transform of
        the summary vector.  Returns (n_steps*B, feature_dim), t-major."""
        batch = summary.data.shape[0]
        cond_pre = [T.affine(summary, w) for w in self.dec_cond]
        states = [L.zero_state(cell, batch) for cell in self.dec_cells]
        prev = Tensor(np.zeros((batch, self.sizes.feature_dim)))
        outs = []
        for _ in range(n_steps):
            inp = prev
            for i, cell in enumerate(self.dec_cells):
                h, c = L.lstm_step(cell, inp, *states[i], pre_extra=cond_pre[i])
                states[i] = (h, c)
                inp = h
            prev = T.tanh(self.dec_out(inp))
            outs.append(prev)
        return T.concat(outs, axis=0)

    def seq_class_logits(self, summary: Tensor) -> Tensor:
        h = self.cls_hidden(summary)
        if self.sizes.classifier_hidden_tanh:
            h = T.tanh(h)
        return self.cls_out(h)

    def _steps_from_flat(self, feats: Tensor, n_steps: int, batch: int):
        return [feats[t * batch:(t + 1) * batch] for t in range(n_steps)]

    def window_losses(self, frames: np.ndarray, labels=None,
                      noise_sigma: float = 0.0,
                      rng: np.random.Generator | None = None) -> LossReport:
        """Losses for one minibatch of equal-length windows.

        frames: (B, T, input_dim).  Corruption (when sigma > 0) is
        applied to the inputs of every pathway; reconstruction targets
        stay clean.  Unlabeled batches (labels None) produce only the
        enabled reconstruction terms.
        """
        batch, n_steps, dim = frames.shape
        flat = np.ascontiguousarray(frames.transpose(1, 0, 2).reshape(n_steps * batch, dim))
        clean = Tensor(flat)
        if noise_sigma > 0 and rng is not None:
            x_in = Tensor(flat + rng.normal(0.0, noise_sigma, size=flat.shape))
        else:
            x_in = clean

        report = LossReport()
        feats = self.encoder.frame_features(x_in)
        if self.variant.frame_recon:
            report.frame_recon = half_mse(self.frame_decode(feats), clean)
        if self.variant.frame_class and labels is not None:
            logits_t = self.frame_classifier(feats)
            summed = T.tsum(T.reshape(logits_t, (n_steps, batch, self.sizes.classes)), axis=0)
            report.frame_class = T.nll_loss(summed, labels)

        steps = self._steps_from_flat(feats, n_steps, batch)
        need_summary = self.variant.seq_recon or labels is not None
        if need_summary:
            summary = self.encoder.summarize(steps)
            if self.variant.seq_recon:
                feats_hat = self.decode_features(summary, n_steps)
                recon = self.frame_decode(feats_hat)
                target = clean
                if self.sizes.decode_reversed:
                    rev = flat.reshape(n_steps, batch, dim)[::-1].reshape(n_steps * batch, dim)
                    target = Tensor(np.ascontiguousarray(rev))
                report.seq_recon = half_mse(recon, target)
            if labels is not None:
                report.seq_class = T.nll_loss(self.seq_class_logits(summary), labels)
        if labels is not None:
            report.total = composite_loss(self.variant, report)
        return report

    # --- inference ---

    def summary_vector(self, frames: np.ndarray) -> np.ndarray:
        """Summary of one clean sequence (T, input_dim); no gradients."""
        with T.no_grad():
            n_steps = frames.shape[0]
            feats = self.encoder.frame_features(Tensor(frames))
            steps = self._steps_from_flat(feats, n_steps, 1)
            return self.encoder.summarize(steps).data[0].copy()

    def class_probs(self, windows) -> np.ndarray:
        """Per-window class probabilities; windows may differ in length."""
        probs = np.zeros((len(windows), self.sizes.classes))
        with T.no_grad():
            by_len = {}
            for i, w in enumerate(windows):
                by_len.setdefault(len(w), []).append(i)
            for n_steps, idx in by_len.items():
                stackd = np.stack([windows[i] for i in idx])  # (b, T, dim)
                batch = len(idx)
                flat = np.ascontiguousarray(
                    stackd.transpose(1, 0, 2).reshape(n_steps * batch, -1))
                feats = self.encoder.frame_features(Tensor(flat))
                steps = self._steps_from_flat(feats, n_steps, batch)
                summary = self.encoder.summarize(steps)
                p = T.softmax(self.seq_class_logits(summary)).data
                for row, i in enumerate(idx):
                    probs[i] = p[row]
        return probs
