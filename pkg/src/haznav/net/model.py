"""The convolutional steering regressor: forward, backward, persistence.

All math is float64.  Hidden layers use the rectifier; the output layer
is linear and is clamped to the steering range only outside the
differentiated graph (at the SteeringAngle boundary).  Training-mode
forward applies inverted dropout after each hidden dense activation,
drawing its masks from the caller's Rng in a fixed order, so runs are
reproducible bit for bit.
"""

from __future__ import annotations

import json

import numpy as np

from ..core import ImageTensor, SteeringAngle
from ..rng import Rng
from . import kernels
from .schedule import LayerSchedule, param_count


class DimensionMismatch(ValueError):
    pass


class NonFiniteActivation(FloatingPointError):
    pass


class WeightFileError(ValueError):
    pass


def init_weights(schedule: LayerSchedule, rng: Rng):
    """Uniform fan-in initialization: w ~ U(-a, a), a = sqrt(1/fan_in);
    biases start at zero.  Draw order is layer by layer, row-major."""
    layers = []
    cin = schedule.channels
    for spec in schedule.conv:
        kh, kw = spec.kernel
        fan_in = kh * kw * cin
        a = (1.0 / fan_in) ** 0.5
        w = rng.uniform_array(-a, a, kh * kw * cin * spec.filters).reshape(
            kh, kw, cin, spec.filters
        )
        layers.append({"w": w, "b": np.zeros(spec.filters)})
        cin = spec.filters
    nin = schedule.flat_width
    for nout in schedule.dense:
        a = (1.0 / nin) ** 0.5
        w = rng.uniform_array(-a, a, nin * nout).reshape(nin, nout)
        layers.append({"w": w, "b": np.zeros(nout)})
        nin = nout
    return layers


def dropout_mask(rng: Rng, shape, rate: float) -> np.ndarray:
    """Inverted dropout mask: zeros with probability ``rate``, survivors
    scaled by 1/(1-rate)."""
    if rate <= 0.0:
        return np.ones(shape)
    keep = rng.float_array(int(np.prod(shape))).reshape(shape) >= rate
    return keep / (1.0 - rate)


class ControllerNet:
    def __init__(self, schedule: LayerSchedule, layers=None, rng: Rng | None = None):
        self.schedule = schedule
        if layers is None:
            if rng is None:
                raise ValueError("provide initialized layers or an rng")
            layers = init_weights(schedule, rng)
        self.layers = layers
        self.n_conv = len(schedule.conv)

    @property
    def parameter_count(self) -> int:
        return param_count(self.schedule)

    def _check_input(self, x: np.ndarray):
        h, w = self.schedule.input_hw
        if x.ndim != 4 or x.shape[1:] != (h, w, self.schedule.channels):
            raise DimensionMismatch(
                f"input batch shape {x.shape} does not match schedule "
                f"(N, {h}, {w}, {self.schedule.channels})"
            )

    def forward(
        self,
        x: np.ndarray,
        train: bool = False,
        rng: Rng | None = None,
        dropout: float = 0.0,
    ):
        """Predictions for a batch (N, H, W, 3) -> (N,).

        In train mode the call also returns the cache needed by
        ``backward``; dropout then requires an rng.
        """
        x = np.ascontiguousarray(x, dtype=np.float64)
        self._check_input(x)
        use_dropout = train and dropout > 0.0
        if use_dropout and rng is None:
            raise ValueError("train-mode dropout needs an rng")
        cache = {"conv": [], "dense": [], "masks": []}
        a = x
        for li, spec in enumerate(self.schedule.conv):
            w, b = self.layers[li]["w"], self.layers[li]["b"]
            z = kernels.conv2d_forward(a, w, b, spec.stride, spec.padding())
            self._check_finite(z, li)
            out = np.maximum(z, 0.0)
            cache["conv"].append((a, z))
            a = out
        n = a.shape[0]
        a = a.reshape(n, -1)
        cache["flat_shape"] = cache["conv"][-1][1].shape if self.n_conv else None
        for di, width in enumerate(self.schedule.dense):
            li = self.n_conv + di
            w, b = self.layers[li]["w"], self.layers[li]["b"]
            z = a @ w + b
            self._check_finite(z, li)
            last = di == len(self.schedule.dense) - 1
            if last:
                out = z
                mask = None
            else:
                out = np.maximum(z, 0.0)
                if use_dropout:
                    mask = dropout_mask(rng, out.shape, dropout)
                    out = out * mask
                else:
                    mask = None
            cache["dense"].append((a, z))
            cache["masks"].append(mask)
            a = out
        preds = a[:, 0]
        if train:
            return preds, cache
        return preds

    @staticmethod
    def _check_finite(z: np.ndarray, layer_index: int):
        if not np.isfinite(z).all():
            raise NonFiniteActivation(f"non-finite activation in layer {layer_index}")

    def predict_image(self, img: ImageTensor) -> SteeringAngle:
        """Single normalized frame -> clamped steering command."""
        p = self.forward(img.data[None, :, :, :])
        return SteeringAngle(float(p[0]))

    def backward(
        self,
        x: np.ndarray,
        labels: np.ndarray,
        l2: float = 0.0,
        rng: Rng | None = None,
        dropout: float = 0.0,
    ):
        """Loss and gradients for one batch.

        loss = mean((label - pred)^2) + l2 * sum(weights^2); biases are
        not regularized.  Gradients come back as a list parallel to
        ``self.layers`` of {"w": dw, "b": db}.
        """
        if len(x) == 0:
            raise ValueError("empty batch")
        labels = np.asarray(labels, dtype=np.float64)
        preds, cache = self.forward(x, train=True, rng=rng, dropout=dropout)
        n = len(labels)
        residual = preds - labels
        data_loss = float(residual @ residual) / n
        reg_loss = 0.0
        if l2:
            reg_loss = l2 * sum(float((lay["w"] ** 2).sum()) for lay in self.layers)
        grads = [None] * len(self.layers)

        # dense stack, output first
        d = (2.0 / n) * residual[:, None]
        for di in reversed(range(len(self.schedule.dense))):
            li = self.n_conv + di
            a_in, z = cache["dense"][di]
            last = di == len(self.schedule.dense) - 1
            if not last:
                mask = cache["masks"][di]
                if mask is not None:
                    d = d * mask
                d = d * (z > 0)
            grads[li] = {"w": a_in.T @ d, "b": d.sum(axis=0)}
            d = d @ self.layers[li]["w"].T

        # back through flatten into the conv stack
        if self.n_conv:
            d = d.reshape(cache["flat_shape"])
        for li in reversed(range(self.n_conv)):
            a_in, z = cache["conv"][li]
            d = d * (z > 0)
            spec = self.schedule.conv[li]
            dx, dw, db = kernels.conv2d_backward(
                a_in, self.layers[li]["w"], d, spec.stride, spec.padding()
            )
            grads[li] = {"w": dw, "b": db}
            d = dx

        if l2:
            for li, lay in enumerate(self.layers):
                grads[li]["w"] = grads[li]["w"] + 2.0 * l2 * lay["w"]
        for li, g in enumerate(grads):
            if not np.isfinite(g["w"]).all() or not np.isfinite(g["b"]).all():
                raise NonFiniteActivation(f"non-finite gradient in layer {li}")
        return grads, data_loss + reg_loss

    # ------------------------------------------------------------------
    # persistence: JSON with a schedule header and per-layer flat arrays
    # (row-major, conv weights ordered (kh, kw, cin, cout), dense (nin, nout))

    def save_weights(self, path) -> None:
        doc = {
            "schedule": self.schedule.to_dict(),
            "layers": [
                {"w": lay["w"].ravel().tolist(), "b": lay["b"].tolist()}
                for lay in self.layers
            ],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, sort_keys=True)

    @classmethod
    def load_weights(cls, path, expect_schedule: LayerSchedule | None = None) -> "ControllerNet":
        def reject_constant(token):
            raise WeightFileError(f"non-finite value {token!r} in weight file")

        with open(path) as fh:
            try:
                doc = json.load(fh, parse_constant=reject_constant)
            except json.JSONDecodeError as exc:
                raise WeightFileError(f"unparseable weight file: {exc}") from exc
        schedule = LayerSchedule.from_dict(doc["schedule"])
        if expect_schedule is not None and schedule != expect_schedule:
            raise WeightFileError("weight file schedule does not match the expected schedule")
        net = cls(schedule, layers=_shape_layers(schedule, doc["layers"]))
        return net


def _shape_layers(schedule: LayerSchedule, raw_layers):
    expected = []
    cin = schedule.channels
    for spec in schedule.conv:
        expected.append(((spec.kernel[0], spec.kernel[1], cin, spec.filters), spec.filters))
        cin = spec.filters
    nin = schedule.flat_width
    for nout in schedule.dense:
        expected.append(((nin, nout), nout))
        nin = nout
    if len(raw_layers) != len(expected):
        raise WeightFileError(
            f"weight file has {len(raw_layers)} layers, schedule needs {len(expected)}"
        )
    layers = []
    for (wshape, blen), raw in zip(expected, raw_layers):
        w = np.asarray(raw["w"], dtype=np.float64)
        b = np.asarray(raw["b"], dtype=np.float64)
        if w.size != int(np.prod(wshape)) or b.size != blen:
            raise WeightFileError("layer size mismatch between weight file and schedule")
        if not np.isfinite(w).all() or not np.isfinite(b).all():
            raise WeightFileError("non-finite value in weight file")
        layers.append({"w": w.reshape(wshape), "b": b})
    return layers
