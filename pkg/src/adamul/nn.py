"""Minimal INT8 inference lowered onto the systolic GEMM model.

Convolutions and dense layers are flattened to int8 GEMMs (im2col) and
executed on the array simulator with a pluggable multiplier variant and
optional scheduled fault events.  Weights use symmetric per-tensor
scales; activations are affine (scale + zero point, the bundled model
calibrates zero points to 0 so the unsigned multiplier sees true
magnitudes).  Accumulation is int32, biases are int32 at the product
scale, and requantization rounds half away from zero before clamping
to int8.  The class-probability vector comes from a real-valued
softmax over the dequantized logits, applied at the output only.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .multipliers import MultiplierKind
from .systolic import ArrayConfig, gemm_with_report, schedule


class ModelFormatError(ValueError):
    """Manifest or blob violates the documented container layout."""


class ChecksumMismatchError(ModelFormatError):
    """Blob bytes do not match the manifest checksum."""


# ---------------------------------------------------------------------------
# quantization helpers
# ---------------------------------------------------------------------------

def round_half_away(x):
    """Round to nearest with ties away from zero (element-wise)."""
    x = np.asarray(x)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def quantize(real, scale: float, zero_point: int = 0) -> np.ndarray:
    """real -> int8 with the given affine parameters."""
    q = round_half_away(np.asarray(real, dtype=np.float64) / scale) + zero_point
    return np.clip(q, -128, 127).astype(np.int8)


def dequantize(q, scale: float, zero_point: int = 0) -> np.ndarray:
    return (np.asarray(q, dtype=np.float64) - zero_point) * scale


@dataclass(frozen=True)
class QuantTensor:
    """int8 data plus the affine mapping back to real values."""

    data: np.ndarray
    scale: float
    zero_point: int = 0

    def __post_init__(self):
        if self.data.dtype != np.int8:
            raise ValueError(f"QuantTensor data must be int8, got {self.data.dtype}")
        if self.scale <= 0:
            raise ValueError(f"scale must be positive: {self.scale}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def dequantize(self) -> np.ndarray:
        return dequantize(self.data, self.scale, self.zero_point)


# ---------------------------------------------------------------------------
# layers and graph
# ---------------------------------------------------------------------------

@dataclass
class Conv2d:
    kind = "conv2d"
    name: str
    weight: np.ndarray          # int8 (out_ch, in_ch, kh, kw)
    bias: np.ndarray            # int32 (out_ch,), at scale in_scale * weight_scale
    stride: int
    padding: int
    weight_scale: float
    out_scale: float
    out_zero_point: int = 0


@dataclass
class Dense:
    kind = "dense"
    name: str
    weight: np.ndarray          # int8 (out_features, in_features)
    bias: np.ndarray            # int32 (out_features,)
    weight_scale: float
    out_scale: float
    out_zero_point: int = 0


@dataclass
class MaxPool:
    kind = "maxpool"
    window: int = 2
    stride: int = 2


@dataclass
class Relu:
    kind = "relu"


@dataclass
class Flatten:
    kind = "flatten"


@dataclass
class Softmax:
    kind = "softmax"


@dataclass
class ModelGraph:
    """Ordered layer list plus input quantization parameters."""

    name: str
    input_shape: tuple[int, int, int]       # (channels, height, width)
    input_scale: float
    input_zero_point: int
    layers: list = field(default_factory=list)

    def validate(self) -> tuple[int, ...]:
        """Propagate shapes through the graph; returns the output shape."""
        if not self.layers:
            raise ModelFormatError("model has no layers")
        shape = tuple(self.input_shape)
        for i, layer in enumerate(self.layers):
            where = f"layer {i} ({layer.kind})"
            if isinstance(layer, Conv2d):
                if len(shape) != 3:
                    raise ModelFormatError(f"{where}: expected (C,H,W) input, got {shape}")
                c, h, w = shape
                oc, ic, kh, kw = layer.weight.shape
                if ic != c:
                    raise ModelFormatError(f"{where}: weight expects {ic} channels, input has {c}")
                oh = (h + 2 * layer.padding - kh) // layer.stride + 1
                ow = (w + 2 * layer.padding - kw) // layer.stride + 1
                if oh < 1 or ow < 1:
                    raise ModelFormatError(f"{where}: kernel {kh}x{kw} larger than input {h}x{w}")
                if layer.bias.shape != (oc,):
                    raise ModelFormatError(f"{where}: bias shape {layer.bias.shape} != ({oc},)")
                shape = (oc, oh, ow)
            elif isinstance(layer, Dense):
                features = int(np.prod(shape))
                of, inf = layer.weight.shape
                if inf != features:
                    raise ModelFormatError(f"{where}: weight expects {inf} features, input has {features}")
                if layer.bias.shape != (of,):
                    raise ModelFormatError(f"{where}: bias shape {layer.bias.shape} != ({of},)")
                shape = (of,)
            elif isinstance(layer, MaxPool):
                if len(shape) != 3:
                    raise ModelFormatError(f"{where}: expected (C,H,W) input, got {shape}")
                if layer.window != layer.stride:
                    raise ModelFormatError(f"{where}: only window == stride pooling is modeled")
                c, h, w = shape
                if h % layer.window or w % layer.window:
                    raise ModelFormatError(f"{where}: {h}x{w} not divisible by window {layer.window}")
                shape = (c, h // layer.window, w // layer.window)
            elif isinstance(layer, Flatten):
                shape = (int(np.prod(shape)),)
            elif isinstance(layer, (Relu, Softmax)):
                pass
            else:
                raise ModelFormatError(f"{where}: unknown layer type")
        return shape


# ---------------------------------------------------------------------------
# container: versioned JSON manifest + little-endian row-major blob
# ---------------------------------------------------------------------------

_FORMAT = "adamul-model"
_VERSION = 1
_DTYPES = {"int8": np.dtype("<i1"), "int32": np.dtype("<i4")}


def _tensor_from_blob(blob: bytes, spec: dict, where: str) -> np.ndarray:
    for key in ("shape", "dtype", "offset"):
        if key not in spec:
            raise ModelFormatError(f"{where}: tensor spec missing '{key}'")
    if spec["dtype"] not in _DTYPES:
        raise ModelFormatError(f"{where}: unsupported dtype {spec['dtype']!r}")
    dtype = _DTYPES[spec["dtype"]]
    shape = tuple(int(s) for s in spec["shape"])
    nbytes = int(np.prod(shape)) * dtype.itemsize
    offset = int(spec["offset"])
    if offset < 0 or offset + nbytes > len(blob):
        raise ModelFormatError(f"{where}: tensor [{offset}:{offset + nbytes}] outside blob")
    return np.frombuffer(blob, dtype=dtype, count=int(np.prod(shape)),
                         offset=offset).reshape(shape).copy()


def _require(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ModelFormatError(f"{where}: missing required key '{key}'")
    return mapping[key]


def load_model(manifest_path, blob_path=None) -> ModelGraph:
    """Load and validate a model container.

    ``blob_path`` defaults to the manifest's ``blob.file`` resolved
    next to the manifest.  The blob checksum is verified before any
    tensor is materialized.
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{manifest_path}: not valid JSON ({e})") from e

    if manifest.get("format") != _FORMAT:
        raise ModelFormatError(f"{manifest_path}: format is not {_FORMAT!r}")
    if manifest.get("version") != _VERSION:
        raise ModelFormatError(f"{manifest_path}: unsupported version {manifest.get('version')}")

    blob_spec = _require(manifest, "blob", str(manifest_path))
    if blob_path is None:
        blob_path = manifest_path.parent / _require(blob_spec, "file", "blob")
    blob = Path(blob_path).read_bytes()
    if len(blob) != int(_require(blob_spec, "size_bytes", "blob")):
        raise ChecksumMismatchError(
            f"{blob_path}: size {len(blob)} != manifest {blob_spec['size_bytes']}")
    digest = hashlib.sha256(blob).hexdigest()
    if digest != _require(blob_spec, "sha256", "blob"):
        raise ChecksumMismatchError(f"{blob_path}: sha256 mismatch")

    input_spec = _require(manifest, "input", str(manifest_path))
    layers = []
    for i, spec in enumerate(_require(manifest, "layers", str(manifest_path))):
        where = f"layer {i}"
        kind = _require(spec, "kind", where)
        if kind == "conv2d":
            layers.append(Conv2d(
                name=_require(spec, "name", where),
                weight=_tensor_from_blob(blob, _require(spec, "weight", where), where).astype(np.int8),
                bias=_tensor_from_blob(blob, _require(spec, "bias", where), where).astype(np.int32),
                stride=int(spec.get("stride", 1)),
                padding=int(spec.get("padding", 0)),
                weight_scale=float(_require(spec, "weight_scale", where)),
                out_scale=float(_require(spec, "out_scale", where)),
                out_zero_point=int(spec.get("out_zero_point", 0)),
            ))
        elif kind == "dense":
            layers.append(Dense(
                name=_require(spec, "name", where),
                weight=_tensor_from_blob(blob, _require(spec, "weight", where), where).astype(np.int8),
                bias=_tensor_from_blob(blob, _require(spec, "bias", where), where).astype(np.int32),
                weight_scale=float(_require(spec, "weight_scale", where)),
                out_scale=float(_require(spec, "out_scale", where)),
                out_zero_point=int(spec.get("out_zero_point", 0)),
            ))
        elif kind == "maxpool":
            layers.append(MaxPool(window=int(spec.get("window", 2)), stride=int(spec.get("stride", 2))))
        elif kind == "relu":
            layers.append(Relu())
        elif kind == "flatten":
            layers.append(Flatten())
        elif kind == "softmax":
            layers.append(Softmax())
        else:
            raise ModelFormatError(f"{where}: unknown layer kind {kind!r}")

    graph = ModelGraph(
        name=manifest.get("name", manifest_path.stem),
        input_shape=tuple(int(s) for s in _require(input_spec, "shape", "input")),
        input_scale=float(_require(input_spec, "scale", "input")),
        input_zero_point=int(input_spec.get("zero_point", 0)),
        layers=layers,
    )
    graph.validate()
    return graph


def save_model(graph: ModelGraph, manifest_path, blob_path) -> None:
    """Serialize a graph into the manifest + blob container."""
    graph.validate()
    chunks = []
    offset = 0

    def put(arr: np.ndarray, dtype_name: str) -> dict:
        nonlocal offset
        arr = np.ascontiguousarray(arr, dtype=_DTYPES[dtype_name])
        raw = arr.tobytes()
        spec = {"shape": list(arr.shape), "dtype": dtype_name, "offset": offset}
        chunks.append(raw)
        offset += len(raw)
        return spec

    layer_specs = []
    for layer in graph.layers:
        if isinstance(layer, Conv2d):
            layer_specs.append({
                "kind": "conv2d", "name": layer.name,
                "stride": layer.stride, "padding": layer.padding,
                "weight": put(layer.weight, "int8"), "bias": put(layer.bias, "int32"),
                "weight_scale": layer.weight_scale, "out_scale": layer.out_scale,
                "out_zero_point": layer.out_zero_point,
            })
        elif isinstance(layer, Dense):
            layer_specs.append({
                "kind": "dense", "name": layer.name,
                "weight": put(layer.weight, "int8"), "bias": put(layer.bias, "int32"),
                "weight_scale": layer.weight_scale, "out_scale": layer.out_scale,
                "out_zero_point": layer.out_zero_point,
            })
        elif isinstance(layer, MaxPool):
            layer_specs.append({"kind": "maxpool", "window": layer.window, "stride": layer.stride})
        else:
            layer_specs.append({"kind": layer.kind})

    blob = b"".join(chunks)
    manifest = {
        "format": _FORMAT,
        "version": _VERSION,
        "name": graph.name,
        "input": {
            "shape": list(graph.input_shape),
            "scale": graph.input_scale,
            "zero_point": graph.input_zero_point,
        },
        "layers": layer_specs,
        "blob": {
            "file": Path(blob_path).name,
            "size_bytes": len(blob),
            "sha256": hashlib.sha256(blob).hexdigest(),
        },
    }
    Path(blob_path).write_bytes(blob)
    Path(manifest_path).write_text(json.dumps(manifest, indent=1) + "\n")


# ---------------------------------------------------------------------------
# forward pass
# ---------------------------------------------------------------------------

def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, padding: int, pad_value: int):
    """(N,C,H,W) int8 -> (N, OH*OW, C*kh*kw) patches."""
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)),
                   constant_values=pad_value)
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]            # (N,C,OH,OW,kh,kw)
    n, c, oh, ow = windows.shape[:4]
    patches = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n, oh * ow, c * kh * kw)
    return np.ascontiguousarray(patches), (oh, ow)


def _requantize(acc: np.ndarray, multiplier: float, zero_point: int) -> np.ndarray:
    q = round_half_away(acc.astype(np.float64) * multiplier) + zero_point
    return np.clip(q, -128, 127).astype(np.int8)


@dataclass(frozen=True)
class GemmStep:
    """One lowered GEMM of the per-image inference schedule."""

    layer_index: int
    name: str
    dims: tuple[int, int, int]
    offset: int
    cycles: int


def inference_schedule(graph: ModelGraph, cfg: ArrayConfig) -> list[GemmStep]:
    """Cycle plan of a single-image inference: one entry per GEMM layer,
    with global cycle offsets accumulated in layer order."""
    steps = []
    shape = tuple(graph.input_shape)
    offset = 0
    for i, layer in enumerate(graph.layers):
        if isinstance(layer, Conv2d):
            c, h, w = shape
            oc, ic, kh, kw = layer.weight.shape
            oh = (h + 2 * layer.padding - kh) // layer.stride + 1
            ow = (w + 2 * layer.padding - kw) // layer.stride + 1
            dims = (oh * ow, ic * kh * kw, oc)
            shape = (oc, oh, ow)
        elif isinstance(layer, Dense):
            dims = (1, int(np.prod(shape)), layer.weight.shape[0])
            shape = (layer.weight.shape[0],)
        else:
            if isinstance(layer, MaxPool):
                c, h, w = shape
                shape = (c, h // layer.window, w // layer.window)
            elif isinstance(layer, Flatten):
                shape = (int(np.prod(shape)),)
            continue
        cycles = schedule(dims, cfg).total_cycles
        name = layer.name
        steps.append(GemmStep(layer_index=i, name=name, dims=dims, offset=offset, cycles=cycles))
        offset += cycles
    return steps


def total_inference_cycles(graph: ModelGraph, cfg: ArrayConfig) -> int:
    steps = inference_schedule(graph, cfg)
    return steps[-1].offset + steps[-1].cycles if steps else 0


def prepare_input(graph: ModelGraph, image) -> np.ndarray:
    """Quantize one image (uint8 0..255 or real-valued) to the model's
    input parameters, shaped (C, H, W) int8."""
    image = np.asarray(image)
    if image.dtype == np.uint8:
        image = image.astype(np.float64) / 255.0
    if image.ndim == 2:
        image = image[None, :, :]
    if image.shape != tuple(graph.input_shape):
        raise ValueError(f"image shape {image.shape} != model input {graph.input_shape}")
    return quantize(image, graph.input_scale, graph.input_zero_point)


@dataclass
class InferenceResult:
    probabilities: np.ndarray
    detected: bool
    logits: np.ndarray


def layer_input_params(graph: ModelGraph) -> list[tuple[float, int]]:
    """(scale, zero_point) of each layer's input activations."""
    params = []
    scale, zp = graph.input_scale, graph.input_zero_point
    for layer in graph.layers:
        params.append((scale, zp))
        if isinstance(layer, (Conv2d, Dense)):
            scale, zp = layer.out_scale, layer.out_zero_point
    return params


def _forward(graph: ModelGraph, x: np.ndarray, kind: MultiplierKind,
             cfg: ArrayConfig, events_by_layer: dict,
             start_layer: int = 0, capture: Optional[dict] = None) -> InferenceResult:
    """Batched forward pass from ``start_layer``; x is that layer's
    int8 input (the model input when starting at 0).  ``capture``
    collects copies of each GEMM layer's input, keyed by layer index,
    so later runs can resume mid-graph."""
    detected = False
    scale, zero_point = layer_input_params(graph)[start_layer]
    logits = None

    for i, layer in enumerate(graph.layers):
        if i < start_layer:
            continue
        if capture is not None and isinstance(layer, (Conv2d, Dense)):
            capture[i] = x.copy()
        events = events_by_layer.get(i, ())
        if isinstance(layer, Conv2d):
            n = x.shape[0]
            patches, (oh, ow) = _im2col(x, layer.weight.shape[2], layer.weight.shape[3],
                                        layer.stride, layer.padding, pad_value=zero_point)
            a = patches.reshape(n * patches.shape[1], patches.shape[2])
            b = np.ascontiguousarray(layer.weight.reshape(layer.weight.shape[0], -1).T)
            acc, report = gemm_with_report(a, b, cfg, kind, events)
            detected = detected or report.detected
            acc = acc.astype(np.int64)
            if zero_point:
                acc -= zero_point * b.astype(np.int64).sum(axis=0)
            acc += layer.bias.astype(np.int64)
            mult = scale * layer.weight_scale / layer.out_scale
            y = _requantize(acc, mult, layer.out_zero_point)
            x = y.reshape(n, oh, ow, layer.weight.shape[0]).transpose(0, 3, 1, 2)
            x = np.ascontiguousarray(x)
            scale, zero_point = layer.out_scale, layer.out_zero_point
        elif isinstance(layer, Dense):
            n = x.shape[0]
            a = x.reshape(n, -1)
            b = np.ascontiguousarray(layer.weight.T)
            acc, report = gemm_with_report(a, b, cfg, kind, events)
            detected = detected or report.detected
            acc = acc.astype(np.int64)
            if zero_point:
                acc -= zero_point * b.astype(np.int64).sum(axis=0)
            acc += layer.bias.astype(np.int64)
            mult = scale * layer.weight_scale / layer.out_scale
            x = _requantize(acc, mult, layer.out_zero_point)
            scale, zero_point = layer.out_scale, layer.out_zero_point
        elif isinstance(layer, Relu):
            x = np.maximum(x, np.int8(zero_point))
        elif isinstance(layer, MaxPool):
            n, c, h, w = x.shape
            s = layer.window
            x = x.reshape(n, c, h // s, s, w // s, s).max(axis=(3, 5))
        elif isinstance(layer, Flatten):
            x = x.reshape(x.shape[0], -1)
        elif isinstance(layer, Softmax):
            logits = dequantize(x, scale, zero_point)
            z = logits - logits.max(axis=-1, keepdims=True)
            e = np.exp(z)
            x = e / e.sum(axis=-1, keepdims=True)

    if logits is None:
        # no explicit softmax layer: apply it to the final activations
        logits = dequantize(x, scale, zero_point)
        z = logits - logits.max(axis=-1, keepdims=True)
        e = np.exp(z)
        x = e / e.sum(axis=-1, keepdims=True)
    return InferenceResult(probabilities=x, detected=detected, logits=logits)


def infer(graph: ModelGraph, image, kind: MultiplierKind, events=(),
          cfg: Optional[ArrayConfig] = None, return_detail: bool = False):
    """Single-image inference; returns the class-probability vector.

    ``events`` address global cycles of this inference's schedule (see
    ``inference_schedule``); each is routed to the GEMM that owns its
    cycle window.  With ``return_detail`` the full ``InferenceResult``
    (probabilities, detection flag, logits) is returned instead.
    """
    cfg = cfg or ArrayConfig()
    x = prepare_input(graph, image)[None, ...]
    events_by_layer: dict[int, list] = {}
    if events:
        from .faults import FaultEvent

        steps = inference_schedule(graph, cfg)
        total = steps[-1].offset + steps[-1].cycles
        for event in events:
            if not 0 <= event.cycle < total:
                raise ValueError(f"event cycle {event.cycle} outside inference window 0..{total - 1}")
            for step in steps:
                if step.offset <= event.cycle < step.offset + step.cycles:
                    local = FaultEvent(site=event.site, cycle=event.cycle - step.offset)
                    events_by_layer.setdefault(step.layer_index, []).append(local)
                    break
    result = _forward(graph, x, kind, cfg, events_by_layer)
    result = InferenceResult(probabilities=result.probabilities[0],
                             detected=result.detected, logits=result.logits[0])
    return result if return_detail else result.probabilities


def infer_batch(graph: ModelGraph, images, kind: MultiplierKind,
                cfg: Optional[ArrayConfig] = None, batch_size: int = 64) -> np.ndarray:
    """Fault-free probabilities for a stack of images, (N, classes)."""
    cfg = cfg or ArrayConfig()
    images = np.asarray(images)
    out = []
    for start in range(0, images.shape[0], batch_size):
        chunk = images[start:start + batch_size]
        x = np.stack([prepare_input(graph, img) for img in chunk])
        out.append(_forward(graph, x, kind, cfg, {}).probabilities)
    return np.concatenate(out, axis=0)


def evaluate_accuracy(graph: ModelGraph, images, labels, kind: MultiplierKind,
                      cfg: Optional[ArrayConfig] = None, batch_size: int = 64) -> float:
    """Fault-free top-1 accuracy in percent over a labeled dataset."""
    images = np.asarray(images)
    labels = np.asarray(labels)
    if images.shape[0] == 0:
        raise ValueError("empty dataset")
    if images.shape[0] != labels.shape[0]:
        raise ValueError(f"{images.shape[0]} images vs {labels.shape[0]} labels")
    probs = infer_batch(graph, images, kind, cfg=cfg, batch_size=batch_size)
    top1 = probs.argmax(axis=1)
    return 100.0 * float((top1 == labels).mean())


# ---------------------------------------------------------------------------
# SDC classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SdcRecord:
    """Per-injection outcome under the four SDC criteria."""

    sdc1: bool
    sdc5: bool
    sdc10: bool
    sdc20: bool
    run_id: Optional[int] = None
    detected: bool = False

    @property
    def any_sdc(self) -> bool:
        return self.sdc1 or self.sdc5 or self.sdc10 or self.sdc20


def classify_sdc(golden: Sequence[float], faulty: Sequence[float],
                 run_id: Optional[int] = None, detected: bool = False) -> SdcRecord:
    """Compare golden and faulty probability vectors.

    sdc1: top-1 class changed.  sdc5: the golden top-1 class left the
    faulty top-5.  sdc10/sdc20: the confidence assigned to the golden
    top-1 class moved by more than 0.10/0.20 in absolute terms.
    """
    golden = np.asarray(golden, dtype=np.float64)
    faulty = np.asarray(faulty, dtype=np.float64)
    if golden.shape != faulty.shape:
        raise ValueError(f"probability vectors disagree: {golden.shape} vs {faulty.shape}")
    g_top = int(golden.argmax())
    f_top = int(faulty.argmax())
    faulty_top5 = np.argsort(-faulty, kind="stable")[:5]
    delta = abs(float(faulty[g_top]) - float(golden[g_top]))
    return SdcRecord(
        sdc1=f_top != g_top,
        sdc5=g_top not in faulty_top5,
        sdc10=delta > 0.10,
        sdc20=delta > 0.20,
        run_id=run_id,
        detected=detected,
    )
