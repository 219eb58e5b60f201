#!/usr/bin/env python3
"""Regenerate the bundled evaluation assets.

Builds a deterministic synthetic handwritten-digit corpus (28x28
grayscale, MNIST-style IDX files), trains a small LeNet-class CNN on it
in float32 with plain numpy, post-training-quantizes it to INT8, and
writes the test split plus the quantized model container into
src/adamul/assets/.

Everything is seeded: re-running this script reproduces the shipped
assets byte for byte.

Usage:
    python tools/build_fixture.py [--epochs 4] [--train 10000] [--test 2000]
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from adamul import idx, nn
from adamul.multipliers import MultiplierKind

ASSETS = Path(__file__).resolve().parents[1] / "src" / "adamul" / "assets"

GRID = 28


# ---------------------------------------------------------------------------
# synthetic digit rendering
# ---------------------------------------------------------------------------

def _arc(cx, cy, r, a0, a1, n=40, ry=None):
    """Polyline along an ellipse arc; angles in degrees, y axis down."""
    t = np.linspace(np.radians(a0), np.radians(a1), n)
    ry = r if ry is None else ry
    return np.stack([cx + r * np.cos(t), cy - ry * np.sin(t)], axis=1)


def _line(x0, y0, x1, y1, n=30):
    t = np.linspace(0.0, 1.0, n)
    return np.stack([x0 + (x1 - x0) * t, y0 + (y1 - y0) * t], axis=1)


def digit_strokes(d):
    """Stroke polylines of one digit glyph in the unit box (y down)."""
    if d == 0:
        return [_arc(0.50, 0.50, 0.21, 0, 360, n=80, ry=0.30)]
    if d == 1:
        return [_line(0.50, 0.17, 0.50, 0.83), _line(0.38, 0.30, 0.50, 0.17)]
    if d == 2:
        return [
            _arc(0.50, 0.35, 0.19, 160, 0, ry=0.17),
            _line(0.69, 0.35, 0.31, 0.80),
            _line(0.31, 0.80, 0.72, 0.80),
        ]
    if d == 3:
        return [
            _arc(0.47, 0.33, 0.17, 150, -80, ry=0.15),
            _arc(0.47, 0.65, 0.19, 80, -150, ry=0.17),
        ]
    if d == 4:
        return [
            _line(0.58, 0.17, 0.30, 0.60),
            _line(0.30, 0.60, 0.75, 0.60),
            _line(0.62, 0.38, 0.62, 0.83),
        ]
    if d == 5:
        return [
            _line(0.69, 0.18, 0.36, 0.18),
            _line(0.36, 0.18, 0.34, 0.47),
            _arc(0.48, 0.63, 0.19, 130, -120, ry=0.17),
        ]
    if d == 6:
        return [
            _arc(0.55, 0.45, 0.21, 70, 180, ry=0.29),
            _arc(0.48, 0.63, 0.16, 0, 360, n=60, ry=0.15),
        ]
    if d == 7:
        return [_line(0.30, 0.19, 0.72, 0.19), _line(0.72, 0.19, 0.42, 0.83)]
    if d == 8:
        return [
            _arc(0.50, 0.34, 0.15, 0, 360, n=60, ry=0.14),
            _arc(0.50, 0.66, 0.18, 0, 360, n=70, ry=0.16),
        ]
    if d == 9:
        return [
            _arc(0.52, 0.37, 0.16, 0, 360, n=60, ry=0.15),
            _arc(0.45, 0.55, 0.24, -60, 10, ry=0.29),
            _line(0.68, 0.40, 0.62, 0.83),
        ]
    raise ValueError(f"no glyph for {d}")


def render_digit(d, rng):
    """Rasterize one jittered glyph to a 28x28 uint8 image."""
    theta = rng.uniform(-0.55, 0.55)
    shear = rng.uniform(-0.42, 0.42)
    sx = rng.uniform(0.58, 1.38)
    sy = rng.uniform(0.58, 1.38)
    shift = rng.uniform(-0.16, 0.16, size=2)
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    aff = rot @ np.array([[sx, shear * sx], [0.0, sy]])

    strokes = []
    for stroke in digit_strokes(d):
        # per-stroke placement wobble plus low-frequency waviness
        stroke = stroke + rng.normal(0.0, 0.020, size=2)
        amp = rng.uniform(0.0, 0.05)
        phase = rng.uniform(0.0, 2 * np.pi, size=2)
        freq = rng.uniform(4.0, 9.0)
        stroke = stroke + amp * np.sin(freq * stroke[:, ::-1] + phase)
        # broken pen: occasionally drop a chunk of the stroke
        if rng.random() < 0.45 and len(stroke) > 12:
            cut = rng.integers(0, len(stroke) - 8)
            gap = rng.integers(4, max(5, len(stroke) // 3))
            stroke = np.delete(stroke, slice(cut, cut + gap), axis=0)
        strokes.append(stroke)
    pts = np.concatenate(strokes, axis=0)
    pts = (pts - 0.5) @ aff.T + 0.5 + shift

    width = rng.uniform(0.016, 0.064)
    peak = rng.uniform(0.50, 1.0)
    ys, xs = np.mgrid[0:GRID, 0:GRID]
    gx = (xs + 0.5) / GRID
    gy = (ys + 0.5) / GRID
    d2 = (gx[:, :, None] - pts[None, None, :, 0]) ** 2 + \
         (gy[:, :, None] - pts[None, None, :, 1]) ** 2
    img = peak * np.exp(-d2.min(axis=2) / (2.0 * width * width))
    # occasional unrelated scratch through the frame
    if rng.random() < 0.45:
        p0 = rng.uniform(0.1, 0.9, size=2)
        p1 = p0 + rng.uniform(-0.45, 0.45, size=2)
        scratch = _line(p0[0], p0[1], p1[0], p1[1], n=25)
        s2 = (gx[:, :, None] - scratch[None, None, :, 0]) ** 2 +              (gy[:, :, None] - scratch[None, None, :, 1]) ** 2
        img = np.maximum(img, rng.uniform(0.3, 0.8) * np.exp(-s2.min(axis=2) / (2.0 * 0.018 ** 2)))
    img += rng.normal(0.0, rng.uniform(0.05, 0.20), size=img.shape)
    return (np.clip(img, 0.0, 1.0) * 255).astype(np.uint8)


def generate_split(n_images, seed):
    """Balanced labeled split; deterministic for a given seed."""
    rng = np.random.default_rng(seed)
    per_class = n_images // 10
    images = np.empty((per_class * 10, GRID, GRID), dtype=np.uint8)
    labels = np.empty(per_class * 10, dtype=np.uint8)
    i = 0
    for d in range(10):
        for _ in range(per_class):
            images[i] = render_digit(d, rng)
            labels[i] = d
            i += 1
    order = rng.permutation(i)
    return images[order], labels[order]


# ---------------------------------------------------------------------------
# float32 training (numpy)
# ---------------------------------------------------------------------------

def im2col(x, kh, kw, stride=1):
    w = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    w = w[:, :, ::stride, ::stride]
    n, c, oh, ow = w.shape[:4]
    return w.transpose(0, 2, 3, 1, 4, 5).reshape(n, oh * ow, c * kh * kw), (oh, ow)


class Conv:
    def __init__(self, rng, cin, cout, k):
        fan_in = cin * k * k
        self.w = rng.normal(0, np.sqrt(2.0 / fan_in), size=(cout, cin, k, k))
        self.b = np.zeros(cout)
        self.k = k

    def forward(self, x):
        self.x_shape = x.shape
        self.cols, (oh, ow) = im2col(x, self.k, self.k)
        out = self.cols @ self.w.reshape(self.w.shape[0], -1).T + self.b
        return out.reshape(x.shape[0], oh, ow, -1).transpose(0, 3, 1, 2)

    def backward(self, grad):
        n, cout, oh, ow = grad.shape
        g = grad.transpose(0, 2, 3, 1).reshape(n, oh * ow, cout)
        self.gw = np.einsum("npo,npk->ok", g, self.cols).reshape(self.w.shape) / n
        self.gb = g.sum(axis=(0, 1)) / n
        gcols = g @ self.w.reshape(cout, -1)
        # scatter columns back to the input image
        _, cin, h, wdt = self.x_shape
        gx = np.zeros(self.x_shape)
        k = self.k
        idx = 0
        for i in range(oh):
            for j in range(ow):
                patch = gcols[:, idx].reshape(n, cin, k, k)
                gx[:, :, i:i + k, j:j + k] += patch
                idx += 1
        return gx


class DenseF:
    def __init__(self, rng, cin, cout):
        self.w = rng.normal(0, np.sqrt(2.0 / cin), size=(cout, cin))
        self.b = np.zeros(cout)

    def forward(self, x):
        self.x = x
        return x @ self.w.T + self.b

    def backward(self, grad):
        self.gw = grad.T @ self.x / self.x.shape[0]
        self.gb = grad.mean(axis=0)
        return grad @ self.w


class Net:
    def __init__(self, seed=7):
        rng = np.random.default_rng(seed)
        self.conv1 = Conv(rng, 1, 8, 5)
        self.conv2 = Conv(rng, 8, 16, 5)
        self.fc1 = DenseF(rng, 16 * 4 * 4, 64)
        self.fc2 = DenseF(rng, 64, 10)
        self.params = [self.conv1, self.conv2, self.fc1, self.fc2]

    @staticmethod
    def _pool(x):
        n, c, h, w = x.shape
        blocks = x.reshape(n, c, h // 2, 2, w // 2, 2)
        flat = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
        arg = flat.argmax(axis=-1)
        return flat.max(axis=-1), arg

    @staticmethod
    def _unpool(grad, arg, h, w):
        n, c, oh, ow = grad.shape
        out = np.zeros((n, c, oh, ow, 4))
        np.put_along_axis(out, arg[..., None], grad[..., None], axis=-1)
        out = out.reshape(n, c, oh, ow, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        return out.reshape(n, c, h, w)

    def forward(self, x, record=None):
        a1 = self.conv1.forward(x)
        r1 = np.maximum(a1, 0)
        p1, self.arg1 = self._pool(r1)
        a2 = self.conv2.forward(p1)
        r2 = np.maximum(a2, 0)
        p2, self.arg2 = self._pool(r2)
        flat = p2.reshape(x.shape[0], -1)
        h1 = self.fc1.forward(flat)
        rh = np.maximum(h1, 0)
        logits = self.fc2.forward(rh)
        self.cache = (a1, r1, a2, r2, p2, h1, rh)
        if record is not None:
            record["conv1"].append(np.abs(a1).max())
            record["conv2"].append(np.abs(a2).max())
            record["fc1"].append(np.abs(h1).max())
            record["fc2"].append(np.abs(logits).max())
        return logits

    def backward(self, dlogits):
        a1, r1, a2, r2, p2, h1, rh = self.cache
        g = self.fc2.backward(dlogits)
        g = g * (h1 > 0)
        g = self.fc1.backward(g)
        g = g.reshape(p2.shape)
        g = self._unpool(g, self.arg2, r2.shape[2], r2.shape[3])
        g = g * (a2 > 0)
        g = self.conv2.backward(g)
        g = self._unpool(g, self.arg1, r1.shape[2], r1.shape[3])
        g = g * (a1 > 0)
        self.conv1.backward(g)


def train(net, images, labels, epochs, batch, lr, seed=13, smoothing=0.35):
    rng = np.random.default_rng(seed)
    x_all = images.astype(np.float64)[:, None, :, :] / 255.0
    n = x_all.shape[0]
    moments = [{"mw": 0, "vw": 0, "mb": 0, "vb": 0} for _ in net.params]
    step = 0
    for epoch in range(epochs):
        order = rng.permutation(n)
        correct = 0
        for start in range(0, n - batch + 1, batch):
            sel = order[start:start + batch]
            x, y = x_all[sel], labels[sel]
            logits = net.forward(x)
            z = logits - logits.max(axis=1, keepdims=True)
            p = np.exp(z)
            p /= p.sum(axis=1, keepdims=True)
            correct += int((logits.argmax(axis=1) == y).sum())
            target = np.full_like(p, smoothing / 10.0)
            target[np.arange(len(y)), y] += 1.0 - smoothing
            net.backward(p - target)
            step += 1
            for layer, m in zip(net.params, moments):
                for gname, pname, mk, vk in (("gw", "w", "mw", "vw"), ("gb", "b", "mb", "vb")):
                    g = getattr(layer, gname)
                    m[mk] = 0.9 * m[mk] + 0.1 * g
                    m[vk] = 0.999 * m[vk] + 0.001 * g * g
                    mhat = m[mk] / (1 - 0.9 ** step)
                    vhat = m[vk] / (1 - 0.999 ** step)
                    setattr(layer, pname, getattr(layer, pname) - lr * mhat / (np.sqrt(vhat) + 1e-8))
        print(f"  epoch {epoch + 1}: train acc {100.0 * correct / (n // batch * batch):.2f}%")
    return net


# ---------------------------------------------------------------------------
# post-training INT8 quantization
# ---------------------------------------------------------------------------

def quantize_model(net, calib_images, name, target_kind=MultiplierKind.ADAM):
    """Sequential hardware-aware post-training quantization.

    Requantization scales are calibrated by running the calibration set
    through the already-quantized prefix of the network using the
    *target multiplier*, so the int8 range is matched to the arithmetic
    the model will actually execute on (the approximate pipeline
    systematically underestimates; float-calibrated scales would leave
    its activations undersized and its decision margins squeezed).
    """
    from adamul.multipliers import product_table

    table = product_table(target_kind).astype(np.int64)
    in_scale = 1.0 / 127.0
    layers = []
    scale_in = in_scale
    x = nn.quantize(calib_images.astype(np.float64)[:, None, :, :] / 255.0, in_scale)

    def lut_gemm(a, b):
        mags_a = np.minimum(np.abs(a.astype(np.int64)), 127)
        mags_b = np.minimum(np.abs(b.astype(np.int64)), 127)
        sign_a = np.sign(a.astype(np.int64))
        sign_b = np.sign(b.astype(np.int64))
        out = np.empty((a.shape[0], b.shape[1]), dtype=np.int64)
        chunk = max(1, (1 << 23) // max(1, a.shape[1] * b.shape[1]))
        for s in range(0, a.shape[0], chunk):
            signs = sign_a[s:s + chunk, :, None] * sign_b[None, :, :]
            out[s:s + chunk] = (signs * table[mags_a[s:s + chunk, :, None],
                                              mags_b[None, :, :]]).sum(axis=1)
        return out

    def q_layer(cls, lname, w, b, **kw):
        nonlocal scale_in, x
        w_scale = float(np.abs(w).max() / 127.0)
        wq = nn.quantize(w, w_scale)
        bq = np.asarray(nn.round_half_away(b / (scale_in * w_scale)), dtype=np.int64)
        bq = np.clip(bq, -2 ** 31, 2 ** 31 - 1).astype(np.int32)
        if cls is nn.Conv2d:
            n_img = x.shape[0]
            patches, (oh, ow) = nn._im2col(x, wq.shape[2], wq.shape[3], kw["stride"], kw["padding"], 0)
            a2 = patches.reshape(-1, patches.shape[2])
            acc = lut_gemm(a2, wq.reshape(wq.shape[0], -1).T) + bq
        else:
            acc = lut_gemm(x.reshape(x.shape[0], -1), wq.T) + bq
        out_max = float(np.abs(acc).max()) * scale_in * w_scale
        out_scale = float(out_max / 127.0)
        layers.append(cls(name=lname, weight=wq, bias=bq, weight_scale=w_scale,
                          out_scale=out_scale, out_zero_point=0, **kw))
        y = nn._requantize(acc, scale_in * w_scale / out_scale, 0)
        if cls is nn.Conv2d:
            x = y.reshape(n_img, oh, ow, wq.shape[0]).transpose(0, 3, 1, 2)
        else:
            x = y
        scale_in = out_scale

    def relu_pool(pool):
        nonlocal x
        layers.append(nn.Relu())
        x = np.maximum(x, 0)
        if pool:
            layers.append(nn.MaxPool(window=2, stride=2))
            n_, c_, h_, w_ = x.shape
            x = x.reshape(n_, c_, h_ // 2, 2, w_ // 2, 2).max(axis=(3, 5))

    q_layer(nn.Conv2d, "conv1", net.conv1.w, net.conv1.b, stride=1, padding=0)
    relu_pool(pool=True)
    q_layer(nn.Conv2d, "conv2", net.conv2.w, net.conv2.b, stride=1, padding=0)
    relu_pool(pool=True)
    layers.append(nn.Flatten())
    x = x.reshape(x.shape[0], -1)
    q_layer(nn.Dense, "fc1", net.fc1.w, net.fc1.b)
    relu_pool(pool=False)
    q_layer(nn.Dense, "fc2", net.fc2.w, net.fc2.b)
    layers.append(nn.Softmax())

    return nn.ModelGraph(name=name, input_shape=(1, GRID, GRID),
                         input_scale=in_scale, input_zero_point=0, layers=layers)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--train", type=int, default=10000)
    ap.add_argument("--test", type=int, default=2000)
    ap.add_argument("--epochs", type=int, default=4)
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--lr", type=float, default=1e-3)
    args = ap.parse_args()

    ASSETS.mkdir(parents=True, exist_ok=True)

    print(f"generating {args.train} train / {args.test} test images")
    train_images, train_labels = generate_split(args.train, seed=20240601)
    test_images, test_labels = generate_split(args.test, seed=20240602)

    idx.write_idx(ASSETS / "digits_test_images.idx.gz", test_images)
    idx.write_idx(ASSETS / "digits_test_labels.idx.gz", test_labels)
    print(f"wrote test split to {ASSETS}")

    print("training float32 network")
    net = train(Net(), train_images, train_labels, args.epochs, args.batch, args.lr)

    x_test = test_images.astype(np.float64)[:, None, :, :] / 255.0
    float_logits = []
    for s in range(0, x_test.shape[0], 256):
        float_logits.append(net.forward(x_test[s:s + 256]))
    float_acc = 100.0 * (np.concatenate(float_logits).argmax(axis=1) == test_labels).mean()
    print(f"float32 test accuracy: {float_acc:.2f}%")

    print("calibrating activation ranges on the target multiplier")
    graph = quantize_model(net, train_images[:512], "digits-lenet-int8")
    nn.save_model(graph, ASSETS / "lenet_int8.json", ASSETS / "lenet_int8.bin")
    print(f"wrote model container to {ASSETS}")

    for kind in (MultiplierKind.EXACT, MultiplierKind.ADAM):
        acc = nn.evaluate_accuracy(graph, test_images, test_labels, kind)
        print(f"int8 accuracy with {kind.value}: {acc:.2f}%")


if __name__ == "__main__":
    main()
