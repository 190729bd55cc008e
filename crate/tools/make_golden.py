"""Independent golden values for the Rust test suites.

Writes a tiny conv model plus input into assets/reference/ and prints the
expected logits, label and a pixel-chain 4x4 golden as Rust literals. Every
stage is a straight-line scalar loop in float32 (model) or float64 (pixel
chain), mirroring the documented semantics rather than any library call.
"""
import json
import math
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "assets" / "reference"
f32 = np.float32


def tiny_model():
    rng = np.random.default_rng(7)
    # conv 1->2, k3 relu on 6x6 -> 4x4x2 ; maxpool -> 2x2x2 ; dense 8->3 ; softmax
    conv_w = rng.normal(0, 0.5, size=(2, 1, 3, 3)).astype(f32)
    conv_b = np.array([0.4, 0.1], dtype=f32)
    dense_w = rng.normal(0, 0.5, size=(3, 8)).astype(f32)
    dense_b = rng.normal(0, 0.1, size=3).astype(f32)
    image = rng.random(size=(6, 6)).astype(f32)
    return conv_w, conv_b, dense_w, dense_b, image


def forward(conv_w, conv_b, dense_w, dense_b, image):
    conv = [[[f32(0)] * 2 for _ in range(4)] for _ in range(4)]
    for y in range(4):
        for x in range(4):
            for oc in range(2):
                acc = conv_b[oc]
                for ky in range(3):
                    for kx in range(3):
                        acc = f32(acc + f32(conv_w[oc, 0, ky, kx] * image[y + ky, x + kx]))
                conv[y][x][oc] = max(acc, f32(0))
    pooled = []  # HWC order
    for y in range(2):
        for x in range(2):
            for c in range(2):
                pooled.append(max(conv[2 * y][2 * x][c], conv[2 * y][2 * x + 1][c],
                                  conv[2 * y + 1][2 * x][c], conv[2 * y + 1][2 * x + 1][c]))
    logits = []
    for o in range(3):
        acc = dense_b[o]
        for i in range(8):
            acc = f32(acc + f32(dense_w[o, i] * pooled[i]))
        logits.append(acc)
    return pooled, logits


def pixel_chain(img, gain, shift, sigma, sharpen, sharpen_sigma=1.0):
    h, w = len(img), len(img[0])
    mean = sum(sum(r) for r in img) / (h * w)
    x = [[img[i][j] * gain + mean * (1 - gain) + shift for j in range(w)] for i in range(h)]

    def blur(a, s):
        r = math.ceil(3 * s)
        k = [math.exp(-(i * i) / (2 * s * s)) for i in range(-r, r + 1)]
        tot = sum(k)
        k = [v / tot for v in k]
        clampi = lambda v, hi: min(max(v, 0), hi - 1)
        hor = [[sum(k[t] * a[i][clampi(j + t - r, w)] for t in range(2 * r + 1)) for j in range(w)] for i in range(h)]
        return [[sum(k[t] * hor[clampi(i + t - r, h)][j] for t in range(2 * r + 1)) for j in range(w)] for i in range(h)]

    x = blur(x, sigma)
    b = blur(x, sharpen_sigma)
    x = [[x[i][j] + sharpen * (x[i][j] - b[i][j]) for j in range(w)] for i in range(h)]
    return [[min(max(v, 0.0), 1.0) for v in row] for row in x]


def rust_list(values, fmt="{:.9e}"):
    return "[" + ", ".join(fmt.format(float(v)) for v in values) + "]"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    conv_w, conv_b, dense_w, dense_b, image = tiny_model()
    manifest = {
        "name": "tiny-golden",
        "input": {"height": 6, "width": 6, "channels": 1},
        "num_classes": 3,
        "precision": "single",
        "layers": [
            {"kind": "conv2d", "in_channels": 1, "out_channels": 2, "kernel": 3, "activation": "relu"},
            {"kind": "maxpool2"},
            {"kind": "dense", "inputs": 8, "outputs": 3, "activation": "none"},
            {"kind": "softmax"},
        ],
    }
    (OUT / "tiny.json").write_text(json.dumps(manifest, indent=2) + "\n")
    blob = np.concatenate([conv_w.ravel(), conv_b, dense_w.ravel(), dense_b]).astype("<f4")
    (OUT / "tiny.bin").write_bytes(blob.tobytes())
    (OUT / "tiny-input.f32").write_bytes(image.astype("<f4").ravel().tobytes())

    pooled, logits = forward(conv_w, conv_b, dense_w, dense_b, image)
    print("pooled:", rust_list(pooled))
    print("logits:", rust_list(logits))
    print("label:", int(np.argmax(logits)))

    src = [[0.10, 0.20, 0.30, 0.40], [0.90, 0.80, 0.70, 0.60], [0.05, 0.50, 0.95, 0.25], [0.33, 0.66, 0.15, 0.85]]
    src = [[float(f32(v)) for v in row] for row in src]
    out = pixel_chain(src, 1.2, 0.05, 0.8, 0.3)
    print("chain:", rust_list([v for row in out for v in row], "{:.12}"))


if __name__ == "__main__":
    main()
