"""Train the bundled LeNet-scale stand-in model and export it.

Reads the 5000-sample MNIST CSV shipped with mlxtend (784 pixel columns
followed by the label), trains on the first 4000 rows, and writes:

  assets/models/lenet-small.json   layer manifest
  assets/models/lenet-small.bin    little-endian f32 weights
  assets/mnist-subset/images-idx3-ubyte, labels-idx1-ubyte
                                   the 1000 held-out rows in IDX format

Weight layouts match the Rust runtime: conv kernels are
[out][in][kh][kw]; dense weights are [out][in] where the input index
follows height-width-channel order.

Usage: python3 tools/train_reference_model.py path/to/mnist_5k.csv.gz
       [--stem NAME] [--c1 4] [--c2 8] [--hidden 32] [--pad 4] [--pad2 4] [--conv-bias]
       [--epochs 20] [--skip-idx]
"""

import argparse
import gzip
import json
import struct
from pathlib import Path

import numpy as np
import torch
from torch import nn

ROOT = Path(__file__).resolve().parent.parent
TRAIN_ROWS = 4000


def load(path):
    with gzip.open(path, "rt") as fh:
        data = np.loadtxt(fh, delimiter=",")
    pixels = data[:, :-1].astype(np.uint8)
    labels = data[:, -1].astype(np.uint8)
    return pixels, labels


def write_idx(pixels, labels, out_dir):
    out_dir.mkdir(parents=True, exist_ok=True)
    n = len(labels)
    with open(out_dir / "images-idx3-ubyte", "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        fh.write(pixels.tobytes())
    with open(out_dir / "labels-idx1-ubyte", "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, n))
        fh.write(labels.tobytes())


class Net(nn.Module):
    def __init__(self, c1, c2, hidden, pad, pad2, conv_bias):
        super().__init__()
        self.conv1 = nn.Conv2d(1, c1, 5, padding=pad, bias=conv_bias)
        self.conv2 = nn.Conv2d(c1, c2, 5, padding=pad2, bias=conv_bias)
        side = ((28 + 2 * pad - 4) // 2 + 2 * pad2 - 4) // 2
        self.flat = c2 * side * side
        self.fc1 = nn.Linear(self.flat, hidden)
        self.fc2 = nn.Linear(hidden, 10)

    def forward(self, x):
        x = torch.max_pool2d(torch.relu(self.conv1(x)), 2)
        x = torch.max_pool2d(torch.relu(self.conv2(x)), 2)
        # HWC flatten order to match the runtime
        x = x.permute(0, 2, 3, 1).reshape(x.shape[0], -1)
        x = torch.relu(self.fc1(x))
        return self.fc2(x)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv")
    ap.add_argument("--stem", default="lenet-small")
    ap.add_argument("--c1", type=int, default=4)
    ap.add_argument("--c2", type=int, default=8)
    ap.add_argument("--hidden", type=int, default=32)
    ap.add_argument("--pad", type=int, default=4)
    ap.add_argument("--pad2", type=int, default=4)
    ap.add_argument("--conv-bias", action="store_true")
    ap.add_argument("--epochs", type=int, default=20)
    ap.add_argument("--skip-idx", action="store_true")
    args = ap.parse_args()
    pixels, labels = load(args.csv)
    # the CSV is sorted by label
    order = np.random.default_rng(2019).permutation(len(labels))
    pixels, labels = pixels[order], labels[order]
    torch.manual_seed(7)
    x = torch.tensor(pixels, dtype=torch.float32).reshape(-1, 1, 28, 28) / 255.0
    y = torch.tensor(labels, dtype=torch.long)
    xtr, ytr = x[:TRAIN_ROWS], y[:TRAIN_ROWS]
    xte, yte = x[TRAIN_ROWS:], y[TRAIN_ROWS:]

    net = Net(args.c1, args.c2, args.hidden, args.pad, args.pad2, args.conv_bias)
    opt = torch.optim.Adam(net.parameters(), lr=2e-3)
    for epoch in range(args.epochs):
        perm = torch.randperm(len(ytr))
        for i in range(0, len(ytr), 64):
            idx = perm[i : i + 64]
            opt.zero_grad()
            loss = nn.functional.cross_entropy(net(xtr[idx]), ytr[idx])
            loss.backward()
            opt.step()
        with torch.no_grad():
            acc = (net(xte).argmax(1) == yte).float().mean().item()
        print(f"epoch {epoch} loss {loss.item():.4f} held-out acc {acc:.4f}")

    params = []
    for layer in (net.conv1, net.conv2, net.fc1, net.fc2):
        params.append(layer.weight.detach().numpy().astype(np.float32).ravel())
        if layer.bias is None:
            params.append(np.zeros(layer.weight.shape[0], dtype=np.float32))
        else:
            params.append(layer.bias.detach().numpy().astype(np.float32).ravel())
    blob = np.concatenate(params).astype("<f4")

    manifest = {
        "name": args.stem,
        "input": {"height": 28, "width": 28, "channels": 1},
        "num_classes": 10,
        "precision": "single",
        "layers": [
            {"kind": "conv2d", "in_channels": 1, "out_channels": args.c1, "kernel": 5, "padding": args.pad,
             "activation": "relu"},
            {"kind": "maxpool2"},
            {"kind": "conv2d", "in_channels": args.c1, "out_channels": args.c2, "kernel": 5, "padding": args.pad2,
             "activation": "relu"},
            {"kind": "maxpool2"},
            {"kind": "dense", "inputs": net.flat, "outputs": args.hidden, "activation": "relu"},
            {"kind": "dense", "inputs": args.hidden, "outputs": 10},
            {"kind": "softmax"},
        ],
    }
    models = ROOT / "assets" / "models"
    models.mkdir(parents=True, exist_ok=True)
    (models / f"{args.stem}.json").write_text(json.dumps(manifest, indent=2) + "\n")
    blob.tofile(models / f"{args.stem}.bin")
    if not args.skip_idx:
        write_idx(pixels[TRAIN_ROWS:], labels[TRAIN_ROWS:], ROOT / "assets" / "mnist-subset")


if __name__ == "__main__":
    main()
