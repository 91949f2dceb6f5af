"""Train the fixture shape classifier and write it in the deskbot-net format.

Usage: python3 tools/train_shape_net.py shapes_train.bin models/shape_net.json

The training set comes from `cargo run --example export_shapes`.
"""
import base64
import json
import sys

import numpy as np
import torch
from torch import nn

LABELS = ["square", "cross", "disk", "triangle"]


def load(path):
    raw = np.fromfile(path, dtype=np.uint8).reshape(-1, 1 + 32 * 32)
    y = torch.tensor(raw[:, 0].astype(np.int64))
    x = torch.tensor(raw[:, 1:].astype(np.float64) / 255.0).reshape(-1, 1, 32, 32)
    return x, y


def blob(t):
    return base64.b64encode(t.detach().numpy().astype("<f8").tobytes()).decode("ascii")


def main():
    src, dst = sys.argv[1], sys.argv[2]
    torch.manual_seed(0)
    torch.set_default_dtype(torch.float64)
    x, y = load(src)
    net = nn.Sequential(
        nn.Conv2d(1, 6, 5, padding=2), nn.ReLU(), nn.MaxPool2d(2),
        nn.Conv2d(6, 12, 5, padding=2), nn.ReLU(), nn.MaxPool2d(2),
        nn.Flatten(), nn.Linear(768, 4),
    )
    opt = torch.optim.Adam(net.parameters(), lr=3e-3)
    loss_fn = nn.CrossEntropyLoss()
    for epoch in range(12):
        perm = torch.randperm(len(x))
        for i in range(0, len(x), 64):
            idx = perm[i:i + 64]
            opt.zero_grad()
            loss = loss_fn(net(x[idx]), y[idx])
            loss.backward()
            opt.step()
        with torch.no_grad():
            acc = (net(x).argmax(1) == y).double().mean().item()
        print(f"epoch {epoch} loss {loss.item():.4f} train acc {acc:.4f}")

    c1, c2, fc = net[0], net[3], net[7]
    conv = lambda c: {
        "type": "conv", "filters": c.out_channels, "in_channels": c.in_channels,
        "kernel": list(c.kernel_size), "stride": c.stride[0], "pad": c.padding[0],
        "weights": blob(c.weight), "bias": blob(c.bias),
    }
    doc = {
        "format": "deskbot-net", "version": 1, "input": [1, 32, 32], "labels": LABELS,
        "layers": [
            conv(c1), {"type": "activation", "kind": "relu"},
            {"type": "pool", "kind": "max", "window": 2, "stride": 2},
            conv(c2), {"type": "activation", "kind": "relu"},
            {"type": "pool", "kind": "max", "window": 2, "stride": 2},
            {"type": "fc", "inputs": 768, "outputs": 4, "weights": blob(fc.weight), "bias": blob(fc.bias)},
            {"type": "softmax"},
        ],
    }
    with open(dst, "w") as f:
        f.write(json.dumps(doc, separators=(",", ":")) + "\n")


if __name__ == "__main__":
    main()
