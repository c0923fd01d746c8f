"""Produce the golden network fixture with an external training framework.

Builds a small MLP in torch, exports its structure to the JSON schema and its
parameters to a raw little-endian float64 blob, and records input/output pairs
for the loader tests to compare against.
"""

import json
import os

import numpy as np
import torch

OUT = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures")


def main():
    torch.manual_seed(1234)
    model = torch.nn.Sequential(
        torch.nn.Linear(4, 8),
        torch.nn.Tanh(),
        torch.nn.Linear(8, 3),
    ).double()

    spec = {
        "input_dim": 4,
        "layers": [
            {"name": "fc1", "kind": "dense", "in": 4, "out": 8},
            {"name": "act1", "kind": "activation", "in": 8, "out": 8,
             "activation": "tanh"},
            {"name": "fc2", "kind": "dense", "in": 8, "out": 3},
        ],
    }

    blob = []
    for layer in model:
        if isinstance(layer, torch.nn.Linear):
            blob.append(layer.weight.detach().numpy().astype("<f8").ravel())
            blob.append(layer.bias.detach().numpy().astype("<f8").ravel())
    flat = np.concatenate(blob)

    rng = np.random.default_rng(99)
    inputs = rng.normal(size=(5, 4))
    with torch.no_grad():
        outputs = model(torch.from_numpy(inputs)).numpy()

    os.makedirs(OUT, exist_ok=True)
    with open(os.path.join(OUT, "golden_net.json"), "w") as fh:
        json.dump(spec, fh, indent=1)
    flat.tofile(os.path.join(OUT, "golden_net.bin"))
    with open(os.path.join(OUT, "golden_io.json"), "w") as fh:
        json.dump({"inputs": inputs.tolist(), "outputs": outputs.tolist()},
                  fh, indent=1)
    print(f"wrote fixture: {flat.size} parameters, 5 io pairs")


if __name__ == "__main__":
    main()
