"""Fit the per-tone and silence GMMs for the speech fixture.

Usage: python3 tools/fit_speech_gmms.py speech_frames.bin gmms.json

Input comes from `cargo run --example export_speech_frames`; the output is
assembled into the model file by `cargo run --example build_speech_model`.
"""
import json
import sys

import numpy as np
from sklearn.mixture import GaussianMixture

N_CLASSES = 9
N_COMPONENTS = 3


def main():
    src, dst = sys.argv[1], sys.argv[2]
    rec = np.dtype([("label", "u1"), ("x", "<f8", (8,))])
    data = np.fromfile(src, dtype=rec)
    gmms = []
    for c in range(N_CLASSES):
        x = data["x"][data["label"] == c]
        g = GaussianMixture(N_COMPONENTS, covariance_type="diag", reg_covar=1e-2,
                            random_state=0, n_init=2, max_iter=500).fit(x)
        w = g.weights_ / g.weights_.sum()
        print(f"class {c}: {len(x)} frames, mean ll {g.score(x):.2f}")
        gmms.append({"components": [
            {"weight": float(w[k]), "mean": [float(v) for v in g.means_[k]],
             "var": [float(v) for v in g.covariances_[k]]}
            for k in range(N_COMPONENTS)
        ]})
    with open(dst, "w") as f:
        json.dump(gmms, f)


if __name__ == "__main__":
    main()
