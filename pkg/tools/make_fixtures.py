#!/usr/bin/env python3
"""Regenerate the state fixtures under fixtures/.

Everything is produced by the library's own generators; nothing is
hand-typed.  Run from the repository root:

    python3 tools/make_fixtures.py [output-dir]
"""

import json
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from qextract.quantum import DensityOperator, System, state_to_json  # noqa: E402
from qextract.verify import gen_markov_counterexample  # noqa: E402

DEFAULT_DIR = os.path.join(os.path.dirname(__file__), "..", "fixtures")


def fixture_states() -> dict[str, DensityOperator]:
    _, eta, nu, _ = gen_markov_counterexample()

    phi = np.zeros(4, dtype=complex)
    phi[0] = phi[3] = np.sqrt(0.5)
    entangled = DensityOperator((System("A", 2), System("B", 2)),
                                np.outer(phi, phi.conj()))

    n = 3
    x = System("X", 2 ** n, classical=True)
    b = System("B", 2)
    uniform = DensityOperator((x, b), np.kron(np.eye(2 ** n) / 2 ** n,
                                              np.eye(2) / 2))
    return {
        "counterexample_eta.json": eta,
        "counterexample_nu.json": nu,
        "maximally_entangled.json": entangled,
        "product_uniform_n3.json": uniform,
    }


def main(out_dir: str = DEFAULT_DIR) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for name, rho in fixture_states().items():
        path = os.path.join(out_dir, name)
        with open(path, "w") as f:
            json.dump(state_to_json(rho), f)
        print(f"wrote {path}")


if __name__ == "__main__":
    main(*sys.argv[1:2])
