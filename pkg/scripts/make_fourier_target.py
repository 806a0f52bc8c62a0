"""Write the band-limited target potential used by fourier_recon.json.

The plane-wave reconstruction config references this field by CSV because
a single-frequency cosine is not expressible with the bump-mixture config
kind. Run once before `pointdn reconstruct --config configs/fourier_recon.json`.
"""

from pathlib import Path

import numpy as np

from pointdn.grid import ScalarField, build_grid, dump_field_csv

N = 161
OUT = Path(__file__).parent / "configs" / "data"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    g = build_grid(N)
    q = ScalarField(g, np.cos(2.0 * np.pi * g.x))
    path = OUT / f"qcos{N}.csv"
    dump_field_csv(q, path)
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
