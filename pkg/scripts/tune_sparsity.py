#!/usr/bin/env python3
"""Sweep the coding sparsity budget and report output SNR per setting.

Used to pick the per-regime default for --somp-max-atoms: run the sweep on a
phantom at the regime's geometry and take the plateau. Example:

    python scripts/tune_sparsity.py --rate 0.10 --input-snr 17 \
        --max-atoms 1 2 3 4 6 8
"""

import argparse
import time

import numpy as np

from thzrecon import (
    BlockGeometry,
    InterpConfig,
    LayeredPhantomSpec,
    NoiseSpec,
    ReconParams,
    SompConfig,
    TrainConfig,
    add_gaussian_noise,
    fuse,
    generate_layered,
    group,
    interpolate,
    snr_db,
    subsample,
    train,
)
from thzrecon.blocks import block_means_cube


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rate", type=float, default=0.10)
    ap.add_argument("--input-snr", type=float, default=17.0)
    ap.add_argument("--block-nx", type=int, default=8)
    ap.add_argument("--block-ny", type=int, default=8)
    ap.add_argument("--block-b", type=int, default=4)
    ap.add_argument("--dict-k", type=int, default=256)
    ap.add_argument("--subset-l", type=int, default=10)
    ap.add_argument("--train-iters", type=int, default=8)
    ap.add_argument("--train-max-blocks", type=int, default=20000)
    ap.add_argument("--lambda", dest="lam", type=float, default=0.5)
    ap.add_argument("--beta", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-atoms", type=int, nargs="+", default=[1, 2, 3, 4, 6, 8])
    args = ap.parse_args()

    clean = generate_layered(LayeredPhantomSpec())
    noisy = add_gaussian_noise(clean, NoiseSpec(args.input_snr, seed=args.seed))
    incomplete, mask = subsample(noisy, args.rate, seed=args.seed + 1)
    y = interpolate(incomplete, mask, InterpConfig())
    geometry = BlockGeometry(args.block_nx, args.block_ny, args.block_b, clean.dims)
    grouping = group(geometry.n_blocks, args.subset_l)
    means = block_means_cube(y, geometry)

    print(f"interp SNR: {snr_db(clean, y):.2f} dB")
    for T in args.max_atoms:
        cfg = TrainConfig(
            k=args.dict_k, iterations=args.train_iters, l=args.subset_l,
            somp=SompConfig(max_atoms=T),
            max_train_blocks=args.train_max_blocks, seed=args.seed + 2,
        )
        t0 = time.perf_counter()
        dic, codes = train(y, geometry, cfg, grouping)
        recon = fuse(y, dic, codes, means, geometry, grouping,
                     ReconParams(lam=args.lam, beta=args.beta))
        print(f"max_atoms={T:2d}: output SNR {snr_db(clean, recon):6.2f} dB "
              f"({time.perf_counter() - t0:.0f}s)")


if __name__ == "__main__":
    main()
