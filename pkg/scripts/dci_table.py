#!/usr/bin/env python3
"""DCI table over the Z / W / S spaces of a toy generator.

The attribute classifier is a fixed random projection of the rendered image
(deterministic, model-free), so absolute values are not meaningful; the
point is exercising the full sampling -> scoring -> regression -> report
path and rendering the per-space table.
"""

import argparse
import warnings

import numpy as np

from sg3edit.clients import CallableClassifier
from sg3edit.dci import DCIConfig, format_table, run_dci_pipeline
from sg3edit.generator import GeneratorHandle, toy_config


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--checkpoint", default=None, help="generator container (default: fresh toy)")
    parser.add_argument("--samples", type=int, default=200)
    parser.add_argument("--attributes", type=int, default=6)
    parser.add_argument("--alignment", choices=("aligned", "unaligned"), default="aligned")
    parser.add_argument("--pseudo-align", action="store_true")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=2)
    args = parser.parse_args()

    if args.checkpoint:
        handle = GeneratorHandle.load(args.checkpoint)
    else:
        handle = GeneratorHandle(
            toy_config(resolution=32, latent_dim=8, channels=12, num_features=24,
                       seed=21, dtype="float32", alignment=args.alignment)
        )
        handle.average_latent(4096, seed=7)

    res = handle.config.resolution
    probes = np.random.default_rng(42).standard_normal((args.attributes, res, res, 3))
    probes /= np.sqrt(res * res * 3)
    client = CallableClassifier(lambda img, attr: float((img * probes[int(attr)]).sum()))
    attrs = [str(j) for j in range(args.attributes)]

    reports = []
    config = DCIConfig(seed=args.seed, n_jobs=args.jobs)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for space in ("Z", "W", "S"):
            reports.append(
                run_dci_pipeline(
                    handle, space, args.samples, client, attrs,
                    pseudo_align=args.pseudo_align, seed=args.seed, config=config,
                )
            )
    print(format_table(reports))


if __name__ == "__main__":
    main()
