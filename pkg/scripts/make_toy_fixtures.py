#!/usr/bin/env python3
"""Build a self-contained toy workspace for driving the CLI and service.

Produces, under the output directory:

    generator.sg3t        miniature equivariant generator checkpoint
    dataset.sg3t          aligned training images for `train-encoder`
    scores.sg3t           latents + synthetic attribute scores for boundaries
    frames/               scripted video frames (float .npy)
    landmarks.json        ground-truth landmark script for `preprocess`
    sg3edit.cfg           config file wiring everything together
"""

import argparse
from pathlib import Path

import numpy as np

from sg3edit.container import write_container
from sg3edit.generator import GeneratorHandle, toy_config
from sg3edit.geometry import TransformParams
from sg3edit.synthetic import render_w_dataset, scripted_video


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("toy_workspace"))
    parser.add_argument("--resolution", type=int, default=32)
    parser.add_argument("--latent-dim", type=int, default=8)
    parser.add_argument("--frames", type=int, default=20)
    parser.add_argument("--dataset-size", type=int, default=256)
    parser.add_argument("--seed", type=int, default=21)
    args = parser.parse_args()

    out = args.out
    out.mkdir(parents=True, exist_ok=True)

    handle = GeneratorHandle(
        toy_config(
            resolution=args.resolution,
            latent_dim=args.latent_dim,
            channels=12,
            num_features=24,
            seed=args.seed,
            dtype="float32",
        )
    )
    handle.average_latent(4096, seed=7)
    handle.save(out / "generator.sg3t")
    print(f"generator: {out / 'generator.sg3t'}")

    images, w = render_w_dataset(handle, args.dataset_size, seed=100)
    write_container(out / "dataset.sg3t", {"images": images})
    print(f"dataset:   {images.shape[0]} images")

    # Synthetic attribute = first latent coordinate, with clean extremes so
    # the boundary fit has an unambiguous max-margin answer.
    scores = w[:, 0].copy()
    write_container(out / "scores.sg3t", {"latents": w, "scores/attr0": scores})

    res = args.resolution
    truth = TransformParams(0.0, 4 / res, -2 / res)
    video = scripted_video(handle, [truth] * args.frames, seed=23)
    frames_dir = out / "frames"
    frames_dir.mkdir(exist_ok=True)
    for i, frame in enumerate(video.frames):
        np.save(frames_dir / f"frame_{i:06d}.npy", frame)
    video.save_landmarks(out / "landmarks.json")
    print(f"video:     {args.frames} frames at transform {truth.as_tuple()}")

    (out / "sg3edit.cfg").write_text(
        f"generator_checkpoint = {out / 'generator.sg3t'}\n"
        f"encoder_checkpoint = {out / 'encoder' / 'encoder_final.sg3t'}\n"
        f"directions_dir = {out / 'directions'}\n"
        f"sessions_dir = {out / 'sessions'}\n"
        "restyle_iters = 3\n"
        "normalize_smoothing = true\n"
        "pti_steps = 500\n"
        "pti_lr = 0.005\n"
    )
    (out / "directions").mkdir(exist_ok=True)
    print(f"config:    {out / 'sg3edit.cfg'}")
    print("next steps:")
    print(f"  sg3edit train-encoder --generator {out/'generator.sg3t'} "
          f"--dataset {out/'dataset.sg3t'} --out {out/'encoder'} --steps 2000 "
          "--restyle-iters 3 --lr 0.001")
    print(f"  sg3edit train-boundary --scores {out/'scores.sg3t'} --attribute attr0 "
          f"--out {out/'directions'/'attr0.sg3t'} --quantile 0.06")
    print(f"  sg3edit --config {out/'sg3edit.cfg'} preprocess --session {out/'sessions'/'demo'} "
          f"--frames {out/'frames'} --landmarks {out/'landmarks.json'} --box-scale 16")


if __name__ == "__main__":
    main()
