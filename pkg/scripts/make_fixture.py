#!/usr/bin/env python
"""Write a planted multi-class dataset as CSV, or as an IDX image/label pair."""

import dataclasses
import os
import sys

import click
import numpy as np

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.data_access.repositories.idx_repository import write_idx  # noqa: E402
from src.services.synthetic import planted_class_data  # noqa: E402


@click.command()
@click.option("--out", required=True, help="Target .csv file, or the images path of an IDX pair.")
@click.option("--labels", help="IDX labels path; selects IDX output.")
@click.option("--features", default=12, show_default=True, type=int)
@click.option("--samples", default=100, show_default=True, type=int)
@click.option("--classes", default=3, show_default=True, type=int)
@click.option("--subspace-dim", default=2, show_default=True, type=int)
@click.option("--noise", default=1e-2, show_default=True, type=float)
@click.option("--seed", default=21, show_default=True, type=int)
def main(out, labels, features, samples, classes, subspace_dim, noise, seed):
    dataset = planted_class_data(
        d=features, n=samples, classes=classes, subspace_dim=subspace_dim, noise=noise, seed=seed,
    )

    if labels:
        X = dataset.X
        pixels = np.round(255.0 * (X - X.min()) / (X.max() - X.min()))
        write_idx(dataclasses.replace(dataset, X=pixels, image_shape=(1, features)), out, labels)
        click.echo(f"wrote {samples} images to {out} and labels to {labels}")
        return

    with open(out, "w", encoding="utf-8") as f:
        f.write(",".join(dataset.feature_names + ["label"]) + "\n")
        for j in range(dataset.n_samples):
            cells = [repr(float(v)) for v in dataset.X[:, j]]
            f.write(",".join(cells + [dataset.class_values[dataset.labels[j]]]) + "\n")
    click.echo(f"wrote {samples} samples with {features} features to {out}")


if __name__ == "__main__":
    main()
