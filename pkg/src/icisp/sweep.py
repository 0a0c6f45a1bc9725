"""Rate-distortion sweeps over checkpoints and structural parameter counting."""

import csv
import logging
from pathlib import Path

from .codec.coding import decode_image, encode_image
from .metrics import bpp_measure, fidelity_metrics
from .training.data import list_images, load_image
from .training.loop import load_checkpoint, load_model

__all__ = ["count_params", "rd_sweep", "read_rd_csv"]

log = logging.getLogger(__name__)


def count_params(model):
    """Exact count of trainable scalars (frozen modules excluded)."""
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def _lambda_id(path, meta):
    train = meta.get("train") or {}
    if "lam" in train:
        return f"lam{train['lam']:g}"
    return Path(path).stem


def rd_sweep(checkpoint_paths, image_dir, out_csv, plot_dir=None, extra_scores=None):
    """Encode/decode every image under every checkpoint; write per-image and
    mean RD rows, optionally merge external per-image quality scores, and
    plot one curve file per metric.

    CSV columns: lambda_id, image, bpp, psnr, msssim [, extra metrics].
    """
    images = list_images(image_dir)
    if not images:
        raise ValueError(f"no images in {image_dir}")
    extra = _read_extra_scores(extra_scores) if extra_scores else {}
    extra_names = sorted({name for scores in extra.values() for name in scores})

    rows = []
    for ckpt in checkpoint_paths:
        meta, _, _ = load_checkpoint(ckpt)
        model = load_model(ckpt).eval()
        lam_id = _lambda_id(ckpt, meta)
        per_image = []
        for path in images:
            x = load_image(path).unsqueeze(0)
            container = encode_image(x, model)
            x_hat = decode_image(container, model)
            bpp = bpp_measure(container, x.shape[-1], x.shape[-2])
            psnr_db, msssim = fidelity_metrics(x, x_hat)
            row = {"lambda_id": lam_id, "image": path.name, "bpp": bpp, "psnr": psnr_db, "msssim": msssim}
            for name in extra_names:
                row[name] = extra.get((lam_id, path.name), {}).get(name, "")
            per_image.append(row)
            rows.append(row)
        mean_row = {"lambda_id": lam_id, "image": "mean"}
        for key in ("bpp", "psnr", "msssim", *extra_names):
            vals = [r[key] for r in per_image if r.get(key) != ""]
            mean_row[key] = sum(vals) / len(vals) if vals else ""
        rows.append(mean_row)
        log.info("%s: mean bpp %.4f psnr %.2f msssim %.4f", lam_id, mean_row["bpp"], mean_row["psnr"], mean_row["msssim"])

    fields = ["lambda_id", "image", "bpp", "psnr", "msssim", *extra_names]
    out_csv = Path(out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    with open(out_csv, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)

    if plot_dir is not None:
        _plot_curves(rows, ("psnr", "msssim", *extra_names), Path(plot_dir))
    return rows


def _read_extra_scores(path):
    """Side-channel CSV with columns lambda_id, image, <metric...> keyed on
    (lambda_id, image); lets externally computed quality scores join the sweep."""
    scores = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row.pop("lambda_id"), row.pop("image"))
            scores[key] = {k: float(v) for k, v in row.items() if v != ""}
    return scores


def _plot_curves(rows, metrics, plot_dir):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plot_dir.mkdir(parents=True, exist_ok=True)
    mean_rows = [r for r in rows if r["image"] == "mean"]
    for metric in metrics:
        pts = sorted(
            ((r["bpp"], r[metric], r["lambda_id"]) for r in mean_rows if r.get(metric) != ""),
            key=lambda t: t[0],
        )
        if not pts:
            continue
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o")
        for bpp, val, lam in pts:
            ax.annotate(lam, (bpp, val), fontsize=7)
        ax.set_xlabel("bpp")
        ax.set_ylabel(metric)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(plot_dir / f"rd_{metric}.png", dpi=120)
        plt.close(fig)


def read_rd_csv(path, metric, use_means=True):
    """Load (bpp, metric) points from a sweep CSV as a BD-rate curve,
    sorted by bpp."""
    from .bdrate import RDPoint

    points = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if use_means != (row["image"] == "mean"):
                continue
            if row.get(metric, "") == "":
                continue
            points.append(RDPoint(bpp=float(row["bpp"]), quality=float(row[metric]), metric_name=metric, lambda_id=row["lambda_id"]))
    points.sort(key=lambda p: p.bpp)
    return points
