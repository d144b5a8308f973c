"""Ground-truth generators, observation samplers, patch transforms, and
count-data ingestion."""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass

import numpy as np

from .core import CompletionObservations, as_matrix, seeded_rng
from .projections import positive_rescale, svd_factors


@dataclass(frozen=True)
class WeakLqSpec:
    """Nearly-low-rank target: singular values theta_j = rho * I * j^(-1/q).

    ``entry_floor`` is the entry-wise floor requested after the positive
    rescale; None derives a mild floor from the total intensity.
    """

    q: float
    rho: float
    total_intensity: float
    dims: tuple
    entry_floor: float = None

    def __post_init__(self):
        if not 0 < self.q <= 1:
            raise ValueError(f"q must lie in (0, 1], got {self.q}")
        if self.rho <= 0 or self.total_intensity <= 0:
            raise ValueError("rho and total_intensity must be positive")

    def singular_values(self):
        d = min(self.dims)
        j = np.arange(1, d + 1, dtype=np.float64)
        return self.rho * self.total_intensity * j ** (-1.0 / self.q)


@dataclass(frozen=True)
class PatchLayout:
    """Tiling of an H x W image into h x w patches.

    Column k of the patch matrix is the row-major vectorization of the k-th
    patch, patches enumerated in row-major order; the resulting matrix is
    (h*w) x ((H/h)*(W/w)) and the transform is an exact bijection.
    """

    image_shape: tuple
    patch_shape: tuple

    def __post_init__(self):
        H, W = self.image_shape
        h, w = self.patch_shape
        if H % h or W % w:
            raise ValueError(
                f"patch shape {self.patch_shape} must divide image shape {self.image_shape}")

    @property
    def matrix_shape(self):
        H, W = self.image_shape
        h, w = self.patch_shape
        return (h * w, (H // h) * (W // w))


def gen_exact_low_rank(d1, d2, rank, fset, seed, max_resamples=100):
    """Random matrix of the given rank with entries inside [beta, alpha].

    Built from nonnegative factors whose range puts the product inside the
    box; the box clamp is then a numerical no-op, and the rank is re-checked
    after clamping with resampling as a guard.
    """
    d = min(d1, d2)
    if not 1 <= rank <= d:
        raise ValueError(f"rank must lie in [1, {d}], got {rank}")
    rng = seeded_rng(seed)
    lo = math.sqrt(fset.beta / rank)
    hi = math.sqrt(fset.alpha / rank)
    for _ in range(max_resamples):
        U = rng.uniform(lo, hi, size=(d1, rank))
        V = rng.uniform(lo, hi, size=(d2, rank))
        M = np.clip(U @ V.T, fset.beta, fset.alpha)
        s = np.linalg.svd(M, compute_uv=False)
        if rank == d or s[rank:].max() <= 1e-9 * s[0]:
            return M
    raise RuntimeError(
        f"could not draw a rank-{rank} matrix inside [{fset.beta}, {fset.alpha}] "
        f"after {max_resamples} resamples")


def gen_weak_lq(spec, seed, decay_slack=2.0):
    """Positive matrix with a prescribed power-law singular-value profile.

    Starts from random orthogonal factors with the exact boundary spectrum,
    then shifts and positively rescales so that entries clear the floor and
    the total intensity is exact.  The rescale perturbs the spectrum, so the
    decay is re-verified within ``decay_slack`` and violations are reported
    as warnings.
    """
    d1, d2 = spec.dims
    d = min(d1, d2)
    theta = spec.singular_values()
    rng = seeded_rng(seed)
    U, _ = np.linalg.qr(rng.standard_normal((d1, d)))
    V, _ = np.linalg.qr(rng.standard_normal((d2, d)))
    X = (U * theta) @ V.T

    I = spec.total_intensity
    n = d1 * d2
    floor = spec.entry_floor if spec.entry_floor is not None else 1e-3 * I / n
    if floor * n >= I:
        raise ValueError(f"entry floor {floor} infeasible for total intensity {I}")
    target = min(2.0 * floor, 0.5 * (floor + I / n))
    shifted = X - X.min()
    delta = target * shifted.sum() / (I - target * n)
    M = positive_rescale(shifted + delta, I)

    sigma = np.linalg.svd(M, compute_uv=False)
    bound = decay_slack * spec.rho * I * np.arange(1, d + 1) ** (-1.0 / spec.q)
    if np.any(sigma > bound):
        j = int(np.argmax(sigma > bound))
        warnings.warn(
            f"weak-lq decay violated after rescale: sigma_{j + 1} = {sigma[j]:.4g} "
            f"> {bound[j]:.4g} (slack {decay_slack})", stacklevel=2)
    return M


def rank_l_approx(X, ell):
    """Best rank-ell approximation via truncated SVD."""
    X = as_matrix(X)
    d = min(X.shape)
    if not 1 <= ell <= d:
        raise ValueError(f"ell must lie in [1, {d}], got {ell}")
    fac = svd_factors(X)
    trunc = fac.singular_values.copy()
    trunc[ell:] = 0.0
    return fac.compose(trunc)


def sample_completion_observations(M, m_expected, seed):
    """Bernoulli-sample entries of ``M`` and draw Poisson counts on them.

    Each index is included independently with probability m/(d1*d2); no entry
    is observed twice.  Included entries carry Y_ij ~ Poisson(M_ij).
    """
    M = as_matrix(M)
    d1, d2 = M.shape
    if not 0 < m_expected <= d1 * d2:
        raise ValueError(f"m_expected must lie in (0, {d1 * d2}], got {m_expected}")
    if M.min() < 0:
        raise ValueError("intensity matrix must be nonnegative")
    p = m_expected / (d1 * d2)
    rng = seeded_rng(seed)
    mask = rng.random((d1, d2)) < p
    rows, cols = np.nonzero(mask)
    counts = rng.poisson(M[rows, cols])
    return CompletionObservations(rows=rows, cols=cols, counts=counts,
                                  dims=(d1, d2), sample_prob=p)


def image_to_patch_matrix(image, layout):
    """Collect vectorized patches of ``image`` into the columns of a matrix."""
    image = as_matrix(image)
    if image.shape != tuple(layout.image_shape):
        raise ValueError(f"image shape {image.shape} != layout {layout.image_shape}")
    H, W = layout.image_shape
    h, w = layout.patch_shape
    blocks = image.reshape(H // h, h, W // w, w)
    return blocks.transpose(1, 3, 0, 2).reshape(h * w, (H // h) * (W // w))


def patch_matrix_to_image(matrix, layout):
    """Exact inverse of :func:`image_to_patch_matrix`."""
    matrix = as_matrix(matrix)
    if matrix.shape != layout.matrix_shape:
        raise ValueError(f"matrix shape {matrix.shape} != layout {layout.matrix_shape}")
    H, W = layout.image_shape
    h, w = layout.patch_shape
    blocks = matrix.reshape(h, w, H // h, W // w)
    return blocks.transpose(2, 0, 3, 1).reshape(H, W)


def counts_to_matrix(first_idx, second_idx, counts, dims=None):
    """Scatter 1-based (i, j, count) triplets into a dense matrix plus mask."""
    first_idx = np.asarray(first_idx, dtype=np.int64)
    second_idx = np.asarray(second_idx, dtype=np.int64)
    counts = np.asarray(counts, dtype=np.float64)
    if dims is None:
        dims = (int(first_idx.max()), int(second_idx.max()))
    M = np.zeros(dims)
    observed = np.zeros(dims, dtype=bool)
    M[first_idx - 1, second_idx - 1] = counts
    observed[first_idx - 1, second_idx - 1] = True
    return M, observed


def load_count_csv(path):
    """Load (hour, day, count) CSV rows into a dense hours-by-days matrix.

    Indices are 1-based; an optional non-numeric header line is skipped.
    Returns (matrix, observed_mask): cells never mentioned in the file are
    zero in the matrix and False in the mask.  Duplicate (hour, day) rows and
    malformed lines raise with the offending line number.
    """
    hours, days, counts = [], [], []
    seen = set()
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            toks = line.split(",")
            if lineno == 1 and not toks[0].strip().lstrip("-").isdigit():
                continue  # header
            if len(toks) != 3:
                raise ValueError(f"{path}: line {lineno}: expected 3 fields, got {len(toks)}")
            try:
                h, d, c = int(toks[0]), int(toks[1]), int(toks[2])
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
            if h < 1 or d < 1:
                raise ValueError(f"{path}: line {lineno}: indices are 1-based")
            if c < 0:
                raise ValueError(f"{path}: line {lineno}: negative count")
            if (h, d) in seen:
                raise ValueError(f"{path}: line {lineno}: duplicate cell ({h}, {d})")
            seen.add((h, d))
            hours.append(h)
            days.append(d)
            counts.append(c)
    if not hours:
        raise ValueError(f"{path}: no count rows")
    return counts_to_matrix(np.array(hours), np.array(days), np.array(counts))


def read_pgm(path):
    """Read an ASCII (P2) PGM image as a float matrix."""
    with open(path) as fh:
        tokens = []
        for line in fh:
            line = line.split("#", 1)[0]
            tokens.extend(line.split())
    if not tokens or tokens[0] != "P2":
        raise ValueError(f"{path}: not an ASCII PGM (P2) file")
    if len(tokens) < 4:
        raise ValueError(f"{path}: truncated PGM header")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    pixels = np.array([int(t) for t in tokens[4:]], dtype=np.float64)
    if pixels.size != width * height:
        raise ValueError(f"{path}: expected {width * height} pixels, got {pixels.size}")
    if pixels.size and (pixels.min() < 0 or pixels.max() > maxval):
        raise ValueError(f"{path}: pixel outside [0, {maxval}]")
    return pixels.reshape(height, width)


def write_pgm(path, image, maxval=255):
    """Write a nonnegative integer-valued matrix as an ASCII (P2) PGM image."""
    image = as_matrix(image)
    vals = np.rint(image).astype(np.int64)
    if vals.min() < 0 or vals.max() > maxval:
        raise ValueError(f"pixels must lie in [0, {maxval}]")
    height, width = vals.shape
    lines = ["P2", f"{width} {height}", str(maxval)]
    lines.extend(" ".join(str(v) for v in row) for row in vals)
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)
