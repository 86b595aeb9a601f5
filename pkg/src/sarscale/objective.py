"""Quadratic objective for the per-subswath noise scaling vector.

Each loss term is a sum of squared, weighted differences of the denoised
image ``x - k_a y`` between two samples. Because the model is linear in
``k``, each difference splits into a constant part (the ``x`` difference)
and a part linear in ``k`` (the ``y`` terms), so every term becomes rows of
a system ``(v, C)`` with ``L(k) = |v - C k|^2``. The four terms are stacked
in a fixed order: azimuth, intra_range, inter_swath, regularizer.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.signal import find_peaks

from .calibration import SUBSWATHS
from .errors import DegenerateSystem, ExtremaNotFound, GeometryMismatch
from .noise_field import NO_SUBSWATH, azimuth_line_means, check_shapes

log = logging.getLogger(__name__)

TERMS = ("azimuth", "intra_range", "inter_swath", "regularizer")
NSWATH = len(SUBSWATHS)

PUBLISHED_LAMBDA = (0.1, 0.1, 6.75124, 2.78253, 10.0)
PUBLISHED_MU = 1.79
PUBLISHED_RATIO_BOUNDS = (0.0, 2.5)
DEFAULT_EPSILON = 25

# subswaths whose right edge is paired with the next subswath
INTER_SWATHS = SUBSWATHS[:-1]
# EW1 noise has two troughs in range, the others one
N_TROUGHS = {"EW1": 2, "EW2": 1, "EW3": 1, "EW4": 1, "EW5": 1}


@dataclass(frozen=True)
class ObjectiveParams:
    epsilon: int = DEFAULT_EPSILON
    mu: float = PUBLISHED_MU
    ratio_bounds: tuple = PUBLISHED_RATIO_BOUNDS
    lambdas: tuple = PUBLISHED_LAMBDA
    min_valid_fraction: float = 0.25
    zero_tol: float = 1e-12


@dataclass(frozen=True)
class LossRow:
    residual_const: float
    coefficients: tuple
    term_tag: str
    weight: float


@dataclass
class RowBlock:
    """Candidate rows of one loss term, stored column-wise.

    Rows rejected by the weight gate are kept with weight 0 (and zero
    ``v``/``C`` entries) so that candidate counts stay inspectable;
    :func:`assemble` drops them.
    """

    tag: str
    v: np.ndarray
    C: np.ndarray
    weight: np.ndarray

    @classmethod
    def empty(cls, tag):
        return cls(tag, np.zeros(0), np.zeros((0, NSWATH)), np.zeros(0))

    @classmethod
    def concat(cls, tag, blocks):
        blocks = [b for b in blocks if len(b)]
        if not blocks:
            return cls.empty(tag)
        return cls(tag, np.concatenate([b.v for b in blocks]),
                   np.concatenate([b.C for b in blocks]),
                   np.concatenate([b.weight for b in blocks]))

    def __len__(self):
        return len(self.v)

    def __iter__(self):
        for v, c, w in zip(self.v, self.C, self.weight):
            yield LossRow(float(v), tuple(float(x) for x in c), self.tag, float(w))

    @property
    def kept(self):
        return self.weight > 0


@dataclass(frozen=True)
class ExtremaLayout:
    peaks: dict
    troughs: dict
    epsilon: int

    def sequence(self, subswath_id):
        """Peaks and troughs interleaved: p1, t1, p2[, t2, p3]."""
        p, t = self.peaks[subswath_id], self.troughs[subswath_id]
        seq = [p[0]]
        for trough, peak in zip(t, p[1:]):
            seq += [trough, peak]
        return seq


@dataclass
class LinearSystem:
    v: np.ndarray
    C: np.ndarray
    tags: np.ndarray
    counts: dict
    unconstrained: tuple = field(default_factory=tuple)

    def residual(self, k):
        return self.v - self.C @ np.asarray(k, dtype=np.float64)

    def loss(self, k):
        r = self.residual(k)
        return float(r @ r)

    def term_losses(self, k):
        r = self.residual(k)
        return {tag: float(np.sum(r[self.tags == tag] ** 2)) for tag in TERMS}

    def rows(self):
        for v, c, tag in zip(self.v, self.C, self.tags):
            yield LossRow(float(v), tuple(float(x) for x in c), str(tag), 1.0)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["term_tag", "subswaths", "residual_const"]
                         + [f"c_{a}" for a in SUBSWATHS])
            for v, c, tag in zip(self.v, self.C, self.tags):
                ids = "+".join(SUBSWATHS[i] for i in np.flatnonzero(c))
                out.writerow([tag, ids, repr(float(v))] + [repr(float(x)) for x in c])


def _gate(xd, yd, ymax, params):
    """Ratio test on x-difference over y-difference; True keeps the pair."""
    lo, hi = params.ratio_bounds
    usable = np.abs(yd) >= params.zero_tol * ymax
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = xd / np.where(usable, yd, 1.0)
    return usable & (ratio > lo) & (ratio < hi) & np.isfinite(ratio)


def _single_column_block(tag, col, xd, yd, w):
    C = np.zeros((len(xd), NSWATH))
    C[:, col] = w * yd
    return RowBlock(tag, w * xd, C, w)


def azimuth_rows(raster, field, cal, params=ObjectiveParams()):
    """Pairs of azimuth-line means half a burst period apart."""
    check_shapes(raster, field)
    ymax = float(field.values.max())
    blocks = []
    for a in cal.subswaths:
        col = SUBSWATHS.index(a)
        lm = azimuth_line_means(raster, field, a)
        rho = field.half_period[a]
        i = np.arange(max(0, len(lm.x) - rho))
        ok = lm.valid[i] & lm.valid[i + rho]
        i = i[ok]
        xd = lm.x[i] - lm.x[i + rho]
        yd = lm.y[i] - lm.y[i + rho]
        w = np.where(_gate(xd, yd, ymax, params), 1.0, 0.0)
        blocks.append(_single_column_block("azimuth", col, np.nan_to_num(xd),
                                           np.nan_to_num(yd), w))
    return RowBlock.concat("azimuth", blocks)


def _column_profile(field, subswath_id, first, last):
    cells = field.mask_of(subswath_id)[:, first:last + 1]
    count = cells.sum(axis=0)
    if np.any(count == 0):
        raise ExtremaNotFound(f"{subswath_id}: columns without samples in the common span")
    return np.where(cells, field.values[:, first:last + 1], 0.0).sum(axis=0) / count


def _subswath_extrema(field, cal, subswath_id, epsilon):
    rects = cal.rectangles_of(subswath_id)
    first = max(r.first_range_sample for r in rects)
    last = min(r.last_range_sample for r in rects)
    lo, hi = first + epsilon, last - epsilon
    n_troughs = N_TROUGHS[subswath_id]
    if hi - lo < 2 * n_troughs:
        raise ExtremaNotFound(
            f"{subswath_id}: common range span {first}-{last} too narrow for "
            f"windows of half-width {epsilon}")

    profile = uniform_filter1d(_column_profile(field, subswath_id, first, last),
                               2 * epsilon + 1, mode="nearest")
    # admissible centres keep every window inside the span
    centre = profile[epsilon:epsilon + hi - lo + 1]
    scale = float(np.max(np.abs(centre))) or 1.0
    idx, props = find_peaks(-centre, prominence=1e-6 * scale)
    if len(idx) < n_troughs:
        raise ExtremaNotFound(
            f"{subswath_id}: found {len(idx)} troughs in the range profile, "
            f"need {n_troughs}")
    best = np.argsort(props["prominences"], kind="stable")[::-1][:n_troughs]
    troughs = np.sort(idx[best])

    edges = [0, *troughs, len(centre) - 1]
    peaks = [lo_ + int(np.argmax(centre[lo_:hi_ + 1])) for lo_, hi_ in zip(edges, edges[1:])]
    seq = [peaks[0]]
    for t, p in zip(troughs, peaks[1:]):
        seq += [int(t), p]
    for s0, s1 in zip(seq, seq[1:]):
        if centre[s0] == centre[s1] or s0 == s1:
            raise ExtremaNotFound(f"{subswath_id}: degenerate peak/trough interleaving")
    return (tuple(int(p) + lo for p in peaks), tuple(int(t) + lo for t in troughs))


def locate_extrema(field, cal, epsilon=DEFAULT_EPSILON):
    """Range positions of noise peaks and troughs for every subswath.

    Works on the column-mean noise profile of each subswath, smoothed with a
    moving average of width ``2 * epsilon + 1`` and restricted to centres whose
    windows stay within the range span shared by all the subswath's
    rectangles. The span ends are admissible peak positions.
    """
    peaks, troughs = {}, {}
    for a in cal.subswaths:
        peaks[a], troughs[a] = _subswath_extrema(field, cal, a, epsilon)
    return ExtremaLayout(peaks, troughs, epsilon)


def _window_mean(raster, field, label, rows, c0, c1, params):
    """Means of x and y over valid cells of ``label`` in rows x [c0, c1].

    Returns NaNs when fewer than ``min_valid_fraction`` of the window's cells
    are usable.
    """
    nominal = (rows.stop - rows.start) * (c1 - c0 + 1)
    c0, c1 = max(c0, 0), min(c1, field.shape[1] - 1)
    if c1 < c0 or nominal <= 0:
        return np.nan, np.nan
    cells = (field.labels[rows, c0:c1 + 1] == label) & raster.valid_mask[rows, c0:c1 + 1]
    n = int(cells.sum())
    if n == 0 or n < params.min_valid_fraction * nominal:
        return np.nan, np.nan
    x = raster.values[rows, c0:c1 + 1][cells].sum() / n
    y = field.values[rows, c0:c1 + 1][cells].sum() / n
    return float(x), float(y)


def intra_range_rows(raster, field, cal, layout, params=ObjectiveParams()):
    """Differences between windowed means at adjacent range peaks and troughs."""
    check_shapes(raster, field)
    eps = layout.epsilon
    ymax = float(field.values.max())
    blocks = []
    for a in cal.subswaths:
        col = SUBSWATHS.index(a)
        seq = layout.sequence(a)
        for rect in cal.rectangles_of(a):
            means = [_window_mean(raster, field, col, rect.rows,
                                  max(s - eps, rect.first_range_sample),
                                  min(s + eps, rect.last_range_sample), params)
                     for s in seq]
            xs = np.array([m[0] for m in means])
            ys = np.array([m[1] for m in means])
            xd, yd = xs[:-1] - xs[1:], ys[:-1] - ys[1:]
            w = np.where(_gate(xd, yd, ymax, params), params.mu, 0.0)
            blocks.append(_single_column_block("intra_range", col, np.nan_to_num(xd),
                                               np.nan_to_num(yd), w))
    return RowBlock.concat("intra_range", blocks)


def inter_swath_rows(raster, field, cal, epsilon=DEFAULT_EPSILON, params=ObjectiveParams()):
    """Differences across each rectangle's right edge into the next subswath."""
    check_shapes(raster, field)
    v, C, w = [], [], []
    for a in cal.subswaths:
        if a not in INTER_SWATHS:
            continue
        col = SUBSWATHS.index(a)
        for rect in cal.rectangles_of(a):
            last = rect.last_range_sample
            beyond = field.labels[rect.rows, last + 1:last + 1 + epsilon]
            stray = set(np.unique(beyond).tolist()) - {col + 1, NO_SUBSWATH}
            if stray:
                names = ", ".join(SUBSWATHS[s] for s in sorted(stray))
                raise GeometryMismatch(
                    f"{a} rectangle at lines {rect.first_azimuth_line}-"
                    f"{rect.last_azimuth_line}: window past sample {last} reaches {names}")
            x1, y1 = _window_mean(raster, field, col, rect.rows,
                                  max(last - epsilon + 1, rect.first_range_sample), last,
                                  params)
            x2, y2 = _window_mean(raster, field, col + 1, rect.rows,
                                  last + 1, last + epsilon, params)
            row = np.zeros(NSWATH)
            if np.isnan([x1, x2]).any():
                v.append(0.0)
                w.append(0.0)
            else:
                row[col], row[col + 1] = y1, -y2
                v.append(x1 - x2)
                w.append(1.0)
            C.append(row)
    if not v:
        return RowBlock.empty("inter_swath")
    return RowBlock("inter_swath", np.array(v), np.array(C), np.array(w))


def regularizer_rows(lambdas=PUBLISHED_LAMBDA):
    """Rows pulling each k_a towards 1: contribution sum (lambda_a (1 - k_a))^2."""
    lam = np.asarray(lambdas, dtype=np.float64)
    if lam.shape != (NSWATH,):
        raise ValueError(f"expected {NSWATH} regularisation weights, got {lam.shape}")
    if np.any(lam < 0) or not np.all(np.isfinite(lam)):
        raise ValueError("regularisation weights must be finite and non-negative")
    return RowBlock("regularizer", lam.copy(), np.diag(lam), lam.copy())


def assemble(*blocks, strict=False):
    """Stack row blocks in term order, dropping zero-weight data rows.

    The five regularizer rows are always kept (a zero row adds nothing to the
    loss). Columns with no surviving data row are reported in
    ``unconstrained``; with ``strict=True`` they raise DegenerateSystem.
    """
    by_tag = {tag: [] for tag in TERMS}
    for b in blocks:
        by_tag[b.tag].append(b)
    vs, Cs, tags, counts = [], [], [], {}
    for tag in TERMS:
        block = RowBlock.concat(tag, by_tag[tag])
        keep = np.ones(len(block), bool) if tag == "regularizer" else block.kept
        vs.append(block.v[keep])
        Cs.append(block.C[keep])
        tags += [tag] * int(keep.sum())
        counts[tag] = int(keep.sum())
    v = np.concatenate(vs)
    C = np.concatenate(Cs) if Cs else np.zeros((0, NSWATH))
    data = np.array(tags) != "regularizer"
    unconstrained = tuple(SUBSWATHS[j] for j in range(NSWATH)
                          if not np.any(C[data, j] != 0))
    if unconstrained:
        msg = f"no data rows constrain {', '.join(unconstrained)}"
        if strict:
            raise DegenerateSystem(msg)
        log.warning(msg)
    return LinearSystem(v, C, np.array(tags, dtype=object), counts, unconstrained)


def build_system(raster, field, cal, params=ObjectiveParams(), layout=None, strict=False):
    """Extrema, every loss term, and the stacked system for one scene."""
    if layout is None:
        layout = locate_extrema(field, cal, params.epsilon)
    return assemble(
        azimuth_rows(raster, field, cal, params),
        intra_range_rows(raster, field, cal, layout, params),
        inter_swath_rows(raster, field, cal, params.epsilon, params),
        regularizer_rows(params.lambdas),
        strict=strict,
    )
