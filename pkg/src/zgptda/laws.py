"""Empirical series builders and fits for the seven token-level laws.

Each builder turns a :class:`~zgptda.corpus.TokenStream` into the (x, y)
series the corresponding law predicts to be a power law (or, for first
digits, a gamma-like quasi-scaling curve). Builders raise
:class:`~zgptda.fitkit.NotFittable` only when no series can be assembled at
all; degenerate short series are returned as-is and rejected by the
regression, so callers can always report *why* a law was unavailable.
"""

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import TokenStream, first_digits
from .fitkit import EmpiricalSeries, LawFit, NotFittable, fit_benford, fit_loglog

__all__ = [
    "LAW_NAMES",
    "LawReport",
    "zipf_series",
    "heaps_series",
    "taylor_series",
    "hilberg_series",
    "ebeling_series",
    "menzerath_series",
    "benford_series",
    "evaluate_all",
]

# fixed evaluation order; "mandelbrot" (the multifractal route) lives in mfdfa
LAW_NAMES = ("zipf", "heaps", "taylor", "hilberg", "ebeling", "menzerath", "benford")

HEAPS_TARGET_POINTS = 200
TAYLOR_SEGMENT_LEN = 100
HILBERG_MAX_BLOCK = 6


@dataclass
class LawReport:
    """Outcome of building and fitting one law on one token stream."""

    law: str
    series: EmpiricalSeries | None
    fit: LawFit | None
    fittable: bool
    detail: str = ""


def zipf_series(ts: TokenStream) -> EmpiricalSeries:
    """Rank-frequency series: x = 1..V by descending frequency, y = f(r).

    Ties are broken by first occurrence, which `Counter` preserves.
    """
    if not ts.words:
        raise NotFittable("zipf: no word tokens")
    counts = Counter(ts.words)
    freqs = sorted(counts.values(), reverse=True)
    ranks = np.arange(1, len(freqs) + 1, dtype=float)
    return EmpiricalSeries(ranks, np.array(freqs, dtype=float), law="zipf")


def heaps_series(ts: TokenStream) -> EmpiricalSeries:
    """Vocabulary growth: x = tokens seen, y = distinct types.

    Checkpointed every ceil(N/200) tokens (minimum stride 1) to keep the fit
    cheap on large corpora; the final token is always a checkpoint.
    """
    n = len(ts.words)
    if n == 0:
        raise NotFittable("heaps: no word tokens")
    stride = max(1, math.ceil(n / HEAPS_TARGET_POINTS))
    seen: set[str] = set()
    xs: list[int] = []
    ys: list[int] = []
    for i, w in enumerate(ts.words, start=1):
        seen.add(w)
        if i % stride == 0 or i == n:
            if xs and xs[-1] == i:
                continue
            xs.append(i)
            ys.append(len(seen))
    return EmpiricalSeries(np.array(xs, dtype=float), np.array(ys, dtype=float), law="heaps")


def taylor_series(ts: TokenStream, segment_len: int = TAYLOR_SEGMENT_LEN) -> EmpiricalSeries:
    """Count-variance scaling: x = mean per-segment count, y = its std.

    The stream is cut into consecutive non-overlapping segments of
    `segment_len` words (remainder dropped). For every word type present in
    at least 2 segments, the mean and population standard deviation of its
    per-segment counts (zeros included) form one point; points sharing a mean
    are aggregated by averaging their stds so x stays strictly increasing.
    """
    if segment_len < 1:
        raise ValueError("segment_len must be >= 1")
    n_segments = len(ts.words) // segment_len
    if n_segments < 3:
        raise NotFittable(f"taylor: {n_segments} full segments, need 3")
    per_segment = [
        Counter(ts.words[i * segment_len : (i + 1) * segment_len]) for i in range(n_segments)
    ]
    presence: Counter = Counter()
    for seg in per_segment:
        presence.update(seg.keys())
    by_mean: dict[float, list[float]] = {}
    for word, n_present in presence.items():
        if n_present < 2:
            continue
        counts = np.array([seg.get(word, 0) for seg in per_segment], dtype=float)
        rho = float(counts.mean())
        sigma = float(counts.std())
        by_mean.setdefault(rho, []).append(sigma)
    if not by_mean:
        raise NotFittable("taylor: no word type occurs in 2 or more segments")
    xs = np.array(sorted(by_mean), dtype=float)
    ys = np.array([np.mean(by_mean[x]) for x in xs], dtype=float)
    return EmpiricalSeries(xs, ys, law="taylor")


def hilberg_series(ts: TokenStream, max_block: int = HILBERG_MAX_BLOCK) -> EmpiricalSeries:
    """Block entropy growth: x = block size, y = entropy of word blocks.

    y is the plug-in Shannon entropy (natural log) of the empirical
    distribution of overlapping word blocks of each size up to `max_block`.
    """
    if max_block < 1:
        raise ValueError("max_block must be >= 1")
    n = len(ts.words)
    if n == 0:
        raise NotFittable("hilberg: no word tokens")
    xs: list[int] = []
    ys: list[float] = []
    for mu in range(1, max_block + 1):
        if n - mu + 1 < 1:
            break
        grams = Counter(tuple(ts.words[i : i + mu]) for i in range(n - mu + 1))
        total = n - mu + 1
        probs = np.array(list(grams.values()), dtype=float) / total
        xs.append(mu)
        ys.append(float(-np.sum(probs * np.log(probs))))
    return EmpiricalSeries(np.array(xs, dtype=float), np.array(ys, dtype=float), law="hilberg")


def ebeling_series(ts: TokenStream, min_windows: int = 8) -> EmpiricalSeries:
    """Character-variance scaling: x = window length, y = summed count variance.

    Window lengths are powers of two up to len(chars) // min_windows. For each
    length u the character sequence is cut into floor(C/u) non-overlapping
    windows; y(u) sums, over the alphabet of the text, the population variance
    across windows of each character's count.
    """
    chars = ts.chars
    c = len(chars)
    if c // min_windows < 2:
        raise NotFittable(f"ebeling: {c} characters is too short")
    alphabet = sorted(set(chars))
    index = {ch: i for i, ch in enumerate(alphabet)}
    codes = np.fromiter((index[ch] for ch in chars), dtype=np.int64, count=c)
    k = len(alphabet)
    xs: list[int] = []
    ys: list[float] = []
    u = 2
    while u <= c // min_windows:
        n_win = c // u
        trimmed = codes[: n_win * u]
        win_ids = np.repeat(np.arange(n_win, dtype=np.int64), u)
        table = np.bincount(win_ids * k + trimmed, minlength=n_win * k).reshape(n_win, k)
        xs.append(u)
        ys.append(float(table.var(axis=0).sum()))
        u *= 2
    return EmpiricalSeries(np.array(xs, dtype=float), np.array(ys, dtype=float), law="ebeling")


def menzerath_series(ts: TokenStream) -> EmpiricalSeries:
    """Sentence/word length coupling: x = sentence length in words,
    y = mean word length in letters over all words in sentences of that length.
    """
    if not ts.sentences:
        raise NotFittable("menzerath: no sentences")
    lengths: dict[int, list[int]] = {}
    offset = 0
    for n_words in ts.sentences:
        sentence_words = ts.words[offset : offset + n_words]
        offset += n_words
        lengths.setdefault(n_words, []).extend(len(w) for w in sentence_words)
    xs = np.array(sorted(lengths), dtype=float)
    ys = np.array([np.mean(lengths[int(x)]) for x in xs], dtype=float)
    return EmpiricalSeries(xs, ys, law="menzerath")


def benford_series(ts: TokenStream) -> EmpiricalSeries:
    """First-digit frequencies of sentence word-lengths: x = digits 1..9,
    y = relative frequency (absent digits are 0)."""
    digits = np.arange(1, 10, dtype=float)
    lengths = [n for n in ts.sentences if n >= 1]
    if not lengths:
        freqs = np.zeros(9)
    else:
        counts = np.bincount(first_digits(lengths), minlength=10)[1:10]
        freqs = counts / counts.sum()
    return EmpiricalSeries(digits, freqs, law="benford")


def _fit(series: EmpiricalSeries) -> LawFit:
    if series.law == "benford":
        return fit_benford(series.y)
    return fit_loglog(series)


def evaluate_all(
    ts: TokenStream,
    *,
    segment_len: int = TAYLOR_SEGMENT_LEN,
    max_block: int = HILBERG_MAX_BLOCK,
) -> list[LawReport]:
    """Build and fit all seven token-level laws.

    Unfittable laws are flagged in their report, never fatal, so short texts
    degrade gracefully. Report order matches :data:`LAW_NAMES`.
    """
    builders = {
        "zipf": lambda: zipf_series(ts),
        "heaps": lambda: heaps_series(ts),
        "taylor": lambda: taylor_series(ts, segment_len),
        "hilberg": lambda: hilberg_series(ts, max_block),
        "ebeling": lambda: ebeling_series(ts),
        "menzerath": lambda: menzerath_series(ts),
        "benford": lambda: benford_series(ts),
    }
    reports: list[LawReport] = []
    for law in LAW_NAMES:
        try:
            series = builders[law]()
        except NotFittable as exc:
            reports.append(LawReport(law=law, series=None, fit=None, fittable=False, detail=str(exc)))
            continue
        try:
            fit = _fit(series)
        except NotFittable as exc:
            reports.append(
                LawReport(law=law, series=series, fit=None, fittable=False, detail=str(exc))
            )
            continue
        reports.append(LawReport(law=law, series=series, fit=fit, fittable=True))
    return reports
