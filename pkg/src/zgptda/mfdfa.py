"""Multifractal detrended fluctuation analysis of text-derived scalar series.

The pipeline mirrors the standard MFDFA recipe on a series V(k) obtained by
embedding text units (sentences, falling back to words for short texts) and
reducing each vector to the mean of its components:

1. profile: cumulative sum of mean-removed values
2. fluctuation: split the profile into non-overlapping windows of size s from
   both ends (2 * floor(n/s) windows), detrend each with an order-m
   polynomial, and aggregate the residual variances into F_q(s)
3. spectrum: h(q) as the log-log slope of F_q(s), mass exponents
   tau(q) = q*h(q) - 1, and the Holder spectrum (alpha, f(alpha)) via finite
   differences of h

Embedding is abstracted behind providers: a deterministic hashed byte-trigram
fallback (hermetic, no model download) and a reader for precomputed vector
files (JSONL of {"id", "unit_index", "vector"}).
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .corpus import Document, split_sentences, word_tokens
from .fitkit import EmpiricalSeries, LawFit, NotFittable, fit_loglog

__all__ = [
    "MIN_SERIES_LEN",
    "DEFAULT_Q_GRID",
    "ProviderError",
    "EmbeddingProvider",
    "HashedTrigramEmbedder",
    "FileVectorEmbedder",
    "ScalarSeries",
    "FluctuationMatrix",
    "MultifractalSpectrum",
    "build_series",
    "profile",
    "default_scales",
    "fluctuation",
    "spectrum",
    "mandelbrot_conformity",
    "run_mfdfa",
]

MIN_SERIES_LEN = 64
MIN_SCALE = 16
N_SCALES = 12
DEFAULT_Q_GRID = np.arange(-10.0, 10.5, 0.5)

# residual-variance floor keeps q < 0 and q = 0 aggregations finite when a
# window is perfectly detrended
_F2_FLOOR = 1e-30


class ProviderError(Exception):
    """An embedding provider failed or cannot serve the requested unit."""


class EmbeddingProvider:
    """Deterministic mapping from text units to fixed-dimension vectors."""

    provider_id: str = "abstract"
    dimension: int = 0
    concurrency_safe: bool = False

    def embed(self, text_unit: str) -> np.ndarray:
        raise NotImplementedError

    def unit_vectors(self, doc: Document, units: list[str]) -> np.ndarray:
        """Embed every unit of `doc`, reporting the failing unit index."""
        vectors = np.empty((len(units), self.dimension))
        for k, unit in enumerate(units):
            try:
                vectors[k] = self.embed(unit)
            except ProviderError:
                raise
            except Exception as exc:
                raise ProviderError(f"{self.provider_id}: embedding failed for unit {k}") from exc
        return vectors


class HashedTrigramEmbedder(EmbeddingProvider):
    """Hermetic fallback provider: hashed byte-trigram frequency vectors.

    Each UTF-8 byte trigram of the unit is hashed (blake2b) into one of 64
    buckets; the bucket counts are L2-normalized. Fully deterministic across
    runs and platforms.
    """

    provider_id = "fallback-trigram-64"
    dimension = 64
    concurrency_safe = True

    def __init__(self):
        self._bucket_cache: dict[bytes, int] = {}

    def _bucket(self, gram: bytes) -> int:
        b = self._bucket_cache.get(gram)
        if b is None:
            digest = hashlib.blake2b(gram, digest_size=8).digest()
            b = int.from_bytes(digest, "big") % self.dimension
            self._bucket_cache[gram] = b
        return b

    def embed(self, text_unit: str) -> np.ndarray:
        data = text_unit.encode("utf-8")
        vec = np.zeros(self.dimension)
        if len(data) >= 3:
            grams = (data[i : i + 3] for i in range(len(data) - 2))
        elif data:
            grams = (data,)
        else:
            return vec
        for gram in grams:
            vec[self._bucket(gram)] += 1.0
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec


class FileVectorEmbedder(EmbeddingProvider):
    """Precomputed vectors read from a JSONL file.

    Each record is ``{"id": str, "unit_index": int, "vector": [float, ...]}``;
    all vectors must share one dimension and the records for a document must
    cover unit indices 0..n-1.
    """

    concurrency_safe = True

    def __init__(self, path):
        self.provider_id = f"file:{path}"
        self._vectors: dict[tuple[str, int], np.ndarray] = {}
        self.dimension = 0
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    key = (obj["id"], int(obj["unit_index"]))
                    vec = np.asarray(obj["vector"], dtype=float)
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise ProviderError(f"{path}: line {lineno}: bad embedding record") from exc
                if vec.ndim != 1 or vec.size == 0:
                    raise ProviderError(f"{path}: line {lineno}: vector must be non-empty 1-D")
                if self.dimension == 0:
                    self.dimension = vec.size
                elif vec.size != self.dimension:
                    raise ProviderError(
                        f"{path}: line {lineno}: vector dimension {vec.size} != {self.dimension}"
                    )
                self._vectors[key] = vec

    def embed(self, text_unit: str) -> np.ndarray:
        raise ProviderError(f"{self.provider_id}: vectors are resolved per document unit index")

    def unit_vectors(self, doc: Document, units: list[str]) -> np.ndarray:
        vectors = np.empty((len(units), self.dimension))
        for k in range(len(units)):
            vec = self._vectors.get((doc.id, k))
            if vec is None:
                raise ProviderError(f"{self.provider_id}: no vector for {doc.id!r} unit {k}")
            vectors[k] = vec
        return vectors


@dataclass
class ScalarSeries:
    """The scalar series V(k) fed into the fluctuation analysis."""

    values: np.ndarray
    source: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    def __len__(self):
        return self.values.size


@dataclass
class FluctuationMatrix:
    """F_q(s) over a (q, scale) grid, plus the floor flag for degenerate
    windows (zero residual variance)."""

    values: np.ndarray  # shape (len(q_grid), len(scales))
    q_grid: np.ndarray
    scales: np.ndarray
    floored: bool = False


@dataclass
class MultifractalSpectrum:
    q_grid: np.ndarray
    h: np.ndarray
    tau: np.ndarray
    alpha: np.ndarray
    f_alpha: np.ndarray
    delta_alpha: float
    scales: np.ndarray
    fluctuation: np.ndarray = field(repr=False)


def build_series(doc: Document, provider: EmbeddingProvider) -> ScalarSeries:
    """Embed a document's units and reduce each vector to its component mean.

    Units are sentences; documents with fewer than 64 sentences fall back to
    word tokens so short texts still produce a usable series.

    Raises:
        NotFittable: fewer than 64 units even after the word fallback.
        ProviderError: the provider failed on a unit.
    """
    units = split_sentences(doc.text)
    unit_kind = "sentence"
    if len(units) < MIN_SERIES_LEN:
        units = word_tokens(doc.text)
        unit_kind = "word"
    if len(units) < MIN_SERIES_LEN:
        raise NotFittable(
            f"mandelbrot: {len(units)} {unit_kind} units, need {MIN_SERIES_LEN}"
        )
    vectors = provider.unit_vectors(doc, units)
    values = vectors.mean(axis=1)
    return ScalarSeries(values=values, source=f"{provider.provider_id}/mean/{unit_kind}")


def profile(series: ScalarSeries) -> np.ndarray:
    """Cumulative sum of mean-removed values; the last element is ~0."""
    v = series.values
    if v.size < 2:
        raise ValueError("profile requires at least 2 values")
    return np.cumsum(v - v.mean())


def default_scales(n: int) -> np.ndarray:
    """12 log-spaced integer window sizes in [16, n // 4]."""
    if n < MIN_SERIES_LEN:
        raise NotFittable(f"mandelbrot: series length {n} < {MIN_SERIES_LEN}")
    return np.unique(np.round(np.geomspace(MIN_SCALE, n // 4, N_SCALES)).astype(int))


def fluctuation(prof, scales, q_grid, m: int = 1) -> FluctuationMatrix:
    """Compute F_q(s) over the scale and q grids.

    For each scale s the profile is split into floor(n/s) windows from the
    start and the same number from the end. Each window is detrended by an
    order-m polynomial; the mean squared residual is the window's detrended
    variance F2. Aggregation over windows follows the generalized mean of
    order q/2, with the q = 0 case as exp(mean(0.5 * ln F2)).
    """
    prof = np.asarray(prof, dtype=float)
    scales = np.asarray(scales, dtype=int)
    q_grid = np.asarray(q_grid, dtype=float)
    n = prof.size
    if scales.size == 0 or q_grid.size == 0:
        raise ValueError("scales and q_grid must be non-empty")
    if np.any(scales < MIN_SCALE) or np.any(scales > n // 4):
        raise ValueError(f"scales must satisfy {MIN_SCALE} <= s <= n//4 = {n // 4}")
    if m < 1:
        raise ValueError("detrend order must be >= 1")

    values = np.empty((q_grid.size, scales.size))
    floored = False
    for j, s in enumerate(scales):
        n_win = n // s
        windows = np.vstack([prof[: n_win * s].reshape(n_win, s),
                             prof[n - n_win * s:].reshape(n_win, s)])
        design = np.vander(np.arange(s, dtype=float), m + 1)
        coef, *_ = np.linalg.lstsq(design, windows.T, rcond=None)
        resid = windows.T - design @ coef
        f2 = np.mean(resid ** 2, axis=0)
        if np.any(f2 < _F2_FLOOR):
            floored = True
            f2 = np.maximum(f2, _F2_FLOOR)
        log_f2 = np.log(f2)
        for i, q in enumerate(q_grid):
            if q == 0.0:
                values[i, j] = np.exp(0.5 * log_f2.mean())
            else:
                values[i, j] = np.mean(f2 ** (q / 2.0)) ** (1.0 / q)
    return FluctuationMatrix(values=values, q_grid=q_grid, scales=scales, floored=floored)


def spectrum(fluct: FluctuationMatrix) -> MultifractalSpectrum:
    """Generalized Hurst exponents and the Holder spectrum from F_q(s).

    h(q) is the log-log slope of F_q(s) against s; tau(q) = q*h(q) - 1 (the
    fractal dimension of a 1-D series is 1); alpha = h + q*h' with h' by
    central finite differences (one-sided at the ends);
    f(alpha) = q*(alpha - h) + 1. q values with non-finite slopes are dropped.

    Raises:
        NotFittable: fewer than 3 scales, or fewer than 3 surviving q points.
    """
    if fluct.scales.size < 3:
        raise NotFittable(f"mandelbrot: {fluct.scales.size} scales, need 3")
    log_s = np.log(fluct.scales.astype(float))
    h = np.empty(fluct.q_grid.size)
    for i in range(fluct.q_grid.size):
        with np.errstate(divide="ignore", invalid="ignore"):
            log_f = np.log(fluct.values[i])
        if not np.all(np.isfinite(log_f)):
            h[i] = np.nan
            continue
        h[i] = np.polyfit(log_s, log_f, 1)[0]
    keep = np.isfinite(h)
    if int(keep.sum()) < 3:
        raise NotFittable("mandelbrot: fewer than 3 q points with finite slopes")
    q = fluct.q_grid[keep]
    h = h[keep]
    tau = q * h - 1.0
    dh = np.gradient(h, q)
    alpha = h + q * dh
    f_alpha = q * (alpha - h) + 1.0
    return MultifractalSpectrum(
        q_grid=q,
        h=h,
        tau=tau,
        alpha=alpha,
        f_alpha=f_alpha,
        delta_alpha=float(alpha.max() - alpha.min()),
        scales=fluct.scales,
        fluctuation=fluct.values[keep],
    )


def mandelbrot_conformity(fluct: FluctuationMatrix, q_ref: float = 2.0) -> LawFit:
    """Power-law fit of F_{q_ref}(s) against s; the exponent is h(q_ref).

    This is the conformity row the fuzzy scorer consumes for the
    multifractal law.
    """
    matches = np.where(np.isclose(fluct.q_grid, q_ref))[0]
    if matches.size == 0:
        raise ValueError(f"q_ref={q_ref} is not on the q grid")
    row = fluct.values[matches[0]]
    series = EmpiricalSeries(fluct.scales.astype(float), row, law="mandelbrot")
    return fit_loglog(series)


def run_mfdfa(
    series: ScalarSeries,
    q_grid=None,
    m: int = 1,
    scales=None,
) -> tuple[FluctuationMatrix, MultifractalSpectrum]:
    """Profile -> fluctuation -> spectrum with the default grids."""
    if q_grid is None:
        q_grid = DEFAULT_Q_GRID
    if scales is None:
        scales = default_scales(len(series))
    prof = profile(series)
    fluct = fluctuation(prof, scales, q_grid, m=m)
    return fluct, spectrum(fluct)
