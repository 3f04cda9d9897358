"""Per-window statistical features: moments, sub-window derivatives,
pairwise distances, log-covariance, entropies, and FFT magnitudes.

Every operation works on the last axis, so a single channel (n,) and a
stack of channels (..., n) behave the same. ``extract`` composes the
enabled groups into one labeled dataset with a deterministic catalog.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import FeatureDataset
from .errors import ConfigError, SanitizedInputWarning, ShapeError
from .fourier import padded_fft
from .ingest import WindowedSignal

GROUP_ORDER = ("mean", "std", "moments", "minmax", "derivatives", "distances",
               "logcov", "shannon", "logenergy", "fft")

_QUARTER_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
_STAT_KINDS = ("min", "max", "mean")

# Consumed by the log-covariance descriptor: a 12x12 matrix, so 144 pooled
# stats are used and the upper triangle has 78 entries.
LOGCOV_MATRIX_SIZE = 12
LOGCOV_INPUT_LEN = LOGCOV_MATRIX_SIZE * LOGCOV_MATRIX_SIZE
LOGCOV_OUTPUT_LEN = LOGCOV_MATRIX_SIZE * (LOGCOV_MATRIX_SIZE + 1) // 2

# Per-channel stat pool feeding the log-covariance group, in order:
# mean, std, skew, kurt, window min/max, half min/max, quarter min/max/mean,
# then the 18 pairwise quarter distances.
STATS_PER_CHANNEL = 4 + 2 + 4 + 12 + 18


@dataclass(frozen=True)
class FeatureConfig:
    """Which feature groups to compute and their knobs."""

    enabled_groups: frozenset = frozenset(GROUP_ORDER)
    fft_bins_kept: int = 50
    epsilon: float = 1e-8

    def __post_init__(self):
        groups = frozenset(self.enabled_groups)
        unknown = groups - set(GROUP_ORDER)
        if unknown:
            raise ConfigError(f"unknown feature groups: {sorted(unknown)}")
        object.__setattr__(self, "enabled_groups", groups)
        if self.fft_bins_kept < 1:
            raise ConfigError("fft_bins_kept must be >= 1")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")


def window_moments(window):
    """Mean, population std, and the standardized 3rd/4th moments.

    Zero-variance windows report skewness and kurtosis of 0 instead of
    NaN (flatlined channels happen; the dataset forbids NaN).
    """
    x = np.asarray(window, dtype=np.float64)
    if x.shape[-1] == 0:
        raise ShapeError("window must be non-empty")
    mu = x.mean(axis=-1)
    centered = x - mu[..., None]
    m2 = np.mean(centered ** 2, axis=-1)
    m3 = np.mean(centered ** 3, axis=-1)
    m4 = np.mean(centered ** 4, axis=-1)
    sigma = np.sqrt(m2)
    with np.errstate(divide="ignore", invalid="ignore"):
        skew = np.where(sigma > 0, m3 / np.where(sigma > 0, sigma, 1.0) ** 3, 0.0)
        kurt = np.where(sigma > 0, m4 / np.where(sigma > 0, sigma, 1.0) ** 4, 0.0)
    return mu, sigma, skew, kurt


def quarter_derivatives(window):
    """Window/half/quarter order statistics and their pairwise distances.

    Returns an ordered mapping from feature key to per-channel values:
    window min/max, each half's min/max, each quarter's min/max/mean, and
    the 1-D Euclidean distance |a-b| between every pair of quarters for
    each statistic kind (6 pairs x 3 kinds).
    """
    x = np.asarray(window, dtype=np.float64)
    n = x.shape[-1]
    if n == 0 or n % 4 != 0:
        raise ShapeError(f"window length {n} is not divisible by 4")
    halves = x.reshape(x.shape[:-1] + (2, n // 2))
    quarters = x.reshape(x.shape[:-1] + (4, n // 4))
    out: dict[str, np.ndarray] = {
        "win.min": x.min(axis=-1),
        "win.max": x.max(axis=-1),
    }
    hmin, hmax = halves.min(axis=-1), halves.max(axis=-1)
    for h in range(2):
        out[f"half{h}.min"] = hmin[..., h]
        out[f"half{h}.max"] = hmax[..., h]
    qstats = {
        "min": quarters.min(axis=-1),
        "max": quarters.max(axis=-1),
        "mean": quarters.mean(axis=-1),
    }
    for kind in _STAT_KINDS:
        for q in range(4):
            out[f"q{q}.{kind}"] = qstats[kind][..., q]
    for kind in _STAT_KINDS:
        for a, b in _QUARTER_PAIRS:
            out[f"dist.{kind}.{a}{b}"] = np.abs(qstats[kind][..., a] - qstats[kind][..., b])
    return out


def _logm_psd(matrices: np.ndarray, epsilon: float) -> np.ndarray:
    """Matrix log of symmetric PSD matrices + epsilon*I, batched over axis 0."""
    dim = matrices.shape[-1]
    regularized = matrices + epsilon * np.eye(dim)
    eigvals, eigvecs = np.linalg.eigh(regularized)
    eigvals = np.maximum(eigvals, np.finfo(np.float64).tiny)
    logs = np.log(eigvals)
    result = np.einsum("...ik,...k,...jk->...ij", eigvecs, logs, eigvecs)
    return (result + np.swapaxes(result, -1, -2)) / 2.0


def _log_covariance_batch(pool: np.ndarray, epsilon: float) -> np.ndarray:
    m = LOGCOV_MATRIX_SIZE
    mats = pool[:, :LOGCOV_INPUT_LEN].reshape(-1, m, m)
    centered = mats - mats.mean(axis=1, keepdims=True)
    cov = np.einsum("bki,bkj->bij", centered, centered) / m
    logs = _logm_psd(cov, epsilon)
    iu, ju = np.triu_indices(m)
    return logs[:, iu, ju]


def log_covariance(quarter_features, epsilon: float = 1e-8) -> np.ndarray:
    """Upper-triangular matrix log of the covariance of the stat pool.

    The first 144 entries of the ordered pool are reshaped row-major into
    a 12x12 matrix; remaining entries are ignored. Covariance (divisor N)
    is regularized with epsilon*I before the eigendecomposition-based log.
    Non-finite entries are replaced by zero with a warning.
    """
    pool = np.asarray(quarter_features, dtype=np.float64).ravel()
    if pool.size < LOGCOV_INPUT_LEN:
        raise ShapeError(
            f"log-covariance needs >= {LOGCOV_INPUT_LEN} pooled stats, got {pool.size}"
        )
    if not np.all(np.isfinite(pool)):
        warnings.warn("non-finite stat pool entries replaced by 0",
                      SanitizedInputWarning, stacklevel=2)
        pool = np.where(np.isfinite(pool), pool, 0.0)
    return _log_covariance_batch(pool[None, :], epsilon)[0]


def shannon_entropy(window) -> np.ndarray:
    """Entropy of the window after min-max normalization to a distribution.

    Values are scaled to [0,1] and normalized to sum to 1; a constant
    window falls back to the uniform distribution. Natural log, with
    0*log(0) = 0.
    """
    x = np.asarray(window, dtype=np.float64)
    n = x.shape[-1]
    if n == 0:
        raise ShapeError("window must be non-empty")
    lo = x.min(axis=-1, keepdims=True)
    hi = x.max(axis=-1, keepdims=True)
    span = hi - lo
    flat = span <= 0
    safe_span = np.where(flat, 1.0, span)
    norm = (x - lo) / safe_span
    total = norm.sum(axis=-1, keepdims=True)
    probs = np.where(flat, 1.0 / n, norm / np.where(total > 0, total, 1.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(probs > 0, probs * np.log(probs), 0.0)
    return -terms.sum(axis=-1)


def log_energy_entropy(window, epsilon: float = 1e-8) -> np.ndarray:
    """Sum of log(value^2 + eps) over the first half plus the second half."""
    x = np.asarray(window, dtype=np.float64)
    n = x.shape[-1]
    if n == 0 or n % 2 != 0:
        raise ShapeError(f"window length {n} must be even")
    first = np.log(x[..., : n // 2] ** 2 + epsilon).sum(axis=-1)
    second = np.log(x[..., n // 2:] ** 2 + epsilon).sum(axis=-1)
    return first + second


def fft_features(window, bins_kept: int) -> np.ndarray:
    """Magnitudes of the lowest nonnegative-frequency DFT bins.

    The window is zero-padded to the next power of two and transformed
    with the radix-2 FFT; the first ``bins_kept`` magnitudes are returned.
    """
    x = np.asarray(window, dtype=np.float64)
    n = x.shape[-1]
    if n == 0:
        raise ShapeError("window must be non-empty")
    if not 1 <= bins_kept <= n // 2 + 1:
        raise ConfigError(f"bins_kept must be in [1, {n // 2 + 1}], got {bins_kept}")
    return np.abs(padded_fft(x))[..., :bins_kept]


def _channel_pool(values: np.ndarray) -> np.ndarray:
    """Stat pool (n_windows, n_channels * STATS_PER_CHANNEL), channel-major."""
    mu, sigma, skew, kurt = window_moments(values)
    deriv = quarter_derivatives(values)
    stacked = np.stack([mu, sigma, skew, kurt] + list(deriv.values()), axis=-1)
    nw, nch, nstat = stacked.shape
    return stacked.reshape(nw, nch * nstat)


def feature_columns(config: FeatureConfig, n_channels: int) -> list[tuple[str, str, int | None, int]]:
    """Deterministic catalog: (name, group, channel index or None, index).

    Depends only on the config and channel count, never on data.
    """
    deriv_keys = 4 + 12  # half min/max + quarter min/max/mean
    dist_keys = len(_STAT_KINDS) * len(_QUARTER_PAIRS)
    per_channel = {
        "mean": 1, "std": 1, "moments": 2, "minmax": 2,
        "derivatives": deriv_keys, "distances": dist_keys,
        "shannon": 1, "logenergy": 1, "fft": config.fft_bins_kept,
    }
    columns = []
    for group in GROUP_ORDER:
        if group not in config.enabled_groups:
            continue
        if group == "logcov":
            for i in range(LOGCOV_OUTPUT_LEN):
                columns.append((f"logcov.all.{i}", group, None, i))
            continue
        for c in range(n_channels):
            for i in range(per_channel[group]):
                columns.append((f"{group}.ch{c}.{i}", group, c, i))
    return columns


def feature_catalog(config: FeatureConfig, channels: list[str]) -> dict:
    """JSON-ready manifest of the column catalog for a config."""
    cols = feature_columns(config, len(channels))
    return {
        "version": 1,
        "channel_labels": list(channels),
        "fft_bins_kept": config.fft_bins_kept,
        "epsilon": config.epsilon,
        "enabled_groups": sorted(config.enabled_groups),
        "columns": [
            {"name": name, "group": group, "channel": channel, "index": index}
            for name, group, channel, index in cols
        ],
    }


def _extract_block(values: np.ndarray, config: FeatureConfig) -> np.ndarray:
    nw, nch, n = values.shape
    groups = config.enabled_groups
    need_moments = groups & {"mean", "std", "moments", "logcov"}
    need_deriv = groups & {"minmax", "derivatives", "distances", "logcov"}
    blocks: list[np.ndarray] = []

    mu = sigma = skew = kurt = None
    if need_moments:
        mu, sigma, skew, kurt = window_moments(values)
    deriv = quarter_derivatives(values) if need_deriv else None

    for group in GROUP_ORDER:
        if group not in groups:
            continue
        if group == "mean":
            blocks.append(mu)
        elif group == "std":
            blocks.append(sigma)
        elif group == "moments":
            blocks.append(np.stack([skew, kurt], axis=-1).reshape(nw, nch * 2))
        elif group == "minmax":
            blocks.append(np.stack([deriv["win.min"], deriv["win.max"]],
                                   axis=-1).reshape(nw, nch * 2))
        elif group == "derivatives":
            keys = ["half0.min", "half0.max", "half1.min", "half1.max"]
            keys += [f"q{q}.{kind}" for kind in _STAT_KINDS for q in range(4)]
            blocks.append(np.stack([deriv[k] for k in keys], axis=-1).reshape(nw, nch * 16))
        elif group == "distances":
            keys = [f"dist.{kind}.{a}{b}" for kind in _STAT_KINDS for a, b in _QUARTER_PAIRS]
            blocks.append(np.stack([deriv[k] for k in keys], axis=-1).reshape(nw, nch * 18))
        elif group == "logcov":
            pool = _channel_pool(values)
            if pool.shape[1] < LOGCOV_INPUT_LEN:
                raise ConfigError(
                    f"logcov needs >= {LOGCOV_INPUT_LEN} pooled stats "
                    f"({STATS_PER_CHANNEL}/channel, {pool.shape[1]} available); "
                    "disable the group or provide more channels"
                )
            blocks.append(_log_covariance_batch(pool, config.epsilon))
        elif group == "shannon":
            blocks.append(shannon_entropy(values))
        elif group == "logenergy":
            blocks.append(log_energy_entropy(values, config.epsilon))
        elif group == "fft":
            mags = fft_features(values, config.fft_bins_kept)
            blocks.append(mags.reshape(nw, nch * config.fft_bins_kept))
    if not blocks:
        return np.empty((nw, 0))
    return np.concatenate(blocks, axis=1)


def extract(windowed: WindowedSignal, config: FeatureConfig | None = None,
            threads: int = 1) -> FeatureDataset:
    """One feature row per window, columns per the config's catalog.

    The row label is copied from the source signal. Window chunks may be
    processed on several threads; results are assembled in window order
    and are identical for any thread count.
    """
    config = config or FeatureConfig()
    values = windowed.values
    nw, nch, _ = values.shape
    catalog = feature_columns(config, nch)
    if threads <= 1 or nw < 2 * threads:
        matrix = _extract_block(values, config)
    else:
        bounds = np.linspace(0, nw, threads + 1, dtype=int)
        chunks = [values[a:b] for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _extract_block(c, config), chunks))
        matrix = np.vstack(parts) if parts else np.empty((0, len(catalog)))
    label = "" if windowed.source.label is None else str(windowed.source.label)
    return FeatureDataset(
        feature_names=[c[0] for c in catalog],
        rows=matrix,
        labels=np.asarray([label] * nw, dtype=object),
    )
