"""RBF anchor kernel mapping.

Raw feature vectors are expanded into similarities against a fixed set of
anchor points drawn from the first data chunk.  The anchor set and kernel
width are frozen after the first round; every later chunk and every query
is mapped with the same anchors.
"""
import numpy as np


class InsufficientDataError(ValueError):
    """First chunk holds fewer rows than the requested anchor count."""


class DegenerateKernelError(ValueError):
    """All samples coincide with all anchors; kernel width would be zero."""


class AnchorSet:
    """Fixed anchor points plus the kernel width used by the RBF map.

    Immutable once built; safe to share across threads.
    """

    def __init__(self, anchors, kernel_width):
        anchors = np.asarray(anchors, dtype=np.float64)
        if anchors.ndim != 2 or anchors.shape[0] < 1:
            raise ValueError("anchors must be a nonempty 2-D array")
        if not kernel_width > 0:
            raise ValueError("kernel_width must be positive")
        self.anchors = anchors
        self.anchors.setflags(write=False)
        self.kernel_width = float(kernel_width)

    @property
    def m(self):
        return self.anchors.shape[0]

    @property
    def d(self):
        return self.anchors.shape[1]


def select_anchors(first_chunk, m, seed):
    """Sample m distinct rows of the first chunk, uniformly without replacement.

    Returns the (m, d) anchor matrix; pair it with compute_kernel_width to
    build an AnchorSet.
    """
    x = np.asarray(first_chunk, dtype=np.float64)
    n = x.shape[0]
    if n < m:
        raise InsufficientDataError(
            f"first chunk has {n} rows, cannot draw {m} anchors")
    rng = np.random.default_rng(seed)
    idx = rng.choice(n, size=m, replace=False)
    return x[idx].copy()


def _pairwise_dists(x, anchors):
    # (n, m) Euclidean distances; squared form clipped at 0 for stability
    sq = (
        np.sum(x * x, axis=1)[:, None]
        - 2.0 * x @ anchors.T
        + np.sum(anchors * anchors, axis=1)[None, :]
    )
    return np.sqrt(np.maximum(sq, 0.0))


def compute_kernel_width(x, anchors):
    """Mean Euclidean distance over all (sample, anchor) pairs."""
    x = np.asarray(x, dtype=np.float64)
    anchors = np.asarray(anchors, dtype=np.float64)
    if x.shape[0] < 1:
        raise ValueError("need at least one sample")
    if x.shape[1] != anchors.shape[1]:
        raise ValueError(
            f"dimension mismatch: samples are {x.shape[1]}-D, "
            f"anchors are {anchors.shape[1]}-D")
    sigma = float(np.mean(_pairwise_dists(x, anchors)))
    if sigma == 0.0:
        raise DegenerateKernelError("all samples equal all anchors")
    return sigma


def rbf_map(x, anchor_set):
    """Map raw features to anchor similarities exp(-dist^2 / (2 sigma^2)).

    Output shape (n, m); every entry in (0, 1], with 1 exactly where a
    sample coincides with an anchor.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != anchor_set.d:
        raise ValueError(
            f"expected (n, {anchor_set.d}) features, got {x.shape}")
    d = _pairwise_dists(x, anchor_set.anchors)
    return np.exp(-(d * d) / (2.0 * anchor_set.kernel_width ** 2))


def build_anchor_set(first_chunk, m, seed):
    """Anchor selection + width estimation from the first chunk."""
    anchors = select_anchors(first_chunk, m, seed)
    sigma = compute_kernel_width(np.asarray(first_chunk, float), anchors)
    return AnchorSet(anchors, sigma)
