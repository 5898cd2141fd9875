"""Maps between the simplex and the positive orthant of the sphere.

All functions accept a single composition (1-d) or a stack of them (2-d,
one composition per row).
"""
import numpy as np

DEFAULT_ALPHA = 0.5


class CompositionError(ValueError):
    pass


def _check_alpha(alpha):
    if not alpha > 0:
        raise CompositionError(f"alpha must be positive, got {alpha!r}")


def normalize(raw):
    """Close a non-negative vector (or rows) to unit sum."""
    raw = np.asarray(raw, dtype=float)
    if np.any(raw < 0):
        raise CompositionError("negative entry in composition")
    total = raw.sum(axis=-1, keepdims=True)
    if np.any(total <= 0):
        raise CompositionError("cannot normalize an all-zero composition")
    return raw / total


def power_transform(x, alpha=DEFAULT_ALPHA):
    r"""Map compositions to :math:`S^d_+` via :math:`x^\alpha / \|x^\alpha\|`.

    Zero parts stay zero, so boundary compositions are handled without
    any replacement step.
    """
    _check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise CompositionError("negative entry in composition")
    xa = np.power(x, alpha)
    return xa / np.linalg.norm(xa, axis=-1, keepdims=True)


def inverse_power_transform(q, alpha=DEFAULT_ALPHA):
    """Map points of the positive orthant back to the simplex."""
    _check_alpha(alpha)
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise CompositionError(
            "negative sphere coordinate; truncate to the orthant first")
    x = np.power(q, 1.0 / alpha)
    return x / x.sum(axis=-1, keepdims=True)


def orthant_truncate(q):
    """Set negative coordinates to zero and renormalize to unit length."""
    q = np.clip(np.asarray(q, dtype=float), 0.0, None)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(norm == 0):
        raise CompositionError("point has no positive coordinate to keep")
    return q / norm


def project_to_orthant(q):
    """Nearest point of :math:`S^d_+` to each unit vector.

    Same as :func:`orthant_truncate` when a coordinate is positive; a
    point with no positive coordinate goes to the vertex of its largest
    coordinate.
    """
    q = np.asarray(q, dtype=float)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    out = np.clip(q, 0.0, None)
    dead = ~np.any(out > 0, axis=1)
    if np.any(dead):
        out[dead] = 0.0
        out[dead, np.argmax(q[dead], axis=1)] = 1.0
    out = out / np.linalg.norm(out, axis=1, keepdims=True)
    return out[0] if single else out
