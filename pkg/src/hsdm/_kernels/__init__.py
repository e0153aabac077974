"""Numeric kernel backend selection.

The compiled extension is preferred when it was built; otherwise the numpy
fallback is used.  ``HAVE_NATIVE`` records which one is active, and both
implementations stay importable for the cross-checking tests and the
benchmark script.
"""

from . import _fallback

try:
    from . import _native as _impl

    HAVE_NATIVE = True
except ImportError:  # pragma: no cover - depends on the build environment
    _impl = _fallback
    HAVE_NATIVE = False

cond_kde_sums = _impl.cond_kde_sums
cond_kde_loo = _impl.cond_kde_loo
kde1d_sums = _impl.kde1d_sums
acd_psi = _impl.acd_psi
fiacd_psi = _impl.fiacd_psi
arma_innovations = _impl.arma_innovations

__all__ = [
    "HAVE_NATIVE",
    "cond_kde_sums",
    "cond_kde_loo",
    "kde1d_sums",
    "acd_psi",
    "fiacd_psi",
    "arma_innovations",
]
