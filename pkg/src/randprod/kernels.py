"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy twin.
``set_backend`` switches explicitly (tests and the benchmark use it).
"""
import logging

from . import _pykernels

log = logging.getLogger(__name__)

try:
    from . import _ckernels
except ImportError:  # pragma: no cover - depends on the build
    _ckernels = None
    log.debug("compiled kernels unavailable, using numpy fallback")

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

_active = _BACKENDS.get("compiled", _pykernels)


def available_backends():
    return sorted(_BACKENDS)


def backend_name():
    return "compiled" if _active is _ckernels and _ckernels is not None else "python"


def set_backend(name):
    """Select ``"compiled"`` or ``"python"``; returns the previous name."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    previous = backend_name()
    _active = _BACKENDS[name]
    return previous


def philox4x32(counter, key):
    return _active.philox4x32(counter, key)


def philox_uniforms(seed, tag, n, path, block0, nblocks):
    return _active.philox_uniforms(seed, tag, n, path, block0, nblocks)


def gammainc(a, x):
    return _active.gammainc(a, x)


def chain_products(start, start_exp, xs, record):
    return _active.chain_products(start, start_exp, xs, record)
