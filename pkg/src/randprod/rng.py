"""Counter-based random streams keyed by (seed, purpose tag, index n, path).

Draw ``j`` of key ``(seed, tag, n, path)`` is a pure function of those five
values (Philox4x32-10 with the seed as key and ``(j, n, path, tag)`` as the
counter), so any schedule over keys reproduces the same numbers.
"""
import zlib

import numpy as np

from . import kernels

_UINT32 = 1 << 32


def tag_id(tag):
    """32-bit id of a purpose tag (ints pass through, strings are hashed)."""
    if isinstance(tag, (int, np.integer)):
        return int(tag) % _UINT32
    return zlib.crc32(str(tag).encode("utf-8"))


def _blocks(size):
    return (size + 1) // 2


def uniforms_to_normals(u):
    """Box-Muller on consecutive uniform pairs along the last axis."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] % 2:
        raise ValueError("need an even number of uniforms")
    u1 = u[..., 0::2]
    u2 = u[..., 1::2]
    rad = np.sqrt(-2.0 * np.log(u1))
    ang = 2.0 * np.pi * u2
    out = np.empty(u.shape)
    out[..., 0::2] = rad * np.cos(ang)
    out[..., 1::2] = rad * np.sin(ang)
    return out


def normal_uniform_count(size):
    """Uniforms consumed by ``size`` normals."""
    return 2 * _blocks(size)


class KeyedStreams:
    """Stateless family of streams for one (seed, tag).

    ``uniform(n, path, size)`` broadcasts ``n`` and ``path`` and returns an
    array of shape ``broadcast(n, path).shape + (size,)``. ``offset`` skips
    whole uniforms and must be even.
    """

    def __init__(self, seed, tag):
        if not 0 <= int(seed) < 1 << 64:
            raise ValueError("seed must fit in 64 bits")
        self.seed = int(seed)
        self.tag = tag
        self._tag = tag_id(tag)

    def __repr__(self):
        return f"KeyedStreams(seed={self.seed}, tag={self.tag!r})"

    def uniform(self, n, path, size, offset=0):
        if offset % 2:
            raise ValueError("offset must be even")
        n, path = np.broadcast_arrays(np.asarray(n, dtype=np.int64), np.asarray(path, dtype=np.int64))
        shape = n.shape
        nblocks = _blocks(size)
        u = kernels.philox_uniforms(
            self.seed, self._tag, n.ravel(), path.ravel(), offset // 2, nblocks
        )
        return u[:, :size].reshape(shape + (size,))

    def normal(self, n, path, size, offset=0):
        u = self.uniform(n, path, normal_uniform_count(size), offset)
        return uniforms_to_normals(u)[..., :size]

    def stream(self, n=0, path=0):
        return Stream(self.seed, self.tag, n, path)


class Stream:
    """Exclusive, stateful handle on one key; successive calls continue the stream."""

    def __init__(self, seed, tag, n=0, path=0):
        self._family = KeyedStreams(seed, tag)
        self.n = int(n)
        self.path = int(path)
        self.position = 0

    def __repr__(self):
        return (
            f"Stream(seed={self._family.seed}, tag={self._family.tag!r}, "
            f"n={self.n}, path={self.path}, position={self.position})"
        )

    def uniform(self, size):
        u = self._family.uniform(self.n, self.path, size, offset=self.position)
        self.position += normal_uniform_count(size)
        return u

    def normal(self, size):
        return uniforms_to_normals(self.uniform(normal_uniform_count(size)))[:size]
