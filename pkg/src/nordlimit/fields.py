"""Periodic 3D grid, spectral calculus, and field I/O.

All fields live on the uniform grid of the torus [0, L)^3 with n points per
axis, stored as float64 arrays indexed [ix, iy, iz].  Derivatives, inverse
Helmholtz operators, smoothing, and Sobolev norms are computed with FFTs,
which are exact on the band-limited trigonometric interpolant.  Nonlinear
products are kept alias-free with the standard 2/3-rule mask.

Snapshots use a small binary format: header {magic "NRDF", version u32,
n u32, L f64, t f64, ncomp u32}, followed by ncomp * n**3 little-endian
float64 values in x-fastest order.
"""

import itertools
import struct

import numpy as np

SNAPSHOT_MAGIC = b"NRDF"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIIddI")


class Grid3:
    """Uniform periodic grid with cached spectral machinery.

    Wavenumber arrays follow the rfftn layout (real transforms along the
    last axis).  The 2/3-rule dealias mask and the Sobolev weight tables
    are built lazily and cached.
    """

    def __init__(self, n, length):
        if n < 16 or (n & (n - 1)):
            raise ValueError("grid size must be a power of two >= 16")
        if not (length > 0):
            raise ValueError("grid length must be positive")
        self.n = int(n)
        self.length = float(length)
        self.h = self.length / self.n
        k1 = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)
        kr = 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.h)
        self.kx = k1[:, None, None]
        self.ky = k1[None, :, None]
        self.kz = kr[None, None, :]
        self.k_sq = self.kx**2 + self.ky**2 + self.kz**2
        kmax = np.pi / self.h  # Nyquist
        cut = (2.0 / 3.0) * kmax
        self.dealias_mask = (
            (np.abs(self.kx) < cut) & (np.abs(self.ky) < cut) & (np.abs(self.kz) < cut)
        )
        self._sobolev_weights = {}

    def axes(self):
        x = np.arange(self.n) * self.h
        return x, x, x

    def meshgrid(self):
        x, y, z = self.axes()
        return np.meshgrid(x, y, z, indexing="ij")

    def fft(self, f):
        # leading axes, if any, are independent components
        return np.fft.rfftn(f, axes=(-3, -2, -1))

    def ifft(self, fh):
        return np.fft.irfftn(fh, s=(self.n, self.n, self.n), axes=(-3, -2, -1))

    def derivative(self, f, axis):
        """Spectral partial derivative along axis in {0, 1, 2}."""
        k = (self.kx, self.ky, self.kz)[axis]
        return self.ifft(1j * k * self.fft(f))

    def gradient(self, f):
        """All three partials from a single forward transform."""
        fh = self.fft(f)
        return np.stack(
            [self.ifft(1j * k * fh) for k in (self.kx, self.ky, self.kz)]
        )

    def laplacian(self, f):
        return self.ifft(-self.k_sq * self.fft(f))

    def helmholtz_solve(self, src, kappa):
        """Solve (laplacian - kappa**2) phi = src; kappa > 0 keeps mode 0 regular."""
        if not (kappa > 0):
            raise ValueError("helmholtz_solve needs kappa > 0")
        return self.ifft(-self.fft(src) / (self.k_sq + kappa**2))

    def dealias(self, f):
        """Apply the 2/3-rule spectral mask (idempotent)."""
        return self.ifft(self.fft(f) * self.dealias_mask)

    def mollify(self, f, eps):
        """Gaussian spectral smoothing exp(-eps**2 |k|**2 / 2); identity at eps=0."""
        if eps == 0:
            return np.array(f, copy=True)
        return self.ifft(self.fft(f) * np.exp(-0.5 * eps**2 * self.k_sq))

    def integral(self, f):
        return float(np.sum(f)) * self.h**3

    def l2_norm(self, f):
        """L2 norm over the torus; accepts stacked components (..., n, n, n)."""
        return float(np.sqrt(np.sum(np.square(f)) * self.h**3))

    def _weight(self, order):
        w = self._sobolev_weights.get(order)
        if w is None:
            w = np.zeros_like(self.k_sq)
            for a in itertools.product(range(order + 1), repeat=3):
                if sum(a) <= order:
                    w += self.kx ** (2 * a[0]) * self.ky ** (2 * a[1]) * self.kz ** (2 * a[2])
            self._sobolev_weights[order] = w
        return w

    def sobolev_norm(self, f, order, background=None):
        """Discrete H^order norm of f (minus a constant background state).

        f may be a single field (n,n,n) or stacked components (m,n,n,n);
        background, if given, is a scalar or length-m vector subtracted
        before the norm.  The norm sums |d^alpha g|_{L2}^2 over all
        multi-indices with |alpha| <= order, evaluated via Parseval.
        """
        g = np.asarray(f, dtype=float)
        single = g.ndim == 3
        if single:
            g = g[None]
        if background is not None:
            b = np.broadcast_to(np.atleast_1d(np.asarray(background, float)), (g.shape[0],))
            g = g - b[:, None, None, None]
        w = self._weight(order)
        # rfftn stores only half the z-modes; double all columns except the
        # self-conjugate planes kz = 0 and kz = Nyquist
        mult = np.full(self.kz.shape[-1], 2.0)
        mult[0] = 1.0
        mult[-1] = 1.0
        total = 0.0
        for comp in g:
            ch = np.fft.rfftn(comp)
            total += np.sum((ch.real**2 + ch.imag**2) * w * mult)
        return float(np.sqrt(total * self.length**3 / self.n**6))


def write_snapshot(path, grid, t, fields):
    """Write stacked fields (ncomp, n, n, n) in the binary snapshot format."""
    data = np.ascontiguousarray(np.asarray(fields, dtype="<f8"))
    if data.ndim == 3:
        data = data[None]
    ncomp = data.shape[0]
    if data.shape[1:] != (grid.n, grid.n, grid.n):
        raise ValueError("field shape does not match grid")
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, grid.n, grid.length, float(t), ncomp)
        )
        for comp in data:
            # x-fastest on disk; arrays are indexed [ix, iy, iz]
            fh.write(comp.transpose(2, 1, 0).tobytes())


def read_snapshot(path):
    """Read a snapshot; returns (grid, t, fields with shape (ncomp, n, n, n))."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise ValueError("truncated snapshot header")
        magic, version, n, length, t, ncomp = _HEADER.unpack(head)
        if magic != SNAPSHOT_MAGIC:
            raise ValueError("bad snapshot magic")
        if version != SNAPSHOT_VERSION:
            raise ValueError("unsupported snapshot version %d" % version)
        raw = np.fromfile(fh, dtype="<f8", count=ncomp * n**3)
    if raw.size != ncomp * n**3:
        raise ValueError("truncated snapshot payload")
    fields = raw.reshape(ncomp, n, n, n).transpose(0, 3, 2, 1)
    return Grid3(n, length), t, np.ascontiguousarray(fields)
