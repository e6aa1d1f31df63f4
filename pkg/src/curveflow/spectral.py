"""Periodic differentiation and quadrature on uniform tangent-angle grids.

All operators act on samples of a function on the m-fold circle [0, 2*pi*m)
taken at n uniform nodes. Discrete Fourier index k corresponds to the
angular frequency k/m.
"""

import numpy as np

SPECTRAL = "spectral"
FD4 = "fd4"
METHODS = (SPECTRAL, FD4)


def wavenumbers(m, n):
    """Angular frequencies k/m of the real-FFT modes k = 0..n/2."""
    return np.arange(n // 2 + 1) / m


def spectral_multiplier(m, n, order):
    """Fourier multiplier (i k/m)**order, with the Nyquist mode zeroed for odd orders."""
    mult = (1j * wavenumbers(m, n)) ** order
    if order % 2 == 1 and n % 2 == 0:
        mult[-1] = 0.0
    return mult


def derivative(values, m, order=1, method=SPECTRAL):
    """Derivative of periodic samples with respect to the tangent angle."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    if order == 0:
        return values.copy()
    if method == SPECTRAL:
        coeffs = np.fft.rfft(values, axis=-1)
        return np.fft.irfft(coeffs * spectral_multiplier(m, n, order), n=n, axis=-1)
    if method == FD4:
        h = 2.0 * np.pi * m / n
        out = values
        # higher orders by repeated application of the first/second stencils
        while order >= 2:
            out = _fd4_second(out, h)
            order -= 2
        if order == 1:
            out = _fd4_first(out, h)
        return out
    raise ValueError(f"unknown derivative method {method!r}; expected one of {METHODS}")


def _fd4_first(f, h):
    return (-np.roll(f, -2, axis=-1) + 8 * np.roll(f, -1, axis=-1)
            - 8 * np.roll(f, 1, axis=-1) + np.roll(f, 2, axis=-1)) / (12 * h)


def _fd4_second(f, h):
    return (-np.roll(f, -2, axis=-1) + 16 * np.roll(f, -1, axis=-1) - 30 * f
            + 16 * np.roll(f, 1, axis=-1) - np.roll(f, 2, axis=-1)) / (12 * h * h)


def integrate(values, m):
    """Rectangle-rule integral over the full m-fold circle (spectrally accurate)."""
    values = np.asarray(values)
    n = values.shape[-1]
    return values.sum(axis=-1) * (2.0 * np.pi * m / n)


def antiderivative(values, m):
    """Partial integrals F(theta_j) = int_0^theta_j g for complex or real periodic g.

    The mean of g contributes a linear ramp; every other mode is integrated
    exactly in Fourier space. F(theta_0) = 0.
    """
    values = np.asarray(values)
    n = values.shape[-1]
    theta = 2.0 * np.pi * m * np.arange(n) / n
    coeffs = np.fft.fft(values)
    freq = np.fft.fftfreq(n, d=1.0 / n) / m
    mean = coeffs[0] / n
    integ = np.zeros_like(coeffs, dtype=complex)
    nz = freq != 0
    integ[nz] = coeffs[nz] / (1j * freq[nz])
    # Nyquist mode has no unambiguous antiderivative on the grid
    integ[n // 2] = 0.0
    periodic = np.fft.ifft(integ)
    out = periodic - periodic[0] + mean * theta
    if not np.iscomplexobj(values):
        out = out.real
    return out
