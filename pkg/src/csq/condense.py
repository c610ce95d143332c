"""Condensing one-bit codes into short integer vectors with an l1 pseudometric.

A code of length ``m = lam * p`` is split into p consecutive blocks of
length ``lam`` and every block is convolved against the integer kernel v,
the coefficient vector of ``(1 + z + ... + z**(lt - 1))**r`` where
``lam = r * lt - r + 1``. Stacking the block results gives p integers per
code; distances between codes are read from the integer l1 difference of
those vectors through one final multiplication by

    norm_factor = sqrt(pi / 2) / (p * ||v||_2).

The kernel annihilates the r-th order quantization noise up to boundary
terms, which is what makes the estimate improve like ``lam**(-r + 1/2)``
as blocks grow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CapacityError,
    IncompatibilityError,
    InputError,
    ParameterError,
    ShapeError,
)

# Kernel dot products are accumulated in int64; keep peak magnitudes below
# 2**62 so sums and packed widths always fit.
_MAX_PEAK = 2**62


@dataclass(frozen=True)
class CondensationSpec:
    """Frozen geometry of a condensation: kernel, block layout and scaling."""

    r: int
    lambda_tilde: int
    lam: int
    p: int
    m: int
    kernel: np.ndarray
    norm_factor: float
    bit_width: int

    def kernel_inf_over_l2_sq(self) -> float:
        """Squared ratio ||v||_inf / ||v||_2, used to size sparsity upstream."""
        v = self.kernel.astype(np.float64)
        return float(v.max() ** 2 / np.dot(v, v))


def build_condensation(r: int, lambda_tilde: int, p: int) -> CondensationSpec:
    """Build the order-r condensation with block count p.

    The kernel is computed by repeated integer convolution of the all-ones
    window of length ``lambda_tilde``; its coefficients are palindromic,
    positive, sum to ``lambda_tilde**r`` and peak at the middle.
    """
    if r < 1 or lambda_tilde < 1 or p < 1:
        raise ParameterError("r, lambda_tilde and p must be positive integers")
    peak = lambda_tilde**r
    if peak >= _MAX_PEAK:
        raise CapacityError("lambda_tilde**r exceeds the integer accumulator range")
    window = np.ones(lambda_tilde, dtype=np.int64)
    kernel = np.ones(1, dtype=np.int64)
    for _ in range(r):
        kernel = np.convolve(kernel, window)
    lam = r * lambda_tilde - r + 1
    if kernel.shape[0] != lam:
        raise ParameterError("kernel length disagrees with r * lt - r + 1")
    l2 = math.sqrt(sum(int(c) ** 2 for c in kernel))
    norm_factor = math.sqrt(math.pi / 2.0) / (p * l2)
    bit_width = peak.bit_length() + 1
    return CondensationSpec(
        r=r,
        lambda_tilde=lambda_tilde,
        lam=lam,
        p=p,
        m=lam * p,
        kernel=kernel,
        norm_factor=norm_factor,
        bit_width=bit_width,
    )


@dataclass
class BinaryCode:
    """A length-m sign sequence packed to bits (+1 -> 1, -1 -> 0, LSB first)."""

    length: int
    bits: np.ndarray

    @classmethod
    def from_signs(cls, signs: np.ndarray) -> "BinaryCode":
        signs = np.asarray(signs)
        if signs.ndim != 1:
            raise ShapeError("signs must be a 1-d vector")
        if not np.all(np.abs(signs) == 1):
            raise InputError("signs must be +1 or -1")
        bits = np.packbits((signs > 0).astype(np.uint8), bitorder="little")
        return cls(length=signs.shape[0], bits=bits)

    def to_signs(self) -> np.ndarray:
        flat = np.unpackbits(self.bits, count=self.length, bitorder="little")
        return (flat.astype(np.int8) * 2 - 1).astype(np.int8)

    def byte_size(self) -> int:
        return (self.length + 7) // 8


@dataclass
class CondensedCode:
    """p block sums of a binary code against the kernel, kept as integers."""

    p: int
    bit_width: int
    norm_factor: float
    entries: np.ndarray


def condense(spec: CondensationSpec, code: BinaryCode) -> CondensedCode:
    """Condense one binary code; all arithmetic is exact int64."""
    if code.length != spec.m:
        raise ShapeError(f"code length {code.length} != condensation m {spec.m}")
    signs = code.to_signs().astype(np.int64)
    entries = signs.reshape(spec.p, spec.lam) @ spec.kernel
    return CondensedCode(
        p=spec.p,
        bit_width=spec.bit_width,
        norm_factor=spec.norm_factor,
        entries=entries,
    )


def condense_signs_batch(spec: CondensationSpec, signs: np.ndarray) -> np.ndarray:
    """Condense k sign rows (k, m) -> integer entries (k, p)."""
    signs = np.asarray(signs)
    if signs.ndim != 2 or signs.shape[1] != spec.m:
        raise ShapeError(f"expected (k, {spec.m}) sign array, got {signs.shape}")
    blocks = signs.astype(np.int64).reshape(signs.shape[0], spec.p, spec.lam)
    return blocks @ spec.kernel


def condense_real_batch(spec: CondensationSpec, zs: np.ndarray) -> np.ndarray:
    """Apply the normalized condensation to real vectors (k, m) -> (k, p).

    This is the unquantized reference path: block-convolve against the
    kernel in float arithmetic and scale by ``norm_factor``.
    """
    zs = np.asarray(zs, dtype=np.float64)
    if zs.ndim != 2 or zs.shape[1] != spec.m:
        raise ShapeError(f"expected (k, {spec.m}) array, got {zs.shape}")
    blocks = zs.reshape(zs.shape[0], spec.p, spec.lam)
    return (blocks @ spec.kernel.astype(np.float64)) * spec.norm_factor


def _check_compatible(a: CondensedCode, b: CondensedCode) -> None:
    if a.p != b.p or a.bit_width != b.bit_width or a.norm_factor != b.norm_factor:
        raise IncompatibilityError(
            "condensed codes come from different condensation parameters"
        )


def l1_distance(a: CondensedCode, b: CondensedCode) -> float:
    """Distance estimate between two condensed codes.

    The absolute differences are summed exactly in int64 and the total is
    scaled by ``norm_factor`` in a single floating-point multiplication, so
    the result is a deterministic function of the integer entries.
    """
    _check_compatible(a, b)
    total = int(np.abs(a.entries - b.entries).sum())
    return total * a.norm_factor


def operator_bound(spec: CondensationSpec) -> float:
    """Deterministic bound on the normalized condensation of any r-th order
    noise pattern: for every quantization run,
    ``||Vtilde (q - z)||_1 <= operator_bound(spec) * ||u||_inf`` where u is
    the reconstructed state of the run.
    """
    r, lam = spec.r, spec.lam
    return math.sqrt(math.pi / 2.0) * float(8 * r) ** (r + 1) * lam ** (-r + 0.5)


def pack_condensed(code: CondensedCode) -> bytes:
    """Pack entries as fixed-width two's complement, LSB-first bit order."""
    w = code.bit_width
    lo = -(1 << (w - 1))
    hi = (1 << (w - 1)) - 1
    entries = code.entries
    if entries.size and (entries.min() < lo or entries.max() > hi):
        raise CapacityError("entry does not fit the declared bit width")
    mask = (1 << w) - 1
    unsigned = entries & mask
    bits = ((unsigned[:, None] >> np.arange(w, dtype=np.int64)) & 1).astype(np.uint8)
    return np.packbits(bits.ravel(), bitorder="little").tobytes()


def unpack_condensed(
    data: bytes, p: int, bit_width: int, norm_factor: float
) -> CondensedCode:
    """Inverse of :func:`pack_condensed` given the record geometry."""
    w = bit_width
    expected = (p * w + 7) // 8
    if len(data) != expected:
        raise ShapeError(f"record has {len(data)} bytes, expected {expected}")
    flat = np.unpackbits(np.frombuffer(data, dtype=np.uint8), count=p * w,
                         bitorder="little")
    weights = np.int64(1) << np.arange(w, dtype=np.int64)
    vals = flat.reshape(p, w).astype(np.int64) @ weights
    vals = np.where(vals >= (np.int64(1) << (w - 1)), vals - (np.int64(1) << w), vals)
    return CondensedCode(
        p=p, bit_width=bit_width, norm_factor=norm_factor, entries=vals
    )
