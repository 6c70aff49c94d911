"""Arithmetic at a primitive N-th root of unity.

Everything downstream (R-matrix entries, state sums, summation identities)
is built from a handful of primitives over q = exp(2*pi*i/N): residues,
cyclic intervals on the unit circle, the theta indicator, and truncated
Pochhammer products (q)_n = prod_{k=1}^{n} (1 - q^k).

Half-integer powers of q appear in several closed forms.  They are always
evaluated through the fixed principal square root q^(1/2) = exp(pi*i/N)
raised to the doubled (integer) exponent, so every formula here is
branch-unambiguous and reproducible.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

__all__ = [
    "QContext",
    "residue",
    "in_cyclic_interval",
    "theta",
    "pochhammer",
    "yokota_lemma_lhs",
    "yokota_lemma_rhs",
    "mm_identity_lhs",
    "mm_identity_rhs",
    "mm_identity_check",
]


class QContext:
    """Immutable bundle of constants for a fixed root-of-unity order N.

    Attributes:
        N: order of the root of unity, N >= 2.
        q: exp(2*pi*i/N).
        q_half: exp(pi*i/N), the fixed square root of q (order 2N).
        poch_q: numpy array of (q)_n for n = 0..N.  (q)_N is exactly 0.
        poch_qinv: numpy array of (q^-1)_n for n = 0..N; the entrywise
            complex conjugate of poch_q.

    Instances are never mutated after construction and are safe to share
    across threads.  (A private kernel cache used by the tangle contraction
    is populated lazily; writes there are idempotent.)
    """

    __slots__ = ("N", "q", "q_half", "poch_q", "poch_qinv",
                 "_roots", "_half_roots", "_kernel_cache")

    def __init__(self, N: int):
        if not isinstance(N, int) or N < 2:
            raise ValueError(f"N must be an integer >= 2, got {N!r}")
        self.N = N
        # Unit-root tables: exp(2*pi*i*j/N) and exp(pi*i*j/N).  Powers of q
        # are looked up here instead of calling exp repeatedly, which keeps
        # them accurate for exponents far outside [0, N).
        j = np.arange(N)
        self._roots = np.exp(2j * np.pi * j / N)
        self._half_roots = np.exp(1j * np.pi * np.arange(2 * N) / N)
        self.q = complex(self._roots[1])
        self.q_half = complex(self._half_roots[1])

        poch = np.empty(N + 1, dtype=np.complex128)
        poch[0] = 1.0
        for n in range(1, N + 1):
            poch[n] = poch[n - 1] * (1.0 - self._roots[n % N])
        # 1 - q^N is zero by construction; pin it to avoid rounding fuzz.
        poch[N] = 0.0
        self.poch_q = poch
        self.poch_qinv = np.conj(poch)
        self.poch_q.setflags(write=False)
        self.poch_qinv.setflags(write=False)
        self._roots.setflags(write=False)
        self._half_roots.setflags(write=False)
        self._kernel_cache: dict = {}

    def q_power(self, e: int) -> complex:
        """q**e for any integer e, via the precomputed root table."""
        return complex(self._roots[e % self.N])

    def q_half_power(self, e: int) -> complex:
        """q**(e/2) for any integer e: the principal q_half raised to e."""
        return complex(self._half_roots[e % (2 * self.N)])

    def __repr__(self) -> str:
        return f"QContext(N={self.N})"


def residue(ctx: QContext, x: int) -> int:
    """The residue [x] of an integer modulo N, in {0, ..., N-1}."""
    return x % ctx.N


def in_cyclic_interval(ctx: QContext, a: int, b: int, c: int) -> bool:
    """Whether q^b, q^a, q^c lie counterclockwise on the unit circle.

    Pairs may coincide.  Equivalent characterization in residues:
    [a-b] + [c-a] == [c-b].
    """
    N = ctx.N
    return (a - b) % N + (c - a) % N == (c - b) % N


def theta(ctx: QContext, k: int, l: int, m: int, n: int) -> int:
    """0/1 indicator that l != m and q^k, q^l, q^m, q^n are counterclockwise.

    Implemented by the four-case inequality characterization
        k <= l < m <= n,
        n <= k <= l < m,
        m <= n <= k <= l  (with m < l),
        l < m <= n <= k,
    which agrees with the circular-order definition (exhaustively tested).
    """
    if l == m:
        return 0
    if k <= l < m <= n:
        return 1
    if n <= k <= l < m:
        return 1
    if m <= n <= k <= l:  # m < l holds because l != m and m <= l
        return 1
    if l < m <= n <= k:
        return 1
    return 0


def pochhammer(ctx: QContext, base: str, n: int) -> complex:
    """Table lookup of (q)_n or (q^-1)_n for 0 <= n <= N.

    Args:
        base: "q" or "q^-1" (the spelling "qinv" is also accepted).
        n: Pochhammer depth; out-of-range values raise ValueError.
    """
    if not 0 <= n <= ctx.N:
        raise ValueError(f"Pochhammer index {n} outside 0..{ctx.N}")
    if base == "q":
        return complex(ctx.poch_q[n])
    if base in ("q^-1", "qinv"):
        return complex(ctx.poch_qinv[n])
    raise ValueError(f"unknown base {base!r}; expected 'q' or 'q^-1'")


def yokota_lemma_lhs(ctx: QContext, l: int, m: int) -> complex:
    """Direct evaluation of sum_{k in [l,m]} q^{-(m-l+1)k} / ((q)_[m-k] (q^-1)_[k-l])."""
    N = ctx.N
    if not (0 <= l < N and 0 <= m < N):
        raise ValueError("l, m must lie in 0..N-1")
    total = 0.0 + 0.0j
    for k in range(N):
        if not in_cyclic_interval(ctx, k, l, m):
            continue
        num = ctx.q_power(-(m - l + 1) * k)
        den = ctx.poch_q[(m - k) % N] * ctx.poch_qinv[(k - l) % N]
        total += num / den
    return total


def yokota_lemma_rhs(ctx: QContext, l: int, m: int) -> complex:
    """Closed form (-1)^[m-l] q^{([m-l]+1)([m-l]-2m)/2} of the reduction sum.

    The exponent may be half-integer; it is evaluated as q_half raised to
    the doubled exponent ([m-l]+1)([m-l]-2m), which is an integer.
    """
    N = ctx.N
    if not (0 <= l < N and 0 <= m < N):
        raise ValueError("l, m must lie in 0..N-1")
    d = (m - l) % N
    sign = -1.0 if d % 2 else 1.0
    return sign * ctx.q_half_power((d + 1) * (d - 2 * m))


def mm_identity_lhs(ctx: QContext, alpha: int, beta: int) -> complex:
    """sum_{i=0}^{N-1-alpha} q^{(beta-alpha)i/2} / ((q)_i (q^-1)_{N-1-alpha-i})."""
    N = ctx.N
    if not 0 <= alpha <= N - 1:
        raise ValueError("alpha must lie in 0..N-1")
    total = 0.0 + 0.0j
    for i in range(N - alpha):
        num = ctx.q_half_power((beta - alpha) * i)
        den = ctx.poch_q[i] * ctx.poch_qinv[N - 1 - alpha - i]
        total += num / den
    return total


def mm_identity_rhs(ctx: QContext, alpha: int, beta: int) -> complex:
    """Closed form of the root-of-unity summation identity behind the lemma.

    (-1)^{N-1-alpha} q^{-N(N-1)/2 - beta(alpha+1)/2} / N
        * (q)_alpha (q)_{N-1-alpha+[(alpha-beta)/2]} / (q)_{[(alpha-beta)/2]}

    Requires alpha == beta (mod 2): otherwise the Pochhammer index
    (alpha-beta)/2 is not an integer and the identity is not defined.
    """
    N = ctx.N
    if not 0 <= alpha <= N - 1:
        raise ValueError("alpha must lie in 0..N-1")
    if (alpha - beta) % 2 != 0:
        raise ValueError("identity requires alpha and beta of equal parity")
    half = ((alpha - beta) // 2) % N
    sign = -1.0 if (N - 1 - alpha) % 2 else 1.0
    phase = ctx.q_half_power(-N * (N - 1) - beta * (alpha + 1))
    idx = N - 1 - alpha + half
    if idx > N:
        # (q)_n = 0 for every n >= N: the factor (1 - q^N) enters at depth N.
        idx = N
    return sign * phase / N * ctx.poch_q[alpha] * ctx.poch_q[idx] / ctx.poch_q[half]


def mm_identity_check(ctx: QContext, alpha: int, beta: int) -> float:
    """|lhs - rhs| of the summation identity; self-test helper."""
    return abs(mm_identity_lhs(ctx, alpha, beta) - mm_identity_rhs(ctx, alpha, beta))
