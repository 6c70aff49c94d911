"""Entries of the R-matrix pair and the twist matrix, plus dense verification.

The crossing operator R and its inverse are N^2 x N^2 matrices over a fixed
QContext whose entries vanish outside the support of the theta indicator.
The twist mu is the cyclic shift scaled by -q^(1/2).  Together they form an
enhanced Yang-Baxter operator: the braid relation, the (mu x mu) commutation,
and a partial-trace normalization all hold exactly; `check_ybe` verifies the
three identities densely for small N.

Index convention: in an entry X_{l,m}^{k,n} the upper pair (k, n) is the
matrix row (k*N + n) and the lower pair (l, m) the column.  At a crossing
drawn in the plane, k and n sit at the two upper corners (left, right) and
l, m at the two lower corners (left, right).

Support convention: an R entry is nonzero exactly when the four corner
angles [n-m], [k-n], [l-k], [m-l-1] sum to N-1.  That is the theta-indicator
support plus the all-equal diagonal k=l=m=n; dropping the diagonal (as a
literal reading of the theta condition would) leaves every column with
l == m identically zero and the matrix singular.  The angle-sum form is the
one under which R R^-1 = id, the braid relation, and the partial-trace
normalization all verify to machine precision.

Twist convention: mu is nonzero at row k = [l+1] (entry mu_l^k with
k = l+1 cyclically), scaled by -q^(1/2).  This is the only shift direction
under which the partial-trace identity holds; `check_ybe` enforces it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qkernel import QContext

__all__ = [
    "crossing_angles",
    "r_support",
    "r_entry",
    "mu_entry",
    "r_difference_kernel",
    "r_tensor",
    "r_matrix",
    "mu_matrix",
    "YBEReport",
    "check_ybe",
    "DenseCheckTooLargeError",
]

#: Largest N for which check_ybe will materialize N^3-dimensional operators.
DEFAULT_DENSE_BOUND = 8


class DenseCheckTooLargeError(ValueError):
    """Raised when a dense verification would exceed the configured bound."""


def crossing_angles(ctx: QContext, k: int, n: int, l: int, m: int) -> tuple[int, int, int, int]:
    """The four corner angles ([n-m], [k-n], [l-k], [m-l-1]) of a labeled crossing.

    Their sum is always N-1 modulo N; it equals N-1 exactly on the support
    of the R entries.
    """
    N = ctx.N
    return ((n - m) % N, (k - n) % N, (l - k) % N, (m - l - 1) % N)


def r_support(ctx: QContext, k: int, n: int, l: int, m: int) -> bool:
    """Whether the R entry at these labels is nonzero: angle sum == N-1.

    Equivalent to theta(k, l, m, n) == 1 or k == l == m == n.
    """
    return sum(crossing_angles(ctx, k, n, l, m)) == ctx.N - 1


def r_entry(ctx: QContext, k: int, n: int, l: int, m: int, sign: int) -> complex:
    """Single entry R_{l,m}^{k,n} (sign=+1) or (R^-1)_{l,m}^{k,n} (sign=-1).

    Labels are integers in 0..N-1; k, n are the upper (row) labels and
    l, m the lower (column) labels.  Zero outside the angle-sum support.
    """
    if not r_support(ctx, k, n, l, m):
        return 0.0 + 0.0j
    N = ctx.N
    if sign == +1:
        num = N * ctx.q_power(1 - (l - n + 1) * (m - k))
        den = (ctx.poch_q[(m - l - 1) % N] * ctx.poch_qinv[(n - m) % N]
               * ctx.poch_q[(k - n) % N] * ctx.poch_qinv[(l - k) % N])
    elif sign == -1:
        num = N * ctx.q_power(-1 + (m - k - 1) * (l - n))
        den = (ctx.poch_qinv[(m - l - 1) % N] * ctx.poch_q[(n - m) % N]
               * ctx.poch_qinv[(k - n) % N] * ctx.poch_q[(l - k) % N])
    else:
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")
    return complex(num / den)


def mu_entry(ctx: QContext, k: int, l: int, sign: int) -> complex:
    """Entry mu_l^k (sign=+1) or (mu^-1)_l^k (sign=-1); k is the row index.

    mu is the cyclic shift with -q^(1/2) at row k = [l+1]; its inverse has
    -q^(-1/2) at l = [k+1].  All nonzero entries have modulus 1, and mu is
    invertible because the shift wraps cyclically.
    """
    N = ctx.N
    if sign == +1:
        return -ctx.q_half if k == (l + 1) % N else 0.0 + 0.0j
    if sign == -1:
        return -ctx.q_half.conjugate() if l == (k + 1) % N else 0.0 + 0.0j
    raise ValueError(f"sign must be +1 or -1, got {sign!r}")


def _entries_grid(ctx: QContext, K, Nn, L, M, sign: int) -> np.ndarray:
    """Vectorized r_entry over broadcastable integer arrays of labels."""
    N = ctx.N
    K, Nn, L, M = np.broadcast_arrays(K, Nn, L, M)
    # support: the four corner angles sum to exactly N-1
    a_e = (Nn - M) % N
    a_n = (K - Nn) % N
    a_w = (L - K) % N
    a_s = (M - L - 1) % N
    support = a_e + a_n + a_w + a_s == N - 1
    if sign == +1:
        expo = (1 - (L - Nn + 1) * (M - K)) % N
        den = ctx.poch_q[a_s] * ctx.poch_qinv[a_e] * ctx.poch_q[a_n] * ctx.poch_qinv[a_w]
        num = N * ctx._roots[expo]
    else:
        expo = (-1 + (M - K - 1) * (L - Nn)) % N
        den = ctx.poch_qinv[a_s] * ctx.poch_q[a_e] * ctx.poch_qinv[a_n] * ctx.poch_q[a_w]
        num = N * ctx._roots[expo]
    out = np.zeros(K.shape, dtype=np.complex128)
    np.divide(num, den, out=out, where=support)
    return out


def r_difference_kernel(ctx: QContext, sign: int) -> np.ndarray:
    """R entries as a function of label differences: the N^3 table K[d, t, u].

    Entries are translation invariant in the labels (support, exponent and
    Pochhammer indices all depend on differences only), so the full rank-4
    tensor satisfies R4[k, n, l, m] = K[l-k, m-l, n-k] (indices mod N).
    The table doubles as the cyclic-convolution kernel used by the
    state-sum crossing application.
    """
    if sign not in (+1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")
    key = ("rker", sign)
    cached = ctx._kernel_cache.get(key)
    if cached is not None:
        return cached
    N = ctx.N
    d = np.arange(N).reshape(N, 1, 1)
    t = np.arange(N).reshape(1, N, 1)
    u = np.arange(N).reshape(1, 1, N)
    kernel = _entries_grid(ctx, np.zeros_like(d), u, d, (t + d) % N, sign)
    kernel.setflags(write=False)
    ctx._kernel_cache[key] = kernel
    return kernel


def r_tensor(ctx: QContext, sign: int = +1) -> np.ndarray:
    """Dense rank-4 tensor R4[k, n, l, m] of R (sign=+1) or R^-1 (sign=-1).

    Gathered from the difference kernel, which keeps the build cost at
    O(N^3) arithmetic plus an O(N^4) memory gather.
    """
    key = ("r4", sign)
    cached = ctx._kernel_cache.get(key)
    if cached is not None:
        return cached
    N = ctx.N
    ker = r_difference_kernel(ctx, sign)
    k = np.arange(N).reshape(N, 1, 1, 1)
    n = np.arange(N).reshape(1, N, 1, 1)
    l = np.arange(N).reshape(1, 1, N, 1)
    m = np.arange(N).reshape(1, 1, 1, N)
    r4 = ker[(l - k) % N, (m - l) % N, (n - k) % N]
    r4.setflags(write=False)
    ctx._kernel_cache[key] = r4
    return r4


def r_matrix(ctx: QContext, sign: int = +1) -> np.ndarray:
    """Dense N^2 x N^2 matrix of R (sign=+1) or R^-1 (sign=-1).

    Row index is k*N + n, column index l*N + m.
    """
    N = ctx.N
    return r_tensor(ctx, sign).reshape(N * N, N * N)


def mu_matrix(ctx: QContext, sign: int = +1) -> np.ndarray:
    """Dense N x N twist matrix mu (sign=+1) or mu^-1 (sign=-1)."""
    N = ctx.N
    out = np.zeros((N, N), dtype=np.complex128)
    for l in range(N):
        if sign == +1:
            out[(l + 1) % N, l] = -ctx.q_half
        else:
            out[l, (l + 1) % N] = -ctx.q_half.conjugate()
    return out


@dataclass(frozen=True)
class YBEReport:
    """Max absolute deviations of the enhanced Yang-Baxter identities."""

    N: int
    braid: float
    mu_commutation: float
    partial_trace_plus: float
    partial_trace_minus: float
    inverse: float

    @property
    def max_residual(self) -> float:
        return max(self.braid, self.mu_commutation,
                   self.partial_trace_plus, self.partial_trace_minus,
                   self.inverse)

    def passes(self, tol: float = 1e-9) -> bool:
        return self.max_residual < tol

    def as_dict(self) -> dict:
        return {
            "N": self.N,
            "braid": self.braid,
            "mu_commutation": self.mu_commutation,
            "partial_trace_plus": self.partial_trace_plus,
            "partial_trace_minus": self.partial_trace_minus,
            "inverse": self.inverse,
            "max_residual": self.max_residual,
        }


def check_ybe(ctx: QContext, max_n: int = DEFAULT_DENSE_BOUND) -> YBEReport:
    """Densely verify the enhanced Yang-Baxter identities at this N.

    Checks, on N^3- and N^2-dimensional matrices:
      (a) (R x id)(id x R)(R x id) = (id x R)(R x id)(id x R),
      (b) (mu x mu) R = R (mu x mu),
      (c) sum_m (R^{+-1}(id x mu))_{lm}^{km} = (-q^(1/2))^{+-1} delta_{k,l},
    plus R R^-1 = id as a sanity row.  Cost grows like N^6; larger N are
    refused explicitly rather than silently attempted.
    """
    N = ctx.N
    if N > max_n:
        raise DenseCheckTooLargeError(
            f"dense Yang-Baxter check requested at N={N}, bound is {max_n}")
    R = r_matrix(ctx, +1)
    Rinv = r_matrix(ctx, -1)
    mu = mu_matrix(ctx, +1)
    eye = np.eye(N)

    a = np.kron(R, eye)
    b = np.kron(eye, R)
    braid = float(np.max(np.abs(a @ b @ a - b @ a @ b)))

    mumu = np.kron(mu, mu)
    commute = float(np.max(np.abs(mumu @ R - R @ mumu)))

    id_mu = np.kron(eye, mu)
    scalar = -ctx.q_half
    traces = []
    for mat, s in ((R, scalar), (Rinv, 1.0 / scalar)):
        t = (mat @ id_mu).reshape(N, N, N, N)
        # partial trace over the shared last label of row (k,m) / col (l,m)
        partial = np.einsum("kmlm->kl", t)
        traces.append(float(np.max(np.abs(partial - s * np.eye(N)))))

    inverse = float(np.max(np.abs(R @ Rinv - np.eye(N * N))))
    return YBEReport(N=N, braid=braid, mu_commutation=commute,
                     partial_trace_plus=traces[0],
                     partial_trace_minus=traces[1],
                     inverse=inverse)
