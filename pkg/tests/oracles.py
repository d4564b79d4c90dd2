"""Independent reference implementations used only by the tests.

Everything here deliberately uses different algorithms than the package
(subset expansion instead of partition recursion, hit-or-miss instead of
closed forms, eigenvalue-only chains instead of matrix chains, dense-grid
quadrature instead of Monte Carlo), so agreement between the two routes is
evidence rather than tautology.
"""

from __future__ import annotations

import math
from typing import Dict, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

# hand-derived constants (independent of the package)
#
# Large-N ball-volume asymptotics: using Stirling on the exact product
# formula, (1/N^2) log Vol(H_N^R) = log(R/2) + 3/4 + (1/2) log pi
# - (1/2) log N + o(1), so the calibration constant
# (1/N^2) log Vol + (1/2) log N - log(R/2) tends to 3/4 + (1/2) log pi.
REFERENCE_CONSTANT_LIMIT = 0.75 + 0.5 * math.log(math.pi)

# free-entropy integral Sigma(mu) = double integral of log|x-y|:
# semicircle of variance 1 gives -1/4; uniform on [-1,1] gives log 2 - 3/2.
SIGMA_SEMICIRCLE_VAR1 = -0.25
SIGMA_UNIFORM_M11 = math.log(2.0) - 1.5

CATALAN = (1, 1, 2, 5, 14, 42, 132, 429, 1430)


# ---------------------------------------------------------------------------
# scalar (N=1) quadrature

def scalar_grid(R: float, npoints: int = 20001) -> Tuple[np.ndarray, float]:
    """Midpoint grid on [-R, R]."""
    edges = np.linspace(-R, R, npoints + 1)
    return (edges[:-1] + edges[1:]) / 2.0, edges[1] - edges[0]


def potential_values(coeffs: Sequence[float], xs: np.ndarray) -> np.ndarray:
    """V(x) = sum_p coeffs[p] x^p with coeffs[0] the constant term."""
    vals = np.zeros_like(xs)
    for p, c in enumerate(coeffs):
        if c:
            vals = vals + c * xs ** p
    return vals


def gibbs_density(coeffs: Sequence[float], R: float,
                  npoints: int = 20001) -> Tuple[np.ndarray, np.ndarray, float]:
    """Normalized density exp(-V)/Z on the midpoint grid: (xs, f, dx)."""
    xs, dx = scalar_grid(R, npoints)
    logw = -potential_values(coeffs, xs)
    logw -= logw.max()
    w = np.exp(logw)
    f = w / (w.sum() * dx)
    return xs, f, dx


def log_i_quad(coeffs: Sequence[float], R: float, npoints: int = 20001) -> float:
    """log of the unnormalized integral of exp(-V) over [-R, R]."""
    xs, dx = scalar_grid(R, npoints)
    logw = -potential_values(coeffs, xs)
    shift = logw.max()
    return shift + math.log(float(np.exp(logw - shift).sum()) * dx)


def entropy_quad(f: np.ndarray, dx: float) -> float:
    """Differential entropy -int f log f on a midpoint grid."""
    mask = f > 0
    return float(-(f[mask] * np.log(f[mask])).sum() * dx)


def kl_quad(f: np.ndarray, g: np.ndarray, dx: float) -> float:
    """Relative entropy int f log(f/g); +inf when f escapes g's support."""
    mask = f > 0
    if np.any(g[mask] <= 0):
        return math.inf
    return float((f[mask] * (np.log(f[mask]) - np.log(g[mask]))).sum() * dx)


def moment_quad(f: np.ndarray, xs: np.ndarray, dx: float, p: int) -> float:
    return float((f * xs ** p).sum() * dx)


def log_i_linear_exact(c: float, R: float) -> float:
    """Closed form of int exp(-c x) over [-R, R]: 2 sinh(cR)/c."""
    if abs(c) < 1e-12:
        return math.log(2.0 * R)
    # log(2 sinh(cR)/c) computed stably for large |c| R
    a = abs(c) * R
    return a + math.log1p(-math.exp(-2.0 * a)) - math.log(abs(c))


def langevin_mean(theta: float, R: float) -> float:
    """Mean of the density proportional to exp(theta x) on [-R, R]."""
    t = theta * R
    if abs(t) < 1e-8:
        return R * t / 3.0
    return R * (1.0 / math.tanh(t) - 1.0 / t)


def tilt_for_mean(mean: float, R: float) -> float:
    """Invert the tilted-uniform mean map; |mean| must be < R."""
    if abs(mean) >= R:
        raise ValueError("mean out of range")
    if mean == 0.0:
        return 0.0
    lo, hi = -400.0 / R, 400.0 / R
    return brentq(lambda th: langevin_mean(th, R) - mean, lo, hi, xtol=1e-14)


def arcsine_moment_quad(R: float, k: int, npoints: int = 200001) -> float:
    """Moment of the arcsine law via the angular substitution x = R sin t.

    The substitution removes the endpoint singularity, so a plain trapezoid
    converges fast: m_k = (R^k / pi) int sin^k t dt over [-pi/2, pi/2].
    """
    ts = np.linspace(-math.pi / 2.0, math.pi / 2.0, npoints)
    vals = np.sin(ts) ** k
    return float(R ** k / math.pi * np.trapezoid(vals, ts))


# ---------------------------------------------------------------------------
# free products by subset expansion
#
# After merging adjacent equal-letter runs, the product of centered runs is
# alternating, so its trace vanishes; solving that relation for the full word
# gives tau(w) = -sum over proper subsets T of runs of
# prod_{i not in T} (-mu_i) * tau(word restricted to T), a recursion that
# strictly lowers total degree.

def _merge_runs(runs: Tuple[Tuple[int, int], ...]) -> Tuple[Tuple[int, int], ...]:
    merged = []
    for letter, power in runs:
        if merged and merged[-1][0] == letter:
            merged[-1] = (letter, merged[-1][1] + power)
        else:
            merged.append((letter, power))
    return tuple(merged)


def free_word_value(word: Sequence[int], marginals: Dict[int, Sequence[float]]) -> float:
    """tau(word) when the letters are freely independent with given marginals.

    ``marginals[letter][p]`` is the p-th power moment (index 0 gives 1).
    """
    memo: Dict[Tuple[Tuple[int, int], ...], float] = {}

    def mom(letter: int, power: int) -> float:
        seq = marginals[letter]
        if power >= len(seq):
            raise ValueError(f"marginal of letter {letter} too short for power {power}")
        return float(seq[power])

    def tau(runs: Tuple[Tuple[int, int], ...]) -> float:
        runs = _merge_runs(runs)
        if not runs:
            return 1.0
        if len(runs) == 1:
            return mom(*runs[0])
        if runs in memo:
            return memo[runs]
        r = len(runs)
        total = 0.0
        for mask in range(2 ** r - 1):
            kept = tuple(runs[i] for i in range(r) if mask >> i & 1)
            coeff = 1.0
            for i in range(r):
                if not (mask >> i & 1):
                    coeff *= -mom(*runs[i])
            if coeff:
                total += coeff * tau(kept)
        memo[runs] = -total
        return -total

    runs = tuple((letter, 1) for letter in word)
    return tau(runs)


# ---------------------------------------------------------------------------
# ball volume by hit-or-miss

def ball_volume_mc(N: int, R: float, samples: int, rng: np.random.Generator,
                   chunk: int = 200000) -> Tuple[float, float]:
    """(log volume, stderr) of the operator-norm ball from box rejection.

    The ball sits inside the entrywise box (diagonal and off-diagonal real
    and imaginary parts all in [-R, R]) whose volume is (2R)^(N^2).
    """
    hits = 0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        diag = rng.uniform(-R, R, size=(m, N))
        re = rng.uniform(-R, R, size=(m, N, N))
        im = rng.uniform(-R, R, size=(m, N, N))
        mats = np.zeros((m, N, N), dtype=complex)
        iu = np.triu_indices(N, k=1)
        mats[:, iu[0], iu[1]] = re[:, iu[0], iu[1]] + 1j * im[:, iu[0], iu[1]]
        mats = mats + np.conjugate(np.swapaxes(mats, 1, 2))
        mats[:, np.arange(N), np.arange(N)] = diag
        eigs = np.linalg.eigvalsh(mats)
        hits += int(np.count_nonzero(np.abs(eigs).max(axis=1) <= R))
        done += m
    if hits == 0:
        raise RuntimeError("no hits; sample budget far too small")
    p = hits / samples
    log_vol = N * N * math.log(2.0 * R) + math.log(p)
    stderr = math.sqrt((1.0 - p) / (p * samples))
    return log_vol, stderr


# ---------------------------------------------------------------------------
# eigenvalue-only (log-gas) chain for n = 1 models

def log_gas_chain(N: int, R: float, coeffs: Sequence[float], sweeps: int,
                  burnin: int, rng: np.random.Generator,
                  step: float = 0.3) -> np.ndarray:
    """Samples of the eigenvalue density prod|li-lj|^2 exp(-N sum V(li)).

    Single-site Metropolis on [-R, R]^N; returns an array (sweeps, N). This
    is the joint spectral law of the n = 1 Hermitian model, derived here
    directly from the Vandermonde factor rather than from matrix moves.
    """
    lam = np.linspace(-R / 2.0, R / 2.0, N)
    out = np.empty((sweeps, N))
    accepted = 0
    proposed = 0
    scale = step

    def site_logdens(value: float, i: int) -> float:
        diffs = np.abs(value - lam)
        diffs[i] = 1.0
        if np.any(diffs == 0.0):
            return -math.inf
        v = 0.0
        for p, c in enumerate(coeffs):
            if c:
                v += c * value ** p
        return 2.0 * float(np.log(diffs).sum()) - N * v

    total = burnin + sweeps
    for t in range(total):
        for i in range(N):
            proposed += 1
            old = lam[i]
            new = old + scale * rng.normal()
            if abs(new) > R:
                continue
            logr = site_logdens(new, i) - site_logdens(old, i)
            if logr >= 0.0 or rng.random() < math.exp(logr):
                lam[i] = new
                accepted += 1
        if t < burnin and t % 25 == 24:
            acc = accepted / proposed
            scale = min(max(scale * math.exp(1.5 * (acc - 0.4)), 1e-3), R)
            accepted = 0
            proposed = 0
        if t >= burnin:
            out[t - burnin] = lam
    return out


# ---------------------------------------------------------------------------
# pushforward entropy without derivatives
#
# With F the CDF of f on the x grid, the pushed density between y_k = g(x_k)
# is (F_{k+1} - F_k) / (y_{k+1} - y_k); its entropy follows from the cell
# masses alone, so no derivative of g ever enters this route.

def pushed_entropy_from_cdf(xs: np.ndarray, f: np.ndarray, dx: float,
                            ys: np.ndarray) -> float:
    if np.any(np.diff(ys) <= 0):
        raise ValueError("ys must be strictly increasing along xs")
    mass = f * dx
    widths = np.diff(ys)
    cell = (mass[:-1] + mass[1:]) / 2.0
    # endpoints carry half a cell each; fold them into the first and last
    cell[0] += mass[0] / 2.0
    cell[-1] += mass[-1] / 2.0
    keep = cell > 0
    return float(-(cell[keep] * (np.log(cell[keep]) - np.log(widths[keep]))).sum())


def gibbs_cells_2d(terms: Dict[Tuple[int, int], float], R: float,
                   npoints: int = 320) -> np.ndarray:
    """Cell masses of exp(-sum c_ij x^i y^j) on the midpoint grid of the square.

    Commutative stand-in for a two-generator potential at matrix size 1.
    """
    xs, _ = scalar_grid(R, npoints)
    v = np.zeros((npoints, npoints))
    for (i, j), c in terms.items():
        v += c * np.outer(xs ** i, xs ** j)
    v -= v.min()
    p = np.exp(-v)
    return p / p.sum()


def kl_cells(p: np.ndarray, q: np.ndarray) -> float:
    """Discrete KL divergence of matching cell-mass arrays."""
    p, q = np.ravel(p), np.ravel(q)
    if np.any((q <= 0) & (p > 0)):
        return math.inf
    m = p > 0
    return float((p[m] * np.log(p[m] / q[m])).sum())
