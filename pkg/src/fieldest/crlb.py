"""Fisher information and Cramer-Rao lower bounds for both channels.

Analog channel: closed form I = sum_k grad G_k grad G_k^T / (sigma2_k + eta2_k).

Quantized channel: the Fisher matrix involves per-sensor expectations
Phi_kji = (2 pi eta^2)^(-alpha/2) * Int e_j(z) e_i(z) / x_k(z) dz over the
alpha-dimensional received word, where e_j(z) = exp(-||z - b_j||^2/(2 eta^2))
and x_k(z) = sum_v p_kv e_v(z).  Two evaluation routes are provided:

* a truncated series: 1/x = sum_n (1-x)^n converges because 0 < x <= 1;
  expanding x^w multinomially turns every term into a Gaussian product
  integral with the closed form lambda_term, indexed by weak compositions;
* composite Simpson quadrature on a tensor grid over [-6 eta, 1 + 6 eta]
  per bit axis, which serves as the accuracy oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .channel import level_probabilities
from ._quadrature import simpson_nodes_weights

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)

#: refuse series evaluations with more enumerated terms than this
COMPOSITION_GUARD = 10**7

#: condition-number ceiling beyond which the Fisher matrix counts as singular
CONDITION_LIMIT = 1e12


class SingularFisherError(np.linalg.LinAlgError):
    """Fisher matrix too ill-conditioned for a meaningful bound."""

    def __init__(self, message, condition):
        super().__init__(message)
        self.condition = condition


class CompositionGuardError(ValueError):
    """Series truncation order would enumerate an intractable term count."""


@dataclass(frozen=True, eq=False)
class FisherMatrix:
    """L x L Fisher information with a tag recording how it was computed."""

    entries: np.ndarray
    provenance: str

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "entries", arr)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"Fisher matrix must be square, got shape {arr.shape}")
        scale = np.max(np.abs(arr))
        if scale > 0 and np.max(np.abs(arr - arr.T)) > 1e-10 * scale:
            raise ValueError("Fisher matrix entries must be symmetric")

    @property
    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.entries)[0])

    @property
    def crlb_diag(self):
        return crlb_from_fisher(self)


def crlb_from_fisher(fisher):
    """Diagonal of I^-1 through a symmetric eigendecomposition.

    Raises SingularFisherError when the matrix is not positive definite or
    its condition number reaches CONDITION_LIMIT.
    """
    entries = fisher.entries if isinstance(fisher, FisherMatrix) else np.asarray(fisher, float)
    vals, vecs = np.linalg.eigh(entries)
    if vals[-1] <= 0:
        raise SingularFisherError("Fisher matrix is not positive definite", np.inf)
    condition = np.inf if vals[0] <= 0 else float(vals[-1] / vals[0])
    if condition >= CONDITION_LIMIT:
        raise SingularFisherError(
            f"Fisher matrix is numerically singular (condition ~ {condition:.3e})",
            condition,
        )
    return (vecs**2) @ (1.0 / vals)


# ------------------------------------------------------------------ analog


def fisher_analog(net, model, params, eta2):
    """I = sum_k (sigma2_k + eta2_k)^-1 grad G_k grad G_k^T."""
    if net.sigma2 is None:
        raise ValueError("network has no calibrated sigma2")
    eta2v = np.broadcast_to(np.asarray(eta2, dtype=float), (net.k,))
    w = 1.0 / (net.sigma2 + eta2v)
    grads = model.gradient(params, net.x, net.y)
    entries = np.einsum("k,ks,kt->st", w, grads, grads)
    return FisherMatrix(0.5 * (entries + entries.T), "analog")


# ------------------------------------------- level-probability derivatives


def _p_derivatives_batch(quantizer, g, grads, hesses, sigma):
    """Level probabilities and their first/second theta-derivatives for a
    batch of sensors: returns (p: KxM, dp: KxMxL, d2p: KxMxLxL)."""
    u = (quantizer.boundaries[None, :] - g[:, None]) / sigma[:, None]
    phi = _INV_SQRT_2PI * np.exp(-0.5 * u * u)
    uphi = np.where(np.isfinite(u), u, 0.0) * phi
    dp_dg = (phi[:, :-1] - phi[:, 1:]) / sigma[:, None]
    d2p_dg2 = (uphi[:, :-1] - uphi[:, 1:]) / sigma[:, None] ** 2
    p = level_probabilities(quantizer, g, sigma)
    dp = dp_dg[:, :, None] * grads[:, None, :]
    d2p = (
        d2p_dg2[:, :, None, None] * grads[:, None, :, None] * grads[:, None, None, :]
        + dp_dg[:, :, None, None] * hesses[:, None, :, :]
    )
    return p, dp, d2p


def p_derivatives(quantizer, g, grad_g, hess_g, sigma):
    """Chain rule through the field: dp_j/dtheta_s = dp_j/dg * dg/dtheta_s and
    d2p_j/dtheta2 = d2p_j/dg2 * grad grad^T + dp_j/dg * hess_g.

    Returns (dp: M x L, d2p: M x L x L) for a single sensor.
    """
    sigma = float(sigma)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    grad_g = np.asarray(grad_g, dtype=float)
    hess_g = np.asarray(hess_g, dtype=float)
    _, dp, d2p = _p_derivatives_batch(
        quantizer,
        np.atleast_1d(float(g)),
        grad_g[None, :],
        hess_g[None, :, :],
        np.atleast_1d(sigma),
    )
    return dp[0], d2p[0]


# ------------------------------------------------------------------ series


def compositions(total, parts):
    """All weak compositions of `total` into `parts` nonnegative integers,
    yielded exactly once each in lexicographic order."""
    total = int(total)
    parts = int(parts)
    if total < 0 or parts < 1:
        raise ValueError("need total >= 0 and parts >= 1")
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def series_term_count(zeta, m):
    """Total number of series terms enumerated up to truncation order zeta:
    sum over n <= zeta, m' <= n of the compositions of n - m' into M parts,
    which telescopes to C(zeta + M + 1, M + 1)."""
    return math.comb(zeta + m + 1, m + 1)


def lambda_term(ell, j, i, bm, eta2):
    """Closed form of the Gaussian product integral

        (2 pi eta^2)^(-alpha/2) Int e_j(z) e_i(z) prod_v e_v(z)^{ell_v} dz

    over R^alpha: with c = sum(ell) + 2, m_vec = b_j + b_i + sum_v ell_v b_v
    and S = ||b_j||^2 + ||b_i||^2 + sum_v ell_v ||b_v||^2 it equals
    c^(-alpha/2) * exp((||m_vec||^2 / c - S) / (2 eta^2)).

    j and i are 1-based level indices.
    """
    ell = np.asarray(ell, dtype=float)
    m = bm.m
    if ell.shape != (m,) or np.any(ell < 0):
        raise ValueError(f"ell must be {m} nonnegative integers")
    if not (1 <= j <= m and 1 <= i <= m):
        raise ValueError(f"level indices must be in 1..{m}")
    eta2 = float(eta2)
    book = bm.codebook
    bj = book[j - 1]
    bi = book[i - 1]
    c = float(ell.sum()) + 2.0
    m_vec = bj + bi + ell @ book
    s_val = bj @ bj + bi @ bi + ell @ np.einsum("va,va->v", book, book)
    return float(c ** (-bm.alpha / 2.0) * np.exp((m_vec @ m_vec / c - s_val) / (2.0 * eta2)))


def _composition_table(zeta, m):
    """(C, M) int16 matrix of all compositions with total <= zeta, stacked by
    total in increasing order (lexicographic within each total), plus the
    (C,) vector of totals."""
    blocks = []
    totals = []
    for w in range(zeta + 1):
        block = np.array(list(compositions(w, m)), dtype=np.int16).reshape(-1, m)
        blocks.append(block)
        totals.append(np.full(block.shape[0], w, dtype=np.int16))
    return np.concatenate(blocks, axis=0), np.concatenate(totals)


def _series_coefficients(zeta):
    """Per-weight coefficient c_w = (-1)^w sum_{n=w}^{zeta} n!/(n-w)! arising
    from regrouping the (1-x)^n expansions by composition weight w."""
    coef = np.empty(zeta + 1)
    for w in range(zeta + 1):
        coef[w] = float((-1) ** w * sum(math.perm(n, w) for n in range(w, zeta + 1)))
    return coef


def fisher_quantized_series(net, model, params, quantizer, bm, eta2, zeta):
    """Quantized-channel Fisher information by the truncated series.

    I = sum_k [ sum_{j,i} dp_kj dp_ki Phi_kji - sum_j d2p_kj ] with
    Phi_kji = sum over compositions ell (weight w <= zeta) of
    c_w * prod_v p_kv^{ell_v} / prod_v ell_v! * lambda_term(ell, j, i);
    the first-term weights Gamma_kj equal 1 exactly.  The result is
    symmetrized before output.
    """
    zeta = int(zeta)
    if zeta < 0:
        raise ValueError("zeta must be >= 0")
    if quantizer.m != bm.m:
        raise ValueError("quantizer and bit mapper disagree on the level count")
    if net.sigma2 is None:
        raise ValueError("network has no calibrated sigma2")
    m = bm.m
    count = series_term_count(zeta, m)
    if count >= COMPOSITION_GUARD:
        raise CompositionGuardError(
            f"series with zeta={zeta}, M={m} enumerates {count} terms "
            f"(guard: {COMPOSITION_GUARD})"
        )
    eta2v = np.broadcast_to(np.asarray(eta2, dtype=float), (net.k,))
    g = model.value(params, net.x, net.y)
    grads = model.gradient(params, net.x, net.y)
    hesses = model.hessian(params, net.x, net.y)
    sigma = np.sqrt(net.sigma2)
    p, dp, d2p = _p_derivatives_batch(quantizer, g, grads, hesses, sigma)

    ell_all, totals = _composition_table(zeta, m)
    coef = _series_coefficients(zeta)[totals]
    book = bm.codebook
    norms = np.einsum("va,va->v", book, book)
    with np.errstate(divide="ignore"):
        logp = np.where(p > 0, np.log(np.maximum(p, 1e-300)), -1e9)

    n_params = dp.shape[2]
    entries = np.zeros((n_params, n_params))
    chunk = 16384
    for eta_val in np.unique(eta2v):
        k_idx = np.flatnonzero(eta2v == eta_val)
        phi = np.zeros((k_idx.size, m, m))
        for c0 in range(0, ell_all.shape[0], chunk):
            ell = ell_all[c0 : c0 + chunk].astype(float)
            cvec = ell.sum(axis=1) + 2.0
            base_m = ell @ book
            base_s = ell @ norms
            log_wt = ell @ logp[k_idx].T - gammaln(ell + 1.0).sum(axis=1)[:, None]
            wt = np.exp(log_wt) * coef[c0 : c0 + chunk, None]
            lam = np.empty((ell.shape[0], m, m))
            pref = cvec ** (-bm.alpha / 2.0)
            for j in range(m):
                mj = base_m + book[j]
                sj = base_s + norms[j]
                for i in range(j, m):
                    mv = mj + book[i]
                    val = pref * np.exp(
                        (np.einsum("ca,ca->c", mv, mv) / cvec - sj - norms[i])
                        / (2.0 * eta_val)
                    )
                    lam[:, j, i] = val
                    lam[:, i, j] = val
            phi += (wt.T @ lam.reshape(ell.shape[0], -1)).reshape(k_idx.size, m, m)
        term2 = np.einsum("kjs,kji,kit->st", dp[k_idx], phi, dp[k_idx], optimize=True)
        term1 = d2p[k_idx].sum(axis=(0, 1))
        entries += term2 - term1
    return FisherMatrix(0.5 * (entries + entries.T), f"series(zeta={zeta})")


# ---------------------------------------------------------------- Simpson


def _check_simpson_args(bm, nodes):
    nodes = int(nodes)
    if nodes < 21 or nodes % 2 == 0:
        raise ValueError(f"need an odd node count >= 21, got {nodes}")
    if bm.alpha > 4:
        raise ValueError(
            f"tensor-grid quadrature is guarded to alpha <= 4, got alpha={bm.alpha}"
        )
    return nodes


def _grid_slabs(bm, eta2, nodes):
    """Yield (E, W) blocks covering the alpha-dimensional Simpson grid over
    [-6 eta, 1 + 6 eta]^alpha: E has rows exp(-||z - b_j||^2/(2 eta^2)) per
    grid point and codeword, W the matching tensor-product weights."""
    eta = np.sqrt(eta2)
    z, w = simpson_nodes_weights(-6.0 * eta, 1.0 + 6.0 * eta, nodes)
    table = np.stack(
        [np.exp(-0.5 * z**2 / eta2), np.exp(-0.5 * (z - 1.0) ** 2 / eta2)], axis=1
    )
    bits = bm.codebook.astype(int)
    factors = [table[:, bits[:, a]] for a in range(bm.alpha)]
    if bm.alpha == 1:
        yield factors[0], w
        return
    e_inner = factors[-1]
    w_inner = w
    for a in range(bm.alpha - 2, 0, -1):
        e_inner = (factors[a][:, None, :] * e_inner[None, :, :]).reshape(-1, bm.m)
        w_inner = (w[:, None] * w_inner[None, :]).ravel()
    for i0 in range(nodes):
        yield factors[0][i0][None, :] * e_inner, w[i0] * w_inner


def _phi_gamma_simpson(p_group, bm, eta2, nodes):
    """Phi_kji and Gamma_j for one eta2 value by tensor-grid Simpson."""
    m = bm.m
    kg = p_group.shape[0]
    phi = np.zeros((kg, m, m))
    gamma = np.zeros(m)
    for e_blk, w_blk in _grid_slabs(bm, eta2, nodes):
        gamma += e_blk.T @ w_blk
        x = e_blk @ p_group.T
        y = np.divide(
            w_blk[:, None], x, out=np.zeros_like(x), where=x > 0
        )
        for idx in range(kg):
            phi[idx] += (e_blk * y[:, idx][:, None]).T @ e_blk
    norm = (2.0 * np.pi * eta2) ** (-bm.alpha / 2.0)
    return phi * norm, gamma * norm


def fisher_quantized_simpson(net, model, params, quantizer, bm, eta2, nodes=81):
    """Quantized-channel Fisher information by alpha-dimensional composite
    Simpson quadrature (the accuracy oracle for the series route):

    I = sum_k [ sum_{j,i} dp_kj dp_ki Phi_kji - sum_j d2p_kj Gamma_j ].
    """
    nodes = _check_simpson_args(bm, nodes)
    if quantizer.m != bm.m:
        raise ValueError("quantizer and bit mapper disagree on the level count")
    if net.sigma2 is None:
        raise ValueError("network has no calibrated sigma2")
    eta2v = np.broadcast_to(np.asarray(eta2, dtype=float), (net.k,))
    g = model.value(params, net.x, net.y)
    grads = model.gradient(params, net.x, net.y)
    hesses = model.hessian(params, net.x, net.y)
    sigma = np.sqrt(net.sigma2)
    p, dp, d2p = _p_derivatives_batch(quantizer, g, grads, hesses, sigma)

    n_params = dp.shape[2]
    entries = np.zeros((n_params, n_params))
    for eta_val in np.unique(eta2v):
        k_idx = np.flatnonzero(eta2v == eta_val)
        phi, gamma = _phi_gamma_simpson(p[k_idx], bm, float(eta_val), nodes)
        term2 = np.einsum("kjs,kji,kit->st", dp[k_idx], phi, dp[k_idx], optimize=True)
        term1 = np.einsum("kjst,j->st", d2p[k_idx], gamma)
        entries += term2 - term1
    return FisherMatrix(0.5 * (entries + entries.T), f"quadrature(nodes={nodes})")


def gamma_quadrature(quantizer, bm, g, sigma, eta2, nodes=81):
    """Evaluate, by the same tensor-grid Simpson rule, the weights

        Gamma_j = Int e_j(z) f_Z(z) / x(z) dz

    with the mixture pdf f_Z = (2 pi eta^2)^(-alpha/2) x(z) left unsimplified
    in the integrand.  Mathematically Gamma_j = 1 for every level; the
    returned M-vector measures pure quadrature error.
    """
    nodes = _check_simpson_args(bm, nodes)
    if quantizer.m != bm.m:
        raise ValueError("quantizer and bit mapper disagree on the level count")
    p = level_probabilities(quantizer, float(g), float(sigma))
    eta2 = float(eta2)
    norm = (2.0 * np.pi * eta2) ** (-bm.alpha / 2.0)
    gamma = np.zeros(bm.m)
    for e_blk, w_blk in _grid_slabs(bm, eta2, nodes):
        x = e_blk @ p
        f_pdf = norm * x
        ratio = np.divide(f_pdf, x, out=np.zeros_like(x), where=x > 0)
        gamma += e_blk.T @ (w_blk * ratio)
    return gamma
