"""
Vectorized versions of the measures for a batch X (N x d) against a proxy
matrix W (d x K), each paired with its reverse-mode derivative.
"""
from dataclasses import dataclass

import numpy as np

from numkit.linalg import EPS, normalize_columns, normalize_rows

# sin(theta) floor in d cos(theta + m) / d cos(theta)
SIN_FLOOR = 1e-7


@dataclass(frozen=True)
class AngularCache:
    x_unit: np.ndarray
    x_norm: np.ndarray
    w_unit: np.ndarray
    w_norm: np.ndarray
    cos: np.ndarray


def cos_theta_matrix(X, W):
    """N x K cosines between samples and proxy columns, clamped to [-1, 1]."""
    x_unit, x_norm = normalize_rows(X)
    w_unit, w_norm = normalize_columns(W)
    cos = np.clip(x_unit @ w_unit, -1.0, 1.0)
    cos[x_norm < EPS, :] = 0.0
    return cos, AngularCache(x_unit, x_norm, w_unit, w_norm, cos)


def cos_theta_matrix_backward(G, cache: AngularCache):
    """Pull an upstream N x K gradient on the cosines back to (dX, dW)."""
    cos = cache.cos
    safe_x = np.maximum(cache.x_norm, EPS)
    safe_w = np.maximum(cache.w_norm, EPS)
    dX = (G @ cache.w_unit.T - np.sum(G * cos, axis=1)[:, None] * cache.x_unit) / safe_x[:, None]
    dX[cache.x_norm < EPS, :] = 0.0
    dW = (cache.x_unit.T @ G - cache.w_unit * np.sum(G * cos, axis=0)[None, :]) / safe_w[None, :]
    return dX, dW


def cos_margin(cos, margin):
    """cos(theta + m) = cos(theta) cos(m) - sin(theta) sin(m)."""
    sin = np.sqrt(np.maximum(0.0, 1.0 - cos * cos))
    return cos * np.cos(margin) - sin * np.sin(margin)


def cos_margin_derivative(cos, margin):
    sin = np.maximum(np.sqrt(np.maximum(0.0, 1.0 - cos * cos)), SIN_FLOOR)
    return np.cos(margin) + (cos / sin) * np.sin(margin)


def scaled_proxies(W, radii):
    w_unit, w_norm = normalize_columns(W)
    return w_unit * radii[None, :], (w_unit, w_norm)


def scaled_proxies_backward(gWR, radii, unit_cache):
    """Gradient through omega_r = r * w / ||w|| back onto the raw columns."""
    w_unit, w_norm = unit_cache
    projected = gWR - w_unit * np.sum(w_unit * gWR, axis=0)[None, :]
    return radii[None, :] * projected / np.maximum(w_norm, EPS)[None, :]


def delta_matrix(X, WR):
    """N x K squared distances ||x_i - omega_r_k||^2 and the difference tensor."""
    diff = X[:, None, :] - WR.T[None, :, :]
    return np.sum(diff * diff, axis=2), diff


def delta_matrix_backward(G, diff):
    dX = 2.0 * np.einsum("ik,ikd->id", G, diff)
    dWR = -2.0 * np.einsum("ik,ikd->dk", G, diff)
    return dX, dWR


@dataclass(frozen=True)
class PhiCache:
    r_unit: np.ndarray
    r_norm: np.ndarray
    u_unit: np.ndarray
    u_norm: np.ndarray
    cos: np.ndarray


def cos_phi_rows(X, WR_rows):
    """
    Row-wise cos(phi) between R = x - omega_r and -omega_r, where WR_rows holds
    each sample's own scaled proxy (N x d). Rows with ||R|| < eps give 1.
    """
    R = X - WR_rows
    r_unit, r_norm = normalize_rows(R)
    u_unit, u_norm = normalize_rows(-WR_rows)
    cos = np.clip(np.sum(r_unit * u_unit, axis=1), -1.0, 1.0)
    coincident = r_norm < EPS
    cos[coincident] = 1.0
    return cos, PhiCache(r_unit, r_norm, u_unit, u_norm, cos)


def cos_phi_rows_backward(g, cache: PhiCache):
    """Return (dX, dWR_rows) for an upstream gradient g of length N."""
    cos = cache.cos[:, None]
    dR = g[:, None] * (cache.u_unit - cos * cache.r_unit) / np.maximum(cache.r_norm, EPS)[:, None]
    dU = g[:, None] * (cache.r_unit - cos * cache.u_unit) / np.maximum(cache.u_norm, EPS)[:, None]
    coincident = cache.r_norm < EPS
    dR[coincident, :] = 0.0
    dU[coincident, :] = 0.0
    return dR, -dR - dU
