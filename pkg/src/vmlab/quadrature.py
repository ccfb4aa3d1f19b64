"""Sphere rules, momentum-ball integrals and retarded light-cone operators.

Angular integrals with a near-singular factor ``(1 + a.w)^(-k)`` are done on
a rule whose polar axis is aligned with ``a`` and whose polar nodes are
Gauss-Legendre in ``ln(1 + a.w)``; this keeps full accuracy as ``|a| -> 1``.
Momentum balls use the radial variable ``z = asinh(r)`` (so ``tanh z`` is the
reduced speed) split into Gauss-Legendre panels.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

FOUR_PI = 4.0 * np.pi


class HorizonError(ValueError):
    """Requested look-back time exceeds the available history."""


def orthonormal_frame(axis: np.ndarray):
    """Return ``(e1, e2, e3)`` with ``e3`` parallel to ``axis``."""
    e3 = np.asarray(axis, dtype=float)
    n = np.linalg.norm(e3)
    if n == 0:
        return np.eye(3)[0], np.eye(3)[1], np.eye(3)[2]
    e3 = e3 / n
    trial = np.eye(3)[np.argmin(np.abs(e3))]
    e1 = trial - np.dot(trial, e3) * e3
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(e3, e1)
    return e1, e2, e3


def _assemble(mu, wmu, n_phi, frame):
    """Product nodes from polar cosines ``mu`` (any leading shape) and uniform phi."""
    phi = (np.arange(n_phi) + 0.5) * (2 * np.pi / n_phi)
    e1, e2, e3 = frame
    sin_t = np.sqrt(np.clip(1.0 - mu**2, 0.0, None))
    c = np.cos(phi)
    s = np.sin(phi)
    nodes = (mu[..., :, None, None] * e3
             + (sin_t[..., :, None] * c)[..., None] * e1
             + (sin_t[..., :, None] * s)[..., None] * e2)
    nodes = nodes.reshape(mu.shape[:-1] + (-1, 3))
    nodes /= np.linalg.norm(nodes, axis=-1, keepdims=True)
    weights = np.repeat(wmu * (2 * np.pi / n_phi), n_phi, axis=-1)
    return nodes, weights


def _log_graded_mu(a_norm: np.ndarray, n_theta: int, u_max: Optional[float]):
    """Polar nodes graded in ``ln u`` with ``u = 1 + |a| mu``; ``a_norm > 0``."""
    x, wx = np.polynomial.legendre.leggauss(n_theta)
    a = np.asarray(a_norm, dtype=float)[..., None]
    z0 = np.log1p(-a)
    z1 = np.log1p(a)
    if u_max is not None:
        z1 = np.minimum(z1, np.log(max(u_max, 1e-300)))
    half = np.clip(z1 - z0, 0.0, None) / 2
    z = z0 + half * (x + 1)
    mu = np.expm1(z) / a
    wmu = half * wx * np.exp(z) / a
    return np.clip(mu, -1.0, 1.0), wmu


@dataclass
class SphereRule:
    """Nodes ``w_i`` on the unit sphere with positive weights summing to 4 pi."""

    nodes: np.ndarray
    weights: np.ndarray
    degree: Optional[int] = None

    def __len__(self) -> int:
        return len(self.weights)

    @classmethod
    def gauss_product(cls, n_theta: int = 64, n_phi: int = 128, axis=(0.0, 0.0, 1.0)) -> "SphereRule":
        """Gauss-Legendre in cos(theta) times the uniform rule in phi."""
        mu, wmu = np.polynomial.legendre.leggauss(n_theta)
        nodes, weights = _assemble(mu, wmu, n_phi, orthonormal_frame(np.asarray(axis, float)))
        return cls(nodes, weights, degree=min(2 * n_theta - 1, n_phi - 1))

    @classmethod
    def adapted(cls, a, n_theta: int = 64, n_phi: int = 64, u_max: Optional[float] = None) -> "SphereRule":
        """Rule for integrands singular like powers of ``1 + a.w`` (``|a| < 1``).

        With ``u_max`` the rule covers only the cap ``{1 + a.w <= u_max}``.
        """
        a = np.asarray(a, dtype=float)
        a_norm = float(np.linalg.norm(a))
        if a_norm >= 1.0:
            raise ValueError("adapted rule needs |a| < 1")
        if a_norm < 1e-12:
            if u_max is not None and u_max < 1.0:
                return cls(np.zeros((0, 3)), np.zeros(0))
            return cls.gauss_product(n_theta, n_phi)
        mu, wmu = _log_graded_mu(np.array(a_norm), n_theta, u_max)
        nodes, weights = _assemble(mu, wmu, n_phi, orthonormal_frame(a))
        keep = weights > 0
        return cls(nodes[keep], weights[keep])


def integrate_sphere(g: Callable[[np.ndarray], np.ndarray], rule: SphereRule):
    """``sum_i weight_i g(node_i)``; ``g`` maps ``(n, 3)`` nodes to ``(n,)`` or ``(n, k)``."""
    vals = np.asarray(g(rule.nodes), dtype=float)
    bad = ~np.isfinite(vals.reshape(len(rule), -1)).all(axis=1)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(f"integrand not finite at sphere node {i}: omega={rule.nodes[i].tolist()}")
    return np.tensordot(rule.weights, vals, axes=(0, 0))


def lemma_c_closed_form(theta: float, speed: float) -> float:
    """Exact value of the sphere integral of ``(1 + v.w)^(-theta)``."""
    if speed == 0:
        return FOUR_PI
    if theta == 1.0:
        return 2 * np.pi * np.log((1 + speed) / (1 - speed)) / speed
    return 2 * np.pi / ((1 - theta) * speed) * ((1 + speed) ** (1 - theta) - (1 - speed) ** (1 - theta))


@dataclass
class RadialSigmaGrid:
    """Radial quadrature for ``int_0^R r^2 dr`` expressed in ``sigma = r / sqrt(1 + r^2)``.

    ``weights`` already include the measure ``sigma^2 (1 - sigma^2)^(-5/2) dsigma``.
    """

    sigma_nodes: np.ndarray
    weights: np.ndarray
    R: float
    r_nodes: np.ndarray

    @property
    def sigma_max(self) -> float:
        return self.R / np.sqrt(1.0 + self.R**2)

    @classmethod
    def build(cls, R: float, n_panels: int = 16, n_per_panel: int = 16) -> "RadialSigmaGrid":
        if R < 0:
            raise ValueError("ball radius must be non-negative")
        x, wx = np.polynomial.legendre.leggauss(n_per_panel)
        edges = np.linspace(0.0, np.arcsinh(R), n_panels + 1)
        half = np.diff(edges)[:, None] / 2
        z = (edges[:-1, None] + half * (x + 1)).ravel()
        wz = (half * wx).ravel()
        r = np.sinh(z)
        sigma = np.tanh(z)
        weights = wz * r**2 * np.cosh(z)
        return cls(sigma, weights, float(R), r)


def _ball_nodes(grid: RadialSigmaGrid, n_theta: int, n_phi: int, axis=None,
                cap: Optional[float] = None):
    if axis is None:
        rule = SphereRule.gauss_product(n_theta, n_phi)
        p = grid.r_nodes[:, None, None] * rule.nodes[None, :, :]
        w = grid.weights[:, None] * rule.weights[None, :]
        return p.reshape(-1, 3), w.ravel()
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    mu, wmu = _log_graded_mu(grid.sigma_nodes, n_theta, cap)
    dirs, wang = _assemble(mu, wmu, n_phi, orthonormal_frame(axis))
    p = grid.r_nodes[:, None, None] * dirs
    w = grid.weights[:, None] * wang
    return p.reshape(-1, 3), w.ravel()


def momentum_ball_integral(g: Callable[[np.ndarray], np.ndarray], R: float,
                           grid: Optional[RadialSigmaGrid] = None, rule: Optional[SphereRule] = None,
                           axis=None, cap: Optional[float] = None,
                           n_theta: int = 48, n_phi: int = 48):
    """``int_{|p| <= R} g(p) dp``.

    ``axis`` marks a direction ``w0`` in which ``g`` is near-singular through
    ``1 + v.w0``; the angular rule is then graded per radius (the speed
    ``|v| = sigma`` sets the grading). ``cap`` restricts to ``1 + v.w0 <= cap``.
    A supplied ``rule`` is used as-is for every radius (no grading).
    """
    if R < 0:
        raise ValueError("ball radius must be non-negative")
    if R == 0:
        return 0.0
    grid = grid if grid is not None else RadialSigmaGrid.build(R)
    if rule is not None:
        p = (grid.r_nodes[:, None, None] * rule.nodes[None]).reshape(-1, 3)
        w = (grid.weights[:, None] * rule.weights[None]).ravel()
    else:
        if cap is not None and axis is None:
            raise ValueError("cap requires an axis")
        p, w = _ball_nodes(grid, n_theta, n_phi, axis, cap)
    vals = np.asarray(g(p), dtype=float)
    bad = ~np.isfinite(vals.reshape(len(w), -1)).all(axis=1)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(f"integrand singular at momentum node p={p[i].tolist()}")
    return np.tensordot(w, vals, axes=(0, 0))


def simpson_weights(n: int, ds: float) -> np.ndarray:
    """Composite weights on ``n + 1`` equispaced points; exact for cubics when ``n >= 2``."""
    if n < 1:
        return np.zeros(n + 1)
    if n == 1:
        return np.array([0.5, 0.5]) * ds
    w = np.zeros(n + 1)
    m = n if n % 2 == 0 else n - 3
    if m > 0:
        w[0:m + 1:2] += 2.0
        w[1:m:2] += 4.0
        w[0] -= 1.0
        w[m] -= 1.0
        w[: m + 1] *= ds / 3
    if n % 2 == 1:
        w[m:m + 4] += np.array([1.0, 3.0, 3.0, 1.0]) * (3 * ds / 8)
    return w


HistoryFn = Callable[[float, np.ndarray], np.ndarray]


@dataclass
class LightConeSampler:
    """Retarded shells ``{|y| = s}`` for ``s`` in ``[0, t]`` at the history spacing.

    ``shell_rule`` may be a fixed :class:`SphereRule` or a callable mapping the
    shell radius to a rule.
    """

    time_step: float
    shell_rule: Union[SphereRule, Callable[[float], SphereRule]]
    horizon: float = np.inf

    def rule_for(self, s: float) -> SphereRule:
        return self.shell_rule(s) if callable(self.shell_rule) else self.shell_rule

    def shells(self, t: float):
        if t < 0:
            raise ValueError("t must be non-negative")
        if t > self.horizon * (1 + 1e-12) + 1e-12:
            raise HorizonError(f"look-back time {t:.6g} exceeds history horizon {self.horizon:.6g}")
        if t == 0:
            return np.zeros(1), np.zeros(1)
        ratio = t / self.time_step
        n = int(round(ratio)) if abs(ratio - round(ratio)) < 1e-9 else int(np.ceil(ratio))
        n = max(n, 1)
        s = np.linspace(0.0, t, n + 1)
        return s, simpson_weights(n, t / n)


def _cone_integral(h: HistoryFn, t: float, x, sampler: LightConeSampler, radial_power: int):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = x.reshape(-1, 3)
    s_nodes, s_weights = sampler.shells(t)
    out = None
    for s, ws in zip(s_nodes, s_weights):
        if ws == 0 or (radial_power > 0 and s == 0):
            continue
        rule = sampler.rule_for(s)
        pts = xs[:, None, :] + s * rule.nodes[None, :, :]
        vals = np.asarray(h(t - s, pts.reshape(-1, 3)), dtype=float)
        vals = vals.reshape((len(xs), len(rule)) + vals.shape[1:])
        shell_mean = np.tensordot(vals, rule.weights, axes=([1], [0])) if vals.ndim == 2 else \
            np.einsum("pn...,n->p...", vals, rule.weights)
        term = ws * s**radial_power * shell_mean / FOUR_PI
        out = term if out is None else out + term
    if out is None:
        out = np.zeros(len(xs))
    return out[0] if single else out


def box_inverse(h_history: HistoryFn, t: float, x, sampler: LightConeSampler):
    """Retarded solution of the wave equation: kernel ``1 / (4 pi |y|)`` over ``|y| <= t``."""
    return _cone_integral(h_history, t, x, sampler, radial_power=1)


def w_operator(h_history: HistoryFn, t: float, x, sampler: LightConeSampler):
    """Light-cone average with kernel ``1 / (4 pi |y|^2)``: ``int_0^t`` of shell means."""
    return _cone_integral(h_history, t, x, sampler, radial_power=0)
