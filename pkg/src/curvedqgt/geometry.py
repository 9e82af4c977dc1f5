"""Curved-space geometric objects on parameter space.

Every quantity here is assembled from curved brackets

    <A|B>       = integral sqrt(g) conj(A) B,
    <A|s|B>     = integral sqrt(g) conj(A) s B,

with the sqrt(g) factor split symmetrically between bra and ket.  The
bracket family entering the tensors is

    A[r,k] = <d_r psi | d_k psi>        c[r] = <psi | d_r psi>
    B[r,k] = <psi | sigma_r | d_k psi>  s[r] = <sigma_r>
    S[r,k] = <sigma_r sigma_k>

where sigma_r = -d ln det g / d lambda_r.  The quantum geometric tensor is
assembled from its expanded bracket formula (each bracket one quadrature,
sigma factors kept inside the integrand since they may depend on x); the
projector form <d_r(g^(1/4)psi)| P |d_k(g^(1/4)psi)> is retained as an
independent test oracle.  Conventions:

    qmt              = Re(qgt)                  (symmetric)
    berry_curvature  = 2 Im(qgt) = d beta       (antisymmetric)
    berry_connection = -i c + (i/4) s           (real up to diagnostics)
"""

from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (
    Domain,
    EngineError,
    GeometricTensors,
    ImaginaryResidueWarning,
    MetricFamily,
    WavefunctionFamily,
    as_quantum_number,
    param_values,
)
from .diffops import FdConfig, d_log_det_g, d_psi
from .quadrature import QuadratureConfig, integrate, integrate_2d_product

__all__ = [
    "EngineConfig",
    "BracketCache",
    "GeometryEngine",
    "state_of",
    "inner_product",
    "sigma_expectation",
    "berry_connection",
    "gamma_tensor",
    "qmt",
    "berry_curvature",
    "qgt",
    "qgt_projector_oracle",
    "gauge_transform",
    "reparameterize",
    "berry_phase_loop",
    "connection_transform_report",
]


@dataclass(frozen=True)
class EngineConfig:
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)
    fd: FdConfig = field(default_factory=FdConfig)
    hermiticity_gate: float = 1e-7
    connection_residue_warn: float = 1e-6


class BracketCache:
    """Memoized curved brackets; hits return the identical stored value."""

    def __init__(self):
        self._store = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get_or_compute(self, key, compute: Callable):
        with self._lock:
            if key in self._store:
                self.hits += 1
                return self._store[key]
        value = compute()
        with self._lock:
            self._store.setdefault(key, value)
            self.misses += 1
            return self._store[key]


def state_of(psi: WavefunctionFamily, n) -> Callable:
    """Bind a quantum number: returns evaluator (lam, *axes) -> amplitudes."""
    n = as_quantum_number(n)

    def ev(lam, *axes):
        return psi.eval(param_values(lam), n, *axes)

    return ev


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------

class GeometryEngine:
    """Assembles geometric tensors for one (state family, metric, domain).

    Pure given its inputs; the bracket cache is per-engine and guarded, so
    an engine may be shared across threads.
    """

    def __init__(self, psi: WavefunctionFamily, metric: MetricFamily,
                 domain: Domain, cfg: Optional[EngineConfig] = None,
                 in_domain: Optional[Callable] = None,
                 cache: Optional[BracketCache] = None):
        if psi.dim != metric.dim or domain.dim != metric.dim:
            raise EngineError("psi, metric, and domain disagree on dimension")
        self.psi = psi
        self.metric = metric
        self.domain = domain
        self.cfg = cfg or EngineConfig()
        self.in_domain = in_domain
        self.cache = cache or BracketCache()

    # -- integrand plumbing -------------------------------------------------

    def _integrate(self, f):
        if self.domain.dim == 1:
            return integrate(f, self.domain, self.cfg.quad)
        return integrate_2d_product(
            f, self.domain.axes[0], self.domain.axes[1], self.cfg.quad
        )

    def _weight(self, lamv):
        metric = self.metric
        return lambda *axes: metric.sqrt_det(lamv, *axes)

    def _state(self, lamv, n):
        psi = self.psi
        return lambda *axes: np.asarray(psi.eval(lamv, n, *axes))

    def _dstate(self, lamv, n, rho):
        return lambda *axes: np.asarray(
            d_psi(self.psi, n, lamv, rho, self.cfg.fd, *axes,
                  in_domain=self.in_domain)
        )

    def _sigma(self, lamv, rho):
        return lambda *axes: -np.asarray(
            d_log_det_g(self.metric, lamv, rho, self.cfg.fd, *axes,
                        in_domain=self.in_domain)
        )

    def _key(self, name, lamv, n, extra=()):
        return (name, lamv.tobytes(), tuple(n), tuple(extra),
                self.cfg.quad.rel_tol, self.cfg.quad.abs_tol,
                self.cfg.fd.base_step, self.cfg.fd.scheme)

    def bracket(self, name, lamv, n, bra=None, ket=None, sigmas=(), extra=()):
        """One curved bracket with the given bra/ket and sigma insertions."""
        w = self._weight(lamv)

        def compute():
            def f(*axes):
                val = w(*axes).astype(complex)
                if bra is not None:
                    val = val * np.conj(bra(*axes))
                for s in sigmas:
                    val = val * s(*axes)
                if ket is not None:
                    val = val * ket(*axes)
                return val

            return self._integrate(f)

        return self.cache.get_or_compute(
            self._key(name, lamv, n, extra), compute
        )

    # -- bracket families ---------------------------------------------------

    def bracket_set(self, lam, n):
        """All brackets entering the tensors at one parameter point.

        Every entry is computed independently (no Hermitian shortcut), so
        the Hermiticity residue of the assembled tensor is a genuine
        measure of quadrature and differentiation imbalance.
        """
        lamv = param_values(lam)
        n = as_quantum_number(n)
        m = lamv.size
        psi0 = self._state(lamv, n)
        dpsi = [self._dstate(lamv, n, r) for r in range(m)]
        sig = [self._sigma(lamv, r) for r in range(m)]

        A = np.zeros((m, m), dtype=complex)
        B = np.zeros((m, m), dtype=complex)
        S = np.zeros((m, m))
        c = np.zeros(m, dtype=complex)
        s = np.zeros(m)
        err = 0.0
        for r in range(m):
            val, e = self.bracket("c", lamv, n, bra=psi0, ket=dpsi[r], extra=(r,))
            c[r] = val
            err += e
            val, e = self.bracket("s", lamv, n, bra=psi0, ket=psi0,
                                  sigmas=(sig[r],), extra=(r,))
            s[r] = val.real
            err += e
            for k in range(m):
                val, e = self.bracket("A", lamv, n, bra=dpsi[r], ket=dpsi[k],
                                      extra=(r, k))
                A[r, k] = val
                err += e
                val, e = self.bracket("B", lamv, n, bra=psi0, ket=dpsi[k],
                                      sigmas=(sig[r],), extra=(r, k))
                B[r, k] = val
                err += e
            for k in range(r, m):
                val, e = self.bracket("S", lamv, n, bra=psi0, ket=psi0,
                                      sigmas=(sig[r], sig[k]), extra=(r, k))
                S[r, k] = S[k, r] = val.real
                err += e
        steps = np.array([self.cfg.fd.step(v) for v in lamv])
        return {"A": A, "B": B, "S": S, "c": c, "s": s,
                "err": err, "fd_steps": steps}

    # -- assembled quantities ------------------------------------------------

    def norm(self, lam, n):
        lamv = param_values(lam)
        n = as_quantum_number(n)
        psi0 = self._state(lamv, n)
        val, e = self.bracket("norm", lamv, n, bra=psi0, ket=psi0)
        return val.real, e

    def sigma_expectation(self, lam, n, rho):
        lamv = param_values(lam)
        n = as_quantum_number(n)
        psi0 = self._state(lamv, n)
        val, _ = self.bracket("s", lamv, n, bra=psi0, ket=psi0,
                              sigmas=(self._sigma(lamv, rho),), extra=(rho,))
        return float(val.real)

    def berry_connection(self, lam, n):
        br = self.bracket_set(lam, n)
        raw = -1j * br["c"] + 0.25j * br["s"]
        residue = float(np.max(np.abs(raw.imag)))
        if residue > self.cfg.connection_residue_warn:
            warnings.warn(
                f"Berry connection imaginary residue {residue:.3e}; check "
                "normalization and differentiation steps",
                ImaginaryResidueWarning,
                stacklevel=2,
            )
        return raw.real

    def gamma(self, lam, n):
        br = self.bracket_set(lam, n)
        A, B, S = br["A"], br["B"], br["S"]
        out = 0.5 * (A + A.T) - 0.125 * (B + B.T + np.conj(B + B.T)) + S / 16.0
        return out.real

    def qmt(self, lam, n):
        br = self.bracket_set(lam, n)
        return self._qmt_from(br)

    @staticmethod
    def _qmt_from(br):
        A, B, S, c, s = br["A"], br["B"], br["S"], br["c"], br["s"]
        cbar = np.conj(c)
        out = 0.5 * (A + A.T)
        out -= 0.5 * (np.outer(cbar, c) + np.outer(c, cbar))
        out -= 0.125 * (B + B.T)
        out -= 0.125 * np.conj(B + B.T)
        out += 0.125 * (np.outer(s, c) + np.outer(c, s))
        out += 0.125 * (np.outer(s, cbar) + np.outer(cbar, s))
        out += (S - np.outer(s, s)) / 16.0
        return out.real

    def berry_curvature(self, lam, n):
        br = self.bracket_set(lam, n)
        return self._curvature_from(br)

    @staticmethod
    def _curvature_from(br):
        A, B = br["A"], br["B"]
        out = -1j * (A - A.T) + 0.25j * (B - B.T) + 0.25j * np.conj(B.T - B)
        return out.real

    def qgt(self, lam, n) -> GeometricTensors:
        br = self.bracket_set(lam, n)
        A, B, S, c, s = br["A"], br["B"], br["S"], br["c"], br["s"]
        cbar = np.conj(c)
        g = (
            A
            - np.outer(cbar, c)
            - 0.25 * B
            - 0.25 * np.conj(B.T)
            + 0.25 * np.outer(s, c)
            + 0.25 * np.outer(cbar, s)
            + (S - np.outer(s, s)) / 16.0
        )
        residue = float(np.max(np.abs(g - g.conj().T)))
        if residue > self.cfg.hermiticity_gate:
            raise EngineError(
                f"QGT Hermiticity residue {residue:.3e} exceeds "
                f"{self.cfg.hermiticity_gate:.1e}; quadrature and "
                "finite-difference accuracy are out of balance"
            )
        raw = -1j * c + 0.25j * s
        return GeometricTensors(
            qgt=g,
            qmt=self._qmt_from(br),
            berry_curvature=self._curvature_from(br),
            berry_connection=raw.real,
            quad_error=br["err"],
            fd_steps=br["fd_steps"],
        )

    def qgt_projector_oracle(self, lam, n):
        """QGT via <v_r|P|v_k> with v_r = d_r psi - sigma_r psi / 4.

        Independent quadrature route: the sigma corrections sit inside a
        single integrand per entry instead of being assembled from the
        bracket family.  Kept as a cross-check of the expanded formula.
        """
        lamv = param_values(lam)
        n = as_quantum_number(n)
        m = lamv.size
        psi0 = self._state(lamv, n)
        dpsi = [self._dstate(lamv, n, r) for r in range(m)]
        sig = [self._sigma(lamv, r) for r in range(m)]

        def v(r):
            return lambda *axes: dpsi[r](*axes) - 0.25 * sig[r](*axes) * psi0(*axes)

        g = np.zeros((m, m), dtype=complex)
        vp = np.zeros(m, dtype=complex)
        for r in range(m):
            val, _ = self.bracket("proj_vp", lamv, n, bra=v(r), ket=psi0, extra=(r,))
            vp[r] = val
        for r in range(m):
            for k in range(m):
                val, _ = self.bracket("proj_vv", lamv, n, bra=v(r), ket=v(k),
                                      extra=(r, k))
                g[r, k] = val - vp[r] * np.conj(vp[k])
        return g


# ---------------------------------------------------------------------------
# Functional surface
# ---------------------------------------------------------------------------

def inner_product(phi_state: Callable, psi_state: Callable,
                  metric: MetricFamily, domain: Domain, lam,
                  cfg: Optional[EngineConfig] = None):
    """<phi|psi> = integral sqrt(g) conj(phi) psi; returns (value, error)."""
    cfg = cfg or EngineConfig()
    lamv = param_values(lam)

    def f(*axes):
        w = metric.sqrt_det(lamv, *axes)
        return w * np.conj(np.asarray(phi_state(lamv, *axes))) \
            * np.asarray(psi_state(lamv, *axes))

    if domain.dim == 1:
        return integrate(f, domain, cfg.quad)
    return integrate_2d_product(f, domain.axes[0], domain.axes[1], cfg.quad)


def _engine(psi, metric, domain, cfg, in_domain=None) -> GeometryEngine:
    return GeometryEngine(psi, metric, domain, cfg, in_domain=in_domain)


def sigma_expectation(psi, metric, domain, lam, n, rho,
                      cfg=None, in_domain=None) -> float:
    return _engine(psi, metric, domain, cfg, in_domain).sigma_expectation(lam, n, rho)


def berry_connection(psi, metric, domain, lam, n, cfg=None, in_domain=None):
    return _engine(psi, metric, domain, cfg, in_domain).berry_connection(lam, n)


def gamma_tensor(psi, metric, domain, lam, n, cfg=None, in_domain=None):
    return _engine(psi, metric, domain, cfg, in_domain).gamma(lam, n)


def qmt(psi, metric, domain, lam, n, cfg=None, in_domain=None):
    return _engine(psi, metric, domain, cfg, in_domain).qmt(lam, n)


def berry_curvature(psi, metric, domain, lam, n, cfg=None, in_domain=None):
    return _engine(psi, metric, domain, cfg, in_domain).berry_curvature(lam, n)


def qgt(psi, metric, domain, lam, n, cfg=None, in_domain=None) -> GeometricTensors:
    return _engine(psi, metric, domain, cfg, in_domain).qgt(lam, n)


def qgt_projector_oracle(psi, metric, domain, lam, n, cfg=None, in_domain=None):
    return _engine(psi, metric, domain, cfg, in_domain).qgt_projector_oracle(lam, n)


# ---------------------------------------------------------------------------
# Family transformations
# ---------------------------------------------------------------------------

def gauge_transform(psi: WavefunctionFamily, alpha: Callable,
                    alpha_grad: Optional[Callable] = None) -> WavefunctionFamily:
    """Multiply the family by exp(i alpha(lambda)).

    The connection shifts by the gradient of alpha; metric-derived
    quantities are untouched.  Analytic parameter derivatives are adjusted
    when present, differentiating alpha by central differences if no
    gradient callable is supplied.
    """
    def grad_alpha(lamv, rho):
        if alpha_grad is not None:
            return alpha_grad(lamv, rho)
        h = 1e-6 * max(1.0, abs(lamv[rho]))
        up, dn = lamv.copy(), lamv.copy()
        up[rho] += h
        dn[rho] -= h
        return (alpha(up) - alpha(dn)) / (2.0 * h)

    def new_eval(lamv, n, *axes):
        return np.exp(1j * alpha(lamv)) * np.asarray(psi.eval(lamv, n, *axes))

    new_grad = None
    if psi.analytic_param_grad is not None:
        def new_grad(lamv, n, rho, *axes):
            phase = np.exp(1j * alpha(lamv))
            base = np.asarray(psi.analytic_param_grad(lamv, n, rho, *axes))
            state = np.asarray(psi.eval(lamv, n, *axes))
            return phase * (base + 1j * grad_alpha(lamv, rho) * state)

    return WavefunctionFamily(
        dim=psi.dim, eval=new_eval, analytic_param_grad=new_grad,
        gauge_phase=alpha,
    )


def reparameterize(psi: WavefunctionFamily, metric: MetricFamily,
                   map_fn: Callable, jacobian_fn: Callable):
    """Pull (psi, metric) back along lambda = map_fn(lambda').

    ``jacobian_fn(lam')`` returns J[a, r] = d lambda_a / d lambda'_r.
    Analytic derivatives transform by the chain rule.
    """
    def checked_jacobian(lamv):
        jac = np.asarray(jacobian_fn(lamv), dtype=float)
        if abs(np.linalg.det(jac)) < 1e-12:
            raise EngineError(f"singular reparameterization Jacobian at {lamv}")
        return jac

    def psi_eval(lamv, n, *axes):
        return psi.eval(np.asarray(map_fn(lamv), dtype=float), n, *axes)

    psi_grad = None
    if psi.analytic_param_grad is not None:
        def psi_grad(lamv, n, rho, *axes):
            jac = checked_jacobian(lamv)
            base = np.asarray(map_fn(lamv), dtype=float)
            total = 0
            for a in range(base.size):
                if jac[a, rho] != 0.0:
                    total = total + jac[a, rho] * np.asarray(
                        psi.analytic_param_grad(base, n, a, *axes)
                    )
            return total

    metric_grad = None
    if metric.analytic_log_det_grad is not None:
        def metric_grad(lamv, rho, *axes):
            jac = checked_jacobian(lamv)
            base = np.asarray(map_fn(lamv), dtype=float)
            total = 0
            for a in range(base.size):
                if jac[a, rho] != 0.0:
                    total = total + jac[a, rho] * np.asarray(
                        metric.analytic_log_det_grad(base, a, *axes)
                    )
            return total

    new_psi = WavefunctionFamily(
        dim=psi.dim, eval=psi_eval, analytic_param_grad=psi_grad,
        gauge_phase=psi.gauge_phase,
    )
    new_metric = MetricFamily(
        dim=metric.dim,
        eval=lambda lamv, *axes: metric.eval(np.asarray(map_fn(lamv), dtype=float), *axes),
        det=(None if metric.det is None else (
            lambda lamv, *axes: metric.det(np.asarray(map_fn(lamv), dtype=float), *axes)
        )),
        analytic_log_det_grad=metric_grad,
    )
    return new_psi, new_metric


def berry_phase_loop(psi, metric, domain, loop, n, cfg=None, in_domain=None,
                     segment_tol: float = 1e-7) -> float:
    """Line integral of the connection around a closed polyline.

    The loop is a sequence of parameter points; it is closed automatically
    when the last vertex differs from the first.  Each segment is
    integrated adaptively; the connection is re-evaluated from fresh
    brackets at every node.
    """
    cfg = cfg or EngineConfig()
    pts = [param_values(p) for p in loop]
    if pts[-1] is not pts[0] and not np.allclose(pts[-1], pts[0]):
        pts.append(pts[0])
    engine = GeometryEngine(psi, metric, domain, cfg, in_domain=in_domain)

    seg_cfg = QuadratureConfig(
        rel_tol=max(segment_tol, cfg.quad.rel_tol),
        abs_tol=max(segment_tol * 1e-2, cfg.quad.abs_tol),
        max_subdivisions=cfg.quad.max_subdivisions,
    )
    total = 0.0
    for start, end in zip(pts[:-1], pts[1:]):
        delta = end - start
        if not np.any(delta):
            continue

        def integrand(ts):
            ts = np.atleast_1d(ts)
            out = np.empty(ts.shape, dtype=complex)
            for i, t in enumerate(ts):
                beta = engine.berry_connection(start + t * delta, n)
                out[i] = float(beta @ delta)
            return out

        val, _ = integrate(integrand, Domain.interval(0.0, 1.0), seg_cfg)
        total += val.real
    return total


def connection_transform_report(psi, metric, domain, lam_prime, n,
                                map_fn, jacobian_fn, cfg=None, in_domain=None,
                                in_domain_prime=None) -> dict:
    """Numerical comparison of connection transformation laws.

    Computes the connection of the pulled-back family directly, the plain
    covector contraction J^T beta, and the pieces of the density-weighted
    law (Jacobian-determinant factor and the inhomogeneous term, which
    reduces to -(1/2) d ln|det J|).  No law is assumed; callers decide
    what to assert.
    """
    cfg = cfg or EngineConfig()
    lamp = param_values(lam_prime)
    base = np.asarray(map_fn(lamp), dtype=float)
    jac = np.asarray(jacobian_fn(lamp), dtype=float)

    psi2, metric2 = reparameterize(psi, metric, map_fn, jacobian_fn)
    beta_direct = GeometryEngine(
        psi2, metric2, domain, cfg, in_domain=in_domain_prime
    ).berry_connection(lamp, n)
    beta_base = GeometryEngine(
        psi, metric, domain, cfg, in_domain=in_domain
    ).berry_connection(base, n)

    det_j = float(np.linalg.det(jac))
    m = lamp.size
    dlog_det = np.zeros(m)
    for rho in range(m):
        h = 1e-5 * max(1.0, abs(lamp[rho]))
        up, dn = lamp.copy(), lamp.copy()
        up[rho] += h
        dn[rho] -= h
        dlog_det[rho] = (
            np.log(abs(np.linalg.det(np.asarray(jacobian_fn(up)))))
            - np.log(abs(np.linalg.det(np.asarray(jacobian_fn(dn)))))
        ) / (2.0 * h)

    return {
        "beta_direct": beta_direct,
        "beta_base": beta_base,
        "covector_law": jac.T @ beta_base,
        "jacobian_determinant": det_j,
        "density_modulus_factor": abs(det_j),
        "inhomogeneous_term": -0.5 * dlog_det,
        "density_law_real_part": abs(det_j) * (jac.T @ beta_base),
    }
