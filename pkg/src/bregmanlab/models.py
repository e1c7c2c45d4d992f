"""Auxiliary functions in canonical form and their three update rules.

An auxiliary function is stored as

    phi(x) = <s, x> + c + beta * d(x) + w * Psi(x).

Every piece the update rules add (a lower model, beta*d, -beta*l_d(z; .) and
S*sigma_f*xi(z, .)) is affine plus multiples of d and Psi, so the representation
is exact and each step costs O(n).
"""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class CanonicalAux:
    s: np.ndarray
    c: float
    beta: float
    w: float = 0.0

    def value(self, geom, x, psi=None):
        x = np.asarray(x, dtype=float)
        out = float(self.s @ x) + self.c
        if self.beta:
            out += self.beta * geom.d(x)
        if self.w and psi is not None:
            out += self.w * psi(x)
        return out

    def without_d(self, amount):
        """Same function minus amount * d."""
        return CanonicalAux(self.s, self.c, self.beta - amount, self.w)


def init_aux(beta_minus1, geom):
    return CanonicalAux(np.zeros(geom.dim), 0.0, float(beta_minus1), 0.0)


def _bregman_shift(geom, z, kappa):
    """Affine part of -kappa * l_d(z; .): returns (ds, dc)."""
    gd = geom.grad_d(z)
    return -kappa * gd, kappa * (float(gd @ z) - geom.d(z))


def emd_step(aux, min_value, z, model, lam, beta_k, beta_next, S_k, sigma_f, geom):
    """Extended mirror-descent update.

    phi_{k+1} = phi_k(z_k) + lam*m + beta_{k+1} d - beta_k l_d(z_k; .) + S_k sigma_f xi(z_k, .)

    ``aux`` is accepted for symmetry with :func:`da_step`; only its minimum value
    ``min_value`` = phi_k(z_k) enters the new function.
    """
    kappa = beta_k + S_k * sigma_f
    ds, dc = _bregman_shift(geom, np.asarray(z, dtype=float), kappa)
    s = lam * model.s + ds
    c = float(min_value) + lam * model.c + dc
    beta = lam * model.sigma_coeff + beta_next + S_k * sigma_f
    return CanonicalAux(s, c, beta, lam * model.psi_coeff)


def da_step(aux, model, lam, beta_k, beta_next):
    """Dual-averaging update: phi_{k+1} = phi_k + lam*m + (beta_{k+1} - beta_k) d."""
    return CanonicalAux(aux.s + lam * model.s, aux.c + lam * model.c,
                        aux.beta + lam * model.sigma_coeff + (beta_next - beta_k),
                        aux.w + lam * model.psi_coeff)


def hybrid_step(aux, min_value, z, model, lam, beta_k, beta_next, S_k, sigma_f, geom):
    """psi_{k+1}: the extended mirror-descent formula built on the dual-averaging phi_k."""
    return emd_step(aux, min_value, z, model, lam, beta_k, beta_next, S_k, sigma_f, geom)


@dataclass
class PropertyReport:
    worst: dict
    ok: bool
    tol: float

    def __getitem__(self, key):
        return self.worst[key]


def check_properties(records, geom, sigma_f, probes, psi=None, tol=1e-9):
    """Evaluate the construction, upper-bound, dominance and Bregman-floor properties on probe points.

    ``records`` is a sequence of per-iteration entries (k = 0, 1, ...) carrying
    lam, beta_prev, beta, S_prev, S, x, model, phi, psi_aux, z, w, min_phi and
    min_psi. The entry for k = 0 uses z_{-1} = x0 and phi_{-1} = beta_{-1} d.

    Residuals are (rhs - lhs) / scale with scale = max(1, |values|); a value
    below -tol is a violation.
    """
    P = np.atleast_2d(np.asarray(probes, dtype=float))
    x0 = geom.center
    d_p = np.array([geom.d(p) for p in P])
    psi_p = np.array([psi(p) for p in P]) if psi is not None else np.zeros(len(P))
    model_sum = np.zeros(len(P))
    worst = {"build": np.inf, "upper": np.inf, "dominance": np.inf, "floor": np.inf}

    def aux_at(aux):
        return P @ aux.s + aux.c + aux.beta * d_p + aux.w * psi_p

    def lin_d(z):
        gd = geom.grad_d(z)
        return geom.d(z) + (P - z) @ gd

    def note(key, lhs, rhs):
        scale = np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
        worst[key] = min(worst[key], float(np.min((rhs - lhs) / scale)))

    prev_z, prev_min = x0, 0.0
    for rec in records:
        m_p = P @ rec.model.s + rec.model.c + rec.model.sigma_coeff * d_p + rec.model.psi_coeff * psi_p
        model_sum += rec.lam * m_p
        psi_aux = rec.psi_aux if rec.psi_aux is not None else rec.phi
        ld_prev = lin_d(prev_z)
        # build: psi_{k}(x) >= phi_{k-1}(z_{k-1}) + lam m + beta_k d - beta_{k-1} l_d + S_{k-1} sigma_f xi
        rhs_build = (prev_min + rec.lam * m_p + rec.beta * d_p - rec.beta_prev * ld_prev
                     + rec.S_prev * sigma_f * (d_p - ld_prev))
        note("build", rhs_build, aux_at(psi_aux))
        # upper: psi_k(w_k) <= sum lam_i m_i + beta_k l_d(z_k; x) - S_k sigma_f xi(z_k, x)
        ld = lin_d(rec.z)
        bound = model_sum + rec.beta * ld - rec.S * sigma_f * (d_p - ld)
        note("upper", np.full(len(P), rec.min_psi), bound)
        # Bregman lower bound around the minimizer, for both functions
        kappa = rec.beta + rec.S * sigma_f
        phi_p = aux_at(rec.phi)
        note("floor", rec.min_phi + kappa * (d_p - ld), phi_p)
        if rec.psi_aux is not None:
            ldw = lin_d(rec.w)
            note("floor", rec.min_psi + kappa * (d_p - ldw), aux_at(rec.psi_aux))
            note("dominance", aux_at(rec.psi_aux), phi_p)
        prev_z, prev_min = rec.z, rec.min_phi
    worst = {k: v for k, v in worst.items() if v != np.inf}
    return PropertyReport(worst=worst, ok=all(v >= -tol for v in worst.values()), tol=tol)
