"""Joint log posterior of the fusion models and its gradient.

The posterior is a sum of

(a) survey counts inside the selected units, ``log lambda = X beta + w1``;
(b) unit selections, ``logit phi_i = Z_i gamma + zeta * ala_i(w1)`` where
    ``ala_i`` is the areal logit-average of ``w1`` over unit ``i``;
(c) citizen-science counts with ``log lambda = X beta + w1 + log tau + log psi
    + log delta`` (each factor optional);
(d) the auxiliary CS-activity pattern with ``log lambda = Z alpha + w2``;
(e) Gauss-Markov densities of the fields;
(f) priors, with PC priors on ``(log rho, log sigma)`` including Jacobians.

Non-field parameters and the fields are packed into one flat vector whose
layout depends on the model (:class:`Layout`); hyperparameters live in a
separate vector ``h = (log rho1, log sigma1[, log rho2, log sigma2])``.
"""
from __future__ import annotations

from dataclasses import dataclass, fields as dc_fields

import numpy as np
from scipy.special import expit, log_expit

from ..field import LOG2PI, MaternParams, build_precision
from .data import FitData
from .models import ModelSpec, PriorSpec


class PosteriorError(ArithmeticError):
    """The log posterior is not finite; the message names the offending term."""


@dataclass
class ParameterState:
    """Values of every inferred quantity; blocks a model does not use stay ``None``.

    ``kappa_logit`` holds observer reporting propensities on the logit scale.
    Hyperparameters are on the log scale.
    """

    beta: np.ndarray | None = None
    gamma: np.ndarray | None = None
    zeta: float | None = None
    alpha: np.ndarray | None = None
    nu: np.ndarray | None = None
    theta: float | None = None
    kappa_logit: np.ndarray | None = None
    cs_offset: float | None = None
    aux_intercept: float | None = None
    omega1: np.ndarray | None = None
    omega2: np.ndarray | None = None
    log_rho1: float | None = None
    log_sigma1: float | None = None
    log_rho2: float | None = None
    log_sigma2: float | None = None

    def copy(self) -> "ParameterState":
        kw = {}
        for f in dc_fields(self):
            v = getattr(self, f.name)
            kw[f.name] = None if v is None else np.array(v, dtype=float) if np.ndim(v) else float(v)
        return ParameterState(**kw)


HYPER_NAMES = ("log_rho1", "log_sigma1", "log_rho2", "log_sigma2")


class Layout:
    """Positions of the parameter blocks of one model inside the flat vector."""

    def __init__(self, model: ModelSpec, data: FitData):
        n = data.n
        blocks = [("beta", data.X.shape[1])]
        if model.cs_offset and model.use_cs and model.use_ps:
            blocks.append(("cs_offset", 1))
        if model.preferential:
            blocks += [("gamma", data.Z_units.shape[1]), ("zeta", 1)]
        if model.cs_sampling:
            blocks.append(("alpha", data.Z_cs.shape[1]))
            if model.uses_aux and model.aux_own_intercept:
                blocks.append(("aux_intercept", 1))
        if model.cs_detection:
            blocks.append(("nu", data.W.shape[1]))
        if model.reporting == "simple":
            blocks.append(("theta", 1))
        elif model.reporting == "observer":
            blocks.append(("kappa_logit", data.n_observers))
        blocks.append(("omega1", n))
        if model.has_field2:
            blocks.append(("omega2", n))
        self.slices = {}
        k = 0
        for name, size in blocks:
            self.slices[name] = slice(k, k + size)
            k += size
        self.size = k
        self.scalar_blocks = {"zeta", "theta", "cs_offset", "aux_intercept"}
        self.hyper_names = HYPER_NAMES[:4 if model.has_field2 else 2]

    @property
    def names(self) -> tuple:
        return tuple(self.slices)

    def __contains__(self, name) -> bool:
        return name in self.slices

    def get(self, x, name):
        v = x[self.slices[name]]
        return float(v[0]) if name in self.scalar_blocks else v

    def pack(self, state: ParameterState) -> tuple[np.ndarray, np.ndarray]:
        x = np.zeros(self.size)
        for name, sl in self.slices.items():
            v = getattr(state, name)
            if v is None:
                raise ValueError(f"state is missing block {name!r}")
            v = np.atleast_1d(np.asarray(v, dtype=float))
            if v.size != sl.stop - sl.start:
                raise ValueError(f"block {name!r} has {v.size} values, model expects {sl.stop - sl.start}")
            x[sl] = v
        h = []
        for name in self.hyper_names:
            v = getattr(state, name)
            if v is None:
                raise ValueError(f"state is missing hyperparameter {name!r}")
            h.append(float(v))
        return x, np.array(h)

    def unpack(self, x, h) -> ParameterState:
        kw = {name: (self.get(x, name) if name in self.scalar_blocks else np.array(x[sl]))
              for name, sl in self.slices.items()}
        kw.update(dict(zip(self.hyper_names, map(float, h))))
        return ParameterState(**kw)

    def scalar_names(self) -> list[str]:
        """Names of the non-field scalar parameters in flat order."""
        out = []
        for name, sl in self.slices.items():
            if name.startswith("omega"):
                continue
            size = sl.stop - sl.start
            if name in self.scalar_blocks:
                out.append(name)
            else:
                out += [f"{name}[{k}]" for k in range(size)]
        return out

    @property
    def fixed_stop(self) -> int:
        return self.slices["omega1"].start


class Posterior:
    """Log posterior for one model and one dataset.

    ``logp_grad(x, h)`` is the fast entry point used by the sampler; it
    returns the log posterior and its gradient with respect to the flat
    vector ``x`` (hyperparameters are not differentiated).  With
    ``use_data=False`` the data terms (a)-(d) are dropped and the target is
    the prior.
    """

    def __init__(self, model: ModelSpec, data: FitData, priors: PriorSpec, backend: str = "lattice",
                 use_data: bool = True):
        self.model = model
        self.use_data = use_data
        self.data = data
        self.priors = priors
        self.backend = backend
        self.layout = Layout(model, data)
        self._ops: dict = {}
        d = data
        self._unit_index = d.unit_matrix > 0
        self._ps_X = d.X[d.ps_mask]
        nu_c = np.asarray(priors.nu_center, dtype=float)
        if model.cs_detection and nu_c.size != d.W.shape[1]:
            raise ValueError(f"detection prior centre has {nu_c.size} values, design has {d.W.shape[1]} columns")
        self._nu_center = nu_c
        self._prior = self._prior_arrays()

    # -- fields ------------------------------------------------------------

    def operator(self, which: int, log_rho: float, log_sigma: float):
        key = (which, float(log_rho), float(log_sigma))
        op = self._ops.get(key)
        if op is None:
            if len(self._ops) > 64:
                self._ops.clear()
            op = build_precision(self.data.grid, MaternParams(np.exp(log_rho), np.exp(log_sigma)),
                                 backend=self.backend)
            self._ops[key] = op
        return op

    def operators(self, h):
        ops = [self.operator(1, h[0], h[1])]
        if self.model.has_field2:
            ops.append(self.operator(2, h[2], h[3]))
        return ops

    # -- pieces ------------------------------------------------------------

    def _linear(self, x):
        L, d, m = self.layout, self.data, self.model
        beta = L.get(x, "beta")
        w1 = L.get(x, "omega1")
        eta_true = d.X @ beta + w1
        out = {"eta_true": eta_true}
        if m.use_cs:
            eta_cs = eta_true.copy()
            if "cs_offset" in L:
                eta_cs += L.get(x, "cs_offset")
            if m.cs_sampling:
                s = d.Z_cs @ L.get(x, "alpha") + L.get(x, "omega2")
                out["tau_eta"] = s
                eta_cs += log_expit(s)
            if m.cs_detection:
                wv = d.W @ L.get(x, "nu")
                out["psi_eta"] = wv
                eta_cs += log_expit(wv)
            if m.reporting == "simple":
                eta_cs += log_expit(L.get(x, "theta"))
            elif m.reporting == "observer":
                kap = expit(L.get(x, "kappa_logit"))
                delta = d.obs_weights @ kap
                out["kappa"], out["delta"] = kap, delta
                eta_cs += np.log(delta)
            out["eta_cs"] = eta_cs
        if m.uses_aux:
            alpha = L.get(x, "alpha")
            eta_aux = d.Z_cs @ alpha + L.get(x, "omega2")
            if "aux_intercept" in L:
                eta_aux += L.get(x, "aux_intercept") - alpha[0]
            out["eta_aux"] = eta_aux
        if m.preferential:
            p = expit(w1)
            pm = expit(-w1)
            mu = d.unit_matrix @ p
            mq = d.unit_matrix @ pm
            ala = np.log(mu) - np.log(mq)
            out.update(ala=ala, ala_p=p, ala_m=mu, ala_q=mq,
                       sel_eta=d.Z_units @ L.get(x, "gamma") + L.get(x, "zeta") * ala)
        return out

    def terms(self, state_or_x, h=None) -> dict:
        """Every log-posterior term by name; the sum is the log posterior."""
        if isinstance(state_or_x, ParameterState):
            x, h = self.layout.pack(state_or_x)
        else:
            x = np.asarray(state_or_x, dtype=float)
        L = self.layout
        with np.errstate(over="ignore", invalid="ignore"):
            t = self._data_terms(self._linear(x)) if self.use_data else {}
        ops = self.operators(h)
        for k, op in enumerate(ops, start=1):
            w = L.get(x, f"omega{k}")
            t[f"field{k}"] = -0.5 * op.n * LOG2PI + 0.5 * op.logdet - 0.5 * op.quad(w)
        t["prior"] = self._prior_fixed(x)[0] + self.log_prior_hyper(h)
        return t

    def _data_terms(self, lin) -> dict:
        d, m = self.data, self.model
        a = d.area
        t = {}
        if m.use_ps:
            e = lin["eta_true"][d.ps_mask]
            t["ps"] = float(d.y_ps[d.ps_mask] @ e - a * np.exp(e).sum())
        if m.preferential:
            s = lin["sel_eta"]
            t["selection"] = float(np.sum(d.selected * log_expit(s) + (1 - d.selected) * log_expit(-s)))
        if m.use_cs:
            e = lin["eta_cs"]
            t["cs"] = float(d.y_cs @ e - a * np.exp(e).sum())
        if m.uses_aux:
            e = lin["eta_aux"]
            t["aux"] = float(d.y_aux @ e - a * np.exp(e).sum())
        return t

    def log_posterior(self, state_or_x, h=None) -> float:
        t = self.terms(state_or_x, h)
        total = sum(t.values())
        if not np.isfinite(total):
            bad = [k for k, v in t.items() if not np.isfinite(v)]
            raise PosteriorError(f"log posterior is not finite; offending terms: {bad}")
        return float(total)

    def log_likelihood(self, state_or_x, h=None) -> float:
        """Data terms (a)-(d) only."""
        t = self.terms(state_or_x, h)
        return float(sum(v for k, v in t.items() if k in ("ps", "selection", "cs", "aux")))

    def _prior_arrays(self):
        """Per-coordinate Normal prior means and precisions of the non-field blocks."""
        L, pr = self.layout, self.priors
        k = L.fixed_stop
        mean = np.zeros(k)
        prec = np.zeros(k)
        for name in ("beta", "gamma", "zeta", "alpha", "cs_offset", "aux_intercept"):
            if name in L:
                prec[L.slices[name]] = pr.fixed_precision
        if "nu" in L:
            mean[L.slices["nu"]] = self._nu_center
            prec[L.slices["nu"]] = 1.0 / pr.nu_sd ** 2
        for name, sd in (("theta", pr.theta_sd), ("kappa_logit", pr.kappa_logit_sd)):
            if name in L:
                prec[L.slices[name]] = 1.0 / sd ** 2
        const = float(np.sum(0.5 * np.log(prec)) - 0.5 * k * LOG2PI)
        return mean, prec, const

    def _prior_fixed(self, x):
        """Log prior of the non-field blocks and its gradient."""
        mean, prec, const = self._prior
        k = mean.size
        v = x[:k] - mean
        g = np.zeros(self.layout.size)
        g[:k] = -prec * v
        return const - 0.5 * float(prec @ (v * v)), g

    def log_prior_hyper(self, h) -> float:
        lp = self.priors.field1.logpdf_log(h[0], h[1])
        if self.model.has_field2:
            lp += self.priors.field2.logpdf_log(h[2], h[3])
        return float(lp)

    # -- fast path ---------------------------------------------------------

    def data_logp_grad(self, x) -> tuple[float, np.ndarray]:
        """Data terms plus the non-field priors, with gradient in ``x``.

        Excludes the field densities and the hyperparameter prior, so it
        does not depend on the hyperparameters.
        """
        L, d, m = self.layout, self.data, self.model
        a = d.area
        lp, g = self._prior_fixed(x)
        if not self.use_data:
            return float(lp), g
        lin = self._linear(x)
        sl = L.slices
        r_true = np.zeros(d.n)
        if m.use_ps:
            mask = d.ps_mask
            e = lin["eta_true"][mask]
            mu = a * np.exp(e)
            yy = d.y_ps[mask]
            lp += yy @ e - mu.sum()
            r_true[mask] += yy - mu
        if m.preferential:
            s = lin["sel_eta"]
            sel = d.selected
            lp += np.sum(sel * log_expit(s) + (1 - sel) * log_expit(-s))
            r = sel - expit(s)
            g[sl["gamma"]] += d.Z_units.T @ r
            g[sl["zeta"]] += r @ lin["ala"]
            p = lin["ala_p"]
            coef = (1.0 / lin["ala_m"] + 1.0 / lin["ala_q"]) * r * L.get(x, "zeta")
            g[sl["omega1"]] += (coef @ d.unit_matrix) * p * (1 - p)
        if m.use_cs:
            e = lin["eta_cs"]
            mu = a * np.exp(e)
            lp += d.y_cs @ e - mu.sum()
            r = d.y_cs - mu
            r_true += r
            if "cs_offset" in L:
                g[sl["cs_offset"]] += r.sum()
            if m.cs_sampling:
                rt = r * expit(-lin["tau_eta"])
                g[sl["alpha"]] += d.Z_cs.T @ rt
                g[sl["omega2"]] += rt
            if m.cs_detection:
                g[sl["nu"]] += d.W.T @ (r * expit(-lin["psi_eta"]))
            if m.reporting == "simple":
                g[sl["theta"]] += r.sum() * expit(-L.get(x, "theta"))
            elif m.reporting == "observer":
                kap = lin["kappa"]
                g[sl["kappa_logit"]] += ((r / lin["delta"]) @ d.obs_weights) * kap * (1 - kap)
        if m.uses_aux:
            e = lin["eta_aux"]
            mu = a * np.exp(e)
            lp += d.y_aux @ e - mu.sum()
            r = d.y_aux - mu
            ga = d.Z_cs.T @ r
            if "aux_intercept" in L:
                g[sl["aux_intercept"]] += ga[0]
                ga[0] = 0.0
            g[sl["alpha"]] += ga
            g[sl["omega2"]] += r
        g[sl["beta"]] += d.X.T @ r_true
        g[sl["omega1"]] += r_true
        return float(lp), g

    def logp_grad(self, x, h, ops=None) -> tuple[float, np.ndarray]:
        lp, g = self.data_logp_grad(x)
        lp += self.log_prior_hyper(h)
        sl = self.layout.slices
        if ops is None:
            ops = self.operators(h)
        for k, op in enumerate(ops, start=1):
            w = x[sl[f"omega{k}"]]
            qw = op.matvec(w)
            lp += -0.5 * op.n * LOG2PI + 0.5 * op.logdet - 0.5 * float(w @ qw)
            g[sl[f"omega{k}"]] -= qw
        return float(lp), g

    def grad_log_posterior(self, state: ParameterState) -> dict:
        """Gradient by block name; only blocks the model uses are present."""
        x, h = self.layout.pack(state)
        _, g = self.logp_grad(x, h)
        return {name: (float(g[sl][0]) if name in self.layout.scalar_blocks else g[sl].copy())
                for name, sl in self.layout.slices.items()}

    # -- curvature for preconditioning ---------------------------------------

    def fisher(self, x, h) -> np.ndarray:
        """Expected (Gauss-Newton) negative Hessian of the log posterior at ``x``.

        Positive definite; used only to precondition proposals.
        """
        L = self.layout
        sl = L.slices
        H = np.zeros((L.size, L.size))
        if self.use_data:
            self._data_fisher(H, x, self._linear(x))
        k = L.fixed_stop
        H[np.arange(k), np.arange(k)] += self._prior[1]
        for k, op in enumerate(self.operators(h), start=1):
            s_ = sl[f"omega{k}"]
            V = op.basis.eigvec
            H[s_, s_] += (V * op.q[None, :]) @ V.T
        return 0.5 * (H + H.T)

    def _data_fisher(self, H, x, lin) -> None:
        """Add the Gauss-Newton information of the data terms to ``H``."""
        L, d, m = self.layout, self.data, self.model
        a = d.area
        sl = L.slices

        def add_poisson(J, mu):
            H[:, :] += (J * mu[:, None]).T @ J

        n = d.n
        if m.use_ps:
            mask = d.ps_mask
            J = np.zeros((int(mask.sum()), L.size))
            J[:, sl["beta"]] = d.X[mask]
            J[:, sl["omega1"]] = np.eye(n)[mask]
            add_poisson(J, a * np.exp(lin["eta_true"][mask]))
        if m.use_cs:
            J = np.zeros((n, L.size))
            J[:, sl["beta"]] = d.X
            J[:, sl["omega1"]] = np.eye(n)
            if "cs_offset" in L:
                J[:, sl["cs_offset"]] = 1.0
            if m.cs_sampling:
                c = expit(-lin["tau_eta"])
                J[:, sl["alpha"]] = d.Z_cs * c[:, None]
                J[:, sl["omega2"]] = np.diag(c)
            if m.cs_detection:
                J[:, sl["nu"]] = d.W * expit(-lin["psi_eta"])[:, None]
            if m.reporting == "simple":
                J[:, sl["theta"]] = expit(-L.get(x, "theta"))
            elif m.reporting == "observer":
                kap = lin["kappa"]
                J[:, sl["kappa_logit"]] = d.obs_weights * (kap * (1 - kap))[None, :] / lin["delta"][:, None]
            add_poisson(J, a * np.exp(lin["eta_cs"]))
        if m.uses_aux:
            J = np.zeros((n, L.size))
            J[:, sl["alpha"]] = d.Z_cs
            if "aux_intercept" in L:
                J[:, sl["aux_intercept"]] = 1.0
                J[:, sl["alpha"].start] = 0.0
            J[:, sl["omega2"]] = np.eye(n)
            add_poisson(J, a * np.exp(lin["eta_aux"]))
        if m.preferential:
            s = lin["sel_eta"]
            w = expit(s) * expit(-s)
            J = np.zeros((d.n_units, L.size))
            J[:, sl["gamma"]] = d.Z_units
            J[:, sl["zeta"]] = lin["ala"][:, None]
            p = lin["ala_p"]
            dala = d.unit_matrix * (p * (1 - p))[None, :] * (1.0 / lin["ala_m"] + 1.0 / lin["ala_q"])[:, None]
            J[:, sl["omega1"]] = L.get(x, "zeta") * dala
            H += (J * w[:, None]).T @ J

    # -- initial state -------------------------------------------------------

    def initial_state(self) -> tuple[np.ndarray, np.ndarray]:
        """Fixed effects and fields at 0, kappa at 0.5, hyperparameters at prior medians."""
        x = np.zeros(self.layout.size)
        r1, s1 = self.priors.field1.median()
        h = [np.log(r1), np.log(s1)]
        if self.model.has_field2:
            r2, s2 = self.priors.field2.median()
            h += [np.log(r2), np.log(s2)]
        return x, np.array(h)
