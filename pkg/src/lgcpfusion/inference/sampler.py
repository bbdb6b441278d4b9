"""Blocked adaptive MCMC for the fusion models.

One iteration of a chain consists of

1. a preconditioned MALA move of all fixed effects and both latent fields
   jointly.  The preconditioner is the inverse of the expected negative
   Hessian (prior precision plus Fisher information of the data terms);
2. for each field, a random-walk move of ``(log rho, log sigma)`` with the
   field held fixed (cheap, uses only the Gauss-Markov density);
3. periodically, a random-walk move of ``(log rho, log sigma)`` in which the
   field is rescaled along with its hyperparameters, keeping its whitened
   coordinates fixed and shifting the intercept by the change in the field
   mean.  This move is effective when the field is weakly
   informed by data, where step 2 mixes slowly.

Warm-up starts with damped Gauss-Newton steps from the initial state to the
conditional mode, then adapts the MALA step size by dual averaging, the
random-walk scales by Robbins-Monro, and refreshes the preconditioner a few
times.  Nothing adapts after warm-up.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from scipy.linalg.blas import dtrmv as _trmv
from scipy.special import expit

from ..field import FactorizationError, lattice_basis, lattice_spectrum
from .diagnostics import effective_sample_size, split_rhat
from .posterior import Posterior, PosteriorError


class SamplerError(RuntimeError):
    """Adaptation failed (for example the MALA step size collapsed)."""


@dataclass(frozen=True)
class SamplerConfig:
    """Chain lengths and adaptation settings.

    ``precond_refresh`` lists the fractions of warm-up after which the
    preconditioner is rebuilt at the current state.  ``rescale_every`` sets
    how often (in iterations) a field-rescaling hyperparameter move is tried.
    ``freeze_fields`` keeps both fields at their initial value of zero and
    samples only the non-field parameters.
    """

    warmup: int = 2000
    iterations: int = 6000
    thin: int = 4
    chains: int = 2
    target_accept: float = 0.574
    hyper_target: float = 0.3
    newton_steps: int = 40
    precond_refresh: tuple = (0.1, 0.25, 0.5)
    rescale_every: int = 2
    store_fields: bool = True
    min_step: float = 1e-6
    freeze_fields: bool = False

    def __post_init__(self):
        if not 0 <= self.warmup < self.iterations:
            raise ValueError("need 0 <= warmup < iterations")
        if self.thin < 1 or self.chains < 1:
            raise ValueError("thin and chains must be positive")

    @property
    def kept_per_chain(self) -> int:
        return len(range(self.warmup, self.iterations, self.thin))


# ---------------------------------------------------------------------------
# result container


@dataclass
class FitResult:
    """Posterior draws (after warm-up and thinning) with diagnostics.

    ``chains[name]`` has shape ``(n_chains, n_kept)``; ``fields[name]`` has
    shape ``(n_chains, n_kept, n_cells)``.
    """

    model_id: int
    chains: dict
    fields: dict
    diagnostics: dict
    config: dict
    seed: object = None

    @property
    def param_names(self) -> list[str]:
        return list(self.chains)

    @property
    def n_chains(self) -> int:
        return next(iter(self.chains.values())).shape[0]

    @property
    def n_kept(self) -> int:
        return next(iter(self.chains.values())).shape[1]

    def draws(self, name: str) -> np.ndarray:
        """All kept draws of a scalar parameter, chains concatenated."""
        return self.chains[name].reshape(-1)

    def field_draws(self, name: str = "omega1") -> np.ndarray:
        f = self.fields[name]
        return f.reshape(-1, f.shape[-1])

    def posterior_mean(self, name: str) -> float:
        return float(self.chains[name].mean())

    def posterior_means(self) -> dict:
        return {k: float(v.mean()) for k, v in self.chains.items()}

    def converged(self, name: str = "beta[1]", threshold: float = 1.1) -> bool:
        r = self.diagnostics["rhat"].get(name, np.nan)
        return bool(np.isfinite(r) and r < threshold)

    def summary(self) -> str:
        lines = [f"model {self.model_id}: {self.n_chains} chains x {self.n_kept} draws"]
        lines.append(f"{'parameter':<16}{'mean':>10}{'sd':>10}{'q2.5':>10}{'q97.5':>10}{'rhat':>8}{'ess':>8}")
        for k, v in self.chains.items():
            q = np.quantile(v, [0.025, 0.975])
            lines.append(f"{k:<16}{v.mean():>10.4f}{v.std():>10.4f}{q[0]:>10.4f}{q[1]:>10.4f}"
                         f"{self.diagnostics['rhat'][k]:>8.3f}{self.diagnostics['ess'][k]:>8.0f}")
        acc = self.diagnostics["acceptance"]
        lines.append("acceptance: " + ", ".join(f"{b}={np.mean(v):.3f}" for b, v in acc.items()))
        return "\n".join(lines)

    # -- serialisation -------------------------------------------------------

    def save(self, directory) -> None:
        import csv
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        names = self.param_names
        with (d / "chains.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["chain", "draw"] + names)
            for c in range(self.n_chains):
                for k in range(self.n_kept):
                    w.writerow([c, k] + [repr(float(self.chains[n][c, k])) for n in names])
        for fname, arr in self.fields.items():
            with (d / f"{fname}.csv").open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["chain", "draw"] + [f"cell{j}" for j in range(arr.shape[2])])
                for c in range(arr.shape[0]):
                    for k in range(arr.shape[1]):
                        w.writerow([c, k] + [repr(float(v)) for v in arr[c, k]])
        diag = dict(self.diagnostics, model_id=self.model_id)
        (d / "diagnostics.json").write_text(json.dumps(_jsonable(diag), indent=1, sort_keys=True))
        echo = dict(self.config, seed=_jsonable(self.seed), model_id=self.model_id)
        (d / "config.txt").write_text("\n".join(f"{k} = {json.dumps(_jsonable(v))}"
                                                for k, v in sorted(echo.items())) + "\n")

    @classmethod
    def load(cls, directory) -> "FitResult":
        import csv
        d = Path(directory)
        with (d / "chains.csv").open(newline="") as fh:
            rows = list(csv.reader(fh))
        header = rows[0]
        data = np.array([[float(v) for v in r] for r in rows[1:]]) if len(rows) > 1 else np.zeros((0, len(header)))
        n_chains = int(data[:, 0].max()) + 1
        chains = {name: data[:, j + 2].reshape(n_chains, -1) for j, name in enumerate(header[2:])}
        fields = {}
        for name in ("omega1", "omega2"):
            p = d / f"{name}.csv"
            if p.exists():
                with p.open(newline="") as fh:
                    r = list(csv.reader(fh))
                arr = np.array([[float(v) for v in row] for row in r[1:]])
                fields[name] = arr[:, 2:].reshape(n_chains, -1, arr.shape[1] - 2)
        diag = json.loads((d / "diagnostics.json").read_text())
        model_id = int(diag.pop("model_id"))
        config = {}
        for line in (d / "config.txt").read_text().splitlines():
            k, _, v = line.partition(" = ")
            config[k] = json.loads(v)
        seed = config.pop("seed", None)
        config.pop("model_id", None)
        return cls(model_id, chains, fields, diag, config, seed)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


# ---------------------------------------------------------------------------
# chain


class _DualAveraging:
    """Step-size adaptation of Hoffman and Gelman (2014)."""

    def __init__(self, eps, target, gamma=0.05, t0=10.0, kappa=0.75):
        self.restart(eps)
        self.target, self.gamma, self.t0, self.kappa = target, gamma, t0, kappa

    def restart(self, eps):
        self.mu = np.log(10.0 * eps)
        self.hbar = 0.0
        self.log_eps_bar = np.log(eps)
        self.t = 0

    def update(self, accept_prob) -> float:
        self.t += 1
        t = self.t
        self.hbar += ((self.target - accept_prob) - self.hbar) / (t + self.t0)
        log_eps = self.mu - np.sqrt(t) / self.gamma * self.hbar
        w = t ** -self.kappa
        self.log_eps_bar = w * log_eps + (1 - w) * self.log_eps_bar
        return float(np.exp(log_eps))

    @property
    def final(self) -> float:
        return float(np.exp(self.log_eps_bar))


def _safe_logp_grad(post: Posterior, x, h, ops=None):
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        lp, g = post.logp_grad(x, h, ops)
    if not (np.isfinite(lp) and np.all(np.isfinite(g))):
        return -np.inf, g
    return lp, g


def find_mode(post: Posterior, x, h, steps: int = 40, tol: float = 1e-6, n_free: int | None = None):
    """Damped Gauss-Newton ascent in ``x`` with hyperparameters fixed.

    Only the first ``n_free`` coordinates move when ``n_free`` is given.
    """
    d = x.size if n_free is None else n_free
    ops = post.operators(h)
    lp, g = _safe_logp_grad(post, x, h, ops)
    if not np.isfinite(lp):
        terms = post.terms(x, h)
        raise PosteriorError(f"log posterior not finite at the initial state: {terms}")
    for _ in range(steps):
        H = post.fisher(x, h)[:d, :d]
        step = np.zeros_like(x)
        try:
            step[:d] = sla.solve(H, g[:d], assume_a="pos")
        except (sla.LinAlgError, ValueError):
            step[:d] = g[:d] / np.diag(H)
        big = np.max(np.abs(step))
        if big > 3.0:
            step *= 3.0 / big
        t = 1.0
        for _ in range(30):
            x_new = x + t * step
            lp_new, g_new = _safe_logp_grad(post, x_new, h, ops)
            if lp_new >= lp - 1e-10:
                break
            t *= 0.5
        else:
            break
        gain = lp_new - lp
        x, lp, g = x_new, lp_new, g_new
        if gain < tol * max(1.0, abs(lp)) and big <= 3.0:
            break
    return x, lp, g


class _Whitened:
    """The posterior in whitened field coordinates.

    Field ``k`` is written ``w_k = V diag(q_k)^(-1/2) z_k`` with ``V`` the
    lattice eigenvectors and ``q_k`` the precision eigenvalues at the current
    hyperparameters, so that ``z_k`` has a standard normal prior whatever
    the hyperparameters.  The target density of ``(z, h)`` is the data
    log-likelihood at ``w(z, h)`` plus ``-|z|^2 / 2`` plus the priors.
    """

    def __init__(self, post: Posterior):
        if post.backend != "lattice":
            raise ValueError("the sampler requires the lattice field backend")
        self.post = post
        self.lay = post.layout
        self.V = lattice_basis(post.data.grid).eigvec
        self.VT = np.ascontiguousarray(self.V.T)
        self.n_fields = 2 if post.model.has_field2 else 1
        self.sl = [self.lay.slices[f"omega{k + 1}"] for k in range(self.n_fields)]
        self.basis = lattice_basis(post.data.grid)
        self.vbar = self.V.mean(axis=0)
        icpt = [self.lay.slices["beta"].start]
        if self.n_fields == 2:
            icpt.append(self.lay.slices["alpha"].start)
        self.intercepts = icpt

    def field_mean(self, k, z, q) -> float:
        return float(self.vbar @ (z / np.sqrt(q)))

    def spectrum(self, hk):
        q, _ = lattice_spectrum(self.basis, np.exp(hk[0]), np.exp(hk[1]))
        if not (np.all(np.isfinite(q)) and np.all(q > 0)):
            raise FactorizationError("non-positive lattice precision")
        return q

    def hyper_prior(self, k, hk) -> float:
        pc = self.post.priors.field1 if k == 0 else self.post.priors.field2
        return pc.logpdf_log(hk[0], hk[1])

    def to_omega(self, xz, qs):
        x = xz.copy()
        for s, q in zip(self.sl, qs):
            x[s] = self.V @ (xz[s] / np.sqrt(q))
        return x

    def to_white(self, x, qs):
        xz = x.copy()
        for s, q in zip(self.sl, qs):
            xz[s] = np.sqrt(q) * (self.VT @ x[s])
        return xz

    def evaluate(self, xz, qs):
        """Return ``(ll, u, g_z, zz)``: data log density, ``V^T grad_w`` per field,
        gradient in the whitened coordinates (excluding the hyperparameter
        prior, which does not involve ``xz``) and ``|z|^2``."""
        x = self.to_omega(xz, qs)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            ll, g = self.post.data_logp_grad(x)
        if not (np.isfinite(ll) and np.all(np.isfinite(g))):
            return -np.inf, None, None, None
        us = []
        zz = 0.0
        with np.errstate(over="ignore", invalid="ignore"):
            for s, q in zip(self.sl, qs):
                u = self.VT @ g[s]
                us.append(u)
                z = xz[s]
                g[s] = u / np.sqrt(q) - z
                zz += float(z @ z)
        if not (np.isfinite(zz) and np.all(np.isfinite(g))):
            return -np.inf, None, None, None
        return ll, us, g, zz

    def fisher(self, xz, h, qs):
        """Expected negative Hessian in the whitened coordinates."""
        x = self.to_omega(xz, qs)
        H = self.post.fisher(x, h)
        for s, q in zip(self.sl, qs):
            T = self.V / np.sqrt(q)[None, :]
            H[:, s] = H[:, s] @ T
            H[s, :] = T.T @ H[s, :]
        return 0.5 * (H + H.T)


class _Preconditioner:
    """Cholesky factor ``L`` of ``H`` kept as ``S = L^-T`` so that ``S S^T = H^-1``.

    ``S`` is upper triangular; products use the triangular BLAS kernel.
    """

    def __init__(self, H):
        H = H + 1e-10 * np.mean(np.diag(H)) * np.eye(H.shape[0])
        L = sla.cholesky(H, lower=True)
        self._S = np.asfortranarray(sla.solve_triangular(L, np.eye(H.shape[0]), lower=True).T)

    def mul(self, v):
        """``S v``"""
        return _trmv(self._S, v)

    def tmul(self, v):
        """``S^T v``"""
        return _trmv(self._S, v, trans=1)


def _run_chain(post: Posterior, cfg: SamplerConfig, rng: np.random.Generator):
    W = _Whitened(post)
    lay = post.layout
    nf = W.n_fields
    x0, h = post.initial_state()
    x0, _, _ = find_mode(post, x0, h, cfg.newton_steps,
                         n_free=lay.fixed_stop if cfg.freeze_fields else None)
    qs = [W.spectrum(h[2 * k: 2 * k + 2]) for k in range(nf)]
    xz = W.to_white(x0, qs)
    hp = [W.hyper_prior(k, h[2 * k: 2 * k + 2]) for k in range(nf)]
    ll, us, g, zz = W.evaluate(xz, qs)
    if not np.isfinite(ll):
        raise PosteriorError("log posterior not finite at the initial state")
    # with frozen fields only the leading non-field coordinates move
    d = lay.fixed_stop if cfg.freeze_fields else xz.size
    pre = _Preconditioner(W.fisher(xz, h, qs)[:d, :d])
    Stg = pre.tmul(g[:d])
    Mg = pre.mul(Stg)
    eps = 1.0 / d ** (1.0 / 6.0)
    da = _DualAveraging(eps, cfg.target_accept)

    hyper_scale = np.full(nf, 0.3)
    rescale_scale = np.full(nf, 0.3)
    hyper_chol = [np.eye(2) * 0.5 for _ in range(nf)]
    refresh_at = sorted({int(f * cfg.warmup) for f in cfg.precond_refresh
                         if 0 < int(f * cfg.warmup) < cfg.warmup})

    n_keep = cfg.kept_per_chain
    n_scalar = lay.fixed_stop
    out_x = np.empty((n_keep, n_scalar))
    out_h = np.empty((n_keep, h.size))
    out_f = {f"omega{k + 1}": np.empty((n_keep, post.data.n)) for k in range(nf)} if cfg.store_fields else {}
    acc = {"latent": [0, 0]}
    for k in range(0 if cfg.freeze_fields else nf):
        acc[f"hyper{k + 1}"] = [0, 0]
        acc[f"rescale{k + 1}"] = [0, 0]
    warm_h = []
    n_nonfinite = 0
    keep_i = 0

    def propose_h(k, scale):
        hk = h[2 * k: 2 * k + 2]
        prop = hk + scale * (hyper_chol[k] @ rng.standard_normal(2))
        if np.any(np.abs(prop) > 12):
            return None, None
        try:
            return prop, W.spectrum(prop)
        except FactorizationError:
            return None, None

    for it in range(cfg.iterations):
        warm = it < cfg.warmup
        # 1. latent block
        xi = rng.standard_normal(d)
        xz_new = xz.copy()
        xz_new[:d] += (0.5 * eps * eps) * Mg + eps * pre.mul(xi)
        ll_new, us_new, g_new, zz_new = W.evaluate(xz_new, qs)
        a = 0.0
        if np.isfinite(ll_new):
            with np.errstate(over="ignore", invalid="ignore"):
                Stg_new = pre.tmul(g_new[:d])
                back = xi + (0.5 * eps) * (Stg + Stg_new)
                log_a = (ll_new - 0.5 * zz_new) - (ll - 0.5 * zz) - 0.5 * float(back @ back) + 0.5 * float(xi @ xi)
            if np.isnan(log_a):
                log_a = -np.inf
                n_nonfinite += 1
            a = 1.0 if log_a >= 0 else float(np.exp(log_a))
        else:
            n_nonfinite += 1
        if rng.random() < a:
            xz, ll, us, g, zz, Stg = xz_new, ll_new, us_new, g_new, zz_new, Stg_new
            Mg = pre.mul(Stg)
            acc["latent"][0] += 1
        acc["latent"][1] += 1
        if warm:
            eps = da.update(a)
            if it == cfg.warmup - 1:
                eps = da.final
                if eps < cfg.min_step:
                    raise SamplerError(f"MALA step size collapsed to {eps:.3g} during warm-up")

        # 2. hyperparameters with the field held fixed
        changed = False
        for k in range(0 if cfg.freeze_fields else nf):
            s = W.sl[k]
            prop, q_new = propose_h(k, hyper_scale[k])
            a = 0.0
            if prop is not None:
                r = q_new / qs[k]
                z = xz[s]
                hp_new = W.hyper_prior(k, prop)
                log_a = (0.5 * float(np.sum(np.log(r))) - 0.5 * float(((r - 1.0) * z) @ z)
                         + hp_new - hp[k])
                a = 1.0 if log_a >= 0 else float(np.exp(log_a))
            if rng.random() < a:
                z_new = z * np.sqrt(r)
                zz += float(z_new @ z_new) - float(z @ z)
                xz = xz.copy()
                xz[s] = z_new
                g = g.copy()
                g[s] = us[k] / np.sqrt(q_new) - z_new
                qs[k] = q_new
                hp[k] = hp_new
                h = h.copy()
                h[2 * k: 2 * k + 2] = prop
                changed = True
                acc[f"hyper{k + 1}"][0] += 1
            acc[f"hyper{k + 1}"][1] += 1
            if warm:
                hyper_scale[k] *= np.exp((a - cfg.hyper_target) / np.sqrt(it + 10))

        # 3. hyperparameters with the whitened field held fixed
        if cfg.rescale_every and it % cfg.rescale_every == 0 and not cfg.freeze_fields:
            k = (it // cfg.rescale_every) % nf
            prop, q_new = propose_h(k, rescale_scale[k])
            a = 0.0
            if prop is not None:
                qs_p = list(qs)
                qs_p[k] = q_new
                # move the intercept with the field mean so the sum stays put
                z = xz[W.sl[k]]
                xz_p = xz.copy()
                xz_p[W.intercepts[k]] += W.field_mean(k, z, qs[k]) - W.field_mean(k, z, q_new)
                ll_p, us_p, g_p, zz_p = W.evaluate(xz_p, qs_p)
                if np.isfinite(ll_p):
                    hp_new = W.hyper_prior(k, prop)
                    log_a = ll_p - ll + hp_new - hp[k]
                    a = 1.0 if log_a >= 0 else float(np.exp(log_a))
            if rng.random() < a:
                xz, ll, us, g, qs = xz_p, ll_p, us_p, g_p, qs_p
                hp[k] = hp_new
                h = h.copy()
                h[2 * k: 2 * k + 2] = prop
                changed = True
                acc[f"rescale{k + 1}"][0] += 1
            acc[f"rescale{k + 1}"][1] += 1
            if warm:
                rescale_scale[k] *= np.exp((a - cfg.hyper_target) / np.sqrt(it / cfg.rescale_every + 10))
        if changed:
            Stg = pre.tmul(g[:d])
            Mg = pre.mul(Stg)

        if warm:
            if it >= cfg.warmup // 4:
                warm_h.append(h.copy())
            if it + 1 in refresh_at:
                pre = _Preconditioner(W.fisher(xz, h, qs)[:d, :d])
                Stg = pre.tmul(g[:d])
                Mg = pre.mul(Stg)
                da.restart(eps)
                if len(warm_h) > 50:
                    hh = np.array(warm_h)
                    for k in range(nf):
                        c = np.cov(hh[:, 2 * k: 2 * k + 2].T) + 1e-4 * np.eye(2)
                        hyper_chol[k] = np.linalg.cholesky(c / np.mean(np.diag(c)) * 0.25)
        elif (it - cfg.warmup) % cfg.thin == 0:
            out_x[keep_i] = xz[:n_scalar]
            out_h[keep_i] = h
            if out_f:
                x = W.to_omega(xz, qs)
                for name, arr in out_f.items():
                    arr[keep_i] = x[lay.slices[name]]
            keep_i += 1
    rates = {b: (v[0] / v[1] if v[1] else float("nan")) for b, v in acc.items()}
    info = {"step_size": eps, "hyper_scale": hyper_scale.tolist(), "rescale_scale": rescale_scale.tolist(),
            "nonfinite_proposals": n_nonfinite}
    return out_x, out_h, out_f, rates, info


def _chain_seeds(seed, n_chains):
    if isinstance(seed, np.random.SeedSequence):
        base = seed
    elif isinstance(seed, (tuple, list)):
        base = np.random.SeedSequence(int(seed[0]), spawn_key=tuple(int(s) for s in seed[1:]))
    else:
        base = np.random.SeedSequence(int(seed))
    return [np.random.SeedSequence(base.entropy, spawn_key=tuple(base.spawn_key) + (c,))
            for c in range(n_chains)]


def fit(post: Posterior, config: SamplerConfig = SamplerConfig(), seed=0) -> FitResult:
    """Sample the posterior ``post``; deterministic given ``seed``.

    ``seed`` is an int, a SeedSequence or a tuple ``(master, key...)``; chain
    ``c`` uses the sequence with ``c`` appended to the spawn key.
    """
    lay = post.layout
    names = lay.scalar_names()
    hyper_names = ["rho1", "sigma1", "rho2", "sigma2"][:len(lay.hyper_names)]
    xs, hs, fs, rates, infos = [], [], [], [], []
    t0 = time.perf_counter()
    for ss in _chain_seeds(seed, config.chains):
        ox, oh, of, r, info = _run_chain(post, config, np.random.default_rng(ss))
        xs.append(ox)
        hs.append(oh)
        fs.append(of)
        rates.append(r)
        infos.append(info)
    elapsed = time.perf_counter() - t0
    chains = {}
    X = np.stack(xs)          # (chains, kept, n_scalar)
    Hh = np.exp(np.stack(hs))
    for j, name in enumerate(names):
        v = X[:, :, j]
        if name.startswith("kappa_logit"):
            name = name.replace("kappa_logit", "kappa")
            v = expit(v)
        chains[name] = v
    for j, name in enumerate(hyper_names):
        chains[name] = Hh[:, :, j]
    fields = {k: np.stack([f[k] for f in fs]) for k in fs[0]} if fs and fs[0] else {}
    diagnostics = {
        "acceptance": {b: [r[b] for r in rates] for b in rates[0]},
        "step_size": [i["step_size"] for i in infos],
        "nonfinite_proposals": [i["nonfinite_proposals"] for i in infos],
        "rhat": {k: split_rhat(v) for k, v in chains.items()},
        "ess": {k: effective_sample_size(v) for k, v in chains.items()},
        "seconds": elapsed,
    }
    cfg = asdict(config)
    cfg["model"] = post.model.describe()
    return FitResult(post.model.model_id, chains, fields, diagnostics, cfg,
                     seed if not isinstance(seed, np.random.SeedSequence) else
                     [seed.entropy, *seed.spawn_key])
