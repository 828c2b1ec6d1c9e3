"""
Per-user UL/DL SINR decompositions and Monte Carlo ergodic rates.

Uplink terms are evaluated conditionally on the estimates of the measured
cell: user-channel terms by Gaussian conditioning, the BS-to-BS NLoS term by
taking the expectation over the random NLoS matrix in closed form, and the
precoder covariance of every DL neighbor by an inner Monte Carlo average.
The outer average runs over independent training phases of the measured
cell.
"""

from dataclasses import dataclass, field

import numpy as np

from . import streams
from .channel import (build_scenario_statistics, conditional_operator,
                      sample_estimates)
from .errors import InvalidInputError
from .transceiver import RidgeSolver, estimate_power_normalization

__all__ = [
    "UlSinrBreakdown",
    "DlSinrBreakdown",
    "RateEstimate",
    "UplinkEngine",
    "ul_sinr_breakdown",
    "ul_ergodic_rate",
    "bs2bs_interference_mc",
    "dl_sinr_breakdown",
    "dl_rate",
]

UL_TERMS = ("s", "i1", "i2", "i3", "i4", "i5")
OUTER_CHUNK = 64


def _quad(a, mat):
    """``a_b^H mat a_b`` for every row ``a_b`` of a batch ``(B, M)``."""
    return np.einsum("bi,bi->b", a.conj(), a @ mat.T).real


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))


@dataclass
class UlSinrBreakdown:
    """
    Uplink SINR terms of one user conditioned on one training phase.

    ``cell_terms[l]`` is the interference contributed by cell ``l``: the
    inter-user terms of UL cell ``l`` (same-pilot user included for
    ``l != j``) or the BS-to-BS term of DL cell ``l``.
    """

    s: float
    i1: float
    i2: float
    i3: float
    i4: float
    i5: float
    cell_terms: dict = field(default_factory=dict)

    @property
    def sinr(self):
        return self.s / (self.i1 + self.i2 + self.i3 + self.i4 + self.i5)

    @property
    def rate(self):
        return float(np.log2(1.0 + self.sinr))


@dataclass
class RateEstimate:
    """Monte Carlo mean with standard error and per-term averages."""

    rate: float
    stderr: float
    n_samples: int
    terms: dict = field(default_factory=dict)
    term_stderr: dict = field(default_factory=dict)


class UplinkEngine:
    """
    Evaluates uplink SINR terms for batches of training phases of cell ``j``.

    Parameters
    ----------
    cfg : ScenarioConfig
    stats : ChannelStatistics, optional
        Built from ``cfg`` when omitted.
    j : int
        Measured UL cell.
    lambdas : dict, optional
        Power-normalization constants per DL cell; estimated with
        ``cfg.n_precoder`` draws when omitted.
    """

    def __init__(self, cfg, stats=None, j=0, lambdas=None):
        cfg.require_ul(j)
        self.cfg = cfg
        self.stats = stats if stats is not None else build_scenario_statistics(cfg)
        self.j = j
        st = self.stats
        self.detector = RidgeSolver(st.M, st.F_ul(j), cfg.phi_ul)
        self.precoders = {n: RidgeSolver(st.M, st.F_dl(n), cfg.phi_dl)
                          for n in cfg.dl_cells}
        if lambdas is None:
            lambdas = {n: estimate_power_normalization(st, cfg, n, cfg.n_precoder).lam
                       for n in cfg.dl_cells}
        self.lambdas = dict(lambdas)

    def detectors(self, hhat):
        return self.detector(hhat)

    def terms(self, hhat, k, draw_ids=None, rng=None):
        """
        Conditional SINR terms of user ``k`` for a batch of estimates.

        Parameters
        ----------
        hhat : ndarray, shape (B, M, K)
            Own-cell estimates at BS ``j``, one matrix per training phase.
        k : int
        draw_ids : sequence of int, optional
            Outer draw index of each batch element; the inner precoder draws
            of element ``b`` for DL cell ``n`` use the substream
            ``(INNER_PRECODER, j, n, draw_ids[b])``. Defaults to ``range(B)``.
        rng : numpy.random.Generator, optional
            When given, all inner draws are taken from it sequentially
            instead of from substreams.

        Returns
        -------
        dict
            Arrays of length ``B`` for ``s``, ``i1`` ... ``i5`` and
            ``("cell", l)`` for each interfering cell.
        """
        cfg, st, j = self.cfg, self.stats, self.j
        p = cfg.p_tr
        hhat = np.asarray(hhat, dtype=complex)
        B = hhat.shape[0]
        a = self.detector(hhat)[:, :, k]
        out = {}
        own = np.einsum("bi,bi->b", a.conj(), hhat[:, :, k])
        out["s"] = cfg.p_ul * np.abs(own) ** 2
        out["i1"] = cfg.p_ul * _quad(a, st.err_cov(j, k, p))

        quad_cache = {}

        def quad(mat):
            if id(mat) not in quad_cache:
                quad_cache[id(mat)] = _quad(a, mat)
            return quad_cache[id(mat)]

        proj_cache = {}
        i2 = np.zeros(B)
        i3 = np.zeros(B)
        for l in cfg.ul_cells:
            cell = np.zeros(B)
            for m in range(st.K):
                if l == j and m == k:
                    continue
                bmat, sig = conditional_operator(st, p, j, l, m)
                if id(bmat) not in proj_cache:
                    # rows are a_b^H B
                    proj_cache[id(bmat)] = a.conj() @ bmat
                mean_part = np.abs(np.einsum("bi,bi->b", proj_cache[id(bmat)],
                                             hhat[:, :, m])) ** 2
                val = cfg.p_ul * (mean_part + quad(sig))
                cell += val
                if m == k:
                    i3 += val
                else:
                    i2 += val
            out[("cell", l)] = cell
        out["i2"] = i2
        out["i3"] = i3

        i4 = np.zeros(B)
        for n in cfg.dl_cells:
            nlos_w, los_vec = self._precoder_moments(n, a, draw_ids, rng)
            val = cfg.p_dl * (nlos_w * quad(st.C(j, n)) + los_vec)
            out[("cell", n)] = val
            i4 += val
        out["i4"] = i4
        out["i5"] = np.sum(np.abs(a) ** 2, axis=1)
        return out

    def _precoder_moments(self, n, a, draw_ids, rng):
        """
        Inner Monte Carlo over the precoder of DL cell ``n``.

        Returns ``tr(T_jn E[W W^H])`` and ``a^H Gbar E[W W^H] Gbar^H a`` per
        batch element, each from ``n_inner`` fresh estimate draws.
        """
        cfg, st, j = self.cfg, self.stats, self.j
        B, M = a.shape
        lam = self.lambdas[n]
        t = st.T(j, n)
        t_is_identity = np.allclose(t, np.eye(M), atol=0, rtol=0)
        g_h_a = a @ st.Gbar(j, n).conj()  # rows: (Gbar^H a_b)^T
        nlos = np.empty(B)
        los = np.empty(B)
        ids = range(B) if draw_ids is None else draw_ids
        for b, d in enumerate(ids):
            gen = rng if rng is not None else streams.substream(
                cfg.seed, streams.INNER_PRECODER, j, n, d)
            omega = self.precoders[n](sample_estimates(st, cfg, n, gen, cfg.n_inner))
            if t_is_identity:
                tr = np.sum(np.abs(omega) ** 2)
            else:
                flat = omega.transpose(1, 0, 2).reshape(M, -1)
                tr = np.sum(flat.conj() * (t @ flat)).real
            proj = np.einsum("i,sik->sk", g_h_a[b].conj(), omega)
            nlos[b] = lam * tr / cfg.n_inner
            los[b] = lam * np.sum(np.abs(proj) ** 2) / cfg.n_inner
        return nlos, los

    def run(self, k=0, n_outer=None, first=0, chunk=OUTER_CHUNK):
        """
        Terms for outer draws ``first .. first + n_outer - 1``.

        Draw ``b`` uses the estimate substream ``(ESTIMATES, j, b)`` and the
        inner substreams ``(INNER_PRECODER, j, n, b)``, so any chunking gives
        identical values.
        """
        cfg, st = self.cfg, self.stats
        n_outer = cfg.n_outer if n_outer is None else n_outer
        parts = []
        for start in range(first, first + n_outer, chunk):
            idx = range(start, min(start + chunk, first + n_outer))
            hh = np.concatenate([
                sample_estimates(st, cfg, self.j,
                                 streams.substream(cfg.seed, streams.ESTIMATES, self.j, b), 1)
                for b in idx])
            parts.append(self.terms(hh, k, draw_ids=idx))
        keys = parts[0].keys()
        return {key: np.concatenate([p[key] for p in parts]) for key in keys}


def _sinr(t):
    return t["s"] / (t["i1"] + t["i2"] + t["i3"] + t["i4"] + t["i5"])


def ul_sinr_breakdown(training, stats, cfg, j, k, rng=None, engine=None):
    """
    Uplink SINR terms for user ``k`` of cell ``j`` given one training phase.

    Parameters
    ----------
    training : TrainingOutput
        Supplies ``hhat[j]``.
    rng : numpy.random.Generator, optional
        Stream for the inner precoder draws of all DL cells.
    engine : UplinkEngine, optional
        Reused precomputation (power normalization, filters).
    """
    cfg.require_ul(j)
    if engine is None:
        engine = UplinkEngine(cfg, stats, j)
    hh = np.asarray(training.hhat[j])[None]
    t = engine.terms(hh, k, rng=rng)
    cells = {key[1]: float(v[0]) for key, v in t.items() if isinstance(key, tuple)}
    return UlSinrBreakdown(*(float(t[n][0]) for n in UL_TERMS), cell_terms=cells)


def _summarize(t, n):
    rate = np.log2(1.0 + _sinr(t))
    mean, se = _mean_se(rate)
    terms, ses = {}, {}
    for key, v in t.items():
        name = key if isinstance(key, str) else f"cell{key[1]}"
        terms[name], ses[name] = _mean_se(v)
    return RateEstimate(rate=mean, stderr=se, n_samples=n, terms=terms,
                        term_stderr=ses)


def ul_ergodic_rate(cfg, j=0, k=0, stats=None, engine=None):
    """
    Ergodic UL rate ``E[log2(1 + sinr)]`` over ``cfg.n_outer`` training phases.

    Returns a ``RateEstimate`` whose ``terms`` hold the mean of every SINR
    term (and per-cell contributions under ``"cell<l>"``).
    """
    if engine is None:
        engine = UplinkEngine(cfg, stats, j)
    t = engine.run(k)
    return _summarize(t, cfg.n_outer)


def bs2bs_interference_mc(cfg, j=0, k=0, stats=None, engine=None):
    """Monte Carlo mean and standard error of the BS-to-BS interference term."""
    if not cfg.dl_cells or cfg.p_dl == 0:
        return 0.0, 0.0
    est = ul_ergodic_rate(cfg, j, k, stats, engine)
    return est.terms["i4"], est.term_stderr["i4"]


@dataclass
class DlSinrBreakdown:
    """Downlink SINR terms with a jackknife standard error of the rate."""

    s: float
    i1: float
    i2: float
    i3: float
    i4: float
    rate_stderr: float = 0.0
    n_samples: int = 0

    @property
    def sinr(self):
        return self.s / (self.i1 + self.i2 + self.i3 + self.i4 + 1.0)

    @property
    def rate(self):
        return float(np.log2(1.0 + self.sinr))


def _dl_terms(g, e, q2, q3, n):
    """DL terms from per-draw samples; first two moments of ``g`` only."""
    mean_g = g.mean()
    var_g = np.sum(np.abs(g - mean_g) ** 2) / (n - 1)
    return abs(mean_g) ** 2, var_g + e.mean(), q2.mean(), q3.mean()


def dl_sinr_breakdown(cfg, stats=None, i=None, k=0, lambdas=None):
    """
    Downlink SINR terms of user ``k`` in DL cell ``i``.

    The effective-channel mean and variance use ``cfg.n_outer`` joint draws
    of the cell-``i`` estimates and the true channel (the estimation error is
    integrated analytically); the interference from each other DL cell uses
    Gaussian conditioning of the cross channel on that cell's estimate. The
    UT-to-UT term is the exact sum of the gains.
    """
    if stats is None:
        stats = build_scenario_statistics(cfg)
    if i is None:
        i = cfg.dl_cells[0] if cfg.dl_cells else 0
    cfg.require_dl(i)
    n = cfg.n_outer
    if n < 3:
        raise InvalidInputError("n_outer must be >= 3 for the DL variance")
    st, p = stats, cfg.p_tr
    if lambdas is None:
        lambdas = {c: estimate_power_normalization(st, cfg, c, cfg.n_precoder).lam
                   for c in cfg.dl_cells}
    solver = RidgeSolver(st.M, st.F_dl(i), cfg.phi_dl)
    err = st.err_cov(i, k, p)
    g = np.empty(n, dtype=complex)
    e = np.empty(n)
    q2 = np.empty(n)
    for start in range(0, n, OUTER_CHUNK):
        idx = range(start, min(start + OUTER_CHUNK, n))
        hh = np.concatenate([
            sample_estimates(st, cfg, i, streams.substream(cfg.seed, streams.DL_OWN, i, b), 1)
            for b in idx])
        w = np.sqrt(lambdas[i]) * solver(hh)
        # effective gains hhat_k^H w_m for every m
        eff = np.einsum("bi,bim->bm", hh[:, :, k].conj(), w)
        sl = slice(idx.start, idx.stop)
        g[sl] = eff[:, k]
        errq = np.einsum("bim,ij,bjm->bm", w.conj(), err, w).real
        e[sl] = errq[:, k]
        others = np.abs(eff) ** 2 + errq
        q2[sl] = others.sum(axis=1) - others[:, k]
    q3 = np.zeros(n)
    for c in cfg.dl_cells:
        if c == i:
            continue
        bmat, sig = conditional_operator(st, p, c, i, k)
        sol_c = RidgeSolver(st.M, st.F_dl(c), cfg.phi_dl)
        for start in range(0, n, OUTER_CHUNK):
            idx = range(start, min(start + OUTER_CHUNK, n))
            hh = np.concatenate([
                sample_estimates(st, cfg, c,
                                 streams.substream(cfg.seed, streams.DL_NEIGHBOR, i, c, b), 1)
                for b in idx])
            w = np.sqrt(lambdas[c]) * sol_c(hh)
            mu = hh[:, :, k] @ bmat.T
            proj = np.einsum("bi,bim->bm", mu.conj(), w)
            tr = np.einsum("bim,ij,bjm->b", w.conj(), sig, w).real
            q3[idx.start:idx.stop] += np.sum(np.abs(proj) ** 2, axis=1) + tr
    i4 = cfg.p_ul * sum(st.ut2ut_gain[i, k, l, :].sum() for l in cfg.ul_cells)

    s, i1, i2, i3 = _dl_terms(g, e, q2, q3, n)
    pd = cfg.p_dl

    def rate_of(s, i1, i2, i3):
        return np.log2(1.0 + pd * s / (pd * (i1 + i2 + i3) + i4 + 1.0))

    # jackknife over outer draws
    loo = np.empty(n)
    sg, sgg = g.sum(), np.sum(np.abs(g) ** 2)
    se_, s2, s3 = e.sum(), q2.sum(), q3.sum()
    for b in range(n):
        mg = (sg - g[b]) / (n - 1)
        vg = (sgg - abs(g[b]) ** 2 - (n - 1) * abs(mg) ** 2) / (n - 2)
        loo[b] = rate_of(abs(mg) ** 2, vg + (se_ - e[b]) / (n - 1),
                         (s2 - q2[b]) / (n - 1), (s3 - q3[b]) / (n - 1))
    jk = float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))
    return DlSinrBreakdown(s=float(pd * s), i1=float(pd * i1), i2=float(pd * i2),
                           i3=float(pd * i3), i4=float(i4),
                           rate_stderr=jk, n_samples=n)


def dl_rate(cfg, i=None, k=0, stats=None, lambdas=None):
    """DL rate ``log2(1 + sinr)`` and its jackknife standard error."""
    br = dl_sinr_breakdown(cfg, stats, i, k, lambdas)
    return RateEstimate(rate=br.rate, stderr=br.rate_stderr, n_samples=br.n_samples,
                        terms={"s": br.s, "i1": br.i1, "i2": br.i2, "i3": br.i3,
                               "i4": br.i4})
