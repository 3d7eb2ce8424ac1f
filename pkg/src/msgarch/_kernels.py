"""Numba-compiled recursions shared by the model, filter and samplers.

Everything here is a pure array-in/array-out function: all randomness enters
as pre-drawn uniforms so that runs are reproducible and coupled draws stay
coupled.  Python wrappers in the public modules do the validation; these
kernels assume clean inputs.
"""

from __future__ import annotations

import numpy as np
from numba import njit

LOG2PI = np.log(2.0 * np.pi)

# auxiliary-model tags (order matches AuxKind)
KIND_BASIC = 0
KIND_GRAY = 1
KIND_DUEKER = 2
KIND_KLAASSEN_SIMPLE = 3
KIND_KLAASSEN = 4


@njit(cache=True)
def _norm_logpdf(x, mean, var):
    d = x - mean
    return -0.5 * (LOG2PI + np.log(var) + d * d / var)


@njit(cache=True)
def categorical_invcdf(p, u):
    """Fixed-order inverse-CDF cell lookup; u == 1.0 maps to the last
    positive cell (antithetic complements close the unit interval)."""
    cum = 0.0
    last = 0
    for m in range(p.shape[0]):
        if p[m] > 0.0:
            last = m
        cum += p[m]
        if u < cum:
            return m
    return last


@njit(cache=True)
def variance_path_kernel(y, reg, mu, gamma, alpha, beta, sigma1sq, out):
    T = y.shape[0]
    out[0] = sigma1sq
    e_prev = y[0] - mu[reg[0]]
    for t in range(1, T):
        s = reg[t]
        out[t] = gamma[s] + alpha[s] * e_prev * e_prev + beta[s] * out[t - 1]
        e_prev = y[t] - mu[s]


@njit(cache=True)
def path_logdensity_kernel(y, reg, mu, gamma, alpha, beta, log_trans, log_pi0, sigma1sq):
    T = y.shape[0]
    ll = log_pi0[reg[0]]
    if ll == -np.inf:
        return -np.inf
    sig2 = sigma1sq
    s_prev = reg[0]
    e_prev = y[0] - mu[s_prev]
    ll += _norm_logpdf(y[0], mu[s_prev], sig2)
    for t in range(1, T):
        s = reg[t]
        lt = log_trans[s, s_prev]
        if lt == -np.inf:
            return -np.inf
        ll += lt
        sig2 = gamma[s] + alpha[s] * e_prev * e_prev + beta[s] * sig2
        ll += _norm_logpdf(y[t], mu[s], sig2)
        e_prev = y[t] - mu[s]
        s_prev = s
    return ll


@njit(cache=True)
def aux_step_core(kind, hprev, prev_predictive, prevprev_filtered, mu, gamma, alpha,
                  beta, trans, y_prev, filtered_prev, predictive_curr,
                  out_var, out_smoothed):
    """One proxy-recursion step: fill per-regime proposal variances for time t.

    ``hprev`` holds the per-regime variances of the previous step;
    probability inputs are the filter rows the selected approximation
    conditions on.  Observation means are the regime means themselves.
    """
    M = mu.shape[0]
    if kind == KIND_KLAASSEN:
        # conditions on the current regime: one proxy pair per destination i
        for i in range(M):
            pc = predictive_curr[i]
            mu_bar = 0.0
            m2 = 0.0
            if pc > 0.0:
                for m in range(M):
                    w = trans[i, m] * filtered_prev[m] / pc
                    mu_bar += mu[m] * w
                    m2 += (mu[m] * mu[m] + hprev[m]) * w
            else:
                # unreachable regime this step; weights fall back to filtered
                for m in range(M):
                    w = filtered_prev[m]
                    mu_bar += mu[m] * w
                    m2 += (mu[m] * mu[m] + hprev[m]) * w
            sig2 = m2 - mu_bar * mu_bar
            e = y_prev - mu_bar
            out_var[i] = gamma[i] + alpha[i] * e * e + beta[i] * sig2
        return

    w = np.empty(M)
    if kind == KIND_BASIC or kind == KIND_GRAY:
        for m in range(M):
            w[m] = prev_predictive[m]
    elif kind == KIND_KLAASSEN_SIMPLE:
        for m in range(M):
            w[m] = filtered_prev[m]
    else:  # KIND_DUEKER: one-period-ahead smoothed weights for the t-2 state
        tot = 0.0
        for m in range(M):
            acc = 0.0
            for i in range(M):
                if prev_predictive[i] > 0.0:
                    acc += trans[i, m] * filtered_prev[i] / prev_predictive[i]
            w[m] = prevprev_filtered[m] * acc
            tot += w[m]
        if tot > 0.0:
            for m in range(M):
                w[m] /= tot
        else:
            for m in range(M):
                w[m] = prevprev_filtered[m]
        for m in range(M):
            out_smoothed[m] = w[m]

    mu_bar = 0.0
    for m in range(M):
        mu_bar += mu[m] * w[m]
    if kind == KIND_GRAY:
        # total variance of the observable: mean dispersion enters
        sig2 = -mu_bar * mu_bar
        for m in range(M):
            sig2 += (mu[m] * mu[m] + hprev[m]) * w[m]
    else:
        sig2 = 0.0
        for m in range(M):
            sig2 += hprev[m] * w[m]
    e = y_prev - mu_bar
    for m in range(M):
        out_var[m] = gamma[m] + alpha[m] * e * e + beta[m] * sig2


@njit(cache=True)
def forward_filter_kernel(y, mu, gamma, alpha, beta, trans, pi0, sigma1sq, kind,
                          filtered, predictive, aux_var):
    """Approximate forward filter; returns the accumulated log marginal."""
    T = y.shape[0]
    M = mu.shape[0]
    hprev = np.full(M, sigma1sq)
    variances = np.empty(M)
    smoothed = np.empty(M)
    logg = np.empty(M)
    ppf = np.empty(M)
    log_marginal = 0.0
    for t in range(T):
        if t == 0:
            for m in range(M):
                predictive[0, m] = pi0[m]
                variances[m] = sigma1sq
        else:
            for m in range(M):
                acc = 0.0
                for j in range(M):
                    acc += trans[m, j] * filtered[t - 1, j]
                predictive[t, m] = acc
            for m in range(M):
                ppf[m] = pi0[m] if t == 1 else filtered[t - 2, m]
            aux_step_core(kind, hprev, predictive[t - 1], ppf, mu, gamma, alpha,
                          beta, trans, y[t - 1], filtered[t - 1], predictive[t],
                          variances, smoothed)
        mx = -np.inf
        for m in range(M):
            aux_var[t, m] = variances[m]
            logg[m] = _norm_logpdf(y[t], mu[m], variances[m])
            if logg[m] > mx:
                mx = logg[m]
        ssum = 0.0
        for m in range(M):
            wgt = predictive[t, m] * np.exp(logg[m] - mx)
            filtered[t, m] = wgt
            ssum += wgt
        for m in range(M):
            filtered[t, m] /= ssum
        log_marginal += mx + np.log(ssum)
        for m in range(M):
            hprev[m] = variances[m]
    return log_marginal


@njit(cache=True)
def backward_sample_kernel(filtered, predictive, trans, u, reg):
    """Sample a trajectory backward from filter output; returns its log law."""
    T, M = filtered.shape
    probs = np.empty(M)
    reg[T - 1] = categorical_invcdf(filtered[T - 1], u[T - 1])
    logq = np.log(filtered[T - 1, reg[T - 1]])
    for t in range(T - 2, -1, -1):
        i = reg[t + 1]
        den = predictive[t + 1, i]
        for m in range(M):
            probs[m] = trans[i, m] * filtered[t, m] / den
        reg[t] = categorical_invcdf(probs, u[t])
        logq += np.log(probs[reg[t]])
    return logq


@njit(cache=True)
def proposal_logdensity_kernel(reg, filtered, predictive, trans):
    T, M = filtered.shape
    p = filtered[T - 1, reg[T - 1]]
    if p <= 0.0:
        return -np.inf
    logq = np.log(p)
    for t in range(T - 2, -1, -1):
        i = reg[t + 1]
        num = trans[i, reg[t]] * filtered[t, reg[t]]
        if num <= 0.0:
            return -np.inf
        logq += np.log(num) - np.log(predictive[t + 1, i])
    return logq


@njit(cache=True)
def antithetic_reference_kernel(filtered, predictive, trans, cur_reg, K, n_fresh,
                                u_raw, slot_draw, branch_u, assign_u, out_reg, out_logq):
    """Backward-sample ``n_fresh`` paths antithetically coupled to ``cur_reg``.

    Per time step the current path's driving uniform is reconstructed from
    its inverse-CDF cell, the permuted-displacement relations are inverted to
    recover the companion uniforms, and those drive the fresh paths (each
    against its own successor's categorical).
    """
    T, M = filtered.shape
    probs_cur = np.empty(M)
    probs_f = np.empty(M)
    others = np.empty(2)
    for f in range(n_fresh):
        out_logq[f] = 0.0
    for t in range(T - 1, -1, -1):
        if t == T - 1:
            for m in range(M):
                probs_cur[m] = filtered[T - 1, m]
        else:
            i = cur_reg[t + 1]
            den = predictive[t + 1, i]
            for m in range(M):
                probs_cur[m] = trans[i, m] * filtered[t, m] / den
        a = 0.0
        for m in range(cur_reg[t]):
            a += probs_cur[m]
        width = probs_cur[cur_reg[t]]
        u_cur = a + u_raw[t] * width
        if K == 2:
            others[0] = 1.0 - u_cur
        else:
            j = slot_draw[t]
            if j == 0:
                r1 = u_cur
            elif j == 1:
                r1 = (u_cur + 0.5) % 1.0
            else:
                if branch_u[t] < 0.5:
                    r1 = (1.0 - u_cur) / 2.0
                else:
                    r1 = (2.0 - u_cur) / 2.0
            r2 = (r1 + 0.5) % 1.0
            r3 = 1.0 - (2.0 * r1) % 1.0
            if j == 0:
                o0, o1 = r2, r3
            elif j == 1:
                o0, o1 = r1, r3
            else:
                o0, o1 = r1, r2
            if assign_u[t] < 0.5:
                others[0] = o0
                others[1] = o1
            else:
                others[0] = o1
                others[1] = o0
        for f in range(n_fresh):
            if t == T - 1:
                for m in range(M):
                    probs_f[m] = filtered[T - 1, m]
            else:
                i = out_reg[f, t + 1]
                den = predictive[t + 1, i]
                for m in range(M):
                    probs_f[m] = trans[i, m] * filtered[t, m] / den
            s = categorical_invcdf(probs_f, others[f])
            out_reg[f, t] = s
            out_logq[f] += np.log(probs_f[s])


@njit(cache=True)
def single_move_logweights(y, reg, t, mu, gamma, alpha, beta, log_trans, log_pi0,
                           sigma1sq, sig2_prev, eps_prev, logw):
    """Unnormalized log full-conditional of the state at ``t``.

    The trailing likelihood product is recomputed through the variance
    recursion from t to T because of path dependence.
    """
    T = y.shape[0]
    M = mu.shape[0]
    for m in range(M):
        lw = log_pi0[m] if t == 0 else log_trans[m, reg[t - 1]]
        if t < T - 1:
            lw += log_trans[reg[t + 1], m]
        if lw == -np.inf:
            logw[m] = -np.inf
            continue
        if t == 0:
            s2 = sigma1sq
        else:
            s2 = gamma[m] + alpha[m] * eps_prev * eps_prev + beta[m] * sig2_prev
        e = y[t] - mu[m]
        lw += _norm_logpdf(y[t], mu[m], s2)
        p_s2 = s2
        p_e = e
        for j in range(t + 1, T):
            sj = reg[j]
            p_s2 = gamma[sj] + alpha[sj] * p_e * p_e + beta[sj] * p_s2
            lw += _norm_logpdf(y[j], mu[sj], p_s2)
            p_e = y[j] - mu[sj]
        logw[m] = lw


@njit(cache=True)
def single_move_kernel(y, reg, mu, gamma, alpha, beta, log_trans, log_pi0, sigma1sq,
                       us, sig2):
    """One full single-move Gibbs sweep over t = 1..T, in place."""
    T = y.shape[0]
    M = mu.shape[0]
    logw = np.empty(M)
    probs = np.empty(M)
    eps_prev = 0.0
    sig2_prev = 0.0
    for t in range(T):
        single_move_logweights(y, reg, t, mu, gamma, alpha, beta, log_trans,
                               log_pi0, sigma1sq, sig2_prev, eps_prev, logw)
        mx = -np.inf
        for m in range(M):
            if logw[m] > mx:
                mx = logw[m]
        tot = 0.0
        for m in range(M):
            probs[m] = np.exp(logw[m] - mx)
            tot += probs[m]
        for m in range(M):
            probs[m] /= tot
        s = categorical_invcdf(probs, us[t])
        reg[t] = s
        if t == 0:
            sig2[0] = sigma1sq
        else:
            sig2[t] = gamma[s] + alpha[s] * eps_prev * eps_prev + beta[s] * sig2_prev
        sig2_prev = sig2[t]
        eps_prev = y[t] - mu[s]


@njit(cache=True)
def garch_taylor_kernel(y, reg, mu, gamma, alpha, beta, k, sigma1sq, wstar, grads):
    """ARMA-form residuals of the squared errors and their sensitivities to
    regime-k volatility coefficients, with the beta-damped accumulation."""
    T = y.shape[0]
    e_prev = y[0] - mu[reg[0]]
    wstar[0] = e_prev * e_prev - sigma1sq
    grads[0, 0] = 0.0
    grads[0, 1] = 0.0
    grads[0, 2] = 0.0
    for t in range(1, T):
        s = reg[t]
        e2p = e_prev * e_prev
        bt = beta[s]
        xk = 1.0 if s == k else 0.0
        wprev = wstar[t - 1]
        wstar[t] = (y[t] - mu[s]) ** 2 - gamma[s] - alpha[s] * e2p - bt * (e2p - wprev)
        grads[t, 0] = -xk + bt * grads[t - 1, 0]
        grads[t, 1] = -xk * e2p + bt * grads[t - 1, 1]
        grads[t, 2] = -xk * (e2p - wprev) + bt * grads[t - 1, 2]
        e_prev = y[t] - mu[s]
