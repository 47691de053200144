#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "survfuse/cohort.hpp"
#include "survfuse/error.hpp"
#include "survfuse/matrix.hpp"
#include "survfuse/survival.hpp"

namespace survfuse {

struct LateFusionWeights {
    std::vector<std::string> modality_ids;
    std::vector<double> beta;       // raw coefficients, original score scale
    std::vector<double> normalized; // |beta| / sum|beta|; all zero when degenerate
    double lambda = 0.0;
    bool degenerate = false; // every coefficient shrunk to zero
};

struct LassoOptions {
    std::size_t grid_size = 50;
    double grid_decades = 3.0; // lambda_max down 10^-decades
    std::size_t cv_folds = 5;
    // Tie-break ridge per observation (the solver scales it by n so duplicate
    // columns equilibrate at the same sweep count on any cohort size); 0
    // disables it.
    double ridge_eps = 1e-3;
    double tol = 1e-8; // max |delta beta| per sweep
    std::size_t max_sweeps = 10000;
    std::uint64_t seed = 0;
};

namespace detail {

// Per-subject first and second derivatives of the Breslow Cox negative log
// partial likelihood with respect to the linear predictor eta.
struct CoxDerivs {
    std::vector<double> g; // d nll / d eta_i
    std::vector<double> h; // diagonal of d2 nll / d eta_i^2
    double nll = 0.0;
};

inline CoxDerivs cox_eta_derivs(const std::vector<double>& eta, const std::vector<Obs>& obs,
                                const std::vector<std::size_t>& order_desc) {
    const std::size_t n = eta.size();
    double shift = eta[0];
    for (std::size_t i = 1; i < n; ++i) shift = std::max(shift, eta[i]);

    std::vector<double> inv1, inv2; // d_j/S_j and d_j/S_j^2 per group (shifted S)
    std::vector<std::pair<std::size_t, std::size_t>> groups;
    double cum = 0.0, nll = 0.0;
    std::size_t i = 0;
    while (i < n) {
        const double t = obs[order_desc[i]].time;
        const std::size_t start = i;
        double d = 0.0, num = 0.0;
        while (i < n && obs[order_desc[i]].time == t) {
            cum += std::exp(eta[order_desc[i]] - shift);
            if (obs[order_desc[i]].event == 1) {
                d += 1.0;
                num += eta[order_desc[i]];
            }
            ++i;
        }
        if (d > 0.0) nll -= num - d * (std::log(cum) + shift);
        inv1.push_back(d > 0.0 ? d / cum : 0.0);
        inv2.push_back(d > 0.0 ? d / (cum * cum) : 0.0);
        groups.emplace_back(start, i);
    }

    CoxDerivs out;
    out.nll = nll;
    out.g.assign(n, 0.0);
    out.h.assign(n, 0.0);
    double a = 0.0, b = 0.0;
    for (std::size_t g = groups.size(); g-- > 0;) {
        a += inv1[g];
        b += inv2[g];
        for (std::size_t k = groups[g].first; k < groups[g].second; ++k) {
            const std::size_t idx = order_desc[k];
            const double e = std::exp(eta[idx] - shift);
            out.g[idx] = -static_cast<double>(obs[idx].event) + e * a;
            out.h[idx] = e * a - e * e * b;
        }
    }
    return out;
}

inline double soft_threshold(double z, double lam) {
    if (z > lam) return z - lam;
    if (z < -lam) return z + lam;
    return 0.0;
}

// Cyclic coordinate descent on nll(X beta) + lambda*|beta|_1 +
// n*ridge/2*|beta|_2^2. The ridge is per observation: the likelihood
// curvature grows with n, and the ridge must keep pace for identical
// columns to reach their symmetric optimum in a bounded number of sweeps.
// `beta` doubles as warm start and result.
inline double cox_lasso_solve(const Matrix& x, const std::vector<Obs>& obs, double lambda,
                              double ridge_per_obs, double tol, std::size_t max_sweeps,
                              std::vector<double>& beta) {
    const std::size_t n = x.rows, p = x.cols;
    const double ridge = ridge_per_obs * static_cast<double>(n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return obs[a].time > obs[b].time; });

    std::vector<double> eta(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < p; ++j) eta[i] += x.at(i, j) * beta[j];

    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double max_delta = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const CoxDerivs d = cox_eta_derivs(eta, obs, order);
            double gj = ridge * beta[j], hj = ridge;
            for (std::size_t i = 0; i < n; ++i) {
                gj += x.at(i, j) * d.g[i];
                hj += x.at(i, j) * x.at(i, j) * d.h[i];
            }
            if (!(hj > 1e-12)) continue; // flat direction, leave coordinate alone
            const double z = hj * beta[j] - gj;
            const double nb = soft_threshold(z, lambda) / hj;
            const double delta = nb - beta[j];
            if (delta != 0.0) {
                beta[j] = nb;
                for (std::size_t i = 0; i < n; ++i) eta[i] += delta * x.at(i, j);
                max_delta = std::max(max_delta, std::abs(delta));
            }
        }
        if (max_delta < tol) break;
    }
    return cox_eta_derivs(eta, obs, order).nll;
}

inline double heldout_nll(const Matrix& x, const std::vector<Obs>& obs,
                          const std::vector<double>& beta) {
    std::vector<double> eta(x.rows, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) eta[i] += x.at(i, j) * beta[j];
    return cox_nll(eta, obs);
}

} // namespace detail

// LASSO-penalized Cox regression over per-modality risk scores. Columns are
// standardized internally; the penalty is chosen over a geometric grid by
// mean cross-validated held-out partial likelihood; the reported
// coefficients are back-transformed to the original score scale.
inline LateFusionWeights cox_lasso_fit(const Matrix& scores,
                                       const std::vector<std::string>& modality_ids,
                                       const std::vector<Obs>& obs, const LassoOptions& opt) {
    const std::size_t n = scores.rows, p = scores.cols;
    if (p < 2) throw ConfigError("late fusion: need at least 2 modalities, got " +
                                 std::to_string(p));
    if (modality_ids.size() != p) throw ConfigError("late fusion: modality id count mismatch");
    if (obs.size() != n) throw ShapeError("late fusion: score rows vs observations mismatch");
    check_cohort(obs);
    if (!all_finite(scores)) throw DataError("late fusion: non-finite score");
    if (opt.grid_size < 1) throw ConfigError("late fusion: empty lambda grid");
    if (opt.cv_folds < 2) throw ConfigError("late fusion: cv_folds must be >= 2");
    std::size_t events = 0;
    for (const Obs& o : obs) events += static_cast<std::size_t>(o.event);
    if (events < opt.cv_folds)
        throw DataError("late fusion: " + std::to_string(events) + " events cannot support " +
                        std::to_string(opt.cv_folds) + "-fold CV");

    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    const NormStats norm = zscore_fit(scores, all);
    for (std::size_t j = 0; j < p; ++j)
        if (norm.std[j] <= 1e-8)
            throw DataError("late fusion: score column '" + modality_ids[j] + "' is constant");
    const Matrix xs = zscore_apply(scores, norm);

    // lambda_max: smallest penalty that zeroes every coefficient, i.e. the
    // largest absolute score-gradient at beta = 0.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return obs[a].time > obs[b].time; });
    std::vector<double> eta0(n, 0.0);
    const detail::CoxDerivs d0 = detail::cox_eta_derivs(eta0, obs, order);
    double lambda_max = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        double gj = 0.0;
        for (std::size_t i = 0; i < n; ++i) gj += xs.at(i, j) * d0.g[i];
        lambda_max = std::max(lambda_max, std::abs(gj));
    }
    lambda_max = std::max(lambda_max, 1e-10);

    std::vector<double> grid;
    for (std::size_t g = 0; g < opt.grid_size; ++g) {
        const double frac = opt.grid_size == 1
                                ? 0.0
                                : static_cast<double>(g) / static_cast<double>(opt.grid_size - 1);
        grid.push_back(lambda_max * std::pow(10.0, -opt.grid_decades * frac));
    }

    const std::vector<std::vector<std::size_t>> folds =
        event_stratified_folds(obs, opt.cv_folds, opt.seed);
    std::vector<std::vector<std::size_t>> train_of(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f)
        for (std::size_t f2 = 0; f2 < folds.size(); ++f2)
            if (f2 != f)
                train_of[f].insert(train_of[f].end(), folds[f2].begin(), folds[f2].end());

    // Warm-started path per fold; pick the lambda with the lowest mean
    // held-out negative partial likelihood, largest lambda on ties.
    std::vector<std::vector<double>> warm(folds.size(), std::vector<double>(p, 0.0));
    double best_score = std::numeric_limits<double>::infinity();
    double best_lambda = grid[0];
    for (double lam : grid) {
        double total = 0.0;
        for (std::size_t f = 0; f < folds.size(); ++f) {
            const Matrix xtr = take_rows(xs, train_of[f]);
            const std::vector<Obs> otr = take(obs, train_of[f]);
            detail::cox_lasso_solve(xtr, otr, lam, opt.ridge_eps, opt.tol, opt.max_sweeps,
                                    warm[f]);
            const Matrix xho = take_rows(xs, folds[f]);
            const std::vector<Obs> oho = take(obs, folds[f]);
            total += detail::heldout_nll(xho, oho, warm[f]);
        }
        const double mean_nll = total / static_cast<double>(folds.size());
        if (mean_nll < best_score) {
            best_score = mean_nll;
            best_lambda = lam;
        }
    }

    std::vector<double> beta_std(p, 0.0);
    detail::cox_lasso_solve(xs, obs, best_lambda, opt.ridge_eps, opt.tol, opt.max_sweeps,
                            beta_std);

    LateFusionWeights w;
    w.modality_ids = modality_ids;
    w.lambda = best_lambda;
    w.beta.resize(p);
    for (std::size_t j = 0; j < p; ++j) w.beta[j] = beta_std[j] / norm.std[j];
    double abs_sum = 0.0;
    for (double b : w.beta) abs_sum += std::abs(b);
    w.normalized.assign(p, 0.0);
    if (abs_sum > 0.0) {
        for (std::size_t j = 0; j < p; ++j) w.normalized[j] = std::abs(w.beta[j]) / abs_sum;
    } else {
        w.degenerate = true;
    }
    return w;
}

inline double combine(const std::vector<double>& score_row, const LateFusionWeights& w) {
    if (score_row.size() != w.beta.size())
        throw ShapeError("combine: " + std::to_string(score_row.size()) + " scores vs " +
                         std::to_string(w.beta.size()) + " weights");
    double r = 0.0;
    for (std::size_t j = 0; j < score_row.size(); ++j) r += w.beta[j] * score_row[j];
    return r;
}

} // namespace survfuse
