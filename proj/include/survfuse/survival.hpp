#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "survfuse/error.hpp"

namespace survfuse {

// Right-censored observation: `event` is 1 when the event was observed at
// `time`, 0 when the subject was censored then.
struct Obs {
    double time = 0.0;
    int event = 0;
};

inline void check_cohort(const std::vector<Obs>& obs) {
    if (obs.empty()) throw DataError("survival: empty cohort");
    bool any_event = false;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (!(obs[i].time > 0.0) || !std::isfinite(obs[i].time))
            throw DataError("survival: nonpositive or non-finite time at row " +
                            std::to_string(i));
        if (obs[i].event != 0 && obs[i].event != 1)
            throw DataError("survival: event must be 0 or 1 at row " + std::to_string(i));
        if (obs[i].event == 1) any_event = true;
    }
    if (!any_event) throw DataError("survival: cohort has no events");
}

// Negative Cox partial log-likelihood with Breslow handling of tied event
// times. Returns the unnormalized sum. `grad`, when non-null, receives
// d(loss)/d(risk_i).
inline double cox_nll(const std::vector<double>& risk, const std::vector<Obs>& obs,
                      std::vector<double>* grad = nullptr) {
    if (risk.size() != obs.size())
        throw ShapeError("cox: " + std::to_string(risk.size()) + " risks vs " +
                         std::to_string(obs.size()) + " observations");
    check_cohort(obs);
    const std::size_t n = risk.size();
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(risk[i]))
            throw StatError("cox: non-finite risk at row " + std::to_string(i));

    // Sort by time descending so the risk set at each event time is a prefix.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return obs[a].time > obs[b].time; });

    double shift = risk[0];
    for (std::size_t i = 1; i < n; ++i) shift = std::max(shift, risk[i]);

    double loss = 0.0;
    if (grad) grad->assign(n, 0.0);

    double cum = 0.0; // sum of exp(risk - shift) over the running risk set
    std::size_t i = 0;
    // inv_s[i] accumulates sum over event times t_j <= T_i of d_j / S_j,
    // where S_j is the risk-set sum at t_j (needed for the gradient).
    std::vector<double> event_inv; // d_j / S_j per distinct event time, in time-desc order
    std::vector<std::pair<std::size_t, std::size_t>> groups; // [start,end) in `order`

    while (i < n) {
        std::size_t j = i;
        const double t = obs[order[i]].time;
        while (j < n && obs[order[j]].time == t) {
            cum += std::exp(risk[order[j]] - shift);
            ++j;
        }
        double d = 0.0, num = 0.0;
        for (std::size_t k = i; k < j; ++k) {
            if (obs[order[k]].event == 1) {
                d += 1.0;
                num += risk[order[k]];
            }
        }
        if (d > 0.0) {
            loss -= num - d * (std::log(cum) + shift);
            event_inv.push_back(d / cum);
        } else {
            event_inv.push_back(0.0);
        }
        groups.emplace_back(i, j);
        i = j;
    }

    if (grad) {
        // Subject i belongs to the risk set of every event time t_j <= T_i.
        // Groups run time-descending, so those are the groups at or after
        // i's own: accumulate d_j/S_j from the last group backward.
        double acc = 0.0;
        for (std::size_t g = groups.size(); g-- > 0;) {
            acc += event_inv[g];
            for (std::size_t k = groups[g].first; k < groups[g].second; ++k) {
                const std::size_t idx = order[k];
                (*grad)[idx] = -static_cast<double>(obs[idx].event) +
                               std::exp(risk[idx] - shift) * acc;
            }
        }
    }
    return loss;
}

// Harrell's concordance index. Pairs are comparable when the earlier time
// carries an event, or when times tie with exactly one event; tied times
// with two events are skipped. Tied risks score half.
inline double concordance(const std::vector<double>& risk, const std::vector<Obs>& obs) {
    if (risk.size() != obs.size())
        throw ShapeError("concordance: size mismatch");
    check_cohort(obs);
    const std::size_t n = obs.size();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            std::size_t a = i, b = j; // a = earlier (or tied) observation
            if (obs[b].time < obs[a].time) std::swap(a, b);
            if (obs[a].time == obs[b].time) {
                if (obs[a].event + obs[b].event != 1) continue;
                if (obs[a].event == 0) std::swap(a, b);
                // a had the event at the shared time; b survived past it.
            } else if (obs[a].event == 0) {
                continue;
            }
            den += 1.0;
            if (risk[a] > risk[b]) num += 1.0;
            else if (risk[a] == risk[b]) num += 0.5;
        }
    if (den == 0.0) throw StatError("concordance: no comparable pairs");
    return num / den;
}

// A step function S(t): right-continuous, S(t) = value of the last step at
// or before t, 1 before the first step.
struct StepFn {
    std::vector<double> times;  // strictly increasing
    std::vector<double> values; // same length

    double at(double t) const {
        // last index with times[i] <= t
        auto it = std::upper_bound(times.begin(), times.end(), t);
        if (it == times.begin()) return 1.0;
        return values[static_cast<std::size_t>(it - times.begin()) - 1];
    }

    // Left limit S(t-): last step strictly before t.
    double at_left(double t) const {
        auto it = std::lower_bound(times.begin(), times.end(), t);
        if (it == times.begin()) return 1.0;
        return values[static_cast<std::size_t>(it - times.begin()) - 1];
    }
};

// Kaplan-Meier product-limit estimator of the survival function.
inline StepFn kaplan_meier(const std::vector<Obs>& obs) {
    if (obs.empty()) throw DataError("kaplan_meier: empty cohort");
    std::vector<std::size_t> order(obs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return obs[a].time < obs[b].time; });
    StepFn s;
    double surv = 1.0;
    double at_risk = static_cast<double>(obs.size());
    std::size_t i = 0;
    while (i < order.size()) {
        const double t = obs[order[i]].time;
        double d = 0.0, c = 0.0;
        while (i < order.size() && obs[order[i]].time == t) {
            if (obs[order[i]].event == 1) d += 1.0;
            else c += 1.0;
            ++i;
        }
        if (d > 0.0) {
            surv *= 1.0 - d / at_risk;
            s.times.push_back(t);
            s.values.push_back(surv);
        }
        at_risk -= d + c;
    }
    return s;
}

// KM estimate of the censoring distribution G(t): event flags flipped so
// censorings are the "events".
inline StepFn censoring_km(const std::vector<Obs>& obs) {
    std::vector<Obs> flipped(obs);
    for (Obs& o : flipped) o.event = 1 - o.event;
    return kaplan_meier(flipped);
}

// Breslow estimate of the baseline cumulative hazard from risks fitted on
// the same cohort: H0(t) = sum over event times t_j <= t of d_j / S_j.
inline StepFn breslow_baseline(const std::vector<double>& risk, const std::vector<Obs>& obs) {
    if (risk.size() != obs.size()) throw ShapeError("breslow: size mismatch");
    check_cohort(obs);
    const std::size_t n = obs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return obs[a].time > obs[b].time; });
    double shift = risk[0];
    for (std::size_t i = 1; i < n; ++i) shift = std::max(shift, risk[i]);

    std::vector<double> ts, hs; // time-descending provisional
    double cum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        const double t = obs[order[i]].time;
        double d = 0.0;
        while (i < n && obs[order[i]].time == t) {
            cum += std::exp(risk[order[i]] - shift);
            if (obs[order[i]].event == 1) d += 1.0;
            ++i;
        }
        if (d > 0.0) {
            ts.push_back(t);
            hs.push_back(d / (cum * std::exp(shift)));
        }
    }
    StepFn h;
    double acc = 0.0;
    for (std::size_t k = ts.size(); k-- > 0;) {
        acc += hs[k];
        h.times.push_back(ts[k]);
        h.values.push_back(acc);
    }
    // StepFn convention: value 1 before the first step does not fit a
    // cumulative hazard, so callers must use cumhaz_at below.
    return h;
}

inline double cumhaz_at(const StepFn& h, double t) {
    auto it = std::upper_bound(h.times.begin(), h.times.end(), t);
    if (it == h.times.begin()) return 0.0;
    return h.values[static_cast<std::size_t>(it - h.times.begin()) - 1];
}

// Predicted survival under a proportional-hazards model with Breslow
// baseline: S(t | r) = exp(-H0(t) * exp(r)).
inline double ph_survival(const StepFn& baseline, double risk, double t) {
    return std::exp(-cumhaz_at(baseline, t) * std::exp(risk));
}

// IPCW Brier score at time t.
//
// surv_at_t[i] is the model's predicted P(T_i > t). Weights come from the
// censoring KM of the same cohort: subjects with T_i <= t and an event weigh
// 1/G(T_i-), subjects still at risk weigh 1/G(t-), censored-before-t
// subjects drop out. Subjects whose weight denominator hits zero are
// skipped; `dropped`, when non-null, reports how many.
inline double brier_score(const std::vector<double>& surv_at_t, const std::vector<Obs>& obs,
                          const StepFn& cens, double t, std::size_t* dropped = nullptr) {
    if (surv_at_t.size() != obs.size()) throw ShapeError("brier: size mismatch");
    const std::size_t n = obs.size();
    double sum = 0.0;
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = surv_at_t[i];
        if (!(s >= 0.0 && s <= 1.0))
            throw StatError("brier: predicted survival outside [0,1] at row " +
                            std::to_string(i));
        if (obs[i].time <= t && obs[i].event == 1) {
            const double g = cens.at_left(obs[i].time);
            if (g <= 0.0) { ++skipped; continue; }
            sum += s * s / g;
        } else if (obs[i].time > t) {
            const double g = cens.at_left(t);
            if (g <= 0.0) { ++skipped; continue; }
            sum += (1.0 - s) * (1.0 - s) / g;
        }
        // censored at or before t: contributes nothing
    }
    if (dropped) *dropped = skipped;
    if (skipped == n) throw StatError("brier: all subjects dropped at t=" + std::to_string(t));
    return sum / static_cast<double>(n);
}

// Evaluation grid: `points` equally spaced times between the 5th and 95th
// percentile (type-7) of the observed times.
inline std::vector<double> time_grid(const std::vector<Obs>& obs, std::size_t points = 100) {
    if (points < 2) throw ConfigError("time_grid: need at least 2 points");
    std::vector<double> t;
    t.reserve(obs.size());
    for (const Obs& o : obs) t.push_back(o.time);
    std::sort(t.begin(), t.end());
    auto q = [&](double p) {
        const double h = (static_cast<double>(t.size()) - 1.0) * p;
        const std::size_t lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, t.size() - 1);
        return t[lo] + (h - std::floor(h)) * (t[hi] - t[lo]);
    };
    const double a = q(0.05), b = q(0.95);
    if (!(b > a)) throw StatError("time_grid: degenerate time range");
    std::vector<double> grid(points);
    for (std::size_t i = 0; i < points; ++i)
        grid[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1);
    return grid;
}

struct IbsResult {
    double value = 0.0;
    std::size_t grid_used = 0;     // grid points that entered the integral
    std::size_t grid_excluded = 0; // grid points with G(t-) = 0
    std::size_t subject_drops = 0; // event terms with G(T-) = 0, summed over grid
};

// Integrated Brier score: BS(t) at each grid point, trapezoid-integrated and
// divided by the covered span. Grid points where the censoring survival
// G(t-) is zero are excluded and flagged. `surv(i, t)` is the predicted
// P(T_i > t).
inline IbsResult ipcw_ibs(const std::function<double(std::size_t, double)>& surv,
                          const std::vector<Obs>& obs, const std::vector<double>& grid) {
    if (grid.size() < 2) throw ConfigError("ibs: need at least 2 grid points");
    check_cohort(obs);
    const StepFn cens = censoring_km(obs);
    IbsResult res;
    std::vector<double> ts, bs;
    std::vector<double> s(obs.size());
    for (double t : grid) {
        if (cens.at_left(t) <= 0.0) {
            ++res.grid_excluded;
            continue;
        }
        for (std::size_t i = 0; i < obs.size(); ++i) s[i] = surv(i, t);
        std::size_t dropped = 0;
        bs.push_back(brier_score(s, obs, cens, t, &dropped));
        ts.push_back(t);
        res.subject_drops += dropped;
    }
    if (ts.size() < 2) throw StatError("ibs: fewer than 2 usable grid points");
    res.grid_used = ts.size();
    double integral = 0.0;
    for (std::size_t i = 1; i < ts.size(); ++i)
        integral += 0.5 * (bs[i - 1] + bs[i]) * (ts[i] - ts[i - 1]);
    res.value = integral / (ts.back() - ts.front());
    return res;
}

// IBS for a proportional-hazards model: baseline fitted elsewhere, risks for
// the evaluation cohort, censoring KM from the same evaluation cohort.
inline IbsResult model_ibs(const StepFn& baseline, const std::vector<double>& risk,
                           const std::vector<Obs>& obs, std::size_t grid_points = 100) {
    if (risk.size() != obs.size()) throw ShapeError("ibs: size mismatch");
    const std::vector<double> grid = time_grid(obs, grid_points);
    return ipcw_ibs(
        [&](std::size_t i, double t) { return ph_survival(baseline, risk[i], t); }, obs, grid);
}

// Composite score: mean of discrimination (CI) and calibration (1 - IBS).
inline double composite_score(double ci, double ibs) {
    if (!(ci >= 0.0 && ci <= 1.0)) throw StatError("composite_score: CI outside [0,1]");
    if (!(ibs >= 0.0 && ibs <= 1.0)) throw StatError("composite_score: IBS outside [0,1]");
    return (ci + (1.0 - ibs)) / 2.0;
}

// Per-cohort evaluation summary. `small_n` marks test sets too small for a
// precise IBS (n <= 25).
struct MetricsReport {
    double ci = 0.0;
    double ibs = 0.0;
    double cs = 0.0;
    bool has_ci_interval = false;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    std::size_t n = 0;
    bool small_n = false;
};

inline MetricsReport make_report(double ci, double ibs, std::size_t n) {
    MetricsReport r;
    r.ci = ci;
    r.ibs = ibs;
    r.cs = composite_score(ci, ibs);
    r.n = n;
    r.small_n = n <= 25;
    return r;
}

} // namespace survfuse
