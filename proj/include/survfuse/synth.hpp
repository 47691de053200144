#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "survfuse/cohort.hpp"
#include "survfuse/error.hpp"
#include "survfuse/matrix.hpp"
#include "survfuse/rng.hpp"

namespace survfuse {

struct SynthModality {
    std::string id;
    std::size_t dim = 8;
    double signal_weight = 0.0;
};

struct SynthConfig {
    std::size_t n = 600;
    std::vector<SynthModality> modalities;
    double gbm_fraction = 0.36;      // share of patients tagged GBM
    double subtype_multiplier = 2.0; // hazard multiplier applied to GBM
    double baseline_hazard = 0.02;   // events per month at risk 0
    double target_censoring = 0.596; // fraction of patients censored
    double censoring_tolerance = 0.03;
    std::uint64_t seed = 1;
};

struct SynthResult {
    std::vector<ClinicalRecord> clinical;
    std::vector<ModalityBlock> blocks;
    std::vector<double> true_risk;
    Matrix modality_signal;          // n x M, unweighted projection per modality
    double censoring_rate = 0.0;     // calibrated exponential rate
    double realized_censoring = 0.0; // fraction actually censored
};

inline void validate(const SynthConfig& c) {
    if (c.n < 2) throw ConfigError("synth: n must be >= 2");
    if (c.modalities.empty()) throw ConfigError("synth: no modalities configured");
    for (const auto& m : c.modalities) {
        if (m.id.empty()) throw ConfigError("synth: modality with empty id");
        if (m.dim < 1) throw ConfigError("synth: modality '" + m.id + "' dim must be >= 1");
    }
    if (!(c.gbm_fraction >= 0.0 && c.gbm_fraction <= 1.0))
        throw ConfigError("synth: gbm_fraction outside [0,1]");
    if (!(c.subtype_multiplier > 0.0)) throw ConfigError("synth: subtype_multiplier must be > 0");
    if (!(c.baseline_hazard > 0.0)) throw ConfigError("synth: baseline_hazard must be > 0");
    if (!(c.target_censoring >= 0.0 && c.target_censoring < 1.0))
        throw ConfigError("synth: target_censoring outside [0,1)");
    if (!(c.censoring_tolerance > 0.0))
        throw ConfigError("synth: censoring_tolerance must be > 0");
}

// Standard-normal features; true log-risk is a weighted sum of one fixed
// unit direction per modality plus a subtype term; survival times are
// exponential with hazard baseline*exp(risk); censoring times are
// exponential with a rate calibrated by bisection so the realized censoring
// fraction lands within tolerance of the target.
inline SynthResult synth_generate(const SynthConfig& cfg) {
    validate(cfg);
    const std::size_t n = cfg.n;
    SynthResult out;
    out.true_risk.assign(n, 0.0);
    out.modality_signal = Matrix(n, cfg.modalities.size());

    for (std::size_t m = 0; m < cfg.modalities.size(); ++m) {
        const SynthModality& mc = cfg.modalities[m];
        ModalityBlock b;
        b.modality_id = mc.id;
        b.dim = mc.dim;
        b.x = Matrix(n, mc.dim);
        Rng feat_rng(derive_seed(cfg.seed, 100 + m));
        for (double& v : b.x.v) v = feat_rng.normal();

        Rng dir_rng(derive_seed(cfg.seed, 200 + m));
        std::vector<double> u(mc.dim);
        double norm = 0.0;
        for (double& v : u) {
            v = dir_rng.normal();
            norm += v * v;
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) norm = 1.0;
        for (double& v : u) v /= norm;

        for (std::size_t i = 0; i < n; ++i) {
            double proj = 0.0;
            for (std::size_t j = 0; j < mc.dim; ++j) proj += u[j] * b.x.at(i, j);
            out.modality_signal.at(i, m) = proj;
            out.true_risk[i] += mc.signal_weight * proj;
        }
        out.blocks.push_back(std::move(b));
    }

    Rng subtype_rng(derive_seed(cfg.seed, 300));
    std::vector<std::string> subtype(n);
    const double log_mult = std::log(cfg.subtype_multiplier);
    for (std::size_t i = 0; i < n; ++i) {
        const bool gbm = subtype_rng.uniform() < cfg.gbm_fraction;
        subtype[i] = gbm ? "GBM" : "LGG";
        if (gbm) out.true_risk[i] += log_mult;
    }

    Rng surv_rng(derive_seed(cfg.seed, 400));
    std::vector<double> t_event(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double hazard = cfg.baseline_hazard * std::exp(out.true_risk[i]);
        t_event[i] = std::max(-std::log(surv_rng.uniform_pos()) / hazard, 1e-12);
    }

    Rng cens_rng(derive_seed(cfg.seed, 500));
    std::vector<double> e_cens(n); // unit-exponential draws; censor time = e/rate
    for (double& e : e_cens) e = std::max(-std::log(cens_rng.uniform_pos()), 1e-300);

    double rate = 0.0;
    if (cfg.target_censoring > 0.0) {
        auto realized = [&](double r) {
            std::size_t c = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (e_cens[i] / r < t_event[i]) ++c;
            return static_cast<double>(c) / static_cast<double>(n);
        };
        // Censoring fraction grows with the rate: bracket, then bisect.
        double lo = 1e-12, hi = 1.0;
        std::size_t iter = 0;
        while (realized(hi) < cfg.target_censoring) {
            hi *= 2.0;
            if (++iter > 60) throw StatError("synth: censoring target unreachable (bracket)");
        }
        rate = hi;
        double best_err = std::abs(realized(hi) - cfg.target_censoring);
        for (iter = 0; iter < 60; ++iter) {
            const double mid = 0.5 * (lo + hi);
            const double f = realized(mid);
            const double err = std::abs(f - cfg.target_censoring);
            if (err < best_err) {
                best_err = err;
                rate = mid;
            }
            if (f < cfg.target_censoring) lo = mid;
            else hi = mid;
        }
        if (best_err > cfg.censoring_tolerance)
            throw StatError("synth: realized censoring misses target by " +
                            std::to_string(best_err) + " after 60 bisection iterations");
    }
    out.censoring_rate = rate;

    char idbuf[32];
    std::size_t censored = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t_cens = rate > 0.0 ? e_cens[i] / rate : std::numeric_limits<double>::infinity();
        ClinicalRecord rec;
        std::snprintf(idbuf, sizeof(idbuf), "P%04zu", i + 1);
        rec.patient_id = idbuf;
        rec.subtype = subtype[i];
        if (t_cens < t_event[i]) {
            rec.time_months = t_cens;
            rec.event = 0;
            ++censored;
        } else {
            rec.time_months = t_event[i];
            rec.event = 1;
        }
        out.clinical.push_back(std::move(rec));
    }
    out.realized_censoring = static_cast<double>(censored) / static_cast<double>(n);

    for (auto& b : out.blocks) {
        b.ids.clear();
        for (const auto& rec : out.clinical) b.ids.push_back(rec.patient_id);
    }
    return out;
}

} // namespace survfuse
