#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "survfuse/cohort.hpp"
#include "survfuse/error.hpp"
#include "survfuse/late_fusion.hpp"
#include "survfuse/matrix.hpp"
#include "survfuse/models.hpp"
#include "survfuse/rng.hpp"
#include "survfuse/stats.hpp"
#include "survfuse/survival.hpp"

namespace survfuse {

struct BootstrapConfig {
    std::size_t resamples = 10000;
    double level = 0.95;
};

struct ExperimentSpec {
    std::string name; // results-table label, e.g. "modA+modB"
    std::vector<std::string> modalities;
    // Patient set restriction: when non-empty, the cohort is intersected
    // over these modalities (a superset of `modalities`), so two specs with
    // the same restriction share patients and folds exactly.
    std::vector<std::string> restrict_to;
    Fusion fusion = Fusion::unimodal;
    std::vector<EncoderSpec> encoders; // parallel to modalities
    HeadConfig head;
    TrainConfig train;
    LassoOptions lasso; // late fusion only
    std::size_t k_folds = 5;
    double test_fraction = 0.25;
    bool stratify_by_subtype = false;
    BootstrapConfig bootstrap;
    std::uint64_t seed = 1;
};

struct FoldResult {
    std::size_t fold = 0;
    TrainTrace trace; // fused-model trace (or unimodal model's)
    double test_ci = 0.0;
    double test_ibs = 0.0;
    double test_cs = 0.0;
    std::vector<double> test_risk; // this fold's model on the shared test set
};

struct ExperimentResult {
    std::string name;
    Fusion fusion = Fusion::unimodal;
    std::vector<FoldResult> folds;
    MetricsReport report; // test-set ensemble with bootstrap interval
    std::uint64_t plan_hash = 0;
    std::size_t n_train = 0;
    std::size_t param_count = 0; // per fold model (late: sum of unimodal models)
    std::vector<LateFusionWeights> fold_weights; // late fusion only
    std::vector<double> ensemble_test_risk;      // per-fold mean on the test set
};

namespace detail {

struct FoldData {
    std::vector<Matrix> train_x, val_x, test_x, pool_x; // pool = train+val
    std::vector<Obs> train_obs, val_obs, test_obs, pool_obs;
    std::vector<std::size_t> pool_idx;
};

// Normalizes each modality with statistics fit on the fold's training rows
// and slices out the fold's train/validation blocks plus the shared test
// block, all in that normalized space.
inline FoldData prepare_fold(const AlignedCohort& cohort,
                             const std::vector<Matrix>& features, const FoldPlan& plan,
                             std::size_t fold) {
    FoldData d;
    const std::vector<std::size_t> train_idx = plan.train_of(fold);
    const std::vector<std::size_t>& val_idx = plan.folds[fold];
    d.pool_idx = plan.all_train();
    for (const Matrix& x : features) {
        const NormStats stats = zscore_fit(x, train_idx);
        const Matrix xn = zscore_apply(x, stats);
        d.train_x.push_back(take_rows(xn, train_idx));
        d.val_x.push_back(take_rows(xn, val_idx));
        d.test_x.push_back(take_rows(xn, plan.test));
        d.pool_x.push_back(take_rows(xn, d.pool_idx));
    }
    d.train_obs = take(cohort.obs, train_idx);
    d.val_obs = take(cohort.obs, val_idx);
    d.test_obs = take(cohort.obs, plan.test);
    d.pool_obs = take(cohort.obs, d.pool_idx);
    return d;
}

inline std::vector<Matrix> pick(const std::vector<Matrix>& xs, std::size_t m) {
    return {xs[m]};
}

} // namespace detail

// Trains one model (or model set, for two-stage strategies) on a fold and
// returns risk vectors for validation, test, and the train+validation pool.
struct FoldModelOutput {
    TrainTrace trace;
    std::vector<double> test_risk, pool_risk;
    std::size_t param_count = 0;
    LateFusionWeights weights; // late fusion only
};

inline FoldModelOutput train_fold_model(const ExperimentSpec& spec, const detail::FoldData& d,
                                        std::uint64_t fold_seed) {
    FoldModelOutput out;
    const std::size_t n_mod = spec.modalities.size();
    auto unimodal_cfg = [&](std::size_t m) {
        TrainConfig c = spec.train;
        c.seed = derive_seed(fold_seed, 0x100 + m);
        return c;
    };

    switch (spec.fusion) {
        case Fusion::unimodal:
        case Fusion::joint: {
            FusionModel model(spec.fusion, spec.encoders, spec.head,
                              derive_seed(fold_seed, 0x10));
            TrainConfig cfg = spec.train;
            cfg.seed = derive_seed(fold_seed, 0x11);
            out.trace = train_model(model, d.train_x, d.train_obs, d.val_x, d.val_obs, cfg);
            out.test_risk = model.predict(d.test_x);
            out.pool_risk = model.predict(d.pool_x);
            out.param_count = model.count_params();
            return out;
        }
        case Fusion::early:
        case Fusion::bilinear:
        case Fusion::cross_attention:
        case Fusion::gated: {
            // Stage 1: per-modality unimodal pretraining. Stage 2: freeze
            // those encoders inside the fused model and train the head.
            FusionModel fused(spec.fusion, spec.encoders, spec.head,
                              derive_seed(fold_seed, 0x20));
            for (std::size_t m = 0; m < n_mod; ++m) {
                FusionModel uni(Fusion::unimodal, {spec.encoders[m]}, spec.head,
                                derive_seed(fold_seed, 0x30 + m));
                train_model(uni, detail::pick(d.train_x, m), d.train_obs,
                            detail::pick(d.val_x, m), d.val_obs, unimodal_cfg(m));
                fused.copy_encoder_from(m, uni);
            }
            fused.freeze_encoders();
            TrainConfig cfg = spec.train;
            cfg.seed = derive_seed(fold_seed, 0x21);
            out.trace = train_model(fused, d.train_x, d.train_obs, d.val_x, d.val_obs, cfg);
            out.test_risk = fused.predict(d.test_x);
            out.pool_risk = fused.predict(d.pool_x);
            out.param_count = fused.count_params();
            return out;
        }
        case Fusion::late: {
            // Unimodal models per modality; a penalized Cox fit over their
            // in-sample training scores provides the combination weights.
            std::vector<std::vector<double>> test_scores(n_mod), pool_scores(n_mod);
            Matrix train_scores(d.train_obs.size(), n_mod);
            for (std::size_t m = 0; m < n_mod; ++m) {
                FusionModel uni(Fusion::unimodal, {spec.encoders[m]}, spec.head,
                                derive_seed(fold_seed, 0x30 + m));
                TrainTrace tr = train_model(uni, detail::pick(d.train_x, m), d.train_obs,
                                            detail::pick(d.val_x, m), d.val_obs,
                                            unimodal_cfg(m));
                if (m == 0) out.trace = tr;
                const std::vector<double> tr_risk = uni.predict(detail::pick(d.train_x, m));
                for (std::size_t i = 0; i < tr_risk.size(); ++i)
                    train_scores.at(i, m) = tr_risk[i];
                test_scores[m] = uni.predict(detail::pick(d.test_x, m));
                pool_scores[m] = uni.predict(detail::pick(d.pool_x, m));
                out.param_count += uni.count_params();
            }
            LassoOptions lopt = spec.lasso;
            lopt.seed = derive_seed(fold_seed, 0x40);
            out.weights = cox_lasso_fit(train_scores, spec.modalities, d.train_obs, lopt);
            auto fuse = [&](const std::vector<std::vector<double>>& scores, std::size_t n) {
                std::vector<double> r(n);
                std::vector<double> row(n_mod);
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t m = 0; m < n_mod; ++m) row[m] = scores[m][i];
                    r[i] = combine(row, out.weights);
                }
                return r;
            };
            out.test_risk = fuse(test_scores, d.test_obs.size());
            out.pool_risk = fuse(pool_scores, d.pool_obs.size());
            return out;
        }
    }
    throw ConfigError("run: unsupported strategy");
}

inline AlignedCohort align_for_spec(const ExperimentSpec& spec, const Cohort& cohort) {
    if (spec.modalities.empty()) throw ConfigError("run: no modalities in spec");
    if (spec.encoders.size() != spec.modalities.size())
        throw ConfigError("run: " + std::to_string(spec.encoders.size()) + " encoder specs for " +
                          std::to_string(spec.modalities.size()) + " modalities");
    std::vector<std::string> align_set =
        spec.restrict_to.empty() ? spec.modalities : spec.restrict_to;
    for (const auto& m : spec.modalities)
        if (std::find(align_set.begin(), align_set.end(), m) == align_set.end())
            throw ConfigError("run: modality '" + m + "' missing from restriction set");
    return intersect(cohort, align_set);
}

inline FoldPlan plan_for_spec(const ExperimentSpec& spec, const AlignedCohort& aligned) {
    // The plan seed depends only on the experiment seed, so specs sharing a
    // seed and a restriction set produce identical plans (controlled
    // comparisons rely on this).
    return make_folds(aligned, spec.k_folds, spec.test_fraction,
                      derive_seed(spec.seed, 0x706c616e), spec.stratify_by_subtype);
}

inline ExperimentResult run_experiment(const ExperimentSpec& spec, const Cohort& cohort) {
    if (spec.bootstrap.resamples < 100)
        throw ConfigError("run: bootstrap resamples must be >= 100");
    const AlignedCohort aligned = align_for_spec(spec, cohort);
    const FoldPlan plan = plan_for_spec(spec, aligned);
    if (plan.test.empty()) throw ConfigError("run: empty test set; raise test_fraction");

    // Feature matrices for the modeled modalities, aligned-cohort row order.
    std::vector<Matrix> features;
    const std::vector<std::string>& align_set =
        spec.restrict_to.empty() ? spec.modalities : spec.restrict_to;
    for (const auto& m : spec.modalities) {
        const std::size_t slot = static_cast<std::size_t>(
            std::find(align_set.begin(), align_set.end(), m) - align_set.begin());
        features.push_back(aligned.features[slot]);
    }
    for (std::size_t m = 0; m < features.size(); ++m)
        if (features[m].cols != spec.encoders[m].input_dim)
            throw ConfigError("run: modality '" + spec.modalities[m] + "' has dim " +
                              std::to_string(features[m].cols) + ", encoder spec says " +
                              std::to_string(spec.encoders[m].input_dim));

    ExperimentResult res;
    res.name = spec.name;
    res.fusion = spec.fusion;
    res.plan_hash = plan.hash();
    res.n_train = plan.all_train().size();

    const std::vector<Obs> test_obs = take(aligned.obs, plan.test);
    const std::vector<Obs> pool_obs = take(aligned.obs, plan.all_train());
    std::vector<double> ens_test(test_obs.size(), 0.0), ens_pool(pool_obs.size(), 0.0);

    for (std::size_t f = 0; f < spec.k_folds; ++f) {
        const detail::FoldData d = detail::prepare_fold(aligned, features, plan, f);
        FoldModelOutput m;
        try {
            m = train_fold_model(spec, d, derive_seed(spec.seed, 0xf01d0000 + f));
        } catch (const TrainError& e) {
            throw TrainError("fold " + std::to_string(f) + ": " + e.what());
        }
        FoldResult fr;
        fr.fold = f;
        fr.trace = m.trace;
        fr.test_ci = concordance(m.test_risk, test_obs);
        const StepFn base = breslow_baseline(m.pool_risk, pool_obs);
        fr.test_ibs = model_ibs(base, m.test_risk, test_obs).value;
        fr.test_cs = composite_score(fr.test_ci, fr.test_ibs);
        fr.test_risk = m.test_risk;
        res.folds.push_back(std::move(fr));
        res.param_count = m.param_count;
        if (spec.fusion == Fusion::late) res.fold_weights.push_back(m.weights);
        for (std::size_t i = 0; i < ens_test.size(); ++i) ens_test[i] += m.test_risk[i];
        for (std::size_t i = 0; i < ens_pool.size(); ++i) ens_pool[i] += m.pool_risk[i];
    }
    const double inv_k = 1.0 / static_cast<double>(spec.k_folds);
    for (double& r : ens_test) r *= inv_k;
    for (double& r : ens_pool) r *= inv_k;
    res.ensemble_test_risk = ens_test;

    const double ci = concordance(ens_test, test_obs);
    const StepFn base = breslow_baseline(ens_pool, pool_obs);
    const double ibs = model_ibs(base, ens_test, test_obs).value;
    res.report = make_report(ci, ibs, test_obs.size());

    const BootstrapResult bs = bootstrap_ci(
        test_obs.size(),
        [&](const std::vector<std::size_t>& idx) {
            return concordance(take(ens_test, idx), take(test_obs, idx));
        },
        spec.bootstrap.resamples, derive_seed(spec.seed, 0xb007), spec.bootstrap.level);
    res.report.has_ci_interval = true;
    res.report.ci_lower = bs.lower;
    res.report.ci_upper = bs.upper;
    return res;
}

struct ComparisonResult {
    std::vector<double> delta_cs; // per fold, A minus B
    double mean_delta = 0.0;
    double p_value = 1.0;
    double min_p = 1.0; // 1 / 2^k
    bool controlled = false;
};

// Same-split comparison of two finished runs. Refuses runs whose fold plans
// differ (the per-fold deltas would not be paired).
inline ComparisonResult controlled_comparison(const ExperimentResult& a,
                                              const ExperimentResult& b) {
    if (a.plan_hash != b.plan_hash)
        throw PlanMismatchError("not a controlled comparison: fold plans differ (" +
                                a.name + " vs " + b.name + ")");
    if (a.folds.size() != b.folds.size())
        throw PlanMismatchError("not a controlled comparison: fold counts differ");
    ComparisonResult c;
    c.controlled = true;
    for (std::size_t f = 0; f < a.folds.size(); ++f)
        c.delta_cs.push_back(a.folds[f].test_cs - b.folds[f].test_cs);
    c.mean_delta = mean(c.delta_cs);
    c.p_value = paired_sign_flip_p(c.delta_cs);
    c.min_p = 1.0 / static_cast<double>(std::uint64_t{1} << c.delta_cs.size());
    return c;
}

} // namespace survfuse
