#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "survfuse/adam.hpp"
#include "survfuse/autodiff.hpp"
#include "survfuse/error.hpp"
#include "survfuse/matrix.hpp"
#include "survfuse/params.hpp"
#include "survfuse/rng.hpp"
#include "survfuse/survival.hpp"

namespace survfuse {

enum class Fusion { unimodal, early, late, joint, bilinear, cross_attention, gated };

inline std::string fusion_name(Fusion f) {
    switch (f) {
        case Fusion::unimodal: return "unimodal";
        case Fusion::early: return "early";
        case Fusion::late: return "late";
        case Fusion::joint: return "joint";
        case Fusion::bilinear: return "bilinear";
        case Fusion::cross_attention: return "cross_attention";
        case Fusion::gated: return "gated";
    }
    throw ConfigError("fusion_name: unknown strategy");
}

inline Fusion fusion_from_name(const std::string& s) {
    for (Fusion f : {Fusion::unimodal, Fusion::early, Fusion::late, Fusion::joint,
                     Fusion::bilinear, Fusion::cross_attention, Fusion::gated})
        if (fusion_name(f) == s) return f;
    throw ConfigError("unknown fusion strategy '" + s + "'");
}

struct EncoderSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;
    std::size_t output_dim = 0;
    double dropout = 0.5;
};

struct HeadConfig {
    std::size_t hidden = 512;          // early/joint concat head
    double dropout = 0.3;              // early/joint head dropout
    std::size_t attention_dim = 256;   // bilinear/cross-attention projections
    double attention_dropout = 0.25;   // bilinear/cross-attention/gated heads
};

struct TrainConfig {
    std::size_t epochs = 80;
    double head_lr = 1e-4;
    double encoder_lr = 1e-5;
    std::size_t patience = 10;
    // Epochs that must elapse before patience may stop training. Validation
    // concordance is noisy at small n; without a floor, a lucky snapshot in
    // the first few epochs can freeze an untrained model.
    std::size_t min_epochs = 1;
    std::uint64_t seed = 0;
};

// One model = per-modality feedforward encoders plus a fusion head mapping
// the embeddings to a scalar risk per patient. Strategy `late` is handled
// at the experiment level, not here.
class FusionModel {
public:
    FusionModel(Fusion fusion, std::vector<EncoderSpec> encoders, HeadConfig head,
                std::uint64_t init_seed)
        : fusion_(fusion), encoders_(std::move(encoders)), head_(head) {
        if (fusion_ == Fusion::late)
            throw ConfigError("late fusion has no single trainable model");
        const std::size_t m = encoders_.size();
        if (fusion_ == Fusion::unimodal && m != 1)
            throw ConfigError("unimodal strategy requires exactly 1 modality, got " +
                              std::to_string(m));
        if ((fusion_ == Fusion::early || fusion_ == Fusion::joint) && m < 2)
            throw ConfigError(fusion_name(fusion_) + " fusion requires >= 2 modalities");
        if ((fusion_ == Fusion::bilinear || fusion_ == Fusion::cross_attention ||
             fusion_ == Fusion::gated) &&
            m != 2)
            throw ConfigError(fusion_name(fusion_) + " fusion requires exactly 2 modalities");
        for (const auto& e : encoders_) {
            if (e.input_dim == 0 || e.output_dim == 0)
                throw ConfigError("encoder dims must be positive");
            if (e.output_dim != encoders_[0].output_dim)
                throw ConfigError("encoder output dims must match across modalities");
        }
        build_params(init_seed);
    }

    Fusion fusion() const { return fusion_; }
    const std::vector<EncoderSpec>& encoders() const { return encoders_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    std::size_t count_params() const { return params_.count_scalars(); }
    std::size_t count_head_params() const { return params_.count_scalars("head."); }

    void freeze_encoders() { params_.set_trainable_prefix("enc", false); }

    // Copies encoder weights for modality slot `m` from another model's slot
    // `src_m` (shapes must match).
    void copy_encoder_from(std::size_t m, const FusionModel& src, std::size_t src_m = 0) {
        const std::string dst_prefix = "enc" + std::to_string(m) + ".";
        const std::string src_prefix = "enc" + std::to_string(src_m) + ".";
        for (std::size_t i = 0; i < params_.size(); ++i) {
            ParamEntry& e = params_.entry(i);
            if (e.name.rfind(dst_prefix, 0) != 0) continue;
            const std::string src_name = src_prefix + e.name.substr(dst_prefix.size());
            const Matrix& sv = src.params_.value(src_name);
            if (!sv.same_shape(e.value))
                throw ShapeError("copy_encoder_from: " + src_name + " is " + sv.shape_str() +
                                 ", expected " + e.value.shape_str());
            e.value = sv;
        }
    }

    // Builds the forward graph on `tape` and returns the (n x 1) risk node.
    // `leaves`, parallel to the parameter store, receives the parameter leaf
    // vars for gradient collection.
    ad::Var build(ad::Tape& tape, const std::vector<Matrix>& features, bool train_mode,
                  std::uint64_t dropout_seed, std::vector<ad::Var>& leaves) const {
        if (features.size() != encoders_.size())
            throw ShapeError("forward: " + std::to_string(features.size()) +
                             " feature blocks for " + std::to_string(encoders_.size()) +
                             " encoders");
        const std::size_t n = features[0].rows;
        for (std::size_t m = 0; m < features.size(); ++m) {
            if (features[m].rows != n)
                throw ShapeError("forward: feature blocks disagree on patient count");
            if (features[m].cols != encoders_[m].input_dim)
                throw ShapeError("forward: modality " + std::to_string(m) + " has dim " +
                                 std::to_string(features[m].cols) + ", encoder expects " +
                                 std::to_string(encoders_[m].input_dim));
        }
        leaves.clear();
        for (std::size_t i = 0; i < params_.size(); ++i)
            leaves.push_back(tape.param(params_.entry(i)));
        auto P = [&](const std::string& name) { return leaves[params_.index_of(name)]; };
        std::size_t drop_count = 0;
        auto drop = [&](ad::Var x, double rate) {
            return tape.dropout(x, rate, derive_seed(dropout_seed, drop_count++), train_mode);
        };

        std::vector<ad::Var> emb;
        for (std::size_t m = 0; m < encoders_.size(); ++m) {
            ad::Var h = tape.leaf(features[m]);
            const std::string pre = "enc" + std::to_string(m) + ".l";
            const std::size_t layers = encoders_[m].hidden.size() + 1;
            for (std::size_t l = 0; l < layers; ++l) {
                const std::string key = pre + std::to_string(l);
                h = tape.affine(h, P(key + ".w"), P(key + ".b"));
                h = tape.relu(h);
                h = drop(h, encoders_[m].dropout);
            }
            emb.push_back(h);
        }

        switch (fusion_) {
            case Fusion::unimodal:
                return tape.affine(emb[0], P("head.out.w"), P("head.out.b"));
            case Fusion::early:
            case Fusion::joint: {
                ad::Var cat = tape.concat_cols(emb);
                ad::Var h = tape.affine(cat, P("head.fc.w"), P("head.fc.b"));
                h = tape.relu(h);
                h = drop(h, head_.dropout);
                return tape.affine(h, P("head.out.w"), P("head.out.b"));
            }
            case Fusion::bilinear: {
                ad::Var pa = drop(tape.affine(emb[0], P("head.pa.w"), P("head.pa.b")),
                                  head_.attention_dropout);
                ad::Var pb = drop(tape.affine(emb[1], P("head.pb.w"), P("head.pb.b")),
                                  head_.attention_dropout);
                // y_i = pa_i^T W pb_i
                return tape.row_sum(tape.mul(tape.matmul(pa, P("head.W")), pb));
            }
            case Fusion::cross_attention: {
                ad::Var q = tape.affine(emb[0], P("head.q.w"), P("head.q.b"));
                ad::Var k = tape.affine(emb[1], P("head.k.w"), P("head.k.b"));
                ad::Var v = tape.affine(emb[1], P("head.v.w"), P("head.v.b"));
                // One token per modality: each patient's query attends to a
                // single key, so the softmax weight is exactly 1.
                ad::Var score = tape.scale(tape.row_sum(tape.mul(q, k)),
                                           1.0 / std::sqrt(static_cast<double>(head_.attention_dim)));
                ad::Var w = tape.softmax_rows(score);
                ad::Var attn = tape.scale_rows(v, w);
                ad::Var h = drop(attn, head_.attention_dropout);
                h = tape.relu(tape.affine(h, P("head.fc.w"), P("head.fc.b")));
                return tape.affine(h, P("head.out.w"), P("head.out.b"));
            }
            case Fusion::gated: {
                ad::Var g = tape.sigmoid(tape.affine(emb[0], P("head.gate.w"), P("head.gate.b")));
                // g*x_B + (1-g)*x_A, written as x_A + g*(x_B - x_A)
                ad::Var blend = tape.add(emb[0], tape.mul(g, tape.sub(emb[1], emb[0])));
                ad::Var h = drop(blend, head_.attention_dropout);
                return tape.affine(h, P("head.out.w"), P("head.out.b"));
            }
            case Fusion::late: break;
        }
        throw ConfigError("forward: unsupported strategy");
    }

    // Risks at evaluation time (dropout off).
    std::vector<double> predict(const std::vector<Matrix>& features) const {
        ad::Tape tape;
        std::vector<ad::Var> leaves;
        ad::Var risk = build(tape, features, false, 0, leaves);
        return col_to_vector(tape.value(risk));
    }

    // One full-batch update; returns the training loss at the pre-update
    // parameters.
    double train_step(const std::vector<Matrix>& features, const std::vector<Obs>& obs,
                      Adam& opt, std::uint64_t dropout_seed) {
        ad::Tape tape;
        std::vector<ad::Var> leaves;
        ad::Var risk = build(tape, features, true, dropout_seed, leaves);
        std::vector<double> rv = col_to_vector(tape.value(risk));
        std::vector<double> g;
        const double loss = cox_nll(rv, obs, &g);
        Matrix seed(rv.size(), 1);
        for (std::size_t i = 0; i < g.size(); ++i) seed.at(i, 0) = g[i];
        tape.backward_seed(risk, seed);
        params_.zero_grads();
        for (std::size_t i = 0; i < params_.size(); ++i)
            if (params_.entry(i).trainable) tape.collect_grad(leaves[i], params_.entry(i).grad);
        opt.step(params_);
        return loss;
    }

private:
    void add_affine(const std::string& key, std::size_t fan_in, std::size_t fan_out,
                    std::uint64_t seed) {
        Rng rng(seed);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        Matrix w(fan_in, fan_out);
        for (double& v : w.v) v = (2.0 * rng.uniform() - 1.0) * bound;
        params_.add(key + ".w", std::move(w));
        params_.add(key + ".b", Matrix::zeros(1, fan_out));
    }

    void build_params(std::uint64_t init_seed) {
        std::uint64_t counter = 0;
        auto next_seed = [&] { return derive_seed(init_seed, counter++); };
        for (std::size_t m = 0; m < encoders_.size(); ++m) {
            std::size_t in = encoders_[m].input_dim;
            std::size_t l = 0;
            for (std::size_t width : encoders_[m].hidden) {
                add_affine("enc" + std::to_string(m) + ".l" + std::to_string(l), in, width,
                           next_seed());
                in = width;
                ++l;
            }
            add_affine("enc" + std::to_string(m) + ".l" + std::to_string(l), in,
                       encoders_[m].output_dim, next_seed());
        }
        const std::size_t d = encoders_[0].output_dim;
        const std::size_t a = head_.attention_dim;
        switch (fusion_) {
            case Fusion::unimodal:
                add_affine("head.out", d, 1, next_seed());
                break;
            case Fusion::early:
            case Fusion::joint:
                add_affine("head.fc", d * encoders_.size(), head_.hidden, next_seed());
                add_affine("head.out", head_.hidden, 1, next_seed());
                break;
            case Fusion::bilinear: {
                add_affine("head.pa", d, a, next_seed());
                add_affine("head.pb", d, a, next_seed());
                Rng rng(next_seed());
                const double bound = std::sqrt(6.0 / static_cast<double>(a));
                Matrix w(a, a);
                for (double& v : w.v) v = (2.0 * rng.uniform() - 1.0) * bound;
                params_.add("head.W", std::move(w));
                break;
            }
            case Fusion::cross_attention:
                add_affine("head.q", d, a, next_seed());
                add_affine("head.k", d, a, next_seed());
                add_affine("head.v", d, a, next_seed());
                add_affine("head.fc", a, a, next_seed());
                add_affine("head.out", a, 1, next_seed());
                break;
            case Fusion::gated:
                add_affine("head.gate", d, d, next_seed());
                add_affine("head.out", d, 1, next_seed());
                break;
            case Fusion::late:
                break;
        }
    }

    Fusion fusion_;
    std::vector<EncoderSpec> encoders_;
    HeadConfig head_;
    ParamStore params_;
};

struct EpochRecord {
    double train_loss = 0.0;
    double val_ci = 0.0;
};

struct TrainTrace {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0; // 1-based
    double best_val_ci = 0.0;
    bool stopped_early = false;
};

// Full-batch Adam training with early stopping on validation concordance.
// The model is left holding the snapshot from the best epoch.
inline TrainTrace train_model(FusionModel& model, const std::vector<Matrix>& train_x,
                              const std::vector<Obs>& train_obs,
                              const std::vector<Matrix>& val_x,
                              const std::vector<Obs>& val_obs, const TrainConfig& cfg) {
    if (cfg.epochs == 0) throw ConfigError("train: epochs must be >= 1");
    if (cfg.patience == 0) throw ConfigError("train: patience must be >= 1");
    if (cfg.min_epochs == 0) throw ConfigError("train: min_epochs must be >= 1");
    if (!(cfg.head_lr > 0.0) || !(cfg.encoder_lr > 0.0))
        throw ConfigError("train: learning rates must be positive");
    check_cohort(train_obs);
    check_cohort(val_obs);

    Adam opt({{"enc", cfg.encoder_lr}, {"head", cfg.head_lr}});
    TrainTrace trace;
    std::vector<Matrix> best;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double loss = 0.0;
        try {
            loss = model.train_step(train_x, train_obs, opt,
                                    derive_seed(cfg.seed, 0xd09000 + epoch));
        } catch (const StatError& e) {
            throw TrainError("training aborted at epoch " + std::to_string(epoch) + ": " +
                             e.what());
        }
        if (!std::isfinite(loss))
            throw TrainError("training aborted at epoch " + std::to_string(epoch) +
                             ": non-finite loss");
        const std::vector<double> val_risk = model.predict(val_x);
        for (double r : val_risk)
            if (!std::isfinite(r))
                throw TrainError("training aborted at epoch " + std::to_string(epoch) +
                                 ": non-finite validation risk");
        const double ci = concordance(val_risk, val_obs);
        trace.epochs.push_back({loss, ci});
        if (trace.best_epoch == 0 || ci > trace.best_val_ci) {
            trace.best_epoch = epoch;
            trace.best_val_ci = ci;
            best.clear();
            for (std::size_t i = 0; i < model.params().size(); ++i)
                best.push_back(model.params().entry(i).value);
        }
        if (epoch >= cfg.min_epochs && epoch - trace.best_epoch >= cfg.patience) {
            trace.stopped_early = true;
            break;
        }
    }
    for (std::size_t i = 0; i < model.params().size(); ++i)
        model.params().entry(i).value = best[i];
    return trace;
}

} // namespace survfuse
