#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "survfuse/error.hpp"
#include "survfuse/params.hpp"

namespace survfuse {

// One learning rate per parameter-name prefix; first match wins, so list
// specific prefixes before general ones. An empty prefix matches everything.
struct LrGroup {
    std::string prefix;
    double lr = 0.0;
};

class Adam {
public:
    Adam(std::vector<LrGroup> groups, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : groups_(std::move(groups)), beta1_(beta1), beta2_(beta2), eps_(eps) {
        if (groups_.empty()) throw ConfigError("adam: no learning-rate groups");
        for (const auto& g : groups_)
            if (!(g.lr > 0.0)) throw ConfigError("adam: lr must be positive for '" + g.prefix + "'");
    }

    explicit Adam(double lr) : Adam(std::vector<LrGroup>{{"", lr}}) {}

    // Applies one update from the gradients currently held in `params`.
    // Frozen entries are skipped. A non-finite gradient aborts with the
    // offending parameter named.
    void step(ParamStore& params) {
        if (m_.empty()) init(params);
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t e = 0; e < params.size(); ++e) {
            ParamEntry& p = params.entry(e);
            if (!p.trainable) continue;
            const double lr = lr_for(p.name);
            std::vector<double>& m = m_[e];
            std::vector<double>& v = v_[e];
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                const double g = p.grad.v[i];
                if (!std::isfinite(g))
                    throw TrainError("adam: non-finite gradient in '" + p.name + "'");
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
                v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                p.value.v[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    double lr_for(const std::string& name) const {
        for (const auto& g : groups_)
            if (name.rfind(g.prefix, 0) == 0) return g.lr;
        throw ConfigError("adam: no learning-rate group matches '" + name + "'");
    }

private:
    void init(const ParamStore& params) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t e = 0; e < params.size(); ++e) {
            m_[e].assign(params.entry(e).value.size(), 0.0);
            v_[e].assign(params.entry(e).value.size(), 0.0);
        }
    }

    std::vector<LrGroup> groups_;
    double beta1_, beta2_, eps_;
    std::uint64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

} // namespace survfuse
