#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "survfuse/error.hpp"
#include "survfuse/matrix.hpp"

namespace survfuse {

// One named parameter tensor with its gradient buffer.
struct ParamEntry {
    std::string name;
    Matrix value;
    Matrix grad;
    bool trainable = true;
};

// Named parameter tensors in deterministic (insertion) order.
class ParamStore {
public:
    Matrix& add(const std::string& name, Matrix init, bool trainable = true) {
        if (index_.count(name)) throw ConfigError("ParamStore: duplicate parameter name '" + name + "'");
        ParamEntry e;
        e.name = name;
        e.grad = Matrix::zeros(init.rows, init.cols);
        e.value = std::move(init);
        e.trainable = trainable;
        index_[name] = entries_.size();
        entries_.push_back(std::move(e));
        return entries_.back().value;
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    std::size_t index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ConfigError("ParamStore: unknown parameter '" + name + "'");
        return it->second;
    }

    Matrix& value(const std::string& name) { return entries_[index_of(name)].value; }
    const Matrix& value(const std::string& name) const { return entries_[index_of(name)].value; }
    Matrix& grad(const std::string& name) { return entries_[index_of(name)].grad; }
    const Matrix& grad(const std::string& name) const { return entries_[index_of(name)].grad; }

    ParamEntry& entry(std::size_t i) { return entries_[i]; }
    const ParamEntry& entry(std::size_t i) const { return entries_[i]; }
    std::size_t size() const { return entries_.size(); }

    void zero_grads() {
        for (auto& e : entries_)
            for (double& g : e.grad.v) g = 0.0;
    }

    void set_trainable_prefix(std::string_view prefix, bool trainable) {
        for (auto& e : entries_)
            if (e.name.rfind(prefix, 0) == 0) e.trainable = trainable;
    }

    // Number of scalar parameters, optionally restricted to a name prefix.
    std::size_t count_scalars(std::string_view prefix = "") const {
        std::size_t n = 0;
        for (const auto& e : entries_)
            if (prefix.empty() || e.name.rfind(prefix, 0) == 0) n += e.value.size();
        return n;
    }

private:
    std::vector<ParamEntry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

} // namespace survfuse
