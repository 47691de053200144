#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "survfuse/error.hpp"
#include "survfuse/matrix.hpp"
#include "survfuse/params.hpp"
#include "survfuse/rng.hpp"

namespace survfuse::ad {

class Tape;

// Handle to a tape node; valid while its tape is alive.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;
};

// Reverse-mode tape over Matrix values. Nodes are appended in forward
// (topological) order; backward replays them in reverse. Ops that consume
// randomness (dropout) take an explicit seed, so identical calls produce
// bit-identical outputs.
class Tape {
public:
    Var leaf(Matrix value, bool needs_grad = false) {
        return push(std::move(value), {}, nullptr, needs_grad);
    }

    // Leaf aliasing a parameter: value copied in, gradient copied back out
    // by collect_grads(). Trainability decides gradient propagation.
    Var param(const ParamEntry& entry) { return leaf(entry.value, entry.trainable); }

    const Matrix& value(Var x) const { return nodes_[x.id].value; }
    const Matrix& grad(Var x) const { return nodes_[x.id].grad; }

    Var matmul(Var a, Var b) {
        const Matrix& A = val(a);
        const Matrix& B = val(b);
        if (A.cols != B.rows)
            throw ShapeError("matmul: " + A.shape_str() + " incompatible with " + B.shape_str());
        Matrix C = survfuse::matmul(A, B);
        return push(std::move(C), {a.id, b.id}, [](Tape& t, Node& n) {
            const Matrix& A = t.nodes_[n.parents[0]].value;
            const Matrix& B = t.nodes_[n.parents[1]].value;
            Matrix& dA = t.nodes_[n.parents[0]].grad;
            Matrix& dB = t.nodes_[n.parents[1]].grad;
            // dA += dC * B^T ; dB += A^T * dC
            for (std::size_t i = 0; i < A.rows; ++i)
                for (std::size_t j = 0; j < B.cols; ++j) {
                    const double dc = n.grad.at(i, j);
                    if (dc == 0.0) continue;
                    for (std::size_t k = 0; k < A.cols; ++k) {
                        dA.at(i, k) += dc * B.at(k, j);
                        dB.at(k, j) += A.at(i, k) * dc;
                    }
                }
        });
    }

    // y = x * W + 1 * b with x:(n,din), W:(din,dout), b:(1,dout).
    Var affine(Var x, Var w, Var b) {
        const Matrix& X = val(x);
        const Matrix& W = val(w);
        const Matrix& B = val(b);
        if (X.cols != W.rows || B.rows != 1 || B.cols != W.cols)
            throw ShapeError("affine: x " + X.shape_str() + ", W " + W.shape_str() + ", b " +
                             B.shape_str());
        Matrix Y = survfuse::matmul(X, W);
        for (std::size_t i = 0; i < Y.rows; ++i)
            for (std::size_t j = 0; j < Y.cols; ++j) Y.at(i, j) += B.at(0, j);
        return push(std::move(Y), {x.id, w.id, b.id}, [](Tape& t, Node& n) {
            const Matrix& X = t.nodes_[n.parents[0]].value;
            const Matrix& W = t.nodes_[n.parents[1]].value;
            Matrix& dX = t.nodes_[n.parents[0]].grad;
            Matrix& dW = t.nodes_[n.parents[1]].grad;
            Matrix& dB = t.nodes_[n.parents[2]].grad;
            for (std::size_t i = 0; i < X.rows; ++i)
                for (std::size_t j = 0; j < W.cols; ++j) {
                    const double dy = n.grad.at(i, j);
                    if (dy == 0.0) continue;
                    dB.at(0, j) += dy;
                    for (std::size_t k = 0; k < X.cols; ++k) {
                        dX.at(i, k) += dy * W.at(k, j);
                        dW.at(k, j) += X.at(i, k) * dy;
                    }
                }
        });
    }

    Var relu(Var x) {
        Matrix Y = val(x);
        for (double& y : Y.v) y = y > 0.0 ? y : 0.0;
        return push(std::move(Y), {x.id}, [](Tape& t, Node& n) {
            const Matrix& X = t.nodes_[n.parents[0]].value;
            Matrix& dX = t.nodes_[n.parents[0]].grad;
            for (std::size_t i = 0; i < X.size(); ++i)
                if (X.v[i] > 0.0) dX.v[i] += n.grad.v[i];
        });
    }

    Var sigmoid(Var x) {
        Matrix Y = val(x);
        for (double& y : Y.v) y = 1.0 / (1.0 + std::exp(-y));
        return push(std::move(Y), {x.id}, [](Tape& t, Node& n) {
            Matrix& dX = t.nodes_[n.parents[0]].grad;
            for (std::size_t i = 0; i < n.value.size(); ++i) {
                const double s = n.value.v[i];
                dX.v[i] += n.grad.v[i] * s * (1.0 - s);
            }
        });
    }

    // Softmax over each row.
    Var softmax_rows(Var x) {
        Matrix Y = val(x);
        for (std::size_t i = 0; i < Y.rows; ++i) {
            double mx = Y.at(i, 0);
            for (std::size_t j = 1; j < Y.cols; ++j) mx = std::max(mx, Y.at(i, j));
            double sum = 0.0;
            for (std::size_t j = 0; j < Y.cols; ++j) {
                Y.at(i, j) = std::exp(Y.at(i, j) - mx);
                sum += Y.at(i, j);
            }
            for (std::size_t j = 0; j < Y.cols; ++j) Y.at(i, j) /= sum;
        }
        return push(std::move(Y), {x.id}, [](Tape& t, Node& n) {
            Matrix& dX = t.nodes_[n.parents[0]].grad;
            for (std::size_t i = 0; i < n.value.rows; ++i) {
                double dot = 0.0;
                for (std::size_t j = 0; j < n.value.cols; ++j)
                    dot += n.grad.at(i, j) * n.value.at(i, j);
                for (std::size_t j = 0; j < n.value.cols; ++j)
                    dX.at(i, j) += n.value.at(i, j) * (n.grad.at(i, j) - dot);
            }
        });
    }

    // Feature (column-wise) concatenation of same-height matrices.
    Var concat_cols(const std::vector<Var>& xs) {
        if (xs.empty()) throw ShapeError("concat: no inputs");
        const std::size_t n = val(xs[0]).rows;
        std::size_t total = 0;
        std::vector<std::size_t> parents;
        for (const Var& x : xs) {
            if (val(x).rows != n)
                throw ShapeError("concat: row mismatch " + std::to_string(n) + " vs " +
                                 val(x).shape_str());
            total += val(x).cols;
            parents.push_back(x.id);
        }
        Matrix Y(n, total);
        std::size_t off = 0;
        for (const Var& x : xs) {
            const Matrix& X = val(x);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < X.cols; ++j) Y.at(i, off + j) = X.at(i, j);
            off += X.cols;
        }
        return push(std::move(Y), std::move(parents), [](Tape& t, Node& n) {
            std::size_t off = 0;
            for (std::size_t p : n.parents) {
                Matrix& dX = t.nodes_[p].grad;
                for (std::size_t i = 0; i < dX.rows; ++i)
                    for (std::size_t j = 0; j < dX.cols; ++j) dX.at(i, j) += n.grad.at(i, off + j);
                off += dX.cols;
            }
        });
    }

    // Inverted dropout: at train time keeps each entry with probability
    // 1-rate and scales by 1/(1-rate); at eval time it is the identity.
    Var dropout(Var x, double rate, std::uint64_t seed, bool train) {
        if (rate < 0.0 || rate >= 1.0)
            throw ConfigError("dropout: rate must be in [0,1), got " + std::to_string(rate));
        if (!train || rate == 0.0) {
            Matrix Y = val(x);
            return push(std::move(Y), {x.id}, [](Tape& t, Node& n) {
                Matrix& dX = t.nodes_[n.parents[0]].grad;
                for (std::size_t i = 0; i < n.grad.size(); ++i) dX.v[i] += n.grad.v[i];
            });
        }
        Rng rng(seed);
        const double scale = 1.0 / (1.0 - rate);
        Matrix Y = val(x);
        auto mask = std::make_shared<std::vector<double>>(Y.size());
        for (std::size_t i = 0; i < Y.size(); ++i) {
            const double keep = rng.uniform() >= rate ? scale : 0.0;
            (*mask)[i] = keep;
            Y.v[i] *= keep;
        }
        return push(std::move(Y), {x.id}, [mask](Tape& t, Node& n) {
            Matrix& dX = t.nodes_[n.parents[0]].grad;
            for (std::size_t i = 0; i < n.grad.size(); ++i) dX.v[i] += n.grad.v[i] * (*mask)[i];
        });
    }

    // Mean over rows: (n,c) -> (1,c).
    Var mean_rows(Var x) {
        const Matrix& X = val(x);
        if (X.rows == 0) throw ShapeError("mean_rows: empty input");
        Matrix Y(1, X.cols);
        for (std::size_t i = 0; i < X.rows; ++i)
            for (std::size_t j = 0; j < X.cols; ++j) Y.at(0, j) += X.at(i, j);
        for (std::size_t j = 0; j < X.cols; ++j) Y.at(0, j) /= static_cast<double>(X.rows);
        return push(std::move(Y), {x.id}, [](Tape& t, Node& n) {
            Matrix& dX = t.nodes_[n.parents[0]].grad;
            const double inv = 1.0 / static_cast<double>(dX.rows);
            for (std::size_t i = 0; i < dX.rows; ++i)
                for (std::size_t j = 0; j < dX.cols; ++j) dX.at(i, j) += n.grad.at(0, j) * inv;
        });
    }

    Var add(Var a, Var b) { return binary("add", a, b, [](double x, double y) { return x + y; }, 1.0, 1.0); }
    Var sub(Var a, Var b) { return binary("sub", a, b, [](double x, double y) { return x - y; }, 1.0, -1.0); }

    // Elementwise (Hadamard) product.
    Var mul(Var a, Var b) {
        const Matrix& A = val(a);
        const Matrix& B = val(b);
        if (!A.same_shape(B))
            throw ShapeError("mul: " + A.shape_str() + " vs " + B.shape_str());
        Matrix Y = A;
        for (std::size_t i = 0; i < Y.size(); ++i) Y.v[i] *= B.v[i];
        return push(std::move(Y), {a.id, b.id}, [](Tape& t, Node& n) {
            const Matrix& A = t.nodes_[n.parents[0]].value;
            const Matrix& B = t.nodes_[n.parents[1]].value;
            Matrix& dA = t.nodes_[n.parents[0]].grad;
            Matrix& dB = t.nodes_[n.parents[1]].grad;
            for (std::size_t i = 0; i < n.grad.size(); ++i) {
                dA.v[i] += n.grad.v[i] * B.v[i];
                dB.v[i] += n.grad.v[i] * A.v[i];
            }
        });
    }

    // Row sums: (n,c) -> (n,1).
    Var row_sum(Var x) {
        const Matrix& X = val(x);
        Matrix Y(X.rows, 1);
        for (std::size_t i = 0; i < X.rows; ++i)
            for (std::size_t j = 0; j < X.cols; ++j) Y.at(i, 0) += X.at(i, j);
        return push(std::move(Y), {x.id}, [](Tape& t, Node& n) {
            Matrix& dX = t.nodes_[n.parents[0]].grad;
            for (std::size_t i = 0; i < dX.rows; ++i)
                for (std::size_t j = 0; j < dX.cols; ++j) dX.at(i, j) += n.grad.at(i, 0);
        });
    }

    // Scale row i of x by s(i,0).
    Var scale_rows(Var x, Var s) {
        const Matrix& X = val(x);
        const Matrix& S = val(s);
        if (S.rows != X.rows || S.cols != 1)
            throw ShapeError("scale_rows: x " + X.shape_str() + ", s " + S.shape_str());
        Matrix Y = X;
        for (std::size_t i = 0; i < X.rows; ++i)
            for (std::size_t j = 0; j < X.cols; ++j) Y.at(i, j) *= S.at(i, 0);
        return push(std::move(Y), {x.id, s.id}, [](Tape& t, Node& n) {
            const Matrix& X = t.nodes_[n.parents[0]].value;
            const Matrix& S = t.nodes_[n.parents[1]].value;
            Matrix& dX = t.nodes_[n.parents[0]].grad;
            Matrix& dS = t.nodes_[n.parents[1]].grad;
            for (std::size_t i = 0; i < X.rows; ++i)
                for (std::size_t j = 0; j < X.cols; ++j) {
                    dX.at(i, j) += n.grad.at(i, j) * S.at(i, 0);
                    dS.at(i, 0) += n.grad.at(i, j) * X.at(i, j);
                }
        });
    }

    Var scale(Var x, double c) {
        Matrix Y = val(x);
        for (double& y : Y.v) y *= c;
        return push(std::move(Y), {x.id}, [c](Tape& t, Node& n) {
            Matrix& dX = t.nodes_[n.parents[0]].grad;
            for (std::size_t i = 0; i < n.grad.size(); ++i) dX.v[i] += c * n.grad.v[i];
        });
    }

    // Backward pass from a 1x1 loss node; returns the loss value.
    double backward_scalar(Var loss) {
        const Matrix& L = val(loss);
        if (L.rows != 1 || L.cols != 1)
            throw ShapeError("backward: loss must be 1x1, got " + L.shape_str());
        Matrix seed(1, 1);
        seed.at(0, 0) = 1.0;
        backward_seed(loss, seed);
        return L.at(0, 0);
    }

    // Backward pass with an explicit upstream gradient on `out` (used when
    // the final loss and its gradient are computed outside the tape).
    void backward_seed(Var out, const Matrix& seed) {
        if (!val(out).same_shape(seed))
            throw ShapeError("backward: seed " + seed.shape_str() + " vs output " +
                             val(out).shape_str());
        for (auto& n : nodes_)
            for (double& g : n.grad.v) g = 0.0;
        nodes_[out.id].grad = seed;
        for (std::size_t i = out.id + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (n.backprop && n.needs_grad) n.backprop(*this, n);
        }
    }

    // Copy accumulated leaf gradients back into the store (entries must have
    // been pushed with param()).
    void collect_grad(Var leaf_var, Matrix& out_grad) const {
        const Matrix& g = nodes_[leaf_var.id].grad;
        if (!g.same_shape(out_grad))
            throw ShapeError("collect_grad: " + g.shape_str() + " vs " + out_grad.shape_str());
        out_grad = g;
    }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool needs_grad = false;
        std::vector<std::size_t> parents;
        std::function<void(Tape&, Node&)> backprop;
    };

    const Matrix& val(Var x) const { return nodes_[x.id].value; }

    Var push(Matrix value, std::vector<std::size_t> parents,
             std::function<void(Tape&, Node&)> backprop, bool leaf_needs_grad = false) {
        Node n;
        n.grad = Matrix::zeros(value.rows, value.cols);
        n.value = std::move(value);
        n.parents = std::move(parents);
        n.backprop = std::move(backprop);
        n.needs_grad = leaf_needs_grad;
        for (std::size_t p : n.parents)
            if (nodes_[p].needs_grad) n.needs_grad = true;
        nodes_.push_back(std::move(n));
        return Var{this, nodes_.size() - 1};
    }

    Var binary(const char* name, Var a, Var b, double (*f)(double, double), double da, double db) {
        const Matrix& A = val(a);
        const Matrix& B = val(b);
        if (!A.same_shape(B))
            throw ShapeError(std::string(name) + ": " + A.shape_str() + " vs " + B.shape_str());
        Matrix Y = A;
        for (std::size_t i = 0; i < Y.size(); ++i) Y.v[i] = f(A.v[i], B.v[i]);
        return push(std::move(Y), {a.id, b.id}, [da, db](Tape& t, Node& n) {
            Matrix& dA = t.nodes_[n.parents[0]].grad;
            Matrix& dB = t.nodes_[n.parents[1]].grad;
            for (std::size_t i = 0; i < n.grad.size(); ++i) {
                dA.v[i] += da * n.grad.v[i];
                dB.v[i] += db * n.grad.v[i];
            }
        });
    }

    std::vector<Node> nodes_;
};

// Central-difference validation of analytic gradients.
//
// `fn(params, want_grad)` returns the scalar loss; when want_grad is true it
// must also fill the gradient buffers of `params`. Returns the max over all
// trainable parameter elements of |analytic - numeric| / max(1, |numeric|).
struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
};

inline GradCheckReport grad_check(const std::function<double(ParamStore&, bool)>& fn,
                                  ParamStore& params, double eps) {
    if (eps < 1e-7 || eps > 1e-3)
        throw ConfigError("grad_check: eps must be in [1e-7, 1e-3]");
    const double loss0 = fn(params, true);
    if (!std::isfinite(loss0)) throw StatError("grad_check: non-finite loss");
    std::vector<Matrix> analytic;
    analytic.reserve(params.size());
    for (std::size_t e = 0; e < params.size(); ++e) analytic.push_back(params.entry(e).grad);

    GradCheckReport rep;
    for (std::size_t e = 0; e < params.size(); ++e) {
        if (!params.entry(e).trainable) continue;
        Matrix& p = params.entry(e).value;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double orig = p.v[i];
            p.v[i] = orig + eps;
            const double fp = fn(params, false);
            p.v[i] = orig - eps;
            const double fm = fn(params, false);
            p.v[i] = orig;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw StatError("grad_check: non-finite loss at perturbed point");
            const double numeric = (fp - fm) / (2.0 * eps);
            const double rel =
                std::abs(analytic[e].v[i] - numeric) / std::max(1.0, std::abs(numeric));
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_param = params.entry(e).name;
                rep.worst_index = i;
            }
        }
    }
    return rep;
}

} // namespace survfuse::ad
