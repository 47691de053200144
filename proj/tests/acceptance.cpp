// End-to-end acceptance checks. Each criterion prints one [PASS]/[FAIL]
// line; the process exits 0 only if all nine pass. argv[1] must point at
// the survfuse CLI binary.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "survfuse/survfuse.hpp"

using namespace survfuse;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int num, const std::string& name, bool ok, const std::string& note,
            double seconds) {
    std::printf("[%s] criterion %d: %s (%s; %.1fs)\n", ok ? "PASS" : "FAIL", num,
                name.c_str(), note.c_str(), seconds);
    if (!ok) ++g_failures;
}

template <typename Fn>
void criterion(int num, const std::string& name, Fn fn) {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    std::string note;
    try {
        ok = fn(note);
    } catch (const std::exception& e) {
        ok = false;
        note = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(num, name, ok, note, secs);
}

int run_cli(const std::string& cli, const std::string& args) {
    const std::string cmd = "\"" + cli + "\" " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    if (rc == -1 || !WIFEXITED(rc)) return -1;
    return WEXITSTATUS(rc);
}

std::size_t count_substr(const std::string& hay, const std::string& needle) {
    std::size_t count = 0, pos = 0;
    while ((pos = hay.find(needle, pos)) != std::string::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------- criterion 1

ad::GradCheckReport strategy_grad_check(Fusion fusion, std::size_t modalities,
                                        std::uint64_t seed) {
    const std::size_t n = 6, din = 3, d = 3;
    std::vector<EncoderSpec> encs;
    for (std::size_t m = 0; m < modalities; ++m) {
        EncoderSpec e;
        e.input_dim = din;
        e.hidden = {4};
        e.output_dim = d;
        e.dropout = 0.25;
        encs.push_back(e);
    }
    HeadConfig head;
    head.hidden = 4;
    head.dropout = 0.3;
    head.attention_dim = 3;
    head.attention_dropout = 0.25;
    FusionModel model(fusion, encs, head, seed);
    // Evaluate at a generic point: zero-init biases can put relu inputs
    // exactly at the kink when dropout or an upstream relu zeroes a row,
    // and there the two-sided difference quotient is off by construction.
    {
        Rng jit(seed * 977 + static_cast<std::uint64_t>(fusion));
        ParamStore& ps = model.params();
        for (std::size_t i = 0; i < ps.size(); ++i)
            for (double& v : ps.entry(i).value.v) v += 0.05 * jit.normal();
    }

    std::vector<Matrix> x;
    for (std::size_t m = 0; m < modalities; ++m) {
        Rng rng(seed * 31 + m);
        Matrix f(n, din);
        for (double& v : f.v) v = rng.normal();
        x.push_back(std::move(f));
    }
    const std::vector<Obs> obs = {{3, 1}, {1, 1}, {2, 0}, {2, 1}, {5, 1}, {4, 1}};

    auto fn = [&](ParamStore& ps, bool want) -> double {
        ad::Tape tape;
        std::vector<ad::Var> leaves;
        ad::Var risk = model.build(tape, x, true, seed + 99, leaves);
        const std::vector<double> rv = col_to_vector(tape.value(risk));
        std::vector<double> g;
        const double loss = cox_nll(rv, obs, &g);
        if (want) {
            Matrix grad_seed(rv.size(), 1);
            for (std::size_t i = 0; i < g.size(); ++i) grad_seed.at(i, 0) = g[i];
            tape.backward_seed(risk, grad_seed);
            ps.zero_grads();
            for (std::size_t i = 0; i < ps.size(); ++i)
                if (ps.entry(i).trainable) tape.collect_grad(leaves[i], ps.entry(i).grad);
        }
        return loss;
    };
    return ad::grad_check(fn, model.params(), 1e-6);
}

bool c1_gradients(std::string& note) {
    struct Case {
        Fusion fusion;
        std::size_t modalities;
    };
    const std::vector<Case> cases = {{Fusion::unimodal, 1},      {Fusion::early, 2},
                                     {Fusion::joint, 3},         {Fusion::bilinear, 2},
                                     {Fusion::cross_attention, 2}, {Fusion::gated, 2}};
    double worst = 0.0;
    std::string worst_at;
    for (const Case& c : cases) {
        for (std::uint64_t seed : {17u, 18u, 19u}) {
            const auto rep = strategy_grad_check(c.fusion, c.modalities, seed);
            if (rep.max_rel_err > worst) {
                worst = rep.max_rel_err;
                worst_at = fusion_name(c.fusion) + "/" + rep.worst_param;
            }
            if (rep.max_rel_err >= 1e-4) {
                note = fusion_name(c.fusion) + " seed " + std::to_string(seed) +
                       ": rel err " + std::to_string(rep.max_rel_err) + " at " +
                       rep.worst_param;
                return false;
            }
        }
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "6 strategies x 3 seeds, worst rel err %.2e at %s",
                  worst, worst_at.c_str());
    note = buf;
    return true;
}

// ---------------------------------------------------------------- criterion 2

double oracle_concordance(const std::vector<double>& risk, const std::vector<Obs>& obs) {
    double num = 0.0, den = 0.0;
    const std::size_t n = obs.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            std::size_t early, late;
            if (obs[i].time == obs[j].time) {
                if (obs[i].event + obs[j].event != 1) continue;
                early = obs[i].event == 1 ? i : j;
                late = obs[i].event == 1 ? j : i;
            } else {
                early = obs[i].time < obs[j].time ? i : j;
                late = early == i ? j : i;
                if (obs[early].event != 1) continue;
            }
            den += 1.0;
            if (risk[early] > risk[late]) num += 1.0;
            else if (risk[early] == risk[late]) num += 0.5;
        }
    }
    return num / den;
}

double oracle_breslow_nll(const std::vector<double>& risk, const std::vector<Obs>& obs) {
    std::vector<double> etimes;
    for (const Obs& o : obs)
        if (o.event == 1) etimes.push_back(o.time);
    std::sort(etimes.begin(), etimes.end());
    etimes.erase(std::unique(etimes.begin(), etimes.end()), etimes.end());
    double nll = 0.0;
    for (double t : etimes) {
        double d = 0.0, num = 0.0, denom = 0.0;
        for (std::size_t i = 0; i < obs.size(); ++i) {
            if (obs[i].event == 1 && obs[i].time == t) {
                d += 1.0;
                num += risk[i];
            }
            if (obs[i].time >= t) denom += std::exp(risk[i]);
        }
        nll -= num - d * std::log(denom);
    }
    return nll;
}

struct OracleStep {
    std::vector<double> times, values;
    double left(double t) const {
        double v = 1.0;
        for (std::size_t i = 0; i < times.size() && times[i] < t; ++i) v = values[i];
        return v;
    }
};

OracleStep oracle_censor_km(const std::vector<Obs>& obs) {
    std::vector<std::size_t> order(obs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return obs[a].time < obs[b].time; });
    OracleStep g;
    double surv = 1.0, at_risk = static_cast<double>(obs.size());
    std::size_t i = 0;
    while (i < order.size()) {
        const double t = obs[order[i]].time;
        double d = 0.0, removed = 0.0;
        while (i < order.size() && obs[order[i]].time == t) {
            if (obs[order[i]].event == 0) d += 1.0;
            removed += 1.0;
            ++i;
        }
        if (d > 0.0) {
            surv *= 1.0 - d / at_risk;
            g.times.push_back(t);
            g.values.push_back(surv);
        }
        at_risk -= removed;
    }
    return g;
}

double oracle_ipcw_ibs(const std::function<double(std::size_t, double)>& surv,
                       const std::vector<Obs>& obs, const std::vector<double>& grid) {
    const OracleStep g = oracle_censor_km(obs);
    std::vector<double> ts, bs;
    for (double t : grid) {
        if (g.left(t) <= 0.0) continue;
        double sum = 0.0;
        for (std::size_t i = 0; i < obs.size(); ++i) {
            const double s = surv(i, t);
            if (obs[i].time <= t && obs[i].event == 1) {
                const double w = g.left(obs[i].time);
                if (w <= 0.0) continue;
                sum += s * s / w;
            } else if (obs[i].time > t) {
                const double w = g.left(t);
                if (w <= 0.0) continue;
                sum += (1.0 - s) * (1.0 - s) / w;
            }
        }
        ts.push_back(t);
        bs.push_back(sum / static_cast<double>(obs.size()));
    }
    double integral = 0.0;
    for (std::size_t i = 1; i < ts.size(); ++i)
        integral += 0.5 * (bs[i - 1] + bs[i]) * (ts[i] - ts[i - 1]);
    return integral / (ts.back() - ts.front());
}

bool c2_metric_oracles(std::string& note) {
    Rng rng(777);
    for (int inst = 0; inst < 200; ++inst) {
        const std::size_t n = 3 + rng.below(48);
        std::vector<Obs> obs(n);
        std::vector<double> risk(n);
        obs[0] = {0.5, 1};
        risk[0] = rng.normal();
        for (std::size_t i = 1; i < n; ++i) {
            obs[i].time = static_cast<double>(1 + rng.below(12));
            obs[i].event = rng.uniform() < 0.6 ? 1 : 0;
            risk[i] = rng.below(4) == 0 ? risk[0] : rng.normal();
        }
        const double got = concordance(risk, obs);
        const double want = oracle_concordance(risk, obs);
        if (got != want) {
            note = "concordance mismatch on instance " + std::to_string(inst);
            return false;
        }
    }

    for (int inst = 0; inst < 50; ++inst) {
        const std::size_t n = 2 + rng.below(9);
        std::vector<Obs> obs(n);
        std::vector<double> risk(n);
        obs[0] = {1.0, 1};
        for (std::size_t i = 0; i < n; ++i) {
            if (i > 0) {
                obs[i].time = static_cast<double>(1 + rng.below(5));
                obs[i].event = rng.uniform() < 0.7 ? 1 : 0;
            }
            risk[i] = 2.0 * rng.uniform() - 1.0;
        }
        const double got = cox_nll(risk, obs);
        const double want = oracle_breslow_nll(risk, obs);
        if (std::abs(got - want) / std::max(1.0, std::abs(want)) > 1e-10) {
            note = "cox loss mismatch on instance " + std::to_string(inst);
            return false;
        }
    }

    double worst_ibs = 0.0;
    for (int inst = 0; inst < 30; ++inst) {
        const std::size_t n = 4 + rng.below(7);
        std::vector<Obs> obs(n);
        std::vector<double> lam(n);
        for (std::size_t i = 0; i < n; ++i) {
            obs[i].time = static_cast<double>(i + 1) + 0.5 * rng.uniform();
            obs[i].event = rng.uniform() < 0.6 ? 1 : 0;
            lam[i] = 0.05 + 0.1 * rng.uniform();
        }
        obs[0].event = 1;
        obs[n - 1].event = 1;
        auto surv = [&](std::size_t i, double t) { return std::exp(-lam[i] * t); };
        const std::vector<double> grid = time_grid(obs, 10);
        const double got = ipcw_ibs(surv, obs, grid).value;
        const double want = oracle_ipcw_ibs(surv, obs, grid);
        worst_ibs = std::max(worst_ibs, std::abs(got - want));
        if (std::abs(got - want) > 1e-12) {
            note = "ibs mismatch on instance " + std::to_string(inst);
            return false;
        }
    }

    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "200 concordance, 50 cox, 30 ibs instances; worst ibs gap %.1e",
                  worst_ibs);
    note = buf;
    return true;
}

// ---------------------------------------------------------------- criterion 3

bool c3_permutation(std::string& note) {
    const double p_all = paired_sign_flip_p({0.1, 0.2, 0.05, 0.3, 0.15});
    if (p_all != 0.03125) {
        note = "all-positive k=5 gave p=" + std::to_string(p_all);
        return false;
    }

    Rng rng(31);
    for (int i = 0; i < 50; ++i) {
        std::vector<double> d(5);
        for (double& v : d) v = rng.normal();
        const double p = paired_sign_flip_p(d);
        const double scaled = p * 32.0;
        if (std::abs(scaled - std::round(scaled)) > 1e-12 || p <= 0.0 || p > 1.0) {
            note = "p not a multiple of 1/32: " + std::to_string(p);
            return false;
        }
    }

    ExperimentResult a;
    a.name = "self";
    a.plan_hash = 42;
    a.folds.resize(5);
    const double cs[5] = {0.70, 0.68, 0.72, 0.71, 0.69};
    for (std::size_t f = 0; f < 5; ++f) a.folds[f].test_cs = cs[f];
    const ExperimentResult b = a;
    const ComparisonResult self = controlled_comparison(a, b);
    if (self.p_value != 1.0 || self.mean_delta != 0.0) {
        note = "self comparison p=" + std::to_string(self.p_value);
        return false;
    }
    note = "k=5 all-positive p = 0.03125 = 1/32; 50 random vectors on the 1/32 "
           "lattice; self-comparison p = 1.0";
    return true;
}

// ---------------------------------------------------------------- criterion 4

Cohort small_cohort(std::uint64_t seed, std::size_t n) {
    SynthConfig cfg;
    cfg.n = n;
    cfg.modalities = {{"m1", 5, 0.9}, {"m2", 4, 0.4}};
    cfg.gbm_fraction = 0.3;
    cfg.target_censoring = 0.3;
    cfg.censoring_tolerance = 0.08;
    cfg.seed = seed;
    SynthResult r = synth_generate(cfg);
    return Cohort{std::move(r.clinical), std::move(r.blocks)};
}

ExperimentSpec small_spec(const std::string& name, Fusion fusion,
                          const std::vector<std::string>& modalities) {
    ExperimentSpec s;
    s.name = name;
    s.modalities = modalities;
    s.restrict_to = {"m1", "m2"};
    s.fusion = fusion;
    for (const auto& m : modalities) {
        EncoderSpec e;
        e.input_dim = m == "m1" ? 5 : 4;
        e.output_dim = 4;
        e.dropout = 0.0;
        s.encoders.push_back(e);
    }
    s.head.hidden = 8;
    s.head.dropout = 0.0;
    s.head.attention_dim = 4;
    s.head.attention_dropout = 0.0;
    s.train.epochs = 8;
    s.train.head_lr = 5e-3;
    s.train.encoder_lr = 1e-3;
    s.train.patience = 4;
    s.k_folds = 3;
    s.test_fraction = 0.25;
    s.bootstrap.resamples = 100;
    s.lasso.grid_size = 10;
    s.lasso.cv_folds = 3;
    s.seed = 13;
    return s;
}

bool c4_cs_identity(std::string& note) {
    const Cohort cohort = small_cohort(13, 120);
    std::vector<ExperimentResult> results;
    results.push_back(run_experiment(small_spec("m1", Fusion::unimodal, {"m1"}), cohort));
    results.push_back(
        run_experiment(small_spec("m1+m2", Fusion::joint, {"m1", "m2"}), cohort));

    std::vector<ResultsRow> rows;
    std::size_t checked = 0;
    for (const ExperimentResult& r : results) {
        for (const FoldResult& f : r.folds) {
            if (f.test_cs != composite_score(f.test_ci, f.test_ibs)) {
                note = "per-fold CS drifts from (CI + (1-IBS))/2";
                return false;
            }
            ++checked;
        }
        rows.push_back(to_row(r));
    }

    const fs::path dir("acceptance_tmp");
    fs::create_directories(dir);
    const std::string path = (dir / "identity.csv").string();
    write_csv(path, results_to_csv(rows));
    for (const ResultsRow& row : results_from_csv(read_csv(path), path)) {
        if (row.test_cs != (row.test_ci + (1.0 - row.ibs)) / 2.0) {
            note = "emitted row CS drifts from (CI + (1-IBS))/2 for " + row.model;
            return false;
        }
        ++checked;
    }
    note = std::to_string(checked) + " rows hold CS = (CI + (1-IBS))/2 bit-exactly";
    return true;
}

// ---------------------------------------------------------------- criterion 5

std::vector<Obs> hazard_cohort(const std::vector<double>& risk, double base, double cens,
                               Rng& rng) {
    std::vector<Obs> obs(risk.size());
    for (std::size_t i = 0; i < risk.size(); ++i) {
        const double t = -std::log(rng.uniform_pos()) / (base * std::exp(risk[i]));
        const double c = -std::log(rng.uniform_pos()) / cens;
        obs[i].time = std::min(t, c);
        obs[i].event = t <= c ? 1 : 0;
    }
    obs[0].event = 1;
    return obs;
}

std::vector<double> dense_newton_cox(const Matrix& x, const std::vector<Obs>& obs) {
    const std::size_t n = x.rows;
    std::vector<double> beta{0.0, 0.0};
    for (int it = 0; it < 60; ++it) {
        double g0 = 0.0, g1 = 0.0, h00 = 0.0, h01 = 0.0, h11 = 0.0;
        std::vector<double> etimes;
        for (const Obs& o : obs)
            if (o.event == 1) etimes.push_back(o.time);
        std::sort(etimes.begin(), etimes.end());
        etimes.erase(std::unique(etimes.begin(), etimes.end()), etimes.end());
        for (double t : etimes) {
            double d = 0.0, dx0 = 0.0, dx1 = 0.0;
            double s = 0.0, sx0 = 0.0, sx1 = 0.0, s00 = 0.0, s01 = 0.0, s11 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (obs[i].event == 1 && obs[i].time == t) {
                    d += 1.0;
                    dx0 += x.at(i, 0);
                    dx1 += x.at(i, 1);
                }
                if (obs[i].time >= t) {
                    const double e = std::exp(x.at(i, 0) * beta[0] + x.at(i, 1) * beta[1]);
                    s += e;
                    sx0 += x.at(i, 0) * e;
                    sx1 += x.at(i, 1) * e;
                    s00 += x.at(i, 0) * x.at(i, 0) * e;
                    s01 += x.at(i, 0) * x.at(i, 1) * e;
                    s11 += x.at(i, 1) * x.at(i, 1) * e;
                }
            }
            g0 += -dx0 + d * sx0 / s;
            g1 += -dx1 + d * sx1 / s;
            h00 += d * (s00 / s - sx0 * sx0 / (s * s));
            h01 += d * (s01 / s - sx0 * sx1 / (s * s));
            h11 += d * (s11 / s - sx1 * sx1 / (s * s));
        }
        const double det = h00 * h11 - h01 * h01;
        const double step0 = (h11 * g0 - h01 * g1) / det;
        const double step1 = (h00 * g1 - h01 * g0) / det;
        beta[0] -= step0;
        beta[1] -= step1;
        if (std::abs(step0) < 1e-13 && std::abs(step1) < 1e-13) break;
    }
    return beta;
}

bool c5_late_fusion(std::string& note) {
    LassoOptions opt;
    opt.grid_size = 20;
    opt.cv_folds = 4;
    opt.seed = 2;

    {
        Rng rng(61);
        const std::size_t n = 400;
        Matrix scores(n, 2);
        std::vector<double> risk(n);
        for (std::size_t i = 0; i < n; ++i) {
            risk[i] = rng.normal();
            scores.at(i, 0) = risk[i];
            scores.at(i, 1) = risk[i];
        }
        const std::vector<Obs> obs = hazard_cohort(risk, 0.08, 0.02, rng);
        const LateFusionWeights w = cox_lasso_fit(scores, {"a", "b"}, obs, opt);
        if (w.degenerate || std::abs(w.normalized[0] - 0.5) > 0.01 ||
            std::abs(w.normalized[1] - 0.5) > 0.01) {
            note = "duplicated columns split " + std::to_string(w.normalized[0]) + "/" +
                   std::to_string(w.normalized[1]);
            return false;
        }
    }

    double worst_third = 0.0;
    {
        Rng rng(62);
        const std::size_t n = 500;
        Matrix scores(n, 3);
        std::vector<double> risk(n);
        const double inv = 1.0 / std::sqrt(3.0);
        for (std::size_t i = 0; i < n; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < 3; ++j) {
                scores.at(i, j) = rng.normal();
                sum += scores.at(i, j);
            }
            risk[i] = sum * inv;
        }
        const std::vector<Obs> obs = hazard_cohort(risk, 0.08, 0.02, rng);
        const LateFusionWeights w = cox_lasso_fit(scores, {"a", "b", "c"}, obs, opt);
        for (double v : w.normalized)
            worst_third = std::max(worst_third, std::abs(v - 1.0 / 3.0));
        if (w.degenerate || worst_third > 0.05) {
            note = "equal-signal weights off by " + std::to_string(worst_third);
            return false;
        }
    }

    double worst_newton = 0.0;
    {
        Rng rng(63);
        const std::size_t n = 80;
        Matrix x(n, 2);
        std::vector<double> risk(n);
        for (std::size_t i = 0; i < n; ++i) {
            x.at(i, 0) = 0.7 * rng.normal();
            x.at(i, 1) = 0.7 * rng.normal();
            risk[i] = x.at(i, 0);
        }
        const std::vector<Obs> obs = hazard_cohort(risk, 0.1, 0.04, rng);
        std::vector<double> beta(2, 0.0);
        detail::cox_lasso_solve(x, obs, 0.0, 0.0, 1e-12, 50000, beta);
        const std::vector<double> ref = dense_newton_cox(x, obs);
        worst_newton =
            std::max(std::abs(beta[0] - ref[0]), std::abs(beta[1] - ref[1]));
        if (worst_newton > 1e-6) {
            note = "unpenalized fit off Newton oracle by " + std::to_string(worst_newton);
            return false;
        }
    }

    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "duplicates split 0.5/0.5 within 0.01; equal-signal within %.3f of 1/3; "
                  "Newton gap %.1e",
                  worst_third, worst_newton);
    note = buf;
    return true;
}

// ---------------------------------------------------------------- criterion 6

SynthConfig trimodal_config(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.n = 600;
    cfg.modalities = {{"m1", 6, 0.6}, {"m2", 6, 1.0}, {"m3", 4, 0.4}};
    cfg.gbm_fraction = 0.36;
    cfg.subtype_multiplier = 2.0;
    cfg.baseline_hazard = 0.02;
    cfg.target_censoring = 0.596;
    cfg.censoring_tolerance = 0.03;
    cfg.seed = seed;
    return cfg;
}

ExperimentSpec trimodal_spec(const std::string& name, Fusion fusion,
                             const std::vector<std::string>& modalities,
                             std::uint64_t seed) {
    ExperimentSpec s;
    s.name = name;
    s.modalities = modalities;
    s.restrict_to = {"m1", "m2", "m3"};
    s.fusion = fusion;
    for (std::size_t m = 0; m < modalities.size(); ++m) {
        EncoderSpec e;
        e.input_dim = modalities[m] == "m3" ? 4 : 6;
        e.output_dim = 6;
        e.dropout = 0.0;
        s.encoders.push_back(e);
    }
    s.head.hidden = 8;
    s.head.dropout = 0.0;
    s.head.attention_dim = 4;
    s.head.attention_dropout = 0.0;
    s.train.epochs = 300;
    s.train.head_lr = 5e-3;
    s.train.encoder_lr = 2e-3;
    s.train.patience = 30;
    s.train.min_epochs = 150;
    s.k_folds = 3;
    s.test_fraction = 0.25;
    s.bootstrap.resamples = 100;
    s.seed = seed;
    return s;
}

bool c6_directional(std::string& note) {
    int order_ok = 0, gain_ok = 0;
    double width = 0.0;
    for (std::uint64_t seed = 201; seed <= 210; ++seed) {
        SynthResult sr = synth_generate(trimodal_config(seed));
        const Cohort cohort{std::move(sr.clinical), std::move(sr.blocks)};

        const ExperimentResult u1 =
            run_experiment(trimodal_spec("m1", Fusion::unimodal, {"m1"}, seed), cohort);
        const ExperimentResult u2 =
            run_experiment(trimodal_spec("m2", Fusion::unimodal, {"m2"}, seed), cohort);
        const ExperimentResult u3 =
            run_experiment(trimodal_spec("m3", Fusion::unimodal, {"m3"}, seed), cohort);
        if (u2.report.cs > u1.report.cs && u1.report.cs > u3.report.cs) ++order_ok;

        const ExperimentSpec bi_spec =
            trimodal_spec("m1+m2", Fusion::joint, {"m1", "m2"}, seed);
        const ExperimentResult bi = run_experiment(bi_spec, cohort);
        const ExperimentResult tri = run_experiment(
            trimodal_spec("m1+m2+m3", Fusion::joint, {"m1", "m2", "m3"}, seed), cohort);
        const ComparisonResult cmp = controlled_comparison(tri, bi);
        if (cmp.mean_delta > 0.0) ++gain_ok;

        if (seed == 210) {
            const AlignedCohort aligned = align_for_spec(bi_spec, cohort);
            const FoldPlan plan = plan_for_spec(bi_spec, aligned);
            const std::vector<Obs> test_obs = take(aligned.obs, plan.test);
            std::vector<std::size_t> sub(19);
            std::iota(sub.begin(), sub.end(), 0);
            const std::vector<double> sub_risk = take(tri.ensemble_test_risk, sub);
            const std::vector<Obs> sub_obs = take(test_obs, sub);
            const BootstrapResult bs = bootstrap_ci(
                19,
                [&](const std::vector<std::size_t>& idx) {
                    return concordance(take(sub_risk, idx), take(sub_obs, idx));
                },
                10000, 555, 0.95);
            width = bs.upper - bs.lower;
        }
    }

    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "CS ordering %d/10 (need 8), trimodal gain %d/10 (need 7), n=19 "
                  "interval width %.3f (need > 0.2)",
                  order_ok, gain_ok, width);
    note = buf;
    return order_ok >= 8 && gain_ok >= 7 && width > 0.2;
}

// ---------------------------------------------------------------- criterion 7

json synth_config_json() {
    json j;
    j["version"] = 1;
    j["n"] = 160;
    j["modalities"] = json::array({json{{"id", "m1"}, {"dim", 5}, {"signal_weight", 0.9}},
                                   json{{"id", "m2"}, {"dim", 4}, {"signal_weight", 0.4}}});
    j["gbm_fraction"] = 0.3;
    j["target_censoring"] = 0.3;
    j["censoring_tolerance"] = 0.08;
    j["seed"] = 4;
    return j;
}

json exp_config_json(const std::string& name, std::uint64_t seed) {
    json j;
    j["version"] = 1;
    j["name"] = name;
    j["data"]["clinical"] = "data/clinical.csv";
    j["data"]["features"] = json::array({"data/m1.csv", "data/m2.csv"});
    j["modalities"] = json::array({"m1", "m2"});
    j["fusion"] = "joint";
    j["encoders"] =
        json::array({json{{"output_dim", 4}, {"dropout", 0.0}},
                     json{{"output_dim", 4}, {"dropout", 0.0}}});
    j["head"] = json{{"hidden", 8}, {"dropout", 0.0}};
    j["train"] = json{{"epochs", 6}, {"head_lr", 5e-3}, {"encoder_lr", 1e-3},
                      {"patience", 4}};
    j["bootstrap"] = json{{"resamples", 100}};
    j["k_folds"] = 3;
    j["test_fraction"] = 0.25;
    j["seed"] = seed;
    return j;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

bool c7_determinism(const std::string& cli, std::string& note) {
    const fs::path dir("acceptance_tmp");
    fs::create_directories(dir);
    write_json(dir / "synth.json", synth_config_json());
    write_json(dir / "exp.json", exp_config_json("m1+m2", 11));

    if (run_cli(cli, "synth " + (dir / "synth.json").string() + " --out " +
                         (dir / "data").string() + " --quiet") != 0) {
        note = "synth command failed";
        return false;
    }
    for (const char* out : {"out_a", "out_b"}) {
        if (run_cli(cli, "run " + (dir / "exp.json").string() + " --out " +
                             (dir / out).string() + " --quiet") != 0) {
            note = "run command failed";
            return false;
        }
    }
    const std::string csv_a = slurp((dir / "out_a/results.csv").string());
    const std::string csv_b = slurp((dir / "out_b/results.csv").string());
    if (csv_a != csv_b) {
        note = "results.csv differs between reruns";
        return false;
    }
    for (const char* pair : {"out_a", "out_b"}) {
        if (run_cli(cli, "chart " + (dir / pair / "results.csv").string() + " --out " +
                             (dir / (std::string(pair) + ".svg")).string() + " --quiet") !=
            0) {
            note = "chart command failed";
            return false;
        }
    }
    const std::string svg_a = slurp((dir / "out_a.svg").string());
    const std::string svg_b = slurp((dir / "out_b.svg").string());
    if (svg_a != svg_b) {
        note = "chart SVG differs between reruns";
        return false;
    }
    note = "rerun produced byte-identical results.csv and SVG (pipeline is "
           "single-threaded)";
    return true;
}

// ---------------------------------------------------------------- criterion 8

bool c8_calibration(std::string& note) {
    double worst = 0.0;
    for (std::uint64_t seed = 301; seed <= 310; ++seed) {
        SynthConfig cfg;
        cfg.n = 600;
        cfg.modalities = {{"m1", 4, 0.8}};
        cfg.gbm_fraction = 0.36;
        cfg.subtype_multiplier = 2.0;
        cfg.target_censoring = 0.596;
        cfg.censoring_tolerance = 0.03;
        cfg.seed = seed;
        const SynthResult r = synth_generate(cfg);
        const double gap = std::abs(r.realized_censoring - 0.596);
        worst = std::max(worst, gap);
        if (gap > 0.03) {
            note = "seed " + std::to_string(seed) + " realized censoring " +
                   std::to_string(r.realized_censoring);
            return false;
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "10/10 seeds within 0.03 of 0.596 (worst gap %.4f)",
                  worst);
    note = buf;
    return true;
}

// ---------------------------------------------------------------- criterion 9

bool c9_cli_contract(const std::string& cli, std::string& note) {
    const fs::path dir("acceptance_tmp");
    fs::create_directories(dir);

    if (run_cli(cli, "chart " + (dir / "out_a/results.csv").string() + " --out " +
                         (dir / "ok.svg").string() + " --quiet") != 0) {
        note = "expected exit 0 on a valid chart command";
        return false;
    }

    json bad_version = exp_config_json("bad", 1);
    bad_version["version"] = 99;
    write_json(dir / "bad_version.json", bad_version);
    int rc = run_cli(cli, "run " + (dir / "bad_version.json").string() + " --out " +
                              (dir / "out_bad").string());
    if (rc != 2) {
        note = "config error exited " + std::to_string(rc) + ", want 2";
        return false;
    }

    json bad_data = exp_config_json("baddata", 1);
    bad_data["data"]["clinical"] = "missing/clinical.csv";
    write_json(dir / "bad_data.json", bad_data);
    rc = run_cli(cli, "run " + (dir / "bad_data.json").string() + " --out " +
                          (dir / "out_bad").string());
    if (rc != 3) {
        note = "data error exited " + std::to_string(rc) + ", want 3";
        return false;
    }

    json explode = exp_config_json("explode", 11);
    explode["encoders"] = json::array(
        {json{{"hidden", json::array({8})}, {"output_dim", 4}, {"dropout", 0.0}},
         json{{"hidden", json::array({8})}, {"output_dim", 4}, {"dropout", 0.0}}});
    explode["train"] = json{{"epochs", 3}, {"head_lr", 1e200}, {"encoder_lr", 1e200},
                            {"patience", 2}};
    write_json(dir / "explode.json", explode);
    rc = run_cli(cli, "run " + (dir / "explode.json").string() + " --out " +
                          (dir / "out_bad").string());
    if (rc != 4) {
        note = "training abort exited " + std::to_string(rc) + ", want 4";
        return false;
    }

    write_json(dir / "exp_seed12.json", exp_config_json("m1+m2b", 12));
    rc = run_cli(cli, "compare " + (dir / "exp.json").string() + " " +
                          (dir / "exp_seed12.json").string() + " --out " +
                          (dir / "cmp_bad").string());
    if (rc != 5) {
        note = "plan mismatch exited " + std::to_string(rc) + ", want 5";
        return false;
    }

    std::vector<ResultsRow> rows;
    const char* fusions[7] = {"unimodal", "early",          "late",  "joint",
                              "bilinear", "cross_attention", "gated"};
    const std::size_t bars_per_group[7] = {3, 2, 2, 2, 2, 2, 2};
    Rng rng(9);
    std::size_t fused = 0;
    for (std::size_t g = 0; g < 7; ++g) {
        for (std::size_t b = 0; b < bars_per_group[g]; ++b) {
            ResultsRow r;
            r.model = "combo" + std::to_string(g + 1);
            r.fusion = fusions[(fused++) % 7];
            r.test_cs = 0.5 + 0.3 * rng.uniform();
            r.test_ci = r.test_cs;
            r.ibs = 0.25;
            r.ci_lower = r.test_cs - 0.05;
            r.ci_upper = r.test_cs + 0.05;
            r.n_test = (g == 2 || g == 6) && b == 0 ? 19 : 60;
            r.small_n = r.n_test <= 25;
            rows.push_back(r);
        }
    }
    const std::string chart_in = (dir / "fifteen.csv").string();
    write_csv(chart_in, results_to_csv(rows));
    const std::string chart_out = (dir / "fifteen.svg").string();
    if (run_cli(cli, "chart " + chart_in + " --out " + chart_out + " --quiet") != 0) {
        note = "chart command failed on 15-row input";
        return false;
    }
    const std::string svg = slurp(chart_out);
    const std::size_t bars = count_substr(svg, "class=\"bar\"");
    const std::size_t groups = count_substr(svg, "class=\"group-label\"");
    const bool hatched = svg.find("url(#hatch") != std::string::npos;
    if (bars != 15 || groups != 7 || !hatched) {
        note = "chart drew " + std::to_string(bars) + " bars in " + std::to_string(groups) +
               " groups, hatch=" + std::to_string(hatched);
        return false;
    }
    note = "exit codes 0/2/3/4/5 honored; 15 bars in 7 groups with small-n hatching";
    return true;
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: acceptance <path-to-survfuse-cli>\n");
        return 2;
    }
    const std::string cli = argv[1];

    criterion(1, "fusion gradients match numeric differentiation", c1_gradients);
    criterion(2, "metrics match independent oracles", c2_metric_oracles);
    criterion(3, "sign-flip permutation test is exact", c3_permutation);
    criterion(4, "composite score identity holds on emitted rows", c4_cs_identity);
    criterion(5, "late-fusion weights behave symmetrically", c5_late_fusion);
    criterion(6, "synthetic cohorts reproduce signal ordering", c6_directional);
    criterion(7, "reruns are byte-identical",
              [&](std::string& note) { return c7_determinism(cli, note); });
    criterion(8, "censoring calibration hits its target", c8_calibration);
    criterion(9, "CLI contract: exit codes and chart structure",
              [&](std::string& note) { return c9_cli_contract(cli, note); });

    if (g_failures == 0) {
        std::printf("all 9 criteria passed\n");
        return 0;
    }
    std::printf("%d criteria failed\n", g_failures);
    return 1;
}
