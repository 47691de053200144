#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "survfuse/error.hpp"
#include "survfuse/io_csv.hpp"
#include "survfuse/matrix.hpp"
#include "survfuse/rng.hpp"
#include "survfuse/survival.hpp"

namespace survfuse {

struct ClinicalRecord {
    std::string patient_id;
    double time_months = 0.0;
    int event = 0;
    std::string subtype; // LGG, GBM, or NA
};

// One modality's feature rows, keyed by patient id.
struct ModalityBlock {
    std::string modality_id;
    std::size_t dim = 0;
    std::vector<std::string> ids;
    Matrix x; // ids.size() rows, dim cols
    bool normalized = false;
    std::vector<double> norm_mean, norm_std;

    std::size_t row_of(const std::string& id) const {
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (ids[i] == id) return i;
        throw DataError("modality '" + modality_id + "': no row for patient '" + id + "'");
    }
};

struct Cohort {
    std::vector<ClinicalRecord> clinical;
    std::vector<ModalityBlock> blocks;

    const ModalityBlock& block(const std::string& modality_id) const {
        for (const auto& b : blocks)
            if (b.modality_id == modality_id) return b;
        throw DataError("unknown modality '" + modality_id + "'");
    }

    std::vector<Obs> observations() const {
        std::vector<Obs> o(clinical.size());
        for (std::size_t i = 0; i < clinical.size(); ++i)
            o[i] = {clinical[i].time_months, clinical[i].event};
        return o;
    }
};

inline std::vector<ClinicalRecord> load_clinical(const std::string& path) {
    const CsvTable t = read_csv(path);
    const std::vector<std::string> want = {"patient_id", "time_months", "event", "subtype"};
    if (t.header != want)
        throw DataError(path + ": header must be patient_id,time_months,event,subtype");
    std::vector<ClinicalRecord> out;
    std::unordered_set<std::string> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string where = path + ":" + std::to_string(r + 2);
        ClinicalRecord rec;
        rec.patient_id = t.rows[r][0];
        if (rec.patient_id.empty()) throw DataError(where + ": empty patient_id");
        if (!seen.insert(rec.patient_id).second)
            throw DataError(where + ": duplicate patient_id '" + rec.patient_id + "'");
        rec.time_months = parse_double(t.rows[r][1], where);
        if (!(rec.time_months > 0.0)) throw DataError(where + ": time_months must be > 0");
        const long ev = parse_long(t.rows[r][2], where);
        if (ev != 0 && ev != 1) throw DataError(where + ": event must be 0 or 1");
        rec.event = static_cast<int>(ev);
        rec.subtype = t.rows[r][3];
        if (rec.subtype != "LGG" && rec.subtype != "GBM" && rec.subtype != "NA")
            throw DataError(where + ": subtype must be LGG, GBM, or NA");
        out.push_back(std::move(rec));
    }
    if (out.empty()) throw DataError(path + ": no records");
    return out;
}

inline void save_clinical(const std::string& path, const std::vector<ClinicalRecord>& recs) {
    CsvTable t;
    t.header = {"patient_id", "time_months", "event", "subtype"};
    for (const auto& r : recs)
        t.rows.push_back({r.patient_id, format_double(r.time_months), std::to_string(r.event),
                          r.subtype});
    write_csv(path, t);
}

inline std::string meta_path_for(const std::string& features_path) {
    const std::string suffix = ".csv";
    if (features_path.size() > suffix.size() &&
        features_path.compare(features_path.size() - suffix.size(), suffix.size(), suffix) == 0)
        return features_path.substr(0, features_path.size() - suffix.size()) + ".meta.json";
    return features_path + ".meta.json";
}

inline ModalityBlock load_features(const std::string& path) {
    const CsvTable t = read_csv(path);
    if (t.header.empty() || t.header[0] != "patient_id")
        throw DataError(path + ": first column must be patient_id");
    if (t.header.size() < 2) throw DataError(path + ": no feature columns");
    ModalityBlock b;
    b.dim = t.header.size() - 1;
    for (std::size_t j = 0; j < b.dim; ++j)
        if (t.header[j + 1] != "f" + std::to_string(j))
            throw DataError(path + ": feature columns must be named f0,f1,...");
    b.x = Matrix(t.rows.size(), b.dim);
    std::unordered_set<std::string> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string where = path + ":" + std::to_string(r + 2);
        if (!seen.insert(t.rows[r][0]).second)
            throw DataError(where + ": duplicate patient_id '" + t.rows[r][0] + "'");
        b.ids.push_back(t.rows[r][0]);
        for (std::size_t j = 0; j < b.dim; ++j) {
            const double v = parse_double(t.rows[r][j + 1], where);
            if (!std::isfinite(v)) throw DataError(where + ": non-finite feature value");
            b.x.at(r, j) = v;
        }
    }
    if (b.ids.empty()) throw DataError(path + ": no feature rows");

    const std::string mpath = meta_path_for(path);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_text_file(mpath));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(mpath + ": invalid JSON: " + e.what());
    }
    for (const char* key : {"modality_id", "dim", "normalized"})
        if (!meta.contains(key)) throw DataError(mpath + ": missing field '" + key + "'");
    b.modality_id = meta["modality_id"].get<std::string>();
    if (meta["dim"].get<std::size_t>() != b.dim)
        throw DataError(mpath + ": dim " + meta["dim"].dump() + " does not match " +
                        std::to_string(b.dim) + " feature columns");
    b.normalized = meta["normalized"].get<bool>();
    if (meta.contains("mean")) b.norm_mean = meta["mean"].get<std::vector<double>>();
    if (meta.contains("std")) b.norm_std = meta["std"].get<std::vector<double>>();
    return b;
}

inline void save_features(const std::string& path, const ModalityBlock& b) {
    CsvTable t;
    t.header.push_back("patient_id");
    for (std::size_t j = 0; j < b.dim; ++j) t.header.push_back("f" + std::to_string(j));
    for (std::size_t i = 0; i < b.ids.size(); ++i) {
        std::vector<std::string> row;
        row.push_back(b.ids[i]);
        for (std::size_t j = 0; j < b.dim; ++j) row.push_back(format_double(b.x.at(i, j)));
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);

    nlohmann::json meta;
    meta["modality_id"] = b.modality_id;
    meta["dim"] = b.dim;
    meta["normalized"] = b.normalized;
    meta["mean"] = b.norm_mean;
    meta["std"] = b.norm_std;
    write_text_file(meta_path_for(path), meta.dump(2) + "\n");
}

// Aligned view of a cohort: patients holding every requested modality, in
// clinical-record order, features re-rowed to match.
struct AlignedCohort {
    std::vector<std::string> ids;
    std::vector<Obs> obs;
    std::vector<std::string> subtype;
    std::vector<std::string> modality_ids;
    std::vector<Matrix> features; // one per modality, row i = patient i
};

inline AlignedCohort intersect(const Cohort& cohort, const std::vector<std::string>& modality_ids) {
    if (modality_ids.empty()) throw ConfigError("intersect: no modalities requested");
    std::vector<const ModalityBlock*> blocks;
    for (const auto& id : modality_ids) blocks.push_back(&cohort.block(id));
    std::vector<std::unordered_map<std::string, std::size_t>> row_of(blocks.size());
    for (std::size_t m = 0; m < blocks.size(); ++m)
        for (std::size_t i = 0; i < blocks[m]->ids.size(); ++i)
            row_of[m][blocks[m]->ids[i]] = i;

    AlignedCohort a;
    a.modality_ids = modality_ids;
    a.features.assign(blocks.size(), Matrix());
    std::vector<std::vector<std::size_t>> keep_rows(blocks.size());
    for (const auto& rec : cohort.clinical) {
        bool all = true;
        for (std::size_t m = 0; m < blocks.size(); ++m)
            if (!row_of[m].count(rec.patient_id)) { all = false; break; }
        if (!all) continue;
        a.ids.push_back(rec.patient_id);
        a.obs.push_back({rec.time_months, rec.event});
        a.subtype.push_back(rec.subtype);
        for (std::size_t m = 0; m < blocks.size(); ++m)
            keep_rows[m].push_back(row_of[m][rec.patient_id]);
    }
    if (a.ids.empty()) throw DataError("intersect: no patient holds all requested modalities");
    for (std::size_t m = 0; m < blocks.size(); ++m) {
        Matrix sub(a.ids.size(), blocks[m]->dim);
        for (std::size_t i = 0; i < a.ids.size(); ++i)
            for (std::size_t j = 0; j < blocks[m]->dim; ++j)
                sub.at(i, j) = blocks[m]->x.at(keep_rows[m][i], j);
        a.features[m] = std::move(sub);
    }
    return a;
}

// Per-feature mean and population (divide-by-n) standard deviation, with the
// std floored at 1e-8 so constant columns map to zero.
struct NormStats {
    std::vector<double> mean, std;
};

inline NormStats zscore_fit(const Matrix& x, const std::vector<std::size_t>& rows) {
    if (rows.empty()) throw DataError("zscore: empty fit set");
    NormStats s;
    s.mean.assign(x.cols, 0.0);
    s.std.assign(x.cols, 0.0);
    for (std::size_t r : rows)
        for (std::size_t j = 0; j < x.cols; ++j) s.mean[j] += x.at(r, j);
    for (std::size_t j = 0; j < x.cols; ++j) s.mean[j] /= static_cast<double>(rows.size());
    for (std::size_t r : rows)
        for (std::size_t j = 0; j < x.cols; ++j) {
            const double d = x.at(r, j) - s.mean[j];
            s.std[j] += d * d;
        }
    for (std::size_t j = 0; j < x.cols; ++j)
        s.std[j] = std::max(std::sqrt(s.std[j] / static_cast<double>(rows.size())), 1e-8);
    return s;
}

inline Matrix zscore_apply(const Matrix& x, const NormStats& s) {
    if (s.mean.size() != x.cols)
        throw ShapeError("zscore: stats for " + std::to_string(s.mean.size()) +
                         " features, matrix has " + std::to_string(x.cols));
    Matrix y = x;
    for (std::size_t i = 0; i < y.rows; ++i)
        for (std::size_t j = 0; j < y.cols; ++j) y.at(i, j) = (y.at(i, j) - s.mean[j]) / s.std[j];
    return y;
}

// Mean of per-instance scores grouped per patient.
inline double aggregate_instances(const std::vector<double>& instance_scores) {
    if (instance_scores.empty()) throw DataError("aggregate: empty instance group");
    double s = 0.0;
    for (double v : instance_scores) s += v;
    return s / static_cast<double>(instance_scores.size());
}

// Deals indices into k disjoint folds, event-stratified: each stratum is
// shuffled, then dealt round-robin, so fold event counts differ by at most
// one.
inline std::vector<std::vector<std::size_t>> event_stratified_folds(const std::vector<Obs>& obs,
                                                                    std::size_t k,
                                                                    std::uint64_t seed) {
    if (k < 2) throw ConfigError("folds: k must be >= 2");
    if (obs.size() < k) throw DataError("folds: fewer subjects than folds");
    std::vector<std::vector<std::size_t>> strata(2);
    for (std::size_t i = 0; i < obs.size(); ++i) strata[obs[i].event ? 1 : 0].push_back(i);
    std::vector<std::vector<std::size_t>> folds(k);
    for (std::size_t s = 0; s < strata.size(); ++s) {
        auto& members = strata[s];
        Rng rng(derive_seed(seed, 0x73747261u + s));
        for (std::size_t i = members.size(); i > 1; --i)
            std::swap(members[i - 1], members[rng.below(i)]);
        for (std::size_t i = 0; i < members.size(); ++i) folds[i % k].push_back(members[i]);
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

// K-fold split over the non-test patients plus a fixed held-out test set.
// Folds partition the train set; each fold's validation block is one part,
// its train block the rest.
struct FoldPlan {
    std::size_t k = 0;
    std::uint64_t seed = 0;
    std::vector<std::size_t> test;                // indices into the aligned cohort
    std::vector<std::vector<std::size_t>> folds;  // validation blocks, disjoint
    std::vector<std::string> ids;                 // aligned cohort ids (for hashing)

    std::vector<std::size_t> train_of(std::size_t fold) const {
        std::vector<std::size_t> t;
        for (std::size_t f = 0; f < folds.size(); ++f)
            if (f != fold) t.insert(t.end(), folds[f].begin(), folds[f].end());
        std::sort(t.begin(), t.end());
        return t;
    }

    std::vector<std::size_t> all_train() const {
        std::vector<std::size_t> t;
        for (const auto& f : folds) t.insert(t.end(), f.begin(), f.end());
        std::sort(t.begin(), t.end());
        return t;
    }

    // FNV-1a over the id structure; equal hashes certify that two plans put
    // the same patients in the same folds and test set.
    std::uint64_t hash() const {
        std::uint64_t h = 1469598103934665603ull;
        auto mix = [&](const std::string& s) {
            for (unsigned char c : s) {
                h ^= c;
                h *= 1099511628211ull;
            }
            h ^= 0xff;
            h *= 1099511628211ull;
        };
        mix("k=" + std::to_string(k));
        mix("test");
        for (std::size_t i : test) mix(ids[i]);
        for (std::size_t f = 0; f < folds.size(); ++f) {
            mix("fold=" + std::to_string(f));
            for (std::size_t i : folds[f]) mix(ids[i]);
        }
        return h;
    }
};

// Builds a deterministic event-stratified plan (subtype-and-event strata
// with `by_subtype`). Strata are shuffled independently, the test set takes
// the first `test_fraction` share of each, and the rest is dealt round-robin
// so fold event-rates differ by at most one patient.
inline FoldPlan make_folds(const AlignedCohort& cohort, std::size_t k, double test_fraction,
                           std::uint64_t seed, bool by_subtype = false) {
    if (k < 2) throw ConfigError("make_folds: k must be >= 2");
    if (!(test_fraction >= 0.0 && test_fraction < 1.0))
        throw ConfigError("make_folds: test_fraction outside [0,1)");
    const std::size_t n = cohort.ids.size();
    if (n == 0) throw DataError("make_folds: empty cohort");

    std::map<std::string, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < n; ++i) {
        std::string key = cohort.obs[i].event ? "e1" : "e0";
        if (by_subtype) key += "|" + cohort.subtype[i];
        strata[key].push_back(i);
    }

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.ids = cohort.ids;
    plan.folds.assign(k, {});

    std::uint64_t stratum_counter = 0;
    for (auto& [key, members] : strata) {
        Rng rng(derive_seed(seed, 0x666f6c64u + stratum_counter++));
        for (std::size_t i = members.size(); i > 1; --i)
            std::swap(members[i - 1], members[rng.below(i)]);
        const std::size_t n_test =
            static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(members.size())));
        for (std::size_t i = 0; i < n_test; ++i) plan.test.push_back(members[i]);
        std::size_t f = 0;
        for (std::size_t i = n_test; i < members.size(); ++i) {
            plan.folds[f % k].push_back(members[i]);
            ++f;
        }
    }
    std::sort(plan.test.begin(), plan.test.end());
    for (auto& f : plan.folds) std::sort(f.begin(), f.end());

    for (std::size_t f = 0; f < k; ++f) {
        bool has_event = false;
        for (std::size_t i : plan.folds[f])
            if (cohort.obs[i].event) has_event = true;
        if (plan.folds[f].empty() || !has_event)
            throw DataError("make_folds: fold " + std::to_string(f) +
                            " has no events; too few events for k=" + std::to_string(k));
    }
    return plan;
}

} // namespace survfuse
