#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "survfuse/survfuse.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace survfuse;

namespace {

constexpr const char* kToolVersion = "1.0.0";

// Exit codes: 0 ok, 2 bad config, 3 bad data, 4 training abort, 5 mismatched
// fold plans in a comparison.
enum ExitCode { kOk = 0, kConfigError = 2, kDataError = 3, kTrainAbort = 4, kPlanMismatch = 5 };

json load_json_config(const std::string& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
}

const json& require_field(const json& j, const std::string& key, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(where + "." + key + ": missing field");
    return *it;
}

double get_num(const json& j, const std::string& key, const std::string& where) {
    const json& v = require_field(j, key, where);
    if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
    return v.get<double>();
}

double get_num_or(const json& j, const std::string& key, const std::string& where, double dflt) {
    if (!j.is_object() || !j.contains(key)) return dflt;
    return get_num(j, key, where);
}

std::size_t get_count(const json& j, const std::string& key, const std::string& where) {
    const json& v = require_field(j, key, where);
    if (!v.is_number_unsigned())
        throw ConfigError(where + "." + key + ": expected a non-negative integer");
    return v.get<std::size_t>();
}

std::size_t get_count_or(const json& j, const std::string& key, const std::string& where,
                         std::size_t dflt) {
    if (!j.is_object() || !j.contains(key)) return dflt;
    return get_count(j, key, where);
}

std::string get_str(const json& j, const std::string& key, const std::string& where) {
    const json& v = require_field(j, key, where);
    if (!v.is_string()) throw ConfigError(where + "." + key + ": expected a string");
    return v.get<std::string>();
}

bool get_bool_or(const json& j, const std::string& key, const std::string& where, bool dflt) {
    if (!j.is_object() || !j.contains(key)) return dflt;
    const json& v = j.at(key);
    if (!v.is_boolean()) throw ConfigError(where + "." + key + ": expected a boolean");
    return v.get<bool>();
}

void check_version(const json& j, const std::string& where) {
    const std::size_t v = get_count(j, "version", where);
    if (v != 1)
        throw ConfigError(where + ".version: unsupported schema version " + std::to_string(v));
}

std::string resolve_path(const std::string& config_path, const std::string& p) {
    fs::path fp(p);
    if (fp.is_absolute()) return p;
    return (fs::path(config_path).parent_path() / fp).string();
}

std::uint64_t fnv1a_file(const std::string& path) {
    const std::string bytes = read_text_file(path);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

SynthConfig parse_synth_config(const json& j, const std::string& where) {
    check_version(j, where);
    SynthConfig c;
    c.n = get_count(j, "n", where);
    const json& mods = require_field(j, "modalities", where);
    if (!mods.is_array() || mods.empty())
        throw ConfigError(where + ".modalities: expected a non-empty array");
    for (std::size_t i = 0; i < mods.size(); ++i) {
        const std::string mw = where + ".modalities[" + std::to_string(i) + "]";
        SynthModality m;
        m.id = get_str(mods[i], "id", mw);
        m.dim = get_count(mods[i], "dim", mw);
        m.signal_weight = get_num(mods[i], "signal_weight", mw);
        c.modalities.push_back(std::move(m));
    }
    c.gbm_fraction = get_num_or(j, "gbm_fraction", where, c.gbm_fraction);
    c.subtype_multiplier = get_num_or(j, "subtype_multiplier", where, c.subtype_multiplier);
    c.baseline_hazard = get_num_or(j, "baseline_hazard", where, c.baseline_hazard);
    c.target_censoring = get_num_or(j, "target_censoring", where, c.target_censoring);
    c.censoring_tolerance = get_num_or(j, "censoring_tolerance", where, c.censoring_tolerance);
    c.seed = get_count_or(j, "seed", where, 1);
    return c;
}

struct ExperimentFile {
    ExperimentSpec spec;
    std::string clinical_path;
    std::vector<std::string> feature_paths;
    json raw;
};

ExperimentFile parse_experiment_config(const std::string& path) {
    const json j = load_json_config(path);
    const std::string where = fs::path(path).filename().string();
    check_version(j, where);
    ExperimentFile f;
    f.raw = j;
    f.spec.name = get_str(j, "name", where);

    const json& data = require_field(j, "data", where);
    f.clinical_path = resolve_path(path, get_str(data, "clinical", where + ".data"));
    const json& feats = require_field(data, "features", where + ".data");
    if (!feats.is_array() || feats.empty())
        throw ConfigError(where + ".data.features: expected a non-empty array of paths");
    for (const auto& p : feats) {
        if (!p.is_string())
            throw ConfigError(where + ".data.features: expected a string path");
        f.feature_paths.push_back(resolve_path(path, p.get<std::string>()));
    }

    const json& mods = require_field(j, "modalities", where);
    if (!mods.is_array() || mods.empty())
        throw ConfigError(where + ".modalities: expected a non-empty array");
    for (const auto& m : mods) {
        if (!m.is_string()) throw ConfigError(where + ".modalities: expected strings");
        f.spec.modalities.push_back(m.get<std::string>());
    }
    if (j.contains("restrict_to")) {
        const json& r = j.at("restrict_to");
        if (!r.is_array()) throw ConfigError(where + ".restrict_to: expected an array");
        for (const auto& m : r) {
            if (!m.is_string()) throw ConfigError(where + ".restrict_to: expected strings");
            f.spec.restrict_to.push_back(m.get<std::string>());
        }
    }

    f.spec.fusion = fusion_from_name(get_str(j, "fusion", where));

    const json& encs = require_field(j, "encoders", where);
    if (!encs.is_array() || encs.size() != f.spec.modalities.size())
        throw ConfigError(where + ".encoders: expected one encoder spec per modality");
    for (std::size_t i = 0; i < encs.size(); ++i) {
        const std::string ew = where + ".encoders[" + std::to_string(i) + "]";
        EncoderSpec e;
        if (encs[i].contains("hidden")) {
            const json& h = encs[i].at("hidden");
            if (!h.is_array()) throw ConfigError(ew + ".hidden: expected an array");
            for (const auto& w : h) {
                if (!w.is_number_unsigned() || w.get<std::size_t>() == 0)
                    throw ConfigError(ew + ".hidden: expected positive integers");
                e.hidden.push_back(w.get<std::size_t>());
            }
        }
        e.output_dim = get_count(encs[i], "output_dim", ew);
        e.dropout = get_num_or(encs[i], "dropout", ew, e.dropout);
        if (encs[i].contains("input_dim")) e.input_dim = get_count(encs[i], "input_dim", ew);
        f.spec.encoders.push_back(std::move(e));
    }

    if (j.contains("head")) {
        const json& h = j.at("head");
        const std::string hw = where + ".head";
        f.spec.head.hidden = get_count_or(h, "hidden", hw, f.spec.head.hidden);
        f.spec.head.dropout = get_num_or(h, "dropout", hw, f.spec.head.dropout);
        f.spec.head.attention_dim = get_count_or(h, "attention_dim", hw, f.spec.head.attention_dim);
        f.spec.head.attention_dropout =
            get_num_or(h, "attention_dropout", hw, f.spec.head.attention_dropout);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        const std::string tw = where + ".train";
        f.spec.train.epochs = get_count_or(t, "epochs", tw, f.spec.train.epochs);
        f.spec.train.head_lr = get_num_or(t, "head_lr", tw, f.spec.train.head_lr);
        f.spec.train.encoder_lr = get_num_or(t, "encoder_lr", tw, f.spec.train.encoder_lr);
        f.spec.train.patience = get_count_or(t, "patience", tw, f.spec.train.patience);
        f.spec.train.min_epochs = get_count_or(t, "min_epochs", tw, f.spec.train.min_epochs);
    }
    if (j.contains("lasso")) {
        const json& l = j.at("lasso");
        const std::string lw = where + ".lasso";
        f.spec.lasso.grid_size = get_count_or(l, "grid_size", lw, f.spec.lasso.grid_size);
        f.spec.lasso.grid_decades = get_num_or(l, "grid_decades", lw, f.spec.lasso.grid_decades);
        f.spec.lasso.cv_folds = get_count_or(l, "cv_folds", lw, f.spec.lasso.cv_folds);
        f.spec.lasso.ridge_eps = get_num_or(l, "ridge_eps", lw, f.spec.lasso.ridge_eps);
    }
    if (j.contains("bootstrap")) {
        const json& b = j.at("bootstrap");
        const std::string bw = where + ".bootstrap";
        f.spec.bootstrap.resamples =
            get_count_or(b, "resamples", bw, f.spec.bootstrap.resamples);
        f.spec.bootstrap.level = get_num_or(b, "level", bw, f.spec.bootstrap.level);
    }
    f.spec.k_folds = get_count_or(j, "k_folds", where, f.spec.k_folds);
    f.spec.test_fraction = get_num_or(j, "test_fraction", where, f.spec.test_fraction);
    f.spec.stratify_by_subtype =
        get_bool_or(j, "stratify_by_subtype", where, f.spec.stratify_by_subtype);
    f.spec.seed = get_count_or(j, "seed", where, f.spec.seed);
    return f;
}

Cohort load_cohort(const ExperimentFile& f) {
    Cohort c;
    c.clinical = load_clinical(f.clinical_path);
    for (const auto& p : f.feature_paths) c.blocks.push_back(load_features(p));
    return c;
}

// Encoder input dims default to the data's feature dims.
void fill_input_dims(ExperimentSpec& spec, const Cohort& cohort) {
    for (std::size_t m = 0; m < spec.modalities.size(); ++m) {
        const std::size_t dim = cohort.block(spec.modalities[m]).dim;
        if (spec.encoders[m].input_dim == 0) spec.encoders[m].input_dim = dim;
    }
}

json input_digests(const ExperimentFile& f) {
    json d;
    d[fs::path(f.clinical_path).filename().string()] = hex64(fnv1a_file(f.clinical_path));
    for (const auto& p : f.feature_paths)
        d[fs::path(p).filename().string()] = hex64(fnv1a_file(p));
    return d;
}

int cmd_synth(const std::string& config_path, const std::string& out_dir, std::uint64_t seed,
              bool seed_set, bool quiet) {
    const json j = load_json_config(config_path);
    SynthConfig cfg = parse_synth_config(j, fs::path(config_path).filename().string());
    if (seed_set) cfg.seed = seed;
    const SynthResult r = synth_generate(cfg);

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    save_clinical((dir / "clinical.csv").string(), r.clinical);
    for (const auto& b : r.blocks) save_features((dir / (b.modality_id + ".csv")).string(), b);

    json manifest;
    manifest["version"] = 1;
    manifest["tool_version"] = kToolVersion;
    manifest["command"] = "synth";
    manifest["seed"] = cfg.seed;
    manifest["config"] = j;
    manifest["config"]["seed"] = cfg.seed;
    manifest["realized_censoring"] = r.realized_censoring;
    manifest["censoring_rate"] = r.censoring_rate;
    write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");

    if (!quiet) {
        std::cout << "wrote " << r.clinical.size() << " patients, " << r.blocks.size()
                  << " modality files to " << out_dir << "\n";
        std::cout << "realized censoring " << format_double(r.realized_censoring) << " (target "
                  << format_double(cfg.target_censoring) << ")\n";
    }
    return kOk;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, std::uint64_t seed,
            bool seed_set, bool quiet) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentFile f = parse_experiment_config(config_path);
    if (seed_set) f.spec.seed = seed;
    const Cohort cohort = load_cohort(f);
    fill_input_dims(f.spec, cohort);
    const ExperimentResult res = run_experiment(f.spec, cohort);

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    const std::vector<ResultsRow> rows = {to_row(res)};
    write_csv((dir / "results.csv").string(), results_to_csv(rows));
    const std::string table = results_text_table(rows);
    write_text_file((dir / "results.txt").string(), table);

    json manifest;
    manifest["version"] = 1;
    manifest["tool_version"] = kToolVersion;
    manifest["command"] = "run";
    manifest["seed"] = f.spec.seed;
    manifest["config"] = f.raw;
    manifest["config"]["seed"] = f.spec.seed;
    manifest["fold_plan_hash"] = hex64(res.plan_hash);
    manifest["input_digests"] = input_digests(f);
    manifest["param_count"] = res.param_count;
    manifest["n_train"] = res.n_train;
    if (!res.fold_weights.empty()) {
        json w = json::array();
        for (const auto& fw : res.fold_weights) {
            json e;
            e["modalities"] = fw.modality_ids;
            e["beta"] = fw.beta;
            e["normalized"] = fw.normalized;
            e["lambda"] = fw.lambda;
            e["degenerate"] = fw.degenerate;
            w.push_back(std::move(e));
        }
        manifest["late_fusion_weights"] = std::move(w);
    }
    const auto t1 = std::chrono::steady_clock::now();
    manifest["wall_time_seconds"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count() / 1000.0;
    write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");

    if (!quiet) std::cout << table;
    return kOk;
}

int cmd_compare(const std::string& baseline_path, const std::string& augmented_path,
                const std::string& out_dir, std::uint64_t seed, bool seed_set, bool quiet,
                bool allow_uncontrolled) {
    ExperimentFile fb = parse_experiment_config(baseline_path);
    ExperimentFile fa = parse_experiment_config(augmented_path);
    if (seed_set) {
        fb.spec.seed = seed;
        fa.spec.seed = seed;
    }
    const Cohort cb = load_cohort(fb);
    const Cohort ca = load_cohort(fa);
    fill_input_dims(fb.spec, cb);
    fill_input_dims(fa.spec, ca);
    const ExperimentResult rb = run_experiment(fb.spec, cb);
    const ExperimentResult ra = run_experiment(fa.spec, ca);

    json manifest;
    manifest["version"] = 1;
    manifest["tool_version"] = kToolVersion;
    manifest["command"] = "compare";
    manifest["baseline"] = fb.raw;
    manifest["augmented"] = fa.raw;
    manifest["baseline_plan_hash"] = hex64(rb.plan_hash);
    manifest["augmented_plan_hash"] = hex64(ra.plan_hash);

    CsvTable t;
    t.header = {"baseline",  "augmented", "baseline_cs", "augmented_cs",
                "delta_cs",  "p_value",   "min_p",       "note"};
    std::string text;
    if (ra.plan_hash == rb.plan_hash && ra.folds.size() == rb.folds.size()) {
        const ComparisonResult c = controlled_comparison(ra, rb);
        t.rows.push_back({rb.name, ra.name, format_double(rb.report.cs),
                          format_double(ra.report.cs), format_double(c.mean_delta),
                          format_double(c.p_value), format_double(c.min_p), "Controlled"});
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "%s -> %s (controlled, same folds)\n"
                      "baseline CS %.3f, augmented CS %.3f\n"
                      "mean per-fold dCS %+.4f, permutation p = %.4f (min attainable %.4f)\n",
                      rb.name.c_str(), ra.name.c_str(), rb.report.cs, ra.report.cs,
                      c.mean_delta, c.p_value, c.min_p);
        text = buf;
        text += "per-fold dCS:";
        for (double d : c.delta_cs) {
            char db[32];
            std::snprintf(db, sizeof(db), " %+.4f", d);
            text += db;
        }
        text += "\n";
    } else if (allow_uncontrolled) {
        t.rows.push_back({rb.name, ra.name, format_double(rb.report.cs),
                          format_double(ra.report.cs),
                          format_double(ra.report.cs - rb.report.cs), "", "", "Uncontrolled"});
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "%s -> %s (UNCONTROLLED: different patient splits; no paired test)\n"
                      "baseline CS %.3f, augmented CS %.3f, ensemble dCS %+.4f\n",
                      rb.name.c_str(), ra.name.c_str(), rb.report.cs, ra.report.cs,
                      ra.report.cs - rb.report.cs);
        text = buf;
    } else {
        throw PlanMismatchError(
            "not a controlled comparison: the two runs use different fold plans (rerun with "
            "matching seed/k_folds/test_fraction/restrict_to, or pass --allow-uncontrolled)");
    }

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    write_csv((dir / "comparison.csv").string(), t);
    write_text_file((dir / "comparison.txt").string(), text);
    write_text_file((dir / "manifest.json").string(), manifest.dump(2) + "\n");
    if (!quiet) std::cout << text;
    return kOk;
}

int cmd_chart(const std::vector<std::string>& results_paths, const std::string& out_path,
              bool quiet) {
    std::vector<ResultsRow> rows;
    for (const auto& p : results_paths) {
        const std::vector<ResultsRow> r = results_from_csv(read_csv(p), p);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    const std::string svg = chart_svg(rows);
    if (const fs::path parent = fs::path(out_path).parent_path(); !parent.empty())
        fs::create_directories(parent);
    write_text_file(out_path, svg);
    if (!quiet)
        std::cout << "wrote " << rows.size() << " bars to " << out_path << "\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multimodal survival fusion toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    std::string config_a, config_b, out = ".";
    std::uint64_t seed = 0;
    bool quiet = false, allow_uncontrolled = false;
    std::vector<std::string> chart_inputs;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic cohort");
    synth->add_option("config", config_a, "synth config JSON")->required();
    CLI::Option* synth_seed = synth->add_option("--seed", seed, "override the config seed");
    synth->add_option("--out", out, "output directory");
    synth->add_flag("--quiet", quiet, "suppress informational output");

    CLI::App* run = app.add_subcommand("run", "run one experiment");
    run->add_option("config", config_a, "experiment config JSON")->required();
    CLI::Option* run_seed = run->add_option("--seed", seed, "override the config seed");
    run->add_option("--out", out, "output directory");
    run->add_flag("--quiet", quiet, "suppress informational output");

    CLI::App* compare = app.add_subcommand("compare", "same-split comparison of two experiments");
    compare->add_option("baseline", config_a, "baseline experiment config")->required();
    compare->add_option("augmented", config_b, "augmented experiment config")->required();
    CLI::Option* cmp_seed = compare->add_option("--seed", seed, "override both config seeds");
    compare->add_option("--out", out, "output directory");
    compare->add_flag("--quiet", quiet, "suppress informational output");
    compare->add_flag("--allow-uncontrolled", allow_uncontrolled,
                      "report mismatched-plan comparisons instead of failing");

    CLI::App* chart = app.add_subcommand("chart", "render results as a grouped bar chart");
    chart->add_option("results", chart_inputs, "results CSV files")->required();
    chart->add_option("--out", out, "output SVG path");
    chart->add_flag("--quiet", quiet, "suppress informational output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help/--version
        app.exit(e);
        return kConfigError;
    }

    try {
        if (synth->parsed())
            return cmd_synth(config_a, out, seed, !synth_seed->empty(), quiet);
        if (run->parsed()) return cmd_run(config_a, out, seed, !run_seed->empty(), quiet);
        if (compare->parsed())
            return cmd_compare(config_a, config_b, out, seed, !cmp_seed->empty(), quiet,
                               allow_uncontrolled);
        if (chart->parsed()) {
            const std::string out_path = out == "." ? "chart.svg" : out;
            return cmd_chart(chart_inputs, out_path, quiet);
        }
    } catch (const PlanMismatchError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kPlanMismatch;
    } catch (const TrainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kTrainAbort;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const Error& e) { // DataError, ShapeError, StatError
        std::cerr << "error: " << e.what() << "\n";
        return kDataError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDataError;
    }
    return kConfigError;
}
