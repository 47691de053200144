#pragma once

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "survfuse/error.hpp"
#include "survfuse/harness.hpp"
#include "survfuse/io_csv.hpp"

namespace survfuse {

struct ResultsRow {
    std::string model;  // modality combination label
    std::string fusion; // strategy name
    double test_cs = 0.0;
    double test_ci = 0.0;
    double ibs = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    std::size_t n_test = 0;
    bool small_n = false;
};

inline ResultsRow to_row(const ExperimentResult& r) {
    ResultsRow row;
    row.model = r.name;
    row.fusion = fusion_name(r.fusion);
    row.test_cs = r.report.cs;
    row.test_ci = r.report.ci;
    row.ibs = r.report.ibs;
    row.ci_lower = r.report.ci_lower;
    row.ci_upper = r.report.ci_upper;
    row.n_test = r.report.n;
    row.small_n = r.report.small_n;
    return row;
}

inline const std::vector<std::string>& results_header() {
    static const std::vector<std::string> h = {"model",    "fusion",   "test_cs",
                                               "test_ci",  "ibs",      "ci_lower",
                                               "ci_upper", "n_test",   "small_n"};
    return h;
}

inline CsvTable results_to_csv(const std::vector<ResultsRow>& rows) {
    CsvTable t;
    t.header = results_header();
    for (const auto& r : rows)
        t.rows.push_back({r.model, r.fusion, format_double(r.test_cs), format_double(r.test_ci),
                          format_double(r.ibs), format_double(r.ci_lower),
                          format_double(r.ci_upper), std::to_string(r.n_test),
                          r.small_n ? "1" : "0"});
    return t;
}

inline std::vector<ResultsRow> results_from_csv(const CsvTable& t, const std::string& path) {
    if (t.header != results_header())
        throw DataError(path + ": unexpected results header");
    std::vector<ResultsRow> rows;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const std::string where = path + ":" + std::to_string(i + 2);
        const auto& f = t.rows[i];
        ResultsRow r;
        r.model = f[0];
        r.fusion = f[1];
        r.test_cs = parse_double(f[2], where);
        r.test_ci = parse_double(f[3], where);
        r.ibs = parse_double(f[4], where);
        r.ci_lower = parse_double(f[5], where);
        r.ci_upper = parse_double(f[6], where);
        const long n = parse_long(f[7], where);
        if (n < 0) throw DataError(where + ": negative n_test");
        r.n_test = static_cast<std::size_t>(n);
        const long s = parse_long(f[8], where);
        if (s != 0 && s != 1) throw DataError(where + ": small_n must be 0 or 1");
        r.small_n = s == 1;
        rows.push_back(std::move(r));
    }
    return rows;
}

// Fixed-width table for terminals; the double-dagger marks small test sets
// whose calibration estimates are imprecise.
inline std::string results_text_table(const std::vector<ResultsRow>& rows) {
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f", v);
        return std::string(buf);
    };
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"model", "fusion", "CS", "CI", "IBS", "95% CI (bootstrap)", "n"});
    for (const auto& r : rows) {
        const std::string mark = r.small_n ? "‡" : "";
        cells.push_back({r.model, r.fusion, num(r.test_cs) + mark, num(r.test_ci), num(r.ibs),
                         "[" + num(r.ci_lower) + ", " + num(r.ci_upper) + "]",
                         std::to_string(r.n_test)});
    }
    std::vector<std::size_t> width(cells[0].size(), 0);
    for (const auto& row : cells)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        for (std::size_t c = 0; c < cells[i].size(); ++c) {
            out += cells[i][c];
            if (c + 1 < cells[i].size())
                out += std::string(width[c] - cells[i][c].size() + 2, ' ');
        }
        out += '\n';
        if (i == 0) {
            for (std::size_t c = 0; c < width.size(); ++c) {
                out += std::string(width[c], '-');
                if (c + 1 < width.size()) out += "  ";
            }
            out += '\n';
        }
    }
    bool any_small = false;
    for (const auto& r : rows) any_small = any_small || r.small_n;
    if (any_small) out += "‡ small test set (n <= 25); IBS and CS are imprecise\n";
    return out;
}

namespace detail {

inline std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

} // namespace detail

// Grouped bar chart of composite scores: one group per modality combination
// (rows keep their input order), one bar per fusion strategy, hatched fill
// on small-n rows. Output is a standalone SVG whose bytes depend only on
// the input rows.
inline std::string chart_svg(const std::vector<ResultsRow>& rows) {
    if (rows.empty()) throw DataError("chart: no rows");
    for (const auto& r : rows)
        if (!(r.test_cs >= 0.0 && r.test_cs <= 1.0))
            throw DataError("chart: CS outside [0,1] for " + r.model + "/" + r.fusion);

    std::vector<std::string> groups; // distinct models, first-appearance order
    for (const auto& r : rows)
        if (std::find(groups.begin(), groups.end(), r.model) == groups.end())
            groups.push_back(r.model);
    std::vector<std::string> fusions; // distinct strategies, first-appearance order
    for (const auto& r : rows)
        if (std::find(fusions.begin(), fusions.end(), r.fusion) == fusions.end())
            fusions.push_back(r.fusion);
    static const char* kPalette[] = {"#4878a8", "#e49444", "#5ca05c", "#c55d5d",
                                     "#8470ab", "#90705c", "#d684bd"};
    const std::size_t n_colors = sizeof(kPalette) / sizeof(kPalette[0]);
    auto color_of = [&](const std::string& fusion) {
        const std::size_t i = static_cast<std::size_t>(
            std::find(fusions.begin(), fusions.end(), fusion) - fusions.begin());
        return std::string(kPalette[i % n_colors]);
    };

    bool any_small = false;
    for (const auto& r : rows) any_small = any_small || r.small_n;

    const double bar_w = 34.0, bar_gap = 6.0, group_gap = 34.0;
    const double left = 64.0, top = 24.0, plot_h = 320.0, bottom_h = 78.0;
    const double legend_h =
        24.0 + 18.0 * static_cast<double>(fusions.size() + (any_small ? 1 : 0));
    double content_w = 0.0;
    std::vector<double> group_x(groups.size(), 0.0), group_w(groups.size(), 0.0);
    {
        double cursor = 0.0;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            std::size_t bars = 0;
            for (const auto& r : rows) bars += r.model == groups[g] ? 1 : 0;
            group_x[g] = cursor;
            group_w[g] = static_cast<double>(bars) * bar_w +
                         static_cast<double>(bars - 1) * bar_gap;
            cursor += group_w[g] + group_gap;
        }
        content_w = cursor - group_gap;
    }
    const double width = left + content_w + 24.0;
    const double height = top + plot_h + bottom_h + legend_h;
    auto N = detail::svg_num;
    auto y_of = [&](double v) { return top + plot_h * (1.0 - v); };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + N(width) + "\" height=\"" +
         N(height) + "\" viewBox=\"0 0 " + N(width) + " " + N(height) + "\">\n";
    s += "<defs>\n";
    for (std::size_t i = 0; i < fusions.size(); ++i) {
        s += "<pattern id=\"hatch" + std::to_string(i) +
             "\" patternUnits=\"userSpaceOnUse\" width=\"6\" height=\"6\" "
             "patternTransform=\"rotate(45)\">";
        s += "<rect width=\"6\" height=\"6\" fill=\"" + color_of(fusions[i]) + "\"/>";
        s += "<line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#ffffff\" stroke-width=\"2.5\"/>";
        s += "</pattern>\n";
    }
    s += "</defs>\n";
    s += "<rect width=\"" + N(width) + "\" height=\"" + N(height) + "\" fill=\"#ffffff\"/>\n";

    for (int i = 0; i <= 10; ++i) {
        const double v = static_cast<double>(i) / 10.0;
        const double y = y_of(v);
        s += "<line x1=\"" + N(left) + "\" y1=\"" + N(y) + "\" x2=\"" + N(left + content_w) +
             "\" y2=\"" + N(y) + "\" stroke=\"" + (i == 0 ? "#333333" : "#dddddd") +
             "\" stroke-width=\"1\"/>\n";
        s += "<text x=\"" + N(left - 8.0) + "\" y=\"" + N(y + 4.0) +
             "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
             detail::svg_num(v) + "</text>\n";
    }
    s += "<text x=\"14\" y=\"" + N(top + plot_h / 2.0) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 14 " +
         N(top + plot_h / 2.0) + ")\">composite score</text>\n";

    std::vector<std::size_t> placed(groups.size(), 0);
    for (const auto& r : rows) {
        const std::size_t g = static_cast<std::size_t>(
            std::find(groups.begin(), groups.end(), r.model) - groups.begin());
        const std::size_t fi = static_cast<std::size_t>(
            std::find(fusions.begin(), fusions.end(), r.fusion) - fusions.begin());
        const double x =
            left + group_x[g] + static_cast<double>(placed[g]) * (bar_w + bar_gap);
        ++placed[g];
        const double y = y_of(r.test_cs);
        const std::string fill =
            r.small_n ? "url(#hatch" + std::to_string(fi) + ")" : color_of(r.fusion);
        s += "<rect class=\"bar\" x=\"" + N(x) + "\" y=\"" + N(y) + "\" width=\"" + N(bar_w) +
             "\" height=\"" + N(top + plot_h - y) + "\" fill=\"" + fill +
             "\" stroke=\"#333333\" stroke-width=\"0.5\"/>\n";
    }
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const double cx = left + group_x[g] + group_w[g] / 2.0;
        s += "<text class=\"group-label\" x=\"" + N(cx) + "\" y=\"" + N(top + plot_h + 18.0) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
             detail::xml_escape(groups[g]) + "</text>\n";
    }

    const double ly0 = top + plot_h + 46.0;
    s += "<text x=\"" + N(left) + "\" y=\"" + N(ly0) +
         "\" font-family=\"sans-serif\" font-size=\"11\" font-weight=\"bold\">fusion</text>\n";
    for (std::size_t i = 0; i < fusions.size(); ++i) {
        const double y = ly0 + 16.0 + 18.0 * static_cast<double>(i);
        s += "<rect x=\"" + N(left) + "\" y=\"" + N(y - 10.0) +
             "\" width=\"14\" height=\"14\" fill=\"" + color_of(fusions[i]) +
             "\" stroke=\"#333333\" stroke-width=\"0.5\"/>\n";
        s += "<text x=\"" + N(left + 20.0) + "\" y=\"" + N(y + 1.0) +
             "\" font-family=\"sans-serif\" font-size=\"11\">" + detail::xml_escape(fusions[i]) +
             "</text>\n";
    }
    if (any_small) {
        const double y = ly0 + 16.0 + 18.0 * static_cast<double>(fusions.size());
        s += "<rect x=\"" + N(left) + "\" y=\"" + N(y - 10.0) +
             "\" width=\"14\" height=\"14\" fill=\"url(#hatch0)\" stroke=\"#333333\" "
             "stroke-width=\"0.5\"/>\n";
        s += "<text x=\"" + N(left + 20.0) + "\" y=\"" + N(y + 1.0) +
             "\" font-family=\"sans-serif\" font-size=\"11\">small test set (n &lt;= 25)</text>\n";
    }
    s += "</svg>\n";
    return s;
}

} // namespace survfuse
