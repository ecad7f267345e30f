#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vconf/config.hpp"
#include "vconf/errors.hpp"
#include "vconf/metrics.hpp"

namespace vconf {

struct ReportMeta {
    std::string dataset;
    std::string model;
    std::string method;
    std::string strategy;
    bool include_difficulty = false;
    std::string aggregation;
    std::string reference;
    bool recalibrate = false;
    int k = 1;
    int num_bins = 10;
    std::uint64_t seed = 0;
};

inline ReportMeta report_meta(const ExperimentConfig& cfg) {
    ReportMeta meta;
    meta.dataset = to_string(cfg.format);
    meta.model = cfg.provider.model;
    meta.method = method_label(cfg);
    meta.strategy = to_string(cfg.strategy.kind);
    meta.include_difficulty = cfg.strategy.include_difficulty;
    meta.aggregation = to_string(cfg.aggregation);
    meta.reference = to_string(cfg.reference);
    meta.recalibrate = cfg.recalibrate;
    meta.k = cfg.k;
    meta.num_bins = cfg.num_bins;
    meta.seed = cfg.seed;
    return meta;
}

/// report.json payload; field order is fixed so identical runs serialize to
/// identical bytes.
inline nlohmann::ordered_json report_to_json(const std::optional<CalibrationReport>& report,
                                             const ReportMeta& meta) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["dataset"] = meta.dataset;
    j["model"] = meta.model;
    j["method"] = meta.method;
    j["strategy"] = meta.strategy;
    j["include_difficulty"] = meta.include_difficulty;
    j["aggregation"] = meta.aggregation;
    j["reference"] = meta.reference;
    j["recalibrate"] = meta.recalibrate;
    j["k"] = meta.k;
    j["num_bins"] = meta.num_bins;
    j["seed"] = meta.seed;
    if (!report) {
        j["n"] = 0;
        j["abstain_count"] = 0;
        j["accuracy"] = nullptr;
        j["ece"] = nullptr;
        j["brier"] = nullptr;
        j["auroc"] = nullptr;
        j["reliability"] = nlohmann::ordered_json::array();
        j["atypicality"] = nullptr;
        return j;
    }
    j["n"] = report->n;
    j["abstain_count"] = report->abstain_count;
    j["accuracy"] = report->accuracy;
    j["ece"] = report->ece;
    j["brier"] = report->brier;
    if (report->auroc) j["auroc"] = *report->auroc;
    else j["auroc"] = nullptr;
    auto rel = nlohmann::ordered_json::array();
    for (const auto& bin : report->reliability) {
        rel.push_back({{"lower", bin.lower},
                       {"upper", bin.upper},
                       {"mean_confidence", bin.mean_confidence},
                       {"accuracy", bin.accuracy},
                       {"count", bin.count}});
    }
    j["reliability"] = std::move(rel);
    if (report->atypicality_histogram || report->atypicality_bins) {
        nlohmann::ordered_json atyp;
        if (report->atypicality_histogram) atyp["histogram"] = *report->atypicality_histogram;
        if (report->atypicality_bins) {
            auto bins = nlohmann::ordered_json::array();
            for (const auto& b : *report->atypicality_bins)
                bins.push_back({{"lower", b.lower},
                                {"upper", b.upper},
                                {"accuracy", b.accuracy},
                                {"ece", b.ece},
                                {"count", b.count}});
            atyp["bins"] = std::move(bins);
        }
        if (report->diff_cross) {
            auto rows = nlohmann::ordered_json::array();
            for (const auto& row : *report->diff_cross) rows.push_back(row);
            atyp["difficulty_cross"] = std::move(rows);
        }
        j["atypicality"] = std::move(atyp);
    } else {
        j["atypicality"] = nullptr;
    }
    return j;
}

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
}

inline std::string slugify(std::string_view name) {
    std::string out;
    for (char c : name) {
        if (is_alnum(c)) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        else if (!out.empty() && out.back() != '_') out += '_';
    }
    while (!out.empty() && out.back() == '_') out.pop_back();
    return out.empty() ? "run" : out;
}

} // namespace detail

/// Methods x metrics comparison table: one row per method, columns
/// Acc / ECE / Brier / AUC.
inline std::string metrics_csv(const std::vector<nlohmann::ordered_json>& reports) {
    std::ostringstream out;
    out << "method,acc,ece,brier,auc\n";
    for (const auto& r : reports) {
        out << r.at("method").get<std::string>() << ",";
        auto cell = [&](const char* key) {
            const auto& v = r.at(key);
            return v.is_null() ? std::string("NA") : detail::fmt(v.get<double>());
        };
        out << cell("accuracy") << "," << cell("ece") << "," << cell("brier") << ","
            << cell("auroc") << "\n";
    }
    return out.str();
}

inline std::string ece_by_method_csv(const std::vector<nlohmann::ordered_json>& reports) {
    std::ostringstream out;
    out << "method,ece\n";
    for (const auto& r : reports) {
        const auto& v = r.at("ece");
        out << r.at("method").get<std::string>() << ","
            << (v.is_null() ? std::string("NA") : detail::fmt(v.get<double>())) << "\n";
    }
    return out.str();
}

inline std::string reliability_csv(const nlohmann::ordered_json& report) {
    std::ostringstream out;
    out << "bin_lower,bin_upper,mean_confidence,accuracy,count\n";
    for (const auto& b : report.at("reliability")) {
        out << detail::fmt(b.at("lower").get<double>()) << ","
            << detail::fmt(b.at("upper").get<double>()) << ","
            << detail::fmt(b.at("mean_confidence").get<double>()) << ","
            << detail::fmt(b.at("accuracy").get<double>()) << "," << b.at("count").get<std::size_t>()
            << "\n";
    }
    return out.str();
}

inline std::string atypicality_histogram_csv(const nlohmann::ordered_json& report) {
    std::ostringstream out;
    out << "bin_lower,bin_upper,count\n";
    const auto& hist = report.at("atypicality").at("histogram");
    auto n = hist.size();
    for (std::size_t k = 0; k < n; ++k) {
        out << detail::fmt(static_cast<double>(k) / static_cast<double>(n)) << ","
            << detail::fmt(static_cast<double>(k + 1) / static_cast<double>(n)) << ","
            << hist[k].get<std::size_t>() << "\n";
    }
    return out.str();
}

inline std::string atypicality_bins_csv(const nlohmann::ordered_json& report, const char* metric) {
    std::ostringstream out;
    out << "bin_lower,bin_upper," << metric << ",count\n";
    for (const auto& b : report.at("atypicality").at("bins")) {
        out << detail::fmt(b.at("lower").get<double>()) << ","
            << detail::fmt(b.at("upper").get<double>()) << ","
            << detail::fmt(b.at(metric).get<double>()) << "," << b.at("count").get<std::size_t>()
            << "\n";
    }
    return out.str();
}

inline std::string difficulty_cross_csv(const nlohmann::ordered_json& report) {
    std::ostringstream out;
    const auto& rows = report.at("atypicality").at("difficulty_cross");
    std::size_t num_bins = rows.empty() ? 0 : rows[0].size();
    out << "difficulty";
    for (std::size_t k = 0; k < num_bins; ++k) out << ",bin_" << k;
    out << "\n";
    for (std::size_t d = 0; d < rows.size(); ++d) {
        out << (d + 1);
        for (const auto& cell : rows[d]) out << "," << cell.get<std::size_t>();
        out << "\n";
    }
    return out.str();
}

namespace detail {

struct SvgCanvas {
    static constexpr double kSize = 480.0;
    static constexpr double kMargin = 52.0;

    static double x(double v) { return kMargin + v * (kSize - 2 * kMargin); }
    static double y(double v) { return kSize - kMargin - v * (kSize - 2 * kMargin); }
};

inline void svg_axes(std::ostringstream& out, const std::string& title, const char* x_label,
                     const char* y_label) {
    using C = SvgCanvas;
    out << "<rect width='" << C::kSize << "' height='" << C::kSize << "' fill='white'/>\n";
    out << "<text x='" << C::kSize / 2 << "' y='24' text-anchor='middle' font-size='14'>" << title
        << "</text>\n";
    for (int i = 0; i <= 5; ++i) {
        double v = i / 5.0;
        out << "<line x1='" << C::x(v) << "' y1='" << C::y(0) << "' x2='" << C::x(v) << "' y2='"
            << C::y(1) << "' stroke='#dddddd'/>\n";
        out << "<line x1='" << C::x(0) << "' y1='" << C::y(v) << "' x2='" << C::x(1) << "' y2='"
            << C::y(v) << "' stroke='#dddddd'/>\n";
        out << "<text x='" << C::x(v) << "' y='" << C::y(0) + 18
            << "' text-anchor='middle' font-size='10'>" << fmt(v).substr(0, 3) << "</text>\n";
        out << "<text x='" << C::x(0) - 8 << "' y='" << C::y(v) + 4
            << "' text-anchor='end' font-size='10'>" << fmt(v).substr(0, 3) << "</text>\n";
    }
    out << "<text x='" << C::kSize / 2 << "' y='" << C::kSize - 8
        << "' text-anchor='middle' font-size='12'>" << x_label << "</text>\n";
    out << "<text x='14' y='" << C::kSize / 2 << "' text-anchor='middle' font-size='12' "
        << "transform='rotate(-90 14 " << C::kSize / 2 << ")'>" << y_label << "</text>\n";
}

} // namespace detail

/// Calibration curve: mean confidence vs accuracy per occupied bin, with
/// the perfect-calibration diagonal as a dashed reference line.
inline std::string reliability_svg(const nlohmann::ordered_json& report) {
    using C = detail::SvgCanvas;
    std::ostringstream out;
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << C::kSize << "' height='"
        << C::kSize << "'>\n";
    detail::svg_axes(out, "Calibration curve: " + report.at("method").get<std::string>(),
                     "mean confidence", "accuracy");
    out << "<line x1='" << C::x(0) << "' y1='" << C::y(0) << "' x2='" << C::x(1) << "' y2='"
        << C::y(1) << "' stroke='green' stroke-dasharray='6 4'/>\n";
    std::ostringstream pts;
    for (const auto& b : report.at("reliability")) {
        double cx = C::x(b.at("mean_confidence").get<double>());
        double cy = C::y(b.at("accuracy").get<double>());
        pts << cx << "," << cy << " ";
        out << "<circle cx='" << cx << "' cy='" << cy << "' r='4' fill='steelblue'/>\n";
    }
    out << "<polyline points='" << pts.str()
        << "' fill='none' stroke='steelblue' stroke-width='2'/>\n";
    out << "</svg>\n";
    return out.str();
}

/// Atypicality score distribution as a bar chart.
inline std::string histogram_svg(const nlohmann::ordered_json& report) {
    using C = detail::SvgCanvas;
    const auto& hist = report.at("atypicality").at("histogram");
    std::size_t n = hist.size();
    std::size_t peak = 1;
    for (const auto& c : hist) peak = std::max(peak, c.get<std::size_t>());
    std::ostringstream out;
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << C::kSize << "' height='"
        << C::kSize << "'>\n";
    detail::svg_axes(out, "Atypicality distribution: " + report.at("method").get<std::string>(),
                     "atypicality score", "fraction of peak bin");
    for (std::size_t k = 0; k < n; ++k) {
        double lo = static_cast<double>(k) / static_cast<double>(n);
        double hi = static_cast<double>(k + 1) / static_cast<double>(n);
        double h = static_cast<double>(hist[k].get<std::size_t>()) / static_cast<double>(peak);
        out << "<rect x='" << C::x(lo) + 1 << "' y='" << C::y(h) << "' width='"
            << C::x(hi) - C::x(lo) - 2 << "' height='" << C::y(0) - C::y(h)
            << "' fill='indianred'/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

} // namespace vconf
