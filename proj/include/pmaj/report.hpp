#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmaj/certified.hpp"
#include "pmaj/grid.hpp"
#include "pmaj/ineq.hpp"
#include "pmaj/majorant.hpp"

namespace pmaj {

using json = nlohmann::json;

inline void to_json(json& j, const Grid1D& g) { j = json{{"a", g.a}, {"b", g.b}, {"n", g.n}}; }

inline void from_json(const json& j, Grid1D& g) {
    g = Grid1D(j.at("a").get<double>(), j.at("b").get<double>(), j.at("n").get<int>());
}

inline void to_json(json& j, const P1Function& f) {
    j = json{{"grid", f.grid}, {"values", f.values}};
}

inline void from_json(const json& j, P1Function& f) {
    f = P1Function(j.at("grid").get<Grid1D>(), j.at("values").get<std::vector<double>>());
}

inline void to_json(json& j, const P0Function& f) {
    j = json{{"grid", f.grid}, {"values", f.values}};
}

inline void from_json(const json& j, P0Function& f) {
    f = P0Function(j.at("grid").get<Grid1D>(), j.at("values").get<std::vector<double>>());
}

inline void to_json(json& j, const CertifiedBound& b) {
    j = json{{"value", b.value},
             {"provenance", to_string(b.provenance)},
             {"description", b.description}};
}

inline void to_json(json& j, const MajorantReport& r) {
    j = json{{"kind", r.kind},
             {"p", r.p},
             {"error", r.error_measure},
             {"est_accuracy", r.est_accuracy},
             {"dual_norm_bound", r.dual_norm_bound},
             {"constant_C", r.constant_C},
             {"majorant", r.majorant},
             {"efficiency", r.efficiency},
             {"certified", r.certified},
             {"worst_provenance", to_string(r.worst_provenance)},
             {"pieces", r.pieces}};
}

inline void to_json(json& j, const IneqResult& r) {
    j = json{{"name", r.name},
             {"samples", r.samples},
             {"worst_rel_slack", r.worst_rel_slack},
             {"worst_abs_slack", r.worst_abs_slack},
             {"violations", r.violations},
             {"witness", r.witness}};
}

inline void to_json(json& j, const IneqSuiteReport& r) {
    j = json{{"seed", r.seed},
             {"trials_per_ineq", r.trials_per_ineq},
             {"total_violations", r.total_violations()},
             {"results", r.results}};
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out << content;
}

/// Minimal hand-rolled SVG 1.1 log-log line chart (no plotting dependency).
/// Each series is a named polyline over positive (x, y) points.
struct SvgSeries {
    std::string name;
    std::string color;
    std::vector<std::pair<double, double>> points;
};

inline std::string render_loglog_svg(const std::vector<SvgSeries>& series,
                                     const std::string& x_label, const std::string& y_label) {
    const int W = 640, H = 480, ML = 70, MR = 20, MT = 30, MB = 50;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (auto [x, y] : s.points) {
            if (x <= 0.0 || y <= 0.0) continue;
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (!(xmin < xmax)) {
        xmin /= 2.0;
        xmax = xmin * 4.0 + 1.0;
    }
    if (!(ymin < ymax)) {
        ymin /= 2.0;
        ymax = ymin * 4.0 + 1.0;
    }
    const double lx0 = std::log10(xmin), lx1 = std::log10(xmax);
    const double ly0 = std::log10(ymin), ly1 = std::log10(ymax);
    auto X = [&](double x) { return ML + (std::log10(x) - lx0) / (lx1 - lx0) * (W - ML - MR); };
    auto Y = [&](double y) { return H - MB - (std::log10(y) - ly0) / (ly1 - ly0) * (H - MT - MB); };

    std::string svg;
    char buf[256];
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"640\" "
           "height=\"480\" viewBox=\"0 0 640 480\">\n";
    svg += "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", ML, H - MB,
                  W - MR, H - MB);
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", ML, MT, ML,
                  H - MB);
    svg += buf;

    // decade ticks
    for (int d = static_cast<int>(std::ceil(lx0)); d <= static_cast<int>(std::floor(lx1)); ++d) {
        const double x = std::pow(10.0, d);
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%.1f\" y1=\"%d\" x2=\"%.1f\" y2=\"%d\" stroke=\"black\"/>"
                      "<text x=\"%.1f\" y=\"%d\" font-size=\"11\" text-anchor=\"middle\">1e%d"
                      "</text>\n",
                      X(x), H - MB, X(x), H - MB + 5, X(x), H - MB + 18, d);
        svg += buf;
    }
    for (int d = static_cast<int>(std::ceil(ly0)); d <= static_cast<int>(std::floor(ly1)); ++d) {
        const double y = std::pow(10.0, d);
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%d\" y1=\"%.1f\" x2=\"%d\" y2=\"%.1f\" stroke=\"black\"/>"
                      "<text x=\"%d\" y=\"%.1f\" font-size=\"11\" text-anchor=\"end\">1e%d"
                      "</text>\n",
                      ML - 5, Y(y), ML, Y(y), ML - 8, Y(y) + 4, d);
        svg += buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%d\" y=\"%d\" font-size=\"12\" text-anchor=\"middle\">%s</text>\n",
                  (ML + W - MR) / 2, H - 10, x_label.c_str());
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"15\" y=\"%d\" font-size=\"12\" text-anchor=\"middle\" "
                  "transform=\"rotate(-90 15 %d)\">%s</text>\n",
                  (MT + H - MB) / 2, (MT + H - MB) / 2, y_label.c_str());
    svg += buf;

    int li = 0;
    for (const auto& s : series) {
        std::string pts;
        for (auto [x, y] : s.points) {
            if (x <= 0.0 || y <= 0.0) continue;
            std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", X(x), Y(y));
            pts += buf;
        }
        std::snprintf(buf, sizeof(buf),
                      "<polyline points=\"%s\" fill=\"none\" stroke=\"%s\" stroke-width=\"1.5\"/>\n",
                      pts.c_str(), s.color.c_str());
        svg += buf;
        std::snprintf(buf, sizeof(buf),
                      "<text x=\"%d\" y=\"%d\" font-size=\"12\" fill=\"%s\">%s</text>\n",
                      W - MR - 160, MT + 15 * (li + 1), s.color.c_str(), s.name.c_str());
        svg += buf;
        ++li;
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace pmaj
