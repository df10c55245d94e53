#include "cvemap/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "file_io.hpp"

namespace cvemap::plot {

namespace {

std::string escape_xml(const std::string& text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&':
                out += "&amp;";
                break;
            case '<':
                out += "&lt;";
                break;
            case '>':
                out += "&gt;";
                break;
            case '"':
                out += "&quot;";
                break;
            default:
                out += c;
        }
    }
    return out;
}

std::string num(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.2f", v);
    return buffer;
}

}  // namespace

std::string bar_chart_svg(const std::string& title, std::span<const std::pair<std::string, double>> bars,
                          double max_value) {
    constexpr double kBarWidth = 60.0;
    constexpr double kGap = 30.0;
    constexpr double kPlotHeight = 240.0;
    constexpr double kLeft = 50.0;
    constexpr double kTop = 40.0;
    const double width = kLeft + static_cast<double>(bars.size()) * (kBarWidth + kGap) + kGap;
    const double height = kTop + kPlotHeight + 60.0;
    max_value = max_value > 0.0 ? max_value : 1.0;

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
                      num(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<text x=\"" + num(width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
           escape_xml(title) + "</text>\n";
    const double base = kTop + kPlotHeight;
    svg += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(base) + "\" x2=\"" + num(width - 10) + "\" y2=\"" + num(base) +
           "\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = max_value * tick / 4.0;
        const double y = base - kPlotHeight * tick / 4.0;
        svg += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" + num(v) +
               "</text>\n";
    }
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const auto& [label, value] = bars[i];
        const double clamped = std::clamp(value, 0.0, max_value);
        const double h = kPlotHeight * clamped / max_value;
        const double x = kLeft + kGap + static_cast<double>(i) * (kBarWidth + kGap);
        svg += "<rect x=\"" + num(x) + "\" y=\"" + num(base - h) + "\" width=\"" + num(kBarWidth) + "\" height=\"" +
               num(h) + "\" fill=\"#4a78b5\"/>\n";
        svg += "<text x=\"" + num(x + kBarWidth / 2) + "\" y=\"" + num(base - h - 4) + "\" text-anchor=\"middle\">" +
               num(value) + "</text>\n";
        svg += "<text x=\"" + num(x + kBarWidth / 2) + "\" y=\"" + num(base + 16) + "\" text-anchor=\"middle\">" +
               escape_xml(label) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

std::vector<std::filesystem::path> write_metric_charts(std::span<const eval::EvalReport> reports,
                                                       const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    auto emit = [&](const std::string& file, const std::string& title, auto value_of) {
        std::vector<std::pair<std::string, double>> bars;
        for (const auto& r : reports) {
            bars.emplace_back(r.model, value_of(r));
        }
        auto path = dir / file;
        detail::write_file(path, bar_chart_svg(title, bars));
        written.push_back(path);
    };
    emit("mrr.svg", "MRR", [](const eval::EvalReport& r) { return r.mrr; });
    std::set<int> ks;
    for (const auto& r : reports) {
        for (const auto& [k, v] : r.map_at) {
            ks.insert(k);
        }
    }
    for (int k : ks) {
        const auto suffix = std::to_string(k);
        emit("map_at_" + suffix + ".svg", "MAP@" + suffix, [k](const eval::EvalReport& r) {
            auto it = r.map_at.find(k);
            return it == r.map_at.end() ? 0.0 : it->second;
        });
        emit("ndcg_at_" + suffix + ".svg", "NDCG@" + suffix, [k](const eval::EvalReport& r) {
            auto it = r.ndcg_at.find(k);
            return it == r.ndcg_at.end() ? 0.0 : it->second;
        });
    }
    return written;
}

}  // namespace cvemap::plot
