#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "mflab/harness.hpp"

namespace mflab {

namespace {

struct Series {
    std::string label;
    std::string color;
    // per axis value: aggregates; undefined points carry NaN medians
    std::vector<AggregateRow> points;
    bool has_data = false;
};

std::string color_of(const std::string& optimizer) {
    if (optimizer == "gnc") return "#1f77b4";
    if (optimizer == "gd") return "#d62728";
    if (optimizer == "prior") return "#7f7f7f";
    return "#2ca02c";
}

std::string fmt(double v) {
    char b[48];
    std::snprintf(b, sizeof(b), "%.6g", v);
    return b;
}

void render_svg(const std::string& axis_label, const std::vector<int>& axis_values,
                std::vector<Series>& series, std::ostream& out) {
    const double width = 760, height = 520;
    const double ml = 80, mr = 170, mt = 40, mb = 60;
    const double pw = width - ml - mr, ph = height - mt - mb;

    // Log-scale y range from the defined quartiles.
    double lo = 1e300, hi = -1e300;
    for (const auto& s : series)
        for (const auto& p : s.points) {
            if (!std::isfinite(p.median)) continue;
            const double a = std::isfinite(p.q25) && p.q25 > 0 ? p.q25 : p.median;
            const double b = std::isfinite(p.q75) && p.q75 > 0 ? p.q75 : p.median;
            if (a > 0) lo = std::min(lo, a);
            if (b > 0) hi = std::max(hi, b);
        }
    if (lo > hi) {  // nothing to draw at all
        lo = 1e-3;
        hi = 1.0;
    }
    double ylo = std::floor(std::log10(lo) - 0.2);
    double yhi = std::ceil(std::log10(hi) + 0.2);
    if (yhi - ylo < 1) yhi = ylo + 1;

    auto xpos = [&](std::size_t idx) {
        if (axis_values.size() == 1) return ml + pw / 2;
        return ml + pw * static_cast<double>(idx) / (axis_values.size() - 1);
    };
    auto ypos = [&](double v) {
        const double lv = std::log10(std::max(v, 1e-300));
        return mt + ph * (1.0 - (lv - ylo) / (yhi - ylo));
    };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

    // frame + y decade gridlines
    out << "<g stroke=\"#444\" stroke-width=\"1\" fill=\"none\">\n"
        << "<path d=\"M" << ml << ' ' << mt << " V" << (mt + ph) << " H" << (ml + pw)
        << "\"/>\n</g>\n";
    for (int e = static_cast<int>(ylo); e <= static_cast<int>(yhi); ++e) {
        const double y = ypos(std::pow(10.0, e));
        out << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << (ml + pw) << "\" y2=\""
            << y << "\" stroke=\"#ddd\"/>\n";
        out << "<text x=\"" << (ml - 8) << "\" y=\"" << (y + 4)
            << "\" text-anchor=\"end\" font-size=\"12\" font-family=\"sans-serif\">1e" << e
            << "</text>\n";
    }
    for (std::size_t i = 0; i < axis_values.size(); ++i) {
        const double x = xpos(i);
        out << "<line x1=\"" << x << "\" y1=\"" << (mt + ph) << "\" x2=\"" << x << "\" y2=\""
            << (mt + ph + 5) << "\" stroke=\"#444\"/>\n";
        out << "<text x=\"" << x << "\" y=\"" << (mt + ph + 20)
            << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">"
            << axis_values[i] << "</text>\n";
    }
    out << "<text x=\"" << (ml + pw / 2) << "\" y=\"" << (height - 16)
        << "\" text-anchor=\"middle\" font-size=\"14\" font-family=\"sans-serif\">"
        << axis_label << "</text>\n";
    out << "<text x=\"20\" y=\"" << (mt + ph / 2)
        << "\" text-anchor=\"middle\" font-size=\"14\" font-family=\"sans-serif\" "
           "transform=\"rotate(-90 20 "
        << (mt + ph / 2) << ")\">generalization loss</text>\n";

    // series
    for (const auto& s : series) {
        if (!s.has_data) continue;
        std::string path;
        bool pen_down = false;
        for (std::size_t i = 0; i < s.points.size(); ++i) {
            const auto& p = s.points[i];
            if (!std::isfinite(p.median)) {
                pen_down = false;  // gap for undefined cells
                continue;
            }
            path += (pen_down ? "L" : "M") + fmt(xpos(i)) + " " + fmt(ypos(p.median)) + " ";
            pen_down = true;
        }
        out << "<path d=\"" << path << "\" stroke=\"" << s.color
            << "\" stroke-width=\"1.5\" fill=\"none\"/>\n";
        for (std::size_t i = 0; i < s.points.size(); ++i) {
            const auto& p = s.points[i];
            if (!std::isfinite(p.median)) continue;
            const double x = xpos(i);
            if (std::isfinite(p.q25) && std::isfinite(p.q75) && p.q25 > 0 && p.q75 > 0) {
                out << "<line x1=\"" << x << "\" y1=\"" << ypos(p.q25) << "\" x2=\"" << x
                    << "\" y2=\"" << ypos(p.q75) << "\" stroke=\"" << s.color
                    << "\" stroke-width=\"1.5\"/>\n";
                for (double q : {p.q25, p.q75})
                    out << "<line x1=\"" << (x - 4) << "\" y1=\"" << ypos(q) << "\" x2=\""
                        << (x + 4) << "\" y2=\"" << ypos(q) << "\" stroke=\"" << s.color
                        << "\" stroke-width=\"1.5\"/>\n";
            }
            out << "<circle cx=\"" << x << "\" cy=\"" << ypos(p.median) << "\" r=\"4\" fill=\""
                << s.color << "\"/>\n";
        }
    }

    // legend
    double ly = mt + 10;
    for (const auto& s : series) {
        const double lx = ml + pw + 16;
        out << "<circle cx=\"" << lx << "\" cy=\"" << (ly - 4) << "\" r=\"4\" fill=\""
            << s.color << "\"/>\n";
        out << "<text x=\"" << (lx + 10) << "\" y=\"" << ly
            << "\" font-size=\"12\" font-family=\"sans-serif\">" << s.label
            << (s.has_data ? "" : " (no data)") << "</text>\n";
        ly += 20;
    }
    out << "</svg>\n";
}

void render_from_aggregates(const std::string& axis_label,
                            const std::vector<AggregateRow>& aggregates,
                            const std::vector<std::string>& optimizer_order,
                            std::ostream& out) {
    std::vector<int> axis_values;
    for (const auto& row : aggregates)
        if (std::find(axis_values.begin(), axis_values.end(), row.axis_value) ==
            axis_values.end())
            axis_values.push_back(row.axis_value);
    std::sort(axis_values.begin(), axis_values.end());

    std::vector<Series> series;
    for (const auto& name : optimizer_order) {
        Series s;
        s.label = name;
        s.color = color_of(name);
        s.points.resize(axis_values.size());
        for (const auto& row : aggregates) {
            if (to_string(row.optimizer) != name) continue;
            const auto it = std::find(axis_values.begin(), axis_values.end(), row.axis_value);
            s.points[it - axis_values.begin()] = row;
            if (std::isfinite(row.median)) s.has_data = true;
        }
        series.push_back(std::move(s));
    }
    render_svg(axis_label, axis_values, series, out);
}

}  // namespace

void emit_plot(const SweepResult& result, std::ostream& out) {
    std::vector<std::string> order;
    for (const auto opt : result.config.optimizers) order.push_back(to_string(opt));
    render_from_aggregates(to_string(result.config.axis), result.aggregates(), order, out);
}

void emit_plot_from_csv(const std::string& csv_text, std::ostream& out) {
    const CsvSweep parsed = parse_sweep_csv(csv_text);
    std::vector<std::string> order;
    for (const auto& row : parsed.rows)
        if (std::find(order.begin(), order.end(), row.optimizer) == order.end())
            order.push_back(row.optimizer);
    render_from_aggregates(parsed.axis, parsed.aggregates(), order, out);
}

}  // namespace mflab
