#include "mcpscope/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace mcpscope::svg {

namespace {

constexpr double kW = 760, kH = 440, kLeft = 70, kRight = 200, kTop = 40, kBottom = 60;

std::string esc(const std::string& s) {
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

std::string num(double v) { return fmt::format("{:.2f}", v); }

struct Frame {
    double x0, x1, y0, y1;
    bool log_y;

    [[nodiscard]] double px(double x) const {
        return x1 == x0 ? kLeft : kLeft + (x - x0) / (x1 - x0) * (kW - kLeft - kRight);
    }
    [[nodiscard]] double py(double y) const {
        double a = y0, b = y1, v = y;
        if (log_y) {
            a = std::log10(a);
            b = std::log10(b);
            v = std::log10(std::max(v, y0));
        }
        return b == a ? kH - kBottom : kH - kBottom - (v - a) / (b - a) * (kH - kTop - kBottom);
    }
};

Frame frame_for(const Axes& a, const std::vector<const std::vector<double>*>& ys) {
    Frame f{0, 1, 0, 1, a.log_y};
    if (!a.x.empty()) {
        f.x0 = *std::min_element(a.x.begin(), a.x.end());
        f.x1 = *std::max_element(a.x.begin(), a.x.end());
    }
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto* v : ys) {
        for (double y : *v) {
            if (!std::isfinite(y) || (a.log_y && y <= 0)) continue;
            lo = std::min(lo, y);
            hi = std::max(hi, y);
        }
    }
    if (!std::isfinite(lo)) {
        lo = a.log_y ? 1 : 0;
        hi = a.log_y ? 10 : 1;
    }
    if (!a.log_y) lo = std::min(lo, 0.0);
    if (hi == lo) hi = lo + 1;
    f.y0 = a.y_min.value_or(lo);
    f.y1 = a.y_max.value_or(hi);
    return f;
}

std::string open(const Axes& a) {
    return fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
        "font-family=\"sans-serif\" font-size=\"11\">\n"
        "<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n"
        "<text x=\"{2}\" y=\"22\" font-size=\"14\" font-weight=\"bold\">{3}</text>\n",
        kW, kH, kLeft, esc(a.title));
}

std::string axes_markup(const Axes& a, const Frame& f) {
    std::string s;
    const double bx = kH - kBottom;
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", num(kLeft), num(bx),
                     num(kW - kRight));
    s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", num(kLeft), num(kTop),
                     num(bx));
    for (int i = 0; i <= 4; ++i) {
        double v = f.log_y ? std::pow(10.0, std::log10(f.y0) + i * (std::log10(f.y1) - std::log10(f.y0)) / 4)
                           : f.y0 + i * (f.y1 - f.y0) / 4;
        double y = f.py(v);
        std::string label = a.percent_y ? fmt::format("{:.0f}%", v * 100) : fmt::format("{:.3g}", v);
        s += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#dddddd\"/>\n", num(kLeft), num(y),
                         num(kW - kRight));
        s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", num(kLeft - 6), num(y + 4), esc(label));
    }
    for (std::size_t i = 0; i < a.x.size() && i < a.x_ticks.size(); ++i) {
        if (a.x_ticks[i].empty()) continue;
        s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\" transform=\"rotate(-45 {} {})\">{}</text>\n",
                         num(f.px(a.x[i])), num(bx + 14), num(f.px(a.x[i])), num(bx + 14), esc(a.x_ticks[i]));
    }
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", num((kLeft + kW - kRight) / 2),
                     num(kH - 8), esc(a.x_label));
    s += fmt::format("<text x=\"14\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {0})\">{1}</text>\n",
                     num((kTop + bx) / 2), esc(a.y_label));
    return s;
}

std::string legend(const std::vector<const Series*>& all) {
    std::string s;
    double y = kTop + 4;
    for (const auto* se : all) {
        if (se->name.empty()) continue;
        s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n", num(kW - kRight + 12),
                         num(y), se->color);
        s += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", num(kW - kRight + 28), num(y + 9), esc(se->name));
        y += 16;
    }
    return s;
}

std::string polyline(const Axes& a, const Frame& f, const Series& se) {
    std::string s;
    if (!se.lower.empty() && se.lower.size() == se.y.size() && se.upper.size() == se.y.size()) {
        std::string pts;
        for (std::size_t i = 0; i < a.x.size(); ++i) {
            if (std::isfinite(se.upper[i])) pts += fmt::format("{},{} ", num(f.px(a.x[i])), num(f.py(se.upper[i])));
        }
        for (std::size_t i = a.x.size(); i-- > 0;) {
            if (std::isfinite(se.lower[i])) pts += fmt::format("{},{} ", num(f.px(a.x[i])), num(f.py(se.lower[i])));
        }
        if (!pts.empty()) s += fmt::format("<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.15\"/>\n", pts, se.color);
    }
    if (se.line) {
        std::string pts;
        for (std::size_t i = 0; i < a.x.size() && i < se.y.size(); ++i) {
            if (std::isfinite(se.y[i])) pts += fmt::format("{},{} ", num(f.px(a.x[i])), num(f.py(se.y[i])));
        }
        s += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"{}/>\n", pts, se.color,
                         se.dashed ? " stroke-dasharray=\"5,4\"" : "");
    }
    if (se.markers) {
        for (std::size_t i = 0; i < a.x.size() && i < se.y.size(); ++i) {
            if (std::isfinite(se.y[i])) {
                s += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{}\"/>\n", num(f.px(a.x[i])),
                                 num(f.py(se.y[i])), se.color);
            }
        }
    }
    return s;
}

}  // namespace

std::string palette(std::size_t i) {
    static const std::vector<std::string> p{"#b2182b", "#d6604d", "#f4a582", "#fddbc7", "#8c2d04", "#cc4c02", "#ec7014",
                                            "#2166ac", "#4393c3", "#92c5de", "#999999", "#1b7837", "#762a83", "#000000"};
    return p[i % p.size()];
}

std::string lines(const Axes& axes, const std::vector<Series>& series) {
    std::vector<const std::vector<double>*> ys;
    for (const auto& s : series) {
        ys.push_back(&s.y);
        if (!s.lower.empty()) ys.push_back(&s.lower);
        if (!s.upper.empty()) ys.push_back(&s.upper);
    }
    auto f = frame_for(axes, ys);
    std::string out = open(axes) + axes_markup(axes, f);
    std::vector<const Series*> all;
    for (const auto& s : series) {
        out += polyline(axes, f, s);
        all.push_back(&s);
    }
    return out + legend(all) + "</svg>\n";
}

std::string stacked(const Axes& axes, const std::vector<Series>& areas, const std::vector<Series>& overlay) {
    const std::size_t n = axes.x.size();
    std::vector<std::vector<double>> tops(areas.size(), std::vector<double>(n, 0));
    std::vector<double> run(n, 0);
    for (std::size_t k = 0; k < areas.size(); ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            double v = i < areas[k].y.size() && std::isfinite(areas[k].y[i]) ? areas[k].y[i] : 0;
            run[i] += v;
            tops[k][i] = run[i];
        }
    }
    std::vector<const std::vector<double>*> ys{&run};
    for (const auto& s : overlay) ys.push_back(&s.y);
    auto ax = axes;
    if (!ax.y_min) ax.y_min = 0;
    auto f = frame_for(ax, ys);
    std::string out = open(ax) + axes_markup(ax, f);
    std::vector<double> below(n, 0);
    std::vector<const Series*> all;
    for (std::size_t k = 0; k < areas.size(); ++k) {
        std::string pts;
        for (std::size_t i = 0; i < n; ++i) pts += fmt::format("{},{} ", num(f.px(ax.x[i])), num(f.py(tops[k][i])));
        for (std::size_t i = n; i-- > 0;) pts += fmt::format("{},{} ", num(f.px(ax.x[i])), num(f.py(below[i])));
        out += fmt::format("<polygon points=\"{}\" fill=\"{}\" stroke=\"white\" stroke-width=\"0.5\"/>\n", pts,
                           areas[k].color);
        below = tops[k];
        all.push_back(&areas[k]);
    }
    for (const auto& s : overlay) {
        out += polyline(ax, f, s);
        all.push_back(&s);
    }
    return out + legend(all) + "</svg>\n";
}

std::string bars(const std::string& title, const std::vector<std::string>& labels, const std::vector<double>& values,
                 bool percent) {
    const double row = 22, left = 300, width = 380;
    const double h = kTop + row * static_cast<double>(labels.size()) + 20;
    double hi = 0;
    for (double v : values) hi = std::max(hi, std::isfinite(v) ? v : 0.0);
    if (hi <= 0) hi = 1;
    std::string out = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
        "font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n"
        "<text x=\"10\" y=\"22\" font-size=\"14\" font-weight=\"bold\">{2}</text>\n",
        kW, num(h), esc(title));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        double y = kTop + row * static_cast<double>(i);
        double v = i < values.size() && std::isfinite(values[i]) ? values[i] : 0;
        out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", num(left - 8), num(y + 14),
                           esc(labels[i]));
        out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n", num(left), num(y + 3),
                           num(v / hi * width), num(row - 6), palette(i));
        out += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", num(left + v / hi * width + 6), num(y + 14),
                           percent ? fmt::format("{:.1f}%", v * 100) : fmt::format("{:.4g}", v));
    }
    return out + "</svg>\n";
}

}  // namespace mcpscope::svg
