#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "artrec/evalsuite.hpp"

namespace artrec {

namespace {

constexpr const char* kXColor = "#1f4fd1";
constexpr const char* kYColor = "#2ca02c";

class Svg {
public:
    Svg(double width, double height) : width_(width), height_(height) {
        out_.setf(std::ios::fixed);
        out_.precision(2);
        out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
             << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\">\n"
             << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    }

    void line(double x1, double y1, double x2, double y2, const char* stroke, double w = 1.0) {
        out_ << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2 << "\" y2=\"" << y2 << "\" stroke=\""
             << stroke << "\" stroke-width=\"" << w << "\"/>\n";
    }
    void rect(double x, double y, double w, double h, const char* fill, double opacity = 1.0) {
        out_ << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << h << "\" fill=\""
             << fill << "\" fill-opacity=\"" << opacity << "\"/>\n";
    }
    void text(double x, double y, const std::string& s, int size = 12, const char* anchor = "middle",
              double rotate = 0.0) {
        out_ << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"" << size << "\" text-anchor=\"" << anchor
             << '"';
        if (rotate != 0.0) out_ << " transform=\"rotate(" << rotate << ' ' << x << ' ' << y << ")\"";
        out_ << '>' << s << "</text>\n";
    }
    void polyline(const std::vector<std::pair<double, double>>& pts, const char* stroke, double w = 1.2,
                  const char* dash = nullptr) {
        out_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << w << '"';
        if (dash) out_ << " stroke-dasharray=\"" << dash << '"';
        out_ << " points=\"";
        for (const auto& [x, y] : pts) out_ << x << ',' << y << ' ';
        out_ << "\"/>\n";
    }
    std::string finish() {
        out_ << "</svg>\n";
        return out_.str();
    }
    double width() const { return width_; }
    double height() const { return height_; }

private:
    double width_, height_;
    std::ostringstream out_;
};

std::string fmt(double v, int precision) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(precision);
    s << v;
    return s.str();
}

struct Axes {
    double left = 70, right = 20, top = 40, bottom = 60;
    double y_min = 0.0, y_max = 1.05;
    double plot_w(const Svg& s) const { return s.width() - left - right; }
    double plot_h(const Svg& s) const { return s.height() - top - bottom; }
    double ypix(const Svg& s, double v) const {
        return top + plot_h(s) * (1.0 - (v - y_min) / (y_max - y_min));
    }
};

void draw_frame(Svg& svg, const Axes& ax, const std::string& xlabel, const std::string& ylabel) {
    const double x0 = ax.left, y0 = svg.height() - ax.bottom;
    svg.line(x0, ax.top, x0, y0, "black");
    svg.line(x0, y0, svg.width() - ax.right, y0, "black");
    for (int i = 0; i <= 5; ++i) {
        const double v = 0.2 * i;
        if (v < ax.y_min || v > ax.y_max) continue;
        const double y = ax.ypix(svg, v);
        svg.line(x0 - 4, y, x0, y, "black");
        svg.line(x0, y, svg.width() - ax.right, y, "#dddddd", 0.5);
        svg.text(x0 - 8, y + 4, fmt(v, 1), 11, "end");
    }
    svg.text(ax.left + ax.plot_w(svg) / 2, svg.height() - 15, xlabel, 13);
    svg.text(20, ax.top + ax.plot_h(svg) / 2, ylabel, 13, "middle", -90);
}

void legend(Svg& svg, double x, double y) {
    svg.rect(x, y - 10, 12, 12, kXColor);
    svg.text(x + 16, y, "X-Coordinates", 11, "start");
    svg.rect(x + 110, y - 10, 12, 12, kYColor);
    svg.text(x + 126, y, "Y-Coordinates", 11, "start");
}

std::string plot_levels(const EvalReport& report) {
    if (report.levels.empty()) throw Error("emit_plot: report has no masking-level results");
    Svg svg(640, 380);
    Axes ax;
    draw_frame(svg, ax, "Number of Masked PTs During Testing", "PPMC");
    const double group = ax.plot_w(svg) / static_cast<double>(report.levels.size());
    const double bar = group * 0.35;
    const double base = ax.ypix(svg, 0.0);
    for (std::size_t i = 0; i < report.levels.size(); ++i) {
        const auto& l = report.levels[i];
        const double gx = ax.left + group * static_cast<double>(i) + group * 0.15;
        const double vx = std::max(0.0, l.avg_x), vy = std::max(0.0, l.avg_y);
        svg.rect(gx, ax.ypix(svg, vx), bar, base - ax.ypix(svg, vx), kXColor);
        svg.rect(gx + bar, ax.ypix(svg, vy), bar, base - ax.ypix(svg, vy), kYColor);
        svg.text(gx + bar / 2, ax.ypix(svg, vx) - 3, fmt(l.avg_x, 3), 9);
        svg.text(gx + 1.5 * bar, ax.ypix(svg, vy) - 3, fmt(l.avg_y, 3), 9);
        svg.text(gx + bar, base + 16, std::to_string(l.k), 12);
    }
    legend(svg, ax.left + 10, 22);
    return svg.finish();
}

std::string plot_per_pt(const EvalReport& report) {
    if (!report.per_pt) throw Error("emit_plot: report has no per-PT results");
    const auto& r = *report.per_pt;
    Svg svg(700, 400);
    Axes ax;
    ax.y_max = 1.2;
    draw_frame(svg, ax, "Masked PTs", "PPMC");
    const double group = ax.plot_w(svg) / kNumPellets;
    const double bar = group * 0.35;
    const double base = ax.ypix(svg, 0.0);
    for (auto p : kAllPellets) {
        const auto i = static_cast<std::size_t>(p);
        const double gx = ax.left + group * static_cast<double>(i) + group * 0.15;
        for (int axis = 0; axis < 2; ++axis) {
            const auto& s = axis == 0 ? r.x[i] : r.y[i];
            const double bx = gx + bar * axis;
            const double v = std::max(0.0, s.mean);
            svg.rect(bx, ax.ypix(svg, v), bar, base - ax.ypix(svg, v), axis == 0 ? kXColor : kYColor);
            if (s.count > 0) {
                const double cx = bx + bar / 2;
                svg.line(cx, ax.ypix(svg, std::max(0.0, s.min)), cx, ax.ypix(svg, std::max(0.0, s.max)), "black");
                svg.line(cx - 4, ax.ypix(svg, std::max(0.0, s.max)), cx + 4, ax.ypix(svg, std::max(0.0, s.max)), "black");
                svg.line(cx - 4, ax.ypix(svg, std::max(0.0, s.min)), cx + 4, ax.ypix(svg, std::max(0.0, s.min)), "black");
            }
        }
        svg.text(gx + bar, base + 16, std::string(pellet_name(p)), 12);
    }
    legend(svg, ax.left + 10, 22);
    return svg.finish();
}

std::string plot_overlay(const EvalReport& report) {
    if (report.overlay.empty()) throw Error("emit_plot: report has no overlay panels");
    const double panel_h = 150;
    Svg svg(900, 40 + panel_h * static_cast<double>(report.overlay.size()) + 30);
    if (!report.title.empty()) svg.text(450, 20, report.title, 13);
    for (std::size_t i = 0; i < report.overlay.size(); ++i) {
        const auto& p = report.overlay[i];
        const double top = 40 + panel_h * static_cast<double>(i);
        const double left = 80, w = 780, h = panel_h - 35;
        const std::size_t n = std::max(p.truth.size(), p.predicted.size());
        if (n < 2) continue;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto* v : {&p.truth, &p.predicted}) {
            for (double x : *v) {
                if (std::isfinite(x)) {
                    lo = std::min(lo, x);
                    hi = std::max(hi, x);
                }
            }
        }
        if (!(hi > lo)) {
            lo -= 1.0;
            hi += 1.0;
        }
        auto px = [&](std::size_t t) { return left + w * static_cast<double>(t) / static_cast<double>(n - 1); };
        auto py = [&](double v) { return top + h * (1.0 - (v - lo) / (hi - lo)); };
        for (const auto& [a, b] : p.highlighted) svg.rect(px(a), top, px(std::min(b, n - 1)) - px(a), h, "#f2c94c", 0.35);
        svg.line(left, top + h, left + w, top + h, "black");
        svg.line(left, top, left, top + h, "black");
        auto trace = [&](const std::vector<double>& v, const char* color, const char* dash) {
            std::vector<std::pair<double, double>> pts;
            for (std::size_t t = 0; t < v.size(); ++t) {
                if (std::isfinite(v[t])) {
                    pts.emplace_back(px(t), py(v[t]));
                } else if (!pts.empty()) {
                    svg.polyline(pts, color, 1.2, dash);
                    pts.clear();
                }
            }
            if (pts.size() > 1) svg.polyline(pts, color, 1.2, dash);
        };
        trace(p.truth, "black", nullptr);
        trace(p.predicted, "#d62728", "4 2");
        svg.text(left - 10, top + h / 2, p.channel + " (mm)", 11, "end");
        svg.text(left + w, top + h + 14, fmt(static_cast<double>(n - 1) / p.sample_rate, 2) + " s", 10, "end");
        svg.text(left, top + h + 14, "0 s", 10, "start");
    }
    svg.text(450, svg.height() - 8, "black: ground truth, red dashed: reconstruction", 11);
    return svg.finish();
}

}  // namespace

std::string emit_plot(const EvalReport& report, std::string_view kind) {
    if (kind == "levels") return plot_levels(report);
    if (kind == "per_pt") return plot_per_pt(report);
    if (kind == "overlay") return plot_overlay(report);
    throw Error("emit_plot: unknown plot kind '" + std::string(kind) + "'");
}

}  // namespace artrec
