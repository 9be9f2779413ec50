#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lmpcast/common/csv.hpp"
#include "lmpcast/eval/metrics.hpp"

namespace lmpcast::eval {

/// Relative improvement of `value` over `baseline`, in percent.
inline double improvement(double value, double baseline) {
    if (baseline == 0.0) return value == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return 100.0 * (baseline - value) / baseline;
}

struct NodeComparison {
    long long node = 0;
    double mae_a = 0.0, mae_b = 0.0, mae_improve = 0.0;
    double rmse_a = 0.0, rmse_b = 0.0, rmse_improve = 0.0;
};

/// Per-node comparison of model `a` against baseline `b`. Column c of each report belongs
/// to node label ids_x[c]; `nodes` selects the rows by label.
inline std::vector<NodeComparison> per_node_table(const MetricReport& a, const std::vector<long long>& ids_a,
                                                  const MetricReport& b, const std::vector<long long>& ids_b,
                                                  const std::vector<long long>& nodes) {
    auto column = [](const std::vector<long long>& ids, long long label, const MetricReport& r) {
        auto it = std::find(ids.begin(), ids.end(), label);
        if (it == ids.end() || static_cast<Eigen::Index>(it - ids.begin()) >= r.node_mae.size())
            throw ValidationError("node " + std::to_string(label) + " is not covered by both reports");
        return static_cast<Eigen::Index>(it - ids.begin());
    };
    std::vector<NodeComparison> out;
    for (auto label : nodes) {
        const auto ca = column(ids_a, label, a), cb = column(ids_b, label, b);
        NodeComparison row;
        row.node = label;
        row.mae_a = a.node_mae(ca);
        row.mae_b = b.node_mae(cb);
        row.rmse_a = a.node_rmse(ca);
        row.rmse_b = b.node_rmse(cb);
        row.mae_improve = improvement(row.mae_a, row.mae_b);
        row.rmse_improve = improvement(row.rmse_a, row.rmse_b);
        out.push_back(row);
    }
    return out;
}

inline void write_node_table(const std::filesystem::path& path, const std::vector<NodeComparison>& rows) {
    csv::Writer w(path);
    w.header(std::vector<std::string>{"node", "mae_a", "mae_b", "mae_improve_pct", "rmse_a", "rmse_b", "rmse_improve_pct"});
    for (const auto& r : rows)
        w.cell(r.node).cell(r.mae_a).cell(r.mae_b).cell(r.mae_improve).cell(r.rmse_a).cell(r.rmse_b).cell(r.rmse_improve).end_row();
}

inline void write_metrics(const std::filesystem::path& path, const MetricReport& r, const std::vector<long long>& ids) {
    {
        csv::Writer w(path);
        w.header(std::vector<std::string>{"mae", "rmse", "mape", "s_accuracy", "count", "mape_excluded"});
        w.cell(r.mae).cell(r.rmse).cell(r.mape).cell(r.s_accuracy).cell(r.count).cell(r.mape_excluded).end_row();
    }
    auto per_node = path;
    per_node.replace_filename(path.stem().string() + "_per_node.csv");
    csv::Writer w(per_node);
    w.header(std::vector<std::string>{"node", "mae", "rmse"});
    for (Eigen::Index i = 0; i < r.node_mae.size(); ++i)
        w.cell(ids.at(static_cast<std::size_t>(i))).cell(r.node_mae(i)).cell(r.node_rmse(i)).end_row();
}

inline std::string format_table(const MetricReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "MAE ($/MWh)    %10.4f\nRMSE ($/MWh)   %10.4f\nMAPE (%%)       %10.4f\ns accuracy (%%) %10.4f\nnode-hours     %10zu\n",
                  r.mae, r.rmse, r.mape, r.s_accuracy, r.count);
    return buf;
}

// ---- matrices as CSV -------------------------------------------------------

/// Square matrix with row/column labels in the header and first column.
inline void write_labeled_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                                 const std::vector<std::string>& labels) {
    if (labels.size() != static_cast<std::size_t>(m.rows()) || m.rows() != m.cols())
        throw ValidationError("write_labeled_matrix: labels do not match matrix size");
    csv::Writer w(path);
    std::vector<std::string> head{"row"};
    head.insert(head.end(), labels.begin(), labels.end());
    w.header(head);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        w.cell(std::string_view(labels[static_cast<std::size_t>(i)]));
        for (Eigen::Index j = 0; j < m.cols(); ++j) w.cell(m(i, j));
        w.end_row();
    }
}

inline Eigen::MatrixXd read_labeled_matrix(const std::filesystem::path& path) {
    auto t = csv::read(path);
    const auto n = static_cast<Eigen::Index>(t.header.size()) - 1;
    if (n < 1 || static_cast<Eigen::Index>(t.rows.size()) != n)
        throw ParseError(t.source, 1, "expected a square labeled matrix");
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            m(i, j) = csv::parse_double(t, static_cast<std::size_t>(i), static_cast<std::size_t>(j + 1));
    return m;
}

// ---- SVG -------------------------------------------------------------------

namespace svg {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

/// White-to-dark-blue ramp for t in [0, 1].
inline std::string ramp(double t) {
    t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
    auto ch = [t](double lo, double hi) { return static_cast<int>(std::lround(lo + (hi - lo) * t)); };
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", ch(255, 8), ch(255, 48), ch(255, 107));
    return buf;
}

inline void write(const std::filesystem::path& path, const std::string& body, double w, double h) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
        << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << body << "</svg>\n";
}

struct Frame {
    double left = 60, top = 30, width = 720, height = 300;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    double x(double v) const { return left + (x1 > x0 ? (v - x0) / (x1 - x0) : 0.5) * width; }
    double y(double v) const { return top + height - (y1 > y0 ? (v - y0) / (y1 - y0) : 0.5) * height; }
};

inline std::string axes(const Frame& f, const std::string& title, const std::string& xlabel, const std::string& ylabel) {
    std::ostringstream os;
    os << "<text x=\"" << num(f.left) << "\" y=\"18\" font-size=\"13\">" << escape(title) << "</text>\n";
    os << "<rect x=\"" << num(f.left) << "\" y=\"" << num(f.top) << "\" width=\"" << num(f.width) << "\" height=\""
       << num(f.height) << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double v = f.y0 + (f.y1 - f.y0) * i / 4.0;
        os << "<text x=\"" << num(f.left - 6) << "\" y=\"" << num(f.y(v) + 4) << "\" text-anchor=\"end\">" << num(v)
           << "</text>\n";
        const double u = f.x0 + (f.x1 - f.x0) * i / 4.0;
        os << "<text x=\"" << num(f.x(u)) << "\" y=\"" << num(f.top + f.height + 16) << "\" text-anchor=\"middle\">"
           << num(u) << "</text>\n";
    }
    os << "<text x=\"" << num(f.left + f.width / 2) << "\" y=\"" << num(f.top + f.height + 32)
       << "\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n";
    os << "<text x=\"14\" y=\"" << num(f.top + f.height / 2) << "\" transform=\"rotate(-90 14 " << num(f.top + f.height / 2)
       << ")\" text-anchor=\"middle\">" << escape(ylabel) << "</text>\n";
    return os.str();
}

inline std::string polyline(const Frame& f, const std::vector<double>& xs, const std::vector<double>& ys,
                            const std::string& color) {
    std::ostringstream os;
    if (xs.size() == 1) {
        os << "<circle cx=\"" << num(f.x(xs[0])) << "\" cy=\"" << num(f.y(ys[0])) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        return os.str();
    }
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? " " : "") << num(f.x(xs[i])) << ',' << num(f.y(ys[i]));
    os << "\"/>\n";
    return os.str();
}

inline std::string legend(const Frame& f, const std::vector<std::pair<std::string, std::string>>& entries) {
    std::ostringstream os;
    double y = f.top + 12;
    for (const auto& [name, color] : entries) {
        os << "<rect x=\"" << num(f.left + f.width - 110) << "\" y=\"" << num(y - 8) << "\" width=\"10\" height=\"10\" fill=\""
           << color << "\"/><text x=\"" << num(f.left + f.width - 95) << "\" y=\"" << num(y) << "\">" << escape(name)
           << "</text>\n";
        y += 14;
    }
    return os.str();
}

/// Padded [lo, hi] covering all values.
inline std::pair<double, double> range(std::initializer_list<const std::vector<double>*> series) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto* s : series)
        for (double v : *s) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!(hi > lo)) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

}  // namespace svg

/// Heat map of a row-stochastic mask; colour scale spans [min, max] of the mask.
inline void write_heatmap_svg(const std::filesystem::path& path, const Eigen::MatrixXd& m, const std::string& title) {
    const auto n = m.rows();
    const double cell = std::max(2.0, std::min(24.0, 600.0 / static_cast<double>(std::max<Eigen::Index>(n, 1))));
    const double lo = m.minCoeff(), hi = m.maxCoeff();
    std::ostringstream os;
    os << "<text x=\"40\" y=\"18\" font-size=\"13\">" << svg::escape(title) << "</text>\n";
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            os << "<rect x=\"" << svg::num(40 + cell * static_cast<double>(j)) << "\" y=\""
               << svg::num(30 + cell * static_cast<double>(i)) << "\" width=\"" << svg::num(cell) << "\" height=\""
               << svg::num(cell) << "\" fill=\"" << svg::ramp(hi > lo ? (m(i, j) - lo) / (hi - lo) : 0.5) << "\"/>\n";
    const double side = cell * static_cast<double>(n);
    os << "<text x=\"40\" y=\"" << svg::num(side + 46) << "\">scale " << svg::num(lo) << " .. " << svg::num(hi) << "</text>\n";
    svg::write(path, os.str(), side + 80, side + 60);
}

/// Writes <prefix>_spatial.{csv,svg} and <prefix>_temporal.{csv,svg}.
inline void export_attention(const std::filesystem::path& dir, const std::string& prefix, const Eigen::MatrixXd& spatial,
                             const std::vector<long long>& node_ids, const Eigen::MatrixXd& temporal) {
    std::vector<std::string> nodes, steps;
    for (auto id : node_ids) nodes.push_back(std::to_string(id));
    // time labels count back from the target hour: t-(T-1) .. t-0
    for (Eigen::Index t = 0; t < temporal.rows(); ++t) steps.push_back("t-" + std::to_string(temporal.rows() - 1 - t));
    write_labeled_matrix(dir / (prefix + "_spatial.csv"), spatial, nodes);
    write_labeled_matrix(dir / (prefix + "_temporal.csv"), temporal, steps);
    write_heatmap_svg(dir / (prefix + "_spatial.svg"), spatial, prefix + " spatial attention");
    write_heatmap_svg(dir / (prefix + "_temporal.svg"), temporal, prefix + " temporal attention");
}

/// Predicted vs true series of one column over rows [begin, end). Writes <stem>.csv and <stem>.svg.
inline void emit_series_plot(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, const std::vector<std::size_t>& hours,
                             Eigen::Index column, std::size_t begin, std::size_t end, const std::filesystem::path& stem,
                             const std::string& title) {
    if (pred.rows() != gt.rows() || pred.cols() != gt.cols() || hours.size() != static_cast<std::size_t>(pred.rows()))
        throw ValidationError("series plot: prediction and ground truth are not aligned");
    if (column < 0 || column >= pred.cols()) throw ValidationError("series plot: node out of range");
    end = std::min(end, hours.size());
    if (begin >= end) throw ValidationError("series plot: empty hour range");
    std::vector<double> xs, p, g;
    {
        csv::Writer w(std::filesystem::path(stem).concat(".csv"));
        w.header(std::vector<std::string>{"hour", "pred", "gt"});
        for (std::size_t r = begin; r < end; ++r) {
            const auto rr = static_cast<Eigen::Index>(r);
            xs.push_back(static_cast<double>(hours[r]));
            p.push_back(pred(rr, column));
            g.push_back(gt(rr, column));
            w.cell(hours[r]).cell(pred(rr, column)).cell(gt(rr, column)).end_row();
        }
    }
    svg::Frame f;
    f.x0 = xs.front();
    f.x1 = xs.back();
    std::tie(f.y0, f.y1) = svg::range({&p, &g});
    std::string body = svg::axes(f, title, "hour", "LMP ($/MWh)") + svg::polyline(f, xs, g, "#222222") +
                       svg::polyline(f, xs, p, "#d62728") + svg::legend(f, {{"ground truth", "#222222"}, {"prediction", "#d62728"}});
    svg::write(std::filesystem::path(stem).concat(".svg"), body, 800, 380);
}

/// Per-node RMSE of two reports side by side. Writes <stem>.csv and <stem>.svg.
inline void emit_per_node_rmse_plot(const MetricReport& a, const MetricReport& b, const std::vector<long long>& node_ids,
                                    const std::string& name_a, const std::string& name_b, const std::filesystem::path& stem) {
    if (a.node_rmse.size() != b.node_rmse.size() || static_cast<std::size_t>(a.node_rmse.size()) != node_ids.size())
        throw ValidationError("per-node RMSE plot: reports cover " + std::to_string(a.node_rmse.size()) + " and " +
                              std::to_string(b.node_rmse.size()) + " nodes, expected " + std::to_string(node_ids.size()));
    std::vector<double> xs, ra, rb;
    {
        csv::Writer w(std::filesystem::path(stem).concat(".csv"));
        w.header(std::vector<std::string>{"node", "rmse_" + name_a, "rmse_" + name_b});
        for (std::size_t i = 0; i < node_ids.size(); ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            xs.push_back(static_cast<double>(i));
            ra.push_back(a.node_rmse(ii));
            rb.push_back(b.node_rmse(ii));
            w.cell(node_ids[i]).cell(a.node_rmse(ii)).cell(b.node_rmse(ii)).end_row();
        }
    }
    svg::Frame f;
    f.x0 = 0;
    f.x1 = static_cast<double>(std::max<std::size_t>(node_ids.size(), 2) - 1);
    std::tie(f.y0, f.y1) = svg::range({&ra, &rb});
    f.y0 = std::min(f.y0, 0.0);
    std::string body = svg::axes(f, "RMSE per node", "node index", "RMSE ($/MWh)") + svg::polyline(f, xs, ra, "#1f77b4") +
                       svg::polyline(f, xs, rb, "#ff7f0e") + svg::legend(f, {{name_a, "#1f77b4"}, {name_b, "#ff7f0e"}});
    svg::write(std::filesystem::path(stem).concat(".svg"), body, 800, 380);
}

}  // namespace lmpcast::eval
