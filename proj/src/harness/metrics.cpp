#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "nadir/error.hpp"
#include "nadir/harness.hpp"
#include "nadir/log.hpp"
#include "nadir/text_io.hpp"

namespace nadir::harness {

Metrics evaluate_metrics(const std::vector<double>& predictions, const std::vector<double>& actuals) {
    if (predictions.size() != actuals.size())
        throw Error(ErrorCode::ShapeMismatch, "predictions and actuals differ in length");
    if (predictions.empty()) throw Error(ErrorCode::InvalidArgument, "no predictions to evaluate");
    Metrics m;
    m.count = predictions.size();
    double abs_sum = 0.0, sq_sum = 0.0, ape = 0.0, ape_actual = 0.0;
    std::size_t actual_terms = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double e = predictions[i] - actuals[i];
        abs_sum += std::abs(e);
        sq_sum += e * e;
        if (predictions[i] == 0.0) {
            ++m.mape_excluded;
        } else {
            ape += std::abs(e) / std::abs(predictions[i]);
        }
        if (actuals[i] != 0.0) {
            ape_actual += std::abs(e) / std::abs(actuals[i]);
            ++actual_terms;
        }
    }
    if (m.mape_excluded > 0)
        log::warn("ZeroPrediction: " + std::to_string(m.mape_excluded) + " term(s) left out of MAPE");
    const double n = static_cast<double>(m.count);
    m.mae = abs_sum / n;
    m.rmse = std::sqrt(sq_sum / n);
    const std::size_t kept = m.count - m.mape_excluded;
    m.mape = kept > 0 ? ape / static_cast<double>(kept) : 0.0;
    m.mape_actual = actual_terms > 0 ? ape_actual / static_cast<double>(actual_terms) : 0.0;
    return m;
}

void write_predictions_csv(const std::filesystem::path& path, const std::vector<PredictionRow>& rows) {
    std::ostringstream out;
    out << "scenario_id,actual_hz,predicted_hz,abs_error_hz,ape_prediction,ape_actual\n";
    for (const auto& r : rows) {
        const double err = std::abs(r.predicted - r.actual);
        out << r.scenario_id << ',' << text::format_double(r.actual) << ',' << text::format_double(r.predicted) << ','
            << text::format_double(err) << ',' << (r.predicted != 0.0 ? text::format_double(err / std::abs(r.predicted)) : "")
            << ',' << (r.actual != 0.0 ? text::format_double(err / std::abs(r.actual)) : "") << '\n';
    }
    text::write_file(path, out.str());
}

std::vector<PredictionRow> read_predictions_csv(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::Storage, "missing predictions file " + path.string());
    std::istringstream in(text::read_file(path));
    std::string line;
    std::getline(in, line);
    std::vector<PredictionRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = text::split(line, ',');
        if (f.size() < 3) throw Error(ErrorCode::Storage, path.string() + ": malformed row");
        rows.push_back({static_cast<int>(text::parse_int(f[0])), text::parse_double(f[1]), text::parse_double(f[2])});
    }
    return rows;
}

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string sig(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

struct Frame {
    double x0, x1, y0, y1;  // data range
    double size = 420.0, margin = 60.0;

    double px(double x) const { return margin + (x - x0) / (x1 - x0) * (size - 2 * margin); }
    double py(double y) const { return size - margin - (y - y0) / (y1 - y0) * (size - 2 * margin); }
};

void pad(double& lo, double& hi) {
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double m = 0.05 * (hi - lo);
    lo -= m;
    hi += m;
}

void axes(std::ostringstream& svg, const Frame& f, const std::string& title, const std::string& xlabel,
          const std::string& ylabel) {
    const double s = f.size, m = f.margin;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << s << "\" height=\"" << s << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << s / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"13\">" << title << "</text>\n"
        << "<rect x=\"" << m << "\" y=\"" << m << "\" width=\"" << s - 2 * m << "\" height=\"" << s - 2 * m
        << "\" fill=\"none\" stroke=\"black\"/>\n"
        << "<text x=\"" << s / 2 << "\" y=\"" << s - 15 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n"
        << "<text x=\"15\" y=\"" << s / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " << s / 2 << ")\">"
        << ylabel << "</text>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0, yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
        svg << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << s - m + 14 << "\" text-anchor=\"middle\">" << sig(xv)
            << "</text>\n"
            << "<text x=\"" << m - 4 << "\" y=\"" << num(f.py(yv) + 4) << "\" text-anchor=\"end\">" << sig(yv)
            << "</text>\n";
    }
}

}  // namespace

std::string scatter_svg(const std::vector<PredictionRow>& rows, const std::string& title) {
    double lo = 0.0, hi = 1.0;
    if (!rows.empty()) {
        lo = hi = rows.front().actual;
        for (const auto& r : rows) {
            lo = std::min({lo, r.actual, r.predicted});
            hi = std::max({hi, r.actual, r.predicted});
        }
    }
    pad(lo, hi);
    const Frame f{lo, hi, lo, hi};
    std::ostringstream svg;
    axes(svg, f, title, "actual (Hz)", "predicted (Hz)");
    svg << "<line x1=\"" << num(f.px(lo)) << "\" y1=\"" << num(f.py(lo)) << "\" x2=\"" << num(f.px(hi)) << "\" y2=\""
        << num(f.py(hi)) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    for (const auto& r : rows)
        svg << "<circle cx=\"" << num(f.px(r.actual)) << "\" cy=\"" << num(f.py(r.predicted))
            << "\" r=\"3\" fill=\"steelblue\" fill-opacity=\"0.7\"/>\n";
    svg << "</svg>\n";
    return svg.str();
}

std::string learning_curve_svg(const std::vector<LearningCurveRow>& rows) {
    double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
    if (!rows.empty()) {
        x0 = x1 = rows.front().train_size;
        y1 = rows.front().metrics.mae;
        for (const auto& r : rows) {
            x0 = std::min(x0, static_cast<double>(r.train_size));
            x1 = std::max(x1, static_cast<double>(r.train_size));
            y1 = std::max(y1, r.metrics.mae);
        }
    }
    pad(x0, x1);
    pad(y0, y1);
    y0 = 0.0;
    const Frame f{x0, x1, y0, y1};
    std::ostringstream svg;
    axes(svg, f, "Test MAE against training size", "training samples", "MAE (Hz)");
    const char* colours[] = {"steelblue", "darkorange", "seagreen"};
    for (auto kind : {ModelKind::Cnn, ModelKind::Mlp, ModelKind::Mean}) {
        std::vector<const LearningCurveRow*> series;
        for (const auto& r : rows)
            if (r.model == kind) series.push_back(&r);
        if (series.empty()) continue;
        std::sort(series.begin(), series.end(), [](auto* a, auto* b) { return a->train_size < b->train_size; });
        const char* colour = colours[static_cast<int>(kind)];
        svg << "<polyline fill=\"none\" stroke=\"" << colour << "\" points=\"";
        for (const auto* r : series) svg << num(f.px(r->train_size)) << ',' << num(f.py(r->metrics.mae)) << ' ';
        svg << "\"/>\n";
        for (const auto* r : series)
            svg << "<circle cx=\"" << num(f.px(r->train_size)) << "\" cy=\"" << num(f.py(r->metrics.mae))
                << "\" r=\"3\" fill=\"" << colour << "\"/>\n";
        const auto* last = series.back();
        svg << "<text x=\"" << num(f.px(last->train_size) - 4) << "\" y=\"" << num(f.py(last->metrics.mae) - 6)
            << "\" text-anchor=\"end\" fill=\"" << colour << "\">" << to_string(kind) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace nadir::harness
