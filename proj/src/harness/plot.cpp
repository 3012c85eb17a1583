#include "codetr/harness/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace codetr::harness {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double parse_field(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::runtime_error("bad number '" + s + "'");
  return v;
}

}  // namespace

std::string render_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series) {
  constexpr double W = 720, H = 440, L = 70, R = 160, T = 40, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.mean.size(); ++i) {
      const double sd = i < s.stddev.size() && std::isfinite(s.stddev[i]) ? s.stddev[i] : 0.0;
      if (!std::isfinite(s.mean[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.mean[i] - sd);
      y1 = std::max(y1, s.mean[i] + sd);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n";
  svg << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    svg << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << fmt(xv)
        << "</text>\n";
    svg << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << fmt(yv) << "</text>\n";
    svg << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << py(yv) << "\" y2=\"" << py(yv)
        << "\" stroke=\"#ddd\"/>\n";
  }
  svg << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << escape(x_label)
      << "</text>\n";
  svg << "<text transform=\"translate(18," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(y_label) << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % (sizeof kPalette / sizeof *kPalette)];
    if (!s.stddev.empty()) {
      std::ostringstream band;
      for (std::size_t i = 0; i < s.mean.size(); ++i) band << px(s.x[i]) << ',' << py(s.mean[i] + s.stddev[i]) << ' ';
      for (std::size_t i = s.mean.size(); i-- > 0;) band << px(s.x[i]) << ',' << py(s.mean[i] - s.stddev[i]) << ' ';
      svg << "<polygon points=\"" << band.str() << "\" fill=\"" << color << "\" fill-opacity=\"0.18\"/>\n";
    }
    svg << "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << color << "\" points=\"";
    for (std::size_t i = 0; i < s.mean.size(); ++i) {
      if (std::isfinite(s.mean[i])) svg << px(s.x[i]) << ',' << py(s.mean[i]) << ' ';
    }
    svg << "\"/>\n";
    const double ly = T + 16 + 18.0 * static_cast<double>(si);
    svg << "<line x1=\"" << W - R + 12 << "\" x2=\"" << W - R + 32 << "\" y1=\"" << ly - 4 << "\" y2=\"" << ly - 4
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << W - R + 38 << "\" y=\"" << ly << "\">" << escape(s.name) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_svg(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
               const std::string& y_label, const std::vector<Series>& series) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << render_svg(title, x_label, y_label, series);
}

std::vector<trainer::LogRow> read_log_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != trainer::kLogHeader) {
    throw std::runtime_error(path.string() + ": missing or unexpected header");
  }
  std::vector<trainer::LogRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 5) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected 5 fields");
    try {
      trainer::LogRow r;
      r.step = std::stoll(f[0]);
      r.eval_return = parse_field(f[1]);
      r.normalized_score = parse_field(f[2]);
      r.model_loss = parse_field(f[3]);
      r.mean_abs_weight_dev = parse_field(f[4]);
      rows.push_back(r);
    } catch (const std::logic_error& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

Series aggregate_eval_return(const std::string& name, const std::vector<std::vector<trainer::LogRow>>& runs) {
  Series s;
  s.name = name;
  if (runs.empty()) return s;
  std::size_t rows = runs.front().size();
  for (const auto& r : runs) rows = std::min(rows, r.size());
  const double k = static_cast<double>(runs.size());
  for (std::size_t i = 0; i < rows; ++i) {
    double x = 0.0, m = 0.0;
    for (const auto& r : runs) {
      x += static_cast<double>(r[i].step);
      m += r[i].eval_return;
    }
    x /= k;
    m /= k;
    double var = 0.0;
    for (const auto& r : runs) var += (r[i].eval_return - m) * (r[i].eval_return - m);
    s.x.push_back(x);
    s.mean.push_back(m);
    s.stddev.push_back(runs.size() > 1 ? std::sqrt(var / (k - 1.0)) : 0.0);
  }
  return s;
}

}  // namespace codetr::harness
