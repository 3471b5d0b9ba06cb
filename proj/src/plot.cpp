#include "m2p/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "m2p/error.hpp"

namespace m2p::plot {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

void open_svg(std::ostringstream& os, const Frame& f) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(f.width) << "\" height=\"" << num(f.height)
     << "\" viewBox=\"0 0 " << num(f.width) << ' ' << num(f.height) << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << num(f.width) << "\" height=\"" << num(f.height)
     << "\" fill=\"white\"/>\n";
  os << "<rect x=\"" << num(f.margin) << "\" y=\"" << num(f.margin) << "\" width=\"" << num(f.width - 2 * f.margin)
     << "\" height=\"" << num(f.height - 2 * f.margin) << "\" fill=\"none\" stroke=\"black\"/>\n";
}

void label(std::ostringstream& os, double x, double y, const std::string& text, const char* anchor = "middle") {
  os << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-family=\"sans-serif\" font-size=\"12\" "
     << "text-anchor=\"" << anchor << "\">" << text << "</text>\n";
}

}  // namespace

double Axes::px_x(double v) const {
  return frame.margin + (v - lo) / (hi - lo) * (frame.width - 2.0 * frame.margin);
}

double Axes::px_y(double v) const {
  return frame.height - frame.margin - (v - lo) / (hi - lo) * (frame.height - 2.0 * frame.margin);
}

Axes parity_axes(std::span<const ParityRow> rows, Frame frame) {
  if (rows.empty()) throw Error("plot: no parity rows");
  double lo = rows.front().truth;
  double hi = lo;
  for (const auto& r : rows) {
    lo = std::min({lo, r.truth, r.prediction});
    hi = std::max({hi, r.truth, r.prediction});
  }
  const double pad = hi > lo ? 0.05 * (hi - lo) : 1.0;
  return {lo - pad, hi + pad, frame};
}

std::string parity_svg(std::span<const ParityRow> rows, Frame frame) {
  const Axes axes = parity_axes(rows, frame);
  std::ostringstream os;
  open_svg(os, frame);
  os << "<line class=\"diagonal\" x1=\"" << num(axes.px_x(axes.lo)) << "\" y1=\"" << num(axes.px_y(axes.lo))
     << "\" x2=\"" << num(axes.px_x(axes.hi)) << "\" y2=\"" << num(axes.px_y(axes.hi))
     << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  for (const auto& r : rows) {
    const char* colour = r.subset == "test" ? "#d62728" : "#1f77b4";
    os << "<circle class=\"" << r.subset << "\" cx=\"" << num(axes.px_x(r.truth)) << "\" cy=\""
       << num(axes.px_y(r.prediction)) << "\" r=\"3\" fill=\"" << colour << "\" fill-opacity=\"0.7\"/>\n";
  }
  label(os, frame.width / 2, frame.height - frame.margin / 3, "ground truth");
  label(os, frame.margin / 3, frame.height / 2, "prediction");
  label(os, frame.margin, frame.height - frame.margin + 14, num(axes.lo), "start");
  label(os, frame.width - frame.margin, frame.height - frame.margin + 14, num(axes.hi), "end");
  os << "</svg>\n";
  return os.str();
}

void render_parity_svg(const std::filesystem::path& parity_csv, const std::filesystem::path& out) {
  const auto rows = read_parity_csv(parity_csv);
  if (rows.empty()) throw Error("plot: empty parity file " + parity_csv.string());
  std::ofstream f(out);
  if (!f) throw Error("plot: cannot write " + out.string());
  f << parity_svg(rows);
}

std::string fold_error_svg(std::span<const double> fold_mape, Frame frame) {
  if (fold_mape.empty()) throw Error("plot: no fold errors");
  const double top = std::max(1e-12, *std::max_element(fold_mape.begin(), fold_mape.end())) * 1.1;
  const double mean = std::accumulate(fold_mape.begin(), fold_mape.end(), 0.0) / static_cast<double>(fold_mape.size());
  const double inner_w = frame.width - 2 * frame.margin;
  const double inner_h = frame.height - 2 * frame.margin;
  const double slot = inner_w / static_cast<double>(fold_mape.size());
  const auto y_of = [&](double v) { return frame.height - frame.margin - v / top * inner_h; };

  std::ostringstream os;
  open_svg(os, frame);
  for (std::size_t i = 0; i < fold_mape.size(); ++i) {
    const double x = frame.margin + slot * (static_cast<double>(i) + 0.15);
    os << "<rect class=\"fold\" x=\"" << num(x) << "\" y=\"" << num(y_of(fold_mape[i])) << "\" width=\""
       << num(slot * 0.7) << "\" height=\"" << num(frame.height - frame.margin - y_of(fold_mape[i]))
       << "\" fill=\"#1f77b4\"/>\n";
    label(os, x + slot * 0.35, frame.height - frame.margin + 14, std::to_string(i));
  }
  os << "<line class=\"mean\" x1=\"" << num(frame.margin) << "\" y1=\"" << num(y_of(mean)) << "\" x2=\""
     << num(frame.width - frame.margin) << "\" y2=\"" << num(y_of(mean))
     << "\" stroke=\"#d62728\" stroke-dasharray=\"4 3\"/>\n";
  label(os, frame.width / 2, frame.height - frame.margin / 3, "fold");
  label(os, frame.margin / 3, frame.height / 2, "MAPE (%)");
  os << "</svg>\n";
  return os.str();
}

}  // namespace m2p::plot
