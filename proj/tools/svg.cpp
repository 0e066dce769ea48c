#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace ecgadv::plot {

namespace {

constexpr double kWidth = 960.0;
constexpr double kPanelHeight = 180.0;
constexpr double kMarginLeft = 60.0;
constexpr double kMarginRight = 20.0;
constexpr double kTitleHeight = 24.0;
constexpr double kGap = 16.0;

std::string escape(const std::string& s) {
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

std::string fmt(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << (std::abs(v) < 0.005 ? 0.0 : v);
  return s.str();
}

// Maps sample index and value to pixel coordinates inside one panel.
struct Panel {
  double top;
  double center_value;  // value drawn at the panel's vertical middle
  double px_per_unit;
  std::size_t n;

  double x(std::size_t i) const {
    const double plot_w = kWidth - kMarginLeft - kMarginRight;
    return kMarginLeft + (n > 1 ? plot_w * static_cast<double>(i) / static_cast<double>(n - 1) : 0.0);
  }
  double y(double v) const { return top + kPanelHeight / 2.0 - (v - center_value) * px_per_unit; }
};

std::string polyline(const Panel& p, std::span<const double> values, const char* stroke, double width) {
  std::ostringstream s;
  s << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"" << fmt(width) << "\" points=\"";
  for (std::size_t i = 0; i < values.size(); ++i) s << (i ? " " : "") << fmt(p.x(i)) << ',' << fmt(p.y(values[i]));
  s << "\"/>\n";
  return s.str();
}

std::string frame(const Panel& p, const std::string& title) {
  std::ostringstream s;
  s << "<rect x=\"" << fmt(kMarginLeft) << "\" y=\"" << fmt(p.top) << "\" width=\""
    << fmt(kWidth - kMarginLeft - kMarginRight) << "\" height=\"" << fmt(kPanelHeight)
    << "\" fill=\"none\" stroke=\"#cccccc\"/>\n";
  s << "<text x=\"" << fmt(kMarginLeft) << "\" y=\"" << fmt(p.top - 6.0) << "\" font-family=\"sans-serif\" "
    << "font-size=\"13\">" << escape(title) << "</text>\n";
  return s.str();
}

std::string open_svg(double height) {
  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth) << "\" height=\"" << fmt(height)
    << "\" viewBox=\"0 0 " << fmt(kWidth) << ' ' << fmt(height) << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return s.str();
}

std::string prediction_text(const Prediction& p) {
  std::ostringstream s;
  s << to_string(p.cls) << " (" << std::fixed << std::setprecision(1) << 100.0 * p.confidence << "%)";
  return s.str();
}

}  // namespace

std::string attack_svg(const AttackResult& r) {
  const auto& orig = r.original.samples();
  const auto& adv = r.adversarial.samples();
  double lo = std::min(*std::min_element(orig.begin(), orig.end()), *std::min_element(adv.begin(), adv.end()));
  double hi = std::max(*std::max_element(orig.begin(), orig.end()), *std::max_element(adv.begin(), adv.end()));
  if (hi - lo < 1e-9) hi = lo + 1.0;
  const double scale = 0.9 * kPanelHeight / (hi - lo);
  const double mid = (hi + lo) / 2.0;
  const std::size_t n = orig.size();

  const Panel p_orig{kTitleHeight + kGap, mid, scale, n};
  const Panel p_pert{p_orig.top + kPanelHeight + 2 * kGap, 0.0, scale, n};
  const Panel p_adv{p_pert.top + kPanelHeight + 2 * kGap, mid, scale, n};
  const double height = p_adv.top + kPanelHeight + kGap;

  std::ostringstream s;
  s << open_svg(height);
  s << "<text x=\"" << fmt(kMarginLeft) << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"15\">"
    << escape(r.id + " [" + std::string(to_string(r.method)) + "] label " + std::string(to_string(r.label)))
    << "</text>\n";
  s << frame(p_orig, "original: " + prediction_text(r.pred_before));
  s << polyline(p_orig, orig, "#1f4e9c", 1.0);
  std::ostringstream pert_title;
  pert_title << "perturbation (same scale), max |p| = " << std::fixed << std::setprecision(2) << r.linf_norm;
  s << frame(p_pert, pert_title.str());
  s << polyline(p_pert, r.perturbation, "#b03030", 1.0);
  s << frame(p_adv, "adversarial: " + prediction_text(r.pred_after));
  s << polyline(p_adv, adv, "#1f4e9c", 1.0);
  s << "</svg>\n";
  return s.str();
}

std::string band_svg(const std::string& title, std::span<const double> original, const Band& band) {
  const std::size_t n = original.size();
  double lo = *std::min_element(original.begin(), original.end());
  double hi = *std::max_element(original.begin(), original.end());
  if (!band.min.empty()) {
    lo = std::min(lo, *std::min_element(band.min.begin(), band.min.end()));
    hi = std::max(hi, *std::max_element(band.max.begin(), band.max.end()));
  }
  if (hi - lo < 1e-9) hi = lo + 1.0;
  const Panel p{kTitleHeight + kGap, (hi + lo) / 2.0, 0.9 * kPanelHeight / (hi - lo), n};

  std::ostringstream s;
  s << open_svg(p.top + kPanelHeight + kGap);
  s << frame(p, title);
  // Envelope as one closed polygon: max left to right, then min right to left.
  s << "<polygon fill=\"#f2a65a\" fill-opacity=\"0.6\" stroke=\"none\" points=\"";
  for (std::size_t i = 0; i < band.size(); ++i) s << (i ? " " : "") << fmt(p.x(i)) << ',' << fmt(p.y(band.max[i]));
  for (std::size_t i = band.size(); i-- > 0;) s << ' ' << fmt(p.x(i)) << ',' << fmt(p.y(band.min[i]));
  s << "\"/>\n";
  s << polyline(p, original, "#1f4e9c", 1.0);
  s << "</svg>\n";
  return s.str();
}

}  // namespace ecgadv::plot
