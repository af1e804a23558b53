#include "lfa/plot.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace lfa {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 480.0;
constexpr double kMargin = 48.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Bounds {
  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;

  void include(double x, double y) {
    x_min = std::min(x_min, x);
    x_max = std::max(x_max, x);
    y_min = std::min(y_min, y);
    y_max = std::max(y_max, y);
  }

  void pad() {
    const double dx = std::max(1e-9, x_max - x_min) * 0.05;
    const double dy = std::max(1e-9, y_max - y_min) * 0.05;
    x_min -= dx;
    x_max += dx;
    y_min -= dy;
    y_max += dy;
  }

  double map_x(double x) const {
    return kMargin + (x - x_min) / (x_max - x_min) * (kWidth - 2 * kMargin);
  }

  // SVG y grows downward.
  double map_y(double y) const {
    return kHeight - kMargin - (y - y_min) / (y_max - y_min) * (kHeight - 2 * kMargin);
  }
};

void open_svg(std::ostringstream& svg) {
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
      << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

void emit_frame(std::ostringstream& svg) {
  svg << "  <rect x=\"" << fmt(kMargin) << "\" y=\"" << fmt(kMargin) << "\" width=\""
      << fmt(kWidth - 2 * kMargin) << "\" height=\"" << fmt(kHeight - 2 * kMargin)
      << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";
}

void emit_axis_labels(std::ostringstream& svg, const Bounds& b) {
  svg << "  <g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  svg << "    <text x=\"" << fmt(kMargin) << "\" y=\"" << fmt(kHeight - kMargin + 16)
      << "\">" << fmt(b.x_min) << "</text>\n";
  svg << "    <text x=\"" << fmt(kWidth - kMargin) << "\" y=\"" << fmt(kHeight - kMargin + 16)
      << "\" text-anchor=\"end\">" << fmt(b.x_max) << "</text>\n";
  svg << "    <text x=\"" << fmt(kMargin - 4) << "\" y=\"" << fmt(kHeight - kMargin)
      << "\" text-anchor=\"end\">" << fmt(b.y_min) << "</text>\n";
  svg << "    <text x=\"" << fmt(kMargin - 4) << "\" y=\"" << fmt(kMargin + 10)
      << "\" text-anchor=\"end\">" << fmt(b.y_max) << "</text>\n";
  svg << "  </g>\n";
}

}  // namespace

std::string scatter_plot_svg(const BagContainer& container, const Matrix& codebook) {
  if (container.dim != 2 || codebook.cols() != 2) {
    throw ContractError("scatter plot: requires 2-D features and codewords");
  }
  Bounds b;
  bool first = true;
  for (const FeatureBag& bag : container.bags) {
    for (Eigen::Index r = 0; r < bag.size(); ++r) {
      const double x = bag.descriptors(r, 0);
      const double y = bag.descriptors(r, 1);
      if (first) {
        b = Bounds{x, x, y, y};
        first = false;
      } else {
        b.include(x, y);
      }
    }
  }
  for (Eigen::Index k = 0; k < codebook.rows(); ++k) {
    if (first) {
      b = Bounds{codebook(k, 0), codebook(k, 0), codebook(k, 1), codebook(k, 1)};
      first = false;
    } else {
      b.include(codebook(k, 0), codebook(k, 1));
    }
  }
  b.pad();

  std::ostringstream svg;
  open_svg(svg);
  emit_frame(svg);

  for (const FeatureBag& bag : container.bags) {
    const char* color = kPalette[bag.label % kPaletteSize];
    svg << "  <g fill=\"" << color << "\" fill-opacity=\"0.5\">\n";
    for (Eigen::Index r = 0; r < bag.size(); ++r) {
      svg << "    <circle class=\"feature\" cx=\"" << fmt(b.map_x(bag.descriptors(r, 0)))
          << "\" cy=\"" << fmt(b.map_y(bag.descriptors(r, 1))) << "\" r=\"2\"/>\n";
    }
    svg << "  </g>\n";
  }

  // Codewords as black crosses, one path element each.
  constexpr double arm = 6.0;
  for (Eigen::Index k = 0; k < codebook.rows(); ++k) {
    const double cx = b.map_x(codebook(k, 0));
    const double cy = b.map_y(codebook(k, 1));
    svg << "  <path class=\"codeword\" stroke=\"black\" stroke-width=\"2.5\" d=\"M "
        << fmt(cx - arm) << " " << fmt(cy - arm) << " L " << fmt(cx + arm) << " "
        << fmt(cy + arm) << " M " << fmt(cx - arm) << " " << fmt(cy + arm) << " L "
        << fmt(cx + arm) << " " << fmt(cy - arm) << "\"/>\n";
  }

  emit_axis_labels(svg, b);
  svg << "</svg>\n";
  return svg.str();
}

std::string scatter_plot_csv(const BagContainer& container, const Matrix& codebook) {
  if (container.dim != 2 || codebook.cols() != 2) {
    throw ContractError("scatter plot: requires 2-D features and codewords");
  }
  std::string out = "kind,x,y,label\n";
  char buf[128];
  for (const FeatureBag& bag : container.bags) {
    for (Eigen::Index r = 0; r < bag.size(); ++r) {
      std::snprintf(buf, sizeof(buf), "feature,%.9g,%.9g,%u\n",
                    static_cast<double>(bag.descriptors(r, 0)),
                    static_cast<double>(bag.descriptors(r, 1)), bag.label);
      out += buf;
    }
  }
  for (Eigen::Index k = 0; k < codebook.rows(); ++k) {
    std::snprintf(buf, sizeof(buf), "codeword,%.9g,%.9g,%lld\n", codebook(k, 0), codebook(k, 1),
                  static_cast<long long>(k));
    out += buf;
  }
  return out;
}

std::string metrics_plot_svg(const std::vector<EpochMetrics>& history) {
  if (history.empty()) throw ContractError("metrics plot: empty history");
  const double max_epoch =
      std::max<double>(1.0, static_cast<double>(history.back().epoch));
  Bounds b{0.0, max_epoch, 0.0, 1.0};

  std::ostringstream svg;
  open_svg(svg);
  emit_frame(svg);

  bool has_test = false;
  for (const EpochMetrics& row : history) has_test |= row.test_acc.has_value();

  auto polyline = [&](const char* name, const char* color, auto value) {
    svg << "  <polyline class=\"series\" data-series=\"" << name
        << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    bool first_pt = true;
    for (const EpochMetrics& row : history) {
      const auto v = value(row);
      if (!v.has_value()) continue;
      if (!first_pt) svg << " ";
      svg << fmt(b.map_x(static_cast<double>(row.epoch))) << "," << fmt(b.map_y(*v));
      first_pt = false;
    }
    svg << "\"/>\n";
  };

  polyline("train_acc", kPalette[0],
           [](const EpochMetrics& row) { return std::optional<double>(row.train_acc); });
  if (has_test) {
    polyline("test_acc", kPalette[1], [](const EpochMetrics& row) { return row.test_acc; });
  }

  emit_axis_labels(svg, b);
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace lfa
