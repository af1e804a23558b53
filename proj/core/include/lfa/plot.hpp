#pragma once

#include <string>
#include <vector>

#include "lfa/data.hpp"
#include "lfa/types.hpp"

namespace lfa {

/// Scatter plot of 2-D features colored by class, with one black cross per
/// codeword (elements carry class="feature" / class="codeword").
std::string scatter_plot_svg(const BagContainer& container, const Matrix& codebook);

/// CSV twin of the scatter plot: kind,x,y,label rows for every feature and
/// codeword.
std::string scatter_plot_csv(const BagContainer& container, const Matrix& codebook);

/// Accuracy-vs-epoch polylines, one per metric series present
/// (train_acc always, test_acc when any row has it).
std::string metrics_plot_svg(const std::vector<EpochMetrics>& history);

}  // namespace lfa
