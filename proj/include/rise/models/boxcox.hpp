#pragma once

#include <span>
#include <vector>

namespace rise::models {

double box_cox(double y, double lambda);
/// Inverse transform; arguments outside the transform's range map to 0.
double inverse_box_cox(double x, double lambda);

/// Guerrero's method: the lambda on a grid over [0, 2] that minimizes the
/// coefficient of variation of sd / mean^(1 - lambda) across consecutive
/// non-overlapping periods. Returns 1 for data with non-positive values.
double guerrero_lambda(std::span<const double> y, int period = 12);

}  // namespace rise::models
