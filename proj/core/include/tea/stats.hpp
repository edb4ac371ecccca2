#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "tea/error.hpp"

namespace tea::stats {

class LengthMismatch : public Error {
 public:
  LengthMismatch() : Error("input vectors differ in length") {}
};

class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

// Missing rating marker for krippendorff_alpha.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

// 1-based ranks, ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> xs);

double pearson(std::span<const double> xs, std::span<const double> ys);

// Pearson correlation of average ranks. Needs n >= 2 and non-constant inputs.
double spearman(std::span<const double> xs, std::span<const double> ys);

// Ordinal alpha over a raters x items matrix (row-major, NaN = missing).
// Items with fewer than two ratings are left out. Returns 1.0 when every
// pairable rating agrees.
double krippendorff_alpha(const std::vector<std::vector<double>>& ratings);

}  // namespace tea::stats
