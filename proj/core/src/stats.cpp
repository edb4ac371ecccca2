#include "tea/stats.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace tea::stats {

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw LengthMismatch();
  if (xs.size() < 2) throw InsufficientData("need at least two observations");
  double n = static_cast<double>(xs.size());
  double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double dx = xs[i] - mx;
    double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateInput("constant input vector");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw LengthMismatch();
  for (double v : xs) {
    if (std::isnan(v)) throw DegenerateInput("NaN in input");
  }
  for (double v : ys) {
    if (std::isnan(v)) throw DegenerateInput("NaN in input");
  }
  auto rx = average_ranks(xs);
  auto ry = average_ranks(ys);
  return pearson(rx, ry);
}

double krippendorff_alpha(const std::vector<std::vector<double>>& ratings) {
  if (ratings.size() < 2) throw InsufficientData("need at least two raters");
  std::size_t items = ratings.front().size();
  for (const auto& row : ratings) {
    if (row.size() != items) throw std::invalid_argument("ragged rating matrix");
  }

  // Distinct values and the coincidence matrix over pairable units.
  std::vector<double> values;
  for (const auto& row : ratings) {
    for (double v : row) {
      if (!std::isnan(v)) values.push_back(v);
    }
  }
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  auto index_of = [&](double v) {
    return static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), v) - values.begin());
  };
  std::size_t k = values.size();
  std::vector<std::vector<double>> o(k, std::vector<double>(k, 0.0));
  for (std::size_t u = 0; u < items; ++u) {
    std::vector<std::size_t> present;
    for (const auto& row : ratings) {
      if (!std::isnan(row[u])) present.push_back(index_of(row[u]));
    }
    if (present.size() < 2) continue;
    double w = 1.0 / static_cast<double>(present.size() - 1);
    for (std::size_t a = 0; a < present.size(); ++a) {
      for (std::size_t b = 0; b < present.size(); ++b) {
        if (a != b) o[present[a]][present[b]] += w;
      }
    }
  }
  std::vector<double> marginal(k, 0.0);
  double n = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    marginal[c] = std::accumulate(o[c].begin(), o[c].end(), 0.0);
    n += marginal[c];
  }
  if (n <= 1.0) throw InsufficientData("no item carries two or more ratings");

  // Ordinal metric: squared count of values between c and k, halving the ends.
  auto delta2 = [&](std::size_t c, std::size_t d) {
    if (c == d) return 0.0;
    auto lo = std::min(c, d);
    auto hi = std::max(c, d);
    double s = 0.0;
    for (std::size_t g = lo; g <= hi; ++g) s += marginal[g];
    s -= (marginal[lo] + marginal[hi]) / 2.0;
    return s * s;
  };
  double observed = 0.0;
  double expected = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < k; ++d) {
      double dd = delta2(c, d);
      observed += o[c][d] * dd;
      expected += marginal[c] * marginal[d] * dd;
    }
  }
  observed /= n;
  expected /= n * (n - 1.0);
  if (observed == 0.0) return 1.0;
  if (expected == 0.0) throw DegenerateInput("no variation among pairable ratings");
  return 1.0 - observed / expected;
}

}  // namespace tea::stats
