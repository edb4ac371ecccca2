#pragma once

// Reference computations written from the textbook definitions. They share
// no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace tea::oracle {

// Spearman for tie-free samples: 1 - 6 sum d^2 / (n (n^2 - 1)).
inline double spearman_rank_formula(const std::vector<double>& xs, const std::vector<double>& ys) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size(); ++i) r[order[i]] = static_cast<double>(i + 1);
    return r;
  };
  auto rx = ranks(xs);
  auto ry = ranks(ys);
  double d2 = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
  double n = static_cast<double>(xs.size());
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

// Ordinal alpha by explicit pair enumeration: observed disagreement over
// within-unit pairs weighted 1/(m_u - 1), expected disagreement over all
// ordered pairs of pairable values.
inline double krippendorff_ordinal(const std::vector<std::vector<double>>& m) {
  std::vector<std::vector<double>> units;
  for (std::size_t u = 0; u < m.front().size(); ++u) {
    std::vector<double> vals;
    for (const auto& row : m) {
      if (!std::isnan(row[u])) vals.push_back(row[u]);
    }
    if (vals.size() >= 2) units.push_back(vals);
  }
  std::vector<double> pool;
  for (const auto& u : units) pool.insert(pool.end(), u.begin(), u.end());
  std::vector<double> distinct = pool;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  auto count = [&](double v) { return static_cast<double>(std::count(pool.begin(), pool.end(), v)); };
  auto delta2 = [&](double a, double b) {
    if (a == b) return 0.0;
    double lo = std::min(a, b);
    double hi = std::max(a, b);
    double s = 0.0;
    for (double g : distinct) {
      if (g >= lo && g <= hi) s += count(g);
    }
    s -= (count(lo) + count(hi)) / 2.0;
    return s * s;
  };
  double n = static_cast<double>(pool.size());
  double observed = 0.0;
  for (const auto& u : units) {
    double w = 1.0 / static_cast<double>(u.size() - 1);
    for (std::size_t i = 0; i < u.size(); ++i) {
      for (std::size_t j = 0; j < u.size(); ++j) {
        if (i != j) observed += w * delta2(u[i], u[j]);
      }
    }
  }
  observed /= n;
  double expected = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (std::size_t j = 0; j < pool.size(); ++j) {
      if (i != j) expected += delta2(pool[i], pool[j]);
    }
  }
  expected /= n * (n - 1.0);
  if (observed == 0.0) return 1.0;
  return 1.0 - observed / expected;
}

// Fifth root of the product.
inline double geometric_mean5(const std::vector<double>& v) {
  double p = 1.0;
  for (double x : v) p *= x;
  return std::pow(p, 1.0 / static_cast<double>(v.size()));
}

// Cost in USD from token counts and per-million prices.
inline double cost_usd(double in_tokens, double out_tokens, double in_price, double out_price) {
  return in_tokens / 1'000'000.0 * in_price + out_tokens / 1'000'000.0 * out_price;
}

// Brute-force top-k: all (id, score) pairs at or above threshold, sorted by
// score descending then id ascending, first k.
inline std::vector<std::pair<std::uint32_t, double>> top_k(std::vector<std::pair<std::uint32_t, double>> all,
                                                          std::size_t k, double threshold) {
  std::vector<std::pair<std::uint32_t, double>> kept;
  for (const auto& p : all) {
    if (p.second >= threshold) kept.push_back(p);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (kept.size() > k) kept.resize(k);
  return kept;
}

// Percent string with one decimal, half-up, computed via long division.
inline std::string percent_1dp(std::size_t num, std::size_t den) {
  std::size_t scaled = num * 1000;
  std::size_t q = scaled / den;
  std::size_t r = scaled % den;
  if (2 * r >= den) ++q;
  return std::to_string(q / 10) + "." + std::to_string(q % 10) + "%";
}

}  // namespace tea::oracle
