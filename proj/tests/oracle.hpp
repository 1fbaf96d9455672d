#pragma once

// Brute-force references for the tests. Everything here is O(n^2) or worse,
// scans all pairs directly and accumulates in long double; none of it goes
// through the library's window or prefix-sum code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "hk/random.hpp"
#include "hk/state.hpp"

namespace oracle {

inline bool linked(double a, double b) { return std::abs(a - b) < 1.0; }

inline std::vector<double> step(const std::vector<double>& x, const std::vector<double>& w) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    long double mass = 0, moment = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (!linked(x[i], x[j])) continue;
      mass += w[j];
      moment += static_cast<long double>(w[j]) * x[j];
    }
    out[i] = static_cast<double>(moment / mass);
  }
  return out;
}

inline std::vector<double> degree(const std::vector<double>& x, const std::vector<double>& w) {
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    long double s = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (linked(x[i], x[j])) s += w[j];
    }
    d[i] = static_cast<double>(s);
  }
  return d;
}

inline std::vector<double> adjacency(const std::vector<double>& x, const std::vector<double>& w,
                                     const std::vector<double>& y) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    long double s = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (linked(x[i], x[j])) s += static_cast<long double>(w[j]) * y[j];
    }
    out[i] = static_cast<double>(s);
  }
  return out;
}

/// (1/2) sum over linked pairs of w_i w_j (y_i + sign y_j)^2.
inline double quad_form(const std::vector<double>& x, const std::vector<double>& w, const std::vector<double>& y,
                        int sign) {
  long double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (!linked(x[i], x[j])) continue;
      const long double v = static_cast<long double>(y[i]) + sign * static_cast<long double>(y[j]);
      s += static_cast<long double>(w[i]) * w[j] * v * v;
    }
  }
  return static_cast<double>(s / 2);
}

inline double potential(const std::vector<double>& x, const std::vector<double>& w) {
  long double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      const long double d = static_cast<long double>(x[i]) - x[j];
      s += static_cast<long double>(w[i]) * w[j] * std::min<long double>(1, d * d);
    }
  }
  return static_cast<double>(s / 2);
}

inline double non_neighbor_mass(const std::vector<double>& x, const std::vector<double>& w) {
  long double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (!linked(x[i], x[j])) s += static_cast<long double>(w[i]) * w[j];
    }
  }
  return static_cast<double>(s);
}

inline double inner(const std::vector<double>& w, const std::vector<double>& a, const std::vector<double>& b) {
  long double s = 0;
  for (std::size_t i = 0; i < w.size(); ++i) s += static_cast<long double>(w[i]) * a[i] * b[i];
  return static_cast<double>(s);
}

inline double norm(const std::vector<double>& w, const std::vector<double>& a) { return std::sqrt(inner(w, a, a)); }

}  // namespace oracle

namespace gen {

/// Random sorted state with 1..max_n agents. Mixes spreads, exact
/// duplicates, tight groups and unit or random weights.
inline hk::OpinionState state(hk::SeededGenerator& g, std::size_t max_n, bool unit_weights = false) {
  const std::size_t n = 1 + g.next_u64() % max_n;
  const double span = 0.2 + 20.0 * g.uniform01();
  const int style = static_cast<int>(g.next_u64() % 3);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (style) {
      case 0: x[i] = span * g.uniform01(); break;
      case 1: x[i] = std::floor(span * g.uniform01()) * 1.3 + 0.05 * g.uniform01(); break;
      default: x[i] = std::round(4.0 * span * g.uniform01()) / 4.0; break;  // many exact ties
    }
  }
  std::sort(x.begin(), x.end());
  std::vector<double> w(n, 1.0);
  if (!unit_weights && g.next_u64() % 2 == 0) {
    for (auto& v : w) v = 0.1 + 4.9 * g.uniform01();
  }
  return hk::OpinionState(std::move(x), std::move(w));
}

inline std::vector<double> vec(hk::SeededGenerator& g, std::size_t n, double scale = 1.0) {
  std::vector<double> y(n);
  for (auto& v : y) v = scale * g.uniform(-1.0, 1.0);
  return y;
}

inline std::vector<double> copy(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace gen
