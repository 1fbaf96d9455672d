#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "hk/random.hpp"
#include "hk/state.hpp"

namespace hk {

struct DensityPiece {
  double a = 0.0;
  double b = 0.0;
  double density = 0.0;  // unnormalized height on [a, b)
};

/// Piecewise-constant opinion density on contiguous intervals inside [0, L].
/// Heights are normalized internally to unit total mass.
class DensitySpec {
 public:
  explicit DensitySpec(std::vector<DensityPiece> pieces) : pieces_(std::move(pieces)) {
    if (pieces_.empty()) throw std::invalid_argument("density needs at least one piece");
    double total = 0.0;
    for (std::size_t k = 0; k < pieces_.size(); ++k) {
      const auto& p = pieces_[k];
      const std::string where = "piece " + std::to_string(k);
      if (!std::isfinite(p.a) || !std::isfinite(p.b) || !(p.a < p.b)) {
        throw std::invalid_argument(where + ": interval must satisfy a < b");
      }
      if (!(p.density >= 0.0) || !std::isfinite(p.density)) {
        throw std::invalid_argument(where + ": density must be nonnegative");
      }
      if (k == 0 && p.a < 0.0) throw std::invalid_argument(where + ": support must start at or after 0");
      if (k > 0 && p.a != pieces_[k - 1].b) {
        throw std::invalid_argument(where + ": intervals must be contiguous");
      }
      total += p.density * (p.b - p.a);
    }
    if (!(total > 0.0)) throw std::invalid_argument("density has zero total mass");
    cum_.assign(pieces_.size() + 1, 0.0);
    for (std::size_t k = 0; k < pieces_.size(); ++k) {
      cum_[k + 1] = cum_[k] + pieces_[k].density * (pieces_[k].b - pieces_[k].a) / total;
    }
    total_ = total;
  }

  /// Uniform density on [a, b).
  static DensitySpec uniform(double a, double b) { return DensitySpec({{a, b, 1.0}}); }

  [[nodiscard]] const std::vector<DensityPiece>& pieces() const noexcept { return pieces_; }
  [[nodiscard]] double lower() const noexcept { return pieces_.front().a; }
  [[nodiscard]] double upper() const noexcept { return pieces_.back().b; }

  /// Normalized density value at z (0 outside the support).
  [[nodiscard]] double pdf(double z) const {
    for (const auto& p : pieces_) {
      if (p.a <= z && z < p.b) return p.density / total_;
    }
    return 0.0;
  }

  /// Mass of [lower, z].
  [[nodiscard]] double cdf(double z) const {
    if (z <= lower()) return 0.0;
    for (std::size_t k = 0; k < pieces_.size(); ++k) {
      const auto& p = pieces_[k];
      if (z < p.b) return cum_[k] + (cum_[k + 1] - cum_[k]) * (z - p.a) / (p.b - p.a);
    }
    return 1.0;
  }

  /// Smallest z with cdf(z) = q, for q in [0, 1].
  [[nodiscard]] double quantile(double q) const {
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level must lie in [0, 1]");
    for (std::size_t k = 0; k < pieces_.size(); ++k) {
      const double mass = cum_[k + 1] - cum_[k];
      if (mass <= 0.0) continue;
      if (q <= cum_[k + 1] || k + 1 == pieces_.size()) {
        const auto& p = pieces_[k];
        const double frac = std::clamp((q - cum_[k]) / mass, 0.0, 1.0);
        return std::clamp(p.a + (p.b - p.a) * frac, p.a, p.b);
      }
    }
    // Trailing zero-density pieces: the last positive piece ends the support.
    for (std::size_t k = pieces_.size(); k-- > 0;) {
      if (cum_[k + 1] - cum_[k] > 0.0) return pieces_[k].b;
    }
    return upper();
  }

 private:
  std::vector<DensityPiece> pieces_;
  std::vector<double> cum_;
  double total_ = 0.0;
};

enum class QuantileRule {
  Midpoint,       // F^-1((i - 1/2) / n)
  RightEndpoint,  // F^-1(i / n), the cell's upper quantile
};

/// n agents of weight 1/n at the quantiles of the density.
inline OpinionState discretize(const DensitySpec& density, std::size_t n,
                               QuantileRule rule = QuantileRule::Midpoint) {
  if (n == 0) throw std::invalid_argument("discretize needs n >= 1");
  std::vector<double> x(n);
  const auto nd = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = static_cast<double>(i + 1);
    x[i] = density.quantile(rule == QuantileRule::Midpoint ? (id - 0.5) / nd : id / nd);
  }
  for (std::size_t i = 1; i < n; ++i) x[i] = std::max(x[i], x[i - 1]);
  return OpinionState(std::move(x), std::vector<double>(n, 1.0 / nd));
}

/// n independent draws by inverse-CDF sampling, sorted, each carrying agent_weight.
inline OpinionState sample(const DensitySpec& density, std::size_t n, SeededGenerator& gen,
                           double agent_weight = 1.0) {
  if (n == 0) throw std::invalid_argument("sample needs n >= 1");
  std::vector<double> x(n);
  for (auto& v : x) v = density.quantile(gen.uniform01());
  std::sort(x.begin(), x.end());
  return OpinionState(std::move(x), std::vector<double>(n, agent_weight));
}

/// n agents uniformly spaced on [0, L] including both endpoints (a single agent sits at L/2).
inline OpinionState uniform_spacing(double L, std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_spacing needs n >= 1");
  std::vector<double> x(n, 0.5 * L);
  if (n > 1) {
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = L * static_cast<double>(i) / static_cast<double>(n - 1);
    }
  }
  return OpinionState(std::move(x));
}

}  // namespace hk
