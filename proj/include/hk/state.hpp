#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hk {

/// Interaction radius. Inputs are expected in units of the confidence radius.
inline constexpr double kConfidenceRadius = 1.0;

/// Closed index range [lo, hi] into a sorted opinion vector.
struct IndexRange {
  std::size_t lo = 0;
  std::size_t hi = 0;

  [[nodiscard]] std::size_t size() const noexcept { return hi - lo + 1; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Sorted, weighted opinion vector at a given step.
///
/// Every constructor validates: n >= 1, equal lengths, finite opinions,
/// strictly positive finite weights, nondecreasing opinions.
class OpinionState {
 public:
  OpinionState() = default;

  OpinionState(std::vector<double> opinions, std::vector<double> weights, std::int64_t time = 0)
      : opinions_(std::move(opinions)), weights_(std::move(weights)), time_(time) {
    validate();
  }

  /// Unit weights.
  explicit OpinionState(std::vector<double> opinions, std::int64_t time = 0)
      : OpinionState(opinions, std::vector<double>(opinions.size(), 1.0), time) {}

  /// Sorts (opinion, weight) pairs by opinion before validating.
  static OpinionState from_unsorted(std::vector<double> opinions, std::vector<double> weights) {
    if (opinions.size() != weights.size()) {
      throw std::invalid_argument("opinions and weights differ in length");
    }
    std::vector<std::size_t> order(opinions.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return opinions[a] < opinions[b]; });
    std::vector<double> x(opinions.size());
    std::vector<double> w(opinions.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
      x[k] = opinions[order[k]];
      w[k] = weights[order[k]];
    }
    return OpinionState(std::move(x), std::move(w));
  }

  [[nodiscard]] std::size_t size() const noexcept { return opinions_.size(); }
  [[nodiscard]] std::span<const double> opinions() const noexcept { return opinions_; }
  [[nodiscard]] std::span<const double> weights() const noexcept { return weights_; }
  [[nodiscard]] double opinion(std::size_t i) const { return opinions_.at(i); }
  [[nodiscard]] double weight(std::size_t i) const { return weights_.at(i); }
  [[nodiscard]] std::int64_t time() const noexcept { return time_; }
  [[nodiscard]] double min_opinion() const noexcept { return opinions_.front(); }
  [[nodiscard]] double max_opinion() const noexcept { return opinions_.back(); }
  [[nodiscard]] double span_width() const noexcept { return opinions_.back() - opinions_.front(); }

  [[nodiscard]] double total_weight() const noexcept {
    double s = 0.0;
    for (double w : weights_) s += w;
    return s;
  }

  /// Same weights, new opinions, time advanced by one. Used by the update engine.
  [[nodiscard]] OpinionState advanced(std::vector<double> next_opinions) const {
    OpinionState out;
    out.opinions_ = std::move(next_opinions);
    out.weights_ = weights_;
    out.time_ = time_ + 1;
    out.validate();
    return out;
  }

  /// Sub-state over the closed range r, time preserved.
  [[nodiscard]] OpinionState slice(IndexRange r) const {
    if (r.hi >= size() || r.lo > r.hi) throw std::out_of_range("slice range out of bounds");
    return OpinionState(std::vector<double>(opinions_.begin() + static_cast<std::ptrdiff_t>(r.lo),
                                            opinions_.begin() + static_cast<std::ptrdiff_t>(r.hi) + 1),
                        std::vector<double>(weights_.begin() + static_cast<std::ptrdiff_t>(r.lo),
                                            weights_.begin() + static_cast<std::ptrdiff_t>(r.hi) + 1),
                        time_);
  }

  friend bool operator==(const OpinionState&, const OpinionState&) = default;

 private:
  void validate() const {
    if (opinions_.empty()) throw std::invalid_argument("state must contain at least one agent");
    if (opinions_.size() != weights_.size()) {
      throw std::invalid_argument("opinions and weights differ in length");
    }
    if (time_ < 0) throw std::invalid_argument("time must be nonnegative");
    for (std::size_t i = 0; i < opinions_.size(); ++i) {
      if (!std::isfinite(opinions_[i])) {
        throw std::invalid_argument("opinion " + std::to_string(i) + " is not finite");
      }
      if (!(weights_[i] > 0.0) || !std::isfinite(weights_[i])) {
        throw std::invalid_argument("weight " + std::to_string(i) + " must be positive and finite");
      }
      if (i > 0 && opinions_[i] < opinions_[i - 1]) {
        throw std::invalid_argument("opinions must be sorted (index " + std::to_string(i) + ")");
      }
    }
  }

  std::vector<double> opinions_;
  std::vector<double> weights_;
  std::int64_t time_ = 0;
};

/// Maximal runs of agents with consecutive gaps strictly below the radius.
/// Agents in different runs can never interact again.
inline std::vector<IndexRange> interaction_components(std::span<const double> x) {
  std::vector<IndexRange> out;
  if (x.empty()) return out;
  std::size_t start = 0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (x[i] - x[i - 1] >= kConfidenceRadius) {
      out.push_back({start, i - 1});
      start = i;
    }
  }
  out.push_back({start, x.size() - 1});
  return out;
}

}  // namespace hk
