#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mlspi/errors.hpp"
#include "mlspi/game_model.hpp"
#include "mlspi/random.hpp"

namespace mlspi {

inline constexpr std::size_t kDefaultStateCap = 1'000'000;

/// Lexicographic enumeration of {0..L}^m. The index is the mixed-radix
/// number whose most significant digit is server 0.
class StateSpace {
 public:
  StateSpace(int m, int L, std::size_t cap = kDefaultStateCap) : m_(m), L_(L) {
    if (m < 1 || L < 0) throw DomainError("StateSpace: bad dimensions");
    std::size_t count = 1;
    const auto radix = static_cast<std::size_t>(L + 1);
    for (int i = 0; i < m; ++i) {
      if (count > cap / radix)
        throw CapacityError("state space (" + std::to_string(L + 1) + ")^" + std::to_string(m) +
                            " exceeds cap " + std::to_string(cap));
      count *= radix;
    }
    if (count > cap)
      throw CapacityError("state space size " + std::to_string(count) + " exceeds cap " +
                          std::to_string(cap));
    size_ = count;
  }

  explicit StateSpace(const GameParams& params, std::size_t cap = kDefaultStateCap)
      : StateSpace(params.m, params.L, cap) {}

  int m() const noexcept { return m_; }
  int L() const noexcept { return L_; }
  std::size_t size() const noexcept { return size_; }

  std::size_t index(const State& x) const {
    if (x.size() != m_) throw DomainError("StateSpace::index: wrong state length");
    std::size_t idx = 0;
    for (int i = 0; i < m_; ++i) {
      if (x[i] < 0 || x[i] > L_) throw DomainError("StateSpace::index: component out of range");
      idx = idx * static_cast<std::size_t>(L_ + 1) + static_cast<std::size_t>(x[i]);
    }
    return idx;
  }

  State state(std::size_t idx) const {
    std::vector<int> q(static_cast<std::size_t>(m_));
    for (int i = m_ - 1; i >= 0; --i) {
      q[static_cast<std::size_t>(i)] = static_cast<int>(idx % static_cast<std::size_t>(L_ + 1));
      idx /= static_cast<std::size_t>(L_ + 1);
    }
    return State(std::move(q));
  }

  std::vector<State> states() const {
    std::vector<State> out;
    out.reserve(size_);
    for (std::size_t s = 0; s < size_; ++s) out.push_back(state(s));
    return out;
  }

  bool operator==(const StateSpace& o) const noexcept { return m_ == o.m_ && L_ == o.L_; }

 private:
  int m_;
  int L_;
  std::size_t size_ = 0;
};

/// Ordered state list for the given parameters.
inline std::vector<State> enumerate_states(const GameParams& params,
                                           std::size_t cap = kDefaultStateCap) {
  return StateSpace(params, cap).states();
}

/// Probabilities of actions 0 and 1.
using ActionDist = std::array<double, 2>;

inline void validate_dist(const ActionDist& d) {
  if (!(d[0] >= 0.0 && d[1] >= 0.0) || std::abs(d[0] + d[1] - 1.0) > 1e-12)
    throw DomainError("action distribution must be nonnegative and sum to 1");
}

inline int sample_action(const ActionDist& d, CounterRng& rng) { return rng.bernoulli(d[1]) ? 1 : 0; }

/// Stationary mixed strategy for one player, dense over a StateSpace.
class MixedPolicy {
 public:
  MixedPolicy(StateSpace space, std::vector<ActionDist> probs)
      : space_(space), probs_(std::move(probs)) {
    if (probs_.size() != space_.size()) throw DomainError("MixedPolicy: size mismatch");
    for (const auto& d : probs_) validate_dist(d);
  }

  static MixedPolicy pure(const StateSpace& space, int action) {
    validate_action(action);
    ActionDist d{0.0, 0.0};
    d[static_cast<std::size_t>(action)] = 1.0;
    return MixedPolicy(space, std::vector<ActionDist>(space.size(), d));
  }

  static MixedPolicy uniform(const StateSpace& space) {
    return MixedPolicy(space, std::vector<ActionDist>(space.size(), ActionDist{0.5, 0.5}));
  }

  const StateSpace& space() const noexcept { return space_; }
  std::size_t size() const noexcept { return probs_.size(); }

  const ActionDist& operator()(const State& x) const { return probs_[space_.index(x)]; }
  const ActionDist& at(std::size_t s) const { return probs_.at(s); }

  void set(std::size_t s, const ActionDist& d) {
    validate_dist(d);
    probs_.at(s) = d;
  }

  const std::vector<ActionDist>& probs() const noexcept { return probs_; }

  bool operator==(const MixedPolicy&) const = default;

 private:
  StateSpace space_;
  std::vector<ActionDist> probs_;
};

}  // namespace mlspi
