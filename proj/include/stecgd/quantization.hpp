#pragma once

// Quantized ReLU activation and the straight-through surrogates used in its
// place during the backward pass.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stecgd/errors.hpp"

namespace stecgd {

/// b-bit stair-case ReLU: 0 on (-inf, 0], ceil(x) on (0, q_b), q_b beyond.
class Quantizer {
 public:
  explicit Quantizer(int bits) : bits_(bits) {
    if (bits < 1 || bits > 30) {
      throw ConfigError("quantizer bit-width must be in [1, 30], got " +
                        std::to_string(bits));
    }
    levels_ = (std::int64_t{1} << bits) - 1;
  }

  int bits() const noexcept { return bits_; }
  /// Maximum quantization level q_b = 2^b - 1.
  std::int64_t levels() const noexcept { return levels_; }
  double max_level() const noexcept { return static_cast<double>(levels_); }

  double apply(double x) const {
    if (!std::isfinite(x)) {
      throw DomainError("quantize: non-finite input");
    }
    return apply_unchecked(x);
  }

  // Hot-path variant for callers that already guarantee finite input.
  double apply_unchecked(double x) const noexcept {
    const double cap = max_level();
    if (x <= 0.0) return 0.0;
    if (x >= cap) return cap;
    return std::ceil(x);
  }

  double operator()(double x) const { return apply(x); }

  friend bool operator==(const Quantizer&, const Quantizer&) = default;

 private:
  int bits_;
  std::int64_t levels_;
};

inline double quantize(const Quantizer& q, double x) { return q.apply(x); }

enum class SteKind { ReLU, ReverseExp, LogTailedReLU };

inline std::string_view to_string(SteKind kind) {
  switch (kind) {
    case SteKind::ReLU:
      return "relu";
    case SteKind::ReverseExp:
      return "reverse_exp";
    case SteKind::LogTailedReLU:
      return "log_tailed_relu";
  }
  return "unknown";
}

inline SteKind parse_ste_kind(std::string_view name) {
  if (name == "relu") return SteKind::ReLU;
  if (name == "reverse_exp" || name == "reverse-exp") return SteKind::ReverseExp;
  if (name == "log_tailed_relu" || name == "log-tailed-relu" ||
      name == "log_tailed") {
    return SteKind::LogTailedReLU;
  }
  throw ConfigError("unknown STE kind '" + std::string(name) + "'");
}

/// A backward-pass surrogate g together with its declared slope bounds.
///
/// `delta` and `delta_tilde` bound g' on (0, domain_bound]. For the reverse
/// exponential and log-tailed surrogates the lower bound decays with the
/// input, so it is only meaningful on a bounded domain.
struct SteSpec {
  SteKind kind = SteKind::ReLU;
  double q_b = 15.0;
  double delta = 1.0;
  double delta_tilde = 1.0;
  double domain_bound = 1.0;

  /// Catalog surrogate with the tightest bounds valid on (0, domain_bound].
  static SteSpec make(SteKind kind, const Quantizer& q, double domain_bound) {
    if (!(domain_bound > 0.0) || !std::isfinite(domain_bound)) {
      throw ConfigError("STE domain bound must be positive and finite");
    }
    SteSpec s;
    s.kind = kind;
    s.q_b = q.max_level();
    s.domain_bound = domain_bound;
    s.delta_tilde = 1.0;
    switch (kind) {
      case SteKind::ReLU:
        s.delta = 1.0;
        break;
      case SteKind::ReverseExp:
        s.delta = std::exp(-domain_bound / s.q_b);
        break;
      case SteKind::LogTailedReLU:
        s.delta = domain_bound <= s.q_b ? 1.0 : 1.0 / (domain_bound - s.q_b + 1.0);
        break;
    }
    return s;
  }
};

inline double ste_value(const SteSpec& s, double x) {
  if (!std::isfinite(x)) {
    throw DomainError("ste_value: non-finite input");
  }
  if (x <= 0.0) return 0.0;
  switch (s.kind) {
    case SteKind::ReLU:
      return x;
    case SteKind::ReverseExp:
      return std::max(0.0, s.q_b * (1.0 - std::exp(-x / s.q_b)));
    case SteKind::LogTailedReLU:
      return x <= s.q_b ? x : s.q_b + std::log(x - s.q_b + 1.0);
  }
  return 0.0;
}

/// g'(x). The slope at x = 0 is taken as 0, matching the 1{x > 0} gate.
inline double ste_slope(const SteSpec& s, double x) noexcept {
  if (!(x > 0.0)) return 0.0;
  switch (s.kind) {
    case SteKind::ReLU:
      return 1.0;
    case SteKind::ReverseExp:
      return std::exp(-x / s.q_b);
    case SteKind::LogTailedReLU:
      return x <= s.q_b ? 1.0 : 1.0 / (x - s.q_b + 1.0);
  }
  return 0.0;
}

struct PropertyCheck {
  std::string name;
  bool passed = true;
  // Grid point with the largest violation; meaningful only when !passed.
  double worst_x = 0.0;
  double worst_violation = 0.0;
};

struct SteValidationReport {
  std::vector<PropertyCheck> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const PropertyCheck& c) { return c.passed; });
  }
  const PropertyCheck* find(std::string_view name) const {
    for (const auto& c : checks) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
};

inline constexpr std::string_view kZeroOnNonPositive = "zero_on_nonpositive";
inline constexpr std::string_view kSlopeBounds = "slope_bounds";
inline constexpr std::string_view kSlopeMatchesDifference = "slope_matches_difference";

/// Grid validation of an arbitrary surrogate pair (g, g').
///
/// Checks on `resolution` uniform points over [-M, M]: g == 0 on [-M, 0],
/// delta <= g' <= delta_tilde on (0, M], and g' against a central difference
/// of g (step 1e-6, tolerance 1e-5) away from the listed kinks.
template <typename Value, typename Slope>
SteValidationReport validate_surrogate(Value&& g, Slope&& g_prime, double delta,
                                       double delta_tilde, double domain_bound,
                                       int resolution,
                                       const std::vector<double>& kinks = {0.0}) {
  if (!(domain_bound > 0.0)) {
    throw ConfigError("validate_ste: domain bound must be positive");
  }
  if (resolution < 2) {
    throw ConfigError("validate_ste: grid resolution must be at least 2");
  }
  constexpr double kStep = 1e-6;
  constexpr double kTol = 1e-5;

  PropertyCheck zero{std::string(kZeroOnNonPositive)};
  PropertyCheck bounds{std::string(kSlopeBounds)};
  PropertyCheck diff{std::string(kSlopeMatchesDifference)};

  auto record = [](PropertyCheck& c, double x, double violation) {
    if (violation > c.worst_violation) {
      c.worst_violation = violation;
      c.worst_x = x;
      c.passed = false;
    }
  };

  const double span = 2.0 * domain_bound;
  for (int p = 0; p < resolution; ++p) {
    const double x = p == resolution - 1
                         ? domain_bound
                         : -domain_bound + span * p / (resolution - 1);
    if (x <= 0.0) {
      record(zero, x, std::abs(g(x)));
      continue;
    }
    const double slope = g_prime(x);
    record(bounds, x, std::max({0.0, delta - slope, slope - delta_tilde}));

    const bool near_kink = std::any_of(kinks.begin(), kinks.end(), [&](double k) {
      return std::abs(x - k) < 2.0 * kStep;
    });
    if (!near_kink) {
      const double fd = (g(x + kStep) - g(x - kStep)) / (2.0 * kStep);
      const double err = std::abs(slope - fd);
      if (err > kTol) record(diff, x, err);
    }
  }
  return {{zero, bounds, diff}};
}

inline SteValidationReport validate_ste(const SteSpec& s, int resolution) {
  std::vector<double> kinks{0.0};
  if (s.kind != SteKind::ReLU) kinks.push_back(s.q_b);
  return validate_surrogate([&](double x) { return ste_value(s, x); },
                            [&](double x) { return ste_slope(s, x); }, s.delta,
                            s.delta_tilde, s.domain_bound, resolution, kinks);
}

}  // namespace stecgd
