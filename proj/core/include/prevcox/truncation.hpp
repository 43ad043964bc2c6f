#pragma once

#include <functional>
#include <string>
#include <vector>

#include "prevcox/random.hpp"

namespace prevcox {

// Parametric truncation-time distribution with known parameters: density
// g, distribution function G, and an inverse-CDF sampler. Three families
// cover the supported study designs; custom() is the extension point for
// anything else.
class TruncationModel {
public:
  enum class Family { Exponential, Uniform, Weibull, Custom };

  static TruncationModel exponential(double rate);
  static TruncationModel uniform(double upper);  // Uniform(0, upper)
  static TruncationModel weibull(double shape, double scale);
  static TruncationModel custom(std::function<double(double)> pdf,
                                std::function<double(double)> cdf,
                                std::function<double(double)> quantile);

  // Config syntax: {"family":"exponential","rate":1.0},
  // {"family":"uniform","upper":2.0}, {"family":"weibull","shape":4.8,"scale":2.04}
  static TruncationModel from_json(const std::string& config);
  std::string to_json() const;  // inverse of from_json for the built-in families

  // g(t); zero outside the support. Throws std::domain_error for t < 0.
  double pdf(double t) const;
  // G(t), exact closed form per family. Throws std::domain_error for t < 0.
  double cdf(double t) const;
  // Inverse CDF for u in (0, 1).
  double quantile(double u) const;

  double sample(RngStream& rng) const { return quantile(rng.uniform()); }
  std::vector<double> sample(RngStream& rng, std::size_t k) const;

  Family family() const noexcept { return family_; }

private:
  TruncationModel() = default;

  Family family_ = Family::Exponential;
  double p1_ = 1.0;  // rate / upper / shape
  double p2_ = 0.0;  // scale (Weibull only)
  std::function<double(double)> custom_pdf_, custom_cdf_, custom_quantile_;
};

}  // namespace prevcox
