#include "prevcox/truncation.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace prevcox {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(name) + " must be strictly positive");
  }
}

void require_time(double t) {
  if (t < 0.0 || std::isnan(t)) {
    throw std::domain_error("time argument must be >= 0");
  }
}

}  // namespace

TruncationModel TruncationModel::exponential(double rate) {
  require_positive(rate, "rate");
  TruncationModel m;
  m.family_ = Family::Exponential;
  m.p1_ = rate;
  return m;
}

TruncationModel TruncationModel::uniform(double upper) {
  require_positive(upper, "upper");
  TruncationModel m;
  m.family_ = Family::Uniform;
  m.p1_ = upper;
  return m;
}

TruncationModel TruncationModel::weibull(double shape, double scale) {
  require_positive(shape, "shape");
  require_positive(scale, "scale");
  TruncationModel m;
  m.family_ = Family::Weibull;
  m.p1_ = shape;
  m.p2_ = scale;
  return m;
}

TruncationModel TruncationModel::custom(std::function<double(double)> pdf,
                                        std::function<double(double)> cdf,
                                        std::function<double(double)> quantile) {
  TruncationModel m;
  m.family_ = Family::Custom;
  m.custom_pdf_ = std::move(pdf);
  m.custom_cdf_ = std::move(cdf);
  m.custom_quantile_ = std::move(quantile);
  return m;
}

TruncationModel TruncationModel::from_json(const std::string& config) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(config);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("truncation config is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("family")) {
    throw std::invalid_argument("truncation config needs a \"family\" key");
  }
  const std::string family = j.at("family").get<std::string>();
  auto num = [&](const char* key) {
    if (!j.contains(key) || !j.at(key).is_number()) {
      throw std::invalid_argument(std::string("truncation config: missing numeric \"") + key +
                                  "\" for family " + family);
    }
    return j.at(key).get<double>();
  };
  if (family == "exponential") return exponential(num("rate"));
  if (family == "uniform") return uniform(num("upper"));
  if (family == "weibull") return weibull(num("shape"), num("scale"));
  throw std::invalid_argument("unknown truncation family: " + family);
}

std::string TruncationModel::to_json() const {
  nlohmann::json j;
  switch (family_) {
    case Family::Exponential:
      j = {{"family", "exponential"}, {"rate", p1_}};
      break;
    case Family::Uniform:
      j = {{"family", "uniform"}, {"upper", p1_}};
      break;
    case Family::Weibull:
      j = {{"family", "weibull"}, {"shape", p1_}, {"scale", p2_}};
      break;
    case Family::Custom:
      j = {{"family", "custom"}};
      break;
  }
  return j.dump();
}

double TruncationModel::pdf(double t) const {
  require_time(t);
  switch (family_) {
    case Family::Exponential:
      return p1_ * std::exp(-p1_ * t);
    case Family::Uniform:
      return t <= p1_ ? 1.0 / p1_ : 0.0;
    case Family::Weibull: {
      if (t == 0.0) return p1_ > 1.0 ? 0.0 : (p1_ == 1.0 ? 1.0 / p2_ : INFINITY);
      const double x = t / p2_;
      return (p1_ / p2_) * std::pow(x, p1_ - 1.0) * std::exp(-std::pow(x, p1_));
    }
    case Family::Custom:
      return custom_pdf_(t);
  }
  return 0.0;
}

double TruncationModel::cdf(double t) const {
  require_time(t);
  switch (family_) {
    case Family::Exponential:
      return -std::expm1(-p1_ * t);
    case Family::Uniform:
      return t >= p1_ ? 1.0 : t / p1_;
    case Family::Weibull:
      return -std::expm1(-std::pow(t / p2_, p1_));
    case Family::Custom:
      return custom_cdf_(t);
  }
  return 0.0;
}

double TruncationModel::quantile(double u) const {
  if (!(u > 0.0) || !(u < 1.0)) {
    throw std::domain_error("quantile argument must lie in (0, 1)");
  }
  switch (family_) {
    case Family::Exponential:
      return -std::log1p(-u) / p1_;
    case Family::Uniform:
      return u * p1_;
    case Family::Weibull:
      return p2_ * std::pow(-std::log1p(-u), 1.0 / p1_);
    case Family::Custom:
      return custom_quantile_(u);
  }
  return 0.0;
}

std::vector<double> TruncationModel::sample(RngStream& rng, std::size_t k) const {
  std::vector<double> out(k);
  for (double& v : out) v = sample(rng);
  return out;
}

}  // namespace prevcox
