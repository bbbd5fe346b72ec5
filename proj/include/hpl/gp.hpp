#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "hpl/types.hpp"

namespace hpl {

struct Hyperparams {
  double signal_variance = 1.0;
  Vec length_scales;
  double noise_variance = 1e-6;

  int dim() const { return static_cast<int>(length_scales.size()); }
  // [log sf2, log l_1..l_d, log sn2]
  Vec to_log() const;
  static Hyperparams from_log(const Vec& theta);
  void validate() const;
};

constexpr double kJitter = 1e-8;
constexpr double kNoiseFloor = 1e-10;

double kernel_eval(const Vec& z1, const Vec& z2, const Hyperparams& hp);
Mat gram(const Mat& Z, const Hyperparams& hp);

// Rows of Z are inputs.
double log_marginal_likelihood(const Mat& Z, const Vec& y, const Hyperparams& hp,
                               double jitter = kJitter);
Vec lml_gradient(const Mat& Z, const Vec& y, const Hyperparams& hp, double jitter = kJitter);

struct FitConfig {
  int restarts = 5;
  int iterations = 100;
  std::uint64_t seed = 0;
  double init_lo = 1e-2;
  double init_hi = 1e2;
  double log_min = -18.0;
  double log_max = 12.0;
  double tol = 1e-7;
};

struct Prediction {
  double mean = 0.0;
  double std = 0.0;
};

class GpModel {
 public:
  GpModel() = default;
  GpModel(Mat Z, Vec y, Hyperparams hp, double jitter = kJitter);

  Prediction predict(const Vec& z) const;
  double log_marginal_likelihood() const { return lml_; }

  const Mat& inputs() const { return Z_; }
  const Vec& outputs() const { return y_; }
  const Hyperparams& hyperparams() const { return hp_; }
  double jitter() const { return jitter_; }
  int dim() const { return static_cast<int>(Z_.cols()); }
  int size() const { return static_cast<int>(Z_.rows()); }

  nlohmann::json to_json() const;
  static GpModel from_json(const nlohmann::json& j);
  std::string serialize() const;
  static GpModel deserialize(const std::string& bytes);

 private:
  Mat Z_;
  Vec y_;
  Hyperparams hp_;
  double jitter_ = kJitter;
  Eigen::LLT<Mat> llt_;
  Vec alpha_;
  Vec inv_ls2_;
  double lml_ = 0.0;
};

// Multi-start gradient ascent in log-parameter space.
GpModel fit(const Mat& Z, const Vec& y, const FitConfig& cfg);

}  // namespace hpl
