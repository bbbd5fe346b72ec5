#include "hpl/gp.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "hpl/errors.hpp"
#include "hpl/rng.hpp"

namespace hpl {

namespace {

std::string describe(const Hyperparams& hp) {
  std::ostringstream os;
  os << "signal_variance=" << hp.signal_variance << " noise_variance=" << hp.noise_variance
     << " length_scales=[";
  for (int i = 0; i < hp.dim(); ++i) os << (i ? "," : "") << hp.length_scales(i);
  os << "]";
  return os.str();
}

Eigen::LLT<Mat> factor(const Mat& Z, const Hyperparams& hp, double jitter) {
  Mat K = gram(Z, hp);
  K.diagonal().array() += hp.noise_variance + jitter;
  Eigen::LLT<Mat> llt(K);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("gram matrix not positive definite: " + describe(hp));
  }
  return llt;
}

void check_data(const Mat& Z, const Vec& y, const Hyperparams& hp) {
  if (Z.rows() < 1 || Z.rows() != y.size()) throw ContractError("gp: |Z| must equal |y| and be >= 1");
  if (Z.cols() != hp.dim()) throw ContractError("gp: input dimension does not match length_scales");
}

}  // namespace

Vec Hyperparams::to_log() const {
  Vec t(dim() + 2);
  t(0) = std::log(signal_variance);
  t.segment(1, dim()) = length_scales.array().log().matrix();
  t(dim() + 1) = std::log(std::max(noise_variance, kNoiseFloor));
  return t;
}

Hyperparams Hyperparams::from_log(const Vec& theta) {
  Hyperparams hp;
  const int d = static_cast<int>(theta.size()) - 2;
  hp.signal_variance = std::exp(theta(0));
  hp.length_scales = theta.segment(1, d).array().exp().matrix();
  hp.noise_variance = std::max(std::exp(theta(d + 1)), kNoiseFloor);
  return hp;
}

void Hyperparams::validate() const {
  if (!(signal_variance > 0.0)) throw ContractError("hyperparams: signal_variance must be > 0");
  if (!(noise_variance >= 0.0)) throw ContractError("hyperparams: noise_variance must be >= 0");
  for (int i = 0; i < dim(); ++i) {
    if (!(length_scales(i) > 0.0)) throw ContractError("hyperparams: length_scales must be > 0");
  }
}

double kernel_eval(const Vec& z1, const Vec& z2, const Hyperparams& hp) {
  if (z1.size() != hp.dim() || z2.size() != hp.dim()) {
    throw ContractError("kernel_eval: dimension mismatch");
  }
  const double r2 = ((z1 - z2).array() / hp.length_scales.array()).square().sum();
  return hp.signal_variance * std::exp(-0.5 * r2);
}

Mat gram(const Mat& Z, const Hyperparams& hp) {
  const Eigen::Index n = Z.rows();
  const Mat S = Z * hp.length_scales.cwiseInverse().asDiagonal();
  const Vec sq = S.rowwise().squaredNorm();
  Mat D = -2.0 * S * S.transpose();
  D.colwise() += sq;
  D.rowwise() += sq.transpose();
  Mat K(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    K(j, j) = hp.signal_variance;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = hp.signal_variance * std::exp(-0.5 * std::max(D(i, j), 0.0));
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

double log_marginal_likelihood(const Mat& Z, const Vec& y, const Hyperparams& hp, double jitter) {
  check_data(Z, y, hp);
  const auto llt = factor(Z, hp, jitter);
  const Vec alpha = llt.solve(y);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * y.dot(alpha) - 0.5 * logdet -
         0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi);
}

Vec lml_gradient(const Mat& Z, const Vec& y, const Hyperparams& hp, double jitter) {
  check_data(Z, y, hp);
  const Eigen::Index n = Z.rows();
  const int d = hp.dim();
  const auto llt = factor(Z, hp, jitter);
  const Vec alpha = llt.solve(y);
  const Mat Kinv = llt.solve(Mat::Identity(n, n));
  // dL/dK = 0.5 (a a^T - K^-1)
  Mat W = alpha * alpha.transpose() - Kinv;
  const Mat K = gram(Z, hp);
  const Mat WK = W.cwiseProduct(K);

  Vec g(d + 2);
  g(0) = 0.5 * WK.sum();
  for (int m = 0; m < d; ++m) {
    const Vec col = Z.col(m);
    const double inv = 1.0 / (hp.length_scales(m) * hp.length_scales(m));
    // dK/dlog l_m = K .* (z_i - z_j)^2 / l_m^2
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double diff = col(i) - col(j);
        acc += WK(i, j) * diff * diff;
      }
    }
    g(1 + m) = 0.5 * acc * inv;
  }
  // Below the floor the parameter is clamped, so the derivative vanishes.
  g(d + 1) = hp.noise_variance > kNoiseFloor ? 0.5 * hp.noise_variance * W.trace() : 0.0;
  return g;
}

GpModel::GpModel(Mat Z, Vec y, Hyperparams hp, double jitter)
    : Z_(std::move(Z)), y_(std::move(y)), hp_(std::move(hp)), jitter_(jitter) {
  check_data(Z_, y_, hp_);
  hp_.validate();
  llt_ = factor(Z_, hp_, jitter_);
  alpha_ = llt_.solve(y_);
  inv_ls2_ = hp_.length_scales.array().square().inverse().matrix();
  const double logdet = 2.0 * llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
  lml_ = -0.5 * y_.dot(alpha_) - 0.5 * logdet -
         0.5 * static_cast<double>(y_.size()) * std::log(2.0 * std::numbers::pi);
}

Prediction GpModel::predict(const Vec& z) const {
  if (z.size() != Z_.cols()) throw ContractError("predict: dimension mismatch");
  const Eigen::Index n = Z_.rows();
  Vec k(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r2 = ((Z_.row(i).transpose() - z).array().square() * inv_ls2_.array()).sum();
    k(i) = hp_.signal_variance * std::exp(-0.5 * r2);
  }
  Prediction p;
  p.mean = k.dot(alpha_);
  const Vec v = llt_.matrixL().solve(k);
  const double var = hp_.signal_variance - v.squaredNorm();
  p.std = std::sqrt(std::max(var, 0.0));
  return p;
}

nlohmann::json GpModel::to_json() const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["jitter"] = jitter_;
  j["hyperparams"] = {{"signal_variance", hp_.signal_variance},
                      {"noise_variance", hp_.noise_variance},
                      {"length_scales", std::vector<double>(hp_.length_scales.data(),
                                                            hp_.length_scales.data() + hp_.dim())}};
  j["rows"] = Z_.rows();
  j["cols"] = Z_.cols();
  std::vector<double> z;
  z.reserve(static_cast<size_t>(Z_.size()));
  for (Eigen::Index i = 0; i < Z_.rows(); ++i)
    for (Eigen::Index c = 0; c < Z_.cols(); ++c) z.push_back(Z_(i, c));
  j["Z"] = z;
  j["y"] = std::vector<double>(y_.data(), y_.data() + y_.size());
  return j;
}

GpModel GpModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != 1) throw ParseError("gp: unsupported format_version");
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto z = j.at("Z").get<std::vector<double>>();
    const auto y = j.at("y").get<std::vector<double>>();
    const auto ls = j.at("hyperparams").at("length_scales").get<std::vector<double>>();
    if (rows < 1 || static_cast<Eigen::Index>(z.size()) != rows * cols ||
        static_cast<Eigen::Index>(y.size()) != rows || static_cast<Eigen::Index>(ls.size()) != cols) {
      throw ParseError("gp: inconsistent array sizes");
    }
    Mat Z(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index c = 0; c < cols; ++c) Z(i, c) = z[static_cast<size_t>(i * cols + c)];
    Hyperparams hp;
    hp.signal_variance = j.at("hyperparams").at("signal_variance").get<double>();
    hp.noise_variance = j.at("hyperparams").at("noise_variance").get<double>();
    hp.length_scales = Eigen::Map<const Vec>(ls.data(), cols);
    return GpModel(std::move(Z), Eigen::Map<const Vec>(y.data(), rows), hp,
                   j.at("jitter").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("gp: malformed model: ") + e.what());
  } catch (const ContractError& e) {
    throw ParseError(std::string("gp: invalid model: ") + e.what());
  }
}

std::string GpModel::serialize() const { return to_json().dump(-1, ' ', false); }

GpModel GpModel::deserialize(const std::string& bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("gp: cannot parse: ") + e.what());
  }
  return from_json(j);
}

namespace {

struct Eval {
  double f = -std::numeric_limits<double>::infinity();
  Vec g;
  bool ok = false;
};

Eval evaluate(const Mat& Z, const Vec& y, const Vec& theta) {
  Eval e;
  try {
    const Hyperparams hp = Hyperparams::from_log(theta);
    e.f = log_marginal_likelihood(Z, y, hp);
    e.g = lml_gradient(Z, y, hp);
    e.ok = std::isfinite(e.f) && e.g.allFinite();
  } catch (const NumericalError&) {
    e.ok = false;
  }
  return e;
}

Vec clamp(Vec t, const FitConfig& cfg) {
  for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = std::clamp(t(i), cfg.log_min, cfg.log_max);
  t(t.size() - 1) = std::max(t(t.size() - 1), std::log(kNoiseFloor));
  return t;
}

}  // namespace

GpModel fit(const Mat& Z, const Vec& y, const FitConfig& cfg) {
  if (Z.rows() < 2 || Z.rows() != y.size()) throw ContractError("fit: need |Z| = |y| >= 2");
  if (cfg.restarts < 1) throw ContractError("fit: restarts must be >= 1");
  const int d = static_cast<int>(Z.cols());
  Rng rng(substream_seed(cfg.seed, "gp-fit"));
  const double llo = std::log(cfg.init_lo), lhi = std::log(cfg.init_hi);

  Vec best_theta;
  double best_f = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.restarts; ++r) {
    // One shared length scale per restart: independent per-dimension draws
    // leave high-dimensional kernels diagonal and the ascent on a plateau.
    Vec theta(d + 2);
    theta(0) = uniform(rng, llo, lhi);
    theta.segment(1, d).setConstant(uniform(rng, llo, lhi));
    theta(d + 1) = uniform(rng, llo, lhi);
    if (r == 0) {
      // Data-scale start: on standardized inputs typical distances grow like
      // sqrt(d), and short scales there only memorize the training rows.
      theta(0) = 0.0;
      theta.segment(1, d).setConstant(0.5 * std::log(static_cast<double>(d)));
      theta(d + 1) = std::log(0.1);
    }
    theta = clamp(theta, cfg);
    Eval cur = evaluate(Z, y, theta);
    // Pull the noise up until the first factorization succeeds.
    for (int tries = 0; !cur.ok && tries < 20; ++tries) {
      theta(d + 1) = std::min(theta(d + 1) + 1.0, cfg.log_max);
      cur = evaluate(Z, y, theta);
    }
    if (!cur.ok) continue;

    double step = 0.1 / std::max(1.0, cur.g.norm());
    Vec prev_theta, prev_g;
    for (int it = 0; it < cfg.iterations; ++it) {
      if (prev_g.size()) {
        // Barzilai-Borwein trial step for an ascent problem.
        const Vec s = theta - prev_theta, q = cur.g - prev_g;
        const double sq = s.dot(q);
        if (sq < -1e-300) step = std::clamp(-s.squaredNorm() / sq, 1e-6, 1e2);
      }
      bool accepted = false;
      for (int bt = 0; bt < 30; ++bt) {
        const Vec cand = clamp(theta + step * cur.g, cfg);
        Eval e = evaluate(Z, y, cand);
        if (e.ok && e.f >= cur.f) {
          prev_theta = theta;
          prev_g = cur.g;
          const double gain = e.f - cur.f;
          theta = cand;
          cur = std::move(e);
          accepted = true;
          if (gain < cfg.tol * (1.0 + std::abs(cur.f))) it = cfg.iterations;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
    }
    if (cur.f > best_f) {
      best_f = cur.f;
      best_theta = theta;
    }
  }
  if (best_theta.size() == 0) throw FitError("fit: every restart failed to factorize");
  return GpModel(Z, y, Hyperparams::from_log(best_theta));
}

}  // namespace hpl
