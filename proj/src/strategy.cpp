#include "hpl/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "hpl/errors.hpp"
#include "hpl/rng.hpp"

namespace hpl {

namespace {

Vec query_row(const Vec& qs, const Mat& forecast) {
  Vec z(qs.size() + forecast.size());
  z.head(qs.size()) = qs;
  Eigen::Index c = qs.size();
  for (Eigen::Index j = 0; j < forecast.rows(); ++j)
    for (Eigen::Index d = 0; d < forecast.cols(); ++d) z(c++) = forecast(j, d);
  return z;
}

std::string sha1_hex(const std::string& data) {
  // git blob hash: sha1("blob <size>\0<content>")
  std::string framed = "blob " + std::to_string(data.size());
  framed.push_back('\0');
  framed += data;
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(framed.data(), framed.size(), md, &len, EVP_sha1(), nullptr);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

std::vector<double> to_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }
Vec from_std(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

StrategyDataset build_dataset(const std::vector<Demonstration>& demos, int N, int T) {
  if (N < 0 || T < 1) throw ContractError("build_dataset: need N >= 0 and T >= 1");
  StrategyDataset ds;
  ds.N = N;
  ds.T = T;
  std::vector<Vec> zs, ys;
  for (size_t i = 0; i < demos.size(); ++i) {
    const auto& env = *demos[i].env;
    const auto& ex = demos[i].execution;
    if (ds.family.empty()) {
      ds.family = env.family();
      ds.state_dim = env.strategy_dim();
      ds.input_dim = env.strategy_input_dim();
    } else if (ds.family != env.family()) {
      throw ContractError("build_dataset: mixed environment families");
    }
    const int D = ex.duration_steps();
    if (D <= T) {
      std::cerr << "build_dataset: skipping " << ex.env_id << " (D=" << D << " <= T=" << T << ")\n";
      continue;
    }
    const auto chk = check_execution(env, ex);
    if (!chk.feasible()) {
      throw ContractError("build_dataset: stored execution " + ex.env_id +
                          " is not feasible (first bad step " + std::to_string(chk.first_bad_step) + ")");
    }
    for (int k = 0; k + T <= D; ++k) {
      const auto& xk = ex.states[static_cast<size_t>(k)];
      const auto view = env.view_at(xk);
      const Vec qs = view->query_state(xk);
      ds.query_state_dim = static_cast<int>(qs.size());
      zs.push_back(query_row(qs, view->forecast(xk, N)));
      Vec y(ds.state_dim + 2 * ds.input_dim);
      y.head(ds.state_dim) = view->strategy_state(ex.states[static_cast<size_t>(k + T)], xk);
      for (int d = 0; d < ds.input_dim; ++d) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int j = k; j < k + T; ++j) {
          const double r = view->strategy_input(ex.inputs[static_cast<size_t>(j)])(d);
          lo = std::min(lo, r);
          hi = std::max(hi, r);
        }
        y(ds.state_dim + 2 * d) = lo;
        y(ds.state_dim + 2 * d + 1) = hi;
      }
      ys.push_back(std::move(y));
      ds.source.push_back(static_cast<int>(i));
    }
  }
  if (!zs.empty()) {
    ds.inputs.resize(static_cast<Eigen::Index>(zs.size()), zs[0].size());
    ds.outputs.resize(static_cast<Eigen::Index>(ys.size()), ys[0].size());
    for (size_t r = 0; r < zs.size(); ++r) {
      ds.inputs.row(static_cast<Eigen::Index>(r)) = zs[r].transpose();
      ds.outputs.row(static_cast<Eigen::Index>(r)) = ys[r].transpose();
    }
  }
  return ds;
}

void write_dataset_csv(const StrategyDataset& ds, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "# family=" << ds.family << " N=" << ds.N << " T=" << ds.T << " state_dim=" << ds.state_dim
     << " input_dim=" << ds.input_dim << " query_state_dim=" << ds.query_state_dim
     << " in_dim=" << ds.inputs.cols() << " out_dim=" << ds.outputs.cols() << "\n";
  os << "source";
  for (Eigen::Index c = 0; c < ds.inputs.cols(); ++c) os << ",z" << c;
  for (Eigen::Index c = 0; c < ds.outputs.cols(); ++c) os << ",y" << c;
  os << "\n" << std::setprecision(17);
  for (Eigen::Index r = 0; r < ds.inputs.rows(); ++r) {
    os << ds.source[static_cast<size_t>(r)];
    for (Eigen::Index c = 0; c < ds.inputs.cols(); ++c) os << "," << ds.inputs(r, c);
    for (Eigen::Index c = 0; c < ds.outputs.cols(); ++c) os << "," << ds.outputs(r, c);
    os << "\n";
  }
}

StrategyDataset read_dataset_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot read " + path);
  StrategyDataset ds;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) throw ParseError(path + ": missing header");
  int in_dim = -1, out_dim = -1;
  std::istringstream hs(line.substr(2));
  std::string kv;
  while (hs >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
    if (k == "family") ds.family = v;
    else if (k == "N") ds.N = std::stoi(v);
    else if (k == "T") ds.T = std::stoi(v);
    else if (k == "state_dim") ds.state_dim = std::stoi(v);
    else if (k == "input_dim") ds.input_dim = std::stoi(v);
    else if (k == "query_state_dim") ds.query_state_dim = std::stoi(v);
    else if (k == "in_dim") in_dim = std::stoi(v);
    else if (k == "out_dim") out_dim = std::stoi(v);
  }
  if (in_dim < 0 || out_dim < 0) throw ParseError(path + ": header lacks dimensions");
  std::getline(is, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    try {
      while (std::getline(ss, cell, ',')) cells.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw ParseError(path + ": bad number");
    }
    if (static_cast<int>(cells.size()) != 1 + in_dim + out_dim) throw ParseError(path + ": bad row width");
    rows.push_back(std::move(cells));
  }
  ds.inputs.resize(static_cast<Eigen::Index>(rows.size()), in_dim);
  ds.outputs.resize(static_cast<Eigen::Index>(rows.size()), out_dim);
  for (size_t r = 0; r < rows.size(); ++r) {
    ds.source.push_back(static_cast<int>(rows[r][0]));
    for (int c = 0; c < in_dim; ++c) ds.inputs(static_cast<Eigen::Index>(r), c) = rows[r][1 + c];
    for (int c = 0; c < out_dim; ++c) ds.outputs(static_cast<Eigen::Index>(r), c) = rows[r][1 + in_dim + c];
  }
  return ds;
}

Strategy train_strategy(const StrategyDataset& ds, const TrainConfig& cfg) {
  if (ds.rows() < 2) throw ContractError("train_strategy: dataset is empty");
  Strategy s;
  s.family_ = ds.family;
  s.N_ = ds.N;
  s.T_ = ds.T;
  s.state_dim_ = ds.state_dim;
  s.input_dim_ = ds.input_dim;
  s.query_state_dim_ = ds.query_state_dim;
  s.has_inputs_ = cfg.train_inputs && ds.input_dim > 0;

  // Evenly spaced subsample.
  const int n = ds.rows();
  const int m = std::min(n, std::max(2, cfg.max_points));
  std::vector<Eigen::Index> idx(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) idx[static_cast<size_t>(i)] = static_cast<Eigen::Index>((static_cast<long long>(i) * n) / m);
  Mat Z(m, ds.inputs.cols());
  for (int i = 0; i < m; ++i) Z.row(i) = ds.inputs.row(idx[static_cast<size_t>(i)]);

  s.z_mean_ = Z.colwise().mean().transpose();
  s.z_scale_.resize(Z.cols());
  for (Eigen::Index c = 0; c < Z.cols(); ++c) {
    const double sd = std::sqrt((Z.col(c).array() - s.z_mean_(c)).square().mean());
    s.z_scale_(c) = sd > 1e-12 ? sd : 1.0;
  }
  const Mat Zs = (Z.rowwise() - s.z_mean_.transpose()).array().rowwise() / s.z_scale_.transpose().array();

  const int outs = s.state_dim_ + (s.has_inputs_ ? 2 * s.input_dim_ : 0);
  s.y_mean_.resize(outs);
  s.y_scale_.resize(outs);
  for (int d = 0; d < outs; ++d) {
    Vec y(m);
    for (int i = 0; i < m; ++i) y(i) = ds.outputs(idx[static_cast<size_t>(i)], d);
    s.y_mean_(d) = y.mean();
    const double sd = std::sqrt((y.array() - s.y_mean_(d)).square().mean());
    s.y_scale_(d) = sd > 1e-12 ? sd : 1.0;
    const Vec ys = (y.array() - s.y_mean_(d)) / s.y_scale_(d);
    FitConfig fc = cfg.fit;
    fc.seed = substream_seed(cfg.fit.seed, "strategy-fit", static_cast<std::uint64_t>(d));
    try {
      s.models_.push_back(fit(Zs, ys, fc));
    } catch (const std::exception& e) {
      throw FitError("train_strategy: output dimension " + std::to_string(d) + ": " + e.what());
    }
  }
  return s;
}

Vec Strategy::query(const Vec& qs, const Mat& forecast) const {
  const Vec z = query_row(qs, forecast);
  if (z.size() != z_mean_.size()) throw ContractError("evaluate_strategy: query dimension mismatch");
  return ((z - z_mean_).array() / z_scale_.array()).matrix();
}

StrategySet Strategy::evaluate(const Vec& qs, const Mat& forecast, double eta) const {
  if (forecast.rows() != N_ + 1) throw ContractError("evaluate_strategy: forecast must have N+1 rows");
  if (eta < 0.0) throw ContractError("evaluate_strategy: eta must be >= 0");
  const Vec z = query(qs, forecast);
  const int outs = static_cast<int>(models_.size());
  StrategySet out;
  out.mean.resize(outs);
  out.std.resize(outs);
  for (int d = 0; d < outs; ++d) {
    const auto p = models_[static_cast<size_t>(d)].predict(z);
    out.mean(d) = y_mean_(d) + y_scale_(d) * p.mean;
    out.std(d) = y_scale_(d) * p.std;
  }
  out.state_lo = out.mean.head(state_dim_) - eta * out.std.head(state_dim_);
  out.state_hi = out.mean.head(state_dim_) + eta * out.std.head(state_dim_);
  const int ni = has_inputs_ ? input_dim_ : 0;
  out.input_lo.resize(ni);
  out.input_hi.resize(ni);
  out.confidence.resize(state_dim_ + ni);
  out.confidence.head(state_dim_) = out.std.head(state_dim_);
  for (int i = 0; i < ni; ++i) {
    const int a = state_dim_ + 2 * i, b = a + 1;
    out.input_lo(i) = out.mean(a) - eta * out.std(a);
    out.input_hi(i) = out.mean(b) + eta * out.std(b);
    out.confidence(state_dim_ + i) = std::max(out.std(a), out.std(b));
  }
  return out;
}

StrategySet evaluate_strategy(const Strategy& s, const Vec& qs, const Mat& forecast, double eta) {
  return s.evaluate(qs, forecast, eta);
}

bool confidence_gate(const Vec& C, double d_thresh) {
  if (!(d_thresh > 0.0)) throw ContractError("confidence_gate: d_thresh must be > 0");
  for (Eigen::Index i = 0; i < C.size(); ++i)
    if (!(C(i) <= d_thresh)) return false;
  return true;
}

namespace {

nlohmann::json manifest(const std::string& family, int N, int T, int sd, int id, int qsd, bool hi,
                        const Vec& zm, const Vec& zs, const Vec& ym, const Vec& ysc, size_t nmodels) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["family"] = family;
  j["N"] = N;
  j["T"] = T;
  j["state_dim"] = sd;
  j["input_dim"] = id;
  j["query_state_dim"] = qsd;
  j["has_inputs"] = hi;
  j["z_mean"] = to_std(zm);
  j["z_scale"] = to_std(zs);
  j["y_mean"] = to_std(ym);
  j["y_scale"] = to_std(ysc);
  std::vector<std::string> files;
  for (size_t d = 0; d < nmodels; ++d) files.push_back("gp_" + std::to_string(d) + ".json");
  j["models"] = files;
  return j;
}

}  // namespace

void Strategy::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  const auto j = manifest(family_, N_, T_, state_dim_, input_dim_, query_state_dim_, has_inputs_, z_mean_,
                          z_scale_, y_mean_, y_scale_, models_.size());
  std::ofstream(dir + "/manifest.json") << j.dump(2) << "\n";
  for (size_t d = 0; d < models_.size(); ++d)
    std::ofstream(dir + "/gp_" + std::to_string(d) + ".json") << models_[d].serialize();
}

Strategy Strategy::load(const std::string& dir) {
  std::ifstream is(dir + "/manifest.json");
  if (!is) throw ParseError("cannot read " + dir + "/manifest.json");
  Strategy s;
  try {
    const auto j = nlohmann::json::parse(is);
    s.family_ = j.at("family").get<std::string>();
    s.N_ = j.at("N").get<int>();
    s.T_ = j.at("T").get<int>();
    s.state_dim_ = j.at("state_dim").get<int>();
    s.input_dim_ = j.at("input_dim").get<int>();
    s.query_state_dim_ = j.at("query_state_dim").get<int>();
    s.has_inputs_ = j.at("has_inputs").get<bool>();
    s.z_mean_ = from_std(j.at("z_mean").get<std::vector<double>>());
    s.z_scale_ = from_std(j.at("z_scale").get<std::vector<double>>());
    s.y_mean_ = from_std(j.at("y_mean").get<std::vector<double>>());
    s.y_scale_ = from_std(j.at("y_scale").get<std::vector<double>>());
    for (const auto& f : j.at("models")) {
      std::ifstream ms(dir + "/" + f.get<std::string>());
      if (!ms) throw ParseError("cannot read model " + f.get<std::string>());
      std::stringstream buf;
      buf << ms.rdbuf();
      s.models_.push_back(GpModel::deserialize(buf.str()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("strategy manifest: ") + e.what());
  }
  return s;
}

std::string Strategy::content_hash() const {
  std::string all = manifest(family_, N_, T_, state_dim_, input_dim_, query_state_dim_, has_inputs_, z_mean_,
                             z_scale_, y_mean_, y_scale_, models_.size())
                        .dump();
  for (const auto& m : models_) all += m.serialize();
  return sha1_hex(all);
}

}  // namespace hpl
