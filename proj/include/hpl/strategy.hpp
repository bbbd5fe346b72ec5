#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hpl/environment.hpp"
#include "hpl/gp.hpp"

namespace hpl {

struct StrategyDataset {
  std::string family;
  int N = 0, T = 0;
  int state_dim = 0;        // n_x~
  int input_dim = 0;        // n_u~ (two outputs each: window min and max)
  int query_state_dim = 0;  // leading part of every input row
  Mat inputs;               // rows z = [x_k ; theta_k .. theta_{k+N}]
  Mat outputs;              // cols: x~_{k+T} dims, then (min, max) per strategy input dim
  std::vector<int> source;  // execution index of each row

  int rows() const { return static_cast<int>(inputs.rows()); }
  int output_dim() const { return static_cast<int>(outputs.cols()); }
};

struct Demonstration {
  EnvPtr env;
  Execution execution;
};

// Skips executions with D <= T (logged to stderr); throws ContractError on a
// stored execution that fails its feasibility checks.
StrategyDataset build_dataset(const std::vector<Demonstration>& demos, int N, int T);

void write_dataset_csv(const StrategyDataset& ds, const std::string& path);
StrategyDataset read_dataset_csv(const std::string& path);

struct StrategySet {
  Vec mean, std;        // per output column
  Vec state_lo, state_hi;
  Vec input_lo, input_hi;  // input box: [min_lo, max_hi] per strategy input dim
  Vec confidence;          // C_k: one sigma per strategy state and input dim
};

struct TrainConfig {
  FitConfig fit;
  int max_points = 300;  // rows kept per GP (evenly spaced subsample)
  bool train_inputs = true;
};

class Strategy {
 public:
  Strategy() = default;

  StrategySet evaluate(const Vec& query_state, const Mat& forecast, double eta) const;
  Vec query(const Vec& query_state, const Mat& forecast) const;

  int N() const { return N_; }
  int T() const { return T_; }
  int state_dim() const { return state_dim_; }
  int input_dim() const { return input_dim_; }
  const std::string& family() const { return family_; }
  const std::vector<GpModel>& models() const { return models_; }
  bool has_inputs() const { return has_inputs_; }

  void save(const std::string& dir) const;
  static Strategy load(const std::string& dir);
  // Hash over the persisted manifest and model files.
  std::string content_hash() const;

  friend Strategy train_strategy(const StrategyDataset& ds, const TrainConfig& cfg);

 private:
  std::string family_;
  int N_ = 0, T_ = 0, state_dim_ = 0, input_dim_ = 0, query_state_dim_ = 0;
  bool has_inputs_ = false;
  Vec z_mean_, z_scale_;
  Vec y_mean_, y_scale_;
  std::vector<GpModel> models_;
};

Strategy train_strategy(const StrategyDataset& ds, const TrainConfig& cfg);

StrategySet evaluate_strategy(const Strategy& s, const Vec& query_state, const Mat& forecast, double eta);

// Accept iff no component of C exceeds d_thresh.
bool confidence_gate(const Vec& C, double d_thresh);

}  // namespace hpl
