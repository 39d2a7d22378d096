#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "marginlab/embedding.hpp"
#include "marginlab/relevance.hpp"

namespace marginlab {

enum class LossKind { Sigmoid, InfoNce };

const char* loss_kind_name(LossKind kind);
LossKind parse_loss_kind(const std::string& name);

// Loss value and exact gradients. U holds one query vector per row (N x d),
// V one document vector per row (n x d); the inverse temperature gradient is
// taken w.r.t. log t.
struct LossGrad {
  double value = 0.0;
  Eigen::MatrixXd dU;
  Eigen::MatrixXd dV;
  double dlogt = 0.0;
};

// sum_{ji} softplus((-1)^{A_ji} (t <U_j, V_i> - b)), log1p-exp stabilized.
LossGrad sigmoid_loss(const RelevanceMatrix& A, const Eigen::MatrixXd& U,
                      const Eigen::MatrixXd& V, double t, double b,
                      bool with_grad = true);

// Negative log-softmax summed over the positive pairs of every row,
// log-sum-exp stabilized.
LossGrad infonce_loss(const RelevanceMatrix& A, const Eigen::MatrixXd& U,
                      const Eigen::MatrixXd& V, double t,
                      bool with_grad = true);

struct TrainConfig {
  RelevanceMatrix matrix;
  int d = 8;
  LossKind loss = LossKind::Sigmoid;
  std::int64_t steps = 20000;
  double base_lr = 0.03;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_every = 100;
  double bias = 0.0;   // sigmoid b, fixed at 0
  double t0 = 10.0;    // initial inverse temperature; trained as log t
  std::int64_t full_batch_cap = 4000000;  // N*n pairs
  int jobs = 1;        // checkpoint certification only

  explicit TrainConfig(RelevanceMatrix m) : matrix(std::move(m)) {}
};

struct TrainCheckpoint {
  std::int64_t step = 0;
  double loss = 0.0;
  double inv_temp = 0.0;
  double margin = 0.0;  // certified bias-0 margin
  double best_tau = 0.0;
  double best_tau_margin = 0.0;
};

struct TrainTrace {
  LossKind loss = LossKind::Sigmoid;
  std::vector<TrainCheckpoint> rows;
  Eigen::MatrixXd U;  // final state, one vector per row
  Eigen::MatrixXd V;
  double final_inv_temp = 0.0;
  // Running max over checkpoints of the loss's margin statistic: bias-0
  // margin for sigmoid (b = 0), best_tau_margin for InfoNCE.
  double max_margin = 0.0;
  bool aborted = false;          // non-finite loss encountered
  std::int64_t abort_step = -1;
};

// Full-batch Adam (0.9, 0.999, 1e-8) with cosine-annealed learning rate,
// row renormalization after every step, and trainable log t. Checkpoints
// (including step 0) re-evaluate the loss and certify exactly.
TrainTrace train(const TrainConfig& config);

// Rows of U and V become the dense query/document vectors of a pair.
EmbeddingPair embedding_from_rows(const RelevanceMatrix& A,
                                  const Eigen::MatrixXd& U,
                                  const Eigen::MatrixXd& V);

struct SweepCell {
  int n = 0;
  int k = 0;
  int d = 0;
  LossKind loss = LossKind::Sigmoid;
  std::uint64_t seed = 0;
  double max_margin = 0.0;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<int> dims;
  std::vector<double> best_margin_by_dim;  // max over seeds
  int min_positive_dim = -1;               // -1 when no dim reaches > 0
};

struct SweepOptions {
  double base_lr = 0.03;
  double t0 = 10.0;
  std::int64_t checkpoint_every = 100;
  int jobs = 1;
};

// Margin positivity uses threshold 1e-12 to keep exact zeros out.
SweepResult sweep_min_dim(int n, int k, LossKind loss,
                          const std::vector<int>& d_range, std::int64_t steps,
                          const std::vector<std::uint64_t>& seeds,
                          const SweepOptions& opts = {});

// Sigmoid loss at inverse temperature T and bias T tau, evaluated fully in
// log space against the sandwich -T m* - ln 2 <= ln L <= -T m* + ln(Nn).
// tau and m* come from the exact certificate (m* = best_tau_margin > 0).
struct RateCheck {
  double best_tau = 0.0;
  double margin = 0.0;  // m*
  struct Row {
    double T = 0.0;
    double log_loss = 0.0;
    double normalized = 0.0;  // (1/T) ln L
    double lower = 0.0;
    double upper = 0.0;
    bool within = false;
  };
  std::vector<Row> rows;
};
RateCheck sigmoid_rate_check(const EmbeddingPair& E,
                             const std::vector<double>& T_values,
                             int jobs = 1);

// InfoNCE loss against the divergence witness: the row with the largest
// spread between two positive similarities gives L(T) >= ln(1 + e^{T gap}).
struct DivergenceCheck {
  std::int64_t witness_row = -1;
  double gap = 0.0;
  struct Row {
    double T = 0.0;
    double loss = 0.0;
    double lower_bound = 0.0;
    bool exceeds = false;
  };
  std::vector<Row> rows;
  bool strictly_increasing = false;
};
DivergenceCheck infonce_divergence_check(const EmbeddingPair& E,
                                         const std::vector<double>& T_values,
                                         int jobs = 1);

// CSV emitters used by the CLI and the plot-data pipeline.
std::string trace_to_csv(const TrainTrace& trace);
std::string sweep_to_csv(const SweepResult& result);

}  // namespace marginlab
