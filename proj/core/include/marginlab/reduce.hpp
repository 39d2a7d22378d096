#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <nlohmann/json.hpp>
#include <utility>
#include <vector>

#include "marginlab/embedding.hpp"

namespace marginlab {

// Output of the min-norm-point solver over conv({W_i}).
struct MnpResult {
  Eigen::VectorXd direction;        // x/||x||; a fixed unit vector if x = 0
  double certified = 0.0;           // min_i <direction, W_i>, always sound
  double norm_at_solution = 0.0;    // ||x||
  Eigen::VectorXd weights;          // simplex weights with x = W * weights
  std::int64_t iterations = 0;
  double gap = 0.0;                 // final ||x||^2 - min_i <W_i, x>
};

// Frank-Wolfe with away steps and exact line search on f(x) = ||x||^2 over
// the convex hull of the columns of `points`. Stops when the duality gap
// drops to tol or after max_iter iterations (default 100 * #points). The
// certificate min_i <U, W_i> is a true margin lower bound at any accuracy.
MnpResult min_norm_point(const Eigen::MatrixXd& points, double tol = 1e-10,
                         std::int64_t max_iter = -1);

// Query generator that solves a min-norm problem over the signed document
// vectors of each row: +V_i on the support, -V_i off it.
EmbeddingPair::QueryGenerator make_mnp_generator(
    std::shared_ptr<const Eigen::MatrixXd> docs, double tol = 1e-10);

// Maurey sample count ceil(128 / (margin^2 eps^2)).
std::int64_t theory_T(double margin, double eps);
// Dimension recipe ceil(32 T ln(2n) / (eps/2)^2); an upper-bound recipe,
// far above anything usable at desk scale.
std::int64_t theory_dim(std::int64_t n, double margin, double eps);

// Seeded Gaussian projection: entries i.i.d. N(0, 1/d_out), applied to the
// columns of X.
Eigen::MatrixXd jl_project(const Eigen::MatrixXd& X, int d_out,
                           std::uint64_t seed);

// One Maurey draw: T indices i.i.d. from `weights`, returning the empirical
// average of the corresponding columns and its distance to points*weights.
std::pair<Eigen::VectorXd, double> maurey_sample(const Eigen::MatrixXd& points,
                                                 const Eigen::VectorXd& weights,
                                                 std::int64_t T,
                                                 std::uint64_t seed);

// Redraws until the distance is at most 1/sqrt(T). E[distance^2] <= 1/T, so
// by Markov each attempt succeeds with probability > 0; the retry cap only
// guards against misuse.
Eigen::VectorXd maurey_sample_retry(const Eigen::MatrixXd& points,
                                    const Eigen::VectorXd& weights,
                                    std::int64_t T, std::uint64_t seed,
                                    int max_retries = 64);

struct ReduceParams {
  double eps = 0.5;        // accuracy target: keep (1 - eps) of the margin
  std::int64_t T = -1;     // Maurey count; -1 = theory_T(margin, eps)
  int d_out = -1;          // output dimension; -1 = theory_dim(n, margin, eps)
  std::uint64_t seed = 0;
  int max_retries = 5;     // fresh JL seeds before settling for best attempt
  double mnp_tol = 1e-10;
  int jobs = 1;
};

struct ReduceReport {
  double input_margin = 0.0;     // exact bias-0 certificate of the input
  double target_margin = 0.0;    // (1 - eps) * input_margin
  double certified_margin = 0.0; // exact certificate of the returned output
  double eps = 0.0;
  std::int64_t T = 0;
  int d_out = 0;
  bool identity_shortcut = false;  // d_out == input dimension: no projection
  bool below_target = false;
  std::uint64_t seed = 0;          // base seed
  std::uint64_t seed_used = 0;     // JL seed of the returned attempt
  int attempts = 0;
  std::vector<double> attempt_margins;

  nlohmann::json to_json() const;
};

// JL-projects and renormalizes the documents, then recovers each query by
// min_norm_point over the row's signed documents. The output margin is
// recertified exactly; attempts below (1 - eps) * input margin retry with a
// fresh seed, and the best attempt is returned flagged below_target if none
// reaches it.
std::pair<EmbeddingPair, ReduceReport> reduce_embedding(
    const EmbeddingPair& E, const ReduceParams& params);

}  // namespace marginlab
