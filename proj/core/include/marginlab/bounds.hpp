#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "marginlab/embedding.hpp"
#include "marginlab/relevance.hpp"

namespace marginlab {

struct BoundReport {
  std::string name;
  nlohmann::json inputs;
  double value = 0.0;
  std::string direction;  // "upper-on-margin" or "lower-on-dimension"
  std::string notes;

  nlohmann::json to_json() const;
};

// Largest singular value, by power iteration on the Gram matrix of the
// smaller side, to the given relative tolerance.
double operator_norm(const Eigen::MatrixXd& M, double rel_tol = 1e-10);

// ||J||_op * sqrt(N n) for a dual witness J that is sign-compatible with A
// (J_ji >= 0 on relevant pairs, <= 0 elsewhere) and normalized to
// sum |J_ji| = 1. Upper bound on the best achievable bias-free margin.
BoundReport spectral_bound(const RelevanceMatrix& A, const Eigen::MatrixXd& J);

// The two closed-form witnesses. The S_{n,k} one uses
// y = 1/2 - (1/2)(n-2k)/(n-2k+2 sqrt((n-1)k(n-k))) with entries y/(Nk) on
// relevant pairs and -(1-y)/(N(n-k)) elsewhere; needs k < n. The identity
// one is I/(3n-4) - 2 11^T/(n(3n-4)), giving bound n/(3n-4); needs n >= 2.
Eigen::MatrixXd snk_spectral_J(int n, int k);
Eigen::MatrixXd identity_spectral_J(int n);

// ln binom(n,k) / ln(1 + 1/m): dimension lower bound for margin m.
BoundReport weller_dim_bound(int n, int k, double m);

// C k ln(n/k) / ln(1 + 2/(m sqrt(k))): dimension lower bound up to the
// unspecified universal constant C. Requires n >= 3k.
BoundReport packing_dim_bound(int n, int k, double m, double C);

struct DisjointFamily {
  std::vector<std::vector<int>> sets;  // s-subsets, pairwise |T cap T'| < s/2
  std::int64_t target = 0;             // ceil((n/(4s))^{s/2})
  bool complete = false;               // reached target within the budget
};

// Greedy randomized family of s-subsets of [0, n) with pairwise
// intersections below s/2. The intersection property always holds; only
// the size target can fall short (complete = false).
DisjointFamily disjoint_family(int n, int s, std::uint64_t seed,
                               std::int64_t max_attempts = 100000);

struct PackingAudit {
  int s = 0;
  std::vector<std::vector<int>> family;
  std::vector<double> y_norms;
  double min_pairwise_distance = 0.0;  // over compared pairs
  double target_separation = 0.0;      // m * s
  double family_size_target = 0.0;     // (n/(4s))^{s/2}
  bool family_complete = false;
  std::int64_t pairs_compared = 0;
  std::int64_t norm_violations = 0;
  std::int64_t separation_violations = 0;

  nlohmann::json to_json() const;
};

// Reconstructs the packing proof objects: for each family set T, the
// sign pattern minimizing ||sum_i sigma_i V_i|| over all 2^s choices
// (exhaustive; s <= 20), then checks ||y_T|| <= sqrt(s) + 1e-9 and, for
// pairs whose difference vector is k-sparse, ||y_T - y_T'|| >= m s - 1e-9.
// Any violation falsifies the certified margin. s = -1 picks
// max(1, floor(k/8)).
PackingAudit packing_audit(const EmbeddingPair& E, double margin, int s = -1,
                           std::uint64_t seed = 0,
                           std::int64_t max_attempts = 100000);

// Gamma(r/2) / (Gamma(s/2) Gamma((r-s)/2)) * delta^{s/2}: tail bound for
// the squared norm of the first s coordinates of a uniform point on
// S^{r-1}. Requires 2 <= s <= r-2, delta in (0,1]. May exceed 1.
double beta_tail_bound(int s, int r, double delta);

// Monte Carlo estimate of the same tail probability.
double beta_tail_montecarlo(int s, int r, double delta, std::int64_t trials,
                            std::uint64_t seed);

// (Gamma(x)Gamma(y)/Gamma(x+y))^{1/y}, of order y/(x+y). Requires
// x, y >= 1/2.
double gamma_ratio(double x, double y);

}  // namespace marginlab
