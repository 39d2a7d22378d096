#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <utility>
#include <vector>

#include "marginlab/embedding.hpp"

namespace marginlab {

// Linear separation h, c of a document set: valid iff
// min_{i in T} <h, V_i> >= c >= max_{i not in T} <h, V_i>.
struct SeparationWitness {
  Eigen::VectorXd h;  // unit vector
  double c = 0.0;
  double inside_min = 0.0;
  double outside_max = 0.0;
  std::vector<int> target;
  bool valid = false;

  nlohmann::json to_json() const;
};

// h_T = normalized sum of U_S over all k-subsets S of T, threshold at the
// midpoint of the two sides (both sides recorded). The certified bias-0
// margin m admits k <= |T| <= min(k + 2km/(1-m), n-1).
SeparationWitness compositional_witness(const EmbeddingPair& E,
                                        std::vector<int> T,
                                        std::int64_t term_cap = 1000000,
                                        int jobs = 1);

// h_T = normalized sum of U_S over k-supersets S of T, threshold
// m binom(n-|T|, k-|T|) / ||sum||. Admissible range
// max{1, k - 2m(n-k)/(1-m)} <= |T| <= k.
SeparationWitness downward_witness(const EmbeddingPair& E, std::vector<int> T,
                                   std::int64_t term_cap = 1000000,
                                   int jobs = 1);

struct RobustnessReport {
  double margin = 0.0;  // certified best-tau margin
  double tau = 0.0;
  double perturbation = 0.0;
  std::int64_t trials = 0;
  std::int64_t violations = 0;
  bool expect_violation = false;
  bool ok = false;  // zero violations normally; >= 1 in expect mode

  nlohmann::json to_json() const;
};

// Perturbs random query vectors by random directions of the given norm (no
// renormalization) and rechecks that the perturbed row's scores stay
// strictly on the correct side of tau. Requires perturbation_norm < margin.
// Expect-violation mode instead pushes the minimum-slack witness query along
// minus its witness document and requires the check to break, demonstrating
// the bound is not vacuous; perturbation_norm >= margin is allowed there.
RobustnessReport robustness_check(const EmbeddingPair& E,
                                  double perturbation_norm,
                                  std::int64_t trials, std::uint64_t seed,
                                  bool expect_violation = false,
                                  int jobs = 1);

struct QuantizeReport {
  double margin_in = 0.0;  // certified bias-0 margin before quantization
  double step = 0.0;       // quantization step delta_q
  double max_vector_error = 0.0;
  double error_bound = 0.0;    // margin_in / 4
  double margin_out = 0.0;     // certified bias-0 margin after
  double margin_target = 0.0;  // margin_in / 2
  double codebook_exponent = 0.0;  // d log2(1 + 8/margin_in)
  bool error_ok = false;
  bool margin_ok = false;

  nlohmann::json to_json() const;
};

// Rounds every coordinate of every vector to a multiple of the step, then
// renormalizes. The default step margin/(8 sqrt(d)) keeps each vector
// within margin/4 of the original, which forces the quantized margin to
// stay above margin/2. step <= 0 selects the default.
std::pair<EmbeddingPair, QuantizeReport> quantize_check(
    const EmbeddingPair& E, double step = -1.0,
    std::int64_t materialize_cap = 1000000, int jobs = 1);

}  // namespace marginlab
