#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "marginlab/analysis.hpp"
#include "marginlab/constructions.hpp"
#include "marginlab/embedding.hpp"
#include "marginlab/relevance.hpp"

using namespace marginlab;

namespace {

// Recompute both sides of a separation from scratch.
void check_sides(const EmbeddingPair& E, const SeparationWitness& w) {
  CHECK(w.h.size() == E.dim());
  CHECK(std::abs(w.h.norm() - 1.0) <= 1e-9);
  double inside = std::numeric_limits<double>::infinity();
  double outside = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < E.matrix().docs(); ++i) {
    const double s = w.h.dot(E.doc_vectors().col(i));
    if (std::find(w.target.begin(), w.target.end(), i) != w.target.end())
      inside = std::min(inside, s);
    else
      outside = std::max(outside, s);
  }
  CHECK(w.inside_min == doctest::Approx(inside).epsilon(1e-12));
  CHECK(w.outside_max == doctest::Approx(outside).epsilon(1e-12));
  CHECK(w.valid ==
        (w.inside_min >= w.c - 1e-9 && w.c >= w.outside_max - 1e-9));
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("compositional witness separates admissible supersets") {
  // k = 4 at margin 1/8 admits |T| in {4, 5}.
  const EmbeddingPair E = simplex_baseline(RelevanceMatrix::snk(12, 4));
  for (const auto& T : std::vector<std::vector<int>>{
           {0, 1, 2, 3}, {0, 1, 2, 3, 4}, {1, 3, 5, 7}, {2, 4, 6, 8, 10}}) {
    const SeparationWitness w = compositional_witness(E, T);
    CHECK(w.valid);
    CHECK(w.target == T);
    CHECK(w.inside_min >= w.c);
    CHECK(w.c >= w.outside_max);
    check_sides(E, w);
    const nlohmann::json j = w.to_json();
    CHECK(j.at("valid").get<bool>());
    CHECK(j.at("target").get<std::vector<int>>() == T);
    CHECK(j.at("h").get<std::vector<double>>().size() ==
          static_cast<std::size_t>(E.dim()));
  }
  CHECK_THROWS_WITH_AS(compositional_witness(E, {0, 1, 2, 3, 4, 5}),
                       doctest::Contains("outside"), std::invalid_argument);
  CHECK_THROWS_AS(compositional_witness(E, {0, 1, 2}), std::invalid_argument);
}

TEST_CASE("compositional witness validates T itself") {
  const EmbeddingPair E = simplex_baseline(RelevanceMatrix::snk(12, 4));
  CHECK_THROWS_AS(compositional_witness(E, {}), std::invalid_argument);
  CHECK_THROWS_AS(compositional_witness(E, {0, 1, 2, 2}),
                  std::invalid_argument);
  CHECK_THROWS_AS(compositional_witness(E, {0, 1, 2, 12}),
                  std::invalid_argument);
  // Only subset matrices carry the combinatorial structure.
  const RelevanceMatrix X = RelevanceMatrix::explicit_rows(3, {{0}, {1, 2}});
  EmbeddingPair P(X, Eigen::MatrixXd::Identity(3, 3));
  Eigen::MatrixXd q(3, 2);
  q << 1, 0, 0, std::sqrt(0.5), 0, std::sqrt(0.5);
  P.set_dense_queries(q);
  CHECK_THROWS_AS(compositional_witness(P, {0}), std::invalid_argument);
}

TEST_CASE("downward witness separates admissible subsets") {
  const RelevanceMatrix A = RelevanceMatrix::snk(10, 2);
  const EmbeddingPair E = simplex_baseline(A);
  const double m = certify(E).bias0_margin;
  for (const auto& T :
       std::vector<std::vector<int>>{{3}, {0}, {2, 7}, {8, 9}}) {
    const SeparationWitness w = downward_witness(E, T);
    CHECK(w.valid);
    check_sides(E, w);

    // Independent reconstruction of h and the threshold.
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(E.dim());
    std::int64_t supersets = 0;
    A.for_each_row([&](std::int64_t j, const std::vector<int>& S) {
      if (std::includes(S.begin(), S.end(), T.begin(), T.end())) {
        sum += E.query(j);
        ++supersets;
      }
    });
    const std::int64_t expect =
        binomial(10 - static_cast<int>(T.size()),
                 2 - static_cast<int>(T.size()));
    CHECK(supersets == expect);
    CHECK((w.h - sum / sum.norm()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(w.c ==
          doctest::Approx(m * static_cast<double>(expect) / sum.norm())
              .epsilon(1e-12));
  }
  CHECK_THROWS_WITH_AS(downward_witness(E, {0, 1, 2}),
                       doctest::Contains("outside"), std::invalid_argument);
  CHECK_THROWS_AS(downward_witness(E, {}), std::invalid_argument);
  CHECK_THROWS_AS(downward_witness(E, {0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(downward_witness(E, {10}), std::invalid_argument);
}

TEST_CASE("robustness: perturbations below the margin never flip a pair") {
  const EmbeddingPair E = simplex_baseline(RelevanceMatrix::snk(8, 2));
  const double m = certify(E).best_tau_margin;
  const RobustnessReport rep = robustness_check(E, 0.99 * m, 100, 1);
  CHECK(rep.ok);
  CHECK(rep.violations == 0);
  CHECK(rep.trials == 100);
  CHECK(rep.margin == doctest::Approx(0.22855339059327376).epsilon(1e-12));
  CHECK_FALSE(rep.expect_violation);
  const nlohmann::json j = rep.to_json();
  CHECK(j.at("ok").get<bool>());
  CHECK(j.at("violations").get<std::int64_t>() == 0);

  // At or above the margin the clean check refuses to run...
  CHECK_THROWS_AS(robustness_check(E, m, 100, 1), std::invalid_argument);
  CHECK_THROWS_AS(robustness_check(E, -0.1, 100, 1), std::invalid_argument);
  CHECK_THROWS_AS(robustness_check(E, 0.1, 0, 1), std::invalid_argument);

  // ...while expect-violation mode drives the witness across the line.
  const RobustnessReport bad = robustness_check(E, m + 0.05, 1, 1, true);
  CHECK(bad.expect_violation);
  CHECK(bad.violations >= 1);
  CHECK(bad.ok);
}

TEST_CASE("robustness needs a separable embedding") {
  const RelevanceMatrix one = RelevanceMatrix::explicit_rows(2, {{0}});
  EmbeddingPair flat(one, Eigen::MatrixXd::Identity(2, 2));
  Eigen::MatrixXd q(2, 1);
  q << std::sqrt(0.5), std::sqrt(0.5);
  flat.set_dense_queries(q);
  CHECK_THROWS_AS(robustness_check(flat, 0.01, 10, 0), std::invalid_argument);
}

TEST_CASE("quantization halves the margin at worst") {
  const EmbeddingPair E = simplex_baseline(RelevanceMatrix::snk(10, 2));
  const auto [Q, rep] = quantize_check(E);
  CHECK(rep.margin_in == doctest::Approx(0.10355339059327373).epsilon(1e-12));
  CHECK(rep.step ==
        doctest::Approx(rep.margin_in / (8 * std::sqrt(11.0)))
            .epsilon(1e-15));
  CHECK(rep.error_bound == doctest::Approx(rep.margin_in / 4).epsilon(1e-15));
  CHECK(rep.max_vector_error <= rep.error_bound);
  CHECK(rep.error_ok);
  CHECK(rep.margin_target == doctest::Approx(rep.margin_in / 2).epsilon(1e-15));
  CHECK(rep.margin_out >= rep.margin_in / 2 - 1e-9);
  CHECK(rep.margin_ok);
  CHECK(rep.codebook_exponent ==
        doctest::Approx(11 * std::log2(1.0 + 8.0 / rep.margin_in))
            .epsilon(1e-12));
  // The reported output margin is the exact certificate of the output.
  CHECK(certify(Q).bias0_margin ==
        doctest::Approx(rep.margin_out).epsilon(1e-12));
  CHECK(Q.meta.at("method").get<std::string>() == "quantize");

  const nlohmann::json j = rep.to_json();
  CHECK(j.at("error_ok").get<bool>());
  CHECK(j.at("margin_ok").get<bool>());

  // An explicit step is taken as given.
  const auto [Q2, rep2] = quantize_check(E, 0.01);
  CHECK(rep2.step == 0.01);
  CHECK(rep2.margin_ok);  // 0.01 is far below the default-safe threshold
}

TEST_CASE("quantization requires a positive input margin") {
  const RelevanceMatrix one = RelevanceMatrix::explicit_rows(2, {{0}});
  EmbeddingPair flat(one, Eigen::MatrixXd::Identity(2, 2));
  Eigen::MatrixXd q(2, 1);
  q << std::sqrt(0.5), std::sqrt(0.5);
  flat.set_dense_queries(q);
  CHECK_THROWS_AS(quantize_check(flat), std::invalid_argument);
}

}  // TEST_SUITE
