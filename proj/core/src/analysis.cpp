#include "marginlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "marginlab/relevance.hpp"
#include "marginlab/rng.hpp"

namespace marginlab {

namespace {

std::vector<int> sorted_distinct_docs(std::vector<int> T, int n,
                                      const char* op) {
  if (T.empty()) throw std::invalid_argument(std::string(op) + ": empty T");
  std::sort(T.begin(), T.end());
  if (std::adjacent_find(T.begin(), T.end()) != T.end())
    throw std::invalid_argument(std::string(op) + ": repeated document in T");
  if (T.front() < 0 || T.back() >= n)
    throw std::invalid_argument(std::string(op) + ": document out of range");
  return T;
}

double certified_bias0(const EmbeddingPair& E, int jobs, const char* op) {
  CertifyOptions copts;
  copts.jobs = jobs;
  const double m = certify(E, copts).bias0_margin;
  if (!(m > 0.0))
    throw std::invalid_argument(std::string(op) +
                                ": needs a positive certified margin, got " +
                                std::to_string(m));
  if (!(m < 1.0))
    throw std::invalid_argument(std::string(op) + ": degenerate margin >= 1");
  return m;
}

void fill_sides(const EmbeddingPair& E, const Eigen::VectorXd& h,
                const std::vector<int>& T, SeparationWitness& w) {
  const Eigen::VectorXd scores = E.doc_vectors().transpose() * h;
  const int n = E.matrix().docs();
  w.inside_min = std::numeric_limits<double>::infinity();
  w.outside_max = -std::numeric_limits<double>::infinity();
  std::size_t p = 0;
  for (int i = 0; i < n; ++i) {
    if (p < T.size() && T[p] == i) {
      ++p;
      w.inside_min = std::min(w.inside_min, scores[i]);
    } else {
      w.outside_max = std::max(w.outside_max, scores[i]);
    }
  }
}

}  // namespace

nlohmann::json SeparationWitness::to_json() const {
  return nlohmann::json{
      {"target", target},       {"c", c},
      {"inside_min", inside_min}, {"outside_max", outside_max},
      {"valid", valid},         {"h", std::vector<double>(h.data(), h.data() + h.size())}};
}

SeparationWitness compositional_witness(const EmbeddingPair& E,
                                        std::vector<int> T,
                                        std::int64_t term_cap, int jobs) {
  const RelevanceMatrix& A = E.matrix();
  if (!A.is_snk())
    throw std::invalid_argument("compositional_witness: matrix must be Snk");
  const int n = A.docs();
  const int k = A.snk_k();
  T = sorted_distinct_docs(std::move(T), n, "compositional_witness");
  const int tt = static_cast<int>(T.size());
  const double m = certified_bias0(E, jobs, "compositional_witness");
  const double upper =
      std::min(k + 2.0 * k * m / (1.0 - m), static_cast<double>(n - 1));
  if (tt < k || static_cast<double>(tt) > upper + 1e-9)
    throw std::invalid_argument(
        "compositional_witness: |T| = " + std::to_string(tt) +
        " outside [k, min(k + 2km/(1-m), n-1)] = [" + std::to_string(k) +
        ", " + std::to_string(upper) + "]");
  if (binomial(tt, k) > term_cap)
    throw std::invalid_argument("compositional_witness: term cap exceeded");

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(E.dim());
  std::vector<int> pos(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) pos[static_cast<std::size_t>(i)] = i;
  std::vector<int> S(static_cast<std::size_t>(k));
  bool more = true;
  while (more) {
    for (int i = 0; i < k; ++i)
      S[static_cast<std::size_t>(i)] = T[static_cast<std::size_t>(pos[i])];
    sum += E.query_for_support(S);
    more = colex_next(pos, tt);
  }
  const double norm = sum.norm();
  if (!(norm > 0.0))
    throw std::runtime_error("compositional_witness: degenerate zero sum");

  SeparationWitness w;
  w.h = sum / norm;
  w.target = T;
  fill_sides(E, w.h, T, w);
  w.c = 0.5 * (w.inside_min + w.outside_max);
  w.valid = w.inside_min >= w.c && w.c >= w.outside_max;
  return w;
}

SeparationWitness downward_witness(const EmbeddingPair& E, std::vector<int> T,
                                   std::int64_t term_cap, int jobs) {
  const RelevanceMatrix& A = E.matrix();
  if (!A.is_snk())
    throw std::invalid_argument("downward_witness: matrix must be Snk");
  const int n = A.docs();
  const int k = A.snk_k();
  T = sorted_distinct_docs(std::move(T), n, "downward_witness");
  const int tt = static_cast<int>(T.size());
  const double m = certified_bias0(E, jobs, "downward_witness");
  const double lower =
      std::max(1.0, k - 2.0 * m * (n - k) / (1.0 - m));
  if (tt > k || static_cast<double>(tt) < lower - 1e-9)
    throw std::invalid_argument(
        "downward_witness: |T| = " + std::to_string(tt) +
        " outside [max{1, k - 2m(n-k)/(1-m)}, k] = [" +
        std::to_string(lower) + ", " + std::to_string(k) + "]");
  const std::int64_t terms = binomial(n - tt, k - tt);
  if (terms > term_cap)
    throw std::invalid_argument("downward_witness: term cap exceeded");

  std::vector<int> complement;
  complement.reserve(static_cast<std::size_t>(n - tt));
  {
    std::size_t p = 0;
    for (int i = 0; i < n; ++i) {
      if (p < T.size() && T[p] == i) {
        ++p;
        continue;
      }
      complement.push_back(i);
    }
  }

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(E.dim());
  const int extra = k - tt;
  if (extra == 0) {
    sum = E.query_for_support(T);
  } else {
    std::vector<int> pos(static_cast<std::size_t>(extra));
    for (int i = 0; i < extra; ++i) pos[static_cast<std::size_t>(i)] = i;
    std::vector<int> S;
    bool more = true;
    while (more) {
      S.clear();
      std::size_t p = 0;
      for (int i : pos) {
        const int doc = complement[static_cast<std::size_t>(i)];
        while (p < T.size() && T[p] < doc) S.push_back(T[p++]);
        S.push_back(doc);
      }
      while (p < T.size()) S.push_back(T[p++]);
      sum += E.query_for_support(S);
      more = colex_next(pos, n - tt);
    }
  }
  const double norm = sum.norm();
  if (!(norm > 0.0))
    throw std::runtime_error("downward_witness: degenerate zero sum");

  SeparationWitness w;
  w.h = sum / norm;
  w.target = T;
  // Every in-T document scores at least m per summand before normalization.
  w.c = m * static_cast<double>(terms) / norm;
  fill_sides(E, w.h, T, w);
  // |T| = k makes inside_min equal c in exact arithmetic; absorb rounding.
  constexpr double slop = 1e-9;
  w.valid = w.inside_min >= w.c - slop && w.c >= w.outside_max - slop;
  return w;
}

nlohmann::json RobustnessReport::to_json() const {
  return nlohmann::json{{"margin", margin},
                        {"tau", tau},
                        {"perturbation", perturbation},
                        {"trials", trials},
                        {"violations", violations},
                        {"expect_violation", expect_violation},
                        {"ok", ok}};
}

RobustnessReport robustness_check(const EmbeddingPair& E,
                                  double perturbation_norm,
                                  std::int64_t trials, std::uint64_t seed,
                                  bool expect_violation, int jobs) {
  if (!(perturbation_norm >= 0.0))
    throw std::invalid_argument("robustness_check: bad perturbation norm");
  CertifyOptions copts;
  copts.jobs = jobs;
  const MarginCertificate cert = certify(E, copts);
  if (!(cert.best_tau_margin > 0.0))
    throw std::invalid_argument(
        "robustness_check: needs a positive certified margin");
  if (!expect_violation && perturbation_norm >= cert.best_tau_margin)
    throw std::invalid_argument(
        "robustness_check: perturbation " + std::to_string(perturbation_norm) +
        " must stay below the margin " +
        std::to_string(cert.best_tau_margin));

  RobustnessReport rep;
  rep.margin = cert.best_tau_margin;
  rep.tau = cert.best_tau;
  rep.perturbation = perturbation_norm;
  rep.expect_violation = expect_violation;

  const Eigen::MatrixXd& V = E.doc_vectors();
  const int n = E.matrix().docs();
  const auto row_violated = [&](std::int64_t j, const Eigen::VectorXd& u) {
    const Eigen::VectorXd scores = V.transpose() * u;
    const std::vector<int> S = E.matrix().row_support(j);
    std::size_t p = 0;
    for (int i = 0; i < n; ++i) {
      const bool relevant = p < S.size() && S[p] == i;
      if (relevant) ++p;
      if (relevant ? !(scores[i] > rep.tau) : !(scores[i] < rep.tau))
        return true;
    }
    return false;
  };

  if (expect_violation) {
    // Push the tightest query straight at its witness document.
    const std::int64_t j = cert.min_positive_row;
    const Eigen::VectorXd u =
        E.query(j) - perturbation_norm * V.col(cert.min_positive_doc);
    rep.trials = 1;
    rep.violations = row_violated(j, u) ? 1 : 0;
    rep.ok = rep.violations >= 1;
    return rep;
  }

  if (trials < 1)
    throw std::invalid_argument("robustness_check: need trials >= 1");
  Rng rng(seed);
  const std::int64_t N = E.matrix().rows();
  rep.trials = trials;
  for (std::int64_t t = 0; t < trials; ++t) {
    const std::int64_t j =
        static_cast<std::int64_t>(rng.uniform_int(0, N - 1));
    const Eigen::VectorXd u =
        E.query(j) + perturbation_norm * rng.sphere_vector(E.dim());
    if (row_violated(j, u)) ++rep.violations;
  }
  rep.ok = rep.violations == 0;
  return rep;
}

nlohmann::json QuantizeReport::to_json() const {
  return nlohmann::json{{"margin_in", margin_in},
                        {"step", step},
                        {"max_vector_error", max_vector_error},
                        {"error_bound", error_bound},
                        {"margin_out", margin_out},
                        {"margin_target", margin_target},
                        {"codebook_exponent", codebook_exponent},
                        {"error_ok", error_ok},
                        {"margin_ok", margin_ok}};
}

std::pair<EmbeddingPair, QuantizeReport> quantize_check(
    const EmbeddingPair& E, double step, std::int64_t materialize_cap,
    int jobs) {
  const double m = certified_bias0(E, jobs, "quantize_check");
  const int d = E.dim();
  if (step <= 0.0) step = m / (8.0 * std::sqrt(static_cast<double>(d)));

  QuantizeReport rep;
  rep.margin_in = m;
  rep.step = step;
  rep.error_bound = m / 4.0;
  rep.margin_target = m / 2.0;
  rep.codebook_exponent = d * std::log2(1.0 + 8.0 / m);

  const EmbeddingPair dense = materialize_queries(E, materialize_cap);
  const auto quantize_columns = [&](const Eigen::MatrixXd& M) {
    Eigen::MatrixXd Q(M.rows(), M.cols());
    for (Eigen::Index c = 0; c < M.cols(); ++c) {
      Eigen::VectorXd q =
          (M.col(c) / step).array().round().matrix() * step;
      const double norm = q.norm();
      if (!(norm > 0.0))
        throw std::runtime_error("quantize_check: vector collapsed to zero");
      q /= norm;
      rep.max_vector_error =
          std::max(rep.max_vector_error, (q - M.col(c)).norm());
      Q.col(c) = q;
    }
    return Q;
  };

  Eigen::MatrixXd Vq = quantize_columns(dense.doc_vectors());
  Eigen::MatrixXd Uq = quantize_columns(dense.dense_queries());
  EmbeddingPair out(E.matrix(), std::move(Vq));
  out.set_dense_queries(std::move(Uq));
  out.meta = nlohmann::json{{"method", "quantize"},
                            {"step", step},
                            {"margin_in", m}};

  CertifyOptions copts;
  copts.jobs = jobs;
  rep.margin_out = certify(out, copts).bias0_margin;
  rep.error_ok = rep.max_vector_error <= rep.error_bound;
  rep.margin_ok = rep.margin_out >= rep.margin_target - 1e-9;
  return {std::move(out), rep};
}

}  // namespace marginlab
