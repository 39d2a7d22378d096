// Acceptance gate: one line per criterion, nonzero exit if any fail.
#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "marginlab/analysis.hpp"
#include "marginlab/errors.hpp"
#include "marginlab/bounds.hpp"
#include "marginlab/constructions.hpp"
#include "marginlab/embedding.hpp"
#include "marginlab/reduce.hpp"
#include "marginlab/relevance.hpp"
#include "marginlab/train.hpp"

using namespace marginlab;

namespace {

struct SnkEmb {
  int n = 0, k = 0, dim = 0;
  double best_tau_margin = 0.0;
};

struct Ctx {
  std::vector<SnkEmb> embs;  // everything criteria 1-4 certify over S_{n,k}
};

using Fails = std::vector<std::string>;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void require(Fails& f, bool ok, const std::string& what) {
  if (!ok) f.push_back(what);
}

// ---- criterion 1: simplex closed-form bias-0 margin ------------------------

Fails criterion1(Ctx& ctx) {
  Fails f;
  for (int k : {4, 9, 100}) {
    const int n = k + 2;
    const EmbeddingPair E = simplex_baseline(RelevanceMatrix::snk(n, k));
    const MarginCertificate c = certify(E);
    const double lift2 = 1.0 / std::sqrt(4.0 * k);
    const double closed =
        std::min((1.0 - lift2) / std::sqrt(static_cast<double>(k)) - lift2,
                 lift2);
    require(f, std::abs(c.bias0_margin - closed) <= 1e-12,
            "k=" + std::to_string(k) + ": bias0 " + fmt(c.bias0_margin) +
                " != closed form " + fmt(closed));
    if (k == 100)
      require(f, std::abs(c.bias0_margin - 0.05) <= 0.005 + 1e-12,
              "k=100: bias0 " + fmt(c.bias0_margin) +
                  " not within 10% of 1/(2 sqrt k) = 0.05");
    ctx.embs.push_back({n, k, E.dim(), c.best_tau_margin});
  }
  return f;
}

// ---- criterion 2: vandermonde floor and dimension --------------------------

Fails criterion2(Ctx& ctx) {
  Fails f;
  for (int k : {1, 2}) {
    for (int n = std::max(2, k); n <= 10; ++n) {
      const EmbeddingPair E = vandermonde(RelevanceMatrix::snk(n, k));
      const MarginCertificate c = certify(E);
      const double floor = std::pow(2.0 * k, -0.25) * std::pow(2.0 * n, -2.0 * k);
      require(f, c.bias0_margin >= floor,
              "(" + std::to_string(n) + "," + std::to_string(k) + "): bias0 " +
                  fmt(c.bias0_margin) + " below floor " + fmt(floor));
      require(f, E.dim() == 2 * k + 1,
              "(" + std::to_string(n) + "," + std::to_string(k) + "): dim " +
                  std::to_string(E.dim()) + " != " + std::to_string(2 * k + 1));
      ctx.embs.push_back({n, k, E.dim(), c.best_tau_margin});
    }
  }
  return f;
}

// ---- criterion 3: khatri-rao score values over 50 seeds ---------------------

Fails criterion3(Ctx& ctx) {
  Fails f;
  const RelevanceMatrix A = RelevanceMatrix::snk(12, 2);
  const double delta = 1.0 / 1320.0;
  const double x = delta / (2.0 * (std::sqrt(2.0) + 1.0) - delta);
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::optional<EmbeddingPair> built;
    try {
      auto [emb, params] = khatri_rao(A, 11, seed, 20);
      built.emplace(std::move(emb));
    } catch (const construction_error&) {
      continue;
    }
    const EmbeddingPair& E = *built;
    ++successes;
    double worst_pos = 0.0, worst_neg = 0.0;
    A.for_each_row([&](std::int64_t j, const std::vector<int>& S) {
      const Eigen::VectorXd u = E.query(j);
      std::size_t p = 0;
      for (int i = 0; i < 12; ++i) {
        const double s = u.dot(E.doc_vectors().col(i));
        const bool rel = p < S.size() && S[p] == i;
        if (rel) {
          ++p;
          worst_pos = std::max(worst_pos, std::abs(s - x));
        } else {
          worst_neg = std::max(worst_neg, s - (-x));
        }
      }
    });
    require(f, worst_pos < 1e-10,
            "seed " + std::to_string(seed) + ": positive off by " +
                fmt(worst_pos));
    require(f, worst_neg <= 1e-10,
            "seed " + std::to_string(seed) + ": negative above -x by " +
                fmt(worst_neg));
    ctx.embs.push_back({12, 2, E.dim(), certify(E).best_tau_margin});
  }
  require(f, successes >= 49,
          "only " + std::to_string(successes) + "/50 seeds built");
  return f;
}

// ---- criterion 4: JL + min-norm-point reduction ------------------------------

Fails criterion4(Ctx& ctx) {
  Fails f;
  const EmbeddingPair base = simplex_baseline(RelevanceMatrix::snk(30, 2));
  const double m = certify(base).bias0_margin;
  ctx.embs.push_back({30, 2, base.dim(), certify(base).best_tau_margin});

  int hits = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ReduceParams p;
    p.d_out = 20;
    p.eps = 0.5;
    p.seed = seed;
    const auto [R, rep] = reduce_embedding(base, p);
    if (!rep.below_target && rep.certified_margin >= 0.5 * m) {
      ++hits;
      ctx.embs.push_back({30, 2, R.dim(), certify(R).best_tau_margin});
    }
  }
  require(f, hits >= 11,
          "only " + std::to_string(hits) + "/20 seeds reached 0.5 m");

  ReduceParams noop;
  noop.d_out = base.dim();
  noop.seed = 0;
  const auto [R, rep] = reduce_embedding(base, noop);
  require(f, rep.identity_shortcut, "no-op reduction took the general path");
  require(f, std::abs(rep.certified_margin - m) <= 1e-9,
          "no-op margin " + fmt(rep.certified_margin) + " drifted from " +
              fmt(m));
  return f;
}

// ---- criterion 5: min-norm-point vs 1e-3 simplex grid -----------------------

Fails criterion5(Ctx&) {
  Fails f;
  std::mt19937_64 gen(2026);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud;
  const int steps = 1000;
  for (int inst = 0; inst < 100; ++inst) {
    const int dim = 1 + static_cast<int>(gen() % 3);
    const int pts = 1 + static_cast<int>(gen() % 3);
    Eigen::VectorXd center(dim);
    for (int c = 0; c < dim; ++c) center[c] = nd(gen);
    if (center.norm() == 0.0) center[0] = 1.0;
    center = center.normalized() * (0.5 + ud(gen));
    Eigen::MatrixXd W(dim, pts);
    for (int i = 0; i < pts; ++i) {
      Eigen::VectorXd off(dim);
      for (int c = 0; c < dim; ++c) off[c] = nd(gen);
      if (off.norm() > 0) off = off.normalized() * (0.3 * ud(gen));
      W.col(i) = center + off;
    }

    const Eigen::MatrixXd G = W.transpose() * W;
    double grid = std::numeric_limits<double>::infinity();
    if (pts == 1) {
      grid = W.col(0).norm();
    } else if (pts == 2) {
      for (int a = 0; a <= steps; ++a) {
        const double l0 = static_cast<double>(a) / steps, l1 = 1.0 - l0;
        grid = std::min(grid,
                        l0 * l0 * G(0, 0) + l1 * l1 * G(1, 1) +
                            2 * l0 * l1 * G(0, 1));
      }
      grid = std::sqrt(std::max(0.0, grid));
    } else {
      for (int a = 0; a <= steps; ++a) {
        for (int b = 0; b <= steps - a; ++b) {
          const double l0 = static_cast<double>(a) / steps;
          const double l1 = static_cast<double>(b) / steps;
          const double l2 = 1.0 - l0 - l1;
          const double q = l0 * l0 * G(0, 0) + l1 * l1 * G(1, 1) +
                           l2 * l2 * G(2, 2) + 2 * l0 * l1 * G(0, 1) +
                           2 * l0 * l2 * G(0, 2) + 2 * l1 * l2 * G(1, 2);
          grid = std::min(grid, q);
        }
      }
      grid = std::sqrt(std::max(0.0, grid));
    }

    const MnpResult r = min_norm_point(W);
    require(f, std::abs(r.norm_at_solution - grid) <= 2e-3,
            "instance " + std::to_string(inst) + ": norm " +
                fmt(r.norm_at_solution) + " vs grid " + fmt(grid));
    require(f, r.certified >= grid - 2e-3,
            "instance " + std::to_string(inst) + ": certificate " +
                fmt(r.certified) + " below grid - 2e-3 (" + fmt(grid) + ")");
  }
  return f;
}

// ---- criterion 6: bound consistency over everything built so far ------------

Fails criterion6(Ctx& ctx) {
  Fails f;
  require(f, !ctx.embs.empty(), "no embeddings were stashed by criteria 1-4");
  // Spectral evaluations repeat across identical (n,k); cache them.
  std::vector<std::pair<std::pair<int, int>, double>> spectral_cache;
  const auto spectral_for = [&](int n, int k) {
    for (const auto& [key, v] : spectral_cache)
      if (key == std::make_pair(n, k)) return v;
    const double v =
        spectral_bound(RelevanceMatrix::snk(n, k), snk_spectral_J(n, k)).value;
    spectral_cache.push_back({{n, k}, v});
    return v;
  };
  for (const SnkEmb& e : ctx.embs) {
    const std::string tag =
        "(" + std::to_string(e.n) + "," + std::to_string(e.k) + ",dim " +
        std::to_string(e.dim) + ")";
    if (e.k < e.n) {  // the closed-form dual witness needs k < n
      const double s = spectral_for(e.n, e.k);
      require(f, e.best_tau_margin <= s + 1e-6,
              tag + ": best-tau margin " + fmt(e.best_tau_margin) +
                  " exceeds spectral bound " + fmt(s));
    }
    const double w = weller_dim_bound(e.n, e.k, e.best_tau_margin).value;
    require(f, static_cast<double>(e.dim) >= w - 1e-6,
            tag + ": dim below counting bound " + fmt(w));
  }
  const RelevanceMatrix I4 =
      RelevanceMatrix::explicit_rows(4, {{0}, {1}, {2}, {3}});
  const double idv = spectral_bound(I4, identity_spectral_J(4)).value;
  require(f, idv == 0.5, "identity witness value " + fmt(idv) + " != 0.5");
  return f;
}

// ---- criterion 7: packing audit and disjoint families -----------------------

Fails criterion7(Ctx&) {
  Fails f;
  const EmbeddingPair E = simplex_baseline(RelevanceMatrix::snk(32, 4));
  const double m = certify(E).bias0_margin;
  for (int s : {1, 2}) {
    const PackingAudit audit = packing_audit(E, m, s, 0);
    require(f, audit.norm_violations == 0,
            "s=" + std::to_string(s) + ": " +
                std::to_string(audit.norm_violations) + " norm violations");
    require(f, audit.separation_violations == 0,
            "s=" + std::to_string(s) + ": " +
                std::to_string(audit.separation_violations) +
                " separation violations");
    require(f, !audit.family.empty(), "s=" + std::to_string(s) + ": empty family");
  }
  for (const auto& [n, s, seed] :
       std::vector<std::tuple<int, int, std::uint64_t>>{
           {32, 4, 0}, {32, 4, 1}, {16, 2, 0}, {40, 5, 3}}) {
    const DisjointFamily fam = disjoint_family(n, s, seed);
    for (std::size_t a = 0; a < fam.sets.size(); ++a)
      for (std::size_t b = a + 1; b < fam.sets.size(); ++b) {
        std::vector<int> common;
        std::set_intersection(fam.sets[a].begin(), fam.sets[a].end(),
                              fam.sets[b].begin(), fam.sets[b].end(),
                              std::back_inserter(common));
        require(f, 2 * static_cast<int>(common.size()) < s,
                "family (" + std::to_string(n) + "," + std::to_string(s) +
                    "): intersection " + std::to_string(common.size()));
      }
  }
  return f;
}

// ---- criterion 8: beta tail bound vs Monte Carlo ----------------------------

Fails criterion8(Ctx&) {
  Fails f;
  const std::int64_t trials = 100000;
  for (const auto& [s, r, delta] : std::vector<std::tuple<int, int, double>>{
           {2, 6, 0.25}, {2, 8, 0.1}, {4, 12, 0.3}}) {
    const double mc = beta_tail_montecarlo(s, r, delta, trials, 2026);
    const double bound = beta_tail_bound(s, r, delta);
    const double se = std::sqrt(std::max(mc * (1.0 - mc), 1e-12) /
                                static_cast<double>(trials));
    require(f, mc <= bound + 3 * se,
            "(" + std::to_string(s) + "," + std::to_string(r) + "," +
                fmt(delta) + "): mc " + fmt(mc) + " above bound " + fmt(bound) +
                " + 3se");
  }
  const double mc = beta_tail_montecarlo(2, 4, 0.5, trials, 2026);
  const double se = std::sqrt(0.25 / static_cast<double>(trials));
  require(f, std::abs(mc - 0.5) <= 3 * se,
          "(2,4,0.5): mc " + fmt(mc) + " not within 3se of exactly 0.5");
  require(f, std::abs(beta_tail_bound(2, 4, 0.5) - 0.5) <= 1e-12,
          "(2,4,0.5): bound is not 0.5");
  return f;
}

// ---- criterion 9: analytic gradients vs central differences -----------------

Fails criterion9(Ctx&) {
  Fails f;
  std::mt19937_64 gen(9);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud;
  const double h = 1e-5;
  const auto rel = [](double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
  };
  for (int inst = 0; inst < 20; ++inst) {
    const int n = 3 + static_cast<int>(gen() % 4);
    const int d = 2 + static_cast<int>(gen() % 3);
    const std::size_t want = 2 + gen() % 3;
    std::set<std::uint32_t> masks;
    while (masks.size() < want)
      masks.insert(1 + static_cast<std::uint32_t>(gen() % ((1u << n) - 1)));
    std::vector<std::vector<int>> rows;
    for (std::uint32_t mask : masks) {
      std::vector<int> row;
      for (int i = 0; i < n; ++i)
        if (mask >> i & 1u) row.push_back(i);
      rows.push_back(std::move(row));
    }
    const RelevanceMatrix A = RelevanceMatrix::explicit_rows(n, rows);
    Eigen::MatrixXd U(static_cast<std::int64_t>(rows.size()), d), V(n, d);
    for (int r = 0; r < U.rows(); ++r)
      for (int c = 0; c < d; ++c) U(r, c) = nd(gen);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < d; ++c) V(r, c) = nd(gen);
    U.rowwise().normalize();
    V.rowwise().normalize();
    const double t = 0.5 + 19.5 * ud(gen);
    const double b = -0.5 + ud(gen);

    for (int kind = 0; kind < 2; ++kind) {
      const bool sig = kind == 0;
      const auto eval = [&](const Eigen::MatrixXd& Ue,
                            const Eigen::MatrixXd& Ve, double te) {
        return sig ? sigmoid_loss(A, Ue, Ve, te, b, false).value
                   : infonce_loss(A, Ue, Ve, te, false).value;
      };
      const LossGrad g = sig ? sigmoid_loss(A, U, V, t, b, true)
                             : infonce_loss(A, U, V, t, true);
      double worst = 0.0;
      for (int r = 0; r < U.rows(); ++r)
        for (int c = 0; c < d; ++c) {
          Eigen::MatrixXd Up = U, Um = U;
          Up(r, c) += h;
          Um(r, c) -= h;
          worst = std::max(worst, rel(g.dU(r, c),
                                      (eval(Up, V, t) - eval(Um, V, t)) /
                                          (2 * h)));
        }
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < d; ++c) {
          Eigen::MatrixXd Vp = V, Vm = V;
          Vp(r, c) += h;
          Vm(r, c) -= h;
          worst = std::max(worst, rel(g.dV(r, c),
                                      (eval(U, Vp, t) - eval(U, Vm, t)) /
                                          (2 * h)));
        }
      worst = std::max(
          worst, rel(g.dlogt, (eval(U, V, t * std::exp(h)) -
                               eval(U, V, t * std::exp(-h))) /
                                  (2 * h)));
      require(f, worst <= 1e-4,
              "instance " + std::to_string(inst) + " " +
                  (sig ? "sigmoid" : "infonce") + ": worst rel err " +
                  fmt(worst));
    }
  }
  return f;
}

// ---- criterion 10: sweep trend sigmoid vs infonce ---------------------------

Fails criterion10(Ctx&) {
  Fails f;
  const std::vector<int> d_range{5, 6, 7, 8, 9, 10, 11, 12};
  const std::vector<std::uint64_t> seeds{0, 1, 2};
  const std::int64_t steps = 20000;
  for (int n : {20, 40}) {
    const SweepResult sig =
        sweep_min_dim(n, 2, LossKind::Sigmoid, d_range, steps, seeds);
    const SweepResult inf =
        sweep_min_dim(n, 2, LossKind::InfoNce, d_range, steps, seeds);
    const int sig_min =
        sig.min_positive_dim < 0 ? 1 << 20 : sig.min_positive_dim;
    const int inf_min =
        inf.min_positive_dim < 0 ? 1 << 20 : inf.min_positive_dim;
    require(f, sig_min <= 7,
            "n=" + std::to_string(n) + ": sigmoid min dim " +
                std::to_string(sig.min_positive_dim) + " > 7");
    require(f, sig_min <= inf_min,
            "n=" + std::to_string(n) + ": sigmoid min dim " +
                std::to_string(sig.min_positive_dim) + " above infonce " +
                std::to_string(inf.min_positive_dim));
    for (LossKind kind : {LossKind::Sigmoid, LossKind::InfoNce}) {
      const SweepResult d4 = sweep_min_dim(n, 2, kind, {4}, steps, seeds);
      require(f, d4.best_margin_by_dim.at(0) <= 1e-12,
              "n=" + std::to_string(n) + " " + loss_kind_name(kind) +
                  ": positive margin at d=4 (" +
                  fmt(d4.best_margin_by_dim.at(0)) + ")");
    }
  }
  return f;
}

// ---- criterion 11: sigmoid characterization ----------------------------------

Fails criterion11(Ctx&) {
  Fails f;
  int below_ln2 = 0;
  for (int d : {6, 8}) {
    for (std::uint64_t seed : {0ull, 1ull}) {
      TrainConfig cfg(RelevanceMatrix::snk(8, 2));
      cfg.d = d;
      cfg.steps = 4000;
      cfg.seed = seed;
      cfg.checkpoint_every = 500;
      const TrainTrace tr = train(cfg);
      require(f, !tr.aborted, "training aborted");
      const TrainCheckpoint& last = tr.rows.back();
      if (last.loss < std::log(2.0)) {
        ++below_ln2;
        require(f, last.margin > 0.0,
                "d=" + std::to_string(d) + " seed " + std::to_string(seed) +
                    ": loss " + fmt(last.loss) +
                    " < ln 2 but certified margin " + fmt(last.margin));
      }
    }
  }
  require(f, below_ln2 >= 1, "no run reached loss < ln 2; check is vacuous");

  const EmbeddingPair E = simplex_baseline(RelevanceMatrix::snk(10, 2));
  const RateCheck rc = sigmoid_rate_check(E, {10.0, 50.0, 200.0});
  for (const auto& row : rc.rows)
    require(f, row.within,
            "T=" + fmt(row.T) + ": ln L " + fmt(row.log_loss) + " outside [" +
                fmt(row.lower) + ", " + fmt(row.upper) + "]");
  return f;
}

// ---- criterion 12: infonce divergence witness --------------------------------

Fails criterion12(Ctx&) {
  Fails f;
  const RelevanceMatrix A = RelevanceMatrix::explicit_rows(2, {{0, 1}});
  const double uy = std::sqrt(0.19);
  Eigen::MatrixXd docs(2, 2);
  docs.col(0) << 1.0, 0.0;
  docs.col(1) << 0.8 * 0.9 - 0.6 * uy, 0.8 * uy + 0.6 * 0.9;
  EmbeddingPair E(A, docs);
  Eigen::MatrixXd q(2, 1);
  q << 0.9, uy;
  E.set_dense_queries(q);

  const DivergenceCheck dc = infonce_divergence_check(E, {50.0, 100.0});
  require(f, std::abs(dc.gap - 0.1) <= 1e-12,
          "witness gap " + fmt(dc.gap) + " != 0.1");
  for (const auto& row : dc.rows) {
    require(f, row.exceeds,
            "T=" + fmt(row.T) + ": loss " + fmt(row.loss) +
                " below divergence bound " + fmt(row.lower_bound));
    const double closed =
        std::log1p(std::exp(0.1 * row.T));
    require(f, row.lower_bound >= closed - 1e-9,
            "T=" + fmt(row.T) + ": bound " + fmt(row.lower_bound) +
                " below ln(1+e^{0.1T}) = " + fmt(closed));
  }
  return f;
}

// ---- criterion 13: witness / robustness / quantization suite -----------------

Fails criterion13(Ctx&) {
  Fails f;
  {
    const EmbeddingPair E = simplex_baseline(RelevanceMatrix::snk(12, 4));
    for (int size : {4, 5}) {
      const std::int64_t count = binomial(12, size);
      for (std::int64_t j = 0; j < count; ++j) {
        const SeparationWitness w =
            compositional_witness(E, colex_unrank(j, 12, size));
        if (!w.valid) {
          f.push_back("compositional |T|=" + std::to_string(size) +
                      " rank " + std::to_string(j) + " invalid");
          break;  // one witness per size is enough detail
        }
      }
    }
  }
  {
    const EmbeddingPair E = simplex_baseline(RelevanceMatrix::snk(10, 2));
    for (int size : {1, 2}) {
      const std::int64_t count = binomial(10, size);
      for (std::int64_t j = 0; j < count; ++j) {
        const SeparationWitness w =
            downward_witness(E, colex_unrank(j, 10, size));
        if (!w.valid) {
          f.push_back("downward |T|=" + std::to_string(size) + " rank " +
                      std::to_string(j) + " invalid");
          break;
        }
      }
    }
    const double m = certify(E).best_tau_margin;
    const RobustnessReport rob = robustness_check(E, 0.99 * m, 100, 0);
    require(f, rob.ok && rob.violations == 0,
            "robustness: " + std::to_string(rob.violations) +
                " violations at 0.99 m");

    const auto [Q, rep] = quantize_check(E);
    require(f, rep.error_ok,
            "quantize: vector error " + fmt(rep.max_vector_error) +
                " above m/4 = " + fmt(rep.error_bound));
    require(f, rep.margin_ok && rep.margin_out >= rep.margin_in / 2 - 1e-9,
            "quantize: margin " + fmt(rep.margin_out) + " below m/2 = " +
                fmt(rep.margin_in / 2));
  }
  {
    const EmbeddingPair E = simplex_baseline(RelevanceMatrix::snk(12, 4));
    const auto [Q, rep] = quantize_check(E);
    require(f, rep.error_ok && rep.margin_ok,
            "quantize on (12,4): error_ok " + std::to_string(rep.error_ok) +
                ", margin_ok " + std::to_string(rep.margin_ok));
  }
  return f;
}

struct Criterion {
  int number;
  const char* description;
  double budget_seconds;  // 0 = no runtime clause
  Fails (*run)(Ctx&);
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "simplex closed-form bias-0 margin (k in {4,9,100})", 1.0,
       criterion1},
      {2, "vandermonde margin floor and dimension 2k+1 (n <= 10, k <= 2)",
       10.0, criterion2},
      {3, "khatri-rao exact score values over 50 seeds", 30.0, criterion3},
      {4, "JL+Maurey reduction to d=20 keeps half the margin", 120.0,
       criterion4},
      {5, "min-norm-point matches 1e-3 simplex grid", 0.0, criterion5},
      {6, "spectral / counting bound consistency for criteria 1-4", 0.0,
       criterion6},
      {7, "packing audit clean on Snk(32,4); families near-disjoint", 0.0,
       criterion7},
      {8, "beta tail bound dominates Monte Carlo", 0.0, criterion8},
      {9, "loss gradients match finite differences", 0.0, criterion9},
      {10, "sigmoid needs fewer dimensions than infonce (k=2)", 1800.0,
       criterion10},
      {11, "sigmoid loss < ln 2 certifies a positive margin; rate sandwich",
       0.0, criterion11},
      {12, "infonce loss diverges on the 0.1-gap witness", 0.0, criterion12},
      {13, "compositional / downward / robustness / quantization suite", 0.0,
       criterion13},
  };

  Ctx ctx;
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Fails f = c.run(ctx);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (c.budget_seconds > 0.0 && secs >= c.budget_seconds)
      f.push_back("runtime " + fmt(secs) + " s exceeds budget " +
                  fmt(c.budget_seconds) + " s");
    if (f.empty()) {
      std::printf("PASS criterion %2d: %s [%.2f s]\n", c.number,
                  c.description, secs);
    } else {
      ++failures;
      std::printf("FAIL criterion %2d: %s [%.2f s]\n", c.number,
                  c.description, secs);
      for (const std::string& msg : f)
        std::printf("      - %s\n", msg.c_str());
    }
    std::fflush(stdout);
  }
  if (failures > 0)
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  else
    std::printf("all %zu criteria passed\n", criteria.size());
  return failures == 0 ? 0 : 1;
}
