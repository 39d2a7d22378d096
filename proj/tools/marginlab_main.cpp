// Command-line surface: construct, certify, reduce, bounds, train, sweep,
// analyze, plot-data. Every command emits a manifest sidecar recording the
// full invocation, seeds, and file digests so runs can be replayed.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "marginlab/analysis.hpp"
#include "marginlab/bounds.hpp"
#include "marginlab/constructions.hpp"
#include "marginlab/embedding.hpp"
#include "marginlab/errors.hpp"
#include "marginlab/io_util.hpp"
#include "marginlab/reduce.hpp"
#include "marginlab/relevance.hpp"
#include "marginlab/train.hpp"
#include "marginlab/version.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using namespace marginlab;

std::string g_out_dir;
int g_jobs = 1;

std::string resolve_out(const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(g_out_dir) / path).string();
}

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  json params = json::object();
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;

  void add_input(const std::string& path) { inputs[path] = fnv1a64_file(path); }
  void add_output(const std::string& path) {
    outputs[path] = fnv1a64_file(path);
  }
  void write(const std::string& path) const {
    json j{{"command", command}, {"argv", argv},
           {"params", params},   {"seeds", seeds},
           {"tool_version", kVersion}, {"inputs", inputs},
           {"outputs", outputs}};
    write_text_atomic(path, j.dump(1) + "\n");
  }
  // Sidecar next to the primary output, or a command-named file otherwise.
  void finish(const std::string& primary_out) const {
    write(primary_out.empty()
              ? resolve_out("marginlab-" + command + "-manifest.json")
              : primary_out + ".manifest.json");
  }
};

void emit(const json& j, const std::string& out_path, Manifest& man) {
  const std::string text = j.dump(1) + "\n";
  std::cout << text;
  if (!out_path.empty()) {
    write_text_atomic(out_path, text);
    man.add_output(out_path);
  }
}

std::vector<std::string> collect_argv(int argc, char** argv) {
  return {argv, argv + argc};
}

CertifyOptions certify_opts() {
  CertifyOptions o;
  o.jobs = g_jobs;
  return o;
}

// ---- plot-data CSV handling ----

struct SweepRow {
  int n, k, d;
  std::string loss;
  double max_margin;
};

std::vector<SweepRow> read_sweep_csv(const std::string& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) ||
      line.rfind("n,k,d,loss,seed,max_margin", 0) != 0)
    throw file_format_error(path + ": expected sweep CSV header");
  std::vector<SweepRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 6)
      throw file_format_error(path + ":" + std::to_string(lineno) +
                              ": expected 6 fields");
    rows.push_back({std::stoi(fields[0]), std::stoi(fields[1]),
                    std::stoi(fields[2]), fields[3], std::stod(fields[5])});
  }
  return rows;
}

const char* kPlotScript = R"PY(#!/usr/bin/env python3
"""Plots the series emitted by `marginlab plot-data`."""
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

prefix = sys.argv[1] if len(sys.argv) > 1 else "plot"

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))

mindim = defaultdict(list)
with open(prefix + "_mindim.csv") as f:
    for row in csv.DictReader(f):
        mindim[row["loss"]].append((int(row["n"]), int(row["min_positive_dim"])))
for loss, pts in sorted(mindim.items()):
    pts.sort()
    ax1.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=loss)
ax1.set_xlabel("n")
ax1.set_ylabel("min dimension with positive margin")
ax1.legend()

margins = defaultdict(list)
with open(prefix + "_margins.csv") as f:
    for row in csv.DictReader(f):
        margins[(row["loss"], row["n"])].append(
            (int(row["d"]), float(row["best_margin"])))
for (loss, n), pts in sorted(margins.items()):
    pts.sort()
    ax2.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
             label=f"{loss}, n={n}")
ax2.set_xlabel("d")
ax2.set_ylabel("best margin over seeds")
ax2.legend()

fig.tight_layout()
fig.savefig(prefix + ".png", dpi=150)
print(prefix + ".png")
)PY";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"large-margin embeddings of sparse relevance matrices"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  const char* env_out = std::getenv("MARGINLAB_OUT_DIR");
  g_out_dir = env_out ? env_out : ".";
  app.add_option("--out-dir", g_out_dir,
                 "directory for outputs with relative paths")
      ->capture_default_str();
  app.add_option("--jobs", g_jobs, "worker thread cap")->capture_default_str();

  // construct
  auto* c_cmd = app.add_subcommand("construct", "build an embedding file");
  std::string c_method, c_out;
  int c_n = 0, c_k = 0, c_d = 0, c_retries = 20;
  std::uint64_t c_seed = 0;
  double c_delta3k = 1.0 / 6.0;
  c_cmd->add_option("--method", c_method, "construction")
      ->required()
      ->check(CLI::IsMember(
          {"simplex", "vandermonde", "khatri-rao", "gaussian-rip"}));
  c_cmd->add_option("--n", c_n, "number of documents")->required();
  c_cmd->add_option("--k", c_k, "row support size")->required();
  c_cmd->add_option("--d", c_d, "dimension (khatri-rao / gaussian-rip)");
  c_cmd->add_option("--seed", c_seed, "RNG seed");
  c_cmd->add_option("--retries", c_retries, "resampling attempts")
      ->capture_default_str();
  c_cmd->add_option("--delta3k", c_delta3k, "assumed RIP constant")
      ->capture_default_str();
  c_cmd->add_option("--out", c_out, "output embedding path");

  // certify
  auto* y_cmd = app.add_subcommand("certify", "margin certificate of a file");
  std::string y_in, y_out, y_mode = "exact";
  std::int64_t y_samples = 0;
  std::uint64_t y_sample_seed = 0;
  y_cmd->add_option("--in", y_in, "embedding file")->required();
  y_cmd->add_option("--mode", y_mode, "exact or sample")
      ->check(CLI::IsMember({"exact", "sample"}))
      ->capture_default_str();
  y_cmd->add_option("--samples", y_samples, "rows to sample");
  y_cmd->add_option("--sample-seed", y_sample_seed, "sampling seed");
  y_cmd->add_option("--out", y_out, "also write the certificate here");

  // reduce
  auto* r_cmd = app.add_subcommand("reduce", "dimension reduction");
  std::string r_in, r_out, r_report;
  double r_eps = 0.5;
  int r_dout = -1, r_retries = 5;
  std::int64_t r_T = -1;
  std::uint64_t r_seed = 0;
  r_cmd->add_option("--in", r_in, "embedding file")->required();
  r_cmd->add_option("--eps", r_eps, "accuracy")->capture_default_str();
  r_cmd->add_option("--dout", r_dout, "output dimension (-1: theory recipe)")
      ->capture_default_str();
  r_cmd->add_option("--T", r_T, "Maurey count (-1: theory)")
      ->capture_default_str();
  r_cmd->add_option("--seed", r_seed, "base seed");
  r_cmd->add_option("--retries", r_retries, "JL retry budget")
      ->capture_default_str();
  r_cmd->add_option("--out", r_out, "output embedding path");
  r_cmd->add_option("--report", r_report, "report JSON path");

  // bounds
  auto* b_cmd = app.add_subcommand("bounds", "bound evaluation and audits");
  std::string b_which, b_in, b_out;
  int b_n = 0, b_k = 0, b_s = -1, b_r = 0;
  double b_m = 0.0, b_C = 1.0, b_delta = 0.0, b_x = 0.0, b_y = 0.0;
  std::int64_t b_trials = 100000, b_attempts = 100000;
  std::uint64_t b_seed = 0;
  b_cmd->add_option("--which", b_which, "bound to evaluate")
      ->required()
      ->check(CLI::IsMember({"weller", "packing", "spectral-snk",
                             "spectral-identity", "beta-tail", "beta-mc",
                             "gamma-ratio", "audit"}));
  b_cmd->add_option("--n", b_n, "documents");
  b_cmd->add_option("--k", b_k, "support size");
  b_cmd->add_option("--m", b_m, "margin");
  b_cmd->add_option("--C", b_C, "packing constant")->capture_default_str();
  b_cmd->add_option("--s", b_s, "subset size");
  b_cmd->add_option("--r", b_r, "sphere dimension");
  b_cmd->add_option("--delta", b_delta, "threshold");
  b_cmd->add_option("--x", b_x, "gamma-ratio x");
  b_cmd->add_option("--y", b_y, "gamma-ratio y");
  b_cmd->add_option("--trials", b_trials, "Monte Carlo trials")
      ->capture_default_str();
  b_cmd->add_option("--seed", b_seed, "RNG seed");
  b_cmd->add_option("--max-attempts", b_attempts, "family sampling budget")
      ->capture_default_str();
  b_cmd->add_option("--in", b_in, "embedding file (audit)");
  b_cmd->add_option("--out", b_out, "also write the JSON here");

  // train
  auto* t_cmd = app.add_subcommand("train", "free-embedding training");
  std::string t_loss = "sigmoid", t_trace, t_out;
  int t_n = 0, t_k = 0, t_d = 0;
  std::int64_t t_steps = 20000, t_every = 100;
  double t_lr = 0.03, t_t0 = 10.0;
  std::uint64_t t_seed = 0;
  t_cmd->add_option("--n", t_n, "documents")->required();
  t_cmd->add_option("--k", t_k, "support size")->required();
  t_cmd->add_option("--d", t_d, "dimension")->required();
  t_cmd->add_option("--loss", t_loss, "sigmoid or infonce")
      ->check(CLI::IsMember({"sigmoid", "infonce"}))
      ->capture_default_str();
  t_cmd->add_option("--steps", t_steps, "gradient steps")
      ->capture_default_str();
  t_cmd->add_option("--lr", t_lr, "base learning rate")
      ->capture_default_str();
  t_cmd->add_option("--t0", t_t0, "initial inverse temperature")
      ->capture_default_str();
  t_cmd->add_option("--checkpoint-every", t_every, "steps per checkpoint")
      ->capture_default_str();
  t_cmd->add_option("--seed", t_seed, "RNG seed");
  t_cmd->add_option("--trace", t_trace, "trace CSV path");
  t_cmd->add_option("--out", t_out, "final embedding path");

  // sweep
  auto* s_cmd = app.add_subcommand("sweep", "dimension sweep");
  std::string s_loss = "sigmoid", s_out;
  int s_n = 0, s_k = 0, s_dmin = 0, s_dmax = 0, s_seeds = 3;
  std::int64_t s_steps = 20000;
  std::uint64_t s_seed_base = 0;
  double s_lr = 0.03, s_t0 = 10.0;
  std::int64_t s_every = 100;
  s_cmd->add_option("--n", s_n, "documents")->required();
  s_cmd->add_option("--k", s_k, "support size")->required();
  s_cmd->add_option("--loss", s_loss, "sigmoid or infonce")
      ->check(CLI::IsMember({"sigmoid", "infonce"}))
      ->capture_default_str();
  s_cmd->add_option("--d-min", s_dmin, "smallest dimension")->required();
  s_cmd->add_option("--d-max", s_dmax, "largest dimension")->required();
  s_cmd->add_option("--steps", s_steps, "steps per run")
      ->capture_default_str();
  s_cmd->add_option("--seeds", s_seeds, "seeds per dimension")
      ->capture_default_str();
  s_cmd->add_option("--seed-base", s_seed_base, "first seed");
  s_cmd->add_option("--lr", s_lr, "base learning rate")->capture_default_str();
  s_cmd->add_option("--t0", s_t0, "initial inverse temperature")
      ->capture_default_str();
  s_cmd->add_option("--checkpoint-every", s_every, "steps per checkpoint")
      ->capture_default_str();
  s_cmd->add_option("--out", s_out, "sweep CSV path");

  // analyze
  auto* a_cmd = app.add_subcommand("analyze", "margin-consequence checks");
  std::string a_check, a_in, a_out;
  std::vector<int> a_set;
  std::vector<double> a_T;
  double a_pert = 0.0, a_step = -1.0;
  std::int64_t a_trials = 100, a_cap = 1000000;
  std::uint64_t a_seed = 0;
  bool a_expect = false;
  a_cmd->add_option("--check", a_check, "which check")
      ->required()
      ->check(CLI::IsMember({"compositional", "downward", "robustness",
                             "quantize", "sigmoid-rate",
                             "infonce-divergence"}));
  a_cmd->add_option("--in", a_in, "embedding file")->required();
  a_cmd->add_option("--set", a_set, "document set T")->delimiter(',');
  a_cmd->add_option("--T-values", a_T, "inverse temperatures")
      ->delimiter(',');
  a_cmd->add_option("--pert", a_pert, "perturbation norm");
  a_cmd->add_option("--trials", a_trials, "trials")->capture_default_str();
  a_cmd->add_option("--seed", a_seed, "RNG seed");
  a_cmd->add_flag("--expect-violation", a_expect,
                  "adversarial mode that must break the check");
  a_cmd->add_option("--step", a_step, "quantization step (<=0: default)")
      ->capture_default_str();
  a_cmd->add_option("--cap", a_cap, "enumeration / materialization cap")
      ->capture_default_str();
  a_cmd->add_option("--out", a_out, "also write the JSON here");

  // plot-data
  auto* p_cmd = app.add_subcommand("plot-data", "ready-to-plot series");
  std::vector<std::string> p_sweeps;
  std::string p_prefix = "plot";
  bool p_script = false;
  p_cmd->add_option("--sweep-csv", p_sweeps, "sweep CSV inputs")
      ->required()
      ->expected(-1);
  p_cmd->add_option("--out-prefix", p_prefix, "output path prefix")
      ->capture_default_str();
  p_cmd->add_flag("--script", p_script, "also emit a plotting script");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  Manifest man;
  man.argv = collect_argv(argc, argv);

  try {
    if (c_cmd->parsed()) {
      man.command = "construct";
      man.seeds = {c_seed};
      const RelevanceMatrix A = RelevanceMatrix::snk(c_n, c_k);
      std::optional<EmbeddingPair> E;
      json params{{"method", c_method}, {"n", c_n}, {"k", c_k},
                  {"seed", c_seed}};
      if (c_method == "simplex") {
        E = simplex_baseline(A);
      } else if (c_method == "vandermonde") {
        E = vandermonde(A);
      } else if (c_method == "khatri-rao") {
        if (c_d <= 0)
          throw std::invalid_argument("construct: khatri-rao needs --d");
        auto [emb, p] = khatri_rao(A, c_d, c_seed, c_retries);
        E = std::move(emb);
        params["d"] = c_d;
        params["retries_used"] = p.retries;
        params["delta"] = p.delta;
        params["beta"] = p.beta;
      } else {
        if (c_d <= 0)
          throw std::invalid_argument("construct: gaussian-rip needs --d");
        auto [emb, p] = gaussian_rip(A, c_d, c_seed, c_retries, c_delta3k);
        E = std::move(emb);
        params["d"] = c_d;
        params["retries_used"] = p.retries;
        params["offsupport_cap"] = p.offsupport_cap;
        params["delta3k_estimate"] = p.delta3k_estimate;
      }
      man.params = params;
      if (c_out.empty()) {
        c_out = c_method + "_n" + std::to_string(c_n) + "_k" +
                std::to_string(c_k) +
                (c_d > 0 ? "_d" + std::to_string(c_d) : "") + ".emb.json";
      }
      c_out = resolve_out(c_out);
      save_embedding(*E, c_out);
      man.add_output(c_out);
      const MarginCertificate cert = certify(*E, certify_opts());
      json summary = cert.to_json();
      summary["file"] = c_out;
      summary["dim"] = E->dim();
      std::cout << summary.dump(1) << "\n";
      man.finish(c_out);
      return 0;
    }

    if (y_cmd->parsed()) {
      man.command = "certify";
      man.add_input(y_in);
      const EmbeddingPair E = load_embedding(y_in);
      CertifyOptions opts = certify_opts();
      if (y_mode == "sample") {
        if (y_samples < 1)
          throw std::invalid_argument("certify: sample mode needs --samples");
        opts.sampled = true;
        opts.sample_count = y_samples;
        opts.sample_seed = y_sample_seed;
        man.seeds = {y_sample_seed};
      }
      man.params = json{{"in", y_in}, {"mode", y_mode}};
      if (!y_out.empty()) y_out = resolve_out(y_out);
      emit(certify(E, opts).to_json(), y_out, man);
      man.finish(y_out);
      return 0;
    }

    if (r_cmd->parsed()) {
      man.command = "reduce";
      man.seeds = {r_seed};
      man.add_input(r_in);
      const EmbeddingPair E = load_embedding(r_in);
      ReduceParams params;
      params.eps = r_eps;
      params.T = r_T;
      params.d_out = r_dout;
      params.seed = r_seed;
      params.max_retries = r_retries;
      params.jobs = g_jobs;
      auto [out, report] = reduce_embedding(E, params);
      if (r_out.empty())
        r_out = fs::path(r_in).stem().string() + "_d" +
                std::to_string(report.d_out) + ".emb.json";
      r_out = resolve_out(r_out);
      save_embedding(out, r_out);
      man.add_output(r_out);
      man.params = json{{"in", r_in},       {"eps", r_eps},
                        {"dout", r_dout},   {"T", r_T},
                        {"seed", r_seed},   {"retries", r_retries}};
      if (r_report.empty()) r_report = r_out + ".report.json";
      emit(report.to_json(), r_report, man);
      man.finish(r_out);
      return report.below_target ? 3 : 0;
    }

    if (b_cmd->parsed()) {
      man.command = "bounds";
      man.params = json{{"which", b_which}};
      json out;
      if (b_which == "weller") {
        out = weller_dim_bound(b_n, b_k, b_m).to_json();
      } else if (b_which == "packing") {
        out = packing_dim_bound(b_n, b_k, b_m, b_C).to_json();
      } else if (b_which == "spectral-snk") {
        out = spectral_bound(RelevanceMatrix::snk(b_n, b_k),
                             snk_spectral_J(b_n, b_k))
                  .to_json();
      } else if (b_which == "spectral-identity") {
        std::vector<std::vector<int>> rows;
        for (int i = 0; i < b_n; ++i) rows.push_back({i});
        out = spectral_bound(RelevanceMatrix::explicit_rows(b_n, rows),
                             identity_spectral_J(b_n))
                  .to_json();
      } else if (b_which == "beta-tail") {
        out = json{{"name", "beta-tail"}, {"s", b_s},
                   {"r", b_r},            {"delta", b_delta},
                   {"value", beta_tail_bound(b_s, b_r, b_delta)}};
      } else if (b_which == "beta-mc") {
        man.seeds = {b_seed};
        out = json{{"name", "beta-mc"},
                   {"s", b_s},
                   {"r", b_r},
                   {"delta", b_delta},
                   {"trials", b_trials},
                   {"value",
                    beta_tail_montecarlo(b_s, b_r, b_delta, b_trials,
                                         b_seed)}};
      } else if (b_which == "gamma-ratio") {
        out = json{{"name", "gamma-ratio"},
                   {"x", b_x},
                   {"y", b_y},
                   {"value", gamma_ratio(b_x, b_y)},
                   {"reference", b_y / (b_x + b_y)}};
      } else {  // audit
        if (b_in.empty())
          throw std::invalid_argument("bounds: audit needs --in");
        man.seeds = {b_seed};
        man.add_input(b_in);
        const EmbeddingPair E = load_embedding(b_in);
        const MarginCertificate cert = certify(E, certify_opts());
        out = packing_audit(E, cert.bias0_margin, b_s, b_seed, b_attempts)
                  .to_json();
        out["margin"] = cert.bias0_margin;
      }
      if (!b_out.empty()) b_out = resolve_out(b_out);
      emit(out, b_out, man);
      man.finish(b_out);
      return 0;
    }

    if (t_cmd->parsed()) {
      man.command = "train";
      man.seeds = {t_seed};
      TrainConfig cfg(RelevanceMatrix::snk(t_n, t_k));
      cfg.d = t_d;
      cfg.loss = parse_loss_kind(t_loss);
      cfg.steps = t_steps;
      cfg.base_lr = t_lr;
      cfg.seed = t_seed;
      cfg.checkpoint_every = t_every;
      cfg.t0 = t_t0;
      cfg.jobs = g_jobs;
      const TrainTrace trace = train(cfg);
      man.params = json{{"n", t_n},     {"k", t_k},     {"d", t_d},
                        {"loss", t_loss}, {"steps", t_steps}, {"lr", t_lr},
                        {"t0", t_t0},   {"seed", t_seed}};
      if (t_trace.empty())
        t_trace = "train_" + t_loss + "_n" + std::to_string(t_n) + "_k" +
                  std::to_string(t_k) + "_d" + std::to_string(t_d) + "_s" +
                  std::to_string(t_seed) + ".csv";
      t_trace = resolve_out(t_trace);
      write_text_atomic(t_trace, trace_to_csv(trace));
      man.add_output(t_trace);
      if (!t_out.empty()) {
        t_out = resolve_out(t_out);
        EmbeddingPair E =
            embedding_from_rows(cfg.matrix, trace.U, trace.V);
        E.meta = json{{"method", "train"},
                      {"loss", t_loss},
                      {"seed", t_seed},
                      {"steps", t_steps},
                      {"final_inv_temp", trace.final_inv_temp}};
        save_embedding(E, t_out);
        man.add_output(t_out);
      }
      json summary{{"max_margin", trace.max_margin},
                   {"final_loss", trace.rows.back().loss},
                   {"final_inv_temp", trace.final_inv_temp},
                   {"checkpoints", trace.rows.size()},
                   {"aborted", trace.aborted},
                   {"trace", t_trace}};
      std::cout << summary.dump(1) << "\n";
      man.finish(t_trace);
      if (trace.aborted) {
        std::cerr << "train: aborted on non-finite loss at step "
                  << trace.abort_step << "\n";
        return 1;
      }
      return 0;
    }

    if (s_cmd->parsed()) {
      man.command = "sweep";
      if (s_seeds < 1)
        throw std::invalid_argument("sweep: need --seeds >= 1");
      if (s_dmin < 1 || s_dmax < s_dmin)
        throw std::invalid_argument("sweep: need 1 <= d-min <= d-max");
      std::vector<int> d_range;
      for (int d = s_dmin; d <= s_dmax; ++d) d_range.push_back(d);
      std::vector<std::uint64_t> seeds;
      for (int i = 0; i < s_seeds; ++i)
        seeds.push_back(s_seed_base + static_cast<std::uint64_t>(i));
      man.seeds = seeds;
      SweepOptions opts;
      opts.base_lr = s_lr;
      opts.t0 = s_t0;
      opts.checkpoint_every = s_every;
      opts.jobs = g_jobs;
      const SweepResult result = sweep_min_dim(
          s_n, s_k, parse_loss_kind(s_loss), d_range, s_steps, seeds, opts);
      man.params = json{{"n", s_n},         {"k", s_k},
                        {"loss", s_loss},   {"d_min", s_dmin},
                        {"d_max", s_dmax},  {"steps", s_steps},
                        {"seeds", s_seeds}, {"seed_base", s_seed_base}};
      if (s_out.empty())
        s_out = "sweep_" + s_loss + "_n" + std::to_string(s_n) + "_k" +
                std::to_string(s_k) + ".csv";
      s_out = resolve_out(s_out);
      write_text_atomic(s_out, sweep_to_csv(result));
      man.add_output(s_out);
      json summary{{"min_positive_dim", result.min_positive_dim},
                   {"dims", result.dims},
                   {"best_margin_by_dim", result.best_margin_by_dim},
                   {"csv", s_out}};
      std::cout << summary.dump(1) << "\n";
      man.finish(s_out);
      return 0;
    }

    if (a_cmd->parsed()) {
      man.command = "analyze";
      man.add_input(a_in);
      const EmbeddingPair E = load_embedding(a_in);
      man.params = json{{"check", a_check}, {"in", a_in}};
      json out;
      if (a_check == "compositional" || a_check == "downward") {
        if (a_set.empty())
          throw std::invalid_argument("analyze: " + a_check +
                                      " needs --set");
        out = (a_check == "compositional"
                   ? compositional_witness(E, a_set, a_cap, g_jobs)
                   : downward_witness(E, a_set, a_cap, g_jobs))
                  .to_json();
      } else if (a_check == "robustness") {
        man.seeds = {a_seed};
        out = robustness_check(E, a_pert, a_trials, a_seed, a_expect, g_jobs)
                  .to_json();
      } else if (a_check == "quantize") {
        out = quantize_check(E, a_step, a_cap, g_jobs).second.to_json();
      } else if (a_check == "sigmoid-rate") {
        if (a_T.empty())
          throw std::invalid_argument("analyze: sigmoid-rate needs --T-values");
        const RateCheck rc = sigmoid_rate_check(E, a_T, g_jobs);
        out = json{{"best_tau", rc.best_tau},
                   {"margin", rc.margin},
                   {"rows", json::array()}};
        for (const auto& row : rc.rows)
          out["rows"].push_back(json{{"T", row.T},
                                     {"log_loss", row.log_loss},
                                     {"normalized", row.normalized},
                                     {"lower", row.lower},
                                     {"upper", row.upper},
                                     {"within", row.within}});
      } else {  // infonce-divergence
        if (a_T.empty())
          throw std::invalid_argument(
              "analyze: infonce-divergence needs --T-values");
        const DivergenceCheck dc = infonce_divergence_check(E, a_T, g_jobs);
        out = json{{"witness_row", dc.witness_row},
                   {"gap", dc.gap},
                   {"strictly_increasing", dc.strictly_increasing},
                   {"rows", json::array()}};
        for (const auto& row : dc.rows)
          out["rows"].push_back(json{{"T", row.T},
                                     {"loss", row.loss},
                                     {"lower_bound", row.lower_bound},
                                     {"exceeds", row.exceeds}});
      }
      if (!a_out.empty()) a_out = resolve_out(a_out);
      emit(out, a_out, man);
      man.finish(a_out);
      return 0;
    }

    if (p_cmd->parsed()) {
      man.command = "plot-data";
      std::vector<SweepRow> rows;
      for (const auto& path : p_sweeps) {
        man.add_input(path);
        auto part = read_sweep_csv(path);
        rows.insert(rows.end(), part.begin(), part.end());
      }
      man.params = json{{"sweep_csv", p_sweeps}, {"out_prefix", p_prefix}};

      // Best margin over seeds per (loss, n, k, d).
      std::map<std::tuple<std::string, int, int, int>, double> best;
      for (const auto& row : rows) {
        auto key = std::make_tuple(row.loss, row.n, row.k, row.d);
        auto it = best.find(key);
        if (it == best.end() || row.max_margin > it->second)
          best[key] = row.max_margin;
      }
      std::string margins_csv = "loss,n,k,d,best_margin\n";
      for (const auto& [key, value] : best) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", value);
        margins_csv += std::get<0>(key) + "," +
                       std::to_string(std::get<1>(key)) + "," +
                       std::to_string(std::get<2>(key)) + "," +
                       std::to_string(std::get<3>(key)) + "," + buf + "\n";
      }

      // Least dimension with positive best margin per (loss, n, k).
      std::map<std::tuple<std::string, int, int>, int> mindim;
      for (const auto& [key, value] : best) {
        if (value <= 1e-12) continue;
        auto mkey = std::make_tuple(std::get<0>(key), std::get<1>(key),
                                    std::get<2>(key));
        auto it = mindim.find(mkey);
        if (it == mindim.end() || std::get<3>(key) < it->second)
          mindim[mkey] = std::get<3>(key);
      }
      std::string mindim_csv = "loss,n,k,min_positive_dim\n";
      for (const auto& [key, d] : mindim)
        mindim_csv += std::get<0>(key) + "," +
                      std::to_string(std::get<1>(key)) + "," +
                      std::to_string(std::get<2>(key)) + "," +
                      std::to_string(d) + "\n";

      const std::string prefix = resolve_out(p_prefix);
      write_text_atomic(prefix + "_margins.csv", margins_csv);
      man.add_output(prefix + "_margins.csv");
      write_text_atomic(prefix + "_mindim.csv", mindim_csv);
      man.add_output(prefix + "_mindim.csv");
      if (p_script) {
        write_text_atomic(prefix + "_plot.py", kPlotScript);
        man.add_output(prefix + "_plot.py");
      }
      json summary{{"margins_csv", prefix + "_margins.csv"},
                   {"mindim_csv", prefix + "_mindim.csv"}};
      if (p_script) summary["script"] = prefix + "_plot.py";
      std::cout << summary.dump(1) << "\n";
      man.finish(prefix + "_margins.csv");
      return 0;
    }
  } catch (const construction_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const file_format_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
