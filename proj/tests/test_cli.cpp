#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& tag) {
  static int counter = 0;
  const fs::path p = fs::temp_directory_path() /
                     ("marginlab_cli_" + std::to_string(getpid()) + "_" + tag +
                      "_" + std::to_string(counter++));
  fs::create_directories(p);
  return p;
}

// Runs the CLI with cwd = dir, capturing stdout/stderr beside the outputs.
int run_in(const fs::path& dir, const std::string& args,
           const std::string& env = "") {
  const std::string cmd = "cd '" + dir.string() + "' && " + env + " '" +
                          MARGINLAB_CLI_BIN + "' " + args +
                          " >cli_stdout.txt 2>cli_stderr.txt";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -2;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json slurp_json(const fs::path& p) { return json::parse(slurp(p)); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("construct and certify round-trip the simplex certificate") {
  const fs::path dir = fresh_dir("roundtrip");
  CHECK(run_in(dir, "construct --method simplex --n 10 --k 2") == 0);
  CHECK(fs::exists(dir / "simplex_n10_k2.emb.json"));
  CHECK(fs::exists(dir / "simplex_n10_k2.emb.json.manifest.json"));

  CHECK(run_in(dir,
               "certify --in simplex_n10_k2.emb.json --out cert.json") == 0);
  const json c = slurp_json(dir / "cert.json");
  CHECK(std::abs(c.at("min_positive").get<double>() - 0.10355339059327373) <
        1e-12);
  CHECK(std::abs(c.at("max_negative").get<double>() + 0.35355339059327373) <
        1e-12);
  CHECK(std::abs(c.at("best_tau").get<double>() + 0.125) < 1e-12);
  CHECK(std::abs(c.at("best_tau_margin").get<double>() -
                 0.22855339059327376) < 1e-12);
  CHECK(c.at("mode").get<std::string>() == "exact");

  // Sampled mode records its row count and seed.
  CHECK(run_in(dir, "certify --in simplex_n10_k2.emb.json --mode sample "
                    "--samples 9 --sample-seed 4 --out cs.json") == 0);
  const json cs = slurp_json(dir / "cs.json");
  CHECK(cs.at("mode").get<std::string>() == "sampled");
  CHECK(cs.at("sampled_rows").get<std::int64_t>() == 9);
  CHECK(cs.at("min_positive").get<double>() >=
        c.at("min_positive").get<double>() - 1e-15);
}

TEST_CASE("khatri-rao construction reproduces the frozen margin") {
  const fs::path dir = fresh_dir("kr");
  CHECK(run_in(dir, "construct --method khatri-rao --n 12 --k 2 --d 11 "
                    "--seed 7") == 0);
  CHECK(run_in(dir, "certify --in khatri-rao_n12_k2_d11.emb.json "
                    "--out cert.json") == 0);
  const json c = slurp_json(dir / "cert.json");
  CHECK(std::abs(c.at("min_positive").get<double>() - 0.000156923697839772) <
        1e-10);
  CHECK(c.at("max_negative").get<double>() <= -0.000156923697839772 + 1e-10);
}

TEST_CASE("failure exit codes distinguish parse, construction, and target") {
  const fs::path dir = fresh_dir("codes");
  CHECK(run_in(dir, "construct --method fourier --n 6 --k 2") == 1);
  CHECK(run_in(dir, "certify --in does_not_exist.emb.json") == 1);
  // Off-support overlap cannot pass at this dimension; retries exhaust.
  CHECK(run_in(dir, "construct --method gaussian-rip --n 40 --k 2 --d 30 "
                    "--retries 2") == 2);

  CHECK(run_in(dir, "construct --method simplex --n 10 --k 2") == 0);
  CHECK(run_in(dir, "reduce --in simplex_n10_k2.emb.json --dout 8 --eps 0.5 "
                    "--seed 0 --retries 2") == 3);
  // The best below-target attempt is still written, with its report.
  CHECK(fs::exists(dir / "simplex_n10_k2.emb_d8.emb.json"));
  const json rep =
      slurp_json(dir / "simplex_n10_k2.emb_d8.emb.json.report.json");
  CHECK(rep.at("below_target").get<bool>());
  CHECK(rep.at("attempts").get<int>() == 2);

  // A good seed lands above target and exits cleanly.
  CHECK(run_in(dir, "reduce --in simplex_n10_k2.emb.json --dout 8 --eps 0.5 "
                    "--seed 2 --out r2.emb.json --report r2.report.json") ==
        0);
  const json rep2 = slurp_json(dir / "r2.report.json");
  CHECK_FALSE(rep2.at("below_target").get<bool>());
  CHECK(rep2.at("certified_margin").get<double>() >=
        rep2.at("target_margin").get<double>());
}

TEST_CASE("identical invocations in fresh directories match bit for bit") {
  const fs::path a = fresh_dir("det_a");
  const fs::path b = fresh_dir("det_b");
  const std::string cmd =
      "construct --method khatri-rao --n 10 --k 2 --d 11 --seed 3";
  CHECK(run_in(a, cmd) == 0);
  CHECK(run_in(b, cmd) == 0);
  const std::string name = "khatri-rao_n10_k2_d11.emb.json";
  CHECK(slurp(a / name) == slurp(b / name));
  CHECK(slurp(a / (name + ".manifest.json")) ==
        slurp(b / (name + ".manifest.json")));
  const json man = slurp_json(a / (name + ".manifest.json"));
  CHECK(man.at("command").get<std::string>() == "construct");
  CHECK(man.at("outputs").size() == 1);
  CHECK(man.contains("tool_version"));
}

TEST_CASE("train writes a trace and a certifiable embedding") {
  const fs::path dir = fresh_dir("train");
  CHECK(run_in(dir, "train --n 4 --k 1 --d 3 --steps 20 "
                    "--checkpoint-every 10 --trace tr.csv --out emb.json") ==
        0);
  const std::string tr = slurp(dir / "tr.csv");
  CHECK(tr.rfind("step,loss,inv_temp,margin,best_tau,best_tau_margin\n", 0) ==
        0);
  CHECK(fs::exists(dir / "tr.csv.manifest.json"));
  CHECK(run_in(dir, "certify --in emb.json") == 0);
}

TEST_CASE("sweep feeds plot-data") {
  const fs::path dir = fresh_dir("sweep");
  CHECK(run_in(dir, "sweep --n 4 --k 1 --d-min 2 --d-max 3 --steps 30 "
                    "--seeds 2") == 0);
  const std::string csv = slurp(dir / "sweep_sigmoid_n4_k1.csv");
  CHECK(csv.rfind("n,k,d,loss,seed,max_margin\n", 0) == 0);

  CHECK(run_in(dir, "plot-data --sweep-csv sweep_sigmoid_n4_k1.csv "
                    "--out-prefix p --script") == 0);
  CHECK(slurp(dir / "p_margins.csv").rfind("loss,n,k,d,best_margin\n", 0) ==
        0);
  CHECK(slurp(dir / "p_mindim.csv").rfind("loss,n,k,min_positive_dim\n", 0) ==
        0);
  CHECK(slurp(dir / "p_plot.py").find("matplotlib") != std::string::npos);

  // A non-sweep CSV is rejected as a format error.
  std::ofstream(dir / "bogus.csv") << "a,b,c\n1,2,3\n";
  CHECK(run_in(dir, "plot-data --sweep-csv bogus.csv") == 1);
}

TEST_CASE("bounds subcommand evaluates the frozen values") {
  const fs::path dir = fresh_dir("bounds");
  CHECK(run_in(dir, "bounds --which weller --n 10 --k 2 --m 0.25 "
                    "--out w.json") == 0);
  CHECK(std::abs(slurp_json(dir / "w.json").at("value").get<double>() -
                 2.3652123889719707) < 1e-12);

  CHECK(run_in(dir, "bounds --which spectral-identity --n 4 --out i.json") ==
        0);
  CHECK(slurp_json(dir / "i.json").at("value").get<double>() == 0.5);

  CHECK(run_in(dir, "construct --method simplex --n 12 --k 2") == 0);
  CHECK(run_in(dir, "bounds --which audit --in simplex_n12_k2.emb.json "
                    "--s 1 --out audit.json") == 0);
  const json audit = slurp_json(dir / "audit.json");
  CHECK(audit.at("norm_violations").get<std::int64_t>() == 0);
  CHECK(audit.at("separation_violations").get<std::int64_t>() == 0);
}

TEST_CASE("analyze subcommand runs the consequence checks") {
  const fs::path dir = fresh_dir("analyze");
  CHECK(run_in(dir, "construct --method simplex --n 10 --k 2") == 0);
  const std::string in = "simplex_n10_k2.emb.json";
  CHECK(run_in(dir, "analyze --check quantize --in " + in +
                    " --out q.json") == 0);
  CHECK(slurp_json(dir / "q.json").at("margin_ok").get<bool>());

  CHECK(run_in(dir, "analyze --check downward --in " + in +
                    " --set 3 --out d.json") == 0);
  CHECK(slurp_json(dir / "d.json").at("valid").get<bool>());

  CHECK(run_in(dir, "analyze --check sigmoid-rate --in " + in +
                    " --T-values 10,50 --out r.json") == 0);
  const json r = slurp_json(dir / "r.json");
  for (const auto& row : r.at("rows")) CHECK(row.at("within").get<bool>());

  CHECK(run_in(dir, "analyze --check robustness --in " + in +
                    " --pert 0.2 --trials 20 --out rb.json") == 0);
  CHECK(slurp_json(dir / "rb.json").at("ok").get<bool>());

  // Missing --set is a usage error.
  CHECK(run_in(dir, "analyze --check downward --in " + in) == 1);
}

TEST_CASE("outputs follow MARGINLAB_OUT_DIR when set") {
  const fs::path dir = fresh_dir("outdir_cwd");
  const fs::path target = fresh_dir("outdir_target");
  CHECK(run_in(dir, "construct --method simplex --n 6 --k 2",
               "MARGINLAB_OUT_DIR='" + target.string() + "'") == 0);
  CHECK(fs::exists(target / "simplex_n6_k2.emb.json"));
  CHECK_FALSE(fs::exists(dir / "simplex_n6_k2.emb.json"));
}

}  // TEST_SUITE
