#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "marginlab/constructions.hpp"
#include "marginlab/embedding.hpp"
#include "marginlab/errors.hpp"
#include "marginlab/io_util.hpp"
#include "marginlab/reduce.hpp"
#include "marginlab/version.hpp"

namespace marginlab {

void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp =
      target.parent_path() /
      (target.filename().string() + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw std::runtime_error("cannot open for writing: " + tmp.string());
    out.write(content.data(),
              static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fnv1a64_file(const std::string& path) {
  const std::string data = read_text(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

namespace {

nlohmann::json matrix_to_rows_json(const Eigen::MatrixXd& M) {
  // One JSON array per column vector (vector-per-row layout in the file).
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index c = 0; c < M.cols(); ++c) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd rows_json_to_matrix(const nlohmann::json& rows, int dim,
                                    std::int64_t count, const char* field) {
  if (!rows.is_array() ||
      static_cast<std::int64_t>(rows.size()) != count)
    throw file_format_error(std::string("emb-v1: field '") + field +
                            "' must be an array of " + std::to_string(count) +
                            " vectors");
  Eigen::MatrixXd M(dim, count);
  for (std::int64_t c = 0; c < count; ++c) {
    const auto& row = rows[static_cast<std::size_t>(c)];
    if (!row.is_array() || static_cast<int>(row.size()) != dim)
      throw file_format_error(std::string("emb-v1: '") + field + "' vector " +
                              std::to_string(c) + " must have " +
                              std::to_string(dim) + " coordinates");
    for (int r = 0; r < dim; ++r) {
      const auto& v = row[static_cast<std::size_t>(r)];
      if (!v.is_number())
        throw file_format_error(std::string("emb-v1: '") + field +
                                "' contains a non-numeric entry");
      M(r, c) = v.get<double>();
    }
  }
  return M;
}

bool seed_rebuildable(const std::string& method) {
  return method == "simplex" || method == "vandermonde" ||
         method == "khatri-rao" || method == "gaussian-rip" ||
         method == "mnp";
}

}  // namespace

void save_embedding(const EmbeddingPair& E, const std::string& path,
                    std::int64_t materialize_cap) {
  nlohmann::json out;
  out["format"] = "emb-v1";
  out["tool_version"] = kVersion;
  out["d"] = E.dim();
  out["matrix"] = E.matrix().descriptor();
  out["V"] = matrix_to_rows_json(E.doc_vectors());
  const std::string method =
      E.meta.is_object() ? E.meta.value("method", std::string()) : "";
  if (E.has_dense_queries()) {
    out["U"] = matrix_to_rows_json(E.dense_queries());
  } else if (!seed_rebuildable(method)) {
    out["U"] =
        matrix_to_rows_json(materialize_queries(E, materialize_cap)
                                .dense_queries());
  }
  out["meta"] = E.meta.is_null() ? nlohmann::json::object() : E.meta;
  write_text_atomic(path, out.dump(1) + "\n");
}

EmbeddingPair load_embedding(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw file_format_error(path + ": " + e.what());
  }
  if (!j.is_object() || j.value("format", std::string()) != "emb-v1")
    throw file_format_error(path + ": not an emb-v1 file");
  if (!j.contains("d") || !j["d"].is_number_integer())
    throw file_format_error(path + ": missing integer field 'd'");
  const int d = j["d"].get<int>();
  if (d < 1) throw file_format_error(path + ": dimension must be >= 1");
  if (!j.contains("matrix"))
    throw file_format_error(path + ": missing field 'matrix'");
  RelevanceMatrix A = RelevanceMatrix::from_descriptor(j["matrix"]);
  if (!j.contains("V"))
    throw file_format_error(path + ": missing field 'V'");
  EmbeddingPair E(A, rows_json_to_matrix(j["V"], d, A.docs(), "V"));
  E.meta = j.value("meta", nlohmann::json::object());

  if (j.contains("U")) {
    E.set_dense_queries(rows_json_to_matrix(j["U"], d, A.rows(), "U"));
    return E;
  }

  const std::string method = E.meta.value("method", std::string());
  if (method == "simplex") {
    E.set_query_generator(make_simplex_generator(A));
  } else if (method == "vandermonde") {
    E.set_query_generator(make_vandermonde_generator(A));
  } else if (method == "khatri-rao") {
    EmbeddingPair rebuilt = rebuild_khatri_rao(A, E.meta);
    if ((rebuilt.doc_vectors() - E.doc_vectors()).cwiseAbs().maxCoeff() >
        1e-9)
      throw file_format_error(
          path + ": stored vectors do not match the recorded seed");
    return rebuilt;
  } else if (method == "gaussian-rip") {
    EmbeddingPair rebuilt = rebuild_gaussian_rip(A, E.meta);
    if ((rebuilt.doc_vectors() - E.doc_vectors()).cwiseAbs().maxCoeff() >
        1e-9)
      throw file_format_error(
          path + ": stored vectors do not match the recorded seed");
    return rebuilt;
  } else if (method == "mnp") {
    const double tol = E.meta.value("mnp_tol", 1e-10);
    E.set_query_generator(make_mnp_generator(
        std::make_shared<const Eigen::MatrixXd>(E.doc_vectors()), tol));
  } else {
    throw file_format_error(path +
                            ": no dense queries and method '" + method +
                            "' is not seed-rebuildable");
  }
  return E;
}

}  // namespace marginlab
