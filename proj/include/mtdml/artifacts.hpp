#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtdml/dml.hpp"

namespace mtdml {

// FNV-1a over the file bytes; used by run manifests to detect stale inputs.
std::uint64_t fnv64_file(const std::string& path);
std::uint64_t fnv64_bytes(const std::string& bytes);

// Matrix as CSV with named columns plus a one-line JSON metadata sidecar at
// <path>.meta.json.
void save_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                     const std::vector<std::string>& col_names,
                     const nlohmann::json& sidecar);
Eigen::MatrixXd load_matrix_csv(const std::string& path, std::vector<std::string>* col_names,
                                nlohmann::json* sidecar);

void save_scores(const std::string& path, const ScoreMatrix& scores,
                 const nlohmann::json& extra_meta);
ScoreMatrix load_scores(const std::string& path);

void save_nuisance(const std::string& dir, const NuisanceFit& fit,
                   const std::vector<std::string>& labels, const nlohmann::json& extra_meta);
NuisanceFit load_nuisance(const std::string& dir);

void write_json_file(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::string& path);

// Stage manifest: config echo, seed, input/output hashes. Contains nothing
// time-dependent so reruns with identical inputs are byte-identical.
struct Manifest {
  std::string stage;
  std::uint64_t seed = 0;
  nlohmann::json config;
  std::vector<std::pair<std::string, std::uint64_t>> inputs;
  std::vector<std::string> outputs;

  void add_input(const std::string& path);
  void save(const std::string& dir) const;
};

// Verifies listed inputs against the hashes recorded when they were produced;
// a mismatch means a stale pipeline and raises StaleArtifactError.
void check_inputs_against_manifest(const std::string& producer_manifest_path,
                                   const std::vector<std::string>& inputs);

}  // namespace mtdml
