#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mtdml/config.hpp"

namespace mtdml {

struct TreatmentCatalogue {
  std::vector<std::string> labels;          // ordered, unique, size >= 2
  std::map<std::string, double> costs;      // optional; if present, covers every label

  std::size_t size() const { return labels.size(); }
  int index_of(const std::string& label) const;  // -1 when unknown
  void validate() const;
};

struct Outcome {
  std::string name;
  Eigen::VectorXd values;              // unobserved entries are 0 and masked off
  std::vector<std::uint8_t> observed;  // attrition mask

  std::size_t n_observed() const;
};

struct Dataset {
  Eigen::MatrixXd X;                    // n x p, fully numeric after ingestion
  std::vector<std::string> x_names;
  std::vector<int> treatment;           // index into catalogue, length n
  TreatmentCatalogue catalogue;
  std::vector<Outcome> outcomes;
  std::vector<std::string> z_names;     // interpretable subset of x_names
  std::optional<Eigen::VectorXd> instrument;
  std::optional<std::vector<std::string>> cluster_id;
  std::vector<std::string> unit_ids;

  std::size_t n() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t p() const { return static_cast<std::size_t>(X.cols()); }
  int x_col(const std::string& name) const;
  const Outcome& outcome(const std::string& name) const;
  std::vector<std::size_t> arm_counts() const;
  void validate() const;
};

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;        // empty treatment cell
  std::size_t columns_expanded = 0;    // dummy columns added for categoricals
  std::size_t cells_imputed = 0;       // zero-filled flagged missing cells
  std::map<std::string, std::size_t> observed_per_outcome;
};

// Column-role mapping for ingestion. Parsed from a key=value schema config:
//   treatments  = no_sped,counseling,...          (catalogue order)
//   costs       = no_sped:20000,...               (optional)
//   treatment   = <column>
//   outcomes    = <col>[,<col>...]                (empty cell = attrition)
//   covariates  = <col>[,...]                     (numeric)
//   categorical = <col>[,...]                     (one-hot expanded)
//   missing_indicator = <col>[,...]               (zero-fill + <col>_missing dummy)
//   z           = <col>[,...]                     (post-expansion names)
//   instrument  = <col>                           (optional)
//   cluster     = <col>                           (optional)
//   id          = <col>                           (optional; row index otherwise)
struct DatasetSchema {
  TreatmentCatalogue catalogue;
  std::string treatment_col;
  std::vector<std::string> outcome_cols;
  std::vector<std::string> covariate_cols;
  std::vector<std::string> categorical_cols;
  std::vector<std::string> missing_indicator_cols;
  std::vector<std::string> z_names;
  std::optional<std::string> instrument_col;
  std::optional<std::string> cluster_col;
  std::optional<std::string> id_col;

  static DatasetSchema from_config(const KvConfig& cfg);
  KvConfig to_config() const;
};

struct LoadedDataset {
  Dataset dataset;
  LoadReport report;
};

LoadedDataset load_dataset(const std::string& csv_path, const DatasetSchema& schema);

// A dataset persists as <dir>/data.csv + <dir>/schema.cfg with the covariate
// matrix already expanded, so a reload is bit-for-bit identical.
void save_dataset(const Dataset& dataset, const std::string& dir);
LoadedDataset load_dataset_dir(const std::string& dir);

struct FoldAssignment {
  std::vector<int> fold_of;  // in [0, K)
  int K = 0;
  std::uint64_t seed = 0;
  bool stratified = false;

  std::vector<std::size_t> fold_sizes() const;
  std::vector<std::size_t> fold_indices(int k) const;      // units in fold k
  std::vector<std::size_t> complement_indices(int k) const;
};

// Random split into K folds whose sizes differ by at most one; when
// stratified, each fold's per-arm count is within one of proportional.
FoldAssignment make_folds(std::size_t n, int K, const std::vector<int>& treatment,
                          std::uint64_t seed, bool stratify);

}  // namespace mtdml
