#include "mtdml/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "mtdml/csv.hpp"
#include "mtdml/errors.hpp"
#include "mtdml/rng.hpp"

namespace mtdml {

int TreatmentCatalogue::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return static_cast<int>(i);
  return -1;
}

void TreatmentCatalogue::validate() const {
  if (labels.size() < 2) throw ValidityError("catalogue: need at least 2 treatments");
  std::set<std::string> seen;
  for (const auto& l : labels) {
    if (l.empty()) throw ValidityError("catalogue: empty treatment label");
    if (!seen.insert(l).second) throw ValidityError("catalogue: duplicate label '" + l + "'");
  }
  if (!costs.empty()) {
    for (const auto& l : labels) {
      auto it = costs.find(l);
      if (it == costs.end())
        throw ValidityError("catalogue: no cost for label '" + l + "'");
      if (!(it->second > 0.0))
        throw ValidityError("catalogue: cost for '" + l + "' must be positive");
    }
  }
}

std::size_t Outcome::n_observed() const {
  std::size_t c = 0;
  for (auto o : observed) c += o ? 1 : 0;
  return c;
}

int Dataset::x_col(const std::string& name) const {
  for (std::size_t i = 0; i < x_names.size(); ++i)
    if (x_names[i] == name) return static_cast<int>(i);
  return -1;
}

const Outcome& Dataset::outcome(const std::string& name) const {
  for (const auto& o : outcomes)
    if (o.name == name) return o;
  throw ValueError("dataset: unknown outcome '" + name + "'");
}

std::vector<std::size_t> Dataset::arm_counts() const {
  std::vector<std::size_t> counts(catalogue.size(), 0);
  for (int d : treatment) counts[static_cast<std::size_t>(d)]++;
  return counts;
}

void Dataset::validate() const {
  catalogue.validate();
  const std::size_t rows = n();
  if (treatment.size() != rows) throw ValidityError("dataset: treatment length mismatch");
  if (x_names.size() != p()) throw ValidityError("dataset: covariate name count mismatch");
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j)
      if (!std::isfinite(X(i, j)))
        throw ValidityError("dataset: non-finite covariate at row " + std::to_string(i) +
                            ", column '" + x_names[static_cast<std::size_t>(j)] + "'");
  const int D = static_cast<int>(catalogue.size());
  for (int d : treatment)
    if (d < 0 || d >= D) throw ValidityError("dataset: treatment index out of range");
  for (const auto& o : outcomes) {
    if (static_cast<std::size_t>(o.values.size()) != rows || o.observed.size() != rows)
      throw ValidityError("dataset: outcome '" + o.name + "' length mismatch");
    std::vector<std::size_t> arm_obs(catalogue.size(), 0);
    for (std::size_t i = 0; i < rows; ++i)
      if (o.observed[i]) arm_obs[static_cast<std::size_t>(treatment[i])]++;
    for (std::size_t d = 0; d < arm_obs.size(); ++d)
      if (arm_obs[d] < 2)
        throw ValidityError("dataset: arm '" + catalogue.labels[d] + "' has " +
                            std::to_string(arm_obs[d]) + " observed units for outcome '" +
                            o.name + "' (need >= 2)");
  }
  for (const auto& z : z_names)
    if (x_col(z) < 0) throw ValidityError("dataset: z variable '" + z + "' not a covariate");
  if (instrument && static_cast<std::size_t>(instrument->size()) != rows)
    throw ValidityError("dataset: instrument length mismatch");
  if (cluster_id && cluster_id->size() != rows)
    throw ValidityError("dataset: cluster id length mismatch");
}

namespace {

std::vector<std::string> split_list(const std::string& raw) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(raw);
  while (std::getline(in, item, ',')) {
    const std::size_t b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const std::size_t e = item.find_last_not_of(" \t");
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::string join_list(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += items[i];
  }
  return out;
}

}  // namespace

DatasetSchema DatasetSchema::from_config(const KvConfig& cfg) {
  DatasetSchema s;
  s.catalogue.labels = split_list(cfg.get("treatments"));
  for (const auto& entry : cfg.list_or("costs")) {
    const std::size_t colon = entry.find(':');
    if (colon == std::string::npos)
      throw SchemaError("schema: cost entry '" + entry + "' is not label:value");
    s.catalogue.costs[entry.substr(0, colon)] =
        parse_double(entry.substr(colon + 1), "schema cost");
  }
  s.treatment_col = cfg.get("treatment");
  s.outcome_cols = cfg.list("outcomes");
  if (s.outcome_cols.empty()) throw SchemaError("schema: need at least one outcome column");
  s.covariate_cols = cfg.list_or("covariates");
  s.categorical_cols = cfg.list_or("categorical");
  s.missing_indicator_cols = cfg.list_or("missing_indicator");
  s.z_names = cfg.list_or("z");
  if (cfg.has("instrument")) s.instrument_col = cfg.get("instrument");
  if (cfg.has("cluster")) s.cluster_col = cfg.get("cluster");
  if (cfg.has("id")) s.id_col = cfg.get("id");
  return s;
}

KvConfig DatasetSchema::to_config() const {
  KvConfig cfg;
  cfg.set("treatments", join_list(catalogue.labels));
  if (!catalogue.costs.empty()) {
    std::vector<std::string> entries;
    for (const auto& l : catalogue.labels)
      entries.push_back(l + ":" + format_double(catalogue.costs.at(l)));
    cfg.set("costs", join_list(entries));
  }
  cfg.set("treatment", treatment_col);
  cfg.set("outcomes", join_list(outcome_cols));
  if (!covariate_cols.empty()) cfg.set("covariates", join_list(covariate_cols));
  if (!categorical_cols.empty()) cfg.set("categorical", join_list(categorical_cols));
  if (!missing_indicator_cols.empty())
    cfg.set("missing_indicator", join_list(missing_indicator_cols));
  if (!z_names.empty()) cfg.set("z", join_list(z_names));
  if (instrument_col) cfg.set("instrument", *instrument_col);
  if (cluster_col) cfg.set("cluster", *cluster_col);
  if (id_col) cfg.set("id", *id_col);
  return cfg;
}

LoadedDataset load_dataset(const std::string& csv_path, const DatasetSchema& schema) {
  schema.catalogue.validate();
  const CsvTable table = read_csv(csv_path);
  LoadReport report;
  report.rows_read = table.n_rows();

  auto require_col = [&table](const std::string& name) {
    const int idx = table.col(name);
    if (idx < 0) throw SchemaError("schema: column '" + name + "' not in CSV");
    return idx;
  };

  const int treat_idx = require_col(schema.treatment_col);
  std::vector<int> outcome_idx;
  for (const auto& c : schema.outcome_cols) outcome_idx.push_back(require_col(c));
  std::vector<int> cov_idx;
  for (const auto& c : schema.covariate_cols) cov_idx.push_back(require_col(c));
  std::vector<int> cat_idx;
  for (const auto& c : schema.categorical_cols) cat_idx.push_back(require_col(c));
  const int instr_idx = schema.instrument_col ? require_col(*schema.instrument_col) : -1;
  const int cluster_idx = schema.cluster_col ? require_col(*schema.cluster_col) : -1;
  const int id_idx = schema.id_col ? require_col(*schema.id_col) : -1;

  std::set<std::string> missing_flagged(schema.missing_indicator_cols.begin(),
                                        schema.missing_indicator_cols.end());
  for (const auto& c : missing_flagged)
    if (std::find(schema.covariate_cols.begin(), schema.covariate_cols.end(), c) ==
        schema.covariate_cols.end())
      throw SchemaError("schema: missing_indicator column '" + c + "' is not a covariate");

  // Rows with an empty treatment cell are dropped and counted.
  std::vector<std::size_t> kept;
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    if (table.rows[r][static_cast<std::size_t>(treat_idx)].empty())
      report.rows_dropped++;
    else
      kept.push_back(r);
  }
  const std::size_t n = kept.size();
  if (n == 0) throw ValidityError("dataset: no usable rows");

  Dataset ds;
  ds.catalogue = schema.catalogue;
  ds.treatment.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& label = table.rows[kept[i]][static_cast<std::size_t>(treat_idx)];
    const int d = ds.catalogue.index_of(label);
    if (d < 0) throw ValueError("dataset: treatment label '" + label + "' not in catalogue");
    ds.treatment[i] = d;
  }

  // Level inventory for categoricals, sorted for a deterministic expansion.
  std::vector<std::vector<std::string>> cat_levels(cat_idx.size());
  for (std::size_t c = 0; c < cat_idx.size(); ++c) {
    std::set<std::string> levels;
    for (std::size_t i = 0; i < n; ++i)
      levels.insert(table.rows[kept[i]][static_cast<std::size_t>(cat_idx[c])]);
    cat_levels[c].assign(levels.begin(), levels.end());
  }

  std::size_t p = cov_idx.size();
  for (const auto& c : missing_flagged) (void)c, ++p;
  for (const auto& levels : cat_levels) p += levels.size();

  ds.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  ds.X.setZero();
  ds.x_names.clear();

  Eigen::Index col = 0;
  for (std::size_t c = 0; c < cov_idx.size(); ++c) {
    const std::string& name = schema.covariate_cols[c];
    const bool flagged = missing_flagged.count(name) > 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string& cell = table.rows[kept[i]][static_cast<std::size_t>(cov_idx[c])];
      if (cell.empty()) {
        if (!flagged)
          throw ValidityError("dataset: missing value in covariate '" + name +
                              "' (flag it under missing_indicator or fill it)");
        ds.X(static_cast<Eigen::Index>(i), col) = 0.0;
        report.cells_imputed++;
      } else {
        ds.X(static_cast<Eigen::Index>(i), col) = parse_double(cell, "covariate " + name);
      }
    }
    ds.x_names.push_back(name);
    ++col;
    if (flagged) {
      for (std::size_t i = 0; i < n; ++i)
        ds.X(static_cast<Eigen::Index>(i), col) =
            table.rows[kept[i]][static_cast<std::size_t>(cov_idx[c])].empty() ? 1.0 : 0.0;
      ds.x_names.push_back(name + "_missing");
      ++col;
    }
  }
  for (std::size_t c = 0; c < cat_idx.size(); ++c) {
    for (const auto& level : cat_levels[c]) {
      for (std::size_t i = 0; i < n; ++i)
        ds.X(static_cast<Eigen::Index>(i), col) =
            (table.rows[kept[i]][static_cast<std::size_t>(cat_idx[c])] == level) ? 1.0 : 0.0;
      ds.x_names.push_back(schema.categorical_cols[c] + "=" + level);
      ++col;
      report.columns_expanded++;
    }
  }

  for (std::size_t o = 0; o < outcome_idx.size(); ++o) {
    Outcome out;
    out.name = schema.outcome_cols[o];
    out.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    out.observed.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::string& cell = table.rows[kept[i]][static_cast<std::size_t>(outcome_idx[o])];
      if (cell.empty()) continue;
      out.values(static_cast<Eigen::Index>(i)) = parse_double(cell, "outcome " + out.name);
      out.observed[i] = 1;
    }
    report.observed_per_outcome[out.name] = out.n_observed();
    ds.outcomes.push_back(std::move(out));
  }

  if (instr_idx >= 0) {
    Eigen::VectorXd z(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      z(static_cast<Eigen::Index>(i)) =
          parse_double(table.rows[kept[i]][static_cast<std::size_t>(instr_idx)], "instrument");
    ds.instrument = std::move(z);
  }
  if (cluster_idx >= 0) {
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i)
      ids[i] = table.rows[kept[i]][static_cast<std::size_t>(cluster_idx)];
    ds.cluster_id = std::move(ids);
  }
  ds.unit_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    ds.unit_ids[i] = id_idx >= 0 ? table.rows[kept[i]][static_cast<std::size_t>(id_idx)]
                                 : std::to_string(i);
  ds.z_names = schema.z_names;

  ds.validate();
  return {std::move(ds), report};
}

void save_dataset(const Dataset& dataset, const std::string& dir) {
  std::filesystem::create_directories(dir);
  CsvTable table;
  table.header.push_back("id");
  table.header.push_back("treatment");
  for (const auto& o : dataset.outcomes) table.header.push_back(o.name);
  for (const auto& x : dataset.x_names) table.header.push_back(x);
  if (dataset.instrument) table.header.push_back("instrument");
  if (dataset.cluster_id) table.header.push_back("cluster");

  for (std::size_t i = 0; i < dataset.n(); ++i) {
    std::vector<std::string> row;
    row.push_back(dataset.unit_ids[i]);
    row.push_back(dataset.catalogue.labels[static_cast<std::size_t>(dataset.treatment[i])]);
    for (const auto& o : dataset.outcomes)
      row.push_back(o.observed[i] ? format_double(o.values(static_cast<Eigen::Index>(i))) : "");
    for (Eigen::Index j = 0; j < dataset.X.cols(); ++j)
      row.push_back(format_double(dataset.X(static_cast<Eigen::Index>(i), j)));
    if (dataset.instrument)
      row.push_back(format_double((*dataset.instrument)(static_cast<Eigen::Index>(i))));
    if (dataset.cluster_id) row.push_back((*dataset.cluster_id)[i]);
    table.rows.push_back(std::move(row));
  }
  write_csv(dir + "/data.csv", table);

  DatasetSchema schema;
  schema.catalogue = dataset.catalogue;
  schema.treatment_col = "treatment";
  for (const auto& o : dataset.outcomes) schema.outcome_cols.push_back(o.name);
  schema.covariate_cols = dataset.x_names;
  schema.z_names = dataset.z_names;
  if (dataset.instrument) schema.instrument_col = "instrument";
  if (dataset.cluster_id) schema.cluster_col = "cluster";
  schema.id_col = "id";
  std::ofstream out(dir + "/schema.cfg", std::ios::binary);
  if (!out) throw DataError("dataset: cannot write " + dir + "/schema.cfg");
  out << schema.to_config().to_string();
}

LoadedDataset load_dataset_dir(const std::string& dir) {
  const KvConfig cfg = KvConfig::from_file(dir + "/schema.cfg");
  return load_dataset(dir + "/data.csv", DatasetSchema::from_config(cfg));
}

std::vector<std::size_t> FoldAssignment::fold_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(K), 0);
  for (int f : fold_of) sizes[static_cast<std::size_t>(f)]++;
  return sizes;
}

std::vector<std::size_t> FoldAssignment::fold_indices(int k) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == k) idx.push_back(i);
  return idx;
}

std::vector<std::size_t> FoldAssignment::complement_indices(int k) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] != k) idx.push_back(i);
  return idx;
}

FoldAssignment make_folds(std::size_t n, int K, const std::vector<int>& treatment,
                          std::uint64_t seed, bool stratify) {
  if (K < 2) throw ParameterError("make_folds: K must be >= 2");
  if (static_cast<std::size_t>(K) > n) throw ParameterError("make_folds: K exceeds n");

  FoldAssignment fa;
  fa.K = K;
  fa.seed = seed;
  fa.stratified = stratify;
  fa.fold_of.assign(n, -1);
  Rng rng(Rng::derive_stream(seed, 0x0f01d5));

  if (!stratify) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    for (std::size_t i = 0; i < n; ++i)
      fa.fold_of[perm[i]] = static_cast<int>(i % static_cast<std::size_t>(K));
    return fa;
  }

  if (treatment.size() != n)
    throw ParameterError("make_folds: treatment vector length mismatch for stratified folds");
  int n_arms = 0;
  for (int d : treatment) n_arms = std::max(n_arms, d + 1);
  std::vector<std::vector<std::size_t>> arm_units(static_cast<std::size_t>(n_arms));
  for (std::size_t i = 0; i < n; ++i)
    arm_units[static_cast<std::size_t>(treatment[i])].push_back(i);

  // Each arm splits into floor(n_d/K) per fold, and the remainder goes to the
  // currently least-loaded folds; that keeps total fold sizes within one of
  // each other while per-arm counts stay within one of proportional.
  std::vector<std::size_t> extra_load(static_cast<std::size_t>(K), 0);
  std::vector<std::size_t> tie_rank(static_cast<std::size_t>(K));
  std::iota(tie_rank.begin(), tie_rank.end(), 0);
  rng.shuffle(tie_rank);

  for (auto& units : arm_units) {
    rng.shuffle(units);
    const std::size_t n_d = units.size();
    const std::size_t base = n_d / static_cast<std::size_t>(K);
    const std::size_t rem = n_d % static_cast<std::size_t>(K);

    std::vector<int> order(static_cast<std::size_t>(K));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
      if (extra_load[ua] != extra_load[ub]) return extra_load[ua] < extra_load[ub];
      return tie_rank[ua] < tie_rank[ub];
    });

    std::vector<std::size_t> take(static_cast<std::size_t>(K), base);
    for (std::size_t r = 0; r < rem; ++r) {
      take[static_cast<std::size_t>(order[r])]++;
      extra_load[static_cast<std::size_t>(order[r])]++;
    }

    std::size_t pos = 0;
    for (int k = 0; k < K; ++k)
      for (std::size_t c = 0; c < take[static_cast<std::size_t>(k)]; ++c)
        fa.fold_of[units[pos++]] = k;
  }
  return fa;
}

}  // namespace mtdml
