#include "mtdml/artifacts.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mtdml/csv.hpp"
#include "mtdml/errors.hpp"

namespace mtdml {

std::uint64_t fnv64_bytes(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("hash: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return fnv64_bytes(buf.str());
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("json: cannot write " + path);
  out << j.dump() << "\n";
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("json: cannot open " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

void save_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                     const std::vector<std::string>& col_names,
                     const nlohmann::json& sidecar) {
  if (static_cast<Eigen::Index>(col_names.size()) != m.cols())
    throw ParameterError("save_matrix_csv: column name count mismatch");
  CsvTable table;
  table.header = col_names;
  table.rows.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<std::string> row;
    row.reserve(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(format_double(m(i, j)));
    table.rows.push_back(std::move(row));
  }
  write_csv(path, table);
  write_json_file(path + ".meta.json", sidecar);
}

Eigen::MatrixXd load_matrix_csv(const std::string& path, std::vector<std::string>* col_names,
                                nlohmann::json* sidecar) {
  const CsvTable table = read_csv(path);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(table.n_rows()),
                    static_cast<Eigen::Index>(table.n_cols()));
  for (std::size_t i = 0; i < table.n_rows(); ++i)
    for (std::size_t j = 0; j < table.n_cols(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          parse_double(table.rows[i][j], "matrix " + path);
  if (col_names) *col_names = table.header;
  if (sidecar) {
    const std::string meta = path + ".meta.json";
    if (std::filesystem::exists(meta)) *sidecar = read_json_file(meta);
  }
  return m;
}

namespace {

std::string tilting_name(Tilting t) { return t == Tilting::ato ? "ato" : "ate"; }

Tilting tilting_from_name(const std::string& s) {
  if (s == "ato") return Tilting::ato;
  if (s == "ate") return Tilting::ate;
  throw ValueError("scores: unknown tilting '" + s + "'");
}

}  // namespace

void save_scores(const std::string& path, const ScoreMatrix& scores,
                 const nlohmann::json& extra_meta) {
  const std::size_t n = scores.n();
  const std::size_t D = scores.n_treatments();
  // gamma columns, keep mask, then the ATET score columns.
  std::vector<std::string> names;
  for (std::size_t d = 0; d < D; ++d) names.push_back("gamma_" + scores.treatment_labels[d]);
  names.push_back("keep");
  for (const auto& [pair, v] : scores.atet_scores)
    names.push_back("atet_" + scores.treatment_labels[static_cast<std::size_t>(pair.first)] +
                    "_vs_" + scores.treatment_labels[static_cast<std::size_t>(pair.second)]);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t d = 0; d < D; ++d)
      m(row, static_cast<Eigen::Index>(d)) = scores.gamma(row, static_cast<Eigen::Index>(d));
    m(row, static_cast<Eigen::Index>(D)) = scores.keep_mask[i] ? 1.0 : 0.0;
    Eigen::Index col = static_cast<Eigen::Index>(D) + 1;
    for (const auto& [pair, v] : scores.atet_scores) m(row, col++) = v(row);
  }
  nlohmann::json meta = extra_meta;
  meta["kind"] = "scores";
  meta["tilting"] = tilting_name(scores.tilting);
  meta["normalized"] = scores.normalized;
  meta["outcome"] = scores.outcome_name;
  meta["treatments"] = scores.treatment_labels;
  save_matrix_csv(path, m, names, meta);
}

ScoreMatrix load_scores(const std::string& path) {
  std::vector<std::string> names;
  nlohmann::json meta;
  const Eigen::MatrixXd m = load_matrix_csv(path, &names, &meta);
  if (meta.is_null()) throw DataError("scores: missing sidecar for " + path);
  ScoreMatrix scores;
  scores.tilting = tilting_from_name(meta.at("tilting").get<std::string>());
  scores.normalized = meta.value("normalized", false);
  scores.outcome_name = meta.value("outcome", "");
  scores.treatment_labels = meta.at("treatments").get<std::vector<std::string>>();
  const std::size_t D = scores.treatment_labels.size();
  const std::size_t n = static_cast<std::size_t>(m.rows());
  scores.gamma = m.leftCols(static_cast<Eigen::Index>(D));
  scores.keep_mask.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    scores.keep_mask[i] =
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(D)) != 0.0 ? 1 : 0;
  for (std::size_t c = D + 1; c < names.size(); ++c) {
    const std::string& name = names[c];
    if (name.rfind("atet_", 0) != 0) continue;
    const std::string body = name.substr(5);
    const std::size_t sep = body.find("_vs_");
    if (sep == std::string::npos) continue;
    int d = -1, dp = -1;
    for (std::size_t l = 0; l < D; ++l) {
      if (scores.treatment_labels[l] == body.substr(0, sep)) d = static_cast<int>(l);
      if (scores.treatment_labels[l] == body.substr(sep + 4)) dp = static_cast<int>(l);
    }
    if (d < 0 || dp < 0) throw DataError("scores: unparseable ATET column '" + name + "'");
    scores.atet_scores[{d, dp}] = m.col(static_cast<Eigen::Index>(c));
  }
  return scores;
}

void save_nuisance(const std::string& dir, const NuisanceFit& fit,
                   const std::vector<std::string>& labels, const nlohmann::json& extra_meta) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta = extra_meta;
  meta["kind"] = "nuisance";
  meta["outcome"] = fit.outcome_name;
  meta["clip_eps"] = fit.clip_eps;
  meta["K"] = fit.folds.K;
  meta["seed"] = fit.folds.seed;
  meta["stratified"] = fit.folds.stratified;
  meta["treatments"] = labels;

  std::vector<std::string> p_names, mu_names;
  for (const auto& l : labels) {
    p_names.push_back("p_" + l);
    mu_names.push_back("mu_" + l);
  }
  save_matrix_csv(dir + "/p_hat.csv", fit.p_hat, p_names, meta);
  save_matrix_csv(dir + "/mu_hat.csv", fit.mu_hat, mu_names, meta);

  Eigen::MatrixXd folds(static_cast<Eigen::Index>(fit.folds.fold_of.size()), 1);
  for (std::size_t i = 0; i < fit.folds.fold_of.size(); ++i)
    folds(static_cast<Eigen::Index>(i), 0) = fit.folds.fold_of[i];
  save_matrix_csv(dir + "/folds.csv", folds, {"fold"}, meta);
}

NuisanceFit load_nuisance(const std::string& dir) {
  nlohmann::json meta;
  NuisanceFit fit;
  fit.p_hat = load_matrix_csv(dir + "/p_hat.csv", nullptr, &meta);
  if (meta.is_null()) throw DataError("nuisance: missing sidecar in " + dir);
  fit.mu_hat = load_matrix_csv(dir + "/mu_hat.csv", nullptr, nullptr);
  const Eigen::MatrixXd folds = load_matrix_csv(dir + "/folds.csv", nullptr, nullptr);
  fit.outcome_name = meta.value("outcome", "");
  fit.clip_eps = meta.value("clip_eps", 0.01);
  fit.folds.K = meta.at("K").get<int>();
  fit.folds.seed = meta.at("seed").get<std::uint64_t>();
  fit.folds.stratified = meta.value("stratified", true);
  fit.folds.fold_of.resize(static_cast<std::size_t>(folds.rows()));
  for (Eigen::Index i = 0; i < folds.rows(); ++i)
    fit.folds.fold_of[static_cast<std::size_t>(i)] = static_cast<int>(folds(i, 0));
  return fit;
}

void Manifest::add_input(const std::string& path) { inputs.emplace_back(path, fnv64_file(path)); }

void Manifest::save(const std::string& dir) const {
  nlohmann::json j;
  j["stage"] = stage;
  j["seed"] = seed;
  j["config"] = config;
  nlohmann::json in = nlohmann::json::array();
  for (const auto& [path, hash] : inputs) {
    nlohmann::json e;
    e["path"] = path;
    e["fnv64"] = hash;
    in.push_back(std::move(e));
  }
  j["inputs"] = std::move(in);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& path : outputs) {
    nlohmann::json e;
    e["path"] = path;
    e["fnv64"] = fnv64_file(path);
    out.push_back(std::move(e));
  }
  j["outputs"] = std::move(out);
  write_json_file(dir + "/manifest.json", j);
}

void check_inputs_against_manifest(const std::string& producer_manifest_path,
                                   const std::vector<std::string>& inputs) {
  if (!std::filesystem::exists(producer_manifest_path)) return;
  const nlohmann::json manifest = read_json_file(producer_manifest_path);
  if (!manifest.contains("outputs")) return;
  for (const auto& entry : manifest.at("outputs")) {
    const std::string path = entry.at("path").get<std::string>();
    for (const auto& input : inputs) {
      if (std::filesystem::path(input).filename() != std::filesystem::path(path).filename())
        continue;
      const std::uint64_t recorded = entry.at("fnv64").get<std::uint64_t>();
      const std::uint64_t actual = fnv64_file(input);
      if (recorded != actual)
        throw StaleArtifactError("stale artifact: " + input +
                                 " does not match the hash in " + producer_manifest_path);
    }
  }
}

}  // namespace mtdml
