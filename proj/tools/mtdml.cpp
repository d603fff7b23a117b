#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include "mtdml/artifacts.hpp"
#include "mtdml/config.hpp"
#include "mtdml/csv.hpp"
#include "mtdml/data.hpp"
#include "mtdml/dgp.hpp"
#include "mtdml/dml.hpp"
#include "mtdml/errors.hpp"
#include "mtdml/heterogeneity.hpp"
#include "mtdml/iv.hpp"
#include "mtdml/policy.hpp"
#include "mtdml/text.hpp"

namespace fs = std::filesystem;
using namespace mtdml;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;  // 0 -> take the config's seed
  int threads = 0;         // 0 -> hardware concurrency
};

int effective_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

KvConfig load_config(const CommonArgs& args) {
  KvConfig cfg;
  if (!args.config_path.empty()) cfg = KvConfig::from_file(args.config_path);
  if (!args.out.empty()) cfg.set("out", args.out);
  if (args.seed != 0) cfg.set("seed", std::to_string(args.seed));
  return cfg;
}

std::string require_out(const KvConfig& cfg) {
  const std::string out = cfg.get_or("out", "");
  if (out.empty()) throw ConfigError("missing output path (set --out or out=...)");
  fs::create_directories(out);
  return out;
}

nlohmann::json config_echo(const KvConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : cfg.all()) j[k] = v;
  return j;
}

// specs = kind:block[:mixing],...  e.g. "elastic_net:base,random_forest:base+text"
std::vector<LearnerSpec> parse_specs(const KvConfig& cfg) {
  std::vector<LearnerSpec> specs;
  for (const auto& item : cfg.list_or("specs")) {
    LearnerSpec spec;
    std::vector<std::string> parts;
    std::string token;
    std::istringstream in(item);
    while (std::getline(in, token, ':')) parts.push_back(token);
    if (parts.empty()) continue;
    spec.kind = learner_kind_from_name(parts[0]);
    if (parts.size() > 1) spec.feature_set_id = parts[1];
    if (parts.size() > 2) spec.mixing = parse_double(parts[2], "spec mixing");
    spec.n_lambda = static_cast<int>(cfg.get_long_or("n_lambda", 30));
    spec.cv_folds = static_cast<int>(cfg.get_long_or("lambda_cv_folds", 3));
    spec.n_trees = static_cast<int>(cfg.get_long_or("n_trees", 200));
    spec.min_leaf = static_cast<int>(cfg.get_long_or("min_leaf", 5));
    specs.push_back(std::move(spec));
  }
  if (specs.empty()) {
    LearnerSpec enet;
    enet.kind = LearnerKind::elastic_net;
    enet.feature_set_id = "base";
    enet.mixing = 0.5;
    enet.n_lambda = static_cast<int>(cfg.get_long_or("n_lambda", 30));
    enet.cv_folds = static_cast<int>(cfg.get_long_or("lambda_cv_folds", 3));
    specs.push_back(enet);
  }
  return specs;
}

// Feature blocks named by the specs: "base" is the covariate matrix, "text"
// the featurize output, "base+text" their concatenation.
FeatureBlocks assemble_blocks(const Dataset& data, const std::string& features_csv,
                              const std::vector<LearnerSpec>& specs) {
  std::set<std::string> wanted;
  for (const auto& s : specs) wanted.insert(s.feature_set_id);
  FeatureBlocks blocks;
  Eigen::MatrixXd text;
  if (!features_csv.empty()) {
    std::vector<std::string> names;
    text = load_matrix_csv(features_csv, &names, nullptr);
    if (static_cast<std::size_t>(text.rows()) != data.n())
      throw DataError("features: row count does not match the dataset");
  }
  for (const auto& id : wanted) {
    if (id == "base") {
      blocks.emplace(id, data.X);
    } else if (id == "text") {
      if (text.size() == 0) throw ConfigError("spec block 'text' needs features=...");
      blocks.emplace(id, text);
    } else if (id == "base+text") {
      if (text.size() == 0) throw ConfigError("spec block 'base+text' needs features=...");
      Eigen::MatrixXd both(data.X.rows(), data.X.cols() + text.cols());
      both.leftCols(data.X.cols()) = data.X;
      both.rightCols(text.cols()) = text;
      blocks.emplace(id, std::move(both));
    } else {
      throw ConfigError("unknown feature block '" + id + "'");
    }
  }
  return blocks;
}

TrimmingScheme parse_trimming(const std::string& raw) {
  if (raw.empty() || raw == "none") return TrimmingScheme::none();
  const std::size_t colon = raw.find(':');
  if (colon == std::string::npos)
    throw ConfigError("trimming must be none, crump:<alpha> or sturmer:<alpha>");
  const std::string kind = raw.substr(0, colon);
  const double alpha = parse_double(raw.substr(colon + 1), "trimming alpha");
  if (kind == "crump") return TrimmingScheme::crump(alpha);
  if (kind == "sturmer") return TrimmingScheme::sturmer(alpha);
  throw ConfigError("unknown trimming scheme '" + kind + "'");
}

int cmd_simulate(const CommonArgs& args) {
  const KvConfig cfg = load_config(args);
  const std::string out = require_out(cfg);
  const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_long_or("seed", 1));
  const std::size_t n = static_cast<std::size_t>(cfg.get_long_or("n", 1000));
  const int arms = static_cast<int>(cfg.get_long_or("arms", 3));
  const int p = static_cast<int>(cfg.get_long_or("covariates", 10));
  const std::string kind = cfg.get_or("dgp", "confounded");

  DgpSpec spec;
  if (kind == "confounded") spec = confounded_spec(n, arms, p, seed);
  else if (kind == "randomized") spec = randomized_spec(n, arms, p, seed);
  else if (kind == "text") spec = text_confounded_spec(n, seed);
  else if (kind == "iv") spec = iv_spec(n, seed);
  else throw ConfigError("unknown dgp '" + kind + "'");

  const GeneratedData gen = generate(spec);
  save_dataset(gen.dataset, out + "/dataset");

  // Ground truth: per-unit potentials, propensities, theta.
  const std::size_t D = gen.dataset.catalogue.size();
  std::vector<std::string> cols;
  for (const auto& l : gen.dataset.catalogue.labels) cols.push_back("pot_" + l);
  for (const auto& l : gen.dataset.catalogue.labels) cols.push_back("p_" + l);
  cols.push_back("theta");
  Eigen::MatrixXd truth(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  truth.leftCols(static_cast<Eigen::Index>(D)) = gen.truth.potential_outcomes;
  truth.middleCols(static_cast<Eigen::Index>(D), static_cast<Eigen::Index>(D)) =
      gen.truth.true_propensity;
  truth.rightCols(1) = gen.truth.theta;
  nlohmann::json meta;
  meta["kind"] = "truth";
  meta["seed"] = seed;
  meta["apo"] = gen.truth.apo;
  meta["late"] = gen.truth.late;
  save_matrix_csv(out + "/truth.csv", truth, cols, meta);

  if (spec.with_text) {
    fs::create_directories(out + "/text");
    write_corpus_csv(out + "/text/corpus.csv", gen.dataset.unit_ids, gen.raw_docs);
    // Held-out labeled sample for lexicon building, drawn under seed+1.
    DgpSpec held = spec;
    held.seed = seed + 1;
    held.n = static_cast<std::size_t>(cfg.get_long_or("lexicon_n", 600));
    const GeneratedData held_gen = generate(held);
    write_corpus_csv(out + "/text/lexicon_corpus.csv", held_gen.dataset.unit_ids,
                     held_gen.raw_docs);
    CsvTable labels;
    labels.header = {"id", "diagnosis"};
    for (std::size_t i = 0; i < held_gen.latent_diagnosis.size(); ++i)
      labels.rows.push_back({held_gen.dataset.unit_ids[i],
                             std::to_string(held_gen.latent_diagnosis[i])});
    write_csv(out + "/text/lexicon_labels.csv", labels);
  }

  Manifest manifest;
  manifest.stage = "simulate";
  manifest.seed = seed;
  manifest.config = config_echo(cfg);
  manifest.outputs = {out + "/dataset/data.csv", out + "/dataset/schema.cfg",
                      out + "/truth.csv"};
  if (spec.with_text) {
    manifest.outputs.push_back(out + "/text/corpus.csv");
    manifest.outputs.push_back(out + "/text/lexicon_corpus.csv");
    manifest.outputs.push_back(out + "/text/lexicon_labels.csv");
  }
  manifest.save(out);
  std::cout << "simulate: wrote " << n << " units, " << D << " arms to " << out << "\n";
  return 0;
}

int cmd_featurize(const CommonArgs& args) {
  const KvConfig cfg = load_config(args);
  const std::string out = require_out(cfg);
  const std::string corpus_path = cfg.get("corpus");
  const std::string lexicon_corpus_path = cfg.get_or("lexicon_corpus", corpus_path);
  const std::string labels_path = cfg.get("lexicon_labels");

  check_inputs_against_manifest(fs::path(corpus_path).parent_path().parent_path().string() +
                                    "/manifest.json",
                                {corpus_path, lexicon_corpus_path, labels_path});

  std::set<std::string> stopset(synthetic_stopwords().begin(), synthetic_stopwords().end());
  for (const auto& extra : cfg.list_or("stopwords")) stopset.insert(extra);
  const Stemmer stemmer =
      cfg.get_or("stemmer", "default") == "identity" ? identity_stemmer() : default_stemmer();

  // Corpora arrive either as an (id,text) CSV or a directory of per-unit files.
  auto read_corpus = [](const std::string& path) {
    return fs::is_directory(path) ? read_corpus_dir(path) : read_corpus_csv(path);
  };
  const auto [ids, docs] = read_corpus(corpus_path);
  const TokenizedCorpus corpus = preprocess(docs, stopset, stemmer, ids);
  const CorpusReport report = corpus_report(corpus);

  const auto [lex_ids, lex_docs] = read_corpus(lexicon_corpus_path);
  const TokenizedCorpus lex_corpus = preprocess(lex_docs, stopset, stemmer, lex_ids);

  const CsvTable label_table = read_csv(labels_path);
  const int label_col = label_table.col("diagnosis");
  if (label_col < 0) throw SchemaError("lexicon labels need a 'diagnosis' column");
  std::vector<int> labels;
  int n_diag = 0;
  for (const auto& row : label_table.rows) {
    const int d = static_cast<int>(parse_long(row[static_cast<std::size_t>(label_col)],
                                              "diagnosis label"));
    labels.push_back(d);
    n_diag = std::max(n_diag, d + 1);
  }
  if (labels.size() != lex_corpus.n_docs())
    throw DataError("lexicon labels do not match the lexicon corpus");

  const bool bigrams = cfg.get_bool_or("bigrams", true);
  const DocumentTermMatrix lex_dtm = build_dtm(lex_corpus, bigrams);
  std::vector<std::string> diagnosis_names;
  for (int k = 0; k < n_diag; ++k) diagnosis_names.push_back("diag" + std::to_string(k));
  const KeynessLexicon lexicon = build_lexicon(lex_dtm, labels, diagnosis_names);
  write_json_file(out + "/lexicon.json", lexicon.to_json());

  const DiagnosisShares shares = diagnosis_shares(corpus, lexicon);
  const bool include_hot = cfg.get_bool_or("include_hot", false);
  std::vector<std::string> cols;
  for (const auto& dn : diagnosis_names) cols.push_back("share_" + dn);
  if (include_hot)
    for (const auto& dn : diagnosis_names) cols.push_back("hot_" + dn);
  Eigen::MatrixXd features(static_cast<Eigen::Index>(corpus.n_docs()),
                           static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < corpus.n_docs(); ++i) {
    for (int k = 0; k < n_diag; ++k)
      features(static_cast<Eigen::Index>(i), k) = shares.shares[i][static_cast<std::size_t>(k)];
    if (include_hot)
      for (int k = 0; k < n_diag; ++k)
        features(static_cast<Eigen::Index>(i), n_diag + k) =
            shares.hot[i][static_cast<std::size_t>(k)];
  }
  nlohmann::json meta;
  meta["kind"] = "text_features";
  meta["n_diagnoses"] = n_diag;
  meta["mean_tokens_per_doc"] = report.mean_tokens_per_doc;
  meta["mean_onegram_types_per_doc"] = report.mean_onegram_types_per_doc;
  save_matrix_csv(out + "/features.csv", features, cols, meta);

  // Bounded DTM artifacts over the unit corpus.
  const DocumentTermMatrix dtm = build_dtm(corpus, bigrams);
  const DocumentTermMatrix bounded =
      bound_tf(dtm, cfg.get_long_or("min_term_freq", 350), cfg.get_long_or("min_doc_freq", 150));
  save_dtm(out + "/dtm_bounded", bounded);

  Manifest manifest;
  manifest.stage = "featurize";
  manifest.seed = static_cast<std::uint64_t>(cfg.get_long_or("seed", 0));
  manifest.config = config_echo(cfg);
  manifest.add_input(corpus_path);
  manifest.add_input(lexicon_corpus_path);
  manifest.add_input(labels_path);
  manifest.outputs = {out + "/features.csv", out + "/lexicon.json"};
  manifest.save(out);
  std::cout << "featurize: " << corpus.n_docs() << " docs, mean tokens/doc "
            << report.mean_tokens_per_doc << ", mean onegram types/doc "
            << report.mean_onegram_types_per_doc << "\n";
  return 0;
}

int cmd_fit(const CommonArgs& args) {
  const KvConfig cfg = load_config(args);
  const std::string out = require_out(cfg);
  const std::string data_dir = cfg.get("data");
  const std::string features_csv = cfg.get_or("features", "");

  std::vector<std::string> inputs = {data_dir + "/data.csv"};
  if (!features_csv.empty()) inputs.push_back(features_csv);
  check_inputs_against_manifest(fs::path(data_dir).parent_path().string() + "/manifest.json",
                                inputs);
  if (!features_csv.empty())
    check_inputs_against_manifest(fs::path(features_csv).parent_path().string() +
                                      "/manifest.json",
                                  {features_csv});

  const LoadedDataset loaded = load_dataset_dir(data_dir);
  const std::vector<LearnerSpec> specs = parse_specs(cfg);
  const FeatureBlocks blocks = assemble_blocks(loaded.dataset, features_csv, specs);

  CrossfitOptions opt;
  opt.K = static_cast<int>(cfg.get_long_or("K", 5));
  opt.seed = static_cast<std::uint64_t>(cfg.get_long_or("seed", 1));
  opt.stratify = cfg.get_bool_or("stratify", true);
  opt.outcome = cfg.get_or("outcome", "");
  opt.inner_folds = static_cast<int>(cfg.get_long_or("inner_folds", 2));
  opt.clip_eps = cfg.get_double_or("clip_eps", 0.01);
  opt.threads = effective_threads(args.threads);
  const std::string weighting = cfg.get_or("ensemble_weighting", "inverse_mse");
  if (weighting == "equal")
    opt.weighting = EnsembleWeighting::equal;
  else if (weighting != "inverse_mse")
    throw ConfigError("ensemble_weighting must be inverse_mse or equal");

  const NuisanceFit fit = crossfit_nuisances(loaded.dataset, blocks, specs, opt);
  nlohmann::json meta;
  meta["config"] = config_echo(cfg);
  save_nuisance(out, fit, loaded.dataset.catalogue.labels, meta);

  // Per-fold ensemble diagnostics: ranked specs, CV MSEs and weights.
  nlohmann::json report = nlohmann::json::array();
  for (std::size_t k = 0; k < fit.ensemble_reports.size(); ++k) {
    nlohmann::json fold;
    fold["fold"] = k;
    auto dump_side = [](const std::vector<EnsembleWeights>& side) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& ew : side) {
        nlohmann::json entry;
        nlohmann::json ranked = nlohmann::json::array();
        for (const auto& r : ew.ranked) {
          nlohmann::json rj;
          rj["spec"] = r.spec.name();
          rj["cv_mse"] = r.cv_mse;
          ranked.push_back(std::move(rj));
        }
        entry["ranked"] = std::move(ranked);
        entry["weights"] = ew.weights;
        if (!ew.warnings.empty()) entry["warnings"] = ew.warnings;
        arr.push_back(std::move(entry));
      }
      return arr;
    };
    fold["propensity"] = dump_side(fit.ensemble_reports[k].propensity);
    fold["outcome"] = dump_side(fit.ensemble_reports[k].outcome);
    report.push_back(std::move(fold));
  }
  write_json_file(out + "/ensemble_report.json", report);

  Manifest manifest;
  manifest.stage = "fit";
  manifest.seed = opt.seed;
  manifest.config = config_echo(cfg);
  for (const auto& in : inputs) manifest.add_input(in);
  manifest.outputs = {out + "/p_hat.csv", out + "/mu_hat.csv", out + "/folds.csv"};
  manifest.save(out);
  std::cout << "fit: nuisances for outcome '" << fit.outcome_name << "', K=" << opt.K
            << " written to " << out << "\n";
  return 0;
}

struct EffectsFlags {
  std::vector<std::string> pair;
  std::string gate_var;
  std::string cate_var;
  bool iate = false;
};

int cmd_effects(const CommonArgs& args, const EffectsFlags& flags) {
  const KvConfig cfg = load_config(args);
  const std::string out = require_out(cfg);
  const std::string data_dir = cfg.get("data");
  const std::string nuisance_dir = cfg.get("nuisance");

  check_inputs_against_manifest(nuisance_dir + "/manifest.json",
                                {nuisance_dir + "/p_hat.csv", nuisance_dir + "/mu_hat.csv"});

  const LoadedDataset loaded = load_dataset_dir(data_dir);
  const Dataset& data = loaded.dataset;
  NuisanceFit nuisance = load_nuisance(nuisance_dir);
  const Outcome& outcome =
      nuisance.outcome_name.empty() ? data.outcomes.front() : data.outcome(nuisance.outcome_name);

  const TrimmingScheme trimming = parse_trimming(cfg.get_or("trimming", "none"));
  ScoreOptions score_opt;
  score_opt.tilting = cfg.get_or("tilting", "ate") == "ato" ? Tilting::ato : Tilting::ate;
  score_opt.normalized = cfg.get_bool_or("normalized", false);
  if (trimming.kind != TrimmingKind::none)
    score_opt.keep_mask = apply_trimming(nuisance.p_hat, data.treatment, trimming);
  const ScoreMatrix scores =
      build_scores(nuisance, outcome, data.treatment, data.catalogue.labels, score_opt);

  nlohmann::json score_meta;
  score_meta["seed"] = nuisance.folds.seed;
  score_meta["K"] = nuisance.folds.K;
  score_meta["trimming"] = trimming.name();
  save_scores(out + "/scores.csv", scores, score_meta);

  // Estimand selection: explicit pair or every ordered pair.
  std::vector<std::pair<int, int>> pairs;
  if (!flags.pair.empty()) {
    if (flags.pair.size() != 2) throw ConfigError("--pair needs two labels");
    const int d = data.catalogue.index_of(flags.pair[0]);
    const int dp = data.catalogue.index_of(flags.pair[1]);
    if (d < 0 || dp < 0) throw ValueError("unknown treatment label in --pair");
    pairs.emplace_back(d, dp);
  } else {
    for (int d = 0; d < static_cast<int>(data.catalogue.size()); ++d)
      for (int dp = 0; dp < d; ++dp) pairs.emplace_back(d, dp);
  }

  CsvTable effects;
  effects.header = {"estimand", "d",     "d_prime", "outcome",    "point",
                    "se",       "ci_lo", "ci_hi",   "n_used",     "trimming"};
  auto emit = [&](const EffectEstimate& est, const std::string& kind, const std::string& d,
                  const std::string& dp) {
    effects.rows.push_back({kind, d, dp, est.outcome_name, format_double(est.point),
                            format_double(est.se), format_double(est.ci_lo),
                            format_double(est.ci_hi), std::to_string(est.n_used),
                            trimming.name()});
  };
  for (int d = 0; d < static_cast<int>(data.catalogue.size()); ++d) {
    if (score_opt.tilting == Tilting::ato) break;
    const EffectEstimate apo = estimate(scores, Estimand::apo(d));
    emit(apo, "APO", data.catalogue.labels[static_cast<std::size_t>(d)], "");
  }
  for (const auto& [d, dp] : pairs) {
    const std::string dl = data.catalogue.labels[static_cast<std::size_t>(d)];
    const std::string dpl = data.catalogue.labels[static_cast<std::size_t>(dp)];
    if (score_opt.tilting == Tilting::ato) {
      emit(estimate(scores, Estimand::ato(d, dp)), "ATO", dl, dpl);
    } else {
      emit(estimate(scores, Estimand::ate(d, dp)), "ATE", dl, dpl);
      emit(estimate(scores, Estimand::atet(d, dp)), "ATET", dl, dpl);
    }
  }
  write_csv(out + "/effects.csv", effects);

  Manifest manifest;
  manifest.stage = "effects";
  manifest.seed = nuisance.folds.seed;
  manifest.config = config_echo(cfg);
  manifest.add_input(nuisance_dir + "/p_hat.csv");
  manifest.add_input(nuisance_dir + "/mu_hat.csv");
  manifest.add_input(data_dir + "/data.csv");
  manifest.outputs = {out + "/effects.csv", out + "/scores.csv"};

  // Heterogeneity extras run on the first requested pair (or 1 vs 0).
  const int het_d = pairs.empty() ? 1 : pairs.front().first;
  const int het_dp = pairs.empty() ? 0 : pairs.front().second;
  const std::vector<double> pair_scores_v = pairwise_scores(scores, het_d, het_dp);

  if (!flags.gate_var.empty()) {
    const int col = data.x_col(flags.gate_var);
    if (col < 0) throw ValueError("unknown gate variable '" + flags.gate_var + "'");
    std::vector<std::string> groups;
    for (auto i : scores.kept_indices())
      groups.push_back(format_double(data.X(static_cast<Eigen::Index>(i), col)));
    const GateResult gate_res = gate(pair_scores_v, groups, flags.gate_var);
    CsvTable gate_csv;
    gate_csv.header = {"level", "estimate", "se", "ci_lo", "ci_hi", "n"};
    for (const auto& level : gate_res.levels)
      gate_csv.rows.push_back({level.label, format_double(level.estimate),
                               format_double(level.se), format_double(level.ci_lo),
                               format_double(level.ci_hi), std::to_string(level.n)});
    write_csv(out + "/gate.csv", gate_csv);
    CsvTable diff_csv;
    diff_csv.header = {"level_a", "level_b", "diff", "se", "p_value"};
    for (const auto& diff : gate_res.diff_tests)
      diff_csv.rows.push_back({diff.level_a, diff.level_b, format_double(diff.diff),
                               format_double(diff.se), format_double(diff.p_value)});
    write_csv(out + "/gate_diffs.csv", diff_csv);
    manifest.outputs.push_back(out + "/gate.csv");
  }

  if (!flags.cate_var.empty()) {
    const int col = data.x_col(flags.cate_var);
    if (col < 0) throw ValueError("unknown cate variable '" + flags.cate_var + "'");
    std::vector<double> z;
    for (auto i : scores.kept_indices())
      z.push_back(data.X(static_cast<Eigen::Index>(i), col));
    const CateCurve curve =
        kernel_cate(pair_scores_v, z, static_cast<int>(cfg.get_long_or("cate_grid", 50)));
    CsvTable cate_csv;
    cate_csv.header = {"grid", "value", "lo", "hi", "gap"};
    for (std::size_t g = 0; g < curve.grid.size(); ++g)
      cate_csv.rows.push_back({format_double(curve.grid[g]), format_double(curve.values[g]),
                               format_double(curve.ci_lo[g]), format_double(curve.ci_hi[g]),
                               std::to_string(curve.gap[g])});
    write_csv(out + "/cate.csv", cate_csv);
    manifest.outputs.push_back(out + "/cate.csv");
  }

  if (flags.iate) {
    const std::vector<LearnerSpec> specs = parse_specs(cfg);
    const FeatureBlocks blocks =
        assemble_blocks(data, cfg.get_or("features", ""), specs);
    Eigen::VectorXd full_pair = scores.gamma.col(het_d) - scores.gamma.col(het_dp);
    IateOptions iopt;
    iopt.seed = nuisance.folds.seed;
    iopt.inner_folds = static_cast<int>(cfg.get_long_or("inner_folds", 2));
    iopt.threads = effective_threads(args.threads);
    const IateResult iate =
        iate_dr_learner(blocks, full_pair, scores.keep_mask, nuisance.folds, specs, iopt);

    CsvTable iate_csv;
    iate_csv.header = {"id", "iate"};
    for (std::size_t i = 0; i < data.n(); ++i)
      iate_csv.rows.push_back({data.unit_ids[i],
                               format_double(iate.values(static_cast<Eigen::Index>(i)))});
    write_csv(out + "/iate.csv", iate_csv);

    const QuintileProfile profile = classify_quintiles(iate.values, data.X, data.x_names);
    CsvTable smd_csv;
    smd_csv.header = {"covariate", "smd", "flagged"};
    for (const auto& s : profile.smd)
      smd_csv.rows.push_back({s.covariate, format_double(s.value), s.flagged ? "1" : "0"});
    write_csv(out + "/iate_quintile_smd.csv", smd_csv);
    manifest.outputs.push_back(out + "/iate.csv");
    manifest.outputs.push_back(out + "/iate_quintile_smd.csv");
  }

  manifest.save(out);
  std::cout << "effects: " << effects.rows.size() << " estimates written to " << out << "\n";
  return 0;
}

struct PolicyFlags {
  std::vector<std::string> features;
  int depth = 2;
  std::vector<std::string> treatments;
};

int cmd_policy(const CommonArgs& args, const PolicyFlags& flags) {
  const KvConfig cfg = load_config(args);
  const std::string out = require_out(cfg);
  const std::string data_dir = cfg.get("data");
  const std::string scores_csv = cfg.get("scores");

  check_inputs_against_manifest(fs::path(scores_csv).parent_path().string() + "/manifest.json",
                                {scores_csv});

  const LoadedDataset loaded = load_dataset_dir(data_dir);
  const Dataset& data = loaded.dataset;
  const ScoreMatrix scores = load_scores(scores_csv);
  if (scores.n() != data.n()) throw DataError("policy: score rows do not match the dataset");

  std::vector<std::string> feature_names = flags.features;
  if (feature_names.empty()) feature_names = cfg.list_or("features");
  if (feature_names.empty()) feature_names = data.z_names;
  if (feature_names.empty()) throw ConfigError("policy: no features given (use --features)");
  Eigen::MatrixXd Z(static_cast<Eigen::Index>(data.n()),
                    static_cast<Eigen::Index>(feature_names.size()));
  for (std::size_t f = 0; f < feature_names.size(); ++f) {
    const int col = data.x_col(feature_names[f]);
    if (col < 0) throw ValueError("policy: unknown feature '" + feature_names[f] + "'");
    Z.col(static_cast<Eigen::Index>(f)) = data.X.col(col);
  }

  PolicyTreeOptions topt;
  topt.depth = flags.depth > 0 ? flags.depth : static_cast<int>(cfg.get_long_or("depth", 2));
  std::vector<std::string> treatment_labels = flags.treatments;
  if (treatment_labels.empty()) treatment_labels = cfg.list_or("treatments");
  for (const auto& label : treatment_labels) {
    const int d = data.catalogue.index_of(label);
    if (d < 0) throw ValueError("policy: unknown treatment '" + label + "'");
    topt.treatments.push_back(d);
  }
  topt.eval_cap = static_cast<std::uint64_t>(cfg.get_long_or("eval_cap", 1000000000L));

  const PolicyTree tree = fit_policy_tree(Z, feature_names, scores, topt);
  write_json_file(out + "/tree.json", tree.to_json());

  const std::vector<int> assignment = tree.assign(Z);
  const TreatmentCatalogue* costs = data.catalogue.costs.empty() ? nullptr : &data.catalogue;
  const PolicyEvaluation eval = policy_value(assignment, scores, costs, &data.treatment);
  const PolicyEvaluation observed_eval =
      policy_value(data.treatment, scores, costs, &data.treatment);

  CsvTable eval_csv;
  eval_csv.header = {"policy", "value", "total_cost", "cost_ratio_vs_actual", "n"};
  auto eval_row = [&](const std::string& name, const PolicyEvaluation& pe) {
    eval_csv.rows.push_back({name, format_double(pe.value), format_double(pe.total_cost),
                             format_double(pe.cost_ratio_vs_actual), std::to_string(pe.n)});
  };
  eval_row("tree", eval);
  eval_row("observed", observed_eval);
  CsvTable share_csv;
  share_csv.header = {"treatment", "share_tree", "share_observed"};
  for (std::size_t d = 0; d < scores.treatment_labels.size(); ++d)
    share_csv.rows.push_back({scores.treatment_labels[d],
                              format_double(eval.share_per_treatment[d]),
                              format_double(observed_eval.share_per_treatment[d])});
  write_csv(out + "/evaluation.csv", eval_csv);
  write_csv(out + "/shares.csv", share_csv);

  PolicyValidationOptions vopt;
  vopt.tree = topt;
  vopt.folds = static_cast<int>(cfg.get_long_or("validate_folds", 10));
  vopt.seed = static_cast<std::uint64_t>(cfg.get_long_or("seed", 1));
  const PolicyValidation validation =
      validate_policy(Z, feature_names, scores, data.treatment, vopt);
  CsvTable val_csv;
  val_csv.header = {"baseline", "mean_diff", "se", "t", "p_value", "n", "degenerate"};
  for (const auto& test : validation.tests)
    val_csv.rows.push_back({test.baseline, format_double(test.mean_diff),
                            format_double(test.se), format_double(test.t_stat),
                            format_double(test.p_value), std::to_string(test.n),
                            test.degenerate ? "1" : "0"});
  write_csv(out + "/validation.csv", val_csv);

  Manifest manifest;
  manifest.stage = "policy";
  manifest.seed = vopt.seed;
  manifest.config = config_echo(cfg);
  manifest.add_input(scores_csv);
  manifest.add_input(data_dir + "/data.csv");
  manifest.outputs = {out + "/tree.json", out + "/evaluation.csv", out + "/validation.csv"};
  manifest.save(out);
  std::cout << "policy: depth-" << topt.depth << " tree value " << eval.value
            << " (observed " << observed_eval.value << ") written to " << out << "\n";
  return 0;
}

int cmd_iv(const CommonArgs& args) {
  const KvConfig cfg = load_config(args);
  const std::string out = require_out(cfg);
  const std::string data_dir = cfg.get("data");
  const LoadedDataset loaded = load_dataset_dir(data_dir);
  const Dataset& data = loaded.dataset;

  const std::string treated_label = cfg.get("treated_label");
  const int treated_arm = data.catalogue.index_of(treated_label);
  if (treated_arm < 0) throw ValueError("iv: unknown treated label '" + treated_label + "'");
  const int school_col = data.x_col(cfg.get_or("school_col", "school"));
  const int year_col = data.x_col(cfg.get_or("year_col", "year"));
  if (school_col < 0 || year_col < 0) throw SchemaError("iv: need school and year columns");

  const std::size_t n = data.n();
  std::vector<int> treated(n), school(n), year(n);
  for (std::size_t i = 0; i < n; ++i) {
    treated[i] = data.treatment[i] == treated_arm ? 1 : 0;
    school[i] = static_cast<int>(data.X(static_cast<Eigen::Index>(i), school_col));
    year[i] = static_cast<int>(data.X(static_cast<Eigen::Index>(i), year_col));
  }

  // Covariates for the adjusted deviation and the 2SLS regression.
  std::optional<Eigen::MatrixXd> covariates;
  const auto cov_names = cfg.list_or("covariates");
  if (!cov_names.empty()) {
    Eigen::MatrixXd C(static_cast<Eigen::Index>(n),
                      static_cast<Eigen::Index>(cov_names.size()));
    for (std::size_t c = 0; c < cov_names.size(); ++c) {
      const int col = data.x_col(cov_names[c]);
      if (col < 0) throw ValueError("iv: unknown covariate '" + cov_names[c] + "'");
      C.col(static_cast<Eigen::Index>(c)) = data.X.col(col);
    }
    covariates = std::move(C);
  }

  DeviationOptions dopt;
  dopt.leave_one_out = cfg.get_bool_or("leave_one_out", false);
  dopt.school_level_year_mean = cfg.get_bool_or("school_level_year_mean", false);
  const DeviationInstrument dev =
      build_deviation_instrument(treated, school, year, covariates, dopt);

  const Outcome& outcome =
      cfg.has("outcome") ? data.outcome(cfg.get("outcome")) : data.outcomes.front();
  Eigen::VectorXd y(static_cast<Eigen::Index>(n)), d_vec(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    y(static_cast<Eigen::Index>(i)) = outcome.values(static_cast<Eigen::Index>(i));
    d_vec(static_cast<Eigen::Index>(i)) = treated[i];
  }

  std::optional<std::vector<int>> cluster;
  if (cfg.get_bool_or("cluster_se", false)) cluster = school;

  CsvTable iv_csv;
  iv_csv.header = {"instrument", "estimate", "se",      "ci_lo",       "ci_hi",
                   "first_stage", "first_stage_f", "reduced_form", "weak_flag", "n"};
  for (const auto& [name, z] : {std::pair<std::string, const Eigen::VectorXd&>{"raw", dev.raw},
                                {"adjusted", dev.adjusted}}) {
    const TwoSlsResult res = two_sls(y, d_vec, z, covariates, cluster);
    iv_csv.rows.push_back({name, format_double(res.estimate), format_double(res.se),
                           format_double(res.ci_lo), format_double(res.ci_hi),
                           format_double(res.first_stage_coef),
                           format_double(res.first_stage_f),
                           format_double(res.reduced_form_coef),
                           res.weak_instrument ? "1" : "0", std::to_string(res.n)});
  }
  write_csv(out + "/iv.csv", iv_csv);

  Manifest manifest;
  manifest.stage = "iv";
  manifest.seed = static_cast<std::uint64_t>(cfg.get_long_or("seed", 0));
  manifest.config = config_echo(cfg);
  manifest.add_input(data_dir + "/data.csv");
  manifest.outputs = {out + "/iv.csv"};
  manifest.save(out);
  std::cout << "iv: estimates written to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multivalued-treatment causal ML pipeline"};
  app.require_subcommand(1);

  CommonArgs common;
  EffectsFlags effects_flags;
  PolicyFlags policy_flags;

  auto add_common = [&common](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "key=value config file");
    sub->add_option("--out", common.out, "output directory");
    sub->add_option("--seed", common.seed, "RNG seed override");
    sub->add_option("--threads", common.threads, "worker threads (0 = all cores)");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "draw a synthetic dataset");
  add_common(simulate);
  CLI::App* featurize = app.add_subcommand("featurize", "text features from a corpus");
  add_common(featurize);
  CLI::App* fit = app.add_subcommand("fit", "cross-fitted nuisance estimation");
  add_common(fit);
  CLI::App* effects = app.add_subcommand("effects", "doubly-robust effect estimates");
  add_common(effects);
  effects->add_option("--pair", effects_flags.pair, "treatment pair (two labels)")
      ->expected(2);
  effects->add_option("--gate", effects_flags.gate_var, "GATE group variable");
  effects->add_option("--cate", effects_flags.cate_var, "kernel CATE moderator");
  effects->add_flag("--iate", effects_flags.iate, "out-of-fold DR-learner IATEs");
  CLI::App* policy = app.add_subcommand("policy", "optimal policy tree");
  add_common(policy);
  policy->add_option("--features", policy_flags.features, "policy features")
      ->delimiter(',');
  policy->add_option("--depth", policy_flags.depth, "tree depth (1-3)");
  policy->add_option("--treatments", policy_flags.treatments, "candidate treatments")
      ->delimiter(',');
  CLI::App* iv = app.add_subcommand("iv", "school-year deviation 2SLS");
  add_common(iv);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(common);
    if (featurize->parsed()) return cmd_featurize(common);
    if (fit->parsed()) return cmd_fit(common);
    if (effects->parsed()) return cmd_effects(common, effects_flags);
    if (policy->parsed()) return cmd_policy(common, policy_flags);
    if (iv->parsed()) return cmd_iv(common);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParameterError& e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
