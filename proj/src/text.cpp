#include "mtdml/text.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "mtdml/csv.hpp"
#include "mtdml/errors.hpp"
#include "mtdml/stats.hpp"

namespace mtdml {

Stemmer identity_stemmer() {
  return [](const std::string& t) { return t; };
}

Stemmer default_stemmer() {
  // Longest-match suffix strip, keeping stems of at least 4 bytes.
  static const std::vector<std::string> suffixes = {"ungen", "keit", "heit", "isch",
                                                    "lich", "ung",  "en",   "er",
                                                    "es",   "em",   "e",    "n",
                                                    "s"};
  return [](const std::string& t) {
    for (const auto& suf : suffixes) {
      if (t.size() >= suf.size() + 4 && t.compare(t.size() - suf.size(), suf.size(), suf) == 0)
        return t.substr(0, t.size() - suf.size());
    }
    return t;
  };
}

namespace {

bool is_letter_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

std::vector<std::string> tokenize(const std::string& raw) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : raw) {
    if (is_letter_byte(c)) {
      current.push_back(static_cast<char>((c >= 'A' && c <= 'Z') ? c - 'A' + 'a' : c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string stem_fixpoint(const Stemmer& stemmer, std::string token) {
  for (int iter = 0; iter < 8; ++iter) {
    std::string next = stemmer(token);
    if (next == token) break;
    token = std::move(next);
  }
  return token;
}

}  // namespace

TokenizedCorpus preprocess(const std::vector<std::string>& raw_docs,
                           const std::set<std::string>& stopwords, const Stemmer& stemmer,
                           const std::vector<std::string>& doc_ids) {
  if (raw_docs.empty()) throw ParameterError("preprocess: empty corpus");
  if (stopwords.empty()) throw ParameterError("preprocess: empty stopword list");
  if (!doc_ids.empty() && doc_ids.size() != raw_docs.size())
    throw ParameterError("preprocess: doc id count mismatch");

  TokenizedCorpus corpus;
  corpus.docs.resize(raw_docs.size());
  corpus.empty_doc.assign(raw_docs.size(), 0);
  corpus.doc_ids.resize(raw_docs.size());
  std::set<std::string> types;

  for (std::size_t d = 0; d < raw_docs.size(); ++d) {
    corpus.doc_ids[d] = doc_ids.empty() ? std::to_string(d) : doc_ids[d];
    std::vector<std::string> kept;
    for (auto& tok : tokenize(raw_docs[d])) {
      if (stopwords.count(tok)) continue;
      std::string stemmed = stem_fixpoint(stemmer, std::move(tok));
      if (stemmed.empty() || stopwords.count(stemmed)) continue;
      kept.push_back(std::move(stemmed));
    }
    if (kept.empty()) corpus.empty_doc[d] = 1;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      types.insert(kept[i]);
      if (i + 1 < kept.size()) types.insert(kept[i] + " " + kept[i + 1]);
    }
    corpus.docs[d] = std::move(kept);
  }
  corpus.vocab.assign(types.begin(), types.end());
  return corpus;
}

CorpusReport corpus_report(const TokenizedCorpus& corpus) {
  CorpusReport rep;
  rep.n_docs = corpus.n_docs();
  rep.vocab_size = corpus.vocab.size();
  double tokens = 0.0, types = 0.0;
  for (const auto& doc : corpus.docs) {
    tokens += static_cast<double>(doc.size());
    types += static_cast<double>(std::set<std::string>(doc.begin(), doc.end()).size());
  }
  if (rep.n_docs > 0) {
    rep.mean_tokens_per_doc = tokens / static_cast<double>(rep.n_docs);
    rep.mean_onegram_types_per_doc = types / static_cast<double>(rep.n_docs);
  }
  return rep;
}

double DocumentTermMatrix::at(std::size_t doc, int col) const {
  const auto& row = rows[doc];
  auto it = std::lower_bound(row.begin(), row.end(), col,
                             [](const std::pair<int, double>& e, int c) { return e.first < c; });
  return (it != row.end() && it->first == col) ? it->second : 0.0;
}

std::vector<double> DocumentTermMatrix::col_sums() const {
  std::vector<double> sums(vocab.size(), 0.0);
  for (const auto& row : rows)
    for (const auto& [c, v] : row) sums[static_cast<std::size_t>(c)] += v;
  return sums;
}

std::vector<long> DocumentTermMatrix::doc_freq() const {
  std::vector<long> df(vocab.size(), 0);
  for (const auto& row : rows)
    for (const auto& [c, v] : row)
      if (v != 0.0) df[static_cast<std::size_t>(c)]++;
  return df;
}

std::vector<std::vector<double>> DocumentTermMatrix::dense() const {
  std::vector<std::vector<double>> out(rows.size(), std::vector<double>(vocab.size(), 0.0));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (const auto& [c, v] : rows[i]) out[i][static_cast<std::size_t>(c)] = v;
  return out;
}

DocumentTermMatrix build_dtm(const TokenizedCorpus& corpus, bool include_bigrams) {
  if (corpus.n_docs() == 0) throw ParameterError("build_dtm: empty corpus");
  DocumentTermMatrix dtm;
  dtm.weighting = DtmWeighting::raw;

  std::set<std::string> types;
  for (const auto& doc : corpus.docs) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      types.insert(doc[i]);
      if (include_bigrams && i + 1 < doc.size()) types.insert(doc[i] + " " + doc[i + 1]);
    }
  }
  dtm.vocab.assign(types.begin(), types.end());
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < dtm.vocab.size(); ++i)
    index.emplace(dtm.vocab[i], static_cast<int>(i));

  dtm.rows.resize(corpus.n_docs());
  for (std::size_t d = 0; d < corpus.n_docs(); ++d) {
    std::map<int, double> counts;
    const auto& doc = corpus.docs[d];
    for (std::size_t i = 0; i < doc.size(); ++i) {
      counts[index.at(doc[i])] += 1.0;
      if (include_bigrams && i + 1 < doc.size())
        counts[index.at(doc[i] + " " + doc[i + 1])] += 1.0;
    }
    dtm.rows[d].assign(counts.begin(), counts.end());
  }
  return dtm;
}

namespace {

DocumentTermMatrix keep_columns(const DocumentTermMatrix& dtm,
                                const std::vector<std::uint8_t>& keep) {
  DocumentTermMatrix out;
  out.weighting = dtm.weighting;
  out.min_term_freq = dtm.min_term_freq;
  out.min_doc_freq = dtm.min_doc_freq;
  out.bound_percentile = dtm.bound_percentile;
  std::vector<int> remap(dtm.vocab.size(), -1);
  for (std::size_t c = 0; c < dtm.vocab.size(); ++c) {
    if (!keep[c]) continue;
    remap[c] = static_cast<int>(out.vocab.size());
    out.vocab.push_back(dtm.vocab[c]);
  }
  out.rows.resize(dtm.rows.size());
  for (std::size_t i = 0; i < dtm.rows.size(); ++i)
    for (const auto& [c, v] : dtm.rows[i])
      if (remap[static_cast<std::size_t>(c)] >= 0)
        out.rows[i].emplace_back(remap[static_cast<std::size_t>(c)], v);
  return out;
}

}  // namespace

DocumentTermMatrix bound_tf(const DocumentTermMatrix& dtm, long min_term_freq,
                            long min_doc_freq) {
  if (dtm.weighting != DtmWeighting::raw)
    throw ParameterError("bound_tf: input must carry raw counts");
  const auto sums = dtm.col_sums();
  const auto df = dtm.doc_freq();
  std::vector<std::uint8_t> keep(dtm.vocab.size(), 0);
  for (std::size_t c = 0; c < dtm.vocab.size(); ++c)
    keep[c] = (sums[c] >= static_cast<double>(min_term_freq) && df[c] >= min_doc_freq) ? 1 : 0;
  DocumentTermMatrix out = keep_columns(dtm, keep);
  out.weighting = DtmWeighting::tf;
  out.min_term_freq = min_term_freq;
  out.min_doc_freq = min_doc_freq;
  return out;
}

DocumentTermMatrix weight_tfidf(const DocumentTermMatrix& dtm, double bound_percentile) {
  if (dtm.weighting != DtmWeighting::raw && dtm.weighting != DtmWeighting::tf)
    throw ParameterError("weight_tfidf: input must carry counts");
  if (bound_percentile < 0.0 || bound_percentile > 1.0)
    throw ParameterError("weight_tfidf: percentile outside [0,1]");
  const double n_docs = static_cast<double>(dtm.n_docs());
  const auto df = dtm.doc_freq();

  DocumentTermMatrix weighted = dtm;
  std::vector<double> nonzero_scores;
  std::vector<double> col_max(dtm.vocab.size(), 0.0);
  for (auto& row : weighted.rows) {
    for (auto& [c, v] : row) {
      const double idf =
          df[static_cast<std::size_t>(c)] > 0
              ? std::log(n_docs / static_cast<double>(df[static_cast<std::size_t>(c)]))
              : 0.0;
      v *= idf;
      if (v > 0.0) nonzero_scores.push_back(v);
      col_max[static_cast<std::size_t>(c)] = std::max(col_max[static_cast<std::size_t>(c)], v);
    }
  }

  std::vector<std::uint8_t> keep(dtm.vocab.size(), 1);
  if (!nonzero_scores.empty()) {
    const double bound = quantile(nonzero_scores, bound_percentile);
    for (std::size_t c = 0; c < dtm.vocab.size(); ++c)
      keep[c] = col_max[c] >= bound ? 1 : 0;
  }
  // An all-zero score set (every idf zero) leaves no usable bound; keep all.
  DocumentTermMatrix out = keep_columns(weighted, keep);
  out.weighting = dtm.weighting == DtmWeighting::tf ? DtmWeighting::tf_then_tfidf
                                                    : DtmWeighting::tfidf;
  out.bound_percentile = bound_percentile;
  return out;
}

std::string keyness_measure_name(KeynessMeasure m) {
  switch (m) {
    case KeynessMeasure::chi2: return "chi2";
    case KeynessMeasure::g2: return "g2";
    case KeynessMeasure::pmi: return "pmi";
    case KeynessMeasure::freq: return "freq";
    case KeynessMeasure::tfidf_freq: return "tfidf_freq";
  }
  return "?";
}

double chi2_stat(double a, double b, double n_c, double n_r) {
  const double o11 = a, o12 = b, o21 = n_c - a, o22 = n_r - b;
  const double N = n_c + n_r;
  const double r1 = o11 + o12, r2 = o21 + o22, c1 = o11 + o21, c2 = o12 + o22;
  if (r1 <= 0.0 || r2 <= 0.0 || c1 <= 0.0 || c2 <= 0.0) return 0.0;
  const double det = o11 * o22 - o12 * o21;
  return N * det * det / (r1 * r2 * c1 * c2);
}

namespace {
double xlogx_ratio(double o, double e) { return o <= 0.0 ? 0.0 : o * std::log(o / e); }
}  // namespace

double g2_stat(double a, double b, double n_c, double n_r) {
  const double o11 = a, o12 = b, o21 = n_c - a, o22 = n_r - b;
  const double N = n_c + n_r;
  const double r1 = o11 + o12, r2 = o21 + o22, c1 = o11 + o21, c2 = o12 + o22;
  if (r1 <= 0.0 || r2 <= 0.0 || c1 <= 0.0 || c2 <= 0.0) return 0.0;
  const double e11 = r1 * c1 / N, e12 = r1 * c2 / N, e21 = r2 * c1 / N, e22 = r2 * c2 / N;
  const double g2 = 2.0 * (xlogx_ratio(o11, e11) + xlogx_ratio(o12, e12) +
                           xlogx_ratio(o21, e21) + xlogx_ratio(o22, e22));
  return (o11 >= e11) ? g2 : -g2;
}

double pmi_stat(double a, double b, double n_c, double n_r) {
  const double N = n_c + n_r;
  const double token_mass = a + b;
  if (a <= 0.0 || token_mass <= 0.0 || n_c <= 0.0)
    return -std::numeric_limits<double>::infinity();
  return std::log((a / N) / ((token_mass / N) * (n_c / N)));
}

KeynessResult keyness(const DocumentTermMatrix& dtm, const std::vector<int>& labels,
                      int n_classes, KeynessMeasure measure, int top_k) {
  if (n_classes < 2) throw ParameterError("keyness: need at least 2 classes");
  if (top_k < 1) throw ParameterError("keyness: top_k must be >= 1");
  if (labels.size() != dtm.n_docs()) throw ParameterError("keyness: label count mismatch");

  const std::size_t V = dtm.vocab.size();
  // Pooled token counts per class.
  std::vector<std::vector<double>> class_count(static_cast<std::size_t>(n_classes),
                                               std::vector<double>(V, 0.0));
  std::vector<double> class_total(static_cast<std::size_t>(n_classes), 0.0);
  for (std::size_t i = 0; i < dtm.n_docs(); ++i) {
    const int c = labels[i];
    if (c < 0 || c >= n_classes) throw ParameterError("keyness: label out of range");
    for (const auto& [col, v] : dtm.rows[i]) {
      class_count[static_cast<std::size_t>(c)][static_cast<std::size_t>(col)] += v;
      class_total[static_cast<std::size_t>(c)] += v;
    }
  }
  double grand_total = 0.0;
  std::vector<double> token_total(V, 0.0);
  for (int c = 0; c < n_classes; ++c) {
    grand_total += class_total[static_cast<std::size_t>(c)];
    for (std::size_t t = 0; t < V; ++t)
      token_total[t] += class_count[static_cast<std::size_t>(c)][t];
  }
  const double n_docs = static_cast<double>(dtm.n_docs());
  const auto df = dtm.doc_freq();

  KeynessResult result;
  result.per_class.resize(static_cast<std::size_t>(n_classes));
  result.empty_class.assign(static_cast<std::size_t>(n_classes), 0);

  for (int c = 0; c < n_classes; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    if (class_total[ci] <= 0.0) {
      result.empty_class[ci] = 1;
      continue;
    }
    const double n_c = class_total[ci];
    const double n_r = grand_total - n_c;
    std::vector<std::pair<std::string, double>> scored;
    scored.reserve(V);
    for (std::size_t t = 0; t < V; ++t) {
      const double a = class_count[ci][t];
      const double b = token_total[t] - a;
      // chi2 ranks signed toward class over-representation, matching the
      // signed G2 convention; the raw symmetric statistic is chi2_stat.
      const bool over = a * (n_c + n_r) >= (a + b) * n_c;
      double score = 0.0;
      switch (measure) {
        case KeynessMeasure::chi2:
          score = (over ? 1.0 : -1.0) * chi2_stat(a, b, n_c, n_r);
          break;
        case KeynessMeasure::g2: score = g2_stat(a, b, n_c, n_r); break;
        case KeynessMeasure::pmi: score = pmi_stat(a, b, n_c, n_r); break;
        case KeynessMeasure::freq: score = a; break;
        case KeynessMeasure::tfidf_freq:
          score = (df[t] > 0) ? a * std::log(n_docs / static_cast<double>(df[t])) : 0.0;
          break;
      }
      scored.emplace_back(dtm.vocab[t], score);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
      if (x.second != y.second) return x.second > y.second;
      return x.first < y.first;
    });
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(top_k),
                                                   scored.size());
    result.per_class[ci].assign(scored.begin(), scored.begin() + static_cast<long>(keep));
  }
  return result;
}

nlohmann::json KeynessLexicon::to_json() const {
  nlohmann::json j;
  j["diagnoses"] = diagnoses;
  nlohmann::json toks = nlohmann::json::array();
  nlohmann::json prov = nlohmann::json::array();
  for (std::size_t k = 0; k < tokens_of.size(); ++k) {
    toks.push_back(std::vector<std::string>(tokens_of[k].begin(), tokens_of[k].end()));
    nlohmann::json pk = nlohmann::json::object();
    for (const auto& [token, measures] : provenance[k])
      pk[token] = std::vector<std::string>(measures.begin(), measures.end());
    prov.push_back(std::move(pk));
  }
  j["tokens"] = std::move(toks);
  j["provenance"] = std::move(prov);
  return j;
}

KeynessLexicon KeynessLexicon::from_json(const nlohmann::json& j) {
  KeynessLexicon lex;
  lex.diagnoses = j.at("diagnoses").get<std::vector<std::string>>();
  for (const auto& arr : j.at("tokens")) {
    const auto v = arr.get<std::vector<std::string>>();
    lex.tokens_of.emplace_back(v.begin(), v.end());
  }
  for (const auto& pk : j.at("provenance")) {
    std::map<std::string, std::set<std::string>> m;
    for (auto it = pk.begin(); it != pk.end(); ++it) {
      const auto v = it.value().get<std::vector<std::string>>();
      m[it.key()] = std::set<std::string>(v.begin(), v.end());
    }
    lex.provenance.push_back(std::move(m));
  }
  return lex;
}

KeynessLexicon build_lexicon(const DocumentTermMatrix& dtm, const std::vector<int>& labels,
                             const std::vector<std::string>& diagnosis_names,
                             const LexiconCounts& counts) {
  const int K = static_cast<int>(diagnosis_names.size());
  if (K < 2) throw ParameterError("build_lexicon: need at least 2 diagnoses");

  KeynessLexicon lex;
  lex.diagnoses = diagnosis_names;
  lex.tokens_of.resize(static_cast<std::size_t>(K));
  lex.provenance.resize(static_cast<std::size_t>(K));

  const std::vector<std::pair<KeynessMeasure, int>> plan = {
      {KeynessMeasure::freq, counts.freq},
      {KeynessMeasure::tfidf_freq, counts.tfidf_freq},
      {KeynessMeasure::chi2, counts.chi2},
      {KeynessMeasure::g2, counts.g2},
      {KeynessMeasure::pmi, counts.pmi},
  };
  for (const auto& [measure, top_k] : plan) {
    if (top_k <= 0) continue;
    const KeynessResult res = keyness(dtm, labels, K, measure, top_k);
    for (int k = 0; k < K; ++k) {
      for (const auto& [token, score] : res.per_class[static_cast<std::size_t>(k)]) {
        lex.tokens_of[static_cast<std::size_t>(k)].insert(token);
        lex.provenance[static_cast<std::size_t>(k)][token].insert(
            keyness_measure_name(measure));
      }
    }
  }
  return lex;
}

DiagnosisShares diagnosis_shares(const TokenizedCorpus& corpus, const KeynessLexicon& lexicon) {
  const std::size_t K = lexicon.diagnoses.size();
  if (K == 0) throw ParameterError("diagnosis_shares: empty lexicon");
  DiagnosisShares out;
  out.shares.assign(corpus.n_docs(), std::vector<double>(K, 0.0));
  out.hot.assign(corpus.n_docs(), std::vector<std::uint8_t>(K, 0));
  out.unmatched.assign(corpus.n_docs(), 0);

  for (std::size_t d = 0; d < corpus.n_docs(); ++d) {
    const auto& doc = corpus.docs[d];
    const double total_tokens = static_cast<double>(doc.size());
    auto& row = out.shares[d];
    if (total_tokens > 0.0) {
      for (std::size_t k = 0; k < K; ++k) {
        const auto& toks = lexicon.tokens_of[k];
        double matched = 0.0;
        for (std::size_t i = 0; i < doc.size(); ++i) {
          if (toks.count(doc[i])) matched += 1.0;
          if (i + 1 < doc.size() && toks.count(doc[i] + " " + doc[i + 1])) matched += 1.0;
        }
        row[k] = matched / total_tokens;
      }
    }
    double row_sum = 0.0;
    for (double v : row) row_sum += v;
    if (row_sum <= 0.0) {
      out.unmatched[d] = 1;
      continue;
    }
    for (double& v : row) v /= row_sum;

    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(K);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(K));
    for (std::size_t k = 0; k < K; ++k)
      out.hot[d][k] = (row[k] > mean + 1.5 * sd) ? 1 : 0;
  }
  return out;
}

DocumentTermMatrix strip_author_keyness(const DocumentTermMatrix& dtm,
                                        const std::vector<int>& author_ids, int n_authors,
                                        KeynessMeasure measure, int top_k) {
  if (n_authors < 2) throw ParameterError("strip_author_keyness: need at least 2 authors");
  const KeynessResult res = keyness(dtm, author_ids, n_authors, measure, top_k);
  // Only positively key tokens get removed: zero keyness means the author
  // uses the token at the corpus-wide rate.
  std::set<std::string> banned;
  for (const auto& cls : res.per_class)
    for (const auto& [token, score] : cls)
      if (score > 0.0) banned.insert(token);
  std::vector<std::uint8_t> keep(dtm.vocab.size(), 1);
  for (std::size_t c = 0; c < dtm.vocab.size(); ++c)
    if (banned.count(dtm.vocab[c])) keep[c] = 0;
  return keep_columns(dtm, keep);
}

void save_dtm(const std::string& path_prefix, const DocumentTermMatrix& dtm) {
  CsvTable triplets;
  triplets.header = {"row", "col", "value"};
  for (std::size_t i = 0; i < dtm.rows.size(); ++i)
    for (const auto& [c, v] : dtm.rows[i])
      triplets.rows.push_back({std::to_string(i), std::to_string(c), format_double(v)});
  write_csv(path_prefix + ".csv", triplets);

  std::ofstream vocab_out(path_prefix + ".vocab.txt", std::ios::binary);
  if (!vocab_out) throw DataError("dtm: cannot write vocab file");
  for (const auto& t : dtm.vocab) vocab_out << t << "\n";

  nlohmann::json meta;
  meta["kind"] = "dtm";
  meta["n_docs"] = dtm.n_docs();
  meta["weighting"] = static_cast<int>(dtm.weighting);
  meta["min_term_freq"] = dtm.min_term_freq;
  meta["min_doc_freq"] = dtm.min_doc_freq;
  meta["bound_percentile"] = dtm.bound_percentile;
  std::ofstream meta_out(path_prefix + ".meta.json", std::ios::binary);
  meta_out << meta.dump() << "\n";
}

DocumentTermMatrix load_dtm(const std::string& path_prefix) {
  DocumentTermMatrix dtm;
  std::ifstream vocab_in(path_prefix + ".vocab.txt", std::ios::binary);
  if (!vocab_in) throw DataError("dtm: cannot open vocab file");
  std::string line;
  while (std::getline(vocab_in, line))
    if (!line.empty()) dtm.vocab.push_back(line);

  std::ifstream meta_in(path_prefix + ".meta.json", std::ios::binary);
  if (!meta_in) throw DataError("dtm: cannot open meta file");
  nlohmann::json meta;
  meta_in >> meta;
  dtm.weighting = static_cast<DtmWeighting>(meta.at("weighting").get<int>());
  dtm.min_term_freq = meta.value("min_term_freq", 0L);
  dtm.min_doc_freq = meta.value("min_doc_freq", 0L);
  dtm.bound_percentile = meta.value("bound_percentile", 0.0);
  dtm.rows.resize(meta.at("n_docs").get<std::size_t>());

  const CsvTable triplets = read_csv(path_prefix + ".csv");
  const int ri = triplets.col("row"), ci = triplets.col("col"), vi = triplets.col("value");
  if (ri < 0 || ci < 0 || vi < 0) throw DataError("dtm: malformed triplet file");
  for (const auto& row : triplets.rows) {
    const auto r = static_cast<std::size_t>(parse_long(row[static_cast<std::size_t>(ri)], "dtm row"));
    const int c = static_cast<int>(parse_long(row[static_cast<std::size_t>(ci)], "dtm col"));
    const double v = parse_double(row[static_cast<std::size_t>(vi)], "dtm value");
    if (r >= dtm.rows.size() || c < 0 || static_cast<std::size_t>(c) >= dtm.vocab.size())
      throw DataError("dtm: triplet out of range");
    dtm.rows[r].emplace_back(c, v);
  }
  for (auto& row : dtm.rows)
    std::sort(row.begin(), row.end());
  return dtm;
}

std::pair<std::vector<std::string>, std::vector<std::string>> read_corpus_csv(
    const std::string& path) {
  const CsvTable table = read_csv(path);
  const int id_col = table.col("id"), text_col = table.col("text");
  if (id_col < 0 || text_col < 0)
    throw SchemaError("corpus: CSV needs 'id' and 'text' columns");
  std::vector<std::string> ids, docs;
  for (const auto& row : table.rows) {
    ids.push_back(row[static_cast<std::size_t>(id_col)]);
    docs.push_back(row[static_cast<std::size_t>(text_col)]);
  }
  return {ids, docs};
}

std::pair<std::vector<std::string>, std::vector<std::string>> read_corpus_dir(
    const std::string& dir) {
  std::vector<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file()) names.push_back(entry.path().filename().string());
  std::sort(names.begin(), names.end());
  std::vector<std::string> ids, docs;
  for (const auto& name : names) {
    std::ifstream in(dir + "/" + name, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    ids.push_back(std::filesystem::path(name).stem().string());
    docs.push_back(buf.str());
  }
  return {ids, docs};
}

void write_corpus_csv(const std::string& path, const std::vector<std::string>& ids,
                      const std::vector<std::string>& docs) {
  if (ids.size() != docs.size()) throw ParameterError("corpus: id/doc count mismatch");
  CsvTable table;
  table.header = {"id", "text"};
  for (std::size_t i = 0; i < ids.size(); ++i) table.rows.push_back({ids[i], docs[i]});
  write_csv(path, table);
}

}  // namespace mtdml
