#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace mtdml {

using Stemmer = std::function<std::string(const std::string&)>;

Stemmer identity_stemmer();
// Light suffix stripper for German-like inflections; applied to a fixpoint
// inside preprocess so re-preprocessing is a no-op.
Stemmer default_stemmer();

struct TokenizedCorpus {
  std::vector<std::vector<std::string>> docs;  // surviving onegram tokens
  std::vector<std::string> doc_ids;
  std::vector<std::string> vocab;              // onegram + bigram types, sorted
  std::vector<std::uint8_t> empty_doc;         // nothing survived preprocessing

  std::size_t n_docs() const { return docs.size(); }
};

struct CorpusReport {
  double mean_tokens_per_doc = 0.0;
  double mean_onegram_types_per_doc = 0.0;
  std::size_t n_docs = 0;
  std::size_t vocab_size = 0;
};

// Lowercases, strips punctuation/digit/stopword material, stems, and types the
// corpus into onegrams plus adjacent-token bigrams.
TokenizedCorpus preprocess(const std::vector<std::string>& raw_docs,
                           const std::set<std::string>& stopwords, const Stemmer& stemmer,
                           const std::vector<std::string>& doc_ids = {});

CorpusReport corpus_report(const TokenizedCorpus& corpus);

enum class DtmWeighting { raw, tf, tfidf, tf_then_tfidf };

struct DocumentTermMatrix {
  // Sparse rows of (column, value), sorted by column.
  std::vector<std::vector<std::pair<int, double>>> rows;
  std::vector<std::string> vocab;
  DtmWeighting weighting = DtmWeighting::raw;
  long min_term_freq = 0;   // recorded by bound_tf
  long min_doc_freq = 0;
  double bound_percentile = 0.0;  // recorded by weight_tfidf

  std::size_t n_docs() const { return rows.size(); }
  std::size_t n_terms() const { return vocab.size(); }
  double at(std::size_t doc, int col) const;
  std::vector<double> col_sums() const;
  std::vector<long> doc_freq() const;
  // Dense copy, for small matrices and feature blocks.
  std::vector<std::vector<double>> dense() const;
};

DocumentTermMatrix build_dtm(const TokenizedCorpus& corpus, bool include_bigrams = true);

// Keeps columns appearing at least min_term_freq times overall and in at
// least min_doc_freq documents.
DocumentTermMatrix bound_tf(const DocumentTermMatrix& dtm, long min_term_freq = 350,
                            long min_doc_freq = 150);

// entry = count * ln(n_docs/df); keeps columns whose maximum score reaches
// the bound_percentile quantile of all nonzero scores (default 99.9th).
DocumentTermMatrix weight_tfidf(const DocumentTermMatrix& dtm, double bound_percentile = 0.999);

enum class KeynessMeasure { chi2, g2, pmi, freq, tfidf_freq };

std::string keyness_measure_name(KeynessMeasure m);

struct KeynessResult {
  // Per class: tokens ranked by score (desc, ties lexicographic), top_k kept.
  std::vector<std::vector<std::pair<std::string, double>>> per_class;
  std::vector<std::uint8_t> empty_class;  // class had zero token mass
};

// 2x2 keyness of each token in class vs complement over pooled counts.
// chi2 and G2 scores are signed toward class over-representation so the
// ranking surfaces tokens the class actually overuses.
KeynessResult keyness(const DocumentTermMatrix& dtm, const std::vector<int>& labels,
                      int n_classes, KeynessMeasure measure, int top_k);

// Raw 2x2 statistics (exposed for oracle checks): a = token count in class,
// b = token count elsewhere, n_c / n_r = total token mass in class / rest.
double chi2_stat(double a, double b, double n_c, double n_r);
double g2_stat(double a, double b, double n_c, double n_r);       // signed
double pmi_stat(double a, double b, double n_c, double n_r);      // -inf if a == 0

struct KeynessLexicon {
  std::vector<std::string> diagnoses;
  std::vector<std::set<std::string>> tokens_of;  // union over measures
  // provenance[k][token] = measures that selected the token for diagnosis k.
  std::vector<std::map<std::string, std::set<std::string>>> provenance;

  nlohmann::json to_json() const;
  static KeynessLexicon from_json(const nlohmann::json& j);
};

struct LexiconCounts {
  int freq = 40;
  int tfidf_freq = 60;
  int chi2 = 40;
  int g2 = 40;
  int pmi = 40;
};

// Per-diagnosis union of the five per-measure selections (40/60/40/40/40).
KeynessLexicon build_lexicon(const DocumentTermMatrix& dtm, const std::vector<int>& labels,
                             const std::vector<std::string>& diagnosis_names,
                             const LexiconCounts& counts = {});

struct DiagnosisShares {
  std::vector<std::vector<double>> shares;       // n_docs x K, rows sum to 1 or all-zero
  std::vector<std::vector<std::uint8_t>> hot;    // share > mean + 1.5 sd within row
  std::vector<std::uint8_t> unmatched;           // no lexicon token matched
};

DiagnosisShares diagnosis_shares(const TokenizedCorpus& corpus, const KeynessLexicon& lexicon);

// Removes every column that is top_k-key for some author (psychologist
// fixed-effect style de-biasing of the vocabulary).
DocumentTermMatrix strip_author_keyness(const DocumentTermMatrix& dtm,
                                        const std::vector<int>& author_ids, int n_authors,
                                        KeynessMeasure measure, int top_k);

// Sparse triplet persistence: <path>.csv (row,col,value), <path>.vocab.txt.
void save_dtm(const std::string& path_prefix, const DocumentTermMatrix& dtm);
DocumentTermMatrix load_dtm(const std::string& path_prefix);

// Corpus input per the external interface: a two-column CSV (id,text) or a
// directory of UTF-8 files named by unit id.
std::pair<std::vector<std::string>, std::vector<std::string>> read_corpus_csv(
    const std::string& path);
std::pair<std::vector<std::string>, std::vector<std::string>> read_corpus_dir(
    const std::string& dir);
void write_corpus_csv(const std::string& path, const std::vector<std::string>& ids,
                      const std::vector<std::string>& docs);

}  // namespace mtdml
