#include <doctest.h>

#include <cmath>
#include <set>

#include "mtdml/dgp.hpp"
#include "mtdml/errors.hpp"
#include "mtdml/rng.hpp"
#include "mtdml/text.hpp"
#include "testutil.hpp"

using namespace mtdml;

namespace {

const std::set<std::string> kNullStops = {"zzz_unused"};

TokenizedCorpus corpus_of(const std::vector<std::string>& docs,
                          const std::set<std::string>& stops = kNullStops) {
  return preprocess(docs, stops, identity_stemmer());
}

}  // namespace

TEST_CASE("the worked tokenization example") {
  // 5 tokens, 4 onegram types before stopping.
  const TokenizedCorpus raw = corpus_of({"I ate an apple apple"});
  CHECK(raw.docs[0].size() == 5);
  CHECK(std::set<std::string>(raw.docs[0].begin(), raw.docs[0].end()).size() == 4);

  const TokenizedCorpus stopped =
      preprocess({"I ate an apple apple"}, {"i", "an"}, identity_stemmer());
  CHECK(stopped.docs[0] == std::vector<std::string>{"ate", "apple", "apple"});
  std::set<std::string> onegrams(stopped.docs[0].begin(), stopped.docs[0].end());
  CHECK(onegrams == std::set<std::string>{"ate", "apple"});
  // Bigram types of adjacent survivors.
  CHECK(std::find(stopped.vocab.begin(), stopped.vocab.end(), "ate apple") !=
        stopped.vocab.end());
  CHECK(std::find(stopped.vocab.begin(), stopped.vocab.end(), "apple apple") !=
        stopped.vocab.end());
}

TEST_CASE("punctuation-only documents are flagged empty") {
  const TokenizedCorpus corpus = corpus_of({"?!... 123 --- ,,,", "real words here"});
  CHECK(corpus.empty_doc[0] == 1);
  CHECK(corpus.empty_doc[1] == 0);
  CHECK(corpus.docs[0].empty());
}

TEST_CASE("preprocess is idempotent on its own output") {
  std::set<std::string> stops = {"und", "der", "die"};
  const std::vector<std::string> raw = {
      "Der Lernende und die Klasse zeigten Verhaltensauffaelligkeiten!",
      "Die Abklaerung ergab 3 Punkte; der Test war unauffaellig."};
  const TokenizedCorpus first = preprocess(raw, stops, default_stemmer());
  std::vector<std::string> joined;
  for (const auto& doc : first.docs) {
    std::string s;
    for (std::size_t i = 0; i < doc.size(); ++i) {
      if (i) s += " ";
      s += doc[i];
    }
    joined.push_back(s);
  }
  const TokenizedCorpus second = preprocess(joined, stops, default_stemmer());
  CHECK(first.docs == second.docs);
  CHECK(first.vocab == second.vocab);
}

TEST_CASE("synthetic corpus report matches a brute-force recount") {
  DgpSpec spec = text_confounded_spec(400, 7);
  const GeneratedData gen = generate(spec);
  std::set<std::string> stops(synthetic_stopwords().begin(), synthetic_stopwords().end());
  const TokenizedCorpus corpus = preprocess(gen.raw_docs, stops, identity_stemmer());
  const CorpusReport report = corpus_report(corpus);

  double tokens = 0.0, types = 0.0;
  for (const auto& doc : corpus.docs) {
    tokens += static_cast<double>(doc.size());
    types += static_cast<double>(std::set<std::string>(doc.begin(), doc.end()).size());
  }
  CHECK(report.mean_tokens_per_doc == doctest::Approx(tokens / 400.0).epsilon(1e-12));
  CHECK(report.mean_onegram_types_per_doc == doctest::Approx(types / 400.0).epsilon(1e-12));
  // Scale anchored to the generator defaults: ~241 tokens, ~137 onegram types.
  CHECK(report.mean_tokens_per_doc > 210.0);
  CHECK(report.mean_tokens_per_doc < 270.0);
  CHECK(report.mean_onegram_types_per_doc > 110.0);
  CHECK(report.mean_onegram_types_per_doc < 165.0);
}

TEST_CASE("disjoint vocabularies give a block-diagonal dtm") {
  const TokenizedCorpus corpus = corpus_of({"aa bb aa", "cc dd cc dd"});
  const DocumentTermMatrix dtm = build_dtm(corpus, false);
  for (const auto& [col, value] : dtm.rows[0]) CHECK(dtm.vocab[static_cast<std::size_t>(col)][0] <= 'b');
  for (const auto& [col, value] : dtm.rows[1]) CHECK(dtm.vocab[static_cast<std::size_t>(col)][0] >= 'c');
}

TEST_CASE("duplicated documents share identical dtm rows") {
  const TokenizedCorpus corpus = corpus_of({"aa bb cc aa", "aa bb cc aa"});
  const DocumentTermMatrix dtm = build_dtm(corpus);
  CHECK(dtm.rows[0] == dtm.rows[1]);
}

TEST_CASE("dtm column sums equal corpus-wide type frequencies") {
  Rng rng(100);
  std::vector<std::string> docs;
  const std::vector<std::string> words = {"rot", "blau", "gelb", "gruen", "lila"};
  for (int d = 0; d < 50; ++d) {
    std::string doc;
    const int len = 3 + static_cast<int>(rng.uniform_int(10));
    for (int t = 0; t < len; ++t) {
      if (t) doc += " ";
      doc += words[rng.uniform_int(words.size())];
    }
    docs.push_back(doc);
  }
  const TokenizedCorpus corpus = corpus_of(docs);
  const DocumentTermMatrix dtm = build_dtm(corpus);
  const std::vector<double> sums = dtm.col_sums();

  // Independent recount: onegram + bigram occurrences per type.
  std::map<std::string, double> truth;
  for (const auto& doc : corpus.docs) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      truth[doc[i]] += 1.0;
      if (i + 1 < doc.size()) truth[doc[i] + " " + doc[i + 1]] += 1.0;
    }
  }
  REQUIRE(truth.size() == dtm.vocab.size());
  for (std::size_t c = 0; c < dtm.vocab.size(); ++c)
    CHECK(sums[c] == truth.at(dtm.vocab[c]));
}

TEST_CASE("bound_tf defaults are 350 and 150") {
  const TokenizedCorpus corpus = corpus_of({"aa bb", "aa cc"});
  const DocumentTermMatrix dtm = build_dtm(corpus);
  const DocumentTermMatrix bounded = bound_tf(dtm);
  CHECK(bounded.min_term_freq == 350);
  CHECK(bounded.min_doc_freq == 150);
  CHECK(bounded.vocab.empty());  // tiny corpus: every column falls away
}

TEST_CASE("zero bounds are the identity") {
  const TokenizedCorpus corpus = corpus_of({"aa bb cc", "aa dd"});
  const DocumentTermMatrix dtm = build_dtm(corpus);
  const DocumentTermMatrix bounded = bound_tf(dtm, 0, 0);
  CHECK(bounded.vocab == dtm.vocab);
  CHECK(bounded.rows == dtm.rows);
}

TEST_CASE("bound_tf equals a brute-force frequency filter") {
  Rng rng(101);
  std::vector<std::string> docs;
  const std::vector<std::string> words = {"wa", "wb", "wc", "wd", "we", "wf", "wg", "wh"};
  for (int d = 0; d < 40; ++d) {
    std::string doc;
    const int len = 2 + static_cast<int>(rng.uniform_int(12));
    for (int t = 0; t < len; ++t) {
      if (t) doc += " ";
      // Skewed usage so bounds actually bite.
      doc += words[static_cast<std::size_t>(rng.uniform() * rng.uniform() * 8)];
    }
    docs.push_back(doc);
  }
  const TokenizedCorpus corpus = corpus_of(docs);
  const DocumentTermMatrix dtm = build_dtm(corpus);
  const long mtf = 12, mdf = 6;
  const DocumentTermMatrix bounded = bound_tf(dtm, mtf, mdf);

  const auto sums = dtm.col_sums();
  const auto df = dtm.doc_freq();
  std::set<std::string> expected;
  for (std::size_t c = 0; c < dtm.vocab.size(); ++c)
    if (sums[c] >= static_cast<double>(mtf) && df[c] >= mdf) expected.insert(dtm.vocab[c]);
  CHECK(std::set<std::string>(bounded.vocab.begin(), bounded.vocab.end()) == expected);
}

TEST_CASE("tf-idf zeroes tokens present everywhere") {
  const TokenizedCorpus corpus = corpus_of({"aa bb", "aa cc", "aa dd"});
  const DocumentTermMatrix dtm = build_dtm(corpus, false);
  const DocumentTermMatrix weighted = weight_tfidf(dtm, 0.0);
  // "aa" appears in all 3 docs: idf = ln(1) = 0.
  for (std::size_t c = 0; c < weighted.vocab.size(); ++c) {
    if (weighted.vocab[c] != "aa") continue;
    for (const auto& row : weighted.rows)
      for (const auto& [col, v] : row)
        if (static_cast<std::size_t>(col) == c) CHECK(v == 0.0);
  }
}

TEST_CASE("single-document corpora have all-zero idf") {
  const TokenizedCorpus corpus = corpus_of({"aa bb cc aa"});
  const DocumentTermMatrix weighted = weight_tfidf(build_dtm(corpus), 0.999);
  for (const auto& row : weighted.rows)
    for (const auto& [col, v] : row) CHECK(v == 0.0);
}

TEST_CASE("tf-idf percentile bound matches a brute-force filter") {
  Rng rng(102);
  std::vector<std::string> docs;
  const std::vector<std::string> words = {"ka", "kb", "kc", "kd", "ke",
                                          "kf", "kg", "kh", "ki", "kj"};
  for (int d = 0; d < 100; ++d) {
    std::string doc;
    const int len = 4 + static_cast<int>(rng.uniform_int(20));
    for (int t = 0; t < len; ++t) {
      if (t) doc += " ";
      doc += words[static_cast<std::size_t>(rng.uniform() * rng.uniform() * 10)];
    }
    docs.push_back(doc);
  }
  const TokenizedCorpus corpus = corpus_of(docs);
  const DocumentTermMatrix dtm = build_dtm(corpus, false);
  const double percentile = 0.9;
  const DocumentTermMatrix weighted = weight_tfidf(dtm, percentile);

  // Brute force: dense tf-idf, type-7 quantile of positive scores, keep
  // columns whose max reaches it.
  const auto dense = dtm.dense();
  const auto df = dtm.doc_freq();
  std::vector<double> positive;
  std::vector<double> col_max(dtm.vocab.size(), 0.0);
  for (std::size_t i = 0; i < dense.size(); ++i) {
    for (std::size_t c = 0; c < dtm.vocab.size(); ++c) {
      const double idf = df[c] > 0 ? std::log(100.0 / static_cast<double>(df[c])) : 0.0;
      const double score = dense[i][c] * idf;
      if (score > 0.0) positive.push_back(score);
      col_max[c] = std::max(col_max[c], score);
    }
  }
  std::sort(positive.begin(), positive.end());
  const double h = percentile * static_cast<double>(positive.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const double bound = (lo + 1 < positive.size())
                           ? positive[lo] + (h - std::floor(h)) * (positive[lo + 1] - positive[lo])
                           : positive[lo];
  std::set<std::string> expected;
  for (std::size_t c = 0; c < dtm.vocab.size(); ++c)
    if (col_max[c] >= bound) expected.insert(dtm.vocab[c]);
  CHECK(std::set<std::string>(weighted.vocab.begin(), weighted.vocab.end()) == expected);
}

TEST_CASE("weight_tfidf and bound_tf never add columns") {
  const TokenizedCorpus corpus = corpus_of({"aa bb cc", "aa bb", "dd ee aa"});
  const DocumentTermMatrix dtm = build_dtm(corpus);
  CHECK(bound_tf(dtm, 2, 2).vocab.size() <= dtm.vocab.size());
  CHECK(weight_tfidf(dtm, 0.5).vocab.size() <= dtm.vocab.size());
}

// Frozen oracle values for the 4-document, 6-token corpus; computed with an
// independent implementation of the 2x2 formulas.
TEST_CASE("keyness statistics match hand-computed tables") {
  const TokenizedCorpus corpus = corpus_of({"aa aa bb cc", "aa bb dd", "ee aa ff", "ff ff cc dd"});
  const DocumentTermMatrix dtm = build_dtm(corpus, false);
  const std::vector<int> labels = {0, 0, 1, 1};

  CHECK(chi2_stat(3, 1, 7, 7) == doctest::Approx(1.3999999999999999).epsilon(1e-12));
  CHECK(g2_stat(3, 1, 7, 7) == doctest::Approx(1.4492065585428733).epsilon(1e-12));
  CHECK(pmi_stat(3, 1, 7, 7) == doctest::Approx(0.40546510810816438).epsilon(1e-12));
  CHECK(chi2_stat(2, 0, 7, 7) == doctest::Approx(2.3333333333333335).epsilon(1e-12));
  CHECK(g2_stat(2, 0, 7, 7) == doctest::Approx(3.1074826718818525).epsilon(1e-12));
  CHECK(chi2_stat(0, 3, 7, 7) == doctest::Approx(3.8181818181818183).epsilon(1e-12));
  CHECK(g2_stat(0, 3, 7, 7) == doctest::Approx(-4.9875220298478276).epsilon(1e-12));
  CHECK(pmi_stat(0, 3, 7, 7) == -std::numeric_limits<double>::infinity());

  // End-to-end through keyness(): class-0 ranking must carry those scores.
  const KeynessResult chi2_res = keyness(dtm, labels, 2, KeynessMeasure::chi2, 6);
  bool saw_aa = false;
  for (const auto& [token, score] : chi2_res.per_class[0]) {
    if (token == "aa") {
      CHECK(score == doctest::Approx(1.4).epsilon(1e-10));
      saw_aa = true;
    }
    if (token == "bb") CHECK(score == doctest::Approx(2.3333333333333335).epsilon(1e-10));
  }
  CHECK(saw_aa);

  const KeynessResult g2_res = keyness(dtm, labels, 2, KeynessMeasure::g2, 6);
  for (const auto& [token, score] : g2_res.per_class[1]) {
    if (token == "ff") CHECK(score == doctest::Approx(4.9875220298478276).epsilon(1e-10));
  }
}

TEST_CASE("proportional tokens carry zero keyness") {
  // Token mass split exactly with class mass: independence.
  const TokenizedCorpus corpus = corpus_of({"aa bb", "aa cc"});
  const DocumentTermMatrix dtm = build_dtm(corpus, false);
  const std::vector<int> labels = {0, 1};
  const KeynessResult chi2_res = keyness(dtm, labels, 2, KeynessMeasure::chi2, 10);
  const KeynessResult pmi_res = keyness(dtm, labels, 2, KeynessMeasure::pmi, 10);
  for (const auto& [token, score] : chi2_res.per_class[0])
    if (token == "aa") CHECK(score == 0.0);
  for (const auto& [token, score] : pmi_res.per_class[0])
    if (token == "aa") CHECK(score == doctest::Approx(0.0));
}

TEST_CASE("two-class chi2 is symmetric under class swap") {
  // The raw statistic is symmetric; the ranking signs it toward the class.
  const TokenizedCorpus corpus = corpus_of({"aa aa bb cc", "aa bb dd", "ee aa ff", "ff ff cc dd"});
  const DocumentTermMatrix dtm = build_dtm(corpus, false);
  const std::vector<int> labels = {0, 0, 1, 1};

  for (const auto& [a, b] : std::vector<std::pair<double, double>>{{3, 1}, {2, 0}, {0, 3}})
    CHECK(chi2_stat(a, b, 7, 7) == doctest::Approx(chi2_stat(b, a, 7, 7)).epsilon(1e-12));

  const KeynessResult c0 = keyness(dtm, labels, 2, KeynessMeasure::chi2, 100);
  std::map<std::string, double> score0, score1;
  for (const auto& [t, s] : c0.per_class[0]) score0[t] = s;
  for (const auto& [t, s] : c0.per_class[1]) score1[t] = s;
  for (const auto& [t, s] : score0)
    CHECK(std::fabs(s) == doctest::Approx(std::fabs(score1.at(t))).epsilon(1e-12));
}

TEST_CASE("empty classes are flagged") {
  const TokenizedCorpus corpus = corpus_of({"aa bb", "...", "cc dd"});
  const DocumentTermMatrix dtm = build_dtm(corpus, false);
  const std::vector<int> labels = {0, 1, 2};
  const KeynessResult res = keyness(dtm, labels, 3, KeynessMeasure::freq, 5);
  CHECK(res.empty_class[1] == 1);
  CHECK(res.per_class[1].empty());
}

TEST_CASE("lexicon is the union of the five measure selections") {
  DgpSpec spec = text_confounded_spec(150, 9);
  spec.text.n_diagnoses = 4;
  const GeneratedData gen = generate(spec);
  std::set<std::string> stops(synthetic_stopwords().begin(), synthetic_stopwords().end());
  const TokenizedCorpus corpus = preprocess(gen.raw_docs, stops, identity_stemmer());
  const DocumentTermMatrix dtm = build_dtm(corpus);
  const std::vector<std::string> names = {"d0", "d1", "d2", "d3"};
  LexiconCounts counts;  // defaults 40/60/40/40/40
  const KeynessLexicon lexicon = build_lexicon(dtm, gen.latent_diagnosis, names, counts);

  const std::vector<std::pair<KeynessMeasure, int>> plan = {
      {KeynessMeasure::freq, 40},  {KeynessMeasure::tfidf_freq, 60},
      {KeynessMeasure::chi2, 40},  {KeynessMeasure::g2, 40},
      {KeynessMeasure::pmi, 40}};
  for (int k = 0; k < 4; ++k) {
    std::set<std::string> expected;
    for (const auto& [measure, top_k] : plan) {
      const KeynessResult res = keyness(dtm, gen.latent_diagnosis, 4, measure, top_k);
      for (const auto& [token, score] : res.per_class[static_cast<std::size_t>(k)])
        expected.insert(token);
    }
    CHECK(lexicon.tokens_of[static_cast<std::size_t>(k)] == expected);
    // Provenance covers exactly the union.
    CHECK(lexicon.provenance[static_cast<std::size_t>(k)].size() == expected.size());
  }
}

TEST_CASE("identical selections collapse to one set") {
  const TokenizedCorpus corpus = corpus_of({"aa aa aa bb", "cc cc cc dd"});
  const DocumentTermMatrix dtm = build_dtm(corpus, false);
  LexiconCounts counts;
  counts.freq = 2;
  counts.tfidf_freq = 2;
  counts.chi2 = 0;
  counts.g2 = 0;
  counts.pmi = 0;
  const KeynessLexicon lexicon =
      build_lexicon(dtm, {0, 1}, {"d0", "d1"}, counts);
  // freq and tfidf_freq pick the same two tokens per class; the union stays 2.
  CHECK(lexicon.tokens_of[0].size() == 2);
  CHECK(lexicon.tokens_of[1].size() == 2);
}

TEST_CASE("diagnosis shares: pure, uniform and mixed rows") {
  KeynessLexicon lexicon;
  lexicon.diagnoses = {"d0", "d1", "d2", "d3"};
  lexicon.tokens_of = {{"alpha"}, {"beta"}, {"gamma"}, {"delta"}};
  lexicon.provenance.resize(4);

  const TokenizedCorpus corpus = corpus_of({
      "alpha alpha alpha",                // pure d0
      "alpha beta gamma delta",           // uniform over all four
      "alpha alpha beta unrelated",       // mixed with noise
      "unrelated words only",             // matches nothing
  });
  const DiagnosisShares shares = diagnosis_shares(corpus, lexicon);

  CHECK(shares.shares[0][0] == doctest::Approx(1.0));
  CHECK(shares.hot[0][0] == 1);
  for (int k = 1; k < 4; ++k) CHECK(shares.shares[0][static_cast<std::size_t>(k)] == 0.0);

  for (int k = 0; k < 4; ++k) {
    CHECK(shares.shares[1][static_cast<std::size_t>(k)] == doctest::Approx(0.25));
    CHECK(shares.hot[1][static_cast<std::size_t>(k)] == 0);  // sd is zero
  }

  // Mixed row: counts 2 alpha, 1 beta over 4 tokens -> renormalized 2/3, 1/3.
  CHECK(shares.shares[2][0] == doctest::Approx(2.0 / 3.0));
  CHECK(shares.shares[2][1] == doctest::Approx(1.0 / 3.0));
  double row_sum = 0.0;
  for (double v : shares.shares[2]) row_sum += v;
  CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-9));

  CHECK(shares.unmatched[3] == 1);
  for (double v : shares.shares[3]) CHECK(v == 0.0);
}

TEST_CASE("author stripping removes unique tokens and spares shared ones") {
  // Two authors with one unique token each plus one shared vocabulary.
  const TokenizedCorpus corpus = corpus_of({
      "shared words shared quirk",
      "shared words shared",
      "shared words tick shared",
      "shared words shared",
  });
  const DocumentTermMatrix dtm = build_dtm(corpus, false);
  const std::vector<int> authors = {0, 0, 1, 1};
  const DocumentTermMatrix stripped =
      strip_author_keyness(dtm, authors, 2, KeynessMeasure::chi2, 1);
  const std::set<std::string> vocab(stripped.vocab.begin(), stripped.vocab.end());
  CHECK(vocab.count("quirk") == 0);
  CHECK(vocab.count("tick") == 0);
  CHECK(vocab.count("shared") == 1);
  CHECK(vocab.count("words") == 1);
}

TEST_CASE("uniform usage strips nothing at chi2") {
  const TokenizedCorpus corpus = corpus_of({"aa bb cc", "aa bb cc", "aa bb cc", "aa bb cc"});
  const DocumentTermMatrix dtm = build_dtm(corpus, false);
  const DocumentTermMatrix stripped =
      strip_author_keyness(dtm, {0, 0, 1, 1}, 2, KeynessMeasure::chi2, 2);
  CHECK(stripped.vocab == dtm.vocab);
}

TEST_CASE("author-strip equals the brute-force per-author union") {
  DgpSpec spec = text_confounded_spec(90, 10);
  spec.text.n_diagnoses = 3;
  const GeneratedData gen = generate(spec);
  std::set<std::string> stops(synthetic_stopwords().begin(), synthetic_stopwords().end());
  const TokenizedCorpus corpus = preprocess(gen.raw_docs, stops, identity_stemmer());
  const DocumentTermMatrix dtm = build_dtm(corpus, false);
  std::vector<int> authors;
  for (std::size_t i = 0; i < 90; ++i) authors.push_back(static_cast<int>(i % 3));

  const int top_k = 15;
  const DocumentTermMatrix stripped =
      strip_author_keyness(dtm, authors, 3, KeynessMeasure::g2, top_k);

  std::set<std::string> banned;
  const KeynessResult res = keyness(dtm, authors, 3, KeynessMeasure::g2, top_k);
  for (const auto& cls : res.per_class)
    for (const auto& [token, score] : cls)
      if (score > 0.0) banned.insert(token);
  std::set<std::string> expected;
  for (const auto& t : dtm.vocab)
    if (!banned.count(t)) expected.insert(t);
  CHECK(std::set<std::string>(stripped.vocab.begin(), stripped.vocab.end()) == expected);
}

TEST_CASE("dtm persistence round trips") {
  const TokenizedCorpus corpus = corpus_of({"aa bb cc aa", "bb dd", "ee"});
  const DocumentTermMatrix dtm = build_dtm(corpus);
  const std::string dir = testutil::scratch_dir("dtm");
  save_dtm(dir + "/m", dtm);
  const DocumentTermMatrix back = load_dtm(dir + "/m");
  CHECK(back.vocab == dtm.vocab);
  CHECK(back.rows == dtm.rows);
  CHECK(back.weighting == dtm.weighting);
}

TEST_CASE("lexicon json round trips") {
  KeynessLexicon lexicon;
  lexicon.diagnoses = {"a", "b"};
  lexicon.tokens_of = {{"tok1", "tok2"}, {"tok3"}};
  lexicon.provenance.resize(2);
  lexicon.provenance[0]["tok1"] = {"chi2", "freq"};
  lexicon.provenance[0]["tok2"] = {"pmi"};
  lexicon.provenance[1]["tok3"] = {"g2"};
  const KeynessLexicon back = KeynessLexicon::from_json(lexicon.to_json());
  CHECK(back.diagnoses == lexicon.diagnoses);
  CHECK(back.tokens_of == lexicon.tokens_of);
  CHECK(back.provenance == lexicon.provenance);
}

TEST_CASE("empty corpus and empty stopword list are parameter errors") {
  CHECK_THROWS_AS(preprocess({}, kNullStops, identity_stemmer()), ParameterError);
  CHECK_THROWS_AS(preprocess({"text"}, {}, identity_stemmer()), ParameterError);
}

TEST_CASE("corpus csv round trips with awkward text") {
  const std::string dir = testutil::scratch_dir("corpus");
  const std::vector<std::string> ids = {"u1", "u2"};
  const std::vector<std::string> docs = {"plain text", "with, commas and \"quotes\"\nand lines"};
  write_corpus_csv(dir + "/c.csv", ids, docs);
  const auto [rids, rdocs] = read_corpus_csv(dir + "/c.csv");
  CHECK(rids == ids);
  CHECK(rdocs == docs);
}
