#include "semfuse/dataset.hpp"

#include "semfuse/image.hpp"
#include "semfuse/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace semfuse {

namespace fs = std::filesystem;
using nlohmann::json;

const char* category_name(Category c) {
  switch (c) {
    case Category::Political: return "political";
    case Category::Economic: return "economic";
    case Category::Religious: return "religious";
    case Category::Racial: return "racial";
  }
  return "?";
}

Category category_from(const std::string& name) {
  if (name == "political") return Category::Political;
  if (name == "economic") return Category::Economic;
  if (name == "religious") return Category::Religious;
  if (name == "racial") return Category::Racial;
  throw DataError("unknown category label: " + name);
}

const char* source_name(Source s) {
  return s == Source::Twitter ? "twitter" : "gab";
}

Source source_from(const std::string& name) {
  if (name == "twitter") return Source::Twitter;
  if (name == "gab") return Source::Gab;
  throw DataError("unknown source: " + name);
}

namespace {

const std::set<std::string> kLabeledKeys = {
    "id", "text", "image_path", "ocr_text",
    "binary_label", "category_label", "source"};

PostRecord parse_record(const json& j, int lineno, bool require_labels) {
  if (!j.is_object()) {
    throw DataError("line " + std::to_string(lineno) + ": not a JSON object");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!kLabeledKeys.count(it.key())) {
      throw DataError("line " + std::to_string(lineno) + ": unknown key '" +
                      it.key() + "'");
    }
  }
  auto need = [&](const char* key) -> const json& {
    auto it = j.find(key);
    if (it == j.end()) {
      throw DataError("line " + std::to_string(lineno) + ": missing key '" +
                      std::string(key) + "'");
    }
    return *it;
  };
  auto need_string = [&](const char* key) {
    const json& v = need(key);
    if (!v.is_string()) {
      throw DataError("line " + std::to_string(lineno) + ": key '" +
                      std::string(key) + "' must be a string");
    }
    return v.get<std::string>();
  };

  PostRecord r;
  r.id = need_string("id");
  if (r.id.empty()) {
    throw DataError("line " + std::to_string(lineno) + ": empty id");
  }
  r.text = need_string("text");
  r.image_path = need_string("image_path");
  r.ocr_text = need_string("ocr_text");
  r.source = source_from(need_string("source"));

  if (!require_labels && !j.contains("binary_label")) {
    return r;
  }

  const json& bl = need("binary_label");
  if (!bl.is_number_integer() || (bl.get<int>() != 0 && bl.get<int>() != 1)) {
    throw DataError("line " + std::to_string(lineno) +
                    ": binary_label must be 0 or 1");
  }
  r.binary_label = static_cast<BinaryLabel>(bl.get<int>());

  const json& cl = need("category_label");
  if (cl.is_null()) {
    r.category_label.reset();
  } else if (cl.is_string()) {
    r.category_label = category_from(cl.get<std::string>());
  } else {
    throw DataError("line " + std::to_string(lineno) +
                    ": category_label must be null or a string");
  }

  const bool antisemitic = r.binary_label == BinaryLabel::Antisemitic;
  if (antisemitic != r.category_label.has_value()) {
    throw DataError("line " + std::to_string(lineno) +
                    ": category_label must be present iff binary_label=1");
  }
  return r;
}

}  // namespace

LoadResult load_dataset(const std::string& path, const std::string& image_root,
                        bool strict, bool require_labels) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);

  LoadResult out;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line, nullptr, true);
      PostRecord r = parse_record(j, lineno, require_labels);
      if (!seen_ids.insert(r.id).second) {
        throw DataError("line " + std::to_string(lineno) + ": duplicate id '" +
                        r.id + "'");
      }
      if (strict) {
        fs::path img = fs::path(image_root) / r.image_path;
        if (!image_decodable(img.string())) {
          throw DataError("line " + std::to_string(lineno) +
                          ": image not decodable: " + img.string());
        }
      }
      out.records.push_back(std::move(r));
    } catch (const json::parse_error& e) {
      if (strict) {
        throw DataError("line " + std::to_string(lineno) +
                        ": malformed JSON: " + std::string(e.what()));
      }
      ++out.skipped;
    } catch (const DataError&) {
      if (strict) throw;
      ++out.skipped;
    }
  }
  return out;
}

void save_dataset(const std::vector<PostRecord>& records,
                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file: " + path);
  for (const PostRecord& r : records) {
    json j;
    j["id"] = r.id;
    j["text"] = r.text;
    j["image_path"] = r.image_path;
    j["ocr_text"] = r.ocr_text;
    j["binary_label"] = static_cast<int>(r.binary_label);
    j["category_label"] =
        r.category_label ? json(category_name(*r.category_label)) : json();
    j["source"] = source_name(r.source);
    out << j.dump() << "\n";
  }
}

Lexicon Lexicon::from_terms(const std::vector<std::string>& terms) {
  Lexicon lex;
  for (std::string t : terms) {
    std::transform(t.begin(), t.end(), t.begin(), ::tolower);
    if (t.empty() ||
        t.find_first_not_of(" \t\r\n") == std::string::npos) {
      throw DataError("lexicon contains a whitespace-only term");
    }
    if (t.find_first_of(" \t") != std::string::npos) {
      throw DataError("lexicon terms must be single tokens: '" + t + "'");
    }
    lex.terms.insert(t);
  }
  if (lex.terms.empty()) throw DataError("lexicon is empty");
  return lex;
}

Lexicon Lexicon::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon file: " + path);
  std::vector<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    size_t a = line.find_first_not_of(" \t");
    if (a == std::string::npos) continue;
    size_t b = line.find_last_not_of(" \t");
    std::string t = line.substr(a, b - a + 1);
    if (t.empty() || t[0] == '#') continue;
    terms.push_back(t);
  }
  return from_terms(terms);
}

Lexicon Lexicon::default_lexicon() {
  return from_terms({"jewish", "hasidic", "hebrew", "semitic", "judaistic",
                     "israeli", "yahudi", "yehudi"});
}

std::vector<PostRecord> lexicon_filter(const std::vector<PostRecord>& records,
                                       const Lexicon& lexicon) {
  if (lexicon.terms.empty()) throw DataError("lexicon is empty");
  std::vector<PostRecord> kept;
  for (const PostRecord& r : records) {
    for (const std::string& w : tokenize_words(clean_text(r.text))) {
      if (lexicon.terms.count(w)) {
        kept.push_back(r);
        break;
      }
    }
  }
  return kept;
}

namespace {

// Deals ids round-robin into k buckets. The input is the concatenation of
// per-class shuffled strata, so per-bucket class counts differ by at most one
// within each stratum while global bucket sizes stay |n/k| or |n/k|+1.
std::vector<std::vector<std::string>> deal_buckets(
    const std::vector<std::string>& ids, int k) {
  std::vector<std::vector<std::string>> buckets(k);
  for (size_t i = 0; i < ids.size(); ++i) {
    buckets[i % k].push_back(ids[i]);
  }
  return buckets;
}

}  // namespace

FoldPlan make_fold_plan(const std::vector<PostRecord>& records, int k,
                        uint64_t seed) {
  if (k < 2) throw DataError("fold count must be >= 2");
  if (static_cast<size_t>(k) > records.size()) {
    throw DataError("fold count exceeds record count");
  }

  // Strata in fixed label order, each shuffled deterministically.
  std::vector<std::string> neg, pos;
  for (const PostRecord& r : records) {
    (r.binary_label == BinaryLabel::Antisemitic ? pos : neg).push_back(r.id);
  }
  Rng rng(mix_seed(seed, 0xf01d));
  rng.shuffle(neg);
  rng.shuffle(pos);
  std::vector<std::string> order = neg;
  order.insert(order.end(), pos.begin(), pos.end());

  std::vector<std::vector<std::string>> buckets = deal_buckets(order, k);

  std::set<std::string> pos_ids(pos.begin(), pos.end());
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  for (int f = 0; f < k; ++f) {
    Fold fold;
    fold.test = buckets[f];
    std::sort(fold.test.begin(), fold.test.end());
    std::set<std::string> in_test(fold.test.begin(), fold.test.end());

    // Remaining ids per class, shuffled with a fold-specific stream.
    std::vector<std::string> rem_neg, rem_pos;
    for (const std::string& id : order) {
      if (in_test.count(id)) continue;
      (pos_ids.count(id) ? rem_pos : rem_neg).push_back(id);
    }
    Rng fold_rng(mix_seed(seed, 0xa110c + static_cast<uint64_t>(f)));
    fold_rng.shuffle(rem_neg);
    fold_rng.shuffle(rem_pos);

    const long m = static_cast<long>(rem_neg.size() + rem_pos.size());
    const long val_total = std::lround(0.2 * static_cast<double>(m));
    // Largest-remainder allocation of the validation quota across strata.
    const double share_neg = 0.2 * static_cast<double>(rem_neg.size());
    long val_neg = static_cast<long>(share_neg);
    long val_pos = val_total - val_neg;
    if (val_pos > static_cast<long>(rem_pos.size())) {
      val_neg += val_pos - static_cast<long>(rem_pos.size());
      val_pos = static_cast<long>(rem_pos.size());
    }
    if (val_neg > static_cast<long>(rem_neg.size())) {
      val_pos += val_neg - static_cast<long>(rem_neg.size());
      val_neg = static_cast<long>(rem_neg.size());
    }

    for (long i = 0; i < static_cast<long>(rem_neg.size()); ++i) {
      (i < val_neg ? fold.val : fold.train).push_back(rem_neg[i]);
    }
    for (long i = 0; i < static_cast<long>(rem_pos.size()); ++i) {
      (i < val_pos ? fold.val : fold.train).push_back(rem_pos[i]);
    }
    std::sort(fold.val.begin(), fold.val.end());
    std::sort(fold.train.begin(), fold.train.end());
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

void check_fold_plan(const FoldPlan& plan, const std::set<std::string>& ids) {
  if (plan.k != static_cast<int>(plan.folds.size())) {
    throw DataError("fold plan: k does not match fold count");
  }
  std::set<std::string> test_union;
  for (int f = 0; f < plan.k; ++f) {
    const Fold& fold = plan.folds[f];
    std::set<std::string> train(fold.train.begin(), fold.train.end());
    std::set<std::string> val(fold.val.begin(), fold.val.end());
    std::set<std::string> test(fold.test.begin(), fold.test.end());
    if (train.size() != fold.train.size() || val.size() != fold.val.size() ||
        test.size() != fold.test.size()) {
      throw DataError("fold plan: duplicate ids within a split");
    }
    std::set<std::string> all;
    all.insert(train.begin(), train.end());
    all.insert(val.begin(), val.end());
    all.insert(test.begin(), test.end());
    if (all.size() != train.size() + val.size() + test.size()) {
      throw DataError("fold plan: overlapping splits in fold " +
                      std::to_string(f));
    }
    if (all != ids) {
      throw DataError("fold plan: fold " + std::to_string(f) +
                      " does not cover the id set");
    }
    for (const std::string& id : test) {
      if (!test_union.insert(id).second) {
        throw DataError("fold plan: test sets overlap at id " + id);
      }
    }
  }
  if (test_union != ids) {
    throw DataError("fold plan: union of test sets misses ids");
  }
}

std::string foldplan_to_json(const FoldPlan& plan) {
  json folds = json::array();
  for (const Fold& f : plan.folds) {
    folds.push_back({{"train", f.train}, {"val", f.val}, {"test", f.test}});
  }
  json j = {{"k", plan.k}, {"seed", plan.seed}, {"folds", folds}};
  return j.dump(2);
}

FoldPlan foldplan_from_json(const std::string& text) {
  json j = json::parse(text);
  FoldPlan plan;
  plan.k = j.at("k").get<int>();
  plan.seed = j.at("seed").get<uint64_t>();
  for (const json& f : j.at("folds")) {
    Fold fold;
    fold.train = f.at("train").get<std::vector<std::string>>();
    fold.val = f.at("val").get<std::vector<std::string>>();
    fold.test = f.at("test").get<std::vector<std::string>>();
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

void save_fold_plan(const FoldPlan& plan, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write fold plan: " + path);
  out << foldplan_to_json(plan) << "\n";
}

FoldPlan load_fold_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open fold plan: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return foldplan_from_json(buf.str());
  } catch (const json::exception& e) {
    throw DataError("malformed fold plan " + path + ": " + e.what());
  }
}

namespace {

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words = {
      "a",    "an",   "and",  "are",  "as",    "at",   "be",    "been",
      "but",  "by",   "for",  "from", "had",   "has",  "have",  "he",
      "her",  "his",  "i",    "in",   "is",    "it",   "its",   "me",
      "my",   "no",   "not",  "of",   "on",    "or",   "our",   "s",
      "she",  "so",   "t",    "that", "the",   "their", "them", "they",
      "this", "to",   "was",  "we",   "were",  "what", "when",  "which",
      "who",  "will", "with", "you",  "your"};
  return words;
}

std::vector<NGramEntry> top_entries(const std::map<std::string, long>& counts,
                                    int top_k) {
  std::vector<NGramEntry> entries;
  entries.reserve(counts.size());
  for (const auto& [gram, count] : counts) entries.push_back({gram, count});
  std::sort(entries.begin(), entries.end(),
            [](const NGramEntry& a, const NGramEntry& b) {
              if (a.count != b.count) return a.count > b.count;
              return a.gram < b.gram;
            });
  if (static_cast<int>(entries.size()) > top_k) entries.resize(top_k);
  return entries;
}

}  // namespace

CorpusStats dataset_stats(const std::vector<PostRecord>& records, int top_k) {
  CorpusStats s;
  s.total = static_cast<long>(records.size());

  std::array<std::map<std::string, long>, 4> unigrams, bigrams;
  long text_words = 0, ocr_words = 0, with_ocr = 0;

  for (const PostRecord& r : records) {
    std::vector<std::string> words = tokenize_words(clean_text(r.text));
    std::vector<std::string> ocr = tokenize_words(clean_text(r.ocr_text));
    text_words += static_cast<long>(words.size());
    ocr_words += static_cast<long>(ocr.size());
    if (!ocr.empty()) ++with_ocr;

    if (r.binary_label == BinaryLabel::Antisemitic) {
      ++s.antisemitic;
      const int c = static_cast<int>(*r.category_label);
      ++s.category_counts[c];

      std::vector<std::string> content;
      for (const std::string& w : words) {
        if (!stopwords().count(w)) content.push_back(w);
      }
      for (const std::string& w : content) ++unigrams[c][w];
      for (size_t i = 0; i + 1 < content.size(); ++i) {
        ++bigrams[c][content[i] + " " + content[i + 1]];
      }
    } else {
      ++s.non_antisemitic;
    }
  }

  for (int c = 0; c < 4; ++c) {
    s.top_unigrams[c] = top_entries(unigrams[c], top_k);
    s.top_bigrams[c] = top_entries(bigrams[c], top_k);
  }
  if (s.total > 0) {
    s.avg_text_words = static_cast<double>(text_words) / s.total;
    s.avg_ocr_words = static_cast<double>(ocr_words) / s.total;
    s.pct_images_with_text = static_cast<double>(with_ocr) / s.total;
  }
  return s;
}

std::string stats_to_json(const CorpusStats& s) {
  json j;
  j["total"] = s.total;
  j["antisemitic"] = s.antisemitic;
  j["non_antisemitic"] = s.non_antisemitic;
  json cats;
  for (int c = 0; c < 4; ++c) {
    const char* name = category_name(static_cast<Category>(c));
    cats[name] = s.category_counts[c];
    json uni = json::array(), bi = json::array();
    for (const NGramEntry& e : s.top_unigrams[c]) {
      uni.push_back({{"gram", e.gram}, {"count", e.count}});
    }
    for (const NGramEntry& e : s.top_bigrams[c]) {
      bi.push_back({{"gram", e.gram}, {"count", e.count}});
    }
    j["top_unigrams"][name] = uni;
    j["top_bigrams"][name] = bi;
  }
  j["category_counts"] = cats;
  j["avg_text_words"] = s.avg_text_words;
  j["avg_ocr_words"] = s.avg_ocr_words;
  j["pct_images_with_text"] = s.pct_images_with_text;
  return j.dump(2);
}

void AnnotationMatrix::validate() const {
  if (n < 2) throw DataError("annotation matrix: need n >= 2 annotators");
  if (counts.empty()) throw DataError("annotation matrix: no items");
  const size_t c = counts.front().size();
  if (c < 2) throw DataError("annotation matrix: need >= 2 categories");
  for (size_t i = 0; i < counts.size(); ++i) {
    if (counts[i].size() != c) {
      throw DataError("annotation matrix: ragged row " + std::to_string(i));
    }
    int row = 0;
    for (int v : counts[i]) {
      if (v < 0) throw DataError("annotation matrix: negative count");
      row += v;
    }
    if (row != n) {
      throw DataError("annotation matrix: row " + std::to_string(i) +
                      " sums to " + std::to_string(row) + ", expected " +
                      std::to_string(n));
    }
  }
}

AnnotationMatrix AnnotationMatrix::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open annotation file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed annotation file: " + std::string(e.what()));
  }
  AnnotationMatrix m;
  m.counts = j.at("counts").get<std::vector<std::vector<int>>>();
  if (j.contains("n")) {
    m.n = j.at("n").get<int>();
  } else if (!m.counts.empty()) {
    m.n = std::accumulate(m.counts[0].begin(), m.counts[0].end(), 0);
  }
  m.validate();
  return m;
}

double fleiss_kappa(const AnnotationMatrix& m) {
  m.validate();
  const long N = static_cast<long>(m.counts.size());
  const size_t C = m.counts.front().size();
  const long n = m.n;

  // Degenerate marginal: every rating in one category.
  std::vector<long> col_totals(C, 0);
  for (const auto& row : m.counts) {
    for (size_t c = 0; c < C; ++c) col_totals[c] += row[c];
  }
  for (size_t c = 0; c < C; ++c) {
    if (col_totals[c] == N * n) {
      throw DataError(
          "fleiss_kappa: agreement undefined (all ratings in one category)");
    }
  }

  double p_bar = 0.0;
  for (const auto& row : m.counts) {
    long sq = 0;
    for (int v : row) sq += static_cast<long>(v) * v;
    p_bar += static_cast<double>(sq - n) / (n * (n - 1));
  }
  p_bar /= static_cast<double>(N);

  double pe = 0.0;
  for (size_t c = 0; c < C; ++c) {
    const double p = static_cast<double>(col_totals[c]) /
                     static_cast<double>(N * n);
    pe += p * p;
  }
  return (p_bar - pe) / (1.0 - pe);
}

int label_of(const PostRecord& r, bool multiclass) {
  if (!multiclass) return static_cast<int>(r.binary_label);
  if (!r.category_label) {
    throw DataError("record " + r.id +
                    " has no category label for the multiclass task");
  }
  return static_cast<int>(*r.category_label);
}

}  // namespace semfuse
