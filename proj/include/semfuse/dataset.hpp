#pragma once

#include "semfuse/common.hpp"

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace semfuse {

enum class BinaryLabel { NonAntisemitic = 0, Antisemitic = 1 };
enum class Category { Political = 0, Economic = 1, Religious = 2, Racial = 3 };
enum class Source { Twitter, Gab };

const char* category_name(Category c);
Category category_from(const std::string& name);
const char* source_name(Source s);
Source source_from(const std::string& name);

/// One social-media post. category_label is present iff the post is labeled
/// antisemitic.
struct PostRecord {
  std::string id;
  std::string text;
  std::string image_path;
  std::string ocr_text;
  BinaryLabel binary_label = BinaryLabel::NonAntisemitic;
  std::optional<Category> category_label;
  Source source = Source::Twitter;
};

struct LoadResult {
  std::vector<PostRecord> records;
  int skipped = 0;  // lenient mode only
};

/// Loads a line-delimited JSON dataset. Strict mode aborts on the first
/// invalid record and verifies that every image decodes; lenient mode skips
/// invalid records (counting them) and defers image checks to use time.
/// require_labels=false accepts files without label keys (predict input).
LoadResult load_dataset(const std::string& path, const std::string& image_root,
                        bool strict, bool require_labels = true);

void save_dataset(const std::vector<PostRecord>& records,
                  const std::string& path);

struct Lexicon {
  std::set<std::string> terms;  // lowercase, no whitespace

  static Lexicon from_terms(const std::vector<std::string>& terms);
  static Lexicon from_file(const std::string& path);
  /// The high-precision seed terms shipped with the project.
  static Lexicon default_lexicon();
};

/// Keeps the records whose cleaned, lowercased post text contains at least
/// one lexicon term as a whole token.
std::vector<PostRecord> lexicon_filter(const std::vector<PostRecord>& records,
                                       const Lexicon& lexicon);

struct Fold {
  std::vector<std::string> train, val, test;
};

struct FoldPlan {
  int k = 0;
  uint64_t seed = 0;
  std::vector<Fold> folds;
};

/// Deterministic stratified k-fold plan with a 64:16:20 train/val/test split
/// per fold (test = the fold bucket; val = 20% of the remainder). Stratified
/// by binary label.
FoldPlan make_fold_plan(const std::vector<PostRecord>& records, int k,
                        uint64_t seed);

/// Asserts the FoldPlan partition invariants against a set of ids.
/// Throws DataError on violation.
void check_fold_plan(const FoldPlan& plan, const std::set<std::string>& ids);

std::string foldplan_to_json(const FoldPlan& plan);
FoldPlan foldplan_from_json(const std::string& text);
void save_fold_plan(const FoldPlan& plan, const std::string& path);
FoldPlan load_fold_plan(const std::string& path);

struct NGramEntry {
  std::string gram;
  long count = 0;
};

struct CorpusStats {
  long total = 0;
  long antisemitic = 0;
  long non_antisemitic = 0;
  std::array<long, 4> category_counts{};  // indexed by Category
  std::array<std::vector<NGramEntry>, 4> top_unigrams;
  std::array<std::vector<NGramEntry>, 4> top_bigrams;
  double avg_text_words = 0.0;
  double avg_ocr_words = 0.0;
  double pct_images_with_text = 0.0;  // fraction of posts with non-empty OCR
};

CorpusStats dataset_stats(const std::vector<PostRecord>& records,
                          int top_k = 10);
std::string stats_to_json(const CorpusStats& stats);

/// Fleiss' agreement matrix: counts[i][c] annotators assigning item i to
/// category c; every row sums to n.
struct AnnotationMatrix {
  std::vector<std::vector<int>> counts;
  int n = 0;  // annotators per item

  void validate() const;  // throws DataError
  static AnnotationMatrix from_json_file(const std::string& path);
};

/// Fleiss' kappa. Throws DataError when chance agreement is 1 (all
/// annotators, all items, a single category) and kappa is undefined.
double fleiss_kappa(const AnnotationMatrix& m);

/// Class index for the configured task; multiclass requires an antisemitic
/// record.
int label_of(const PostRecord& r, bool multiclass);

}  // namespace semfuse
