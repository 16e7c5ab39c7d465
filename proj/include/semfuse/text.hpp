#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace semfuse {

/// Strips URL substrings, then restricts the text to ASCII letters, digits
/// and single spaces. Idempotent; may return an empty string.
std::string clean_text(const std::string& raw);

/// Lowercased whitespace split of already-cleaned text.
std::vector<std::string> tokenize_words(const std::string& cleaned);

/// Word-level tokenizer owned by a text backbone. Without a vocabulary file
/// it maps words to ids by stable hashing (the stand-in convention); with one
/// it does exact lookup with UNK fallback.
class Tokenizer {
 public:
  static Tokenizer hashed(int vocab_size);
  static Tokenizer from_vocab_file(const std::string& path);

  int pad_id() const { return 0; }
  int cls_id() const { return 1; }
  int sep_id() const { return 2; }
  int unk_id() const { return 3; }
  bool terminal_sep() const { return true; }

  int vocab_size() const { return vocab_size_; }
  int token_id(const std::string& word) const;

 private:
  int vocab_size_ = 0;
  std::optional<std::unordered_map<std::string, int>> vocab_;
};

enum class TruncationPolicy { PostFirst, OcrFirst };

TruncationPolicy truncation_policy_from(const std::string& name);

/// [CLS] post tokens [SEP] ocr tokens [SEP] with layout bookkeeping.
struct TokenSequence {
  std::vector<int> ids;
  std::vector<std::string> tokens;  // aligned strings, specials included
  int sep_pos = 0;                  // the separator between the two segments
  bool terminal_sep = false;

  int length() const { return static_cast<int>(ids.size()); }
};

/// Assembles the joint post+OCR sequence. PostFirst truncates the post-text
/// segment before touching OCR; OcrFirst is the inverse. Sequence length
/// never exceeds max_len.
TokenSequence build_joint_sequence(const Tokenizer& tok,
                                   const std::string& post_text,
                                   const std::string& ocr_text, int max_len,
                                   TruncationPolicy policy =
                                       TruncationPolicy::PostFirst);

}  // namespace semfuse
