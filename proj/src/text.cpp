#include "semfuse/text.hpp"

#include "semfuse/common.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

namespace semfuse {

namespace {

bool is_url_start(const std::string& s, size_t i) {
  auto starts = [&](const char* p) {
    size_t n = std::strlen(p);
    if (i + n > s.size()) return false;
    for (size_t j = 0; j < n; ++j) {
      if (std::tolower(static_cast<unsigned char>(s[i + j])) != p[j]) {
        return false;
      }
    }
    return true;
  };
  return starts("http://") || starts("https://") || starts("www.");
}

}  // namespace

std::string clean_text(const std::string& raw) {
  // Pass 1: drop URL substrings (http://, https://, www. up to whitespace).
  std::string no_urls;
  no_urls.reserve(raw.size());
  for (size_t i = 0; i < raw.size();) {
    if (is_url_start(raw, i)) {
      while (i < raw.size() &&
             !std::isspace(static_cast<unsigned char>(raw[i]))) {
        ++i;
      }
      continue;
    }
    no_urls.push_back(raw[i]);
    ++i;
  }
  // Pass 2: keep ASCII alphanumerics, map everything else to a space,
  // collapse runs of spaces, trim.
  std::string out;
  out.reserve(no_urls.size());
  bool pending_space = false;
  for (unsigned char c : no_urls) {
    if (std::isalnum(c)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(c));
    } else {
      pending_space = true;
    }
  }
  return out;
}

std::vector<std::string> tokenize_words(const std::string& cleaned) {
  std::vector<std::string> words;
  std::istringstream in(cleaned);
  std::string w;
  while (in >> w) {
    std::transform(w.begin(), w.end(), w.begin(), ::tolower);
    words.push_back(w);
  }
  return words;
}

Tokenizer Tokenizer::hashed(int vocab_size) {
  if (vocab_size <= 4) throw ConfigError("tokenizer vocab too small");
  Tokenizer t;
  t.vocab_size_ = vocab_size;
  return t;
}

Tokenizer Tokenizer::from_vocab_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open vocab file: " + path);
  Tokenizer t;
  t.vocab_ = std::unordered_map<std::string, int>{};
  std::string line;
  int next_id = 4;  // ids 0..3 are PAD/CLS/SEP/UNK
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    t.vocab_->emplace(line, next_id++);
  }
  if (t.vocab_->empty()) throw ConfigError("empty vocab file: " + path);
  t.vocab_size_ = next_id;
  return t;
}

int Tokenizer::token_id(const std::string& word) const {
  if (vocab_) {
    auto it = vocab_->find(word);
    return it == vocab_->end() ? unk_id() : it->second;
  }
  const int n_special = 4;
  return n_special +
         static_cast<int>(fnv1a64(word) %
                          static_cast<uint64_t>(vocab_size_ - n_special));
}

TruncationPolicy truncation_policy_from(const std::string& name) {
  if (name == "post_first") return TruncationPolicy::PostFirst;
  if (name == "ocr_first") return TruncationPolicy::OcrFirst;
  throw ConfigError("unknown truncation policy: " + name);
}

TokenSequence build_joint_sequence(const Tokenizer& tok,
                                   const std::string& post_text,
                                   const std::string& ocr_text, int max_len,
                                   TruncationPolicy policy) {
  const int n_special = tok.terminal_sep() ? 3 : 2;
  if (max_len < n_special) throw ConfigError("max_len below special-token frame");

  std::vector<std::string> post = tokenize_words(post_text);
  std::vector<std::string> ocr = tokenize_words(ocr_text);

  const int budget = max_len - n_special;
  int keep_post, keep_ocr;
  if (policy == TruncationPolicy::PostFirst) {
    keep_ocr = std::min<int>(static_cast<int>(ocr.size()), budget);
    keep_post = std::min<int>(static_cast<int>(post.size()), budget - keep_ocr);
  } else {
    keep_post = std::min<int>(static_cast<int>(post.size()), budget);
    keep_ocr = std::min<int>(static_cast<int>(ocr.size()), budget - keep_post);
  }

  TokenSequence seq;
  seq.terminal_sep = tok.terminal_sep();
  seq.ids.push_back(tok.cls_id());
  seq.tokens.push_back("[CLS]");
  for (int i = 0; i < keep_post; ++i) {
    seq.ids.push_back(tok.token_id(post[i]));
    seq.tokens.push_back(post[i]);
  }
  seq.sep_pos = static_cast<int>(seq.ids.size());
  seq.ids.push_back(tok.sep_id());
  seq.tokens.push_back("[SEP]");
  for (int i = 0; i < keep_ocr; ++i) {
    seq.ids.push_back(tok.token_id(ocr[i]));
    seq.tokens.push_back(ocr[i]);
  }
  if (tok.terminal_sep()) {
    seq.ids.push_back(tok.sep_id());
    seq.tokens.push_back("[SEP]");
  }
  return seq;
}

}  // namespace semfuse
