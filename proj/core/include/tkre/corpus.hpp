#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tkre/errors.hpp"

namespace tkre {

struct Token {
  std::string surface;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
};

struct TokenAnnotation {
  std::string pos;
  std::string dep;
  std::string morph;  // "key=value|key=value" atoms, "_" or empty when absent
};

struct Document {
  std::string doc_id;
  std::string text;
  std::vector<Token> tokens;
  std::vector<TokenAnnotation> annotations;  // empty, or one per token

  bool has_annotations() const { return !annotations.empty(); }
};

enum class Split { Train = 0, Validation = 1, Test = 2 };

const char* split_name(Split s);
std::optional<Split> parse_split(const std::string& s);

// Half-open token index range [start, end).
struct TokenSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start; }
  bool overlaps(const TokenSpan& other) const {
    return start < other.end && other.start < end;
  }
};

struct PairExample {
  std::string doc_id;
  TokenSpan e1;
  TokenSpan e2;
  std::size_t label = 0;
  Split split = Split::Train;
};

// Closed label inventory with canonical short names plus accepted aliases
// (e.g. "Before" -> "b"). Presets follow the benchmark datasets' label sets.
class LabelSet {
 public:
  static LabelSet preset(const std::string& name);  // tbd | matres | tdd
  static LabelSet custom(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t id) const { return names_.at(id); }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<std::size_t> find(const std::string& label) const;
  bool has(const std::string& label) const { return find(label).has_value(); }
  const std::string& preset_name() const { return preset_name_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;  // includes aliases
  std::string preset_name_ = "custom";

  void add_alias(const std::string& alias, std::size_t id);
  friend LabelSet make_label_set(std::vector<std::string>, std::string);
};

// Subword-to-word mapping. -1 marks pad/special subwords with no word.
struct AlignmentMask {
  std::vector<int> subword_to_word;
  std::size_t word_count = 0;

  // Enforces the partition invariants: non-decreasing word indices covering
  // [0, word_count) with no gaps.
  void validate() const;
};

// One classifiable entity pair in its marked context window.
struct Instance {
  std::vector<std::size_t> subword_ids;
  AlignmentMask alignment;
  std::vector<bool> e1_mask;          // over words
  std::vector<bool> e2_mask;          // over words
  std::vector<bool> attention_mask;   // over subwords
  std::vector<bool> word_mask;        // over words; false for padding
  std::size_t label = 0;
  std::string doc_id;
  std::vector<int> word_to_doc_token;  // -1 for markers/padding
  std::vector<std::string> words;      // window surfaces, markers included
  std::size_t pair_index = 0;          // ordinal of the pair in its dataset

  std::size_t word_count() const { return alignment.word_count; }
  void validate() const;
};

extern const char* const kMarkerE1Open;
extern const char* const kMarkerE1Close;
extern const char* const kMarkerE2Open;
extern const char* const kMarkerE2Close;

bool is_marker(const std::string& word);

// Greedy fixed-width subword scheme: every word splits into chunks of at
// most four bytes; the four entity markers stay atomic. Deterministic, and
// concatenating a word's chunks reproduces the word exactly.
std::vector<std::string> chunk_word(const std::string& word);

struct TokenizedWindow {
  std::vector<std::string> chunks;
  AlignmentMask alignment;
};

TokenizedWindow tokenize_and_align(const std::vector<std::string>& window_words);

// Chunk vocabulary with reserved pad/unk/marker entries; corpus chunks are
// stored sorted so the mapping is independent of document order.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  Vocabulary();
  static Vocabulary build(const std::vector<std::string>& chunks);

  std::size_t id(const std::string& chunk) const;
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }

  std::string serialize() const;  // newline-joined, for checkpoint metadata
  static Vocabulary deserialize(const std::string& blob);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Words of a context window before subword tokenization.
struct WindowWords {
  std::vector<std::string> words;
  std::vector<int> word_to_doc_token;  // -1 for markers
  TokenSpan e1_words;                  // spans over the marked word list
  TokenSpan e2_words;
};

// Window construction: one ws-word window centered between the entities when
// they fit, otherwise two ceil(ws/2)-word subwindows centered on each entity,
// concatenated with any overlap deduplicated in document order. Markers are
// inserted around both entity spans.
WindowWords build_window_words(const Document& doc, const PairExample& pair, std::size_t ws);

Instance make_instance(const WindowWords& win, const Vocabulary& vocab,
                       std::size_t label, const std::string& doc_id,
                       std::size_t pair_index);

Instance build_context_window(const Document& doc, const PairExample& pair, std::size_t ws,
                              const Vocabulary& vocab);

struct Dataset {
  LabelSet labels = LabelSet::custom({"0"});
  std::vector<Document> documents;
  std::unordered_map<std::string, std::size_t> doc_index;
  std::vector<PairExample> pairs;  // file order; index is the pair ordinal

  const Document& document(const std::string& doc_id) const;
  Document& document(const std::string& doc_id);
  std::vector<std::size_t> split_indices(Split s) const;
  std::size_t split_count(Split s) const { return split_indices(s).size(); }
};

// pairs.jsonl loader: one JSON object per line with fields
//   doc_id, text (first mention of a doc), e1:[start,end), e2:[start,end),
//   label, split. Document text is whitespace-tokenized.
Dataset load_pair_dataset(const std::string& path, const LabelSet& labels);

struct AnnotationStats {
  std::size_t documents_annotated = 0;
  std::size_t documents_total = 0;
  std::size_t tokens_annotated = 0;
};

// annotations.tsv loader: CoNLL-style "doc_id TAB index TAB surface TAB pos
// TAB dep TAB morph" rows, blank line between documents.
AnnotationStats load_annotations(Dataset& dataset, const std::string& path);

struct DistanceRow {
  std::string split;  // "train" | "validation" | "test" | "all"
  double avg_char = 0.0;
  double avg_token = 0.0;
  std::size_t min_token = 0;
  std::size_t max_token = 0;
  std::size_t n_pairs = 0;
};

// Edge-to-edge distances between the two entity spans (adjacent tokens have
// token distance 1).
std::vector<DistanceRow> distance_statistics(const Dataset& dataset);

std::size_t token_distance(const PairExample& pair);
std::size_t char_distance(const Document& doc, const PairExample& pair);

void write_stats_csv(const std::string& path, const std::string& dataset_name,
                     const std::vector<DistanceRow>& rows);

void write_pairs_jsonl(const Dataset& dataset, const std::string& path);
void write_annotations_tsv(const Dataset& dataset, const std::string& path);

// Whitespace tokenization with character offsets (spaces/tabs/newlines).
std::vector<Token> whitespace_tokenize(const std::string& text);

}  // namespace tkre
