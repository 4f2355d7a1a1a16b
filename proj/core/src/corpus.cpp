#include "tkre/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace tkre {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const char* const kMarkerE1Open = "[E1]";
const char* const kMarkerE1Close = "[/E1]";
const char* const kMarkerE2Open = "[E2]";
const char* const kMarkerE2Close = "[/E2]";

bool is_marker(const std::string& word) {
  return word == kMarkerE1Open || word == kMarkerE1Close || word == kMarkerE2Open ||
         word == kMarkerE2Close;
}

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

std::optional<Split> parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "validation" || s == "val" || s == "dev") return Split::Validation;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// LabelSet
// ---------------------------------------------------------------------------

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

const std::vector<std::pair<const char*, const char*>> kLabelAliases = {
    {"after", "a"},       {"before", "b"},  {"simultaneous", "s"},
    {"includes", "i"},    {"is_included", "ii"}, {"vague", "v"},
    {"equal", "e"},
};

}  // namespace

LabelSet make_label_set(std::vector<std::string> names, std::string preset) {
  LabelSet ls;
  ls.names_ = std::move(names);
  ls.preset_name_ = std::move(preset);
  for (std::size_t i = 0; i < ls.names_.size(); ++i) {
    ls.add_alias(ls.names_[i], i);
    ls.add_alias(lower(ls.names_[i]), i);
    for (const auto& [full, abbr] : kLabelAliases) {
      if (ls.names_[i] == abbr) ls.add_alias(full, i);
    }
  }
  return ls;
}

void LabelSet::add_alias(const std::string& alias, std::size_t id) {
  index_.emplace(alias, id);  // first mapping wins
}

LabelSet LabelSet::preset(const std::string& name) {
  const std::string key = lower(name);
  if (key == "tbd") return make_label_set({"a", "b", "s", "i", "ii", "v"}, "tbd");
  if (key == "matres") return make_label_set({"e", "a", "b", "v"}, "matres");
  if (key == "tdd" || key == "tddman" || key == "tddauto") {
    return make_label_set({"a", "b", "s", "i", "ii"}, "tdd");
  }
  throw ConfigError("unknown label preset '" + name + "' (expected tbd, matres, or tdd)");
}

LabelSet LabelSet::custom(std::vector<std::string> names) {
  if (names.empty()) throw ConfigError("label set must not be empty");
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) throw ConfigError("duplicate label '" + n + "'");
  }
  return make_label_set(std::move(names), "custom");
}

std::optional<std::size_t> LabelSet::find(const std::string& label) const {
  auto it = index_.find(label);
  if (it != index_.end()) return it->second;
  it = index_.find(lower(label));
  if (it != index_.end()) return it->second;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Alignment and instances
// ---------------------------------------------------------------------------

void AlignmentMask::validate() const {
  int prev = -1;
  std::vector<bool> hit(word_count, false);
  for (const int w : subword_to_word) {
    if (w < -1 || (w >= 0 && static_cast<std::size_t>(w) >= word_count)) {
      throw AlignmentError("subword maps to word " + std::to_string(w) + " outside [0," +
                           std::to_string(word_count) + ")");
    }
    if (w >= 0) {
      if (w < prev) {
        throw AlignmentError("word indices decrease across subwords");
      }
      prev = w;
      hit[static_cast<std::size_t>(w)] = true;
    }
  }
  for (std::size_t i = 0; i < word_count; ++i) {
    if (!hit[i]) {
      throw AlignmentError("word " + std::to_string(i) + " has no subwords");
    }
  }
}

namespace {

// Exactly one contiguous run of true values.
void check_single_run(const std::vector<bool>& mask, const char* what) {
  std::size_t runs = 0;
  bool in_run = false;
  bool any = false;
  for (const bool b : mask) {
    if (b && !in_run) {
      ++runs;
      in_run = true;
      any = true;
    } else if (!b) {
      in_run = false;
    }
  }
  if (!any || runs != 1) {
    throw DataError(std::string(what) + " mask must contain exactly one contiguous span");
  }
}

}  // namespace

void Instance::validate() const {
  alignment.validate();
  if (subword_ids.size() != alignment.subword_to_word.size() ||
      subword_ids.size() != attention_mask.size()) {
    throw DataError("instance subword buffers disagree in length");
  }
  const std::size_t m = alignment.word_count;
  if (e1_mask.size() != m || e2_mask.size() != m || word_mask.size() != m ||
      words.size() != m || word_to_doc_token.size() != m) {
    throw DataError("instance word buffers disagree in length");
  }
  check_single_run(e1_mask, "e1");
  check_single_run(e2_mask, "e2");
  int counts[4] = {0, 0, 0, 0};
  for (const std::string& w : words) {
    if (w == kMarkerE1Open) ++counts[0];
    if (w == kMarkerE1Close) ++counts[1];
    if (w == kMarkerE2Open) ++counts[2];
    if (w == kMarkerE2Close) ++counts[3];
  }
  for (const int c : counts) {
    if (c != 1) throw DataError("entity markers must each appear exactly once");
  }
}

std::vector<std::string> chunk_word(const std::string& word) {
  if (word.empty()) throw DataError("cannot tokenize an empty word");
  if (is_marker(word)) return {word};
  std::vector<std::string> chunks;
  for (std::size_t i = 0; i < word.size(); i += 4) {
    chunks.push_back(word.substr(i, 4));
  }
  return chunks;
}

TokenizedWindow tokenize_and_align(const std::vector<std::string>& window_words) {
  if (window_words.empty()) throw DataError("cannot tokenize an empty window");
  TokenizedWindow out;
  out.alignment.word_count = window_words.size();
  for (std::size_t w = 0; w < window_words.size(); ++w) {
    for (std::string& chunk : chunk_word(window_words[w])) {
      out.chunks.push_back(std::move(chunk));
      out.alignment.subword_to_word.push_back(static_cast<int>(w));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

Vocabulary::Vocabulary() {
  tokens_ = {"<pad>", "<unk>", kMarkerE1Open, kMarkerE1Close, kMarkerE2Open, kMarkerE2Close};
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_[tokens_[i]] = i;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& chunks) {
  Vocabulary v;
  std::set<std::string> sorted;
  for (const std::string& c : chunks) {
    if (v.index_.count(c) == 0) sorted.insert(c);
  }
  for (const std::string& c : sorted) {
    v.index_[c] = v.tokens_.size();
    v.tokens_.push_back(c);
  }
  return v;
}

std::size_t Vocabulary::id(const std::string& chunk) const {
  auto it = index_.find(chunk);
  return it == index_.end() ? kUnk : it->second;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const std::string& t : tokens_) {
    out += t;
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::deserialize(const std::string& blob) {
  std::vector<std::string> toks;
  std::string cur;
  for (const char c : blob) {
    if (c == '\n') {
      toks.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) toks.push_back(cur);
  Vocabulary v;
  if (toks.size() < v.tokens_.size() ||
      !std::equal(v.tokens_.begin(), v.tokens_.end(), toks.begin())) {
    throw CompatError("vocabulary blob is missing the reserved entries");
  }
  for (std::size_t i = v.tokens_.size(); i < toks.size(); ++i) {
    v.index_[toks[i]] = v.tokens_.size();
    v.tokens_.push_back(toks[i]);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Window construction
// ---------------------------------------------------------------------------

namespace {

struct CoveredRange {
  std::size_t start;
  std::size_t end;  // half-open
};

CoveredRange centered_window(std::size_t center2,  // 2*center, to avoid fractions
                             std::size_t width, std::size_t doc_len) {
  const std::size_t w = std::min(width, doc_len);
  std::size_t start = 0;
  if (center2 / 2 > w / 2) start = center2 / 2 - w / 2;
  if (start + w > doc_len) start = doc_len - w;
  return {start, start + w};
}

CoveredRange cover_span(CoveredRange r, const TokenSpan& span, std::size_t doc_len) {
  const std::size_t w = r.end - r.start;
  if (r.start > span.start) {
    r.start = span.start;
    r.end = std::min(doc_len, r.start + w);
  }
  if (r.end < span.end) {
    r.end = span.end;
    r.start = r.end >= w ? r.end - w : 0;
  }
  return r;
}

void validate_pair(const Document& doc, const PairExample& pair) {
  for (const TokenSpan* span : {&pair.e1, &pair.e2}) {
    if (span->end <= span->start || span->end > doc.tokens.size()) {
      throw DataError("entity span [" + std::to_string(span->start) + "," +
                      std::to_string(span->end) + ") out of bounds in doc '" + doc.doc_id +
                      "' (" + std::to_string(doc.tokens.size()) + " tokens)");
    }
  }
  if (pair.e1.overlaps(pair.e2)) {
    throw DataError("invalid pair in doc '" + doc.doc_id + "': entity spans overlap");
  }
}

}  // namespace

WindowWords build_window_words(const Document& doc, const PairExample& pair, std::size_t ws) {
  validate_pair(doc, pair);
  const std::size_t max_span = std::max(pair.e1.length(), pair.e2.length());
  if (ws < max_span + 2) {
    throw ConfigError("window too small: ws=" + std::to_string(ws) +
                      " cannot hold an entity span of " + std::to_string(max_span) +
                      " words plus markers");
  }
  const std::size_t doc_len = doc.tokens.size();
  const std::size_t lo = std::min(pair.e1.start, pair.e2.start);
  const std::size_t hi = std::max(pair.e1.end, pair.e2.end);

  std::vector<std::size_t> covered;
  if (hi - lo <= ws) {
    CoveredRange r = centered_window(lo + hi, ws, doc_len);
    r = cover_span(r, pair.e1, doc_len);
    r = cover_span(r, pair.e2, doc_len);
    for (std::size_t i = r.start; i < r.end; ++i) covered.push_back(i);
  } else {
    const std::size_t half = (ws + 1) / 2;
    std::set<std::size_t> uniq;
    for (const TokenSpan* span : {&pair.e1, &pair.e2}) {
      const std::size_t width = std::max(half, span->length());
      CoveredRange r = centered_window(span->start + span->end, width, doc_len);
      r = cover_span(r, *span, doc_len);
      for (std::size_t i = r.start; i < r.end; ++i) uniq.insert(i);
    }
    covered.assign(uniq.begin(), uniq.end());
  }

  WindowWords out;
  for (const std::size_t tok : covered) {
    if (tok == pair.e1.start) {
      out.words.emplace_back(kMarkerE1Open);
      out.word_to_doc_token.push_back(-1);
      out.e1_words.start = out.words.size();
    }
    if (tok == pair.e2.start) {
      out.words.emplace_back(kMarkerE2Open);
      out.word_to_doc_token.push_back(-1);
      out.e2_words.start = out.words.size();
    }
    out.words.push_back(doc.tokens[tok].surface);
    out.word_to_doc_token.push_back(static_cast<int>(tok));
    if (tok + 1 == pair.e1.end) {
      out.e1_words.end = out.words.size();
      out.words.emplace_back(kMarkerE1Close);
      out.word_to_doc_token.push_back(-1);
    }
    if (tok + 1 == pair.e2.end) {
      out.e2_words.end = out.words.size();
      out.words.emplace_back(kMarkerE2Close);
      out.word_to_doc_token.push_back(-1);
    }
  }
  return out;
}

Instance make_instance(const WindowWords& win, const Vocabulary& vocab, std::size_t label,
                       const std::string& doc_id, std::size_t pair_index) {
  TokenizedWindow tok = tokenize_and_align(win.words);
  Instance inst;
  inst.words = win.words;
  inst.word_to_doc_token = win.word_to_doc_token;
  inst.alignment = std::move(tok.alignment);
  inst.subword_ids.reserve(tok.chunks.size());
  for (const std::string& c : tok.chunks) inst.subword_ids.push_back(vocab.id(c));
  inst.attention_mask.assign(inst.subword_ids.size(), true);
  inst.word_mask.assign(win.words.size(), true);
  inst.e1_mask.assign(win.words.size(), false);
  inst.e2_mask.assign(win.words.size(), false);
  for (std::size_t i = win.e1_words.start; i < win.e1_words.end; ++i) inst.e1_mask[i] = true;
  for (std::size_t i = win.e2_words.start; i < win.e2_words.end; ++i) inst.e2_mask[i] = true;
  inst.label = label;
  inst.doc_id = doc_id;
  inst.pair_index = pair_index;
  inst.validate();
  return inst;
}

Instance build_context_window(const Document& doc, const PairExample& pair, std::size_t ws,
                              const Vocabulary& vocab) {
  return make_instance(build_window_words(doc, pair, ws), vocab, pair.label, doc.doc_id, 0);
}

// ---------------------------------------------------------------------------
// Dataset loading
// ---------------------------------------------------------------------------

std::vector<Token> whitespace_tokenize(const std::string& text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= text.size()) break;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    tokens.push_back(Token{text.substr(start, i - start), start, i});
  }
  return tokens;
}

const Document& Dataset::document(const std::string& doc_id) const {
  auto it = doc_index.find(doc_id);
  if (it == doc_index.end()) throw DataError("unknown document '" + doc_id + "'");
  return documents[it->second];
}

Document& Dataset::document(const std::string& doc_id) {
  auto it = doc_index.find(doc_id);
  if (it == doc_index.end()) throw DataError("unknown document '" + doc_id + "'");
  return documents[it->second];
}

std::vector<std::size_t> Dataset::split_indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].split == s) out.push_back(i);
  }
  return out;
}

namespace {

TokenSpan parse_span(const json& j, const char* field, std::size_t lineno) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_unsigned() ||
      !j[1].is_number_unsigned()) {
    throw ParseError("line " + std::to_string(lineno) + ": field '" + field +
                     "' must be [start,end] with non-negative integers");
  }
  TokenSpan span{j[0].get<std::size_t>(), j[1].get<std::size_t>()};
  if (span.end <= span.start) {
    throw DataError("line " + std::to_string(lineno) + ": span '" + field +
                    "' is empty or reversed");
  }
  return span;
}

}  // namespace

Dataset load_pair_dataset(const std::string& path, const LabelSet& labels) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open pairs file: " + path);
  Dataset ds;
  ds.labels = labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains("doc_id") || !rec["doc_id"].is_string()) {
      throw ParseError("line " + std::to_string(lineno) + ": missing string field 'doc_id'");
    }
    const std::string doc_id = rec["doc_id"].get<std::string>();

    if (rec.contains("text")) {
      if (!rec["text"].is_string()) {
        throw ParseError("line " + std::to_string(lineno) + ": field 'text' must be a string");
      }
      const std::string text = rec["text"].get<std::string>();
      auto it = ds.doc_index.find(doc_id);
      if (it == ds.doc_index.end()) {
        Document doc;
        doc.doc_id = doc_id;
        doc.text = text;
        doc.tokens = whitespace_tokenize(text);
        ds.doc_index[doc_id] = ds.documents.size();
        ds.documents.push_back(std::move(doc));
      } else if (ds.documents[it->second].text != text) {
        throw DataError("line " + std::to_string(lineno) + ": doc '" + doc_id +
                        "' redefined with different text");
      }
    } else if (ds.doc_index.find(doc_id) == ds.doc_index.end()) {
      throw DataError("line " + std::to_string(lineno) + ": doc '" + doc_id +
                      "' referenced before its text was given");
    }

    for (const char* field : {"e1", "e2", "label", "split"}) {
      if (!rec.contains(field)) {
        throw ParseError("line " + std::to_string(lineno) + ": missing field '" +
                         std::string(field) + "'");
      }
    }
    PairExample pair;
    pair.doc_id = doc_id;
    pair.e1 = parse_span(rec["e1"], "e1", lineno);
    pair.e2 = parse_span(rec["e2"], "e2", lineno);
    if (!rec["label"].is_string()) {
      throw ParseError("line " + std::to_string(lineno) + ": field 'label' must be a string");
    }
    const std::string label = rec["label"].get<std::string>();
    const auto label_id = labels.find(label);
    if (!label_id) {
      throw DataError("line " + std::to_string(lineno) + ": label '" + label +
                      "' is not in the '" + labels.preset_name() + "' label set");
    }
    pair.label = *label_id;
    const auto split = parse_split(rec["split"].get<std::string>());
    if (!split) {
      throw DataError("line " + std::to_string(lineno) + ": unknown split '" +
                      rec["split"].get<std::string>() + "'");
    }
    pair.split = *split;
    validate_pair(ds.document(doc_id), pair);
    ds.pairs.push_back(std::move(pair));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Annotations
// ---------------------------------------------------------------------------

AnnotationStats load_annotations(Dataset& dataset, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open annotations file: " + path);
  struct PerDoc {
    std::vector<bool> filled;
    std::vector<TokenAnnotation> anns;
  };
  std::unordered_map<std::string, PerDoc> staged;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;  // document separator
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == '\t') {
        fields.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (fields.size() != 6) {
      throw ParseError("annotations line " + std::to_string(lineno) + ": expected 6 fields, got " +
                       std::to_string(fields.size()));
    }
    const std::string& doc_id = fields[0];
    auto doc_it = dataset.doc_index.find(doc_id);
    if (doc_it == dataset.doc_index.end()) {
      throw AlignmentError("annotations line " + std::to_string(lineno) + ": unknown doc '" +
                           doc_id + "'");
    }
    Document& doc = dataset.documents[doc_it->second];
    std::size_t index = 0;
    try {
      index = std::stoull(fields[1]);
    } catch (const std::exception&) {
      throw ParseError("annotations line " + std::to_string(lineno) +
                       ": token index is not an integer");
    }
    if (index >= doc.tokens.size()) {
      throw AlignmentError("doc '" + doc_id + "': annotation index " + std::to_string(index) +
                           " out of range (" + std::to_string(doc.tokens.size()) + " tokens)");
    }
    if (doc.tokens[index].surface != fields[2]) {
      throw AlignmentError("doc '" + doc_id + "' index " + std::to_string(index) +
                           ": surface mismatch ('" + fields[2] + "' vs '" +
                           doc.tokens[index].surface + "')");
    }
    PerDoc& pd = staged[doc_id];
    if (pd.filled.empty()) {
      pd.filled.assign(doc.tokens.size(), false);
      pd.anns.assign(doc.tokens.size(), TokenAnnotation{});
    }
    if (pd.filled[index]) {
      throw AlignmentError("doc '" + doc_id + "' index " + std::to_string(index) +
                           ": duplicate annotation");
    }
    pd.filled[index] = true;
    pd.anns[index] = TokenAnnotation{fields[3], fields[4], fields[5]};
  }

  AnnotationStats stats;
  stats.documents_total = dataset.documents.size();
  for (auto& [doc_id, pd] : staged) {
    const std::size_t have = static_cast<std::size_t>(
        std::count(pd.filled.begin(), pd.filled.end(), true));
    if (have != pd.filled.size()) {
      throw AlignmentError("doc '" + doc_id + "': " + std::to_string(have) +
                           " annotations for " + std::to_string(pd.filled.size()) + " tokens");
    }
    dataset.document(doc_id).annotations = std::move(pd.anns);
    stats.documents_annotated += 1;
    stats.tokens_annotated += have;
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Distance statistics
// ---------------------------------------------------------------------------

std::size_t token_distance(const PairExample& pair) {
  const TokenSpan& first = pair.e1.start <= pair.e2.start ? pair.e1 : pair.e2;
  const TokenSpan& second = pair.e1.start <= pair.e2.start ? pair.e2 : pair.e1;
  return second.start - (first.end - 1);
}

std::size_t char_distance(const Document& doc, const PairExample& pair) {
  const TokenSpan& first = pair.e1.start <= pair.e2.start ? pair.e1 : pair.e2;
  const TokenSpan& second = pair.e1.start <= pair.e2.start ? pair.e2 : pair.e1;
  const std::size_t end_char = doc.tokens[first.end - 1].char_end;
  const std::size_t start_char = doc.tokens[second.start].char_start;
  return start_char >= end_char ? start_char - end_char : 0;
}

namespace {

DistanceRow summarize(const Dataset& ds, const std::vector<std::size_t>& idxs,
                      const std::string& name) {
  DistanceRow row;
  row.split = name;
  row.n_pairs = idxs.size();
  if (idxs.empty()) return row;
  double sum_char = 0.0, sum_tok = 0.0;
  std::size_t mn = SIZE_MAX, mx = 0;
  for (const std::size_t i : idxs) {
    const PairExample& p = ds.pairs[i];
    const std::size_t td = token_distance(p);
    sum_tok += static_cast<double>(td);
    sum_char += static_cast<double>(char_distance(ds.document(p.doc_id), p));
    mn = std::min(mn, td);
    mx = std::max(mx, td);
  }
  row.avg_char = sum_char / static_cast<double>(idxs.size());
  row.avg_token = sum_tok / static_cast<double>(idxs.size());
  row.min_token = mn;
  row.max_token = mx;
  return row;
}

}  // namespace

std::vector<DistanceRow> distance_statistics(const Dataset& dataset) {
  std::vector<DistanceRow> rows;
  for (const Split s : {Split::Train, Split::Validation, Split::Test}) {
    const auto idxs = dataset.split_indices(s);
    if (!idxs.empty()) rows.push_back(summarize(dataset, idxs, split_name(s)));
  }
  std::vector<std::size_t> all(dataset.pairs.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  rows.push_back(summarize(dataset, all, "all"));
  return rows;
}

namespace {

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

void write_stats_csv(const std::string& path, const std::string& dataset_name,
                     const std::vector<DistanceRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write stats csv: " + path);
  os << "dataset,split,avg_char,avg_token,min_token,max_token\n";
  for (const DistanceRow& r : rows) {
    os << dataset_name << "," << r.split << "," << fmt_g(r.avg_char) << ","
       << fmt_g(r.avg_token) << "," << r.min_token << "," << r.max_token << "\n";
  }
}

// ---------------------------------------------------------------------------
// Writers
// ---------------------------------------------------------------------------

void write_pairs_jsonl(const Dataset& dataset, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write pairs file: " + path);
  std::set<std::string> emitted;
  for (const PairExample& p : dataset.pairs) {
    ordered_json rec;
    rec["doc_id"] = p.doc_id;
    if (emitted.insert(p.doc_id).second) {
      rec["text"] = dataset.document(p.doc_id).text;
    }
    rec["e1"] = {p.e1.start, p.e1.end};
    rec["e2"] = {p.e2.start, p.e2.end};
    rec["label"] = dataset.labels.name(p.label);
    rec["split"] = split_name(p.split);
    os << rec.dump() << "\n";
  }
}

void write_annotations_tsv(const Dataset& dataset, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write annotations file: " + path);
  bool first = true;
  for (const Document& doc : dataset.documents) {
    if (!doc.has_annotations()) continue;
    if (!first) os << "\n";
    first = false;
    for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
      const TokenAnnotation& a = doc.annotations[i];
      os << doc.doc_id << "\t" << i << "\t" << doc.tokens[i].surface << "\t" << a.pos << "\t"
         << a.dep << "\t" << (a.morph.empty() ? "_" : a.morph) << "\n";
    }
  }
}

}  // namespace tkre
