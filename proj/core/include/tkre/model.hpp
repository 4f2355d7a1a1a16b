#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tkre/config.hpp"
#include "tkre/corpus.hpp"
#include "tkre/params.hpp"
#include "tkre/tensor.hpp"

namespace tkre {

struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 8;
  std::size_t encoder_layers = 1;
  std::size_t ffn_hidden = 512;
  double dropout = 0.5;
  std::size_t top_k = 8;
  std::size_t n_labels = 0;
  std::size_t vocab_size = 0;
  std::size_t max_words = 128;
  std::uint64_t seed = 0;

  void validate() const;
  ConfigMap to_config() const;
  static ModelConfig from_config(const ConfigMap& cfg);
};

enum class QueryRole { E1 = 0, E2 = 1, Pair = 2 };
constexpr std::array<QueryRole, 3> kQueryRoles = {QueryRole::E1, QueryRole::E2, QueryRole::Pair};
const char* role_name(QueryRole role);
QueryRole parse_role(const std::string& name);

struct TopKSelection {
  // Selected word positions ordered by descending selection weight, ties
  // broken toward the lowest index; weights match indices elementwise.
  std::vector<std::size_t> indices;
  std::vector<double> weights;
};

// Deterministic top-k over a weight vector: keep the k largest entries among
// unmasked positions (mask == nullptr means all live), ties to lowest index,
// k clamped to the number of live positions.
TopKSelection select_top_k(const std::vector<double>& weights, const std::vector<bool>* mask,
                           std::size_t k);

struct ForwardTrace {
  std::size_t word_count = 0;
  std::vector<double> context;                      // H^c, row-major [M x d]
  std::vector<double> h_e1, h_e2, h_pair;           // [d]
  std::array<std::vector<double>, 3> attention;     // head-averaged weights per role, [M]
  std::array<TopKSelection, 3> topk;                // per query role
  std::array<std::vector<double>, 3> head_logits;   // biaffine, context, fusion
  std::vector<double> fused_probs;

  std::size_t predicted_label() const;  // argmax, ties toward the lowest id
};

enum class Mode { Train, Eval };

// ---------------------------------------------------------------------------
// Free-standing building blocks (parameters passed explicitly so tests can
// construct degenerate weights).
// ---------------------------------------------------------------------------

// Attention pooling: masked mean of the rows as the query, then scaled
// dot-product attention of that query over the rows themselves.
Tensor attention_pool(const Tensor& rows, const std::vector<bool>& mask);

// Word-level embeddings: pool each word's subwords with attention_pool.
// Words whose subwords are all attention-masked (padding) yield zero rows.
Tensor word_embeddings(const Tensor& subword_reps, const AlignmentMask& alignment,
                       const std::vector<bool>& subword_live);

std::pair<Tensor, Tensor> entity_embeddings(const Tensor& word_reps,
                                            const std::vector<bool>& e1_mask,
                                            const std::vector<bool>& e2_mask);

Tensor pair_projection(const Tensor& h_e1, const Tensor& h_e2, const Tensor& w_p,
                       const Tensor& b_p);

struct TopKAttention {
  Tensor pooled;                     // h_k, [d]
  TopKSelection selection;
  std::vector<double> full_weights;  // head-averaged distribution over all words
};

// Pair-conditioned evidence selection for one query role: project the query,
// score every context word with multi-head attention, average the head
// distributions, keep the top-k words, then re-attend over just those rows.
TopKAttention topk_cross_attention(const Tensor& query, const Tensor& w_role,
                                   const Tensor& b_role, const Tensor& context,
                                   const std::vector<bool>& word_mask, std::size_t k,
                                   std::size_t n_heads);

// Sigmoid-gated blend of a representation with its attention over label
// prototype embeddings; output interpolates elementwise between the two.
Tensor label_gate(const Tensor& h, const Tensor& label_embeddings, const Tensor& w_g,
                  const Tensor& b_g);

// logits_c = e1h' U_c e2h + w_c [e1h ++ e2h] + b_c with a constant-1 feature
// appended to both entity representations. u is [c, d+1, d+1], w is
// [2(d+1), c], b is [c].
Tensor biaffine_head(const Tensor& h_e1, const Tensor& h_e2, const Tensor& u,
                     const Tensor& w, const Tensor& b);

Tensor late_fusion_logits(const Tensor& l1, const Tensor& l2, const Tensor& l3,
                          const Tensor& w);
Tensor late_fusion(const Tensor& l1, const Tensor& l2, const Tensor& l3, const Tensor& w);

// ---------------------------------------------------------------------------
// The full network.
// ---------------------------------------------------------------------------

class Model {
 public:
  explicit Model(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  struct ForwardResult {
    ForwardTrace trace;
    Tensor loss;          // scalar cross-entropy against the instance label
    Tensor fused_logits;  // [n_labels]
  };

  // Runs the whole pipeline: subword embeddings -> word pooling -> entity
  // pooling -> contextual encoder -> pair projection -> three-query top-K
  // evidence -> label gate -> three heads -> late fusion. Dropout is active
  // only in train mode and draws from the supplied RNG.
  ForwardResult forward(const Instance& inst, Mode mode, Rng* rng = nullptr) const;

  ForwardTrace run(const Instance& inst) const;  // eval-mode convenience

  // Contextual encoder exposed for unit tests.
  Tensor contextual_encode(const Tensor& word_reps, const std::vector<bool>& word_mask,
                           bool training, Rng* rng) const;

  void save(const std::string& path, std::uint64_t step,
            const std::map<std::string, std::string>& extra_meta) const;
  static Model load(const std::string& path, Checkpoint* out_ckpt = nullptr);

 private:
  ModelConfig cfg_;
  ParameterSet params_;

  void declare_parameters();
};

}  // namespace tkre
