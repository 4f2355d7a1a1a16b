#include "tkre/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace tkre {

void ModelConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
    throw ConfigError("d_model (" + std::to_string(d_model) +
                      ") must be a positive multiple of n_heads (" + std::to_string(n_heads) +
                      ")");
  }
  if (top_k < 1) throw ConfigError("top_k must be at least 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0,1)");
  if (n_labels == 0) throw ConfigError("n_labels must be positive");
  if (vocab_size == 0) throw ConfigError("vocab_size must be positive");
  if (max_words == 0) throw ConfigError("max_words must be positive");
  if (encoder_layers == 0) throw ConfigError("encoder_layers must be positive");
  if (ffn_hidden == 0) throw ConfigError("ffn_hidden must be positive");
}

ConfigMap ModelConfig::to_config() const {
  ConfigMap cfg;
  cfg["model.d_model"] = std::to_string(d_model);
  cfg["model.n_heads"] = std::to_string(n_heads);
  cfg["model.encoder_layers"] = std::to_string(encoder_layers);
  cfg["model.ffn_hidden"] = std::to_string(ffn_hidden);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", dropout);
  cfg["model.dropout"] = buf;
  cfg["model.top_k"] = std::to_string(top_k);
  cfg["model.n_labels"] = std::to_string(n_labels);
  cfg["model.vocab_size"] = std::to_string(vocab_size);
  cfg["model.max_words"] = std::to_string(max_words);
  cfg["model.seed"] = std::to_string(seed);
  return cfg;
}

ModelConfig ModelConfig::from_config(const ConfigMap& cfg) {
  ModelConfig mc;
  mc.d_model = cfg_get_u64(cfg, "model.d_model", mc.d_model);
  mc.n_heads = cfg_get_u64(cfg, "model.n_heads", mc.n_heads);
  mc.encoder_layers = cfg_get_u64(cfg, "model.encoder_layers", mc.encoder_layers);
  mc.ffn_hidden = cfg_get_u64(cfg, "model.ffn_hidden", mc.ffn_hidden);
  mc.dropout = cfg_get_double(cfg, "model.dropout", mc.dropout);
  mc.top_k = cfg_get_u64(cfg, "model.top_k", mc.top_k);
  mc.n_labels = cfg_get_u64(cfg, "model.n_labels", mc.n_labels);
  mc.vocab_size = cfg_get_u64(cfg, "model.vocab_size", mc.vocab_size);
  mc.max_words = cfg_get_u64(cfg, "model.max_words", mc.max_words);
  mc.seed = cfg_get_u64(cfg, "model.seed", mc.seed);
  return mc;
}

const char* role_name(QueryRole role) {
  switch (role) {
    case QueryRole::E1: return "e1";
    case QueryRole::E2: return "e2";
    case QueryRole::Pair: return "pair";
  }
  return "?";
}

QueryRole parse_role(const std::string& name) {
  if (name == "e1") return QueryRole::E1;
  if (name == "e2") return QueryRole::E2;
  if (name == "pair") return QueryRole::Pair;
  throw ConfigError("unknown query role '" + name + "' (expected e1, e2, or pair)");
}

std::size_t ForwardTrace::predicted_label() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < fused_probs.size(); ++i) {
    if (fused_probs[i] > fused_probs[best]) best = i;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

Tensor attention_pool(const Tensor& rows, const std::vector<bool>& mask) {
  const Tensor query = mean_rows_masked(rows, mask);
  return scaled_dot_attention(query, rows, rows, &mask).output;
}

Tensor word_embeddings(const Tensor& subword_reps, const AlignmentMask& alignment,
                       const std::vector<bool>& subword_live) {
  if (subword_reps.rank() != 2 ||
      subword_reps.dim(0) != alignment.subword_to_word.size() ||
      subword_live.size() != alignment.subword_to_word.size()) {
    throw ShapeError("word_embeddings: subword buffers disagree with " +
                     shape_str(subword_reps.shape()));
  }
  const std::size_t d = subword_reps.dim(1);
  std::vector<std::vector<std::size_t>> by_word(alignment.word_count);
  std::vector<std::size_t> live_count(alignment.word_count, 0);
  for (std::size_t s = 0; s < alignment.subword_to_word.size(); ++s) {
    const int w = alignment.subword_to_word[s];
    if (w < 0) continue;
    if (subword_live[s]) {
      by_word[static_cast<std::size_t>(w)].push_back(s);
      live_count[static_cast<std::size_t>(w)] += 1;
    }
  }
  std::vector<Tensor> rows;
  rows.reserve(alignment.word_count);
  for (std::size_t w = 0; w < alignment.word_count; ++w) {
    if (live_count[w] == 0) {
      // Fully masked word: padding. Words with no subwords at all are
      // rejected by AlignmentMask::validate.
      bool has_any = false;
      for (const int sw : alignment.subword_to_word) {
        if (sw == static_cast<int>(w)) {
          has_any = true;
          break;
        }
      }
      if (!has_any) {
        throw AlignmentError("word " + std::to_string(w) + " has no subwords");
      }
      rows.push_back(Tensor::zeros({d}));
      continue;
    }
    const Tensor sub = gather_rows(subword_reps, by_word[w]);
    const std::vector<bool> all(by_word[w].size(), true);
    rows.push_back(attention_pool(sub, all));
  }
  return stack_rows(rows);
}

std::pair<Tensor, Tensor> entity_embeddings(const Tensor& word_reps,
                                            const std::vector<bool>& e1_mask,
                                            const std::vector<bool>& e2_mask) {
  return {attention_pool(word_reps, e1_mask), attention_pool(word_reps, e2_mask)};
}

Tensor pair_projection(const Tensor& h_e1, const Tensor& h_e2, const Tensor& w_p,
                       const Tensor& b_p) {
  return linear(concat({h_e1, h_e2}), w_p, b_p);
}

TopKSelection select_top_k(const std::vector<double>& weights, const std::vector<bool>* mask,
                           std::size_t k) {
  if (k < 1) throw ConfigError("top-k selection needs k >= 1");
  if (mask != nullptr && mask->size() != weights.size()) {
    throw ShapeError("select_top_k: mask length mismatch");
  }
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (mask == nullptr || (*mask)[i]) live.push_back(i);
  }
  if (live.empty()) throw EmptySupportError("top-k selection over empty support");
  std::sort(live.begin(), live.end(), [&](std::size_t a, std::size_t b) {
    if (weights[a] != weights[b]) return weights[a] > weights[b];
    return a < b;
  });
  const std::size_t take = std::min(k, live.size());
  TopKSelection sel;
  sel.indices.assign(live.begin(), live.begin() + static_cast<std::ptrdiff_t>(take));
  sel.weights.reserve(take);
  for (const std::size_t i : sel.indices) sel.weights.push_back(weights[i]);
  return sel;
}

namespace {

// Head-averaged attention distribution of a projected query over the context
// rows. Pure value computation: selection is discrete, so it lives off the
// tape; gradients reach the selected rows through the re-attention instead.
std::vector<double> head_averaged_weights(const std::vector<double>& query,
                                          const Tensor& context,
                                          const std::vector<bool>& word_mask,
                                          std::size_t n_heads) {
  const std::size_t m = context.dim(0);
  const std::size_t d = context.dim(1);
  const std::size_t dh = d / n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<double> avg(m, 0.0);
  std::vector<double> scores(m);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::size_t off = h * dh;
    double mx = -HUGE_VAL;
    for (std::size_t j = 0; j < m; ++j) {
      if (!word_mask[j]) continue;
      double s = 0.0;
      const double* row = context.data().data() + j * d + off;
      for (std::size_t t = 0; t < dh; ++t) s += query[off + t] * row[t];
      scores[j] = s * inv_sqrt;
      mx = std::max(mx, scores[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (!word_mask[j]) continue;
      scores[j] = std::exp(scores[j] - mx);
      z += scores[j];
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (word_mask[j]) avg[j] += scores[j] / z;
    }
  }
  const double inv_heads = 1.0 / static_cast<double>(n_heads);
  for (double& v : avg) v *= inv_heads;
  return avg;
}

}  // namespace

TopKAttention topk_cross_attention(const Tensor& query, const Tensor& w_role,
                                   const Tensor& b_role, const Tensor& context,
                                   const std::vector<bool>& word_mask, std::size_t k,
                                   std::size_t n_heads) {
  if (k < 1) throw ConfigError("top_k must be at least 1");
  if (context.rank() != 2 || word_mask.size() != context.dim(0)) {
    throw ShapeError("topk_cross_attention: context " + shape_str(context.shape()) +
                     " vs mask of " + std::to_string(word_mask.size()));
  }
  const std::size_t d = context.dim(1);
  if (n_heads == 0 || d % n_heads != 0) {
    throw ConfigError("context width " + std::to_string(d) + " is not divisible by " +
                      std::to_string(n_heads) + " heads");
  }
  if (std::none_of(word_mask.begin(), word_mask.end(), [](bool b) { return b; })) {
    throw EmptySupportError("topk_cross_attention: empty context");
  }
  const Tensor hq = linear(query, w_role, b_role);
  TopKAttention out;
  out.full_weights = head_averaged_weights(hq.data(), context, word_mask, n_heads);
  out.selection = select_top_k(out.full_weights, &word_mask, k);
  const Tensor rows = gather_rows(context, out.selection.indices);
  out.pooled = scaled_dot_attention(hq, rows, rows).output;
  return out;
}

Tensor label_gate(const Tensor& h, const Tensor& label_embeddings, const Tensor& w_g,
                  const Tensor& b_g) {
  const Tensor l = scaled_dot_attention(h, label_embeddings, label_embeddings).output;
  const Tensor g = sigmoid(linear(concat({h, l}), w_g, b_g));
  return add(mul(g, h), mul(affine(g, -1.0, 1.0), l));
}

Tensor biaffine_head(const Tensor& h_e1, const Tensor& h_e2, const Tensor& u,
                     const Tensor& w, const Tensor& b) {
  if (u.rank() != 3 || u.dim(1) != u.dim(2)) {
    throw ShapeError("biaffine: u must be [c,d+1,d+1], got " + shape_str(u.shape()));
  }
  const std::size_t c = u.dim(0);
  const std::size_t dp = u.dim(1);
  if (h_e1.rank() != 1 || h_e1.dim(0) + 1 != dp || h_e2.dim(0) + 1 != dp) {
    throw ShapeError("biaffine: entity width mismatch with " + shape_str(u.shape()));
  }
  const Tensor one = Tensor::scalar(1.0);
  const Tensor e1h = concat({h_e1, one});
  const Tensor e2h = concat({h_e2, one});
  // e1h^T U_c e2h for every class at once: flatten U to [c*(d+1), d+1].
  const Tensor t = matmul(reshape(u, {c * dp, dp}), reshape(e2h, {dp, 1}));
  const Tensor bil = reshape(matmul(reshape(t, {c, dp}), reshape(e1h, {dp, 1})), {c});
  const Tensor lin = linear(concat({e1h, e2h}), w, b);
  return add(bil, lin);
}

Tensor late_fusion_logits(const Tensor& l1, const Tensor& l2, const Tensor& l3,
                          const Tensor& w) {
  if (w.size() != 3) throw ShapeError("late fusion weight vector must have 3 entries");
  if (l1.shape() != l2.shape() || l2.shape() != l3.shape()) {
    throw ShapeError("late fusion: logit vectors disagree in shape");
  }
  const Tensor s1 = mul_by_scalar_tensor(l1, slice(w, 0, 1));
  const Tensor s2 = mul_by_scalar_tensor(l2, slice(w, 1, 1));
  const Tensor s3 = mul_by_scalar_tensor(l3, slice(w, 2, 1));
  return add(add(s1, s2), s3);
}

Tensor late_fusion(const Tensor& l1, const Tensor& l2, const Tensor& l3, const Tensor& w) {
  return softmax(late_fusion_logits(l1, l2, l3, w), 0);
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

Model::Model(ModelConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  declare_parameters();
  params_.initialize(cfg_.seed);
}

void Model::declare_parameters() {
  const std::size_t d = cfg_.d_model;
  const std::size_t f = cfg_.ffn_hidden;
  const std::size_t c = cfg_.n_labels;
  const std::size_t dp = d + 1;
  params_.declare("embed.tok", {cfg_.vocab_size, d}, Init::Normal002);
  params_.declare("embed.pos", {cfg_.max_words, d}, Init::Normal002);
  for (std::size_t i = 0; i < cfg_.encoder_layers; ++i) {
    const std::string p = "enc" + std::to_string(i) + ".";
    params_.declare(p + "ln1.gamma", {d}, Init::Ones);
    params_.declare(p + "ln1.beta", {d}, Init::Zeros);
    for (const char* side : {"wq", "wk", "wv", "wo"}) {
      params_.declare(p + "attn." + side, {d, d}, Init::XavierUniform);
    }
    for (const char* side : {"bq", "bk", "bv", "bo"}) {
      params_.declare(p + "attn." + side, {d}, Init::Zeros);
    }
    params_.declare(p + "ln2.gamma", {d}, Init::Ones);
    params_.declare(p + "ln2.beta", {d}, Init::Zeros);
    params_.declare(p + "ffn.w1", {d, f}, Init::XavierUniform);
    params_.declare(p + "ffn.b1", {f}, Init::Zeros);
    params_.declare(p + "ffn.w2", {f, d}, Init::XavierUniform);
    params_.declare(p + "ffn.b2", {d}, Init::Zeros);
  }
  params_.declare("pair.w", {2 * d, d}, Init::XavierUniform);
  params_.declare("pair.b", {d}, Init::Zeros);
  for (const char* role : {"e1", "e2", "pair"}) {
    params_.declare(std::string("role.") + role + ".w", {d, d}, Init::XavierUniform);
    params_.declare(std::string("role.") + role + ".b", {d}, Init::Zeros);
  }
  params_.declare("labels.emb", {c, d}, Init::Normal002);
  params_.declare("gate.w", {2 * d, d}, Init::XavierUniform);
  params_.declare("gate.b", {d}, Init::Zeros);
  params_.declare("biaffine.u", {c, dp, dp}, Init::XavierUniform);
  params_.declare("biaffine.w", {2 * dp, c}, Init::XavierUniform);
  params_.declare("biaffine.b", {c}, Init::Zeros);
  params_.declare("head.ctx.w1", {3 * d, f}, Init::XavierUniform);
  params_.declare("head.ctx.b1", {f}, Init::Zeros);
  params_.declare("head.ctx.w2", {f, c}, Init::XavierUniform);
  params_.declare("head.ctx.b2", {c}, Init::Zeros);
  params_.declare("head.fus.w1", {4 * d, f}, Init::XavierUniform);
  params_.declare("head.fus.b1", {f}, Init::Zeros);
  params_.declare("head.fus.w2", {f, c}, Init::XavierUniform);
  params_.declare("head.fus.b2", {c}, Init::Zeros);
  params_.declare("fusion.w", {3}, Init::Ones);
}

Tensor Model::contextual_encode(const Tensor& word_reps, const std::vector<bool>& word_mask,
                                bool training, Rng* rng) const {
  if (word_reps.rank() != 2 || word_reps.dim(1) != cfg_.d_model) {
    throw ShapeError("contextual_encode: expected [M," + std::to_string(cfg_.d_model) +
                     "], got " + shape_str(word_reps.shape()));
  }
  const std::size_t m = word_reps.dim(0);
  if (m > cfg_.max_words) {
    throw ShapeError("window has " + std::to_string(m) + " words, max_words is " +
                     std::to_string(cfg_.max_words));
  }
  const std::size_t d = cfg_.d_model;
  const std::size_t heads = cfg_.n_heads;
  const std::size_t dh = d / heads;

  std::vector<std::size_t> iota(m);
  std::iota(iota.begin(), iota.end(), 0);
  Tensor x = add(word_reps, gather_rows(params_.at("embed.pos"), iota));
  x = dropout(x, cfg_.dropout, training, rng);

  for (std::size_t layer = 0; layer < cfg_.encoder_layers; ++layer) {
    const std::string p = "enc" + std::to_string(layer) + ".";
    const Tensor a = layernorm(x, params_.at(p + "ln1.gamma"), params_.at(p + "ln1.beta"));
    const Tensor q = linear(a, params_.at(p + "attn.wq"), params_.at(p + "attn.bq"));
    const Tensor kk = linear(a, params_.at(p + "attn.wk"), params_.at(p + "attn.bk"));
    const Tensor v = linear(a, params_.at(p + "attn.wv"), params_.at(p + "attn.bv"));
    std::vector<Tensor> head_outs;
    head_outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
      const Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
      const Tensor kh = slice_cols(kk, h * dh, (h + 1) * dh);
      const Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
      head_outs.push_back(scaled_dot_attention(qh, kh, vh, &word_mask).output);
    }
    Tensor att = linear(concat_cols(head_outs), params_.at(p + "attn.wo"),
                        params_.at(p + "attn.bo"));
    att = dropout(att, cfg_.dropout, training, rng);
    const Tensor x1 = add(x, att);

    const Tensor bnorm = layernorm(x1, params_.at(p + "ln2.gamma"), params_.at(p + "ln2.beta"));
    Tensor ff = linear(gelu(linear(bnorm, params_.at(p + "ffn.w1"), params_.at(p + "ffn.b1"))),
                       params_.at(p + "ffn.w2"), params_.at(p + "ffn.b2"));
    ff = dropout(ff, cfg_.dropout, training, rng);
    x = add(x1, ff);
  }
  return x;
}

namespace {

Tensor mlp_head(const Tensor& input, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                const Tensor& b2, double p, bool training, Rng* rng) {
  Tensor hidden = gelu(linear(input, w1, b1));
  hidden = dropout(hidden, p, training, rng);
  return linear(hidden, w2, b2);
}

}  // namespace

Model::ForwardResult Model::forward(const Instance& inst, Mode mode, Rng* rng) const {
  inst.validate();
  const std::size_t m = inst.word_count();
  if (m > cfg_.max_words) {
    throw ShapeError("instance has " + std::to_string(m) + " words, max_words is " +
                     std::to_string(cfg_.max_words));
  }
  for (const std::size_t id : inst.subword_ids) {
    if (id >= cfg_.vocab_size) {
      throw CompatError("subword id " + std::to_string(id) + " outside vocabulary of " +
                        std::to_string(cfg_.vocab_size));
    }
  }
  if (inst.label >= cfg_.n_labels) {
    throw DataError("label id " + std::to_string(inst.label) + " outside model's " +
                    std::to_string(cfg_.n_labels) + " labels");
  }
  const bool training = mode == Mode::Train;
  if (training && cfg_.dropout > 0.0 && rng == nullptr) {
    throw StateError("training forward requires the run RNG for dropout");
  }

  const Tensor x = embedding_lookup(params_.at("embed.tok"), inst.subword_ids);
  const Tensor hw = word_embeddings(x, inst.alignment, inst.attention_mask);
  const auto [h_e1, h_e2] = entity_embeddings(hw, inst.e1_mask, inst.e2_mask);
  const Tensor hc = contextual_encode(hw, inst.word_mask, training, rng);
  const Tensor h_pair = pair_projection(h_e1, h_e2, params_.at("pair.w"), params_.at("pair.b"));

  const Tensor* queries[3] = {&h_e1, &h_e2, &h_pair};
  std::array<TopKAttention, 3> evidence;
  for (const QueryRole role : kQueryRoles) {
    const std::size_t i = static_cast<std::size_t>(role);
    const std::string prefix = std::string("role.") + role_name(role);
    evidence[i] = topk_cross_attention(*queries[i], params_.at(prefix + ".w"),
                                       params_.at(prefix + ".b"), hc, inst.word_mask,
                                       cfg_.top_k, cfg_.n_heads);
  }

  const Tensor gated =
      label_gate(h_pair, params_.at("labels.emb"), params_.at("gate.w"), params_.at("gate.b"));

  const Tensor l_biaffine = biaffine_head(h_e1, h_e2, params_.at("biaffine.u"),
                                          params_.at("biaffine.w"), params_.at("biaffine.b"));
  const Tensor l_context = mlp_head(
      concat({evidence[0].pooled, evidence[1].pooled, evidence[2].pooled}),
      params_.at("head.ctx.w1"), params_.at("head.ctx.b1"), params_.at("head.ctx.w2"),
      params_.at("head.ctx.b2"), cfg_.dropout, training, rng);
  const Tensor l_fusion = mlp_head(
      concat({h_e1, h_e2, gated, evidence[2].pooled}), params_.at("head.fus.w1"),
      params_.at("head.fus.b1"), params_.at("head.fus.w2"), params_.at("head.fus.b2"),
      cfg_.dropout, training, rng);

  const Tensor fused_logits =
      late_fusion_logits(l_biaffine, l_context, l_fusion, params_.at("fusion.w"));
  const Tensor probs = softmax(fused_logits, 0);

  ForwardResult out;
  out.fused_logits = fused_logits;
  out.loss = cross_entropy_with_logits(fused_logits, inst.label);
  ForwardTrace& tr = out.trace;
  tr.word_count = m;
  tr.context = hc.data();
  tr.h_e1 = h_e1.data();
  tr.h_e2 = h_e2.data();
  tr.h_pair = h_pair.data();
  for (std::size_t i = 0; i < 3; ++i) {
    tr.attention[i] = evidence[i].full_weights;
    tr.topk[i] = evidence[i].selection;
  }
  tr.head_logits[0] = l_biaffine.data();
  tr.head_logits[1] = l_context.data();
  tr.head_logits[2] = l_fusion.data();
  tr.fused_probs = probs.data();
  return out;
}

ForwardTrace Model::run(const Instance& inst) const {
  return forward(inst, Mode::Eval).trace;
}

void Model::save(const std::string& path, std::uint64_t step,
                 const std::map<std::string, std::string>& extra_meta) const {
  std::map<std::string, std::string> meta = extra_meta;
  meta["config"] = config_to_text(cfg_.to_config());
  save_checkpoint(path, params_, cfg_.seed, step, meta);
}

Model Model::load(const std::string& path, Checkpoint* out_ckpt) {
  Checkpoint ckpt = load_checkpoint(path);
  const std::string* cfg_text = ckpt.find_meta("config");
  if (cfg_text == nullptr) {
    throw CompatError("checkpoint has no embedded model config: " + path);
  }
  const ModelConfig cfg = ModelConfig::from_config(parse_config_text(*cfg_text, path));
  Model model(cfg);
  restore_parameters(model.params_, ckpt);
  if (out_ckpt != nullptr) *out_ckpt = std::move(ckpt);
  return model;
}

}  // namespace tkre
