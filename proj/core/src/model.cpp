#include "xlft/model.hpp"

#include <cmath>
#include <json.hpp>

#include "xlft/error.hpp"
#include "xlft/rng.hpp"

namespace xlft {

std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw Error(ErrorCategory::config, "unknown activation '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCategory::config, "model config: " + msg); };
  if (vocab_size < 2) fail("vocab_size must be at least 2");
  if (num_labels < 2) fail("num_labels must be at least 2");
  if (feat_dim == 0 || num_regions == 0 || hidden_dim == 0 || num_layers == 0 ||
      num_heads == 0 || ffn_dim == 0 || max_question_len == 0) {
    fail("all dimensions must be positive");
  }
  if (hidden_dim % num_heads != 0) {
    fail("hidden_dim " + std::to_string(hidden_dim) + " is not divisible by num_heads " +
         std::to_string(num_heads));
  }
}

std::string ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["vocab_size"] = vocab_size;
  j["num_labels"] = num_labels;
  j["feat_dim"] = feat_dim;
  j["num_regions"] = num_regions;
  j["hidden_dim"] = hidden_dim;
  j["num_layers"] = num_layers;
  j["num_heads"] = num_heads;
  j["ffn_dim"] = ffn_dim;
  j["max_question_len"] = max_question_len;
  j["ffn_activation"] = std::string(to_string(ffn_activation));
  j["seed"] = seed;
  return j.dump(2);
}

ModelConfig ModelConfig::from_json(std::string_view text) {
  ModelConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& [key, value] : j.items()) {
      if (key == "vocab_size") c.vocab_size = value.get<std::size_t>();
      else if (key == "num_labels") c.num_labels = value.get<std::size_t>();
      else if (key == "feat_dim") c.feat_dim = value.get<std::size_t>();
      else if (key == "num_regions") c.num_regions = value.get<std::size_t>();
      else if (key == "hidden_dim") c.hidden_dim = value.get<std::size_t>();
      else if (key == "num_layers") c.num_layers = value.get<std::size_t>();
      else if (key == "num_heads") c.num_heads = value.get<std::size_t>();
      else if (key == "ffn_dim") c.ffn_dim = value.get<std::size_t>();
      else if (key == "max_question_len") c.max_question_len = value.get<std::size_t>();
      else if (key == "ffn_activation") c.ffn_activation = activation_from_string(value.get<std::string>());
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw Error(ErrorCategory::config, "model config: unknown field '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::config, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

std::string layer_prefix(std::size_t layer) { return "encoder.layer" + std::to_string(layer) + "."; }

const char* const kLinearSublayers[] = {"attn.qkv", "attn.out", "ffn.in", "ffn.out"};

Tensor normal_tensor(RngStream& rng, Shape shape, double stddev) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.normal(0.0, stddev);
  return t;
}

void add_linear(ParamSet& p, RngStream& rng, const std::string& name, std::size_t in,
                std::size_t out) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(in + out));
  p.add(name + ".weight", normal_tensor(rng, {in, out}, stddev));
  p.add(name + ".bias", Tensor({out}));
}

void add_norm(ParamSet& p, const std::string& name, std::size_t dim) {
  p.add(name + ".gain", Tensor({dim}, 1.0));
  p.add(name + ".shift", Tensor({dim}));
}

Var linear(Graph& g, const std::string& name, Var x) {
  return ops::add_bias(ops::matmul(x, g.param(name + ".weight")), g.param(name + ".bias"));
}

Var norm(Graph& g, const std::string& name, Var x) {
  return ops::layer_norm(x, g.param(name + ".gain"), g.param(name + ".shift"));
}

void check_batch(const ModelConfig& c, const MultimodalBatch& b) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCategory::shape, "forward: " + msg); };
  if (b.batch_size == 0) fail("empty batch");
  if (b.question_len == 0 || b.question_len > c.max_question_len) {
    fail("question_len " + std::to_string(b.question_len) + " outside [1, " +
         std::to_string(c.max_question_len) + "]");
  }
  if (b.token_ids.size() != b.batch_size * b.question_len) fail("token_ids size mismatch");
  for (auto id : b.token_ids) {
    if (id >= c.vocab_size) fail("token id " + std::to_string(id) + " >= vocab_size");
  }
  const Shape want{b.batch_size * c.num_regions, c.feat_dim};
  if (b.image_feats.shape() != want) {
    fail("image_feats " + shape_to_string(b.image_feats.shape()) + ", expected " +
         shape_to_string(want));
  }
  if (!b.labels.empty()) {
    if (b.labels.size() != b.batch_size) fail("labels size mismatch");
    for (auto y : b.labels) {
      if (y >= c.num_labels) fail("label " + std::to_string(y) + " >= num_labels");
    }
  }
}

}  // namespace

ParamSet init_model(const ModelConfig& c) {
  c.validate();
  RngStream rng(c.seed, "init_model");
  ParamSet p;
  const std::size_t H = c.hidden_dim;
  p.add("embeddings.token", normal_tensor(rng, {c.vocab_size, H}, 0.5));
  p.add("embeddings.cls", normal_tensor(rng, {1, H}, 0.5));
  p.add("embeddings.position", normal_tensor(rng, {1 + c.max_question_len, H}, 0.1));
  p.add("embeddings.region", normal_tensor(rng, {c.num_regions, H}, 0.1));
  add_linear(p, rng, "embeddings.image_proj", c.feat_dim, H);
  add_norm(p, "embeddings.norm", H);
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    const std::string pre = layer_prefix(l);
    add_linear(p, rng, pre + "attn.qkv", H, 3 * H);
    add_linear(p, rng, pre + "attn.out", H, H);
    add_norm(p, pre + "norm1", H);
    add_linear(p, rng, pre + "ffn.in", H, c.ffn_dim);
    add_linear(p, rng, pre + "ffn.out", c.ffn_dim, H);
    add_norm(p, pre + "norm2", H);
  }
  add_linear(p, rng, "classifier.hidden", H, H);
  add_linear(p, rng, "classifier.out", H, c.num_labels);
  return p;
}

Var forward(Graph& g, const ModelConfig& c, const MultimodalBatch& b) {
  check_batch(c, b);
  const std::size_t B = b.batch_size, L = b.question_len, R = c.num_regions;
  const std::size_t T = 1 + L + R;

  Var tokens = ops::gather_rows(g.param("embeddings.token"), b.token_ids);
  Var regions = linear(g, "embeddings.image_proj", g.constant(b.image_feats));
  const Var parts[] = {g.param("embeddings.cls"), tokens, regions};
  Var stacked = ops::concat_rows(parts);

  // Per example: [CLS, question tokens, image regions].
  std::vector<std::size_t> layout, positions;
  std::vector<std::uint8_t> key_mask;
  layout.reserve(B * T);
  positions.reserve(B * T);
  key_mask.reserve(B * T);
  const std::size_t region_pos0 = 1 + c.max_question_len;
  for (std::size_t e = 0; e < B; ++e) {
    layout.push_back(0);
    positions.push_back(0);
    key_mask.push_back(1);
    for (std::size_t i = 0; i < L; ++i) {
      layout.push_back(1 + e * L + i);
      positions.push_back(1 + i);
      key_mask.push_back(b.token_ids[e * L + i] != kPadToken ? 1 : 0);
    }
    for (std::size_t r = 0; r < R; ++r) {
      layout.push_back(1 + B * L + e * R + r);
      positions.push_back(region_pos0 + r);
      key_mask.push_back(1);
    }
  }
  const Var pos_tables[] = {g.param("embeddings.position"), g.param("embeddings.region")};
  Var pos = ops::gather_rows(ops::concat_rows(pos_tables), std::move(positions));
  Var x = ops::add(ops::gather_rows(stacked, std::move(layout)), pos);
  x = norm(g, "embeddings.norm", x);

  for (std::size_t l = 0; l < c.num_layers; ++l) {
    const std::string pre = layer_prefix(l);
    Var attn = ops::self_attention(linear(g, pre + "attn.qkv", x), key_mask, B, T, c.num_heads);
    x = norm(g, pre + "norm1", ops::add(x, linear(g, pre + "attn.out", attn)));
    Var h = linear(g, pre + "ffn.in", x);
    h = c.ffn_activation == Activation::relu ? ops::relu(h) : ops::tanh(h);
    x = norm(g, pre + "norm2", ops::add(x, linear(g, pre + "ffn.out", h)));
  }

  std::vector<std::size_t> cls_rows(B);
  for (std::size_t e = 0; e < B; ++e) cls_rows[e] = e * T;
  Var pooled = ops::gather_rows(x, std::move(cls_rows));
  Var hidden = ops::tanh(linear(g, "classifier.hidden", pooled));
  return linear(g, "classifier.out", hidden);
}

Tensor predict_logits(const ParamSet& params, const ModelConfig& config,
                      const MultimodalBatch& batch) {
  Graph g(params);
  return forward(g, config, batch).value();
}

std::vector<std::string> prunable_param_names(const ParamSet& params) {
  std::vector<std::string> out;
  for (const auto& e : params) {
    const std::string& n = e.name;
    if (n.rfind("encoder.layer", 0) != 0) continue;
    for (const char* sub : kLinearSublayers) {
      const std::string s = std::string(".") + sub + ".";
      const auto pos = n.find(s);
      if (pos == std::string::npos) continue;
      const std::string tail = n.substr(pos + s.size());
      if (tail == "weight" || tail == "bias") out.push_back(n);
    }
  }
  return out;
}

}  // namespace xlft
