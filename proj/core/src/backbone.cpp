#include "fedprompt/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace fedprompt {

namespace {

void check_tokens(const FrozenBackbone& b, const std::vector<TokenId>& seq, const char* what) {
  for (const TokenId t : seq) {
    if (t < 0 || static_cast<std::size_t>(t) >= b.dims.vocab) {
      throw std::invalid_argument(std::string(what) + ": token id " + std::to_string(t) +
                                  " outside vocabulary of size " + std::to_string(b.dims.vocab));
    }
  }
}

void check_input(const FrozenBackbone& b, const std::vector<TokenId>& input) {
  if (input.empty()) throw std::invalid_argument("input sequence is empty");
  if (input.size() > b.dims.max_input_len) {
    throw std::invalid_argument("input length " + std::to_string(input.size()) +
                                " exceeds max input length " +
                                std::to_string(b.dims.max_input_len));
  }
  check_tokens(b, input, "input");
}

void check_target(const FrozenBackbone& b, const std::vector<TokenId>& target) {
  if (target.empty()) throw std::invalid_argument("target sequence is empty");
  if (target.size() > b.dims.max_target_len) {
    throw std::invalid_argument("target length " + std::to_string(target.size()) +
                                " exceeds max target length " +
                                std::to_string(b.dims.max_target_len));
  }
  check_tokens(b, target, "target");
}

void check_prompt(const FrozenBackbone& b, const Prompt& p) {
  if (p.weights.rows() != b.dims.embed_dim || p.weights.cols() != b.dims.prompt_len) {
    throw std::invalid_argument("prompt shape " + std::to_string(p.weights.rows()) + "x" +
                                std::to_string(p.weights.cols()) + " does not match backbone " +
                                std::to_string(b.dims.embed_dim) + "x" +
                                std::to_string(b.dims.prompt_len));
  }
}

/// Pools [prompt columns, embedded input tokens] into z (embed_dim) with the
/// pooling weights restricted to the active positions and renormalized to
/// sum 1. weights is left holding the normalized per-position values.
void pool(const FrozenBackbone& b, const Prompt& p, const std::vector<TokenId>& input,
          std::vector<double>& z, std::vector<double>& weights) {
  const std::size_t k = b.dims.prompt_len;
  const std::size_t e = b.dims.embed_dim;
  const std::size_t v = b.dims.vocab;
  const std::size_t active = k + input.size();

  weights.assign(b.pooling_weights.begin(),
                 b.pooling_weights.begin() + static_cast<std::ptrdiff_t>(active));
  double wsum = 0.0;
  for (const double w : weights) wsum += w;
  for (double& w : weights) w /= wsum;

  z.assign(e, 0.0);
  const auto pd = p.weights.data();
  for (std::size_t j = 0; j < k; ++j) {
    const double w = weights[j];
    for (std::size_t d = 0; d < e; ++d) z[d] += w * pd[d * k + j];
  }
  const auto ed = b.embeddings.data();
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double w = weights[k + i];
    const auto c = static_cast<std::size_t>(input[i]);
    for (std::size_t d = 0; d < e; ++d) z[d] += w * ed[d * v + c];
  }
}

/// Loss of one example; when grad_accum is non-null, also accumulates the
/// example's (unaveraged) prompt gradient into it.
double example_loss(const FrozenBackbone& b, const Prompt& p, const Example& ex,
                    Matrix* grad_accum) {
  check_input(b, *ex.input);
  check_target(b, *ex.target);

  const std::size_t e = b.dims.embed_dim;
  const std::size_t h = b.dims.hidden;
  const std::size_t v = b.dims.vocab;
  const std::size_t k = b.dims.prompt_len;

  std::vector<double> z, weights;
  pool(b, p, *ex.input, z, weights);

  std::vector<double> s_base(h);
  for (std::size_t r = 0; r < h; ++r) {
    double acc = b.hidden_bias[r];
    const double* row = b.hidden_weight.row_ptr(r);
    for (std::size_t d = 0; d < e; ++d) acc += row[d] * z[d];
    s_base[r] = acc;
  }

  std::vector<double> act(h), logits(v), probs(v), dz(e, 0.0), dhid(h);
  double loss = 0.0;
  const std::size_t target_len = ex.target->size();
  for (std::size_t t = 0; t < target_len; ++t) {
    for (std::size_t r = 0; r < h; ++r) act[r] = std::tanh(s_base[r] + b.position_offsets(r, t));
    for (std::size_t c = 0; c < v; ++c) {
      double acc = b.output_bias[c];
      const double* row = b.output_weight.row_ptr(c);
      for (std::size_t r = 0; r < h; ++r) acc += row[r] * act[r];
      logits[c] = acc;
    }
    double max_logit = logits[0];
    for (std::size_t c = 1; c < v; ++c) max_logit = std::max(max_logit, logits[c]);
    double sum_exp = 0.0;
    for (std::size_t c = 0; c < v; ++c) sum_exp += std::exp(logits[c] - max_logit);
    const auto y = static_cast<std::size_t>((*ex.target)[t]);
    loss += max_logit + std::log(sum_exp) - logits[y];

    if (grad_accum != nullptr) {
      for (std::size_t c = 0; c < v; ++c) probs[c] = std::exp(logits[c] - max_logit) / sum_exp;
      probs[y] -= 1.0;
      // dhid = (1 - act^2) .* (W2^T (softmax - onehot))
      std::fill(dhid.begin(), dhid.end(), 0.0);
      for (std::size_t c = 0; c < v; ++c) {
        const double pc = probs[c];
        if (pc == 0.0) continue;
        const double* row = b.output_weight.row_ptr(c);
        for (std::size_t r = 0; r < h; ++r) dhid[r] += pc * row[r];
      }
      for (std::size_t r = 0; r < h; ++r) dhid[r] *= 1.0 - act[r] * act[r];
      // dz += W1^T dhid
      for (std::size_t r = 0; r < h; ++r) {
        const double dr = dhid[r];
        const double* row = b.hidden_weight.row_ptr(r);
        for (std::size_t d = 0; d < e; ++d) dz[d] += dr * row[d];
      }
    }
  }

  if (grad_accum != nullptr) {
    // dL/dP[:, j] = normalized_weight_j * dL/dz
    for (std::size_t j = 0; j < k; ++j) {
      const double w = weights[j];
      for (std::size_t d = 0; d < e; ++d) (*grad_accum)(d, j) += w * dz[d];
    }
  }
  return loss;
}

}  // namespace

std::size_t parameter_count(const FrozenBackbone& b) {
  return b.embeddings.size() + b.hidden_weight.size() + b.hidden_bias.size() +
         b.output_weight.size() + b.output_bias.size() + b.position_offsets.size() +
         b.pooling_weights.size();
}

FrozenBackbone init_backbone(SeededRng& rng, const BackboneDims& dims) {
  if (dims.embed_dim == 0 || dims.hidden == 0 || dims.max_target_len == 0 ||
      dims.max_input_len == 0 || dims.prompt_len == 0) {
    throw std::invalid_argument("init_backbone: all dimensions must be >= 1");
  }
  if (dims.vocab < 2) {
    throw std::invalid_argument("init_backbone: vocabulary needs at least one token besides EOS");
  }
  FrozenBackbone b;
  b.dims = dims;
  b.embeddings = gaussian_matrix(rng, dims.embed_dim, dims.vocab, 1.0);
  b.hidden_weight =
      gaussian_matrix(rng, dims.hidden, dims.embed_dim, 1.0 / std::sqrt(double(dims.embed_dim)));
  b.hidden_bias.assign(dims.hidden, 0.0);
  b.output_weight =
      gaussian_matrix(rng, dims.vocab, dims.hidden, 1.0 / std::sqrt(double(dims.hidden)));
  b.output_bias.assign(dims.vocab, 0.0);
  b.position_offsets = gaussian_matrix(rng, dims.hidden, dims.max_target_len, 1.0);
  b.pooling_weights.reserve(dims.prompt_len + dims.max_input_len);
  for (std::size_t i = 0; i < dims.prompt_len + dims.max_input_len; ++i) {
    const double w = std::abs(1.0 + 0.1 * rng.next_gaussian());
    b.pooling_weights.push_back(std::max(w, 0.1));
  }
  return b;
}

Example training_example(const Instance& inst) {
  if (inst.targets.empty()) throw std::invalid_argument("instance has no targets");
  return {&inst.input, &inst.targets.front()};
}

double forward_loss(const FrozenBackbone& b, const Prompt& p, const Batch& batch) {
  if (batch.empty()) throw std::invalid_argument("forward_loss: empty batch");
  check_prompt(b, p);
  double total = 0.0;
  for (const Example& ex : batch) total += example_loss(b, p, ex, nullptr);
  return total / static_cast<double>(batch.size());
}

Matrix grad_prompt(const FrozenBackbone& b, const Prompt& p, const Batch& batch) {
  if (batch.empty()) throw std::invalid_argument("grad_prompt: empty batch");
  check_prompt(b, p);
  Matrix grad(b.dims.embed_dim, b.dims.prompt_len);
  for (const Example& ex : batch) example_loss(b, p, ex, &grad);
  scale_in_place(grad, 1.0 / static_cast<double>(batch.size()));
  return grad;
}

std::vector<TokenId> decode(const FrozenBackbone& b, const Prompt& p,
                            const std::vector<TokenId>& input) {
  check_prompt(b, p);
  check_input(b, input);

  const std::size_t e = b.dims.embed_dim;
  const std::size_t h = b.dims.hidden;
  const std::size_t v = b.dims.vocab;

  std::vector<double> z, weights;
  pool(b, p, input, z, weights);

  std::vector<double> s_base(h);
  for (std::size_t r = 0; r < h; ++r) {
    double acc = b.hidden_bias[r];
    const double* row = b.hidden_weight.row_ptr(r);
    for (std::size_t d = 0; d < e; ++d) acc += row[d] * z[d];
    s_base[r] = acc;
  }

  std::vector<TokenId> out;
  std::vector<double> act(h);
  for (std::size_t t = 0; t < b.dims.max_target_len; ++t) {
    for (std::size_t r = 0; r < h; ++r) act[r] = std::tanh(s_base[r] + b.position_offsets(r, t));
    std::size_t best = 0;
    double best_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < v; ++c) {
      double acc = b.output_bias[c];
      const double* row = b.output_weight.row_ptr(c);
      for (std::size_t r = 0; r < h; ++r) acc += row[r] * act[r];
      if (acc > best_logit) {  // strict: ties keep the lowest token id
        best_logit = acc;
        best = c;
      }
    }
    if (static_cast<TokenId>(best) == kEosToken) break;
    out.push_back(static_cast<TokenId>(best));
  }
  return out;
}

Prompt init_prompt_gaussian(SeededRng& rng, const FrozenBackbone& b, double std_dev) {
  return {gaussian_matrix(rng, b.dims.embed_dim, b.dims.prompt_len, std_dev)};
}

Prompt init_prompt_word(SeededRng& rng, const FrozenBackbone& b) {
  if (b.dims.prompt_len > b.dims.vocab) {
    throw std::invalid_argument("init_prompt_word: prompt length " +
                                std::to_string(b.dims.prompt_len) +
                                " exceeds vocabulary size " + std::to_string(b.dims.vocab));
  }
  const auto cols = sample_without_replacement(rng, b.dims.vocab, b.dims.prompt_len);
  Prompt p{Matrix(b.dims.embed_dim, b.dims.prompt_len)};
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (std::size_t d = 0; d < b.dims.embed_dim; ++d) {
      p.weights(d, j) = b.embeddings(d, cols[j]);
    }
  }
  return p;
}

}  // namespace fedprompt
