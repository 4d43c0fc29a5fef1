#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fedprompt/matrix.hpp"
#include "fedprompt/rng.hpp"

namespace fedprompt {

using TokenId = std::int32_t;

/// Token 0 terminates every target sequence and is never produced inside
/// one. Decoding stops at (and excludes) the first occurrence.
inline constexpr TokenId kEosToken = 0;

/// One (query, targets) pair plus its position in the task hierarchy.
struct Instance {
  std::vector<TokenId> input;
  std::vector<std::vector<TokenId>> targets;  // each nonempty, EOS-terminated
  std::int32_t task_id = 0;
  std::int32_t task_type_id = 0;

  friend bool operator==(const Instance&, const Instance&) = default;
};

struct BackboneDims {
  std::size_t embed_dim = 64;     // e
  std::size_t vocab = 32;         // v, token 0 reserved as EOS
  std::size_t hidden = 64;        // h
  std::size_t max_target_len = 6; // output positions
  std::size_t max_input_len = 12; // input tokens
  std::size_t prompt_len = 10;    // k

  friend bool operator==(const BackboneDims&, const BackboneDims&) = default;
};

/// The trainable soft prompt: embed_dim x prompt_len, prepended in
/// embedding space. The only learnable object in the system.
struct Prompt {
  Matrix weights;

  friend bool operator==(const Prompt&, const Prompt&) = default;
};

/// Frozen surrogate language model. An input sequence is embedded, the
/// prompt columns are prepended, and the columns are pooled into a single
/// vector by fixed positive weights (renormalized over the active
/// positions). A tanh layer with a per-output-position offset and a linear
/// vocabulary head produce the logits for each target position. Every
/// parameter is fixed at construction; gradients flow only to the prompt.
struct FrozenBackbone {
  BackboneDims dims;
  Matrix embeddings;                    // embed_dim x vocab
  Matrix hidden_weight;                 // hidden x embed_dim
  std::vector<double> hidden_bias;      // hidden
  Matrix output_weight;                 // vocab x hidden
  std::vector<double> output_bias;      // vocab
  Matrix position_offsets;              // hidden x max_target_len
  std::vector<double> pooling_weights;  // prompt_len + max_input_len, all > 0
};

/// Number of frozen scalars in the model.
std::size_t parameter_count(const FrozenBackbone& b);

/// Draw order: embeddings (std 1), hidden_weight (std 1/sqrt(embed_dim)),
/// output_weight (std 1/sqrt(hidden)), position_offsets (std 1), pooling
/// weights (|Normal(1, 0.1^2)| clamped below at 0.1). Biases start at zero.
FrozenBackbone init_backbone(SeededRng& rng, const BackboneDims& dims);

/// One (input, target) training pair; non-owning.
struct Example {
  const std::vector<TokenId>* input = nullptr;
  const std::vector<TokenId>* target = nullptr;
};
using Batch = std::vector<Example>;

/// Training pair for an instance: its input against the first target.
/// Scoring, by contrast, considers every target.
Example training_example(const Instance& inst);

/// Mean over the batch of the per-example loss, where the per-example loss
/// sums -log softmax(u_t)[y_t] over all target positions t.
double forward_loss(const FrozenBackbone& b, const Prompt& p, const Batch& batch);

/// Exact analytic gradient of forward_loss with respect to the prompt,
/// shape embed_dim x prompt_len.
Matrix grad_prompt(const FrozenBackbone& b, const Prompt& p, const Batch& batch);

/// Greedy decoding: per position emit the argmax token (ties go to the
/// lowest token id); stop at and exclude the first EOS. Output length is at
/// most max_target_len.
std::vector<TokenId> decode(const FrozenBackbone& b, const Prompt& p,
                            const std::vector<TokenId>& input);

/// Prompt entries i.i.d. Normal(0, std_dev^2).
Prompt init_prompt_gaussian(SeededRng& rng, const FrozenBackbone& b, double std_dev);

/// Prompt columns are prompt_len distinct columns sampled without
/// replacement from the token embedding table.
Prompt init_prompt_word(SeededRng& rng, const FrozenBackbone& b);

}  // namespace fedprompt
