#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "fixhead/head.hpp"
#include "fixhead/types.hpp"

namespace fixhead {

struct DenseLayer {
  Matrix w;  // out x in
  Vector b;  // out
  Matrix grad_w;
  Vector grad_b;
  Matrix vel_w;
  Vector vel_b;
};

enum class LossKind { SoftmaxCrossEntropy, Cosine };

struct SgdConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  // (epoch, multiplier) pairs, ascending; the last entry at or before the
  // current epoch applies.
  std::vector<std::pair<Index, double>> lr_schedule;
};

double scheduled_lr(const SgdConfig& cfg, Index epoch);

// Dense stack with ReLU between consecutive layers (none after the last),
// feeding a classification head. Gradient and momentum buffers live next to
// the parameters; forward caches what backward needs.
struct Mlp {
  std::vector<DenseLayer> layers;
  Head head;
  LossKind loss = LossKind::SoftmaxCrossEntropy;

  // head buffers
  double grad_alpha = 0.0;
  double vel_alpha = 0.0;
  Vector grad_bias;
  Vector vel_bias;
  Matrix grad_head_w;  // learned mode only
  Matrix vel_head_w;

  std::uint64_t normalize_guard_hits = 0;

  // forward caches: act[0] is the input, act[i+1] the output of layer i
  // (post-ReLU except for the last layer); pre[i] the pre-activation.
  std::vector<Vector> pre;
  std::vector<Vector> act;
  bool forward_valid = false;
};

Mlp make_mlp(Index input_dim, const std::vector<Index>& hidden_widths, Head head,
             LossKind loss = LossKind::SoftmaxCrossEntropy);

struct ForwardResult {
  Vector representation;  // last hidden layer
  Vector logits;
};

ForwardResult forward(Mlp& mlp, const Vector& z);

// Accumulates gradients for one sample into the grad buffers and returns the
// sample loss. Requires a prior forward on the same sample.
double backward(Mlp& mlp, Index target);

void zero_grads(Mlp& mlp);

// v <- momentum * v + (grad/batch_size + weight_decay * param);
// param <- param - lr * v. Applies to every trainable parameter: layer
// weights and biases, head bias, alpha when trainable, and the learned head
// matrix. Fixed class directions are never touched.
void sgd_step(Mlp& mlp, const SgdConfig& cfg, Index batch_size);

// He-normal weights, zero biases, alpha reset to 1 when trainable, zeroed
// momentum and gradient buffers. Deterministic per seed.
void init_params(Mlp& mlp, std::uint64_t seed);

std::uint64_t parameter_checksum(const Mlp& mlp);

// Flat binary checkpoint: versioned header, then parameters in declaration
// order as 64-bit little-endian floats.
void save_checkpoint(const Mlp& mlp, const std::filesystem::path& path);
Mlp load_checkpoint(const std::filesystem::path& path);

}  // namespace fixhead
