#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "udil/diff.hpp"
#include "udil/rng.hpp"

namespace udil {

// What the last layer emits.
//   kLogits  - raw affine output
//   kSoftmax - row-wise probability vectors
//   kHidden  - ReLU features (the MLP is the front half of a larger network)
enum class OutputHead { kLogits, kSoftmax, kHidden };

// Whether forward() records parameter gradients. kFrozen evaluates through
// copies of the weights so a frozen network (d in the encoder update, H_{t-1})
// never accumulates gradient while its inputs still can.
enum class ParamMode { kTrack, kFrozen };

struct DenseLayer {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out
};

class Mlp {
 public:
  Mlp() = default;
  // dims = {in, hidden..., out}; at least two entries. Weights are drawn
  // uniformly from +-sqrt(6 / (fan_in + fan_out)), biases zero.
  Mlp(const std::vector<std::size_t>& dims, OutputHead head, Rng& rng);

  std::size_t in_dim() const;
  std::size_t out_dim() const;
  OutputHead head() const { return head_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  // Applies the output head. Throws DimensionError naming the offending layer.
  Var forward(const Var& x, ParamMode mode = ParamMode::kTrack);
  // Output before the head (for kSoftmax: logits; otherwise same as forward).
  Var forward_logits(const Var& x, ParamMode mode = ParamMode::kTrack);
  // Row-wise log-probabilities; only valid for kSoftmax heads.
  Var forward_log_probs(const Var& x, ParamMode mode = ParamMode::kTrack);

  // Graph-free evaluation.
  Matrix predict(const Matrix& x) const;
  Matrix predict_logits(const Matrix& x) const;

  std::vector<Tensor*> parameters();
  void zero_grad();
  // Order-sensitive FNV hash over parameter bytes.
  std::uint64_t checksum() const;

 private:
  void check_input(Index cols) const;

  std::vector<DenseLayer> layers_;
  OutputHead head_ = OutputHead::kLogits;
};

// h = p o e: encoder e (ReLU features) followed by a softmax predictor p.
struct Classifier {
  Mlp encoder;
  Mlp predictor;

  Var log_probs(const Var& x, ParamMode mode = ParamMode::kTrack) {
    return predictor.forward_log_probs(encoder.forward(x, mode), mode);
  }
  Matrix embed(const Matrix& x) const { return encoder.predict(x); }
  Matrix predict(const Matrix& x) const { return predictor.predict(encoder.predict(x)); }

  std::vector<Tensor*> parameters() {
    auto ps = encoder.parameters();
    for (Tensor* p : predictor.parameters()) ps.push_back(p);
    return ps;
  }
  std::uint64_t checksum() const { return encoder.checksum() ^ (predictor.checksum() * 0x9e3779b97f4a7c15ULL); }
};

// Row-wise argmax.
std::vector<int> argmax_rows(const Matrix& m);

}  // namespace udil
