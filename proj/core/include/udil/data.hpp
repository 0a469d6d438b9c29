#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "udil/diff.hpp"
#include "udil/rng.hpp"

namespace udil {

// Labeled samples of one domain. Rows of `inputs` pair with `labels`.
struct LabeledSet {
  Matrix inputs;
  std::vector<int> labels;
  int domain_id = 1;
  int num_classes = 2;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  Index input_dim() const { return inputs.cols(); }

  // Throws IngestionError on row/label count mismatch or out-of-range labels.
  void validate() const;
  // Rows at `rows`, in the given order.
  LabeledSet subset(std::span<const std::size_t> rows) const;
};

struct DomainSplit {
  LabeledSet train;
  LabeledSet test;
};

// Ordered domains 1..T sharing the class count and input dimension.
struct DomainStream {
  std::vector<DomainSplit> domains;
  int num_classes = 2;
  Index input_dim = 0;

  std::size_t size() const { return domains.size(); }
  void validate() const;
  // FNV-1a over all inputs/labels; identifies a dataset across runs.
  std::uint64_t fingerprint() const;
};

// HD-Balls: per domain a mean mu uniform on the unit sphere in R^dim,
// x ~ N(mu, sigma^2 I), label 1 iff <x, mu> > 1, first 80% train.
DomainStream gen_hd_balls(std::uint64_t seed, int n_domains, int n_per_domain, int dim, double sigma);

// HD-Balls labeling rule; the tie <x,mu> == 1 maps to 0.
int hd_balls_label(const RowVector& x, const RowVector& mu);

// Pixel permutations: domain t uses its own fixed permutation (domain 1
// included) on both splits. If `train_per_domain` > 0 each domain keeps a
// random subset of that many training images; likewise for test.
DomainStream permuted_stream(const LabeledSet& base_train, const LabeledSet& base_test, int n_domains,
                             std::uint64_t seed, std::size_t train_per_domain = 0,
                             std::size_t test_per_domain = 0);

// Applies `perm` to the columns: out[:, j] = in[:, perm[j]].
Matrix permute_columns(const Matrix& in, std::span<const std::size_t> perm);
std::vector<std::size_t> inverse_permutation(std::span<const std::size_t> perm);

// Rotations: each image of domain t is rotated about its center by its own
// angle drawn uniformly from [9(t-1), 9t) degrees.
DomainStream rotated_stream(const LabeledSet& base_train, const LabeledSet& base_test, int n_domains,
                            std::uint64_t seed, std::size_t train_per_domain = 0,
                            std::size_t test_per_domain = 0);

// Rotates a row-major side x side image counter-clockwise by `degrees`
// around its center using bilinear interpolation; samples outside the frame
// read as zero. Throws ConfigError unless pixels.size() is a perfect square.
std::vector<double> rotate_image(std::span<const double> pixels, double degrees);

// Angle range of domain t (1-based), in degrees: [lo, hi).
std::pair<double, double> rotation_range(int t);

// Binary stream layout (little-endian):
//   "UDILDS01" | u32 T | u32 K | u32 n |
//   per domain, per split (train, test): u32 rows | i32 domain_id |
//       rows*n f64 inputs (row-major) | rows i32 labels
void write_stream(const DomainStream& s, const std::filesystem::path& path);
DomainStream read_stream(const std::filesystem::path& path);

}  // namespace udil
